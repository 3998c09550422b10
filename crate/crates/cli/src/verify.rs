//! Self-check suite run on the configured grid. The report holds only
//! computed values, so two runs with the same seed produce identical bytes.

use std::fmt::Write as _;

use anyhow::Result;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use nlwave_core::dn::{dn_matrix, reciprocity_asymmetry, Model};
use nlwave_core::inversion::expansion::{linearized_solution, loglog_slope, SimulatedOracle};
use nlwave_core::inversion::potential::{bump_profiles, target_profile};
use nlwave_core::runge::{alpha_sweep, RungeNorm, RungeSystem};
use nlwave_core::spectral::identity_deviation;
use nlwave_core::wave::{
    data_norm, energy_constant, energy_sup, solve_linear_modal, solve_with_potential_picard, very_weak_residual,
    CauchyData, ExteriorControl, SpaceTimeField,
};
use nlwave_core::{EllipticSolver, Potential, SpectralBasis, Window};

use crate::commands::{context, smooth_field};
use crate::config::ExperimentConfig;
use crate::output::{Staging, Timings};

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tol: f64) -> Self {
        Self { name, value, tol }
    }
    fn passed(&self) -> bool {
        self.value <= self.tol
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Run every check; returns the summary and whether all passed.
pub fn verify(cfg: &ExperimentConfig, st: &mut Staging, t: &mut Timings) -> Result<(Value, bool)> {
    let ctx = context(cfg, t)?;
    let g = &ctx.grid;
    let h = g.h();
    let n = g.n_int();
    let b = &ctx.basis;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    checks.push(Check::at_most("operator_symmetry", ctx.op.asymmetry(), 1e-12));
    let solver = EllipticSolver::new(&ctx.op)?;
    checks.push(Check::at_most("gram_l2", identity_deviation(&b.gram_l2()), 1e-10));
    checks.push(Check::at_most("gram_hs", identity_deviation(&b.gram_hs(&ctx.op)), 1e-8));
    checks.push(Check::at_most(
        "gram_dual",
        identity_deviation(&b.gram_dual(&solver)),
        1e-8,
    ));

    // Spectral against variational dual norm on a random vector.
    let gv = DVector::from_vec(random_coeffs(&mut rng, n));
    let (modal, var) = (b.dual_norm(&gv)?, solver.dual_norm(&gv)?);
    checks.push(Check::at_most("dual_norm", (modal - var).abs() / var, 1e-10));

    // Energy estimate for random smooth data and source.
    let data = CauchyData::new(
        smooth_field(b, &random_coeffs(&mut rng, 6)),
        smooth_field(b, &random_coeffs(&mut rng, 6)),
    )?;
    let f_space = smooth_field(b, &random_coeffs(&mut rng, 4));
    let omega = rng.random_range(0.5..4.0);
    let src = SpaceTimeField::separable(g, &f_space, |t| (omega * t).cos())?;
    let sol = t.run("modal", || solve_linear_modal(b, &data, Some(&src), g))?;
    let ratio = energy_sup(&sol, b)? / (energy_constant(g.t_final()) * data_norm(&data, Some(&src), b)?);
    checks.push(Check::at_most("energy_ratio", ratio, 1.0));

    // Constant potential: Picard against the shifted modal solution. Picard
    // integrates `-q u` with the trapezoid rule, so agreement is O(dt²).
    let q0 = 1.5;
    let q = Potential::constant(n, q0);
    let (pic, _) = t.run("picard", || {
        solve_with_potential_picard(b, &q, &data, Some(&src), g, &ctx.picard)
    })?;
    let shifted = SpectralBasis::from_symmetric(&(ctx.op.interior_owned() + DMatrix::identity(n, n) * q0), h)?;
    let exact = solve_linear_modal(&shifted, &data, Some(&src), g)?;
    let err = (pic.u.values() - exact.u.values()).amax() / exact.u.values().amax();
    checks.push(Check::at_most("picard_constant_q", err, 1e-4));

    // Very-weak residual of the Picard solution over a small test battery.
    let mut vw: f64 = 0.0;
    for k in 0..3 {
        let psi = b.mode(k);
        let test = SpaceTimeField::separable(g, &psi, |t| (k as f64 * t).cos())?;
        vw = vw.max(very_weak_residual(
            &pic.u,
            &data,
            Some(&src),
            Some(&q),
            &test,
            b,
            g,
            &ctx.picard,
        )?);
    }
    checks.push(Check::at_most("very_weak_residual", vw, 1e-8));

    // DN reciprocity and linearity for the configured potential.
    let qm = Model::Potential(cfg.potential(g)?);
    let controls = ExteriorControl::tensor_basis(g, Window::W1, 2)?;
    let tests = ExteriorControl::tensor_basis(g, Window::W2, 2)?;
    let asym = t.run("reciprocity", || reciprocity_asymmetry(&ctx, &qm, &controls, &tests))?;
    checks.push(Check::at_most("dn_reciprocity", asym, 1e-10));
    let rev: Vec<ExteriorControl> = tests.iter().map(|c| c.time_reverse()).collect();
    let (a, c) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mix = ExteriorControl::combine(&controls[..2], &DVector::from_vec(vec![a, c]))?;
    let d_basis = dn_matrix(&ctx, &qm, &controls[..2], &rev)?;
    let d_mix = dn_matrix(&ctx, &qm, &[mix], &rev)?;
    let expect = d_basis.values.row(0) * a + d_basis.values.row(1) * c;
    let lin = (d_mix.values.row(0) - &expect).amax() / expect.amax().max(f64::MIN_POSITIVE);
    checks.push(Check::at_most("dn_linearity", lin, 1e-10));

    // Runge misfit is non-increasing as alpha decreases.
    let basis = ExteriorControl::tensor_basis(g, Window::W1, 2)?;
    let sys = t.run("runge", || {
        RungeSystem::new(&ctx, &Potential::zero(n), basis, RungeNorm::L2)
    })?;
    let profile = bump_profiles(&ctx, 3).swap_remove(1);
    let target = SpaceTimeField::separable(g, &profile, |s| target_profile(s, g.t_final()))?;
    let rows = alpha_sweep(&ctx, &sys, &target, &[1e-2, 1e-4, 1e-6, 1e-8])?;
    let worst = rows
        .windows(2)
        .map(|w| (w[1].residual - w[0].residual) / w[0].residual)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("runge_alpha_monotone", worst, 1e-12));

    // Remainder of the linearization decays like eps^(1 + r1).
    let f = cfg.nonlinearity(g)?;
    let r1 = f.exponents().first().copied().unwrap_or(1.0);
    let oracle = SimulatedOracle { ctx: &ctx, model: &f };
    let control = ExteriorControl::tensor_bump(g, Window::W1, 1, 1)?;
    let eps = [2f64.powi(-6), 2f64.powi(-7), 2f64.powi(-8)];
    let rem = t.run("remainder", || {
        eps.iter()
            .map(|&e| linearized_solution(&ctx, &oracle, &control, e).map(|l| l.remainder_norm))
            .collect::<nlwave_core::Result<Vec<_>>>()
    })?;
    let slope = loglog_slope(&eps, &rem);
    checks.push(Check::at_most("remainder_slope_gap", (slope - (1.0 + r1)).abs(), 0.1));

    let mut report = String::new();
    let mut all = true;
    for c in &checks {
        let ok = c.passed();
        all &= ok;
        writeln!(
            report,
            "{} {} {:.6e} {:.1e}",
            c.name,
            if ok { "PASS" } else { "FAIL" },
            c.value,
            c.tol
        )?;
    }
    st.write("verify_report.txt", report.as_bytes())?;
    print!("{report}");
    let summary = json!({
        "passed": all,
        "checks": checks
            .iter()
            .map(|c| json!({ "name": c.name, "value": c.value, "tol": c.tol, "passed": c.passed() }))
            .collect::<Vec<_>>(),
    });
    Ok((summary, all))
}
