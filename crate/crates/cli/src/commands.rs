//! Subcommand pipelines. Each writes its artifacts through [`Staging`] and
//! returns a JSON summary for the manifest.

use std::io::Write;

use anyhow::{bail, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use nlwave_core::dn::{dn_matrix, reciprocity_asymmetry, DnMeasurement, ForwardContext, Model};
use nlwave_core::inversion::expansion::{
    linear_response, linearized_solution, loglog_slope, recover_expansion, sample_ladder, SimulatedOracle,
};
use nlwave_core::inversion::potential::{
    bump_profiles, recover_potential, relative_l2, target_profile, PotentialRecoveryOptions,
};
use nlwave_core::runge::{alpha_sweep, basis_sweep, RungeNorm, RungeSystem, SweepRow};
use nlwave_core::spectral::identity_deviation;
use nlwave_core::wave::{
    modal_field, solve_newmark, solve_with_potential_picard, CauchyData, ExteriorControl, Reaction, SpaceTimeField,
};
use nlwave_core::{EllipticSolver, Potential, Window};

use crate::config::{ExperimentConfig, ModelKind, NormKind, TrajectoryFormat};
use crate::output::{Staging, Timings};

pub fn context(cfg: &ExperimentConfig, t: &mut Timings) -> Result<ForwardContext> {
    let grid = cfg.grid()?;
    Ok(t.run("assemble", || ForwardContext::new(grid, cfg.operator.s))?)
}

fn model(cfg: &ExperimentConfig, ctx: &ForwardContext) -> Result<Model> {
    Ok(match cfg.model.kind {
        ModelKind::Potential => Model::Potential(cfg.potential(&ctx.grid)?),
        ModelKind::Nonlinear => Model::Nonlinear(cfg.nonlinearity(&ctx.grid)?),
    })
}

fn control_bases(cfg: &ExperimentConfig, ctx: &ForwardContext) -> Result<(Vec<ExteriorControl>, Vec<ExteriorControl>)> {
    let controls = ExteriorControl::tensor_basis(&ctx.grid, Window::W1, cfg.controls.n_freq)?;
    let tests = ExteriorControl::tensor_basis(&ctx.grid, Window::W2, cfg.controls.n_freq)?
        .into_iter()
        .map(|t| t.time_reverse())
        .collect();
    Ok((controls, tests))
}

pub fn eig(cfg: &ExperimentConfig, st: &mut Staging, t: &mut Timings) -> Result<Value> {
    let ctx = context(cfg, t)?;
    let solver = EllipticSolver::new(&ctx.op)?;
    let b = &ctx.basis;
    let l2 = identity_deviation(&b.gram_l2());
    let hs = identity_deviation(&b.gram_hs(&ctx.op));
    let dual = identity_deviation(&b.gram_dual(&solver));
    let mut w = st.create("spectra.csv")?;
    b.write_spectrum_csv(&mut w)?;
    w.flush()?;
    println!(
        "lambda_1 = {:.6e}, lambda_N = {:.6e}",
        b.lambda(0),
        b.lambda(b.len() - 1)
    );
    println!("Gram deviation from identity: L2 {l2:.3e}, Hs {hs:.3e}, dual {dual:.3e}");
    Ok(json!({
        "lambda_min": b.lambda(0),
        "lambda_max": b.lambda(b.len() - 1),
        "gram_deviation": { "l2": l2, "hs": hs, "dual": dual },
        "operator_asymmetry": ctx.op.asymmetry(),
    }))
}

pub fn solve(cfg: &ExperimentConfig, st: &mut Staging, t: &mut Timings) -> Result<Value> {
    let ctx = context(cfg, t)?;
    let g = &ctx.grid;
    let n = g.n_int();
    let sc = &cfg.solve;
    if sc.u0_modes.len() > n || sc.u1_modes.len() > n {
        bail!("solve: more modal coefficients than interior nodes");
    }
    let data = CauchyData::new(
        modal_field(&ctx.basis, &sc.u0_modes),
        modal_field(&ctx.basis, &sc.u1_modes),
    )?;
    let source = if sc.source_amplitude != 0.0 {
        let (a, w) = (sc.source_amplitude, sc.source_freq);
        Some(SpaceTimeField::separable(g, &ctx.basis.mode(0), |t| a * (w * t).cos())?)
    } else {
        None
    };
    let mut summary = json!({});
    let u = match model(cfg, &ctx)? {
        Model::Potential(q) => {
            let (sol, rep) = t.run("picard", || {
                solve_with_potential_picard(&ctx.basis, &q, &data, source.as_ref(), g, &ctx.picard)
            })?;
            summary["picard"] = serde_json::to_value(&rep)?;
            sol.u
        }
        Model::Nonlinear(f) => {
            let reaction = if f.is_zero() {
                Reaction::None
            } else {
                Reaction::Nonlinear(&f)
            };
            t.run("newmark", || {
                solve_newmark(&ctx.op, reaction, None, &data, source.as_ref(), g)
            })?
        }
    };
    if matches!(sc.format, TrajectoryFormat::Csv | TrajectoryFormat::Both) {
        let mut w = st.create("trajectory.csv")?;
        u.write_csv(g, &mut w)?;
        w.flush()?;
    }
    if matches!(sc.format, TrajectoryFormat::Bin | TrajectoryFormat::Both) {
        let mut w = st.create("trajectory.bin")?;
        u.write_binary(g.h(), cfg.operator.s, &mut w)?;
        w.flush()?;
    }
    summary["sup_l2"] = json!(u.sup_l2(g.h()));
    println!("solved {} time steps, sup_t |u|_L2 = {:.6e}", g.n_t(), u.sup_l2(g.h()));
    Ok(summary)
}

pub fn dn(cfg: &ExperimentConfig, st: &mut Staging, t: &mut Timings) -> Result<Value> {
    let ctx = context(cfg, t)?;
    let m = model(cfg, &ctx)?;
    let (controls, tests) = control_bases(cfg, &ctx)?;
    let meas = t.run("dn", || dn_matrix(&ctx, &m, &controls, &tests))?;
    st.write("dn.json", meas.to_json()?.as_bytes())?;
    let mut summary = json!({ "rows": controls.len(), "cols": tests.len(), "model": m.tag() });
    if let Model::Potential(_) = m {
        let plain: Vec<ExteriorControl> = tests.iter().map(|t| t.time_reverse()).collect();
        let asym = t.run("reciprocity", || reciprocity_asymmetry(&ctx, &m, &controls, &plain))?;
        summary["reciprocity_asymmetry"] = json!(asym);
        println!("reciprocity asymmetry {asym:.3e}");
    }
    println!("DN matrix {} x {} written", controls.len(), tests.len());
    Ok(summary)
}

fn write_sweep(w: &mut impl Write, label: &str, rows: &[SweepRow]) -> Result<()> {
    for r in rows {
        writeln!(
            w,
            "{label},{:.6e},{},{:.17e},{:.17e},{:.6e}",
            r.alpha, r.basis_size, r.residual, r.objective, r.condition
        )?;
    }
    Ok(())
}

pub fn runge(cfg: &ExperimentConfig, st: &mut Staging, t: &mut Timings) -> Result<Value> {
    let ctx = context(cfg, t)?;
    let q = match cfg.model.kind {
        ModelKind::Potential => cfg.potential(&ctx.grid)?,
        ModelKind::Nonlinear => Potential::zero(ctx.grid.n_int()),
    };
    let rc = &cfg.runge;
    let norm = match rc.norm {
        NormKind::L2 => RungeNorm::L2,
        NormKind::Hs => RungeNorm::Hs,
    };
    let basis = ExteriorControl::tensor_basis(&ctx.grid, Window::W1, cfg.controls.n_freq)?;
    let sys = t.run("gram", || RungeSystem::new(&ctx, &q, basis, norm))?;
    let profile = bump_profiles(&ctx, rc.target_bumps).swap_remove(rc.target_index);
    let t_final = ctx.grid.t_final();
    let target = SpaceTimeField::separable(&ctx.grid, &profile, |t| target_profile(t, t_final))?;
    let by_alpha = t.run("alpha sweep", || alpha_sweep(&ctx, &sys, &target, &rc.alphas))?;
    let sizes: Vec<usize> = (1..=sys.len()).collect();
    let by_size = t.run("basis sweep", || {
        basis_sweep(&ctx, &sys, &target, &sizes, rc.basis_alpha)
    })?;
    let mut w = st.create("runge_sweep.csv")?;
    writeln!(w, "sweep,alpha,basis_size,residual,objective,condition")?;
    write_sweep(&mut w, "alpha", &by_alpha)?;
    write_sweep(&mut w, "basis", &by_size)?;
    w.flush()?;
    let last = by_alpha.last().map(|r| r.residual);
    println!("Runge sweep over {} controls written", sys.len());
    Ok(json!({
        "basis_size": sys.len(),
        "final_alpha_residual": last,
        "max_condition": by_alpha.iter().map(|r| r.condition).fold(0.0, f64::max),
    }))
}

pub fn invert_q(cfg: &ExperimentConfig, st: &mut Staging, t: &mut Timings) -> Result<Value> {
    let ctx = context(cfg, t)?;
    let truth = cfg.potential(&ctx.grid)?;
    let pc = &cfg.model.potential;
    let q_ref = Potential::constant(ctx.grid.n_int(), pc.offset);
    let (controls, tests) = control_bases(cfg, &ctx)?;
    let mut data = t.run("dn", || {
        dn_matrix(&ctx, &Model::Potential(truth.clone()), &controls, &tests)
    })?;
    let ic = &cfg.inversion.potential;
    let noise_sigma = add_noise(&mut data, ic.noise_snr, cfg.seed)?;
    st.write("dn.json", data.to_json()?.as_bytes())?;
    let opts = PotentialRecoveryOptions {
        runge_alpha: ic.runge_alpha,
        ls_reg: ic.ls_reg,
        max_refinements: ic.max_refinements,
        update_tol: ic.update_tol,
        ..Default::default()
    };
    let profiles = bump_profiles(&ctx, ic.profiles);
    let rec = t.run("recover", || recover_potential(&ctx, &data, &q_ref, &profiles, &opts))?;
    let delta_true = truth.values() - q_ref.values();
    let err = if delta_true.norm() > 0.0 {
        Some(relative_l2(&rec.delta_q, &delta_true))
    } else {
        None
    };
    let report = json!({
        "pipeline": "potential",
        "x": ctx.grid.interior_coords().as_slice(),
        "delta_q": rec.delta_q.as_slice(),
        "delta_q_true": delta_true.as_slice(),
        "relative_l2_error": err,
        "converged": rec.converged,
        "steps": rec.steps,
        "warnings": rec.warnings,
        "noise_sigma": noise_sigma,
    });
    st.write(
        "recovery_report.json",
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    match err {
        Some(e) => println!(
            "recovered delta q: relative L2 error {e:.4e} after {} passes",
            rec.steps.len()
        ),
        None => println!("recovered delta q after {} passes", rec.steps.len()),
    }
    Ok(json!({ "relative_l2_error": err, "passes": rec.steps.len(), "converged": rec.converged }))
}

/// Additive Gaussian noise at the given SNR (RMS of values over σ). Returns σ.
fn add_noise(data: &mut DnMeasurement, snr: f64, seed: u64) -> Result<f64> {
    if snr <= 0.0 {
        return Ok(0.0);
    }
    let rms = (data.values.norm_squared() / data.values.len() as f64).sqrt();
    let sigma = rms / snr;
    let normal = Normal::new(0.0, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in data.values.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(sigma)
}

pub fn invert_f(cfg: &ExperimentConfig, st: &mut Staging, t: &mut Timings) -> Result<Value> {
    let ctx = context(cfg, t)?;
    let truth = cfg.nonlinearity(&ctx.grid)?;
    let oracle = SimulatedOracle {
        ctx: &ctx,
        model: &truth,
    };
    let ec = &cfg.inversion.expansion;
    let controls = ec
        .controls
        .iter()
        .map(|&[node, freq]| ExteriorControl::tensor_bump(&ctx.grid, Window::W1, node, freq))
        .collect::<nlwave_core::Result<Vec<_>>>()?;
    let exponents = truth.exponents();
    let est = t.run("recover", || {
        recover_expansion(&ctx, &oracle, &controls, &ec.eps_ladder, &exponents)
    })?;

    // Rate check on the first control: remainder and leading-term extraction.
    let eps = &ec.eps_ladder;
    let mut rows = Vec::new();
    if let (Some(control), Some(lead)) = (controls.first(), truth.terms().first()) {
        let samples = sample_ladder(&ctx, &oracle, control, eps)?;
        let v = linear_response(&ctx, control)?;
        for (k, &e) in eps.iter().enumerate() {
            let rem = linearized_solution(&ctx, &oracle, control, e)?.remainder_norm;
            let mut worst: f64 = 0.0;
            for n in 1..ctx.grid.n_t() {
                let exact = lead.eval_field(&v.slice(n));
                let got = samples.f[k].values().column(n) * e.powf(-lead.r - 1.0);
                worst = worst.max((got - exact).amax());
            }
            rows.push((e, rem, worst));
        }
    }
    let mut w = st.create("rate_check.csv")?;
    writeln!(w, "eps,remainder_norm,extraction_error")?;
    for (e, r, x) in &rows {
        writeln!(w, "{e:.17e},{r:.17e},{x:.17e}")?;
    }
    w.flush()?;
    let es: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rem_slope = (rows.len() >= 2).then(|| loglog_slope(&es, &rows.iter().map(|r| r.1).collect::<Vec<_>>()));
    let ext_slope = (rows.len() >= 2 && truth.terms().len() >= 2)
        .then(|| loglog_slope(&es, &rows.iter().map(|r| r.2).collect::<Vec<_>>()));

    let rel_errors: Vec<Option<f64>> = est
        .terms
        .iter()
        .zip(truth.terms())
        .map(|(got, want)| {
            let scale = want.c.amax();
            (scale > 0.0).then(|| (&got.c - &want.c).amax() / scale)
        })
        .collect();
    let report = json!({
        "pipeline": "expansion",
        "x": ctx.grid.interior_coords().as_slice(),
        "estimate": est,
        "truth": truth.terms().iter().map(|t| json!({ "r": t.r, "c": t.c.as_slice() })).collect::<Vec<_>>(),
        "relative_linf_errors": rel_errors,
        "remainder_slope": rem_slope,
        "extraction_slope": ext_slope,
    });
    st.write(
        "recovery_report.json",
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    for (term, err) in est.terms.iter().zip(&rel_errors) {
        println!(
            "r = {}: estimated error {:.3e}, relative error vs truth {}",
            term.r,
            term.error,
            err.map_or("n/a".into(), |e| format!("{e:.3e}"))
        );
    }
    Ok(json!({
        "terms": est.terms.len(),
        "truncated": est.truncated,
        "relative_linf_errors": rel_errors,
        "remainder_slope": rem_slope,
        "extraction_slope": ext_slope,
    }))
}

/// Smooth random field: first `k` modes with decaying random weights.
pub fn smooth_field(basis: &nlwave_core::SpectralBasis, coeffs: &[f64]) -> DVector<f64> {
    let scaled: Vec<f64> = coeffs.iter().enumerate().map(|(j, c)| c / (1.0 + j as f64)).collect();
    modal_field(basis, &scaled)
}
