//! Potential reconstruction from DN data through the integral identity
//! `⟨Λ₁φ₁, φ₂*⟩ - ⟨Λ₂φ₂, φ₁*⟩ = ∫(q₁ - q₂) v₁ v₂*`.
//!
//! Controls are Runge approximations of bump-shaped targets, so the products
//! `v₁ v₂*` localize in space. The interior factors are the achieved states of
//! those controls under the current estimate, so the identity is only
//! linearized in `q₁ - q_est`. Each pass solves a Tikhonov-regularized update
//! around the current estimate (iterated Gauss-Newton), which over the passes
//! removes both the linearization error and the regularization bias. The
//! iteration stops early once the DN misfit stops decreasing.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dn::{pairing_from_response, DnMeasurement, ForwardContext};
use crate::error::{check_len, Error, Result};
use crate::linalg::{cholesky, spd_condition, trapezoid_weights};
use crate::model::Potential;
use crate::runge::{RungeNorm, RungeSystem};
use crate::wave::{ExteriorControl, SpaceTimeField};

/// The iteration is abandoned once the DN misfit exceeds this multiple of
/// the best misfit seen so far.
pub const DIVERGENCE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialRecoveryOptions {
    /// Runge regularization weight (dimensionless, see [`RungeSystem::solve`]).
    pub runge_alpha: f64,
    pub runge_norm: RungeNorm,
    /// Least-squares regularization on each update, relative to the mean
    /// diagonal of `MᵀM`.
    pub ls_reg: f64,
    /// Cap on re-linearized solves after the first.
    pub max_refinements: usize,
    /// Stop once `‖update‖ <= update_tol · ‖q_est - q_ref‖` (L² norms).
    pub update_tol: f64,
}

impl Default for PotentialRecoveryOptions {
    fn default() -> Self {
        Self {
            runge_alpha: 1e-10,
            runge_norm: RungeNorm::L2,
            ls_reg: 1e-3,
            max_refinements: 40,
            update_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryStep {
    /// `‖D₁ - D(q_est)‖_F / ‖D₁‖_F` before the update.
    pub dn_misfit: f64,
    /// Relative size of the projected data misfit before the update.
    pub data_misfit: f64,
    pub update_norm: f64,
    pub condition: f64,
    pub mean_runge_residual: f64,
}

#[derive(Debug, Clone)]
pub struct PotentialRecovery {
    /// Recovered `q₁ - q_ref` on interior nodes.
    pub delta_q: DVector<f64>,
    pub steps: Vec<RecoveryStep>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Cosine-squared bumps with centers evenly spaced over the interior and
/// half-width of two center spacings.
pub fn bump_profiles(ctx: &ForwardContext, count: usize) -> Vec<DVector<f64>> {
    let g = &ctx.grid;
    let (a, b) = (g.x_min(), g.x_max());
    let spacing = (b - a) / (count as f64 + 1.0);
    (1..=count)
        .map(|k| {
            let center = a + k as f64 * spacing;
            DVector::from_fn(g.n_int(), |i, _| {
                let d = (g.x_interior(i) - center) / (2.0 * spacing);
                if d.abs() < 1.0 {
                    (0.5 * std::f64::consts::PI * d).cos().powi(2)
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// `sin²(πt/T)`, the temporal factor of the default targets.
pub fn target_profile(t: f64, t_final: f64) -> f64 {
    (std::f64::consts::PI * t / t_final).sin().powi(2)
}

/// `M(x) = h Σₙ wₙ a(x, tₙ) b(x, T - tₙ)` as a row over interior nodes.
fn product_row(a: &SpaceTimeField, b: &SpaceTimeField, h: f64) -> DVector<f64> {
    let n_t = a.n_t();
    let w = trapezoid_weights(n_t, a.dt());
    let mut row = DVector::zeros(a.n_nodes());
    for n in 0..=n_t {
        row += a.values().column(n).component_mul(&b.values().column(n_t - n)) * (h * w[n]);
    }
    row
}

/// One linearization around `q_est`: the regularized update and its diagnostics.
fn gauss_newton_pass(
    ctx: &ForwardContext,
    data: &DnMeasurement,
    q_est: &DVector<f64>,
    p: f64,
    targets: &[SpaceTimeField],
    reversed_targets: &[SpaceTimeField],
    opts: &PotentialRecoveryOptions,
) -> Result<(DVector<f64>, RecoveryStep)> {
    let n = ctx.grid.n_int();
    let basis1 = data.controls.clone();
    let basis2: Vec<ExteriorControl> = data.tests.iter().map(|t| t.time_reverse()).collect();
    let q = Potential::new(q_est.clone(), p)?;
    let sys1 = RungeSystem::new(ctx, &q, basis1, opts.runge_norm)?;
    let sys2 = RungeSystem::new(ctx, &q, basis2, opts.runge_norm)?;

    // Pairings of the current model on the same control/test pairs.
    let mut d_est = DMatrix::zeros(data.controls.len(), data.tests.len());
    for (i, (v, c)) in sys1.outputs().iter().zip(&data.controls).enumerate() {
        for (j, t) in data.tests.iter().enumerate() {
            d_est[(i, j)] = pairing_from_response(ctx, v, c, t)?;
        }
    }
    let diff = &data.values - d_est;
    let dn_misfit = diff.norm() / data.values.norm().max(f64::MIN_POSITIVE);

    let sols1 = targets
        .iter()
        .map(|t| sys1.solve(ctx, t, opts.runge_alpha))
        .collect::<Result<Vec<_>>>()?;
    let sols2 = reversed_targets
        .iter()
        .map(|t| sys2.solve(ctx, t, opts.runge_alpha))
        .collect::<Result<Vec<_>>>()?;
    let mut rel = 0.0;
    for (s, t) in sols1.iter().zip(targets) {
        rel += s.residual / crate::runge::space_time_norm(ctx, opts.runge_norm, t)?.max(f64::MIN_POSITIVE);
    }
    let mean_runge_residual = rel / targets.len() as f64;

    let rows = sols1.len() * sols2.len();
    let mut m = DMatrix::zeros(rows, n);
    let mut d = DVector::zeros(rows);
    let mut k = 0;
    for s1 in &sols1 {
        for s2 in &sols2 {
            m.set_row(k, &product_row(&s1.state, &s2.state, ctx.h()).transpose());
            d[k] = s1.coefficients.dot(&(&diff * &s2.coefficients));
            k += 1;
        }
    }
    let mut normal = m.tr_mul(&m);
    let beta = opts.ls_reg * normal.trace() / n as f64;
    for i in 0..n {
        normal[(i, i)] += beta;
    }
    let condition = spd_condition(&normal)?;
    let update = cholesky(normal)?.solve(&m.tr_mul(&d));
    let scale = (m.norm() * q_est.norm()).max(d.norm()).max(f64::MIN_POSITIVE);
    let step = RecoveryStep {
        dn_misfit,
        data_misfit: d.norm() / scale,
        update_norm: (ctx.h() * update.norm_squared()).sqrt(),
        condition,
        mean_runge_residual,
    };
    Ok((update, step))
}

/// Recover `q₁ - q_ref` from `data`, the pairings of `Λ_{q₁}` between the W₁
/// basis (controls) and the time-reversed W₂ basis (tests).
pub fn recover_potential(
    ctx: &ForwardContext,
    data: &DnMeasurement,
    q_ref: &Potential,
    profiles: &[DVector<f64>],
    opts: &PotentialRecoveryOptions,
) -> Result<PotentialRecovery> {
    let n = ctx.grid.n_int();
    check_len(n, q_ref.len())?;
    if data.meta.signature != ctx.grid.signature() {
        return Err(Error::SignatureMismatch {
            expected: ctx.grid.signature(),
            found: data.meta.signature.clone(),
        });
    }
    if profiles.is_empty() {
        return Err(Error::InvalidInput("no target profiles".into()));
    }
    let t_final = ctx.grid.t_final();
    let targets: Vec<SpaceTimeField> = profiles
        .iter()
        .map(|p| SpaceTimeField::separable(&ctx.grid, p, |t| target_profile(t, t_final)))
        .collect::<Result<_>>()?;
    let reversed_targets: Vec<SpaceTimeField> = targets.iter().map(|t| t.time_reverse()).collect();

    let mut q_est = q_ref.values().clone();
    let mut steps: Vec<RecoveryStep> = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    // Estimate with the smallest DN misfit so far, kept if the iteration diverges.
    let mut best: Option<(DVector<f64>, f64, usize)> = None;
    for pass in 0..=opts.max_refinements {
        let failure = match gauss_newton_pass(ctx, data, &q_est, q_ref.p(), &targets, &reversed_targets, opts) {
            Ok((update, step)) => {
                let misfit = step.dn_misfit;
                match &best {
                    Some((_, b, _)) if misfit > DIVERGENCE_FACTOR * b => {
                        Some(format!("DN misfit rose to {misfit:.3e}"))
                    }
                    _ => {
                        if best.as_ref().is_none_or(|(_, b, _)| misfit <= *b) {
                            best = Some((q_est.clone(), misfit, steps.len()));
                        }
                        steps.push(step);
                        q_est += &update;
                        let size = (ctx.h() * (&q_est - q_ref.values()).norm_squared()).sqrt();
                        let norm = steps.last().map_or(0.0, |s| s.update_norm);
                        if norm <= opts.update_tol * size || size == 0.0 {
                            converged = true;
                            break;
                        }
                        None
                    }
                }
            }
            Err(e) if best.is_some() => Some(format!("forward solve failed ({e})")),
            Err(e) => return Err(e),
        };
        if let Some(why) = failure {
            let (q_best, _, k) = best.take().expect("a previous pass exists");
            warnings.push(format!(
                "{why} at pass {pass}; kept the estimate before pass {k}; \
                 the data may need stronger regularization (runge_alpha, ls_reg)"
            ));
            q_est = q_best;
            steps.truncate(k);
            break;
        }
    }
    if !converged && warnings.is_empty() {
        warnings.push(format!("no convergence after {} refinements", opts.max_refinements));
    }
    for s in &steps {
        if s.condition > 1e14 {
            warnings.push(format!("least-squares condition estimate {:.3e}", s.condition));
        }
    }
    Ok(PotentialRecovery {
        delta_q: q_est - q_ref.values(),
        steps,
        converged,
        warnings,
    })
}

/// `‖a - b‖_{L²} / ‖b‖_{L²}` on the interior grid.
pub fn relative_l2(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
