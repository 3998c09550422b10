//! Recovery of polyhomogeneous nonlinearities by ε-scaled successive
//! linearization.
//!
//! For control `εφ` the interior nonlinear term is read off the trajectory as
//! `f(u_ε) = -(δₜ²u_ε + A u_ε + Bεφ)`. Scaling by `ε^{-r₁-1}` isolates the
//! first term, which is then subtracted before moving to the next exponent.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dn::ForwardContext;
use crate::error::{check_len, Error, Result};
use crate::model::{HomogeneousTerm, PolyKind, PolyNonlinearity};
use crate::wave::{solve_newmark, CauchyData, ExteriorControl, NodeSet, Reaction, SpaceTimeField};

/// Degeneracy threshold for coefficient fits, relative to `max |v|`.
pub const V_MIN_REL: f64 = 1e-3;

/// Source of semilinear trajectories for a given exterior control.
pub trait SemilinearOracle: Sync {
    fn solve(&self, control: &ExteriorControl) -> Result<SpaceTimeField>;
}

/// Oracle backed by the central-difference solver with a known model.
pub struct SimulatedOracle<'a> {
    pub ctx: &'a ForwardContext,
    pub model: &'a PolyNonlinearity,
}

impl SemilinearOracle for SimulatedOracle<'_> {
    fn solve(&self, control: &ExteriorControl) -> Result<SpaceTimeField> {
        let reaction = if self.model.is_zero() {
            Reaction::None
        } else {
            Reaction::Nonlinear(self.model)
        };
        solve_newmark(
            &self.ctx.op,
            reaction,
            Some(control),
            &CauchyData::zeros(self.ctx.grid.n_int()),
            None,
            &self.ctx.grid,
        )
    }
}

/// Response of the linear equation to `control` on the same scheme.
pub fn linear_response(ctx: &ForwardContext, control: &ExteriorControl) -> Result<SpaceTimeField> {
    solve_newmark(
        &ctx.op,
        Reaction::None,
        Some(control),
        &CauchyData::zeros(ctx.grid.n_int()),
        None,
        &ctx.grid,
    )
}

/// `sup_t (h rᵀ A_int r)^{1/2}`.
pub fn sup_hs_norm(ctx: &ForwardContext, u: &SpaceTimeField) -> f64 {
    let au = ctx.op.interior() * u.values();
    (0..=u.n_t())
        .map(|n| (ctx.h() * u.values().column(n).dot(&au.column(n))).max(0.0).sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct LinearizedSolution {
    pub u_eps: SpaceTimeField,
    pub v: SpaceTimeField,
    /// `u_ε - ε v`.
    pub remainder: SpaceTimeField,
    /// `‖R_ε‖_{L∞(0,T; H̃ˢ)}`.
    pub remainder_norm: f64,
}

pub fn linearized_solution(
    ctx: &ForwardContext,
    oracle: &dyn SemilinearOracle,
    control: &ExteriorControl,
    eps: f64,
) -> Result<LinearizedSolution> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be non-negative, got {eps}")));
    }
    let v = linear_response(ctx, control)?;
    let u_eps = if eps == 0.0 {
        SpaceTimeField::zeros(&ctx.grid, NodeSet::Interior)
    } else {
        oracle.solve(&control.scaled(eps))?
    };
    let remainder = u_eps.axpy(-eps, &v)?;
    let remainder_norm = sup_hs_norm(ctx, &remainder);
    Ok(LinearizedSolution {
        u_eps,
        v,
        remainder,
        remainder_norm,
    })
}

/// Interior nonlinear term `-(δₜ²u + A_int u + B φ)` at slices `1..N_t`;
/// the two end slices are left at zero.
pub fn nonlinear_residual(
    ctx: &ForwardContext,
    u: &SpaceTimeField,
    control: &ExteriorControl,
) -> Result<SpaceTimeField> {
    let g = &ctx.grid;
    check_len(g.n_int(), u.n_nodes())?;
    check_len(u.n_t(), control.n_t())?;
    let n_t = u.n_t();
    let dt2 = g.dt() * g.dt();
    let au = ctx.op.interior() * u.values() + ctx.op.coupling() * control.values();
    let uv = u.values();
    let mut out = DMatrix::zeros(g.n_int(), n_t + 1);
    for n in 1..n_t {
        let acc = (uv.column(n + 1) - uv.column(n) * 2.0 + uv.column(n - 1)) / dt2;
        out.set_column(n, &(-(acc + au.column(n))));
    }
    SpaceTimeField::new(out, NodeSet::Interior, g.dt(), g.t_final())
}

fn check_ladder(eps: &[f64]) -> Result<()> {
    if eps.len() < 2 {
        return Err(Error::Extraction("the epsilon ladder needs at least two values".into()));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Extraction("epsilon values must be positive".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Extraction(
            "the epsilon ladder must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Trajectories and nonlinear residuals along an ε ladder for one control.
#[derive(Debug, Clone)]
pub struct LadderSamples {
    pub eps: Vec<f64>,
    pub u: Vec<SpaceTimeField>,
    pub f: Vec<SpaceTimeField>,
}

pub fn sample_ladder(
    ctx: &ForwardContext,
    oracle: &dyn SemilinearOracle,
    control: &ExteriorControl,
    eps: &[f64],
) -> Result<LadderSamples> {
    check_ladder(eps)?;
    let pairs: Vec<(SpaceTimeField, SpaceTimeField)> = eps
        .par_iter()
        .map(|&e| {
            let c = control.scaled(e);
            let u = oracle.solve(&c)?;
            let f = nonlinear_residual(ctx, &u, &c)?;
            Ok((u, f))
        })
        .collect::<Result<_>>()?;
    let (u, f) = pairs.into_iter().unzip();
    Ok(LadderSamples {
        eps: eps.to_vec(),
        u,
        f,
    })
}

/// `(ε_aᵖ g_b - ε_bᵖ g_a) / (ε_aᵖ - ε_bᵖ)`, removing an `εᵖ` error term.
pub fn richardson(g_a: &DMatrix<f64>, g_b: &DMatrix<f64>, eps_a: f64, eps_b: f64, p: f64) -> DMatrix<f64> {
    let (ea, eb) = (eps_a.powf(p), eps_b.powf(p));
    (g_b * ea - g_a * eb) / (ea - eb)
}

/// Fails when successive differences of the scaled samples grow as ε shrinks.
fn check_noise_floor(scaled: &[DMatrix<f64>]) -> Result<()> {
    if scaled.len() < 3 {
        return Ok(());
    }
    let d: Vec<f64> = scaled.windows(2).map(|w| (&w[1] - &w[0]).amax()).collect();
    let k = d.len();
    let scale = scaled.last().map_or(0.0, |m| m.amax());
    if d[k - 1] > d[k - 2] && d[k - 1] > 1e-8 * scale {
        return Err(Error::Extraction(format!(
            "scaled samples diverge as epsilon shrinks: successive differences {:.3e} -> {:.3e}",
            d[k - 2],
            d[k - 1]
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LeadingTerm {
    /// Estimate of `f₁(x, v(x, t))` (end slices zero).
    pub estimate: SpaceTimeField,
    /// `ε^{-r₁-1} f(u_ε)` for each rung.
    pub scaled: Vec<SpaceTimeField>,
    /// `|estimate - scaled at the smallest ε|`.
    pub error: SpaceTimeField,
}

/// Leading-term field from a sampled ladder: Richardson in `ε^{r₂-r₁}` over
/// the two smallest ε when `r₂` is given, the last rung otherwise.
pub fn extract_from_samples(samples: &LadderSamples, r1: f64, r2: Option<f64>) -> Result<LeadingTerm> {
    check_ladder(&samples.eps)?;
    let scaled: Vec<SpaceTimeField> = samples
        .f
        .iter()
        .zip(&samples.eps)
        .map(|(f, &e)| f.scaled(e.powf(-r1 - 1.0)))
        .collect();
    let mats: Vec<DMatrix<f64>> = scaled.iter().map(|s| s.values().clone()).collect();
    check_noise_floor(&mats)?;
    let k = mats.len();
    let last = &scaled[k - 1];
    let estimate = match r2 {
        Some(r2) => {
            let v = richardson(
                &mats[k - 2],
                &mats[k - 1],
                samples.eps[k - 2],
                samples.eps[k - 1],
                r2 - r1,
            );
            SpaceTimeField::new(v, NodeSet::Interior, last.dt(), last.t_final())?
        }
        None => last.clone(),
    };
    let error = SpaceTimeField::new(
        (estimate.values() - last.values()).abs(),
        NodeSet::Interior,
        last.dt(),
        last.t_final(),
    )?;
    Ok(LeadingTerm {
        estimate,
        scaled,
        error,
    })
}

pub fn extract_leading_term(
    ctx: &ForwardContext,
    oracle: &dyn SemilinearOracle,
    control: &ExteriorControl,
    eps: &[f64],
    r1: f64,
    r2: Option<f64>,
) -> Result<LeadingTerm> {
    let samples = sample_ladder(ctx, oracle, control, eps)?;
    extract_from_samples(&samples, r1, r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub c: DVector<f64>,
    /// Nodes with at least one sample above the degeneracy threshold.
    pub excited: Vec<bool>,
}

/// Per-node least squares of samples `y` against `|v|^r v`, using only
/// samples with `|v| >= V_MIN_REL · max|v|` (exact zeros of `v` never enter).
/// Unexcited nodes copy the nearest excited node.
pub fn fit_homogeneous_coefficient(samples: &[(SpaceTimeField, SpaceTimeField)], r: f64) -> Result<FitResult> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Extraction("no samples to fit".into()))?;
    let n = first.0.n_nodes();
    for (y, v) in samples {
        check_len(n, y.n_nodes())?;
        check_len(n, v.n_nodes())?;
        check_len(y.n_t(), v.n_t())?;
    }
    let vmax = samples.iter().map(|(_, v)| v.values().amax()).fold(0.0, f64::max);
    let vmin = V_MIN_REL * vmax;
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for (y, v) in samples {
        for (idx, (&yi, &vi)) in y.values().iter().zip(v.values().iter()).enumerate() {
            if vi.abs() >= vmin && vi != 0.0 {
                let z = vi.abs().powf(r) * vi;
                let node = idx % n;
                num[node] += yi * z;
                den[node] += z * z;
            }
        }
    }
    let excited: Vec<bool> = den.iter().map(|&d| d > 0.0).collect();
    if !excited.iter().any(|&e| e) {
        return Err(Error::Extraction(
            "no node is excited above the degeneracy threshold; use a richer control family".into(),
        ));
    }
    let raw: Vec<Option<f64>> = (0..n).map(|i| excited[i].then(|| num[i] / den[i])).collect();
    let c = DVector::from_fn(n, |i, _| {
        raw[i].unwrap_or_else(|| {
            (1..n)
                .flat_map(|d| [i.checked_sub(d), Some(i + d)])
                .flatten()
                .find_map(|j| raw.get(j).copied().flatten())
                .unwrap()
        })
    });
    Ok(FitResult { c, excited })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveredTerm {
    pub r: f64,
    #[serde(serialize_with = "ser_vec")]
    pub c: DVector<f64>,
    /// L∞ error estimate of `c`.
    pub error: f64,
    /// Coefficient fitted at each rung of the ladder.
    #[serde(skip)]
    pub per_rung: Vec<DVector<f64>>,
}

fn ser_vec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionEstimate {
    pub terms: Vec<RecoveredTerm>,
    pub eps_ladder: Vec<f64>,
    /// Set when the noise floor stopped the recursion early.
    pub truncated: bool,
    pub notes: Vec<String>,
}

impl ExpansionEstimate {
    pub fn to_nonlinearity(&self, kind: PolyKind, r_infty: f64, s: f64) -> Result<PolyNonlinearity> {
        let terms = self
            .terms
            .iter()
            .map(|t| HomogeneousTerm::new(t.r, t.c.clone()))
            .collect();
        PolyNonlinearity::new(kind, terms, r_infty, s)
    }
}

/// Fit samples for exponent `r` at rung `m`: `y = ε^{-r-1}(f - Σ terms)` (or
/// `-Σ terms` alone when `with_residual` is false) against `w = u / ε`. The
/// residual is undefined on the end slices, so `w` is zeroed there and those
/// samples drop out of the fit.
fn scaled_samples(
    ladders: &[LadderSamples],
    m: usize,
    e: f64,
    r: f64,
    with_residual: bool,
    terms: &[HomogeneousTerm],
) -> Result<Vec<(SpaceTimeField, SpaceTimeField)>> {
    ladders
        .iter()
        .map(|l| {
            let u = &l.u[m];
            let n_t = u.n_t();
            let mut y = if with_residual {
                l.f[m].values().clone()
            } else {
                DMatrix::zeros(u.n_nodes(), n_t + 1)
            };
            for t in terms {
                for j in 1..n_t {
                    let mut col = y.column_mut(j);
                    col -= t.eval_field(&u.slice(j));
                }
            }
            let y = SpaceTimeField::new(y * e.powf(-r - 1.0), NodeSet::Interior, u.dt(), u.t_final())?;
            let mut w = u.scaled(1.0 / e);
            w.values_mut().column_mut(0).fill(0.0);
            w.values_mut().column_mut(n_t).fill(0.0);
            Ok((y, w))
        })
        .collect()
}

/// Plateau tolerance on successive per-rung differences, relative to `max |c|`.
pub const PLATEAU_REL: f64 = 1e-2;

/// Index `m` such that rungs `m, m + 1` bound the usable part of the ladder:
/// the pair with the smallest successive difference. `None` when the
/// differences grow from the first pair on and are not already below the
/// plateau tolerance.
fn plateau(per_rung: &[DVector<f64>]) -> Option<usize> {
    let d: Vec<f64> = per_rung.windows(2).map(|w| (&w[1] - &w[0]).amax()).collect();
    let (m, dm) = d.iter().copied().enumerate().fold(
        (0, f64::INFINITY),
        |best, (i, v)| if v < best.1 { (i, v) } else { best },
    );
    let scale = per_rung.iter().map(|c| c.amax()).fold(0.0, f64::max);
    (m > 0 || dm <= PLATEAU_REL * scale).then_some(m)
}

/// Peel the declared exponents one at a time.
///
/// For term `k` the samples are `y_ε = ε^{-r_k-1}(f(u_ε) - Σ_{j<k} ĉ_j |u_ε|^{r_j} u_ε)`
/// fitted against `|w_ε|^{r_k} w_ε` with `w_ε = u_ε / ε`, separately for each
/// rung. Peeling amplifies earlier errors by negative powers of ε, so each
/// term uses the ladder only down to its plateau (see [`plateau`]). When a
/// later exponent exists the two plateau rungs are combined by Richardson
/// extrapolation in `ε^{r_{k+1}-r_k}`; the last term takes the smaller
/// plateau rung. The reported error is the gap between the estimate and the
/// next-best rung value (or between two extrapolations), plus the errors of
/// the already peeled terms propagated through the fit.
pub fn recover_expansion(
    ctx: &ForwardContext,
    oracle: &dyn SemilinearOracle,
    controls: &[ExteriorControl],
    eps: &[f64],
    exponents: &[f64],
) -> Result<ExpansionEstimate> {
    check_ladder(eps)?;
    if controls.is_empty() {
        return Err(Error::InvalidInput("no controls".into()));
    }
    if exponents.iter().any(|&r| !(r > 0.0)) || exponents.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidNonlinearity(
            "declared exponents must be positive and increasing".into(),
        ));
    }
    let ladders: Vec<LadderSamples> = controls
        .iter()
        .map(|c| sample_ladder(ctx, oracle, c, eps))
        .collect::<Result<_>>()?;
    let fmax = ladders
        .iter()
        .flat_map(|l| l.f.iter())
        .map(|f| f.values().amax())
        .fold(0.0, f64::max);
    let umax = ladders
        .iter()
        .flat_map(|l| l.u.iter())
        .map(|u| u.values().amax())
        .fold(0.0, f64::max);
    let mut est = ExpansionEstimate {
        terms: Vec::new(),
        eps_ladder: eps.to_vec(),
        truncated: false,
        notes: Vec::new(),
    };
    // A residual at rounding level of the linear dynamics means no nonlinearity.
    if fmax <= 1e-10 * umax * ctx.op.full().amax() {
        est.notes.push("nonlinear residual at rounding level: no terms".into());
        return Ok(est);
    }
    let kk = eps.len();
    let n_int = ctx.grid.n_int();
    for (k, &r) in exponents.iter().enumerate() {
        let peeled: Vec<HomogeneousTerm> = est
            .terms
            .iter()
            .map(|t| HomogeneousTerm::new(t.r, t.c.clone()))
            .collect();
        let per_rung = (0..kk)
            .map(|m| {
                let samples = scaled_samples(&ladders, m, eps[m], r, true, &peeled)?;
                Ok(fit_homogeneous_coefficient(&samples, r)?.c)
            })
            .collect::<Result<Vec<_>>>()?;
        let Some(m) = plateau(&per_rung) else {
            est.truncated = true;
            est.notes.push(format!(
                "term {} (r = {r}): per-rung coefficients diverge from the largest epsilon on",
                k + 1
            ));
            break;
        };
        if m + 1 < kk - 1 {
            est.notes.push(format!(
                "term {} (r = {r}): ladder cut at epsilon = {:e} (noise floor)",
                k + 1,
                eps[m + 1]
            ));
        }
        let extrapolate = |m: usize, rn: f64| {
            let a = DMatrix::from_column_slice(n_int, 1, per_rung[m].as_slice());
            let b = DMatrix::from_column_slice(n_int, 1, per_rung[m + 1].as_slice());
            DVector::from_column_slice(richardson(&a, &b, eps[m], eps[m + 1], rn - r).as_slice())
        };
        let (c, mut error) = match exponents.get(k + 1) {
            Some(&rn) => {
                let c = extrapolate(m, rn);
                // Consistency of two extrapolations, or the raw gap on a short ladder.
                let err = if m > 0 {
                    (&c - extrapolate(m - 1, rn)).amax()
                } else {
                    (&c - &per_rung[m + 1]).amax()
                };
                (c, err)
            }
            None => {
                let c = per_rung[m + 1].clone();
                let err = (&c - &per_rung[m]).amax();
                (c, err)
            }
        };
        // Errors of the peeled terms enter linearly through the fit.
        for t in &est.terms {
            let probe = [HomogeneousTerm::new(t.r, DVector::from_element(n_int, -t.error))];
            let samples = scaled_samples(&ladders, m + 1, eps[m + 1], r, false, &probe)?;
            error += fit_homogeneous_coefficient(&samples, r)?.c.amax();
        }
        est.terms.push(RecoveredTerm { r, c, error, per_rung });
    }
    Ok(est)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Diagnostic estimate of the leading exponent from the scaling of the
/// nonlinear residual, `‖f(u_ε)‖ ~ ε^{r₁+1}`. Not used by the recovery.
pub fn estimate_leading_exponent(samples: &LadderSamples) -> f64 {
    let norms: Vec<f64> = samples.f.iter().map(|f| f.values().amax()).collect();
    loglog_slope(&samples.eps, &norms) - 1.0
}
