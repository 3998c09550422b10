use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::model::Potential;
use crate::spectral::SpectralBasis;

use super::field::{CauchyData, SpaceTimeField};
use super::modal::{solve_linear_modal, ModalSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Relative tolerance on the increment, in both the θ-norm and the sup norm.
    pub tol: f64,
    pub max_iter: usize,
    pub theta0: f64,
    pub theta_cap: f64,
    /// θ is doubled while the measured ratio exceeds this.
    pub ratio_target: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 400,
            theta0: 1.0,
            theta_cap: 2f64.powi(20),
            ratio_target: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    pub theta: f64,
    /// Largest successive-increment ratio in the θ-norm.
    pub c0: f64,
    pub iterations: usize,
    /// θ-norm of the last increment.
    pub final_update: f64,
    pub last_ratio: f64,
    /// `h`-weighted L² norm of each increment at each time slice.
    #[serde(skip)]
    increments: Vec<Vec<f64>>,
    #[serde(skip)]
    times: Vec<f64>,
}

impl PicardReport {
    fn theta_norm(norms: &[f64], times: &[f64], theta: f64) -> f64 {
        norms
            .iter()
            .zip(times)
            .map(|(w, t)| (-theta * t).exp() * w)
            .fold(0.0, f64::max)
    }

    /// Successive-increment ratios measured with weight `θ`.
    ///
    /// Increments already at the rounding floor are skipped since their
    /// ratios carry no information.
    pub fn ratios_at(&self, theta: f64) -> Vec<f64> {
        let norms: Vec<f64> = self
            .increments
            .iter()
            .map(|w| Self::theta_norm(w, &self.times, theta))
            .collect();
        let floor = 1e-13 * norms.first().copied().unwrap_or(0.0);
        norms
            .windows(2)
            .take_while(|p| p[1] > floor)
            .map(|p| if p[0] > 0.0 { p[1] / p[0] } else { 0.0 })
            .collect()
    }

    /// Largest ratio at weight `θ` (0 when there is nothing to measure).
    pub fn contraction_at(&self, theta: f64) -> f64 {
        self.ratios_at(theta).into_iter().fold(0.0, f64::max)
    }
}

/// Fixed point of `u ↦ S(F - q u)` where `S` is the zero-potential solver.
///
/// The iterates do not depend on θ; θ only weights the measurement. When the
/// measured ratio exceeds `ratio_target`, θ is doubled (up to the cap) and all
/// stored ratios are re-measured.
pub fn solve_with_potential_picard(
    basis: &SpectralBasis,
    q: &Potential,
    data: &CauchyData,
    source: Option<&SpaceTimeField>,
    grid: &Grid,
    opts: &PicardOptions,
) -> Result<(ModalSolution, PicardReport)> {
    check_len(basis.len(), q.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("Picard tolerance must be positive".into()));
    }
    let h = basis.h();
    let times: Vec<f64> = (0..=grid.n_t()).map(|n| grid.time(n)).collect();
    let mut sol = solve_linear_modal(basis, data, source, grid)?;
    let mut report = PicardReport {
        theta: opts.theta0,
        c0: 0.0,
        iterations: 1,
        final_update: 0.0,
        last_ratio: 0.0,
        increments: Vec::new(),
        times: times.clone(),
    };
    if q.is_zero() {
        return Ok((sol, report));
    }
    let qv = q.values();
    let base = source.map(|f| f.values().clone());
    loop {
        let mut rhs = DMatrix::from_fn(basis.len(), grid.n_t() + 1, |i, n| -qv[i] * sol.u.values()[(i, n)]);
        if let Some(b) = &base {
            rhs += b;
        }
        let rhs = SpaceTimeField::new(rhs, crate::wave::NodeSet::Interior, grid.dt(), grid.t_final())?;
        let next = solve_linear_modal(basis, data, Some(&rhs), grid)?;
        report.iterations += 1;
        let diff = next.u.values() - sol.u.values();
        let norms: Vec<f64> = diff.column_iter().map(|c| (h * c.norm_squared()).sqrt()).collect();
        let sup_inc = norms.iter().copied().fold(0.0, f64::max);
        report.increments.push(norms);
        sol = next;

        let mut ratio = report.contraction_at(report.theta);
        while ratio > opts.ratio_target && report.theta < opts.theta_cap {
            report.theta = (report.theta * 2.0).min(opts.theta_cap);
            ratio = report.contraction_at(report.theta);
        }
        report.c0 = ratio;
        let last = report.increments.last().unwrap();
        report.final_update = PicardReport::theta_norm(last, &times, report.theta);
        let ratios = report.ratios_at(report.theta);
        report.last_ratio = ratios.last().copied().unwrap_or(0.0);

        let scale_sup = sol.u.sup_l2(h).max(f64::MIN_POSITIVE);
        let u_norms: Vec<f64> = sol
            .u
            .values()
            .column_iter()
            .map(|c| (h * c.norm_squared()).sqrt())
            .collect();
        let scale_theta = PicardReport::theta_norm(&u_norms, &times, report.theta).max(f64::MIN_POSITIVE);
        if report.final_update <= opts.tol * scale_theta && sup_inc <= opts.tol * scale_sup {
            return Ok((sol, report));
        }
        if report.iterations >= opts.max_iter || !sup_inc.is_finite() {
            return Err(Error::PicardFailed(Box::new(report)));
        }
    }
}
