use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::linalg::trapezoid_weights;
use crate::operator::FracOperator;
use crate::spectral::SpectralBasis;

use super::field::{CauchyData, ExteriorControl, NodeSet, SpaceTimeField};

/// Modal coefficient `c(t)` and its derivative on `t_n = n dt`.
///
/// The Duhamel integral is the composite trapezoid rule on the samples of
/// `F(τ) sin(ω(t-τ))`. Expanding the sine turns it into two running
/// trapezoid sums, so the whole series costs `O(N_t)`.
pub fn duhamel_coefficient(lambda: f64, u0k: f64, u1k: f64, fk: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveEigenvalue(lambda));
    }
    let omega = lambda.sqrt();
    let n = fk.len();
    let mut c = Vec::with_capacity(n);
    let mut cd = Vec::with_capacity(n);
    let (mut acc_c, mut acc_s) = (0.0, 0.0);
    let (mut prev_c, mut prev_s) = (0.0, 0.0);
    for (m, &f) in fk.iter().enumerate() {
        let t = m as f64 * dt;
        let (sn, cs) = (omega * t).sin_cos();
        let gc = f * cs;
        let gs = f * sn;
        if m > 0 {
            acc_c += 0.5 * dt * (prev_c + gc);
            acc_s += 0.5 * dt * (prev_s + gs);
        }
        prev_c = gc;
        prev_s = gs;
        // ∫F sin(ω(t-τ)) = sin(ωt) C - cos(ωt) S, ∫F cos(ω(t-τ)) = cos(ωt) C + sin(ωt) S.
        c.push(u0k * cs + u1k * sn / omega + (sn * acc_c - cs * acc_s) / omega);
        cd.push(-omega * u0k * sn + u1k * cs + cs * acc_c + sn * acc_s);
    }
    Ok((c, cd))
}

/// Trajectory and velocity on interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSolution {
    pub u: SpaceTimeField,
    pub ut: SpaceTimeField,
}

/// Zero-exterior solve with no potential: `u = Σ cₖ(t) φₖ`.
pub fn solve_linear_modal(
    basis: &SpectralBasis,
    data: &CauchyData,
    source: Option<&SpaceTimeField>,
    grid: &Grid,
) -> Result<ModalSolution> {
    check_len(basis.len(), data.len())?;
    let n_t = grid.n_t();
    let n = basis.len();
    let fk = match source {
        Some(f) => {
            check_len(n, f.n_nodes())?;
            check_len(n_t, f.n_t())?;
            basis.project_columns(f.values())?
        }
        None => DMatrix::zeros(n, n_t + 1),
    };
    let u0k = basis.project_l2(&data.u0)?;
    let u1k = basis.project_l2(&data.u1)?;
    let mut c = DMatrix::zeros(n, n_t + 1);
    let mut cd = DMatrix::zeros(n, n_t + 1);
    let mut row = vec![0.0; n_t + 1];
    for k in 0..n {
        for (m, r) in row.iter_mut().enumerate() {
            *r = fk[(k, m)];
        }
        let (ck, cdk) = duhamel_coefficient(basis.lambda(k), u0k[k], u1k[k], &row, grid.dt())?;
        for m in 0..=n_t {
            c[(k, m)] = ck[m];
            cd[(k, m)] = cdk[m];
        }
    }
    let u = basis.phi() * c;
    let ut = basis.phi() * cd;
    Ok(ModalSolution {
        u: SpaceTimeField::new(u, NodeSet::Interior, grid.dt(), grid.t_final())?,
        ut: SpaceTimeField::new(ut, NodeSet::Interior, grid.dt(), grid.t_final())?,
    })
}

/// Interior source `-(A_full φ)|_Ω` of the zero-exterior problem for `v = u - φ`.
pub fn lift_exterior(control: &ExteriorControl, op: &FracOperator, grid: &Grid) -> Result<SpaceTimeField> {
    check_len(grid.n_ext(), control.values().nrows())?;
    check_len(grid.n_t(), control.n_t())?;
    let b = op.coupling();
    let src = -(b * control.values());
    SpaceTimeField::new(src, NodeSet::Interior, grid.dt(), grid.t_final())
}

/// Full-grid trajectory `u = v + φ`.
pub fn reassemble(v: &SpaceTimeField, control: Option<&ExteriorControl>, grid: &Grid) -> Result<SpaceTimeField> {
    check_len(grid.n_int(), v.n_nodes())?;
    let m = grid.m_collar();
    let n = grid.n_int();
    let mut full = DMatrix::zeros(grid.n_full(), v.n_t() + 1);
    full.view_mut((m, 0), (n, v.n_t() + 1)).copy_from(v.values());
    if let Some(c) = control {
        check_len(v.n_t(), c.n_t())?;
        for e in 0..grid.n_ext() {
            let j = grid.full_index_of_exterior(e);
            full.row_mut(j).copy_from(&c.values().row(e));
        }
    }
    SpaceTimeField::new(full, NodeSet::Full, v.dt(), v.t_final())
}

/// `sup_t (‖u(t)‖_{L²} + ‖∂ₜu(t)‖_{H⁻ˢ})`.
pub fn energy_sup(sol: &ModalSolution, basis: &SpectralBasis) -> Result<f64> {
    let mut best: f64 = 0.0;
    for n in 0..=sol.u.n_t() {
        let a = basis.l2_norm(&sol.u.slice(n));
        let b = basis.dual_norm(&sol.ut.slice(n))?;
        best = best.max(a + b);
    }
    Ok(best)
}

/// `‖u0‖_{L²} + ‖u1‖_{H⁻ˢ} + ‖F‖_{L²(0,T;H⁻ˢ)}`, trapezoid in time.
pub fn data_norm(data: &CauchyData, source: Option<&SpaceTimeField>, basis: &SpectralBasis) -> Result<f64> {
    let mut total = basis.l2_norm(&data.u0) + basis.dual_norm(&data.u1)?;
    if let Some(f) = source {
        let w = trapezoid_weights(f.n_t(), f.dt());
        let mut acc = 0.0;
        for n in 0..=f.n_t() {
            let d = basis.dual_norm(&f.slice(n))?;
            acc += w[n] * d * d;
        }
        total += acc.sqrt();
    }
    Ok(total)
}

/// Constant of the continuity estimate, `√3 max(1, √T)`.
pub fn energy_constant(t_final: f64) -> f64 {
    3f64.sqrt() * t_final.sqrt().max(1.0)
}

/// `Σ aᵢ φᵢ` for a coefficient list over the first modes.
pub fn modal_field(basis: &SpectralBasis, coeffs: &[f64]) -> DVector<f64> {
    let mut v = DVector::zeros(basis.len());
    for (k, &a) in coeffs.iter().enumerate() {
        v += basis.phi().column(k) * a;
    }
    v
}
