use nalgebra::DVector;

use crate::error::{check_len, Result};
use crate::grid::Grid;
use crate::linalg::trapezoid_weights;
use crate::model::Potential;
use crate::operator::FracOperator;
use crate::spectral::SpectralBasis;

use super::field::{CauchyData, SpaceTimeField};
use super::picard::{solve_with_potential_picard, PicardOptions};

fn normalized(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + f64::EPSILON)
}

/// Duality residual against the backward solution `v` with source `G`.
///
/// `v(t) = w(T - t)` where `w` solves the forward problem from rest with
/// source `G(T - ·)`. Returns `|L - R| / (|L| + |R| + ε)` for
/// `L = ∫⟨u, G⟩` and `R = ∫⟨F, v⟩ + ⟨u₁, v(0)⟩ - ⟨u₀, ∂ₜv(0)⟩`.
#[allow(clippy::too_many_arguments)]
pub fn very_weak_residual(
    u: &SpaceTimeField,
    data: &CauchyData,
    source: Option<&SpaceTimeField>,
    q: Option<&Potential>,
    g: &SpaceTimeField,
    basis: &SpectralBasis,
    grid: &Grid,
    opts: &PicardOptions,
) -> Result<f64> {
    let h = basis.h();
    check_len(basis.len(), u.n_nodes())?;
    let zero_q = Potential::zero(basis.len());
    let q = q.unwrap_or(&zero_q);
    let reversed = g.time_reverse();
    let (w, _) = solve_with_potential_picard(basis, q, &CauchyData::zeros(basis.len()), Some(&reversed), grid, opts)?;
    let v = w.u.time_reverse();
    let v0 = w.u.slice(grid.n_t());
    let vt0 = -w.ut.slice(grid.n_t());

    let lhs = u.l2_inner(g, h)?;
    let mut rhs = h * (data.u1.dot(&v0) - data.u0.dot(&vt0));
    if let Some(f) = source {
        rhs += f.l2_inner(&v, h)?;
    }
    Ok(normalized(lhs, rhs))
}

/// Separable smooth test function `ψ(x) η(t)` with
/// `η(t) = (1 - t/t_end)³ cos(κ t)` on `[0, t_end)` and zero afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTest {
    pub space: DVector<f64>,
    pub t_end: f64,
    pub kappa: f64,
}

impl SeparableTest {
    /// `(η, η', η'')` at `t`.
    pub fn profile(&self, t: f64) -> (f64, f64, f64) {
        if t >= self.t_end {
            return (0.0, 0.0, 0.0);
        }
        let a = 1.0 - t / self.t_end;
        let p = a * a * a;
        let dp = -3.0 * a * a / self.t_end;
        let ddp = 6.0 * a / (self.t_end * self.t_end);
        let (sn, cs) = (self.kappa * t).sin_cos();
        let k = self.kappa;
        let e = p * cs;
        let de = dp * cs - k * p * sn;
        let dde = ddp * cs - 2.0 * k * dp * sn - k * k * p * cs;
        (e, de, dde)
    }
}

/// Residual of the distributional identity
/// `∫u(∂ₜ²φ + Aφ + qφ) = ∫⟨F, φ⟩ + ⟨u₁, φ(0)⟩ - ⟨u₀, ∂ₜφ(0)⟩`, normalized as in
/// [`very_weak_residual`]. `φ` vanishes on the collar.
///
/// The data terms carry the signs produced by integrating `∂ₜ²u φ` by parts
/// twice, the same ones that appear in the duality identity.
pub fn distributional_residual(
    u: &SpaceTimeField,
    data: &CauchyData,
    source: Option<&SpaceTimeField>,
    q: Option<&Potential>,
    phi: &SeparableTest,
    op: &FracOperator,
    grid: &Grid,
) -> Result<f64> {
    let h = grid.h();
    check_len(grid.n_int(), u.n_nodes())?;
    check_len(grid.n_int(), phi.space.len())?;
    let mut a_psi = op.apply_interior(&phi.space)?;
    if let Some(q) = q {
        a_psi += q.values().component_mul(&phi.space);
    }
    let w = trapezoid_weights(grid.n_t(), grid.dt());
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for n in 0..=grid.n_t() {
        let (e, _, dde) = phi.profile(grid.time(n));
        let un = u.values().column(n);
        lhs += w[n] * h * (dde * un.dot(&phi.space) + e * un.dot(&a_psi));
        if let Some(f) = source {
            rhs += w[n] * h * e * f.values().column(n).dot(&phi.space);
        }
    }
    let (e0, de0, _) = phi.profile(0.0);
    rhs += h * (e0 * data.u1.dot(&phi.space) - de0 * data.u0.dot(&phi.space));
    Ok(normalized(lhs, rhs))
}
