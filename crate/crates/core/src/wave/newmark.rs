use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::model::{PolyNonlinearity, Potential};
use crate::operator::FracOperator;

use super::field::{CauchyData, ExteriorControl, NodeSet, SpaceTimeField};

/// Zeroth-order term of the equation.
#[derive(Debug, Clone, Copy)]
pub enum Reaction<'a> {
    None,
    Potential(&'a Potential),
    Nonlinear(&'a PolyNonlinearity),
}

/// Relative safety margin applied to the spectral bound in the CFL check.
pub const CFL_MARGIN: f64 = 0.05;

/// Upper bound on the spectrum of `A_int + q`: Gershgorin radius of `A_int`
/// plus `max q⁺`.
pub fn spectral_bound(op: &FracOperator, reaction: Reaction<'_>) -> f64 {
    let a = op.interior();
    let gersh = a
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let shift = match reaction {
        Reaction::Potential(q) => q.values().max().max(0.0),
        _ => 0.0,
    };
    gersh + shift
}

/// Largest stable step, `2 / sqrt(λ_bound (1 + margin))`.
pub fn stable_dt(op: &FracOperator, reaction: Reaction<'_>) -> f64 {
    2.0 / (spectral_bound(op, reaction) * (1.0 + CFL_MARGIN)).sqrt()
}

/// Explicit central differences for `∂ₜ²u + A u + q u + f(x, u) = F` on the
/// interior, with `u` equal to the control on the collar.
///
/// `u¹ = u⁰ + dt u₁ + dt²/2 a⁰`, then `uⁿ⁺¹ = 2uⁿ - uⁿ⁻¹ + dt² aⁿ`.
pub fn solve_newmark(
    op: &FracOperator,
    reaction: Reaction<'_>,
    control: Option<&ExteriorControl>,
    data: &CauchyData,
    source: Option<&SpaceTimeField>,
    grid: &Grid,
) -> Result<SpaceTimeField> {
    let n = grid.n_int();
    let n_t = grid.n_t();
    let dt = grid.dt();
    check_len(n, data.len())?;
    let bound = stable_dt(op, reaction);
    if dt > bound {
        return Err(Error::Cfl { dt, bound });
    }
    if let Reaction::Potential(q) = reaction {
        check_len(n, q.len())?;
    }
    if let Reaction::Nonlinear(f) = reaction {
        if let Some(m) = f.n_nodes() {
            check_len(n, m)?;
        }
    }
    if let Some(f) = source {
        check_len(n, f.n_nodes())?;
        check_len(n_t, f.n_t())?;
    }
    let a_int = op.interior_owned();
    let forcing: Option<DMatrix<f64>> = control.map(|c| -(op.coupling() * c.values()));
    if let Some(c) = control {
        check_len(n_t, c.n_t())?;
    }

    let accel = |u: &DVector<f64>, step: usize| -> DVector<f64> {
        let mut a = -(&a_int * u);
        match reaction {
            Reaction::None => {}
            Reaction::Potential(q) => a -= q.values().component_mul(u),
            Reaction::Nonlinear(f) => a -= f.eval_field(u),
        }
        if let Some(fc) = &forcing {
            a += fc.column(step);
        }
        if let Some(f) = source {
            a += f.values().column(step);
        }
        a
    };

    let mut out = DMatrix::zeros(n, n_t + 1);
    let u0 = data.u0.clone();
    let a0 = accel(&u0, 0);
    let u1 = &u0 + &data.u1 * dt + a0 * (0.5 * dt * dt);
    out.set_column(0, &u0);
    out.set_column(1, &u1);
    let mut prev = u0;
    let mut cur = u1;
    for step in 1..n_t {
        let a = accel(&cur, step);
        let next = &cur * 2.0 - &prev + a * (dt * dt);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: step + 1 });
        }
        out.set_column(step + 1, &next);
        prev = cur;
        cur = next;
    }
    SpaceTimeField::new(out, NodeSet::Interior, dt, grid.t_final())
}
