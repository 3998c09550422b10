//! Regularized exterior control: find `φ = Σ cᵢ bᵢ` whose interior response
//! approximates a target, by Tikhonov-regularized least squares on an
//! explicitly assembled Gram matrix.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dn::{interior_response, ForwardContext, Model};
use crate::error::{check_len, Error, Result};
use crate::linalg::{cholesky, spd_condition, trapezoid_weights};
use crate::model::Potential;
use crate::wave::{ExteriorControl, SpaceTimeField};

/// Condition estimates above this attach a warning to the solution.
pub const CONDITION_WARNING: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RungeNorm {
    /// `∫ h vᵀ A_int w dt`.
    Hs,
    /// `∫ h vᵀ w dt`.
    L2,
}

/// Interior response `u_φ - φ` of the linear model with potential `q`.
pub fn forward_map(ctx: &ForwardContext, q: &Potential, control: &ExteriorControl) -> Result<SpaceTimeField> {
    interior_response(ctx, &Model::Potential(q.clone()), control)
}

/// Space-time inner product of the chosen norm, trapezoid in time.
pub fn space_time_inner(ctx: &ForwardContext, norm: RungeNorm, a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    check_len(a.n_nodes(), b.n_nodes())?;
    check_len(a.n_t(), b.n_t())?;
    let w = trapezoid_weights(a.n_t(), a.dt());
    let h = ctx.h();
    let rhs = match norm {
        RungeNorm::Hs => ctx.op.interior() * b.values(),
        RungeNorm::L2 => b.values().clone(),
    };
    Ok(h * (0..=a.n_t())
        .map(|n| w[n] * a.values().column(n).dot(&rhs.column(n)))
        .sum::<f64>())
}

pub fn space_time_norm(ctx: &ForwardContext, norm: RungeNorm, a: &SpaceTimeField) -> Result<f64> {
    Ok(space_time_inner(ctx, norm, a, a)?.max(0.0).sqrt())
}

#[derive(Debug, Clone)]
pub struct RungeProblem {
    pub target: SpaceTimeField,
    pub norm: RungeNorm,
    pub basis: Vec<ExteriorControl>,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct RungeSolution {
    pub coefficients: DVector<f64>,
    pub control: ExteriorControl,
    /// Achieved interior response `Σ cᵢ forward_map(bᵢ)`.
    pub state: SpaceTimeField,
    /// `‖state - target‖` in the problem norm.
    pub residual: f64,
    /// `residual² + α_abs |c|²`.
    pub objective: f64,
    /// Dimensionless weight as requested.
    pub alpha: f64,
    /// `alpha` times the mean Gram diagonal, the weight actually added.
    pub alpha_abs: f64,
    pub condition: f64,
    pub warning: Option<String>,
}

/// Forward maps of a control basis and their Gram matrix, reusable across
/// targets and regularization weights.
#[derive(Debug, Clone)]
pub struct RungeSystem {
    norm: RungeNorm,
    basis: Vec<ExteriorControl>,
    outputs: Vec<SpaceTimeField>,
    gram: DMatrix<f64>,
}

impl RungeSystem {
    pub fn new(ctx: &ForwardContext, q: &Potential, basis: Vec<ExteriorControl>, norm: RungeNorm) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidInput("control basis is empty".into()));
        }
        let outputs: Vec<SpaceTimeField> = basis
            .par_iter()
            .map(|b| forward_map(ctx, q, b))
            .collect::<Result<_>>()?;
        Self::from_outputs(ctx, basis, outputs, norm)
    }

    pub fn from_outputs(
        ctx: &ForwardContext,
        basis: Vec<ExteriorControl>,
        outputs: Vec<SpaceTimeField>,
        norm: RungeNorm,
    ) -> Result<Self> {
        check_len(basis.len(), outputs.len())?;
        let k = basis.len();
        let mut gram = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let g = space_time_inner(ctx, norm, &outputs[i], &outputs[j])?;
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        Ok(Self {
            norm,
            basis,
            outputs,
            gram,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }
    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
    pub fn outputs(&self) -> &[SpaceTimeField] {
        &self.outputs
    }
    pub fn basis(&self) -> &[ExteriorControl] {
        &self.basis
    }
    pub fn norm(&self) -> RungeNorm {
        self.norm
    }

    /// System restricted to the first `k` basis controls.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidInput(format!(
                "cannot keep {k} of {} controls",
                self.len()
            )));
        }
        Ok(Self {
            norm: self.norm,
            basis: self.basis[..k].to_vec(),
            outputs: self.outputs[..k].to_vec(),
            gram: self.gram.view((0, 0), (k, k)).into_owned(),
        })
    }

    /// Mean of the Gram diagonal, the unit of the regularization weight.
    pub fn alpha_scale(&self) -> f64 {
        let s = self.gram.trace() / self.len() as f64;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Solve `(G + α s I) c = b` with `bᵢ = ⟨outputᵢ, target⟩` and `s` the
    /// mean Gram diagonal, so `α` does not depend on the control amplitude.
    pub fn solve(&self, ctx: &ForwardContext, target: &SpaceTimeField, alpha: f64) -> Result<RungeSolution> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        let k = self.len();
        let rhs = DVector::from_iterator(
            k,
            self.outputs
                .iter()
                .map(|o| space_time_inner(ctx, self.norm, o, target))
                .collect::<Result<Vec<f64>>>()?,
        );
        let alpha_abs = alpha * self.alpha_scale();
        let mut sys = self.gram.clone();
        for i in 0..k {
            sys[(i, i)] += alpha_abs;
        }
        let condition = spd_condition(&sys)?;
        let coefficients = cholesky(sys)?.solve(&rhs);
        let mut state = SpaceTimeField::zeros(&ctx.grid, crate::wave::NodeSet::Interior);
        for (o, &c) in self.outputs.iter().zip(coefficients.iter()) {
            state = state.axpy(c, o)?;
        }
        let residual = space_time_norm(ctx, self.norm, &state.axpy(-1.0, target)?)?;
        let control = ExteriorControl::combine(&self.basis, &coefficients)?;
        let warning = (condition > CONDITION_WARNING)
            .then(|| format!("regularized Gram condition estimate {condition:.3e} exceeds {CONDITION_WARNING:e}"));
        Ok(RungeSolution {
            objective: residual * residual + alpha_abs * coefficients.norm_squared(),
            coefficients,
            control,
            state,
            residual,
            alpha,
            alpha_abs,
            condition,
            warning,
        })
    }
}

pub fn approximate_target(ctx: &ForwardContext, problem: &RungeProblem, q: &Potential) -> Result<RungeSolution> {
    let sys = RungeSystem::new(ctx, q, problem.basis.clone(), problem.norm)?;
    sys.solve(ctx, &problem.target, problem.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub basis_size: usize,
    pub residual: f64,
    pub objective: f64,
    pub condition: f64,
}

impl From<&RungeSolution> for SweepRow {
    fn from(s: &RungeSolution) -> Self {
        Self {
            alpha: s.alpha,
            basis_size: s.coefficients.len(),
            residual: s.residual,
            objective: s.objective,
            condition: s.condition,
        }
    }
}

pub fn alpha_sweep(
    ctx: &ForwardContext,
    sys: &RungeSystem,
    target: &SpaceTimeField,
    alphas: &[f64],
) -> Result<Vec<SweepRow>> {
    alphas
        .iter()
        .map(|&a| sys.solve(ctx, target, a).map(|s| SweepRow::from(&s)))
        .collect()
}

pub fn basis_sweep(
    ctx: &ForwardContext,
    sys: &RungeSystem,
    target: &SpaceTimeField,
    sizes: &[usize],
    alpha: f64,
) -> Result<Vec<SweepRow>> {
    sizes
        .iter()
        .map(|&k| sys.truncated(k)?.solve(ctx, target, alpha).map(|s| SweepRow::from(&s)))
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "alpha,basis_size,residual,objective,condition")?;
    for r in rows {
        writeln!(
            w,
            "{:.6e},{},{:.17e},{:.17e},{:.6e}",
            r.alpha, r.basis_size, r.residual, r.objective, r.condition
        )?;
    }
    Ok(())
}
