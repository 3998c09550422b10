//! Dirichlet-to-Neumann pairings `⟨Λφ, ψ⟩ = Σₙ wₙ h ψ(tₙ)ᵀ A_full u(tₙ)`.
//!
//! Since `ψ` lives on the collar, only exterior rows of `A_full u` are needed:
//! `Bᵀ v + A_ee φ`, with `v` the interior part of the solution.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::linalg::trapezoid_weights;
use crate::model::{PolyNonlinearity, Potential};
use crate::operator::FracOperator;
use crate::spectral::SpectralBasis;
use crate::wave::{
    lift_exterior, reassemble, solve_newmark, solve_with_potential_picard, CauchyData, ExteriorControl, PicardOptions,
    Reaction, SpaceTimeField,
};

/// Grid, operator and eigenbasis shared by every solve on one configuration.
#[derive(Debug, Clone)]
pub struct ForwardContext {
    pub grid: Grid,
    pub op: FracOperator,
    pub basis: SpectralBasis,
    pub picard: PicardOptions,
}

impl ForwardContext {
    pub fn new(grid: Grid, s: f64) -> Result<Self> {
        let op = FracOperator::assemble(&grid, s)?;
        let basis = SpectralBasis::eigendecompose(&op)?;
        Ok(Self {
            grid,
            op,
            basis,
            picard: PicardOptions::default(),
        })
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }
}

/// Zeroth-order term of a forward model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Potential(Potential),
    Nonlinear(PolyNonlinearity),
}

impl Model {
    pub fn tag(&self) -> String {
        match self {
            Model::Potential(q) => format!("potential(n={}, max|q|={:e}, p={})", q.len(), q.max_abs(), q.p()),
            Model::Nonlinear(f) => format!("nonlinearity(kind={:?}, r={:?})", f.kind(), f.exponents()),
        }
    }
}

/// Interior part `v = u - φ` of the solution driven by `control` from rest.
///
/// Potentials use the Picard solver; nonlinear models use central differences.
pub fn interior_response(ctx: &ForwardContext, model: &Model, control: &ExteriorControl) -> Result<SpaceTimeField> {
    let n = ctx.grid.n_int();
    match model {
        Model::Potential(q) => {
            let src = lift_exterior(control, &ctx.op, &ctx.grid)?;
            let (sol, _) =
                solve_with_potential_picard(&ctx.basis, q, &CauchyData::zeros(n), Some(&src), &ctx.grid, &ctx.picard)?;
            Ok(sol.u)
        }
        Model::Nonlinear(f) => {
            let reaction = if f.is_zero() {
                Reaction::None
            } else {
                Reaction::Nonlinear(f)
            };
            solve_newmark(&ctx.op, reaction, Some(control), &CauchyData::zeros(n), None, &ctx.grid)
        }
    }
}

/// Full-grid solution with exterior values equal to the control.
pub fn solve_exterior(ctx: &ForwardContext, model: &Model, control: &ExteriorControl) -> Result<SpaceTimeField> {
    let v = interior_response(ctx, model, control)?;
    reassemble(&v, Some(control), &ctx.grid)
}

/// Exterior-row evaluation of the pairing from a precomputed interior response.
pub fn pairing_from_response(
    ctx: &ForwardContext,
    v: &SpaceTimeField,
    control: &ExteriorControl,
    test: &ExteriorControl,
) -> Result<f64> {
    let g = &ctx.grid;
    check_len(g.n_int(), v.n_nodes())?;
    check_len(v.n_t(), test.n_t())?;
    check_len(v.n_t(), control.n_t())?;
    let b = ctx.op.coupling();
    let aee = ctx.op.exterior_block();
    // Exterior rows of A_full u at every time slice.
    let rows = b.tr_mul(v.values()) + aee * control.values();
    let w = trapezoid_weights(g.n_t(), g.dt());
    Ok(g.h()
        * (0..=g.n_t())
            .map(|n| w[n] * test.values().column(n).dot(&rows.column(n)))
            .sum::<f64>())
}

/// Quadratic-form evaluation on the full grid, `Σₙ wₙ h ψ_fullᵀ A_full u_full`.
pub fn pairing_full(ctx: &ForwardContext, u_full: &SpaceTimeField, test: &ExteriorControl) -> Result<f64> {
    let g = &ctx.grid;
    check_len(g.n_full(), u_full.n_nodes())?;
    let psi = reassemble(&SpaceTimeField::zeros(g, crate::wave::NodeSet::Interior), Some(test), g)?;
    let w = trapezoid_weights(g.n_t(), g.dt());
    let mut acc = 0.0;
    for n in 0..=g.n_t() {
        let au = ctx.op.apply(&u_full.slice(n))?;
        acc += w[n] * psi.values().column(n).dot(&au);
    }
    Ok(g.h() * acc)
}

pub fn dn_pairing(
    ctx: &ForwardContext,
    model: &Model,
    control: &ExteriorControl,
    test: &ExteriorControl,
) -> Result<f64> {
    let v = interior_response(ctx, model, control)?;
    pairing_from_response(ctx, &v, control, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnMeta {
    pub s: f64,
    pub t_final: f64,
    pub signature: String,
    pub model_tag: String,
}

/// Matrix of pairings `values[i][j] = ⟨Λ controls[i], tests[j]⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DnMeasurement {
    pub values: DMatrix<f64>,
    pub controls: Vec<ExteriorControl>,
    pub tests: Vec<ExteriorControl>,
    pub meta: DnMeta,
}

/// One forward solve per control (in parallel), reused across all tests.
pub fn dn_matrix(
    ctx: &ForwardContext,
    model: &Model,
    controls: &[ExteriorControl],
    tests: &[ExteriorControl],
) -> Result<DnMeasurement> {
    if controls.is_empty() || tests.is_empty() {
        return Err(Error::InvalidInput("DN matrix needs controls and tests".into()));
    }
    let rows: Vec<Vec<f64>> = controls
        .par_iter()
        .map(|c| {
            let v = interior_response(ctx, model, c)?;
            tests
                .iter()
                .map(|t| pairing_from_response(ctx, &v, c, t))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(controls.len(), tests.len(), |i, j| rows[i][j]);
    Ok(DnMeasurement {
        values,
        controls: controls.to_vec(),
        tests: tests.to_vec(),
        meta: DnMeta {
            s: ctx.op.s(),
            t_final: ctx.grid.t_final(),
            signature: ctx.grid.signature(),
            model_tag: model.tag(),
        },
    })
}

/// Largest `|⟨Λφᵢ, ψⱼ*⟩ - ⟨Λψⱼ, φᵢ*⟩|` relative to the largest pairing.
pub fn reciprocity_asymmetry(
    ctx: &ForwardContext,
    model: &Model,
    controls: &[ExteriorControl],
    tests: &[ExteriorControl],
) -> Result<f64> {
    let rev_tests: Vec<ExteriorControl> = tests.iter().map(|t| t.time_reverse()).collect();
    let rev_controls: Vec<ExteriorControl> = controls.iter().map(|c| c.time_reverse()).collect();
    let forward = dn_matrix(ctx, model, controls, &rev_tests)?;
    let backward = dn_matrix(ctx, model, tests, &rev_controls)?;
    let diff = (&forward.values - backward.values.transpose()).amax();
    let scale = forward.values.amax().max(backward.values.amax());
    Ok(if scale > 0.0 { diff / scale } else { 0.0 })
}

#[derive(Serialize, Deserialize)]
struct ControlRecord {
    mask: Vec<bool>,
    /// Row per exterior node.
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DnFile {
    format: String,
    version: u32,
    meta: DnMeta,
    rows: usize,
    cols: usize,
    values: Vec<Vec<f64>>,
    controls: Vec<ControlRecord>,
    tests: Vec<ControlRecord>,
}

const DN_FORMAT: &str = "nlwave-dn";
const DN_VERSION: u32 = 1;

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::InvalidInput("ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl ControlRecord {
    fn from_control(c: &ExteriorControl) -> Self {
        Self {
            mask: c.mask().to_vec(),
            values: to_rows(c.values()),
        }
    }
    fn into_control(self) -> Result<ExteriorControl> {
        ExteriorControl::new(from_rows(&self.values)?, self.mask)
    }
}

impl DnMeasurement {
    /// Entry-wise difference after checking both sets share a grid.
    pub fn difference(&self, other: &DnMeasurement) -> Result<DMatrix<f64>> {
        if self.meta.signature != other.meta.signature {
            return Err(Error::SignatureMismatch {
                expected: self.meta.signature.clone(),
                found: other.meta.signature.clone(),
            });
        }
        check_len(self.values.nrows(), other.values.nrows())?;
        check_len(self.values.ncols(), other.values.ncols())?;
        Ok(&self.values - &other.values)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DnFile {
            format: DN_FORMAT.into(),
            version: DN_VERSION,
            meta: self.meta.clone(),
            rows: self.values.nrows(),
            cols: self.values.ncols(),
            values: to_rows(&self.values),
            controls: self.controls.iter().map(ControlRecord::from_control).collect(),
            tests: self.tests.iter().map(ControlRecord::from_control).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parse and check the grid signature against `grid`.
    pub fn from_json(text: &str, grid: &Grid) -> Result<Self> {
        let file: DnFile = serde_json::from_str(text)?;
        if file.format != DN_FORMAT || file.version != DN_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported DN file {} v{}",
                file.format, file.version
            )));
        }
        let expected = grid.signature();
        if file.meta.signature != expected {
            return Err(Error::SignatureMismatch {
                expected,
                found: file.meta.signature,
            });
        }
        let values = from_rows(&file.values)?;
        check_len(file.rows, values.nrows())?;
        check_len(file.controls.len(), values.nrows())?;
        check_len(file.tests.len(), values.ncols())?;
        Ok(Self {
            values,
            controls: file
                .controls
                .into_iter()
                .map(ControlRecord::into_control)
                .collect::<Result<_>>()?,
            tests: file
                .tests
                .into_iter()
                .map(ControlRecord::into_control)
                .collect::<Result<_>>()?,
            meta: file.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path, grid: &Grid) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, grid)
    }
}

/// Pairing of a linear model as a bilinear form in basis coefficients.
pub fn bilinear(values: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    check_len(values.nrows(), a.len())?;
    check_len(values.ncols(), b.len())?;
    Ok(a.dot(&(values * b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Window;

    fn ctx() -> ForwardContext {
        let g = Grid::new(0.0, 1.0, 12, 2, 0..2, 2..4, 1.0, 64).unwrap();
        ForwardContext::new(g, 0.6).unwrap()
    }

    #[test]
    fn zero_control_gives_zero() {
        let c = ctx();
        let z = ExteriorControl::zero(&c.grid, Window::W1);
        let t = ExteriorControl::tensor_bump(&c.grid, Window::W2, 2, 1).unwrap();
        let m = Model::Potential(Potential::zero(12));
        assert_eq!(dn_pairing(&c, &m, &z, &t).unwrap(), 0.0);
    }

    #[test]
    fn two_evaluations_agree() {
        let c = ctx();
        let phi = ExteriorControl::tensor_bump(&c.grid, Window::W1, 1, 2).unwrap();
        let m = Model::Potential(Potential::zero(12));
        let a = dn_pairing(&c, &m, &phi, &phi).unwrap();
        let u = solve_exterior(&c, &m, &phi).unwrap();
        let b = pairing_full(&c, &u, &phi).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} {b}");
    }

    #[test]
    fn json_round_trip_and_signature_check() {
        let c = ctx();
        let m = Model::Potential(Potential::constant(12, 0.3));
        let phi = ExteriorControl::tensor_bump(&c.grid, Window::W1, 0, 1).unwrap();
        let psi = ExteriorControl::tensor_bump(&c.grid, Window::W2, 3, 1).unwrap();
        let d = dn_matrix(&c, &m, &[phi], &[psi]).unwrap();
        let text = d.to_json().unwrap();
        let back = DnMeasurement::from_json(&text, &c.grid).unwrap();
        assert_eq!(back, d);
        let other = c.grid.with_time(1.0, 32).unwrap();
        assert!(matches!(
            DnMeasurement::from_json(&text, &other),
            Err(Error::SignatureMismatch { .. })
        ));
    }
}
