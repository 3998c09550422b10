use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::{Grid, Window};
use crate::linalg::trapezoid_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSet {
    Interior,
    Full,
}

/// Nodal values over the time grid; column `n` is the slice at `t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    values: DMatrix<f64>,
    node_set: NodeSet,
    dt: f64,
    t_final: f64,
}

impl SpaceTimeField {
    pub fn new(values: DMatrix<f64>, node_set: NodeSet, dt: f64, t_final: f64) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(Error::InvalidInput(
                "a trajectory needs at least two time slices".into(),
            ));
        }
        let n_t = values.ncols() - 1;
        if (n_t as f64 * dt - t_final).abs() > 1e-12 * t_final {
            return Err(Error::InvalidInput(format!(
                "{n_t} steps of {dt} do not span T = {t_final}"
            )));
        }
        Ok(Self {
            values,
            node_set,
            dt,
            t_final,
        })
    }

    pub fn zeros(grid: &Grid, node_set: NodeSet) -> Self {
        let rows = match node_set {
            NodeSet::Interior => grid.n_int(),
            NodeSet::Full => grid.n_full(),
        };
        Self {
            values: DMatrix::zeros(rows, grid.n_t() + 1),
            node_set,
            dt: grid.dt(),
            t_final: grid.t_final(),
        }
    }

    /// Interior field from `f(x, t)`.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = DMatrix::from_fn(grid.n_int(), grid.n_t() + 1, |i, n| f(grid.x_interior(i), grid.time(n)));
        Self {
            values,
            node_set: NodeSet::Interior,
            dt: grid.dt(),
            t_final: grid.t_final(),
        }
    }

    /// Interior field `space(x) * time(t)`.
    pub fn separable(grid: &Grid, space: &DVector<f64>, time: impl Fn(f64) -> f64) -> Result<Self> {
        check_len(grid.n_int(), space.len())?;
        let row: Vec<f64> = (0..=grid.n_t()).map(|n| time(grid.time(n))).collect();
        let values = DMatrix::from_fn(grid.n_int(), grid.n_t() + 1, |i, n| space[i] * row[n]);
        Self::new(values, NodeSet::Interior, grid.dt(), grid.t_final())
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }
    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
    pub fn node_set(&self) -> NodeSet {
        self.node_set
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn n_t(&self) -> usize {
        self.values.ncols() - 1
    }
    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn slice(&self, n: usize) -> DVector<f64> {
        self.values.column(n).into_owned()
    }

    /// Slice `n` maps to slice `N_t - n`.
    pub fn time_reverse(&self) -> Self {
        let n_t = self.n_t();
        let values = DMatrix::from_fn(self.n_nodes(), n_t + 1, |i, n| self.values[(i, n_t - n)]);
        Self { values, ..self.clone() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: &self.values * c,
            ..self.clone()
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        check_len(self.n_nodes(), other.n_nodes())?;
        check_len(self.n_t(), other.n_t())?;
        if self.node_set != other.node_set {
            return Err(Error::InvalidInput("node sets differ".into()));
        }
        Ok(())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            values: &self.values + &other.values * c,
            ..self.clone()
        })
    }

    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_t(), self.dt)
    }

    /// `Σ_n w_n h uₙᵀ vₙ` with trapezoid weights in time.
    pub fn l2_inner(&self, other: &Self, h: f64) -> Result<f64> {
        self.check_compatible(other)?;
        let w = self.time_weights();
        Ok(h * (0..=self.n_t())
            .map(|n| w[n] * self.values.column(n).dot(&other.values.column(n)))
            .sum::<f64>())
    }

    pub fn l2_norm(&self, h: f64) -> f64 {
        self.l2_inner(self, h).unwrap_or(0.0).sqrt()
    }

    /// `sup_t (h |u(t)|²)^{1/2}`.
    pub fn sup_l2(&self, h: f64) -> f64 {
        self.values
            .column_iter()
            .map(|c| (h * c.norm_squared()).sqrt())
            .fold(0.0, f64::max)
    }

    /// CSV rows `t,x,u`.
    pub fn write_csv<W: Write>(&self, grid: &Grid, mut w: W) -> Result<()> {
        writeln!(w, "t,x,u")?;
        for n in 0..=self.n_t() {
            let t = grid.time(n);
            for i in 0..self.n_nodes() {
                let x = match self.node_set {
                    NodeSet::Interior => grid.x_interior(i),
                    NodeSet::Full => grid.x_full(i),
                };
                writeln!(w, "{t:.17e},{x:.17e},{:.17e}", self.values[(i, n)])?;
            }
        }
        Ok(())
    }

    /// Binary trajectory: magic, `N_t` and node count (u64), `dt`, `h`, `s`
    /// (f64), then slices in time order, little-endian f64.
    pub fn write_binary<W: Write>(&self, h: f64, s: f64, mut w: W) -> Result<()> {
        w.write_all(b"NLWTRJ01")?;
        w.write_all(&(self.n_t() as u64).to_le_bytes())?;
        w.write_all(&(self.n_nodes() as u64).to_le_bytes())?;
        for v in [self.dt, h, s] {
            w.write_all(&v.to_le_bytes())?;
        }
        for x in self.values.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`write_binary`](Self::write_binary); returns the field, `h` and `s`.
    pub fn read_binary(bytes: &[u8]) -> Result<(Self, f64, f64)> {
        let bad = || Error::InvalidInput("malformed trajectory file".into());
        if bytes.len() < 48 || &bytes[..8] != b"NLWTRJ01" {
            return Err(bad());
        }
        let word = |k: usize| -> [u8; 8] { bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap() };
        let n_t = u64::from_le_bytes(word(0)) as usize;
        let nodes = u64::from_le_bytes(word(1)) as usize;
        let dt = f64::from_le_bytes(word(2));
        let h = f64::from_le_bytes(word(3));
        let s = f64::from_le_bytes(word(4));
        let body = &bytes[48..];
        if body.len() != 8 * nodes * (n_t + 1) {
            return Err(bad());
        }
        let data: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let values = DMatrix::from_vec(nodes, n_t + 1, data);
        Ok((
            Self {
                values,
                node_set: NodeSet::Interior,
                dt,
                t_final: dt * n_t as f64,
            },
            h,
            s,
        ))
    }
}

/// Initial displacement (L²) and velocity (H⁻ˢ functional) on interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub u0: DVector<f64>,
    pub u1: DVector<f64>,
}

impl CauchyData {
    pub fn new(u0: DVector<f64>, u1: DVector<f64>) -> Result<Self> {
        check_len(u0.len(), u1.len())?;
        if u0.iter().chain(u1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite Cauchy data".into()));
        }
        Ok(Self { u0, u1 })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            u0: DVector::zeros(n),
            u1: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.u0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u0.is_empty()
    }
}

/// `6x⁵ - 15x⁴ + 10x³` clamped to `[0, 1]`.
fn smootherstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

/// Temporal profile of the default control basis: a C² window supported in
/// `[T/16, 15T/16]` with ramps of length `T/4`, times `sin(mπ(t-a)/(T-2a))`.
pub fn windowed_sine(t: f64, t_final: f64, freq: usize) -> f64 {
    let a = t_final / 16.0;
    let ramp = t_final / 4.0;
    let window = smootherstep((t - a) / ramp) * smootherstep((t_final - a - t) / ramp);
    if window == 0.0 {
        return 0.0;
    }
    window * (freq as f64 * std::f64::consts::PI * (t - a) / (t_final - 2.0 * a)).sin()
}

/// Exterior Dirichlet data on a control window.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorControl {
    values: DMatrix<f64>,
    mask: Vec<bool>,
}

impl ExteriorControl {
    /// Validates support in the mask and vanishing of the first two and last
    /// two time slices.
    pub fn new(values: DMatrix<f64>, mask: Vec<bool>) -> Result<Self> {
        check_len(mask.len(), values.nrows())?;
        if values.ncols() < 4 {
            return Err(Error::InvalidControl("need at least 4 time slices".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidControl("non-finite value".into()));
        }
        let n_t = values.ncols() - 1;
        for (e, &on) in mask.iter().enumerate() {
            if !on && values.row(e).iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidControl(format!("nonzero outside the mask at node {e}")));
            }
            let row = values.row(e);
            let tol = 1e-14 * row.amax();
            for n in [0, 1, n_t - 1, n_t] {
                if row[n].abs() > tol {
                    return Err(Error::InvalidControl(format!(
                        "node {e} is not at rest at time slice {n}"
                    )));
                }
            }
        }
        Ok(Self { values, mask })
    }

    pub fn zero(grid: &Grid, window: Window) -> Self {
        Self {
            values: DMatrix::zeros(grid.n_ext(), grid.n_t() + 1),
            mask: grid.mask(window).to_vec(),
        }
    }

    /// Unit value on exterior node `node` times [`windowed_sine`] of frequency `freq`.
    pub fn tensor_bump(grid: &Grid, window: Window, node: usize, freq: usize) -> Result<Self> {
        let mask = grid.mask(window).to_vec();
        if node >= mask.len() || !mask[node] {
            return Err(Error::InvalidControl(format!("node {node} is not in {window:?}")));
        }
        if freq == 0 {
            return Err(Error::InvalidControl("frequency must be at least 1".into()));
        }
        let mut values = DMatrix::zeros(grid.n_ext(), grid.n_t() + 1);
        for n in 0..=grid.n_t() {
            values[(node, n)] = windowed_sine(grid.time(n), grid.t_final(), freq);
        }
        Self::new(values, mask)
    }

    /// All window nodes times the first `n_freq` frequencies, node-major.
    pub fn tensor_basis(grid: &Grid, window: Window, n_freq: usize) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for node in grid.window_nodes(window) {
            for m in 1..=n_freq {
                out.push(Self::tensor_bump(grid, window, node, m)?);
            }
        }
        Ok(out)
    }

    /// `Σ cᵢ bᵢ`, accumulated in index order.
    pub fn combine(basis: &[Self], coeffs: &DVector<f64>) -> Result<Self> {
        check_len(basis.len(), coeffs.len())?;
        let first = basis
            .first()
            .ok_or_else(|| Error::InvalidControl("empty basis".into()))?;
        let mut values = DMatrix::zeros(first.values.nrows(), first.values.ncols());
        let mut mask = vec![false; first.mask.len()];
        for (b, &c) in basis.iter().zip(coeffs.iter()) {
            check_len(values.ncols(), b.values.ncols())?;
            values += &b.values * c;
            for (m, &bm) in mask.iter_mut().zip(&b.mask) {
                *m |= bm;
            }
        }
        Ok(Self { values, mask })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn n_t(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn slice(&self, n: usize) -> Vec<f64> {
        self.values.column(n).iter().copied().collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: &self.values * c,
            mask: self.mask.clone(),
        }
    }

    pub fn time_reverse(&self) -> Self {
        let n_t = self.n_t();
        let values = DMatrix::from_fn(self.values.nrows(), n_t + 1, |e, n| self.values[(e, n_t - n)]);
        Self {
            values,
            mask: self.mask.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}
