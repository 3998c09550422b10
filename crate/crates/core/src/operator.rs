//! Fractional centered-difference discretization of the restricted
//! fractional Laplacian with zero exterior values.
//!
//! For `0 < s <= 1` the stencil is `h^{-2s} g_|i-j|` with
//! `g_j = (-1)^j Γ(2s+1) / (Γ(s-j+1) Γ(s+j+1))`, whose symbol is
//! `|2 sin(ξ/2)|^{2s}`. The stencil is not truncated: it spans the whole grid.
//!
//! For `s > 1` we write `s = k + α` and apply the 3-point Laplacian `k` times
//! to the α-order operator. The α-stencil is built on a grid padded by `k`
//! nodes on each side and the product is restricted afterwards, which
//! reproduces the composition on the infinite lattice (both factors are
//! Toeplitz there, so the result is symmetric up to rounding).

use std::io::Write;

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

/// Fractional centered-difference weights `g_0..=g_{j_max}` for `0 < s <= 1`.
pub fn centered_weights(s: f64, j_max: usize) -> Result<Vec<f64>> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidOrder {
            s,
            reason: "centered weights need 0 < s <= 1".into(),
        });
    }
    if j_max < 1 {
        return Err(Error::InvalidInput("j_max must be at least 1".into()));
    }
    Ok(gamma_weights(s, j_max))
}

/// Log-Γ evaluation with sign tracking. Valid for any `s > -1/2`.
pub(crate) fn gamma_weights(s: f64, j_max: usize) -> Vec<f64> {
    let (lg_num, sg_num) = libm::lgamma_r(2.0 * s + 1.0);
    (0..=j_max)
        .map(|j| {
            let a = s - j as f64 + 1.0;
            if a <= 0.0 && a == a.round() {
                // 1/Γ vanishes at the poles.
                return 0.0;
            }
            let (lg_a, sg_a) = libm::lgamma_r(a);
            let (lg_b, sg_b) = libm::lgamma_r(s + j as f64 + 1.0);
            let parity = if j % 2 == 0 { 1 } else { -1 };
            let sign = parity * sg_num * sg_a * sg_b;
            sign as f64 * (lg_num - lg_a - lg_b).exp()
        })
        .collect()
}

/// Dense discretization of `(-Δ)^s` on a [`Grid`].
#[derive(Debug, Clone)]
pub struct FracOperator {
    s: f64,
    h: f64,
    m_collar: usize,
    n_int: usize,
    weights: Vec<f64>,
    full: DMatrix<f64>,
    asymmetry: f64,
}

fn toeplitz(weights: &[f64], n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| scale * weights.get(i.abs_diff(j)).copied().unwrap_or(0.0))
}

impl FracOperator {
    /// Assemble the operator. Integer orders other than the `s = 1`
    /// calibration case are rejected.
    pub fn assemble(grid: &Grid, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidOrder {
                s,
                reason: "order must be positive and finite".into(),
            });
        }
        if s > 1.0 && s == s.round() {
            return Err(Error::InvalidOrder {
                s,
                reason: "integer orders above 1 are not supported".into(),
            });
        }
        let h = grid.h();
        let n = grid.n_full();
        let (weights, full, asymmetry) = if s <= 1.0 {
            let w = gamma_weights(s, n - 1);
            let a = toeplitz(&w, n, h.powf(-2.0 * s));
            (w, a, 0.0)
        } else {
            let k = s.floor() as usize;
            let alpha = s - k as f64;
            let np = n + 2 * k;
            let w = gamma_weights(alpha, np - 1);
            let mut m = toeplitz(&w, np, h.powf(-2.0 * alpha));
            let d2 = toeplitz(&[2.0, -1.0], np.max(2), h.powi(-2));
            for _ in 0..k {
                m = &d2 * m;
            }
            let m = m.view((k, k), (n, n)).into_owned();
            let scale = m.amax();
            let asym = (&m - m.transpose()).amax() / scale;
            if asym > 1e-10 {
                return Err(Error::Asymmetric(asym));
            }
            let sym = (&m + m.transpose()) * 0.5;
            (w, sym, asym)
        };
        Ok(Self {
            s,
            h,
            m_collar: grid.m_collar(),
            n_int: grid.n_int(),
            weights,
            full,
            asymmetry,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn n_int(&self) -> usize {
        self.n_int
    }
    pub fn n_full(&self) -> usize {
        self.full.nrows()
    }

    /// Weights of the fractional factor (order `s`, or `s - floor(s)` when `s > 1`).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Relative asymmetry of the composed matrix before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn full(&self) -> &DMatrix<f64> {
        &self.full
    }

    pub fn interior(&self) -> DMatrixView<'_, f64> {
        self.full.view((self.m_collar, self.m_collar), (self.n_int, self.n_int))
    }

    pub fn interior_owned(&self) -> DMatrix<f64> {
        self.interior().into_owned()
    }

    /// Interior rows, exterior columns (exterior index order).
    pub fn coupling(&self) -> DMatrix<f64> {
        let m = self.m_collar;
        let n = self.n_int;
        DMatrix::from_fn(n, 2 * m, |i, e| {
            let j = if e < m { e } else { n + e };
            self.full[(m + i, j)]
        })
    }

    /// Exterior rows and columns (exterior index order).
    pub fn exterior_block(&self) -> DMatrix<f64> {
        let m = self.m_collar;
        let n = self.n_int;
        let idx = |e: usize| if e < m { e } else { n + e };
        DMatrix::from_fn(2 * m, 2 * m, |a, b| self.full[(idx(a), idx(b))])
    }

    pub fn apply(&self, field: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n_full(), field.len())?;
        Ok(&self.full * field)
    }

    pub fn apply_interior(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n_int, v.len())?;
        Ok(self.interior() * v)
    }

    /// `h uᵀ A_int v`.
    pub fn hs_inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        Ok(self.h * u.dot(&self.apply_interior(v)?))
    }

    /// Row-major CSV dump with a `# s,h,N` header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# s={:e},h={:e},N={}", self.s, self.h, self.n_full())?;
        for i in 0..self.n_full() {
            let row: Vec<String> = (0..self.n_full()).map(|j| format!("{:e}", self.full[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Binary dump: magic, s, h, N (u64), then row-major little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"NLWOP001")?;
        w.write_all(&self.s.to_le_bytes())?;
        w.write_all(&self.h.to_le_bytes())?;
        w.write_all(&(self.n_full() as u64).to_le_bytes())?;
        for i in 0..self.n_full() {
            for j in 0..self.n_full() {
                w.write_all(&self.full[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize, m: usize) -> Grid {
        Grid::new(0.0, 1.0, n, m, 0..m, m..2 * m, 1.0, 4).unwrap()
    }

    #[test]
    fn laplacian_weights() {
        let w = centered_weights(1.0, 4).unwrap();
        assert_eq!(w, vec![2.0, -1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn half_order_center_weight() {
        let w = centered_weights(0.5, 3).unwrap();
        assert_relative_eq!(w[0], 4.0 / std::f64::consts::PI, max_relative = 1e-14);
    }

    #[test]
    fn weights_match_recurrence() {
        for &s in &[0.1, 0.3, 0.5, 0.77, 0.95] {
            let w = centered_weights(s, 400).unwrap();
            let mut g = w[0];
            for j in 0..400 {
                g *= (j as f64 - s) / (s + j as f64 + 1.0);
                assert_relative_eq!(w[j + 1], g, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn rejects_orders() {
        assert!(centered_weights(1.2, 3).is_err());
        assert!(centered_weights(0.0, 3).is_err());
        let g = grid(8, 2);
        assert!(FracOperator::assemble(&g, 2.0).is_err());
        assert!(FracOperator::assemble(&g, -0.5).is_err());
        assert!(FracOperator::assemble(&g, 1.0).is_ok());
    }

    #[test]
    fn calibration_case_is_tridiagonal() {
        let g = Grid::new(0.0, 1.0, 3, 2, 0..2, 2..4, 1.0, 4).unwrap();
        let op = FracOperator::assemble(&g, 1.0).unwrap();
        let a = op.interior_owned();
        let expect = DMatrix::from_row_slice(3, 3, &[32.0, -16.0, 0.0, -16.0, 32.0, -16.0, 0.0, -16.0, 32.0]);
        assert_eq!(a, expect);
    }

    #[test]
    fn composed_order_matches_direct_gamma_stencil() {
        // For s in (1, 3/2) the Γ formula still defines the symbol |2 sin(ξ/2)|^{2s}
        // and gives an independent route to the composed operator.
        let g = grid(24, 4);
        for &s in &[1.25, 1.5] {
            let op = FracOperator::assemble(&g, s).unwrap();
            let w = gamma_weights(s, g.n_full() - 1);
            let direct = toeplitz(&w, g.n_full(), g.h().powf(-2.0 * s));
            let diff = (op.full() - &direct).amax() / direct.amax();
            assert!(diff < 1e-10, "s={s}: {diff:e}");
            assert!(op.asymmetry() < 1e-12);
        }
    }

    #[test]
    fn interior_block_independent_of_collar() {
        let a = FracOperator::assemble(&grid(10, 2), 0.4).unwrap();
        let b = FracOperator::assemble(&grid(10, 6), 0.4).unwrap();
        assert_eq!(a.interior_owned(), b.interior_owned());
        let a = FracOperator::assemble(&grid(10, 2), 1.6).unwrap();
        let b = FracOperator::assemble(&grid(10, 6), 1.6).unwrap();
        let d = (a.interior_owned() - b.interior_owned()).amax();
        assert!(d < 1e-9 * a.full().amax());
    }

    #[test]
    fn second_difference_consistency() {
        let n = 255;
        let g = Grid::new(0.0, 1.0, n, 1, 0..1, 1..2, 1.0, 4).unwrap();
        let op = FracOperator::assemble(&g, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        let u = DVector::from_fn(n, |i, _| (pi * g.x_interior(i)).sin());
        let au = op.apply_interior(&u).unwrap();
        let err = (au - u * pi * pi).amax();
        assert!(err < 1e-3 * pi * pi, "{err}");
    }

    #[test]
    fn dumps_have_headers() {
        let op = FracOperator::assemble(&grid(3, 1), 0.5).unwrap();
        let mut csv = Vec::new();
        op.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("# s="));
        assert_eq!(text.lines().count(), 6);
        let mut bin = Vec::new();
        op.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 8 + 24 + 25 * 8);
    }
}
