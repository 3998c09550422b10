//! Dirichlet eigenpairs of the interior operator and the L², H̃ˢ and H⁻ˢ
//! structures built on them.
//!
//! Eigenvectors are scaled so that `h φₖᵀ φₗ = δₖₗ`, making them orthonormal
//! for the discrete L² product.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::linalg::{cholesky, jacobi_eigen};
use crate::operator::FracOperator;

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    lambdas: DVector<f64>,
    phi: DMatrix<f64>,
    h: f64,
}

impl SpectralBasis {
    pub fn eigendecompose(op: &FracOperator) -> Result<Self> {
        Self::from_symmetric(&op.interior_owned(), op.h())
    }

    /// Decompose an arbitrary symmetric positive definite interior matrix.
    pub fn from_symmetric(a: &DMatrix<f64>, h: f64) -> Result<Self> {
        let (lambdas, vecs) = jacobi_eigen(a)?;
        if let Some(&bad) = lambdas.iter().find(|&&l| l <= 0.0) {
            return Err(Error::NonPositiveEigenvalue(bad));
        }
        Ok(Self {
            lambdas,
            phi: vecs / h.sqrt(),
            h,
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }
    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
    pub fn lambdas(&self) -> &DVector<f64> {
        &self.lambdas
    }
    pub fn lambda(&self, k: usize) -> f64 {
        self.lambdas[k]
    }
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }
    pub fn mode(&self, k: usize) -> DVector<f64> {
        self.phi.column(k).into_owned()
    }
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `cₖ = h φₖᵀ field`.
    pub fn project_l2(&self, field: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.len(), field.len())?;
        Ok(self.phi.tr_mul(field) * self.h)
    }

    /// Projection of every column of a node-by-time matrix.
    pub fn project_columns(&self, fields: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len(self.len(), fields.nrows())?;
        Ok(self.phi.tr_mul(fields) * self.h)
    }

    pub fn reconstruct(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.len(), coeffs.len())?;
        Ok(&self.phi * coeffs)
    }

    /// `(Σ λₖ⁻¹ Gₖ²)^{1/2}`.
    pub fn dual_norm(&self, g: &DVector<f64>) -> Result<f64> {
        let c = self.project_l2(g)?;
        Ok(c.iter()
            .zip(self.lambdas.iter())
            .map(|(ck, lk)| ck * ck / lk)
            .sum::<f64>()
            .sqrt())
    }

    pub fn l2_norm(&self, u: &DVector<f64>) -> f64 {
        (self.h * u.norm_squared()).sqrt()
    }

    /// `h vᵀ A v / (h vᵀ v)` evaluated through the spectrum.
    pub fn rayleigh_quotient(&self, op: &FracOperator, v: &DVector<f64>) -> Result<f64> {
        Ok(op.hs_inner(v, v)? / (self.h * v.norm_squared()))
    }

    /// `h ΦᵀΦ`.
    pub fn gram_l2(&self) -> DMatrix<f64> {
        self.phi.tr_mul(&self.phi) * self.h
    }

    /// Gram of `λₖ^{-1/2} φₖ` in the product `h uᵀ A_int v`.
    pub fn gram_hs(&self, op: &FracOperator) -> DMatrix<f64> {
        let psi = self.scaled_modes(-0.5);
        psi.tr_mul(&(op.interior() * &psi)) * self.h
    }

    /// Gram of `λₖ^{1/2} φₖ` in the product `h Gᵀ A_int⁻¹ H`, with the inverse
    /// applied by an independent Cholesky solve.
    pub fn gram_dual(&self, solver: &EllipticSolver) -> DMatrix<f64> {
        let chi = self.scaled_modes(0.5);
        let sol = solver.chol.solve(&chi);
        chi.tr_mul(&sol) * self.h
    }

    fn scaled_modes(&self, power: f64) -> DMatrix<f64> {
        let mut m = self.phi.clone();
        for (k, mut col) in m.column_iter_mut().enumerate() {
            col *= self.lambdas[k].powf(power);
        }
        m
    }

    /// Write `k,lambda` rows with a header.
    pub fn write_spectrum_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,lambda")?;
        for (k, l) in self.lambdas.iter().enumerate() {
            writeln!(w, "{},{:.17e}", k + 1, l)?;
        }
        Ok(())
    }

    /// Binary dump of Φ: magic, rows, cols (u64), column-major LE f64.
    pub fn write_modes_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"NLWPHI01")?;
        w.write_all(&(self.phi.nrows() as u64).to_le_bytes())?;
        w.write_all(&(self.phi.ncols() as u64).to_le_bytes())?;
        for x in self.phi.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Max-entry deviation of a square matrix from the identity.
pub fn identity_deviation(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (m - DMatrix::<f64>::identity(n, n)).amax()
}

/// Source-to-solution map for `A_int u = G` by dense Cholesky.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    chol: Cholesky<f64, Dyn>,
    h: f64,
}

impl EllipticSolver {
    pub fn new(op: &FracOperator) -> Result<Self> {
        Ok(Self {
            chol: cholesky(op.interior_owned())?,
            h: op.h(),
        })
    }

    pub fn solve(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.chol.l_dirty().nrows(), g.len())?;
        Ok(self.chol.solve(g))
    }

    /// `(h Gᵀ A_int⁻¹ G)^{1/2}`.
    pub fn dual_norm(&self, g: &DVector<f64>) -> Result<f64> {
        let u = self.solve(g)?;
        Ok((self.h * g.dot(&u)).max(0.0).sqrt())
    }

    /// `h Gᵀ A_int⁻¹ H`.
    pub fn dual_inner(&self, g: &DVector<f64>, k: &DVector<f64>) -> Result<f64> {
        Ok(self.h * g.dot(&self.solve(k)?))
    }
}
