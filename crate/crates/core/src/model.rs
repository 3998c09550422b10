//! Reaction terms: potentials `q(x)` and polyhomogeneous nonlinearities
//! `f(x, τ) = Σ c_k(x) |τ|^{r_k} τ`.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

/// Whether an integrability exponent `p` is admissible for a potential in one
/// space dimension at order `s`.
pub fn potential_exponent_admissible(s: f64, p: f64) -> bool {
    if !(p >= 1.0) {
        return false;
    }
    if 2.0 * s > 1.0 {
        p >= 2.0
    } else if 2.0 * s == 1.0 {
        p > 2.0
    } else {
        p >= 1.0 / s
    }
}

/// Largest admissible growth exponent in one space dimension, `None` meaning
/// unbounded.
pub fn max_growth_exponent(s: f64) -> Option<f64> {
    (2.0 * s < 1.0).then(|| 2.0 * s / (1.0 - 2.0 * s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    q: DVector<f64>,
    p: f64,
}

impl Potential {
    /// `p` may be `f64::INFINITY`.
    pub fn new(q: DVector<f64>, p: f64) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("non-finite entry".into()));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidPotential(format!("exponent p = {p} below 1")));
        }
        Ok(Self { q, p })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            q: DVector::zeros(n),
            p: f64::INFINITY,
        }
    }

    pub fn constant(n: usize, q0: f64) -> Self {
        Self {
            q: DVector::from_element(n, q0),
            p: f64::INFINITY,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            q: DVector::from_fn(grid.n_int(), |i, _| f(grid.x_interior(i))),
            p: f64::INFINITY,
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.q
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn len(&self) -> usize {
        self.q.len()
    }
    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&v| v == 0.0)
    }
    pub fn max_abs(&self) -> f64 {
        self.q.amax()
    }

    /// Checks the declared exponent against the order `s`.
    pub fn validate_exponent(&self, s: f64) -> Result<()> {
        if potential_exponent_admissible(s, self.p) {
            Ok(())
        } else {
            Err(Error::InvalidPotential(format!(
                "exponent p = {} not admissible for s = {s}",
                self.p
            )))
        }
    }

    /// Discrete `L^p` norm by the rectangle rule.
    pub fn lp_norm(&self, h: f64) -> f64 {
        lp_norm(&self.q, h, self.p)
    }

    pub fn difference(&self, other: &Potential) -> Result<Potential> {
        check_len(self.len(), other.len())?;
        Ok(Potential {
            q: &self.q - &other.q,
            p: self.p.min(other.p),
        })
    }
}

/// Rectangle-rule `L^p` norm, `p = ∞` giving the max norm.
pub fn lp_norm(u: &DVector<f64>, h: f64, p: f64) -> f64 {
    if p.is_infinite() {
        u.amax()
    } else {
        (h * u.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyKind {
    Serial,
    Asymptotic,
}

/// One `(r+1)`-homogeneous term `c(x) |τ|^r τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousTerm {
    pub r: f64,
    pub c: DVector<f64>,
}

impl HomogeneousTerm {
    pub fn new(r: f64, c: DVector<f64>) -> Self {
        Self { r, c }
    }

    pub fn eval(&self, i: usize, tau: f64) -> f64 {
        self.c[i] * tau.abs().powf(self.r) * tau
    }

    pub fn derivative(&self, i: usize, tau: f64) -> f64 {
        self.c[i] * (self.r + 1.0) * tau.abs().powf(self.r)
    }

    /// `∫_0^τ f_k = c |τ|^{r+2} / (r+2)`.
    pub fn primitive(&self, i: usize, tau: f64) -> f64 {
        self.c[i] * tau.abs().powf(self.r + 2.0) / (self.r + 2.0)
    }

    /// Growth constant `b = max |c|`.
    pub fn bound(&self) -> f64 {
        self.c.amax()
    }

    pub fn eval_field(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |i, _| self.eval(i, u[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyNonlinearity {
    kind: PolyKind,
    terms: Vec<HomogeneousTerm>,
    r_infty: f64,
    tail: Option<HomogeneousTerm>,
}

impl PolyNonlinearity {
    /// Validates exponent ordering `0 < r_1 < r_2 < … <= r_infty`, equal
    /// coefficient lengths, and admissibility of `r_infty` for order `s`.
    pub fn new(kind: PolyKind, terms: Vec<HomogeneousTerm>, r_infty: f64, s: f64) -> Result<Self> {
        let f = Self {
            kind,
            terms,
            r_infty,
            tail: None,
        };
        f.check_structure(s)?;
        Ok(f)
    }

    /// The linear case: no terms.
    pub fn zero() -> Self {
        Self {
            kind: PolyKind::Serial,
            terms: Vec::new(),
            r_infty: 1.0,
            tail: None,
        }
    }

    /// Attach an unresolved remainder term for an asymptotic expansion.
    pub fn with_tail(mut self, tail: HomogeneousTerm, s: f64) -> Result<Self> {
        if self.kind != PolyKind::Asymptotic {
            return Err(Error::InvalidNonlinearity(
                "only asymptotic expansions carry a remainder term".into(),
            ));
        }
        self.tail = Some(tail);
        self.check_structure(s)?;
        Ok(self)
    }

    fn check_structure(&self, s: f64) -> Result<()> {
        let mut prev = 0.0;
        let all = self.terms.iter().chain(self.tail.iter());
        let n = self.terms.first().map(|t| t.c.len());
        for t in all {
            if !(t.r > prev) {
                return Err(Error::InvalidNonlinearity(format!(
                    "exponents must be strictly increasing and positive, got {} after {prev}",
                    t.r
                )));
            }
            if t.r > self.r_infty {
                return Err(Error::InvalidNonlinearity(format!(
                    "exponent {} exceeds r_infty = {}",
                    t.r, self.r_infty
                )));
            }
            if Some(t.c.len()) != n {
                return Err(Error::InvalidNonlinearity("coefficient lengths differ".into()));
            }
            if t.c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidNonlinearity("non-finite coefficient".into()));
            }
            prev = t.r;
        }
        if !(self.r_infty >= 0.0 && self.r_infty.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!("bad r_infty = {}", self.r_infty)));
        }
        if let Some(rmax) = max_growth_exponent(s) {
            if self.r_infty > rmax {
                return Err(Error::InvalidNonlinearity(format!(
                    "r_infty = {} exceeds {rmax} allowed at s = {s}",
                    self.r_infty
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> PolyKind {
        self.kind
    }
    pub fn terms(&self) -> &[HomogeneousTerm] {
        &self.terms
    }
    pub fn tail(&self) -> Option<&HomogeneousTerm> {
        self.tail.as_ref()
    }
    pub fn r_infty(&self) -> f64 {
        self.r_infty
    }
    pub fn exponents(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.r).collect()
    }
    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .chain(self.tail.iter())
            .all(|t| t.c.iter().all(|&v| v == 0.0))
    }

    /// Remainder constants `C_N`: beyond the declared terms only the tail
    /// contributes, so `|f - Σ_{k<=N} f_k| <= C_N |τ|^{r_{N+1}+1}` for `|τ| <= 1`.
    pub fn remainder_constants(&self) -> Vec<f64> {
        let all: Vec<&HomogeneousTerm> = self.terms.iter().chain(self.tail.iter()).collect();
        (0..self.terms.len())
            .map(|n| all[n + 1..].iter().map(|t| t.bound()).sum())
            .collect()
    }

    pub fn eval(&self, i: usize, tau: f64) -> f64 {
        self.terms.iter().chain(self.tail.iter()).map(|t| t.eval(i, tau)).sum()
    }

    pub fn derivative(&self, i: usize, tau: f64) -> f64 {
        self.terms
            .iter()
            .chain(self.tail.iter())
            .map(|t| t.derivative(i, tau))
            .sum()
    }

    pub fn primitive(&self, i: usize, tau: f64) -> f64 {
        self.terms
            .iter()
            .chain(self.tail.iter())
            .map(|t| t.primitive(i, tau))
            .sum()
    }

    pub fn eval_field(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |i, _| self.eval(i, u[i]))
    }

    pub fn n_nodes(&self) -> Option<usize> {
        self.terms.first().map(|t| t.c.len())
    }
}

/// Outcome of [`validate_nonlinearity`].
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityReport {
    /// `C` in `|∂_τ f| <= C (1 + |τ|^{r_infty})`.
    pub derivative_constant: f64,
    /// Largest sampled `|∂_τ f| / (C (1 + |τ|^{r_infty}))`.
    pub derivative_ratio: f64,
    /// Smallest sampled primitive `F(x, τ)`.
    pub primitive_min: f64,
    /// `C_1 = max(0, -min F)`.
    pub c1: f64,
    /// Largest `b_{k+1} / b_k` over the upper half of the terms.
    pub growth_ratio: Option<f64>,
    pub warnings: Vec<String>,
}

impl NonlinearityReport {
    pub fn passed(&self) -> bool {
        self.derivative_ratio <= 1.0 + 1e-12 && self.c1 < f64::INFINITY
    }
}

/// Sampled check of the derivative bound, the primitive lower bound and the
/// serial growth ratio.
pub fn validate_nonlinearity(f: &PolyNonlinearity, s: f64, taus: &[f64]) -> Result<NonlinearityReport> {
    f.check_structure(s)?;
    let all: Vec<&HomogeneousTerm> = f.terms.iter().chain(f.tail.iter()).collect();
    let c: f64 = all.iter().map(|t| t.bound() * (t.r + 1.0)).sum();
    let n = f.n_nodes().unwrap_or(0);
    let mut ratio: f64 = 0.0;
    let mut fmin = f64::INFINITY;
    for i in 0..n {
        for &tau in taus {
            let d = f.derivative(i, tau).abs();
            let bound = c * (1.0 + tau.abs().powf(f.r_infty));
            if bound > 0.0 {
                ratio = ratio.max(d / bound);
            }
            fmin = fmin.min(f.primitive(i, tau));
        }
    }
    if !fmin.is_finite() {
        fmin = 0.0;
    }
    let b: Vec<f64> = f.terms.iter().map(|t| t.bound()).collect();
    let growth_ratio = (b.len() >= 2).then(|| {
        let start = (b.len() - 1) / 2;
        (start..b.len() - 1)
            .map(|k| if b[k] > 0.0 { b[k + 1] / b[k] } else { f64::INFINITY })
            .fold(0.0, f64::max)
    });
    let mut warnings = Vec::new();
    if let Some(g) = growth_ratio {
        if g >= 1.0 {
            warnings.push(format!(
                "coefficient growth ratio {g:.3} >= 1: series recovery is not guaranteed"
            ));
        }
    }
    if ratio > 1.0 + 1e-12 {
        warnings.push(format!("derivative bound violated by factor {ratio:.3}"));
    }
    Ok(NonlinearityReport {
        derivative_constant: c,
        derivative_ratio: ratio,
        primitive_min: fmin,
        c1: (-fmin).max(0.0),
        growth_ratio,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taus() -> Vec<f64> {
        (-40..=40).map(|k| k as f64 * 0.1).collect()
    }

    #[test]
    fn exponent_rules() {
        assert!(potential_exponent_admissible(0.75, 2.0));
        assert!(!potential_exponent_admissible(0.75, 1.5));
        assert!(!potential_exponent_admissible(0.5, 2.0));
        assert!(potential_exponent_admissible(0.5, 2.5));
        assert!(potential_exponent_admissible(0.25, 4.0));
        assert!(!potential_exponent_admissible(0.25, 3.9));
        assert!(potential_exponent_admissible(0.3, f64::INFINITY));
        assert_eq!(max_growth_exponent(0.75), None);
        assert_eq!(max_growth_exponent(0.25), Some(1.0));
    }

    #[test]
    fn potential_example_passes() {
        let q = DVector::from_fn(10, |i, _| 0.1 * i as f64);
        let f = PolyNonlinearity::new(PolyKind::Serial, vec![HomogeneousTerm::new(0.7, q)], 0.7, 0.8).unwrap();
        let rep = validate_nonlinearity(&f, 0.8, &taus()).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.c1, 0.0);
        assert!(rep.warnings.is_empty());
        assert_eq!(rep.growth_ratio, None);
    }

    #[test]
    fn growing_coefficients_warn() {
        let terms = (1..=4)
            .map(|k| HomogeneousTerm::new(0.25 * k as f64, DVector::from_element(3, 2f64.powi(k))))
            .collect();
        let f = PolyNonlinearity::new(PolyKind::Serial, terms, 1.0, 0.8).unwrap();
        let rep = validate_nonlinearity(&f, 0.8, &taus()).unwrap();
        assert_eq!(rep.growth_ratio, Some(2.0));
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn structural_errors() {
        let c = DVector::from_element(3, 1.0);
        let bad_order = vec![
            HomogeneousTerm::new(1.0, c.clone()),
            HomogeneousTerm::new(0.5, c.clone()),
        ];
        assert!(PolyNonlinearity::new(PolyKind::Serial, bad_order, 1.0, 0.8).is_err());
        let one = vec![HomogeneousTerm::new(1.0, c.clone())];
        assert!(PolyNonlinearity::new(PolyKind::Serial, one.clone(), 0.5, 0.8).is_err());
        // s = 0.25 allows r <= 1.
        assert!(PolyNonlinearity::new(PolyKind::Serial, one.clone(), 1.5, 0.25).is_err());
        assert!(PolyNonlinearity::new(PolyKind::Serial, one, 1.0, 0.25).is_ok());
    }

    #[test]
    fn remainder_constants_sum_the_rest() {
        let c = |v: f64| DVector::from_element(2, v);
        let f = PolyNonlinearity::new(
            PolyKind::Asymptotic,
            vec![HomogeneousTerm::new(0.5, c(1.0)), HomogeneousTerm::new(1.0, c(2.0))],
            2.0,
            0.8,
        )
        .unwrap()
        .with_tail(HomogeneousTerm::new(1.5, c(-0.25)), 0.8)
        .unwrap();
        assert_eq!(f.remainder_constants(), vec![2.25, 0.25]);
        for k in 0..=20 {
            let tau = k as f64 / 20.0;
            let rem = f.eval(0, tau) - f.terms()[0].eval(0, tau);
            assert!(rem.abs() <= 2.25 * tau.powf(2.0) + 1e-15);
        }
    }
}
