//! Uniform 1-D space-time grid with a finite exterior collar.
//!
//! Full-grid ordering is `[left collar | interior | right collar]`. The
//! collar nodes closest to the domain sit on `x_min` and `x_max`. Exterior
//! indices run over `0..2*m_collar`, left collar first, and the control sets
//! W1, W2 are masks over that range.

use std::ops::Range;

use nalgebra::DVector;
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_int: usize,
    m_collar: usize,
    h: f64,
    w1: Vec<bool>,
    w2: Vec<bool>,
    t_final: f64,
    n_t: usize,
    dt: f64,
}

/// Which observation/control window a mask refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    W1,
    W2,
}

impl Grid {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x_min: f64,
        x_max: f64,
        n_int: usize,
        m_collar: usize,
        w1: Range<usize>,
        w2: Range<usize>,
        t_final: f64,
        n_t: usize,
    ) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_int < 2 {
            return Err(Error::InvalidGrid(format!("need n_int >= 2, got {n_int}")));
        }
        if m_collar < 1 {
            return Err(Error::InvalidGrid("need m_collar >= 1".into()));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidGrid(format!("need T > 0, got {t_final}")));
        }
        if n_t < 1 {
            return Err(Error::InvalidGrid("need n_t >= 1".into()));
        }
        let n_ext = 2 * m_collar;
        let mask = |r: &Range<usize>, name: &str| -> Result<Vec<bool>> {
            if r.start >= r.end {
                return Err(Error::InvalidGrid(format!("{name} range {r:?} is empty")));
            }
            if r.end > n_ext {
                return Err(Error::InvalidGrid(format!(
                    "{name} range {r:?} leaves the exterior collar 0..{n_ext}"
                )));
            }
            Ok((0..n_ext).map(|e| r.contains(&e)).collect())
        };
        let w1 = mask(&w1, "W1")?;
        let w2 = mask(&w2, "W2")?;
        let h = (x_max - x_min) / (n_int as f64 + 1.0);
        Ok(Self {
            x_min,
            x_max,
            n_int,
            m_collar,
            h,
            w1,
            w2,
            t_final,
            n_t,
            dt: t_final / n_t as f64,
        })
    }

    /// Same geometry and windows with a different time discretization.
    pub fn with_time(&self, t_final: f64, n_t: usize) -> Result<Self> {
        let range = |m: &[bool]| {
            let start = m.iter().position(|&b| b).unwrap_or(0);
            let end = m.iter().rposition(|&b| b).map_or(0, |e| e + 1);
            start..end
        };
        Self::new(
            self.x_min,
            self.x_max,
            self.n_int,
            self.m_collar,
            range(&self.w1),
            range(&self.w2),
            t_final,
            n_t,
        )
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_int(&self) -> usize {
        self.n_int
    }
    pub fn m_collar(&self) -> usize {
        self.m_collar
    }
    pub fn n_ext(&self) -> usize {
        2 * self.m_collar
    }
    pub fn n_full(&self) -> usize {
        self.n_int + 2 * self.m_collar
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mask(&self, w: Window) -> &[bool] {
        match w {
            Window::W1 => &self.w1,
            Window::W2 => &self.w2,
        }
    }

    /// Exterior indices selected by a window, ascending.
    pub fn window_nodes(&self, w: Window) -> Vec<usize> {
        self.mask(w)
            .iter()
            .enumerate()
            .filter_map(|(e, &b)| b.then_some(e))
            .collect()
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_t {
            self.t_final
        } else {
            n as f64 * self.dt
        }
    }

    /// Full-grid index of interior node `i`.
    pub fn full_index_of_interior(&self, i: usize) -> usize {
        self.m_collar + i
    }

    /// Full-grid index of exterior node `e`.
    pub fn full_index_of_exterior(&self, e: usize) -> usize {
        if e < self.m_collar {
            e
        } else {
            self.n_int + e
        }
    }

    pub fn x_full(&self, j: usize) -> f64 {
        self.x_min + (j as f64 - (self.m_collar as f64 - 1.0)) * self.h
    }

    pub fn x_interior(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 1.0) * self.h
    }

    pub fn x_exterior(&self, e: usize) -> f64 {
        self.x_full(self.full_index_of_exterior(e))
    }

    pub fn interior_coords(&self) -> DVector<f64> {
        DVector::from_fn(self.n_int, |i, _| self.x_interior(i))
    }

    /// Pad an interior field with zeros on the collar.
    pub fn extend(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n_int, v.len())?;
        let mut full = DVector::zeros(self.n_full());
        full.rows_mut(self.m_collar, self.n_int).copy_from(v);
        Ok(full)
    }

    /// Interior field together with exterior values.
    pub fn extend_with(&self, v: &DVector<f64>, ext: &[f64]) -> Result<DVector<f64>> {
        check_len(self.n_ext(), ext.len())?;
        let mut full = self.extend(v)?;
        for (e, &val) in ext.iter().enumerate() {
            full[self.full_index_of_exterior(e)] = val;
        }
        Ok(full)
    }

    pub fn restrict(&self, full: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n_full(), full.len())?;
        Ok(full.rows(self.m_collar, self.n_int).into_owned())
    }

    pub fn exterior_values(&self, full: &DVector<f64>) -> Result<Vec<f64>> {
        check_len(self.n_full(), full.len())?;
        Ok((0..self.n_ext())
            .map(|e| full[self.full_index_of_exterior(e)])
            .collect())
    }

    /// Hex SHA-256 of the grid parameters, used to tag serialized data.
    pub fn signature(&self) -> String {
        let bits = |m: &[bool]| m.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        let text = format!(
            "x_min={:016x};x_max={:016x};n_int={};m_collar={};w1={};w2={};T={:016x};n_t={}",
            self.x_min.to_bits(),
            self.x_max.to_bits(),
            self.n_int,
            self.m_collar,
            bits(&self.w1),
            bits(&self.w2),
            self.t_final.to_bits(),
            self.n_t
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Grid {
        Grid::new(0.0, 1.0, 3, 2, 0..2, 2..4, 1.0, 4).unwrap()
    }

    #[test]
    fn small_grid_dimensions() {
        let g = small();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.n_full(), 7);
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.x_full(1), 0.0);
        assert_eq!(g.x_full(5), 1.0);
        assert_eq!(g.x_exterior(2), 1.0);
        assert_eq!(g.x_interior(0), 0.25);
    }

    #[test]
    fn spacing_for_63_nodes() {
        let g = Grid::new(0.0, 1.0, 63, 16, 0..16, 16..32, 1.0, 8).unwrap();
        assert_eq!(g.h(), 1.0 / 64.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Grid::new(0.0, 1.0, 1, 2, 0..1, 2..3, 1.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 3, 2, 1..1, 2..3, 1.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 3, 2, 0..5, 2..3, 1.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 3, 2, 0..1, 2..3, 0.0, 4).is_err());
        assert!(Grid::new(1.0, 1.0, 3, 2, 0..1, 2..3, 1.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 3, 0, 0..1, 0..1, 1.0, 4).is_err());
    }

    #[test]
    fn index_sets_partition_the_grid() {
        let g = small();
        let mut seen = vec![false; g.n_full()];
        for i in 0..g.n_int() {
            seen[g.full_index_of_interior(i)] = true;
        }
        for e in 0..g.n_ext() {
            let j = g.full_index_of_exterior(e);
            assert!(!seen[j]);
            seen[j] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn final_time_is_exact() {
        let g = Grid::new(0.0, 1.0, 4, 1, 0..1, 1..2, 0.3, 7).unwrap();
        assert_eq!(g.time(7), 0.3);
        assert!((g.n_t() as f64 * g.dt() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn signature_tracks_parameters() {
        let a = small();
        let b = a.with_time(1.0, 8).unwrap();
        assert_eq!(a.signature(), small().signature());
        assert_ne!(a.signature(), b.signature());
        assert_eq!(a.mask(Window::W1), b.mask(Window::W1));
    }
}
