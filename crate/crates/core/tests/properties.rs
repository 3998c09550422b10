//! Structural invariants checked on random inputs.

use nalgebra::DVector;
use proptest::prelude::*;

use nlwave_core::inversion::fit_homogeneous_coefficient;
use nlwave_core::wave::{solve_linear_modal, CauchyData, ExteriorControl, NodeSet, SpaceTimeField};
use nlwave_core::{FracOperator, Grid, HomogeneousTerm, SpectralBasis, Window};

fn grid(n: usize, n_t: usize) -> Grid {
    Grid::new(0.0, 1.0, n, 4, 0..4, 4..8, 1.0, n_t).unwrap()
}

/// Fractional orders away from the excluded integers.
fn order() -> impl Strategy<Value = f64> {
    prop_oneof![0.1..0.95f64, 1.05..1.9f64]
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_is_symmetric_and_positive(s in order(), n in 8usize..40) {
        let op = FracOperator::assemble(&grid(n, 16), s).unwrap();
        prop_assert!(op.asymmetry() <= 1e-12 * op.full().amax());
        let b = SpectralBasis::eigendecompose(&op).unwrap();
        prop_assert!(b.lambda(0) > 0.0);
    }

    #[test]
    fn parseval_and_rayleigh(s in order(), v in vector(20)) {
        let op = FracOperator::assemble(&grid(20, 16), s).unwrap();
        let b = SpectralBasis::eigendecompose(&op).unwrap();
        let v = DVector::from_vec(v);
        prop_assume!(v.norm() > 1e-3);
        let coeffs = b.project_l2(&v).unwrap();
        let l2 = b.l2_norm(&v);
        prop_assert!((coeffs.norm() - l2).abs() <= 1e-10 * l2);
        prop_assert!((b.reconstruct(&coeffs).unwrap() - &v).amax() <= 1e-10);
        let rq = b.rayleigh_quotient(&op, &v).unwrap();
        prop_assert!(rq >= b.lambda(0) * (1.0 - 1e-10));
        prop_assert!(rq <= b.lambda(19) * (1.0 + 1e-10));
    }

    #[test]
    fn modal_solver_superposition(a in -2.0..2.0f64, u0 in vector(12), u1 in vector(12), w0 in vector(12), w1 in vector(12)) {
        let g = grid(12, 64);
        let b = SpectralBasis::eigendecompose(&FracOperator::assemble(&g, 0.6).unwrap()).unwrap();
        let v = |x: &Vec<f64>| DVector::from_vec(x.clone());
        let d1 = CauchyData::new(v(&u0), v(&u1)).unwrap();
        let d2 = CauchyData::new(v(&w0), v(&w1)).unwrap();
        let mix = CauchyData::new(&d1.u0 * a + &d2.u0, &d1.u1 * a + &d2.u1).unwrap();
        let s1 = solve_linear_modal(&b, &d1, None, &g).unwrap().u;
        let s2 = solve_linear_modal(&b, &d2, None, &g).unwrap().u;
        let sm = solve_linear_modal(&b, &mix, None, &g).unwrap().u;
        let expect = s1.values() * a + s2.values();
        prop_assert!((sm.values() - &expect).amax() <= 1e-10 * (1.0 + expect.amax()));
    }

    #[test]
    fn homogeneous_term_scaling_and_bound(r in 0.1..2.0f64, lambda in 0.01..10.0f64, c in vector(6), u in vector(6), w in vector(6)) {
        let term = HomogeneousTerm::new(r, DVector::from_vec(c));
        let u = DVector::from_vec(u);
        let w = DVector::from_vec(w);
        let lhs = term.eval_field(&(&u * lambda));
        let rhs = term.eval_field(&u) * lambda.powf(r + 1.0);
        prop_assert!((lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
        // Growth and the mean-value Lipschitz bound of the Nemytskii map.
        let b = term.bound();
        for i in 0..6 {
            prop_assert!(term.eval(i, u[i]).abs() <= b * u[i].abs().powf(r + 1.0) * (1.0 + 1e-12));
            let lip = (r + 1.0) * b * u[i].abs().max(w[i].abs()).powf(r) * (u[i] - w[i]).abs();
            prop_assert!((term.eval(i, u[i]) - term.eval(i, w[i])).abs() <= lip * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn grid_extend_restrict_round_trip(n in 4usize..30, v in vector(30), ext in vector(8)) {
        let g = grid(n, 8);
        let v = DVector::from_vec(v[..n].to_vec());
        let full = g.extend_with(&v, &ext).unwrap();
        prop_assert_eq!(g.restrict(&full).unwrap(), v);
        prop_assert_eq!(g.exterior_values(&full).unwrap(), ext);
    }

    #[test]
    fn time_reversal_is_an_involution(n_t in 64usize..200, node in 0usize..4, freq in 1usize..4) {
        let g = grid(10, n_t);
        let c = ExteriorControl::tensor_bump(&g, Window::W1, node, freq).unwrap();
        prop_assert_eq!(c.time_reverse().time_reverse(), c.clone());
        let f = SpaceTimeField::from_fn(&g, |x, t| (3.0 * x + t * t).sin());
        prop_assert_eq!(f.time_reverse().time_reverse(), f.clone());
        prop_assert_eq!(f.time_reverse().slice(0), f.slice(n_t));
    }
}

/// Three spatial profiles driving `y = (1 + x)|v|^½ v` determine `c₁ = 1 + x`.
#[test]
fn fit_recovers_exact_coefficient() {
    let g = grid(16, 32);
    let x = g.interior_coords();
    let term = HomogeneousTerm::new(0.5, x.map(|x| 1.0 + x));
    let profiles = [
        x.map(|x| (std::f64::consts::PI * x).sin()),
        x.map(|x| x * (1.0 - x)),
        x.map(|x| 0.3 + x),
    ];
    let samples: Vec<(SpaceTimeField, SpaceTimeField)> = profiles
        .iter()
        .map(|p| {
            let v = SpaceTimeField::separable(&g, p, |t| (2.0 * t).cos()).unwrap();
            let mut y = SpaceTimeField::zeros(&g, NodeSet::Interior);
            for n in 0..=g.n_t() {
                y.values_mut().set_column(n, &term.eval_field(&v.slice(n)));
            }
            (y, v)
        })
        .collect();
    let fit = fit_homogeneous_coefficient(&samples, 0.5).unwrap();
    assert!(fit.excited.iter().all(|&e| e));
    assert!((fit.c - &term.c).amax() < 1e-10);
}
