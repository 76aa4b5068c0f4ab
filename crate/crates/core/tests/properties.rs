//! Property tests for the random-field invariants: operator monotonicity
//! and linearity, weighted-norm homogeneity and subadditivity, and the
//! ellipticity sandwich at arbitrary radii.

use proptest::prelude::*;

use fracobs_core::grid::GridSpec;
use fracobs_core::kernel::KernelSpec;
use fracobs_core::obstacle::weighted_l1s_norm;
use fracobs_core::operator::{
    apply_operator, apply_operator_at, build_discrete_operator, FarField,
};

fn grid() -> GridSpec {
    GridSpec::new(1, 4.0, 65, 1.0, 0.01).unwrap()
}

fn op(far_field: FarField) -> fracobs_core::DiscreteOperator {
    let kernel = KernelSpec::fractional(0.25, 1).unwrap();
    build_discrete_operator(&kernel, &grid(), 8.0, far_field).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // f >= g with f(x0) = g(x0) forces Lf(x0) <= Lg(x0): the discrete
    // maximum-principle structure behind both solvers.
    #[test]
    fn operator_is_monotone_on_ordered_fields(
        base in prop::collection::vec(-1.0f64..1.0, 65),
        bump in prop::collection::vec(0.0f64..0.5, 65),
        x0 in 1usize..64,
    ) {
        let operator = op(FarField::ZeroExtension);
        let g = base;
        let mut f = g.clone();
        for (i, value) in f.iter_mut().enumerate() {
            if i != x0 {
                *value += bump[i];
            }
        }
        let lf = apply_operator_at(&operator, &f, x0);
        let lg = apply_operator_at(&operator, &g, x0);
        prop_assert!(lf <= lg + 1e-12);
    }

    #[test]
    fn operator_is_linear(
        f in prop::collection::vec(-1.0f64..1.0, 65),
        g in prop::collection::vec(-1.0f64..1.0, 65),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let operator = op(FarField::ConstantExtension);
        let combo: Vec<f64> = f.iter().zip(&g).map(|(&x, &y)| a * x + b * y).collect();
        let lf = apply_operator(&operator, &f).unwrap();
        let lg = apply_operator(&operator, &g).unwrap();
        let lc = apply_operator(&operator, &combo).unwrap();
        for i in 0..combo.len() {
            prop_assert!((lc[i] - (a * lf[i] + b * lg[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn weighted_norm_is_homogeneous_and_subadditive(
        f in prop::collection::vec(-2.0f64..2.0, 65),
        g in prop::collection::vec(-2.0f64..2.0, 65),
        lambda in -4.0f64..4.0,
    ) {
        let grid = grid();
        let s = 0.25;
        let scaled: Vec<f64> = f.iter().map(|&x| lambda * x).collect();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(&x, &y)| x + y).collect();
        let nf = weighted_l1s_norm(&f, &grid, s).unwrap();
        let ng = weighted_l1s_norm(&g, &grid, s).unwrap();
        let nscaled = weighted_l1s_norm(&scaled, &grid, s).unwrap();
        let nsum = weighted_l1s_norm(&sum, &grid, s).unwrap();
        prop_assert!((nscaled - lambda.abs() * nf).abs() <= 1e-12 * (1.0 + nf));
        prop_assert!(nsum <= nf + ng + 1e-12);
    }

    // pointwise domination |f| <= |g| forces norm(f) <= norm(g)
    #[test]
    fn weighted_norm_is_monotone(
        g in prop::collection::vec(0.01f64..2.0, 65),
        shrink in prop::collection::vec(0.0f64..1.0, 65),
    ) {
        let grid = grid();
        let f: Vec<f64> = g.iter().zip(&shrink).map(|(&y, &c)| c * y).collect();
        let nf = weighted_l1s_norm(&f, &grid, 0.25).unwrap();
        let ng = weighted_l1s_norm(&g, &grid, 0.25).unwrap();
        prop_assert!(nf <= ng + 1e-12);
    }

    // ellipticity sandwich at every sampled radius of the calibrated kernel
    #[test]
    fn ellipticity_sandwich_at_random_radii(r in 1e-4f64..1e4, s in 0.05f64..0.5) {
        let kernel = KernelSpec::fractional(s, 1).unwrap();
        let envelope = r.powf(-1.0 - 2.0 * s);
        let k = kernel.evaluate(r);
        prop_assert!(k >= kernel.lambda * envelope * (1.0 - 1e-12));
        prop_assert!(k <= kernel.big_lambda * envelope * (1.0 + 1e-12));
        prop_assert_eq!(kernel.evaluate(-r), k);
    }
}
