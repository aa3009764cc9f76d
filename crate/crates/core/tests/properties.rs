//! Structural invariants over randomly chosen meshes, fields and inputs.

use std::sync::Arc;

use hodge_dn::bvp::HarmonicSpaces;
use hodge_dn::dec::{assemble, OperatorBundle};
use hodge_dn::dn::{self, DNMap};
use hodge_dn::mesh::{betti_oracle, generate, parse_off, Shape, SimplicialComplex};
use hodge_dn::topology;
use hodge_dn::witten::{product_base, GradedComplex, Grading, VectorFieldSpec};
use hodge_dn::Tolerances;
use nalgebra::DVector;
use proptest::prelude::*;

fn small_mesh() -> impl Strategy<Value = (Shape, usize)> {
    prop_oneof![
        (1usize..10).prop_map(|r| (Shape::Interval, r)),
        (1usize..4).prop_map(|r| (Shape::Disk, r)),
        (3usize..7).prop_map(|r| (Shape::Annulus, r)),
        (1usize..4).prop_map(|r| (Shape::Square, r)),
        (3usize..5).prop_map(|r| (Shape::SolidTorus, r)),
        (1usize..3).prop_map(|r| (Shape::Ball, r)),
    ]
}

fn product_shape() -> impl Strategy<Value = (Shape, usize)> {
    prop_oneof![(3usize..7).prop_map(|r| (Shape::Annulus, r)), (1usize..4).prop_map(|r| (Shape::Square, r))]
}

fn bundle(shape: Shape, res: usize) -> Arc<OperatorBundle> {
    Arc::new(assemble(&generate(shape, res).unwrap()).unwrap())
}

fn product(shape: Shape, res: usize, s: f64) -> GradedComplex {
    let b = Arc::new(assemble(&product_base(shape, res).unwrap()).unwrap());
    GradedComplex::product(b, VectorFieldSpec::rotation(s)).unwrap()
}

fn vector(n: usize, seed: u64) -> DVector<f64> {
    DVector::from_fn(n, |i, _| (((i as u64 + 1) * 2654435761 ^ seed) % 1000) as f64 / 500.0 - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn d_squared_is_exactly_zero((shape, res) in small_mesh(), parity in any::<bool>()) {
        let g = if parity { Grading::Parity } else { Grading::Degree };
        let c = GradedComplex::zero(bundle(shape, res), g).unwrap();
        prop_assert_eq!(c.d_squared_max(), 0.0);
    }

    #[test]
    fn twisted_d_squared_is_exactly_zero((shape, res) in product_shape(), s in -3.0f64..3.0) {
        prop_assert_eq!(product(shape, res, s).d_squared_max(), 0.0);
    }

    #[test]
    fn green_formula_holds((shape, res) in small_mesh(), seed in any::<u64>()) {
        let c = GradedComplex::zero(bundle(shape, res), Grading::Degree).unwrap();
        prop_assert!(c.green_residual(10, seed) <= 1e-10);
    }

    #[test]
    fn twisted_green_formula_holds((shape, res) in product_shape(), s in -3.0f64..3.0, seed in any::<u64>()) {
        prop_assert!(product(shape, res, s).green_residual(10, seed) <= 1e-10);
    }

    #[test]
    fn betti_numbers_satisfy_euler_and_lefschetz((shape, res) in small_mesh()) {
        let k = generate(shape, res).unwrap();
        let b = betti_oracle(&k);
        let alt: i64 = b.absolute.iter().enumerate().map(|(i, &x)| if i % 2 == 0 { x as i64 } else { -(x as i64) }).sum();
        prop_assert_eq!(alt, k.euler_characteristic());
        prop_assert!(b.lefschetz_dual());
    }

    #[test]
    fn mass_matrices_are_symmetric_positive((shape, res) in small_mesh(), seed in any::<u64>()) {
        let b = bundle(shape, res);
        for k in 0..=b.dim() {
            let m = &b.mass[k];
            let dense = hodge_dn::linalg::to_dense(m);
            prop_assert_eq!(&dense, &dense.transpose());
            let x = vector(b.num(k), seed.wrapping_add(k as u64));
            if x.norm() > 0.0 {
                prop_assert!(b.inner(k, &x, &x) > 0.0);
            }
        }
    }

    #[test]
    fn wedge_pairing_is_graded_commutative((shape, res) in small_mesh(), seed in any::<u64>()) {
        let b = bundle(shape, res);
        let n = b.dim();
        for k in 0..=n {
            let a = vector(b.num(k), seed);
            let c = vector(b.num(n - k), seed ^ 0xabcdef);
            let lhs = b.integrate_wedge(k, &a, &c);
            let sign = if (k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = sign * b.integrate_wedge(n - k, &c, &a);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn off_round_trip_preserves_the_complex((shape, res) in small_mesh()) {
        let k = generate(shape, res).unwrap();
        let text = hodge_dn::mesh::to_off_string(&k);
        let raw = parse_off(&text).unwrap();
        let back = SimplicialComplex::new(raw.vertices, raw.cells).unwrap();
        prop_assert_eq!(back.counts(), k.counts());
        prop_assert_eq!(back.simplices(k.dim()), k.simplices(k.dim()));
        prop_assert_eq!(betti_oracle(&back), betti_oracle(&k));
    }

    #[test]
    fn field_spec_display_parses_back(s in -10.0f64..10.0, l in 0.01f64..20.0) {
        let f = VectorFieldSpec::ProductRotation { s, l };
        prop_assert_eq!(f.to_string().parse::<VectorFieldSpec>().unwrap(), f);
    }
}

proptest! {
    // each case assembles a DN map
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn harmonic_dims_match_oracle((shape, res) in small_mesh()) {
        let c = GradedComplex::zero(bundle(shape, res), Grading::Degree).unwrap();
        let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
        let o = topology::oracle(&c);
        let d = h.dims();
        prop_assert_eq!(&d.neumann, &o.absolute);
        prop_assert_eq!(&d.dirichlet, &o.relative);
    }

    #[test]
    fn dn_map_is_symmetric_psd_and_squares_to_zero(shape in prop_oneof![Just(Shape::Disk), Just(Shape::Annulus), Just(Shape::Square)], res in 3usize..5, seed in any::<u64>()) {
        let tol = Tolerances::default();
        let c = GradedComplex::zero(bundle(shape, res), Grading::Degree).unwrap();
        let h = HarmonicSpaces::compute(&c, &tol).unwrap();
        let d = DNMap::assemble(&c, &h, &tol).unwrap();
        for b in &d.blocks {
            prop_assert!(b.asymmetry <= 1e-10);
            let id = dn::dn_identities(&c, &d, b.grade, 4, seed);
            prop_assert!(id.lambda_squared <= 1e-7 && id.lambda_d <= 1e-7 && id.d_lambda <= 1e-7, "{id:?}");
            prop_assert!(id.min_quadratic >= -1e-7);
            prop_assert!(id.energy_residual <= 1e-7);
        }
    }

    #[test]
    fn rotation_recovery_vanishes_and_untwisted_matches_kunneth((shape, res) in product_shape(), s in 0.2f64..3.0, flip in any::<bool>()) {
        let tol = Tolerances::default();
        let s = if flip { -s } else { s };
        for (speed, twisted) in [(s, true), (0.0, false)] {
            let c = product(shape, res, speed);
            let h = HarmonicSpaces::compute(&c, &tol).unwrap();
            let d = DNMap::assemble(&c, &h, &tol).unwrap();
            let o = topology::oracle(&c);
            for g in 0..2 {
                let r = dn::recovery_operator(&c, &h, &d, g, &tol).unwrap();
                prop_assert_eq!(r.rank, o.relative[1 - g]);
                if twisted {
                    prop_assert_eq!(r.rank, 0);
                } else {
                    prop_assert!(r.rank > 0);
                }
            }
        }
    }
}
