use std::sync::Arc;

use approx::assert_relative_eq;
use carnot_hconv::hconv::effective::richardson;
use carnot_hconv::*;
use proptest::prelude::*;

fn calculus(heisenberg: bool, nodes: usize) -> Arc<Calculus> {
    let (group, dim) = if heisenberg { (CarnotGroup::heisenberg(), 3) } else { (CarnotGroup::euclidean(2).unwrap(), 2) };
    let grid = Arc::new(Grid::cube(dim, -1.0, 1.0, nodes).unwrap());
    Arc::new(Calculus::new(Arc::new(group), grid).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn integration_by_parts(heis in any::<bool>(), nodes in 5usize..9, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let calc = calculus(heis, nodes);
        let grid = calc.grid();
        let m = calc.horizontal_dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = ScalarField::from_fn(grid, |_| rng.random_range(-1.0..1.0)).masked();
        let phi = HorizontalField::from_values(grid, m, (0..grid.len() * m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let lhs = calc.pairing(&calc.div(&phi).unwrap(), &u).unwrap();
        let rhs = -calc.flux_pairing(&phi, &calc.grad(&u).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) * grid.len() as f64);
    }

    #[test]
    fn affine_fields_have_constant_gradient(heis in any::<bool>(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let calc = calculus(heis, 7);
        let grid = calc.grid();
        let u = ScalarField::from_fn(grid, |x| a * x[0] + b * x[1]);
        let g = calc.grad(&u).unwrap();
        for &k in grid.interior_nodes() {
            prop_assert!((g.at(k)[0] - a).abs() < 1e-12 && (g.at(k)[1] - b).abs() < 1e-12);
        }
    }

    #[test]
    fn richardson_is_exact_on_power_laws(limit in -3.0f64..3.0, c in 0.1f64..2.0, r in 0.6f64..5.0) {
        let n = [1.0, 2.0, 4.0, 8.0];
        let v: Vec<f64> = n.iter().map(|x: &f64| limit + c * x.powf(-r)).collect();
        let (l, fitted) = richardson(&n, &v);
        assert_relative_eq!(l, limit, epsilon = 1e-8);
        assert_relative_eq!(fitted.unwrap(), r, epsilon = 1e-6);
    }

    #[test]
    fn field_rules_round_trip(cx in 0.2f64..0.8, cy in 0.2f64..0.8, r in 0.05f64..0.5, amp in -3.0f64..3.0) {
        for rule in [FieldRule::Constant(amp), FieldRule::SinProduct { amp }, FieldRule::Bump { center: vec![cx, cy], radius: r, amp }] {
            prop_assert_eq!(FieldRule::parse(&rule.to_string(), 2).unwrap(), rule);
        }
    }

    #[test]
    fn oscillation_preserves_membership(n in 1u32..32, seed in 0u64..1000) {
        let spec = OperatorSpec::scalar_p_laplacian(3.0, Coefficient::Checkerboard { a1: 1.0, a2: 2.0 }).unwrap();
        let h = CarnotGroup::heisenberg();
        let dom = vec![(-1.0, 1.0); 3];
        let r = verify_membership(&spec.oscillate(n).unwrap(), &h, &dom, 2000, seed).unwrap();
        prop_assert_eq!(r.violations, 0);
        prop_assert_eq!(r.declared_alpha, spec.alpha());
    }
}
