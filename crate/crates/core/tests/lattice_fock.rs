mod common;

use common::{max_abs, Rng};
use fermiohm::fields::{FieldMode, PulseSpec, TimeProfile};
use fermiohm::fock::{FockBasis, Parity};
use fermiohm::lattice::{sample_disorder, BoxSpec, DisorderMode, DisorderRealization};
use fermiohm::linalg::CMatrix;
use proptest::prelude::*;

fn cuboid() -> impl Strategy<Value = BoxSpec> {
    (1usize..3, -2i64..1, 0i64..3, 0i64..2)
        .prop_filter_map("at most 8 sites", |(d, lo, w0, w1)| {
            let widths = [w0, w1];
            let lo = vec![lo; d];
            let hi: Vec<i64> = (0..d).map(|k| lo[k] + widths[k]).collect();
            BoxSpec::cuboid(lo, hi).ok().filter(|b| b.len() <= 8)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn car_relations(lattice in cuboid()) {
        let basis = FockBasis::new(&lattice).unwrap();
        let n = lattice.len();
        let id = basis.identity();
        for x in 0..n {
            let ax = basis.annihilation(x).unwrap();
            for y in 0..n {
                let ay = basis.annihilation(y).unwrap();
                prop_assert_eq!(max_abs(ax.anticommutator(&ay).matrix()), 0.0);
                let mixed = ax.anticommutator(&ay.adjoint());
                let expected = if x == y { id.matrix().clone() } else { CMatrix::zeros(basis.dim(), basis.dim()) };
                prop_assert_eq!(max_abs(&(mixed.matrix() - expected)), 0.0);
            }
        }
    }

    #[test]
    fn bonds_count_and_symmetry(lattice in cuboid()) {
        let bonds = lattice.bonds();
        let (lo, hi) = (lattice.lo(), lattice.hi());
        let widths: Vec<i64> = (0..lattice.dim()).map(|k| hi[k] - lo[k] + 1).collect();
        let expected: i64 = (0..widths.len())
            .map(|k| widths.iter().enumerate().map(|(q, &w)| if q == k { w - 1 } else { w }).product::<i64>())
            .sum();
        prop_assert_eq!(bonds.len() as i64, expected);
        for (i, j) in bonds {
            prop_assert!(i < j);
            prop_assert!((lattice.distance(i, j) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disorder_is_deterministic_and_roundtrips(seed in any::<u64>(), lattice in cuboid()) {
        let a = sample_disorder(seed, &lattice, &DisorderMode::Uniform).unwrap();
        let b = sample_disorder(seed, &lattice, &DisorderMode::Uniform).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.omega1.iter().all(|v| v.abs() <= 1.0));
        prop_assert!(a.omega2.iter().all(|z| z.norm() <= 1.0));
        prop_assert_eq!(DisorderRealization::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn bilinears_are_gauge_invariant_and_even(seed in any::<u64>(), theta in -3.0f64..3.0) {
        let basis = FockBasis::for_sites(3).unwrap();
        let mut rng = Rng::new(seed);
        let q = basis.bilinear(&rng.hermitian(3)).unwrap();
        prop_assert!(max_abs(&(basis.gauge_transform(theta, &q).matrix() - q.matrix())) < 1e-13);
        prop_assert_eq!(basis.parity_class(&q, 1e-12), Parity::Even);
        prop_assert_eq!(basis.parity_class(&basis.creation(1).unwrap(), 1e-12), Parity::Odd);
    }

    #[test]
    fn pulse_vanishes_outside_its_window(t in -10.0f64..10.0, profile in 0usize..3) {
        let profile = [TimeProfile::SmoothBump, TimeProfile::SineBump, TimeProfile::PolynomialBump][profile];
        let p = PulseSpec::new(profile, (0.0, 2.0), 1.0, vec![1.0], 1.0, FieldMode::Homogeneous).unwrap();
        if !(0.0..=2.0).contains(&t) {
            prop_assert_eq!(p.envelope(t), 0.0);
            prop_assert_eq!(p.envelope_derivative(t), 0.0);
        }
    }
}
