mod common;

use common::{bump, model, Rng};
use fermiohm::dynamics::Scheme;
use fermiohm::equilibrium::gibbs;
use fermiohm::linalg::{c, trace, CMatrix};
use fermiohm::thermo::{energy_ledger, energy_ledger_with_state, heat_of, relative_entropy, Stepping};
use proptest::prelude::*;

const STEP: Stepping = Stepping { scheme: Scheme::InteractionMagnus4, dt: 0.02 };

fn random_density(rng: &mut Rng, n: usize) -> CMatrix {
    let a = rng.matrix(n);
    let p = &a * a.adjoint();
    let tr = trace(&p);
    p / tr
}

fn times(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn relative_entropy_elementary() {
    let mut rng = Rng::new(1);
    let rho = random_density(&mut rng, 8);
    assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-12);
    let p = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.7), c(0.3)]));
    let q = CMatrix::identity(2, 2) * c(0.5);
    let expected = 0.7 * 1.4f64.ln() + 0.3 * 0.6f64.ln();
    assert!((relative_entropy(&p, &q).unwrap() - expected).abs() < 1e-15);
    // support of the first state outside the second
    assert_eq!(relative_entropy(&q, &p.map(|z| if z.re < 0.5 { c(0.0) } else { c(1.0) })).unwrap(), f64::INFINITY);
    let pure = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(0.0)]));
    assert!(relative_entropy(&pure, &p).unwrap().is_finite());
    assert!(relative_entropy(&(&p * c(2.0)), &q).is_err());
}

#[test]
fn zero_pulse_produces_no_heat() {
    let m = model(4, 1, 1.0, true);
    let ledger = energy_ledger(&m, &bump(0.0, 2.0).scale_strength(0.0), &times(-1.0, 3.0, 9), STEP).unwrap();
    for k in 0..ledger.len() {
        assert!(ledger.q[k].abs() < 1e-12);
        assert!(ledger.s[k].abs() < 1e-12);
        assert_eq!(ledger.p[k], 0.0);
        assert_eq!(ledger.work[k], 0.0);
    }
}

#[test]
fn ledger_identities_under_a_pulse() {
    let m = model(5, 2, 1.0, true);
    let pulse = bump(0.0, 2.0).scale_strength(0.5);
    let ledger = energy_ledger(&m, &pulse, &times(-0.5, 3.0, 15), STEP).unwrap();
    assert!(ledger.first_law_defect() < 1e-9, "{}", ledger.first_law_defect());
    assert!(ledger.balance_defect() < 1e-6, "{}", ledger.balance_defect());
    assert!(ledger.split_defect() < 1e-12);
    assert!(ledger.min_heat() >= -1e-12);
    assert!(ledger.q.last().unwrap() > &1e-6);
    // no potential energy once the field is off
    for (k, &t) in ledger.t.iter().enumerate() {
        if t <= 0.0 || t >= 2.0 {
            assert_eq!(ledger.p[k], 0.0, "t={t}");
        }
    }
    let csv = ledger.to_csv();
    assert!(csv.starts_with("t,Q,S,P,Work,Ip,Id\n"));
    assert_eq!(csv.lines().count(), 16);
}

#[test]
fn heat_after_pulse_equals_entropy_of_final_state() {
    let m = model(4, 3, 2.0, false);
    let pulse = bump(0.0, 1.0);
    let (ledger, rho) = energy_ledger_with_state(&m, &pulse, &[0.5, 1.5], STEP).unwrap();
    let state = gibbs(&m).unwrap();
    let direct = relative_entropy(&rho, state.density()).unwrap() / 2.0;
    assert!((ledger.q[1] - direct).abs() < 1e-10);
    assert!((heat_of(&state, &rho) - direct).abs() < 1e-10);
}

#[test]
fn ledger_rejects_descending_times() {
    let m = model(4, 1, 1.0, false);
    assert!(energy_ledger(&m, &bump(0.0, 1.0), &[1.0, 0.5], STEP).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relative_entropy_nonnegative(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = Rng::new(seed);
        let (a, b) = (random_density(&mut rng, n), random_density(&mut rng, n));
        prop_assert!(relative_entropy(&a, &b).unwrap() >= -1e-12);
    }
}
