mod common;

use common::{bump, chain, model, model_on, Rng};
use fermiohm::dynamics::{heisenberg, Scheme};
use fermiohm::equilibrium::{gibbs, quasifree_twopoint};
use fermiohm::lattice::BoxSpec;
use fermiohm::linalg::I;
use fermiohm::thermo::Stepping;
use fermiohm::transport::{
    fit_scaling, homogeneous_pulse, negativity_margin, symm_split, ConvolutionRule, Region, Transport,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const STEP: Stepping = Stepping { scheme: Scheme::InteractionMagnus4, dt: 0.02 };

fn square() -> BoxSpec {
    BoxSpec::cuboid(vec![0, 0], vec![1, 1]).unwrap()
}

/// Composite Simpson with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn sigma_p_matches_time_integral_of_commutator() {
    let m = model(2, 1, 1.0, true);
    let tr = Transport::new(&m, 0.0, 0).unwrap();
    let state = gibbs(&m).unwrap();
    let cur = m.paramagnetic_current_at(1, 0);
    let integrand = |s: f64| {
        let evolved = heisenberg(&cur, m.spectral(), s);
        (state.expectation(cur.commutator(&evolved).matrix()) * I).re
    };
    for t in [0.3, 1.0, 2.5] {
        let oracle = simpson(integrand, 0.0, t, 600);
        let got = tr.sigma_p((1, 0), (1, 0), t).unwrap();
        assert!((got - oracle).abs() < 1e-10, "t={t}: {got} vs {oracle}");
    }
    assert_eq!(tr.sigma_p((1, 0), (1, 0), 0.0).unwrap(), 0.0);
    assert_eq!(tr.xi_p(0.0).abs().max(), 0.0);
}

#[test]
fn kernel_derivative_matches_finite_difference() {
    let m = model(4, 2, 1.0, true);
    let tr = Transport::new(&m, 0.0, 1).unwrap();
    let k = tr.kernel(&m.current_matrix(1, 0), &m.current_matrix(2, 1)).unwrap();
    assert!(!k.is_empty());
    let h = 1e-4;
    for t in [0.2, 1.7] {
        let fd = (k.eval(t + h) - k.eval(t - h)) / (2.0 * h);
        assert!((fd - k.derivative(t)).abs() < 1e-7);
    }
}

#[test]
fn transpose_law() {
    // Ξ_p(t)ᵀ = Ξ_p(-t) by stationarity of the Gibbs state.
    let m = model_on(&square(), 3, 1.0, true);
    let tr = Transport::new(&m, 0.0, 0).unwrap();
    assert_eq!(tr.dim(), 2);
    for t in [0.4, 1.9] {
        let diff = tr.xi_p(t).transpose() - tr.xi_p(-t);
        assert!(diff.abs().max() < 1e-12, "t={t}");
    }
}

#[test]
fn real_hopping_gives_symmetric_response() {
    let lattice = square();
    let mut omega = fermiohm::lattice::sample_disorder(4, &lattice, &fermiohm::lattice::DisorderMode::Uniform).unwrap();
    omega.omega2.iter_mut().for_each(|z| z.im = 0.0);
    let psi = fermiohm::model::density_density(fermiohm::model::yukawa(0.5, 1.0), &lattice);
    let m = fermiohm::model::Model::build(fermiohm::model::ModelParams::new(omega, 0.5, 0.5, 1.0, psi)).unwrap();
    let tr = Transport::new(&m, 0.0, 0).unwrap();
    for t in [0.5, 2.0] {
        let (_, anti) = symm_split(&tr.xi_p(t));
        assert!(anti.abs().max() < 1e-12);
    }
}

#[test]
fn symm_split_parts() {
    let theta = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, -4.0, 5.0, 6.0, 7.0, 8.0, -9.0]);
    let (s, a) = symm_split(&theta);
    assert_eq!(&s + &a, theta);
    assert_eq!(s.transpose(), s);
    assert_eq!(a.transpose(), -a);
}

#[test]
fn xi_d_against_direct_expectation_and_bound() {
    let m = model(4, 5, 1.0, true);
    let tr = Transport::new(&m, 0.0, 1).unwrap();
    let state = gibbs(&m).unwrap();
    let sites = tr.region().sites().to_vec();
    assert_eq!(sites.len(), 1);
    let x = sites[0];
    let up = m.lattice().shifted(x, 0, 1).unwrap();
    let direct = state.expectation(m.diamagnetic_kernel_at(up, x).matrix()).re;
    let xd = tr.xi_d().unwrap();
    assert!((xd[0] - direct).abs() < 1e-13);
    assert!(xd[0].abs() <= 2.0 * (m.params.theta + 1.0));
}

#[test]
fn quasifree_xi_p_from_one_particle_response() {
    let beta = 1.2;
    let m = model(5, 6, beta, false);
    let tr = Transport::new(&m, 1.0, 0).unwrap();
    let q = quasifree_twopoint(m.one_particle(), beta).unwrap();
    let mut j = fermiohm::linalg::CMatrix::zeros(5, 5);
    for (a, b) in tr.region().bonds(m.lattice(), 0) {
        j += m.current_matrix(a, b);
    }
    let vol = tr.region().volume() as f64;
    for t in [0.5, 3.0] {
        let got = tr.xi_p(t)[(0, 0)];
        let oracle = q.response(&j, &j, t) / vol;
        assert!((got - oracle).abs() < 1e-11, "{got} vs {oracle}");
    }
}

#[test]
fn measure_positive_and_reconstructs() {
    let m = model_on(&square(), 7, 0.7, true);
    let tr = Transport::new(&m, 0.0, 0).unwrap();
    let times: Vec<f64> = (0..41).map(|k| -10.0 + 0.5 * k as f64).collect();
    let mu = tr.conductivity_measure(&times).unwrap();
    assert!(mu.min_eigenvalue >= -1e-14);
    assert!(mu.reconstruction_defect < 1e-10);
    assert!(mu.frequencies.windows(2).all(|w| w[0] < w[1]));
    assert!((mu.total_mass() - tr.duhamel_mass(64)).abs().max() < 1e-10);
    // Cesàro mean against a direct average of [Ξ_p]₊
    let horizon = 6.0;
    let avg = |i: usize, j: usize| simpson(|s| symm_split(&tr.xi_p(s)).0[(i, j)], 0.0, horizon, 2000) / horizon;
    let ces = mu.cesaro_mean(horizon);
    for i in 0..2 {
        for j in 0..2 {
            assert!((ces[(i, j)] - avg(i, j)).abs() < 1e-9);
        }
    }
    for t in [0.0, 1.1, 4.0] {
        assert!(negativity_margin(&tr, t) >= -1e-12);
    }
    let csv = mu.to_csv();
    assert!(csv.starts_with("nu,M_11,M_12,M_21,M_22\n"));
    assert_eq!(csv.lines().count(), mu.frequencies.len() + 1);
}

#[test]
fn viscosity_against_finite_difference() {
    let m = model(4, 8, 1.0, true);
    let tr = Transport::new(&m, 0.0, 1).unwrap();
    let mu = tr.conductivity_measure(&[0.5, 1.0]).unwrap();
    let xd = tr.xi_d().unwrap()[0];
    let h = 1e-4;
    for t in [0.5, 1.3] {
        let plus = |s: f64| symm_split(&tr.xi_p(s)).0[(0, 0)];
        let fd = (plus(t + h) - plus(t - h)) / (2.0 * h) / xd;
        let v = tr.viscosity(&mu, t).unwrap()[(0, 0)];
        assert!((v - fd).abs() < 1e-6 * fd.abs().max(1.0), "{v} vs {fd}");
        assert!((tr.xi_p_derivative(t)[(0, 0)] / xd - v).abs() < 1e-10);
    }
}

#[test]
fn zero_field_gives_no_current_response() {
    let m = model(5, 9, 1.0, true);
    let tr = Transport::new(&m, 1.0, 0).unwrap();
    let unit = homogeneous_pulse(&bump(0.0, 2.0), 1.0).unwrap();
    let times = [0.0, 1.0, 2.5];
    let c = tr.current_densities(&unit.scale_strength(0.0), &unit, &times, STEP, ConvolutionRule::default()).unwrap();
    for k in 0..times.len() {
        assert!(c.j_p[k][0].abs() < 1e-13);
        assert_eq!(c.j_d[k][0], 0.0);
    }
    assert_eq!(c.bonds.len(), tr.region().volume());
    // before the pulse the linear currents vanish too
    assert!(c.linear_bond_p[0].iter().chain(&c.linear_bond_d[0]).all(|v| *v == 0.0));
}

#[test]
fn linear_response_quadrature_converges() {
    let m = model(5, 10, 1.0, true);
    let tr = Transport::new(&m, 1.0, 0).unwrap();
    let unit = homogeneous_pulse(&bump(0.0, 3.0), 1.0).unwrap();
    let times = [0.7, 2.0, 3.5];
    let coarse = tr.linear_response_currents(&unit, &times, ConvolutionRule::default()).unwrap();
    let fine = tr.linear_response_currents(&unit, &times, ConvolutionRule { panels: 96, order: 10 }).unwrap();
    for (a, b) in coarse.iter().zip(&fine) {
        assert!((&a.0 - &b.0).amax() < 1e-8);
        assert_eq!(a.1, b.1);
    }
}

#[test]
fn weak_field_current_is_linear() {
    let m = model(5, 11, 1.0, true);
    let tr = Transport::new(&m, 1.0, 0).unwrap();
    let unit = homogeneous_pulse(&bump(0.0, 3.0), 1.0).unwrap();
    let times = [1.0, 2.0, 3.0];
    let linear = tr.linear_response_currents(&unit, &times, ConvolutionRule::default()).unwrap();
    let eta = 1e-3;
    let c = tr.current_densities(&unit.scale_strength(eta), &unit, &times, STEP, ConvolutionRule::default()).unwrap();
    for k in 0..times.len() {
        let scale = linear[k].0[0].abs().max(1e-3);
        assert!((c.j_p[k][0] - eta * linear[k].0[0]).abs() < 1e-2 * eta * scale, "t={}", times[k]);
        assert!((c.j_d[k][0] - eta * linear[k].1[0]).abs() < 1e-2 * eta * linear[k].1[0].abs().max(1e-3));
    }
}

#[test]
fn region_geometry() {
    let lattice = chain(6);
    let r = Region::new(&lattice, 1.0, 1).unwrap();
    assert_eq!(r.volume(), 3);
    assert_eq!(r.bonds(&lattice, 0).len(), 3);
    assert!(Region::new(&lattice, 2.0, 1).is_err());
    assert!(Region::new(&lattice, -1.0, 0).is_err());
    assert!(Region::new(&lattice, f64::NAN, 0).is_err());
}

#[test]
fn scaling_fit_recovers_power_and_floors_noise() {
    let etas = [1e-1, 1e-2, 1e-3];
    let r: Vec<f64> = etas.iter().map(|e| 3.0 * e * e).collect();
    let fit = fit_scaling(0.5, &etas, &r);
    assert!((fit.slope - 2.0).abs() < 1e-12);
    assert!(fit.passes(1.9) && !fit.passes(2.1));
    let flat = fit_scaling(0.5, &etas, &[1e-15, 1e-16, 0.0]);
    assert!(flat.trivial && flat.passes(5.0));
    let partial = fit_scaling(0.5, &etas, &[1e-6, 1e-8, 1e-15]);
    assert_eq!(partial.points_used, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transpose_law_random(seed in 0u64..500, t in -5.0f64..5.0, beta in 0.1f64..5.0) {
        let m = model_on(&square(), seed, beta, seed % 2 == 1);
        let tr = Transport::new(&m, 0.0, 0).unwrap();
        prop_assert!((tr.xi_p(t).transpose() - tr.xi_p(-t)).abs().max() < 1e-12);
        prop_assert!(negativity_margin(&tr, t) >= -1e-12);
    }

    #[test]
    fn response_kernel_matches_quadrature(seed in 0u64..500, t in 0.1f64..3.0) {
        let m = model(3, seed, 1.0, true);
        let tr = Transport::new(&m, 0.0, 0).unwrap();
        let mut rng = Rng::new(seed);
        let (x, y) = (rng.hermitian(3), rng.hermitian(3));
        let k = tr.kernel(&x, &y).unwrap();
        let quad = simpson(|s| k.derivative(s), 0.0, t, 400);
        prop_assert!((k.eval(t) - quad).abs() < 1e-8);
    }
}
