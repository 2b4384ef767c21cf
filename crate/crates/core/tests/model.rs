mod common;

use common::{bump, chain, max_abs, model};
use fermiohm::fields::{FieldMode, PulseSpec, TimeProfile};
use fermiohm::fock::Parity;
use fermiohm::lattice::{
    decay_constants, interaction_norm, sample_disorder, DecayFunction, DisorderMode, InteractionSpec, Ladder,
    LocalTerm, Monomial,
};
use fermiohm::linalg::{c, CMatrix, C64, I};
use fermiohm::model::{density_density, gauge_defect, yukawa, Drive, Model, ModelParams};
use proptest::prelude::*;

fn params(sites: usize, theta: f64, lambda: f64, mode: DisorderMode) -> ModelParams {
    let lattice = chain(sites);
    let omega = sample_disorder(3, &lattice, &mode).unwrap();
    ModelParams::new(omega, theta, lambda, 1.0, InteractionSpec::none())
}

#[test]
fn quadratic_clean_chain_is_second_quantized_laplacian() {
    let m = Model::build(params(3, 0.0, 0.0, DisorderMode::Zero)).unwrap();
    let mut lap = CMatrix::zeros(3, 3);
    for x in 0..3 {
        lap[(x, x)] = c(2.0);
        if x + 1 < 3 {
            lap[(x, x + 1)] = c(-1.0);
            lap[(x + 1, x)] = c(-1.0);
        }
    }
    let expected = m.basis().bilinear(&lap).unwrap();
    assert_eq!(max_abs(&(m.hamiltonian().matrix() - expected.matrix())), 0.0);
}

#[test]
fn unit_potential_adds_total_number() {
    let mut p = params(4, 0.5, 1.0, DisorderMode::Uniform);
    p.disorder.omega1.iter_mut().for_each(|w| *w = 1.0);
    let with = Model::build(p.clone()).unwrap();
    p.lambda = 0.0;
    let without = Model::build(p).unwrap();
    let diff = with.hamiltonian() - without.hamiltonian();
    let n = with.basis().total_number();
    assert!(max_abs(&(diff.matrix() - n.matrix())) < 1e-14);
}

#[test]
fn hamiltonian_is_hermitian_and_even() {
    for seed in 0..4 {
        let m = model(5, seed, 1.0, true);
        assert!(m.hamiltonian().hermiticity_defect() < 1e-13);
        assert_eq!(m.basis().parity_class(m.hamiltonian(), 1e-12), Parity::Even);
    }
}

#[test]
fn yukawa_profile_values() {
    let v = yukawa(1.0, 1.0);
    assert_eq!(v(0.0), 1.0);
    assert!((v(1.0) - (-1f64).exp() / 2.0).abs() < 1e-16);
    assert!(density_density(|_| 0.0, &chain(4)).terms.is_empty());
}

#[test]
fn density_density_conserves_every_occupation() {
    let m = model(5, 1, 1.0, true);
    assert_eq!(gauge_defect(&m), 0.0);
}

#[test]
fn yukawa_interaction_norm_against_pair_enumeration() {
    let lattice = fermiohm::lattice::enumerate_box(1, 3).unwrap();
    let v = yukawa(0.7, 0.8);
    let psi = density_density(&v, &lattice);
    let f = DecayFunction::polynomial(1, 1.0);
    let n = lattice.len();
    let mut brute: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let r = lattice.distance(x, y);
            let total = if x == y {
                v(0.0) + (0..n).filter(|&z| z != x).map(|z| 2.0 * v(lattice.distance(x, z))).sum::<f64>()
            } else {
                2.0 * v(r)
            };
            brute = brute.max(total / f.eval(r));
        }
    }
    let got = interaction_norm(&psi, &f, &lattice).unwrap();
    assert!((got - brute).abs() < 1e-12 * brute, "{got} vs {brute}");
    assert_eq!(interaction_norm(&InteractionSpec::none(), &f, &lattice).unwrap(), 0.0);
}

#[test]
fn single_pair_term_norm() {
    let lattice = chain(4);
    let f = DecayFunction::polynomial(1, 1.0);
    let term = LocalTerm::new(vec![Monomial::new(
        c(0.3),
        vec![Ladder::create(0), Ladder::annihilate(0), Ladder::create(2), Ladder::annihilate(2)],
    )]);
    let got = interaction_norm(&InteractionSpec::custom(vec![term]), &f, &lattice).unwrap();
    assert!((got - 0.3 / f.eval(2.0)).abs() < 1e-15);
    let k = decay_constants(&f, &lattice).unwrap();
    assert!(k.convolution <= 2f64.powf(3.0) * k.norm1 + 1e-12);
}

#[test]
fn current_examples() {
    let m = model(4, 2, 1.0, false);
    // not nearest neighbours
    assert_eq!(max_abs(m.paramagnetic_current_at(0, 2).matrix()), 0.0);
    // ϑ = 0: I = 2 Im(a_x† a_{x+1})
    let clean = Model::build(params(3, 0.0, 0.0, DisorderMode::Zero)).unwrap();
    let hop = clean.basis().polynomial(&[Monomial::new(c(1.0), vec![Ladder::create(0), Ladder::annihilate(1)])]);
    let im = (&hop - &hop.adjoint()).scale(C64::new(0.0, -0.5));
    let expected = &im * 2.0;
    assert!(max_abs(&(clean.paramagnetic_current_at(0, 1).matrix() - expected.matrix())) < 1e-15);
}

#[test]
fn real_hopping_symmetries() {
    let mut p = params(4, 0.5, 0.5, DisorderMode::Uniform);
    p.disorder.omega2.iter_mut().for_each(|z| *z = c(z.re));
    let m = Model::build(p).unwrap();
    for (x, y) in m.lattice().bonds() {
        let forward = m.paramagnetic_current_at(x, y);
        let backward = m.paramagnetic_current_at(y, x);
        assert!(max_abs(&(forward.matrix() + backward.matrix())) < 1e-15);
        let (px, py) = (m.diamagnetic_kernel_at(x, y), m.diamagnetic_kernel_at(y, x));
        assert!(max_abs(&(px.matrix() - py.matrix())) < 1e-15);
    }
}

#[test]
fn diamagnetic_kernel_diagonal_and_bound() {
    let m = model(4, 5, 1.0, false);
    for x in 0..4 {
        let expected = &m.number(x) * 4.0; // 2 · 2d · n_x, d = 1
        assert!(max_abs(&(m.diamagnetic_kernel_at(x, x).matrix() - expected.matrix())) < 1e-14);
    }
    let bound = 2.0 * (m.params.theta + 1.0);
    for (x, y) in m.lattice().bonds() {
        let norm = fermiohm::linalg::spectral_norm(m.diamagnetic_kernel_at(x, y).matrix());
        assert!(norm <= bound + 1e-12, "{norm} > {bound}");
    }
}

#[test]
fn diamagnetic_current_first_order_in_field() {
    let m = model(4, 6, 1.0, false);
    let (x, y) = (m.lattice().site(1).to_vec(), m.lattice().site(2).to_vec());
    let base = bump(0.0, 2.0);
    assert_eq!(max_abs(m.diamagnetic_current(&x, &y, &base.scale_strength(0.0), 1.0).unwrap().matrix()), 0.0);
    let phi = base.line_integral(1.0, &x, &y).unwrap();
    let kernel = m.diamagnetic_kernel(&x, &y).unwrap();
    // e^{-iηφ} - 1 ≈ -iηφ and -2 Im(-iηφ Δ a†a) = ηφ P.
    let mut errors = Vec::new();
    for eta in [1e-2, 1e-3] {
        let op = m.diamagnetic_current(&x, &y, &base.scale_strength(eta), 1.0).unwrap();
        assert!(op.hermiticity_defect() < 1e-15);
        let linear = &kernel * (eta * phi);
        errors.push(max_abs(&(op.matrix() - linear.matrix())));
    }
    let ratio = errors[0] / errors[1];
    assert!((ratio.log10() - 2.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn em_potential_vanishes_off_pulse_and_at_zero_strength() {
    let m = model(4, 1, 1.0, true);
    let p = bump(1.0, 2.0);
    let d = Drive::new(&m, &p).unwrap();
    assert_eq!(max_abs(d.em_potential(0.5).matrix()), 0.0);
    let z = p.scale_strength(0.0);
    assert_eq!(max_abs(Drive::new(&m, &z).unwrap().em_potential(1.5).matrix()), 0.0);
}

#[test]
fn em_potential_lipschitz() {
    let m = model(4, 1, 1.0, false);
    let p = PulseSpec::new(TimeProfile::SineBump, (0.0, 2.0), 1.0, vec![1.0], 1.0, FieldMode::Homogeneous)
        .unwrap()
        .scale_strength(0.3);
    let d = Drive::new(&m, &p).unwrap();
    let k = d.lipschitz_constant();
    let grid: Vec<f64> = (0..41).map(|i| -0.2 + 2.4 * i as f64 / 40.0).collect();
    for w in grid.windows(2) {
        let diff = fermiohm::linalg::spectral_norm(&(d.em_potential(w[1]).matrix() - d.em_potential(w[0]).matrix()));
        assert!(diff <= k * (w[1] - w[0]) + 1e-14, "{diff} vs {}", k * (w[1] - w[0]));
    }
}

#[test]
fn continuity_equation() {
    let m = model(6, 2, 1.0, true);
    for t in [0.0, 0.7, 2.0] {
        let x = m.lattice().site(2).to_vec();
        assert!(m.continuity_residual(&x, t).unwrap() <= 1e-10);
    }
    let free = model(6, 2, 1.0, false);
    let x = free.lattice().site(3).to_vec();
    assert!(free.continuity_residual(&x, 1.3).unwrap() <= 1e-12);
    // t = 0 directly: i[H, n_x] + Σ_y I_(x,y)
    let xi = 3;
    let hn = free.hamiltonian().commutator(&free.number(xi)).scale(I);
    let out = &free.paramagnetic_current_at(xi, 2) + &free.paramagnetic_current_at(xi, 4);
    assert!(max_abs((&hn + &out).matrix()) < 1e-12);
}

#[test]
fn rejects_non_physical_parameters() {
    let mut p = params(3, 0.5, 0.5, DisorderMode::Uniform);
    p.beta = 0.0;
    assert!(Model::build(p.clone()).is_err());
    p.beta = f64::INFINITY;
    assert!(Model::build(p.clone()).is_err());
    p.beta = 1.0;
    p.theta = -0.1;
    assert!(Model::build(p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_hermitian_for_random_parameters(seed in 0u64..10_000, theta in 0.0f64..2.0, lambda in 0.0f64..2.0) {
        let lattice = chain(4);
        let omega = sample_disorder(seed, &lattice, &DisorderMode::Uniform).unwrap();
        let m = Model::build(ModelParams::new(omega, theta, lambda, 1.0, density_density(yukawa(0.3, 0.5), &lattice))).unwrap();
        prop_assert!(m.hamiltonian().hermiticity_defect() < 1e-13);
        prop_assert!(m.hopping().iter().zip(m.hopping().adjoint().iter()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn em_potential_is_hermitian(seed in 0u64..1000, t in -0.5f64..2.5, eta in -2.0f64..2.0) {
        let m = model(4, seed, 1.0, false);
        let p = bump(0.0, 2.0).scale_strength(eta);
        let d = Drive::new(&m, &p).unwrap();
        prop_assert!(d.em_potential(t).hermiticity_defect() < 1e-14);
    }
}
