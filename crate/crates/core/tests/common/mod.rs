#![allow(dead_code)]

use fermiohm::fields::{FieldMode, PulseSpec, TimeProfile};
use fermiohm::fock::Operator;
use fermiohm::lattice::{sample_disorder, BoxSpec, DisorderMode, InteractionSpec};
use fermiohm::linalg::{CMatrix, C64};
use fermiohm::model::{density_density, yukawa, Model, ModelParams};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn chain(sites: usize) -> BoxSpec {
    BoxSpec::chain(sites).expect("chain")
}

/// Uniform disorder, ϑ = λ = 0.5, optional Yukawa(0.5, 1) interaction.
pub fn model(sites: usize, seed: u64, beta: f64, interacting: bool) -> Model {
    model_on(&chain(sites), seed, beta, interacting)
}

pub fn model_on(lattice: &BoxSpec, seed: u64, beta: f64, interacting: bool) -> Model {
    let omega = sample_disorder(seed, lattice, &DisorderMode::Uniform).expect("disorder");
    let psi = if interacting { density_density(yukawa(0.5, 1.0), lattice) } else { InteractionSpec::none() };
    Model::build(ModelParams::new(omega, 0.5, 0.5, beta, psi)).expect("model")
}

/// ϑ = λ = 0, no interaction: the clean tight-binding chain.
pub fn clean(sites: usize, beta: f64) -> Model {
    let lattice = chain(sites);
    let omega = sample_disorder(0, &lattice, &DisorderMode::Zero).expect("disorder");
    Model::build(ModelParams::new(omega, 0.0, 0.0, beta, InteractionSpec::none())).expect("model")
}

pub fn bump(t0: f64, t1: f64) -> PulseSpec {
    PulseSpec::new(TimeProfile::SmoothBump, (t0, t1), 1.0, vec![1.0], 1.0, FieldMode::Homogeneous).expect("pulse")
}

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[-1, 1)`.
    pub fn uniform(&mut self) -> f64 {
        2.0 * ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 1.0
    }

    pub fn matrix(&mut self, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| C64::new(self.uniform(), self.uniform()))
    }

    pub fn hermitian(&mut self, n: usize) -> CMatrix {
        let m = self.matrix(n);
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    pub fn operator(&mut self, like: &Operator) -> Operator {
        like.with_matrix(self.matrix(like.dim()))
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    fermiohm::linalg::max_abs(m)
}
