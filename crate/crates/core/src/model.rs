//! Many-body observables: internal energy, electromagnetic potential energy,
//! interactions and current observables.

use crate::dynamics::SpectralData;
use crate::error::{Error, Result};
use crate::fields::PulseSpec;
use crate::fock::{FockBasis, Operator, DEFAULT_DENSE_LIMIT};
use crate::lattice::{
    one_particle_hopping, BoxSpec, DisorderRealization, InteractionKind, InteractionSpec, Ladder, LocalTerm,
    Monomial,
};
use crate::linalg::{c, CMatrix, C64, I};
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lattice: BoxSpec,
    pub disorder: DisorderRealization,
    pub theta: f64,
    pub lambda: f64,
    pub beta: f64,
    pub interaction: InteractionSpec,
    /// Multiplies every Peierls line integral; `+1` is the default convention.
    pub coupling_sign: f64,
    pub dense_limit: usize,
}

impl ModelParams {
    pub fn new(disorder: DisorderRealization, theta: f64, lambda: f64, beta: f64, interaction: InteractionSpec) -> Self {
        Self {
            lattice: disorder.lattice.clone(),
            disorder,
            theta,
            lambda,
            beta,
            interaction,
            coupling_sign: 1.0,
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Domain(format!("ϑ={} and λ={} must be non-negative", self.theta, self.lambda)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Domain(format!(
                "β={} must be positive and finite (zero and infinite temperature are excluded)",
                self.beta
            )));
        }
        if self.coupling_sign != 1.0 && self.coupling_sign != -1.0 {
            return Err(Error::Domain(format!("coupling sign {} must be ±1", self.coupling_sign)));
        }
        if self.disorder.lattice != self.lattice {
            return Err(Error::Validation("disorder realization belongs to a different box".into()));
        }
        self.interaction.check_support(&self.lattice)
    }
}

/// Pair interaction `Σ_{x,y} v(|x-y|) n_y n_x` split into local terms:
/// `v(0) n_x` on `{x}` and `2 v(|x-y|) n_x n_y` on `{x,y}`.
pub fn density_density(v: impl Fn(f64) -> f64, lattice: &BoxSpec) -> InteractionSpec {
    let n = lattice.len();
    let number = |x: usize| [Ladder::create(x), Ladder::annihilate(x)];
    let mut terms = Vec::new();
    let mut profile: Vec<(f64, f64)> = Vec::new();
    for x in 0..n {
        for y in x..n {
            let r = lattice.distance(x, y);
            let vr = v(r);
            if !profile.iter().any(|(d, _)| (d - r).abs() < 1e-12) {
                profile.push((r, vr));
            }
            if vr == 0.0 {
                continue;
            }
            let term = if x == y {
                Monomial::new(c(vr), number(x).to_vec())
            } else {
                Monomial::new(c(2.0 * vr), [number(x), number(y)].concat())
            };
            terms.push(LocalTerm::new(vec![term]));
        }
    }
    profile.sort_by(|a, b| a.0.total_cmp(&b.0));
    if terms.is_empty() {
        return InteractionSpec::none();
    }
    InteractionSpec { kind: InteractionKind::DensityDensity { profile }, terms }
}

/// Lattice Yukawa profile `v(r) = D e^{-m r} / (1 + r)`.
pub fn yukawa(strength: f64, mass: f64) -> impl Fn(f64) -> f64 {
    move |r| strength * (-mass * r).exp() / (1.0 + r)
}

/// Physics warnings about an interaction (allowed but unusual choices).
pub fn interaction_warnings(psi: &InteractionSpec) -> Vec<String> {
    match &psi.kind {
        InteractionKind::DensityDensity { profile } => profile
            .iter()
            .filter(|(_, v)| *v < 0.0)
            .map(|(r, v)| format!("density-density profile is negative at r={r}: v={v}"))
            .collect(),
        _ => Vec::new(),
    }
}

/// A model with its Fock basis, one-particle data and Hamiltonian built.
#[derive(Debug)]
pub struct Model {
    pub params: ModelParams,
    basis: FockBasis,
    hopping: CMatrix,
    one_particle: CMatrix,
    interaction: Operator,
    hamiltonian: Operator,
    spectral: OnceLock<SpectralData>,
}

impl Model {
    pub fn build(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let basis = FockBasis::with_dense_limit(&params.lattice, params.dense_limit)?;
        let hopping = one_particle_hopping(&params.disorder, params.theta, &params.lattice)?;
        let mut one_particle = hopping.clone();
        for (x, w) in params.disorder.omega1.iter().enumerate() {
            one_particle[(x, x)] += c(params.lambda * w);
        }
        let mut interaction = basis.zero();
        for term in &params.interaction.terms {
            interaction = &interaction + &basis.polynomial(&term.monomials);
        }
        let hamiltonian = &basis.bilinear(&one_particle)? + &interaction;
        Ok(Self { params, basis, hopping, one_particle, interaction, hamiltonian, spectral: OnceLock::new() })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn lattice(&self) -> &BoxSpec {
        &self.params.lattice
    }

    /// `Δ_{ω,ϑ}`.
    pub fn hopping(&self) -> &CMatrix {
        &self.hopping
    }

    /// `Δ_{ω,ϑ} + λ V_ω`.
    pub fn one_particle(&self) -> &CMatrix {
        &self.one_particle
    }

    pub fn interaction(&self) -> &Operator {
        &self.interaction
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn is_quadratic(&self) -> bool {
        self.params.interaction.terms.is_empty()
    }

    pub fn spectral(&self) -> &SpectralData {
        self.spectral
            .get_or_init(|| SpectralData::of(&self.hamiltonian).expect("Hamiltonian is Hermitian by construction"))
    }

    fn site_index(&self, x: &[i64]) -> Result<usize> {
        self.lattice()
            .index_of(x)
            .ok_or_else(|| Error::Index(format!("site {x:?} outside the box {}", self.lattice().describe())))
    }

    pub fn number(&self, x: usize) -> Operator {
        self.basis.number(x).expect("site index checked by caller")
    }

    fn hopping_element(&self, x: usize, y: usize) -> C64 {
        self.hopping[(x, y)]
    }

    /// One-particle matrix of `I_{(x,y)} = -2 Im(Δ_{xy} a_x† a_y)`.
    pub fn current_matrix(&self, x: usize, y: usize) -> CMatrix {
        let n = self.lattice().len();
        let mut m = CMatrix::zeros(n, n);
        if x != y {
            let d = self.hopping_element(x, y);
            m[(x, y)] += I * d;
            m[(y, x)] -= I * d.conj();
        }
        m
    }

    /// One-particle matrix of `P_{(x,y)} = 2 Re(Δ_{xy} a_x† a_y)`.
    pub fn kernel_matrix(&self, x: usize, y: usize) -> CMatrix {
        let n = self.lattice().len();
        let mut m = CMatrix::zeros(n, n);
        let d = self.hopping_element(x, y);
        m[(x, y)] += d;
        m[(y, x)] += d.conj();
        m
    }

    pub fn paramagnetic_current_at(&self, x: usize, y: usize) -> Operator {
        self.basis.bilinear(&self.current_matrix(x, y)).expect("dense basis")
    }

    pub fn diamagnetic_kernel_at(&self, x: usize, y: usize) -> Operator {
        self.basis.bilinear(&self.kernel_matrix(x, y)).expect("dense basis")
    }

    pub fn paramagnetic_current(&self, x: &[i64], y: &[i64]) -> Result<Operator> {
        Ok(self.paramagnetic_current_at(self.site_index(x)?, self.site_index(y)?))
    }

    pub fn diamagnetic_kernel(&self, x: &[i64], y: &[i64]) -> Result<Operator> {
        Ok(self.diamagnetic_kernel_at(self.site_index(x)?, self.site_index(y)?))
    }

    /// `-2 Im((e^{-i s φ_{xy}(t)} - 1) Δ_{xy} a_x† a_y)`, `s` the coupling sign.
    pub fn diamagnetic_current(&self, x: &[i64], y: &[i64], pulse: &PulseSpec, t: f64) -> Result<Operator> {
        let (i, j) = (self.site_index(x)?, self.site_index(y)?);
        let phi = pulse.line_integral(t, x, y)?;
        let coeff = (C64::from_polar(1.0, -self.params.coupling_sign * phi) - c(1.0)) * self.hopping_element(i, j);
        let n = self.lattice().len();
        let mut m = CMatrix::zeros(n, n);
        m[(i, j)] += I * coeff;
        m[(j, i)] -= I * coeff.conj();
        self.basis.bilinear(&m)
    }

    pub fn drive<'a>(&'a self, pulse: &PulseSpec) -> Result<Drive<'a>> {
        Drive::new(self, pulse)
    }

    /// `‖d/dt τ_t(n_x) + τ_t(Σ_{|x-y|=1} I_{(x,y)})‖`, derivative taken spectrally.
    pub fn continuity_residual(&self, x: &[i64], t: f64) -> Result<f64> {
        let xi = self.site_index(x)?;
        let extra = gauge_defect(self);
        if extra > 1e-12 * (1.0 + self.interaction.norm()) {
            return Err(Error::Precondition(format!(
                "interaction is not gauge invariant: Σ_Λ [Φ_Λ, n_x] has norm {extra:.3e}, \
                 which enters the continuity equation as an extra source term"
            )));
        }
        let spectral = self.spectral();
        let n_x = self.number(xi);
        let mut outflow = self.basis.zero();
        for k in 0..self.lattice().dim() {
            for step in [-1, 1] {
                if let Some(y) = self.lattice().shifted(xi, k, step) {
                    outflow = &outflow + &self.paramagnetic_current_at(xi, y);
                }
            }
        }
        let derivative = spectral.heisenberg_derivative(&n_x, t);
        let evolved = spectral.heisenberg(&outflow, t);
        Ok((&derivative + &evolved).norm())
    }
}

/// `max_x ‖Σ_Λ [Φ_Λ, n_x]‖`, zero for gauge-invariant interactions.
pub fn gauge_defect(model: &Model) -> f64 {
    (0..model.lattice().len())
        .map(|x| model.interaction.commutator(&model.number(x)).norm())
        .fold(0.0, f64::max)
}

pub fn internal_energy(params: &ModelParams) -> Result<Operator> {
    Ok(Model::build(params.clone())?.hamiltonian)
}

/// A model coupled to a validated pulse.
#[derive(Debug, Clone)]
pub struct Drive<'a> {
    pub model: &'a Model,
    pub pulse: PulseSpec,
    /// `(i, j, geometry)` for field-carrying bonds, `i < j`.
    bonds: Vec<(usize, usize, f64)>,
}

impl<'a> Drive<'a> {
    pub fn new(model: &'a Model, pulse: &PulseSpec) -> Result<Self> {
        pulse.validate()?;
        pulse.check_fits(model.lattice())?;
        let lattice = model.lattice();
        let bonds = lattice
            .bonds()
            .into_iter()
            .map(|(i, j)| Ok((i, j, pulse.bond_geometry(lattice.site(i), lattice.site(j))?)))
            .filter(|b| !matches!(b, Ok((_, _, g)) if *g == 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, pulse: pulse.clone(), bonds })
    }

    pub fn field_bonds(&self) -> &[(usize, usize, f64)] {
        &self.bonds
    }

    fn phase_scale(&self) -> f64 {
        self.model.params.coupling_sign * self.pulse.strength()
    }

    /// One-particle matrix of `W_t`.
    pub fn em_one_particle(&self, t: f64) -> CMatrix {
        let n = self.model.lattice().len();
        let mut m = CMatrix::zeros(n, n);
        let a = self.pulse.envelope(t);
        if a == 0.0 {
            return m;
        }
        for &(i, j, g) in &self.bonds {
            let w = (C64::from_polar(1.0, self.phase_scale() * a * g) - c(1.0)) * self.model.hopping[(i, j)];
            m[(i, j)] = w;
            m[(j, i)] = w.conj();
        }
        m
    }

    /// One-particle matrix of `∂_t W_t`.
    pub fn em_rate_one_particle(&self, t: f64) -> CMatrix {
        let n = self.model.lattice().len();
        let mut m = CMatrix::zeros(n, n);
        let (a, da) = (self.pulse.envelope(t), self.pulse.envelope_derivative(t));
        if da == 0.0 {
            return m;
        }
        for &(i, j, g) in &self.bonds {
            let s = self.phase_scale() * g;
            let w = I * s * da * C64::from_polar(1.0, s * a) * self.model.hopping[(i, j)];
            m[(i, j)] = w;
            m[(j, i)] = w.conj();
        }
        m
    }

    pub fn em_potential(&self, t: f64) -> Operator {
        self.model.basis.bilinear(&self.em_one_particle(t)).expect("dense basis")
    }

    pub fn em_rate(&self, t: f64) -> Operator {
        self.model.basis.bilinear(&self.em_rate_one_particle(t)).expect("dense basis")
    }

    pub fn total_hamiltonian(&self, t: f64) -> Operator {
        self.model.basis.bilinear(&(self.model.one_particle() + self.em_one_particle(t))).expect("dense basis")
            + self.model.interaction.clone()
    }

    /// `Σ_{x,y} |Δ_{xy}| · sup_t |∂_t φ_{xy}|`: Lipschitz constant of `t ↦ W_t`.
    pub fn lipschitz_constant(&self) -> f64 {
        let rate = self.pulse.strength().abs() * self.pulse.envelope_derivative_bound();
        2.0 * self.bonds.iter().map(|&(i, j, g)| self.model.hopping[(i, j)].norm() * rate * g.abs()).sum::<f64>()
    }

    /// `sup_t ‖W_t‖` bound from the one-particle coefficients.
    pub fn em_norm_bound(&self) -> f64 {
        let s = self.pulse.strength().abs();
        2.0 * self
            .bonds
            .iter()
            .map(|&(i, j, g)| {
                let phase = (s * g.abs()).min(std::f64::consts::PI);
                self.model.hopping[(i, j)].norm() * 2.0 * (0.5 * phase).sin()
            })
            .sum::<f64>()
    }
}

pub fn em_potential(model: &Model, pulse: &PulseSpec, t: f64) -> Result<Operator> {
    Ok(Drive::new(model, pulse)?.em_potential(t))
}
