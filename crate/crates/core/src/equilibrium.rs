//! Gibbs states, the quasi-free one-particle reduction, time-evolved states
//! and state checkpoints.

use crate::dynamics::{Propagator, SpectralData};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, trace_product, unitary_exp, CMatrix, C64, I};
use crate::model::{Drive, Model};

/// `ϖ = e^{-βH}/Z`, kept together with the spectral data of `H`.
#[derive(Debug, Clone)]
pub struct GibbsState {
    beta: f64,
    weights: Vec<f64>,
    log_partition: f64,
    density: CMatrix,
    spectral: SpectralData,
}

pub fn gibbs(model: &Model) -> Result<GibbsState> {
    GibbsState::new(model.spectral(), model.params.beta)
}

impl GibbsState {
    pub fn new(spectral: &SpectralData, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("inverse temperature β={beta} must be positive and finite")));
        }
        let e = spectral.energies();
        let e0 = e[0];
        let raw: Vec<f64> = e.iter().map(|&x| (-beta * (x - e0)).exp()).collect();
        let z: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / z).collect();
        let log_partition = -beta * e0 + z.ln();
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(e.len(), weights.iter().map(|&p| c(p))));
        let density = spectral.from_eigenbasis(&diag);
        Ok(Self { beta, weights, log_partition, density, spectral: spectral.clone() })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Boltzmann weights in the eigenbasis of `H`, ascending energy.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn density(&self) -> &CMatrix {
        &self.density
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn expectation(&self, b: &CMatrix) -> C64 {
        trace_product(&self.density, b)
    }

    /// `S(ρ|ϖ) = tr ρ ln ρ - tr ρ ln ϖ` using the exact `ln ϖ = -βH - ln Z`.
    pub fn relative_entropy_of(&self, rho: &CMatrix) -> f64 {
        let rt = self.spectral.to_eigenbasis(rho);
        let cross: f64 = self
            .spectral
            .energies()
            .iter()
            .enumerate()
            .map(|(n, &e)| rt[(n, n)].re * (-self.beta * e - self.log_partition))
            .sum();
        neg_entropy(rho) - cross
    }

    /// Analytic continuation `τ_{iβ}(B) = e^{-βH} B e^{βH}`, computed with
    /// bounded factors: `ϖ(A τ_{iβ}(B)) = tr(A ϖ B)`.
    pub fn kms_residual(&self, a: &CMatrix, b: &CMatrix) -> f64 {
        let lhs = trace_product(a, &(&self.density * b));
        let rhs = self.expectation(&(b * a));
        (lhs - rhs).norm()
    }
}

/// `tr ρ ln ρ` with `0 ln 0 = 0`; negative round-off eigenvalues are dropped.
pub fn neg_entropy(rho: &CMatrix) -> f64 {
    let (e, _) = hermitian_eigen(rho);
    e.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum()
}

/// `ρ_t = V_{t,t0} ϖ V_{t,t0}†`; the input for `t ≤ t0`.
pub fn evolve_state(state: &GibbsState, propagator: &Propagator<'_>, t: f64, dt: f64) -> Result<CMatrix> {
    let t0 = propagator.drive.pulse.t0;
    if t <= t0 {
        return Ok(state.density.clone());
    }
    let v = propagator.evolve(t0, t, dt)?;
    Ok(&v * &state.density * v.adjoint())
}

/// Quasi-free state: one-particle Hamiltonian `h` and `G_{xy} = ϖ(a_x† a_y)`.
#[derive(Debug, Clone)]
pub struct OneParticleState {
    pub h: CMatrix,
    pub g: CMatrix,
    pub beta: f64,
    energies: Vec<f64>,
    vectors: CMatrix,
}

fn fermi(beta: f64, e: f64) -> f64 {
    let x = beta * e;
    if x > 0.0 {
        let q = (-x).exp();
        q / (1.0 + q)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `G = f(h)ᵀ` with `f` the Fermi function: `⟨a_x† a_y⟩ = f(h)_{yx}`.
pub fn quasifree_twopoint(h: &CMatrix, beta: f64) -> Result<OneParticleState> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("inverse temperature β={beta} must be positive")));
    }
    if crate::linalg::hermiticity_defect(h) > 1e-12 {
        return Err(Error::Validation("one-particle Hamiltonian is not Hermitian".into()));
    }
    let (e, v) = hermitian_eigen(h);
    let energies: Vec<f64> = e.iter().copied().collect();
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        energies.len(),
        energies.iter().map(|&x| c(fermi(beta, x))),
    ));
    let f = &v * diag * v.adjoint();
    Ok(OneParticleState { h: h.clone(), g: f.transpose(), beta, energies, vectors: v })
}

impl OneParticleState {
    /// `f(h)`, the Fermi operator: `ϖ(Σ A_{xy} a_x† a_y) = tr(A f(h))`.
    pub fn fermi_operator(&self) -> CMatrix {
        self.g.transpose()
    }

    pub fn bilinear_expectation(&self, a: &CMatrix) -> C64 {
        a.iter().zip(self.g.iter()).map(|(x, y)| x * y).sum()
    }

    /// `∫_0^t ϖ(i[Q(b), τ_s(Q(a))]) ds` for bilinears `Q(a)`, `Q(b)`.
    pub fn response(&self, a: &CMatrix, b: &CMatrix, t: f64) -> f64 {
        let at = self.vectors.adjoint() * a * &self.vectors;
        let bt = self.vectors.adjoint() * b * &self.vectors;
        let f: Vec<f64> = self.energies.iter().map(|&e| fermi(self.beta, e)).collect();
        let n = f.len();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w = self.energies[i] - self.energies[j];
                acc += (f[j] - f[i]) * bt[(j, i)] * at[(i, j)] * oscillation_integral(w, t);
            }
        }
        acc.re
    }

    /// `ϖ(Q(u† a u))`: expectation of `Q(a)` after one-particle evolution `u`.
    pub fn evolved_expectation(&self, u: &CMatrix, a: &CMatrix) -> C64 {
        trace_product(&(u.adjoint() * a * u), &self.fermi_operator())
    }
}

/// `i ∫_0^t e^{isω} ds`, stable at `ω = 0`.
pub fn oscillation_integral(omega: f64, t: f64) -> C64 {
    let half = 0.5 * omega * t;
    let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    I * t * sinc * C64::from_polar(1.0, half)
}

/// One-particle propagator of `h + w_t` (fourth-order Magnus steps).
pub fn quasifree_propagator(drive: &Drive<'_>, s: f64, t: f64, dt: f64) -> CMatrix {
    let h0 = drive.model.one_particle();
    let n = h0.nrows();
    let steps = ((t - s) / dt).ceil().max(1.0) as usize;
    let h = (t - s) / steps as f64;
    let d = 3f64.sqrt() / 6.0;
    let mut u = CMatrix::identity(n, n);
    for k in 0..steps {
        let a = s + k as f64 * h;
        let h1 = h0 + drive.em_one_particle(a + (0.5 - d) * h);
        let h2 = h0 + drive.em_one_particle(a + (0.5 + d) * h);
        let comm = &h2 * &h1 - &h1 * &h2;
        let x = (&h1 + &h2) * c(0.5 * h) - comm * (I * (3f64.sqrt() * h * h / 12.0));
        u = unitary_exp(&crate::linalg::hermitian_part(&x), 1.0) * u;
    }
    u
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"FOHMCKPT";
const CHECKPOINT_VERSION: u32 = 1;
const MAX_CHECKPOINT_DIM: u64 = 1 << 14;

/// Density-matrix snapshot: header `{basis hash, β, t}` and row-major
/// binary64 `(re, im)` pairs, all little-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub basis_hash: u64,
    pub beta: f64,
    pub t: f64,
    pub matrix: CMatrix,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let n = self.matrix.nrows();
        let mut out = Vec::with_capacity(48 + 16 * n * n);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.basis_hash.to_le_bytes());
        out.extend_from_slice(&self.beta.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for i in 0..n {
            for j in 0..n {
                out.extend_from_slice(&self.matrix[(i, j)].re.to_le_bytes());
                out.extend_from_slice(&self.matrix[(i, j)].im.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Parse("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
        }
        if r.u32()? != 0 {
            return Err(Error::Parse("reserved checkpoint header field is not zero".into()));
        }
        let basis_hash = r.u64()?;
        let beta = r.f64()?;
        let t = r.f64()?;
        let dim = r.u64()?;
        if dim == 0 || dim > MAX_CHECKPOINT_DIM || !dim.is_power_of_two() {
            return Err(Error::Parse(format!("checkpoint dimension {dim} is not a supported Fock dimension")));
        }
        let n = dim as usize;
        let expected = n * n * 16;
        if r.remaining() != expected {
            return Err(Error::Parse(format!(
                "checkpoint payload has {} bytes, expected {expected}",
                r.remaining()
            )));
        }
        let mut matrix = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                matrix[(i, j)] = C64::new(r.f64()?, r.f64()?);
            }
        }
        Ok(Self { basis_hash, beta, t, matrix })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Parse("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Snapshot handed to [`walk_states`] visitors.
pub struct StateSnapshot<'s> {
    pub t: f64,
    pub rho: &'s CMatrix,
    /// `∫_{t0}^t ρ_s(∂_s W_s) ds` so far (zero unless work tracking is on).
    pub work: f64,
}

/// Propagate `ϖ` from the pulse start through ascending `times`, calling
/// `visit` at each one. With `track_work`, the work integral is accumulated
/// by two-point Gauss quadrature inside every propagation step.
pub fn walk_states(
    state: &GibbsState,
    propagator: &Propagator<'_>,
    times: &[f64],
    dt: f64,
    track_work: bool,
    mut visit: impl FnMut(StateSnapshot<'_>) -> Result<()>,
) -> Result<()> {
    let drive = propagator.drive;
    let t0 = drive.pulse.t0;
    let n = state.density.nrows();
    let mut v = CMatrix::identity(n, n);
    let mut now = t0;
    let mut work = 0.0;
    let d = 3f64.sqrt() / 6.0;
    for &target in times {
        if target <= t0 {
            visit(StateSnapshot { t: target, rho: &state.density, work: 0.0 })?;
            continue;
        }
        if target < now {
            return Err(Error::Precondition("sample times must be ascending".into()));
        }
        let steps = ((target - now) / dt).ceil().max(if target > now { 1.0 } else { 0.0 }) as usize;
        let h = if steps == 0 { 0.0 } else { (target - now) / steps as f64 };
        for k in 0..steps {
            let a = now + k as f64 * h;
            if track_work && a < drive.pulse.t1 {
                for frac in [0.5 - d, 0.5 + d] {
                    let rate = drive.em_rate(a + frac * h).into_matrix();
                    let vi = propagator.step_unitary(a, frac * h) * &v;
                    let rho = &vi * &state.density * vi.adjoint();
                    work += 0.5 * h * trace_product(&rho, &rate).re;
                }
            }
            v = propagator.step(&v, a, h);
        }
        now = target;
        let rho = &v * &state.density * v.adjoint();
        visit(StateSnapshot { t: target, rho: &rho, work })?;
    }
    Ok(())
}
