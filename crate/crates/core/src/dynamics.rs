//! Autonomous Heisenberg evolution, non-autonomous propagators and the Dyson
//! interaction-picture unitary.

use crate::error::{Error, Result};
use crate::fock::Operator;
use crate::linalg::{hermitian_eigen, max_abs, unitarize, unitary_exp, c, CMatrix, C64, I};
use crate::model::Drive;
use crate::quadrature::gauss_legendre;
use serde::{Deserialize, Serialize};

/// Eigen-decomposition `H = U diag(E) U†` of a many-body Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralData {
    energies: Vec<f64>,
    vectors: CMatrix,
    tag: u64,
}

impl SpectralData {
    pub fn of(h: &Operator) -> Result<Self> {
        let scale = max_abs(h.matrix()).max(1.0);
        if h.hermiticity_defect() > 1e-12 * scale {
            return Err(Error::Numeric(format!(
                "operator is not Hermitian (defect {:.3e})",
                h.hermiticity_defect()
            )));
        }
        let (e, u) = hermitian_eigen(h.matrix());
        let data = Self { energies: e.iter().copied().collect(), vectors: u, tag: h.tag() };
        let defect = data.reconstruction_error(h);
        let norm = data.energies.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        if defect > 1e-11 * norm.max(1.0) {
            return Err(Error::Numeric(format!("eigendecomposition defect {defect:.3e} too large")));
        }
        Ok(data)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn spectral_width(&self) -> f64 {
        self.energies[self.dim() - 1] - self.energies[0]
    }

    pub fn reconstruction_error(&self, h: &Operator) -> f64 {
        max_abs(&(self.from_eigenbasis(&CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.energies.iter().map(|&e| c(e)),
        ))) - h.matrix()))
    }

    /// `U† B U`.
    pub fn to_eigenbasis(&self, b: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * b * &self.vectors
    }

    /// `U B U†`.
    pub fn from_eigenbasis(&self, b: &CMatrix) -> CMatrix {
        &self.vectors * b * self.vectors.adjoint()
    }

    /// Multiply eigenbasis entry `(m,n)` by `f(E_m - E_n)`.
    pub fn modulate(&self, b: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| b[(i, j)] * f(self.energies[i] - self.energies[j]))
    }

    /// `τ_t(B) = e^{itH} B e^{-itH}`.
    pub fn heisenberg(&self, b: &Operator, t: f64) -> Operator {
        assert_eq!(b.tag(), self.tag, "operator from a different basis");
        let bt = self.to_eigenbasis(b.matrix());
        b.with_matrix(self.from_eigenbasis(&self.modulate(&bt, |w| C64::from_polar(1.0, w * t))))
    }

    /// `d/dt τ_t(B)` from the spectral representation.
    pub fn heisenberg_derivative(&self, b: &Operator, t: f64) -> Operator {
        assert_eq!(b.tag(), self.tag, "operator from a different basis");
        let bt = self.to_eigenbasis(b.matrix());
        b.with_matrix(self.from_eigenbasis(&self.modulate(&bt, |w| I * w * C64::from_polar(1.0, w * t))))
    }

    /// `e^{-itH}`.
    pub fn evolution(&self, t: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &e) in self.energies.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * t);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn heisenberg(b: &Operator, h: &SpectralData, t: f64) -> Operator {
    h.heisenberg(b, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exponential midpoint rule, order 2.
    Magnus2,
    /// Two-point Gauss Magnus with one commutator, order 4.
    Magnus4,
    /// Classical Runge–Kutta with polar re-unitarization each step, order 4.
    Rk4,
    /// Magnus4 in the interaction picture of `H`: the first Magnus term
    /// `∫ τ(W)` is integrated with 8-point Gauss, so the truncation error is
    /// second order in the field.
    InteractionMagnus4,
}

impl Scheme {
    pub fn order(self) -> f64 {
        match self {
            Scheme::Magnus2 => 2.0,
            Scheme::Magnus4 | Scheme::Rk4 | Scheme::InteractionMagnus4 => 4.0,
        }
    }
}

/// Schrödinger-picture propagator `V_{t,s}` of `i∂_t V = (H + W_t) V`.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    pub drive: &'a Drive<'a>,
    pub scheme: Scheme,
}

/// Propagators `V_{t_k, s}` sampled at requested times.
#[derive(Debug, Clone)]
pub struct PropagatorTrace {
    pub start: f64,
    pub times: Vec<f64>,
    pub unitaries: Vec<CMatrix>,
    pub dt: f64,
    pub scheme: Scheme,
    pub warnings: Vec<String>,
}

impl PropagatorTrace {
    /// `V_{t_j, t_i} = V_{t_j,s} V_{t_i,s}†`.
    pub fn between(&self, i: usize, j: usize) -> CMatrix {
        &self.unitaries[j] * self.unitaries[i].adjoint()
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.unitaries.iter().map(crate::linalg::unitarity_defect).fold(0.0, f64::max)
    }
}

impl<'a> Propagator<'a> {
    pub fn new(drive: &'a Drive<'a>, scheme: Scheme) -> Self {
        Self { drive, scheme }
    }

    fn field_off(&self, a: f64, b: f64) -> bool {
        self.drive.pulse.strength() == 0.0 || b <= self.drive.pulse.t0 || a >= self.drive.pulse.t1
    }

    fn hamiltonian(&self, t: f64) -> CMatrix {
        self.drive.total_hamiltonian(t).into_matrix()
    }

    /// Single-step propagator from `t` to `t + h`.
    pub fn step_unitary(&self, t: f64, h: f64) -> CMatrix {
        if self.field_off(t, t + h) {
            return self.drive.model.spectral().evolution(h);
        }
        match self.scheme {
            Scheme::Magnus2 => unitary_exp(&self.hamiltonian(t + 0.5 * h), h),
            Scheme::Magnus4 => {
                let d = 3f64.sqrt() / 6.0;
                let h1 = self.hamiltonian(t + (0.5 - d) * h);
                let h2 = self.hamiltonian(t + (0.5 + d) * h);
                let comm = &h2 * &h1 - &h1 * &h2;
                let x = (&h1 + &h2) * c(0.5 * h) - comm * (I * (3f64.sqrt() * h * h / 12.0));
                unitary_exp(&crate::linalg::hermitian_part(&x), 1.0)
            }
            Scheme::Rk4 => {
                let n = self.drive.model.basis().dim();
                self.rk4(&CMatrix::identity(n, n), t, h)
            }
            Scheme::InteractionMagnus4 => self.interaction_step(t, h),
        }
    }

    /// `e^{i(τ-t)H} W_τ e^{-i(τ-t)H}` in the eigenbasis of `H`.
    fn interaction_potential(&self, t: f64, tau: f64) -> CMatrix {
        let spectral = self.drive.model.spectral();
        let e = spectral.energies();
        let mut w = spectral.to_eigenbasis(self.drive.em_potential(tau).matrix());
        let r = tau - t;
        for n in 0..e.len() {
            for m in 0..e.len() {
                w[(m, n)] *= C64::from_polar(1.0, r * (e[m] - e[n]));
            }
        }
        w
    }

    fn interaction_step(&self, t: f64, h: f64) -> CMatrix {
        let spectral = self.drive.model.spectral();
        let n = spectral.dim();
        let (nodes, weights) = gauss_legendre(8);
        let mut first = CMatrix::zeros(n, n);
        for (x, w) in nodes.iter().zip(&weights) {
            first += self.interaction_potential(t, t + 0.5 * h * (x + 1.0)) * c(0.5 * h * w);
        }
        let d = 3f64.sqrt() / 6.0;
        let w1 = self.interaction_potential(t, t + (0.5 - d) * h);
        let w2 = self.interaction_potential(t, t + (0.5 + d) * h);
        let comm = &w2 * &w1 - &w1 * &w2;
        let x = first - comm * (I * (3f64.sqrt() * h * h / 12.0));
        let mut u = unitary_exp(&crate::linalg::hermitian_part(&x), 1.0);
        for (m, &em) in spectral.energies().iter().enumerate() {
            let phase = C64::from_polar(1.0, -h * em);
            for j in 0..n {
                u[(m, j)] *= phase;
            }
        }
        spectral.from_eigenbasis(&u)
    }

    fn rk4(&self, v: &CMatrix, t: f64, h: f64) -> CMatrix {
        let mi = -I;
        let ha = self.hamiltonian(t);
        let hm = self.hamiltonian(t + 0.5 * h);
        let hb = self.hamiltonian(t + h);
        let k1 = &ha * v * mi;
        let k2 = &hm * (v + &k1 * c(0.5 * h)) * mi;
        let k3 = &hm * (v + &k2 * c(0.5 * h)) * mi;
        let k4 = &hb * (v + &k3 * c(h)) * mi;
        v + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0)
    }

    /// Advance `v` (the propagator from some start to `t`) by one step.
    pub fn step(&self, v: &CMatrix, t: f64, h: f64) -> CMatrix {
        if self.scheme == Scheme::Rk4 && !self.field_off(t, t + h) {
            return unitarize(&self.rk4(v, t, h));
        }
        self.step_unitary(t, h) * v
    }

    fn grid(s: f64, t: f64, dt: f64) -> Result<(usize, f64)> {
        if !(t >= s) {
            return Err(Error::Precondition(format!("propagation needs s ≤ t, got s={s}, t={t}")));
        }
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step {dt} must be positive")));
        }
        let steps = ((t - s) / dt).ceil().max(if t > s { 1.0 } else { 0.0 }) as usize;
        let h = if steps == 0 { 0.0 } else { (t - s) / steps as f64 };
        Ok((steps, h))
    }

    /// `V_{t,s}` with equal steps no larger than `dt`.
    pub fn evolve(&self, s: f64, t: f64, dt: f64) -> Result<CMatrix> {
        let (steps, h) = Self::grid(s, t, dt)?;
        let n = self.drive.model.basis().dim();
        let mut v = CMatrix::identity(n, n);
        for k in 0..steps {
            v = self.step(&v, s + k as f64 * h, h);
        }
        check_finite(&v)?;
        Ok(v)
    }

    /// Propagators from `s` to each sample time (ascending, within `[s, ∞)`).
    /// Steps are aligned so every sample time is hit exactly.
    pub fn trace(&self, s: f64, samples: &[f64], dt: f64) -> Result<PropagatorTrace> {
        let mut warnings = Vec::new();
        let span = self.drive.pulse.t1 - self.drive.pulse.t0;
        if dt > span / 10.0 {
            warnings.push(format!("time step {dt} exceeds a tenth of the pulse duration {span}"));
        }
        let n = self.drive.model.basis().dim();
        let mut v = CMatrix::identity(n, n);
        let mut now = s;
        let mut unitaries = Vec::with_capacity(samples.len());
        for &target in samples {
            let (steps, h) = Self::grid(now, target, dt)?;
            for k in 0..steps {
                v = self.step(&v, now + k as f64 * h, h);
            }
            check_finite(&v)?;
            now = target;
            unitaries.push(v.clone());
        }
        Ok(PropagatorTrace { start: s, times: samples.to_vec(), unitaries, dt, scheme: self.scheme, warnings })
    }

    /// Defects `‖V_dt - V_{dt/2}‖`, `‖V_{dt/2} - V_{dt/4}‖` and the observed order.
    pub fn convergence(&self, s: f64, t: f64, dt: f64) -> Result<Convergence> {
        let v1 = self.evolve(s, t, dt)?;
        let v2 = self.evolve(s, t, dt / 2.0)?;
        let v4 = self.evolve(s, t, dt / 4.0)?;
        let d1 = max_abs(&(&v1 - &v2));
        let d2 = max_abs(&(&v2 - &v4));
        Ok(Convergence { coarse_defect: d1, fine_defect: d2, order: (d1 / d2).log2() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    pub coarse_defect: f64,
    pub fine_defect: f64,
    pub order: f64,
}

fn check_finite(v: &CMatrix) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("propagator has non-finite entries".into()))
    }
}

#[derive(Debug, Clone)]
pub struct DysonUnitary {
    pub unitary: CMatrix,
    pub order: usize,
    /// `(sup‖W‖ (t-s))^{K+1} / (K+1)!`.
    pub tail_bound: f64,
}

/// Truncated Dyson series `𝔘_{t,s}` of order `K`, nested integrals by
/// panel-wise Gauss–Legendre spectral integration.
pub fn dyson_unitary(drive: &Drive<'_>, s: f64, t: f64, order: usize, panels: usize) -> Result<DysonUnitary> {
    if order == 0 {
        return Err(Error::Domain("Dyson order must be at least 1".into()));
    }
    if !(t >= s) {
        return Err(Error::Precondition(format!("Dyson series needs s ≤ t, got s={s}, t={t}")));
    }
    let spectral = drive.model.spectral();
    let n = spectral.dim();
    let identity = CMatrix::identity(n, n);
    let tail_bound = {
        let x = drive.em_norm_bound() * (t - s);
        (1..=order + 1).fold(1.0, |acc, k| acc * x / k as f64)
    };
    if t == s {
        return Ok(DysonUnitary { unitary: identity, order, tail_bound });
    }
    let q = 8;
    let (gx, gw) = gauss_legendre(q);
    // cumulative integration weights on [-1, 1]: S[i][j] = ∫_{-1}^{x_i} ℓ_j
    let lagrange = |j: usize, u: f64| {
        (0..q).filter(|&m| m != j).map(|m| (u - gx[m]) / (gx[j] - gx[m])).product::<f64>()
    };
    let cumulative: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            let half = 0.5 * (gx[i] + 1.0);
            (0..q)
                .map(|j| (0..q).map(|m| half * gw[m] * lagrange(j, -1.0 + half * (gx[m] + 1.0))).sum())
                .collect()
        })
        .collect();
    let h = (t - s) / panels as f64;
    let nodes: Vec<f64> =
        (0..panels).flat_map(|p| gx.iter().map(move |x| s + p as f64 * h + 0.5 * h * (x + 1.0))).collect();
    // X(r) = τ_{r-t}(W_r) in the eigenbasis
    let xs: Vec<CMatrix> = nodes
        .iter()
        .map(|&r| {
            let w = spectral.to_eigenbasis(&drive.em_potential(r).into_matrix());
            spectral.modulate(&w, |om| C64::from_polar(1.0, om * (r - t)))
        })
        .collect();
    let mut total = identity.clone();
    let mut previous: Vec<CMatrix> = vec![identity.clone(); nodes.len()];
    let mut coeff = c(1.0);
    for _ in 1..=order {
        let integrands: Vec<CMatrix> = xs.iter().zip(&previous).map(|(x, f)| x * f).collect();
        let mut current = Vec::with_capacity(nodes.len());
        let mut start = CMatrix::zeros(n, n);
        for p in 0..panels {
            let block = &integrands[p * q..(p + 1) * q];
            for row in &cumulative {
                let mut acc = start.clone();
                for (wj, g) in row.iter().zip(block) {
                    acc += g * c(0.5 * h * wj);
                }
                current.push(acc);
            }
            for (wj, g) in gw.iter().zip(block) {
                start += g * c(0.5 * h * wj);
            }
        }
        coeff *= -I;
        total += &start * coeff;
        previous = current;
    }
    Ok(DysonUnitary { unitary: spectral.from_eigenbasis(&total), order, tail_bound })
}
