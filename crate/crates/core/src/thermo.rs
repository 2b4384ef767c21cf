//! Relative entropy, heat production and the energy bookkeeping of a driven
//! system.

use crate::dynamics::{Propagator, Scheme};
use crate::equilibrium::{gibbs, neg_entropy, walk_states, GibbsState};
use crate::error::{Error, Result};
use crate::fields::PulseSpec;
use crate::linalg::{hermitian_eigen, trace, trace_product, CMatrix};
use crate::model::Model;
use serde::Serialize;
use std::fmt::Write as _;

/// Relative eigenvalue threshold below which `ρ₂` is treated as singular.
pub const SUPPORT_THRESHOLD: f64 = 1e-13;

fn check_density(rho: &CMatrix, name: &str) -> Result<()> {
    let tr = trace(rho);
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::Validation(format!("{name} has trace {tr}, expected 1")));
    }
    if crate::linalg::hermiticity_defect(rho) > 1e-10 {
        return Err(Error::Validation(format!("{name} is not Hermitian")));
    }
    Ok(())
}

/// `tr ρ₁ (ln ρ₁ - ln ρ₂)`; `+∞` when the support of `ρ₁` is not inside that of `ρ₂`.
pub fn relative_entropy(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64> {
    check_density(rho1, "first state")?;
    check_density(rho2, "second state")?;
    let (q, u) = hermitian_eigen(rho2);
    if q[0] < -1e-10 {
        return Err(Error::Validation(format!("second state has negative eigenvalue {}", q[0])));
    }
    let qmax = q[q.len() - 1];
    let r = u.adjoint() * rho1 * &u;
    let mut cross = 0.0;
    for (k, &qk) in q.iter().enumerate() {
        let weight = r[(k, k)].re;
        if qk <= SUPPORT_THRESHOLD * qmax {
            if weight > SUPPORT_THRESHOLD {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * qk.ln();
    }
    Ok(neg_entropy(rho1) - cross)
}

/// Time series of heat, energy increments and work.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub work: Vec<f64>,
    pub ip: Vec<f64>,
    pub id: Vec<f64>,
}

impl EnergyLedger {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,Q,S,P,Work,Ip,Id\n");
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.t[k], self.q[k], self.s[k], self.p[k], self.work[k], self.ip[k], self.id[k]
            );
        }
        out
    }

    /// `max |Q - S| / max(1, |S|)`.
    pub fn first_law_defect(&self) -> f64 {
        (0..self.len()).map(|k| (self.q[k] - self.s[k]).abs() / self.s[k].abs().max(1.0)).fold(0.0, f64::max)
    }

    /// `max |S + P - Work| / max(1, |Work|)`.
    pub fn balance_defect(&self) -> f64 {
        (0..self.len())
            .map(|k| (self.s[k] + self.p[k] - self.work[k]).abs() / self.work[k].abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// `max |I_p + I_d - S - P|`.
    pub fn split_defect(&self) -> f64 {
        (0..self.len()).map(|k| (self.ip[k] + self.id[k] - self.s[k] - self.p[k]).abs()).fold(0.0, f64::max)
    }

    pub fn min_heat(&self) -> f64 {
        self.q.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Propagation settings shared by the thermodynamic and transport pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stepping {
    pub scheme: Scheme,
    pub dt: f64,
}

/// Full energy ledger at ascending `times`.
pub fn energy_ledger(model: &Model, pulse: &PulseSpec, times: &[f64], stepping: Stepping) -> Result<EnergyLedger> {
    Ok(energy_ledger_with_state(model, pulse, times, stepping)?.0)
}

/// [`energy_ledger`] plus the density matrix at the last sample time.
pub fn energy_ledger_with_state(
    model: &Model,
    pulse: &PulseSpec,
    times: &[f64],
    stepping: Stepping,
) -> Result<(EnergyLedger, CMatrix)> {
    let drive = model.drive(pulse)?;
    let state = gibbs(model)?;
    let propagator = Propagator::new(&drive, stepping.scheme);
    let h = model.hamiltonian().matrix();
    let e_eq = state.expectation(h).re;
    let beta = model.params.beta;
    let mut ledger = EnergyLedger::default();
    let mut last = state.density().clone();
    walk_states(&state, &propagator, times, stepping.dt, true, |snap| {
        let w = drive.em_potential(snap.t).into_matrix();
        let q = state.relative_entropy_of(snap.rho) / beta;
        if !q.is_finite() {
            return Err(Error::Numeric(format!("relative entropy is not finite at t={}", snap.t)));
        }
        let s = trace_product(snap.rho, h).re - e_eq;
        let p = trace_product(snap.rho, &w).re;
        let diff = snap.rho - state.density();
        let ip = trace_product(&diff, &(h + &w)).re;
        let id = state.expectation(&w).re;
        ledger.t.push(snap.t);
        ledger.q.push(q);
        ledger.s.push(s);
        ledger.p.push(p);
        ledger.work.push(snap.work);
        ledger.ip.push(ip);
        ledger.id.push(id);
        last = snap.rho.clone();
        Ok(())
    })?;
    Ok((ledger, last))
}

fn single(model: &Model, pulse: &PulseSpec, t: f64, stepping: Stepping) -> Result<EnergyLedger> {
    energy_ledger(model, pulse, &[t], stepping)
}

/// `Q(t) = β⁻¹ S(ρ_t | ϖ)`.
pub fn heat_production(model: &Model, pulse: &PulseSpec, t: f64, stepping: Stepping) -> Result<f64> {
    Ok(single(model, pulse, t, stepping)?.q[0])
}

/// `S(t) = ρ_t(H) - ϖ(H)`.
pub fn internal_energy_increment(model: &Model, pulse: &PulseSpec, t: f64, stepping: Stepping) -> Result<f64> {
    Ok(single(model, pulse, t, stepping)?.s[0])
}

/// `P(t) = ρ_t(W_t)`.
pub fn potential_energy(model: &Model, pulse: &PulseSpec, t: f64, stepping: Stepping) -> Result<f64> {
    Ok(single(model, pulse, t, stepping)?.p[0])
}

/// `∫_{t0}^t ρ_s(∂_s W_s) ds`.
pub fn em_work(model: &Model, pulse: &PulseSpec, t: f64, stepping: Stepping) -> Result<f64> {
    Ok(single(model, pulse, t, stepping)?.work[0])
}

/// `(I_p, I_d) = (ρ_t(H+W_t) - ϖ(H+W_t), ϖ(W_t))`.
pub fn joule_energy_split(model: &Model, pulse: &PulseSpec, t: f64, stepping: Stepping) -> Result<(f64, f64)> {
    let l = single(model, pulse, t, stepping)?;
    Ok((l.ip[0], l.id[0]))
}

/// Heat production of an arbitrary state relative to the Gibbs state.
pub fn heat_of(state: &GibbsState, rho: &CMatrix) -> f64 {
    state.relative_entropy_of(rho) / state.beta()
}
