//! Experiment configuration: a TOML document with `[lattice]`, `[disorder]`,
//! `[interaction]`, `[pulse]`, `[experiment]` and `[numerics]` sections.

use crate::dynamics::Scheme;
use crate::error::{Error, Result};
use crate::fields::{FieldMode, PulseSpec, TimeProfile};
use crate::lattice::{
    enumerate_box, sample_disorder, BoxSpec, DecayFunction, DisorderDocument, DisorderMode, DisorderRealization,
    InteractionSpec,
};
use crate::model::{density_density, yukawa, ModelParams};
use crate::thermo::Stepping;
use crate::transport::{ConvolutionRule, DEFAULT_SHELL};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Sites of the largest box the dense pipelines accept.
pub const MAX_DENSE_SITES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub lattice: LatticeSection,
    #[serde(default)]
    pub disorder: DisorderSection,
    #[serde(default)]
    pub interaction: InteractionSection,
    #[serde(default)]
    pub pulse: Option<PulseSection>,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub numerics: NumericsSection,
}

/// Either `sites` (a chain), `d` and `L` (the cube `[-L, L]^d`), or `lo` and `hi`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub sites: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<u32>,
    pub lo: Option<Vec<i64>>,
    pub hi: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderKind {
    #[default]
    Uniform,
    Zero,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    #[serde(default)]
    pub mode: DisorderKind,
    #[serde(default)]
    pub seed: u64,
    /// Extra seeds for ensemble experiments.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub lambda: f64,
    /// JSON realization, relative to the config file.
    pub table: Option<String>,
}

fn default_theta() -> f64 {
    0.5
}

impl Default for DisorderSection {
    fn default() -> Self {
        Self { mode: DisorderKind::Uniform, seed: 0, seeds: Vec::new(), theta: default_theta(), lambda: 0.0, table: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionKindConfig {
    #[default]
    None,
    Yukawa,
    DensityDensity,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSection {
    #[serde(default)]
    pub kind: InteractionKindConfig,
    pub strength: Option<f64>,
    pub mass: Option<f64>,
    /// `v(r)` at integer distances `r = 0, 1, ...`; zero beyond.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub profile: TimeProfile,
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub direction: Vec<f64>,
    #[serde(default = "one")]
    pub support_radius: f64,
    #[serde(default)]
    pub mode: FieldMode,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OhmScan,
    JouleScan,
    MeasureReconstruct,
    LrCheck,
    Equicontinuity,
    QuasifreeCrosscheck,
    ThermoLedger,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::OhmScan => "ohm-scan",
            Self::JouleScan => "joule-scan",
            Self::MeasureReconstruct => "measure-reconstruct",
            Self::LrCheck => "lr-check",
            Self::Equicontinuity => "equicontinuity",
            Self::QuasifreeCrosscheck => "quasifree-crosscheck",
            Self::ThermoLedger => "thermo-ledger",
        }
    }

    fn needs_pulse(self) -> bool {
        matches!(self, Self::OhmScan | Self::JouleScan | Self::ThermoLedger)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub beta: f64,
    /// Additional inverse temperatures (quasi-free cross-check).
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub etas: Vec<f64>,
    /// Field strength for single-trajectory experiments.
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "default_ls")]
    pub l: Vec<f64>,
    /// Boundary shell per entry of `l`; one value applies to all.
    #[serde(default)]
    pub shell: Vec<u32>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Lieb–Robinson observable pairs `[x, y]` (site indices), `B₁ = n_x`, `B₂ = n_y`.
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    pub theta0: Option<f64>,
    pub decay: Option<DecayFunction>,
    /// Horizon `T` of the equicontinuity grid.
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_ls() -> Vec<f64> {
    vec![1.0]
}

fn default_samples() -> usize {
    20
}

fn default_tolerance() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "one")]
    pub coupling_sign: f64,
}

fn default_scheme() -> Scheme {
    Scheme::InteractionMagnus4
}

fn default_dt() -> f64 {
    0.02
}

fn default_panels() -> usize {
    24
}

fn default_order() -> usize {
    8
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            dt: default_dt(),
            panels: default_panels(),
            order: default_order(),
            coupling_sign: 1.0,
        }
    }
}

/// One violation found by [`Config::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(out: &mut Vec<Diagnostic>, field: &str, message: impl Into<String>) {
    out.push(Diagnostic { field: field.into(), message: message.into() });
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(format!("config is not UTF-8: {e}")))?;
        Self::parse(text)
    }

    /// SHA-256 of the raw config text.
    pub fn hash(text: &str) -> String {
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn lattice(&self) -> Result<BoxSpec> {
        let s = &self.lattice;
        match (s.sites, s.d, s.l, &s.lo, &s.hi) {
            (Some(n), None, None, None, None) => BoxSpec::chain(n),
            (None, Some(d), Some(l), None, None) => enumerate_box(d, l),
            (None, None, None, Some(lo), Some(hi)) => BoxSpec::cuboid(lo.clone(), hi.clone()),
            _ => Err(Error::Validation(
                "[lattice] needs exactly one of: sites; d and L; lo and hi".into(),
            )),
        }
    }

    pub fn shells(&self) -> Vec<u32> {
        let e = &self.experiment;
        match e.shell.as_slice() {
            [] => vec![DEFAULT_SHELL; e.l.len()],
            [one] => vec![*one; e.l.len()],
            many => many.to_vec(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let e = &self.experiment;
        let (start, end) = match &self.pulse {
            Some(p) => (e.t_start.unwrap_or(p.t0), e.t_end.unwrap_or(p.t1 + 0.25 * (p.t1 - p.t0))),
            None => (e.t_start.unwrap_or(0.0), e.t_end.unwrap_or(2.0)),
        };
        let n = e.samples.max(1);
        (1..=n).map(|k| start + (end - start) * k as f64 / n as f64).collect()
    }

    /// Grid `t_start + k(t_end - t_start)/(samples-1)`, endpoints included.
    pub fn closed_times(&self) -> Vec<f64> {
        let e = &self.experiment;
        let (start, end) = (e.t_start.unwrap_or(0.0), e.t_end.unwrap_or(2.0));
        let n = e.samples.max(2);
        (0..n).map(|k| start + (end - start) * k as f64 / (n - 1) as f64).collect()
    }

    pub fn stepping(&self) -> Stepping {
        Stepping { scheme: self.numerics.scheme, dt: self.numerics.dt }
    }

    pub fn rule(&self) -> ConvolutionRule {
        ConvolutionRule { panels: self.numerics.panels, order: self.numerics.order }
    }

    pub fn pulse(&self) -> Result<PulseSpec> {
        let p = self.pulse.as_ref().ok_or_else(|| Error::Validation("[pulse] section is missing".into()))?;
        let mut spec = PulseSpec::new(p.profile, (p.t0, p.t1), p.amplitude, p.direction.clone(), p.support_radius, p.mode)?;
        spec.eta = 1.0;
        Ok(spec)
    }

    pub fn interaction(&self, lattice: &BoxSpec) -> Result<InteractionSpec> {
        let s = &self.interaction;
        Ok(match s.kind {
            InteractionKindConfig::None => InteractionSpec::none(),
            InteractionKindConfig::Yukawa => {
                let (d, m) = (s.strength.unwrap_or(0.0), s.mass.unwrap_or(1.0));
                density_density(yukawa(d, m), lattice)
            }
            InteractionKindConfig::DensityDensity => {
                let values = s.values.clone().unwrap_or_default();
                density_density(
                    move |r: f64| {
                        let k = r.round();
                        if (r - k).abs() < 1e-9 && (k as usize) < values.len() { values[k as usize] } else { 0.0 }
                    },
                    lattice,
                )
            }
        })
    }

    pub fn disorder(&self, lattice: &BoxSpec, seed: u64, base: Option<&Path>) -> Result<DisorderRealization> {
        let mode = match self.disorder.mode {
            DisorderKind::Uniform => DisorderMode::Uniform,
            DisorderKind::Zero => DisorderMode::Zero,
            DisorderKind::Table => {
                let rel = self.disorder.table.as_ref().ok_or_else(|| {
                    Error::Validation("[disorder] mode = \"table\" needs a table path".into())
                })?;
                let path = base.map_or_else(|| Path::new(rel).to_path_buf(), |b| b.join(rel));
                let text = std::fs::read_to_string(&path)?;
                let doc: DisorderDocument =
                    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                DisorderMode::Table(doc)
            }
        };
        sample_disorder(seed, lattice, &mode)
    }

    /// Model parameters for one disorder seed and inverse temperature.
    pub fn model_params(&self, seed: u64, beta: f64, base: Option<&Path>) -> Result<ModelParams> {
        let lattice = self.lattice()?;
        let disorder = self.disorder(&lattice, seed, base)?;
        let psi = self.interaction(&lattice)?;
        let mut params = ModelParams::new(disorder, self.disorder.theta, self.disorder.lambda, beta, psi);
        params.coupling_sign = self.numerics.coupling_sign;
        params.validate()?;
        Ok(params)
    }

    /// Every schema and physics violation; empty when the config is runnable.
    pub fn validate(&self, base: Option<&Path>) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let e = &self.experiment;
        let lattice = match self.lattice() {
            Ok(b) => Some(b),
            Err(err) => {
                diag(&mut out, "lattice", err.to_string());
                None
            }
        };
        if let Some(b) = &lattice {
            if b.len() > MAX_DENSE_SITES {
                diag(&mut out, "lattice", format!(
                    "box has {} sites; the dense pipelines accept at most {MAX_DENSE_SITES}",
                    b.len()
                ));
            }
        }
        if !(e.beta > 0.0) || !e.beta.is_finite() {
            diag(&mut out, "experiment.beta", format!(
                "β={} must be positive and finite: zero and infinite temperature are excluded from the model",
                e.beta
            ));
        }
        for b in &e.betas {
            if !(*b > 0.0) || !b.is_finite() {
                diag(&mut out, "experiment.betas", format!("β={b} must be positive and finite"));
            }
        }
        if !(self.disorder.theta >= 0.0) || !(self.disorder.lambda >= 0.0) {
            diag(&mut out, "disorder", "theta and lambda must be non-negative");
        }
        if let (DisorderKind::Table, Some(b)) = (self.disorder.mode, &lattice) {
            if let Err(err) = self.disorder(b, self.disorder.seed, base) {
                diag(&mut out, "disorder.table", err.to_string());
            }
        }
        if self.numerics.coupling_sign != 1.0 && self.numerics.coupling_sign != -1.0 {
            diag(&mut out, "numerics.coupling_sign", "must be +1 or -1");
        }
        if !(self.numerics.dt > 0.0) || !self.numerics.dt.is_finite() {
            diag(&mut out, "numerics.dt", "time step must be positive");
        }
        if self.numerics.panels == 0 || self.numerics.order == 0 || self.numerics.order > 64 {
            diag(&mut out, "numerics", "panels must be positive and order in 1..=64");
        }
        if let InteractionKindConfig::Yukawa = self.interaction.kind {
            if self.interaction.mass.is_some_and(|m| !(m > 0.0)) {
                diag(&mut out, "interaction.mass", "Yukawa mass must be positive");
            }
        }
        if e.samples == 0 || e.samples > 100_000 {
            diag(&mut out, "experiment.samples", "must be in 1..=100000");
        }
        if e.l.is_empty() || e.l.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            diag(&mut out, "experiment.l", "needs at least one non-negative region radius");
        }
        if e.shell.len() > 1 && e.shell.len() != e.l.len() {
            diag(&mut out, "experiment.shell", "give one shell, or one per entry of l");
        }
        if matches!(e.kind, ExperimentKind::OhmScan | ExperimentKind::JouleScan) {
            if e.etas.len() < 2 || e.etas.iter().any(|x| !(*x > 0.0)) {
                diag(&mut out, "experiment.etas", "needs at least two positive field strengths");
            } else {
                let lo = e.etas.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = e.etas.iter().copied().fold(0.0, f64::max);
                if hi / lo < 100.0 * (1.0 - 1e-12) {
                    diag(&mut out, "experiment.etas", format!(
                        "η values span {:.2} decades; at least 2 are required for a slope fit",
                        (hi / lo).log10()
                    ));
                }
            }
        }
        if e.kind.needs_pulse() {
            match self.pulse() {
                Err(err) => diag(&mut out, "pulse", err.to_string()),
                Ok(p) => {
                    if let Some(b) = &lattice {
                        let ls: Vec<f64> = if e.kind == ExperimentKind::ThermoLedger { vec![1.0] } else { e.l.clone() };
                        for l in ls {
                            let scaled = if e.kind == ExperimentKind::OhmScan {
                                crate::transport::homogeneous_pulse(&p, l)
                            } else {
                                p.rescale(l)
                            };
                            if let Err(err) = scaled.and_then(|s| s.check_fits(b)) {
                                diag(&mut out, "pulse", format!("at l={l}: {err}"));
                            }
                        }
                    }
                }
            }
        }
        if let Some(b) = &lattice {
            if matches!(
                e.kind,
                ExperimentKind::OhmScan
                    | ExperimentKind::MeasureReconstruct
                    | ExperimentKind::Equicontinuity
                    | ExperimentKind::QuasifreeCrosscheck
            ) {
                for (l, shell) in e.l.iter().zip(self.shells()) {
                    if let Err(err) = crate::transport::Region::new(b, *l, shell) {
                        diag(&mut out, "experiment.l", err.to_string());
                    }
                }
            }
            if e.kind == ExperimentKind::LrCheck {
                if e.pairs.is_empty() {
                    diag(&mut out, "experiment.pairs", "lr-check needs at least one site pair");
                }
                for [x, y] in &e.pairs {
                    if *x >= b.len() || *y >= b.len() || x == y {
                        diag(&mut out, "experiment.pairs", format!("pair [{x}, {y}] must be two distinct sites of the box"));
                    }
                }
            }
        }
        if matches!(e.kind, ExperimentKind::LrCheck | ExperimentKind::Equicontinuity) {
            match e.theta0 {
                None => diag(&mut out, "experiment.theta0", "required for bound checks"),
                Some(t0) if t0 < self.disorder.theta => {
                    diag(&mut out, "experiment.theta0", format!("ϑ₀={t0} is below ϑ={}", self.disorder.theta))
                }
                _ => {}
            }
        }
        if e.kind == ExperimentKind::QuasifreeCrosscheck && self.interaction.kind != InteractionKindConfig::None {
            diag(&mut out, "interaction.kind", "quasifree-crosscheck requires kind = \"none\"");
        }
        out
    }
}
