//! Vector-potential pulses in the Weyl gauge: electric fields, bond tensions
//! and Peierls phases.
//!
//! A pulse is `A(t,x) = η · amplitude · 𝒜(t) · g(x) · w` with a closed-form
//! time envelope `𝒜` on `[t0, t1]` and a spatial factor `g`:
//!
//! * homogeneous mode: `g = 1` on the unit cells `z + [0,1)^d`, `z ∈ Λ_R`, so
//!   the field-carrying bonds are exactly `(z, z + e_k)` with `z ∈ Λ_R`;
//! * general mode: `g(x) = (1 - |x|²/R²)⁴` inside the ball of radius `R`.

use crate::error::{Error, Result};
use crate::lattice::BoxSpec;
use crate::quadrature::gauss_legendre;
use crate::linalg::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeProfile {
    /// `exp(1 - 1/(1-u²))`, C^∞.
    SmoothBump,
    /// `(1-u²)⁴`.
    PolynomialBump,
    /// `cos²(πu/2)`.
    SineBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldMode {
    #[default]
    Homogeneous,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub profile: TimeProfile,
    pub t0: f64,
    pub t1: f64,
    pub amplitude: f64,
    pub direction: Vec<f64>,
    pub support_radius: f64,
    #[serde(default = "default_mode")]
    pub mode: FieldMode,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_mode() -> FieldMode {
    FieldMode::Homogeneous
}

fn default_eta() -> f64 {
    1.0
}

/// Electric field and bond tensions at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    /// `(i, j, tension)` for every oriented box bond `i → j` with `i < j`.
    pub tensions: Vec<(usize, usize, f64)>,
}

impl PulseSpec {
    pub fn new(
        profile: TimeProfile,
        (t0, t1): (f64, f64),
        amplitude: f64,
        direction: Vec<f64>,
        support_radius: f64,
        mode: FieldMode,
    ) -> Result<Self> {
        let p = Self { profile, t0, t1, amplitude, direction, support_radius, mode, eta: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > self.t0) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::Validation(format!("pulse window [{}, {}] is empty", self.t0, self.t1)));
        }
        let norm = self.direction.iter().map(|w| w * w).sum::<f64>().sqrt();
        if self.direction.is_empty() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("pulse direction {:?} is not a unit vector", self.direction)));
        }
        if !(self.support_radius > 0.0) {
            return Err(Error::Validation(format!("support radius {} must be positive", self.support_radius)));
        }
        if !self.amplitude.is_finite() || !self.eta.is_finite() {
            return Err(Error::Validation("pulse amplitude and eta must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn strength(&self) -> f64 {
        self.eta * self.amplitude
    }

    /// `A_l(t,x) = A(t, x/l)`.
    pub fn rescale(&self, l: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::Domain(format!("rescaling length {l} must be positive")));
        }
        Ok(Self { support_radius: self.support_radius * l, ..self.clone() })
    }

    /// `A ↦ ηA`.
    pub fn scale_strength(&self, eta: f64) -> Self {
        Self { eta: self.eta * eta, ..self.clone() }
    }

    fn normalized_time(&self, t: f64) -> Option<f64> {
        (t > self.t0 && t < self.t1).then(|| (2.0 * t - self.t0 - self.t1) / (self.t1 - self.t0))
    }

    /// Dimensionless envelope `𝒜(t)`, peak value 1.
    pub fn envelope(&self, t: f64) -> f64 {
        let Some(u) = self.normalized_time(t) else { return 0.0 };
        match self.profile {
            TimeProfile::SmoothBump => (1.0 - 1.0 / (1.0 - u * u)).exp(),
            TimeProfile::PolynomialBump => (1.0 - u * u).powi(4),
            TimeProfile::SineBump => (0.5 * PI * u).cos().powi(2),
        }
    }

    /// `d𝒜/dt`.
    pub fn envelope_derivative(&self, t: f64) -> f64 {
        let Some(u) = self.normalized_time(t) else { return 0.0 };
        let du_dt = 2.0 / (self.t1 - self.t0);
        let d_du = match self.profile {
            TimeProfile::SmoothBump => {
                let s = 1.0 - u * u;
                (1.0 - 1.0 / s).exp() * (-2.0 * u / (s * s))
            }
            TimeProfile::PolynomialBump => -8.0 * u * (1.0 - u * u).powi(3),
            TimeProfile::SineBump => -0.5 * PI * (PI * u).sin(),
        };
        d_du * du_dt
    }

    /// `sup_t |d𝒜/dt|`.
    pub fn envelope_derivative_bound(&self) -> f64 {
        let du_dt = 2.0 / (self.t1 - self.t0);
        let per_u = match self.profile {
            TimeProfile::PolynomialBump => {
                let u = (1.0f64 / 7.0).sqrt();
                8.0 * u * (1.0 - u * u).powi(3)
            }
            TimeProfile::SineBump => 0.5 * PI,
            TimeProfile::SmoothBump => {
                // maximum of 2u e^{1-1/s}/s², s = 1-u², located by sampling then golden refinement
                let f = |u: f64| {
                    let s = 1.0 - u * u;
                    2.0 * u * (1.0 - 1.0 / s).exp() / (s * s)
                };
                let (mut a, mut b) = (0.0, 1.0 - 1e-9);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..200 {
                    let x1 = b - g * (b - a);
                    let x2 = a + g * (b - a);
                    if f(x1) < f(x2) {
                        a = x1;
                    } else {
                        b = x2;
                    }
                }
                f(0.5 * (a + b))
            }
        };
        per_u * du_dt
    }

    /// Spatial factor `g(x)`.
    pub fn spatial(&self, x: &[f64]) -> f64 {
        match self.mode {
            FieldMode::Homogeneous => {
                if x.iter().all(|v| v.floor().abs() <= self.support_radius) {
                    1.0
                } else {
                    0.0
                }
            }
            FieldMode::General => {
                let r2 = x.iter().map(|v| v * v).sum::<f64>() / (self.support_radius * self.support_radius);
                if r2 < 1.0 {
                    (1.0 - r2).powi(4)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn vector_potential(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let s = self.strength() * self.envelope(t) * self.spatial(x);
        self.direction.iter().map(|w| s * w).collect()
    }

    /// `E(t,x) = -∂_t A(t,x)`.
    pub fn electric_field(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let s = -self.strength() * self.envelope_derivative(t) * self.spatial(x);
        self.direction.iter().map(|w| s * w).collect()
    }

    /// `∫_0^1 g(αy + (1-α)x) dα · (w·(y-x))` for nearest neighbours `x, y`.
    pub fn bond_geometry(&self, x: &[i64], y: &[i64]) -> Result<f64> {
        let (k, step) = nearest_neighbour_axis(x, y)?;
        let wk = self.direction.get(k).copied().unwrap_or(0.0) * step as f64;
        if wk == 0.0 {
            return Ok(0.0);
        }
        let integral = match self.mode {
            FieldMode::Homogeneous => {
                let base: Vec<f64> = x.iter().zip(y).map(|(a, b)| *a.min(b) as f64).collect();
                self.spatial(&base)
            }
            FieldMode::General => self.ball_segment_integral(x, k, step),
        };
        Ok(integral * wk)
    }

    fn ball_segment_integral(&self, x: &[i64], k: usize, step: i64) -> f64 {
        let r = self.support_radius;
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let xe = xf[k] * step as f64;
        let x2: f64 = xf.iter().map(|v| v * v).sum();
        let disc = xe * xe - x2 + r * r;
        if disc <= 0.0 {
            return 0.0;
        }
        let a = (-xe - disc.sqrt()).max(0.0);
        let b = (-xe + disc.sqrt()).min(1.0);
        if b <= a {
            return 0.0;
        }
        let (nodes, weights) = gauss_legendre(8);
        let mut p = xf.clone();
        nodes
            .iter()
            .zip(&weights)
            .map(|(&s, &w)| {
                let alpha = a + 0.5 * (b - a) * (s + 1.0);
                p[k] = xf[k] + alpha * step as f64;
                0.5 * (b - a) * w * self.spatial(&p)
            })
            .sum()
    }

    /// `φ_{xy}(t) = ∫_0^1 A(t, αy + (1-α)x)·(y-x) dα`.
    pub fn line_integral(&self, t: f64, x: &[i64], y: &[i64]) -> Result<f64> {
        Ok(self.strength() * self.envelope(t) * self.bond_geometry(x, y)?)
    }

    /// Integrated electric field along the oriented bond `x → y`.
    pub fn bond_tension(&self, t: f64, x: &[i64], y: &[i64]) -> Result<f64> {
        Ok(-self.strength() * self.envelope_derivative(t) * self.bond_geometry(x, y)?)
    }

    pub fn peierls_phase(&self, t: f64, x: &[i64], y: &[i64]) -> Result<C64> {
        Ok(C64::from_polar(1.0, self.line_integral(t, x, y)?))
    }

    pub fn field_sample(&self, t: f64, lattice: &BoxSpec) -> Result<FieldSample> {
        let tensions = lattice
            .bonds()
            .into_iter()
            .map(|(i, j)| Ok((i, j, self.bond_tension(t, lattice.site(i), lattice.site(j))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldSample { t, tensions })
    }

    /// Every lattice bond with a non-zero field factor must lie inside the box.
    pub fn check_fits(&self, lattice: &BoxSpec) -> Result<()> {
        if self.dim() != lattice.dim() {
            return Err(Error::Validation(format!(
                "pulse direction has dimension {}, box has {}",
                self.dim(),
                lattice.dim()
            )));
        }
        let reach = self.support_radius.ceil() as i64 + 1;
        let candidates = BoxSpec::cuboid(vec![-reach; lattice.dim()], vec![reach; lattice.dim()])?;
        for x in candidates.sites() {
            for k in 0..lattice.dim() {
                let mut y = x.clone();
                y[k] += 1;
                if self.bond_geometry(x, &y)? != 0.0 && !(lattice.contains(x) && lattice.contains(&y)) {
                    return Err(Error::Validation(format!(
                        "pulse support (radius {}) reaches bond {:?}-{:?} outside the box {}",
                        self.support_radius,
                        x,
                        y,
                        lattice.describe()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn nearest_neighbour_axis(x: &[i64], y: &[i64]) -> Result<(usize, i64)> {
    let diffs: Vec<(usize, i64)> =
        x.iter().zip(y).enumerate().filter(|(_, (a, b))| a != b).map(|(k, (a, b))| (k, b - a)).collect();
    match diffs.as_slice() {
        [(k, s)] if s.abs() == 1 => Ok((*k, *s)),
        _ => Err(Error::Domain(format!("{x:?} and {y:?} are not nearest neighbours"))),
    }
}
