use super::BoxSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Decay function `F(r) = scale · e^{-rate·r} (1+r)^{-(dim+epsilon)}`, or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecayFunction {
    Polynomial { dim: usize, epsilon: f64, rate: f64, scale: f64 },
    Constant { value: f64 },
}

impl DecayFunction {
    pub fn polynomial(dim: usize, epsilon: f64) -> Self {
        Self::Polynomial { dim, epsilon, rate: 0.0, scale: 1.0 }
    }

    pub fn with_rate(self, rate: f64) -> Self {
        match self {
            Self::Polynomial { dim, epsilon, scale, .. } => Self::Polynomial { dim, epsilon, rate, scale },
            other => other,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Self::Polynomial { dim, epsilon, rate, scale } => {
                scale * (-rate * r).exp() * (1.0 + r).powf(-(dim as f64 + epsilon))
            }
            Self::Constant { value } => value,
        }
    }

    /// `2^{d+1+ε}`, the convolution factor of the pure polynomial family.
    pub fn polynomial_convolution_factor(&self) -> Option<f64> {
        match *self {
            Self::Polynomial { dim, epsilon, .. } => Some(2f64.powf(dim as f64 + 1.0 + epsilon)),
            Self::Constant { .. } => None,
        }
    }
}

/// Finite-box surrogates of `‖F‖_1` and of the convolution constant `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayConstants {
    pub norm1: f64,
    pub convolution: f64,
}

pub fn decay_constants(f: &DecayFunction, lattice: &BoxSpec) -> Result<DecayConstants> {
    let n = lattice.len();
    let mut table = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = f.eval(lattice.distance(i, j));
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "decay function value {v} at r={} is not positive",
                    lattice.distance(i, j)
                )));
            }
            table[i * n + j] = v;
        }
    }
    // sup over the centre site y of Σ_x F(|x-y|); for {|x_j| ≤ L} this is Σ_x F(|x|).
    let norm1 = (0..n).map(|y| (0..n).map(|x| table[x * n + y]).sum::<f64>()).fold(0.0, f64::max);
    let mut convolution: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let s: f64 = (0..n).map(|z| table[x * n + z] * table[z * n + y]).sum();
            convolution = convolution.max(s / table[x * n + y]);
        }
    }
    Ok(DecayConstants { norm1, convolution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::enumerate_box;

    #[test]
    fn constant_on_single_site() {
        let b = BoxSpec::chain(1).unwrap();
        let c = decay_constants(&DecayFunction::Constant { value: 1.0 }, &b).unwrap();
        assert_eq!(c.norm1, 1.0);
        assert_eq!(c.convolution, 1.0);
    }

    #[test]
    fn brute_force_exp_polynomial() {
        let b = enumerate_box(1, 4).unwrap();
        let f = DecayFunction::polynomial(1, 1.0).with_rate(1.0);
        let c = decay_constants(&f, &b).unwrap();
        let g = |r: f64| (-r).exp() * (1.0 + r).powi(-2);
        let norm1: f64 = (-4..=4).map(|x: i64| g(x.abs() as f64)).sum();
        let mut conv: f64 = 0.0;
        for x in -4i64..=4 {
            for y in -4i64..=4 {
                let s: f64 = (-4i64..=4).map(|z| g((x - z).abs() as f64) * g((z - y).abs() as f64)).sum();
                conv = conv.max(s / g((x - y).abs() as f64));
            }
        }
        assert!((c.norm1 - norm1).abs() < 1e-14);
        assert!((c.convolution - conv).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive() {
        let b = BoxSpec::chain(2).unwrap();
        assert!(decay_constants(&DecayFunction::Constant { value: 0.0 }, &b).is_err());
    }
}
