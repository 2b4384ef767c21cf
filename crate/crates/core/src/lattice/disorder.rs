use super::{BoxSpec, Site};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// One disorder sample: site potentials `ω₁` in [-1, 1] and bond hoppings `ω₂`
/// in the closed unit disc, indexed like `BoxSpec::sites` and `BoxSpec::bonds`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    pub seed: u64,
    pub lattice: BoxSpec,
    pub omega1: Vec<f64>,
    pub omega2: Vec<C64>,
    bonds: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisorderMode {
    Uniform,
    Zero,
    Table(DisorderDocument),
}

/// JSON form of a realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderDocument {
    pub seed: u64,
    pub d: usize,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<i64>>,
    pub omega1: Vec<f64>,
    pub omega2: Vec<BondEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondEntry {
    pub bond: [Site; 2],
    pub re: f64,
    pub im: f64,
}

fn unit_interval(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn symmetric_unit(rng: &mut ChaCha20Rng) -> f64 {
    2.0 * unit_interval(rng) - 1.0
}

/// Stream layout: one ChaCha20 stream keyed by `seed`; each site draws one
/// `u64` for `ω₁`, then each bond draws `(re, im)` pairs until the pair
/// falls in the unit disc.
pub fn sample_disorder(seed: u64, lattice: &BoxSpec, mode: &DisorderMode) -> Result<DisorderRealization> {
    let bonds = lattice.bonds();
    match mode {
        DisorderMode::Zero => Ok(DisorderRealization {
            seed,
            lattice: lattice.clone(),
            omega1: vec![0.0; lattice.len()],
            omega2: vec![C64::new(0.0, 0.0); bonds.len()],
            bonds,
        }),
        DisorderMode::Uniform => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let omega1 = (0..lattice.len()).map(|_| symmetric_unit(&mut rng)).collect();
            let omega2 = bonds
                .iter()
                .map(|_| loop {
                    let re = symmetric_unit(&mut rng);
                    let im = symmetric_unit(&mut rng);
                    if re * re + im * im <= 1.0 {
                        break C64::new(re, im);
                    }
                })
                .collect();
            Ok(DisorderRealization { seed, lattice: lattice.clone(), omega1, omega2, bonds })
        }
        DisorderMode::Table(doc) => {
            let r = DisorderRealization::from_document(doc)?;
            if r.lattice != *lattice {
                return Err(Error::Validation(format!(
                    "disorder table is for box {}, expected {}",
                    r.lattice.describe(),
                    lattice.describe()
                )));
            }
            Ok(r)
        }
    }
}

impl DisorderRealization {
    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    pub fn bond_value(&self, i: usize, j: usize) -> Option<C64> {
        let key = (i.min(j), i.max(j));
        self.bonds.binary_search(&key).ok().map(|k| self.omega2[k])
    }

    pub fn to_document(&self) -> DisorderDocument {
        let l = self.lattice.radius();
        DisorderDocument {
            seed: self.seed,
            d: self.lattice.dim(),
            l,
            lo: l.is_none().then(|| self.lattice.lo().to_vec()),
            hi: l.is_none().then(|| self.lattice.hi().to_vec()),
            omega1: self.omega1.clone(),
            omega2: self
                .bonds
                .iter()
                .zip(&self.omega2)
                .map(|(&(i, j), z)| BondEntry {
                    bond: [self.lattice.site(i).clone(), self.lattice.site(j).clone()],
                    re: z.re,
                    im: z.im,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &DisorderDocument) -> Result<Self> {
        let lattice = match (doc.l, &doc.lo, &doc.hi) {
            (Some(l), None, None) => super::enumerate_box(doc.d, l)?,
            (None, Some(lo), Some(hi)) => BoxSpec::cuboid(lo.clone(), hi.clone())?,
            _ => return Err(Error::Validation("disorder document needs either L or both lo and hi".into())),
        };
        if lattice.dim() != doc.d {
            return Err(Error::Validation(format!("d={} disagrees with box corners", doc.d)));
        }
        if doc.omega1.len() != lattice.len() {
            return Err(Error::Validation(format!(
                "omega1 has {} entries, box has {} sites",
                doc.omega1.len(),
                lattice.len()
            )));
        }
        if let Some(v) = doc.omega1.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::Validation(format!("omega1 value {v} outside [-1, 1]")));
        }
        let bonds = lattice.bonds();
        let mut omega2 = vec![None; bonds.len()];
        for entry in &doc.omega2 {
            let (a, b) = match (lattice.index_of(&entry.bond[0]), lattice.index_of(&entry.bond[1])) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Validation(format!("bond {:?} leaves the box", entry.bond))),
            };
            let k = bonds
                .binary_search(&(a.min(b), a.max(b)))
                .map_err(|_| Error::Validation(format!("{:?} is not a nearest-neighbour bond", entry.bond)))?;
            let z = C64::new(entry.re, entry.im);
            if !(z.norm() <= 1.0) {
                return Err(Error::Validation(format!("omega2 value {z} outside the unit disc")));
            }
            if omega2[k].replace(z).is_some() {
                return Err(Error::Validation(format!("bond {:?} listed twice", entry.bond)));
            }
        }
        let omega2 = omega2
            .into_iter()
            .zip(&bonds)
            .map(|(z, &(i, j))| {
                z.ok_or_else(|| {
                    Error::Validation(format!("missing bond {:?}-{:?}", lattice.site(i), lattice.site(j)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { seed: doc.seed, lattice, omega1: doc.omega1.clone(), omega2, bonds })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DisorderDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// `Δ_{ω,ϑ}` restricted to the box with open boundaries.
pub fn one_particle_hopping(omega: &DisorderRealization, theta: f64, lattice: &BoxSpec) -> Result<CMatrix> {
    if !(theta >= 0.0) {
        return Err(Error::Domain(format!("hopping disorder strength ϑ={theta} must be non-negative")));
    }
    if omega.lattice != *lattice {
        return Err(Error::Validation("disorder realization belongs to a different box".into()));
    }
    let n = lattice.len();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(2.0 * lattice.dim() as f64, 0.0);
    }
    for (&(i, j), z) in omega.bonds.iter().zip(&omega.omega2) {
        let hop = -(C64::new(1.0, 0.0) + theta * z);
        m[(i, j)] = hop;
        m[(j, i)] = hop.conj();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::enumerate_box;
    use crate::linalg::max_abs;

    #[test]
    fn zero_mode() {
        let b = enumerate_box(2, 1).unwrap();
        let r = sample_disorder(7, &b, &DisorderMode::Zero).unwrap();
        assert!(r.omega1.iter().all(|&v| v == 0.0));
        assert!(r.omega2.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let b = enumerate_box(1, 3).unwrap();
        let a = sample_disorder(7, &b, &DisorderMode::Uniform).unwrap();
        let a2 = sample_disorder(7, &b, &DisorderMode::Uniform).unwrap();
        let c = sample_disorder(8, &b, &DisorderMode::Uniform).unwrap();
        assert_eq!(a, a2);
        assert!(a.omega1.iter().zip(&c.omega1).any(|(x, y)| x != y));
        assert!(a.omega1.iter().all(|v| v.abs() <= 1.0));
        assert!(a.omega2.iter().all(|z| z.norm() <= 1.0));
    }

    #[test]
    fn hopping_entries() {
        let b = enumerate_box(1, 1).unwrap();
        let r = sample_disorder(0, &b, &DisorderMode::Zero).unwrap();
        let m = one_particle_hopping(&r, 0.0, &b).unwrap();
        assert_eq!(m[(0, 0)], C64::new(2.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(-1.0, 0.0));
        assert_eq!(m[(0, 2)], C64::new(0.0, 0.0));

        let mut r = r;
        r.omega2[0] = C64::new(0.0, 1.0);
        let m = one_particle_hopping(&r, 1.0, &b).unwrap();
        assert_eq!(m[(0, 1)], C64::new(-1.0, -1.0));
        assert_eq!(m[(1, 0)], C64::new(-1.0, 1.0));
        assert!(one_particle_hopping(&r, -0.1, &b).is_err());
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let b = BoxSpec::chain(6).unwrap();
        let r = sample_disorder(11, &b, &DisorderMode::Uniform).unwrap();
        let back = DisorderRealization::from_json(&r.to_json()).unwrap();
        assert_eq!(r, back);
        let sq = enumerate_box(2, 1).unwrap();
        let r = sample_disorder(3, &sq, &DisorderMode::Uniform).unwrap();
        assert_eq!(DisorderRealization::from_json(&r.to_json()).unwrap(), r);
        let m = one_particle_hopping(&r, 0.7, &sq).unwrap();
        assert!(max_abs(&(&m - m.adjoint())) == 0.0);
    }

    #[test]
    fn table_missing_bond_is_rejected() {
        let b = BoxSpec::chain(3).unwrap();
        let r = sample_disorder(1, &b, &DisorderMode::Uniform).unwrap();
        let mut doc = r.to_document();
        doc.omega2.pop();
        let err = sample_disorder(1, &b, &DisorderMode::Table(doc)).unwrap_err();
        assert!(err.to_string().contains("missing bond"));
    }
}
