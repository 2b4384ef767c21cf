use super::{BoxSpec, DecayFunction};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{spectral_norm, C64};
use std::collections::BTreeMap;

/// A creation (`dagger`) or annihilation operator at a box site index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ladder {
    pub site: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(site: usize) -> Self {
        Self { site, dagger: true }
    }

    pub fn annihilate(site: usize) -> Self {
        Self { site, dagger: false }
    }
}

/// `coeff · ops[0] ops[1] ⋯`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: C64,
    pub ops: Vec<Ladder>,
}

impl Monomial {
    pub fn new(coeff: C64, ops: Vec<Ladder>) -> Self {
        Self { coeff, ops }
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.iter().map(|l| l.site)
    }
}

/// One local term `Φ_Λ` as a polynomial in ladder operators.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub support: Vec<usize>,
    pub monomials: Vec<Monomial>,
}

impl LocalTerm {
    pub fn new(monomials: Vec<Monomial>) -> Self {
        let mut support: Vec<usize> = monomials.iter().flat_map(|m| m.sites()).collect();
        support.sort_unstable();
        support.dedup();
        Self { support, monomials }
    }

    /// Spectral norm computed on the Fock space of the support alone.
    pub fn local_norm(&self) -> f64 {
        let relabel = |s: usize| self.support.binary_search(&s).expect("site in support");
        let local: Vec<Monomial> = self
            .monomials
            .iter()
            .map(|m| Monomial {
                coeff: m.coeff,
                ops: m.ops.iter().map(|l| Ladder { site: relabel(l.site), dagger: l.dagger }).collect(),
            })
            .collect();
        let basis = FockBasis::for_sites(self.support.len()).expect("local support is small");
        spectral_norm(basis.polynomial(&local).matrix())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InteractionKind {
    None,
    /// Pair profile `v(r)` sampled at the distances that occur in the box.
    DensityDensity { profile: Vec<(f64, f64)> },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    pub kind: InteractionKind,
    pub terms: Vec<LocalTerm>,
}

impl InteractionSpec {
    pub fn none() -> Self {
        Self { kind: InteractionKind::None, terms: Vec::new() }
    }

    pub fn custom(terms: Vec<LocalTerm>) -> Self {
        Self { kind: InteractionKind::Custom, terms }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| LocalTerm {
                support: t.support.clone(),
                monomials: t
                    .monomials
                    .iter()
                    .map(|m| Monomial { coeff: m.coeff * factor, ops: m.ops.clone() })
                    .collect(),
            })
            .collect();
        Self { kind: self.kind.clone(), terms }
    }

    pub fn check_support(&self, lattice: &BoxSpec) -> Result<()> {
        for t in &self.terms {
            if t.support.is_empty() {
                return Err(Error::Validation("interaction term with empty support".into()));
            }
            if let Some(&s) = t.support.iter().find(|&&s| s >= lattice.len()) {
                return Err(Error::Validation(format!("interaction term touches site index {s} outside the box")));
            }
        }
        Ok(())
    }

    /// Terms merged by support, so that each `Φ_Λ` appears once.
    pub fn merged(&self) -> BTreeMap<Vec<usize>, LocalTerm> {
        let mut out: BTreeMap<Vec<usize>, LocalTerm> = BTreeMap::new();
        for t in &self.terms {
            out.entry(t.support.clone())
                .and_modify(|acc| acc.monomials.extend(t.monomials.iter().cloned()))
                .or_insert_with(|| t.clone());
        }
        out
    }
}

/// `sup_{x,y} Σ_{Λ ∋ x,y} ‖Φ_Λ‖ / F(|x-y|)` over the box.
pub fn interaction_norm(psi: &InteractionSpec, f: &DecayFunction, lattice: &BoxSpec) -> Result<f64> {
    psi.check_support(lattice)?;
    let norms: Vec<(Vec<usize>, f64)> =
        psi.merged().into_iter().map(|(s, t)| (s, t.local_norm())).collect();
    let n = lattice.len();
    let mut sup: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let total: f64 = norms
                .iter()
                .filter(|(s, _)| s.binary_search(&x).is_ok() && s.binary_search(&y).is_ok())
                .map(|(_, v)| v)
                .sum();
            if total > 0.0 {
                sup = sup.max(total / f.eval(lattice.distance(x, y)));
            }
        }
    }
    Ok(sup)
}
