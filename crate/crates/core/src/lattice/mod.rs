//! Finite boxes in ℤ^d, disorder realizations, decay functions and
//! interaction norms.

mod decay;
mod disorder;
mod interaction;

pub use decay::{decay_constants, DecayConstants, DecayFunction};
pub use disorder::{
    one_particle_hopping, sample_disorder, BondEntry, DisorderDocument, DisorderMode,
    DisorderRealization,
};
pub use interaction::{interaction_norm, InteractionKind, InteractionSpec, Ladder, LocalTerm, Monomial};

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::HashMap;

pub type Site = Vec<i64>;

/// Largest number of sites a box may hold.
pub const DEFAULT_SITE_CAP: usize = 1 << 16;

/// A rectangular box `lo ≤ x ≤ hi` (componentwise) with lexicographic site order.
///
/// Symmetric boxes `{|x_j| ≤ L}` come from [`enumerate_box`]; chains with an
/// even number of sites need the general form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxSpec {
    dim: usize,
    lo: Vec<i64>,
    hi: Vec<i64>,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

pub fn enumerate_box(d: usize, l: u32) -> Result<BoxSpec> {
    enumerate_box_capped(d, l, DEFAULT_SITE_CAP)
}

pub fn enumerate_box_capped(d: usize, l: u32, cap: usize) -> Result<BoxSpec> {
    if d == 0 || l == 0 {
        return Err(Error::Domain(format!("box needs d ≥ 1 and L ≥ 1, got (d={d}, L={l})")));
    }
    let side = 2 * l as usize + 1;
    let count = (side as f64).powi(d as i32);
    if count > cap as f64 {
        return Err(Error::Size(format!("box (d={d}, L={l}) has {count} sites, cap is {cap}")));
    }
    BoxSpec::cuboid(vec![-(l as i64); d], vec![l as i64; d])
}

impl BoxSpec {
    pub fn cuboid(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Domain("box corners must have equal positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::Domain(format!("empty box lo={lo:?} hi={hi:?}")));
        }
        let count: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as f64).product();
        if count > DEFAULT_SITE_CAP as f64 {
            return Err(Error::Size(format!("box lo={lo:?} hi={hi:?} has {count} sites")));
        }
        let dim = lo.len();
        let mut sites = Vec::with_capacity(count as usize);
        let mut cur = lo.clone();
        loop {
            sites.push(cur.clone());
            let mut k = dim;
            loop {
                if k == 0 {
                    let index = sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
                    return Ok(Self { dim, lo, hi, sites, index });
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
            }
        }
    }

    /// A chain of `n` sites spanning `-⌊(n-1)/2⌋ ..= ⌈(n-1)/2⌉`.
    pub fn chain(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("chain needs at least one site".into()));
        }
        let lo = -(((n - 1) / 2) as i64);
        Self::cuboid(vec![lo], vec![lo + n as i64 - 1])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    /// The radius `L` when the box is `{|x_j| ≤ L}`.
    pub fn radius(&self) -> Option<u32> {
        let l = self.hi[0];
        let symmetric = l > 0 && self.lo.iter().all(|&a| a == -l) && self.hi.iter().all(|&b| b == l);
        symmetric.then_some(l as u32)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim && x.iter().enumerate().all(|(k, &v)| self.lo[k] <= v && v <= self.hi[k])
    }

    /// Unordered nearest-neighbour bonds as `(i, j)` with `i < j`, lexicographic.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, x) in self.sites.iter().enumerate() {
            for k in 0..self.dim {
                let mut y = x.clone();
                y[k] += 1;
                if let Some(j) = self.index_of(&y) {
                    out.push((i, j));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Index of site `x + e_k` if inside the box.
    pub fn shifted(&self, i: usize, k: usize, step: i64) -> Option<usize> {
        let mut y = self.sites[i].clone();
        y[k] += step;
        self.index_of(&y)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclid(&self.sites[i], &self.sites[j])
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| ((b - a) as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Stable fingerprint used to tag Fock bases and checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for v in self.lo.iter().chain(&self.hi) {
            h.update(v.to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Sites of `Λ_l = {x : |x_j| ≤ l}` in lexicographic order (may leave the box).
    pub fn cube_sites(dim: usize, l: f64) -> Vec<Site> {
        let r = l.floor() as i64;
        let lo = vec![-r; dim];
        let hi = vec![r; dim];
        if r < 0 {
            return Vec::new();
        }
        Self::cuboid(lo, hi).map(|b| b.sites).unwrap_or_default()
    }

    pub fn describe(&self) -> String {
        match self.radius() {
            Some(l) => format!("d={} L={}", self.dim, l),
            None => format!("d={} lo={:?} hi={:?}", self.dim, self.lo, self.hi),
        }
    }
}

pub fn euclid(x: &[i64], y: &[i64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_counts() {
        assert_eq!(enumerate_box(1, 2).unwrap().len(), 5);
        let b = enumerate_box(2, 1).unwrap();
        assert_eq!(b.len(), 9);
        assert!(b.index_of(&[0, 0]).is_some());
        assert_eq!(enumerate_box(3, 2).unwrap().len(), 125);
    }

    #[test]
    fn cap_names_offending_box() {
        let err = enumerate_box_capped(3, 3, 100).unwrap_err().to_string();
        assert!(err.contains("d=3") && err.contains("L=3"), "{err}");
    }

    #[test]
    fn lexicographic_order() {
        let b = enumerate_box(2, 1).unwrap();
        assert_eq!(b.site(0), &vec![-1, -1]);
        assert_eq!(b.site(1), &vec![-1, 0]);
        assert_eq!(b.site(8), &vec![1, 1]);
    }

    #[test]
    fn chains() {
        let b = BoxSpec::chain(6).unwrap();
        assert_eq!(b.lo(), &[-2]);
        assert_eq!(b.hi(), &[3]);
        assert_eq!(b.radius(), None);
        assert_eq!(BoxSpec::chain(5).unwrap().radius(), Some(2));
        assert_eq!(b.bonds().len(), 5);
    }

    #[test]
    fn bonds_of_square() {
        let b = enumerate_box(2, 1).unwrap();
        let bonds = b.bonds();
        assert_eq!(bonds.len(), 12);
        assert!(bonds.iter().all(|&(i, j)| i < j && (b.distance(i, j) - 1.0).abs() < 1e-15));
    }
}
