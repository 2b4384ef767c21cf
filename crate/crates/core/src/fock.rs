//! The CAR algebra of a finite box on the occupation-number basis.
//!
//! Site `i` (lexicographic box index) is bit `i` of a basis state. Ladder
//! operators carry the Jordan–Wigner string over sites `j < i`.

use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, Ladder, Monomial};
use crate::linalg::{c, max_abs, CMatrix, C64};
use std::ops::{Add, Mul, Neg, Sub};

/// Sites up to which operators are stored densely unless configured otherwise.
pub const DEFAULT_DENSE_LIMIT: usize = 12;
/// Hard limit for any Fock basis (sparse storage included).
pub const MAX_SITES: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    dense_limit: usize,
    tag: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Neither,
}

/// Dense many-body operator tagged with the basis it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    tag: u64,
    mat: CMatrix,
}

/// Coordinate-format operator for boxes beyond the dense limit.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    tag: u64,
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

/// Action of a ladder operator on a basis state: `(new state, sign)` or `None` if it vanishes.
#[inline]
pub fn apply_ladder(state: usize, op: Ladder) -> Option<(usize, f64)> {
    let bit = 1usize << op.site;
    if (state & bit != 0) == op.dagger {
        return None;
    }
    let sign = if (state & (bit - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((state ^ bit, sign))
}

/// Action of `ops[0] ⋯ ops[k-1]` (rightmost first).
pub fn apply_word(state: usize, ops: &[Ladder]) -> Option<(usize, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for &op in ops.iter().rev() {
        let (next, sg) = apply_ladder(s, op)?;
        s = next;
        sign *= sg;
    }
    Some((s, sign))
}

impl FockBasis {
    pub fn new(lattice: &BoxSpec) -> Result<Self> {
        Self::with_dense_limit(lattice, DEFAULT_DENSE_LIMIT)
    }

    pub fn with_dense_limit(lattice: &BoxSpec, dense_limit: usize) -> Result<Self> {
        let sites = lattice.len();
        if sites > MAX_SITES {
            return Err(Error::Size(format!("Fock space of {sites} sites exceeds the {MAX_SITES}-site limit")));
        }
        Ok(Self { sites, dense_limit, tag: lattice.fingerprint() })
    }

    /// A basis not tied to a box, for local factors.
    pub fn for_sites(sites: usize) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(Error::Size(format!("Fock space of {sites} sites exceeds the {MAX_SITES}-site limit")));
        }
        Ok(Self { sites, dense_limit: DEFAULT_DENSE_LIMIT, tag: (1u64 << 63) | sites as u64 })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn is_dense(&self) -> bool {
        self.sites <= self.dense_limit
    }

    fn check_site(&self, x: usize) -> Result<()> {
        if x >= self.sites {
            return Err(Error::Index(format!("site index {x} outside a {}-site basis", self.sites)));
        }
        Ok(())
    }

    fn check_dense(&self) -> Result<()> {
        if !self.is_dense() {
            return Err(Error::Size(format!(
                "{} sites exceed the dense limit {}; use sparse builders",
                self.sites, self.dense_limit
            )));
        }
        Ok(())
    }

    pub fn wrap(&self, mat: CMatrix) -> Operator {
        assert_eq!(mat.nrows(), self.dim(), "matrix size does not match the basis");
        Operator { tag: self.tag, mat }
    }

    pub fn identity(&self) -> Operator {
        self.wrap(CMatrix::identity(self.dim(), self.dim()))
    }

    pub fn zero(&self) -> Operator {
        self.wrap(CMatrix::zeros(self.dim(), self.dim()))
    }

    pub fn annihilation(&self, x: usize) -> Result<Operator> {
        self.check_site(x)?;
        self.check_dense()?;
        Ok(self.polynomial(&[Monomial::new(c(1.0), vec![Ladder::annihilate(x)])]))
    }

    pub fn creation(&self, x: usize) -> Result<Operator> {
        self.check_site(x)?;
        self.check_dense()?;
        Ok(self.polynomial(&[Monomial::new(c(1.0), vec![Ladder::create(x)])]))
    }

    pub fn number(&self, x: usize) -> Result<Operator> {
        self.check_site(x)?;
        self.check_dense()?;
        let n = self.dim();
        Ok(self.wrap(CMatrix::from_fn(n, n, |i, j| {
            if i == j && (i >> x) & 1 == 1 {
                c(1.0)
            } else {
                c(0.0)
            }
        })))
    }

    /// Occupation count of each basis state.
    pub fn particle_numbers(&self) -> Vec<u32> {
        (0..self.dim()).map(|s| (s as u64).count_ones()).collect()
    }

    pub fn total_number(&self) -> Operator {
        let n = self.dim();
        self.wrap(CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.particle_numbers().into_iter().map(|k| c(k as f64)),
        )))
    }

    /// Dense matrix of a polynomial in ladder operators.
    pub fn polynomial(&self, monomials: &[Monomial]) -> Operator {
        let n = self.dim();
        let mut mat = CMatrix::zeros(n, n);
        for col in 0..n {
            for m in monomials {
                if let Some((row, sign)) = apply_word(col, &m.ops) {
                    mat[(row, col)] += m.coeff * sign;
                }
            }
        }
        self.wrap(mat)
    }

    /// `Σ_{x,y} h_{xy} a_x† a_y`.
    pub fn bilinear(&self, h: &CMatrix) -> Result<Operator> {
        self.check_dense()?;
        if h.nrows() != self.sites || h.ncols() != self.sites {
            return Err(Error::Validation(format!(
                "one-particle matrix is {}x{}, basis has {} sites",
                h.nrows(),
                h.ncols(),
                self.sites
            )));
        }
        let n = self.dim();
        let mut mat = CMatrix::zeros(n, n);
        let pairs: Vec<(usize, usize, C64)> = (0..self.sites)
            .flat_map(|x| (0..self.sites).map(move |y| (x, y)))
            .filter_map(|(x, y)| {
                let v = h[(x, y)];
                (v != c(0.0)).then_some((x, y, v))
            })
            .collect();
        for col in 0..n {
            for &(x, y, v) in &pairs {
                if let Some((row, sign)) = apply_word(col, &[Ladder::create(x), Ladder::annihilate(y)]) {
                    mat[(row, col)] += v * sign;
                }
            }
        }
        Ok(self.wrap(mat))
    }

    pub fn sparse_polynomial(&self, monomials: &[Monomial]) -> SparseOperator {
        let mut entries = Vec::new();
        for col in 0..self.dim() {
            for m in monomials {
                if let Some((row, sign)) = apply_word(col, &m.ops) {
                    entries.push((row, col, m.coeff * sign));
                }
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, col, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == col => last.2 += v,
                _ => merged.push((r, col, v)),
            }
        }
        SparseOperator { tag: self.tag, dim: self.dim(), entries: merged }
    }

    /// `σ_θ(B) = e^{iθN} B e^{-iθN}`, so that `σ_θ(a_x) = e^{-iθ} a_x`.
    pub fn gauge_transform(&self, theta: f64, b: &Operator) -> Operator {
        self.assert_member(b);
        let nums = self.particle_numbers();
        let mut mat = b.mat.clone();
        for ((i, j), z) in mat.iter_mut().enumerate().map(|(k, z)| ((k % self.dim(), k / self.dim()), z)) {
            let dn = nums[i] as i64 - nums[j] as i64;
            if dn != 0 {
                *z *= C64::from_polar(1.0, theta * dn as f64);
            }
        }
        self.wrap(mat)
    }

    pub fn parity_class(&self, b: &Operator, tol: f64) -> Parity {
        let flipped = self.gauge_transform(std::f64::consts::PI, b);
        if max_abs(&(&flipped.mat - &b.mat)) <= tol {
            Parity::Even
        } else if max_abs(&(&flipped.mat + &b.mat)) <= tol {
            Parity::Odd
        } else {
            Parity::Neither
        }
    }

    pub fn assert_member(&self, b: &Operator) {
        assert_eq!(b.tag, self.tag, "operator belongs to a different Fock basis");
    }
}

impl Operator {
    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn with_matrix(&self, mat: CMatrix) -> Operator {
        assert_eq!(mat.shape(), self.mat.shape());
        Operator { tag: self.tag, mat }
    }

    pub fn adjoint(&self) -> Operator {
        Operator { tag: self.tag, mat: self.mat.adjoint() }
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        &(self * other) - &(other * self)
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        &(self * other) + &(other * self)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        crate::linalg::hermiticity_defect(&self.mat)
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::spectral_norm(&self.mat)
    }

    pub fn scale(&self, z: C64) -> Operator {
        Operator { tag: self.tag, mat: &self.mat * z }
    }
}

fn same_basis(a: &Operator, b: &Operator) {
    assert_eq!(a.tag, b.tag, "operators from different Fock bases combined");
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        same_basis(self, rhs);
        Operator { tag: self.tag, mat: &self.mat + &rhs.mat }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        same_basis(self, rhs);
        Operator { tag: self.tag, mat: &self.mat - &rhs.mat }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        same_basis(self, rhs);
        Operator { tag: self.tag, mat: &self.mat * &rhs.mat }
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        Operator { tag: self.tag, mat: &self.mat * c(rhs) }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { tag: self.tag, mat: -&self.mat }
    }
}

impl SparseOperator {
    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![c(0.0); self.dim];
        for &(r, col, z) in &self.entries {
            out[r] += z * v[col];
        }
        out
    }

    pub fn to_dense(&self) -> Operator {
        let mut mat = CMatrix::zeros(self.dim, self.dim);
        for &(r, col, z) in &self.entries {
            mat[(r, col)] += z;
        }
        Operator { tag: self.tag, mat }
    }
}
