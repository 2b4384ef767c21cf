//! Numerical certification of the Lieb–Robinson bound and of the
//! equicontinuity estimate for the paramagnetic transport coefficient.

use crate::error::{Error, Result};
use crate::fock::{Operator, Parity};
use crate::lattice::{
    decay_constants, interaction_norm, one_particle_hopping, sample_disorder, DecayConstants, DecayFunction,
    DisorderMode, DisorderRealization, InteractionSpec, Ladder, LocalTerm, Monomial,
};
use crate::linalg::{c, spectral_norm, C64};
use crate::model::Model;
use crate::transport::Transport;
use serde::Serialize;

/// `Ψ^{(ω,ϑ)}` without the random potential: hopping pair terms (including the
/// on-site part of the lattice Laplacian) merged with the interaction.
pub fn hopping_interaction(
    disorder: &DisorderRealization,
    theta: f64,
    interaction: &InteractionSpec,
) -> Result<InteractionSpec> {
    let lattice = &disorder.lattice;
    let hop = one_particle_hopping(disorder, theta, lattice)?;
    let mut terms = interaction.terms.clone();
    for x in 0..lattice.len() {
        let diag = hop[(x, x)];
        if diag.norm() > 0.0 {
            terms.push(LocalTerm::new(vec![Monomial::new(diag, vec![Ladder::create(x), Ladder::annihilate(x)])]));
        }
    }
    for (x, y) in lattice.bonds() {
        let d = hop[(x, y)];
        terms.push(LocalTerm::new(vec![
            Monomial::new(d, vec![Ladder::create(x), Ladder::annihilate(y)]),
            Monomial::new(d.conj(), vec![Ladder::create(y), Ladder::annihilate(x)]),
        ]));
    }
    Ok(InteractionSpec::custom(terms))
}

/// Surrogate of `D_{ϑ₀} = sup_ω ‖Ψ^{(ω,ϑ₀)}‖_W`: the maximum over the sampled
/// seeds and the extremal realization `ω₂ ≡ 1` (which saturates `|Δ| = 1 + ϑ₀`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionBound {
    pub value: f64,
    pub theta0: f64,
    pub seeds: Vec<u64>,
    pub caveat: String,
}

pub fn interaction_bound(
    model: &Model,
    theta0: f64,
    f: &DecayFunction,
    seeds: &[u64],
) -> Result<InteractionBound> {
    let theta = model.params.theta;
    if theta > theta0 {
        return Err(Error::Precondition(format!("ϑ={theta} exceeds ϑ₀={theta0}")));
    }
    let lattice = model.lattice();
    let mut extremal = sample_disorder(0, lattice, &DisorderMode::Zero)?;
    extremal.omega2.iter_mut().for_each(|z| *z = c(1.0));
    let mut value: f64 = 0.0;
    let mut realizations = vec![extremal];
    for &s in seeds {
        realizations.push(sample_disorder(s, lattice, &DisorderMode::Uniform)?);
    }
    for omega in &realizations {
        let psi = hopping_interaction(omega, theta0, &model.params.interaction)?;
        value = value.max(interaction_norm(&psi, f, lattice)?);
    }
    Ok(InteractionBound {
        value,
        theta0,
        seeds: seeds.to_vec(),
        caveat: "supremum over ω replaced by the sampled ensemble plus the extremal hopping realization; \
                 box-restricted norm"
            .into(),
    })
}

/// An observable with its site support.
#[derive(Debug, Clone)]
pub struct LocalObservable {
    pub op: Operator,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrRow {
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrVerdict {
    pub rows: Vec<LrRow>,
    pub decay_sum: f64,
    pub constants: DecayConstants,
    pub interaction: f64,
    pub pass: bool,
}

impl LrVerdict {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,measured,bound,margin\n");
        for r in &self.rows {
            out += &format!("{:e},{:e},{:e},{:e}\n", r.t, r.measured, r.bound, r.margin);
        }
        out
    }
}

/// `‖[τ_t(B₁), B₂]‖` against `2D⁻¹‖B₁‖‖B₂‖(e^{2D|t|D_{ϑ₀}} - 1) Σ_{x,y} F(|x-y|)`.
pub fn lr_bound_check(
    model: &Model,
    b1: &LocalObservable,
    b2: &LocalObservable,
    times: &[f64],
    f: &DecayFunction,
    interaction: &InteractionBound,
) -> Result<LrVerdict> {
    if b1.support.iter().any(|x| b2.support.contains(x)) {
        return Err(Error::Precondition("observable supports overlap".into()));
    }
    if model.basis().parity_class(&b1.op, 1e-12) != Parity::Even {
        return Err(Error::Precondition("B₁ must be even".into()));
    }
    let lattice = model.lattice();
    let constants = decay_constants(f, lattice)?;
    let decay_sum: f64 =
        b1.support.iter().flat_map(|&x| b2.support.iter().map(move |&y| f.eval(lattice.distance(x, y)))).sum();
    let (n1, n2) = (spectral_norm(b1.op.matrix()), spectral_norm(b2.op.matrix()));
    let spectral = model.spectral();
    // The norm is unitarily invariant, so work in the eigenbasis of H throughout.
    let (e1, e2) = (spectral.to_eigenbasis(b1.op.matrix()), spectral.to_eigenbasis(b2.op.matrix()));
    let d = constants.convolution;
    let rows: Vec<LrRow> = times
        .iter()
        .map(|&t| {
            let evolved = spectral.modulate(&e1, |w| C64::from_polar(1.0, w * t));
            let measured = spectral_norm(&(&evolved * &e2 - &e2 * &evolved));
            let bound = 2.0 / d * n1 * n2 * (2.0 * d * t.abs() * interaction.value).exp_m1() * decay_sum;
            LrRow { t, measured, bound, margin: bound - measured }
        })
        .collect();
    // Disjoint supports commute exactly at t = 0; allow round-off there.
    let pass = rows.iter().all(|r| r.measured <= r.bound + 1e-12 * n1 * n2);
    Ok(LrVerdict { rows, decay_sum, constants, interaction: interaction.value, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquicontinuityVerdict {
    pub horizon: f64,
    pub max_quotient: f64,
    pub constant: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// `max ‖Ξ_p(t₁) - Ξ_p(t₂)‖_max / |t₁ - t₂|` over `points` grid times in `[-T, T]`
/// against `32(1+ϑ₀)²(D⁻¹‖F‖₁ e^{4DT D_{ϑ₀}} + 1)`.
pub fn equicontinuity_check(
    transport: &Transport<'_>,
    f: &DecayFunction,
    interaction: &InteractionBound,
    horizon: f64,
    points: usize,
) -> Result<EquicontinuityVerdict> {
    if !(horizon > 0.0) || points < 2 {
        return Err(Error::Domain("equicontinuity needs T > 0 and at least two grid points".into()));
    }
    let constants = decay_constants(f, transport.model().lattice())?;
    let grid: Vec<f64> = (0..points).map(|k| -horizon + 2.0 * horizon * k as f64 / (points - 1) as f64).collect();
    let xi: Vec<_> = grid.iter().map(|&t| transport.xi_p(t)).collect();
    let mut max_quotient: f64 = 0.0;
    for i in 0..points {
        for j in i + 1..points {
            let q = (&xi[i] - &xi[j]).abs().max() / (grid[j] - grid[i]);
            max_quotient = max_quotient.max(q);
        }
    }
    let d = constants.convolution;
    let theta0 = interaction.theta0;
    let constant = 32.0
        * (1.0 + theta0).powi(2)
        * (constants.norm1 / d * (4.0 * d * horizon * interaction.value).exp() + 1.0);
    Ok(EquicontinuityVerdict {
        horizon,
        max_quotient,
        constant,
        ratio: max_quotient / constant,
        pass: max_quotient <= constant,
    })
}

/// Largest absolute discrepancies between the many-body and one-particle pipelines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiFreeReport {
    pub sites: usize,
    pub beta: f64,
    pub seed: u64,
    pub twopoint: f64,
    pub sigma_p: f64,
    pub sigma_d: f64,
    pub xi_p: f64,
    pub pass: bool,
}

impl QuasiFreeReport {
    pub fn max_error(&self) -> f64 {
        self.twopoint.max(self.sigma_p).max(self.sigma_d).max(self.xi_p)
    }
}

/// Compares two-point functions, `σ_p`, `σ_d` and `Ξ_p` on `times` between the
/// Fock-space engine and the quasi-free reduction. Needs `Ψ = 0`.
pub fn quasifree_crosscheck(transport: &Transport<'_>, times: &[f64], tol: f64) -> Result<QuasiFreeReport> {
    let model = transport.model();
    if !model.is_quadratic() {
        return Err(Error::Precondition("quasi-free cross-check needs a vanishing interaction".into()));
    }
    let one = crate::equilibrium::quasifree_twopoint(model.one_particle(), model.params.beta)?;
    let lattice = model.lattice();
    let n = lattice.len();
    let state = transport.state();
    let mut twopoint: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let mut e = crate::linalg::CMatrix::zeros(n, n);
            e[(x, y)] = c(1.0);
            let many = state.expectation(model.basis().bilinear(&e)?.matrix());
            twopoint = twopoint.max((many - one.bilinear_expectation(&e)).norm());
        }
    }
    let d = lattice.dim();
    let bonds: Vec<Vec<(usize, usize)>> = (0..d).map(|k| transport.region().bonds(lattice, k)).collect();
    let all: Vec<(usize, usize)> = bonds.iter().flatten().copied().collect();
    let mut sigma_p: f64 = 0.0;
    let mut sigma_d: f64 = 0.0;
    for &bx in &all {
        let ix = model.current_matrix(bx.0, bx.1);
        let many = transport.sigma_d(bx)?;
        let single = one.bilinear_expectation(&model.kernel_matrix(bx.0, bx.1)).re;
        sigma_d = sigma_d.max((many - single).abs());
        for &by in &all {
            let iy = model.current_matrix(by.0, by.1);
            let kernel = transport.kernel(&ix, &iy)?;
            for &t in times {
                sigma_p = sigma_p.max((kernel.eval(t) - one.response(&ix, &iy, t)).abs());
            }
        }
    }
    let sums: Vec<crate::linalg::CMatrix> = bonds
        .iter()
        .map(|bs| {
            let mut m = crate::linalg::CMatrix::zeros(n, n);
            for &(a, b) in bs {
                m += model.current_matrix(a, b);
            }
            m
        })
        .collect();
    let vol = transport.region().volume() as f64;
    let mut xi_p: f64 = 0.0;
    for &t in times {
        let many = transport.xi_p(t);
        for k in 0..d {
            for q in 0..d {
                let single = one.response(&sums[k], &sums[q], t) / vol;
                xi_p = xi_p.max((many[(k, q)] - single).abs());
            }
        }
    }
    let mut report = QuasiFreeReport {
        sites: n,
        beta: model.params.beta,
        seed: model.params.disorder.seed,
        twopoint,
        sigma_p,
        sigma_d,
        xi_p,
        pass: false,
    };
    report.pass = report.max_error() <= tol;
    Ok(report)
}
