//! Experiment orchestration: each experiment turns a validated [`Config`]
//! into named artifacts (CSV, JSON, checkpoints) and a verdict.
//!
//! Independent cells run on a bounded rayon pool; results are collected in
//! cell order so artifacts do not depend on scheduling.

use crate::config::{Config, ExperimentKind};
use crate::equilibrium::Checkpoint;
use crate::error::{Error, Result};
use crate::lattice::DecayFunction;
use crate::model::Model;
use crate::thermo::energy_ledger_with_state;
use crate::transport::{joule_report, negativity_margin, ohm_scaling_report, symm_split, Transport};
use crate::verify::{equicontinuity_check, interaction_bound, lr_bound_check, quasifree_crosscheck, LocalObservable};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: impl Into<String>, body: String) -> Self {
        Self { name: name.into(), bytes: body.into_bytes() }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub kind: ExperimentKind,
    pub pass: bool,
    pub seed: u64,
    pub summary: Value,
    pub artifacts: Vec<Artifact>,
}

/// Runs the configured experiment on `workers` threads. `base` resolves
/// relative paths in the config.
pub fn run(config: &Config, base: Option<&Path>, workers: usize) -> Result<RunOutcome> {
    let diagnostics = config.validate(base);
    if !diagnostics.is_empty() {
        let list: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
        return Err(Error::Validation(list.join("; ")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(config, base))
}

fn dispatch(config: &Config, base: Option<&Path>) -> Result<RunOutcome> {
    let kind = config.experiment.kind;
    let seed = config.disorder.seed;
    let (pass, summary, artifacts) = match kind {
        ExperimentKind::OhmScan => ohm(config, base)?,
        ExperimentKind::JouleScan => joule(config, base)?,
        ExperimentKind::MeasureReconstruct => measure(config, base)?,
        ExperimentKind::LrCheck => lieb_robinson(config, base)?,
        ExperimentKind::Equicontinuity => equicontinuity(config, base)?,
        ExperimentKind::QuasifreeCrosscheck => quasifree(config, base)?,
        ExperimentKind::ThermoLedger => thermo(config, base)?,
    };
    Ok(RunOutcome { kind, pass, seed, summary, artifacts })
}

type Parts = (bool, Value, Vec<Artifact>);

fn reference_model(config: &Config, base: Option<&Path>) -> Result<Model> {
    let model = Model::build(config.model_params(config.disorder.seed, config.experiment.beta, base)?)?;
    model.spectral();
    Ok(model)
}

fn ohm(config: &Config, base: Option<&Path>) -> Result<Parts> {
    let model = reference_model(config, base)?;
    let pulse = config.pulse()?;
    let times = config.times();
    let e = &config.experiment;
    let cells: Vec<(f64, u32)> = e.l.iter().copied().zip(config.shells()).collect();
    let reports = cells
        .par_iter()
        .map(|&(l, shell)| {
            ohm_scaling_report(&model, l, shell, &pulse, &e.etas, &times, config.stepping(), config.rule())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut artifacts = Vec::new();
    let mut per_l = Vec::new();
    for r in &reports {
        artifacts.push(Artifact::text(format!("ohm_l{}_paramagnetic.csv", r.l), r.paramagnetic.to_csv(&r.etas)));
        artifacts.push(Artifact::text(format!("ohm_l{}_diamagnetic.csv", r.l), r.diamagnetic.to_csv(&r.etas)));
        per_l.push(json!({
            "l": r.l,
            "j_th": r.j_th,
            "paramagnetic_slope": r.paramagnetic.uniform.slope,
            "diamagnetic_slope": r.diamagnetic.uniform.slope,
            "paramagnetic_min_per_time_slope": r.paramagnetic.min_slope,
            "diamagnetic_min_per_time_slope": r.diamagnetic.min_slope,
            "pass": r.pass,
        }));
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok((pass, json!({ "threshold": 1.9, "regions": per_l }), artifacts))
}

fn joule(config: &Config, base: Option<&Path>) -> Result<Parts> {
    let model = reference_model(config, base)?;
    let pulse = config.pulse()?;
    let times = config.times();
    let e = &config.experiment;
    let reports = e
        .l
        .par_iter()
        .map(|&l| joule_report(&model, l, &pulse, &e.etas, &times, config.stepping(), config.rule()))
        .collect::<Result<Vec<_>>>()?;
    let mut artifacts = Vec::new();
    let mut per_l = Vec::new();
    for r in &reports {
        for item in r.items.iter().chain(std::iter::once(&r.dia_flipped)) {
            artifacts.push(Artifact::text(format!("joule_l{}_{}.csv", r.l, item.name), item.to_csv(&r.etas)));
        }
        let p = &r.prediction;
        let mut body = String::from("t,paramagnetic,cross,dia_linear,dia_quadratic\n");
        for k in 0..p.times.len() {
            body += &format!(
                "{:e},{:e},{:e},{:e},{:e}\n",
                p.times[k], p.paramagnetic[k], p.cross[k], p.dia_linear[k], p.dia_quadratic[k]
            );
        }
        artifacts.push(Artifact::text(format!("joule_l{}_prediction.csv", r.l), body));
        let slopes: Value = r.items.iter().map(|c| (c.name.clone(), json!(c.uniform.slope))).collect::<serde_json::Map<_, _>>().into();
        per_l.push(json!({
            "l": r.l,
            "slopes": slopes,
            "d_flipped_slope": r.dia_flipped.uniform.slope,
            "pass": r.pass,
        }));
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok((pass, json!({ "threshold": 2.9, "regions": per_l }), artifacts))
}

fn measure(config: &Config, base: Option<&Path>) -> Result<Parts> {
    let model = reference_model(config, base)?;
    let times = config.closed_times();
    let mut artifacts = Vec::new();
    let mut per_l = Vec::new();
    let mut pass = true;
    for (&l, shell) in config.experiment.l.iter().zip(config.shells()) {
        let transport = Transport::new(&model, l, shell)?;
        let record = transport.record(&times)?;
        let measure = &record.measure;
        let at_zero = transport.xi_p(0.0).abs().max();
        let mut evenness: f64 = 0.0;
        let mut transpose: f64 = 0.0;
        let mut negativity = f64::INFINITY;
        for &t in &times {
            let (a, _) = symm_split(&transport.xi_p(t));
            let (b, _) = symm_split(&transport.xi_p(-t));
            evenness = evenness.max((a - b).abs().max());
            transpose = transpose.max((transport.xi_p(-t) - transport.xi_p(t).transpose()).abs().max());
            negativity = negativity.min(negativity_margin(&transport, t));
        }
        let horizon = 1e14;
        let cesaro = measure.cesaro_mean(horizon);
        let duhamel = transport.duhamel_mass(64);
        let cesaro_defect = (&cesaro + &duhamel).abs().max();
        let ok = measure.reconstruction_defect <= 1e-8
            && measure.min_eigenvalue >= -1e-12
            && at_zero <= 1e-10
            && evenness <= 1e-10
            && transpose <= 1e-10
            && negativity >= -1e-10
            && cesaro_defect <= 1e-10;
        pass &= ok;
        artifacts.push(Artifact::text(format!("xi_l{l}.csv"), record.xi_csv()));
        artifacts.push(Artifact::text(format!("measure_l{l}.csv"), measure.to_csv()));
        per_l.push(json!({
            "l": l,
            "atoms": measure.frequencies.len(),
            "reconstruction_defect": measure.reconstruction_defect,
            "min_atom_eigenvalue": measure.min_eigenvalue,
            "xi_at_zero": at_zero,
            "evenness_defect": evenness,
            "transpose_defect": transpose,
            "negativity_margin": negativity,
            "cesaro_vs_duhamel": cesaro_defect,
            "xi_d": record.xi_d,
            "moment_bound": record.moment_bound,
            "j_th": transport.thermal_current().iter().copied().collect::<Vec<_>>(),
            "pass": ok,
        }));
    }
    Ok((pass, json!({ "regions": per_l }), artifacts))
}

fn decay(config: &Config) -> Result<DecayFunction> {
    Ok(config.experiment.decay.unwrap_or_else(|| DecayFunction::polynomial(config.lattice().map_or(1, |b| b.dim()), 1.0)))
}

fn lieb_robinson(config: &Config, base: Option<&Path>) -> Result<Parts> {
    let model = reference_model(config, base)?;
    let f = decay(config)?;
    let theta0 = config.experiment.theta0.ok_or_else(|| Error::Validation("theta0 missing".into()))?;
    let bound = interaction_bound(&model, theta0, &f, &config.disorder.seeds)?;
    let times = config.closed_times();
    let verdicts = config
        .experiment
        .pairs
        .par_iter()
        .map(|&[x, y]| {
            let b1 = LocalObservable { op: model.number(x), support: vec![x] };
            let b2 = LocalObservable { op: model.number(y), support: vec![y] };
            lr_bound_check(&model, &b1, &b2, &times, &f, &bound).map(|v| (x, y, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut artifacts = Vec::new();
    let mut rows = Vec::new();
    for (x, y, v) in &verdicts {
        artifacts.push(Artifact::text(format!("lr_{x}_{y}.csv"), v.to_csv()));
        let worst = v.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        rows.push(json!({ "pair": [x, y], "min_margin": worst, "pass": v.pass }));
    }
    let pass = verdicts.iter().all(|(_, _, v)| v.pass);
    Ok((pass, json!({ "interaction_bound": bound, "pairs": rows }), artifacts))
}

fn equicontinuity(config: &Config, base: Option<&Path>) -> Result<Parts> {
    let model = reference_model(config, base)?;
    let f = decay(config)?;
    let theta0 = config.experiment.theta0.ok_or_else(|| Error::Validation("theta0 missing".into()))?;
    let bound = interaction_bound(&model, theta0, &f, &config.disorder.seeds)?;
    let mut verdicts = Vec::new();
    for (&l, shell) in config.experiment.l.iter().zip(config.shells()) {
        let transport = Transport::new(&model, l, shell)?;
        verdicts.push((l, equicontinuity_check(&transport, &f, &bound, config.experiment.horizon, config.experiment.samples)?));
    }
    let mut body = String::from("l,horizon,max_quotient,constant,ratio\n");
    for (l, v) in &verdicts {
        body += &format!("{l},{:e},{:e},{:e},{:e}\n", v.horizon, v.max_quotient, v.constant, v.ratio);
    }
    let pass = verdicts.iter().all(|(_, v)| v.pass);
    let list: Vec<Value> = verdicts.iter().map(|(l, v)| json!({ "l": l, "verdict": v })).collect();
    Ok((pass, json!({ "interaction_bound": bound, "regions": list }), vec![Artifact::text("equicontinuity.csv", body)]))
}

fn quasifree(config: &Config, base: Option<&Path>) -> Result<Parts> {
    let e = &config.experiment;
    let mut seeds = vec![config.disorder.seed];
    seeds.extend(config.disorder.seeds.iter().copied());
    let mut betas = vec![e.beta];
    betas.extend(e.betas.iter().copied());
    let cells: Vec<(u64, f64)> = seeds.iter().flat_map(|&s| betas.iter().map(move |&b| (s, b))).collect();
    let times = config.closed_times();
    let (l, shell) = (e.l[0], config.shells()[0]);
    let reports = cells
        .par_iter()
        .map(|&(seed, beta)| {
            let model = Model::build(config.model_params(seed, beta, base)?)?;
            let transport = Transport::new(&model, l, shell)?;
            quasifree_crosscheck(&transport, &times, e.tolerance)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut body = String::from("seed,beta,sites,twopoint,sigma_p,sigma_d,xi_p\n");
    for r in &reports {
        body += &format!("{},{:e},{},{:e},{:e},{:e},{:e}\n", r.seed, r.beta, r.sites, r.twopoint, r.sigma_p, r.sigma_d, r.xi_p);
    }
    let worst = reports.iter().map(|r| r.max_error()).fold(0.0, f64::max);
    let pass = reports.iter().all(|r| r.pass);
    Ok((pass, json!({ "tolerance": e.tolerance, "max_error": worst }), vec![Artifact::text("quasifree.csv", body)]))
}

fn thermo(config: &Config, base: Option<&Path>) -> Result<Parts> {
    let model = reference_model(config, base)?;
    let e = &config.experiment;
    let pulse = config.pulse()?.rescale(e.l[0])?.scale_strength(e.eta);
    let times = config.times();
    let (ledger, last) = energy_ledger_with_state(&model, &pulse, &times, config.stepping())?;
    let first_law = ledger.first_law_defect();
    let balance = ledger.balance_defect();
    let split = ledger.split_defect();
    let min_heat = ledger.min_heat();
    let pass = first_law <= 1e-7 && balance <= 1e-6 && split <= 1e-12 && min_heat >= -1e-12;
    let checkpoint = Checkpoint {
        basis_hash: model.basis().tag(),
        beta: model.params.beta,
        t: *times.last().unwrap_or(&pulse.t0),
        matrix: last,
    };
    Ok((
        pass,
        json!({
            "first_law_defect": first_law,
            "balance_defect": balance,
            "split_defect": split,
            "min_heat": min_heat,
        }),
        vec![
            Artifact::text("ledger.csv", ledger.to_csv()),
            Artifact { name: "final_state.ckpt".into(), bytes: checkpoint.encode() },
        ],
    ))
}
