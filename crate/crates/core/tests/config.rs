use fermiohm::config::{Config, ExperimentKind};
use fermiohm::experiment;
use fermiohm::lattice::{sample_disorder, BoxSpec, DisorderMode, DisorderRealization};
use std::path::{Path, PathBuf};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const MINIMAL: &str = r#"
[lattice]
sites = 4

[pulse]
profile = "smooth-bump"
t0 = 0.0
t1 = 1.0
direction = [1.0]

[experiment]
kind = "thermo-ledger"
beta = 1.0
eta = 0.1
samples = 4
"#;

fn fields(c: &Config) -> Vec<String> {
    c.validate(None).into_iter().map(|d| d.field).collect()
}

#[test]
fn bundled_configs_parse_and_validate() {
    let mut kinds = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let config = Config::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let diags = config.validate(path.parent());
        assert!(diags.is_empty(), "{}: {diags:?}", path.display());
        kinds.push(config.experiment.kind);
    }
    for k in [
        ExperimentKind::OhmScan,
        ExperimentKind::JouleScan,
        ExperimentKind::MeasureReconstruct,
        ExperimentKind::LrCheck,
        ExperimentKind::Equicontinuity,
        ExperimentKind::QuasifreeCrosscheck,
        ExperimentKind::ThermoLedger,
    ] {
        assert!(kinds.contains(&k), "no bundled config for {}", k.name());
    }
}

#[test]
fn defaults_and_grids() {
    let c = Config::parse(MINIMAL).unwrap();
    assert!(c.validate(None).is_empty());
    assert_eq!(c.disorder.theta, 0.5);
    assert_eq!(c.numerics.dt, 0.02);
    // the default window runs a quarter pulse length past t1
    let t = c.times();
    assert_eq!(t.len(), 4);
    assert!((t[3] - 1.25).abs() < 1e-15);
    assert_eq!(c.shells(), vec![1]);
    assert_eq!(Config::hash(MINIMAL), Config::hash(MINIMAL));
    assert_ne!(Config::hash(MINIMAL), Config::hash(&MINIMAL.replace("0.1", "0.2")));
    assert_eq!(Config::hash("").len(), 64);
}

#[test]
fn physics_violations_are_reported() {
    let zero_beta = Config::parse(&MINIMAL.replace("beta = 1.0", "beta = 0.0")).unwrap();
    assert_eq!(fields(&zero_beta), vec!["experiment.beta"]);
    let wide = Config::parse(&MINIMAL.replace("direction = [1.0]", "direction = [1.0]\nsupport_radius = 5.0")).unwrap();
    assert_eq!(fields(&wide), vec!["pulse"]);
    let big = Config::parse(&MINIMAL.replace("sites = 4", "sites = 13")).unwrap();
    assert!(fields(&big).contains(&"lattice".to_string()));
    let sign = Config::parse(&format!("{MINIMAL}\n[numerics]\ncoupling_sign = 2.0\n")).unwrap();
    assert_eq!(fields(&sign), vec!["numerics.coupling_sign"]);
    let no_pulse = Config::parse(&MINIMAL.replace("[pulse]", "[unused]")).err();
    assert!(no_pulse.is_some());
}

#[test]
fn scan_needs_two_decades_of_eta() {
    let text = std::fs::read_to_string(configs_dir().join("ohm_scan.toml")).unwrap();
    let mut c = Config::parse(&text).unwrap();
    c.experiment.etas = vec![0.1, 0.05];
    assert!(fields(&c).contains(&"experiment.etas".to_string()));
    c.experiment.etas = vec![0.1];
    assert!(fields(&c).contains(&"experiment.etas".to_string()));
}

#[test]
fn malformed_documents_fail_to_parse() {
    assert!(Config::parse("[lattice\nsites = 4").is_err());
    assert!(Config::parse(&MINIMAL.replace("sites = 4", "sites = 4\nbogus = 1")).is_err());
    assert!(Config::parse(&MINIMAL.replace("thermo-ledger", "teleport")).is_err());
    assert!(Config::from_bytes(&[0xff, 0xfe, 0x00]).is_err());
    let ambiguous = Config::parse(&MINIMAL.replace("sites = 4", "sites = 4\nd = 1\nL = 1")).unwrap();
    assert!(ambiguous.lattice().is_err());
    assert_eq!(fields(&ambiguous)[0], "lattice");
}

#[test]
fn disorder_table_is_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let lattice = BoxSpec::chain(4).unwrap();
    let omega = sample_disorder(99, &lattice, &DisorderMode::Uniform).unwrap();
    std::fs::write(dir.path().join("omega.json"), omega.to_json()).unwrap();
    let text = MINIMAL.replace("[pulse]", "[disorder]\nmode = \"table\"\ntable = \"omega.json\"\n\n[pulse]");
    let c = Config::parse(&text).unwrap();
    assert!(c.validate(Some(dir.path())).is_empty());
    let loaded = c.disorder(&lattice, 0, Some(dir.path())).unwrap();
    assert_eq!(loaded, omega);
    assert_eq!(DisorderRealization::from_json(&omega.to_json()).unwrap(), omega);
    let missing = tempfile::tempdir().unwrap();
    assert!(c.validate(Some(missing.path())).iter().any(|d| d.field == "disorder.table"));
}

#[test]
fn run_produces_artifacts_and_rejects_invalid_configs() {
    let c = Config::parse(MINIMAL).unwrap();
    let out = experiment::run(&c, None, 1).unwrap();
    assert!(out.pass);
    assert!(!out.artifacts.is_empty());
    assert!(out.artifacts.iter().all(|a| !a.name.is_empty() && !a.bytes.is_empty()));
    let again = experiment::run(&c, None, 2).unwrap();
    assert_eq!(out.artifacts, again.artifacts);
    let bad = Config::parse(&MINIMAL.replace("beta = 1.0", "beta = -1.0")).unwrap();
    assert!(experiment::run(&bad, None, 1).is_err());
}
