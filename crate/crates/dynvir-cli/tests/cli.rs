use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use dynvir_cli::{report_schema_version, Scenario, Suite, OUT_ENV};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dynvir"));
    c.env_remove(OUT_ENV);
    c
}

fn write_config(dir: &Path, name: &str, s: &Scenario) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, s.to_json()).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn validate(v: &Value) {
    let schema: Value = serde_json::from_str(include_str!("../report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn check<'a>(v: &'a Value, name: &str) -> &'a Value {
    v["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn default_kernel_suite_passes_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", &Scenario::default_for(Suite::KernelIdentities));
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v = report(&out);
    validate(&v);
    assert_eq!(v["schema_version"], report_schema_version());
    assert_eq!(v["pass"], true);
    for t in v["tables"].as_array().unwrap() {
        assert!(out.join(t.as_str().unwrap()).exists());
    }
    let mut rd = csv::Reader::from_path(out.join("kernel.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["k", "l", "t", "value"]);
    assert_eq!(rd.records().count(), 13 * 13);
}

#[test]
fn free_potential_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::default_for(Suite::KernelIdentities);
    s.potential.b.clear();
    let cfg = write_config(dir.path(), "free.json", &s);
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn flipped_generator_fails_the_semigroup() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::default_for(Suite::KernelIdentities);
    s.debug.flip_generator_sign = true;
    let cfg = write_config(dir.path(), "flip.json", &s);
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(1));
    let v = report(&out);
    validate(&v);
    assert_eq!(v["pass"], false);
    assert_eq!(check(&v, "semigroup")["pass"], false);
}

#[test]
fn tolerance_overrides_apply_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::default_for(Suite::KernelIdentities);
    s.tolerances.insert("semigroup".into(), 0.0);
    s.tolerances.insert("lemma_u1".into(), 1.0);
    let cfg = write_config(dir.path(), "tol.json", &s);
    let out = dir.path().join("out");
    let code = run(&cfg, &out, &[]).status.code();
    let v = report(&out);
    let semigroup = check(&v, "semigroup");
    assert_eq!(semigroup["tolerance"], 0.0);
    assert_eq!(code, Some(if semigroup["value"] == 0.0 { 0 } else { 1 }));
    assert_eq!(check(&v, "lemma_u1")["tolerance"], 1.0);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"scenario": {"suite": "npoint", "extra": 1}}"#).unwrap();
    let o = run(&bad, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
    assert_eq!(run(&dir.path().join("missing.json"), &out, &[]).status.code(), Some(2));

    let mut s = Scenario::default_for(Suite::DbmMoments);
    s.potential.b.insert(3, 1.0);
    let cfg = write_config(dir.path(), "nonhermite.json", &s);
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(2));
    assert!(!out.join("report.json").exists());
}

fn small_girsanov() -> Scenario {
    let mut s = Scenario::default_for(Suite::Girsanov);
    s.replicas = 400;
    s.horizon = 0.25;
    s.dt = 1e-3;
    s.k_max = 2;
    s
}

#[test]
fn reports_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.json", &small_girsanov());
    let mut texts = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = run(&cfg, &out, &["--threads", threads]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("hierarchy.csv")).unwrap()));
    }
    assert!(texts.windows(2).all(|w| w[0] == w[1]));
    validate(&serde_json::from_slice(&texts[0].0).unwrap());
}

#[test]
fn seed_flag_replaces_the_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.json", &small_girsanov());
    let out = dir.path().join("out");
    run(&cfg, &out, &["--seed", "99"]);
    assert_eq!(report(&out)["scenario"]["seed"], 99);
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::default_for(Suite::BosonCommutators);
    s.output = Some(dir.path().join("from_config"));
    let cfg = write_config(dir.path(), "b.json", &s);

    assert!(bin().arg("run").arg(&cfg).status().unwrap().success());
    assert!(dir.path().join("from_config/report.json").exists());

    let env_dir = dir.path().join("from_env");
    assert!(bin().env(OUT_ENV, &env_dir).arg("run").arg(&cfg).status().unwrap().success());
    assert!(env_dir.join("report.json").exists());

    let flag_dir = dir.path().join("from_flag");
    let o = bin().env(OUT_ENV, &env_dir).arg("run").arg(&cfg).arg("--out").arg(&flag_dir).output().unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("report.json").exists());
}

#[test]
fn defaults_subcommand_round_trips() {
    let o = bin().args(["defaults", "np-brackets"]).output().unwrap();
    assert!(o.status.success());
    let s = Scenario::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(s, Scenario::default_for(Suite::NpBrackets));
}
