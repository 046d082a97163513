use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_clustersim");

const BASE: &str = r#"seed = 42
replicas = 200

[geometry]
kind = "euclidean"
dim = 2

[window]
lo = [0.0, 0.0]
hi = [1.0, 1.0]

[reference]
intensity = { kind = "constant", value = 15.0 }

[centres]
kind = "poisson"

[kernel]
placement = "translation"
size = { kind = "poisson", mean = 2.0 }
component = { kind = "gaussian", sigma = 0.05 }

[test]
f = { kind = "bump", center = [0.5, 0.5], radius = 0.3 }
region = { kind = "box", lo = [0.25, 0.25], hi = [0.75, 0.75] }
n_nodes = 1024
n_inner = 100
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn json_lines(bytes: &[u8]) -> Vec<serde_json::Value> {
    std::str::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("not JSON ({e}): {l}")))
        .collect()
}

#[test]
fn help_lists_every_subcommand() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in [
        "sample",
        "laplace-check",
        "varpi-check",
        "droplet-check",
        "qi-check",
        "ibp-check",
        "corr-check",
        "dynamics",
        "properness",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn laplace_check_emits_records_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let o = run(&["laplace-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = json_lines(&o.stdout);
    assert_eq!(recs.len(), 3);
    for r in &recs {
        assert_eq!(r["command"], "laplace-check");
        assert_eq!(r["seed"], 42);
        assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    }
    assert_eq!(recs[0]["estimator"], "empirical");
    assert_eq!(recs[1]["estimator"], "theoretical");
    assert_eq!(recs[2]["pass"], true);
}

#[test]
fn unknown_variant_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = BASE.replace(r#"kind = "gaussian", sigma"#, r#"kind = "cauchy", sigma"#);
    let cfg = write_config(dir.path(), &bad);
    let o = run(&["sample", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cauchy") && err.contains("component"), "{err}");

    let unknown_key = BASE.replace("n_inner = 100", "n_inner = 100\nbogus = 1");
    let cfg = write_config(dir.path(), &unknown_key);
    let o = run(&["laplace-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn missing_inputs_are_usage_errors() {
    assert_eq!(run(&["sample"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    // sample writes files and so needs an output directory
    assert_eq!(run(&["sample", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    let no_f = BASE.replace(r#"f = { kind = "bump", center = [0.5, 0.5], radius = 0.3 }"#, "");
    let cfg = write_config(dir.path(), &no_f);
    let o = run(&["laplace-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`f`"));
}

#[test]
fn sample_writes_point_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let o = run(&["sample", "--config", cfg.to_str().unwrap(), "--replicas", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = json_lines(&o.stdout);
    assert_eq!(recs.len(), 3);
    for (i, r) in recs.iter().enumerate() {
        let csv = std::fs::read_to_string(out.join(format!("sample_{i}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x1,x2,mark"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len() as u64, r["n_points"].as_u64().unwrap());
        for row in rows {
            let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
            assert!(cols[0] >= 0.0 && cols[0] <= 1.0 && cols[1] >= 0.0 && cols[1] <= 1.0);
        }
    }
    assert_eq!(json_lines(&std::fs::read(out.join("sample.jsonl")).unwrap()), recs);
}

#[test]
fn seed_override_changes_and_fixes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let c = cfg.to_str().unwrap();
    let a = run(&["properness", "--config", c, "--seed", "1", "--replicas", "50"]);
    let b = run(&["properness", "--config", c, "--seed", "1", "--replicas", "50"]);
    let d = run(&["properness", "--config", c, "--seed", "2", "--replicas", "50"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, d.stdout);
    assert_eq!(json_lines(&a.stdout)[0]["seed"], 1);
}

#[test]
fn droplet_check_record_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let o = run(&["droplet-check", "--config", cfg.to_str().unwrap(), "--replicas", "500"]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(2));
    let recs = json_lines(&o.stdout);
    assert_eq!(recs.len(), 1);
    for key in ["lhs", "rhs", "se_lhs", "se_rhs", "z", "pass"] {
        assert!(recs[0].get(key).is_some(), "missing {key}");
    }
    assert_eq!(recs[0]["pass"].as_bool().unwrap(), o.status.code() == Some(0));
}

#[test]
fn failed_checks_exit_with_two() {
    // a zero tolerance makes any nonzero z a failure
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}max_z = 0.0\n"));
    let o = run(&["laplace-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let recs = json_lines(&o.stdout);
    assert_eq!(recs.last().unwrap()["pass"], false);
}

#[test]
fn example_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(&root).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let text = std::fs::read_to_string(&p).unwrap();
            let cfg = clustersim::cli::config::ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            cfg.model(&root).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
