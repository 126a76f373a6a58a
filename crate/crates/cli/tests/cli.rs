use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use quantlab_cli::config;
use quantlab_cli::CliError;

const BIN: &str = env!("CARGO_BIN_EXE_quantlab");

const SMALL: &str = r#"
[run]
seed = 7

[[models]]
name = "round"
kind = "round_sphere"
ks = [4, 8, 16, 32, 64]

[[models]]
name = "torus"
kind = "flat_torus"
backend = "fd"
resolution = 0.25
ks = [4, 6, 8, 10, 12]
"#;

fn quantlab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(BIN).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn spectrum_dimensions_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = quantlab(tmp.path(), SMALL, &["spectrum"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/spectrum.csv")).unwrap();
    let dims: Vec<(String, u32, usize)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    for (name, k, dim) in &dims {
        let want = if name == "round" { *k as usize + 1 } else { *k as usize };
        assert_eq!(*dim, want, "{name} k={k}");
    }
    assert_eq!(dims.len(), 10);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/spectrum.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 7);
    let ids: Vec<u64> = json["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert!(ids.contains(&1) && ids.contains(&2) && ids.contains(&14));
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |name: &str| fs::read(tmp.path().join("out").join(name)).unwrap();
    assert_eq!(quantlab(tmp.path(), SMALL, &["spectrum"]).status.code(), Some(0));
    let (json, csv) = (read("spectrum.json"), read("spectrum.csv"));
    assert_eq!(quantlab(tmp.path(), SMALL, &["spectrum"]).status.code(), Some(0));
    assert_eq!(json, read("spectrum.json"));
    assert_eq!(csv, read("spectrum.csv"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = quantlab(tmp.path(), SMALL, &["spectrum", "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed 99"));
    let json = fs::read_to_string(tmp.path().join("out/spectrum.json")).unwrap();
    assert!(json.contains("\"seed\": 99"));
}

#[test]
fn empty_k_list_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = quantlab(tmp.path(), "[[models]]\nname = \"a\"\nkind = \"round_sphere\"\nks = []\n", &["spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty k list"));
}

#[test]
fn unknown_keys_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for text in [
        "[run]\nseeds = 3\n[[models]]\nname = \"a\"\nkind = \"round_sphere\"\nks = [4]\n",
        "[[models]]\nname = \"a\"\nkind = \"round_sphere\"\nks = [4]\ncolour = 1\n",
        "[extra]\n[[models]]\nname = \"a\"\nkind = \"round_sphere\"\nks = [4]\n",
    ] {
        let o = quantlab(tmp.path(), text, &["spectrum"]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
    }
}

#[test]
fn invalid_models_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for (text, needle) in [
        ("[[models]]\nname = \"t\"\nkind = \"flat_torus\"\nks = [4]\n", "no exact backend"),
        ("[[models]]\nname = \"s\"\nkind = \"round_sphere\"\nbackend = \"fd\"\nresolution = 0.5\nks = [4]\n", "resolution"),
        ("[[models]]\nname = \"s\"\nkind = \"round_sphere\"\nks = [8, 4]\n", "strictly increasing"),
        ("[[models]]\nname = \"s\"\nkind = \"round_sphere\"\nks = [4]\ncriteria = [15]\n", "no criterion 15"),
        ("[run]\nworkers = 0\n[[models]]\nname = \"s\"\nkind = \"round_sphere\"\nks = [4]\n", "workers"),
    ] {
        let o = quantlab(tmp.path(), text, &["spectrum"]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(needle), "{}", stderr(&o));
    }
}

#[test]
fn failing_criterion_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[tolerances]\ngap_constant = 10.0\n");
    let o = quantlab(tmp.path(), &text, &["spectrum"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] criterion  1"));
}

#[test]
fn report_on_empty_dir_lists_missing_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(BIN).args(["report", "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for c in ["spectrum", "embed", "dynamics", "hyperplane"] {
        assert!(err.contains(c), "{err}");
    }
}

#[test]
fn report_keys_every_criterion_once_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[embed]
samples = 8
pairs = 20
injectivity_ks = [16, 32]
profile_ks = [8, 16]
profile_points = 2
profile_radii = 6

[dynamics]
ks = [8, 16]
samples = 6

[hyperplane]
ks = [16, 32]
points = 4
trials = 3

[tolerances]
nu_ratio_k = 16

[[models]]
name = "round"
kind = "round_sphere"
ks = [8, 16, 32]
"#;
    for c in ["spectrum", "embed", "dynamics", "hyperplane"] {
        let o = quantlab(tmp.path(), text, &[c]);
        // Sample sizes are too small for meaningful verdicts; only the plumbing is checked.
        assert!(matches!(o.status.code(), Some(0 | 1)), "{c}: {}", stderr(&o));
    }
    let out = tmp.path().join("out");
    // No torus fd model and no fd oracle model: criteria 1 and 13 are keyed but missing.
    let o = quantlab(tmp.path(), text, &["report"]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for id in 1..=14 {
        assert_eq!(stdout.matches(&format!("criterion {id:>2} ")).count(), 1, "{stdout}");
    }
    assert!(stdout.contains("[MISSING] criterion  1") && stdout.contains("[MISSING] criterion 13"));
    let snapshot = |p: &Path| {
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        for e in fs::read_dir(p.join("plots")).unwrap() {
            let e = e.unwrap();
            files.push((e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()));
        }
        files.sort();
        (fs::read(p.join("report.json")).unwrap(), fs::read(p.join("report.csv")).unwrap(), files)
    };
    let first = snapshot(&out);
    assert!(!first.2.is_empty());
    let line = String::from_utf8_lossy(&first.2[0].1).lines().next().unwrap().to_string();
    assert_eq!(line.split(' ').count(), 2);
    quantlab(tmp.path(), text, &["report"]);
    assert_eq!(first, snapshot(&out));
}

#[test]
fn report_rejects_mixed_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[[models]]\nname = \"s\"\nkind = \"round_sphere\"\nks = [8, 16]\n";
    quantlab(tmp.path(), text, &["spectrum"]);
    quantlab(tmp.path(), text, &["embed", "--seed", "2"]);
    quantlab(tmp.path(), text, &["dynamics"]);
    quantlab(tmp.path(), text, &["hyperplane"]);
    let o = quantlab(tmp.path(), text, &["report"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn backend_override_skips_the_torus() {
    let mut cfg = config::parse(SMALL).unwrap();
    cfg.apply(&config::Overrides { backend: Some(quantlab::spectral::Backend::Fd), ..Default::default() });
    assert_eq!(cfg.models[0].backend, quantlab::spectral::Backend::Fd);
    assert_eq!(cfg.models[1].backend, quantlab::spectral::Backend::Fd);
    cfg.apply(&config::Overrides { backend: Some(quantlab::spectral::Backend::Exact), ..Default::default() });
    assert_eq!(cfg.models[0].backend, quantlab::spectral::Backend::Exact);
    assert_eq!(cfg.models[1].backend, quantlab::spectral::Backend::Fd);
    cfg.validate().unwrap();
}

#[test]
fn error_kinds_map_to_exit_codes() {
    let numerical: CliError = quantlab::Error::NoGapFound { best_ratio: 1.1, index: 3 }.into();
    assert_eq!(numerical.exit_code(), 3);
    let usage: CliError = quantlab::Error::InvalidModel("ρ ≤ 0".into()).into();
    assert_eq!(usage.exit_code(), 2);
    assert_eq!(quantlab_cli::verdict_code(true), 0);
    assert_eq!(quantlab_cli::verdict_code(false), 1);
}

#[test]
fn missing_config_is_usage_error() {
    let o = Command::new(BIN).arg("spectrum").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(BIN).args(["spectrum", "--config", "/nonexistent/q.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
