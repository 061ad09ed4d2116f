use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dipolar-sense");

const SMALL: &str = r#"
[chain]
n_spins = [2, 3]

[grid]
layers = [1, 2]
tiers = ["T1", "T2"]
seeds = [204, 604]

[optimizer]
max_generations = 25

[evolution]
kind = "exact"

[simplex]
restarts = 4
de_generations = 20
"#;

fn setup(config: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_snapshot(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for dir in [out.to_path_buf(), out.join("analysis"), out.join("analysis/figures")] {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "csv") {
                files.push((
                    p.strip_prefix(out).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn all_writes_records_manifest_and_tables() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("res");
    let o = run(&["all", "--jobs", "2"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest = read_json(&out.join("manifest.json"));
    let entries = manifest["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 16);
    assert_eq!(manifest["schema_version"], 1);
    for e in entries {
        assert_eq!(e["status"], "ok");
        let rel = e["path"].as_str().unwrap();
        let label = format!(
            "L{}_N{}_{}/seed{}.json",
            e["layers"],
            e["n_spins"],
            e["tier"].as_str().unwrap(),
            e["seed"]
        );
        assert_eq!(rel, label);
        let rec = read_json(&out.join(rel));
        assert_eq!(rec["schema_version"], 1);
        assert_eq!(e["sha256"].as_str().unwrap().len(), 64);
    }

    let bounds = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let lines: Vec<&str> = bounds.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("n_spins,det_sql,log_det_sql,det_qstar,log_det_qstar"));
    let n2: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(n2[0], "2");
    assert_eq!(n2[1].parse::<f64>().unwrap(), 1.0);
    assert!((n2[3].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
    let n3: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(n3[1].parse::<f64>().unwrap(), 6.0);
    assert!((n3[3].parse::<f64>().unwrap() - 10.125).abs() < 1e-6);

    let a = out.join("analysis");
    for f in ["saturation.csv", "tier_matrix.csv", "seed_statistics.csv", "motifs.csv"] {
        assert!(a.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_dir(a.join("motifs")).unwrap().count(), 8);
    let sat = fs::read_to_string(a.join("saturation.csv")).unwrap();
    assert_eq!(sat.lines().count(), 9);
    let tiers = fs::read_to_string(a.join("figures/tiers.csv")).unwrap();
    assert_eq!(tiers.lines().next().unwrap(), "layers,n_spins,T1,T2,T3,T4,delta_pp");
    assert_eq!(tiers.lines().count(), 5);
    let scaling = fs::read_to_string(a.join("figures/scaling.csv")).unwrap();
    assert!(scaling.lines().next().unwrap().ends_with("ratio_to_qstar"));
    assert_eq!(scaling.lines().count(), 5);
    assert_eq!(
        fs::read_to_string(a.join("seed_statistics.csv"))
            .unwrap()
            .lines()
            .count(),
        17
    );
    let fig3 = fs::read_to_string(a.join("figures/motif.csv")).unwrap();
    assert_eq!(fig3.lines().count(), 1 + 8 * 4);
}

#[test]
fn csv_outputs_are_deterministic() {
    let (dir, cfg) = setup(SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["all", "--jobs", "3"], &cfg, &a).status.success());
    assert!(run(&["all", "--jobs", "1"], &cfg, &b).status.success());
    assert_eq!(csv_snapshot(&a), csv_snapshot(&b));
    let ra = read_json(&a.join("L2_N3_T2/seed604.json"));
    let rb = read_json(&b.join("L2_N3_T2/seed604.json"));
    for k in ["params", "decoder", "fim", "probe", "objective", "trajectory"] {
        assert_eq!(ra[k], rb[k], "{k}");
    }
}

#[test]
fn resume_skips_completed_runs() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("res");
    assert!(run(&["run", "--only", "L1"], &cfg, &out).status.success());
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["entries"].as_array().unwrap().len(), 8);
    let before = fs::read(out.join("L1_N2_T1/seed204.json")).unwrap();

    let o = Command::new(BIN)
        .args(["run", "--resume", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    let log = String::from_utf8_lossy(&o.stderr);
    assert!(log.contains("16 runs requested, 8 reused, 8 to compute"), "{log}");
    assert_eq!(fs::read(out.join("L1_N2_T1/seed204.json")).unwrap(), before);
    assert_eq!(
        read_json(&out.join("manifest.json"))["entries"]
            .as_array()
            .unwrap()
            .len(),
        16
    );
    let l2 = read_json(&out.join("L2_N3_T1/seed204.json"));
    assert_eq!(l2["warm_started"], true);
}

#[test]
fn analyze_refuses_other_schema_versions() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("res");
    assert!(run(&["run", "--only", "L1,N2,T1,S204"], &cfg, &out).status.success());
    let p = out.join("L1_N2_T1/seed204.json");
    let text = fs::read_to_string(&p)
        .unwrap()
        .replace("\"schema_version\": 1", "\"schema_version\": 99");
    fs::write(&p, &text).unwrap();
    let m = out.join("manifest.json");
    let mut manifest = read_json(&m);
    let sha = {
        use sha2::Digest;
        hex::encode(sha2::Sha256::digest(text.as_bytes()))
    };
    manifest["entries"][0]["sha256"] = Value::String(sha);
    fs::write(&m, manifest.to_string()).unwrap();
    let o = run(&["analyze", "--only", "L1,N2,T1,S204"], &cfg, &out);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema version 99"));
}

#[test]
fn analyze_reports_missing_runs() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("res");
    assert!(run(&["run", "--only", "N2,T1"], &cfg, &out).status.success());
    let o = run(&["analyze"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let sat = fs::read_to_string(out.join("analysis/saturation.csv")).unwrap();
    assert_eq!(sat.lines().count(), 3);
}

#[test]
fn analyze_needs_a_manifest() {
    let (dir, cfg) = setup(SMALL);
    let o = run(&["analyze"], &cfg, &dir.path().join("empty"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rejects_bad_input() {
    let (dir, cfg) = setup("[grid]\nseeds = [1, 1]\n");
    let o = run(&["run"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("listed twice"));
    let (dir, cfg) = setup(SMALL);
    let o = run(&["run", "--only", "Q3"], &cfg, dir.path());
    assert!(!o.status.success());
}

#[test]
fn default_config_is_printed() {
    let o = Command::new(BIN).arg("default-config").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("seeds = [204, 604, 1204, 2004, 3004]"));
}
