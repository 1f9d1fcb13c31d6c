use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CL: &str = r#"method = "all"
u = 1.0
c = 0.0
d = 20.0
bins = 1000
q = 1e-9
seed = 3
bands = [[0.0, 2.0]]

[model]
preset = "cramer_lundberg"
premium = 1.0
claim_rate = 1.0
claim = { kind = "exponential", rate = 2.0 }

[ruin]
type = "infinite"

[mc]
paths = 20000
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-risk"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn cramer_lundberg_all_methods_match_closed_form() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cl.toml", CL);
    let out = tmp.path().join("out");
    ok(&run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let exact = 0.5 * (-1.0f64).exp();
    for m in ["transient", "stationary"] {
        let doc = read_json(&out.join(format!("{m}.json")));
        assert_eq!(doc["schema"], "hybrid-risk/descriptors/v1");
        let psi = doc["summary"]["psi_lower"].as_f64().unwrap();
        assert!((psi - exact).abs() <= 1e-2, "{m}: {psi} vs {exact}");
    }
    let mc = read_json(&out.join("mc.json"));
    let (psi, se) = (
        mc["summary"]["psi_lower"].as_f64().unwrap(),
        mc["summary_std_errors"]["psi_lower"].as_f64().unwrap(),
    );
    assert!((psi - exact).abs() <= 3.0 * se, "mc: {psi} ± {se} vs {exact}");

    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let row = table.lines().find(|l| l.starts_with("psi_lower,")).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols.len(), 8);
    let z: f64 = cols[5].parse().unwrap();
    assert!(z.abs() <= 3.0, "{row}");
    let backend: f64 = cols[7].parse().unwrap();
    assert!(backend <= 1e-8, "{row}");
}

#[test]
fn every_output_carries_provenance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cl.toml", &CL.replace("paths = 20000", "paths = 500"));
    let out = tmp.path().join("out");
    ok(&run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let files = all_files(&out);
    assert_eq!(files.len(), 10);
    for (name, bytes) in files {
        let text = String::from_utf8(bytes).unwrap();
        if name.ends_with(".json") {
            let doc: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(doc["provenance"]["seed"], 3, "{name}");
            assert_eq!(doc["provenance"]["solver_bins"], 1000, "{name}");
            assert!(doc["provenance"]["git_hash"].is_string(), "{name}");
        } else {
            for key in ["# schema = ", "# git_hash = ", "# seed = 3", "# solver_bins = 1000", "# tolerance_backend = "] {
                assert!(text.contains(key), "{name} lacks {key}");
            }
            let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
            assert!(header.contains(','), "{name}: {header}");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cl.toml", &CL.replace("paths = 20000", "paths = 3000"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&run(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]));
    ok(&run(&["--threads", "1", "run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]));
    assert_eq!(all_files(&a), all_files(&b));
}

#[test]
fn missing_bins_is_a_schema_error() {
    let tmp = TempDir::new().unwrap();
    let text = CL.replace("method = \"all\"", "method = \"transient\"").replace("bins = 1000\n", "");
    let cfg = write_config(tmp.path(), "nobins.toml", &text);
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nobins.toml:1:") && err.contains("bins"), "{err}");
}

#[test]
fn schema_errors_name_the_line() {
    let tmp = TempDir::new().unwrap();
    for (text, line) in [
        (CL.replace("d = 20.0", "d = 20.0.0"), 4),
        (CL.replace("claim_rate = 1.0", "claim_rate = \"fast\""), 10),
        (CL.replace("type = \"infinite\"", "type = \"sometimes\""), 16),
        (CL.replace("q = 1e-9", "q = 1e-9\nbogus = true"), 7),
    ] {
        let cfg = write_config(tmp.path(), "bad.toml", &text);
        let out = run(&["validate", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("bad.toml:{line}:")), "expected line {line}: {err}");
    }
}

#[test]
fn validate_reports_success() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cl.toml", CL);
    let out = run(&["validate", cfg.to_str().unwrap()]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("no violations"));
}

#[test]
fn jump_density_is_the_claim_density() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cl.toml", CL);
    let csv = tmp.path().join("jd.csv");
    ok(&run(&["jump-density", cfg.to_str().unwrap(), "--level", "3", "--dy", "0.05", "--out", csv.to_str().unwrap()]));
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,density"));
    let mut n = 0;
    for l in lines {
        let (y, d) = l.split_once(',').unwrap();
        let (y, d): (f64, f64) = (y.parse().unwrap(), d.parse().unwrap());
        assert!((d - 2.0 * (-2.0 * y).exp()).abs() < 1e-6, "{l}");
        n += 1;
    }
    assert!(n > 100);
}

#[test]
fn solve_and_simulate_override_the_method() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cl.toml", &CL.replace("paths = 20000", "paths = 400"));
    let out = tmp.path().join("s");
    ok(&run(&["solve", cfg.to_str().unwrap(), "--backend", "stationary", "--bins", "200", "--out", out.to_str().unwrap()]));
    let doc = read_json(&out.join("stationary.json"));
    assert_eq!(doc["descriptors"]["provenance"]["n_bins"], 200);
    assert!(!out.join("transient.json").exists());

    let out = tmp.path().join("m");
    let path = tmp.path().join("path.csv");
    ok(&run(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--path-csv",
        path.to_str().unwrap(),
    ]));
    assert_eq!(read_json(&out.join("mc.json"))["descriptors"]["provenance"]["n_paths"], 400);
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("time,level,state\n0,1,premium\n"), "{}", &text[..60.min(text.len())]);
}

#[test]
fn inline_models_run() {
    let tmp = TempDir::new().unwrap();
    let text = r#"method = "transient"
u = 1.0
c = -2.0
d = 6.0
bins = 80

[model]
preset = "inline"
generator = [[-1.0, 1.0], [2.0, -2.0]]
states = [
  { name = "p", class = "premium", drift = "linear(1, 0.05)", diffusion = 0.3 },
  { name = "j", class = "down", drift = -1.0 },
]

[ruin]
type = "omega"
omega = { levels = [-2.0, 0.0], values = [2.0, 0.5] }
"#;
    let cfg = write_config(tmp.path(), "inline.toml", text);
    let out = tmp.path().join("o");
    ok(&run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let s = &read_json(&out.join("transient.json"))["summary"];
    let total: f64 = ["psi_lower", "psi_plus", "psi_minus", "upper", "discounted", "capped"]
        .iter()
        .map(|k| s[k].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9, "{s}");
    assert!(s["psi_minus"].as_f64().unwrap() > 0.0);
}
