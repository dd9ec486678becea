use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const DENSITY: &str = r#"
name = "small-density"
seed = 5
task = "density"

[weight]
kind = "quadratic"
a = 1.0

[sequence]
kind = "lattice"
spacing = 2.0
window = { x0 = -15.0, x1 = 15.0, y0 = -15.0, y1 = 15.0 }

[density]
ladder = [4.0, 8.0]
sampler = { kind = "cell", origin = [0.0, 0.0], side_x = 2.0, side_y = 2.0, step = 0.5 }
"#;

fn flatlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatlab"))
        .args(args)
        .env_remove("FLATLAB_JOBS")
        .output()
        .expect("binary runs")
}

/// Writes `body` plus an output_dir inside `tmp` and returns the config path.
fn scenario(tmp: &TempDir, file: &str, body: &str) -> PathBuf {
    let out = tmp.path().join("runs");
    let text = format!("output_dir = {:?}\n{body}", out.to_str().unwrap());
    let path = tmp.path().join(file);
    fs::write(&path, text).unwrap();
    path
}

fn run_dir(out: &Output) -> PathBuf {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn density_run_writes_the_expected_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenario(&tmp, "d.toml", DENSITY);
    let dir = run_dir(&flatlab(&["run", cfg.to_str().unwrap(), "--jobs", "2"]));
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "ratios.csv", "report.json"]);

    let manifest = json(&dir.join("manifest.json"));
    let listed: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    for n in &names {
        assert!(listed.contains(&n.as_str()), "{n} missing from manifest");
    }
    assert_eq!(manifest["scenario"]["name"], "small-density");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));

    let report = json(&dir.join("report.json"));
    let tiers = report["result"]["per_radius"].as_array().unwrap();
    assert_eq!(tiers.len(), 2);
    let d = report["result"]["extrapolated"].as_f64().unwrap();
    assert!((d - std::f64::consts::PI / 4.0).abs() < 0.1, "{d}");
    let csv = fs::read_to_string(dir.join("ratios.csv")).unwrap();
    assert!(csv.starts_with("r,center_re,center_im,ratio"));
}

#[test]
fn runs_are_byte_identical_and_never_overwritten() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenario(&tmp, "d.toml", DENSITY);
    let a = run_dir(&flatlab(&["run", cfg.to_str().unwrap()]));
    let b = run_dir(&flatlab(&["run", cfg.to_str().unwrap()]));
    assert_ne!(a, b);
    for f in ["ratios.csv", "report.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let out = flatlab(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--tol", "0"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_sequence_file_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let body = DENSITY.replace(
        "kind = \"lattice\"\nspacing = 2.0\nwindow = { x0 = -15.0, x1 = 15.0, y0 = -15.0, y1 = 15.0 }",
        "kind = \"file\"\npath = \"nowhere.txt\"",
    );
    let cfg = scenario(&tmp, "d.toml", &body);
    let out = flatlab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.txt"));
}

#[test]
fn unknown_keys_and_bad_syntax_are_input_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenario(&tmp, "d.toml", &DENSITY.replace("ladder =", "ladderr ="));
    let out = flatlab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ladderr"));

    let cfg = scenario(&tmp, "e.toml", "name = \"x\"\ntask = [");
    let out = flatlab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn flat_weight_is_a_numeric_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenario(&tmp, "d.toml", &DENSITY.replace("a = 1.0", "a = 0.0"));
    let out = flatlab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel_laplacian_mass"));
}

#[test]
fn sweep_rows_and_failures() {
    let tmp = TempDir::new().unwrap();
    let body = format!("{DENSITY}\n[sweep]\nvariable = \"r\"\nvalues = [4.0, 8.0, 100.0]\ntask = \"density\"\n");
    let cfg = scenario(&tmp, "s.toml", &body);
    let dir = run_dir(&flatlab(&["sweep", cfg.to_str().unwrap()]));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "variable,value,status,series,y,message");
    assert!(lines.iter().any(|l| l.starts_with("r,4.0,ok,sup_ratio_r4,")));
    assert!(lines.iter().any(|l| l.starts_with("r,100.0,failed,")));

    // the sweep rows agree with single runs at the same radius
    let report = json(&dir.join("report.json"));
    let single = scenario(&tmp, "one.toml", &DENSITY.replace("ladder = [4.0, 8.0]", "ladder = [8.0]"));
    let one = json(&run_dir(&flatlab(&["run", single.to_str().unwrap()])).join("report.json"));
    assert_eq!(report["result"]["rows"][1]["result"]["per_radius"], one["result"]["per_radius"]);

    let empty = scenario(&tmp, "e.toml", &body.replace("[4.0, 8.0, 100.0]", "[]"));
    assert_eq!(flatlab(&["sweep", empty.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(flatlab(&["sweep", tmp.path().join("d.toml").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn compare_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let kernel = |n: usize| {
        format!(
            "name = \"k\"\ntask = \"kernel\"\n[weight]\nkind = \"quadratic\"\na = 1.0\n\
             [kernel]\nn = {n}\nradius = 8.0\ngrid_half = 2.0\ngrid_step = 0.5\n"
        )
    };
    let a = run_dir(&flatlab(&["run", scenario(&tmp, "a.toml", &kernel(12)).to_str().unwrap()]));
    let b = run_dir(&flatlab(&["run", scenario(&tmp, "b.toml", &kernel(32)).to_str().unwrap()]));
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());

    let out = flatlab(&["compare", a, b, "--tol", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("report.json.max"));
    assert_eq!(flatlab(&["compare", a, a, "--tol", "0"]).status.code(), Some(0));
    assert_eq!(flatlab(&["compare", a, b, "--tol", "1"]).status.code(), Some(0));

    let d = run_dir(&flatlab(&["run", scenario(&tmp, "d.toml", DENSITY).to_str().unwrap()]));
    assert_eq!(flatlab(&["compare", a, d.to_str().unwrap(), "--tol", "1"]).status.code(), Some(2));
    assert_eq!(flatlab(&["compare", a, "/nonexistent", "--tol", "1"]).status.code(), Some(2));
}

#[test]
fn jobs_environment_overrides_the_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenario(&tmp, "d.toml", DENSITY);
    let out = Command::new(env!("CARGO_BIN_EXE_flatlab"))
        .args(["run", cfg.to_str().unwrap(), "--jobs", "3"])
        .env("FLATLAB_JOBS", "1")
        .output()
        .unwrap();
    let dir = run_dir(&out);
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["jobs"], 1);
    assert_eq!(manifest["backend"], "sequential");

    let out = Command::new(env!("CARGO_BIN_EXE_flatlab"))
        .args(["run", cfg.to_str().unwrap()])
        .env("FLATLAB_JOBS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            let parsed: Result<toml::Value, _> = toml::from_str(&text);
            assert!(parsed.is_ok(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
