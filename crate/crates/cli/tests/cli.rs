use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hpcli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hpcli"));
    for var in ["HPLAB_OUT", "HPLAB_SEED", "HPLAB_THREADS", "HPLAB_CONFIG"] {
        c.env_remove(var);
    }
    c
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    hpcli().args(args).arg("--config").arg(config).output().unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

#[test]
fn plateau_prediction_is_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "p.toml",
        "[circuit]\nl = 8\n[partition]\nl_a = 1\nl_d = 1\n[predict]\nformula = \"duc-plateau\"\n",
    );
    let out = run(&["predict"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header, ["t", "delta", "method", "seed"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.75);
    assert_eq!(rows[0][2], "duc-plateau");
}

#[test]
fn identity_circuit_gives_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "id.toml",
        "mode = \"exact\"\n[circuit]\nl = 6\n[circuit.gate]\nkind = \"identity\"\n\
         [partition]\nl_a = 1\nl_d = 1\n[times]\nstart = 1\nstop = 9\n",
    );
    let out = run(&["exact"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 9);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (i + 1).to_string());
        assert!((r[1].parse::<f64>().unwrap() - 3.0).abs() < 1e-12, "{r:?}");
        assert_eq!(r[2], "exact");
    }
}

#[test]
fn full_precision_floats() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "p.toml",
        "[circuit]\nl = 8\n[partition]\nl_a = 1\nl_d = 2\n[predict]\nformula = \"yoshida-kitaev\"\n",
    );
    let out = run(&["predict"], &cfg);
    let (_, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let mantissa = rows[0][1].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.25);
}

const MC: &str = "mode = \"mc\"\nseed = 11\n[circuit]\nl = 4\n[partition]\nl_a = 1\nl_d = 1\n\
                  [times]\nlist = [1, 3, 5]\n[mc]\nsamples = 40\n";

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "mc.toml", MC);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let oa = run(&["mc", "--threads", "1", "--out", a.to_str().unwrap()], &cfg);
    let ob = run(&["mc", "--threads", "2", "--out", b.to_str().unwrap()], &cfg);
    assert!(oa.status.success() && ob.status.success());
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ba, bb);
    let (header, rows) = csv_rows(std::str::from_utf8(&ba).unwrap());
    assert_eq!(header, ["t", "delta", "method", "seed", "std_err"]);
    assert!(rows.iter().all(|r| r[3] == "11" && r[2] == "mc"));

    let other = run(&["mc", "--seed", "12"], &cfg);
    assert_ne!(other.stdout, ba);
}

#[test]
fn seed_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "mc.toml", MC);
    let flag = run(&["mc", "--seed", "5"], &cfg);
    let env = hpcli().args(["mc", "--config"]).arg(&cfg).env("HPLAB_SEED", "5").output().unwrap();
    assert!(flag.status.success());
    assert_eq!(flag.stdout, env.stdout);
    let (_, rows) = csv_rows(&String::from_utf8(env.stdout).unwrap());
    assert_eq!(rows[0][3], "5");
}

#[test]
fn sidecar_records_provenance() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "mc.toml", MC);
    let out = dir.path().join("series.csv");
    assert!(run(&["mc", "--out", out.to_str().unwrap()], &cfg).status.success());
    let meta: Value = serde_json::from_slice(&std::fs::read(dir.path().join("series.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["mode"], "mc");
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["rows"], 3);
    assert_eq!(meta["config"]["mc"]["samples"], 40);
    assert_eq!(meta["points"][0]["samples"], 40);
}

#[test]
fn sweep_keeps_point_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "s.toml",
        "[circuit]\nl = 8\n[predict]\nformula = \"duc-plateau\"\n\
         [sweep]\nbase = \"predict\"\nl_a = [1]\nl_d = [3, 1, 2]\n",
    );
    let out = run(&["sweep", "--threads", "3"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header, ["t", "delta", "method", "seed", "l", "l_a", "l_d"]);
    let l_ds: Vec<&str> = rows.iter().map(|r| r[6].as_str()).collect();
    assert_eq!(l_ds, ["3", "1", "2"]);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.75);
}

#[test]
fn membrane_series_and_fit() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "fw.toml",
        "[circuit]\nl = 20\n[sweep]\nbase = \"front-width\"\nl = [20, 40, 80]\n",
    );
    let csv = dir.path().join("fw.csv");
    let out = run(&["sweep", "--out", csv.to_str().unwrap()], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = hpcli().args(["fit", "--x", "l", "--y", "width", "--input"]).arg(&csv).output().unwrap();
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let v: Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert_eq!(v["fit"]["points"], 3);
    let a = v["fit"]["exponent"].as_f64().unwrap();
    assert!(a > 0.0 && a < 1.0, "{a}");

    let mem = write(
        &dir,
        "m.toml",
        "[circuit]\nl = 8\n[partition]\nl_a = 1\nl_d = 1\n[times]\nlist = [7, 15]\n",
    );
    let out = run(&["membrane"], &mem);
    let (_, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let d: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((d[0] - 2.3708544).abs() < 1e-7, "{d:?}");
    assert!((d[1] - 0.940333937689).abs() < 1e-10, "{d:?}");
}

#[test]
fn fit_exact_square_with_filter() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "sq.csv", "x,y,tag\n1,1,a\n2,4,a\n3,9,a\n4,100,b\n");
    let out = hpcli()
        .args(["fit", "--x", "x", "--y", "y", "--filter", "tag=a", "--input"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["fit"]["exponent"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["fit"]["r2"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let bad = hpcli().args(["fit", "--x", "x", "--y", "nope", "--input"]).arg(&csv).output().unwrap();
    assert_eq!(error_json(&bad)["error"]["kind"], "config");
    let two = hpcli()
        .args(["fit", "--x", "x", "--y", "y", "--filter", "tag=b", "--input"])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(error_json(&two)["error"]["kind"], "invalid-input");
}

#[test]
fn errors_are_machine_readable() {
    let dir = TempDir::new().unwrap();
    let typo = write(&dir, "typo.toml", "[circuit]\nl = 8\nboundry = \"open\"\n");
    let e = error_json(&run(&["exact"], &typo));
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("boundry"));

    let mismatch = write(&dir, "mm.toml", "mode = \"mc\"\n");
    assert_eq!(error_json(&run(&["exact"], &mismatch))["error"]["kind"], "config");

    let big = write(
        &dir,
        "big.toml",
        "[circuit]\nl = 16\n[circuit.gate]\nkind = \"swap\"\n[partition]\nl_a = 1\nl_d = 1\n[times]\nlist = [1]\n",
    );
    let out = run(&["exact"], &big);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "capacity");

    let unseeded = write(
        &dir,
        "r.toml",
        "[circuit]\nl = 4\n[circuit.gate]\nkind = \"random\"\n[partition]\nl_a = 1\nl_d = 1\n[times]\nlist = [1]\n",
    );
    let e = error_json(&run(&["exact"], &unseeded));
    assert!(e["error"]["message"].as_str().unwrap().contains("seed"));
    assert!(run(&["exact", "--seed", "3"], &unseeded).status.success());

    let even = write(&dir, "even.toml", "[circuit]\nl = 8\n[partition]\nl_a = 1\nl_d = 1\n[times]\nlist = [4]\n");
    assert_eq!(error_json(&run(&["membrane"], &even))["error"]["kind"], "config");

    let bad_part = write(&dir, "bp.toml", "[circuit]\nl = 4\n[partition]\nl_a = 3\nl_d = 3\n[times]\nlist = [1]\n");
    assert_eq!(error_json(&run(&["membrane"], &bad_part))["error"]["kind"], "invalid-input");

    let missing = hpcli().args(["exact", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(error_json(&missing)["error"]["kind"], "io");
}
