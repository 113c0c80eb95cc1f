//! The `gklab` binary: exit codes, output formats and seed handling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const IID: &str = r#"{"kind": "iid_gaussian", "covariance": [[1, 0], [0, 1]]}"#;
const MA1: &str = r#"{"kind": "ma1", "theta": [[0, 1], [0, 0]]}"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(format!("{name}.json"));
        fs::write(&p, body).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str], env_seed: Option<&str>) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gklab"));
        cmd.args(args).env_remove("GKLAB_SEED");
        if let Some(s) = env_seed {
            cmd.env("GKLAB_SEED", s);
        }
        cmd.output().unwrap()
    }

    fn gklab(&self, cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
        let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        self.run(&args, None)
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tensor(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).unwrap()
}

#[test]
fn invalid_configs_exit_2_with_one_line() {
    let cases = [
        "not json",
        "{}",
        r#"{"process": {"kind": "brownian"}, "flavor": "ito", "N": 8, "M": 4}"#,
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N": 8, "M": 4, "extra": 1}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "stratonovich", "N": 8, "M": 4}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N": 0, "M": 4}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N": 8, "M": 1}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N": 8, "N_grid": [8, 16], "M": 4}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N_grid": [16, 8], "M": 4}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N_grid": [], "M": 4}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N": -3, "M": 4}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N": 8, "M": 4, "z_max": 0}}"#),
        &format!(r#"{{"process": {IID}, "flavor": "ito", "N": 8, "M": 4, "h": 0.1}}"#),
        r#"{"process": {"kind": "ou", "drift": [[1, 0], [0, 1]]}, "flavor": "continuous", "N": 8, "M": 4}"#,
        r#"{"process": {"kind": "ou", "drift": [[1, 0], [0, 1]]}, "flavor": "continuous", "N": 8, "M": 4, "h": -1}"#,
        r#"{"process": {"kind": "iid_gaussian", "covariance": [[1, 0]]}, "flavor": "ito", "N": 8, "M": 4}"#,
        r#"{"process": {"kind": "ma1", "theta": [[0, 1], [0, 0]], "mu": 1}, "flavor": "ito", "N": 8, "M": 4}"#,
        r#"{"process": {"kind": "doubling_map", "frequencies": []}, "flavor": "wz", "N": 8, "M": 4}"#,
        r#"{"process": {"kind": "regenerative", "dimension": 2, "epoch_lengths": [{"length": 2, "probability": 0.5}], "step_rule": "shared_sign_cycle"}, "flavor": "ito", "N": 8, "M": 4}"#,
        r#"{"process": {"kind": "suspension", "base": {"kind": "ma1", "theta": [[0, 1], [0, 0]]}, "roof": {"heights": [0], "probabilities": [1]}}, "flavor": "continuous", "N": 8, "M": 4, "h": 0.5}"#,
    ];
    assert_eq!(cases.len(), 20);
    let sb = Sandbox::new();
    for (k, body) in cases.iter().enumerate() {
        let cfg = sb.config(&format!("bad{k}"), body);
        let out = sb.gklab("estimate", &cfg, &sb.out("bad"), &["--seed", "1"]);
        let stderr = String::from_utf8(out.stderr).unwrap();
        assert_eq!(out.status.code(), Some(2), "case {k}: {body}\n{stderr}");
        assert_eq!(stderr.trim_end().lines().count(), 1, "case {k}: {stderr}");
    }
}

#[test]
fn precondition_failures_exit_3() {
    let sb = Sandbox::new();
    let unstable = sb.config(
        "unstable",
        r#"{"process": {"kind": "ou", "drift": [[1, 0], [0, -1]]}, "flavor": "continuous", "h": 0.1}"#,
    );
    assert_eq!(sb.gklab("oracle", &unstable, &sb.out("o"), &["--seed", "1"]).status.code(), Some(3));
    let mismatch = sb.config("mismatch", &format!(r#"{{"process": {MA1}, "flavor": "continuous", "h": 0.1}}"#));
    assert_eq!(sb.gklab("oracle", &mismatch, &sb.out("o"), &["--seed", "1"]).status.code(), Some(3));
    let not_psd = sb.config(
        "notpsd",
        r#"{"process": {"kind": "iid_gaussian", "covariance": [[1, 0], [0, -1]]}, "flavor": "ito"}"#,
    );
    assert_eq!(sb.gklab("oracle", &not_psd, &sb.out("o"), &["--seed", "1"]).status.code(), Some(3));
}

#[test]
fn oracle_documents() {
    let sb = Sandbox::new();
    let ou = sb.config(
        "ou",
        r#"{"process": {"kind": "ou", "drift": [[1, 0], [0, 1]]}, "flavor": "continuous", "h": 0.01}"#,
    );
    let out = sb.out("ou");
    assert!(sb.gklab("oracle", &ou, &out, &["--seed", "1"]).status.success());
    let doc = read_json(&out.join("oracle.json"));
    assert_eq!(doc["source"], "ou_closed_form");
    assert!(tensor(&doc["correction"]).iter().flatten().all(|x| x.abs() < 1e-15));

    let dm = sb.config(
        "dm",
        r#"{"process": {"kind": "doubling_map", "frequencies": [1, 2]}, "flavor": "wz"}"#,
    );
    let out = sb.out("dm");
    assert!(sb.gklab("oracle", &dm, &out, &["--seed", "1"]).status.success());
    let c = tensor(&read_json(&out.join("oracle.json"))["correction"]);
    assert_eq!(c, vec![vec![0.0, -0.25], vec![0.25, 0.0]]);

    let zero = sb.config(
        "zero",
        r#"{"process": {"kind": "ma1", "theta": [[0, 0], [0, 0]]}, "flavor": "ito"}"#,
    );
    let out = sb.out("zero");
    assert!(sb.gklab("oracle", &zero, &out, &["--seed", "1", "--format", "json"]).status.success());
    let doc = read_json(&out.join("oracle.json"));
    assert_eq!(tensor(&doc["sigma"]), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert_eq!(tensor(&doc["gamma"]), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    assert!(!out.join("oracle.csv").exists());
}

#[test]
fn estimate_and_correlogram_csv() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "est",
        &format!(r#"{{"process": {MA1}, "flavor": "ito", "N": 64, "M": 50, "seed": 3}}"#),
    );
    let out = sb.out("est");
    assert!(sb.gklab("estimate", &cfg, &out, &[]).status.success());
    let csv = fs::read_to_string(out.join("estimate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("i,j,quantity,estimate,se"));
    assert_eq!(csv.lines().count(), 9);
    assert!(!csv.contains('\r'));
    let doc = read_json(&out.join("estimate.json"));
    assert_eq!(doc["estimate"]["replicas"], 50);
    assert_eq!(doc["estimate"]["flavor"], "ito");

    let grid = sb.config(
        "grid",
        &format!(r#"{{"process": {MA1}, "flavor": "wz", "N_grid": [16, 32], "M": 20, "seed": 3}}"#),
    );
    let out = sb.out("grid");
    assert!(sb.gklab("estimate", &grid, &out, &["--format", "csv"]).status.success());
    let csv = fs::read_to_string(out.join("estimate.csv")).unwrap();
    assert!(csv.starts_with("N,i,j,quantity,estimate,se\n"));
    assert_eq!(csv.lines().count(), 17);

    let corr = sb.config("corr", &format!(r#"{{"process": {MA1}, "n_max": 3, "length": 20000, "seed": 9}}"#));
    let out = sb.out("corr");
    assert!(sb.gklab("correlogram", &corr, &out, &[]).status.success());
    let csv = fs::read_to_string(out.join("correlogram.csv")).unwrap();
    assert!(csv.starts_with("n,i,j,delta_hat,delta_exact\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 4);
    let row = csv.lines().find(|l| l.starts_with("1,1,0,")).unwrap();
    let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields[4], 1.0);
    assert!((fields[3] - 1.0).abs() < 0.05);

    let regen = sb.config(
        "regen",
        r#"{"process": {"kind": "regenerative", "dimension": 1, "epoch_lengths": [{"length": 2, "probability": 1}], "step_rule": "independent_gaussian"}, "n_max": 2, "length": 100, "seed": 1}"#,
    );
    let out = sb.out("regen");
    assert!(sb.gklab("correlogram", &regen, &out, &[]).status.success());
    assert!(fs::read_to_string(out.join("correlogram.csv")).unwrap().starts_with("n,i,j,delta_hat\n"));
}

#[test]
fn compare_exit_codes_and_round_trip() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "cmp",
        &format!(r#"{{"process": {IID}, "flavor": "wz", "N": 256, "M": 400, "seed": 5}}"#),
    );
    let direct = sb.out("direct");
    let res = sb.gklab("compare", &cfg, &direct, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));

    let oracle_out = sb.out("oracle");
    assert!(sb.gklab("oracle", &cfg, &oracle_out, &[]).status.success());
    let oracle_file = oracle_out.join("oracle.json");
    let via_file = sb.out("via_file");
    let res = sb.gklab("compare", &cfg, &via_file, &["--oracle", oracle_file.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(
        fs::read(direct.join("compare.csv")).unwrap(),
        fs::read(via_file.join("compare.csv")).unwrap()
    );

    // A deliberately wrong oracle must fail statistically, not as an error.
    let mut doc = read_json(&oracle_file);
    doc["gamma"] = serde_json::json!([[2.0, 0.0], [0.0, 2.0]]);
    let wrong = sb.dir.path().join("wrong.json");
    fs::write(&wrong, doc.to_string()).unwrap();
    let res = sb.gklab("compare", &cfg, &sb.out("wrong"), &["--oracle", wrong.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));

    // An oracle for another flavor is a precondition failure.
    doc["flavor"] = "ito".into();
    fs::write(&wrong, doc.to_string()).unwrap();
    let res = sb.gklab("compare", &cfg, &sb.out("flavor"), &["--oracle", wrong.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn ou_compare_with_bias_budget() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "ou",
        r#"{"process": {"kind": "ou", "drift": [[1, 1], [-1, 1]]}, "flavor": "continuous", "N": 200, "M": 400, "h": 0.02, "bias_coefficient": 3.4e-6, "seed": 8}"#,
    );
    let out = sb.out("ou");
    let res = sb.gklab("compare", &cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.starts_with("i,j,quantity,estimate,se,oracle,z\n"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn seed_precedence() {
    let sb = Sandbox::new();
    let body = |seed: &str| format!(r#"{{"process": {MA1}, "flavor": "ito", "N": 32, "M": 10{seed}}}"#);
    let with_seed = sb.config("with", &body(r#", "seed": 4"#));
    let without = sb.config("without", &body(""));
    let run = |cfg: &Path, name: &str, extra: &[&str], env: Option<&str>| {
        let out = sb.out(name);
        let mut args = vec!["estimate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let res = sb.run(&args, env);
        (res.status.code(), fs::read(out.join("estimate.csv")).ok())
    };
    let (code, flag) = run(&with_seed, "flag", &["--seed", "9"], Some("4"));
    assert_eq!(code, Some(0));
    let (_, env9) = run(&without, "env9", &[], Some("9"));
    assert_eq!(flag, env9);
    let (_, cfg4) = run(&with_seed, "cfg4", &[], Some("9"));
    let (_, env4) = run(&without, "env4", &[], Some("4"));
    assert_eq!(cfg4, env4);
    assert_ne!(cfg4, flag);
    let (code, _) = run(&without, "none", &[], None);
    assert_eq!(code, Some(2));
    let (code, _) = run(&without, "garbled", &[], Some("abc"));
    assert_eq!(code, Some(2));
    // The oracle draws nothing and runs without a seed.
    let out = sb.out("oracle");
    let res = sb.run(&["oracle", "--config", without.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(0));
    assert!(out.join("oracle.json").exists());
}

#[test]
fn flags_override_config_and_output_is_stable() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "ovr",
        &format!(r#"{{"process": {MA1}, "flavor": "wz", "N_grid": [8, 16], "M": 10, "seed": 1}}"#),
    );
    let a = sb.out("a");
    let b = sb.out("b");
    let args = ["--N", "32", "--M", "12", "--workers", "1"];
    assert!(sb.gklab("estimate", &cfg, &a, &args).status.success());
    assert!(sb.gklab("estimate", &cfg, &b, &args).status.success());
    let doc = read_json(&a.join("estimate.json"));
    assert_eq!(doc["estimate"]["scale"], 32);
    assert_eq!(doc["estimate"]["replicas"], 12);
    for f in ["estimate.json", "estimate.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}
