//! The `gklab` command line: JSON experiment configs in, JSON and CSV
//! reports out.
//!
//! Exit codes: 0 pass, 1 statistical failure, 2 configuration error,
//! 3 precondition failure (spectral gap, positivity, kind/flavor mismatch).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimators::{
    compare, convergence_study, empirical_delta, ComparisonReport, EstimateOptions, MomentEstimate,
};
use crate::lift::Flavor;
use crate::noise::{exact_delta, generate_discrete, ProcessSpec};
use crate::oracles::{target_for, Target};
use crate::rng::ReplicaKey;
use crate::tensor::{Characteristics, Tensor2};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_STAT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

/// Environment variable consulted when neither `--seed` nor the config
/// gives a seed.
pub const SEED_ENV: &str = "GKLAB_SEED";

const DEFAULT_N_MAX: usize = 20;
const DEFAULT_LENGTH: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "gklab", version, about = "Green-Kubo characteristics of rough-path lifts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the config and GKLAB_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Scale N; replaces `N` or `N_grid` from the config.
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,

    /// Replica count M.
    #[arg(long = "M", global = true)]
    pub m: Option<usize>,

    /// Worker threads for replica generation.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, global = true, default_value_t = Format::Both)]
    pub format: Format,

    /// Oracle document written by `gklab oracle`, used by `compare` in place
    /// of the built-in oracle.
    #[arg(long, global = true)]
    pub oracle: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Exact characteristics for the configured process and flavor.
    Oracle,
    /// Monte Carlo estimate of the lift second moments.
    Estimate,
    /// Estimate and compare against the oracle; exit 1 on failure.
    Compare,
    /// Empirical correlogram of one long trajectory.
    Correlogram,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Json
    }
}

fn default_z_max() -> f64 {
    3.0
}

/// Experiment description read from `--config`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    #[serde(default)]
    pub flavor: Option<Flavor>,
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    #[serde(rename = "N_grid", default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Largest lag for the correlogram.
    #[serde(default)]
    pub n_max: Option<usize>,
    /// Trajectory length for the correlogram.
    #[serde(default)]
    pub length: Option<usize>,
    /// Sampling step, continuous flavor only.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    /// `C` in the per-entry bias budget `C·h` of the continuous flavor.
    #[serde(default)]
    pub bias_coefficient: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Shape checks on the config; model preconditions are left to the
    /// oracle and generator code.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.into()));
        if self.n.is_some() && self.n_grid.is_some() {
            return cfg("give either N or N_grid, not both");
        }
        if self.n == Some(0) {
            return cfg("N must be at least 1");
        }
        if let Some(grid) = &self.n_grid {
            if grid.is_empty() {
                return cfg("N_grid is empty");
            }
            if grid.contains(&0) || grid.windows(2).any(|w| w[0] >= w[1]) {
                return cfg("N_grid must be positive and strictly ascending");
            }
        }
        if matches!(self.m, Some(m) if m < 2) {
            return cfg("M must be at least 2");
        }
        if !(self.z_max.is_finite() && self.z_max > 0.0) {
            return cfg("z_max must be positive");
        }
        if !(self.bias_coefficient.is_finite() && self.bias_coefficient >= 0.0) {
            return cfg("bias_coefficient must be non-negative");
        }
        if self.n_max == Some(0) {
            return cfg("n_max must be at least 1");
        }
        match (self.flavor, self.h) {
            (Some(Flavor::Continuous), None) => return cfg("continuous flavor needs h"),
            (Some(Flavor::Ito | Flavor::Wz), Some(_)) => return cfg("h applies to the continuous flavor only"),
            (_, Some(h)) if !(h.is_finite() && h > 0.0) => return cfg("h must be positive"),
            _ => {}
        }
        match self.process.validate() {
            Err(e @ Error::Config(_)) => Err(e),
            _ => Ok(()),
        }
    }
}

/// The document written by `gklab oracle` and accepted by `--oracle`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDocument {
    pub kind: String,
    pub flavor: Flavor,
    pub source: String,
    pub sigma: Tensor2,
    pub gamma: Tensor2,
    pub correction: Tensor2,
}

impl OracleDocument {
    fn from_target(kind: &str, t: &Target) -> Self {
        Self {
            kind: kind.to_string(),
            flavor: t.flavor,
            source: t.source.to_string(),
            sigma: t.chars.sigma.clone(),
            gamma: t.chars.gamma.clone(),
            correction: t.chars.strat_area_correction(),
        }
    }

    fn into_target(self) -> Result<Target> {
        Ok(Target {
            flavor: self.flavor,
            chars: Characteristics::new(self.sigma, self.gamma)?,
            source: "oracle file",
        })
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_PRECONDITION,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. `env_seed` stands in for `GKLAB_SEED`.
pub fn run_from<I, T>(args: I, env_seed: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, env_seed) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run_from(std::env::args_os(), std::env::var(SEED_ENV).ok())
}

struct Resolved {
    config: ExperimentConfig,
    seed: Option<u64>,
    out: PathBuf,
    workers: Option<usize>,
}

fn resolve(cli: &Cli, env_seed: Option<String>) -> Result<Resolved> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(n) = cli.n {
        config.n = Some(n);
        config.n_grid = None;
    }
    if cli.m.is_some() {
        config.m = cli.m;
    }
    config.validate()?;
    let seed = match (cli.seed, config.seed, env_seed) {
        (Some(s), _, _) | (None, Some(s), _) => Some(s),
        (None, None, Some(s)) => Some(
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} is not an unsigned integer: `{s}`")))?,
        ),
        (None, None, None) => None,
    };
    if cli.workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Resolved {
        config,
        seed,
        out,
        workers: cli.workers,
    })
}

impl Resolved {
    /// The oracle is deterministic; every sampling command needs a seed.
    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::Config(format!("no seed: pass --seed, set `seed` in the config or {SEED_ENV}"))
        })
    }
}

fn execute(cli: &Cli, env_seed: Option<String>) -> Result<i32> {
    let r = resolve(cli, env_seed)?;
    if !matches!(cli.command, Command::Oracle) {
        r.seed()?;
    }
    fs::create_dir_all(&r.out)?;
    match cli.command {
        Command::Oracle => cmd_oracle(&r, cli.format),
        Command::Estimate => cmd_estimate(&r, cli.format),
        Command::Compare => cmd_compare(&r, cli.format, cli.oracle.as_deref()),
        Command::Correlogram => cmd_correlogram(&r, cli.format),
    }
}

fn require_flavor(c: &ExperimentConfig) -> Result<Flavor> {
    c.flavor
        .ok_or_else(|| Error::Config("`flavor` is required for this command".into()))
}

fn require_m(c: &ExperimentConfig) -> Result<usize> {
    c.m.ok_or_else(|| Error::Config("`M` is required for this command".into()))
}

fn n_list(c: &ExperimentConfig) -> Result<Vec<usize>> {
    match (&c.n, &c.n_grid) {
        (Some(n), None) => Ok(vec![*n]),
        (None, Some(g)) => Ok(g.clone()),
        _ => Err(Error::Config("`N` or `N_grid` is required for this command".into())),
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable document");
    s.push('\n');
    s
}

fn cmd_oracle(r: &Resolved, format: Format) -> Result<i32> {
    let flavor = require_flavor(&r.config)?;
    let target = target_for(&r.config.process, flavor)?;
    let doc = OracleDocument::from_target(r.config.process.kind_name(), &target);
    if format.json() {
        write_text(&r.out, "oracle.json", &to_json(&doc))?;
    }
    if format.csv() {
        let mut csv = String::from("i,j,quantity,oracle\n");
        for (q, t) in [("sigma", &doc.sigma), ("gamma", &doc.gamma), ("correction", &doc.correction)] {
            for i in 0..t.dim() {
                for j in 0..t.dim() {
                    let _ = writeln!(csv, "{i},{j},{q},{}", t[(i, j)]);
                }
            }
        }
        write_text(&r.out, "oracle.csv", &csv)?;
    }
    println!("oracle {} {} via {}", doc.kind, flavor, doc.source);
    Ok(EXIT_PASS)
}

fn options(r: &Resolved) -> EstimateOptions {
    EstimateOptions {
        grid_step: r.config.h,
        workers: r.workers,
    }
}

fn estimate_csv(estimates: &[MomentEstimate], with_n: bool) -> String {
    let mut csv = String::from(if with_n {
        "N,i,j,quantity,estimate,se\n"
    } else {
        "i,j,quantity,estimate,se\n"
    });
    for est in estimates {
        for (q, e, s) in [("sigma", &est.sigma_hat, &est.se_sigma), ("gamma", &est.gamma_hat, &est.se_gamma)] {
            for i in 0..e.dim() {
                for j in 0..e.dim() {
                    if with_n {
                        let _ = write!(csv, "{},", est.scale);
                    }
                    let _ = writeln!(csv, "{i},{j},{q},{},{}", e[(i, j)], s[(i, j)]);
                }
            }
        }
    }
    csv
}

fn cmd_estimate(r: &Resolved, format: Format) -> Result<i32> {
    let flavor = require_flavor(&r.config)?;
    let m = require_m(&r.config)?;
    let grid = n_list(&r.config)?;
    let estimates = convergence_study(&r.config.process, flavor, &grid, m, r.seed()?, &options(r))?;
    let single = r.config.n_grid.is_none();
    if format.json() {
        let doc = if single {
            json!({"kind": r.config.process.kind_name(), "estimate": &estimates[0]})
        } else {
            json!({"kind": r.config.process.kind_name(), "estimates": &estimates})
        };
        write_text(&r.out, "estimate.json", &to_json(&doc))?;
    }
    if format.csv() {
        write_text(&r.out, "estimate.csv", &estimate_csv(&estimates, !single))?;
    }
    println!(
        "estimate {} {} at N={:?} with M={m}",
        r.config.process.kind_name(),
        flavor,
        grid
    );
    Ok(EXIT_PASS)
}

fn compare_csv(report: &ComparisonReport) -> String {
    let mut csv = String::from("i,j,quantity,estimate,se,oracle,z\n");
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.i, row.j, row.quantity, row.estimate, row.se, row.oracle, row.z
        );
    }
    csv
}

fn cmd_compare(r: &Resolved, format: Format, oracle_file: Option<&Path>) -> Result<i32> {
    let flavor = require_flavor(&r.config)?;
    let m = require_m(&r.config)?;
    if r.config.n_grid.is_some() {
        return Err(Error::Config("compare takes a single N, not N_grid".into()));
    }
    let n = n_list(&r.config)?[0];
    let target = match oracle_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<OracleDocument>(&text)
                .map_err(|e| Error::Config(format!("oracle file: {e}")))?
                .into_target()?
        }
        None => target_for(&r.config.process, flavor)?,
    };
    let est = convergence_study(&r.config.process, flavor, &[n], m, r.seed()?, &options(r))?.remove(0);
    let budget = r
        .config
        .h
        .filter(|_| r.config.bias_coefficient > 0.0)
        .map(|h| {
            let d = est.sigma_hat.dim();
            let mut b = Tensor2::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    b[(i, j)] = r.config.bias_coefficient * h;
                }
            }
            b
        });
    let report = compare(&est, &target, r.config.z_max, budget.as_ref())?;
    if format.json() {
        let doc = json!({
            "kind": r.config.process.kind_name(),
            "oracle_source": target.source,
            "report": &report,
        });
        write_text(&r.out, "compare.json", &to_json(&doc))?;
    }
    if format.csv() {
        write_text(&r.out, "compare.csv", &compare_csv(&report))?;
    }
    println!(
        "compare {} {}: max |z| = {:.3} (z_max {}) {}",
        r.config.process.kind_name(),
        flavor,
        report.max_abs_z,
        report.z_max,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(if report.pass { EXIT_PASS } else { EXIT_STAT_FAIL })
}

fn cmd_correlogram(r: &Resolved, format: Format) -> Result<i32> {
    let spec = &r.config.process;
    let n_max = r.config.n_max.unwrap_or(DEFAULT_N_MAX);
    let length = r.config.length.unwrap_or(DEFAULT_LENGTH);
    if length < 4 * n_max {
        return Err(Error::Config(format!(
            "length {length} is below 4·n_max = {}",
            4 * n_max
        )));
    }
    let traj = generate_discrete(spec, length, ReplicaKey::new(r.seed()?, 0))?;
    let corr = empirical_delta(&traj, n_max)?;
    let exact = exact_delta(spec, n_max).ok();
    let d = corr.dim();
    if format.csv() {
        let mut csv = String::from(if exact.is_some() {
            "n,i,j,delta_hat,delta_exact\n"
        } else {
            "n,i,j,delta_hat\n"
        });
        for (n, t) in corr.deltas.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    let _ = write!(csv, "{n},{i},{j},{}", t[(i, j)]);
                    if let Some(ex) = &exact {
                        let _ = write!(csv, ",{}", ex.deltas[n][(i, j)]);
                    }
                    csv.push('\n');
                }
            }
        }
        write_text(&r.out, "correlogram.csv", &csv)?;
    }
    if format.json() {
        let doc = json!({
            "kind": spec.kind_name(),
            "length": length,
            "delta_hat": &corr.deltas,
            "delta_exact": exact.as_ref().map(|e| &e.deltas),
        });
        write_text(&r.out, "correlogram.json", &to_json(&doc))?;
    }
    println!("correlogram {} n_max={n_max} length={length}", spec.kind_name());
    Ok(EXIT_PASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> String {
        format!(r#"{{"process": {{"kind": "iid_gaussian", "covariance": [[1, 0], [0, 1]]}}{extra}}}"#)
    }

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(&config(r#", "flavor": "ito", "N": 8, "M": 4"#)).unwrap();
        c.validate().unwrap();
        assert_eq!(c.z_max, 3.0);
        assert_eq!(c.flavor, Some(Flavor::Ito));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        assert!(ExperimentConfig::from_json(&config(r#", "colour": 1"#)).is_err());
        for bad in [
            r#", "N": 0"#,
            r#", "M": 1"#,
            r#", "N": 4, "N_grid": [8]"#,
            r#", "N_grid": [8, 4]"#,
            r#", "flavor": "ito", "h": 0.1"#,
            r#", "flavor": "continuous""#,
            r#", "z_max": -1"#,
        ] {
            let c = ExperimentConfig::from_json(&config(bad)).unwrap();
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::SpectralGap("x".into())), EXIT_PRECONDITION);
        assert_eq!(
            exit_code(&Error::FlavorMismatch {
                estimate: "ito".into(),
                oracle: "wz".into()
            }),
            EXIT_PRECONDITION
        );
    }
}
