//! Command-line driver: every run is a pure function of a [`RunConfig`].
//!
//! Data payloads (CSV/JSON) are byte-reproducible; wall-clock time only
//! appears in the manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::disenib::{default_cardinalities, optimize_disenib};
use crate::error::Error;
use crate::instances::InstanceSpec;
use crate::lagrangian::{beta_at_compression, default_betas, linear_grid, log_grid, sweep_beta, IBPoint, SurrogateFn};
use crate::optim::OptimizerConfig;
use crate::prob::JointXY;
use crate::variational::bound_suite;

pub const SCHEMA_VERSION: u32 = 1;
pub const SWEEP_CSV_HEADER: &str = "beta,i_xt_nats,i_ty_nats,objective,converged,restarts_used";
pub const CURVE_CSV_HEADER: &str = "i_xt_nats,i_ty_nats,beta";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid argument: {0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            3 => "numerical",
            _ => "validation",
        }
    }

    /// Single-line JSON diagnostic.
    pub fn to_diagnostic(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "iblab", version, about = "Exact discrete information-bottleneck laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic joint distribution as JSON.
    Gen(CommonArgs),
    /// Solve the IB Lagrangian over a beta grid (or search for a compression level).
    Sweep(CommonArgs),
    /// Optimize the disentangled objective and report consistency.
    Disenib(CommonArgs),
    /// Trace the IB curve with a convex surrogate.
    Curve(CommonArgs),
    /// Run the variational-bound sandwich and gap-identity suite.
    Check(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Path to a joint JSON file, or a spec such as `noisy_mod:8:2:0.2`.
    #[arg(long)]
    pub instance: Option<String>,
    /// Comma-separated list, or `log:COUNT:LO:HI` / `lin:COUNT:LO:HI`.
    #[arg(long)]
    pub betas: Option<String>,
    /// identity | square | power:U | exp:S
    #[arg(long)]
    pub surrogate: Option<String>,
    #[arg(long)]
    pub card_t: Option<usize>,
    #[arg(long)]
    pub card_s: Option<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Consistency threshold in nats.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Search for the beta giving I(X;T) close to this value instead of sweeping.
    #[arg(long)]
    pub target_ixt: Option<f64>,
    /// Number of random tuples per `check` run.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Include learned encoders in the `disenib` report.
    #[arg(long)]
    pub with_encoders: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Show human-readable summaries in bits (data files stay in nats).
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Gen,
    Sweep,
    Disenib,
    Curve,
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Spec(InstanceSpec),
    Path(PathBuf),
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    pub subcommand: RunKind,
    pub instance: InstanceSource,
    pub surrogate: SurrogateFn,
    pub betas: Vec<f64>,
    pub card_t: Option<usize>,
    pub card_s: Option<usize>,
    pub optimizer: OptimizerConfig,
    pub epsilon: f64,
    pub target_ixt: Option<f64>,
    pub trials: usize,
    pub with_encoders: bool,
    pub format: OutputFormat,
    pub bits: bool,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

/// Parses the `--betas` argument.
pub fn parse_betas(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse betas '{s}'"));
    let grid = |rest: &str, log: bool| -> Result<Vec<f64>, CliError> {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let count: usize = parts[0].parse().map_err(|_| bad())?;
        let lo: f64 = parts[1].parse().map_err(|_| bad())?;
        let hi: f64 = parts[2].parse().map_err(|_| bad())?;
        Ok(if log {
            log_grid(count, lo, hi)?
        } else {
            linear_grid(count, lo, hi)?
        })
    };
    if let Some(rest) = s.strip_prefix("log:") {
        return grid(rest, true);
    }
    if let Some(rest) = s.strip_prefix("lin:") {
        return grid(rest, false);
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

impl RunConfig {
    pub fn from_args(kind: RunKind, a: &CommonArgs) -> Result<Self, CliError> {
        let instance = match &a.instance {
            Some(s) if Path::new(s).exists() => InstanceSource::Path(PathBuf::from(s)),
            Some(s) => InstanceSource::Spec(InstanceSpec::parse(s)?),
            None => InstanceSource::Spec(match kind {
                RunKind::Sweep | RunKind::Curve => InstanceSpec::NoisyMod { n: 8, k: 2, noise: 0.2 },
                RunKind::Check => InstanceSpec::RandomJoint { n: 6, k: 3, seed: a.seed },
                RunKind::Gen | RunKind::Disenib => InstanceSpec::DeterministicMod { n: 16, k: 4 },
            }),
        };
        let surrogate = match &a.surrogate {
            Some(s) => s.parse()?,
            None if kind == RunKind::Curve => SurrogateFn::Square,
            None => SurrogateFn::Identity,
        };
        let betas = match &a.betas {
            Some(s) => parse_betas(s)?,
            None => default_betas(),
        };
        let mut optimizer = if kind == RunKind::Disenib {
            OptimizerConfig::disenib()
        } else {
            OptimizerConfig::default()
        };
        optimizer.seed = a.seed;
        if let Some(r) = a.restarts {
            optimizer.restarts = r;
        }
        if let Some(m) = a.max_iters {
            optimizer.max_iters = m;
        }
        if let Some(s) = a.step_size {
            optimizer.step_size = s;
        }
        optimizer.validate()?;
        if !(a.epsilon > 0.0) {
            return Err(CliError::Usage(format!("epsilon must be positive, got {}", a.epsilon)));
        }
        let format = a.format.unwrap_or(match kind {
            RunKind::Sweep | RunKind::Curve => OutputFormat::Csv,
            RunKind::Gen | RunKind::Disenib | RunKind::Check => OutputFormat::Json,
        });
        Ok(RunConfig {
            schema: SCHEMA_VERSION,
            subcommand: kind,
            instance,
            surrogate,
            betas,
            card_t: a.card_t,
            card_s: a.card_s,
            optimizer,
            epsilon: a.epsilon,
            target_ixt: a.target_ixt,
            trials: a.trials,
            with_encoders: a.with_encoders,
            format,
            bits: a.bits,
            out: a.out.clone(),
            manifest: a.manifest.clone(),
        })
    }

    pub fn master_seed(&self) -> u64 {
        self.optimizer.seed
    }

    /// Manifest path: explicit, or `<out>.manifest.json` next to the output.
    pub fn manifest_path(&self) -> Option<PathBuf> {
        self.manifest.clone().or_else(|| {
            self.out.as_ref().map(|o| {
                let mut s = o.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            })
        })
    }
}

/// Result of a run before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The data file contents.
    pub payload: String,
    /// Human-readable lines for stderr.
    pub notes: Vec<String>,
    /// Plain-text table for stderr (`check` only).
    pub table: Option<String>,
    pub manifest: Value,
    /// 0 success, 2 verification failure, 3 numerical failure.
    pub exit_code: i32,
}

/// Rounds to 9 significant digits and prints the shortest representation.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded.abs() < 1e-4 || rounded.abs() >= 1e15 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Rounds every non-integer number in a JSON tree to 9 significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            if let Some(f) = n.as_f64() {
                *v = json!(round_sig9(f));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn to_pretty(mut v: Value) -> String {
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

fn load_instance(src: &InstanceSource) -> Result<JointXY, CliError> {
    match src {
        InstanceSource::Spec(spec) => Ok(spec.build()?),
        InstanceSource::Path(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: p.clone(), source })
        }
    }
}

fn input_hash(data: &JointXY) -> String {
    let canonical = serde_json::to_string(data).expect("joint serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn unit(bits: bool) -> (&'static str, f64) {
    if bits {
        ("bits", 1.0 / std::f64::consts::LN_2)
    } else {
        ("nats", 1.0)
    }
}

fn sweep_csv(points: &[IBPoint]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for p in points {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_sig9(p.beta),
            fmt_sig9(p.i_xt),
            fmt_sig9(p.i_ty),
            fmt_sig9(p.objective),
            p.converged,
            p.restarts_used
        )
        .expect("writing to a String");
    }
    s
}

fn points_json(points: &[IBPoint]) -> Value {
    json!({ "schema": SCHEMA_VERSION, "points": points })
}

/// Executes a run without touching the filesystem (except reading inputs).
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let data = load_instance(&cfg.instance)?;
    let (u_name, u_scale) = unit(cfg.bits);
    let mut notes = Vec::new();
    let mut table = None;
    let mut exit_code = 0;
    let mut extra = json!({});

    let payload = match cfg.subcommand {
        RunKind::Gen => {
            notes.push(format!(
                "H(X)={} H(Y)={} I(X;Y)={} {u_name}",
                fmt_sig9(data.h_x() * u_scale),
                fmt_sig9(data.h_y() * u_scale),
                fmt_sig9(data.i_xy() * u_scale)
            ));
            let mut s = serde_json::to_string_pretty(&data).expect("joint serializes");
            s.push('\n');
            s
        }
        RunKind::Sweep => {
            let card_t = cfg.card_t.unwrap_or(data.n_x());
            let points = match cfg.target_ixt {
                None => sweep_beta(&data, &cfg.betas, cfg.surrogate, card_t, &cfg.optimizer)?,
                Some(target) => {
                    let lo = cfg.betas.first().copied().unwrap_or(1e-3);
                    let hi = cfg.betas.last().copied().unwrap_or(1.0);
                    let search =
                        beta_at_compression(&data, target, cfg.surrogate, card_t, &cfg.optimizer, lo, hi)?;
                    if !search.reached {
                        notes.push(format!(
                            "compression target {} not reached; closest I(X;T)={} at beta={}",
                            fmt_sig9(target),
                            fmt_sig9(search.point.i_xt),
                            fmt_sig9(search.beta)
                        ));
                        exit_code = 3;
                    }
                    extra = json!({ "compression_search": {
                        "target_ixt": target, "reached": search.reached, "steps": search.steps } });
                    vec![search.point]
                }
            };
            match cfg.format {
                OutputFormat::Json => to_pretty(points_json(&points)),
                _ => sweep_csv(&points),
            }
        }
        RunKind::Curve => {
            if data.h_y_given_x() < 1e-9 {
                notes.push(
                    "warning: labels are a deterministic function of the input; the IB curve is piecewise linear \
                     and Lagrangian solutions jump between its corners"
                        .to_string(),
                );
            }
            let card_t = cfg.card_t.unwrap_or(data.n_x());
            let mut points = sweep_beta(&data, &cfg.betas, cfg.surrogate, card_t, &cfg.optimizer)?;
            points.sort_by(|a, b| a.i_xt.total_cmp(&b.i_xt).then(a.beta.total_cmp(&b.beta)));
            match cfg.format {
                OutputFormat::Json => to_pretty(points_json(&points)),
                _ => {
                    let mut s = String::from(CURVE_CSV_HEADER);
                    s.push('\n');
                    for p in &points {
                        writeln!(s, "{},{},{}", fmt_sig9(p.i_xt), fmt_sig9(p.i_ty), fmt_sig9(p.beta))
                            .expect("writing to a String");
                    }
                    s
                }
            }
        }
        RunKind::Disenib => {
            let (def_t, def_s) = default_cardinalities(&data);
            let card_t = cfg.card_t.unwrap_or(def_t);
            let card_s = cfg.card_s.unwrap_or(def_s);
            let (params, report) = optimize_disenib(&data, card_t, card_s, &cfg.optimizer, cfg.epsilon)?;
            notes.push(format!(
                "gap={} {u_name} consistent={} I(X;T)={} I(T;Y)={} H(Y)={}",
                fmt_sig9(report.gap * u_scale),
                report.consistent,
                fmt_sig9(report.i_xt * u_scale),
                fmt_sig9(report.i_ty * u_scale),
                fmt_sig9(report.h_y * u_scale)
            ));
            let mut v = json!({
                "schema": SCHEMA_VERSION,
                "h_y": report.h_y,
                "h_x": report.h_x,
                "i_xy": report.i_xy,
                "i_xt": report.i_xt,
                "i_ty": report.i_ty,
                "i_xsy": report.i_xsy,
                "i_st": report.i_st,
                "objective": report.objective,
                "analytic_minimum": report.analytic_minimum,
                "gap": report.gap,
                "gap_vs_i_xy": report.gap_vs_i_xy,
                "reconstruction_shortfall": report.reconstruction_shortfall,
                "epsilon": report.epsilon,
                "consistent": report.consistent,
                "converged": report.converged,
                "card_t": card_t,
                "card_s": card_s,
                "seed": cfg.master_seed(),
                "restarts": cfg.optimizer.restarts,
            });
            if cfg.with_encoders {
                v["encoder_t"] = serde_json::to_value(params.t().encoder()).expect("encoder serializes");
                v["encoder_s"] = serde_json::to_value(params.s().encoder()).expect("encoder serializes");
            }
            to_pretty(v)
        }
        RunKind::Check => {
            let suite = bound_suite(&data, cfg.trials, cfg.master_seed())?;
            if !suite.all_passed() {
                exit_code = 2;
            }
            table = Some(suite.to_table(u_scale, u_name));
            let mut v = serde_json::to_value(&suite).expect("suite serializes");
            v["schema"] = json!(SCHEMA_VERSION);
            v["passed"] = json!(suite.all_passed());
            to_pretty(v)
        }
    };

    let manifest = json!({
        "schema": SCHEMA_VERSION,
        "tool": "iblab",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "master_seed": cfg.master_seed(),
        "input_sha256": input_hash(&data),
        "exit_code": exit_code,
        "details": extra,
        "created_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    Ok(RunOutput {
        payload,
        notes,
        table,
        manifest,
        exit_code,
    })
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and an atomic rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Runs a config end to end and returns the process exit status.
pub fn run(cfg: &RunConfig) -> i32 {
    match run_inner(cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_diagnostic());
            e.exit_code()
        }
    }
}

fn run_inner(cfg: &RunConfig) -> Result<i32, CliError> {
    let out = execute(cfg)?;
    for note in &out.notes {
        eprintln!("{}", json!({ "note": note }));
    }
    if let Some(t) = &out.table {
        eprint!("{t}");
    }
    match &cfg.out {
        Some(path) => write_atomic(path, out.payload.as_bytes())?,
        None => print!("{}", out.payload),
    }
    if let Some(path) = cfg.manifest_path() {
        let mut text = serde_json::to_string_pretty(&out.manifest).expect("json values serialize");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
    }
    Ok(out.exit_code)
}

/// Entry point shared by the binary and tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = match &cli.command {
        Command::Gen(a) => (RunKind::Gen, a),
        Command::Sweep(a) => (RunKind::Sweep, a),
        Command::Disenib(a) => (RunKind::Disenib, a),
        Command::Curve(a) => (RunKind::Curve, a),
        Command::Check(a) => (RunKind::Check, a),
    };
    match RunConfig::from_args(kind, args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("{}", e.to_diagnostic());
            e.exit_code()
        }
    }
}
