//! Command-line runner: configuration, problem selection, CSV traces and
//! exit-code policy. The binary is a thin wrapper around [`main_with`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::als::{run_with, RunOptions, RunTrace, StopRule, Termination, DEFAULT_EPS_RANK};
use crate::diagnostics::{
    assumption_monitors, rate_estimate_available, AngleMode, MonitorReport, MonitorThresholds,
    RateEstimate, DEFAULT_RATE_WINDOW,
};
use crate::error::{AlsError, Result};
use crate::formats::{params_from_doc, ParamDocument};
use crate::gallery::{self, gallery_entry, ProblemInstance, GALLERY};
use crate::tensor::{DenseTensor, SpdOperator};
use crate::verify::{run_verify, VerifyOptions};

/// Directory for CSV output when a run names no explicit path.
pub const OUT_DIR_ENV: &str = "TENSOR_ALS_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_UNBOUNDED: i32 = 3;

pub const CSV_HEADER: &str =
    "sweep,mu,f,decrement,grad_norm,W_rank,resid_orth,param_norm_max,tan_angle,ratio,degenerate";

/// Explicit problem data in place of a gallery label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub params: ParamDocument,
    pub b: Vec<f64>,
    /// Row-major `m_μ × m_μ` factors of a mode-wise operator; identity if absent.
    #[serde(default)]
    pub mode_wise: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
    #[serde(default)]
    pub label: Option<String>,
}

/// One run. Every field is optional so flags can be layered over a file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gallery: Option<String>,
    pub problem: Option<InlineProblem>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub r: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub t: Option<usize>,
    pub init_mix: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub f_tol: Option<f64>,
    pub grad_tol: Option<f64>,
    pub angle_tol: Option<f64>,
    pub eps_rank: Option<f64>,
    pub window: Option<usize>,
    pub angle: Option<String>,
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Fields set in `other` win.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(
            self, other, gallery, problem, tau, lambda, n, seed, r, dims, t, init_mix, max_sweeps,
            f_tol, grad_tol, angle_tol, eps_rank, window, angle, output
        );
    }

    pub fn stop_rule(&self) -> Result<StopRule> {
        let d = StopRule::default();
        StopRule::new(
            self.max_sweeps.unwrap_or(d.max_sweeps()),
            self.f_tol.unwrap_or(d.f_tol()),
            self.grad_tol.unwrap_or(d.grad_tol()),
            self.angle_tol.or(d.angle_tol()),
        )
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        let eps_rank = self.eps_rank.unwrap_or(DEFAULT_EPS_RANK);
        if !(eps_rank >= 0.0) {
            return Err(AlsError::InvalidArgument("eps_rank must be ≥ 0".into()));
        }
        let angle = match &self.angle {
            Some(a) => a.parse()?,
            None => AngleMode::Auto,
        };
        Ok(RunOptions { eps_rank, angle })
    }

    pub fn build_problem(&self) -> Result<ProblemInstance> {
        match (&self.gallery, &self.problem) {
            (Some(label), None) => self.build_gallery(label),
            (None, Some(p)) => build_inline(p),
            (Some(_), Some(_)) => Err(AlsError::InvalidArgument(
                "choose either a gallery label or an inline problem, not both".into(),
            )),
            (None, None) => Err(AlsError::InvalidArgument(
                "no problem selected: pass --gallery or a config with \"problem\"".into(),
            )),
        }
    }

    fn build_gallery(&self, label: &str) -> Result<ProblemInstance> {
        let seed = self.seed.unwrap_or(7);
        let dims = self.dims.clone().unwrap_or_else(|| vec![3, 3, 3]);
        match label {
            "mohlenkamp" => gallery::mohlenkamp_example(self.tau.unwrap_or(0.4)),
            "blambda" => gallery::blambda_with_init(
                self.lambda.unwrap_or(0.46),
                self.n.unwrap_or(8),
                seed,
                self.init_mix.unwrap_or(gallery::BLAMBDA_INIT_MIX),
            ),
            "totally_orthogonal" => gallery::totally_orthogonal(self.r.unwrap_or(2), &dims, seed),
            "desilva_lim" => gallery::desilva_lim(self.n.unwrap_or(2)),
            "counterexample" => gallery::counterexample_problem(),
            "tucker" => {
                let (core, factors) = gallery::tucker_superdiagonal(&dims, self.t.unwrap_or(2), seed)?;
                gallery::tucker_target(&core, &factors)
            }
            other => Err(AlsError::InvalidArgument(format!("unknown gallery label '{other}'"))),
        }
    }
}

fn build_inline(p: &InlineProblem) -> Result<ProblemInstance> {
    let (fmt, init) = params_from_doc(p.params.clone())?;
    let shape = fmt.shape().clone();
    let b = DenseTensor::new(shape.clone(), p.b.clone())?;
    let a = match &p.mode_wise {
        None => SpdOperator::identity(shape.clone()),
        Some(factors) => {
            let mats = factors
                .iter()
                .zip(shape.dims())
                .map(|(f, &m)| {
                    if f.len() != m * m {
                        return Err(AlsError::ShapeMismatch(format!(
                            "mode-wise factor has {} entries, mode size {m}",
                            f.len()
                        )));
                    }
                    Ok(DMatrix::from_row_slice(m, m, f))
                })
                .collect::<Result<Vec<_>>>()?;
            SpdOperator::mode_wise(shape.clone(), mats)?
        }
    };
    let reference = p
        .reference
        .as_ref()
        .map(|r| DenseTensor::new(shape.clone(), r.clone()))
        .transpose()?;
    let label = p.label.clone().unwrap_or_else(|| "inline".into());
    ProblemInstance::new(a, b, fmt, init, reference, label)
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:e}"),
    }
}

/// One row per micro-step; `ratio` only on the last step of a sweep.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mut prev_tan = trace.initial_tan;
    let blocks = trace.final_state.params.num_blocks();
    for rec in &trace.records {
        let last = rec.mu + 1 == blocks;
        let ratio = if last {
            let r = match (prev_tan, rec.tan_angle) {
                (Some(a), Some(b)) if a > 0.0 && a.is_finite() && b.is_finite() => Some(b / a),
                _ => None,
            };
            prev_tan = rec.tan_angle;
            r
        } else {
            None
        };
        out.push_str(&format!(
            "{},{},{:e},{:e},{:e},{},{:e},{:e},{},{},{}\n",
            rec.k,
            rec.mu + 1,
            rec.f,
            rec.decrement,
            rec.grad_norm,
            rec.w_rank,
            rec.resid_orth,
            rec.param_norm_max,
            fmt_opt(rec.tan_angle),
            fmt_opt(ratio),
            u8::from(rec.degenerate)
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub rate: std::result::Result<RateEstimate, AlsError>,
    pub monitors: MonitorReport,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

/// Runs a configured problem without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let problem = cfg.build_problem()?;
    let stop = cfg.stop_rule()?;
    let opts = cfg.run_options()?;
    let window = cfg.window.unwrap_or(DEFAULT_RATE_WINDOW);
    if window == 0 {
        return Err(AlsError::InvalidArgument("window must be ≥ 1".into()));
    }
    let trace = run_with(&problem, stop, opts)?;
    let rate = rate_estimate_available(&trace.tangent_series(), window);
    let monitors = assumption_monitors(
        trace.initial_param_norm,
        &trace.records,
        &trace.sweeps,
        trace.operator_verified,
        MonitorThresholds::default(),
    );
    let exit_code = if monitors.unbounded_suspect {
        EXIT_UNBOUNDED
    } else if trace.termination == Termination::Degenerate {
        EXIT_DEGENERATE
    } else {
        EXIT_OK
    };
    Ok(RunOutcome {
        trace,
        rate,
        monitors,
        warnings: problem.warnings,
        exit_code,
    })
}

/// Human-readable run summary.
pub fn summary_text(o: &RunOutcome) -> String {
    let t = &o.trace;
    let mut s = String::new();
    s.push_str(&format!("problem: {}\n", t.label));
    for w in &o.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s.push_str(&format!(
        "termination: {} after {} sweeps\n",
        t.termination.as_str(),
        t.sweeps.len()
    ));
    s.push_str(&format!("f: {:e} -> {:e}\n", t.initial_f, t.final_state.f));
    match &o.rate {
        Ok(r) => s.push_str(&format!(
            "rate: q_hat = {:.6} over {} ratios, {}{}\n",
            r.q_hat,
            r.window,
            r.class.as_str(),
            if r.converged_exactly { " (exact zero reached)" } else { "" }
        )),
        Err(e) => s.push_str(&format!("rate: unavailable ({e})\n")),
    }
    let m = &o.monitors;
    let peak = m.max_param_norm_per_sweep.iter().copied().fold(0.0, f64::max);
    s.push_str(&format!(
        "param norm: initial {:e}, peak {:e}{}\n",
        m.initial_param_norm,
        peak,
        if m.unbounded_suspect { ", unbounded-suspect" } else { "" }
    ));
    match m.last_rank_change {
        Some(k) => s.push_str(&format!("ranks: last change in sweep {k}\n")),
        None => s.push_str("ranks: constant\n"),
    }
    s.push_str(&format!("iterate distance: {}\n", m.distance_trend.as_str()));
    if m.operator_unverified {
        s.push_str("warning: operator positive definiteness was not verified\n");
    }
    s
}

#[derive(Debug, Parser)]
#[command(name = "tensor-als", version, about = "Alternating least squares for multilinear tensor formats")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Run ALS on a gallery problem or on config files.
    Run(RunArgs),
    /// List gallery problems.
    Gallery,
    /// Document one gallery problem.
    Describe { label: String },
    /// Run the oracle and invariant suite.
    Verify,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON config file; repeat to run several problems.
    #[arg(long = "config")]
    pub config: Vec<PathBuf>,
    /// Worker threads when several configs are given.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub gallery: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub init_mix: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub f_tol: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub angle_tol: Option<f64>,
    #[arg(long)]
    pub eps_rank: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    /// auto, factor or full.
    #[arg(long)]
    pub angle: Option<String>,
    /// CSV path; defaults to `<name>.csv` in $TENSOR_ALS_OUT_DIR or the working directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl RunArgs {
    fn flags(&self) -> RunConfig {
        RunConfig {
            gallery: self.gallery.clone(),
            problem: None,
            tau: self.tau,
            lambda: self.lambda,
            n: self.n,
            seed: self.seed,
            r: self.r,
            dims: self.dims.clone(),
            t: self.t,
            init_mix: self.init_mix,
            max_sweeps: self.max_sweeps,
            f_tol: self.f_tol,
            grad_tol: self.grad_tol,
            angle_tol: self.angle_tol,
            eps_rank: self.eps_rank,
            window: self.window,
            angle: self.angle.clone(),
            output: self.output.clone(),
        }
    }
}

fn default_output(stem: &str) -> PathBuf {
    let dir = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
    dir.join(format!("{stem}.csv"))
}

/// Runs one config, writes its CSV, and returns the exit code with the text report.
fn run_one(cfg: &RunConfig, stem: &str) -> (i32, String) {
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => return (EXIT_CONFIG, format!("error: {e}\n")),
    };
    let path = cfg.output.clone().unwrap_or_else(|| default_output(stem));
    let mut text = summary_text(&outcome);
    if let Err(e) = std::fs::write(&path, trace_csv(&outcome.trace)) {
        return (EXIT_CONFIG, format!("{text}error: cannot write {}: {e}\n", path.display()));
    }
    text.push_str(&format!("trace: {}\n", path.display()));
    (outcome.exit_code, text)
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let s = std::fs::read_to_string(path)
        .map_err(|e| AlsError::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&s)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> i32 {
    let flags = args.flags();
    if args.config.is_empty() {
        let stem = flags.gallery.clone().unwrap_or_else(|| "run".into());
        let (code, text) = run_one(&flags, &stem);
        let _ = out.write_all(text.as_bytes());
        return code;
    }
    if args.config.len() > 1 && flags.output.is_some() {
        let _ = writeln!(out, "error: --output cannot be shared by several configs");
        return EXIT_CONFIG;
    }
    let mut jobs: Vec<(String, std::result::Result<RunConfig, AlsError>)> = Vec::new();
    for path in &args.config {
        let stem = path
            .file_stem()
            .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        let cfg = load_config(path).map(|mut c| {
            c.overlay(&flags);
            c
        });
        jobs.push((stem, cfg));
    }
    let workers = args.jobs.max(1);
    let mut results: Vec<(i32, String)> = vec![(EXIT_OK, String::new()); jobs.len()];
    for chunk in jobs.iter().zip(results.iter_mut()).collect::<Vec<_>>().chunks_mut(workers) {
        std::thread::scope(|s| {
            for ((stem, cfg), slot) in chunk.iter_mut() {
                s.spawn(move || {
                    **slot = match cfg {
                        Ok(c) => run_one(c, stem),
                        Err(e) => (EXIT_CONFIG, format!("error: {e}\n")),
                    };
                });
            }
        });
    }
    let mut code = EXIT_OK;
    for (i, (c, text)) in results.iter().enumerate() {
        let _ = write!(out, "[{}]\n{text}", args.config[i].display());
        code = if *c == EXIT_CONFIG || code == EXIT_CONFIG { EXIT_CONFIG } else { code.max(*c) };
    }
    code
}

fn cmd_gallery(out: &mut dyn Write) -> i32 {
    for e in GALLERY {
        let _ = writeln!(out, "{:<20} {}", e.label, e.summary);
    }
    EXIT_OK
}

fn cmd_describe(label: &str, out: &mut dyn Write) -> i32 {
    let Some(e) = gallery_entry(label) else {
        let _ = writeln!(out, "error: unknown gallery label '{label}'");
        return EXIT_CONFIG;
    };
    let _ = writeln!(out, "{}\n  {}", e.label, e.summary);
    if e.args.is_empty() {
        let _ = writeln!(out, "  (no arguments)");
    }
    for a in e.args {
        let _ = writeln!(out, "  {:<12} {}", a.flag, a.doc);
    }
    EXIT_OK
}

fn cmd_verify(out: &mut dyn Write) -> i32 {
    let results = run_verify(VerifyOptions::default());
    let mut ok = true;
    for r in &results {
        ok &= r.passed;
        let _ = writeln!(out, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}

/// Parses `args` and dispatches; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Gallery => cmd_gallery(out),
        Command::Describe { label } => cmd_describe(label, out),
        Command::Verify => cmd_verify(out),
    }
}
