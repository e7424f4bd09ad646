//! Command-line front end: `run`, `converge` and `list-cases`.
//!
//! Parameters come from a TOML file (`--config`) and from flags; flags win.
//! Every run writes a `manifest.json` next to its outputs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cases::{convergence_study, CaseConfig, CaseKind, DtRule, Ladder};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::field::PoissonMethod;
use crate::pushers::PusherKind;
use crate::solver::write_snapshot;
use crate::splines::SplineKind;

pub const THREADS_ENV: &str = "VLASOV_FSL_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vlasov-fsl", version, about = "Forward semi-Lagrangian Vlasov-Poisson solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one case and write diagnostics, snapshots and a manifest.
    Run(CaseArgs),
    /// Run a refinement ladder and write a convergence table.
    Converge(ConvergeArgs),
    /// List the available cases.
    ListCases,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CaseArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Thermal width of the Maxwellian cases.
    #[arg(long = "v-t")]
    pub v_t: Option<f64>,
    #[arg(long = "n-p")]
    pub n_p: Option<f64>,
    #[arg(long = "n-b")]
    pub n_b: Option<f64>,
    /// Beam drift velocity.
    #[arg(long)]
    pub u: Option<f64>,
    /// Beam thermal width.
    #[arg(long = "beam-v-t")]
    pub beam_v_t: Option<f64>,
    /// Number of distinct x nodes.
    #[arg(long = "nodes-x")]
    pub nodes_x: Option<usize>,
    /// Number of v intervals.
    #[arg(long)]
    pub nv: Option<usize>,
    #[arg(long)]
    pub vmax: Option<f64>,
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", visible_alias = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub pusher: Option<String>,
    #[arg(long)]
    pub spline: Option<String>,
    #[arg(long)]
    pub poisson: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "diag-stride")]
    pub diag_stride: Option<usize>,
    /// Comma-separated snapshot times.
    #[arg(long = "snapshot-times", value_delimiter = ',')]
    pub snapshot_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Refine {
    /// Halve dt on a fixed grid.
    Dt,
    /// Halve dx and dv.
    H,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Number of ladder levels.
    #[arg(long, default_value_t = 4)]
    pub ladder: usize,
    /// Refined quantity; `h` for free_streaming, `dt` otherwise by default.
    #[arg(long, value_enum)]
    pub refine: Option<Refine>,
    /// For `--refine h`: dt = c h^(2/3). Defaults to c = 1 for free_streaming; other cases keep the base dt.
    #[arg(long = "dt-coefficient")]
    pub dt_coefficient: Option<f64>,
    /// For `--refine dt`: time step of the reference run.
    #[arg(long = "reference-dt")]
    pub reference_dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    case: CaseSection,
    #[serde(default)]
    beam: BeamSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    time: TimeSection,
    #[serde(default)]
    scheme: SchemeSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseSection {
    name: Option<String>,
    k: Option<f64>,
    alpha: Option<f64>,
    v_t: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamSection {
    n_p: Option<f64>,
    n_b: Option<f64>,
    u: Option<f64>,
    v_t: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    nodes_x: Option<usize>,
    nv: Option<usize>,
    vmax: Option<f64>,
    length: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    dt: Option<f64>,
    t_final: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeSection {
    pusher: Option<String>,
    spline: Option<String>,
    poisson: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    diag_stride: Option<usize>,
    snapshot_times: Option<Vec<f64>>,
}

impl CaseArgs {
    fn overlay(mut self, over: CaseArgs) -> CaseArgs {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(config, case, k, alpha, v_t, n_p, n_b, u, beam_v_t, nodes_x, nv, vmax, length, dt,
              t_final, pusher, spline, poisson, out, diag_stride, snapshot_times);
        self
    }

    fn from_file(path: &Path) -> Result<CaseArgs> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let f: FileConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        Ok(CaseArgs {
            config: None,
            case: f.case.name,
            k: f.case.k,
            alpha: f.case.alpha,
            v_t: f.case.v_t,
            n_p: f.beam.n_p,
            n_b: f.beam.n_b,
            u: f.beam.u,
            beam_v_t: f.beam.v_t,
            nodes_x: f.grid.nodes_x,
            nv: f.grid.nv,
            vmax: f.grid.vmax,
            length: f.grid.length,
            dt: f.time.dt,
            t_final: f.time.t_final,
            pusher: f.scheme.pusher,
            spline: f.scheme.spline,
            poisson: f.scheme.poisson,
            out: f.output.dir,
            diag_stride: f.output.diag_stride,
            snapshot_times: f.output.snapshot_times,
        })
    }

    fn is_set(&self, key: &str) -> bool {
        match key {
            "k" => self.k.is_some(),
            "alpha" => self.alpha.is_some(),
            "v_t" => self.v_t.is_some(),
            "n_p" => self.n_p.is_some(),
            "n_b" => self.n_b.is_some(),
            "u" => self.u.is_some(),
            "beam_v_t" => self.beam_v_t.is_some(),
            "nodes_x" => self.nodes_x.is_some(),
            "nv" => self.nv.is_some(),
            "vmax" => self.vmax.is_some(),
            "length" => self.length.is_some(),
            "dt" => self.dt.is_some(),
            "t_final" => self.t_final.is_some(),
            "pusher" => self.pusher.is_some(),
            "spline" => self.spline.is_some(),
            "poisson" => self.poisson.is_some(),
            "diag_stride" => self.diag_stride.is_some(),
            "snapshot_times" => self.snapshot_times.is_some(),
            _ => false,
        }
    }
}

const PARAMETER_KEYS: [&str; 18] = [
    "k", "alpha", "v_t", "n_p", "n_b", "u", "beam_v_t", "nodes_x", "nv", "vmax", "length", "dt",
    "t_final", "pusher", "spline", "poisson", "diag_stride", "snapshot_times",
];

/// Parameters after merging defaults, file and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: CaseConfig,
    pub out_dir: PathBuf,
    /// `user`, `paper` or `artifact-default` for every parameter.
    pub sources: BTreeMap<String, String>,
}

impl Resolved {
    pub fn artifact_defaults(&self) -> Vec<String> {
        self.sources
            .iter()
            .filter(|(_, s)| s.as_str() == "artifact-default")
            .map(|(k, _)| k.clone())
            .collect()
    }
}

pub fn parse_pusher(s: &str) -> Result<PusherKind> {
    PusherKind::ALL
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown pusher `{s}` (expected verlet, ck2 or ck3)")))
}

pub fn parse_spline(s: &str) -> Result<SplineKind> {
    match s {
        "linear" => Ok(SplineKind::Linear),
        "cubic" => Ok(SplineKind::Cubic),
        _ => Err(Error::Config(format!("unknown spline `{s}` (expected linear or cubic)"))),
    }
}

pub fn parse_poisson(s: &str) -> Result<PoissonMethod> {
    match s {
        "green" => Ok(PoissonMethod::Green),
        "staggered_fd" | "staggered-fd" => Ok(PoissonMethod::StaggeredFd),
        _ => Err(Error::Config(format!("unknown poisson method `{s}` (expected green or staggered_fd)"))),
    }
}

pub fn resolve(args: &CaseArgs) -> Result<Resolved> {
    let merged = match &args.config {
        Some(path) => CaseArgs::from_file(path)?.overlay(args.clone()),
        None => args.clone(),
    };
    let name = merged
        .case
        .as_deref()
        .ok_or_else(|| Error::Config("missing required fields: case".into()))?;
    let case = CaseKind::parse(name)?;
    let defaults = CaseConfig::defaults(case);
    let mut c = defaults.config;
    let a = &merged;
    c.k = a.k.unwrap_or(c.k);
    c.alpha = a.alpha.unwrap_or(c.alpha);
    c.v_t = a.v_t.unwrap_or(c.v_t);
    c.beam.n_p = a.n_p.unwrap_or(c.beam.n_p);
    c.beam.n_b = a.n_b.unwrap_or(c.beam.n_b);
    c.beam.u = a.u.unwrap_or(c.beam.u);
    c.beam.v_t = a.beam_v_t.unwrap_or(c.beam.v_t);
    c.nodes_x = a.nodes_x.unwrap_or(c.nodes_x);
    c.nv = a.nv.unwrap_or(c.nv);
    c.vmax = a.vmax.unwrap_or(c.vmax);
    c.length = match (a.length, case) {
        (Some(l), _) => l,
        (None, CaseKind::BumpOnTail) => c.length,
        (None, _) => 2.0 * std::f64::consts::PI / c.k,
    };
    c.dt = a.dt.unwrap_or(c.dt);
    c.t_final = a.t_final.unwrap_or(c.t_final);
    if let Some(p) = &a.pusher {
        c.pusher = parse_pusher(p)?;
    }
    if let Some(s) = &a.spline {
        c.spline = parse_spline(s)?;
    }
    if let Some(p) = &a.poisson {
        c.poisson = parse_poisson(p)?;
    }
    c.diag_stride = a.diag_stride.unwrap_or(c.diag_stride);
    if let Some(t) = &a.snapshot_times {
        c.snapshot_times = t.clone();
    }
    c.validate()?;

    let mut sources = BTreeMap::new();
    for key in PARAMETER_KEYS {
        let src = if merged.is_set(key) {
            "user"
        } else if defaults.artifact_keys.contains(&key) {
            "artifact-default"
        } else {
            "paper"
        };
        sources.insert(key.to_string(), src.to_string());
    }
    if sources["length"] == "paper" && merged.is_set("k") && case != CaseKind::BumpOnTail {
        sources.insert("length".into(), "user".into());
    }
    for key in ["snapshot_times"] {
        if !merged.is_set(key) {
            sources.insert(key.into(), "artifact-default".into());
        }
    }
    Ok(Resolved {
        config: c,
        out_dir: merged.out.unwrap_or_else(|| PathBuf::from("out")),
        sources,
    })
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: CaseConfig,
    pub parameter_sources: BTreeMap<String, String>,
    /// Parameters whose values are not published benchmark values.
    pub artifact_defaults: Vec<String>,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

fn write_manifest(dir: &Path, manifest: &mut RunManifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    manifest.outputs.push(path.display().to_string());
    let file = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(file, manifest).map_err(std::io::Error::from)?;
    Ok(path)
}

fn now() -> String {
    chrono::Local::now().to_rfc3339()
}

fn run_command(args: &CaseArgs) -> Result<()> {
    let started = now();
    let resolved = resolve(args)?;
    let cfg = &resolved.config;
    fs::create_dir_all(&resolved.out_dir)?;
    log::info!("running {} with {:?}", cfg.case.name(), cfg);
    let output = cfg.run()?;
    let grid = cfg.grid()?;

    let mut outputs = Vec::new();
    let diag_path = resolved.out_dir.join("diagnostics.csv");
    let mut w = BufWriter::new(File::create(&diag_path)?);
    diagnostics::write_csv(&mut w, &output.diagnostics)?;
    w.flush()?;
    outputs.push(diag_path.display().to_string());
    for (n, snap) in output.snapshots.iter().enumerate() {
        let path = resolved.out_dir.join(format!("snapshot_{n:03}.txt"));
        let mut w = BufWriter::new(File::create(&path)?);
        write_snapshot(&mut w, &grid, snap)?;
        w.flush()?;
        outputs.push(path.display().to_string());
    }

    let last = output.diagnostics.last().expect("initial diagnostics row");
    if last.mass_lost > 0.0 {
        log::warn!("mass_lost = {:e}: distribution reached the velocity boundary", last.mass_lost);
    }
    let mut extra = BTreeMap::new();
    extra.insert("steps".into(), serde_json::json!(output.final_state.step_index));
    extra.insert("mass_lost".into(), serde_json::json!(last.mass_lost));
    let mut manifest = RunManifest {
        command: "run".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        artifact_defaults: resolved.artifact_defaults(),
        parameter_sources: resolved.sources.clone(),
        threads: rayon::current_num_threads(),
        started,
        finished: now(),
        outputs,
        extra,
    };
    write_manifest(&resolved.out_dir, &mut manifest)?;
    println!(
        "{}: {} steps to t={}, outputs in {}",
        cfg.case.name(),
        output.final_state.step_index,
        output.final_state.t,
        resolved.out_dir.display()
    );
    Ok(())
}

fn converge_command(args: &ConvergeArgs) -> Result<()> {
    let started = now();
    let resolved = resolve(&args.case)?;
    let cfg = &resolved.config;
    let refine = args.refine.unwrap_or(match cfg.case {
        CaseKind::FreeStreaming => Refine::H,
        _ => Refine::Dt,
    });
    let ladder = match refine {
        Refine::Dt => {
            let dts: Vec<f64> = (0..args.ladder).map(|n| cfg.dt / (1u64 << n) as f64).collect();
            let reference_dt = args
                .reference_dt
                .unwrap_or(cfg.dt / (1u64 << (args.ladder + 1)) as f64);
            Ladder::TimeStep { dts, reference_dt }
        }
        Refine::H => Ladder::Resolution {
            levels: args.ladder,
            dt: match args.dt_coefficient {
                Some(c) => DtRule::Power { c, exponent: 2.0 / 3.0 },
                None if cfg.case == CaseKind::FreeStreaming => DtRule::Power { c: 1.0, exponent: 2.0 / 3.0 },
                None => DtRule::Fixed(cfg.dt),
            },
        },
    };
    fs::create_dir_all(&resolved.out_dir)?;
    let table = convergence_study(cfg, &ladder)?;
    let path = resolved.out_dir.join("convergence.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    table.write_csv(&mut w)?;
    w.flush()?;
    table.write_csv(std::io::stdout().lock())?;
    if !table.monotone {
        eprintln!("warning: errors are not monotone along the ladder");
    }

    let mut extra = BTreeMap::new();
    extra.insert("ladder".into(), serde_json::json!(format!("{ladder:?}")));
    extra.insert("monotone".into(), serde_json::json!(table.monotone));
    extra.insert("exact_reference".into(), serde_json::json!(table.exact_reference));
    let mut manifest = RunManifest {
        command: "converge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        artifact_defaults: resolved.artifact_defaults(),
        parameter_sources: resolved.sources.clone(),
        threads: rayon::current_num_threads(),
        started,
        finished: now(),
        outputs: vec![path.display().to_string()],
        extra,
    };
    write_manifest(&resolved.out_dir, &mut manifest)?;
    Ok(())
}

fn list_cases() {
    for case in CaseKind::ALL {
        println!("{:<16}{}", case.name(), case.description());
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be at least 1")));
        }
        // Already initialised pools (repeated calls in one process) keep their size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Shape { .. } | Error::Solvability { .. } => EXIT_CONFIG,
        Error::NumericalAbort { .. } => EXIT_ABORT,
        _ => EXIT_FAILURE,
    }
}

pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Run(a) => run_command(a),
        Command::Converge(a) => converge_command(a),
        Command::ListCases => {
            list_cases();
            Ok(())
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
