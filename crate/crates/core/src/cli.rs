//! Batch front end behind the `cdknlab` binary.
//!
//! Exit codes: 0 pass, 1 usage or I/O error, 2 mathematical violation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::cdcheck::{
    estimate_omega_table, kn_convexity_check, omega_to_big_omega, richardson, run_pairs, run_suite, sample_triples,
    OmegaConfig, Region, SuiteConfig, SuiteReport, SuiteSummary,
};
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::ikrw::{convergence_experiment, cut_terms, SequenceSpec, DEFAULT_K_MAX};
use crate::measure::MeasureSpec;
use crate::mmspace::{
    build_model_space, detect_singular_set, k_cut, total_mass, ModelKind, ModelSpec, PointedSpace1D, DEFAULT_GROWTH,
};
use crate::transport::CostSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cdknlab", version, about = "Curvature-dimension checks with negative N on 1-D spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Report path; CSV reports get a `<stem>.summary.json` sidecar.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a model space and tabulate its cells.
    Model(ModelArgs),
    /// Verify CD(K, N) on sampled or given marginal pairs.
    Cdcheck(CdcheckArgs),
    /// Check (K, N)-convexity of a weight on sampled triples.
    Convexity(ConvexityArgs),
    /// Per-k terms and the truncated iKRW series between two spaces.
    Ikrw(IkrwArgs),
    /// Convergence table of a sequence of spaces and the CD check of its limit.
    Converge(ConvergeArgs),
    /// Estimate ω(k, h, M) and Ω(k, h, M, δ).
    Omega(OmegaArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Override of the descriptor's grid size.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CdcheckArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long = "K", allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long = "N", allow_hyphen_values = true)]
    pub n: f64,
    /// Number of equally spaced times in [0, 1].
    #[arg(long, default_value_t = 21)]
    pub t_grid: usize,
    /// Number of geometric N′ values in [N, −1e-3].
    #[arg(long, default_value_t = 9)]
    pub nprime_grid: usize,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 5e-2)]
    pub tol: f64,
    #[arg(long, default_value_t = 4)]
    pub refine: usize,
    /// Restrict marginals to the regular set ℛ^k.
    #[arg(long, allow_hyphen_values = true)]
    pub regular_k: Option<i32>,
    /// Explicit marginal descriptors instead of sampling.
    #[arg(long, requires = "mu1")]
    pub mu0: Option<PathBuf>,
    #[arg(long, requires = "mu0")]
    pub mu1: Option<PathBuf>,
    /// Also rerun the same pairs at twice the grid size.
    #[arg(long)]
    pub richardson: bool,
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ConvexityArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long = "K", allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long = "N", allow_hyphen_values = true)]
    pub n: f64,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct IkrwArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// First index of the series; defaults to the larger regularity parameter.
    #[arg(long, allow_hyphen_values = true)]
    pub k_bar: Option<i32>,
    #[arg(long, default_value_t = DEFAULT_K_MAX, allow_hyphen_values = true)]
    pub k_max: i32,
    /// Ground cost: w2, tanh or cap1.
    #[arg(long, default_value = "w2")]
    pub cost: String,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub seq: PathBuf,
    /// Overrides the descriptor's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the descriptor's sample count of the limit check.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct OmegaArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Exponent of the entropy cap.
    #[arg(long = "N", allow_hyphen_values = true)]
    pub n: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub k: i32,
    /// Largest h; the table covers h = k..=h_max.
    #[arg(long, allow_hyphen_values = true)]
    pub h_max: i32,
    #[arg(long = "M")]
    pub m: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: Output,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("CDKNLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParams(format!("CDKNLAB_THREADS = '{v}' is not a positive integer")))?;
    if n == 0 {
        return Err(Error::InvalidParams("CDKNLAB_THREADS must be positive".into()));
    }
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Executes one command and writes its reports.
pub fn run(command: &Command) -> Result<i32> {
    match command {
        Command::Model(a) => cmd_model(a),
        Command::Cdcheck(a) => cmd_cdcheck(a),
        Command::Convexity(a) => cmd_convexity(a),
        Command::Ikrw(a) => cmd_ikrw(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Omega(a) => cmd_omega(a),
    }
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn load_space(path: &Path, grid: Option<usize>) -> Result<(ModelSpec, PointedSpace1D)> {
    let mut spec = ModelSpec::from_json(&read(path)?)?;
    if let Some(g) = grid {
        spec = spec.with_grid_n(g);
    }
    let space = build_model_space(&spec)?;
    Ok((spec, space))
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::InvalidParams("--seed is required for sampling commands".into()))
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.summary.json"))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// CSV table plus summary sidecar, or one JSON document holding both.
fn emit(output: &Output, header: &[&str], rows: &[Vec<String>], summary: serde_json::Value, full: serde_json::Value) -> Result<()> {
    let (main, side) = match output.format {
        Format::Csv => (csv_bytes(header, rows)?, Some(json_bytes(&summary)?)),
        Format::Json => (json_bytes(&json!({ "summary": summary, "report": full }))?, None),
    };
    if let Some(s) = side {
        write_atomic(&sidecar_path(&output.out), &s)?;
    }
    write_atomic(&output.out, &main)
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:e}")
    }
}

fn ext(x: ExtendedReal) -> String {
    num(x.to_f64())
}

fn json_num(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(num(x))
    }
}

fn cmd_model(a: &ModelArgs) -> Result<i32> {
    let (spec, space) = load_space(&a.space, a.grid)?;
    let g = space.grid();
    let cut = k_cut(&space, space.regularity_k())?;
    let rows: Vec<Vec<String>> = (0..space.len())
        .map(|i| {
            vec![
                i.to_string(),
                num(g.left(i)),
                num(g.right(i)),
                ext(space.density()[i]),
                ext(space.cell_mass(i)),
                space.is_singular_cell(i).to_string(),
                ext(cut.cell_mass(i)),
            ]
        })
        .collect();
    let detected = match detect_singular_set(&space, 6, DEFAULT_GROWTH) {
        Ok(v) => json!(v),
        Err(Error::NotRefinable) => serde_json::Value::Null,
        Err(e) => return Err(e),
    };
    let cut_mass: f64 = cut.cell_masses().iter().sum();
    let summary = json!({
        "kind": spec.kind,
        "grid_n": space.len(),
        "domain": [g.lo(), g.hi()],
        "base_point": space.base_point(),
        "regularity_k": space.regularity_k(),
        "singular_points": space.singular_points(),
        "detected_singular_points": detected,
        "total_mass": ext(total_mass(&space)),
        "cut_mass": cut_mass,
        "truncated_tail_mass": space.truncated_tail_mass(),
        "claimed_cd": spec.claimed_cd(),
    });
    emit(
        &a.output,
        &["cell", "left", "right", "density", "mass", "singular", "cut_mass"],
        &rows,
        summary.clone(),
        json!({ "spec": spec, "cells": rows }),
    )?;
    Ok(EXIT_OK)
}

fn suite_rows(report: &SuiteReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (s, r) in report.reports.iter().enumerate() {
        for row in &r.rows {
            rows.push(vec![
                s.to_string(),
                num(row.t),
                num(row.nprime),
                ext(row.s_value),
                ext(row.t_value),
                num(row.margin),
                num(row.normalized_margin),
                row.status.as_str().to_string(),
            ]);
        }
    }
    rows
}

fn cmd_cdcheck(a: &CdcheckArgs) -> Result<i32> {
    if !(a.tol > 0.0) {
        return Err(Error::InvalidParams("--tol must be positive".into()));
    }
    let (spec, space) = load_space(&a.space, a.grid)?;
    let mut cfg = SuiteConfig::new(a.k, a.n, a.samples, a.seed.unwrap_or(0));
    cfg.t_points = a.t_grid;
    cfg.nprime_points = a.nprime_grid;
    cfg.tolerance = a.tol;
    cfg.refine = a.refine;
    if let Some(k) = a.regular_k {
        cfg.region = Region::Regular(k);
    }
    let explicit = match (&a.mu0, &a.mu1) {
        (Some(p0), Some(p1)) => Some((MeasureSpec::from_json(&read(p0)?)?, MeasureSpec::from_json(&read(p1)?)?)),
        _ => None,
    };
    let seed = if explicit.is_some() { a.seed } else { Some(require_seed(a.seed)?) };
    if explicit.is_some() && a.richardson {
        return Err(Error::InvalidParams("--richardson works on sampled pairs".into()));
    }
    let report = match &explicit {
        Some(pair) => {
            let pairs = vec![pair.clone()];
            let reports = run_pairs(&space, &pairs, &cfg)?;
            let summary = SuiteSummary::from_reports(&reports);
            SuiteReport { config: SuiteConfig { samples: 1, ..cfg.clone() }, grid_n: space.len(), pairs, reports, summary }
        }
        None => run_suite(&space, &cfg)?,
    };
    let rich = if a.richardson {
        let fine = build_model_space(&spec.with_grid_n(2 * spec.grid_n))?;
        Some(richardson(&space, &fine, &cfg)?)
    } else {
        None
    };
    let passes = report.summary.passes && rich.as_ref().is_none_or(|r| r.passes);
    let summary = json!({
        "K": a.k,
        "N": a.n,
        "seed": seed,
        "grid_n": space.len(),
        "tolerance": a.tol,
        "samples": report.reports.len(),
        "t_points": a.t_grid,
        "nprime_points": a.nprime_grid,
        "min_margin": json_num(report.summary.min_margin),
        "worst_sample": report.summary.worst_sample,
        "worst_t": report.summary.worst_t,
        "worst_nprime": report.summary.worst_nprime,
        "rows": report.summary.rows,
        "ok": report.summary.n_ok,
        "violated": report.summary.n_violated,
        "vacuous_inf": report.summary.n_vacuous,
        "skipped_entropy_inf": report.summary.n_skipped,
        "fingerprints": report.reports.iter().map(|r| format!("{:016x}", r.fingerprint)).collect::<Vec<_>>(),
        "richardson": rich,
        "passes": passes,
    });
    emit(
        &a.output,
        &["sample", "t", "nprime", "s_value", "t_value", "margin", "normalized_margin", "status"],
        &suite_rows(&report),
        summary,
        json!({ "pairs": report.pairs, "reports": report.reports }),
    )?;
    Ok(if passes { EXIT_OK } else { EXIT_VIOLATION })
}

/// Sample points and `ψ` values: grid edges with the closed form for models,
/// cell centers with the given samples for `custom_psi`.
fn psi_table(spec: &ModelSpec, space: &PointedSpace1D) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    if spec.kind == ModelKind::CustomPsi {
        let psi = spec.psi_samples.clone().ok_or_else(|| Error::InvalidParams("missing psi_samples".into()))?;
        return Ok((space.grid().centers(), psi));
    }
    let model = space.analytic().ok_or(Error::NotRefinable)?;
    let xs = space.grid().edges().to_vec();
    let psi = xs
        .iter()
        .map(|&x| {
            let d = model.eval(x);
            if d == f64::INFINITY { None } else { Some(-d.ln()) }
        })
        .collect();
    Ok((xs, psi))
}

fn cmd_convexity(a: &ConvexityArgs) -> Result<i32> {
    let seed = require_seed(a.seed)?;
    if !(a.tol > 0.0) {
        return Err(Error::InvalidParams("--tol must be positive".into()));
    }
    let (spec, space) = load_space(&a.space, None)?;
    let (xs, psi) = psi_table(&spec, &space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = sample_triples(&xs, a.k, a.n, a.samples, &mut rng)?;
    let report = kn_convexity_check(&xs, &psi, a.k, a.n, &triples)?;
    let passes = report.min_margin >= -a.tol;
    let rows: Vec<Vec<String>> = triples
        .iter()
        .map(|&(i, m, j)| {
            let single = kn_convexity_check(&xs, &psi, a.k, a.n, &[(i, m, j)]).map(|r| r.min_margin).unwrap_or(f64::NAN);
            vec![num(xs[i]), num(xs[j]), num((xs[m] - xs[i]) / (xs[j] - xs[i])), num(single)]
        })
        .collect();
    let summary = json!({
        "K": a.k,
        "N": a.n,
        "seed": seed,
        "triples": report.triples,
        "tolerance": a.tol,
        "min_margin": json_num(report.min_margin),
        "worst": [report.worst.0, report.worst.1, report.worst.2],
        "passes": passes,
    });
    emit(&a.output, &["x0", "x1", "t", "margin"], &rows, summary, json!(report))?;
    Ok(if passes { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_ikrw(a: &IkrwArgs) -> Result<i32> {
    let cost = CostSpec::parse(&a.cost)?;
    let (_, sa) = load_space(&a.a, None)?;
    let (_, sb) = load_space(&a.b, None)?;
    let k_bar = a.k_bar.unwrap_or(sa.regularity_k().max(sb.regularity_k()));
    if k_bar > a.k_max {
        return Err(Error::InvalidParams(format!("k̄ = {k_bar} exceeds k_max = {}", a.k_max)));
    }
    let mut rows = Vec::new();
    let mut value = 0.0;
    let mut extrinsic = 0.0;
    let mut terms = Vec::new();
    for k in k_bar..=a.k_max {
        let t = cut_terms(&sa, &sb, k, cost)?;
        let w = 2f64.powi(-k);
        let weighted = w * t.total().min(ExtendedReal::Finite(1.0)).to_f64();
        value += weighted;
        extrinsic += w * t.extrinsic().min(1.0);
        rows.push(vec![
            k.to_string(),
            num(t.log_mass),
            num(t.base_point),
            ext(t.hausdorff),
            num(t.wc),
            num(t.extrinsic()),
            ext(t.total()),
            num(weighted),
        ]);
        terms.push(json!({ "k": k, "terms": t }));
    }
    let summary = json!({
        "cost": cost.name(),
        "k_bar": k_bar,
        "k_max": a.k_max,
        "value": value,
        "extrinsic_series": extrinsic,
        "tail_bound": 2f64.powi(-a.k_max),
        "embedding": "identity",
    });
    emit(
        &a.output,
        &["k", "log_mass", "base_point", "hausdorff", "wc", "extrinsic", "total", "weighted"],
        &rows,
        summary,
        json!(terms),
    )?;
    Ok(EXIT_OK)
}

fn cmd_converge(a: &ConvergeArgs) -> Result<i32> {
    let mut spec = SequenceSpec::from_json(&read(&a.seq)?)?;
    if let Some(s) = a.seed {
        spec.seed = Some(s);
    }
    if let Some(n) = a.samples {
        spec.samples = n;
    }
    if spec.samples > 0 {
        require_seed(spec.seed)?;
    }
    let table = convergence_experiment(&spec)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.k.to_string(),
                num(r.log_mass_gap),
                num(r.base_point_gap),
                ext(r.hausdorff_gap),
                num(r.wc_gap),
                num(r.extrinsic),
                ext(r.total),
            ]
        })
        .collect();
    let converges = table.converges();
    let summary = json!({
        "family": spec.family,
        "N": spec.n,
        "seed": spec.seed,
        "grid_n": spec.grid_n,
        "cost": spec.cost,
        "series": table.series,
        "extrinsic_monotone": table.extrinsic_monotone,
        "hausdorff_monotone": table.hausdorff_monotone,
        "final_extrinsic": table.final_extrinsic,
        "gap_tolerance": table.gap_tolerance,
        "limit": table.limit,
        "converges": converges,
    });
    emit(
        &a.output,
        &["n", "k", "log_mass_gap", "base_point_gap", "hausdorff_gap", "wc_gap", "extrinsic", "total"],
        &rows,
        summary,
        json!(table),
    )?;
    Ok(if converges { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_omega(a: &OmegaArgs) -> Result<i32> {
    let seed = require_seed(a.seed)?;
    if a.h_max < a.k {
        return Err(Error::InvalidParams("--h-max must be at least --k".into()));
    }
    if !(a.m > 0.0) {
        return Err(Error::InvalidParams("--M must be positive".into()));
    }
    let (_, space) = load_space(&a.space, None)?;
    let hs: Vec<i32> = (a.k..=a.h_max).collect();
    let doubled = 2f64.powf(1.0 - 1.0 / a.n) * a.m;
    let cfg = OmegaConfig::new(a.n, a.samples, seed);
    let table = estimate_omega_table(&space, &[a.k], &hs, &[a.m, doubled], &cfg)?;
    let mut rows = Vec::new();
    for e in &table.entries {
        let big = if e.m == a.m { num(omega_to_big_omega(&table, e.k, e.h, a.m, a.delta)?) } else { String::new() };
        rows.push(vec![e.k.to_string(), e.h.to_string(), num(e.m), num(e.value), e.samples.to_string(), big]);
    }
    let monotone = table.monotone_in_h(0.0);
    let summary = json!({
        "N": a.n,
        "seed": seed,
        "grid_n": space.len(),
        "k": a.k,
        "M": a.m,
        "M_doubled": doubled,
        "delta": a.delta,
        "samples": a.samples,
        "omega_at_h_max": table.get(a.k, a.h_max, a.m).map(|e| e.value),
        "Omega_at_h_max": omega_to_big_omega(&table, a.k, a.h_max, a.m, a.delta)?,
        "monotone_in_h": monotone,
    });
    emit(&a.output, &["k", "h", "M", "omega", "samples", "Omega"], &rows, summary, json!(table))?;
    Ok(if monotone { EXIT_OK } else { EXIT_VIOLATION })
}
