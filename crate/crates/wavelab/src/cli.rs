//! Configuration-driven runner behind the `wavelab` binary.
//!
//! One JSON document describes a run; `--set` overrides rewrite leaves by
//! dotted path before parsing, and the positional mode plus `--seed` and
//! `--threads` win over the file.  Every mode writes its artifacts under
//! `output_dir` together with the effective config and a manifest listing
//! each file with a content hash.  Nothing time- or machine-dependent goes
//! into any artifact, so a config and a seed fix the output bytes.
//!
//! Logs go to standard error; standard output carries only the manifest
//! path (printed by the binary, not here).

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::galerkin::{self, GalerkinConfig, SolveOutput, Termination};
use crate::grid::TorusGrid;
use crate::inequality::{self, EnsembleEntry};
use crate::io::{self, Manifest};
use crate::lp::{self, NormSpec};
use crate::propagator::WavePair;
use crate::randomization::{CoefficientDistribution, RandomizationSpec, RandomizationSpecFile};
use crate::tails::{self, TailSpec};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Direct solve of the regularized equation from deterministic data.
    Simulate,
    /// Remainder solve around one randomized free evolution.
    Remainder,
    /// Remainder ensemble over samples and cutoffs with an a priori summary.
    Ensemble,
    /// Corpus inequality battery, optionally with a moment-growth check.
    Inequalities,
    /// Tail survey of randomized space-time norms.
    Tails,
    /// Norm table for a data profile plus quantiles recomputed from traces.
    Report,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Simulate => "simulate",
            RunMode::Remainder => "remainder",
            RunMode::Ensemble => "ensemble",
            RunMode::Inequalities => "inequalities",
            RunMode::Tails => "tails",
            RunMode::Report => "report",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(RunMode::Simulate),
            "remainder" => Ok(RunMode::Remainder),
            "ensemble" => Ok(RunMode::Ensemble),
            "inequalities" => Ok(RunMode::Inequalities),
            "tails" => Ok(RunMode::Tails),
            "report" => Ok(RunMode::Report),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

fn default_oversample() -> usize {
    2
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_guard() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_eta() -> f64 {
    0.05
}

fn default_time_nodes() -> usize {
    64
}

fn default_lambda_count() -> usize {
    40
}

fn default_power_law_count() -> usize {
    12
}

fn default_kpz_bootstrap() -> usize {
    200
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dimension: usize,
    pub modes_per_axis: usize,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dimension, self.modes_per_axis, self.oversample)
    }
}

/// Initial data profile.  File paths are resolved against the working
/// directory, so absolute paths are the safe choice in scripts.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Zero,
    /// `amplitude cos(n·x)` position with an optional cosine velocity of the
    /// same frequency.  `mode = [0,0,0]` degenerates to the constant.
    Cosine {
        mode: [i64; 3],
        amplitude: f64,
        #[serde(default)]
        velocity_amplitude: f64,
    },
    /// Random-phase pair with `|c_n| ~ <n>^{-sigma}` position decay and one
    /// derivative less for the velocity.
    PowerLaw {
        sigma: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        profile_seed: u64,
    },
    File {
        u0: PathBuf,
        u1: PathBuf,
    },
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub p: f64,
    pub cutoff_j: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_guard")]
    pub blowup_guard: f64,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_true")]
    pub nonlinearity: bool,
}

impl SolverConfig {
    pub fn build(&self, grid: TorusGrid) -> GalerkinConfig {
        GalerkinConfig {
            grid,
            p: self.p,
            cutoff_j: self.cutoff_j,
            dt: self.dt,
            t_end: self.t_end,
            blowup_guard: self.blowup_guard,
            snapshot_every: self.snapshot_every,
            nonlinearity: self.nonlinearity,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RandomizationConfig {
    pub family: CoefficientDistribution,
    /// Which sample stream a single-sample mode (remainder) draws.
    #[serde(default)]
    pub sample_index: u64,
}

/// Ensemble sweep: `solver.cutoff_j` is replaced by each entry of `cutoffs`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub samples: usize,
    pub cutoffs: Vec<usize>,
    /// Exceptional probability of the reported quantile.
    #[serde(default = "default_eta")]
    pub eta: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TailsConfig {
    pub t_end: f64,
    #[serde(with = "crate::io::exponent_serde")]
    pub q1: f64,
    pub norm: NormSpec,
    #[serde(default = "default_time_nodes")]
    pub time_nodes: usize,
    pub samples: usize,
    /// Grid size when the λ-grid is derived from the sample quantiles.
    #[serde(default = "default_lambda_count")]
    pub lambda_count: usize,
    /// Explicit λ-grid; wins over the automatic one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_j: Option<usize>,
    #[serde(default)]
    pub tilde: bool,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InequalitiesConfig {
    #[serde(default = "default_power_law_count")]
    pub power_law_count: usize,
    /// Monte Carlo size for the moment-growth check; 0 skips it.
    #[serde(default)]
    pub kpz_samples: usize,
    #[serde(default = "default_kpz_bootstrap")]
    pub kpz_bootstrap: usize,
}

impl Default for InequalitiesConfig {
    fn default() -> Self {
        Self {
            power_law_count: default_power_law_count(),
            kpz_samples: 0,
            kpz_bootstrap: default_kpz_bootstrap(),
        }
    }
}

/// A labelled norm for the report table.  `deny_unknown_fields` is
/// incompatible with `flatten`, so typos inside the spec surface as parse
/// errors from the spec itself.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct NamedNorm {
    pub label: String,
    #[serde(flatten)]
    pub spec: NormSpec,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub norms: Vec<NamedNorm>,
    /// Trace CSVs to fold into a recomputed a priori quantile.
    #[serde(default)]
    pub traces: Vec<PathBuf>,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional here; the positional CLI argument always wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<RunMode>,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub randomization: Option<RandomizationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tails: Option<TailsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequalities: Option<InequalitiesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportConfig>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Rewrite one leaf of a JSON document by dotted path, creating intermediate
/// objects as needed.  The value is parsed as JSON when possible and kept as
/// a string otherwise, so `--set solver.dt=1e-3` assigns a number and
/// `--set data.kind=zero` a string.  Arrays are replaced wholesale with a
/// JSON literal (`--set ensemble.cutoffs=[3,4]`).
pub fn apply_override(doc: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::InvalidArgument(format!("override `{assignment}` must look like key.path=value"))
    })?;
    if path.is_empty() {
        return Err(Error::InvalidArgument("override path must not be empty".into()));
    }
    let leaf: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    let mut cursor = doc;
    for part in &parts[..parts.len() - 1] {
        let map = cursor.as_object_mut().ok_or_else(|| {
            Error::InvalidArgument(format!("override path `{path}` crosses a non-object at `{part}`"))
        })?;
        cursor = map.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    let last = parts[parts.len() - 1];
    let map = cursor.as_object_mut().ok_or_else(|| {
        Error::InvalidArgument(format!("override path `{path}` ends inside a non-object"))
    })?;
    map.insert(last.to_string(), leaf);
    Ok(())
}

/// Read a config file, apply `--set` overrides, and let the command-line
/// mode/seed/threads win over the file.
pub fn load_config(
    path: &Path,
    overrides: &[String],
    mode: Option<RunMode>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)?;
    for assignment in overrides {
        apply_override(&mut doc, assignment)?;
    }
    let mut config: RunConfig = serde_json::from_value(doc)?;
    if mode.is_some() {
        config.mode = mode;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if threads.is_some() {
        config.threads = threads;
    }
    Ok(config)
}

/// Execute one run and return the manifest path.
pub fn run(config: &RunConfig) -> Result<PathBuf> {
    let mode = config
        .mode
        .ok_or_else(|| Error::InvalidArgument("mode missing (set it in the config or as the first argument)".into()))?;
    match config.threads {
        Some(0) => Err(Error::InvalidArgument("threads must be >= 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(config, mode))
        }
        None => run_inner(config, mode),
    }
}

fn run_inner(config: &RunConfig, mode: RunMode) -> Result<PathBuf> {
    let grid = config.grid.build()?;
    let out = config.output_dir.clone();
    fs::create_dir_all(&out)?;
    let mut effective = config.clone();
    effective.mode = Some(mode);
    let mut config_text = serde_json::to_string_pretty(&effective)?;
    config_text.push('\n');
    fs::write(out.join("config.json"), &config_text)?;
    let mut manifest = Manifest::new(mode.as_str(), config.seed, io::sha256_hex(config_text.as_bytes()));
    manifest.record(&out, &out.join("config.json"))?;
    match mode {
        RunMode::Simulate => run_simulate(config, grid, &out, &mut manifest)?,
        RunMode::Remainder => run_remainder(config, grid, &out, &mut manifest)?,
        RunMode::Ensemble => run_ensemble(config, grid, &out, &mut manifest)?,
        RunMode::Inequalities => run_inequalities(config, grid, &out, &mut manifest)?,
        RunMode::Tails => run_tails(config, grid, &out, &mut manifest)?,
        RunMode::Report => run_report(config, grid, &out, &mut manifest)?,
    }
    let manifest_path = out.join("manifest.json");
    manifest.save(&manifest_path)?;
    Ok(manifest_path)
}

fn require<'a, T>(section: &'a Option<T>, name: &str, mode: RunMode) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| {
        Error::InvalidArgument(format!("mode `{mode}` needs the `{name}` config section"))
    })
}

fn build_data(config: &RunConfig, grid: TorusGrid, mode: RunMode) -> Result<WavePair> {
    let data = require(&config.data, "data", mode)?;
    match data {
        DataConfig::Zero => WavePair::new(SpectralField::zero(grid), SpectralField::zero(grid)),
        DataConfig::Cosine { mode, amplitude, velocity_amplitude } => {
            let cosine = |a: f64| -> Result<SpectralField> {
                if *mode == [0, 0, 0] {
                    SpectralField::harmonic(grid, *mode, Complex64::new(a, 0.0))
                } else {
                    SpectralField::harmonic(grid, *mode, Complex64::new(0.5 * a, 0.0))
                }
            };
            WavePair::new(cosine(*amplitude)?, cosine(*velocity_amplitude)?)
        }
        DataConfig::PowerLaw { sigma, amplitude, profile_seed } => {
            Ok(corpus::power_law_pair(grid, *sigma, *amplitude, *profile_seed))
        }
        DataConfig::File { u0, u1 } => {
            let u0 = io::load_field_json(u0)?;
            let u1 = io::load_field_json(u1)?;
            if u0.grid() != &grid || u1.grid() != &grid {
                return Err(Error::GridMismatch(
                    "checkpoint grids do not match the configured grid".into(),
                ));
            }
            WavePair::new(u0, u1)
        }
    }
}

fn build_randomization(config: &RunConfig, grid: TorusGrid, mode: RunMode) -> Result<(RandomizationSpec, RandomizationConfig)> {
    let section = *require(&config.randomization, "randomization", mode)?;
    let base = build_data(config, grid, mode)?;
    let spec = RandomizationSpec::new(base.u0, base.u1, section.family, config.seed)?;
    Ok((spec, section))
}

/// Turn a guard trip into the error the run contract demands.
fn reject_blowup(output: &SolveOutput) -> Result<()> {
    match output.termination {
        Termination::Completed => Ok(()),
        Termination::BlowupGuard { step, t, jump } => Err(Error::Blowup { step, t, jump }),
    }
}

fn write_trace(trace: &galerkin::EnergyTrace, path: &Path) -> Result<()> {
    trace.write_csv(fs::File::create(path)?)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    fs::write(path, body)?;
    Ok(())
}

fn run_simulate(config: &RunConfig, grid: TorusGrid, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let solver = require(&config.solver, "solver", RunMode::Simulate)?.build(grid);
    let data = build_data(config, grid, RunMode::Simulate)?;
    eprintln!(
        "[simulate] grid d={} N={}, p={}, cutoff j={}, {} steps",
        grid.dim(),
        grid.modes_per_axis(),
        solver.p,
        solver.cutoff_j,
        solver.steps()
    );
    let output = galerkin::solve_regularized_direct(&solver, &data)?;
    reject_blowup(&output)?;
    eprintln!(
        "[simulate] done, relative energy drift {:.3e}",
        output.trace.relative_drift()
    );
    let state = output.final_state();
    for (name, field) in [("state_u.json", &state.v), ("state_ut.json", &state.w)] {
        let path = out.join(name);
        io::save_field_json(field, &path)?;
        manifest.record(out, &path)?;
    }
    let trace_path = out.join("trajectory.csv");
    write_trace(&output.trace, &trace_path)?;
    manifest.record(out, &trace_path)?;
    Ok(())
}

fn run_remainder(config: &RunConfig, grid: TorusGrid, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let solver = require(&config.solver, "solver", RunMode::Remainder)?.build(grid);
    let (spec, section) = build_randomization(config, grid, RunMode::Remainder)?;
    for (name, field) in [("profile_u0.json", &spec.u0), ("profile_u1.json", &spec.u1)] {
        let path = out.join(name);
        io::save_field_json(field, &path)?;
        manifest.record(out, &path)?;
    }
    let spec_path = out.join("randomization.json");
    write_json(&RandomizationSpecFile::describe(&spec, "profile_u0.json", "profile_u1.json"), &spec_path)?;
    manifest.record(out, &spec_path)?;
    let (ru0, ru1) = spec.sample(section.sample_index);
    eprintln!(
        "[remainder] sample {} of the {:?} randomization, cutoff j={}",
        section.sample_index, section.family, solver.cutoff_j
    );
    let output = galerkin::solve_remainder(&solver, &WavePair::new(ru0, ru1)?, section.sample_index)?;
    reject_blowup(&output)?;
    let state = output.final_state();
    for (name, field) in [("state_v.json", &state.v), ("state_w.json", &state.w)] {
        let path = out.join(name);
        io::save_field_json(field, &path)?;
        manifest.record(out, &path)?;
    }
    let trace_path = out.join("remainder_trace.csv");
    write_trace(&output.trace, &trace_path)?;
    manifest.record(out, &trace_path)?;
    eprintln!("[remainder] final remainder l2 = {:.6e}", state.v.l2_norm());
    Ok(())
}

fn run_ensemble(config: &RunConfig, grid: TorusGrid, out: &Path, manifest: &mut Manifest) -> Result<()> {
    use rayon::prelude::*;
    let solver = *require(&config.solver, "solver", RunMode::Ensemble)?;
    let section = require(&config.ensemble, "ensemble", RunMode::Ensemble)?.clone();
    if section.samples == 0 || section.cutoffs.is_empty() {
        return Err(Error::InvalidArgument("ensemble needs samples >= 1 and at least one cutoff".into()));
    }
    let (spec, _) = build_randomization(config, grid, RunMode::Ensemble)?;
    eprintln!(
        "[ensemble] {} samples x cutoffs {:?}, T = {}",
        section.samples, section.cutoffs, solver.t_end
    );
    // sample-major parallelism; each member solves its whole cutoff ladder
    let runs: Vec<Vec<SolveOutput>> = (0..section.samples as u64)
        .into_par_iter()
        .map(|m| -> Result<Vec<SolveOutput>> {
            let (ru0, ru1) = spec.sample(m);
            let pair = WavePair::new(ru0, ru1)?;
            section
                .cutoffs
                .iter()
                .map(|&j| {
                    let mut cfg = solver;
                    cfg.cutoff_j = j;
                    galerkin::solve_remainder(&cfg.build(grid), &pair, m)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut aborted_total = 0usize;
    for (m, member) in runs.iter().enumerate() {
        for (j, output) in section.cutoffs.iter().zip(member) {
            let path = out.join(format!("trace_s{m}_j{j}.csv"));
            write_trace(&output.trace, &path)?;
            manifest.record(out, &path)?;
            if !output.completed() {
                aborted_total += 1;
            }
        }
    }
    for (idx, &j) in section.cutoffs.iter().enumerate() {
        let entries: Vec<EnsembleEntry> = runs
            .iter()
            .enumerate()
            .map(|(m, member)| EnsembleEntry {
                sample_index: m as u64,
                traces: vec![member[idx].trace.clone()],
                aborted: !member[idx].completed(),
            })
            .collect();
        let report = inequality::apriori_bound_report(&entries, solver.t_end, section.eta)?;
        let path = out.join(format!("apriori_j{j}.json"));
        write_json(&report, &path)?;
        manifest.record(out, &path)?;
    }
    eprintln!(
        "[ensemble] {} runs, {} tripped the guard",
        section.samples * section.cutoffs.len(),
        aborted_total
    );
    Ok(())
}

fn run_inequalities(config: &RunConfig, grid: TorusGrid, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let section = config.inequalities.unwrap_or_default();
    eprintln!(
        "[inequalities] battery on d={} N={} with {} power-law fields",
        grid.dim(),
        grid.modes_per_axis(),
        section.power_law_count
    );
    let reports = inequality::standard_battery(grid, config.seed, section.power_law_count)?;
    for r in &reports {
        eprintln!("[inequalities] {:<40} max ratio {:.6e} pass={}", r.name, r.max_ratio, r.pass);
    }
    let reports_path = out.join("reports.json");
    write_json(&reports, &reports_path)?;
    manifest.record(out, &reports_path)?;
    if section.kpz_samples > 0 {
        let coefficients = match &config.data {
            Some(_) => build_data(config, grid, RunMode::Inequalities)?.u0,
            None => corpus::power_law_field(grid, 1.0, 1.0, config.seed),
        };
        let family = config.randomization.map_or(CoefficientDistribution::Gaussian, |r| r.family);
        let qs: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
        let report = inequality::kpz_check(
            &coefficients,
            family,
            &qs,
            section.kpz_samples,
            config.seed,
            section.kpz_bootstrap,
        )?;
        let path = out.join("kpz.json");
        write_json(&report, &path)?;
        manifest.record(out, &path)?;
    }
    Ok(())
}

fn run_tails(config: &RunConfig, grid: TorusGrid, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let section = require(&config.tails, "tails", RunMode::Tails)?.clone();
    let (spec, _) = build_randomization(config, grid, RunMode::Tails)?;
    let tail_spec = TailSpec {
        t_end: section.t_end,
        q1: section.q1,
        norm: section.norm,
        time_nodes: section.time_nodes,
        truncation_j: section.truncation_j,
        tilde: section.tilde,
    };
    eprintln!(
        "[tails] {} samples, {} time nodes over (0,{})",
        section.samples, section.time_nodes, section.t_end
    );
    let norms = tails::sample_spacetime_norms(&spec, &tail_spec, section.samples)?;
    let lambda = match &section.lambda_grid {
        Some(grid_l) => grid_l.clone(),
        None => tails::auto_lambda_grid(&norms, section.lambda_count)?,
    };
    let estimate = tails::tail_estimate_from_norms(&norms, &lambda)?;
    eprintln!(
        "[tails] fitted c = {:.6e}, r2 = {:.4}, window {}..{}",
        estimate.fitted_c, estimate.r_squared, estimate.fit_window.0, estimate.fit_window.1
    );
    let csv_path = out.join("tails.csv");
    tails::write_tail_csv(&estimate, fs::File::create(&csv_path)?)?;
    manifest.record(out, &csv_path)?;
    let fit_path = out.join("tail_fit.json");
    write_json(&estimate, &fit_path)?;
    manifest.record(out, &fit_path)?;
    Ok(())
}

fn run_report(config: &RunConfig, grid: TorusGrid, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let section = require(&config.report, "report", RunMode::Report)?.clone();
    if section.norms.is_empty() && section.traces.is_empty() {
        return Err(Error::InvalidArgument("report needs norms to tabulate or traces to fold".into()));
    }
    if !section.norms.is_empty() {
        let data = build_data(config, grid, RunMode::Report)?;
        let mut body = String::from("norm_label,s,p,r,value,j_min,j_max\n");
        for named in &section.norms {
            let report = lp::besov_norm_report(&data.u0, &named.spec)?;
            let (j_min, j_max) = match report.window {
                Some((lo, hi)) => (lo.to_string(), hi.to_string()),
                None => (String::new(), String::new()),
            };
            body.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                named.label, named.spec.s, named.spec.p, named.spec.r, report.value, j_min, j_max
            ));
        }
        let path = out.join("norms.csv");
        fs::write(&path, body)?;
        manifest.record(out, &path)?;
    }
    if !section.traces.is_empty() {
        let entries: Vec<EnsembleEntry> = section
            .traces
            .iter()
            .enumerate()
            .map(|(k, path)| -> Result<EnsembleEntry> {
                let trace = galerkin::EnergyTrace::read_csv(fs::File::open(path)?)?;
                Ok(EnsembleEntry { sample_index: k as u64, traces: vec![trace], aborted: false })
            })
            .collect::<Result<_>>()?;
        let t_end = entries
            .iter()
            .flat_map(|e| e.traces.iter().filter_map(|t| t.times.last().copied()))
            .fold(0.0f64, f64::max);
        let report = inequality::apriori_bound_report(&entries, t_end, section.eta)?;
        let path = out.join("apriori_recomputed.json");
        write_json(&report, &path)?;
        manifest.record(out, &path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_doc() -> serde_json::Value {
        json!({
            "grid": {"dimension": 1, "modes_per_axis": 32},
            "data": {"kind": "zero"},
            "solver": {"p": 5.0, "cutoff_j": 3, "dt": 1e-2, "t_end": 0.1},
            "output_dir": "/tmp/unused",
            "seed": 7
        })
    }

    #[test]
    fn override_rewrites_nested_leaves() {
        let mut doc = base_doc();
        apply_override(&mut doc, "solver.dt=5e-3").unwrap();
        assert_eq!(doc["solver"]["dt"], json!(5e-3));
        apply_override(&mut doc, "data.kind=power_law").unwrap();
        assert_eq!(doc["data"]["kind"], json!("power_law"));
        // creates intermediate objects on demand
        apply_override(&mut doc, "ensemble.cutoffs=[3,4]").unwrap();
        assert_eq!(doc["ensemble"]["cutoffs"], json!([3, 4]));
        // unparseable values stay strings
        apply_override(&mut doc, "report.eta=0.05").unwrap();
        assert_eq!(doc["report"]["eta"], json!(0.05));
    }

    #[test]
    fn override_rejects_malformed_paths() {
        let mut doc = base_doc();
        assert!(apply_override(&mut doc, "no_equals_sign").is_err());
        assert!(apply_override(&mut doc, "=5").is_err());
        // seed is a number, not an object
        assert!(apply_override(&mut doc, "seed.inner=1").is_err());
    }

    #[test]
    fn mode_string_forms_roundtrip() {
        for mode in [
            RunMode::Simulate,
            RunMode::Remainder,
            RunMode::Ensemble,
            RunMode::Inequalities,
            RunMode::Tails,
            RunMode::Report,
        ] {
            assert_eq!(mode.as_str().parse::<RunMode>().unwrap(), mode);
            assert_eq!(mode.to_string(), mode.as_str());
        }
        assert!("plot".parse::<RunMode>().is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let config = RunConfig {
            mode: Some(RunMode::Ensemble),
            grid: GridConfig { dimension: 1, modes_per_axis: 64, oversample: 2 },
            data: Some(DataConfig::PowerLaw { sigma: 1.2, amplitude: 0.5, profile_seed: 3 }),
            solver: Some(SolverConfig {
                p: 7.0,
                cutoff_j: 4,
                dt: 1e-3,
                t_end: 1.0,
                blowup_guard: 0.1,
                snapshot_every: 0,
                nonlinearity: true,
            }),
            randomization: Some(RandomizationConfig {
                family: CoefficientDistribution::Gaussian,
                sample_index: 0,
            }),
            ensemble: Some(EnsembleConfig { samples: 4, cutoffs: vec![3, 4], eta: 0.05 }),
            tails: Some(TailsConfig {
                t_end: 1.0,
                q1: f64::INFINITY,
                norm: NormSpec::new(0.0, 4.0, 2.0),
                time_nodes: 64,
                samples: 100,
                lambda_count: 40,
                lambda_grid: None,
                truncation_j: Some(3),
                tilde: false,
            }),
            inequalities: Some(InequalitiesConfig::default()),
            report: Some(ReportConfig {
                norms: vec![NamedNorm { label: "besov".into(), spec: NormSpec::new(0.5, 2.0, 2.0) }],
                traces: vec![],
                eta: 0.05,
            }),
            output_dir: PathBuf::from("/tmp/out"),
            seed: 42,
            threads: Some(2),
        };
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
        // the infinite exponent survives as "inf"
        assert!(text.contains("\"inf\""));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut doc = base_doc();
        apply_override(&mut doc, "solver.dtt=1e-3").unwrap();
        let err = serde_json::from_value::<RunConfig>(doc).unwrap_err();
        assert!(err.to_string().contains("dtt"), "error should name the typo: {err}");
    }

    #[test]
    fn cosine_data_matches_closed_form() {
        let config: RunConfig = serde_json::from_value(json!({
            "grid": {"dimension": 1, "modes_per_axis": 32},
            "data": {"kind": "cosine", "mode": [3, 0, 0], "amplitude": 0.4},
            "output_dir": "/tmp/unused"
        }))
        .unwrap();
        let grid = config.grid.build().unwrap();
        let pair = build_data(&config, grid, RunMode::Simulate).unwrap();
        let samples = pair.u0.synthesize();
        let max = samples.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - 0.4).abs() < 1e-12);
        assert_eq!(pair.u1.l2_norm(), 0.0);
    }

    #[test]
    fn missing_sections_are_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let config: RunConfig = serde_json::from_value(json!({
            "mode": "simulate",
            "grid": {"dimension": 1, "modes_per_axis": 32},
            "output_dir": dir.path()
        }))
        .unwrap();
        let err = run(&config).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("solver") || text.contains("data"), "got: {text}");
    }
}
