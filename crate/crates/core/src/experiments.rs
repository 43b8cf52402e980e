//! Seeded experiment drivers: instance generation, measurement, recovery and
//! the normalized error, plus the noise and regularity sweeps.
//!
//! Every trial draws its support, amplitudes and noise from streams derived
//! from `(seed, group, trial)`, so rows do not depend on thread scheduling.
//! Runtimes are kept in the last CSV column and are the only
//! non-reproducible output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::io::fmt17;
use crate::operators::{forward, GriddedFunction, MeasurementMatrix};
use crate::signal::{
    add_noise, calibrate_sigma, derive_seed, gen_signal, gen_support, CellSeparation, CellSizing, DiracSignal,
    Measurement,
};
use crate::solver::{extract_spikes, solve, Backend, SolveConfig, SolveMode, SolveResult};
use crate::sphere::{build_grid, SphereGrid};

const STREAM_SUPPORT: u64 = 1;
const STREAM_AMPLITUDE: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Which programs a trial solves on its instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Feasibility,
    L1Min,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<SolveMode> {
        match self {
            Self::Feasibility => vec![SolveMode::Feasibility],
            Self::L1Min => vec![SolveMode::L1Min],
            Self::Both => vec![SolveMode::L1Min, SolveMode::Feasibility],
        }
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Self::Both),
            other => match other.parse::<SolveMode>()? {
                SolveMode::Feasibility => Ok(Self::Feasibility),
                SolveMode::L1Min => Ok(Self::L1Min),
            },
        }
    }
}

/// Noise level of a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// Per-instance σ calibrated to this SNR in dB (`inf` means noiseless).
    SnrDb(f64),
    /// Fixed coefficient noise level.
    Sigma(f64),
}

impl NoiseLevel {
    fn sigma(self, clean: &crate::operators::HarmonicCoeffs) -> Result<f64> {
        match self {
            Self::SnrDb(db) => calibrate_sigma(clean, db),
            Self::Sigma(s) => Ok(s),
        }
    }

    fn label(self) -> String {
        match self {
            Self::SnrDb(db) => format!("snr_db={}", fmt17(db)),
            Self::Sigma(s) => format!("sigma={}", fmt17(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub l: usize,
    pub n: usize,
    pub r: usize,
    pub nu: f64,
    pub sizing: CellSizing,
    pub separation: CellSeparation,
    pub noise: NoiseLevel,
    /// Replaces the oracle budget when set.
    pub delta: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: ModeSelection,
    pub solver: SolveConfig,
    /// Worker threads for independent trials; 0 uses every core.
    pub threads: usize,
    /// Regularities visited by the regularity sweep.
    pub r_values: Vec<usize>,
    /// SNR levels (dB) visited by the noise sweep.
    pub snr_values: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            l: 50,
            n: 12,
            r: 2,
            nu: 2.5 * std::f64::consts::PI,
            sizing: CellSizing::PerCell(10),
            separation: CellSeparation::Fixed,
            noise: NoiseLevel::SnrDb(30.0),
            delta: None,
            trials: 10,
            seed: 0,
            mode: ModeSelection::L1Min,
            solver: SolveConfig::default(),
            threads: 0,
            r_values: vec![1, 2, 3, 4],
            snr_values: vec![20.0, 30.0, 40.0, 50.0, 60.0],
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(format!("cannot parse {key} = {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

impl ExperimentConfig {
    /// Keys accepted by [`ExperimentConfig::set`], in the spelling used by
    /// config files and command-line flags.
    pub const KEYS: &'static [&'static str] = &[
        "L",
        "N",
        "r",
        "nu",
        "points_per_cell",
        "total_points",
        "separation",
        "snr_db",
        "sigma",
        "delta",
        "trials",
        "seed",
        "mode",
        "feas_tol",
        "obj_tol",
        "max_iters",
        "step_ratio",
        "backend",
        "threads",
        "r_values",
        "snr_values",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "L" => self.l = parse(key, value)?,
            "N" => self.n = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "points_per_cell" => self.sizing = CellSizing::PerCell(parse(key, value)?),
            "total_points" => self.sizing = CellSizing::Total(parse(key, value)?),
            "separation" => {
                self.separation = match value {
                    "scaled" => CellSeparation::Scaled,
                    "fixed" => CellSeparation::Fixed,
                    other => return Err(invalid(format!("unknown separation {other:?} (scaled or fixed)"))),
                }
            }
            "snr_db" => self.noise = NoiseLevel::SnrDb(parse(key, value)?),
            "sigma" => self.noise = NoiseLevel::Sigma(parse(key, value)?),
            "delta" => self.delta = Some(parse(key, value)?),
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "feas_tol" => self.solver.feas_tol = parse(key, value)?,
            "obj_tol" => self.solver.obj_tol = parse(key, value)?,
            "max_iters" => self.solver.max_iters = parse(key, value)?,
            "step_ratio" => self.solver.step_ratio = parse(key, value)?,
            "backend" => self.solver.backend = value.parse::<Backend>()?,
            "threads" => self.threads = parse(key, value)?,
            "r_values" => self.r_values = parse_list(key, value)?,
            "snr_values" => self.snr_values = parse_list(key, value)?,
            other => return Err(invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
                path: path.to_owned(),
                reason: format!("line {}: expected key=value, found {line:?}", lineno + 1),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l <= self.n {
            return Err(invalid(format!("need L > N ≥ 1, got L = {}, N = {}", self.l, self.n)));
        }
        if self.r == 0 || self.r_values.contains(&0) {
            return Err(invalid("regularity r must be at least 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(invalid(format!("nu = {} must be positive", self.nu)));
        }
        match self.noise {
            NoiseLevel::SnrDb(db) if db.is_nan() => return Err(invalid("snr_db is NaN")),
            NoiseLevel::Sigma(s) if !(s >= 0.0) || !s.is_finite() => {
                return Err(invalid(format!("sigma = {s} must be finite and nonnegative")))
            }
            _ => {}
        }
        if self.snr_values.iter().any(|v| v.is_nan()) {
            return Err(invalid("snr_values contains NaN"));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(invalid(format!("delta = {d} must be finite and nonnegative")));
            }
        }
        self.solver.validate()
    }

    /// Super-resolution factor `L/N`.
    pub fn srf(&self) -> f64 {
        self.l as f64 / self.n as f64
    }

    fn workers(&self) -> usize {
        match self.threads {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            t => t,
        }
    }
}

/// Sum of absolute differences over the stored grid points divided by `L²`.
pub fn normalized_l1_error(fhat: &GriddedFunction, truth: &DiracSignal) -> Result<f64> {
    let l = fhat.grid().resolution() as f64;
    Ok(fhat.l1_distance(&truth.to_gridded())? / (l * l))
}

/// A generated instance and its measurement.
#[derive(Debug, Clone)]
pub struct Instance {
    pub signal: DiracSignal,
    pub measurement: Measurement,
}

/// Draws the instance of trial `trial` in group `group` (the regularity for
/// the regularity sweep, 0 elsewhere). The noise draw depends only on the
/// trial, so levels of a noise sweep are scaled copies of one realisation.
pub fn make_instance(
    config: &ExperimentConfig,
    op: &MeasurementMatrix,
    r: usize,
    noise: NoiseLevel,
    group: u64,
    trial: usize,
) -> Result<Instance> {
    let grid = op.grid();
    let master = derive_seed(config.seed, group, trial as u64);
    let support = gen_support(
        r,
        config.nu,
        config.n,
        grid,
        config.sizing,
        config.separation,
        derive_seed(master, STREAM_SUPPORT, 0),
    )?;
    let signal = gen_signal(grid, &support, derive_seed(master, STREAM_AMPLITUDE, 0))?;
    let clean = forward(&signal, config.n)?;
    let sigma = noise.sigma(&clean)?;
    let mut measurement = add_noise(op, &clean, sigma, derive_seed(master, STREAM_NOISE, 0))?;
    if let Some(d) = config.delta {
        measurement = measurement.with_delta(d)?;
    }
    Ok(Instance { signal, measurement })
}

/// One solved trial. Every field except `runtime_s` is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub r: usize,
    pub noise: NoiseLevel,
    pub mode: SolveMode,
    pub sigma: f64,
    pub noise_l2: f64,
    pub delta: f64,
    pub snr_db: f64,
    pub error: f64,
    pub residual: f64,
    pub objective: f64,
    /// Solver status, or `error` when generation or the solve failed.
    pub status: String,
    pub iterations: usize,
    pub runtime_s: f64,
}

impl TrialRecord {
    pub const HEADER: &'static str =
        "trial,r,noise,mode,sigma,noise_l2,delta,snr_db,error,residual,objective,status,iterations,runtime_s";

    fn failed(trial: usize, r: usize, noise: NoiseLevel, mode: SolveMode, err: &Error) -> Self {
        eprintln!("trial {trial} (r = {r}, {}, {mode}) failed: {err}", noise.label());
        Self {
            trial,
            r,
            noise,
            mode,
            sigma: f64::NAN,
            noise_l2: f64::NAN,
            delta: f64::NAN,
            snr_db: f64::NAN,
            error: f64::NAN,
            residual: f64::NAN,
            objective: f64::NAN,
            status: "error".into(),
            iterations: 0,
            runtime_s: 0.0,
        }
    }

    /// The CSV row without the runtime column.
    pub fn metric_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.r,
            self.noise.label(),
            self.mode,
            fmt17(self.sigma),
            fmt17(self.noise_l2),
            fmt17(self.delta),
            fmt17(self.snr_db),
            fmt17(self.error),
            fmt17(self.residual),
            fmt17(self.objective),
            self.status,
            self.iterations,
        )
    }

    pub fn csv_row(&self) -> String {
        format!("{},{}", self.metric_fields(), fmt17(self.runtime_s))
    }
}

fn record(trial: usize, r: usize, noise: NoiseLevel, inst: &Instance, res: &SolveResult) -> Result<TrialRecord> {
    let m = &inst.measurement;
    Ok(TrialRecord {
        trial,
        r,
        noise,
        mode: SolveMode::L1Min,
        sigma: m.sigma,
        noise_l2: m.noise.l2_norm(),
        delta: m.delta,
        snr_db: m.snr_db.unwrap_or(f64::INFINITY),
        error: normalized_l1_error(&res.g, &inst.signal)?,
        residual: res.residual_l1,
        objective: res.objective,
        status: res.status.to_string(),
        iterations: res.iterations,
        runtime_s: res.runtime.as_secs_f64(),
    })
}

/// Generates, measures and solves one trial in every selected mode. Failures
/// become `error` rows instead of aborting.
pub fn run_trial(
    config: &ExperimentConfig,
    op: &MeasurementMatrix,
    r: usize,
    noise: NoiseLevel,
    group: u64,
    trial: usize,
) -> Vec<TrialRecord> {
    let modes = config.mode.modes();
    let inst = match make_instance(config, op, r, noise, group, trial) {
        Ok(inst) => inst,
        Err(e) => return modes.iter().map(|&m| TrialRecord::failed(trial, r, noise, m, &e)).collect(),
    };
    modes
        .into_iter()
        .map(|mode| {
            let cfg = SolveConfig {
                delta: inst.measurement.delta,
                mode,
                ..config.solver.clone()
            };
            let start = Instant::now();
            solve(&inst.measurement.s, op, &cfg)
                .and_then(|res| record(trial, r, noise, &inst, &res))
                .map(|rec| TrialRecord {
                    mode,
                    runtime_s: start.elapsed().as_secs_f64(),
                    ..rec
                })
                .unwrap_or_else(|e| TrialRecord::failed(trial, r, noise, mode, &e))
        })
        .collect()
}

/// Runs `jobs` on up to `workers` threads and returns results in job order.
fn run_ordered<T: Send>(workers: usize, jobs: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = job(i);
                slots.lock().expect("worker panicked")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|v| v.expect("every job ran"))
        .collect()
}

fn operator(config: &ExperimentConfig) -> Result<MeasurementMatrix> {
    config.validate()?;
    let grid: Arc<SphereGrid> = Arc::new(build_grid(config.l)?);
    Ok(MeasurementMatrix::new(grid, config.n))
}

/// Mean and maximum of the finite errors, with the number of failed rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub trials: usize,
    pub failed: usize,
    pub mean: f64,
    pub max: f64,
}

impl ErrorSummary {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let (mut count, mut failed, mut sum, mut max) = (0, 0, 0.0, f64::NEG_INFINITY);
        for row in rows {
            if row.error.is_finite() {
                count += 1;
                sum += row.error;
                max = f64::max(max, row.error);
            } else {
                failed += 1;
            }
        }
        Self {
            trials: count,
            failed,
            mean: if count > 0 { sum / count as f64 } else { f64::NAN },
            max: if count > 0 { max } else { f64::NAN },
        }
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut n, mut s) = (0usize, 0.0);
    for x in xs.into_iter().filter(|x| x.is_finite()) {
        n += 1;
        s += x;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Per-level aggregate of the noise sweep for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLevelSummary {
    pub level: usize,
    pub snr_target_db: f64,
    pub mode: SolveMode,
    pub mean_sigma: f64,
    pub mean_noise_l2: f64,
    pub mean_delta: f64,
    pub errors: ErrorSummary,
}

#[derive(Debug, Clone)]
pub struct NoiseSweep {
    pub rows: Vec<TrialRecord>,
    pub levels: Vec<NoiseLevelSummary>,
}

impl NoiseSweep {
    /// Mean error against mean `δ` for one mode, ordered by level.
    pub fn curve(&self, mode: SolveMode) -> (Vec<f64>, Vec<f64>) {
        self.levels
            .iter()
            .filter(|l| l.mode == mode)
            .map(|l| (l.mean_delta, l.errors.mean))
            .unzip()
    }

    pub fn slope(&self, mode: SolveMode) -> f64 {
        let (x, y) = self.curve(mode);
        loglog_slope(&x, &y)
    }
}

/// Solves every trial at every SNR in `config.snr_values`, in both modes
/// unless the config restricts them. Trial `t` uses the same support,
/// amplitudes and normalised noise draw at every level.
pub fn sweep_noise(config: &ExperimentConfig) -> Result<NoiseSweep> {
    if config.snr_values.len() < 2 {
        return Err(invalid("a noise sweep needs at least two levels"));
    }
    let op = operator(config)?;
    let levels = config.snr_values.len();
    let jobs = levels * config.trials;
    let rows: Vec<TrialRecord> = run_ordered(config.workers(), jobs, |j| {
        let (level, trial) = (j / config.trials, j % config.trials);
        run_trial(config, &op, config.r, NoiseLevel::SnrDb(config.snr_values[level]), 0, trial)
    })
    .into_iter()
    .flatten()
    .collect();

    let mut summaries = Vec::new();
    for (level, &db) in config.snr_values.iter().enumerate() {
        for mode in config.mode.modes() {
            let sel: Vec<&TrialRecord> = rows
                .iter()
                .filter(|r| r.noise == NoiseLevel::SnrDb(db) && r.mode == mode)
                .collect();
            summaries.push(NoiseLevelSummary {
                level,
                snr_target_db: db,
                mode,
                mean_sigma: mean(sel.iter().map(|r| r.sigma)),
                mean_noise_l2: mean(sel.iter().map(|r| r.noise_l2)),
                mean_delta: mean(sel.iter().map(|r| r.delta)),
                errors: ErrorSummary::of(sel.iter().copied()),
            });
        }
    }
    Ok(NoiseSweep {
        rows,
        levels: summaries,
    })
}

#[derive(Debug, Clone)]
pub struct RegularitySweep {
    pub rows: Vec<TrialRecord>,
    /// Keyed by `(r, mode)`.
    pub table: BTreeMap<(usize, String), ErrorSummary>,
}

/// Solves `config.trials` instances for each `r` in `config.r_values`.
pub fn sweep_regularity(config: &ExperimentConfig) -> Result<RegularitySweep> {
    let op = operator(config)?;
    let jobs = config.r_values.len() * config.trials;
    let noise = config.noise;
    let rows: Vec<TrialRecord> = run_ordered(config.workers(), jobs, |j| {
        let r = config.r_values[j / config.trials];
        run_trial(config, &op, r, noise, r as u64, j % config.trials)
    })
    .into_iter()
    .flatten()
    .collect();
    let mut table = BTreeMap::new();
    for &r in &config.r_values {
        for mode in config.mode.modes() {
            let summary = ErrorSummary::of(rows.iter().filter(|row| row.r == r && row.mode == mode));
            table.insert((r, mode.to_string()), summary);
        }
    }
    Ok(RegularitySweep { rows, table })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn write_rows(path: &Path, rows: &[TrialRecord]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", TrialRecord::HEADER)?;
    for row in rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

impl NoiseSweep {
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        writeln!(
            out,
            "level,snr_target_db,mode,mean_sigma,mean_noise_l2,mean_delta,trials,failed,mean_error,max_error"
        )?;
        for l in &self.levels {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                l.level,
                fmt17(l.snr_target_db),
                l.mode,
                fmt17(l.mean_sigma),
                fmt17(l.mean_noise_l2),
                fmt17(l.mean_delta),
                l.errors.trials,
                l.errors.failed,
                fmt17(l.errors.mean),
                fmt17(l.errors.max),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    /// Log-log line chart of mean error against mean `δ`, one polyline per
    /// mode.
    pub fn write_svg(&self, path: &Path) -> Result<()> {
        let curves: Vec<(SolveMode, Vec<(f64, f64)>)> = [SolveMode::L1Min, SolveMode::Feasibility]
            .into_iter()
            .map(|m| {
                let (x, y) = self.curve(m);
                let pts = x.into_iter().zip(y).filter(|(x, y)| *x > 0.0 && *y > 0.0).collect();
                (m, pts)
            })
            .filter(|(_, pts): &(SolveMode, Vec<(f64, f64)>)| !pts.is_empty())
            .collect();
        let mut out = create(path)?;
        out.write_all(loglog_svg(&curves, "noise budget δ", "mean normalized ℓ1 error").as_bytes())?;
        out.flush()?;
        Ok(())
    }
}

impl RegularitySweep {
    pub fn write_table(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        writeln!(out, "r,mode,trials,failed,mean_error,max_error")?;
        for ((r, mode), s) in &self.table {
            writeln!(out, "{r},{mode},{},{},{},{}", s.trials, s.failed, fmt17(s.mean), fmt17(s.max))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn loglog_svg(curves: &[(SolveMode, Vec<(f64, f64)>)], xlabel: &str, ylabel: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 70.0;
    let all: Vec<(f64, f64)> = curves.iter().flat_map(|c| c.1.iter().copied()).collect();
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, lo + 1.0)
        }
    };
    let (x0, x1) = span(all.iter().map(|p| p.0).collect());
    let (y0, y1) = span(all.iter().map(|p| p.1).collect());
    let px = |x: f64| PAD + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for e in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(e));
        svg += &format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\
             <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">1e{e}</text>\n",
            H - PAD,
            H - PAD + 5.0,
            H - PAD + 20.0
        );
    }
    for e in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(e));
        svg += &format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{PAD}\" y2=\"{y:.1}\" stroke=\"black\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{e}</text>\n",
            PAD - 5.0,
            PAD - 8.0,
            y + 4.0
        );
    }
    svg += &format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{xlabel}</text>\n\
         <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{ylabel}</text>\n",
        W / 2.0,
        H - 20.0,
        H / 2.0,
        H / 2.0
    );
    for (i, (mode, pts)) in curves.iter().enumerate() {
        let color = if *mode == SolveMode::L1Min { "#1f4fd8" } else { "#d62728" };
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        svg += &format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            path.join(" ")
        );
        for &(x, y) in pts {
            svg += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n", px(x), py(y));
        }
        let ly = PAD + 18.0 + 18.0 * i as f64;
        svg += &format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{mode}</text>\n",
            PAD + 12.0,
            PAD + 36.0,
            PAD + 42.0,
            ly + 4.0
        );
    }
    svg += "</svg>\n";
    svg
}

/// Files written by [`demo_fig1`].
#[derive(Debug, Clone)]
pub struct Fig1Output {
    pub truth: PathBuf,
    pub measurement: PathBuf,
    pub recovery: PathBuf,
    pub spikes: PathBuf,
    pub error: f64,
    pub srf: f64,
}

/// Single recovery at `L = 60, N = 15, r = 3` with 41 points at 30 dB unless
/// `config` says otherwise; writes the truth, the back-projection `s` and
/// the recovery as CSV files under `dir`.
pub fn demo_fig1(config: &ExperimentConfig, dir: &Path) -> Result<Fig1Output> {
    let op = operator(config)?;
    let inst = make_instance(config, &op, config.r, config.noise, 0, 0)?;
    let cfg = SolveConfig {
        delta: inst.measurement.delta,
        mode: config.mode.modes()[0],
        ..config.solver.clone()
    };
    let res = solve(&inst.measurement.s, &op, &cfg)?;
    std::fs::create_dir_all(dir)?;
    let out = Fig1Output {
        truth: dir.join("truth.csv"),
        measurement: dir.join("s.csv"),
        recovery: dir.join("recovery.csv"),
        spikes: dir.join("spikes.csv"),
        error: normalized_l1_error(&res.g, &inst.signal)?,
        srf: config.srf(),
    };
    inst.signal.write_csv(&out.truth)?;
    inst.measurement.s.write_csv(&out.measurement)?;
    res.g.write_csv(&out.recovery)?;
    extract_spikes(&res.g, 0.01)?.write_csv(&out.spikes)?;
    Ok(out)
}

/// The demo's defaults.
pub fn fig1_config() -> ExperimentConfig {
    ExperimentConfig {
        l: 60,
        n: 15,
        r: 3,
        sizing: CellSizing::Total(41),
        trials: 1,
        ..ExperimentConfig::default()
    }
}
