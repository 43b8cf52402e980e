use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use sphere_superres::experiments::{
    demo_fig1, fig1_config, make_instance, normalized_l1_error, sweep_noise, sweep_regularity, write_rows,
    ExperimentConfig, NoiseLevel,
};
use sphere_superres::io::fmt17;
use sphere_superres::signal::{add_noise, calibrate_sigma};
use sphere_superres::solver::{solve, SolveConfig, SolveStatus};
use sphere_superres::{build_grid, forward, DiracSignal, Error, GriddedFunction, MeasurementMatrix};

/// Positive spike recovery on the sphere from low-degree harmonic data.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Rayleigh-regular signal and write it as CSV.
    Gen {
        #[command(flatten)]
        exp: ExpFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure a signal: noisy coefficients and the back-projection `s`.
    Measure {
        #[command(flatten)]
        exp: ExpFlags,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        s: PathBuf,
    },
    /// Recover a grid function from `s` and a noise budget.
    Solve {
        #[command(flatten)]
        exp: ExpFlags,
        #[arg(long)]
        s: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Signal CSV to score the recovery against.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write the solver diagnostics trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Error against noise level, both programs.
    SweepNoise {
        #[command(flatten)]
        exp: ExpFlags,
        #[arg(long, default_value = "sweep-noise")]
        out_dir: PathBuf,
    },
    /// Error against Rayleigh regularity.
    SweepR {
        #[command(flatten)]
        exp: ExpFlags,
        #[arg(long, default_value = "sweep-r")]
        out_dir: PathBuf,
    },
    /// One recovery in the L = 60, N = 15, r = 3, 41-point regime.
    DemoFig1 {
        #[command(flatten)]
        exp: ExpFlags,
        #[arg(long, default_value = "demo-fig1")]
        out_dir: PathBuf,
    },
}

/// Experiment settings; flags override the `--config` file, which overrides
/// the defaults.
#[derive(Args, Default)]
struct ExpFlags {
    /// Flat `key = value` file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "L")]
    l: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    points_per_cell: Option<String>,
    #[arg(long)]
    total_points: Option<String>,
    /// `fixed` (ν/N inside every cell) or `scaled` (νr/N).
    #[arg(long)]
    separation: Option<String>,
    #[arg(long)]
    snr_db: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// Noise budget; replaces the oracle value.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `l1min`, `feasibility` or `both`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    feas_tol: Option<String>,
    #[arg(long)]
    obj_tol: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    step_ratio: Option<String>,
    /// `ipm` or `pdhg`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Comma-separated regularities for `sweep-r`.
    #[arg(long)]
    r_values: Option<String>,
    /// Comma-separated SNRs in dB for `sweep-noise`.
    #[arg(long)]
    snr_values: Option<String>,
}

impl ExpFlags {
    fn resolve(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig, Error> {
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("L", &self.l),
            ("N", &self.n),
            ("r", &self.r),
            ("nu", &self.nu),
            ("points_per_cell", &self.points_per_cell),
            ("total_points", &self.total_points),
            ("separation", &self.separation),
            ("snr_db", &self.snr_db),
            ("sigma", &self.sigma),
            ("delta", &self.delta),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("feas_tol", &self.feas_tol),
            ("obj_tol", &self.obj_tol),
            ("max_iters", &self.max_iters),
            ("step_ratio", &self.step_ratio),
            ("backend", &self.backend),
            ("threads", &self.threads),
            ("r_values", &self.r_values),
            ("snr_values", &self.snr_values),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Config(Error),
    Solve(String),
    Other(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::Format { .. }
            | Error::UndefinedInput(_)
            | Error::InfeasibleDensity { .. } => Self::Config(e),
            other => Self::Other(other),
        }
    }
}

fn operator(cfg: &ExperimentConfig) -> Result<MeasurementMatrix, Error> {
    Ok(MeasurementMatrix::new(Arc::new(build_grid(cfg.l)?), cfg.n))
}

fn gen(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let op = operator(cfg)?;
    let inst = make_instance(cfg, &op, cfg.r, NoiseLevel::Sigma(0.0), 0, 0)?;
    inst.signal.write_csv(out)?;
    println!("points={} mass={}", inst.signal.len(), fmt17(inst.signal.total_mass()));
    Ok(())
}

fn measure(cfg: &ExperimentConfig, signal: &Path, coeffs: &Path, s_out: &Path) -> Result<(), Failure> {
    let op = operator(cfg)?;
    let sig = DiracSignal::read_csv(signal, Arc::clone(op.grid()))?;
    let clean = forward(&sig, cfg.n)?;
    let sigma = match cfg.noise {
        NoiseLevel::SnrDb(db) => calibrate_sigma(&clean, db)?,
        NoiseLevel::Sigma(s) => s,
    };
    let mut m = add_noise(&op, &clean, sigma, cfg.seed)?;
    if let Some(d) = cfg.delta {
        m = m.with_delta(d)?;
    }
    m.noisy.write_csv(coeffs)?;
    m.s.write_csv(s_out)?;
    println!(
        "sigma={} noise_l2={} delta={} snr_db={}",
        fmt17(m.sigma),
        fmt17(m.noise.l2_norm()),
        fmt17(m.delta),
        fmt17(m.snr_db.unwrap_or(f64::INFINITY))
    );
    Ok(())
}

fn solve_cmd(
    cfg: &ExperimentConfig,
    s_path: &Path,
    out: &Path,
    truth: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), Failure> {
    let op = operator(cfg)?;
    let s = GriddedFunction::read_csv(s_path, Arc::clone(op.grid()))?;
    let mode = match cfg.mode.modes().as_slice() {
        [single] => *single,
        _ => return Err(Failure::Config(Error::InvalidParameter("solve takes a single mode".into()))),
    };
    let config = SolveConfig {
        delta: cfg.delta.unwrap_or(0.0),
        mode,
        trace: trace.is_some(),
        ..cfg.solver.clone()
    };
    let res = solve(&s, &op, &config).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure::Config(e),
        other => Failure::Solve(other.to_string()),
    })?;
    res.g.write_csv(out)?;
    if let Some(path) = trace {
        res.write_trace_csv(path)?;
    }
    let mut line = format!(
        "status={} residual={} delta={} objective={} iterations={} runtime_s={}",
        res.status,
        fmt17(res.residual_l1),
        fmt17(res.effective_delta),
        fmt17(res.objective),
        res.iterations,
        fmt17(res.runtime.as_secs_f64())
    );
    if let Some(path) = truth {
        let sig = DiracSignal::read_csv(path, Arc::clone(op.grid()))?;
        line += &format!(" error={}", fmt17(normalized_l1_error(&res.g, &sig)?));
    }
    println!("{line}");
    if res.status != SolveStatus::Converged {
        return Err(Failure::Solve(format!("solver stopped with status {}", res.status)));
    }
    Ok(())
}

fn sweep_noise_cmd(cfg: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    let sweep = sweep_noise(cfg)?;
    write_rows(&dir.join("rows.csv"), &sweep.rows)?;
    sweep.write_summary(&dir.join("summary.csv"))?;
    sweep.write_svg(&dir.join("error_vs_delta.svg"))?;
    for l in &sweep.levels {
        println!(
            "snr_db={} mode={} mean_delta={} mean_error={} max_error={}",
            fmt17(l.snr_target_db),
            l.mode,
            fmt17(l.mean_delta),
            fmt17(l.errors.mean),
            fmt17(l.errors.max)
        );
    }
    for mode in cfg.mode.modes() {
        println!("slope mode={mode} {}", fmt17(sweep.slope(mode)));
    }
    Ok(())
}

fn sweep_r_cmd(cfg: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    let sweep = sweep_regularity(cfg)?;
    write_rows(&dir.join("rows.csv"), &sweep.rows)?;
    sweep.write_table(&dir.join("table.csv"))?;
    println!("srf={}", fmt17(cfg.srf()));
    for ((r, mode), s) in &sweep.table {
        println!(
            "r={r} mode={mode} trials={} mean_error={} max_error={}",
            s.trials,
            fmt17(s.mean),
            fmt17(s.max)
        );
    }
    Ok(())
}

fn demo_cmd(cfg: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    let out = demo_fig1(cfg, dir)?;
    println!(
        "srf={} error={} truth={} s={} recovery={} spikes={}",
        fmt17(out.srf),
        fmt17(out.error),
        out.truth.display(),
        out.measurement.display(),
        out.recovery.display(),
        out.spikes.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let base = ExperimentConfig::default();
    match cli.command {
        Command::Gen { exp, out } => gen(&exp.resolve(base)?, &out),
        Command::Measure { exp, signal, coeffs, s } => measure(&exp.resolve(base)?, &signal, &coeffs, &s),
        Command::Solve {
            exp,
            s,
            out,
            truth,
            trace,
        } => solve_cmd(&exp.resolve(base)?, &s, &out, truth.as_deref(), trace.as_deref()),
        Command::SweepNoise { exp, out_dir } => {
            let mut cfg = base;
            cfg.set("mode", "both")?;
            sweep_noise_cmd(&exp.resolve(cfg)?, &out_dir)
        }
        Command::SweepR { exp, out_dir } => sweep_r_cmd(&exp.resolve(base)?, &out_dir),
        Command::DemoFig1 { exp, out_dir } => demo_cmd(&exp.resolve(fig1_config())?, &out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("invalid configuration: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solve(msg)) => {
            eprintln!("solve failed: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
