//! Recovery of a nonnegative grid function `g` from the back-projection `s`:
//!
//! ```text
//! feasibility:  min ‖s − P_N g‖₁            s.t. g ≥ 0
//! l1min:        min Σ g   s.t. g ≥ 0,  ‖s − P_N g‖₁ ≤ δ
//! ```
//!
//! Feasibility mode returns the residual-minimising point, which lies in the
//! constraint set whenever any point does. Both programs are linear; they are
//! handed to an [`LpBackend`] after rescaling so that `‖s‖∞ = 1` and the
//! kernel has unit diagonal.

mod dense;
mod ipm;
mod l1ball;
mod pdhg;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

pub use ipm::InteriorPoint;
pub use l1ball::{project_l1_ball, project_l1_ball_centered};
pub use pdhg::Pdhg;

use crate::error::{invalid, Error, Result};
use crate::io::fmt17;
use crate::operators::{GriddedFunction, MeasurementMatrix};
use crate::signal::DiracSignal;

/// Absolute slack on the residual, relative to `‖s‖₁`.
pub const RESIDUAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Feasibility,
    L1Min,
}

impl std::str::FromStr for SolveMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feasibility" | "feas" => Ok(Self::Feasibility),
            "l1min" | "l1" => Ok(Self::L1Min),
            other => Err(invalid(format!("unknown solve mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for SolveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Feasibility => "feasibility",
            Self::L1Min => "l1min",
        })
    }
}

/// Shipped LP backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Mehrotra predictor–corrector on the low-rank normal equations.
    #[default]
    InteriorPoint,
    /// Restarted primal–dual hybrid gradient.
    Pdhg,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ipm" | "interior-point" => Ok(Self::InteriorPoint),
            "pdhg" => Ok(Self::Pdhg),
            other => Err(invalid(format!("unknown backend {other:?}"))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::InteriorPoint => "ipm",
            Self::Pdhg => "pdhg",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Noise budget `δ ≥ 0`. Values below `feas_tol·‖s‖₁` are raised to that
    /// floor so the constraint set keeps an interior.
    pub delta: f64,
    pub mode: SolveMode,
    /// Relative feasibility tolerance.
    pub feas_tol: f64,
    /// Relative objective tolerance (duality gap, or stagnation over a
    /// 100-iteration window for the first-order backend).
    pub obj_tol: f64,
    pub max_iters: usize,
    /// Primal/dual step balance for the first-order backend.
    pub step_ratio: f64,
    pub backend: Backend,
    /// Record a diagnostics row every so often (every iteration for the
    /// interior-point backend, every 100 for the first-order one).
    pub trace: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            mode: SolveMode::L1Min,
            feas_tol: 1e-6,
            obj_tol: 1e-8,
            max_iters: 200_000,
            step_ratio: 1.0,
            backend: Backend::default(),
            trace: false,
        }
    }
}

impl SolveConfig {
    pub fn new(delta: f64, mode: SolveMode) -> Self {
        Self {
            delta,
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(invalid(format!("delta = {} must be finite and nonnegative", self.delta)));
        }
        if !(self.feas_tol > 0.0) || !(self.obj_tol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.step_ratio > 0.0) || !self.step_ratio.is_finite() {
            return Err(invalid("step_ratio must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::MaxIters => "max-iters",
            Self::Infeasible => "infeasible",
        })
    }
}

/// One diagnostics row, in original units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub residual_l1: f64,
    pub primal_step: f64,
    pub dual_step: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Recovered nonnegative grid function.
    pub g: GriddedFunction,
    /// `‖s − P_N g‖₁`.
    pub residual_l1: f64,
    /// `Σ g`.
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub runtime: Duration,
    /// Budget the solve actually enforced (after the floor).
    pub effective_delta: f64,
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    /// Writes the diagnostics stream `iter,objective,residual_l1,primal_step,dual_step`.
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "iter,objective,residual_l1,primal_step,dual_step")?;
        for row in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{}",
                row.iter,
                fmt17(row.objective),
                fmt17(row.residual_l1),
                fmt17(row.primal_step),
                fmt17(row.dual_step)
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The rescaled linear program handed to a backend.
///
/// With `κ = (N+1)²/(4π)`, `β = ‖s‖∞` and `α = β/κ`, the backend sees
/// `K̃ = K/κ = B̃ᵀB̃`, `s̃ = s/β`, `δ̃ = δ/β` and returns `g̃ = g/α`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    factor_t: DMatrix<f64>,
    s: Vec<f64>,
    delta: f64,
    mode: SolveMode,
    s_scale: f64,
    g_scale: f64,
}

impl LpProblem {
    fn new(op: &MeasurementMatrix, s: &[f64], delta: f64, mode: SolveMode) -> Self {
        let kappa = op.kernel_diagonal();
        let beta = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let factor_t = op.real_factor().transpose() / kappa.sqrt();
        Self {
            factor_t,
            s: s.iter().map(|v| v / beta).collect(),
            delta: delta / beta,
            mode,
            s_scale: beta,
            g_scale: beta / kappa,
        }
    }

    /// `B̃ᵀ`, shape `G × (N+1)²`.
    pub fn factor_t(&self) -> &DMatrix<f64> {
        &self.factor_t
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> SolveMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// `B̃ x`.
    pub fn analyze(&self, x: &[f64]) -> DVector<f64> {
        self.factor_t.tr_mul(&DVector::from_column_slice(x))
    }

    /// `B̃ᵀ c`.
    pub fn synthesize(&self, c: &DVector<f64>) -> Vec<f64> {
        (&self.factor_t * c).iter().copied().collect()
    }

    /// `K̃ x`.
    pub fn apply_kernel(&self, x: &[f64]) -> Vec<f64> {
        self.synthesize(&self.analyze(x))
    }

    /// `‖s̃ − K̃x‖₁`.
    pub fn residual_l1(&self, x: &[f64]) -> f64 {
        self.apply_kernel(x).iter().zip(&self.s).map(|(k, s)| (s - k).abs()).sum()
    }

    /// Converts a scaled residual or budget back to original units.
    pub fn unscale_residual(&self, r: f64) -> f64 {
        r * self.s_scale
    }

    pub fn unscale_objective(&self, obj: f64) -> f64 {
        obj * self.g_scale
    }
}

/// What a backend hands back, in scaled units.
#[derive(Debug, Clone)]
pub struct BackendOutput {
    pub g: Vec<f64>,
    pub iterations: usize,
    /// Whether the backend's own stopping test fired.
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// A solver for [`LpProblem`]s. External LP codes can be plugged in through
/// [`solve_with`].
pub trait LpBackend {
    fn solve(&self, problem: &LpProblem, config: &SolveConfig) -> Result<BackendOutput>;
}

fn check_inputs(s: &GriddedFunction, op: &MeasurementMatrix, config: &SolveConfig) -> Result<()> {
    config.validate()?;
    if s.values().len() != op.grid().len() {
        return Err(Error::ShapeMismatch {
            expected: op.grid().len(),
            actual: s.values().len(),
        });
    }
    if s.grid().resolution() != op.grid().resolution() {
        return Err(Error::DomainMismatch("s and operator live on different grids".into()));
    }
    if s.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("back-projection s".into()));
    }
    Ok(())
}

/// Solves with the backend selected in `config`.
pub fn solve(s: &GriddedFunction, op: &MeasurementMatrix, config: &SolveConfig) -> Result<SolveResult> {
    match config.backend {
        Backend::InteriorPoint => solve_with(&InteriorPoint, s, op, config),
        Backend::Pdhg => solve_with(&Pdhg, s, op, config),
    }
}

/// Residual-minimising nonnegative `g`; reports `Infeasible` when even that
/// residual exceeds the budget.
pub fn solve_feasibility(s: &GriddedFunction, op: &MeasurementMatrix, config: &SolveConfig) -> Result<SolveResult> {
    let cfg = SolveConfig {
        mode: SolveMode::Feasibility,
        ..config.clone()
    };
    solve(s, op, &cfg)
}

/// Minimum-`Σg` point of the constraint set.
pub fn solve_l1min(s: &GriddedFunction, op: &MeasurementMatrix, config: &SolveConfig) -> Result<SolveResult> {
    let cfg = SolveConfig {
        mode: SolveMode::L1Min,
        ..config.clone()
    };
    solve(s, op, &cfg)
}

/// Runs `backend` on the rescaled program and assembles the result in
/// original units.
pub fn solve_with(
    backend: &dyn LpBackend,
    s: &GriddedFunction,
    op: &MeasurementMatrix,
    config: &SolveConfig,
) -> Result<SolveResult> {
    check_inputs(s, op, config)?;
    let start = Instant::now();
    let s_l1 = s.l1_norm();
    let delta = config.delta.max(config.feas_tol * s_l1);
    let grid = Arc::clone(s.grid());

    // g = 0 is optimal for both programs when it already fits the budget
    // (for feasibility mode only when s vanishes).
    let zero_optimal = match config.mode {
        SolveMode::L1Min => s_l1 <= delta,
        SolveMode::Feasibility => s_l1 == 0.0,
    };
    if zero_optimal {
        return Ok(SolveResult {
            g: GriddedFunction::zeros(grid),
            residual_l1: s_l1,
            objective: 0.0,
            status: SolveStatus::Converged,
            iterations: 0,
            runtime: start.elapsed(),
            effective_delta: delta,
            trace: Vec::new(),
        });
    }

    let problem = LpProblem::new(op, s.values(), delta, config.mode);
    let out = backend.solve(&problem, config)?;
    if out.g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("backend returned non-finite iterate".into()));
    }
    let gmax = out.g.iter().fold(0.0f64, |m, v| m.max(*v));
    debug_assert!(out.g.iter().all(|&v| v >= -config.feas_tol * gmax.max(1.0) * 10.0));
    let values: Vec<f64> = out.g.iter().map(|&v| problem.g_scale * v.max(0.0)).collect();
    let kg = op.apply_factored(&values);
    let residual_l1: f64 = s.values().iter().zip(&kg).map(|(a, b)| (a - b).abs()).sum();
    let objective: f64 = values.iter().sum();
    let within = residual_l1 <= delta * (1.0 + config.feas_tol) + RESIDUAL_SLACK * s_l1;

    let status = match (config.mode, out.converged, within) {
        (_, true, true) => SolveStatus::Converged,
        (SolveMode::Feasibility, true, false) => SolveStatus::Infeasible,
        (SolveMode::Feasibility, false, _) => SolveStatus::MaxIters,
        (SolveMode::L1Min, _, _) => {
            // decide between a hard budget and a stalled solve
            let probe = solve_with(backend, s, op, &SolveConfig {
                mode: SolveMode::Feasibility,
                trace: false,
                ..config.clone()
            })?;
            if probe.status == SolveStatus::Infeasible {
                SolveStatus::Infeasible
            } else {
                SolveStatus::MaxIters
            }
        }
    };

    let trace = out
        .trace
        .into_iter()
        .map(|r| TraceRow {
            objective: problem.unscale_objective(r.objective),
            residual_l1: problem.unscale_residual(r.residual_l1),
            ..r
        })
        .collect();

    Ok(SolveResult {
        g: GriddedFunction::new(grid, values)?,
        residual_l1,
        objective,
        status,
        iterations: out.iterations,
        runtime: start.elapsed(),
        effective_delta: delta,
        trace,
    })
}

/// Reads spikes off a recovered function: points at or above
/// `threshold_frac·max(g)` are merged into clusters of grid neighbours, each
/// reported at its largest sample with the cluster's summed mass.
pub fn extract_spikes(g: &GriddedFunction, threshold_frac: f64) -> Result<DiracSignal> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(invalid(format!("threshold fraction {threshold_frac} outside (0, 1)")));
    }
    let grid = g.grid();
    let vals = g.values();
    let gmax = vals.iter().fold(0.0f64, |m, v| m.max(*v));
    if gmax <= 0.0 {
        return Ok(DiracSignal::empty(Arc::clone(grid)));
    }
    let cut = threshold_frac * gmax;
    let keep: Vec<bool> = vals.iter().map(|&v| v >= cut).collect();
    let mut label = vec![usize::MAX; vals.len()];
    let mut support = Vec::new();
    let mut amps = Vec::new();
    for start in 0..vals.len() {
        if !keep[start] || label[start] != usize::MAX {
            continue;
        }
        let id = support.len();
        let mut stack = vec![start];
        label[start] = id;
        let (mut best, mut mass) = (start, 0.0);
        while let Some(i) = stack.pop() {
            mass += vals[i];
            if vals[i] > vals[best] || (vals[i] == vals[best] && i < best) {
                best = i;
            }
            for j in grid.neighbors(i) {
                if keep[j] && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        support.push(best);
        amps.push(mass);
    }
    DiracSignal::new(Arc::clone(grid), support, amps)
}
