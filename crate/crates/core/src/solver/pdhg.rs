//! Restarted primal–dual hybrid gradient on the saddle form
//! `min_{g≥0} max_z cᵀg + zᵀK̃g − F*(z)`.
//!
//! `F` is the indicator of the ℓ1 ball of radius `δ̃` around `s̃` (l1min, with
//! `c = 1`) or `‖· − s̃‖₁` (feasibility, with `c = 0`).

use rand::Rng;

use super::{project_l1_ball_centered, BackendOutput, LpBackend, LpProblem, SolveConfig, SolveMode, TraceRow};
use crate::error::{Error, Result};
use crate::signal::rng_from_seed;

const POWER_ITERS: usize = 500;
const POWER_TOL: f64 = 1e-9;
const POWER_SEED: u64 = 0x5eed;
const WINDOW: usize = 100;
const RESTART_CHECK: usize = 64;
const RESTART_FACTOR: f64 = 0.2;

#[derive(Debug, Clone, Copy, Default)]
pub struct Pdhg;

impl LpBackend for Pdhg {
    fn solve(&self, problem: &LpProblem, config: &SolveConfig) -> Result<BackendOutput> {
        run(problem, config)
    }
}

/// Largest eigenvalue of `K̃` by power iteration from a seeded start.
pub(crate) fn kernel_norm(problem: &LpProblem) -> Result<f64> {
    let mut rng = rng_from_seed(POWER_SEED);
    let mut v: Vec<f64> = (0..problem.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut est = 0.0;
    for _ in 0..POWER_ITERS {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::StepSize("power iteration collapsed to zero".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let kv = problem.apply_kernel(&v);
        let next: f64 = kv.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = kv;
        if (next - est).abs() <= POWER_TOL * next.abs() {
            return Ok(next);
        }
        est = next;
    }
    Err(Error::StepSize(format!("power iteration did not settle in {POWER_ITERS} steps")))
}

struct Kkt {
    primal: f64,
    dual: f64,
    gap: f64,
    objective: f64,
    residual: f64,
}

impl Kkt {
    fn error(&self) -> f64 {
        (self.primal * self.primal + self.dual * self.dual + self.gap * self.gap).sqrt()
    }
}

fn evaluate(problem: &LpProblem, g: &[f64], z: &[f64], kg: &[f64], kz: &[f64]) -> Kkt {
    let s = problem.s();
    let residual: f64 = s.iter().zip(kg).map(|(s, k)| (s - k).abs()).sum();
    let zs: f64 = z.iter().zip(s).map(|(a, b)| a * b).sum();
    match problem.mode() {
        SolveMode::L1Min => {
            let objective: f64 = g.iter().sum();
            let zinf = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dual_obj = -zs - problem.delta() * zinf;
            let dual = kz.iter().map(|k| (1.0 + k).min(0.0).powi(2)).sum::<f64>().sqrt();
            Kkt {
                primal: (residual - problem.delta()).max(0.0),
                dual,
                gap: (objective - dual_obj).abs(),
                objective,
                residual,
            }
        }
        SolveMode::Feasibility => {
            let dual = kz.iter().map(|k| k.min(0.0).powi(2)).sum::<f64>().sqrt();
            Kkt {
                primal: 0.0,
                dual,
                gap: (residual + zs).abs(),
                objective: residual,
                residual,
            }
        }
    }
}

fn run(problem: &LpProblem, config: &SolveConfig) -> Result<BackendOutput> {
    let n = problem.len();
    let norm = kernel_norm(problem)? * 1.01;
    let tau = 0.99 * config.step_ratio / norm;
    let sigma = 0.99 / (config.step_ratio * norm);
    let cost = match problem.mode() {
        SolveMode::L1Min => 1.0,
        SolveMode::Feasibility => 0.0,
    };
    let s = problem.s();
    let s_l1: f64 = s.iter().map(|v| v.abs()).sum();

    let mut g = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut kg = vec![0.0; n];
    let mut kz = vec![0.0; n];
    let (mut g_avg, mut z_avg) = (vec![0.0; n], vec![0.0; n]);
    let mut avg_count = 0usize;
    let mut last_restart_err = f64::INFINITY;
    let mut since_restart = 0usize;
    let mut history: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut w = vec![0.0; n];

    for it in 1..=config.max_iters {
        iterations = it;
        let g_new: Vec<f64> = (0..n).map(|i| (g[i] - tau * (kz[i] + cost)).max(0.0)).collect();
        let kg_new = problem.apply_kernel(&g_new);
        for i in 0..n {
            w[i] = z[i] + sigma * (2.0 * kg_new[i] - kg[i]);
        }
        let z_new: Vec<f64> = match problem.mode() {
            SolveMode::L1Min => {
                let mut p: Vec<f64> = w.iter().map(|v| v / sigma).collect();
                project_l1_ball_centered(&mut p, s, problem.delta());
                w.iter().zip(&p).map(|(w, p)| w - sigma * p).collect()
            }
            SolveMode::Feasibility => w.iter().zip(s).map(|(w, s)| (w - sigma * s).clamp(-1.0, 1.0)).collect(),
        };
        let kz_new = problem.apply_kernel(&z_new);
        let (ap, ad) = (step_len(&g, &g_new), step_len(&z, &z_new));
        g = g_new;
        z = z_new;
        kg = kg_new;
        kz = kz_new;

        avg_count += 1;
        let wgt = 1.0 / avg_count as f64;
        for i in 0..n {
            g_avg[i] += wgt * (g[i] - g_avg[i]);
            z_avg[i] += wgt * (z[i] - z_avg[i]);
        }
        since_restart += 1;

        let cur = evaluate(problem, &g, &z, &kg, &kz);
        history.push(cur.objective);
        if config.trace && it % WINDOW == 0 {
            trace.push(TraceRow {
                iter: it,
                objective: g.iter().sum(),
                residual_l1: cur.residual,
                primal_step: ap,
                dual_step: ad,
            });
        }

        let scale = 1.0 + cur.objective.abs();
        let feasible = match problem.mode() {
            SolveMode::L1Min => cur.residual <= problem.delta() * (1.0 + config.feas_tol) + 1e-9 * s_l1,
            SolveMode::Feasibility => true,
        };
        let gap_ok = cur.gap <= config.obj_tol * scale && cur.dual <= config.feas_tol * scale;
        let stagnant = history.len() > WINDOW && {
            let old = history[history.len() - 1 - WINDOW];
            (cur.objective - old).abs() <= config.obj_tol * scale
        };
        if feasible && (gap_ok || stagnant) {
            converged = true;
            break;
        }

        if since_restart.is_multiple_of(RESTART_CHECK) {
            let kga = problem.apply_kernel(&g_avg);
            let kza = problem.apply_kernel(&z_avg);
            let avg = evaluate(problem, &g_avg, &z_avg, &kga, &kza);
            let (cand_err, use_avg) = if avg.error() < cur.error() {
                (avg.error(), true)
            } else {
                (cur.error(), false)
            };
            if cand_err <= RESTART_FACTOR * last_restart_err || since_restart >= it * 36 / 100 {
                if use_avg {
                    g.copy_from_slice(&g_avg);
                    z.copy_from_slice(&z_avg);
                    kg = kga;
                    kz = kza;
                }
                g_avg.copy_from_slice(&g);
                z_avg.copy_from_slice(&z);
                avg_count = 1;
                since_restart = 0;
                last_restart_err = cand_err;
            }
        }
    }

    Ok(BackendOutput {
        g,
        iterations,
        converged,
        trace,
    })
}

fn step_len(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
