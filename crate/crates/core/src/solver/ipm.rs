//! Mehrotra predictor–corrector interior-point method.
//!
//! Standard form over `x = (g, p, q[, ζ]) ≥ 0`:
//!
//! ```text
//! K̃g + p − q = s̃
//! Σp + Σq + ζ = δ̃          (l1min only)
//! cost: Σg  (l1min)   or   Σp + Σq  (feasibility)
//! ```
//!
//! The normal matrix `A D Aᵀ` has a `G × G` block `Λ + B̃ᵀ S B̃` with `Λ`
//! diagonal and `S = B̃ D_g B̃ᵀ` of size `(N+1)²`, so each iteration costs two
//! `G·(N+1)⁴` products plus small dense factorizations.

use faer::{Mat, MatRef};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::dense::{cholesky_dropping, cholesky_solve};
use super::{BackendOutput, LpBackend, LpProblem, SolveConfig, SolveMode, TraceRow};
use crate::error::{Error, Result};

const STEP_FRACTION: f64 = 0.99;
const ITER_CAP: usize = 200;
const STALL_STEP: f64 = 1e-8;
const STALL_COUNT: usize = 3;
const DIVERGED: f64 = 1e14;
const REFINEMENTS: usize = 2;
const PRECISION_FLOOR: f64 = 1e-6;
/// Low-rank solves less accurate than this switch the run to dense factors.
const LOW_RANK_FLOOR: f64 = 1e-9;
const PIVOT_FLOOR: f64 = 1e-30;
/// Average complementarity at which the scaled problem is resolved to roundoff.
const MU_FLOOR: f64 = 1e-14;
/// Smallest mean of either starting vector.
const START_FLOOR: f64 = 1e-2;

/// Default backend. Iteration count is capped at 200 independently of
/// `max_iters`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl LpBackend for InteriorPoint {
    fn solve(&self, problem: &LpProblem, config: &SolveConfig) -> Result<BackendOutput> {
        Ipm::new(problem).run(config)
    }
}

struct Ipm<'a> {
    prob: &'a LpProblem,
    /// `B̃`, shape `m × G`.
    b: DMatrix<f64>,
    n: usize,
    bordered: bool,
    /// Budget below working precision: solve `B̃g = c̃` instead, where
    /// `s̃ = B̃ᵀc̃`. The `m` equality rows replace the `G` residual rows.
    exact: bool,
    cost: Vec<f64>,
    rhs: Vec<f64>,
}

/// How the `G × G` block is inverted.
enum Block {
    /// Woodbury identity against the diagonal: `L Lᵀ = S`, Cholesky of
    /// `I + Lᵀ H L`. Cheap, but loses accuracy once `D` spans many decades.
    LowRank { l: DMatrix<f64>, chol: Cholesky<f64, Dyn> },
    /// Dense Cholesky of the assembled block; tiny pivots are replaced by a
    /// huge value, which drops the corresponding direction.
    Dense(Mat<f64>),
}

/// Factorized normal matrix for one scaling `D`.
struct Normal {
    lam: Vec<f64>,
    lam_inv: Vec<f64>,
    dg: Vec<f64>,
    block: Block,
    v: Vec<f64>,
    m22: f64,
    b_col: Vec<f64>,
    schur: f64,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    /// Relative residual left in the normal equations.
    accuracy: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Budgets below this fraction of `‖s̃‖₁` sit at the limit of what the
/// residual rows can resolve.
const EXACT_BUDGET: f64 = 1e-5;

/// Coordinates `c̃` with `s̃ ≈ B̃ᵀc̃`, when an l1min budget is tiny and the
/// data lies in the range of the kernel up to half the budget.
fn exact_coefficients(prob: &LpProblem, b: &DMatrix<f64>) -> Option<Vec<f64>> {
    let s_l1: f64 = prob.s().iter().map(|v| v.abs()).sum();
    if prob.mode() != SolveMode::L1Min || prob.delta() > EXACT_BUDGET * s_l1 {
        return None;
    }
    let gram = b * prob.factor_t();
    let c = gram.cholesky()?.solve(&prob.analyze(prob.s()));
    let off: f64 = prob.synthesize(&c).iter().zip(prob.s()).map(|(a, b)| (a - b).abs()).sum();
    (off <= 0.5 * prob.delta()).then(|| c.iter().copied().collect())
}

fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

impl<'a> Ipm<'a> {
    fn new(prob: &'a LpProblem) -> Self {
        let n = prob.len();
        let b = prob.factor_t().transpose();
        if let Some(coeffs) = exact_coefficients(prob, &b) {
            return Self {
                prob,
                b,
                n,
                bordered: false,
                exact: true,
                cost: vec![1.0; n],
                rhs: coeffs,
            };
        }
        let bordered = prob.mode() == SolveMode::L1Min;
        let nvar = 3 * n + usize::from(bordered);
        let mut cost = vec![0.0; nvar];
        match prob.mode() {
            SolveMode::L1Min => cost[..n].fill(1.0),
            SolveMode::Feasibility => cost[n..3 * n].fill(1.0),
        }
        let mut rhs = prob.s().to_vec();
        if bordered {
            rhs.push(prob.delta());
        }
        Self {
            prob,
            b,
            n,
            bordered,
            exact: false,
            cost,
            rhs,
        }
    }

    fn kernel(&self, x: &[f64]) -> Vec<f64> {
        self.prob.apply_kernel(x)
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        if self.exact {
            return self.prob.analyze(x).iter().copied().collect();
        }
        let n = self.n;
        let kg = self.kernel(&x[..n]);
        let mut out: Vec<f64> = (0..n).map(|i| kg[i] + x[n + i] - x[2 * n + i]).collect();
        if self.bordered {
            out.push(x[n..3 * n].iter().sum::<f64>() + x[3 * n]);
        }
        out
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        if self.exact {
            return self.prob.synthesize(&DVector::from_column_slice(y));
        }
        let n = self.n;
        let y2 = if self.bordered { y[n] } else { 0.0 };
        let mut out = self.kernel(&y[..n]);
        out.extend(y[..n].iter().map(|v| v + y2));
        out.extend(y[..n].iter().map(|v| -v + y2));
        if self.bordered {
            out.push(y2);
        }
        out
    }

    fn factor(&self, d: &[f64], dense: bool) -> Result<Normal> {
        let n = self.n;
        let dg = d[..n].to_vec();
        let bt = self.prob.factor_t();
        let mut scaled = self.b.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= dg[j];
        }
        let s = &scaled * bt;
        let s = (&s + s.transpose()) * 0.5;
        if self.exact {
            let mut full = Mat::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)]);
            let top = (0..s.nrows()).map(|i| s[(i, i)]).fold(0.0, f64::max);
            cholesky_dropping(&mut full, PIVOT_FLOOR * top);
            return Ok(Normal {
                lam: Vec::new(),
                lam_inv: Vec::new(),
                dg,
                block: Block::Dense(full),
                v: Vec::new(),
                m22: 0.0,
                b_col: Vec::new(),
                schur: 1.0,
            });
        }

        let (dp, dq) = (&d[n..2 * n], &d[2 * n..3 * n]);
        let lam: Vec<f64> = dp.iter().zip(dq).map(|(a, b)| a + b).collect();
        let lam_inv: Vec<f64> = lam.iter().map(|v| 1.0 / v).collect();
        let block = if dense {
            self.dense_block(&s, &lam)?
        } else {
            self.low_rank_block(s, &lam_inv, scaled)?
        };

        let mut normal = Normal {
            lam,
            lam_inv,
            dg,
            block,
            v: Vec::new(),
            m22: 0.0,
            b_col: Vec::new(),
            schur: 1.0,
        };
        if self.bordered {
            normal.v = dp.iter().zip(dq).map(|(a, b)| a - b).collect();
            normal.m22 = dp.iter().sum::<f64>() + dq.iter().sum::<f64>() + d[3 * n];
            normal.b_col = self.m11_solve(&normal, &normal.v);
            normal.schur = normal.m22 - dot(&normal.v, &normal.b_col);
            if !(normal.schur > 0.0) {
                return Err(Error::Numerical("normal-equation border lost positivity".into()));
            }
        }
        Ok(normal)
    }

    fn low_rank_block(&self, s: DMatrix<f64>, lam_inv: &[f64], mut scaled: DMatrix<f64>) -> Result<Block> {
        let eig = s.symmetric_eigen();
        let mut l = eig.eigenvectors;
        for (j, mut col) in l.column_iter_mut().enumerate() {
            col *= eig.eigenvalues[j].max(0.0).sqrt();
        }
        scaled.copy_from(&self.b);
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= lam_inv[j];
        }
        let h = &scaled * self.prob.factor_t();
        let mut c = l.transpose() * &h * &l;
        c = (&c + c.transpose()) * 0.5;
        for i in 0..c.nrows() {
            c[(i, i)] += 1.0;
        }
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::Numerical("normal-equation capacitance matrix not positive definite".into()))?;
        Ok(Block::LowRank { l, chol })
    }

    fn dense_block(&self, s: &DMatrix<f64>, lam: &[f64]) -> Result<Block> {
        let bt = self.prob.factor_t();
        let (g, m) = bt.shape();
        let btf = MatRef::from_column_major_slice(bt.as_slice(), g, m);
        let sf = MatRef::from_column_major_slice(s.as_slice(), m, m);
        let u = btf * sf;
        let mut full = &u * btf.transpose();
        let mut top = 0.0f64;
        for (i, l) in lam.iter().enumerate() {
            full[(i, i)] += l;
            top = top.max(full[(i, i)]);
        }
        cholesky_dropping(&mut full, PIVOT_FLOOR * top);
        Ok(Block::Dense(full))
    }

    fn m11_solve(&self, nm: &Normal, r: &[f64]) -> Vec<f64> {
        match &nm.block {
            Block::LowRank { l, chol } => {
                let t: Vec<f64> = r.iter().zip(&nm.lam_inv).map(|(a, b)| a * b).collect();
                let u = self.prob.analyze(&t);
                let mut u = l.tr_mul(&u);
                chol.solve_mut(&mut u);
                let u: DVector<f64> = l * u;
                let w = self.prob.synthesize(&u);
                r.iter()
                    .zip(&w)
                    .zip(&nm.lam_inv)
                    .map(|((r, w), li)| (r - w) * li)
                    .collect()
            }
            Block::Dense(factor) => {
                let mut out = Mat::from_fn(r.len(), 1, |i, _| r[i]);
                cholesky_solve(factor, &mut out);
                (0..r.len()).map(|i| out[(i, 0)]).collect()
            }
        }
    }

    fn m11_apply(&self, nm: &Normal, x: &[f64]) -> Vec<f64> {
        if self.exact {
            let t = self.prob.synthesize(&DVector::from_column_slice(x));
            let t: Vec<f64> = t.iter().zip(&nm.dg).map(|(a, b)| a * b).collect();
            return self.prob.analyze(&t).iter().copied().collect();
        }
        let kx = self.kernel(x);
        let t: Vec<f64> = kx.iter().zip(&nm.dg).map(|(a, b)| a * b).collect();
        let kt = self.kernel(&t);
        x.iter()
            .zip(&nm.lam)
            .zip(&kt)
            .map(|((x, l), k)| l * x + k)
            .collect()
    }

    fn normal_apply(&self, nm: &Normal, y: &[f64]) -> Vec<f64> {
        let n = self.n.min(y.len());
        let mut out = self.m11_apply(nm, &y[..n]);
        if self.bordered {
            let y2 = y[n];
            out.iter_mut().zip(&nm.v).for_each(|(o, v)| *o += v * y2);
            out.push(dot(&nm.v, &y[..n]) + nm.m22 * y2);
        }
        out
    }

    fn normal_solve_once(&self, nm: &Normal, r: &[f64]) -> Vec<f64> {
        let n = self.n.min(r.len());
        let a = self.m11_solve(nm, &r[..n]);
        if !self.bordered {
            return a;
        }
        let u2 = (r[n] - dot(&nm.v, &a)) / nm.schur;
        let mut out: Vec<f64> = a.iter().zip(&nm.b_col).map(|(a, b)| a - b * u2).collect();
        out.push(u2);
        out
    }

    /// Solves the normal equations with iterative refinement; also returns
    /// the final relative residual `‖r − My‖∞ / ‖r‖∞`.
    fn normal_solve(&self, nm: &Normal, r: &[f64]) -> (Vec<f64>, f64) {
        let mut y = self.normal_solve_once(nm, r);
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut rel = f64::INFINITY;
        for round in 0..=REFINEMENTS {
            let my = self.normal_apply(nm, &y);
            let res: Vec<f64> = r.iter().zip(&my).map(|(a, b)| a - b).collect();
            rel = res.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
            if round == REFINEMENTS || rel <= f64::EPSILON {
                break;
            }
            let dy = self.normal_solve_once(nm, &res);
            y.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
        }
        (y, rel)
    }

    /// Newton direction for `A Δx = rp`, `AᵀΔy + Δz = rd`, `ZΔx + XΔz = rc`.
    fn direction(&self, nm: &Normal, x: &[f64], z: &[f64], rp: &[f64], rd: &[f64], rc: &[f64]) -> Direction {
        let t: Vec<f64> = (0..x.len()).map(|i| x[i] / z[i] * rd[i] - rc[i] / z[i]).collect();
        let at = self.a_mul(&t);
        let rhs: Vec<f64> = rp.iter().zip(&at).map(|(a, b)| a + b).collect();
        let (dy, accuracy) = self.normal_solve(nm, &rhs);
        let atdy = self.at_mul(&dy);
        let dz: Vec<f64> = rd.iter().zip(&atdy).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = (0..x.len()).map(|i| (rc[i] - x[i] * dz[i]) / z[i]).collect();
        Direction { dx, dy, dz, accuracy }
    }

    fn starting_point(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let nvar = self.cost.len();
        let nm = self.factor(&vec![1.0; nvar], false)?;
        let (w, _) = self.normal_solve(&nm, &self.rhs);
        let mut x = self.at_mul(&w);
        let ac = self.a_mul(&self.cost);
        let (y, _) = self.normal_solve(&nm, &ac);
        let aty = self.at_mul(&y);
        let mut z: Vec<f64> = self.cost.iter().zip(&aty).map(|(c, a)| c - a).collect();

        let shift = |v: &mut [f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let d = (-1.5 * lo).max(0.0);
            v.iter_mut().for_each(|a| *a += d);
        };
        shift(&mut x);
        shift(&mut z);
        let xz = dot(&x, &z).max(1e-12);
        let (sx, sz): (f64, f64) = (x.iter().sum(), z.iter().sum());
        let dx = 0.5 * xz / sz.max(1e-12);
        let dz = 0.5 * xz / sx.max(1e-12);
        // keep both sides off zero when the cost lies in the row space
        let floor = START_FLOOR * (1.0 + self.cost.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let dx = dx.max(floor - sx / nvar as f64);
        let dz = dz.max(floor - sz / nvar as f64);
        x.iter_mut().for_each(|a| *a = (*a + dx).max(1e-8));
        z.iter_mut().for_each(|a| *a = (*a + dz).max(1e-8));
        Ok((x, y, z))
    }

    fn trace_row(&self, iter: usize, x: &[f64], ap: f64, ad: f64) -> TraceRow {
        let g: Vec<f64> = x[..self.n].iter().map(|v| v.max(0.0)).collect();
        TraceRow {
            iter,
            objective: g.iter().sum(),
            residual_l1: self.prob.residual_l1(&g),
            primal_step: ap,
            dual_step: ad,
        }
    }

    /// Predictor direction, switching to dense factors for the rest of the
    /// run once the low-rank path stops being accurate. `None` means no
    /// factorization reaches working accuracy.
    #[allow(clippy::too_many_arguments)]
    fn predictor(
        &self,
        d: &[f64],
        dense: &mut bool,
        x: &[f64],
        z: &[f64],
        rp: &[f64],
        rd: &[f64],
        rc: &[f64],
    ) -> Option<(Normal, Direction)> {
        if !*dense {
            if let Ok(nm) = self.factor(d, false) {
                let dir = self.direction(&nm, x, z, rp, rd, rc);
                if dir.accuracy <= LOW_RANK_FLOOR {
                    return Some((nm, dir));
                }
            }
            *dense = true;
        }
        let nm = self.factor(d, true).ok()?;
        let dir = self.direction(&nm, x, z, rp, rd, rc);
        (dir.accuracy <= PRECISION_FLOOR).then_some((nm, dir))
    }

    fn run(&self, config: &SolveConfig) -> Result<BackendOutput> {
        let n = self.n;
        let nvar = self.cost.len();
        let s_l1: f64 = self.prob.s().iter().map(|v| v.abs()).sum();
        let dual_tol = 1e-8 * (1.0 + self.cost.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let (mut x, mut y, mut z) = self.starting_point()?;
        let cap = config.max_iters.min(ITER_CAP);
        let mut trace = Vec::new();
        let mut stalled = 0;
        let mut converged = false;
        let mut iterations = 0;
        let mut dense = self.exact;
        let mut best: Option<(f64, Vec<f64>)> = None;

        for it in 0..=cap {
            let ax = self.a_mul(&x);
            let rp: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let aty = self.at_mul(&y);
            let rd: Vec<f64> = (0..nvar).map(|i| self.cost[i] - aty[i] - z[i]).collect();
            let mu = dot(&x, &z) / nvar as f64;

            // judge the clipped grid part directly: its true residual and mass
            let g: Vec<f64> = x[..n].iter().map(|v| v.max(0.0)).collect();
            let residual = self.prob.residual_l1(&g);
            let (pobj, prim_ok) = match self.prob.mode() {
                SolveMode::L1Min => (
                    g.iter().sum::<f64>(),
                    residual <= self.prob.delta() * (1.0 + config.feas_tol) + 1e-9 * s_l1,
                ),
                SolveMode::Feasibility => (residual, true),
            };
            let dobj = dot(&self.rhs, &y);
            let dual_ok = rd.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= dual_tol;
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
            iterations = it;
            if prim_ok && dual_ok && gap <= config.obj_tol {
                converged = true;
                break;
            }
            if prim_ok && dual_ok && best.as_ref().is_none_or(|(b, _)| gap < *b) {
                best = Some((gap, g));
            }
            let xmax = x.iter().chain(&y).fold(0.0f64, |m, v| m.max(v.abs()));
            if it == cap || !xmax.is_finite() || xmax > DIVERGED || mu <= MU_FLOOR {
                break;
            }

            let d: Vec<f64> = x.iter().zip(&z).map(|(x, z)| x / z).collect();
            let rc_aff: Vec<f64> = x.iter().zip(&z).map(|(x, z)| -x * z).collect();
            let Some((nm, aff)) = self.predictor(&d, &mut dense, &x, &z, &rp, &rd, &rc_aff) else {
                break;
            };
            let ap_aff = max_step(&x, &aff.dx).min(1.0);
            let ad_aff = max_step(&z, &aff.dz).min(1.0);
            let mu_aff = (0..nvar)
                .map(|i| (x[i] + ap_aff * aff.dx[i]) * (z[i] + ad_aff * aff.dz[i]))
                .sum::<f64>()
                / nvar as f64;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

            let rc: Vec<f64> = (0..nvar)
                .map(|i| -x[i] * z[i] - aff.dx[i] * aff.dz[i] + sigma * mu)
                .collect();
            let dir = self.direction(&nm, &x, &z, &rp, &rd, &rc);
            if dir.accuracy > PRECISION_FLOOR {
                break;
            }
            let eta = STEP_FRACTION.max(1.0 - 100.0 * mu);
            let ap = (eta * max_step(&x, &dir.dx)).min(1.0);
            let ad = (eta * max_step(&z, &dir.dz)).min(1.0);

            let x_old = x.clone();
            for i in 0..nvar {
                x[i] += ap * dir.dx[i];
                z[i] += ad * dir.dz[i];
            }
            for (yi, d) in y.iter_mut().zip(&dir.dy) {
                *yi += ad * d;
            }
            if x.iter().chain(&y).chain(&z).any(|v| !v.is_finite()) {
                x = x_old;
                break;
            }
            if config.trace {
                trace.push(self.trace_row(it + 1, &x, ap, ad));
            }
            if ap < STALL_STEP && ad < STALL_STEP {
                stalled += 1;
                if stalled >= STALL_COUNT {
                    break;
                }
            } else {
                stalled = 0;
            }
        }

        let mut g: Vec<f64> = x[..n].iter().map(|v| v.max(0.0)).collect();
        if !converged {
            // once the normal equations stop resolving the iterate, accept
            // the best primal- and dual-feasible point on a looser gap
            if let Some((gap, best_g)) = best {
                if gap <= config.obj_tol.sqrt() {
                    converged = true;
                    g = best_g;
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
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::operators::MeasurementMatrix;
    use crate::signal::rng_from_seed;
    use crate::sphere::build_grid;
    use rand::Rng;

    fn problem(mode: SolveMode) -> LpProblem {
        let grid = Arc::new(build_grid(8).unwrap());
        let op = MeasurementMatrix::new(Arc::clone(&grid), 3);
        let mut rng = rng_from_seed(4);
        let s: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>() - 0.3).collect();
        LpProblem::new(&op, &s, 0.5, mode)
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn newton_direction_solves_the_system() {
        for (mode, dense) in [
            (SolveMode::L1Min, false),
            (SolveMode::Feasibility, false),
            (SolveMode::L1Min, true),
            (SolveMode::Feasibility, true),
        ] {
            let prob = problem(mode);
            let ipm = Ipm::new(&prob);
            let nvar = ipm.cost.len();
            let ncon = ipm.rhs.len();
            let mut rng = rng_from_seed(9);
            let mut draw = |k: usize, lo: f64| -> Vec<f64> { (0..k).map(|_| lo + rng.random::<f64>()).collect() };
            let x = draw(nvar, 0.1);
            let z = draw(nvar, 0.1);
            let rp = draw(ncon, -0.5);
            let rd = draw(nvar, -0.5);
            let rc = draw(nvar, -0.5);
            let d: Vec<f64> = x.iter().zip(&z).map(|(x, z)| x / z).collect();
            let nm = ipm.factor(&d, dense).unwrap();
            let dir = ipm.direction(&nm, &x, &z, &rp, &rd, &rc);
            assert!(max_abs_diff(&ipm.a_mul(&dir.dx), &rp) < 1e-9, "{mode}");
            let lhs: Vec<f64> = ipm.at_mul(&dir.dy).iter().zip(&dir.dz).map(|(a, b)| a + b).collect();
            assert!(max_abs_diff(&lhs, &rd) < 1e-9, "{mode}");
            let comp: Vec<f64> = (0..nvar).map(|i| z[i] * dir.dx[i] + x[i] * dir.dz[i]).collect();
            assert!(max_abs_diff(&comp, &rc) < 1e-9, "{mode}");
        }
    }
}
