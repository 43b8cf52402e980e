//! Dense two-phase tableau simplex. Dantzig pricing, switching to Bland's
//! rule after a run of degenerate pivots so it cannot cycle. Slow but exact
//! up to roundoff, and independent of the shipped solver.

const EPS: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `rows × (cols + 1)`, right-hand side last.
    t: Vec<Vec<f64>>,
    /// Reduced costs, with minus the objective value last.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        self.t[row].iter_mut().for_each(|v| *v /= p);
        let pivot_row = std::mem::take(&mut self.t[row]);
        for r in self.t.iter_mut().chain(std::iter::once(&mut self.obj)) {
            if r.is_empty() {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                r.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a -= f * b);
            }
        }
        self.t[row] = pivot_row;
        self.basis[row] = col;
    }

    fn set_cost(&mut self, cost: &[f64]) {
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for (row, &b) in self.t.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                self.obj.iter_mut().zip(row).for_each(|(o, v)| *o -= cb * v);
            }
        }
    }

    /// Minimises over the first `allowed` columns; false when unbounded.
    fn optimise(&mut self, allowed: usize) -> bool {
        let mut degenerate = 0;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let candidates = (0..allowed).filter(|&j| self.obj[j] < -EPS);
            let entering = if bland {
                candidates.min()
            } else {
                candidates.min_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]))
            };
            let Some(col) = entering else { return true };
            let mut best: Option<(f64, usize)> = None;
            for (i, r) in self.t.iter().enumerate() {
                if r[col] > EPS {
                    let ratio = r[self.cols] / r[col];
                    let better = match best {
                        None => true,
                        Some((b, bi)) => ratio < b - EPS || (ratio <= b + EPS && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            let Some((ratio, row)) = best else { return false };
            degenerate = if ratio <= EPS { degenerate + 1 } else { 0 };
            self.pivot(row, col);
        }
    }
}

/// `min c·x` subject to `A x ≤ b`, `x ≥ 0`.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let (m, n) = (a.len(), c.len());
    // columns: x (n), slacks (m), artificials (m)
    let cols = n + 2 * m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = sign;
        t[i][n + m + i] = 1.0;
        t[i][cols] = sign * b[i];
        basis[i] = n + m + i;
    }
    let mut tab = Tableau {
        t,
        obj: Vec::new(),
        basis,
        cols,
    };

    let mut phase1 = vec![0.0; cols];
    phase1[n + m..].iter_mut().for_each(|v| *v = 1.0);
    tab.set_cost(&phase1);
    tab.optimise(cols);
    if -tab.obj[cols] > 1e-7 {
        return LpOutcome::Infeasible;
    }
    // drive remaining (zero-level) artificials out of the basis
    for row in 0..m {
        if tab.basis[row] >= n + m {
            if let Some(col) = (0..n + m).find(|&j| tab.t[row][j].abs() > EPS) {
                tab.pivot(row, col);
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(c);
    tab.set_cost(&phase2);
    if !tab.optimise(n + m) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (row, &bi) in tab.basis.iter().enumerate() {
        if bi < n {
            x[bi] = tab.t[row][cols];
        }
    }
    let objective = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    LpOutcome::Optimal { x, objective }
}

/// Optimal value of `min Σg` over `g, t ≥ 0`, `t ≥ ±(s − Kg)`, `Σt ≤ δ`.
pub fn l1min_objective(kernel: &nalgebra::DMatrix<f64>, s: &[f64], delta: f64) -> Option<f64> {
    let g = s.len();
    let mut c = vec![0.0; 2 * g];
    c[..g].iter_mut().for_each(|v| *v = 1.0);
    let mut a = Vec::with_capacity(2 * g + 1);
    let mut b = Vec::with_capacity(2 * g + 1);
    for i in 0..g {
        // s − Kg ≤ t   ⇔   −Kg − t ≤ −s
        let mut row = vec![0.0; 2 * g];
        for j in 0..g {
            row[j] = -kernel[(i, j)];
        }
        row[g + i] = -1.0;
        a.push(row);
        b.push(-s[i]);
        // Kg − s ≤ t
        let mut row = vec![0.0; 2 * g];
        for j in 0..g {
            row[j] = kernel[(i, j)];
        }
        row[g + i] = -1.0;
        a.push(row);
        b.push(s[i]);
    }
    let mut row = vec![0.0; 2 * g];
    row[g..].iter_mut().for_each(|v| *v = 1.0);
    a.push(row);
    b.push(delta);
    match minimize(&c, &a, &b) {
        LpOutcome::Optimal { objective, .. } => Some(objective),
        _ => None,
    }
}
