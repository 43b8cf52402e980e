//! The measurement operator `F_N` (grid → low-degree harmonic coefficients),
//! its adjoint, and the projection `P_N = F_N* F_N` sampled on the grid.
//!
//! Inner products conjugate the basis function: `⟨f, Y⟩ = Σ_x f[x]·conj(Y(x))`.
//! With that convention the dense analysis matrix is
//! `A[(n,k), j] = conj(Y_{n,k}(x_j))`, the adjoint is `Aᴴ`, and the grid
//! kernel `K = Re(AᴴA)` equals `Σ_n (2n+1)/(4π)·P_n(cos ρ)` by the addition
//! theorem.
//!
//! For real-symmetric coefficient vectors the same operator has a real factor
//! `B` (rows `Re Y_{n,0}`, `√2·Re Y_{n,k}`, `√2·Im Y_{n,k}`) with `K = BᵀB`;
//! the solver works with that factor.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::harmonics::{count_up_to, eval_all_into, Complex64, HarmonicIndex};
use crate::io::{field, fmt17, read_rows};
use crate::signal::DiracSignal;
use crate::sphere::SphereGrid;

/// Tolerance for the real-symmetry flag on coefficient vectors.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative bound on the imaginary part tolerated by [`adjoint`].
pub const IMAG_LEAK_TOL: f64 = 1e-8;

/// Coefficients `{z_{n,k}}` for `n ≤ N`, packed as `n² + n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    degree: usize,
    values: Vec<Complex64>,
    real_symmetric: bool,
}

impl HarmonicCoeffs {
    pub fn zeros(degree: usize) -> Self {
        Self {
            degree,
            values: vec![Complex64::new(0.0, 0.0); count_up_to(degree)],
            real_symmetric: true,
        }
    }

    /// Wraps raw values without asserting symmetry.
    pub fn new(degree: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != count_up_to(degree) {
            return Err(Error::ShapeMismatch {
                expected: count_up_to(degree),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("harmonic coefficients".into()));
        }
        Ok(Self {
            degree,
            values,
            real_symmetric: false,
        })
    }

    /// Wraps values and flags them real-symmetric, failing if
    /// `z_{n,−k} = conj(z_{n,k})` does not hold to [`SYMMETRY_TOL`].
    pub fn new_real_symmetric(degree: usize, values: Vec<Complex64>) -> Result<Self> {
        let mut out = Self::new(degree, values)?;
        if !out.check_real_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidParameter(
                "coefficients are not conjugate-symmetric".into(),
            ));
        }
        out.real_symmetric = true;
        Ok(out)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: HarmonicIndex) -> Option<Complex64> {
        self.values.get(index.linear()).copied()
    }

    pub fn is_real_symmetric(&self) -> bool {
        self.real_symmetric
    }

    /// Verifies `z_{n,−k} = conj(z_{n,k})` and `Im z_{n,0} = 0` within `tol`.
    pub fn check_real_symmetric(&self, tol: f64) -> bool {
        HarmonicIndex::up_to(self.degree).all(|ix| {
            let v = self.values[ix.linear()];
            match ix.order() {
                0 => v.im.abs() <= tol,
                k if k > 0 => {
                    let mirror = HarmonicIndex::new(ix.degree(), -k).expect("valid order");
                    (self.values[mirror.linear()] - v.conj()).norm() <= tol
                }
                _ => true,
            }
        })
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            degree: self.degree,
            values: self.values.iter().map(|v| v * factor).collect(),
            real_symmetric: self.real_symmetric,
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.degree != other.degree {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(Self {
            degree: self.degree,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            real_symmetric: self.real_symmetric && other.real_symmetric,
        })
    }

    /// Real coordinates in the factor basis: `c = B·f` whenever the
    /// coefficients are `A·f` for a real `f`.
    pub fn real_coords(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for ix in HarmonicIndex::up_to(self.degree) {
            let k = ix.order();
            let n = ix.degree();
            let pos = HarmonicIndex::new(n, k.abs()).expect("valid order").linear();
            let v = self.values[pos];
            out[ix.linear()] = match k {
                0 => v.re,
                k if k > 0 => SQRT_2 * v.re,
                _ => -SQRT_2 * v.im,
            };
        }
        out
    }

    /// Writes `n,k,re,im` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "n,k,re,im")?;
        for ix in HarmonicIndex::up_to(self.degree) {
            let v = self.values[ix.linear()];
            writeln!(out, "{},{},{},{}", ix.degree(), ix.order(), fmt17(v.re), fmt17(v.im))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `n,k,re,im` rows; the degree is the largest `n` present and
    /// missing entries are zero. The symmetry flag is set when it holds.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_rows(path, &["n", "k", "re", "im"])?;
        let mut entries = Vec::with_capacity(rows.len());
        for row in &rows {
            let n: usize = field(path, row, 0)?;
            let k: i64 = field(path, row, 1)?;
            let re: f64 = field(path, row, 2)?;
            let im: f64 = field(path, row, 3)?;
            let ix = HarmonicIndex::new(n, k).map_err(|e| Error::Format {
                path: path.to_owned(),
                reason: e.to_string(),
            })?;
            entries.push((ix, Complex64::new(re, im)));
        }
        let degree = entries.iter().map(|(ix, _)| ix.degree()).max().unwrap_or(0);
        let mut values = vec![Complex64::new(0.0, 0.0); count_up_to(degree)];
        for (ix, v) in entries {
            values[ix.linear()] = v;
        }
        let mut out = Self::new(degree, values)?;
        out.real_symmetric = out.check_real_symmetric(SYMMETRY_TOL);
        Ok(out)
    }
}

/// Real samples of a function on the grid, one per stored point.
#[derive(Debug, Clone)]
pub struct GriddedFunction {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl PartialEq for GriddedFunction {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

pub(crate) fn same_grid(a: &SphereGrid, b: &SphereGrid) -> bool {
    std::ptr::eq(a, b) || a.resolution() == b.resolution()
}

impl GriddedFunction {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SphereGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖self − other‖₁` over the stored grid points.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if !same_grid(&self.grid, &other.grid) || self.values.len() != other.values.len() {
            return Err(Error::DomainMismatch(format!(
                "grid L = {} vs L = {}",
                self.grid.resolution(),
                other.grid.resolution()
            )));
        }
        Ok(())
    }

    /// Writes `index,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{}", fmt17(*v))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `index,value` rows onto `grid`; every stored index must appear
    /// exactly once.
    pub fn read_csv(path: impl AsRef<Path>, grid: Arc<SphereGrid>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_rows(path, &["index", "value"])?;
        let mut values = vec![f64::NAN; grid.len()];
        for row in &rows {
            let i: usize = field(path, row, 0)?;
            let v: f64 = field(path, row, 1)?;
            if i >= values.len() || !values[i].is_nan() {
                return Err(Error::Format {
                    path: path.to_owned(),
                    reason: format!("index {i} out of range or repeated"),
                });
            }
            values[i] = v;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Format {
                path: path.to_owned(),
                reason: format!("missing value for index {i}"),
            });
        }
        Self::new(grid, values)
    }
}

/// Which route [`MeasurementMatrix::project`] takes to apply `P_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionPath {
    /// Dense kernel `K·g`.
    Kernel,
    /// `Bᵀ(B·g)` through the real factor.
    Factored,
}

/// Dense `F_N` on a grid together with its real factor and (lazily) the
/// projection kernel.
#[derive(Debug)]
pub struct MeasurementMatrix {
    degree: usize,
    grid: Arc<SphereGrid>,
    analysis: DMatrix<Complex64>,
    factor: DMatrix<f64>,
    kernel: OnceLock<DMatrix<f64>>,
}

impl MeasurementMatrix {
    pub fn new(grid: Arc<SphereGrid>, degree: usize) -> Self {
        let m = count_up_to(degree);
        let g = grid.len();
        let mut analysis = DMatrix::<Complex64>::zeros(m, g);
        let mut factor = DMatrix::<f64>::zeros(m, g);
        let mut ys = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![0.0; degree + 1];
        for (j, p) in grid.points().iter().enumerate() {
            eval_all_into(degree, p.phi(), p.theta(), &mut ys, &mut scratch);
            for ix in HarmonicIndex::up_to(degree) {
                let row = ix.linear();
                analysis[(row, j)] = ys[row].conj();
                let k = ix.order();
                let base = ys[HarmonicIndex::new(ix.degree(), k.abs()).expect("valid").linear()];
                factor[(row, j)] = match k {
                    0 => base.re,
                    k if k > 0 => SQRT_2 * base.re,
                    _ => SQRT_2 * base.im,
                };
            }
        }
        Self {
            degree,
            grid,
            analysis,
            factor,
            kernel: OnceLock::new(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    /// `A` with `A[(n,k), j] = conj(Y_{n,k}(x_j))`.
    pub fn analysis(&self) -> &DMatrix<Complex64> {
        &self.analysis
    }

    /// Real `B` with `K = BᵀB`.
    pub fn real_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Dense kernel `K[i][j] = Σ_{n≤N} (2n+1)/(4π)·P_n(cos ρ(x_i, x_j))`,
    /// assembled on first use.
    pub fn kernel(&self) -> &DMatrix<f64> {
        self.kernel.get_or_init(|| addition_kernel(&self.grid, self.degree))
    }

    pub fn has_kernel(&self) -> bool {
        self.kernel.get().is_some()
    }

    /// Common diagonal value `(N+1)²/(4π)`.
    pub fn kernel_diagonal(&self) -> f64 {
        count_up_to(self.degree) as f64 / (4.0 * PI)
    }

    fn check_grid(&self, g: &GriddedFunction) -> Result<()> {
        if g.values.len() != self.grid.len() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.len(),
                actual: g.values.len(),
            });
        }
        if !same_grid(&self.grid, &g.grid) {
            return Err(Error::DomainMismatch("function lives on a different grid".into()));
        }
        Ok(())
    }

    /// `A·g`: the low-degree coefficients of a gridded function.
    pub fn analyze(&self, g: &GriddedFunction) -> Result<HarmonicCoeffs> {
        self.check_grid(g)?;
        let v = DVector::from_iterator(g.values.len(), g.values.iter().map(|x| Complex64::new(*x, 0.0)));
        let y = &self.analysis * v;
        Ok(HarmonicCoeffs {
            degree: self.degree,
            values: y.iter().copied().collect(),
            real_symmetric: true,
        })
    }

    /// `Aᴴ·z` on the grid; see [`adjoint`].
    pub fn synthesize(&self, coeffs: &HarmonicCoeffs) -> Result<GriddedFunction> {
        if coeffs.degree != self.degree {
            return Err(Error::ShapeMismatch {
                expected: count_up_to(self.degree),
                actual: coeffs.len(),
            });
        }
        let z = DVector::from_column_slice(&coeffs.values);
        let v = self.analysis.ad_mul(&z);
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.re.abs()));
        let imag = v.iter().fold(0.0f64, |m, x| m.max(x.im.abs()));
        let limit = IMAG_LEAK_TOL * scale;
        if coeffs.real_symmetric && imag > limit {
            return Err(Error::ImaginaryLeak { imag, limit });
        }
        GriddedFunction::new(Arc::clone(&self.grid), v.iter().map(|x| x.re).collect())
    }

    /// `P_N g` sampled on the grid.
    pub fn project(&self, g: &GriddedFunction, path: ProjectionPath) -> Result<GriddedFunction> {
        self.check_grid(g)?;
        let values = match path {
            ProjectionPath::Kernel => {
                let v = DVector::from_column_slice(&g.values);
                (self.kernel() * v).iter().copied().collect()
            }
            ProjectionPath::Factored => self.apply_factored(&g.values),
        };
        GriddedFunction::new(Arc::clone(&self.grid), values)
    }

    /// `Bᵀ(B·x)` on raw grid vectors.
    pub(crate) fn apply_factored(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        let c = &self.factor * v;
        self.factor.tr_mul(&c).iter().copied().collect()
    }
}

fn addition_kernel(grid: &SphereGrid, degree: usize) -> DMatrix<f64> {
    let g = grid.len();
    let weights: Vec<f64> = (0..=degree).map(|n| (2 * n + 1) as f64 / (4.0 * PI)).collect();
    let units = grid.unit_vectors();
    let mut k = DMatrix::<f64>::zeros(g, g);
    let diag: f64 = weights.iter().sum();
    for i in 0..g {
        k[(i, i)] = diag;
        for j in i + 1..g {
            let u = &units[i];
            let v = &units[j];
            let x = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
            let val = kernel_value(&weights, x);
            k[(i, j)] = val;
            k[(j, i)] = val;
        }
    }
    k
}

/// `Σ_n w_n P_n(x)` with the Bonnet recurrence.
fn kernel_value(weights: &[f64], x: f64) -> f64 {
    let mut acc = weights[0];
    if weights.len() == 1 {
        return acc;
    }
    let mut prev = 1.0;
    let mut cur = x;
    acc += weights[1] * cur;
    for (l, w) in weights.iter().enumerate().skip(2) {
        let lf = l as f64;
        let next = ((2.0 * lf - 1.0) * x * cur - (lf - 1.0) * prev) / lf;
        prev = cur;
        cur = next;
        acc += w * cur;
    }
    acc
}

/// Noiseless coefficients `y_{n,k} = Σ_m c_m·conj(Y_{n,k}(x_m))`.
pub fn forward(signal: &DiracSignal, degree: usize) -> Result<HarmonicCoeffs> {
    let grid = signal.grid();
    let mut values = vec![Complex64::new(0.0, 0.0); count_up_to(degree)];
    let mut ys = vec![Complex64::new(0.0, 0.0); values.len()];
    let mut scratch = vec![0.0; degree + 1];
    for (&i, &c) in signal.support().iter().zip(signal.amplitudes()) {
        if i >= grid.len() {
            return Err(Error::DomainMismatch(format!(
                "support index {i} outside grid of {} points",
                grid.len()
            )));
        }
        let p = grid.point(i);
        eval_all_into(degree, p.phi(), p.theta(), &mut ys, &mut scratch);
        for (acc, y) in values.iter_mut().zip(&ys) {
            *acc += y.conj() * c;
        }
    }
    Ok(HarmonicCoeffs {
        degree,
        values,
        real_symmetric: true,
    })
}

/// `F_N* z`: evaluates `Σ z_{n,k} Y_{n,k}` at every grid point and returns
/// the real part. Real-symmetric inputs whose synthesis leaks an imaginary
/// part above `1e-8·‖·‖∞` are rejected.
pub fn adjoint(coeffs: &HarmonicCoeffs, grid: &Arc<SphereGrid>) -> Result<GriddedFunction> {
    let degree = coeffs.degree;
    let mut ys = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    let mut scratch = vec![0.0; degree + 1];
    let mut re = Vec::with_capacity(grid.len());
    let mut imag = 0.0f64;
    for p in grid.points() {
        eval_all_into(degree, p.phi(), p.theta(), &mut ys, &mut scratch);
        let v: Complex64 = coeffs.values.iter().zip(&ys).map(|(z, y)| z * y).sum();
        re.push(v.re);
        imag = imag.max(v.im.abs());
    }
    let limit = IMAG_LEAK_TOL * re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if coeffs.real_symmetric && imag > limit {
        return Err(Error::ImaginaryLeak { imag, limit });
    }
    GriddedFunction::new(Arc::clone(grid), re)
}

/// Builds the operator on `grid` with the kernel already assembled.
pub fn projection_kernel(grid: &Arc<SphereGrid>, degree: usize) -> MeasurementMatrix {
    let m = MeasurementMatrix::new(Arc::clone(grid), degree);
    m.kernel();
    m
}

/// `P_N g` via the dense kernel.
pub fn apply_projection(m: &MeasurementMatrix, g: &GriddedFunction) -> Result<GriddedFunction> {
    m.project(g, ProjectionPath::Kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::legendre;
    use crate::sphere::{build_grid, geodesic_distance};

    fn grid(l: usize) -> Arc<SphereGrid> {
        Arc::new(build_grid(l).unwrap())
    }

    fn dirac(grid: &Arc<SphereGrid>, support: &[usize], amps: &[f64]) -> DiracSignal {
        DiracSignal::new(Arc::clone(grid), support.to_vec(), amps.to_vec()).unwrap()
    }

    #[test]
    fn forward_of_pole_dirac() {
        let g = grid(10);
        let y = forward(&dirac(&g, &[0], &[1.0]), 6).unwrap();
        for ix in HarmonicIndex::up_to(6) {
            let v = y.get(ix).unwrap();
            if ix.order() == 0 {
                let n = ix.degree() as f64;
                assert!((v.re - ((2.0 * n + 1.0) / (4.0 * PI)).sqrt()).abs() < 1e-12);
            } else {
                assert!(v.norm() < 1e-15);
            }
        }
        assert!(y.is_real_symmetric() && y.check_real_symmetric(1e-12));
    }

    #[test]
    fn forward_is_linear_and_empty_is_zero() {
        let g = grid(12);
        let empty = forward(&dirac(&g, &[], &[]), 5).unwrap();
        assert!(empty.values().iter().all(|v| v.norm() == 0.0));

        let a = forward(&dirac(&g, &[17], &[2.5]), 5).unwrap();
        let b = forward(&dirac(&g, &[90], &[0.5]), 5).unwrap();
        let ab = forward(&dirac(&g, &[17, 90], &[2.5, 0.5]), 5).unwrap();
        let sum = a.add(&b).unwrap();
        for (x, y) in ab.values().iter().zip(sum.values()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn forward_rejects_foreign_index() {
        let small = grid(4);
        let big = grid(8);
        let s = dirac(&big, &[40], &[1.0]);
        let moved = DiracSignal::from_parts_unchecked(small, s.support().to_vec(), s.amplitudes().to_vec());
        assert!(matches!(forward(&moved, 3), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn adjoint_examples() {
        let g = grid(16);
        let n = 7;
        let x0 = 45;
        let y = forward(&dirac(&g, &[x0], &[1.0]), n).unwrap();
        let s = adjoint(&y, &g).unwrap();
        assert!((s.values()[x0] - 64.0 / (4.0 * PI)).abs() < 1e-12);

        let zero = adjoint(&HarmonicCoeffs::zeros(n), &g).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adjoint_flags_imaginary_leak() {
        let g = grid(8);
        let mut values = vec![Complex64::new(0.0, 0.0); count_up_to(2)];
        values[HarmonicIndex::new(1, 1).unwrap().linear()] = Complex64::new(1.0, 0.0);
        let mut bad = HarmonicCoeffs::new(2, values).unwrap();
        assert!(adjoint(&bad, &g).is_ok());
        bad.real_symmetric = true;
        assert!(matches!(adjoint(&bad, &g), Err(Error::ImaginaryLeak { .. })));
        assert!(HarmonicCoeffs::new_real_symmetric(2, bad.values.clone()).is_err());
    }

    #[test]
    fn kernel_examples() {
        let g = grid(12);
        let m = projection_kernel(&g, 12);
        let k = m.kernel();
        for i in 0..g.len() {
            assert!((k[(i, i)] - 169.0 / (4.0 * PI)).abs() < 1e-12);
        }
        assert!((m.kernel_diagonal() - 13.448_592_691).abs() < 1e-8);

        let m0 = projection_kernel(&g, 0);
        assert!(m0.kernel().iter().all(|v| (v - 1.0 / (4.0 * PI)).abs() < 1e-15));

        // antipodes exist on an even grid: (q, p) and (q + L/2, L − p)
        let a = g.index_of(1, 3).unwrap();
        let b = g.index_of(7, 9).unwrap();
        assert!((geodesic_distance(&g.point(a), &g.point(b)) - PI).abs() < 1e-12);
        let expect: f64 = (0..=12).map(|n| (2 * n + 1) as f64 / (4.0 * PI) * if n % 2 == 0 { 1.0 } else { -1.0 }).sum();
        assert!((k[(a, b)] - expect).abs() < 1e-10);
    }

    #[test]
    fn kernel_matches_factor_and_analysis() {
        let g = grid(10);
        let m = projection_kernel(&g, 6);
        let k = m.kernel();
        let bb = m.real_factor().tr_mul(m.real_factor());
        let aa = m.analysis().ad_mul(m.analysis());
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert!((k[(i, j)] - bb[(i, j)]).abs() < 1e-10);
                assert!((k[(i, j)] - aa[(i, j)].re).abs() < 1e-10);
                assert!(aa[(i, j)].im.abs() < 1e-10);
                let cos = geodesic_distance(&g.point(i), &g.point(j)).cos();
                let direct: f64 = (0..=6).map(|n| (2 * n + 1) as f64 / (4.0 * PI) * legendre(n, cos)).sum();
                assert!((k[(i, j)] - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_paths_agree() {
        let g = grid(14);
        let m = projection_kernel(&g, 8);
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let f = GriddedFunction::new(Arc::clone(&g), vals).unwrap();
        let a = m.project(&f, ProjectionPath::Kernel).unwrap();
        let b = m.project(&f, ProjectionPath::Factored).unwrap();
        let scale = a.linf_norm();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-9 * scale);
        }
        let zero = apply_projection(&m, &GriddedFunction::zeros(Arc::clone(&g))).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));

        let mut e = vec![0.0; g.len()];
        e[33] = 1.0;
        let col = apply_projection(&m, &GriddedFunction::new(Arc::clone(&g), e).unwrap()).unwrap();
        for i in 0..g.len() {
            assert!((col.values()[i] - m.kernel()[(i, 33)]).abs() < 1e-12);
        }

        let short = GriddedFunction::new(grid(5), vec![0.0; 21]).unwrap();
        assert!(apply_projection(&m, &short).is_err());
    }

    #[test]
    fn real_coords_match_factor() {
        let g = grid(9);
        let m = MeasurementMatrix::new(Arc::clone(&g), 5);
        let s = dirac(&g, &[3, 20, 51], &[1.0, 2.0, 0.25]);
        let y = forward(&s, 5).unwrap();
        let c = y.real_coords();
        let f = DVector::from_column_slice(s.to_gridded().values());
        let bf = m.real_factor() * f;
        for (a, b) in c.iter().zip(bf.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_csv_roundtrip() {
        let g = grid(9);
        let y = forward(&dirac(&g, &[3, 20], &[1.0, 2.0]), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.csv");
        y.write_csv(&path).unwrap();
        let back = HarmonicCoeffs::read_csv(&path).unwrap();
        assert_eq!(back, y);
    }

    #[test]
    fn gridded_csv_roundtrip_and_errors() {
        let g = grid(6);
        let f = GriddedFunction::new(Arc::clone(&g), (0..g.len()).map(|i| i as f64 * 0.1).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        f.write_csv(&path).unwrap();
        assert_eq!(GriddedFunction::read_csv(&path, Arc::clone(&g)).unwrap(), f);
        assert!(GriddedFunction::read_csv(&path, grid(5)).is_err());
        std::fs::write(&path, "idx,value\n0,1\n").unwrap();
        assert!(GriddedFunction::read_csv(&path, g).is_err());
    }
}
