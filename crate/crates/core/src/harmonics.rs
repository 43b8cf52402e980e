//! Associated Legendre functions and complex spherical harmonics.
//!
//! Conventions: `P_{n,k}` carries no Condon–Shortley phase and negative
//! orders reuse `P_{n,|k|}`, so
//!
//! ```text
//! Y_{n,k}(φ, θ) = A_{n,k} · e^{ikφ} · P_{n,|k|}(cos θ),
//! A_{n,k}       = sqrt((2n+1)/(4π) · (n−|k|)!/(n+|k|)!),
//! ```
//!
//! and `Y_{n,−k} = conj(Y_{n,k})`. The basis is orthonormal on the sphere.

use std::f64::consts::PI;

use nalgebra::Complex;

use crate::error::{invalid, Result};
use crate::sphere::SpherePoint;

pub type Complex64 = Complex<f64>;

/// Index `(n, k)` of a spherical harmonic, `|k| ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    n: usize,
    k: i64,
}

impl HarmonicIndex {
    pub fn new(n: usize, k: i64) -> Result<Self> {
        if k.unsigned_abs() as usize > n {
            return Err(invalid(format!("order k = {k} exceeds degree n = {n}")));
        }
        Ok(Self { n, k })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> i64 {
        self.k
    }

    /// Position in the packed layout `n² + n + k` used by coefficient vectors.
    pub fn linear(&self) -> usize {
        ((self.n * self.n + self.n) as i64 + self.k) as usize
    }

    pub fn from_linear(i: usize) -> Self {
        let n = (i as f64).sqrt() as usize;
        // guard against rounding in the square root
        let n = if (n + 1) * (n + 1) <= i { n + 1 } else if n * n > i { n - 1 } else { n };
        Self {
            n,
            k: i as i64 - (n * n + n) as i64,
        }
    }

    /// All indices with degree at most `max_degree`, in packed order.
    pub fn up_to(max_degree: usize) -> impl Iterator<Item = HarmonicIndex> {
        (0..=max_degree).flat_map(|n| (-(n as i64)..=n as i64).map(move |k| HarmonicIndex { n, k }))
    }
}

/// Number of harmonics with degree `≤ max_degree`.
pub fn count_up_to(max_degree: usize) -> usize {
    (max_degree + 1) * (max_degree + 1)
}

/// Associated Legendre function `P_{n,k}(x)` for `0 ≤ k ≤ n`, without the
/// `(−1)^k` phase, by upward recurrence in degree from
/// `P_{k,k}(x) = (2k−1)!!·(1−x²)^{k/2}`.
pub fn assoc_legendre(n: usize, k: usize, x: f64) -> Result<f64> {
    if k > n {
        return Err(invalid(format!("order k = {k} exceeds degree n = {n}")));
    }
    if !(x.abs() <= 1.0) {
        return Err(invalid(format!("argument x = {x} outside [-1, 1]")));
    }
    let s = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pkk = 1.0;
    for i in 1..=k {
        pkk *= (2 * i - 1) as f64 * s;
    }
    if n == k {
        return Ok(pkk);
    }
    let mut prev = pkk;
    let mut cur = x * (2 * k + 1) as f64 * pkk;
    for l in k + 2..=n {
        let next = (x * (2 * l - 1) as f64 * cur - (l + k - 1) as f64 * prev) / (l - k) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `ln((n−k)!/(n+k)!)` for `k ≥ 0`.
fn ln_factorial_ratio(n: usize, k: usize) -> f64 {
    -((n - k + 1)..=(n + k)).map(|i| (i as f64).ln()).sum::<f64>()
}

/// Normalisation constant `A_{n,k}`.
pub fn normalization(index: HarmonicIndex) -> f64 {
    let k = index.k.unsigned_abs() as usize;
    let n = index.n;
    ((2 * n + 1) as f64 / (4.0 * PI) * ln_factorial_ratio(n, k).exp()).sqrt()
}

/// `Y_{n,k}` at a point.
pub fn eval_y(index: HarmonicIndex, point: &SpherePoint) -> Complex64 {
    let k = index.k.unsigned_abs() as usize;
    let p = assoc_legendre(index.n, k, point.theta().cos()).expect("validated index");
    Complex64::from_polar(normalization(index) * p, index.k as f64 * point.phi())
}

/// Every `Y_{n,k}` with `n ≤ max_degree` at one point, in packed order.
///
/// Runs the normalised recurrence once per order, so it stays finite for
/// degrees where the unnormalised `P_{n,k}` would overflow.
pub fn eval_all(max_degree: usize, point: &SpherePoint) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); count_up_to(max_degree)];
    let mut real = vec![0.0; max_degree + 1];
    eval_all_into(max_degree, point.phi(), point.theta(), &mut out, &mut real);
    out
}

pub(crate) fn eval_all_into(
    max_degree: usize,
    phi: f64,
    theta: f64,
    out: &mut [Complex64],
    column: &mut [f64],
) {
    let (s, x) = theta.sin_cos();
    let s = s.abs();
    // normalised diagonal term Ā_{k,k} P_{k,k}
    let mut diag = (1.0 / (4.0 * PI)).sqrt();
    for k in 0..=max_degree {
        if k > 0 {
            diag *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
        }
        // column[n] holds Ā_{n,k} P_{n,k}(x) for n ≥ k
        column[k] = diag;
        if k < max_degree {
            column[k + 1] = ((2 * k + 3) as f64).sqrt() * x * diag;
        }
        for n in k + 2..=max_degree {
            let nf = n as f64;
            let kf = k as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - kf * kf)).sqrt();
            let b = (((nf - 1.0) * (nf - 1.0) - kf * kf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
            column[n] = a * (x * column[n - 1] - b * column[n - 2]);
        }
        let phase = Complex64::from_polar(1.0, k as f64 * phi);
        for n in k..=max_degree {
            let v = phase * column[n];
            out[n * n + n + k] = v;
            if k > 0 {
                out[n * n + n - k] = v.conj();
            }
        }
    }
}

/// Legendre polynomial `P_n(x)` by the Bonnet recurrence.
pub fn legendre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for l in 1..n {
        let next = ((2 * l + 1) as f64 * x * cur - l as f64 * prev) / (l + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Legendre values `P_0(x), …, P_n(x)`.
pub fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for l in 1..n {
        let next = ((2 * l + 1) as f64 * x * out[l] - l as f64 * out[l - 1]) / (l + 1) as f64;
        out.push(next);
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_m`).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[m - 1 - i] = -x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let p = legendre(m, x);
    let pm1 = if m == 0 { 0.0 } else { legendre(m - 1, x) };
    (p, m as f64 * (x * p - pm1) / (x * x - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn pt(phi: f64, theta: f64) -> SpherePoint {
        SpherePoint::new(phi, theta).unwrap()
    }

    fn idx(n: usize, k: i64) -> HarmonicIndex {
        HarmonicIndex::new(n, k).unwrap()
    }

    /// Rodrigues-type evaluation of `(1−x²)^{k/2} d^{n+k}/dx^{n+k} (x²−1)^n / (2^n n!)`
    /// through exact polynomial coefficients; independent of the recurrence.
    fn rodrigues(n: usize, k: usize, x: f64) -> f64 {
        // (x²−1)^n = Σ_j C(n,j) (−1)^{n−j} x^{2j}
        let mut coeffs = vec![0.0f64; 2 * n + 1];
        let mut binom = 1.0f64;
        for j in 0..=n {
            if j > 0 {
                binom = binom * (n - j + 1) as f64 / j as f64;
            }
            coeffs[2 * j] = binom * if (n - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        }
        for _ in 0..n + k {
            let mut d = vec![0.0; coeffs.len().saturating_sub(1).max(1)];
            for (p, c) in coeffs.iter().enumerate().skip(1) {
                d[p - 1] = c * p as f64;
            }
            coeffs = d;
        }
        let poly: f64 = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let mut fact = 1.0;
        for i in 1..=n {
            fact *= i as f64;
        }
        (1.0 - x * x).powf(k as f64 / 2.0) * poly / (2f64.powi(n as i32) * fact)
    }

    #[test]
    fn assoc_legendre_examples() {
        assert_eq!(assoc_legendre(0, 0, 0.7).unwrap(), 1.0);
        assert_eq!(assoc_legendre(1, 0, 0.7).unwrap(), 0.7);
        let v = assoc_legendre(2, 1, 0.5).unwrap();
        let closed = 3.0 * 0.5 * (1.0f64 - 0.25).sqrt();
        assert!((v - closed).abs() < 1e-14);
        assert!((v - 1.299_038_105_676_658).abs() < 1e-12);
        assert!((rodrigues(2, 1, 0.5) - closed).abs() < 1e-12);
    }

    #[test]
    fn assoc_legendre_rejects_bad_input() {
        assert!(assoc_legendre(2, 3, 0.1).is_err());
        assert!(assoc_legendre(2, 1, 1.5).is_err());
        assert!(assoc_legendre(2, 1, f64::NAN).is_err());
    }

    #[test]
    fn assoc_legendre_matches_rodrigues_small_degrees() {
        for n in 0..=8 {
            for k in 0..=n {
                for &x in &[-0.93, -0.4, 0.0, 0.27, 0.81] {
                    let a = assoc_legendre(n, k, x).unwrap();
                    let b = rodrigues(n, k, x);
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "n={n} k={k} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn normalization_examples() {
        assert!((normalization(idx(0, 0)) - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!((normalization(idx(0, 0)) - 0.282_094_8).abs() < 1e-7);
        for n in 0..=20 {
            for k in 0..=n as i64 {
                assert_eq!(normalization(idx(n, k)), normalization(idx(n, -k)));
            }
        }
        // exact rational check at (3, 2): (1)!/(5)! = 1/120
        let exact = (7.0 / (4.0 * PI) / 120.0).sqrt();
        assert!((normalization(idx(3, 2)) - exact).abs() < 1e-15);
        // (12, 12): 25/(4π)/24!
        let mut f24 = 1.0f64;
        for i in 1..=24 {
            f24 *= i as f64;
        }
        let a = normalization(idx(12, 12));
        assert!(a.is_finite() && a > 0.0);
        assert!((a / (25.0 / (4.0 * PI) / f24).sqrt() - 1.0).abs() < 1e-12);
        assert!(normalization(idx(64, 64)).is_finite());
    }

    #[test]
    fn harmonic_examples() {
        let p = pt(1.3, 0.8);
        let y00 = eval_y(idx(0, 0), &p);
        assert!((y00.re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(y00.im, 0.0);

        let pole = SpherePoint::north_pole();
        for n in 0..=20 {
            let y = eval_y(idx(n, 0), &pole);
            assert!((y.re - ((2 * n + 1) as f64 / (4.0 * PI)).sqrt()).abs() < 1e-12);
            for k in 1..=n as i64 {
                assert_eq!(eval_y(idx(n, k), &pole).norm(), 0.0);
                assert_eq!(eval_y(idx(n, -k), &pole).norm(), 0.0);
            }
        }
    }

    #[test]
    fn batched_matches_single() {
        for &(phi, theta) in &[(0.0, 0.0), (0.3, 0.2), (2.0, 1.5), (5.9, 3.0)] {
            let p = pt(phi, theta);
            let all = eval_all(20, &p);
            for ix in HarmonicIndex::up_to(20) {
                let a = all[ix.linear()];
                let b = eval_y(ix, &p);
                assert!((a - b).norm() < 1e-12, "{ix:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn packed_index_roundtrip() {
        for (i, ix) in HarmonicIndex::up_to(30).enumerate() {
            assert_eq!(ix.linear(), i);
            assert_eq!(HarmonicIndex::from_linear(i), ix);
        }
        assert_eq!(count_up_to(12), 169);
        assert!(HarmonicIndex::new(2, -3).is_err());
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre(0, 0.3), 1.0);
        assert_eq!(legendre(1, 0.3), 0.3);
        assert!((legendre(2, 0.5) + 0.125).abs() < 1e-15);
        for n in 0..=30 {
            assert!((legendre(n, 1.0) - 1.0).abs() < 1e-13);
        }
        let all = legendre_all(10, -0.37);
        for (n, v) in all.iter().enumerate() {
            assert_eq!(*v, legendre(n, -0.37));
        }
    }

    #[test]
    fn legendre_agrees_with_order_zero_assoc() {
        for n in 0..=30 {
            for &x in &[-0.99, -0.5, 0.1, 0.66] {
                let a = assoc_legendre(n, 0, x).unwrap();
                assert!((a - legendre(n, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact for degree ≤ 19
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((int - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let max_degree = 12;
        let m = count_up_to(max_degree);
        let (nodes, weights) = gauss_legendre(2 * max_degree + 2);
        let nphi = 2 * max_degree + 2;
        let mut gram = vec![Complex64::new(0.0, 0.0); m * m];
        for (x, w) in nodes.iter().zip(&weights) {
            for j in 0..nphi {
                let phi = TAU * j as f64 / nphi as f64;
                let y = eval_all(max_degree, &pt(phi, x.acos()));
                let wt = w * TAU / nphi as f64;
                for a in 0..m {
                    for b in 0..m {
                        gram[a * m + b] += y[a] * y[b].conj() * wt;
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * m + b] - expect).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn conjugation_and_addition_theorem() {
        let pairs = [(0.1, 0.2, 4.0, 2.5), (3.3, 1.1, 3.4, 1.0), (6.0, 2.9, 0.5, 0.05)];
        for &(p1, t1, p2, t2) in &pairs {
            let a = pt(p1, t1);
            let b = pt(p2, t2);
            let ya = eval_all(15, &a);
            let yb = eval_all(15, &b);
            let cos = crate::sphere::geodesic_distance(&a, &b).cos();
            for n in 0..=15usize {
                let mut sum = Complex64::new(0.0, 0.0);
                for k in -(n as i64)..=n as i64 {
                    let ix = idx(n, k);
                    sum += ya[ix.linear()] * yb[ix.linear()].conj();
                    let neg = eval_y(idx(n, -k), &a);
                    assert!((neg - eval_y(ix, &a).conj()).norm() < 1e-14);
                }
                let expect = (2 * n + 1) as f64 / (4.0 * PI) * legendre(n, cos);
                assert!((sum.re - expect).abs() < 1e-10 && sum.im.abs() < 1e-10);
            }
        }
    }
}
