//! Blocked right-looking Cholesky that drops near-singular pivots.
//!
//! A pivot at or below `floor` is replaced by a huge value, so the matching
//! unknown is effectively fixed at zero. Interior-point normal matrices hit
//! this once some directions fall below roundoff.

use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::reborrow::Reborrow;
use faer::{Accum, Mat, MatMut, Par};

const BLOCK: usize = 64;
/// Replacement for dropped pivots (the stored factor entry is its square root).
const DROPPED: f64 = 1e128;

/// Overwrites the lower triangle of `a` with `L`, `L Lᵀ ≈ a`; returns the
/// number of dropped pivots.
pub(crate) fn cholesky_dropping(a: &mut Mat<f64>, floor: f64) -> usize {
    let n = a.nrows();
    let mut dropped = 0;
    let mut j = 0;
    while j < n {
        let bs = BLOCK.min(n - j);
        let (mut a00, _, mut a10, a11) = a.as_mut().get_mut(j.., j..).split_at_mut(bs, bs);
        dropped += unblocked(a00.as_mut(), floor);
        let a00 = a00.rb();
        solve_lower_triangular_in_place(a00, a10.as_mut().transpose_mut(), Par::Seq);
        matmul(
            a11,
            BlockStructure::TriangularLower,
            Accum::Add,
            a10.rb(),
            BlockStructure::Rectangular,
            a10.rb().transpose(),
            BlockStructure::Rectangular,
            -1.0,
            Par::Seq,
        );
        j += bs;
    }
    dropped
}

fn unblocked(mut a: MatMut<'_, f64>, floor: f64) -> usize {
    let n = a.nrows();
    let mut dropped = 0;
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > floor) {
            d = DROPPED;
            dropped += 1;
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = v / d;
        }
    }
    dropped
}

/// Solves `L Lᵀ x = b` in place.
pub(crate) fn cholesky_solve(l: &Mat<f64>, b: &mut Mat<f64>) {
    solve_lower_triangular_in_place(l.as_ref(), b.as_mut(), Par::Seq);
    solve_upper_triangular_in_place(l.as_ref().transpose(), b.as_mut(), Par::Seq);
}
