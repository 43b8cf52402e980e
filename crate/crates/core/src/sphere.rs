//! Points on the unit sphere, the uniform target grid, and the separation /
//! Rayleigh-regularity predicates used to describe spike supports.
//!
//! Points are parametrised by azimuth `phi ∈ [0, 2π)` and colatitude
//! `theta ∈ [0, π]`. Distances are great-circle angles.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::io::fmt17;

/// Two points closer than this (in radians) are treated as the same point.
pub const COINCIDENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    phi: f64,
    theta: f64,
}

impl SpherePoint {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        if !phi.is_finite() || !theta.is_finite() {
            return Err(Error::NonFinite(format!("point ({phi}, {theta})")));
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(invalid(format!("phi = {phi} outside [0, 2π)")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(invalid(format!("theta = {theta} outside [0, π]")));
        }
        Ok(Self { phi, theta })
    }

    /// Builds a point from arbitrary angles, wrapping `phi` into `[0, 2π)`
    /// and clamping `theta` into `[0, π]`.
    pub fn wrapped(phi: f64, theta: f64) -> Self {
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Self {
            phi,
            theta: theta.clamp(0.0, PI),
        }
    }

    pub fn north_pole() -> Self {
        Self {
            phi: 0.0,
            theta: 0.0,
        }
    }

    pub fn from_unit_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        Self::wrapped(v[1].atan2(v[0]), z.acos())
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

fn dot(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// Great-circle angle between two unit vectors.
///
/// Evaluated as `atan2(|u×v|, u·v)`, which equals `arccos(u·v)` but keeps
/// full precision near 0 and π (plain `acos` loses ~1e-8 there).
pub(crate) fn angle_between(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    let sin = (cx * cx + cy * cy + cz * cz).sqrt();
    sin.atan2(dot(u, v).clamp(-1.0, 1.0))
}

/// Great-circle distance `arccos(u·v)`, in `[0, π]`.
pub fn geodesic_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    angle_between(&a.unit_vector(), &b.unit_vector())
}

/// The uniform grid `{(2πq/L, πp/L) : q, p ∈ 0..L}` with the `p = 0` row
/// collapsed onto a single north-pole point.
///
/// Stored order: the pole first, then rows `p = 1..L` with `q` running
/// fastest, so `index = 1 + (p - 1)·L + q` off the pole.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    l: usize,
    points: Vec<SpherePoint>,
    units: Vec<[f64; 3]>,
}

impl SphereGrid {
    pub fn new(l: usize) -> Result<Self> {
        build_grid(l)
    }

    /// Grid parameter `L`.
    pub fn resolution(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn point(&self, index: usize) -> SpherePoint {
        self.points[index]
    }

    pub fn unit_vectors(&self) -> &[[f64; 3]] {
        &self.units
    }

    /// Stored index of grid node `(q, p)`; every `(q, 0)` maps to the pole.
    pub fn index_of(&self, q: usize, p: usize) -> Option<usize> {
        if q >= self.l || p >= self.l {
            return None;
        }
        Some(if p == 0 { 0 } else { 1 + (p - 1) * self.l + q })
    }

    /// Canonical `(q, p)` of a stored point; the pole reports `(0, 0)`.
    pub fn grid_coords(&self, index: usize) -> Option<(usize, usize)> {
        if index >= self.len() {
            return None;
        }
        if index == 0 {
            return Some((0, 0));
        }
        let off = index - 1;
        Some((off % self.l, off / self.l + 1))
    }

    /// Index of the stored point closest to `point` (ties go to the lowest
    /// index).
    pub fn nearest(&self, point: &SpherePoint) -> usize {
        let u = point.unit_vector();
        let mut best = (0, f64::NEG_INFINITY);
        for (i, v) in self.units.iter().enumerate() {
            let d = dot(&u, v);
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Stored points adjacent to `index` at one grid step (8-neighbourhood in
    /// `(q, p)` with `q` periodic; the pole neighbours the whole `p = 1` row).
    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let l = self.l;
        let Some((q, p)) = self.grid_coords(index) else {
            return Vec::new();
        };
        if p == 0 {
            return (0..l).filter_map(|q| self.index_of(q, 1)).collect();
        }
        let mut out = Vec::with_capacity(8);
        for dp in [-1i64, 0, 1] {
            let pp = p as i64 + dp;
            if pp < 0 || pp >= l as i64 {
                continue;
            }
            if pp == 0 {
                out.push(0);
                continue;
            }
            for dq in [-1i64, 0, 1] {
                if dp == 0 && dq == 0 {
                    continue;
                }
                let qq = (q as i64 + dq).rem_euclid(l as i64) as usize;
                if let Some(j) = self.index_of(qq, pp as usize) {
                    if j != index && !out.contains(&j) {
                        out.push(j);
                    }
                }
            }
        }
        out
    }

    /// Writes `index,q,p,phi,theta` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "index,q,p,phi,theta")?;
        for (i, pt) in self.points.iter().enumerate() {
            let (q, p) = self.grid_coords(i).expect("stored index");
            writeln!(
                out,
                "{i},{q},{p},{},{}",
                fmt17(pt.phi()),
                fmt17(pt.theta())
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the uniform grid for `L ≥ 2`, holding `L·(L−1) + 1` points.
pub fn build_grid(l: usize) -> Result<SphereGrid> {
    if l < 2 {
        return Err(invalid(format!("grid parameter L = {l} must be at least 2")));
    }
    let mut points = Vec::with_capacity(l * (l - 1) + 1);
    points.push(SpherePoint::north_pole());
    for p in 1..l {
        let theta = PI * p as f64 / l as f64;
        for q in 0..l {
            let phi = TAU * q as f64 / l as f64;
            points.push(SpherePoint { phi, theta });
        }
    }
    let units = points.iter().map(SpherePoint::unit_vector).collect();
    Ok(SphereGrid { l, points, units })
}

/// Smallest pairwise great-circle distance.
pub fn min_separation(points: &[SpherePoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::UndefinedInput(format!(
            "minimum separation needs at least 2 points, got {}",
            points.len()
        )));
    }
    let units: Vec<_> = points.iter().map(SpherePoint::unit_vector).collect();
    Ok(min_pairwise_angle(&units))
}

pub(crate) fn min_pairwise_angle(units: &[[f64; 3]]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..units.len() {
        for j in i + 1..units.len() {
            best = best.min(angle_between(&units[i], &units[j]));
        }
    }
    best
}

/// True iff every pair of points is at least `nu / n` apart. Sets with fewer
/// than two points are trivially separated.
pub fn satisfies_separation(points: &[SpherePoint], nu: f64, n: usize) -> bool {
    match min_separation(points) {
        Ok(d) => d >= nu / n as f64,
        Err(_) => true,
    }
}

/// Parameters `(μ, r; N, L)` of a Rayleigh-regularity class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighParams {
    pub mu: f64,
    pub r: usize,
    pub n: usize,
    pub l: usize,
}

impl RayleighParams {
    pub fn new(mu: f64, r: usize, n: usize, l: usize) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(invalid(format!("mu = {mu} must be positive")));
        }
        if r == 0 || n == 0 || l == 0 {
            return Err(invalid(format!(
                "r, N and L must be positive (r = {r}, N = {n}, L = {l})"
            )));
        }
        Ok(Self { mu, r, n, l })
    }

    /// Class used for spikes with regularity `r` and separation constant
    /// `nu`: every cell is separated at scale `nu·r / N`.
    pub fn scaled(nu: f64, r: usize, n: usize, l: usize) -> Result<Self> {
        Self::new(nu * r as f64, r, n, l)
    }

    /// Minimal intra-cell distance `μ / N`.
    pub fn cell_separation(&self) -> f64 {
        self.mu / self.n as f64
    }
}

/// Checks a candidate partition of a support against a Rayleigh class: the
/// partition must have exactly `r` cells, the cells must be pairwise
/// disjoint, and each cell must be separated at scale `μ / N`.
pub fn verify_rayleigh_witness(partition: &[Vec<SpherePoint>], params: &RayleighParams) -> bool {
    if partition.len() != params.r {
        return false;
    }
    let cells: Vec<Vec<[f64; 3]>> = partition
        .iter()
        .map(|c| c.iter().map(SpherePoint::unit_vector).collect())
        .collect();
    for (a, ca) in cells.iter().enumerate() {
        for cb in &cells[a + 1..] {
            for u in ca {
                if cb.iter().any(|v| angle_between(u, v) <= COINCIDENT_TOL) {
                    return false;
                }
            }
        }
    }
    partition
        .iter()
        .all(|cell| satisfies_separation(cell, params.mu, params.n))
}

/// First-fit colouring of the conflict graph joining points closer than
/// `mu / n`. Returns one colour per point; the number of distinct colours
/// is an upper bound on the smallest regularity `r` admitting a witness.
pub fn greedy_coloring(points: &[SpherePoint], mu: f64, n: usize) -> Vec<usize> {
    let sep = mu / n as f64;
    let units: Vec<_> = points.iter().map(SpherePoint::unit_vector).collect();
    let mut colors: Vec<usize> = Vec::with_capacity(points.len());
    for i in 0..units.len() {
        let taken: Vec<usize> = (0..i)
            .filter(|&j| angle_between(&units[i], &units[j]) < sep)
            .map(|j| colors[j])
            .collect();
        let c = (0..).find(|c| !taken.contains(c)).expect("unbounded range");
        colors.push(c);
    }
    colors
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn pt(phi: f64, theta: f64) -> SpherePoint {
        SpherePoint::new(phi, theta).unwrap()
    }

    #[test]
    fn distance_examples() {
        let a = pt(0.3, 1.1);
        assert_eq!(geodesic_distance(&a, &a), 0.0);

        let north = pt(1.7, 0.0);
        let south = pt(0.4, PI);
        assert!((geodesic_distance(&north, &south) - PI).abs() < 1e-15);

        let d = geodesic_distance(&pt(0.0, FRAC_PI_2), &pt(FRAC_PI_2, FRAC_PI_2));
        // cartesian: (1,0,0)·(0,1,0) = 0
        assert!((d - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_points() {
        assert!(SpherePoint::new(TAU, 0.5).is_err());
        assert!(SpherePoint::new(-0.1, 0.5).is_err());
        assert!(SpherePoint::new(0.1, PI + 1e-9).is_err());
        assert!(SpherePoint::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn small_grids() {
        assert!(build_grid(1).is_err());
        assert!(build_grid(0).is_err());

        let g = build_grid(2).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.point(0), SpherePoint::north_pole());
        assert_eq!(g.point(1), pt(0.0, FRAC_PI_2));
        assert_eq!(g.point(2), pt(PI, FRAC_PI_2));

        assert_eq!(build_grid(50).unwrap().len(), 50 * 49 + 1);
        assert_eq!(build_grid(50).unwrap().len(), 2451);
        assert_eq!(build_grid(60).unwrap().len(), 3541);
    }

    #[test]
    fn index_map_is_total_and_pole_collapses() {
        let l = 7;
        let g = build_grid(l).unwrap();
        for q in 0..l {
            assert_eq!(g.index_of(q, 0), Some(0));
            for p in 0..l {
                let i = g.index_of(q, p).unwrap();
                let point = g.point(i);
                let expected = pt(TAU * q as f64 / l as f64, PI * p as f64 / l as f64);
                assert!(geodesic_distance(&point, &expected) < 1e-12);
            }
        }
        assert_eq!(g.index_of(l, 0), None);
        for i in 0..g.len() {
            let (q, p) = g.grid_coords(i).unwrap();
            assert_eq!(g.index_of(q, p), Some(i));
        }
        // no duplicates after collapsing the pole row
        assert!(min_pairwise_angle(g.unit_vectors()) > 1e-6);
    }

    #[test]
    fn nearest_point_roundtrip() {
        let g = build_grid(13).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.nearest(&g.point(i)), i);
        }
    }

    #[test]
    fn neighbors_are_symmetric() {
        let g = build_grid(9).unwrap();
        for i in 0..g.len() {
            for j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i), "{i} -> {j}");
            }
        }
        assert_eq!(g.neighbors(0).len(), 9);
    }

    #[test]
    fn separation_examples() {
        let eq = [pt(0.0, FRAC_PI_2), pt(FRAC_PI_2, FRAC_PI_2), pt(PI, FRAC_PI_2)];
        assert!((min_separation(&eq).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(min_separation(&[eq[0], eq[0]]).unwrap(), 0.0);
        let two = [SpherePoint::north_pole(), pt(0.0, FRAC_PI_2)];
        assert!((min_separation(&two).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(matches!(
            min_separation(&eq[..1]),
            Err(Error::UndefinedInput(_))
        ));

        let nu = 2.5 * PI;
        assert!(satisfies_separation(&eq, nu, 12));
        assert!(!satisfies_separation(&eq, nu, 4));
        assert!(satisfies_separation(&eq[..1], nu, 1));
        assert!(satisfies_separation(&[], nu, 1));
    }

    fn equatorial_comb(count: usize, offset: f64) -> Vec<SpherePoint> {
        (0..count)
            .map(|i| pt(offset + TAU * i as f64 / count as f64, FRAC_PI_2))
            .collect()
    }

    #[test]
    fn rayleigh_witness_examples() {
        let comb = equatorial_comb(4, 0.0);
        let params = RayleighParams::new(2.5 * PI, 1, 12, 50).unwrap();
        assert!(verify_rayleigh_witness(std::slice::from_ref(&comb), &params));

        let shared = vec![comb[0], comb[2]];
        let params2 = RayleighParams::new(2.5 * PI, 2, 12, 50).unwrap();
        assert!(!verify_rayleigh_witness(&[comb.clone(), shared], &params2));

        // two interleaved combs: each cell is π/2-separated, the union only π/4
        let a = equatorial_comb(4, 0.0);
        let b = equatorial_comb(4, PI / 4.0);
        let params = RayleighParams::new(FRAC_PI_2 * 6.0, 2, 6, 50).unwrap();
        assert!(verify_rayleigh_witness(&[a.clone(), b.clone()], &params));
        let union: Vec<_> = a.iter().chain(&b).copied().collect();
        assert!(!satisfies_separation(&union, params.mu, params.n));

        // wrong cell count
        assert!(!verify_rayleigh_witness(&[a], &params));
    }

    #[test]
    fn greedy_coloring_splits_interleaved_combs() {
        let a = equatorial_comb(4, 0.0);
        let b = equatorial_comb(4, PI / 4.0);
        let union: Vec<_> = a.iter().chain(&b).copied().collect();
        let colors = greedy_coloring(&union, FRAC_PI_2 * 6.0, 6);
        let ncolors = colors.iter().max().unwrap() + 1;
        assert_eq!(ncolors, 2);
        let cells: Vec<Vec<SpherePoint>> = (0..ncolors)
            .map(|c| {
                union
                    .iter()
                    .zip(&colors)
                    .filter(|(_, &k)| k == c)
                    .map(|(p, _)| *p)
                    .collect()
            })
            .collect();
        let params = RayleighParams::new(FRAC_PI_2 * 6.0, 2, 6, 50).unwrap();
        assert!(verify_rayleigh_witness(&cells, &params));
    }

    fn arb_point() -> impl Strategy<Value = SpherePoint> {
        (0.0..TAU, 0.0..=PI).prop_map(|(p, t)| pt(p, t))
    }

    proptest! {
        #[test]
        fn metric_axioms(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = geodesic_distance(&a, &b);
            let ba = geodesic_distance(&b, &a);
            let bc = geodesic_distance(&b, &c);
            let ac = geodesic_distance(&a, &c);
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!((0.0..=PI).contains(&ab));
            prop_assert!(ac <= ab + bc + 1e-10);
            prop_assert_eq!(geodesic_distance(&a, &a), 0.0);
            let acos = dot(&a.unit_vector(), &b.unit_vector()).clamp(-1.0, 1.0).acos();
            prop_assert!((ab - acos).abs() <= 1e-7);
        }

        #[test]
        fn unit_vectors_have_unit_norm(a in arb_point()) {
            let u = a.unit_vector();
            prop_assert!((dot(&u, &u).sqrt() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn single_cell_witness_matches_separation(
            pts in proptest::collection::vec(arb_point(), 2..8),
            mu in 0.1f64..20.0,
            n in 1usize..20,
        ) {
            let params = RayleighParams::new(mu, 1, n, 50).unwrap();
            prop_assert_eq!(
                verify_rayleigh_witness(std::slice::from_ref(&pts), &params),
                satisfies_separation(&pts, mu, n)
            );
        }
    }
}
