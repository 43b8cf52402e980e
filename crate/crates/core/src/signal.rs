//! Positive spike trains on the grid: random Rayleigh-regular supports,
//! uniform amplitudes, and Gaussian noise on the harmonic coefficients.
//!
//! Every random draw goes through `ChaCha8Rng` seeded from a 64-bit value;
//! independent streams are split off with [`derive_seed`].

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::harmonics::{Complex64, HarmonicIndex};
use crate::io::{field, fmt17, read_rows};
use crate::operators::{GriddedFunction, HarmonicCoeffs, MeasurementMatrix};
use crate::sphere::{angle_between, verify_rayleigh_witness, RayleighParams, SphereGrid, SpherePoint};

/// Upper bound on amplitudes drawn by [`gen_amplitudes`].
pub const AMPLITUDE_MAX: f64 = 10.0;
/// Rejection attempts allowed per requested point in a cell.
pub const ATTEMPTS_PER_POINT: usize = 10_000;

/// Seeded generator used for every random stream in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64-style mixing of a master seed with a stream tag and index.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ stream) ^ index)
}

/// A positive spike train `Σ c_m δ[x − x_m]` on a grid.
#[derive(Debug, Clone)]
pub struct DiracSignal {
    grid: Arc<SphereGrid>,
    support: Vec<usize>,
    amplitudes: Vec<f64>,
    cells: Option<Vec<usize>>,
}

impl DiracSignal {
    /// Validates distinct in-range support indices and strictly positive,
    /// finite amplitudes.
    pub fn new(grid: Arc<SphereGrid>, support: Vec<usize>, amplitudes: Vec<f64>) -> Result<Self> {
        if support.len() != amplitudes.len() {
            return Err(Error::ShapeMismatch {
                expected: support.len(),
                actual: amplitudes.len(),
            });
        }
        let mut seen = vec![false; grid.len()];
        for &i in &support {
            if i >= grid.len() {
                return Err(Error::DomainMismatch(format!(
                    "support index {i} outside grid of {} points",
                    grid.len()
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("support index {i} repeated")));
            }
        }
        if let Some(c) = amplitudes.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(invalid(format!("amplitude {c} is not strictly positive")));
        }
        Ok(Self {
            grid,
            support,
            amplitudes,
            cells: None,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(grid: Arc<SphereGrid>, support: Vec<usize>, amplitudes: Vec<f64>) -> Self {
        Self {
            grid,
            support,
            amplitudes,
            cells: None,
        }
    }

    /// Attaches a partition witness: `cells[m]` is the cell of support entry
    /// `m`, numbered from 0.
    pub fn with_cells(mut self, cells: Vec<usize>) -> Result<Self> {
        if cells.len() != self.support.len() {
            return Err(Error::ShapeMismatch {
                expected: self.support.len(),
                actual: cells.len(),
            });
        }
        self.cells = Some(cells);
        Ok(self)
    }

    pub fn empty(grid: Arc<SphereGrid>) -> Self {
        Self {
            grid,
            support: Vec::new(),
            amplitudes: Vec::new(),
            cells: None,
        }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn cells(&self) -> Option<&[usize]> {
        self.cells.as_deref()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.amplitudes.iter().sum()
    }

    /// Support points grouped by witness cell.
    pub fn partition(&self) -> Option<Vec<Vec<SpherePoint>>> {
        let cells = self.cells.as_ref()?;
        let count = cells.iter().max().map_or(0, |c| c + 1);
        let mut out = vec![Vec::new(); count];
        for (&i, &c) in self.support.iter().zip(cells) {
            out[c].push(self.grid.point(i));
        }
        Some(out)
    }

    /// Checks the attached witness against `params`.
    pub fn verify_witness(&self, params: &RayleighParams) -> bool {
        match self.partition() {
            Some(mut cells) => {
                cells.resize(cells.len().max(params.r), Vec::new());
                verify_rayleigh_witness(&cells, params)
            }
            None => false,
        }
    }

    pub fn to_gridded(&self) -> GriddedFunction {
        let mut values = vec![0.0; self.grid.len()];
        for (&i, &c) in self.support.iter().zip(&self.amplitudes) {
            values[i] += c;
        }
        GriddedFunction::new(Arc::clone(&self.grid), values).expect("grid-sized vector")
    }

    /// Writes `index,phi,theta,amplitude,cell` rows; `cell` is empty when no
    /// witness is attached.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "index,phi,theta,amplitude,cell")?;
        for (m, (&i, &c)) in self.support.iter().zip(&self.amplitudes).enumerate() {
            let p = self.grid.point(i);
            let cell = self.cells.as_ref().map(|cs| cs[m].to_string()).unwrap_or_default();
            writeln!(out, "{i},{},{},{},{cell}", fmt17(p.phi()), fmt17(p.theta()), fmt17(c))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a signal file written by [`DiracSignal::write_csv`]. Positions
    /// must agree with the grid index they name.
    pub fn read_csv(path: impl AsRef<Path>, grid: Arc<SphereGrid>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_rows(path, &["index", "phi", "theta", "amplitude", "cell"])?;
        let mut support = Vec::with_capacity(rows.len());
        let mut amps = Vec::with_capacity(rows.len());
        let mut cells = Vec::with_capacity(rows.len());
        for row in &rows {
            let i: usize = field(path, row, 0)?;
            let phi: f64 = field(path, row, 1)?;
            let theta: f64 = field(path, row, 2)?;
            let c: f64 = field(path, row, 3)?;
            if i >= grid.len() {
                return Err(Error::DomainMismatch(format!("index {i} outside grid")));
            }
            let stated = SpherePoint::wrapped(phi, theta);
            if crate::sphere::geodesic_distance(&stated, &grid.point(i)) > 1e-9 {
                return Err(Error::Format {
                    path: path.to_owned(),
                    reason: format!("index {i} does not sit at ({phi}, {theta}) on grid L = {}", grid.resolution()),
                });
            }
            support.push(i);
            amps.push(c);
            match row.get(4).unwrap_or("") {
                "" => cells.push(None),
                _ => cells.push(Some(field::<usize>(path, row, 4)?)),
            }
        }
        let signal = Self::new(grid, support, amps)?;
        if !cells.is_empty() && cells.iter().all(Option::is_some) {
            signal.with_cells(cells.into_iter().map(Option::unwrap).collect())
        } else {
            Ok(signal)
        }
    }
}

/// How the per-cell separation scale is tied to the regularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellSeparation {
    /// Cells separated by `ν·r / N`: the class `R₊(νr, r; N, L)` covered by
    /// the stability bound.
    #[default]
    Scaled,
    /// Cells separated by `ν / N` independent of `r`; supports get denser as
    /// `r` grows.
    Fixed,
}

impl CellSeparation {
    pub fn mu(self, nu: f64, r: usize) -> f64 {
        match self {
            Self::Scaled => nu * r as f64,
            Self::Fixed => nu,
        }
    }
}

/// A support split into `r` disjoint, internally separated cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub cells: Vec<Vec<usize>>,
    pub params: RayleighParams,
}

impl Support {
    pub fn indices(&self) -> Vec<usize> {
        self.cells.iter().flatten().copied().collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .flat_map(|(c, cell)| std::iter::repeat_n(c, cell.len()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Requested cell sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellSizing {
    PerCell(usize),
    /// `M` points dealt round-robin over the cells.
    Total(usize),
}

impl CellSizing {
    pub fn sizes(self, r: usize) -> Vec<usize> {
        match self {
            Self::PerCell(k) => vec![k; r],
            Self::Total(m) => (0..r).map(|c| m / r + usize::from(c < m % r)).collect(),
        }
    }
}

/// Largest number of points with pairwise distance `≥ sep` allowed by the
/// cap-area argument: disjoint caps of radius `sep/2` cover at most `4π`.
pub fn packing_bound(sep: f64) -> f64 {
    let half = 0.5 * sep;
    if half >= std::f64::consts::FRAC_PI_2 {
        // caps of radius ≥ π/2: at most two antipodal points
        return 2.0;
    }
    2.0 / (1.0 - half.cos())
}

/// Draws `r` disjoint cells of grid indices, each internally separated by
/// `μ/N` with `μ = separation.mu(nu, r)`, by uniform rejection sampling over
/// the stored grid points.
pub fn gen_support(
    r: usize,
    nu: f64,
    degree: usize,
    grid: &SphereGrid,
    sizing: CellSizing,
    separation: CellSeparation,
    seed: u64,
) -> Result<Support> {
    if r == 0 {
        return Err(invalid("regularity r must be at least 1"));
    }
    let params = RayleighParams::new(separation.mu(nu, r), r, degree, grid.resolution())?;
    let sizes = sizing.sizes(r);
    if sizes.contains(&0) {
        return Err(invalid(format!("every cell needs at least one point, sizes {sizes:?}")));
    }
    let sep = params.cell_separation();
    let total: usize = sizes.iter().sum();
    if sizes.iter().any(|&s| s as f64 > packing_bound(sep)) || total > grid.len() {
        return Err(Error::InfeasibleDensity {
            achieved: vec![0; r],
            requested: sizes,
        });
    }

    let mut rng = rng_from_seed(seed);
    let units = grid.unit_vectors();
    let mut used = vec![false; grid.len()];
    let mut cells: Vec<Vec<usize>> = Vec::with_capacity(r);
    for &size in &sizes {
        let mut cell: Vec<usize> = Vec::with_capacity(size);
        let budget = ATTEMPTS_PER_POINT * size;
        let mut attempts = 0;
        while cell.len() < size {
            if attempts == budget {
                let mut achieved: Vec<usize> = cells.iter().map(Vec::len).collect();
                achieved.push(cell.len());
                achieved.resize(r, 0);
                return Err(Error::InfeasibleDensity {
                    achieved,
                    requested: sizes,
                });
            }
            attempts += 1;
            let j = rng.random_range(0..grid.len());
            if used[j] {
                continue;
            }
            if cell.iter().all(|&i| angle_between(&units[i], &units[j]) >= sep) {
                used[j] = true;
                cell.push(j);
            }
        }
        cells.push(cell);
    }
    Ok(Support { cells, params })
}

/// `count` i.i.d. draws from the uniform law on `(0, 10]`.
pub fn gen_amplitudes(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    // 1 − U[0,1) lies in (0, 1]
    (0..count)
        .map(|_| AMPLITUDE_MAX * (1.0 - rng.random::<f64>()))
        .collect()
}

/// Support with uniform amplitudes, witness attached.
pub fn gen_signal(
    grid: &Arc<SphereGrid>,
    support: &Support,
    amplitude_seed: u64,
) -> Result<DiracSignal> {
    let amps = gen_amplitudes(support.len(), amplitude_seed);
    DiracSignal::new(Arc::clone(grid), support.indices(), amps)?.with_cells(support.labels())
}

/// Clean and noisy coefficients, the back-projection `s = F_N* y` on the
/// grid, and the noise budget `δ`.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub clean: HarmonicCoeffs,
    pub noise: HarmonicCoeffs,
    pub noisy: HarmonicCoeffs,
    pub s: GriddedFunction,
    pub delta: f64,
    pub sigma: f64,
    pub snr_db: Option<f64>,
    /// `‖F_N* η‖₁` on the grid, whatever `delta` was set to.
    pub noise_l1: f64,
}

impl Measurement {
    /// Replaces the oracle budget with a user-supplied one.
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(invalid(format!("delta = {delta} must be finite and nonnegative")));
        }
        self.delta = delta;
        Ok(self)
    }
}

/// Draws `η` with `η_{n,0} ~ N(0, σ²)` and independent real and imaginary
/// parts `~ N(0, σ²/2)` for `k > 0`, mirrored to `η_{n,−k} = conj(η_{n,k})`,
/// then back-projects. `δ` is set to the realised `‖F_N* η‖₁`.
pub fn add_noise(op: &MeasurementMatrix, clean: &HarmonicCoeffs, sigma: f64, seed: u64) -> Result<Measurement> {
    if !clean.is_real_symmetric() || !clean.check_real_symmetric(crate::operators::SYMMETRY_TOL * (1.0 + clean.l2_norm())) {
        return Err(invalid("clean coefficients must be real-symmetric"));
    }
    if clean.degree() != op.degree() {
        return Err(Error::ShapeMismatch {
            expected: op.degree(),
            actual: clean.degree(),
        });
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma = {sigma} must be finite and nonnegative")));
    }
    let degree = clean.degree();
    let mut rng = rng_from_seed(seed);
    let mut values = vec![Complex64::new(0.0, 0.0); clean.len()];
    let half = sigma / std::f64::consts::SQRT_2;
    for n in 0..=degree {
        let z: f64 = StandardNormal.sample(&mut rng);
        values[HarmonicIndex::new(n, 0).expect("valid").linear()] = Complex64::new(sigma * z, 0.0);
        for k in 1..=n as i64 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let v = Complex64::new(half * re, half * im);
            values[HarmonicIndex::new(n, k).expect("valid").linear()] = v;
            values[HarmonicIndex::new(n, -k).expect("valid").linear()] = v.conj();
        }
    }
    let noise = HarmonicCoeffs::new_real_symmetric(degree, values)?;
    let noisy = clean.add(&noise)?;
    let s = op.synthesize(&noisy)?;
    let noise_l1 = op.synthesize(&noise)?.l1_norm();
    let snr = snr_db(clean, &noise)?;
    Ok(Measurement {
        clean: clean.clone(),
        noise,
        noisy,
        s,
        delta: noise_l1,
        sigma,
        snr_db: snr.is_finite().then_some(snr),
        noise_l1,
    })
}

/// `20·log₁₀(‖clean‖₂ / ‖noise‖₂)`; `+∞` for zero noise.
pub fn snr_db(clean: &HarmonicCoeffs, noise: &HarmonicCoeffs) -> Result<f64> {
    if clean.degree() != noise.degree() {
        return Err(Error::ShapeMismatch {
            expected: clean.len(),
            actual: noise.len(),
        });
    }
    let n = noise.l2_norm();
    if n == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (clean.l2_norm() / n).log10())
}

/// Noise level whose expected norm `σ·(N+1)` puts the SNR at `target_db`.
pub fn calibrate_sigma(clean: &HarmonicCoeffs, target_db: f64) -> Result<f64> {
    let norm = clean.l2_norm();
    if norm == 0.0 {
        return Err(invalid("cannot calibrate noise against a zero signal"));
    }
    if target_db == f64::INFINITY {
        return Ok(0.0);
    }
    if target_db.is_nan() || target_db == f64::NEG_INFINITY {
        return Err(invalid(format!("target SNR {target_db} dB")));
    }
    Ok(norm / (10f64.powf(target_db / 20.0) * (clean.degree() + 1) as f64))
}
