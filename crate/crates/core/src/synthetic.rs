//! Ground-truth fixtures built as explicit modal superpositions, plus a
//! brute-force amplitude solver used to cross-check the closed form.
//!
//! Fixture specs are JSON:
//!
//! ```json
//! { "grid": {"n_y": 40, "n_z": 97, "dy": 0.5, "dz": 0.2083, "h": 30.0},
//!   "noise_sigma": 0.0, "seed": 7, "rng": "chacha8",
//!   "modes": [ { "lambda": [0.95, 0.31], "amplitude": [1.0, 0.0],
//!                "pattern": [ {"center": [5.0, 4.0], "widths": [2.0, 2.0], "weight": [1.0, 0.0]} ] } ] }
//! ```
//!
//! A mode's spatial pattern is the unit-normalized weighted sum of its
//! Gaussian bubbles. Every oscillating mode must be listed together with its
//! conjugate partner. Noise is i.i.d. Gaussian drawn from a ChaCha8 stream
//! seeded with `seed`, one value per entry in flattened column order.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::{Grid, SnapshotMatrix};

/// Identifier of the noise generator recorded in fixture specs.
pub const RNG_ID: &str = "chacha8";

const CLOSURE_TOL: f64 = 1e-12;

/// Unit-norm samples of `exp(−((y−y₀)²/2s_y² + (z−z₀)²/2s_z²))`, with
/// `y = m·dy` and `z = ℓ·dz`.
pub fn gaussian_bubble_pattern(grid: &Grid, center: (f64, f64), widths: (f64, f64)) -> Result<Vec<f64>> {
    let (sy, sz) = widths;
    if !(sy > 0.0 && sz > 0.0) {
        return Err(Error::Spec(format!("bubble widths must be positive, got ({sy}, {sz})")));
    }
    let mut v = vec![0.0; grid.len()];
    for l in 0..grid.n_z {
        for m in 0..grid.n_y {
            let dy = m as f64 * grid.dy - center.0;
            let dz = l as f64 * grid.dz - center.1;
            v[grid.flat_index(m, l)] = (-(dy * dy / (2.0 * sy * sy) + dz * dz / (2.0 * sz * sz))).exp();
        }
    }
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(nrm > 0.0) {
        return Err(Error::Spec("bubble underflows to zero on this grid".into()));
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub lambda: c64,
    pub amplitude: c64,
    /// Unit-norm spatial pattern of length `p`.
    pub pattern: Vec<c64>,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub modes: Vec<ModeSpec>,
    pub grid: Grid,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl GroundTruth {
    pub fn new(grid: Grid, modes: Vec<ModeSpec>, noise_sigma: f64, seed: u64) -> Result<Self> {
        grid.validate().map_err(|e| Error::Spec(e.to_string()))?;
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::Spec(format!("noise_sigma must be nonnegative, got {noise_sigma}")));
        }
        if modes.is_empty() {
            return Err(Error::Spec("fixture has no modes".into()));
        }
        for (j, m) in modes.iter().enumerate() {
            if m.pattern.len() != grid.len() {
                return Err(Error::Spec(format!("mode {j} pattern has length {}", m.pattern.len())));
            }
            let nrm = m.pattern.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (nrm - 1.0).abs() > CLOSURE_TOL {
                return Err(Error::Spec(format!("mode {j} pattern has norm {nrm}, expected 1")));
            }
        }
        for (j, m) in modes.iter().enumerate() {
            if m.lambda.im == 0.0 {
                continue;
            }
            let partner = modes.iter().enumerate().any(|(k, o)| {
                k != j
                    && (o.lambda - m.lambda.conj()).norm() <= CLOSURE_TOL * (1.0 + m.lambda.norm())
                    && (o.amplitude - m.amplitude.conj()).norm() <= CLOSURE_TOL * (1.0 + m.amplitude.norm())
                    && o.pattern.iter().zip(&m.pattern).all(|(a, b)| (a - b.conj()).norm() <= CLOSURE_TOL)
            });
            if !partner {
                return Err(Error::Spec(format!(
                    "mode {j} (lambda = {}{:+}i) has no conjugate partner",
                    m.lambda.re, m.lambda.im
                )));
            }
        }
        Ok(GroundTruth {
            modes,
            grid,
            noise_sigma,
            seed,
        })
    }

    pub fn eigenvalues(&self) -> Vec<c64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// Noiseless `p × n` data matrix.
    pub fn clean_data(&self, n: usize) -> Mat<f64> {
        let p = self.grid.len();
        let mut y = Mat::<f64>::zeros(p, n);
        for m in &self.modes {
            let mut coef = m.amplitude;
            for k in 0..n {
                for i in 0..p {
                    y[(i, k)] += (m.pattern[i] * coef).re;
                }
                coef *= m.lambda;
            }
        }
        y
    }
}

/// `Y[:, k] = Re(Σ_j pattern_j λ_j^k b_j) + noise`, `k = 0..n`.
pub fn generate(gt: &GroundTruth, n: usize) -> Result<SnapshotMatrix> {
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 snapshots, got {n}")));
    }
    let mut y = gt.clean_data(n);
    if gt.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(gt.seed);
        let normal = Normal::new(0.0, gt.noise_sigma).map_err(|e| Error::Spec(e.to_string()))?;
        for k in 0..n {
            for i in 0..y.nrows() {
                y[(i, k)] += normal.sample(&mut rng);
            }
        }
    }
    SnapshotMatrix::new(gt.grid, y, "synthetic")
}

/// Least-squares amplitudes by brute force: vectorizes
/// `‖Y − Φ diag(b) T‖_F²` into a `(p·N) × r` system and solves its normal
/// equations with pivoted Gaussian elimination.
pub fn oracle_amplitudes(y: &Mat<f64>, phi: &Mat<c64>, t: &Mat<c64>) -> Result<Vec<c64>> {
    let (p, n, r) = (y.nrows(), y.ncols(), phi.ncols());
    if r > 10 || n > 64 {
        return Err(Error::Domain(format!("oracle is limited to r <= 10 and N <= 64 (got r={r}, N={n})")));
    }
    if phi.nrows() != p || t.nrows() != r || t.ncols() != n {
        return Err(Error::Dimension("inconsistent oracle shapes".into()));
    }
    let rows = p * n;
    let mut a = vec![vec![c64::new(0.0, 0.0); r]; rows];
    let mut rhs = vec![c64::new(0.0, 0.0); rows];
    for k in 0..n {
        for i in 0..p {
            let row = k * p + i;
            rhs[row] = c64::new(y[(i, k)], 0.0);
            for j in 0..r {
                a[row][j] = phi[(i, j)] * t[(j, k)];
            }
        }
    }
    let mut normal = vec![vec![c64::new(0.0, 0.0); r + 1]; r];
    for row in 0..rows {
        for i in 0..r {
            let ai = a[row][i].conj();
            for j in 0..r {
                normal[i][j] += ai * a[row][j];
            }
            normal[i][r] += ai * rhs[row];
        }
    }
    gauss_solve(normal)
}

fn gauss_solve(mut m: Vec<Vec<c64>>) -> Result<Vec<c64>> {
    let r = m.len();
    let scale = (0..r).map(|i| m[i][i].norm()).fold(0.0, f64::max);
    for col in 0..r {
        let piv = (col..r)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .unwrap();
        if !(m[piv][col].norm() > 1e-13 * scale) {
            return Err(Error::Conditioning("oracle normal equations are rank deficient".into()));
        }
        m.swap(col, piv);
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest.iter_mut() {
            let f = row[col] / pivot_row[col];
            for (x, &v) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * v;
            }
        }
    }
    let mut x = vec![c64::new(0.0, 0.0); r];
    for i in (0..r).rev() {
        let mut s = m[i][r];
        for j in i + 1..r {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleSpec {
    pub center: [f64; 2],
    pub widths: [f64; 2],
    #[serde(default = "unit_weight")]
    pub weight: [f64; 2],
}

fn unit_weight() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub lambda: [f64; 2],
    pub amplitude: [f64; 2],
    pub pattern: Vec<BubbleSpec>,
}

/// Serializable fixture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub grid: Grid,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_rng")]
    pub rng: String,
    pub modes: Vec<ModeEntry>,
}

fn default_rng() -> String {
    RNG_ID.to_string()
}

impl FixtureSpec {
    pub fn new(grid: Grid, noise_sigma: f64, seed: u64) -> Self {
        FixtureSpec {
            grid,
            noise_sigma,
            seed,
            rng: default_rng(),
            modes: Vec::new(),
        }
    }

    /// Adds a non-oscillating mode with a real pattern.
    pub fn with_real_mode(mut self, lambda: f64, amplitude: f64, bubbles: Vec<BubbleSpec>) -> Self {
        self.modes.push(ModeEntry {
            lambda: [lambda, 0.0],
            amplitude: [amplitude, 0.0],
            pattern: bubbles,
        });
        self
    }

    /// Adds an oscillating mode and its conjugate partner.
    pub fn with_pair(mut self, lambda: c64, amplitude: c64, bubbles: Vec<BubbleSpec>) -> Self {
        let conj: Vec<BubbleSpec> = bubbles
            .iter()
            .map(|b| BubbleSpec {
                weight: [b.weight[0], -b.weight[1]],
                ..b.clone()
            })
            .collect();
        self.modes.push(ModeEntry {
            lambda: [lambda.re, lambda.im],
            amplitude: [amplitude.re, amplitude.im],
            pattern: bubbles,
        });
        self.modes.push(ModeEntry {
            lambda: [lambda.re, -lambda.im],
            amplitude: [amplitude.re, -amplitude.im],
            pattern: conj,
        });
        self
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        if self.rng != RNG_ID {
            return Err(Error::Spec(format!("unsupported rng '{}', expected '{RNG_ID}'", self.rng)));
        }
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let mut pattern = vec![c64::new(0.0, 0.0); self.grid.len()];
                for b in &m.pattern {
                    let g = gaussian_bubble_pattern(
                        &self.grid,
                        (b.center[0], b.center[1]),
                        (b.widths[0], b.widths[1]),
                    )?;
                    let w = c64::new(b.weight[0], b.weight[1]);
                    for (z, v) in pattern.iter_mut().zip(g) {
                        *z += w * v;
                    }
                }
                let nrm = pattern.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if !(nrm > 0.0) {
                    return Err(Error::Spec("mode pattern vanishes".into()));
                }
                pattern.iter_mut().for_each(|z| *z /= nrm);
                Ok(ModeSpec {
                    lambda: c64::new(m.lambda[0], m.lambda[1]),
                    amplitude: c64::new(m.amplitude[0], m.amplitude[1]),
                    pattern,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GroundTruth::new(self.grid, modes, self.noise_sigma, self.seed)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixture spec serializes")
    }
}

/// Bubble with unit real weight.
pub fn bubble(y0: f64, z0: f64, sy: f64, sz: f64) -> BubbleSpec {
    BubbleSpec {
        center: [y0, z0],
        widths: [sy, sz],
        weight: [1.0, 0.0],
    }
}

/// Bubble with an imaginary weight.
pub fn bubble_i(y0: f64, z0: f64, sy: f64, sz: f64) -> BubbleSpec {
    BubbleSpec {
        center: [y0, z0],
        widths: [sy, sz],
        weight: [0.0, 1.0],
    }
}

/// Three decaying/growing oscillating pairs, each a bubble displaced
/// upward over one period.
pub fn three_pair_fixture(grid: Grid, noise_sigma: f64, seed: u64) -> FixtureSpec {
    let (ym, zm) = ((grid.n_y - 1) as f64 * grid.dy, (grid.n_z - 1) as f64 * grid.dz);
    FixtureSpec::new(grid, noise_sigma, seed)
        .with_pair(
            c64::from_polar(0.99, 2.0 * std::f64::consts::PI / 20.0),
            c64::new(1.0, 0.5),
            vec![bubble(0.3 * ym, 0.2 * zm, 0.12 * ym, 0.1 * zm), bubble_i(0.3 * ym, 0.3 * zm, 0.12 * ym, 0.1 * zm)],
        )
        .with_pair(
            c64::from_polar(1.01, 2.0 * std::f64::consts::PI / 9.0),
            c64::new(0.4, -0.3),
            vec![bubble(0.7 * ym, 0.5 * zm, 0.1 * ym, 0.08 * zm), bubble_i(0.6 * ym, 0.6 * zm, 0.1 * ym, 0.08 * zm)],
        )
        .with_pair(
            c64::from_polar(0.95, 2.0 * std::f64::consts::PI / 4.5),
            c64::new(-0.2, 0.6),
            vec![bubble(0.5 * ym, 0.75 * zm, 0.15 * ym, 0.06 * zm), bubble_i(0.45 * ym, 0.85 * zm, 0.15 * ym, 0.06 * zm)],
        )
}

/// Two strong pairs (|b| = 1) and two weak pairs (|b| = 1e-3).
pub fn strong_weak_fixture(grid: Grid, seed: u64) -> FixtureSpec {
    let (ym, zm) = ((grid.n_y - 1) as f64 * grid.dy, (grid.n_z - 1) as f64 * grid.dz);
    let tau = 2.0 * std::f64::consts::PI;
    let weak = 1e-3;
    FixtureSpec::new(grid, 0.0, seed)
        .with_pair(
            c64::from_polar(1.0, tau / 24.0),
            c64::new(1.0, 0.0),
            vec![bubble(0.3 * ym, 0.25 * zm, 0.1 * ym, 0.08 * zm), bubble_i(0.3 * ym, 0.35 * zm, 0.1 * ym, 0.08 * zm)],
        )
        .with_pair(
            c64::from_polar(0.99, tau / 10.0),
            c64::from_polar(1.0, 0.7),
            vec![bubble(0.7 * ym, 0.55 * zm, 0.1 * ym, 0.08 * zm), bubble_i(0.7 * ym, 0.65 * zm, 0.1 * ym, 0.08 * zm)],
        )
        .with_pair(
            c64::from_polar(0.98, tau / 6.0),
            c64::from_polar(weak, -0.4),
            vec![bubble(0.5 * ym, 0.8 * zm, 0.08 * ym, 0.05 * zm), bubble_i(0.55 * ym, 0.85 * zm, 0.08 * ym, 0.05 * zm)],
        )
        .with_pair(
            c64::from_polar(1.005, tau / 3.5),
            c64::from_polar(weak, 1.9),
            vec![bubble(0.2 * ym, 0.7 * zm, 0.08 * ym, 0.05 * zm), bubble_i(0.15 * ym, 0.75 * zm, 0.08 * ym, 0.05 * zm)],
        )
}

/// Random oscillating pairs with well-separated frequencies.
pub fn random_fixture(grid: Grid, n_pairs: usize, noise_sigma: f64, seed: u64) -> FixtureSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ym, zm) = ((grid.n_y - 1) as f64 * grid.dy, (grid.n_z - 1) as f64 * grid.dz);
    let mut angles: Vec<f64> = Vec::new();
    let mut spec = FixtureSpec::new(grid, noise_sigma, seed);
    while angles.len() < n_pairs {
        let th = rng.random_range(0.15..2.9);
        if angles.iter().any(|a| (a - th).abs() < 0.15) {
            continue;
        }
        angles.push(th);
        let lambda = c64::from_polar(rng.random_range(0.9..1.02), th);
        let amplitude = c64::from_polar(rng.random_range(0.3..1.5), rng.random_range(0.0..std::f64::consts::TAU));
        let mut blob = |imag: bool| {
            let (y0, z0) = (rng.random_range(0.1..0.9) * ym, rng.random_range(0.1..0.9) * zm);
            let (sy, sz) = (rng.random_range(0.08..0.2) * ym, rng.random_range(0.08..0.2) * zm);
            if imag {
                bubble_i(y0, z0, sy, sz)
            } else {
                bubble(y0, z0, sy, sz)
            }
        };
        let bubbles = vec![blob(false), blob(true)];
        spec = spec.with_pair(lambda, amplitude, bubbles);
    }
    spec
}

/// Greedy nearest-neighbour pairing of `found` against `truth`.
///
/// Returns, for each true eigenvalue, the index of its match in `found`.
/// Fails when a match is farther than `tol` or when a second unused
/// candidate also lies within `tol`.
pub fn match_eigenvalues(truth: &[c64], found: &[c64], tol: f64) -> Result<Vec<usize>> {
    if truth.len() != found.len() {
        return Err(Error::Dimension(format!("{} true vs {} found eigenvalues", truth.len(), found.len())));
    }
    let mut used = vec![false; found.len()];
    let mut out = Vec::with_capacity(truth.len());
    for (j, t) in truth.iter().enumerate() {
        let mut near: Vec<(f64, usize)> =
            (0..found.len()).filter(|&k| !used[k]).map(|k| ((found[k] - t).norm(), k)).collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let &(dist, k) = near.first().ok_or_else(|| Error::Dimension("no eigenvalues left".into()))?;
        if dist > tol {
            return Err(Error::Numeric(format!("true eigenvalue {j} has no match within {tol:e} (nearest {dist:e})")));
        }
        if near.get(1).is_some_and(|n| n.0 <= tol) {
            return Err(Error::Numeric(format!("true eigenvalue {j} matches ambiguously")));
        }
        used[k] = true;
        out.push(k);
    }
    Ok(out)
}
