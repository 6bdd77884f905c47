//! Sparsity-promoting amplitude selection.
//!
//! Minimizes `J(b) + γ‖b‖₁` with ADMM over the split `b = ξ`, then
//! re-fits the amplitudes without penalty on the support that survived.

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmd::AmplitudeQp;
use crate::error::{Error, Result};
use crate::linalg::{norm2, HermitianFactor};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub k_max: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 1.0,
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            k_max: 10_000,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.rho) && pos(self.eps_primal) && pos(self.eps_dual)) || self.k_max == 0 {
            return Err(Error::Domain(format!("invalid ADMM configuration {self:?}")));
        }
        Ok(())
    }
}

/// Soft-thresholding: `(v/|v|)·max(|v| − κ, 0)`, exactly zero when `|v| ≤ κ`.
pub fn shrinkage(v: c64, kappa: f64) -> c64 {
    let mag = v.norm();
    if mag <= kappa {
        ZERO
    } else {
        v * ((mag - kappa) / mag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutcome {
    /// Final `ξ` iterate; entries are exact zeros off the support.
    pub b_sparse: Vec<c64>,
    pub iterations: usize,
    pub converged: bool,
}

/// ADMM for `min b*Pb − b*d − d*b + γ‖b‖₁`.
pub fn admm_solve(p: &Mat<c64>, d: &[c64], gamma: f64, cfg: &AdmmConfig) -> Result<AdmmOutcome> {
    cfg.validate()?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("sparsity weight must be nonnegative, got {gamma}")));
    }
    let r = d.len();
    if p.nrows() != r || p.ncols() != r {
        return Err(Error::Dimension(format!("P is {}x{}, d has {r} entries", p.nrows(), p.ncols())));
    }
    // P itself must be PD, not just P + ρ/2·I
    HermitianFactor::new(p)?;

    let half_rho = 0.5 * cfg.rho;
    let shifted = Mat::from_fn(r, r, |i, j| if i == j { p[(i, j)] + half_rho } else { p[(i, j)] });
    let factor = HermitianFactor::new(&shifted)?;
    let kappa = gamma / cfg.rho;

    let mut xi = vec![ZERO; r];
    let mut theta = vec![ZERO; r];
    let mut rhs = vec![ZERO; r];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.k_max {
        for j in 0..r {
            rhs[j] = d[j] + (xi[j] - theta[j] / cfg.rho) * half_rho;
        }
        let b = factor.solve(&rhs);
        let xi_new: Vec<c64> = (0..r).map(|j| shrinkage(b[j] + theta[j] / cfg.rho, kappa)).collect();
        for j in 0..r {
            theta[j] += (b[j] - xi_new[j]) * cfg.rho;
        }
        let primal = norm2(&b.iter().zip(&xi_new).map(|(x, z)| x - z).collect::<Vec<_>>());
        let dual = cfg.rho * norm2(&xi_new.iter().zip(&xi).map(|(x, z)| x - z).collect::<Vec<_>>());
        xi = xi_new;
        iterations += 1;
        if primal <= cfg.eps_primal && dual <= cfg.eps_dual {
            converged = true;
            break;
        }
    }
    Ok(AdmmOutcome {
        b_sparse: xi,
        iterations,
        converged,
    })
}

/// Unpenalized refit restricted to `support`: solves `P_SS b_S = d_S`.
pub fn polish(support: &[usize], qp: &AmplitudeQp) -> Result<Vec<c64>> {
    let r = qp.dim();
    let mut out = vec![ZERO; r];
    if support.is_empty() {
        return Ok(out);
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= r) {
        return Err(Error::Bounds { index: bad + 1, len: r });
    }
    let s = support.len();
    let sub = Mat::from_fn(s, s, |a, b| qp.p[(support[a], support[b])]);
    let rhs: Vec<c64> = support.iter().map(|&j| qp.d[j]).collect();
    let sol = HermitianFactor::new(&sub)?.solve(&rhs);
    for (&j, v) in support.iter().zip(sol) {
        out[j] = v;
    }
    Ok(out)
}

/// `100·sqrt(J / energy)` in percent.
pub fn performance_loss(j: f64, energy: f64) -> Result<f64> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::Domain(format!("reference energy must be positive, got {energy}")));
    }
    if !(j >= 0.0) {
        return Err(Error::Domain(format!("residual must be nonnegative, got {j}")));
    }
    Ok(100.0 * (j / energy).sqrt())
}

/// Indices of nonzero entries ordered by descending magnitude, ties by index.
pub fn order_amplitudes(b: &[c64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..b.len()).filter(|&j| b[j] != ZERO).collect();
    idx.sort_by(|&i, &j| b[j].norm().total_cmp(&b[i].norm()).then(i.cmp(&j)));
    idx
}

fn support_of(b: &[c64]) -> Vec<usize> {
    (0..b.len()).filter(|&j| b[j] != ZERO).collect()
}

/// Outcome of sparse selection at one sparsity weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSolution {
    pub gamma: f64,
    pub b_sparse: Vec<c64>,
    /// 0-based indices of the nonzero entries of `b_sparse`, ascending.
    pub support: Vec<usize>,
    pub b_polished: Vec<c64>,
    #[serde(rename = "J_sp")]
    pub j_sp: f64,
    #[serde(rename = "J_pol")]
    pub j_pol: f64,
    /// Loss of the sparse (unpolished) amplitudes, in percent.
    #[serde(rename = "J_loss_percent")]
    pub j_loss_percent: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SparseSolution {
    pub fn solve(qp: &AmplitudeQp, gamma: f64, cfg: &AdmmConfig) -> Result<Self> {
        let admm = admm_solve(&qp.p, &qp.d, gamma, cfg)?;
        let support = support_of(&admm.b_sparse);
        let b_polished = polish(&support, qp)?;
        let j_sp = qp.objective(&admm.b_sparse);
        let j_pol = if support.is_empty() { qp.eta } else { qp.objective(&b_polished) };
        Ok(SparseSolution {
            gamma,
            j_loss_percent: performance_loss(j_sp, qp.eta)?,
            b_sparse: admm.b_sparse,
            support,
            b_polished,
            j_sp,
            j_pol,
            iterations: admm.iterations,
            converged: admm.converged,
        })
    }

    pub fn cardinality(&self) -> usize {
        self.support.len()
    }

    /// Loss of the polished amplitudes, in percent.
    pub fn polished_loss_percent(&self, energy: f64) -> Result<f64> {
        performance_loss(self.j_pol, energy)
    }

    /// Support entries ordered by descending sparse amplitude.
    pub fn ordered_support(&self) -> Vec<usize> {
        order_amplitudes(&self.b_sparse)
    }
}

/// Smallest `γ` at which the all-zero vector is optimal: `2·max|d_j|`.
pub fn gamma_kill(d: &[c64]) -> f64 {
    2.0 * d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::Domain(format!(
            "sweep needs 0 < gamma_min < gamma_max and at least 2 points (got [{lo}, {hi}], n={n})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub solution: Option<SparseSolution>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn cardinality(&self) -> Option<usize> {
        self.solution.as_ref().map(SparseSolution::cardinality)
    }
}

/// Accuracy-versus-sparsity curve over a grid of weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub gamma_grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// Reference energy `η` used for the percentage losses.
    pub energy: f64,
}

impl SweepResult {
    pub fn solutions(&self) -> impl Iterator<Item = &SparseSolution> {
        self.points.iter().filter_map(|p| p.solution.as_ref())
    }

    /// Every point solved without error and converged.
    pub fn all_converged(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.solution.as_ref().is_some_and(|s| s.converged))
    }

    /// CSV with columns `gamma,cardinality,J_sp,J_pol,J_loss_percent,converged,iterations`.
    /// Failed points leave the numeric columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,cardinality,J_sp,J_pol,J_loss_percent,converged,iterations\n");
        for p in &self.points {
            match &p.solution {
                Some(s) => out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p.gamma,
                    s.cardinality(),
                    s.j_sp,
                    s.j_pol,
                    s.j_loss_percent,
                    s.converged,
                    s.iterations
                )),
                None => out.push_str(&format!("{},,,,,false,\n", p.gamma)),
            }
        }
        out
    }
}

/// Solves the sparse problem at `n` log-spaced weights in `[lo, hi]`.
///
/// Points are independent and run on the current rayon pool; the result is
/// ordered by `γ` regardless of scheduling.
pub fn gamma_sweep(qp: &AmplitudeQp, lo: f64, hi: f64, n: usize, cfg: &AdmmConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let gamma_grid = log_grid(lo, hi, n)?;
    let points = gamma_grid
        .par_iter()
        .map(|&gamma| match SparseSolution::solve(qp, gamma, cfg) {
            Ok(s) => SweepPoint {
                gamma,
                solution: Some(s),
                error: None,
            },
            Err(e) => SweepPoint {
                gamma,
                solution: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(SweepResult {
        gamma_grid,
        points,
        energy: qp.eta,
    })
}
