//! Diagnostics over a decomposition: periods, growth classification,
//! single-mode evolution, point superposition and spatial statistics.

use std::f64::consts::PI;
use std::fmt;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::dmd::{point_value, time_coefficients};
use crate::error::{Error, Result};

/// Default threshold on `|Im log λ|` below which a mode does not oscillate.
pub const EPS_OSC: f64 = 1e-9;
/// Default half-width of the band around `|λ| = 1` counted as steady.
pub const EPS_UNIT: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Steady,
    Growing,
    Decaying,
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Growth::Steady => "steady",
            Growth::Growing => "growing",
            Growth::Decaying => "decaying",
        })
    }
}

/// Oscillation period in steps, `2π / |Im log λ|`, infinite for
/// non-oscillating eigenvalues.
pub fn period(lambda: c64, eps_osc: f64) -> Result<f64> {
    if lambda == c64::new(0.0, 0.0) {
        return Err(Error::Domain("period of a zero eigenvalue is undefined".into()));
    }
    let omega = lambda.im.atan2(lambda.re).abs();
    if omega < eps_osc {
        Ok(f64::INFINITY)
    } else {
        Ok(2.0 * PI / omega)
    }
}

pub fn classify(lambda: c64, eps_unit: f64) -> Growth {
    let m = lambda.norm();
    if (m - 1.0).abs() <= eps_unit {
        Growth::Steady
    } else if m > 1.0 {
        Growth::Growing
    } else {
        Growth::Decaying
    }
}

/// `a_k = Re(λ^k b)` for `k = 0..n`.
pub fn normal_evolution(lambda: c64, b: c64, n: usize) -> Vec<f64> {
    let mut z = b;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(z.re);
        z *= lambda;
    }
    out
}

/// Time series of the modal superposition at flat index `index` (1-based).
///
/// Modes with zero amplitude contribute nothing, so a sparse amplitude vector
/// selects a subset.
pub fn superpose_at(phi: &Mat<c64>, lambda: &[c64], b: &[c64], index: usize, ks: &[usize]) -> Result<Vec<f64>> {
    let p = phi.nrows();
    if index == 0 || index > p {
        return Err(Error::Bounds { index, len: p });
    }
    if phi.ncols() != lambda.len() || b.len() != lambda.len() {
        return Err(Error::Dimension("mode, eigenvalue and amplitude counts differ".into()));
    }
    let coeffs = time_coefficients(lambda, b, ks);
    Ok(coeffs.iter().map(|c| point_value(phi, index - 1, c)).collect())
}

/// Spatial mean and sample standard deviation of each column.
pub fn msd(y: &Mat<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = y.nrows();
    if p < 2 {
        return Err(Error::Domain(format!("need at least 2 grid points, got {p}")));
    }
    let mut mean = Vec::with_capacity(y.ncols());
    let mut std = Vec::with_capacity(y.ncols());
    for col in y.col_iter() {
        // shifted by the first entry so a constant column has exactly zero spread
        let y0 = col[0];
        let mu = y0 + col.iter().map(|v| v - y0).sum::<f64>() / p as f64;
        let ss: f64 = col.iter().map(|v| (v - mu) * (v - mu)).sum();
        mean.push(mu);
        std.push((ss / (p - 1) as f64).sqrt());
    }
    Ok((mean, std))
}

/// One row of a mode table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    /// 1-based index in the DMD ordering.
    pub label: usize,
    pub amplitude_mag: f64,
    pub eigenvalue: [f64; 2],
    pub modulus: f64,
    /// `None` encodes an infinite period.
    pub period_steps: Option<f64>,
    pub period_physical: Option<f64>,
    pub classification: Growth,
}

impl ModeReport {
    pub fn new(label: usize, lambda: c64, b: c64, h: f64) -> Result<Self> {
        let per = period(lambda, EPS_OSC)?;
        let finite = per.is_finite().then_some(per);
        Ok(ModeReport {
            label,
            amplitude_mag: b.norm(),
            eigenvalue: [lambda.re, lambda.im],
            modulus: lambda.norm(),
            period_steps: finite,
            period_physical: finite.map(|p| p * h),
            classification: classify(lambda, EPS_UNIT),
        })
    }
}

/// Reports for the modes in `order` (0-based indices) using amplitudes `b`.
pub fn mode_table(lambda: &[c64], b: &[c64], order: &[usize], h: f64) -> Result<Vec<ModeReport>> {
    order
        .iter()
        .map(|&j| {
            if j >= lambda.len() {
                return Err(Error::Bounds { index: j + 1, len: lambda.len() });
            }
            ModeReport::new(j + 1, lambda[j], b[j], h)
        })
        .collect()
}

/// CSV with columns `label,amp_mag,re_lambda,im_lambda,modulus,period_steps,period_physical,class`.
pub fn mode_table_csv(rows: &[ModeReport]) -> String {
    let mut out = String::from("label,amp_mag,re_lambda,im_lambda,modulus,period_steps,period_physical,class\n");
    let per = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |x| x.to_string());
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.label,
            r.amplitude_mag,
            r.eigenvalue[0],
            r.eigenvalue[1],
            r.modulus,
            per(r.period_steps),
            per(r.period_physical),
            r.classification
        ));
    }
    out
}
