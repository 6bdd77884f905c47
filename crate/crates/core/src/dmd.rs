//! Standard DMD: truncated SVD, projected operator, eigendecomposition,
//! spatial modes, Vandermonde matrix and optimal amplitudes.

use std::cmp::Ordering;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{col_norm, frobenius_sq, to_complex, HermitianFactor};
use crate::snapshot::{split_shifted, Grid, SnapshotMatrix};

/// Singular values below `RANK_EPS · σ₁` are treated as zero.
pub const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Keep every numerically nonzero singular value.
    #[default]
    Auto,
    /// Keep at most this many, capped by the numerical rank.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    /// `Φ = U_r W`
    #[default]
    Projected,
    /// `Φ = Y′ V_r Σ_r⁻¹ W`
    Exact,
}

/// Leading `r` singular triplets of the snapshot matrix.
#[derive(Debug, Clone)]
pub struct SvdTruncation {
    pub u: Mat<f64>,
    pub sigma: Vec<f64>,
    pub v: Mat<f64>,
}

impl SvdTruncation {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

pub fn truncated_svd(y: &Mat<f64>, policy: RankPolicy) -> Result<SvdTruncation> {
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(Error::Rank("empty matrix".into()));
    }
    if !crate::snapshot::all_finite(y.as_ref()) {
        return Err(Error::Data("matrix contains non-finite values".into()));
    }
    let svd = y
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let s1 = s.first().copied().unwrap_or(0.0);
    if !(s1 > 0.0) {
        return Err(Error::Rank("matrix is identically zero".into()));
    }
    let numerical = s.iter().take_while(|&&v| v > RANK_EPS * s1).count();
    let r = match policy {
        RankPolicy::Auto => numerical,
        RankPolicy::Fixed(0) => return Err(Error::Rank("requested rank must be at least 1".into())),
        RankPolicy::Fixed(k) => k.min(numerical),
    };
    Ok(SvdTruncation {
        u: svd.U().subcols(0, r).to_owned(),
        sigma: s[..r].to_vec(),
        v: svd.V().subcols(0, r).to_owned(),
    })
}

/// `Ã = U_rᵀ Y′ V_r Σ_r⁻¹`
pub fn reduced_operator(svd: &SvdTruncation, yp: &Mat<f64>) -> Result<Mat<f64>> {
    check_sigma(svd)?;
    if yp.nrows() != svd.u.nrows() || yp.ncols() != svd.v.nrows() {
        return Err(Error::Dimension(format!(
            "shifted data is {}x{}, SVD factors expect {}x{}",
            yp.nrows(),
            yp.ncols(),
            svd.u.nrows(),
            svd.v.nrows()
        )));
    }
    let mut a = svd.u.transpose() * yp * &svd.v;
    for (j, s) in svd.sigma.iter().enumerate() {
        for i in 0..a.nrows() {
            a[(i, j)] /= s;
        }
    }
    Ok(a)
}

fn check_sigma(svd: &SvdTruncation) -> Result<()> {
    let s1 = svd.sigma.first().copied().unwrap_or(0.0);
    match svd.sigma.last() {
        Some(&smin) if smin > RANK_EPS * s1 => Ok(()),
        Some(&smin) => Err(Error::Conditioning(format!(
            "smallest retained singular value {smin:e} is below {RANK_EPS:e}·σ₁"
        ))),
        None => Err(Error::Rank("empty truncation".into())),
    }
}

/// Eigenpairs of a real matrix with unit-norm eigenvectors, ordered by
/// descending modulus, then descending imaginary part, then original index.
pub fn eig_decompose(a: &Mat<f64>) -> Result<(Mat<c64>, Vec<c64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!("operator is {}x{}, expected square", n, a.ncols())));
    }
    if !crate::snapshot::all_finite(a.as_ref()) {
        return Err(Error::Numeric("operator contains non-finite values".into()));
    }
    let evd = a
        .eigen()
        .map_err(|e| Error::Numeric(format!("eigensolver did not converge: {e:?}")))?;
    let vals: Vec<c64> = evd.S().column_vector().iter().copied().collect();
    let vecs = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        vals[j]
            .norm()
            .total_cmp(&vals[i].norm())
            .then(vals[j].im.total_cmp(&vals[i].im))
            .then(i.cmp(&j))
    });

    let mut w = Mat::<c64>::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let nrm = (0..n).map(|i| vecs[(i, src)].norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::Numeric(format!("eigenvector {src} has invalid norm {nrm}")));
        }
        for i in 0..n {
            w[(i, dst)] = vecs[(i, src)] / nrm;
        }
        lambda.push(vals[src]);
    }
    Ok((w, lambda))
}

/// Spatial DMD modes with unit 2-norm columns.
pub fn dmd_modes(svd: &SvdTruncation, yp: &Mat<f64>, w: &Mat<c64>, kind: ModeKind) -> Result<Mat<c64>> {
    check_sigma(svd)?;
    if w.nrows() != svd.rank() {
        return Err(Error::Dimension(format!(
            "eigenvector matrix has {} rows, rank is {}",
            w.nrows(),
            svd.rank()
        )));
    }
    let basis = match kind {
        ModeKind::Projected => svd.u.clone(),
        ModeKind::Exact => {
            let mut b = yp * &svd.v;
            for (j, s) in svd.sigma.iter().enumerate() {
                for i in 0..b.nrows() {
                    b[(i, j)] /= s;
                }
            }
            b
        }
    };
    let mut phi = to_complex(&basis) * w;
    for j in 0..phi.ncols() {
        let nrm = col_norm(&phi, j);
        if !(nrm > 0.0) {
            return Err(Error::Conditioning(format!("mode {j} vanishes (zero eigenvalue?)")));
        }
        for i in 0..phi.nrows() {
            phi[(i, j)] /= nrm;
        }
    }
    Ok(phi)
}

/// `T[j, k] = λ_j^k`, `k = 0..n`, by repeated multiplication.
pub fn vandermonde(lambda: &[c64], n: usize) -> Mat<c64> {
    let mut t = Mat::<c64>::zeros(lambda.len(), n);
    for (j, &l) in lambda.iter().enumerate() {
        let mut z = c64::new(1.0, 0.0);
        for k in 0..n {
            t[(j, k)] = z;
            z *= l;
        }
    }
    t
}

/// Quadratic form of the amplitude fit:
/// `J(b) = b*Pb − b*d − d*b + η = ‖Y − Φ diag(b) T‖_F²`.
#[derive(Debug, Clone)]
pub struct AmplitudeQp {
    pub p: Mat<c64>,
    pub d: Vec<c64>,
    pub eta: f64,
}

impl AmplitudeQp {
    /// Builds the problem from the SVD factors, assuming `Φ = U_r W`.
    pub fn from_factors(w: &Mat<c64>, sigma: &[f64], v: &Mat<f64>, t: &Mat<c64>) -> Result<Self> {
        let r = sigma.len();
        if w.nrows() != r || w.ncols() != r || v.ncols() != r || t.nrows() != r || t.ncols() != v.nrows() {
            return Err(Error::Dimension("inconsistent amplitude problem shapes".into()));
        }
        let ww = w.adjoint() * w;
        let p = hadamard_conj(&ww, &(t * t.adjoint()));
        let v_sigma = Mat::from_fn(v.nrows(), r, |i, j| c64::new(v[(i, j)] * sigma[j], 0.0));
        let m = t * v_sigma * w;
        let d = (0..r).map(|j| m[(j, j)].conj()).collect();
        let eta = sigma.iter().map(|s| s * s).sum();
        Ok(AmplitudeQp { p, d, eta })
    }

    /// Builds the problem for arbitrary modes against the raw data.
    pub fn from_modes(phi: &Mat<c64>, y: &Mat<f64>, t: &Mat<c64>) -> Result<Self> {
        let r = phi.ncols();
        if phi.nrows() != y.nrows() || t.nrows() != r || t.ncols() != y.ncols() {
            return Err(Error::Dimension("inconsistent amplitude problem shapes".into()));
        }
        let p = hadamard_conj(&(phi.adjoint() * phi), &(t * t.adjoint()));
        let g = to_complex(&y.transpose().to_owned()) * phi;
        let d = (0..r)
            .map(|j| (0..t.ncols()).map(|k| t[(j, k)] * g[(k, j)]).sum::<c64>().conj())
            .collect();
        Ok(AmplitudeQp {
            p,
            d,
            eta: frobenius_sq(y),
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Value of the fit objective at `b`, clamped at zero against roundoff.
    pub fn objective(&self, b: &[c64]) -> f64 {
        let r = self.dim();
        let mut quad = 0.0;
        for i in 0..r {
            if b[i] == c64::new(0.0, 0.0) {
                continue;
            }
            let row: c64 = (0..r).map(|j| self.p[(i, j)] * b[j]).sum();
            quad += (b[i].conj() * row).re;
        }
        let lin: f64 = b.iter().zip(&self.d).map(|(bi, di)| (bi.conj() * di).re).sum();
        (quad - 2.0 * lin + self.eta).max(0.0)
    }

    /// Unconstrained minimizer `P⁻¹d`.
    pub fn solve(&self) -> Result<Vec<c64>> {
        Ok(HermitianFactor::new(&self.p)?.solve(&self.d))
    }
}

fn hadamard_conj(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let p = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * b[(i, j)].conj());
    // exact Hermitian symmetry for the factorization
    Mat::from_fn(p.nrows(), p.ncols(), |i, j| match i.cmp(&j) {
        Ordering::Equal => c64::new(p[(i, i)].re, 0.0),
        Ordering::Greater => p[(i, j)],
        Ordering::Less => p[(j, i)].conj(),
    })
}

/// Amplitudes minimizing `‖Y − U_r W diag(b) T‖_F²`, i.e. `b = P⁻¹d`.
pub fn optimal_amplitudes(w: &Mat<c64>, sigma: &[f64], v: &Mat<f64>, t: &Mat<c64>) -> Result<Vec<c64>> {
    AmplitudeQp::from_factors(w, sigma, v, t)?.solve()
}

/// `Re(Σ_j φ_j[i] λ_j^k b_j)` given the precomputed `λ_j^k b_j`.
pub(crate) fn point_value(phi: &Mat<c64>, i: usize, coeffs: &[c64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| (phi[(i, j)] * c).re)
        .sum()
}

pub(crate) fn time_coefficients(lambda: &[c64], b: &[c64], ks: &[usize]) -> Vec<Vec<c64>> {
    let kmax = ks.iter().copied().max().map_or(0, |k| k + 1);
    let t = vandermonde(lambda, kmax);
    ks.iter()
        .map(|&k| (0..lambda.len()).map(|j| t[(j, k)] * b[j]).collect())
        .collect()
}

/// Real part of the modal superposition at each requested time index.
pub fn reconstruct(phi: &Mat<c64>, lambda: &[c64], b: &[c64], ks: &[usize]) -> Mat<f64> {
    assert_eq!(phi.ncols(), lambda.len(), "mode/eigenvalue count mismatch");
    assert_eq!(b.len(), lambda.len(), "amplitude/eigenvalue count mismatch");
    let coeffs = time_coefficients(lambda, b, ks);
    Mat::from_fn(phi.nrows(), ks.len(), |i, c| point_value(phi, i, &coeffs[c]))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DmdOptions {
    pub rank: RankPolicy,
    pub mode_kind: ModeKind,
}

/// Result of running the DMD pipeline on a snapshot sequence.
#[derive(Debug, Clone)]
pub struct DmdDecomposition {
    pub grid: Grid,
    pub svd: SvdTruncation,
    pub a_tilde: Mat<f64>,
    pub w: Mat<c64>,
    pub lambda: Vec<c64>,
    pub phi: Mat<c64>,
    pub vandermonde: Mat<c64>,
    pub amplitudes: Vec<c64>,
    pub qp: AmplitudeQp,
    pub mode_kind: ModeKind,
}

impl DmdDecomposition {
    /// Decomposes `N+1` snapshots, fitting the first `N` against their shift.
    pub fn compute(snapshots: &SnapshotMatrix, opts: DmdOptions) -> Result<Self> {
        Self::from_data(*snapshots.grid(), snapshots.data(), opts)
    }

    pub fn from_data(grid: Grid, full: &Mat<f64>, opts: DmdOptions) -> Result<Self> {
        let (y, yp) = split_shifted(full)?;
        let svd = truncated_svd(&y, opts.rank)?;
        let a_tilde = reduced_operator(&svd, &yp)?;
        let (w, lambda) = eig_decompose(&a_tilde)?;
        let phi = dmd_modes(&svd, &yp, &w, opts.mode_kind)?;
        let t = vandermonde(&lambda, y.ncols());
        let qp = match opts.mode_kind {
            ModeKind::Projected => AmplitudeQp::from_factors(&w, &svd.sigma, &svd.v, &t)?,
            ModeKind::Exact => AmplitudeQp::from_modes(&phi, &y, &t)?,
        };
        let amplitudes = qp.solve()?;
        Ok(DmdDecomposition {
            grid,
            svd,
            a_tilde,
            w,
            lambda,
            phi,
            vandermonde: t,
            amplitudes,
            qp,
            mode_kind: opts.mode_kind,
        })
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// Number of snapshots in the fitted (unshifted) matrix.
    pub fn n_snapshots(&self) -> usize {
        self.vandermonde.ncols()
    }

    pub fn reconstruct(&self, b: &[c64], ks: &[usize]) -> Mat<f64> {
        reconstruct(&self.phi, &self.lambda, b, ks)
    }

    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            rank: self.rank(),
            mode_kind: self.mode_kind,
            eigenvalues: self.lambda.iter().map(|z| [z.re, z.im]).collect(),
            amplitudes: self.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
            singular_values: self.svd.sigma.clone(),
        }
    }

    /// Mode real and imaginary parts as `p × r` matrices.
    pub fn mode_parts(&self) -> (Mat<f64>, Mat<f64>) {
        let re = Mat::from_fn(self.phi.nrows(), self.phi.ncols(), |i, j| self.phi[(i, j)].re);
        let im = Mat::from_fn(self.phi.nrows(), self.phi.ncols(), |i, j| self.phi[(i, j)].im);
        (re, im)
    }
}

/// JSON export of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub rank: usize,
    pub mode_kind: ModeKind,
    pub eigenvalues: Vec<[f64; 2]>,
    pub amplitudes: Vec<[f64; 2]>,
    pub singular_values: Vec<f64>,
}
