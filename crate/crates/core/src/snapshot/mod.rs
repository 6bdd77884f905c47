//! Gridded snapshot data: grid geometry, scalar-field series, derived
//! observables and the flattened snapshot matrix.
//!
//! Fields live on a y–z plane with `n_y` horizontal and `n_z` vertical
//! points. A field is an `n_y × n_z` matrix whose row index is the y-index
//! `m` and column index the z-index `ℓ`. Flattening is column-major with y
//! varying fastest, so the 0-based flat index of `(m, ℓ)` is `ℓ·n_y + m`.

mod io;

pub use io::{load_snapshots, read_snpb, save_snapshots, write_snpb, SnapshotFormat};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default horizontal spacing (km) for CSV headers that omit `dy`.
pub const DEFAULT_DY: f64 = 0.5;
/// Default vertical spacing (km) for CSV headers that omit `dz`.
pub const DEFAULT_DZ: f64 = 20.0 / 96.0;
/// Default sampling interval (s) for CSV headers that omit `h`.
pub const DEFAULT_H: f64 = 30.0;

/// Geometry of the y–z sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_y: usize,
    pub n_z: usize,
    /// Spacing along y (km).
    pub dy: f64,
    /// Spacing along z (km).
    pub dz: f64,
    /// Sampling interval between snapshots (s).
    pub h: f64,
}

impl Grid {
    pub fn new(n_y: usize, n_z: usize, dy: f64, dz: f64, h: f64) -> Result<Self> {
        let grid = Grid { n_y, n_z, dy, dz, h };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y < 2 || self.n_z < 2 {
            return Err(Error::Dimension(format!(
                "grid needs at least 2x2 points, got {}x{}",
                self.n_y, self.n_z
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.dy) && positive(self.dz) && positive(self.h)) {
            return Err(Error::Dimension(format!(
                "grid spacing and sampling interval must be positive (dy={}, dz={}, h={})",
                self.dy, self.dz, self.h
            )));
        }
        Ok(())
    }

    /// Flattened state length `p = n_y · n_z`.
    pub fn len(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0-based flat index of grid point `(m, l)`.
    pub fn flat_index(&self, m: usize, l: usize) -> usize {
        l * self.n_y + m
    }

    /// Inverse of [`Grid::flat_index`].
    pub fn grid_point(&self, i: usize) -> (usize, usize) {
        (i % self.n_y, i / self.n_y)
    }
}

/// A time series of scalar fields on a common grid.
#[derive(Debug, Clone)]
pub struct ScalarFieldSeries {
    grid: Grid,
    values: Vec<Mat<f64>>,
}

impl ScalarFieldSeries {
    pub fn new(grid: Grid, values: Vec<Mat<f64>>) -> Result<Self> {
        grid.validate()?;
        for (k, v) in values.iter().enumerate() {
            check_shape(v, &grid)?;
            if !all_finite(v.as_ref()) {
                return Err(Error::Data(format!("snapshot {k} contains non-finite values")));
            }
        }
        Ok(ScalarFieldSeries { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Mat<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Stacks the flattened fields as columns of a snapshot matrix.
    pub fn to_snapshot_matrix(&self, field_name: &str) -> Result<SnapshotMatrix> {
        let p = self.grid.len();
        let mut data = Mat::<f64>::zeros(p, self.values.len());
        for (k, field) in self.values.iter().enumerate() {
            let col = flatten(field, &self.grid)?;
            for (i, v) in col.into_iter().enumerate() {
                data[(i, k)] = v;
            }
        }
        SnapshotMatrix::new(self.grid, data, field_name)
    }
}

/// `p × N` matrix whose column `k` is the flattened snapshot at time `k`.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    grid: Grid,
    data: Mat<f64>,
    field_name: String,
}

impl SnapshotMatrix {
    pub fn new(grid: Grid, data: Mat<f64>, field_name: impl Into<String>) -> Result<Self> {
        grid.validate()?;
        if data.nrows() != grid.len() {
            return Err(Error::Dimension(format!(
                "snapshot rows {} do not match grid size {}x{}={}",
                data.nrows(),
                grid.n_y,
                grid.n_z,
                grid.len()
            )));
        }
        if data.ncols() < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 snapshots, got {}",
                data.ncols()
            )));
        }
        if !all_finite(data.as_ref()) {
            return Err(Error::Data("snapshot matrix contains non-finite values".into()));
        }
        Ok(SnapshotMatrix {
            grid,
            data,
            field_name: field_name.into(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &Mat<f64> {
        &self.data
    }

    pub fn field_name(&self) -> &str {
        &self.field_name
    }

    /// Number of snapshots `N`.
    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    /// Unflattens every column back into an `n_y × n_z` field.
    pub fn to_series(&self) -> Result<ScalarFieldSeries> {
        let values = (0..self.data.ncols())
            .map(|k| {
                let col: Vec<f64> = (0..self.data.nrows()).map(|i| self.data[(i, k)]).collect();
                unflatten(&col, &self.grid)
            })
            .collect::<Result<Vec<_>>>()?;
        ScalarFieldSeries::new(self.grid, values)
    }

    pub fn into_data(self) -> Mat<f64> {
        self.data
    }
}

fn check_shape(field: &Mat<f64>, grid: &Grid) -> Result<()> {
    if field.nrows() != grid.n_y || field.ncols() != grid.n_z {
        return Err(Error::Dimension(format!(
            "field shape {}x{} does not match grid {}x{}",
            field.nrows(),
            field.ncols(),
            grid.n_y,
            grid.n_z
        )));
    }
    Ok(())
}

pub(crate) fn all_finite(m: faer::MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

/// Flattens an `n_y × n_z` field into a length-`p` vector, y fastest.
pub fn flatten(field: &Mat<f64>, grid: &Grid) -> Result<Vec<f64>> {
    check_shape(field, grid)?;
    let mut out = Vec::with_capacity(grid.len());
    for l in 0..grid.n_z {
        for m in 0..grid.n_y {
            out.push(field[(m, l)]);
        }
    }
    Ok(out)
}

/// Inverse of [`flatten`].
pub fn unflatten(values: &[f64], grid: &Grid) -> Result<Mat<f64>> {
    if values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "vector length {} does not match grid size {}",
            values.len(),
            grid.len()
        )));
    }
    Ok(Mat::from_fn(grid.n_y, grid.n_z, |m, l| values[grid.flat_index(m, l)]))
}

fn check_pair(vy: &ScalarFieldSeries, vz: &ScalarFieldSeries) -> Result<()> {
    if vy.grid != vz.grid {
        return Err(Error::Dimension("velocity components live on different grids".into()));
    }
    if vy.len() != vz.len() {
        return Err(Error::Dimension(format!(
            "velocity components have {} and {} snapshots",
            vy.len(),
            vz.len()
        )));
    }
    Ok(())
}

/// Pointwise speed `sqrt(u_y² + u_z²)` for each snapshot.
pub fn velocity_magnitude(vy: &ScalarFieldSeries, vz: &ScalarFieldSeries) -> Result<ScalarFieldSeries> {
    check_pair(vy, vz)?;
    let grid = vy.grid;
    let values = vy
        .values
        .iter()
        .zip(&vz.values)
        .map(|(a, b)| Mat::from_fn(grid.n_y, grid.n_z, |m, l| a[(m, l)].hypot(b[(m, l)])))
        .collect();
    ScalarFieldSeries::new(grid, values)
}

/// Magnitude of the out-of-plane curl `|∂u_z/∂y − ∂u_y/∂z|`.
///
/// Second-order central differences in the interior, first-order one-sided
/// differences on the boundary rows and columns.
pub fn vorticity_magnitude(vy: &ScalarFieldSeries, vz: &ScalarFieldSeries) -> Result<ScalarFieldSeries> {
    check_pair(vy, vz)?;
    let grid = vy.grid;
    if grid.n_y < 2 || grid.n_z < 2 {
        return Err(Error::Dimension("vorticity needs at least 2 points per axis".into()));
    }
    let values = vy
        .values
        .iter()
        .zip(&vz.values)
        .map(|(uy, uz)| {
            Mat::from_fn(grid.n_y, grid.n_z, |m, l| {
                let duz_dy = diff_y(uz, m, l, grid.n_y, grid.dy);
                let duy_dz = diff_z(uy, m, l, grid.n_z, grid.dz);
                (duz_dy - duy_dz).abs()
            })
        })
        .collect();
    ScalarFieldSeries::new(grid, values)
}

fn diff_y(f: &Mat<f64>, m: usize, l: usize, n: usize, d: f64) -> f64 {
    if m == 0 {
        (f[(1, l)] - f[(0, l)]) / d
    } else if m == n - 1 {
        (f[(m, l)] - f[(m - 1, l)]) / d
    } else {
        (f[(m + 1, l)] - f[(m - 1, l)]) / (2.0 * d)
    }
}

fn diff_z(f: &Mat<f64>, m: usize, l: usize, n: usize, d: f64) -> f64 {
    if l == 0 {
        (f[(m, 1)] - f[(m, 0)]) / d
    } else if l == n - 1 {
        (f[(m, l)] - f[(m, l - 1)]) / d
    } else {
        (f[(m, l + 1)] - f[(m, l - 1)]) / (2.0 * d)
    }
}

/// Splits `p × (N+1)` data into the snapshot matrix and its one-step shift.
pub fn split_shifted(full: &Mat<f64>) -> Result<(Mat<f64>, Mat<f64>)> {
    let n = full.ncols();
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 columns to split, got {n}")));
    }
    let y = full.subcols(0, n - 1).to_owned();
    let yp = full.subcols(1, n - 1).to_owned();
    Ok((y, yp))
}
