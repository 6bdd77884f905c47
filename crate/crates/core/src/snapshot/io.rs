//! Snapshot file formats.
//!
//! SNPB v1 (little-endian):
//!
//! ```text
//! b"SNPB" | u32 version=1 | u32 n_y | u32 n_z | u32 N | f64 dy | f64 dz | f64 h
//! | u32 name_len | name (UTF-8) | p·N f64 values, one flattened snapshot after another
//! ```
//!
//! CSV: a `# ny=.. nz=.. N=.. dy=.. dz=.. h=.. field=..` header followed by
//! one snapshot per line (`p` comma-separated values in flattening order).

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;

use super::{all_finite, Grid, SnapshotMatrix, DEFAULT_DY, DEFAULT_DZ, DEFAULT_H};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SNPB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Binary,
    Csv,
}

impl SnapshotFormat {
    /// Guesses the format from the leading bytes of a file.
    pub fn sniff(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(MAGIC) {
            Ok(SnapshotFormat::Binary)
        } else if bytes.starts_with(b"#") {
            Ok(SnapshotFormat::Csv)
        } else if bytes.is_empty() {
            Err(Error::Format("empty input".into()))
        } else {
            Err(Error::Format("unrecognised snapshot file (expected SNPB magic or CSV header)".into()))
        }
    }
}

/// Writes a `p × n` matrix in SNPB layout. `n` may be any positive count.
pub fn write_snpb<W: Write>(mut w: W, grid: &Grid, field_name: &str, data: &Mat<f64>) -> Result<()> {
    if data.nrows() != grid.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, grid needs {}",
            data.nrows(),
            grid.len()
        )));
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Dimension(format!("{what}={v} does not fit in u32")))
    };
    let mut buf = Vec::with_capacity(48 + field_name.len() + 8 * data.nrows() * data.ncols());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(grid.n_y, "n_y")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(grid.n_z, "n_z")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(data.ncols(), "N")?.to_le_bytes());
    buf.extend_from_slice(&grid.dy.to_le_bytes());
    buf.extend_from_slice(&grid.dz.to_le_bytes());
    buf.extend_from_slice(&grid.h.to_le_bytes());
    buf.extend_from_slice(&to_u32(field_name.len(), "name length")?.to_le_bytes());
    buf.extend_from_slice(field_name.as_bytes());
    for k in 0..data.ncols() {
        for i in 0..data.nrows() {
            buf.extend_from_slice(&data[(i, k)].to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Format("truncated SNPB header".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        self.take(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Format("truncated SNPB header".into()))
    }
}

/// Parses an SNPB stream into its grid, field name and `p × n` payload.
pub fn read_snpb<R: Read>(mut r: R) -> Result<(Grid, String, Mat<f64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    match c.take(4) {
        Some(m) if m == MAGIC => {}
        _ => return Err(Error::Format("bad magic, expected SNPB".into())),
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported SNPB version {version}")));
    }
    let n_y = c.u32()? as usize;
    let n_z = c.u32()? as usize;
    let n = c.u32()? as usize;
    let (dy, dz, h) = (c.f64()?, c.f64()?, c.f64()?);
    let grid = Grid::new(n_y, n_z, dy, dz, h).map_err(|e| Error::Format(e.to_string()))?;
    let name_len = c.u32()? as usize;
    let name = c
        .take(name_len)
        .ok_or_else(|| Error::Format("truncated field name".into()))?;
    let name = String::from_utf8(name.to_vec()).map_err(|_| Error::Format("field name is not UTF-8".into()))?;

    let p = grid.len();
    let expected = p
        .checked_mul(n)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    let payload = &bytes[c.pos..];
    if payload.len() != expected {
        return Err(Error::Length(format!(
            "payload has {} bytes, header promises {} ({}x{} f64)",
            payload.len(),
            expected,
            p,
            n
        )));
    }
    let data = Mat::from_fn(p, n, |i, k| {
        let off = 8 * (k * p + i);
        f64::from_le_bytes(payload[off..off + 8].try_into().unwrap())
    });
    if !all_finite(data.as_ref()) {
        return Err(Error::Data("payload contains non-finite values".into()));
    }
    Ok((grid, name, data))
}

fn csv_header(grid: &Grid, n: usize, field_name: &str) -> String {
    format!(
        "# ny={} nz={} N={} dy={} dz={} h={} field={}\n",
        grid.n_y, grid.n_z, n, grid.dy, grid.dz, grid.h, field_name
    )
}

fn write_csv<W: Write>(mut w: W, s: &SnapshotMatrix) -> Result<()> {
    let data = s.data();
    let mut out = csv_header(s.grid(), data.ncols(), s.field_name());
    for k in 0..data.ncols() {
        for i in 0..data.nrows() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{}", data[(i, k)]).unwrap();
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

fn read_csv(text: &str) -> Result<SnapshotMatrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::Format("missing '#' header line".into()))?;

    let (mut ny, mut nz, mut n) = (None, None, None);
    let (mut dy, mut dz, mut h) = (DEFAULT_DY, DEFAULT_DZ, DEFAULT_H);
    let mut field = String::from("field");
    for tok in header.split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header token '{tok}'")))?;
        let int = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("bad integer for {key}: '{value}'")))
        };
        let real = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number for {key}: '{value}'")))
        };
        match key {
            "ny" => ny = Some(int()?),
            "nz" => nz = Some(int()?),
            "N" => n = Some(int()?),
            "dy" => dy = real()?,
            "dz" => dz = real()?,
            "h" => h = real()?,
            "field" => field = value.to_string(),
            _ => return Err(Error::Format(format!("unknown header key '{key}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header is missing '{k}'"));
    let grid = Grid::new(ny.ok_or_else(|| missing("ny"))?, nz.ok_or_else(|| missing("nz"))?, dy, dz, h)
        .map_err(|e| Error::Format(e.to_string()))?;
    let n = n.ok_or_else(|| missing("N"))?;
    let p = grid.len();

    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != n {
        return Err(Error::Length(format!("header promises {n} snapshots, found {}", rows.len())));
    }
    let mut data = Mat::<f64>::zeros(p, n);
    for (k, row) in rows.iter().enumerate() {
        let mut count = 0;
        for (i, tok) in row.split(',').enumerate() {
            if i >= p {
                return Err(Error::Length(format!("snapshot {k} has more than {p} values")));
            }
            data[(i, k)] = tok
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("snapshot {k}: bad value '{}'", tok.trim())))?;
            count += 1;
        }
        if count != p {
            return Err(Error::Length(format!("snapshot {k} has {count} values, expected {p}")));
        }
    }
    SnapshotMatrix::new(grid, data, field)
}

pub fn save_snapshots(s: &SnapshotMatrix, path: impl AsRef<Path>, format: SnapshotFormat) -> Result<()> {
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    match format {
        SnapshotFormat::Binary => write_snpb(file, s.grid(), s.field_name(), s.data()),
        SnapshotFormat::Csv => write_csv(file, s),
    }
}

pub fn load_snapshots(path: impl AsRef<Path>, format: SnapshotFormat) -> Result<SnapshotMatrix> {
    let bytes = fs::read(path)?;
    match format {
        SnapshotFormat::Binary => {
            let (grid, name, data) = read_snpb(bytes.as_slice())?;
            SnapshotMatrix::new(grid, data, name)
        }
        SnapshotFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| Error::Format("CSV is not UTF-8".into()))?;
            read_csv(&text)
        }
    }
}
