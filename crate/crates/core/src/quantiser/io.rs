//! Grid files.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic      8 bytes  "MVXGRID\0"
//! version    u32
//! dim        u32
//! n          u64
//! distortion f64
//! points     n·dim f64 (row-major)
//! probs      n f64
//! ```
//!
//! Plain-text grids (one point per line, whitespace or comma separated)
//! are also accepted: `point prob` in 1-D and `x y prob [ignored…]` in 2-D.
//! `#` starts a comment.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::output::write_atomic;

use super::{one_d, two_d, QuantiserGrid};

const MAGIC: &[u8; 8] = b"MVXGRID\0";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8;
/// Text grids carry rounded weights; anything further from one is rejected.
const TEXT_NORMALISATION_TOL: f64 = 1e-6;

/// Writes `grid` atomically (temporary file in the target directory, then
/// rename).
pub fn save_grid(grid: &QuantiserGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * grid.points().len() + 8 * grid.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.distortion().to_le_bytes());
    for v in grid.points().iter().chain(grid.probs()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &buf)
}

/// Reads a binary grid, or falls back to the text layouts.
pub fn load_grid(path: impl AsRef<Path>) -> Result<QuantiserGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        parse_binary(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "neither a binary grid nor UTF-8 text".into(),
        })?;
        parse_text(path, &text)
    }
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<QuantiserGrid> {
    let bad = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: msg.to_string(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    let dim = u32_at(12) as usize;
    let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let distortion = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let expected = HEADER_LEN + 8 * n * (dim + 1);
    if bytes.len() != expected {
        return Err(bad(&format!(
            "payload is {} bytes, header announces {expected}",
            bytes.len()
        )));
    }
    let mut vals = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let points: Vec<f64> = vals.by_ref().take(n * dim).collect();
    let probs: Vec<f64> = vals.collect();
    QuantiserGrid::from_parts(dim, points, probs, distortion)
}

fn parse_text(path: &Path, text: &str) -> Result<QuantiserGrid> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: std::result::Result<Vec<f64>, _> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let fields = fields.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        rows.push((i + 1, fields));
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::Empty("grid file"));
    };
    let dim = if first.len() == 2 { 1 } else { 2 };
    let mut points = Vec::with_capacity(rows.len() * dim);
    let mut probs = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        let ok = if dim == 1 { f.len() == 2 } else { f.len() >= 3 };
        if !ok {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                msg: format!("expected {} columns, found {}", dim + 1, f.len()),
            });
        }
        points.extend_from_slice(&f[..dim]);
        probs.push(f[dim]);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > TEXT_NORMALISATION_TOL {
        return Err(Error::Normalisation(total));
    }
    one_d::normalise(&mut probs);
    if dim == 1 {
        // external grids are not guaranteed to be sorted
        let mut idx: Vec<usize> = (0..probs.len()).collect();
        idx.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        let pts: Vec<f64> = idx.iter().map(|&i| points[i]).collect();
        let pr: Vec<f64> = idx.iter().map(|&i| probs[i]).collect();
        let d = one_d::distortion_1d(&pts);
        QuantiserGrid::from_parts(1, pts, pr, d)
    } else {
        let d = two_d::distortion_2d(&points);
        QuantiserGrid::from_parts(2, points, probs, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantiser::build_gaussian_1d;

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_gaussian_1d(37, 1e-12).unwrap();
        let p = dir.path().join("g.grid");
        save_grid(&g, &p).unwrap();
        assert_eq!(load_grid(&p).unwrap(), g);
    }

    #[test]
    fn text_import() {
        let dir = tempfile::tempdir().unwrap();
        let m = (2.0 / std::f64::consts::PI).sqrt();
        let p = dir.path().join("two.txt");
        fs::write(&p, format!("# two-point grid\n{m} 0.5\n-{m}, 0.5\n")).unwrap();
        let g = load_grid(&p).unwrap();
        let built = build_gaussian_1d(2, 1e-14).unwrap();
        assert_eq!(g.dim(), 1);
        for j in 0..2 {
            assert!((g.points()[j] - built.points()[j]).abs() < 1e-12);
            assert!((g.probs()[j] - built.probs()[j]).abs() < 1e-15);
        }
        assert!((g.distortion() - built.distortion()).abs() < 1e-10);

        fs::write(&p, "0.1 0.2 0.49 0\n-0.1 -0.2 0.49 0\n").unwrap();
        assert!(matches!(load_grid(&p), Err(Error::Normalisation(_))));
    }

    #[test]
    fn malformed_text_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, "0.0 0.5\n\n1.0 zero\n").unwrap();
        match load_grid(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&p, "0.0 0.5\n1.0\n").unwrap();
        assert!(matches!(load_grid(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.grid");
        save_grid(&build_gaussian_1d(5, 1e-12).unwrap(), &p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_grid(&p), Err(Error::Parse { .. })));
    }
}
