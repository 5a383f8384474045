use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{content_lines, parse_f64, parse_int, read_text, write_text};
use crate::error::{Error, Result};

/// `(frame, detection index) -> unit vector`.
pub type EmbeddingMap = BTreeMap<(usize, usize), Vec<f64>>;

const RENORM_TOLERANCE: f64 = 1e-6;
const RENORM_WARN: f64 = 1e-3;

/// Reads `frame,det_index,v1,...,vC` lines. Vectors are renormalized when
/// their norm is off by more than 1e-6.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingMap> {
    let text = read_text(path)?;
    let mut out = EmbeddingMap::new();
    let mut dim: Option<usize> = None;
    for (ln, line) in content_lines(&text) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Parse { path: path.into(), line: ln, msg: "expected frame,det_index,values...".into() });
        }
        let frame: usize = parse_int(fields[0], path, ln)?;
        let index: usize = parse_int(fields[1], path, ln)?;
        let mut v: Vec<f64> = fields[2..].iter().map(|f| parse_f64(f, path, ln)).collect::<Result<_>>()?;
        match dim {
            Some(d) if d != v.len() => return Err(Error::DimensionMismatch { expected: d, got: v.len() }),
            _ => dim = Some(v.len()),
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Parse { path: path.into(), line: ln, msg: "zero embedding".into() });
        }
        if (norm - 1.0).abs() > RENORM_TOLERANCE {
            if (norm - 1.0).abs() > RENORM_WARN {
                log::warn!("{}:{ln}: embedding norm {norm:.6} renormalized", path.display());
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        out.insert((frame, index), v);
    }
    Ok(out)
}

/// Nine significant digits per value.
pub fn write_embeddings(map: &EmbeddingMap, path: &Path) -> Result<()> {
    let mut s = String::new();
    for (&(frame, index), v) in map {
        write!(s, "{frame},{index}").unwrap();
        for x in v {
            write!(s, ",{x:.8e}").unwrap();
        }
        s.push('\n');
    }
    write_text(path, &s)
}
