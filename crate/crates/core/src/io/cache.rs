use std::fmt::Write as _;
use std::path::Path;

use super::{content_lines, parse_f64, parse_int, read_text, write_text};
use crate::error::{Error, Result};
use crate::fhe::HomographyGraph;
use crate::geometry::Homography;

/// Parses `a b h1 .. h9` lines; each entry is `H_{a,b}`.
pub fn read_homography_entries(path: &Path) -> Result<Vec<((usize, usize), Homography)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (ln, line) in content_lines(&text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 11 {
            return Err(Error::Parse {
                path: path.into(),
                line: ln,
                msg: format!("expected 11 fields, got {}", fields.len()),
            });
        }
        let a: usize = parse_int(fields[0], path, ln)?;
        let b: usize = parse_int(fields[1], path, ln)?;
        if a < 1 || b < 1 {
            return Err(Error::Parse { path: path.into(), line: ln, msg: "frames are 1-based".into() });
        }
        let mut h = [0.0; 9];
        for (k, f) in fields[2..].iter().enumerate() {
            h[k] = parse_f64(f, path, ln)?;
        }
        let h = Homography::from_row_major(h).map_err(|_| Error::NonInvertibleEntry { path: path.into(), line: ln })?;
        if !h.is_invertible() {
            return Err(Error::NonInvertibleEntry { path: path.into(), line: ln });
        }
        out.push(((a, b), h));
    }
    Ok(out)
}

/// Frozen graph over frames `1..=max frame mentioned`.
pub fn read_homography_cache(path: &Path) -> Result<HomographyGraph> {
    let entries = read_homography_entries(path)?;
    let frames = entries.iter().map(|((a, b), _)| (*a).max(*b)).max().unwrap_or(1).max(1);
    HomographyGraph::from_pairs(frames, entries)
}

pub fn write_homography_cache(entries: &[((usize, usize), Homography)], path: &Path) -> Result<()> {
    let mut s = String::new();
    for ((a, b), h) in entries {
        write!(s, "{a} {b}").unwrap();
        for v in h.to_row_major() {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    write_text(path, &s)
}
