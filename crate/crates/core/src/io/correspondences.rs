use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{content_lines, parse_f64, read_text, write_text};
use crate::error::{Error, Result};
use crate::geometry::{CorrespondenceSet, Point2};

/// `{src:06}_{dst:06}.txt`.
pub fn correspondence_file_name(src: usize, dst: usize) -> String {
    format!("{src:06}_{dst:06}.txt")
}

fn parse_name(name: &str) -> Option<(usize, usize)> {
    let stem = name.strip_suffix(".txt")?;
    let (a, b) = stem.split_once('_')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// One `sx sy dx dy` line per pair.
pub fn read_correspondences(path: &Path, src: usize, dst: usize) -> Result<CorrespondenceSet> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    for (ln, line) in content_lines(&text) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                path: path.into(),
                line: ln,
                msg: format!("expected 4 fields, got {}", f.len()),
            });
        }
        let v: Vec<f64> = f.iter().map(|x| parse_f64(x, path, ln)).collect::<Result<_>>()?;
        pairs.push((Point2::new(v[0], v[1]), Point2::new(v[2], v[3])));
    }
    Ok(CorrespondenceSet::new(src, dst, pairs))
}

pub fn write_correspondences(set: &CorrespondenceSet, path: &Path) -> Result<()> {
    let mut s = String::new();
    for (p, q) in &set.pairs {
        writeln!(s, "{} {} {} {}", p.x, p.y, q.x, q.y).unwrap();
    }
    write_text(path, &s)
}

/// Every `{src}_{dst}.txt` file in `dir`; other files are ignored.
pub fn read_correspondence_dir(dir: &Path) -> Result<BTreeMap<(usize, usize), CorrespondenceSet>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some((src, dst)) = name.to_str().and_then(parse_name) else { continue };
        out.insert((src, dst), read_correspondences(&entry.path(), src, dst)?);
    }
    Ok(out)
}

pub fn write_correspondence_dir(sets: &BTreeMap<(usize, usize), CorrespondenceSet>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (&(src, dst), set) in sets {
        write_correspondences(set, &dir.join(correspondence_file_name(src, dst)))?;
    }
    Ok(())
}
