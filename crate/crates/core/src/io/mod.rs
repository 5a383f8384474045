//! Text file formats: MOT records, embeddings, homography caches,
//! correspondences, flat configs and simulator bundles.

mod bundle;
mod cache;
mod config;
mod correspondences;
mod embeddings;
mod mot;

use std::path::Path;

use crate::error::{Error, Result};

pub use bundle::write_bundle;
pub use cache::{read_homography_cache, read_homography_entries, write_homography_cache};
pub use config::{read_config, write_scenario_config, RunConfig, CONFIG_KEYS};
pub use correspondences::{
    correspondence_file_name, read_correspondence_dir, read_correspondences, write_correspondence_dir,
    write_correspondences,
};
pub use embeddings::{read_embeddings, write_embeddings, EmbeddingMap};
pub use mot::{
    detections_from_records, read_mot, records_from_boxes, records_from_detections, records_to_boxes, write_mot,
    MotRecord,
};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Finite float or a parse error at `line`.
pub(crate) fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(Error::Parse { path: path.into(), line, msg: format!("non-finite value {v}") }),
        Err(_) => Err(Error::Parse { path: path.into(), line, msg: format!("invalid number `{}`", s.trim()) }),
    }
}

pub(crate) fn parse_int<T: std::str::FromStr>(s: &str, path: &Path, line: usize) -> Result<T> {
    s.trim().parse::<T>().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        msg: format!("invalid integer `{}`", s.trim()),
    })
}

/// Non-empty lines that are not `#` comments, with 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}
