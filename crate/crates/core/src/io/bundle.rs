use std::path::Path;

use super::{
    records_from_boxes, records_from_detections, write_correspondence_dir, write_embeddings, write_homography_cache,
    write_mot, write_scenario_config, EmbeddingMap,
};
use crate::error::{Error, Result};
use crate::pipeline::gt_boxes;
use crate::simulator::SequenceBundle;

/// Writes `gt.txt`, `det.txt`, `emb.txt`, `homog_gt.txt`, `corr/` and
/// `scenario.cfg` into `dir`.
pub fn write_bundle(bundle: &SequenceBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_mot(&records_from_boxes(&gt_boxes(bundle)), &dir.join("gt.txt"))?;
    write_mot(&records_from_detections(&bundle.detections), &dir.join("det.txt"))?;
    let emb: EmbeddingMap = bundle
        .detections
        .iter()
        .flat_map(|(&f, v)| v.iter().enumerate().filter_map(move |(i, d)| d.embedding.clone().map(|e| ((f, i), e))))
        .collect();
    write_embeddings(&emb, &dir.join("emb.txt"))?;
    write_homography_cache(&bundle.gt_homographies, &dir.join("homog_gt.txt"))?;
    write_correspondence_dir(&bundle.correspondences, &dir.join("corr"))?;
    write_scenario_config(&bundle.config, &dir.join("scenario.cfg"))
}
