use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{content_lines, parse_f64, parse_int, read_text, write_text, EmbeddingMap};
use crate::association::Detection;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::{FrameBoxes, TrackedBox};

/// One line of a MOT-style file:
/// `frame,id,left,top,width,height[,conf[,class[,visibility[,extra...]]]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotRecord {
    pub frame: usize,
    pub id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub conf: f64,
    pub class_id: i32,
    pub visibility: f64,
    /// Trailing fields kept verbatim.
    pub extra: Vec<String>,
}

impl MotRecord {
    pub fn bbox(&self) -> Result<BBox> {
        BBox::new(self.left, self.top, self.width, self.height)
    }

    fn parse(line: &str, path: &Path, ln: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 6 {
            return Err(Error::Parse {
                path: path.into(),
                line: ln,
                msg: format!("expected at least 6 fields, got {}", fields.len()),
            });
        }
        let frame: usize = parse_int(fields[0], path, ln)?;
        if frame < 1 {
            return Err(Error::Parse { path: path.into(), line: ln, msg: "frame must be >= 1".into() });
        }
        let id = parse_f64(fields[1], path, ln)?;
        if id.fract() != 0.0 {
            return Err(Error::Parse { path: path.into(), line: ln, msg: format!("non-integer id {id}") });
        }
        let nums: Vec<f64> = fields[2..6].iter().map(|f| parse_f64(f, path, ln)).collect::<Result<_>>()?;
        if !(nums[2] > 0.0 && nums[3] > 0.0) {
            return Err(Error::NonPositiveBox { path: path.into(), line: ln });
        }
        let conf = fields.get(6).map(|f| parse_f64(f, path, ln)).transpose()?.unwrap_or(1.0);
        let class_id = match fields.get(7) {
            Some(f) => {
                let v = parse_f64(f, path, ln)?;
                if v.fract() != 0.0 {
                    return Err(Error::Parse { path: path.into(), line: ln, msg: format!("non-integer class {v}") });
                }
                v as i32
            }
            None => -1,
        };
        let visibility = fields.get(8).map(|f| parse_f64(f, path, ln)).transpose()?.unwrap_or(1.0);
        Ok(Self {
            frame,
            id: id as i64,
            left: nums[0],
            top: nums[1],
            width: nums[2],
            height: nums[3],
            conf,
            class_id,
            visibility,
            extra: fields.iter().skip(9).map(|s| s.to_string()).collect(),
        })
    }
}

pub fn read_mot(path: &Path) -> Result<Vec<MotRecord>> {
    let text = read_text(path)?;
    content_lines(&text).map(|(ln, l)| MotRecord::parse(l, path, ln)).collect()
}

/// Writes records sorted by frame (stable within a frame), always with at
/// least nine fields.
pub fn write_mot(records: &[MotRecord], path: &Path) -> Result<()> {
    let mut sorted: Vec<&MotRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.frame);
    let mut s = String::new();
    for r in sorted {
        write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, r.left, r.top, r.width, r.height, r.conf, r.class_id, r.visibility
        )
        .unwrap();
        for e in &r.extra {
            write!(s, ",{e}").unwrap();
        }
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn records_to_boxes(records: &[MotRecord]) -> Result<FrameBoxes> {
    let mut out = FrameBoxes::new();
    for r in records {
        out.entry(r.frame).or_default().push(TrackedBox { id: r.id, bbox: r.bbox()?, class_id: r.class_id });
    }
    Ok(out)
}

pub fn records_from_boxes(boxes: &FrameBoxes) -> Vec<MotRecord> {
    boxes
        .iter()
        .flat_map(|(&frame, v)| {
            v.iter().map(move |b| MotRecord {
                frame,
                id: b.id,
                left: b.bbox.left,
                top: b.bbox.top,
                width: b.bbox.width,
                height: b.bbox.height,
                conf: 1.0,
                class_id: b.class_id,
                visibility: 1.0,
                extra: Vec::new(),
            })
        })
        .collect()
}

pub fn records_from_detections(dets: &BTreeMap<usize, Vec<Detection>>) -> Vec<MotRecord> {
    dets.iter()
        .flat_map(|(&frame, v)| {
            v.iter().map(move |d| MotRecord {
                frame,
                id: -1,
                left: d.bbox.left,
                top: d.bbox.top,
                width: d.bbox.width,
                height: d.bbox.height,
                conf: d.confidence,
                class_id: d.class_id,
                visibility: 1.0,
                extra: Vec::new(),
            })
        })
        .collect()
}

/// Groups records into per-frame detections; detection `i` of a frame is
/// its `i`-th record in file order and takes embedding `(frame, i)`.
pub fn detections_from_records(
    records: &[MotRecord],
    embeddings: Option<&EmbeddingMap>,
) -> Result<BTreeMap<usize, Vec<Detection>>> {
    let mut out: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    for r in records {
        let list = out.entry(r.frame).or_default();
        let embedding = embeddings.and_then(|m| m.get(&(r.frame, list.len())).cloned());
        list.push(Detection {
            frame: r.frame,
            bbox: r.bbox()?,
            confidence: r.conf.clamp(0.0, 1.0),
            class_id: r.class_id,
            embedding,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(l: &str) -> Result<MotRecord> {
        MotRecord::parse(l, Path::new("x"), 3)
    }

    #[test]
    fn full_and_short_records() {
        let r = parse("1,3,10,20,30,40,0.9,1,1").unwrap();
        assert_eq!((r.frame, r.id, r.class_id), (1, 3, 1));
        assert_eq!((r.left, r.top, r.width, r.height, r.conf), (10.0, 20.0, 30.0, 40.0, 0.9));
        let d = parse("1,-1,10,20,30,40,0.9").unwrap();
        assert_eq!((d.id, d.class_id, d.visibility), (-1, -1, 1.0));
        let e = parse("2,5,1,2,3,4,1,-1,-1,-1").unwrap();
        assert_eq!(e.extra, vec!["-1".to_string()]);
    }

    #[test]
    fn rejections() {
        assert!(matches!(parse("1,3,10,20,0,40"), Err(Error::NonPositiveBox { line: 3, .. })));
        assert!(matches!(parse("1,3,10,20,5"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("1,3,NaN,20,5,5"), Err(Error::Parse { .. })));
        assert!(matches!(parse("1,3,inf,20,5,5"), Err(Error::Parse { .. })));
        assert!(matches!(parse("0,3,1,20,5,5"), Err(Error::Parse { .. })));
        assert!(matches!(parse("1,3,1,2,5,5,0.5,1.5"), Err(Error::Parse { .. })));
    }

    #[test]
    fn write_sorts_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let recs = vec![parse("2,1,1.5,2,3,4,0.5,1,1,extra").unwrap(), parse("1,-1,0.1,0.2,3,4").unwrap()];
        write_mot(&recs, &p).unwrap();
        let back = read_mot(&p).unwrap();
        assert_eq!(back, vec![recs[1].clone(), recs[0].clone()]);
        assert!(read_text(&p).unwrap().starts_with("1,-1,0.1,0.2,3,4,1,-1,1\n"));
    }
}
