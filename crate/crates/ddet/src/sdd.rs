//! Stanford Drone Dataset annotation files.
//!
//! One observation per line:
//! `track_id xmin ymin xmax ymax frame lost occluded generated "label"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ddet_core::boxes::BBox;
use ddet_core::data::{GroundTruthFrame, GtObject, LabelMap};

use crate::error::{Error, Result};

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::Annotation {
        line,
        reason: reason.into(),
    }
}

fn flag(line: usize, name: &str, v: i64) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(bad(line, format!("{name} must be 0 or 1, got {v}"))),
    }
}

/// Parses one non-empty line (1-based `line` for messages).
pub fn parse_line(text: &str, line: usize, labels: &LabelMap) -> Result<(u64, GtObject)> {
    let text = text.trim();
    let (fields, label) = match text.find('"') {
        Some(q) => {
            let rest = &text[q + 1..];
            let label = rest.strip_suffix('"').filter(|l| !l.contains('"')).ok_or_else(|| {
                bad(
                    line,
                    "label must be a single double-quoted string at the end of the line",
                )
            })?;
            (&text[..q], label)
        }
        None => {
            let n = text.split_whitespace().count();
            return Err(if n == 10 {
                bad(line, "label is not double-quoted")
            } else {
                bad(line, format!("expected 10 fields, found {n}"))
            });
        }
    };
    let fields: Vec<&str> = fields.split_whitespace().collect();
    if fields.len() != 9 {
        return Err(bad(line, format!("expected 10 fields, found {}", fields.len() + 1)));
    }
    let mut v = [0i64; 9];
    for (i, f) in fields.iter().enumerate() {
        v[i] = f
            .parse()
            .map_err(|_| bad(line, format!("field {} is not an integer: {f:?}", i + 1)))?;
    }
    let [track_id, x1, y1, x2, y2, frame, lost, occluded, generated] = v;
    if frame < 0 {
        return Err(bad(line, format!("negative frame index {frame}")));
    }
    if x2 < x1 || y2 < y1 {
        return Err(bad(line, format!("box ({x1},{y1},{x2},{y2}) has negative extent")));
    }
    let class_id = labels.id_of(label).ok_or_else(|| Error::UnknownLabel {
        line,
        label: label.to_string(),
        known: labels.names().join(", "),
    })?;
    Ok((
        frame as u64,
        GtObject {
            bbox: BBox::new(x1 as f64, y1 as f64, x2 as f64, y2 as f64),
            class_id,
            track_id,
            lost: flag(line, "lost", lost)?,
            occluded: flag(line, "occluded", occluded)?,
            generated: flag(line, "generated", generated)?,
        },
    ))
}

/// Groups every observation by frame, keeping file order within a frame.
pub fn parse_sdd_annotations(text: &str, labels: &LabelMap) -> Result<BTreeMap<u64, GroundTruthFrame>> {
    let mut frames: BTreeMap<u64, GroundTruthFrame> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let (frame, object) = parse_line(raw, i + 1, labels)?;
        frames
            .entry(frame)
            .or_insert_with(|| GroundTruthFrame {
                frame_index: frame,
                objects: Vec::new(),
            })
            .objects
            .push(object);
    }
    Ok(frames)
}

fn coord(v: f64) -> Result<i64> {
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::Dataset(format!("box coordinate {v} is not an integer")));
    }
    Ok(v as i64)
}

/// Canonical text: frames ascending, objects in stored order, single spaces.
pub fn serialize_sdd<'a>(frames: impl IntoIterator<Item = &'a GroundTruthFrame>, labels: &LabelMap) -> Result<String> {
    let mut out = String::new();
    let mut sorted: Vec<&GroundTruthFrame> = frames.into_iter().collect();
    sorted.sort_by_key(|f| f.frame_index);
    for f in sorted {
        for o in &f.objects {
            let name = labels
                .name(o.class_id)
                .ok_or_else(|| Error::Dataset(format!("class id {} has no label", o.class_id)))?;
            let b = o.bbox;
            writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} \"{}\"",
                o.track_id,
                coord(b.x1)?,
                coord(b.y1)?,
                coord(b.x2)?,
                coord(b.y2)?,
                f.frame_index,
                o.lost as u8,
                o.occluded as u8,
                o.generated as u8,
                name
            )
            .expect("write to string");
        }
    }
    Ok(out)
}
