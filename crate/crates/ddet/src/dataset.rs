//! On-disk dataset layout shared by SDD and the synthetic generator:
//!
//! ```text
//! <root>/labels.txt                          one class name per line (optional)
//! <root>/annotations/<video>/annotations.txt
//! <root>/frames/<video>/<frame-index>.ppm
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ddet_core::data::{
    center_crop_to_multiple, normalize_image, synth_generate, GroundTruthFrame, LabelMap, Normalization, Sample,
    SynthConfig, SynthImage,
};
use ddet_core::tensor::Tensor;

use crate::error::{Error, IoContext, Result};
use crate::ppm::{encode_ppm, load_ppm};
use crate::sdd::{parse_sdd_annotations, serialize_sdd};

pub const SYNTH_VIDEO: &str = "synth";

/// A frame as stored: raw `[0, 255]` pixels plus annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub video: String,
    pub image: Tensor<f32>,
    pub gt: GroundTruthFrame,
}

impl Frame {
    pub fn source(&self) -> String {
        format!("{}/{}", self.video, self.gt.frame_index)
    }

    pub fn to_sample(&self, norm: &Normalization) -> Result<Sample> {
        let sample = Sample {
            image: normalize_image(&self.image, norm)?,
            gt: self.gt.clone(),
            source: self.source(),
        };
        sample.check()?;
        Ok(sample)
    }
}

/// `labels.txt` of `root` if present, else the SDD table.
pub fn load_labels(root: &Path) -> Result<LabelMap> {
    let path = root.join("labels.txt");
    if !path.exists() {
        return Ok(LabelMap::sdd());
    }
    let text = fs::read_to_string(&path).at(&path)?;
    let names: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    Ok(LabelMap::new(&names)?)
}

fn sorted_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(path).at(path)? {
        let p = entry.at(path)?.path();
        if p.is_dir() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Every frame of every video, ordered by video name then frame index.
/// Frames are center-cropped to a multiple of `multiple` pixels.
pub fn load_frames(root: &Path, labels: &LabelMap, multiple: usize) -> Result<Vec<Frame>> {
    let frames_dir = root.join("frames");
    if !frames_dir.is_dir() {
        return Err(Error::Dataset(format!("{} has no frames/ directory", root.display())));
    }
    let mut out = Vec::new();
    for video_dir in sorted_dirs(&frames_dir)? {
        let video = video_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Dataset(format!("bad video directory {}", video_dir.display())))?
            .to_string();
        let ann_path = root.join("annotations").join(&video).join("annotations.txt");
        let mut annotations = if ann_path.exists() {
            let text = fs::read_to_string(&ann_path).at(&ann_path)?;
            parse_sdd_annotations(&text, labels).map_err(|e| Error::Dataset(format!("{}: {e}", ann_path.display())))?
        } else {
            Default::default()
        };
        let mut indexed = Vec::new();
        for entry in fs::read_dir(&video_dir).at(&video_dir)? {
            let p = entry.at(&video_dir)?.path();
            if p.extension().and_then(|e| e.to_str()) != Some("ppm") {
                continue;
            }
            let index: u64 = p
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Dataset(format!("frame file name is not an index: {}", p.display())))?;
            indexed.push((index, p));
        }
        indexed.sort();
        for (index, p) in indexed {
            let image = load_ppm(&fs::read(&p).at(&p)?).map_err(|e| Error::Dataset(format!("{}: {e}", p.display())))?;
            let gt = annotations.remove(&index).unwrap_or(GroundTruthFrame {
                frame_index: index,
                objects: Vec::new(),
            });
            let sample = Sample {
                image,
                gt,
                source: String::new(),
            };
            let cropped = center_crop_to_multiple(&sample, multiple)?;
            out.push(Frame {
                video: video.clone(),
                image: cropped.image,
                gt: cropped.gt,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Dataset(format!(
            "no frames found under {}",
            frames_dir.display()
        )));
    }
    Ok(out)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).at(parent)?;
    }
    fs::write(path, bytes).at(path)
}

/// Writes frames of one video plus its annotation file and `labels.txt`.
pub fn write_dataset(root: &Path, video: &str, images: &[SynthImage], labels: &LabelMap) -> Result<()> {
    let mut names = labels.names().join("\n");
    names.push('\n');
    write(&root.join("labels.txt"), names.as_bytes())?;
    for s in images {
        let path = root
            .join("frames")
            .join(video)
            .join(format!("{}.ppm", s.frame.frame_index));
        write(&path, &encode_ppm(&s.image)?)?;
    }
    let text = serialize_sdd(images.iter().map(|s| &s.frame), labels)?;
    write(
        &root.join("annotations").join(video).join("annotations.txt"),
        text.as_bytes(),
    )
}

/// Generates `num_images + num_test` frames from one seeded stream and writes
/// the first `num_images` to `out/train`, the rest to `out/test`.
pub fn write_synthetic(out: &Path, cfg: &SynthConfig, num_test: usize) -> Result<(usize, usize)> {
    let all = synth_generate(&SynthConfig {
        num_images: cfg.num_images + num_test,
        ..cfg.clone()
    })?;
    let (train, test) = all.split_at(cfg.num_images);
    let labels = LabelMap::synthetic();
    write_dataset(&out.join("train"), SYNTH_VIDEO, train, &labels)?;
    if !test.is_empty() {
        write_dataset(&out.join("test"), SYNTH_VIDEO, test, &labels)?;
    }
    Ok((train.len(), test.len()))
}
