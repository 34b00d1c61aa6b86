//! Run configuration: `[section]` headers, `key = value` lines and `#`
//! comments. Later duplicates win; unknown sections and keys are errors.

use std::fmt::Write as _;

use ddet_core::data::{Normalization, SynthConfig};
use ddet_core::losses::{ClsMode, LossConfig};
use ddet_core::model::DetectorConfig;
use ddet_core::optim::TrainConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    /// Class names in id order; empty means `labels.txt` of the dataset, or
    /// the SDD table when that file is absent.
    pub labels: Vec<String>,
    pub include_lost: bool,
    pub hflip: f64,
    pub norm: Normalization,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            labels: Vec::new(),
            include_lost: false,
            hflip: 0.5,
            norm: Normalization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub eleven_point: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.5,
            eleven_point: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub train_dir: String,
    pub test_dir: String,
    pub output_dir: String,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            train_dir: "data/train".into(),
            test_dir: "data/test".into(),
            output_dir: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub optim: TrainConfig,
    pub loss: LossConfig,
    pub cls_mode: ClsMode,
    /// `num_classes` is filled in from the label map at run time.
    pub detector: DetectorConfig,
    pub synth: SynthConfig,
    pub num_test: usize,
    pub data: DataConfig,
    pub eval: EvalConfig,
    pub paths: PathConfig,
    pub checkpoint_every: usize,
    pub log_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            optim: TrainConfig::default(),
            loss: LossConfig::default(),
            cls_mode: ClsMode::Focal,
            detector: DetectorConfig::new(1),
            synth: SynthConfig::default(),
            num_test: 50,
            data: DataConfig::default(),
            eval: EvalConfig::default(),
            paths: PathConfig::default(),
            checkpoint_every: 500,
            log_every: 10,
        }
    }
}

trait Value: Sized {
    const KIND: &'static str;
    fn parse(s: &str) -> Option<Self>;
    fn render(&self) -> String;
}

macro_rules! display_value {
    ($($t:ty => $kind:literal),*) => {$(
        impl Value for $t {
            const KIND: &'static str = $kind;
            fn parse(s: &str) -> Option<Self> {
                s.parse().ok()
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_value!(f64 => "a number", f32 => "a number", usize => "an unsigned integer", u64 => "an unsigned integer", bool => "true or false");

impl Value for String {
    const KIND: &'static str = "a string";
    fn parse(s: &str) -> Option<Self> {
        Some(s.to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

impl Value for ClsMode {
    const KIND: &'static str = "focal, hard_negative_ce or plain_ce";
    fn parse(s: &str) -> Option<Self> {
        ClsMode::parse(s)
    }
    fn render(&self) -> String {
        self.name().to_string()
    }
}

impl<T: Value> Value for Vec<T> {
    const KIND: &'static str = "a comma-separated list";
    fn parse(s: &str) -> Option<Self> {
        if s.is_empty() {
            return Some(Vec::new());
        }
        s.split(',').map(|p| T::parse(p.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(T::render).collect::<Vec<_>>().join(",")
    }
}

impl Value for [f32; 3] {
    const KIND: &'static str = "three comma-separated numbers";
    fn parse(s: &str) -> Option<Self> {
        Vec::<f32>::parse(s)?.try_into().ok()
    }
    fn render(&self) -> String {
        self.to_vec().render()
    }
}

fn parse_value<T: Value>(raw: &str, line: usize, section: &str, key: &str) -> Result<T> {
    T::parse(raw).ok_or_else(|| Error::Config {
        line,
        reason: format!(
            "invalid value '{raw}' for key '{key}' in [{section}]: expected {}",
            T::KIND
        ),
    })
}

macro_rules! schema {
    ($($section:literal { $($key:literal => $($field:ident).+),* $(,)? })*) => {
        const SECTIONS: &[&str] = &[$($section),*];

        impl RunConfig {
            fn set(&mut self, section: &str, key: &str, raw: &str, line: usize) -> Result<()> {
                match (section, key) {
                    $($(($section, $key) => self.$($field).+ = parse_value(raw, line, section, key)?,)*)*
                    _ => {
                        return Err(Error::UnknownKey {
                            key: key.to_string(),
                            section: section.to_string(),
                        })
                    }
                }
                Ok(())
            }

            /// Canonical text listing every key; parses back to an equal config.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(
                    if !out.is_empty() {
                        out.push('\n');
                    }
                    writeln!(out, "[{}]", $section).expect("write to string");
                    $(writeln!(out, "{} = {}", $key, Value::render(&self.$($field).+)).expect("write to string");)*
                )*
                out
            }
        }
    };
}

schema! {
    "optim" {
        "learning_rate" => optim.learning_rate,
        "momentum" => optim.momentum,
        "weight_decay" => optim.weight_decay,
        "steps" => optim.steps,
        "batch_size" => optim.batch_size,
        "warmup_steps" => optim.warmup_steps,
        "seed" => optim.seed,
    }
    "loss" {
        "cls_mode" => cls_mode,
        "gamma" => loss.gamma,
        "alpha" => loss.alpha,
        "neg_pos_ratio" => loss.neg_pos_ratio,
        "smooth_l1_beta" => loss.smooth_l1_beta,
    }
    "anchors" {
        "strides" => detector.pyramid.strides,
        "base_sizes" => detector.pyramid.base_sizes,
        "scales" => detector.pyramid.scales,
        "ratios" => detector.pyramid.ratios,
        "feature_channels" => detector.pyramid.feature_channels,
        "pos_iou" => detector.matching.pos_thr,
        "neg_iou" => detector.matching.neg_thr,
    }
    "detector" {
        "score_thr" => detector.score_thr,
        "nms_iou" => detector.nms_iou,
        "max_detections" => detector.max_detections,
        "topk_per_level" => detector.topk_per_level,
    }
    "data" {
        "labels" => data.labels,
        "include_lost" => data.include_lost,
        "hflip" => data.hflip,
        "mean" => data.norm.mean,
        "std" => data.norm.std,
    }
    "synth" {
        "image_size" => synth.image_size,
        "num_images" => synth.num_images,
        "num_test" => num_test,
        "min_objects" => synth.min_objects,
        "max_objects" => synth.max_objects,
        "min_size" => synth.min_size,
        "max_size" => synth.max_size,
        "noise" => synth.noise,
        "max_overlap" => synth.max_overlap,
        "seed" => synth.seed,
    }
    "eval" {
        "iou_threshold" => eval.iou_threshold,
        "eleven_point" => eval.eleven_point,
    }
    "paths" {
        "train_dir" => paths.train_dir,
        "test_dir" => paths.test_dir,
        "output_dir" => paths.output_dir,
    }
    "run" {
        "checkpoint_every" => checkpoint_every,
        "log_every" => log_every,
    }
}

impl RunConfig {
    /// Applies `text` on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies `text` on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config {
                        line,
                        reason: format!("malformed section header '{content}'"),
                    })?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config {
                        line,
                        reason: format!("unknown section [{name}] (known: {})", SECTIONS.join(", ")),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected 'key = value', found '{content}'"),
            })?;
            let section = section.as_deref().ok_or_else(|| Error::Config {
                line,
                reason: format!("key '{}' appears before any [section]", key.trim()),
            })?;
            self.set(section, key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    /// Optimizer settings with gamma and alpha taken from the loss section.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            gamma: self.loss.gamma,
            alpha: self.loss.alpha,
            ..self.optim.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.loss.validate()?;
        self.synth.validate()?;
        DetectorConfig {
            num_classes: 1,
            ..self.detector.clone()
        }
        .validate()?;
        if !(0.0..=1.0).contains(&self.data.hflip) {
            return Err(Error::Usage("hflip must lie in [0, 1]".into()));
        }
        if self.data.norm.std.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::Usage("std must be positive per channel".into()));
        }
        if self.log_every == 0 || self.checkpoint_every == 0 {
            return Err(Error::Usage("log_every and checkpoint_every must be positive".into()));
        }
        Ok(())
    }
}
