//! `ddet` subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use ddet_core::cdf::{cdf_gamma_sweep, synthetic_logit_population, CdfCurve};
use ddet_core::data::{LabelMap, Sample};
use ddet_core::eval::{evaluate, fps_benchmark, ApMethod, Clock, EvalResult, FpsStats, FrameDetection, FrameGt};
use ddet_core::losses::ClsMode;
use ddet_core::model::{infer_heads, postprocess, predict, Detection, DetectorConfig, Params};
use ddet_core::render::{render_detections, PALETTE};
use ddet_core::tensor::Tensor;
use ddet_core::train::{fit, labeled_logits, FitOptions, Trainer};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{load_frames, load_labels, write_synthetic, Frame};
use crate::error::{Error, IoContext, Result};
use crate::ppm::encode_ppm;
use crate::report;

/// Linear warmup length applied by `--preset desk`.
pub const DESK_WARMUP_STEPS: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "ddet",
    version,
    about = "Dense one-stage object detector: training, evaluation and diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic shapes dataset (train and test splits)
    Synth(SynthArgs),
    /// Train a detector and write checkpoints plus a loss log
    Train(TrainArgs),
    /// Evaluate a checkpoint: per-class AP, mAP and PR points
    Eval(EvalArgs),
    /// Run a checkpoint on dataset frames and write detections and overlays
    Detect(DetectArgs),
    /// Measure single-image inference throughput
    Bench(BenchArgs),
    /// Cumulative distribution of normalized focal loss over a gamma sweep
    Cdf(CdfArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output root; splits go to <OUT>/train and <OUT>/test
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// Generator seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Training images
    #[arg(long, default_value_t = 500)]
    pub num_images: usize,
    /// Held-out test images
    #[arg(long, default_value_t = 50)]
    pub num_test: usize,
    /// Image side in pixels (multiple of 16)
    #[arg(long, default_value_t = 64)]
    pub image_size: usize,
    /// Run configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_cls_mode(s: &str) -> std::result::Result<ClsMode, String> {
    ClsMode::parse(s).ok_or_else(|| format!("expected focal, hard_negative_ce or plain_ce, got '{s}'"))
}

/// Comma-separated list of focusing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gammas(pub Vec<f64>);

fn parse_gammas(s: &str) -> std::result::Result<Gammas, String> {
    let gammas: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    if gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err("gammas must be finite and non-negative".into());
    }
    Ok(Gammas(gammas))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset root
    #[arg(long, default_value = "data/train")]
    pub data: PathBuf,
    /// Output directory for checkpoints and the loss log
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
    /// Run configuration file; command-line flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named settings bundle: none, or desk (linear warmup over the first 200 steps)
    #[arg(long, default_value = "none", value_parser = ["none", "desk"])]
    pub preset: String,
    /// Classification loss: focal, hard_negative_ce or plain_ce
    #[arg(long, default_value = "focal", value_parser = parse_cls_mode)]
    pub cls_mode: ClsMode,
    /// Optimization steps
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Images per step
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Base learning rate
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    /// SGD momentum
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// L2 weight decay
    #[arg(long, default_value_t = 0.0001)]
    pub weight_decay: f64,
    /// Linear warmup steps
    #[arg(long, default_value_t = 0)]
    pub warmup_steps: usize,
    /// Focusing parameter gamma
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    /// Foreground weight alpha
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    /// Seed for initialization, sampling order and augmentation
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep objects flagged lost as training targets
    #[arg(long)]
    pub include_lost: bool,
    /// Steps between periodic checkpoints
    #[arg(long, default_value_t = 500)]
    pub checkpoint_every: usize,
    /// Continue from a checkpoint written by train
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate
    #[arg(long, default_value = "runs/train/checkpoint.ddet")]
    pub checkpoint: PathBuf,
    /// Evaluation dataset root
    #[arg(long, default_value = "data/test")]
    pub data: PathBuf,
    /// Output directory for eval.csv, pr.csv and detections.csv
    #[arg(long, default_value = "runs/eval")]
    pub out: PathBuf,
    /// IoU needed for a true positive
    #[arg(long, default_value_t = 0.5)]
    pub iou_threshold: f64,
    /// Use 11-point interpolated AP instead of all-point
    #[arg(long)]
    pub eleven_point: bool,
    /// Minimum detection score
    #[arg(long, default_value_t = 0.05)]
    pub score_thr: f64,
    /// Count objects flagged lost as ground truth
    #[arg(long)]
    pub include_lost: bool,
    /// Run configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Checkpoint to run
    #[arg(long, default_value = "runs/train/checkpoint.ddet")]
    pub checkpoint: PathBuf,
    /// Dataset root holding the frames
    #[arg(long, default_value = "data/test")]
    pub data: PathBuf,
    /// Output directory for detections.csv and overlays/
    #[arg(long, default_value = "runs/detect")]
    pub out: PathBuf,
    /// Minimum detection score
    #[arg(long, default_value_t = 0.05)]
    pub score_thr: f64,
    /// Box outline width in pixels for the raster overlay
    #[arg(long, default_value_t = 2)]
    pub line_width: usize,
    /// Run configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint to time
    #[arg(long, default_value = "runs/train/checkpoint.ddet")]
    pub checkpoint: PathBuf,
    /// Dataset root supplying the images, used in turn
    #[arg(long, default_value = "data/test")]
    pub data: PathBuf,
    /// Output directory for fps.csv and fps_runs.csv
    #[arg(long, default_value = "runs/bench")]
    pub out: PathBuf,
    /// Untimed runs before measuring
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    /// Timed single-image runs
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    /// Time only backbone and heads, without decoding and NMS
    #[arg(long)]
    pub exclude_postprocess: bool,
    /// Run configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CdfArgs {
    /// Checkpoint whose logits on --data form the populations; without it a
    /// seeded synthetic logit population is used
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset root used with --checkpoint
    #[arg(long, default_value = "data/test")]
    pub data: PathBuf,
    /// Output directory for cdf.csv
    #[arg(long, default_value = "runs/cdf")]
    pub out: PathBuf,
    /// Comma-separated focusing parameters
    #[arg(long, default_value = "0,0.5,1,2", value_parser = parse_gammas)]
    pub gammas: Gammas,
    /// Foreground weight alpha
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    /// Background samples of the synthetic population
    #[arg(long, default_value_t = 10000)]
    pub n_background: usize,
    /// Foreground samples of the synthetic population
    #[arg(long, default_value_t = 100)]
    pub n_foreground: usize,
    /// Seed of the synthetic population
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Points kept per curve, evenly spaced; 0 keeps all
    #[arg(long, default_value_t = 0)]
    pub max_points: usize,
    /// Count objects flagged lost as foreground
    #[arg(long)]
    pub include_lost: bool,
    /// Run configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code: 0 success, 1 usage error, 2 data or model error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = Cli::from_arg_matches(&matches)
        .map_err(|e| Error::Usage(e.to_string()))
        .and_then(|cli| {
            let (_, sub) = matches.subcommand().expect("subcommand is required");
            dispatch(cli.command, sub)
        });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, m: &ArgMatches) -> Result<()> {
    match command {
        Command::Synth(a) => synth(&a, m),
        Command::Train(a) => train(&a, m),
        Command::Eval(a) => eval(&a, m),
        Command::Detect(a) => detect(&a, m),
        Command::Bench(a) => bench(&a),
        Command::Cdf(a) => cdf(&a),
    }
}

fn given(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::parse(&fs::read_to_string(p).at(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).at(path)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).at(path)
}

/// Explicit config labels, else the dataset's `labels.txt`, else SDD.
fn resolve_labels(cfg: &RunConfig, root: &Path) -> Result<LabelMap> {
    if cfg.data.labels.is_empty() {
        load_labels(root)
    } else {
        Ok(LabelMap::new(&cfg.data.labels)?)
    }
}

struct Loaded {
    labels: LabelMap,
    frames: Vec<Frame>,
    samples: Vec<Sample>,
}

fn load_dataset(cfg: &RunConfig, root: &Path) -> Result<Loaded> {
    let labels = resolve_labels(cfg, root)?;
    let frames = load_frames(root, &labels, cfg.detector.pyramid.max_stride())?;
    let samples = frames
        .iter()
        .map(|f| f.to_sample(&cfg.data.norm))
        .collect::<Result<Vec<_>>>()?;
    Ok(Loaded {
        labels,
        frames,
        samples,
    })
}

/// Model parameters from a checkpoint, checked against the label count.
fn load_model(path: &Path, cfg: &RunConfig, labels: &LabelMap) -> Result<(Params<f32>, DetectorConfig)> {
    let params = Checkpoint::load(path)?.params();
    let detector = DetectorConfig {
        num_classes: labels.len(),
        ..cfg.detector.clone()
    };
    let k = params.num_classes(&detector.pyramid)?;
    if k != labels.len() {
        return Err(Error::Dataset(format!(
            "{} predicts {k} classes but the dataset defines {} ({})",
            path.display(),
            labels.len(),
            labels.names().join(", ")
        )));
    }
    params.check(&detector)?;
    Ok((params, detector))
}

fn batch_of_one(sample: &Sample) -> Result<Tensor<f32>> {
    let [c, h, w] = [3, sample.height(), sample.width()];
    Ok(sample.image.clone().reshape([1, c, h, w])?)
}

fn synth(a: &SynthArgs, m: &ArgMatches) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if given(m, "seed") {
        cfg.synth.seed = a.seed;
    }
    if given(m, "num_images") {
        cfg.synth.num_images = a.num_images;
    }
    if given(m, "num_test") {
        cfg.num_test = a.num_test;
    }
    if given(m, "image_size") {
        cfg.synth.image_size = a.image_size;
    }
    cfg.synth.validate()?;
    let (n_train, n_test) = write_synthetic(&a.out, &cfg.synth, cfg.num_test)?;
    println!(
        "wrote {n_train} train and {n_test} test frames ({0}x{0}, seed {1}) to {2}",
        cfg.synth.image_size,
        cfg.synth.seed,
        a.out.display()
    );
    Ok(())
}

fn train(a: &TrainArgs, m: &ArgMatches) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if a.preset == "desk" {
        cfg.optim.warmup_steps = DESK_WARMUP_STEPS;
    }
    if given(m, "cls_mode") {
        cfg.cls_mode = a.cls_mode;
    }
    if given(m, "steps") {
        cfg.optim.steps = a.steps;
    }
    if given(m, "batch_size") {
        cfg.optim.batch_size = a.batch_size;
    }
    if given(m, "learning_rate") {
        cfg.optim.learning_rate = a.learning_rate;
    }
    if given(m, "momentum") {
        cfg.optim.momentum = a.momentum;
    }
    if given(m, "weight_decay") {
        cfg.optim.weight_decay = a.weight_decay;
    }
    if given(m, "warmup_steps") {
        cfg.optim.warmup_steps = a.warmup_steps;
    }
    if given(m, "gamma") {
        cfg.loss.gamma = a.gamma;
    }
    if given(m, "alpha") {
        cfg.loss.alpha = a.alpha;
    }
    if given(m, "seed") {
        cfg.optim.seed = a.seed;
    }
    if a.include_lost {
        cfg.data.include_lost = true;
    }
    if given(m, "checkpoint_every") {
        cfg.checkpoint_every = a.checkpoint_every;
    }
    let data = if given(m, "data") {
        a.data.clone()
    } else {
        PathBuf::from(&cfg.paths.train_dir)
    };
    let out = if given(m, "out") {
        a.out.clone()
    } else {
        Path::new(&cfg.paths.output_dir).join("train")
    };
    cfg.validate()?;

    let ds = load_dataset(&cfg, &data)?;
    let detector = DetectorConfig {
        num_classes: ds.labels.len(),
        ..cfg.detector.clone()
    };
    let train_cfg = cfg.train_config();
    let (params, resumed) = match &a.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let state = ck
                .training_state()
                .ok_or_else(|| Error::Checkpoint(format!("{} has no optimizer state to resume from", p.display())))?;
            (ck.params(), Some(state))
        }
        None => (Params::init(&detector, train_cfg.seed)?, None),
    };
    let mut trainer = Trainer::new(params, detector, train_cfg, cfg.loss, cfg.cls_mode)?;
    if let Some((state, step)) = resumed {
        trainer.state = state;
        trainer.step = step;
    }

    create_dir(&out)?;
    write_file(&out.join("config.txt"), &cfg.to_text())?;
    let log_path = out.join("loss_log.csv");
    let mut log = if resumed_log(&a.resume, &log_path) {
        fs::OpenOptions::new().append(true).open(&log_path).at(&log_path)?
    } else {
        let mut f = fs::File::create(&log_path).at(&log_path)?;
        f.write_all(report::LOSS_LOG_HEADER.as_bytes()).at(&log_path)?;
        f
    };
    let opts = FitOptions {
        hflip: cfg.data.hflip,
        include_lost: cfg.data.include_lost,
    };
    let started = Instant::now();
    let mut last = None;
    fit(&mut trainer, &ds.samples, opts, |t, r| -> Result<()> {
        if t.step % cfg.log_every == 0 {
            log.write_all(report::loss_log_row(t.step, r).as_bytes())
                .at(&log_path)?;
        }
        if t.step % cfg.checkpoint_every == 0 && t.step < t.train.steps {
            let path = out.join(format!("checkpoint_step{:06}.ddet", t.step));
            Checkpoint::from_training(&t.params, Some((&t.state, t.step))).save(&path)?;
        }
        last = Some(r.clone());
        Ok(())
    })?;
    log.flush().at(&log_path)?;
    let path = out.join("checkpoint.ddet");
    Checkpoint::from_training(&trainer.params, Some((&trainer.state, trainer.step))).save(&path)?;
    if let Some(r) = last {
        println!(
            "step {}: loss {:.6} (cls {:.6}, reg {:.6}) in {:.1}s; wrote {}",
            trainer.step,
            r.total,
            r.cls,
            r.reg,
            started.elapsed().as_secs_f64(),
            path.display()
        );
    } else {
        println!("nothing to do: checkpoint is already at step {}", trainer.step);
    }
    Ok(())
}

fn resumed_log(resume: &Option<PathBuf>, log: &Path) -> bool {
    resume.is_some() && log.exists()
}

/// Detections per frame, keyed by frame source.
pub type FrameDetections = Vec<(String, Vec<Detection>)>;

/// Detections on every sample and their evaluation against its targets.
pub fn evaluate_samples(
    params: &Params<f32>,
    detector: &DetectorConfig,
    samples: &[Sample],
    include_lost: bool,
    iou_threshold: f64,
    method: ApMethod,
) -> Result<(EvalResult, FrameDetections)> {
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    let mut per_frame = Vec::new();
    for (f, s) in samples.iter().enumerate() {
        let found = predict(params, &batch_of_one(s)?, detector)?;
        dets.extend(found.iter().map(|&d| FrameDetection { frame: f, detection: d }));
        gts.extend(s.gt.targets(include_lost).map(|o| FrameGt {
            frame: f,
            bbox: o.bbox,
            class_id: o.class_id,
        }));
        per_frame.push((s.source.clone(), found));
    }
    let result = evaluate(&dets, &gts, detector.num_classes, iou_threshold, method)?;
    Ok((result, per_frame))
}

fn eval(a: &EvalArgs, m: &ArgMatches) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if given(m, "iou_threshold") {
        cfg.eval.iou_threshold = a.iou_threshold;
    }
    if a.eleven_point {
        cfg.eval.eleven_point = true;
    }
    if given(m, "score_thr") {
        cfg.detector.score_thr = a.score_thr;
    }
    if a.include_lost {
        cfg.data.include_lost = true;
    }
    let data = if given(m, "data") {
        a.data.clone()
    } else {
        PathBuf::from(&cfg.paths.test_dir)
    };
    cfg.validate()?;
    let ds = load_dataset(&cfg, &data)?;
    let (params, detector) = load_model(&a.checkpoint, &cfg, &ds.labels)?;

    let method = if cfg.eval.eleven_point {
        ApMethod::ElevenPoint
    } else {
        ApMethod::AllPoint
    };
    let (result, per_frame) = evaluate_samples(
        &params,
        &detector,
        &ds.samples,
        cfg.data.include_lost,
        cfg.eval.iou_threshold,
        method,
    )?;

    create_dir(&a.out)?;
    write_file(&a.out.join("eval.csv"), &report::eval_csv(&result, &ds.labels))?;
    write_file(&a.out.join("pr.csv"), &report::pr_csv(&result, &ds.labels))?;
    let rows = per_frame
        .iter()
        .flat_map(|(src, ds)| ds.iter().map(move |d| (src.as_str(), d)));
    write_file(&a.out.join("detections.csv"), &report::detections_csv(rows, &ds.labels))?;
    for (&id, c) in &result.per_class {
        println!(
            "{:<12} AP {:.4}  n_gt {}",
            ds.labels.name(id).unwrap_or("?"),
            c.ap,
            c.n_gt
        );
    }
    println!("mAP@{} = {:.4}", cfg.eval.iou_threshold, result.map);
    Ok(())
}

fn detect(a: &DetectArgs, m: &ArgMatches) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if given(m, "score_thr") {
        cfg.detector.score_thr = a.score_thr;
    }
    cfg.validate()?;
    let ds = load_dataset(&cfg, &a.data)?;
    let (params, detector) = load_model(&a.checkpoint, &cfg, &ds.labels)?;
    let overlays = a.out.join("overlays");
    create_dir(&overlays)?;
    let mut per_frame = Vec::new();
    for (frame, s) in ds.frames.iter().zip(&ds.samples) {
        let found: Vec<Detection> = predict(&params, &batch_of_one(s)?, &detector)?;
        let dir = overlays.join(&frame.video);
        create_dir(&dir)?;
        let stem = frame.gt.frame_index.to_string();
        let raster = render_detections(&frame.image, &found, &PALETTE, a.line_width);
        let ppm = dir.join(format!("{stem}.ppm"));
        fs::write(&ppm, encode_ppm(&raster)?).at(&ppm)?;
        let svg = report::overlay_svg(s.width(), s.height(), &found, &ds.labels);
        write_file(&dir.join(format!("{stem}.svg")), &svg)?;
        per_frame.push((s.source.clone(), found));
    }
    let rows = per_frame
        .iter()
        .flat_map(|(src, d)| d.iter().map(move |d| (src.as_str(), d)));
    write_file(&a.out.join("detections.csv"), &report::detections_csv(rows, &ds.labels))?;
    let n: usize = per_frame.iter().map(|(_, d)| d.len()).sum();
    println!(
        "{n} detections on {} frames; wrote {}",
        per_frame.len(),
        a.out.display()
    );
    Ok(())
}

/// Wall clock for real measurements.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Times single-image inference over `images` in turn.
pub fn bench_model<C: Clock>(
    params: &Params<f32>,
    detector: &DetectorConfig,
    images: &[Tensor<f32>],
    warmup: usize,
    runs: usize,
    exclude_postprocess: bool,
    clock: &mut C,
) -> Result<FpsStats> {
    if images.is_empty() {
        return Err(Error::Dataset("no images to benchmark".into()));
    }
    let mut i = 0;
    fps_benchmark(
        || -> Result<()> {
            let image = &images[i % images.len()];
            i += 1;
            let heads = infer_heads(params, image, detector)?;
            if !exclude_postprocess {
                std::hint::black_box(postprocess(&heads, detector));
            }
            std::hint::black_box(&heads);
            Ok(())
        },
        clock,
        warmup,
        runs,
    )
}

fn bench(a: &BenchArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    cfg.validate()?;
    let ds = load_dataset(&cfg, &a.data)?;
    let (params, detector) = load_model(&a.checkpoint, &cfg, &ds.labels)?;
    let images = ds.samples.iter().map(batch_of_one).collect::<Result<Vec<_>>>()?;
    let stats = bench_model(
        &params,
        &detector,
        &images,
        a.warmup,
        a.runs,
        a.exclude_postprocess,
        &mut WallClock::new(),
    )?;
    create_dir(&a.out)?;
    let (summary, runs) = report::fps_csv(&stats);
    write_file(&a.out.join("fps.csv"), &summary)?;
    write_file(&a.out.join("fps_runs.csv"), &runs)?;
    println!(
        "{:.2} +/- {:.2} FPS over {} runs ({} warmup, postprocess {})",
        stats.mean_fps,
        stats.std_fps,
        stats.measured_runs,
        stats.warmup_runs,
        if a.exclude_postprocess { "excluded" } else { "included" }
    );
    Ok(())
}

fn cdf(a: &CdfArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    cfg.validate()?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Usage("alpha must lie in (0, 1)".into()));
    }
    let samples = match &a.checkpoint {
        Some(ck) => {
            let ds = load_dataset(&cfg, &a.data)?;
            let (params, detector) = load_model(ck, &cfg, &ds.labels)?;
            labeled_logits(&params, &ds.samples, &detector, a.include_lost)?
        }
        None => synthetic_logit_population(a.n_background, a.n_foreground, a.seed),
    };
    let curves: Vec<CdfCurve> = cdf_gamma_sweep(&samples, &a.gammas.0, a.alpha)?;
    create_dir(&a.out)?;
    write_file(&a.out.join("cdf.csv"), &report::cdf_csv(&curves, a.max_points))?;
    for c in &curves {
        println!(
            "gamma {:<4} {:<10} bottom 90% share {:.6}",
            c.gamma,
            c.population.name(),
            c.share_at(0.9)
        );
    }
    println!("{} curves written to {}", curves.len(), a.out.join("cdf.csv").display());
    Ok(())
}
