//! Command-line interface. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 1 on a
//! runtime failure, 2 on a usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cascade::{
    sample_crops, score_detections, train_stage, BBox, Cascade, CascadeConfig, CropSet, Detection, DetectionScore,
};
use crate::convolve::{apply_bank, BorderMode};
use crate::data::pnm::{encode_pgm, image_to_pgm};
use crate::data::synth::{make_scene, make_synthetic_orientation_set, OrientationSpec, SceneSpec};
use crate::data::{load_image, read_manifest, split_folds, write_manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::experiment::{
    orientation_fold_plan, orientation_samples, split_samples, test_scenes, training_scenes, DetectionExperiment,
    OrientationExperiment,
};
use crate::fusion::{fuse, stack, FusionWeights};
use crate::gabor::{bank_to_text, make_bank, make_bank_explicit, Envelope, FilterBank, Preset, BANK_PHIS, BANK_THETAS};
use crate::image::Image;
use crate::models::{prepare_input, InputMode, Task};
use crate::nn::checkpoint::{checkpoint_bytes, read_checkpoint};
use crate::nn::gradcheck::run_suite;
use crate::nn::{evaluate, mix64, train, LrSchedule, Metric, Network, Sample, Target, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "gaborcnn", version, about = "Gabor filter bank features for small CNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print or save the 8 kernels of a preset bank.
    Kernel(KernelArgs),
    /// Write the bank responses of an image as PGM files.
    Respond(RespondArgs),
    /// Write the fused image `w_i I + sum_k w_k F_k`.
    Fuse(FuseArgs),
    /// Train a network and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the data it was trained with.
    Eval(EvalArgs),
    /// Run the detection cascade on an image.
    Detect(DetectArgs),
    /// Score detections against ground truth boxes.
    Score(ScoreArgs),
    /// Finite-difference check of every layer and loss.
    Gradcheck(GradcheckArgs),
    /// Generate synthetic images.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long, default_value = "age")]
    preset: Preset,
    #[arg(long, default_value = "petkov")]
    envelope: Envelope,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RespondArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "age")]
    preset: Preset,
    #[arg(long, default_value = "replicate")]
    border: BorderMode,
    #[arg(long)]
    outdir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scaling {
    /// Per-image min-max scaling to 0..=255.
    Minmax,
    /// Clamp to [0, 1] and quantize without rescaling.
    None,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "age")]
    preset: Preset,
    /// Comma-separated `w_i,w_1,...,w_8`; defaults to `1` and `1/8`.
    #[arg(long)]
    weights: Option<String>,
    /// Take the fusion weights from a checkpoint whose first layer fuses.
    #[arg(long, conflicts_with = "weights")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "minmax")]
    scale: Scaling,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    task: Task,
    #[arg(long = "input", default_value = "gf")]
    mode: InputMode,
    /// Bank preset; defaults to the task's own.
    #[arg(long)]
    preset: Option<Preset>,
    /// Dataset manifest for the age and gender tasks.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Synthetic orientation samples.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Synthetic orientation image side.
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Synthetic training scenes for the detection stages.
    #[arg(long, default_value_t = 300)]
    scenes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Held-out fold.
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Checkpoint path; run details go to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory holding `pnet.ckpt`, `rnet.ckpt` and `onet.ckpt`.
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    #[arg(long)]
    t3: Option<f64>,
    #[arg(long)]
    min_face: Option<f64>,
    #[arg(long)]
    factor: Option<f64>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Detection files (`x y w h score` per line), paired in order with `--truth`.
    #[arg(long, required = true)]
    detections: Vec<PathBuf>,
    /// Ground-truth files (`x y w h` per line).
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    configs: usize,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    /// Oriented stripe patches with a manifest.
    Orient,
    /// Scenes with one planted face and a box file each.
    Scenes,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long)]
    outdir: PathBuf,
}

/// Everything needed to rebuild a training run's data for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunInfo {
    task: Task,
    input: InputMode,
    preset: Preset,
    seed: u64,
    epochs: usize,
    batch: usize,
    lr: f64,
    data: DataSource,
    metric: String,
    /// Final validation metric, as printed.
    value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum DataSource {
    Orientation {
        spec: OrientationSpec,
        folds: usize,
        fold: usize,
    },
    Manifest {
        path: PathBuf,
        folds: usize,
        fold: usize,
    },
    Scenes {
        experiment: DetectionExperiment,
        stage: usize,
    },
}

/// Parse `argv` (including the program name) and run the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut out = String::new();
    let result = match cli.command {
        Command::Kernel(a) => kernel(a, &mut out),
        Command::Respond(a) => respond(a, &mut out),
        Command::Fuse(a) => fuse_cmd(a, &mut out),
        Command::Train(a) => train_cmd(a, &mut out),
        Command::Eval(a) => eval_cmd(a, &mut out),
        Command::Detect(a) => detect_cmd(a, &mut out),
        Command::Score(a) => score_cmd(a, &mut out),
        Command::Gradcheck(a) => gradcheck_cmd(a, &mut out),
        Command::Synth(a) => synth_cmd(a, &mut out),
    };
    print!("{out}");
    let _ = std::io::stdout().flush();
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParam(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

fn write_pgm_scaled(path: &Path, image: &Image, out: &mut String) -> Result<()> {
    let (bytes, lo, hi) = image.to_u8_minmax();
    write_atomic(path, &encode_pgm(image.width(), image.height(), &bytes)?)?;
    let _ = writeln!(out, "{} min {lo:.6} max {hi:.6}", path.display());
    Ok(())
}

fn kernel(a: KernelArgs, out: &mut String) -> Result<bool> {
    let bank = make_bank_explicit(
        &a.preset.base_params(),
        &BANK_THETAS,
        &BANK_PHIS,
        a.preset.kernel_size(),
        a.envelope,
    )?;
    let text = bank_to_text(&bank)?;
    match a.out {
        Some(p) => {
            write_atomic(&p, text.as_bytes())?;
            let _ = writeln!(out, "wrote {} kernels to {}", bank.len(), p.display());
        }
        None => out.push_str(&text),
    }
    Ok(true)
}

fn respond(a: RespondArgs, out: &mut String) -> Result<bool> {
    let img = load_image(&a.input)?;
    let bank = make_bank(a.preset);
    let responses = apply_bank(&img, &bank, a.border);
    fs::create_dir_all(&a.outdir)?;
    let params = bank.params().expect("preset banks carry parameters");
    for (k, (r, p)) in responses.channels().iter().zip(params).enumerate() {
        let name = format!(
            "response_{k}_theta{:.0}_phi{:.0}.pgm",
            p.theta().to_degrees(),
            p.phi().to_degrees()
        );
        write_pgm_scaled(&a.outdir.join(name), r, out)?;
    }
    Ok(true)
}

fn parse_weights(s: &str) -> Result<FusionWeights> {
    let w = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParam(format!("weight {t:?} is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    FusionWeights::from_slice(&w)
}

fn fuse_cmd(a: FuseArgs, out: &mut String) -> Result<bool> {
    let img = load_image(&a.input)?;
    let bank = make_bank(a.preset);
    let weights = match (&a.weights, &a.checkpoint) {
        (Some(s), _) => parse_weights(s)?,
        (None, Some(p)) => {
            let net = load_network(p)?;
            let w = net
                .fusion_weights()
                .ok_or_else(|| Error::InvalidParam(format!("{} has no fusion layer", p.display())))?;
            FusionWeights::from_slice(w)?
        }
        (None, None) => FusionWeights::initial(bank.len()),
    };
    let t = stack(&img, &apply_bank(&img, &bank, BorderMode::Replicate))?;
    let fused = fuse(&t, &weights)?;
    match a.scale {
        Scaling::Minmax => write_pgm_scaled(&a.out, &fused, out)?,
        Scaling::None => {
            write_atomic(&a.out, &image_to_pgm(&fused))?;
            let (lo, hi) = fused.min_max();
            let _ = writeln!(out, "{} unscaled, values min {lo:.6} max {hi:.6}", a.out.display());
        }
    }
    Ok(true)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_network(path: &Path) -> Result<Network> {
    read_checkpoint(&mut read_file(path)?.as_slice())
}

fn info_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn save_run(path: &Path, net: &Network, info: &RunInfo, out: &mut String) -> Result<()> {
    write_atomic(path, &checkpoint_bytes(net))?;
    write_atomic(&info_path(path), serde_json::to_string_pretty(info)?.as_bytes())?;
    let _ = writeln!(out, "saved {}", path.display());
    Ok(())
}

/// Images resized to the task's input size with their targets and subjects.
fn manifest_data(path: &Path, task: Task) -> Result<(Vec<Image>, Vec<Target>, Vec<String>)> {
    let entries = read_manifest(path)?;
    if entries.is_empty() {
        return Err(Error::Empty(format!("manifest {}", path.display())));
    }
    let size = task.input_size();
    let mut images = Vec::with_capacity(entries.len());
    let mut targets = Vec::with_capacity(entries.len());
    let mut subjects = Vec::with_capacity(entries.len());
    for (p, e) in entries {
        let img = load_image(&p)?;
        images.push(if (img.height(), img.width()) == (size, size) {
            img
        } else {
            img.resize(size, size)?
        });
        targets.push(match task {
            Task::AgeReg => Target::Value(e.label),
            Task::AgeClass | Task::Gender => {
                let c = e.class()?;
                if c >= task.classes() {
                    return Err(Error::InvalidParam(format!(
                        "label {c} of {} exceeds {} classes",
                        p.display(),
                        task.classes()
                    )));
                }
                Target::Class(c)
            }
            _ => return Err(Error::InvalidParam(format!("task {task} does not read manifests"))),
        });
        subjects.push(e.subject);
    }
    Ok((images, targets, subjects))
}

/// Prepared samples plus subjects for fold-based tasks.
fn fold_task_samples(task: Task, mode: InputMode, bank: &FilterBank, data: &DataSource) -> Result<(Vec<Sample>, Vec<String>)> {
    match data {
        DataSource::Orientation { spec, .. } => orientation_samples(spec, bank, mode),
        DataSource::Manifest { path, .. } => {
            let (images, targets, subjects) = manifest_data(path, task)?;
            let samples = images
                .iter()
                .zip(targets)
                .map(|(img, target)| {
                    Ok(Sample {
                        input: prepare_input(img, bank, mode)?,
                        target,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((samples, subjects))
        }
        DataSource::Scenes { .. } => Err(Error::InvalidParam("scene data has no folds".into())),
    }
}

fn fold_plan(info: &RunInfo, subjects: &[String]) -> Result<(crate::data::FoldPlan, usize)> {
    match &info.data {
        DataSource::Orientation { spec, folds, fold } => {
            let mut exp = OrientationExperiment::new(spec.clone(), info.input, info.seed);
            exp.folds = *folds;
            Ok((orientation_fold_plan(&exp, subjects)?, *fold))
        }
        DataSource::Manifest { folds, fold, .. } => Ok((
            split_folds(subjects.iter().map(String::as_str), *folds, mix64(info.seed ^ 0x5eed))?,
            *fold,
        )),
        DataSource::Scenes { .. } => Err(Error::InvalidParam("scene data has no folds".into())),
    }
}

fn stage_val_set<'a>(scenes: &'a [crate::data::synth::Scene], exp: &DetectionExperiment, stage: usize, bank: &'a FilterBank, mode: InputMode) -> Result<CropSet<'a>> {
    let window = exp.cascade.windows[stage];
    let crops = sample_crops(scenes, exp.training.stages[stage].mix, window as f64, mix64(exp.seed ^ 0xe7a1 ^ stage as u64));
    CropSet::new(scenes, crops, window, (mode != InputMode::Image).then_some(bank))
}

fn train_cmd(a: TrainArgs, out: &mut String) -> Result<bool> {
    let preset = a.preset.unwrap_or(a.task.preset());
    let bank = make_bank(preset);
    let loss = a.task.loss();
    match a.task {
        Task::PNet | Task::RNet | Task::ONet => {
            let stage = match a.task {
                Task::PNet => 0,
                Task::RNet => 1,
                _ => 2,
            };
            let mut exp = DetectionExperiment {
                train_scenes: a.scenes,
                seed: a.seed,
                ..Default::default()
            };
            let st = &mut exp.training.stages[stage];
            st.epochs = a.epochs.unwrap_or(st.epochs);
            st.batch_size = a.batch.unwrap_or(st.batch_size);
            st.lr = a.lr.unwrap_or(st.lr);
            let st = st.clone();
            let scenes = training_scenes(&exp)?;
            let window = exp.cascade.windows[stage];
            let (net, history) = train_stage(stage, &scenes, &st, a.mode, &bank, window, a.seed)?;
            for h in &history {
                let _ = writeln!(out, "{h}");
            }
            let val_scenes = test_scenes(&exp)?;
            let val = evaluate(&net, &stage_val_set(&val_scenes, &exp, stage, &bank, a.mode)?, loss)?;
            let _ = writeln!(out, "final val_{val}");
            let info = RunInfo {
                task: a.task,
                input: a.mode,
                preset,
                seed: a.seed,
                epochs: st.epochs,
                batch: st.batch_size,
                lr: st.lr,
                data: DataSource::Scenes { experiment: exp, stage },
                metric: val.name().into(),
                value: format!("{:.6}", val.value()),
            };
            save_run(&a.out, &net, &info, out)?;
        }
        _ => {
            let data = match a.task {
                Task::Orient => {
                    let mut spec = OrientationSpec::new(a.n, a.size, a.noise, a.seed);
                    spec.seed = mix64(a.seed ^ 0xda7a);
                    DataSource::Orientation {
                        spec,
                        folds: a.folds,
                        fold: a.fold,
                    }
                }
                _ => DataSource::Manifest {
                    path: a
                        .manifest
                        .clone()
                        .ok_or_else(|| Error::InvalidParam(format!("task {} needs --manifest", a.task)))?,
                    folds: a.folds,
                    fold: a.fold,
                },
            };
            let epochs = a.epochs.unwrap_or(30);
            let batch = a.batch.unwrap_or(32);
            let lr = a.lr.unwrap_or(0.01);
            let mut info = RunInfo {
                task: a.task,
                input: a.mode,
                preset,
                seed: a.seed,
                epochs,
                batch,
                lr,
                data,
                metric: String::new(),
                value: String::new(),
            };
            let (samples, subjects) = fold_task_samples(a.task, a.mode, &bank, &info.data)?;
            let (plan, fold) = fold_plan(&info, &subjects)?;
            let (train_set, val_set) = split_samples(samples, &subjects, &plan, fold)?;
            let size = train_set[0].input.shape().height;
            let mut net = a.task.build(a.mode, size, bank.len(), a.seed)?;
            let cfg = TrainConfig {
                lr: LrSchedule::step_decay(lr, epochs),
                ..TrainConfig::new(loss, epochs, batch, a.seed)
            };
            let val = (!val_set.is_empty()).then_some(&val_set);
            let history = train(&mut net, &train_set, val, &cfg)?;
            for h in &history {
                let _ = writeln!(out, "{h}");
            }
            let metric = match val {
                Some(v) => evaluate(&net, v, loss)?,
                None => evaluate(&net, &train_set, loss)?,
            };
            let _ = writeln!(out, "final val_{metric}");
            if let Some(w) = net.fusion_weights() {
                let ws: Vec<String> = w.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(out, "fusion weights {}", ws.join(" "));
            }
            info.metric = metric.name().into();
            info.value = format!("{:.6}", metric.value());
            save_run(&a.out, &net, &info, out)?;
        }
    }
    Ok(true)
}

fn eval_cmd(a: EvalArgs, out: &mut String) -> Result<bool> {
    let net = load_network(&a.checkpoint)?;
    let info: RunInfo = serde_json::from_slice(&read_file(&info_path(&a.checkpoint))?)?;
    let bank = make_bank(info.preset);
    let loss = info.task.loss();
    let report = |out: &mut String, label: &str, m: Metric| {
        let _ = writeln!(out, "{label} {m}");
    };
    let final_metric = match &info.data {
        DataSource::Scenes { experiment, stage } => {
            let scenes = test_scenes(experiment)?;
            let m = evaluate(&net, &stage_val_set(&scenes, experiment, *stage, &bank, info.input)?, loss)?;
            report(out, "val", m);
            m
        }
        _ => {
            let (samples, subjects) = fold_task_samples(info.task, info.input, &bank, &info.data)?;
            let (plan, held) = fold_plan(&info, &subjects)?;
            let mut held_metric = None;
            let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
            for f in 0..plan.k() {
                let (_, idx) = plan.partition(subjects.iter().map(String::as_str), f)?;
                let part: Vec<Sample> = idx.iter().map(|&i| slots[i].clone().expect("present")).collect();
                if part.is_empty() {
                    continue;
                }
                let m = evaluate(&net, &part, loss)?;
                let tag = if f == held { " (held out)" } else { "" };
                report(out, &format!("fold {f}{tag}"), m);
                if f == held {
                    held_metric = Some(m);
                }
            }
            slots.clear();
            held_metric.ok_or_else(|| Error::Empty("held-out fold".into()))?
        }
    };
    let _ = writeln!(out, "final val_{final_metric}");
    let now = format!("{:.6}", final_metric.value());
    if now != info.value {
        let _ = writeln!(out, "training run reported {} {}", info.metric, info.value);
    }
    Ok(true)
}

fn load_cascade(dir: &Path, cfg: CascadeConfig) -> Result<Cascade> {
    let p = load_network(&dir.join("pnet.ckpt"))?;
    let r = load_network(&dir.join("rnet.ckpt"))?;
    let o = load_network(&dir.join("onet.ckpt"))?;
    Cascade::new(p, r, o, make_bank(Preset::Detection), cfg)
}

pub fn format_detection(d: &Detection) -> String {
    format!(
        "{:.6} {:.6} {:.6} {:.6} {:.6}",
        d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.score
    )
}

fn detect_cmd(a: DetectArgs, out: &mut String) -> Result<bool> {
    let mut cfg = CascadeConfig::default();
    for (i, t) in [a.t1, a.t2, a.t3].into_iter().enumerate() {
        if let Some(t) = t {
            cfg.thresholds[i] = t;
        }
    }
    cfg.min_face = a.min_face.unwrap_or(cfg.min_face);
    cfg.factor = a.factor.unwrap_or(cfg.factor);
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    let cascade = load_cascade(&a.models, cfg)?;
    let img = load_image(&a.input)?;
    for d in cascade.detect(&img)? {
        let _ = writeln!(out, "{}", format_detection(&d));
    }
    Ok(true)
}

fn parse_numbers(path: &Path, per_line: &[usize]) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if !per_line.contains(&v.len()) {
            return Err(Error::Format(format!(
                "{}:{}: expected {per_line:?} numbers, found {}",
                path.display(),
                i + 1,
                v.len()
            )));
        }
        rows.push(v);
    }
    Ok(rows)
}

fn score_cmd(a: ScoreArgs, out: &mut String) -> Result<bool> {
    if a.detections.len() != a.truth.len() {
        return Err(Error::InvalidParam(format!(
            "{} detection files but {} truth files",
            a.detections.len(),
            a.truth.len()
        )));
    }
    let mut total = DetectionScore::default();
    for (dp, tp) in a.detections.iter().zip(&a.truth) {
        let dets = parse_numbers(dp, &[5])?
            .into_iter()
            .map(|v| Detection::new(BBox::new(v[0], v[1], v[2], v[3])?, v[4], [0.0; 4]))
            .collect::<Result<Vec<_>>>()?;
        let faces = parse_numbers(tp, &[4])?
            .into_iter()
            .map(|v| BBox::new(v[0], v[1], v[2], v[3]))
            .collect::<Result<Vec<_>>>()?;
        total.merge(&score_detections(&dets, &faces, a.iou));
    }
    let _ = writeln!(out, "faces {}", total.faces);
    let _ = writeln!(out, "detections {}", total.detections);
    let _ = writeln!(out, "true_positives {}", total.true_positives);
    let _ = writeln!(out, "false_positives {}", total.false_positives);
    let _ = writeln!(out, "discrete {:.6}", total.discrete());
    let _ = writeln!(out, "continuous {:.6}", total.continuous());
    Ok(true)
}

fn gradcheck_cmd(a: GradcheckArgs, out: &mut String) -> Result<bool> {
    let r = run_suite(a.seed, a.configs)?;
    for (desc, e) in &r.details {
        let _ = writeln!(out, "{desc} max_rel_error {e:.6e}");
    }
    let _ = writeln!(out, "configs {} derivatives {}", r.configs, r.checked);
    let _ = writeln!(out, "max_rel_error {:.6e}", r.max_rel_error);
    let ok = r.max_rel_error <= a.tolerance;
    let _ = writeln!(out, "{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn synth_cmd(a: SynthArgs, out: &mut String) -> Result<bool> {
    fs::create_dir_all(&a.outdir)?;
    match a.kind {
        SynthKind::Orient => {
            let spec = OrientationSpec::new(a.n, a.size, a.noise, a.seed);
            let set = make_synthetic_orientation_set(&spec)?;
            let mut entries = Vec::with_capacity(set.len());
            for (i, item) in set.iter().enumerate() {
                let name = format!("orient_{i:05}.pgm");
                write_atomic(&a.outdir.join(&name), &image_to_pgm(&item.image))?;
                entries.push(ManifestEntry {
                    path: name,
                    subject: item.subject.clone(),
                    label: item.label as f64,
                });
            }
            let mut buf = Vec::new();
            write_manifest(&mut buf, &entries)?;
            let manifest = a.outdir.join("manifest.jsonl");
            write_atomic(&manifest, &buf)?;
            let _ = writeln!(out, "wrote {} images and {}", set.len(), manifest.display());
        }
        SynthKind::Scenes => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
            let spec = SceneSpec::default();
            for i in 0..a.n {
                let scene = make_scene(&spec, true, &mut rng)?;
                let img = format!("scene_{i:04}.pgm");
                write_atomic(&a.outdir.join(&img), &image_to_pgm(&scene.image))?;
                let mut truth = String::new();
                for f in &scene.faces {
                    let _ = writeln!(truth, "{:.6} {:.6} {:.6} {:.6}", f.x, f.y, f.w, f.h);
                }
                write_atomic(&a.outdir.join(format!("scene_{i:04}.txt")), truth.as_bytes())?;
            }
            let _ = writeln!(out, "wrote {} scenes to {}", a.n, a.outdir.display());
        }
    }
    Ok(true)
}
