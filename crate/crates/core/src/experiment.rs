//! End-to-end runs shared by the command line and the test suites: the
//! synthetic orientation comparison and the synthetic detection run.

use serde::{Deserialize, Serialize};

use crate::cascade::{score_detections, train_cascade, Cascade, CascadeConfig, CascadeTraining, Detection, DetectionScore};
use crate::data::synth::{make_scenes, make_synthetic_orientation_set, OrientationSpec, Scene, SceneSpec};
use crate::data::{split_folds, FoldPlan};
use crate::error::{Error, Result};
use crate::gabor::{make_bank, FilterBank, Preset};
use crate::models::{prepare_input, InputMode, Task};
use crate::nn::{evaluate, mix64, train, EpochMetrics, LrSchedule, Metric, Network, Sample, Target, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationExperiment {
    pub data: OrientationSpec,
    pub mode: InputMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub folds: usize,
    /// Held-out fold.
    pub val_fold: usize,
    /// Seeds network initialization, fold assignment and batch order.
    pub seed: u64,
}

impl OrientationExperiment {
    pub fn new(data: OrientationSpec, mode: InputMode, seed: u64) -> Self {
        Self {
            data,
            mode,
            epochs: 30,
            batch_size: 32,
            lr: 0.01,
            folds: 5,
            val_fold: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub net: Network,
    pub history: Vec<EpochMetrics>,
    pub val: Metric,
}

/// Prepared samples with their subject ids.
pub fn orientation_samples(spec: &OrientationSpec, bank: &FilterBank, mode: InputMode) -> Result<(Vec<Sample>, Vec<String>)> {
    let set = make_synthetic_orientation_set(spec)?;
    let mut samples = Vec::with_capacity(set.len());
    let mut subjects = Vec::with_capacity(set.len());
    for item in set {
        samples.push(Sample {
            input: prepare_input(&item.image, bank, mode)?,
            target: Target::Class(item.label),
        });
        subjects.push(item.subject);
    }
    Ok((samples, subjects))
}

/// Split samples into `(train, val)` with `val_fold` held out.
pub fn split_samples(samples: Vec<Sample>, subjects: &[String], plan: &FoldPlan, val_fold: usize) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let (tr, va) = plan.partition(subjects.iter().map(String::as_str), val_fold)?;
    let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    let mut take = |idx: Vec<usize>| idx.into_iter().map(|i| slots[i].take().expect("disjoint")).collect::<Vec<_>>();
    let train = take(tr);
    let val = take(va);
    Ok((train, val))
}

pub fn orientation_fold_plan(exp: &OrientationExperiment, subjects: &[String]) -> Result<FoldPlan> {
    split_folds(subjects.iter().map(String::as_str), exp.folds, mix64(exp.seed ^ 0x5eed))
}

pub fn run_orientation(exp: &OrientationExperiment) -> Result<ExperimentRun> {
    let bank = make_bank(Preset::AgeGender);
    let (samples, subjects) = orientation_samples(&exp.data, &bank, exp.mode)?;
    let plan = orientation_fold_plan(exp, &subjects)?;
    let (train_set, val_set) = split_samples(samples, &subjects, &plan, exp.val_fold)?;
    let mut net = Task::Orient.build(exp.mode, exp.data.size, bank.len(), exp.seed)?;
    let cfg = TrainConfig {
        lr: LrSchedule::step_decay(exp.lr, exp.epochs),
        ..TrainConfig::new(Task::Orient.loss(), exp.epochs, exp.batch_size, exp.seed)
    };
    let history = train(&mut net, &train_set, Some(&val_set), &cfg)?;
    let val = evaluate(&net, &val_set, cfg.loss)?;
    Ok(ExperimentRun { net, history, val })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionExperiment {
    pub scene: SceneSpec,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub training: CascadeTraining,
    pub cascade: CascadeConfig,
    pub seed: u64,
}

impl Default for DetectionExperiment {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            train_scenes: 300,
            test_scenes: 50,
            training: CascadeTraining::default(),
            cascade: CascadeConfig::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectionRun {
    pub cascade: Cascade,
    pub histories: Vec<Vec<EpochMetrics>>,
    pub test: Vec<Scene>,
    pub detections: Vec<Vec<Detection>>,
    pub score: DetectionScore,
}

pub fn training_scenes(exp: &DetectionExperiment) -> Result<Vec<Scene>> {
    make_scenes(&exp.scene, exp.train_scenes, mix64(exp.seed ^ 0x7a11))
}

pub fn test_scenes(exp: &DetectionExperiment) -> Result<Vec<Scene>> {
    make_scenes(&exp.scene, exp.test_scenes, mix64(exp.seed ^ 0x7e57))
}

pub fn run_detection(exp: &DetectionExperiment) -> Result<DetectionRun> {
    if exp.train_scenes == 0 {
        return Err(Error::Empty("training scenes".into()));
    }
    let scenes = training_scenes(exp)?;
    let training = CascadeTraining {
        seed: exp.seed,
        ..exp.training.clone()
    };
    let (cascade, histories) = train_cascade(&scenes, &training, exp.cascade.clone())?;
    let test = test_scenes(exp)?;
    let mut score = DetectionScore::default();
    let mut detections = Vec::with_capacity(test.len());
    for s in &test {
        let d = cascade.detect(&s.image)?;
        score.merge(&score_detections(&d, &s.faces, 0.5));
        detections.push(d);
    }
    Ok(DetectionRun {
        cascade,
        histories,
        test,
        detections,
        score,
    })
}
