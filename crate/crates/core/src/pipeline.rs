//! Per-machine training and scoring over a dataset on disk.

use std::ops::Range;
use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::{ClipRecord, DatasetManifest, Domain, Split};
use crate::dsp::{read_wav, FeatureExtractor};
use crate::error::{Error, Result};
use crate::model::{train, AeModel, TrainReport};
use crate::scoring::{
    decide, fit_covariances, fit_threshold, score_clip, DomainCovariances, ScoreMode, ScoreRow,
    Threshold, ThresholdSet,
};

/// Stacked features of one clip read from `root`.
pub fn load_clip_features(extractor: &FeatureExtractor, root: &Path, rec: &ClipRecord) -> Result<Array2<f64>> {
    let clip = read_wav(root.join(&rec.path))?;
    extractor.clip_features(&clip)
}

/// Training vectors of one machine, stored once as f32 with the row range
/// of every clip.
struct TrainingSet {
    features: Array2<f32>,
    clips: Vec<(Domain, Range<usize>)>,
}

impl TrainingSet {
    fn rows_f64(&self, range: Range<usize>) -> Array2<f64> {
        self.features.slice(s![range, ..]).mapv(f64::from)
    }

    fn domain_rows(&self, d: Domain) -> Array2<f64> {
        let parts: Vec<ArrayView2<f32>> = self
            .clips
            .iter()
            .filter(|(dom, _)| *dom == d)
            .map(|(_, r)| self.features.slice(s![r.clone(), ..]))
            .collect();
        if parts.is_empty() {
            return Array2::zeros((0, self.features.ncols()));
        }
        concatenate(Axis(0), &parts)
            .expect("equal widths")
            .mapv(f64::from)
    }
}

fn build_training_set(extractor: &FeatureExtractor, root: &Path, records: &[&ClipRecord]) -> Result<TrainingSet> {
    let per_clip: Vec<Array2<f32>> = records
        .par_iter()
        .map(|r| load_clip_features(extractor, root, r).map(|m| m.mapv(|v| v as f32)))
        .collect::<Result<_>>()?;
    let mut clips = Vec::with_capacity(records.len());
    let mut start = 0;
    for (r, m) in records.iter().zip(&per_clip) {
        clips.push((r.domain, start..start + m.nrows()));
        start += m.nrows();
    }
    let views: Vec<ArrayView2<f32>> = per_clip.iter().map(|m| m.view()).collect();
    let features = concatenate(Axis(0), &views).map_err(|e| Error::InsufficientData(e.to_string()))?;
    Ok(TrainingSet { features, clips })
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub model: AeModel<f32>,
    /// Absent when either domain has fewer than two training vectors.
    pub covariances: Option<DomainCovariances>,
    pub thresholds: ThresholdSet,
    pub report: TrainReport,
    pub num_clips: usize,
    pub num_vectors: usize,
    pub warnings: Vec<String>,
}

/// Trains on every training clip of `machine` (both domains), then fits the
/// domain covariances and per-mode decision thresholds on training scores.
pub fn train_machine(cfg: &RunConfig, root: &Path, manifest: &DatasetManifest, machine: &str) -> Result<TrainArtifacts> {
    cfg.validate()?;
    let records: Vec<&ClipRecord> = manifest
        .for_machine(machine)
        .filter(|r| r.split == Split::Train)
        .collect();
    if records.is_empty() {
        return Err(Error::InsufficientData(format!("no training clips for machine {machine:?}")));
    }
    let extractor = FeatureExtractor::new(cfg.feature.clone())?;
    let data = build_training_set(&extractor, root, &records)?;

    let mut model = AeModel::<f32>::init(&cfg.model.layer_dims, cfg.seed)?;
    let report = train(&mut model, data.features.view(), &cfg.train)?;

    let mut warnings = Vec::new();
    let covariances = match fit_covariances(
        &model,
        data.domain_rows(Domain::Source).view(),
        data.domain_rows(Domain::Target).view(),
        cfg.scoring.ridge,
    ) {
        Ok(c) => Some(c),
        Err(Error::InsufficientData(m)) => {
            warnings.push(format!("covariances not fitted: {m}"));
            None
        }
        Err(e) => return Err(e),
    };

    let clip_scores = |mode: ScoreMode| -> Result<Vec<f64>> {
        data.clips
            .par_iter()
            .map(|(_, r)| {
                score_clip(&model, data.rows_f64(r.clone()).view(), mode, covariances.as_ref()).map(|s| s.value)
            })
            .collect()
    };
    let fit = |scores: Vec<f64>| -> Result<Threshold> {
        let mut t = fit_threshold(&scores, cfg.scoring.percentile)?;
        t.fitted_on = "train".into();
        Ok(t)
    };
    let thresholds = ThresholdSet {
        mse: Some(fit(clip_scores(ScoreMode::Mse)?)?),
        mahalanobis: match covariances {
            Some(_) => Some(fit(clip_scores(ScoreMode::Mahalanobis)?)?),
            None => None,
        },
    };

    Ok(TrainArtifacts {
        num_clips: records.len(),
        num_vectors: data.features.nrows(),
        model,
        covariances,
        thresholds,
        report,
        warnings,
    })
}

/// Scores each record; a clip that cannot be read or featurized yields an
/// error row instead of aborting the batch. Row order follows `records`.
pub fn score_records(
    extractor: &FeatureExtractor,
    model: &AeModel<f32>,
    mode: ScoreMode,
    covariances: Option<&DomainCovariances>,
    threshold: &Threshold,
    root: &Path,
    records: &[&ClipRecord],
) -> Result<Vec<ScoreRow>> {
    if mode == ScoreMode::Mahalanobis && covariances.is_none() {
        return Err(Error::Config("mahalanobis scoring needs fitted covariances".into()));
    }
    records
        .par_iter()
        .map(|r| match load_clip_features(extractor, root, r) {
            Ok(f) => {
                let s = score_clip(model, f.view(), mode, covariances)?;
                Ok(ScoreRow::scored(&r.path, s.value, decide(s.value, threshold)))
            }
            Err(e) => Ok(ScoreRow::failed(&r.path, e.to_string())),
        })
        .collect()
}

/// Test-split records of `machine` in manifest order.
pub fn test_records<'a>(manifest: &'a DatasetManifest, machine: &'a str) -> Vec<&'a ClipRecord> {
    manifest
        .for_machine(machine)
        .filter(|r| r.split == Split::Test)
        .collect()
}
