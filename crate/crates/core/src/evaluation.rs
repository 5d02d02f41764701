//! ROC analysis and the train/score/evaluate harness used for the feature
//! ablation.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::classifier::{score, train_svm, FeatureVector, LinearModel, SvmParams};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::imageio::RgbImage;
use crate::seed::rng_from;
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredExample {
    pub score: f64,
    pub label: Label,
}

impl ScoredExample {
    pub fn new(score: f64, label: Label) -> Self {
        Self { score, label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

fn class_counts(data: &[ScoredExample]) -> Result<(usize, usize)> {
    if let Some(bad) = data.iter().position(|s| !s.score.is_finite()) {
        return Err(Error::InvalidConfig(format!("score {bad} is not finite")));
    }
    let pos = data.iter().filter(|s| s.label == Label::Gan).count();
    let neg = data.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassData);
    }
    Ok((pos, neg))
}

/// Sweeps the decision threshold over every distinct score, highest first.
/// Tied scores enter together, so a tie between classes is a diagonal step.
pub fn roc_curve(data: &[ScoredExample]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(data)?;
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    for group in sorted.chunk_by(|a, b| a.score == b.score) {
        for s in group {
            match s.label {
                Label::Gan => tp += 1,
                Label::Camera => fp += 1,
            }
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(RocCurve {
        points,
        auc,
        n_positive: pos,
        n_negative: neg,
    })
}

/// Mann-Whitney estimate of AUC by explicit pair enumeration: the fraction
/// of (GAN, camera) pairs where the GAN example scores higher, ties counting
/// one half.
pub fn auc_oracle(data: &[ScoredExample]) -> Result<f64> {
    let (pos, neg) = class_counts(data)?;
    let mut twice_wins: u64 = 0;
    for p in data.iter().filter(|s| s.label == Label::Gan) {
        for n in data.iter().filter(|s| s.label == Label::Camera) {
            twice_wins += match p.score.partial_cmp(&n.score) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(twice_wins as f64 / (2 * pos * neg) as f64)
}

/// Same scores with labels permuted by a seeded shuffle.
pub fn shuffle_labels(data: &[ScoredExample], seed: u64) -> Vec<ScoredExample> {
    let mut labels: Vec<Label> = data.iter().map(|s| s.label).collect();
    labels.shuffle(&mut rng_from(seed));
    data.iter()
        .zip(labels)
        .map(|(s, label)| ScoredExample::new(s.score, label))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub image: RgbImage,
    pub label: Label,
    pub source: Option<String>,
}

/// Extracts one feature row per image, in input order.
pub fn extract_features(images: &[LabeledImage], set: FeatureSet) -> Result<Vec<FeatureVector>> {
    images
        .par_iter()
        .map(|item| {
            Ok(FeatureVector {
                values: set.extract(&item.image)?,
                label: Some(item.label),
                source: item.source.clone(),
            })
        })
        .collect()
}

/// Scores every labeled row.
pub fn score_all(model: &LinearModel, data: &[FeatureVector]) -> Result<Vec<ScoredExample>> {
    data.iter()
        .map(|x| {
            let label = x
                .label
                .ok_or_else(|| Error::InvalidConfig("cannot evaluate an unlabeled row".into()))?;
            Ok(ScoredExample::new(score(model, x)?, label))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub feature_set: FeatureSet,
    pub model: LinearModel,
    pub scores: Vec<ScoredExample>,
    pub roc: RocCurve,
}

/// Trains on `train` features, scores `test` and builds the ROC.
pub fn evaluate_features(
    feature_set: FeatureSet,
    train: &[FeatureVector],
    test: &[FeatureVector],
    params: &SvmParams,
) -> Result<AblationRun> {
    let model = train_svm(train, params)?;
    let scores = score_all(&model, test)?;
    let roc = roc_curve(&scores)?;
    Ok(AblationRun {
        feature_set,
        model,
        scores,
        roc,
    })
}

pub fn run_ablation(
    train: &[LabeledImage],
    test: &[LabeledImage],
    feature_set: FeatureSet,
    params: &SvmParams,
) -> Result<AblationRun> {
    let train_x = extract_features(train, feature_set)?;
    let test_x = extract_features(test, feature_set)?;
    evaluate_features(feature_set, &train_x, &test_x, params)
}

/// The over-only and over-plus-under configurations on identical corpora.
pub fn run_saturation_ablation(
    train: &[LabeledImage],
    test: &[LabeledImage],
    params: &SvmParams,
) -> Result<[AblationRun; 2]> {
    let (over, both) = rayon::join(
        || run_ablation(train, test, FeatureSet::SaturationOver, params),
        || run_ablation(train, test, FeatureSet::SaturationBoth, params),
    );
    Ok([over?, both?])
}
