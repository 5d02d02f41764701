//! Linear SVM trained by Pegasos-style stochastic subgradient descent on the
//! primal objective
//!
//! ```text
//! (lambda / 2) * |w|^2 + (1 / n) * sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! with labels mapped camera -> -1, GAN -> +1 and an unregularized bias.
//! Features are standardized per dimension before training.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;
use crate::Label;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_EPOCHS: usize = 200;
/// Per-dimension spreads below this are treated as constant features.
pub const SCALE_FLOOR: f64 = 1e-12;

/// One row of features, optionally labeled and tagged with its source.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<Label>,
    pub source: Option<String>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            label: None,
            source: None,
        }
    }

    pub fn labeled(values: Vec<f64>, label: Label) -> Self {
        Self {
            values,
            label: Some(label),
            source: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    /// Regularization strength; `None` means `1 / n`.
    pub lambda: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: None,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub iterations: u64,
    pub seed: u64,
    /// Objective of the returned parameters on the full training set.
    pub final_objective: f64,
    /// Objective of the running iterate at the end of every epoch.
    pub epoch_objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub format_version: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub standardize: bool,
    pub lambda: f64,
    pub training: TrainingMeta,
}

impl LinearModel {
    /// A model with explicit parameters and no training history.
    pub fn from_parts(
        weights: Vec<f64>,
        bias: f64,
        feature_means: Vec<f64>,
        feature_scales: Vec<f64>,
    ) -> Result<Self> {
        let d = weights.len();
        for len in [feature_means.len(), feature_scales.len()] {
            if len != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: len,
                });
            }
        }
        if feature_scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("feature scales must be positive".into()));
        }
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            weights,
            bias,
            feature_means,
            feature_scales,
            standardize: true,
            lambda: 0.0,
            training: TrainingMeta {
                epochs: 0,
                iterations: 0,
                seed: 0,
                final_objective: f64::NAN,
                epoch_objectives: Vec::new(),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn standardized(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.feature_means)
            .zip(&self.feature_scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Hinge + L2 objective of this model on `data`, measured in the model's
    /// standardized feature space.
    pub fn objective(&self, data: &[FeatureVector]) -> Result<f64> {
        let (xs, ys) = self.design(data)?;
        Ok(objective(&self.weights, self.bias, &xs, &ys, self.lambda))
    }

    fn design(&self, data: &[FeatureVector]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut xs = Vec::with_capacity(data.len());
        let mut ys = Vec::with_capacity(data.len());
        for row in data {
            self.check_dim(row)?;
            let label = row.label.ok_or_else(|| Error::InvalidConfig("unlabeled training row".into()))?;
            xs.push(self.standardized(&row.values));
            ys.push(label.sign());
        }
        Ok((xs, ys))
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound {
                path: path.to_path_buf(),
            },
            _ => Error::io(path, e),
        })?;
        let model: LinearModel = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported model format_version {}", model.format_version),
            ));
        }
        let d = model.dim();
        if model.feature_means.len() != d || model.feature_scales.len() != d {
            return Err(Error::parse(path, 1, "inconsistent model dimensions"));
        }
        Ok(model)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(lambda/2)|w|^2 + mean hinge loss`.
pub fn objective(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (dot(weights, x) + bias)).max(0.0))
        .sum();
    0.5 * lambda * dot(weights, weights) + hinge / xs.len() as f64
}

/// Per-dimension mean and population standard deviation; spreads below
/// [`SCALE_FLOOR`] become 1.
pub fn standardization(rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, |r| r.len());
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for r in rows {
        for (m, v) in means.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut scales = vec![0.0; d];
    for r in rows {
        for ((s, v), m) in scales.iter_mut().zip(r.iter()).zip(&means) {
            *s += (v - m).powi(2);
        }
    }
    for s in scales.iter_mut() {
        *s = (*s / n).sqrt();
        if *s < SCALE_FLOOR {
            *s = 1.0;
        }
    }
    (means, scales)
}

fn validate(data: &[FeatureVector]) -> Result<(usize, Vec<f64>)> {
    let d = data.first().ok_or(Error::SingleClassData)?.dim();
    let mut ys = Vec::with_capacity(data.len());
    for (row, x) in data.iter().enumerate() {
        if x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.dim(),
            });
        }
        if let Some(column) = x.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row, column });
        }
        let label = x
            .label
            .ok_or_else(|| Error::InvalidConfig(format!("training row {row} has no label")))?;
        ys.push(label.sign());
    }
    if !(ys.contains(&1.0) && ys.contains(&-1.0)) {
        return Err(Error::SingleClassData);
    }
    Ok((d, ys))
}

pub fn train_svm(data: &[FeatureVector], params: &SvmParams) -> Result<LinearModel> {
    let (d, ys) = validate(data)?;
    let n = data.len();
    let lambda = params.lambda.unwrap_or(1.0 / n as f64);
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    if params.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be positive".into()));
    }

    let (means, scales) = if params.standardize {
        let rows: Vec<&[f64]> = data.iter().map(|x| x.values.as_slice()).collect();
        standardization(&rows)
    } else {
        (vec![0.0; d], vec![1.0; d])
    };
    let xs: Vec<Vec<f64>> = data
        .iter()
        .map(|x| {
            x.values
                .iter()
                .zip(&means)
                .zip(&scales)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();

    let mut rng = rng_from(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut t: u64 = 0;
    let mut best = (f64::INFINITY, w.clone(), b);
    let mut epoch_objectives = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = ys[i] * (dot(&w, &xs[i]) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                let step = eta * ys[i];
                for (wv, xv) in w.iter_mut().zip(&xs[i]) {
                    *wv += step * xv;
                }
                b += step;
            }
        }
        let obj = objective(&w, b, &xs, &ys, lambda);
        epoch_objectives.push(obj);
        // subgradient steps are not descent steps; keep the best epoch-end iterate
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }

    let (final_objective, weights, bias) = best;
    Ok(LinearModel {
        format_version: MODEL_FORMAT_VERSION,
        weights,
        bias,
        feature_means: means,
        feature_scales: scales,
        standardize: params.standardize,
        lambda,
        training: TrainingMeta {
            epochs: params.epochs,
            iterations: t,
            seed: params.seed,
            final_objective,
            epoch_objectives,
        },
    })
}

/// `w . standardize(x) + b`; larger means more GAN-like.
pub fn score(model: &LinearModel, x: &FeatureVector) -> Result<f64> {
    model.check_dim(x)?;
    Ok(dot(&model.weights, &model.standardized(&x.values)) + model.bias)
}

/// GAN when the score is strictly positive; a zero score is camera.
pub fn predict(model: &LinearModel, x: &FeatureVector) -> Result<Label> {
    Ok(label_for_score(score(model, x)?))
}

pub fn label_for_score(score: f64) -> Label {
    if score > 0.0 {
        Label::Gan
    } else {
        Label::Camera
    }
}

/// Fraction of labeled rows the model classifies correctly.
pub fn accuracy(model: &LinearModel, data: &[FeatureVector]) -> Result<f64> {
    let mut correct = 0usize;
    for x in data {
        if Some(predict(model, x)?) == x.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
