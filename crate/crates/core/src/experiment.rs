//! Corpus I/O and the end-to-end experiment: simulate disjoint train and
//! test corpora, run the saturation ablation (and optionally the
//! chromaticity histogram classifier), and write every intermediate artifact.
//!
//! Seeds: the single experiment seed is the simulator seed; the SVM shuffle
//! uses `derive_seed(seed, STREAM_TRAIN)` and the label-permutation null uses
//! `derive_seed(seed, STREAM_NULL)`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classifier::{FeatureVector, SvmParams, DEFAULT_EPOCHS};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_features, extract_features, roc_curve, shuffle_labels, AblationRun, LabeledImage,
};
use crate::features::{exposure_features, FeatureSet, DEFAULT_BINS};
use crate::formats::{
    self, fmt_float, manifest_relative, read_manifest, write_features, write_manifest,
    write_roc_csv, write_text, ManifestEntry, ScoreRow,
};
use crate::imageio::{load_image, to_gray};
use crate::kv::KvDocument;
use crate::seed::derive_seed;
use crate::simulators::{generate_camera_corpus, generate_gan_corpus, SimConfig};
use crate::Label;

pub const STREAM_TRAIN: u64 = 0x747261696e;
pub const STREAM_NULL: u64 = 0x6e756c6c;
pub const MANIFEST_NAME: &str = "manifest.csv";

/// Shuffle seed the SVM trainer uses for a given experiment seed.
pub fn training_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_TRAIN)
}

pub fn null_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_NULL)
}

/// File name of a simulated image: `{label}_{index:06}.png`.
pub fn image_name(label: Label, index: u64) -> String {
    format!("{}_{index:06}.png", label.as_u8())
}

/// Simulates both classes of one corpus, camera images first, each tagged
/// with the file name it would be written under.
pub fn simulate_corpus(cfg: &SimConfig) -> Result<Vec<LabeledImage>> {
    let (camera, gan) = rayon::join(|| generate_camera_corpus(cfg), || generate_gan_corpus(cfg));
    let tag = |label: Label| {
        move |(i, image)| LabeledImage {
            image,
            label,
            source: Some(image_name(label, cfg.first_index + i as u64)),
        }
    };
    Ok(camera?
        .into_iter()
        .enumerate()
        .map(tag(Label::Camera))
        .chain(gan?.into_iter().enumerate().map(tag(Label::Gan)))
        .collect())
}

/// Mean exposure features of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub label: Label,
    pub count: usize,
    pub mean_f_over: [f64; 4],
    pub mean_f_under: [f64; 4],
}

pub fn corpus_stats(images: &[LabeledImage]) -> Result<Vec<ClassStats>> {
    let features = images
        .par_iter()
        .map(|i| exposure_features(&to_gray(&i.image)))
        .collect::<Result<Vec<_>>>()?;
    Ok([Label::Camera, Label::Gan]
        .into_iter()
        .map(|label| {
            let mut stats = ClassStats {
                label,
                count: 0,
                mean_f_over: [0.0; 4],
                mean_f_under: [0.0; 4],
            };
            for (img, f) in images.iter().zip(&features) {
                if img.label == label {
                    stats.count += 1;
                    for k in 0..4 {
                        stats.mean_f_over[k] += f.f_over[k];
                        stats.mean_f_under[k] += f.f_under[k];
                    }
                }
            }
            if stats.count > 0 {
                let n = stats.count as f64;
                stats.mean_f_over.iter_mut().for_each(|v| *v /= n);
                stats.mean_f_under.iter_mut().for_each(|v| *v /= n);
            }
            stats
        })
        .collect())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the simulated corpus as PNGs plus `manifest.csv` into `out_dir`.
pub fn write_corpus(cfg: &SimConfig, out_dir: &Path) -> Result<(Vec<ManifestEntry>, Vec<ClassStats>)> {
    cfg.validate()?;
    create_dir(out_dir)?;
    let images = simulate_corpus(cfg)?;
    images.par_iter().try_for_each(|item| {
        let name = item.source.as_deref().expect("simulated images are named");
        let path = out_dir.join(name);
        image::save_buffer_with_format(
            &path,
            &item.image.to_interleaved(),
            item.image.width() as u32,
            item.image.height() as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(&path, io),
            other => Error::io(&path, std::io::Error::other(other)),
        })
    })?;
    let mut counters = [0usize; 2];
    let entries: Vec<ManifestEntry> = images
        .iter()
        .map(|item| {
            let slot = &mut counters[item.label.as_u8() as usize];
            let seed = cfg.image_seed(item.label, *slot);
            *slot += 1;
            ManifestEntry {
                path: item.source.clone().expect("simulated images are named"),
                label: item.label,
                seed,
            }
        })
        .collect();
    write_manifest(&out_dir.join(MANIFEST_NAME), &entries)?;
    Ok((entries, corpus_stats(&images)?))
}

/// An image to decode, with whatever label its listing provides.
#[derive(Debug, Clone)]
struct Candidate {
    source: String,
    path: PathBuf,
    label: Option<Label>,
}

fn label_from_name(name: &str) -> Option<Label> {
    match name.split_once('_')?.0 {
        "0" => Some(Label::Camera),
        "1" => Some(Label::Gan),
        _ => None,
    }
}

fn is_image_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    [".png", ".jpg", ".jpeg"].iter().any(|ext| lower.ends_with(ext))
}

fn list_candidates(input: &Path) -> Result<Vec<Candidate>> {
    if !input.exists() {
        return Err(Error::FileNotFound {
            path: input.to_path_buf(),
        });
    }
    if input.is_file() {
        return Ok(read_manifest(input)?
            .into_iter()
            .map(|e| Candidate {
                path: manifest_relative(input, &e.path),
                source: e.path,
                label: Some(e.label),
            })
            .collect());
    }
    let mut names: Vec<String> = fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_file())
        .filter_map(|entry| entry.file_name().into_string().ok())
        .filter(|name| is_image_name(name))
        .collect();
    names.sort();
    Ok(names
        .into_iter()
        .map(|name| Candidate {
            path: input.join(&name),
            label: label_from_name(&name),
            source: name,
        })
        .collect())
}

#[derive(Debug)]
pub struct Extraction {
    pub rows: Vec<FeatureVector>,
    /// Images that could not be decoded, with the reason.
    pub skipped: Vec<(PathBuf, Error)>,
}

/// Extracts features from every image listed by a manifest, or found in a
/// directory (sorted by file name, labels taken from a `0_`/`1_` prefix).
/// Undecodable images are skipped and reported, not fatal.
pub fn extract_from(input: &Path, set: FeatureSet) -> Result<Extraction> {
    let candidates = list_candidates(input)?;
    if candidates.is_empty() {
        return Err(Error::NoImagesFound {
            path: input.to_path_buf(),
        });
    }
    let results: Vec<std::result::Result<FeatureVector, (PathBuf, Error)>> = candidates
        .par_iter()
        .map(|c| {
            let fail = |e: Error| (c.path.clone(), e);
            let image = load_image(&c.path).map_err(fail)?;
            let values = set.extract(&image).map_err(fail)?;
            Ok(FeatureVector {
                values,
                label: c.label,
                source: Some(c.source.clone()),
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(s) => skipped.push(s),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoImagesFound {
            path: input.to_path_buf(),
        });
    }
    Ok(Extraction { rows, skipped })
}

/// Everything that determines a `reproduce` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Generator settings; `seed` doubles as the experiment seed and the
    /// `count`/`first_index` fields are replaced by the split below.
    pub sim: SimConfig,
    /// Training images per class.
    pub train_count: usize,
    /// Test images per class; test indices start after the training range.
    pub test_count: usize,
    pub bins: usize,
    pub lambda: Option<f64>,
    pub epochs: usize,
    pub standardize: bool,
    pub include_chroma: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            train_count: 200,
            test_count: 200,
            bins: DEFAULT_BINS,
            lambda: None,
            epochs: DEFAULT_EPOCHS,
            standardize: true,
            include_chroma: true,
        }
    }
}

const EXPERIMENT_KEYS: &[&str] = &[
    "seed",
    "image_size",
    "depth",
    "normalization",
    "weight_profile",
    "plane_beta",
    "plane_gamma",
    "irradiance_sigma",
    "exposure_gain_min",
    "exposure_gain_max",
    "train_count",
    "test_count",
    "bins",
    "lambda",
    "epochs",
    "standardize",
    "include_chroma",
];

impl ExperimentConfig {
    pub fn seed(&self) -> u64 {
        self.sim.seed
    }

    pub fn train_sim(&self) -> SimConfig {
        SimConfig {
            count: self.train_count,
            first_index: 0,
            ..self.sim.clone()
        }
    }

    pub fn test_sim(&self) -> SimConfig {
        SimConfig {
            count: self.test_count,
            first_index: self.train_count as u64,
            ..self.sim.clone()
        }
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            lambda: self.lambda,
            epochs: self.epochs,
            seed: training_seed(self.seed()),
            standardize: self.standardize,
        }
    }

    pub fn feature_sets(&self) -> Vec<FeatureSet> {
        let mut sets = vec![FeatureSet::SaturationOver, FeatureSet::SaturationBoth];
        if self.include_chroma {
            sets.push(FeatureSet::ChromaHistogram { bins: self.bins });
        }
        sets
    }

    pub fn validate(&self) -> Result<()> {
        self.train_sim().validate()?;
        self.test_sim().validate()?;
        if self.bins < 2 {
            return Err(Error::BinCountTooSmall { bins: self.bins });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!("lambda must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let sim: String = self
            .sim
            .to_kv_string()
            .lines()
            .filter(|l| !l.starts_with("count ") && !l.starts_with("first_index "))
            .map(|l| format!("{l}\n"))
            .collect();
        let lambda = self.lambda.map_or("auto".to_string(), |l| l.to_string());
        format!(
            "{sim}train_count = {}\ntest_count = {}\nbins = {}\nlambda = {lambda}\nepochs = {}\nstandardize = {}\ninclude_chroma = {}\n",
            self.train_count, self.test_count, self.bins, self.epochs, self.standardize, self.include_chroma
        )
    }

    pub fn from_kv(doc: &KvDocument) -> Result<Self> {
        doc.check_known(EXPERIMENT_KEYS)?;
        let d = Self::default();
        let lambda = match doc.get::<String>("lambda")?.as_deref() {
            None | Some("auto") => None,
            Some(_) => doc.get::<f64>("lambda")?,
        };
        let mut sim = SimConfig::from_kv_lenient(doc)?;
        sim.count = d.sim.count;
        sim.first_index = 0;
        let cfg = Self {
            sim,
            train_count: doc.get("train_count")?.unwrap_or(d.train_count),
            test_count: doc.get("test_count")?.unwrap_or(d.test_count),
            bins: doc.get("bins")?.unwrap_or(d.bins),
            lambda,
            epochs: doc.get("epochs")?.unwrap_or(d.epochs),
            standardize: doc.get("standardize")?.unwrap_or(d.standardize),
            include_chroma: doc.get("include_chroma")?.unwrap_or(d.include_chroma),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvDocument::parse(text, "<config>")?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KvDocument::read(path)?)
    }
}

/// One feature configuration's outcome.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: AblationRun,
    /// AUC after a seeded permutation of the test labels.
    pub null_auc: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub train_stats: Vec<ClassStats>,
    pub test_stats: Vec<ClassStats>,
    pub outcomes: Vec<RunOutcome>,
    /// Saturation-both features of the training and test corpora.
    pub train_features: Vec<FeatureVector>,
    pub test_features: Vec<FeatureVector>,
}

impl ExperimentResult {
    pub fn outcome(&self, set: FeatureSet) -> Option<&RunOutcome> {
        self.outcomes.iter().find(|o| o.run.feature_set == set)
    }

    pub fn auc(&self, set: FeatureSet) -> Option<f64> {
        self.outcome(set).map(|o| o.run.roc.auc)
    }

    /// AUC(over + under) - AUC(over only).
    pub fn saturation_auc_difference(&self) -> f64 {
        self.auc(FeatureSet::SaturationBoth).unwrap_or(f64::NAN)
            - self.auc(FeatureSet::SaturationOver).unwrap_or(f64::NAN)
    }

    /// Plain-text table of the results.
    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:<18} {:>6} {:>7} {:>7} {:>10} {:>10}\n",
            "features", "dim", "train", "test", "auc", "null_auc"
        );
        for o in &self.outcomes {
            s.push_str(&format!(
                "{:<18} {:>6} {:>7} {:>7} {:>10.6} {:>10.6}\n",
                o.run.feature_set.name(),
                o.run.feature_set.dim(),
                2 * self.config.train_count,
                2 * self.config.test_count,
                o.run.roc.auc,
                o.null_auc
            ));
        }
        s.push_str(&format!(
            "auc difference (saturation_both - saturation_over): {:+.6}\n",
            self.saturation_auc_difference()
        ));
        for st in &self.train_stats {
            s.push_str(&format!(
                "train class {} mean f_over[255]: {:.6}\n",
                st.label, st.mean_f_over[3]
            ));
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("features,dim,train_size,test_size,auc,null_auc\n");
        for o in &self.outcomes {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.run.feature_set.name(),
                o.run.feature_set.dim(),
                2 * self.config.train_count,
                2 * self.config.test_count,
                o.run.roc.auc,
                o.null_auc
            ));
        }
        s.push_str(&format!(
            "# auc_difference_both_minus_over={}\n",
            self.saturation_auc_difference()
        ));
        s
    }

    pub fn stats_csv(&self) -> String {
        let mut s = String::from(
            "split,label,count,f_over_240,f_over_245,f_over_250,f_over_255,f_under_0,f_under_5,f_under_10,f_under_15\n",
        );
        for (split, stats) in [("train", &self.train_stats), ("test", &self.test_stats)] {
            for st in stats {
                let cols: Vec<String> = st
                    .mean_f_over
                    .iter()
                    .chain(&st.mean_f_under)
                    .map(|&v| fmt_float(v))
                    .collect();
                s.push_str(&format!("{split},{},{},{}\n", st.label, st.count, cols.join(",")));
            }
        }
        s
    }
}

/// Runs the whole experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (train, test) = rayon::join(
        || simulate_corpus(&cfg.train_sim()),
        || simulate_corpus(&cfg.test_sim()),
    );
    let (train, test) = (train?, test?);
    let params = cfg.svm_params();
    let outcomes = cfg
        .feature_sets()
        .into_par_iter()
        .map(|set| {
            let train_x = extract_features(&train, set)?;
            let test_x = extract_features(&test, set)?;
            let run = evaluate_features(set, &train_x, &test_x, &params)?;
            let null_auc = roc_curve(&shuffle_labels(&run.scores, null_seed(cfg.seed())))?.auc;
            Ok(RunOutcome { run, null_auc })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        train_stats: corpus_stats(&train)?,
        test_stats: corpus_stats(&test)?,
        outcomes,
        train_features: extract_features(&train, FeatureSet::SaturationBoth)?,
        test_features: extract_features(&test, FeatureSet::SaturationBoth)?,
    })
}

fn emit(out_dir: &Path, written: &mut Vec<PathBuf>, name: &str, text: &str) -> Result<()> {
    let path = out_dir.join(name);
    write_text(&path, text)?;
    written.push(path);
    Ok(())
}

/// Runs the experiment and writes its artifacts into `out_dir`; returns the
/// result and the list of files written.
pub fn reproduce(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(ExperimentResult, Vec<PathBuf>)> {
    let result = run_experiment(cfg)?;
    create_dir(out_dir)?;
    let mut written = Vec::new();
    emit(out_dir, &mut written, "config.txt", &cfg.to_kv_string())?;
    emit(out_dir, &mut written, "summary.csv", &result.summary_csv())?;
    emit(out_dir, &mut written, "corpus_stats.csv", &result.stats_csv())?;

    let both_dim = FeatureSet::SaturationBoth.dim();
    for (name, rows) in [
        ("features_train.csv", &result.train_features),
        ("features_test.csv", &result.test_features),
    ] {
        let path = out_dir.join(name);
        write_features(&path, both_dim, rows)?;
        written.push(path);
    }

    for o in &result.outcomes {
        let name = o.run.feature_set.name();
        let model_path = out_dir.join(format!("model_{name}.json"));
        o.run.model.save(&model_path)?;
        written.push(model_path);

        // test rows share one order across feature sets
        let rows: Vec<ScoreRow> = o
            .run
            .scores
            .iter()
            .zip(&result.test_features)
            .map(|(s, x)| ScoreRow {
                path: x.source.clone(),
                label: Some(s.label),
                score: s.score,
            })
            .collect();
        let scores_path = out_dir.join(format!("scores_{name}.csv"));
        formats::write_scores(&scores_path, &rows)?;
        written.push(scores_path);

        let roc_path = out_dir.join(format!("roc_{name}.csv"));
        write_roc_csv(&roc_path, &o.run.roc)?;
        written.push(roc_path);
        let svg = formats::roc_svg(&[(name, &o.run.roc)]);
        emit(out_dir, &mut written, &format!("roc_{name}.svg"), &svg)?;
    }
    let curves: Vec<(&str, &crate::evaluation::RocCurve)> = result
        .outcomes
        .iter()
        .map(|o| (o.run.feature_set.name(), &o.run.roc))
        .collect();
    emit(out_dir, &mut written, "roc_comparison.svg", &formats::roc_svg(&curves))?;
    Ok((result, written))
}
