//! Desk-scale corpus generators.
//!
//! The GAN-like generator is a toy version of a progressive-growing
//! generator with random (untrained) weights: a latent 4x4 map is repeatedly
//! upsampled, convolved, passed through a leaky ReLU and normalized, then
//! collapsed to RGB by a 1x1 convolution. Normalization bounds each pixel's
//! depth vector, so with the preset toRGB weights the output can never reach
//! the clipping limits.
//!
//! The camera-like generator exposes a log-normal irradiance field with a
//! random gain and clips it to 8 bits, which produces blown highlights and
//! crushed shadows.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imageio::RgbImage;
use crate::kv::{join_list, KvDocument};
use crate::seed::{derive_seed, rng_from};
use crate::Label;

/// Guard added under every square root in both normalizations.
pub const EPSILON: f64 = 1e-8;
pub const LEAKY_RELU_SLOPE: f64 = 0.2;
const LATENT_SIZE: usize = 4;

const STREAM_NETWORK: u64 = 0x6e6574;
const STREAM_GAN_IMAGES: u64 = 0x67616e;
const STREAM_CAMERA_IMAGES: u64 = 0x63616d;

/// `depth` planes of `height x width` reals, stored plane by plane in
/// row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    depth: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(depth: usize, width: usize, height: usize, values: Vec<f64>) -> Option<Self> {
        let ok = depth > 0
            && width > 0
            && height > 0
            && values.len() == depth * width * height
            && values.iter().all(|v| v.is_finite());
        ok.then_some(Self {
            depth,
            width,
            height,
            values,
        })
    }

    pub fn zeros(depth: usize, width: usize, height: usize) -> Self {
        Self {
            depth,
            width,
            height,
            values: vec![0.0; depth * width * height],
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, k: usize) -> &[f64] {
        let n = self.plane_len();
        &self.values[k * n..(k + 1) * n]
    }

    fn plane_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn get(&self, k: usize, x: usize, y: usize) -> f64 {
        self.values[(k * self.height + y) * self.width + x]
    }

    /// The depth vector at one pixel.
    pub fn pixel(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.depth).map(|k| self.get(k, x, y)).collect()
    }
}

/// Rescales each pixel's depth vector to unit root-mean-square.
pub fn pixelwise_normalize(fm: &FeatureMap) -> FeatureMap {
    let n = fm.plane_len();
    let k = fm.depth as f64;
    let mut out = fm.clone();
    for p in 0..n {
        let mean_sq = (0..fm.depth)
            .map(|c| fm.values[c * n + p].powi(2))
            .sum::<f64>()
            / k;
        let inv = 1.0 / (mean_sq + EPSILON).sqrt();
        for c in 0..fm.depth {
            out.values[c * n + p] *= inv;
        }
    }
    out
}

/// Standardizes each depth plane, then applies the per-plane gain `gamma`
/// and offset `beta`.
pub fn plane_normalize(fm: &FeatureMap, beta: &[f64], gamma: &[f64]) -> Result<FeatureMap> {
    for params in [beta, gamma] {
        if params.len() != fm.depth {
            return Err(Error::DimensionMismatch {
                expected: fm.depth,
                found: params.len(),
            });
        }
    }
    let n = fm.plane_len() as f64;
    let mut out = fm.clone();
    for c in 0..fm.depth {
        let plane = out.plane_mut(c);
        let mean = plane.iter().sum::<f64>() / n;
        let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sigma = (var + EPSILON).sqrt();
        for v in plane.iter_mut() {
            *v = gamma[c] * ((*v - mean) / sigma) + beta[c];
        }
    }
    Ok(out)
}

/// The 1x1 convolution collapsing `K` depth planes to RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct ToRgbWeights {
    /// One row per depth plane, one column per output channel.
    weights: Vec<[f64; 3]>,
    bias: [f64; 3],
}

impl ToRgbWeights {
    pub fn new(weights: Vec<[f64; 3]>, bias: [f64; 3]) -> Result<Self> {
        if weights.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "toRGB needs at least 3 depth rows, got {}",
                weights.len()
            )));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("toRGB weights must be finite".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    pub fn bias(&self) -> [f64; 3] {
        self.bias
    }

    /// Samples a preset weight profile. Every column is scaled to norm
    /// `1/sqrt(K)`, so a unit-RMS depth vector maps into `[-1, 1]`.
    pub fn preset(profile: WeightProfile, depth: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if depth < 3 {
            return Err(Error::InvalidConfig(format!("depth must be at least 3, got {depth}")));
        }
        let mut columns = [vec![0.0; depth], vec![0.0; depth], vec![0.0; depth]];
        match profile {
            WeightProfile::OverlappingGan => {
                // one shared peaked component, small per-channel perturbations
                let shared: Vec<f64> = (0..depth).map(|_| normal(rng)).collect();
                for col in columns.iter_mut() {
                    for (w, s) in col.iter_mut().zip(&shared) {
                        *w = s + 0.25 * normal(rng);
                    }
                }
            }
            WeightProfile::CameraLike => {
                // each channel owns a disjoint band of depth planes, non-negative
                for (ch, col) in columns.iter_mut().enumerate() {
                    for (k, w) in col.iter_mut().enumerate() {
                        let owner = k * 3 / depth;
                        let base = if owner == ch { 1.0 } else { 0.0 };
                        *w = base + 0.05 * rng.random::<f64>();
                    }
                }
            }
        }
        let target = 1.0 / (depth as f64).sqrt();
        for col in columns.iter_mut() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                col.iter_mut().for_each(|v| *v *= target / norm);
            }
        }
        let weights = (0..depth)
            .map(|k| [columns[0][k], columns[1][k], columns[2][k]])
            .collect();
        Self::new(weights, [0.0; 3])
    }
}

/// Maps a generator output in `[-1, 1]` to 8 bits, clamping outside values.
pub fn unit_to_u8(v: f64) -> u8 {
    ((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn to_rgb(fm: &FeatureMap, w: &ToRgbWeights) -> Result<RgbImage> {
    if fm.depth != w.depth() {
        return Err(Error::DepthMismatch {
            expected: w.depth(),
            found: fm.depth,
        });
    }
    let n = fm.plane_len();
    let pixels = (0..n)
        .map(|p| {
            let mut rgb = w.bias;
            for (k, row) in w.weights.iter().enumerate() {
                let a = fm.values[k * n + p];
                for ch in 0..3 {
                    rgb[ch] += row[ch] * a;
                }
            }
            rgb.map(unit_to_u8)
        })
        .collect();
    Ok(RgbImage::new(fm.width, fm.height, pixels).expect("feature map shape is valid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Pixelwise,
    PerPlane,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Pixelwise => "pixelwise",
            Normalization::PerPlane => "per-plane",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixelwise" => Ok(Normalization::Pixelwise),
            "per-plane" => Ok(Normalization::PerPlane),
            other => Err(Error::InvalidConfig(format!("unknown normalization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightProfile {
    OverlappingGan,
    CameraLike,
}

impl fmt::Display for WeightProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightProfile::OverlappingGan => "overlapping-gan",
            WeightProfile::CameraLike => "camera-like",
        })
    }
}

impl FromStr for WeightProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overlapping-gan" => Ok(WeightProfile::OverlappingGan),
            "camera-like" => Ok(WeightProfile::CameraLike),
            other => Err(Error::InvalidConfig(format!("unknown weight profile '{other}'"))),
        }
    }
}

/// Everything that determines a simulated corpus. Identical configs give
/// bit-identical images.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Side length in pixels; a power of two, at least 16.
    pub image_size: usize,
    /// Number of depth planes entering the toRGB layer.
    pub depth: usize,
    pub normalization: Normalization,
    pub weight_profile: WeightProfile,
    /// Images per class.
    pub count: usize,
    /// Index of the first image; corpora with disjoint index ranges share the
    /// generator network but no image seeds.
    pub first_index: u64,
    /// Per-plane offsets for [`Normalization::PerPlane`]; empty means all 0.
    pub plane_beta: Vec<f64>,
    /// Per-plane gains for [`Normalization::PerPlane`]; empty means all 1.
    pub plane_gamma: Vec<f64>,
    /// Standard deviation of log irradiance in the camera simulator.
    pub irradiance_sigma: f64,
    pub exposure_gain_min: f64,
    pub exposure_gain_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 2019,
            image_size: 64,
            depth: 16,
            normalization: Normalization::Pixelwise,
            weight_profile: WeightProfile::OverlappingGan,
            count: 200,
            first_index: 0,
            plane_beta: Vec::new(),
            plane_gamma: Vec::new(),
            irradiance_sigma: 1.0,
            exposure_gain_min: 0.12,
            exposure_gain_max: 0.5,
        }
    }
}

const SIM_KEYS: &[&str] = &[
    "seed",
    "image_size",
    "depth",
    "normalization",
    "weight_profile",
    "count",
    "first_index",
    "plane_beta",
    "plane_gamma",
    "irradiance_sigma",
    "exposure_gain_min",
    "exposure_gain_max",
];

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.image_size < 16 || !self.image_size.is_power_of_two() {
            return bad(format!(
                "image_size must be a power of two >= 16, got {}",
                self.image_size
            ));
        }
        if self.depth < 3 {
            return bad(format!("depth must be at least 3, got {}", self.depth));
        }
        if self.count == 0 {
            return bad("count must be positive".into());
        }
        for (name, params) in [("plane_beta", &self.plane_beta), ("plane_gamma", &self.plane_gamma)] {
            if !params.is_empty() && params.len() != self.depth {
                return bad(format!(
                    "{name} needs {} values (one per depth plane), got {}",
                    self.depth,
                    params.len()
                ));
            }
            if params.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} values must be finite"));
            }
        }
        let (lo, hi) = (self.exposure_gain_min, self.exposure_gain_max);
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return bad(format!("exposure gain range [{lo}, {hi}] is invalid"));
        }
        if !(self.irradiance_sigma.is_finite() && self.irradiance_sigma >= 0.0) {
            return bad("irradiance_sigma must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn beta(&self) -> Vec<f64> {
        if self.plane_beta.is_empty() {
            vec![0.0; self.depth]
        } else {
            self.plane_beta.clone()
        }
    }

    pub fn gamma(&self) -> Vec<f64> {
        if self.plane_gamma.is_empty() {
            vec![1.0; self.depth]
        } else {
            self.plane_gamma.clone()
        }
    }

    /// Seed of image `index` (relative to `first_index`) of one class.
    pub fn image_seed(&self, label: Label, index: usize) -> u64 {
        let stream = match label {
            Label::Gan => STREAM_GAN_IMAGES,
            Label::Camera => STREAM_CAMERA_IMAGES,
        };
        derive_seed(derive_seed(self.seed, stream), self.first_index + index as u64)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("seed", self.seed.to_string());
        line("image_size", self.image_size.to_string());
        line("depth", self.depth.to_string());
        line("normalization", self.normalization.to_string());
        line("weight_profile", self.weight_profile.to_string());
        line("count", self.count.to_string());
        line("first_index", self.first_index.to_string());
        line("plane_beta", join_list(&self.plane_beta));
        line("plane_gamma", join_list(&self.plane_gamma));
        line("irradiance_sigma", self.irradiance_sigma.to_string());
        line("exposure_gain_min", self.exposure_gain_min.to_string());
        line("exposure_gain_max", self.exposure_gain_max.to_string());
        s
    }

    /// Missing keys keep their defaults; unknown keys are rejected.
    pub fn from_kv(doc: &KvDocument) -> Result<Self> {
        doc.check_known(SIM_KEYS)?;
        Self::from_kv_lenient(doc)
    }

    /// Like [`SimConfig::from_kv`] but ignores keys it does not know, so the
    /// simulator section can be read out of a larger document.
    pub(crate) fn from_kv_lenient(doc: &KvDocument) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            seed: doc.get("seed")?.unwrap_or(d.seed),
            image_size: doc.get("image_size")?.unwrap_or(d.image_size),
            depth: doc.get("depth")?.unwrap_or(d.depth),
            normalization: doc.get("normalization")?.unwrap_or(d.normalization),
            weight_profile: doc.get("weight_profile")?.unwrap_or(d.weight_profile),
            count: doc.get("count")?.unwrap_or(d.count),
            first_index: doc.get("first_index")?.unwrap_or(d.first_index),
            plane_beta: doc.get_list("plane_beta")?.unwrap_or(d.plane_beta),
            plane_gamma: doc.get_list("plane_gamma")?.unwrap_or(d.plane_gamma),
            irradiance_sigma: doc.get("irradiance_sigma")?.unwrap_or(d.irradiance_sigma),
            exposure_gain_min: doc.get("exposure_gain_min")?.unwrap_or(d.exposure_gain_min),
            exposure_gain_max: doc.get("exposure_gain_max")?.unwrap_or(d.exposure_gain_max),
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

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// 3x3 convolution, zero padded, no bias.
#[derive(Debug, Clone)]
struct Conv3x3 {
    depth: usize,
    /// `[out][in][ky][kx]`
    weights: Vec<f64>,
}

impl Conv3x3 {
    fn random(depth: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / (9.0 * depth as f64)).sqrt();
        let weights = (0..depth * depth * 9).map(|_| std * normal(rng)).collect();
        Self { depth, weights }
    }

    fn forward(&self, input: &FeatureMap) -> FeatureMap {
        let (w, h) = (input.width, input.height);
        let mut out = FeatureMap::zeros(self.depth, w, h);
        for o in 0..self.depth {
            let dst = out.plane_mut(o);
            for i in 0..input.depth {
                let src = input.plane(i);
                let kernel = &self.weights[(o * input.depth + i) * 9..][..9];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let coef = kernel[ky * 3 + kx];
                        // output (x, y) reads input (x + kx - 1, y + ky - 1)
                        let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                        let (x0, x1) = (1usize.saturating_sub(kx), (w + 1 - kx).min(w));
                        for y in y0..y1 {
                            let sy = y + ky - 1;
                            let d = &mut dst[y * w + x0..y * w + x1];
                            let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                            for (dv, sv) in d.iter_mut().zip(s) {
                                *dv += coef * sv;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn upsample_nearest(fm: &FeatureMap) -> FeatureMap {
    let (w, h) = (fm.width * 2, fm.height * 2);
    let mut out = FeatureMap::zeros(fm.depth, w, h);
    for k in 0..fm.depth {
        let src = fm.plane(k);
        let dst = out.plane_mut(k);
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = src[(y / 2) * fm.width + x / 2];
            }
        }
    }
    out
}

fn leaky_relu(fm: &mut FeatureMap) {
    for v in fm.values.iter_mut() {
        if *v < 0.0 {
            *v *= LEAKY_RELU_SLOPE;
        }
    }
}

/// A toy generator with seeded random weights.
#[derive(Debug, Clone)]
pub struct GanGenerator {
    convs: Vec<Conv3x3>,
    to_rgb: ToRgbWeights,
    normalization: Normalization,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    depth: usize,
}

impl GanGenerator {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from(derive_seed(cfg.seed, STREAM_NETWORK));
        let stages = (cfg.image_size / LATENT_SIZE).trailing_zeros() as usize;
        let convs = (0..stages).map(|_| Conv3x3::random(cfg.depth, &mut rng)).collect();
        let to_rgb = ToRgbWeights::preset(cfg.weight_profile, cfg.depth, &mut rng)?;
        Ok(Self {
            convs,
            to_rgb,
            normalization: cfg.normalization,
            beta: cfg.beta(),
            gamma: cfg.gamma(),
            depth: cfg.depth,
        })
    }

    pub fn to_rgb_weights(&self) -> &ToRgbWeights {
        &self.to_rgb
    }

    fn normalize(&self, fm: &FeatureMap) -> FeatureMap {
        match self.normalization {
            Normalization::Pixelwise => pixelwise_normalize(fm),
            Normalization::PerPlane => {
                plane_normalize(fm, &self.beta, &self.gamma).expect("validated parameter lengths")
            }
        }
    }

    /// The depth planes entering the toRGB layer for one latent seed.
    pub fn features(&self, image_seed: u64) -> FeatureMap {
        let mut rng = rng_from(image_seed);
        let n = self.depth * LATENT_SIZE * LATENT_SIZE;
        let latent = (0..n).map(|_| normal(&mut rng)).collect();
        let mut fm = FeatureMap {
            depth: self.depth,
            width: LATENT_SIZE,
            height: LATENT_SIZE,
            values: latent,
        };
        fm = pixelwise_normalize(&fm);
        for conv in &self.convs {
            let mut next = conv.forward(&upsample_nearest(&fm));
            leaky_relu(&mut next);
            fm = self.normalize(&next);
        }
        fm
    }

    pub fn generate(&self, image_seed: u64) -> RgbImage {
        to_rgb(&self.features(image_seed), &self.to_rgb).expect("depth matches by construction")
    }
}

pub fn generate_gan_corpus(cfg: &SimConfig) -> Result<Vec<RgbImage>> {
    let generator = GanGenerator::new(cfg)?;
    Ok((0..cfg.count)
        .into_par_iter()
        .map(|i| generator.generate(cfg.image_seed(Label::Gan, i)))
        .collect())
}

/// Smooth random field with zero mean and unit variance: a sum of a few
/// low-frequency plane waves with 1/f amplitudes.
fn smooth_field(size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    const WAVES: usize = 8;
    let waves: Vec<(f64, f64, f64, f64)> = (0..WAVES)
        .map(|_| {
            let fx = rng.random_range(-4.0..4.0);
            let fy = rng.random_range(-4.0..4.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = normal(rng) / (1.0 + f64::hypot(fx, fy));
            (fx, fy, phase, amp)
        })
        .collect();
    let inv = 1.0 / size as f64;
    let mut field: Vec<f64> = (0..size * size)
        .map(|p| {
            let (x, y) = ((p % size) as f64 * inv, (p / size) as f64 * inv);
            waves
                .iter()
                .map(|&(fx, fy, phase, amp)| amp * (2.0 * PI * (fx * x + fy * y) + phase).cos())
                .sum()
        })
        .collect();
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let std = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in field.iter_mut() {
        *v = if std > 0.0 { (*v - mean) / std } else { 0.0 };
    }
    field
}

/// One camera-like image: log-normal irradiance times an exposure gain,
/// with signal-dependent sensor noise, clipped to 8 bits.
pub fn camera_image(cfg: &SimConfig, image_seed: u64) -> RgbImage {
    const CHROMA_SPREAD: f64 = 0.15;
    const SHOT_NOISE: f64 = 0.5;
    let mut rng = rng_from(image_seed);
    let size = cfg.image_size;
    let gain = if cfg.exposure_gain_max > cfg.exposure_gain_min {
        rng.random_range(cfg.exposure_gain_min..cfg.exposure_gain_max)
    } else {
        cfg.exposure_gain_min
    };
    let channel_gain: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.85..1.15));
    let luminance = smooth_field(size, &mut rng);
    let chroma: [Vec<f64>; 3] = std::array::from_fn(|_| smooth_field(size, &mut rng));
    let pixels = (0..size * size)
        .map(|p| {
            std::array::from_fn(|ch| {
                let log_e = cfg.irradiance_sigma * luminance[p] + CHROMA_SPREAD * chroma[ch][p];
                let signal = 255.0 * gain * channel_gain[ch] * log_e.exp();
                let noisy = signal + SHOT_NOISE * signal.sqrt() * normal(&mut rng);
                noisy.round().clamp(0.0, 255.0) as u8
            })
        })
        .collect();
    RgbImage::new(size, size, pixels).expect("square raster")
}

pub fn generate_camera_corpus(cfg: &SimConfig) -> Result<Vec<RgbImage>> {
    cfg.validate()?;
    Ok((0..cfg.count)
        .into_par_iter()
        .map(|i| camera_image(cfg, cfg.image_seed(Label::Camera, i)))
        .collect())
}
