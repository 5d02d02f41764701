//! The two forensic feature families: exposure-frequency features over
//! grayscale intensity, and bivariate rg-chromaticity histograms.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imageio::{to_gray, GrayImage, RgbImage};

/// Over-exposure thresholds; a pixel counts when `I >= t`.
pub const OVER_THRESHOLDS: [u8; 4] = [240, 245, 250, 255];
/// Under-exposure thresholds; a pixel counts when `I <= t`.
pub const UNDER_THRESHOLDS: [u8; 4] = [0, 5, 10, 15];

pub const DEFAULT_BINS: usize = 64;

/// Fractions of pixels at or beyond each exposure threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationFeatures {
    /// Ordered like [`OVER_THRESHOLDS`].
    pub f_over: [f64; 4],
    /// Ordered like [`UNDER_THRESHOLDS`].
    pub f_under: [f64; 4],
}

impl SaturationFeatures {
    /// `f_over` followed by `f_under`.
    pub fn both(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        out[..4].copy_from_slice(&self.f_over);
        out[4..].copy_from_slice(&self.f_under);
        out
    }
}

pub fn exposure_features(img: &GrayImage) -> Result<SaturationFeatures> {
    let total = img.pixels().len();
    if total == 0 {
        return Err(Error::EmptyImage);
    }
    let mut counts = [0usize; 256];
    for &v in img.pixels() {
        counts[v as usize] += 1;
    }
    // at_most[v] = #{I <= v}
    let mut at_most = [0usize; 256];
    let mut running = 0;
    for (v, &c) in counts.iter().enumerate() {
        running += c;
        at_most[v] = running;
    }
    let n = total as f64;
    let f_over = OVER_THRESHOLDS.map(|t| {
        let below = if t == 0 { 0 } else { at_most[t as usize - 1] };
        (total - below) as f64 / n
    });
    let f_under = UNDER_THRESHOLDS.map(|t| at_most[t as usize] as f64 / n);
    Ok(SaturationFeatures { f_over, f_under })
}

/// Normalized `B x B` histogram over (r, g) chromaticity.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaHistogram {
    bins: usize,
    /// Row-major: index `r_bin * bins + g_bin`.
    mass: Vec<f64>,
    valid_pixel_count: usize,
    skipped_pixel_count: usize,
}

impl ChromaHistogram {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, r_bin: usize, g_bin: usize) -> f64 {
        self.mass[r_bin * self.bins + g_bin]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn valid_pixel_count(&self) -> usize {
        self.valid_pixel_count
    }

    /// Pixels with `R + G + B == 0`, whose chromaticity is undefined.
    pub fn skipped_pixel_count(&self) -> usize {
        self.skipped_pixel_count
    }

    /// Builds a histogram directly from a row-major grid of masses.
    pub fn from_grid(bins: usize, mass: Vec<f64>) -> Option<Self> {
        (bins >= 2 && mass.len() == bins * bins).then_some(Self {
            bins,
            mass,
            valid_pixel_count: 0,
            skipped_pixel_count: 0,
        })
    }
}

/// Bin index of `channel / sum` on an axis of `bins` half-open cells, with the
/// value 1.0 clamped into the last cell. Integer arithmetic keeps the result
/// identical for colors with exactly equal ratios.
fn chroma_bin(channel: u32, sum: u32, bins: usize) -> usize {
    ((channel as u64 * bins as u64 / sum as u64) as usize).min(bins - 1)
}

pub fn chroma_histogram(img: &RgbImage, bins: usize) -> Result<ChromaHistogram> {
    if img.pixels().is_empty() {
        return Err(Error::EmptyImage);
    }
    if bins < 2 {
        return Err(Error::BinCountTooSmall { bins });
    }
    let mut counts = vec![0u64; bins * bins];
    let mut skipped = 0usize;
    for &[r, g, b] in img.pixels() {
        let sum = r as u32 + g as u32 + b as u32;
        if sum == 0 {
            skipped += 1;
            continue;
        }
        let rb = chroma_bin(r as u32, sum, bins);
        let gb = chroma_bin(g as u32, sum, bins);
        counts[rb * bins + gb] += 1;
    }
    let valid = img.pixels().len() - skipped;
    let mass = if valid == 0 {
        vec![0.0; bins * bins]
    } else {
        counts.iter().map(|&c| c as f64 / valid as f64).collect()
    };
    Ok(ChromaHistogram {
        bins,
        mass,
        valid_pixel_count: valid,
        skipped_pixel_count: skipped,
    })
}

/// Row-major flattening: element `r_bin * B + g_bin`.
pub fn flatten(h: &ChromaHistogram) -> Vec<f64> {
    h.mass.clone()
}

/// Which feature family to extract from an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    /// The four over-exposure fractions.
    SaturationOver,
    /// Over-exposure then under-exposure fractions (eight values).
    SaturationBoth,
    /// Flattened rg-chromaticity histogram with the given bins per axis.
    ChromaHistogram { bins: usize },
}

impl FeatureSet {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureSet::SaturationOver => "saturation_over",
            FeatureSet::SaturationBoth => "saturation_both",
            FeatureSet::ChromaHistogram { .. } => "chroma_histogram",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureSet::SaturationOver => 4,
            FeatureSet::SaturationBoth => 8,
            FeatureSet::ChromaHistogram { bins } => bins * bins,
        }
    }

    /// Parses a feature-set name; `bins` only matters for the histogram.
    pub fn parse(name: &str, bins: usize) -> Result<Self> {
        match name {
            "saturation_over" => Ok(FeatureSet::SaturationOver),
            "saturation_both" => Ok(FeatureSet::SaturationBoth),
            "chroma_histogram" => {
                if bins < 2 {
                    return Err(Error::BinCountTooSmall { bins });
                }
                Ok(FeatureSet::ChromaHistogram { bins })
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown feature set '{other}' (expected saturation_over, saturation_both or chroma_histogram)"
            ))),
        }
    }

    pub fn extract(&self, img: &RgbImage) -> Result<Vec<f64>> {
        match *self {
            FeatureSet::SaturationOver => Ok(exposure_features(&to_gray(img))?.f_over.to_vec()),
            FeatureSet::SaturationBoth => Ok(exposure_features(&to_gray(img))?.both().to_vec()),
            FeatureSet::ChromaHistogram { bins } => Ok(flatten(&chroma_histogram(img, bins)?)),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::parse(s, DEFAULT_BINS)
    }
}
