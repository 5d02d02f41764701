//! Detection of GAN-generated imagery from two color cues: the suppressed
//! frequency of saturated and under-exposed pixels, and the rg-chromaticity
//! statistics left by a generator's final depth-to-RGB layer.
//!
//! The pipeline is image decoding ([`imageio`]), feature extraction
//! ([`features`]), a linear SVM ([`classifier`]) and ROC analysis
//! ([`evaluation`]). [`simulators`] produces labeled GAN-like and
//! camera-like corpora and [`experiment`] ties everything into the
//! end-to-end ablation run.

pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod features;
pub mod formats;
pub mod imageio;
pub mod kv;
pub mod seed;
pub mod simulators;

use std::fmt;

pub use error::{Error, Result};

/// Ground-truth class. GAN imagery is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Camera = 0,
    Gan = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Camera),
            1 => Some(Label::Gan),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// `-1` for camera, `+1` for GAN.
    pub fn sign(self) -> f64 {
        match self {
            Label::Camera => -1.0,
            Label::Gan => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Camera => Label::Gan,
            Label::Gan => Label::Camera,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}
