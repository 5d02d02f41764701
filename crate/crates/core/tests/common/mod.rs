//! Independent oracles shared by the integration suites. Nothing here calls
//! into the implementation paths it is used to check.

#![allow(dead_code)]

use colorcue::classifier::FeatureVector;
use colorcue::Label;

/// Small deterministic generator so fixtures do not depend on `rand`.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 42) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// Three fixed 2-D datasets of at most 30 points: separable, overlapping
/// with unequal classes, and one with an outlier.
pub fn svm_datasets() -> Vec<(String, Vec<FeatureVector>)> {
    let mut out = Vec::new();

    let mut rng = Lcg::new(1);
    let separable: Vec<_> = (0..20)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Gan } else { Label::Camera };
            let shift = if label == Label::Gan { 1.5 } else { -1.5 };
            let x = shift + rng.unit() * 2.0 - 1.0;
            let y = 0.5 * shift + rng.unit() * 3.0 - 1.5;
            FeatureVector::labeled(vec![x, y], label)
        })
        .collect();
    out.push(("separable-20".to_string(), separable));

    let mut rng = Lcg::new(2);
    let overlapping: Vec<_> = (0..30)
        .map(|i| {
            let label = if i < 12 { Label::Gan } else { Label::Camera };
            let c = if label == Label::Gan { (0.6, 0.4) } else { (-0.4, -0.2) };
            let x = c.0 + rng.unit() * 2.4 - 1.2;
            let y = c.1 + rng.unit() * 2.4 - 1.2;
            FeatureVector::labeled(vec![10.0 * x, y - 3.0], label)
        })
        .collect();
    out.push(("overlapping-30".to_string(), overlapping));

    let mut rng = Lcg::new(3);
    let mut outlier: Vec<_> = (0..24)
        .map(|i| {
            let label = if i % 3 == 0 { Label::Gan } else { Label::Camera };
            let c = if label == Label::Gan { 1.0 } else { -1.0 };
            let x = c + rng.unit() - 0.5;
            let y = -c + rng.unit() - 0.5;
            FeatureVector::labeled(vec![x, y], label)
        })
        .collect();
    outlier.push(FeatureVector::labeled(vec![-3.0, 3.0], Label::Gan));
    out.push(("outlier-25".to_string(), outlier));

    out
}

/// Per-dimension mean / population standard deviation standardization.
pub fn standardize(data: &[FeatureVector]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let n = data.len() as f64;
    let mut mean = [0.0; 2];
    for r in data {
        mean[0] += r.values[0] / n;
        mean[1] += r.values[1] / n;
    }
    let mut sd = [0.0; 2];
    for r in data {
        sd[0] += (r.values[0] - mean[0]).powi(2) / n;
        sd[1] += (r.values[1] - mean[1]).powi(2) / n;
    }
    let sd = sd.map(f64::sqrt);
    let xs = data
        .iter()
        .map(|r| [(r.values[0] - mean[0]) / sd[0], (r.values[1] - mean[1]) / sd[1]])
        .collect();
    let ys = data
        .iter()
        .map(|r| if r.label == Some(Label::Gan) { 1.0 } else { -1.0 })
        .collect();
    (xs, ys)
}

pub fn hinge_l2(w: [f64; 2], b: f64, xs: &[[f64; 2]], ys: &[f64], lambda: f64) -> f64 {
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (w[0] * x[0] + w[1] * x[1] + b)).max(0.0))
        .sum();
    0.5 * lambda * (w[0] * w[0] + w[1] * w[1]) + loss / xs.len() as f64
}

/// Lattice search over (w1, w2, b): a 0.05 lattice over [-4, 4]^3, then a
/// 0.01 lattice over the +/-0.1 cube around the coarse winner. The objective
/// is convex, so the refinement stays next to the global lattice minimum.
pub fn grid_search_min(xs: &[[f64; 2]], ys: &[f64], lambda: f64) -> (f64, [f64; 3]) {
    let mut best = (f64::INFINITY, [0.0; 3]);
    let coarse = |i: i32| i as f64 * 0.05;
    for i in -80..=80 {
        for j in -80..=80 {
            for k in -80..=80 {
                let p = [coarse(i), coarse(j), coarse(k)];
                let v = hinge_l2([p[0], p[1]], p[2], xs, ys, lambda);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
    }
    let center = best.1;
    for i in -10..=10 {
        for j in -10..=10 {
            for k in -10..=10 {
                let p = [
                    center[0] + i as f64 * 0.01,
                    center[1] + j as f64 * 0.01,
                    center[2] + k as f64 * 0.01,
                ];
                let v = hinge_l2([p[0], p[1]], p[2], xs, ys, lambda);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
    }
    best
}

/// Per-pixel threshold counting, the definition of the exposure features.
pub fn naive_exposure(pixels: &[u8]) -> ([f64; 4], [f64; 4]) {
    let n = pixels.len() as f64;
    let over = [240u8, 245, 250, 255].map(|t| pixels.iter().filter(|&&p| p >= t).count() as f64 / n);
    let under = [0u8, 5, 10, 15].map(|t| pixels.iter().filter(|&&p| p <= t).count() as f64 / n);
    (over, under)
}
