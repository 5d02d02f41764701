//! Acceptance suite. Each criterion runs at its pinned tolerance and prints
//! one PASS/FAIL line; the test fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use colorcue::classifier::{train_svm, SvmParams};
use colorcue::evaluation::{
    auc_oracle, roc_curve, run_ablation, shuffle_labels, ScoredExample,
};
use colorcue::experiment::{
    corpus_stats, null_seed, reproduce, simulate_corpus, ExperimentConfig,
};
use colorcue::features::{chroma_histogram, exposure_features, FeatureSet};
use colorcue::imageio::{GrayImage, RgbImage};
use colorcue::simulators::{pixelwise_normalize, plane_normalize, FeatureMap};
use colorcue::Label;
use common::{grid_search_min, naive_exposure, standardize, svm_datasets, Lcg};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian(rng: &mut Lcg) -> f64 {
    // Box-Muller
    let u1 = rng.unit().max(1e-300);
    let u2 = rng.unit();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ac1_normalization_invariants() -> Outcome {
    const MAPS: usize = 1000;
    let start = Instant::now();
    let mut rng = Lcg::new(101);
    let (mut worst_rms, mut worst_mean, mut worst_std) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..MAPS {
        let depth = 2 + rng.below(31) as usize;
        let w = 1 + rng.below(12) as usize;
        let h = 1 + rng.below(12) as usize;
        let scale = 10f64.powf(rng.unit() * 4.0 - 2.0);
        let offset = gaussian(&mut rng) * 3.0;
        let values: Vec<f64> = (0..depth * w * h)
            .map(|_| offset + scale * gaussian(&mut rng))
            .collect();
        let fm = FeatureMap::new(depth, w, h, values).unwrap();

        let out = pixelwise_normalize(&fm);
        for y in 0..h {
            for x in 0..w {
                let input = fm.pixel(x, y);
                let in_ms = input.iter().map(|v| v * v).sum::<f64>() / depth as f64;
                if in_ms < 1e-4 {
                    continue; // not far above epsilon
                }
                let b = out.pixel(x, y);
                let rms = (b.iter().map(|v| v * v).sum::<f64>() / depth as f64).sqrt();
                worst_rms = worst_rms.max((rms - 1.0).abs());
            }
        }

        let beta: Vec<f64> = (0..depth).map(|_| gaussian(&mut rng) * 2.0).collect();
        let gamma: Vec<f64> = (0..depth).map(|_| gaussian(&mut rng) * 2.0).collect();
        let out = plane_normalize(&fm, &beta, &gamma).unwrap();
        let n = (w * h) as f64;
        for c in 0..depth {
            let input = fm.plane(c);
            let in_mean = input.iter().sum::<f64>() / n;
            let in_var = input.iter().map(|v| (v - in_mean).powi(2)).sum::<f64>() / n;
            let plane = out.plane(c);
            let mean = plane.iter().sum::<f64>() / n;
            worst_mean = worst_mean.max((mean - beta[c]).abs());
            if in_var > 1e-4 {
                let sd = (plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                worst_std = worst_std.max((sd - gamma[c].abs()).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst_rms <= 1e-3, || format!("pixel RMS off by {worst_rms:e}"))?;
    check(worst_mean <= 1e-6, || format!("plane mean off by {worst_mean:e}"))?;
    check(worst_std <= 1e-3, || format!("plane std off by {worst_std:e}"))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max |rms-1|={worst_rms:.1e}, max |mean-beta|={worst_mean:.1e}, max |std-|gamma||={worst_std:.1e}, {elapsed:.2?}"
    ))
}

fn ac2_saturation_separation() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    check(cfg.sim.image_size == 64 && cfg.train_count == 200 && cfg.test_count == 200, || {
        "default experiment is not 200+200 / 200+200 at 64x64".into()
    })?;
    let train = simulate_corpus(&cfg.train_sim()).map_err(|e| e.to_string())?;
    let test = simulate_corpus(&cfg.test_sim()).map_err(|e| e.to_string())?;
    let run = run_ablation(&train, &test, FeatureSet::SaturationOver, &cfg.svm_params())
        .map_err(|e| e.to_string())?;
    let stats = corpus_stats(&train).map_err(|e| e.to_string())?;
    let mean_255 = |label| stats.iter().find(|s| s.label == label).unwrap().mean_f_over[3];
    let (gan, camera) = (mean_255(Label::Gan), mean_255(Label::Camera));
    let elapsed = start.elapsed();
    check(run.roc.auc >= 0.95, || format!("test AUC {} < 0.95", run.roc.auc))?;
    check(gan < camera, || format!("GAN mean f_over[255] {gan} not below camera {camera}"))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "AUC={:.4}, mean f_over[255] gan={gan:.5} camera={camera:.5}, {elapsed:.2?}",
        run.roc.auc
    ))
}

struct ReproduceRuns {
    first: tempfile::TempDir,
    second: tempfile::TempDir,
    cfg: ExperimentConfig,
}

fn run_reproduce_twice() -> ReproduceRuns {
    let cfg = ExperimentConfig::default();
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    reproduce(&cfg, first.path()).unwrap();
    reproduce(&cfg, second.path()).unwrap();
    ReproduceRuns { first, second, cfg }
}

fn ac3_ablation_shape(runs: &ReproduceRuns) -> Outcome {
    let summary = std::fs::read_to_string(runs.first.path().join("summary.csv"))
        .map_err(|e| e.to_string())?;
    let auc_of = |name: &str| -> Result<f64, String> {
        summary
            .lines()
            .find(|l| l.starts_with(&format!("{name},")))
            .and_then(|l| l.split(',').nth(4))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("summary.csv has no AUC for {name}"))
    };
    let over = auc_of("saturation_over")?;
    let both = auc_of("saturation_both")?;
    let diff_line = summary
        .lines()
        .find(|l| l.starts_with("# auc_difference_both_minus_over="))
        .ok_or("summary.csv has no AUC difference line")?;
    let diff: f64 = diff_line
        .split('=')
        .nth(1)
        .and_then(|v| v.parse().ok())
        .ok_or("unparseable AUC difference")?;
    check(over > 0.9, || format!("f_over-only AUC {over} <= 0.9"))?;
    check(both > 0.9, || format!("f_over+f_under AUC {both} <= 0.9"))?;
    check((diff - (both - over)).abs() < 1e-12, || "reported difference is inconsistent".into())?;
    Ok(format!("over-only AUC={over:.4}, over+under AUC={both:.4}, difference={diff:+.4}"))
}

fn random_score_set(rng: &mut Lcg) -> Vec<ScoredExample> {
    let n = 2 + rng.below(199) as usize;
    let alphabet = 1 + rng.below(40); // small alphabets force ties
    let mut data: Vec<ScoredExample> = (0..n)
        .map(|_| {
            let score = rng.below(alphabet) as f64 * 0.37 - 3.0;
            let label = if rng.below(2) == 0 { Label::Camera } else { Label::Gan };
            ScoredExample::new(score, label)
        })
        .collect();
    data[0].label = Label::Gan;
    data[1].label = Label::Camera;
    if rng.below(4) == 0 {
        // an explicit cross-class tie
        data[1].score = data[0].score;
    }
    data
}

fn ac4_auc_oracle_equivalence() -> Outcome {
    let mut rng = Lcg::new(404);
    let mut worst = 0.0f64;
    let mut tied_sets = 0;
    for _ in 0..100 {
        let data = random_score_set(&mut rng);
        let mut scores: Vec<f64> = data.iter().map(|s| s.score).collect();
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        if scores.len() < data.len() {
            tied_sets += 1;
        }
        let trapezoid = roc_curve(&data).map_err(|e| e.to_string())?.auc;
        let pairwise = auc_oracle(&data).map_err(|e| e.to_string())?;
        worst = worst.max((trapezoid - pairwise).abs());
    }
    check(worst <= 1e-9, || format!("max |trapezoid - Mann-Whitney| = {worst:e}"))?;
    check(tied_sets > 0, || "no score set contained ties".into())?;
    Ok(format!("100 sets ({tied_sets} with ties), max difference {worst:.1e}"))
}

fn ac5_null_calibration(runs: &ReproduceRuns) -> Outcome {
    let scores = colorcue::formats::read_scores(&runs.first.path().join("scores_saturation_over.csv"))
        .map_err(|e| e.to_string())?;
    let data: Vec<ScoredExample> = scores
        .iter()
        .map(|r| ScoredExample::new(r.score, r.label.unwrap()))
        .collect();
    check(data.len() == 400, || format!("expected n = 400, got {}", data.len()))?;
    let shuffled = shuffle_labels(&data, null_seed(runs.cfg.seed()));
    let auc = roc_curve(&shuffled).map_err(|e| e.to_string())?.auc;
    check((0.45..=0.55).contains(&auc), || format!("label-shuffled AUC {auc} outside [0.45, 0.55]"))?;
    Ok(format!("n=400 label-shuffled AUC={auc:.4}"))
}

fn ac6_svm_optimality() -> Outcome {
    let mut report = Vec::new();
    for (name, data) in svm_datasets() {
        check(data.len() <= 30, || format!("{name} has {} points", data.len()))?;
        let (xs, ys) = standardize(&data);
        let (grid, _) = grid_search_min(&xs, &ys, 0.1);
        let params = SvmParams {
            lambda: Some(0.1),
            ..SvmParams::default()
        };
        let model = train_svm(&data, &params).map_err(|e| e.to_string())?;
        let obj = model.training.final_objective;
        check(obj <= 1.01 * grid, || format!("{name}: objective {obj} vs lattice {grid}"))?;
        report.push(format!("{name} {:.4}", obj / grid));
    }
    Ok(format!("objective / lattice minimum: {}", report.join(", ")))
}

fn ac7_feature_exactness() -> Outcome {
    let mut rng = Lcg::new(707);
    for i in 0..1000 {
        let w = 1 + rng.below(40) as usize;
        let h = 1 + rng.below(40) as usize;
        // bias some images toward the extremes so every threshold is exercised
        let mode = rng.below(3);
        let pixels: Vec<u8> = (0..w * h)
            .map(|_| match mode {
                0 => rng.below(256) as u8,
                1 => 230 + rng.below(26) as u8,
                _ => rng.below(20) as u8,
            })
            .collect();
        let (over, under) = naive_exposure(&pixels);
        let f = exposure_features(&GrayImage::new(w, h, pixels).unwrap()).map_err(|e| e.to_string())?;
        check(f.f_over == over, || format!("image {i}: f_over {:?} vs {over:?}", f.f_over))?;
        check(f.f_under == under, || format!("image {i}: f_under {:?} vs {under:?}", f.f_under))?;
        check(f.f_over.windows(2).all(|p| p[0] >= p[1]), || format!("image {i}: f_over increases"))?;
        check(f.f_under.windows(2).all(|p| p[0] <= p[1]), || format!("image {i}: f_under decreases"))?;
    }
    Ok("1000 images match the per-pixel oracle exactly; orderings hold".into())
}

fn ac8_chromaticity() -> Outcome {
    let mut rng = Lcg::new(808);
    let mut worst_mass = 0.0f64;
    for i in 0..300 {
        let n = 1 + rng.below(200) as usize;
        let black_share = rng.below(4);
        let pixels: Vec<[u8; 3]> = (0..n)
            .map(|_| {
                if rng.below(4) < black_share {
                    [0, 0, 0]
                } else {
                    [rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8]
                }
            })
            .collect();
        let blacks = pixels.iter().filter(|p| **p == [0, 0, 0]).count();
        let bins = 2 + rng.below(80) as usize;
        let h = chroma_histogram(&RgbImage::new(n, 1, pixels).unwrap(), bins).map_err(|e| e.to_string())?;
        check(h.skipped_pixel_count() == blacks, || format!("set {i}: skipped count wrong"))?;
        check(h.valid_pixel_count() + h.skipped_pixel_count() == n, || format!("set {i}: count not conserved"))?;
        let total: f64 = h.mass().iter().sum();
        if h.valid_pixel_count() > 0 {
            worst_mass = worst_mass.max((total - 1.0).abs());
        } else {
            check(total == 0.0, || format!("set {i}: all-black image has mass"))?;
        }
    }
    check(worst_mass <= 1e-9, || format!("mass off by {worst_mass:e}"))?;

    for i in 0..300 {
        let base = [1 + rng.below(50), rng.below(51), rng.below(51)];
        let max = *base.iter().max().unwrap();
        let k = 1 + rng.below(255 / max);
        let a = RgbImage::new(1, 1, vec![base.map(|v| v as u8)]).unwrap();
        let b = RgbImage::new(1, 1, vec![base.map(|v| (v * k) as u8)]).unwrap();
        for bins in [2, 7, 64, 100] {
            let ha = chroma_histogram(&a, bins).map_err(|e| e.to_string())?;
            let hb = chroma_histogram(&b, bins).map_err(|e| e.to_string())?;
            check(ha == hb, || format!("case {i}: {base:?} x{k} lands in a different bin ({bins} bins)"))?;
        }
    }
    let pair_a = chroma_histogram(&RgbImage::filled(2, 2, [10, 20, 30]).unwrap(), 64).unwrap();
    let pair_b = chroma_histogram(&RgbImage::filled(2, 2, [20, 40, 60]).unwrap(), 64).unwrap();
    check(pair_a == pair_b, || "(10,20,30) and (20,40,60) differ".into())?;
    Ok(format!("max |mass-1|={worst_mass:.1e}; black pixels skipped; exact-ratio scale invariance holds"))
}

fn ac9_determinism(runs: &ReproduceRuns) -> Outcome {
    let mut compared = 0;
    let mut names: Vec<_> = std::fs::read_dir(runs.first.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in &names {
        if !(name.ends_with(".csv") || name.ends_with(".json")) {
            continue;
        }
        let a = std::fs::read(runs.first.path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(runs.second.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        check(a == b, || format!("{name} differs between runs"))?;
        compared += 1;
    }
    check(compared >= 10, || format!("only {compared} CSV/JSON artifacts"))?;
    Ok(format!("{compared} CSV/JSON artifacts byte-identical across two runs"))
}

#[test]
fn acceptance() {
    let runs = run_reproduce_twice();
    let criteria: Vec<Criterion> = vec![
        ("AC1 normalization invariants", Box::new(ac1_normalization_invariants)),
        ("AC2 saturation-cue separation", Box::new(ac2_saturation_separation)),
        ("AC3 ablation harness", Box::new(|| ac3_ablation_shape(&runs))),
        ("AC4 AUC oracle equivalence", Box::new(ac4_auc_oracle_equivalence)),
        ("AC5 null calibration", Box::new(|| ac5_null_calibration(&runs))),
        ("AC6 SVM objective optimality", Box::new(ac6_svm_optimality)),
        ("AC7 feature monotonicity and exactness", Box::new(ac7_feature_exactness)),
        ("AC8 chromaticity correctness", Box::new(ac8_chromaticity)),
        ("AC9 determinism", Box::new(|| ac9_determinism(&runs))),
    ];
    let mut failures = Vec::new();
    for (name, criterion) in &criteria {
        match criterion() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failures.push(*name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
