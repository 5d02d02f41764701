//! On-disk formats for the file-based pipeline stages: corpus manifests,
//! feature rows, scores and ROC curves (CSV and SVG).
//!
//! Feature values and scores are written in scientific notation with 17
//! significant digits, which reproduces every `f64` exactly when read back.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::classifier::FeatureVector;
use crate::error::{Error, Result};
use crate::evaluation::{RocCurve, ScoredExample};
use crate::Label;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound {
            path: path.to_path_buf(),
        },
        _ => Error::io(path, e),
    })?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

fn parse_label(path: &Path, line: usize, field: &str) -> Result<Option<Label>> {
    match field.trim() {
        "" => Ok(None),
        "0" => Ok(Some(Label::Camera)),
        "1" => Ok(Some(Label::Gan)),
        other => Err(Error::parse(path, line, format!("label must be 0, 1 or empty, got '{other}'"))),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("not a number: '{field}'")))
}

fn label_field(label: Option<Label>) -> String {
    label.map(|l| l.to_string()).unwrap_or_default()
}

/// One corpus image as listed in `manifest.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: Label,
    pub seed: u64,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut write = || -> csv::Result<()> {
        w.write_record(["path", "label", "seed"])?;
        for e in entries {
            w.write_record([e.path.clone(), e.label.to_string(), e.seed.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut r = open_csv(path)?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::parse(path, line, "expected path,label,seed"));
        }
        let label = parse_label(path, line, &record[1])?
            .ok_or_else(|| Error::parse(path, line, "manifest rows need a label"))?;
        let seed = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, "invalid seed"))?;
        out.push(ManifestEntry {
            path: record[0].to_string(),
            label,
            seed,
        });
    }
    Ok(out)
}

/// Writes `path,label,f1..fN`. Every row must have `dim` values.
pub fn write_features(path: &Path, dim: usize, rows: &[FeatureVector]) -> Result<()> {
    if let Some(bad) = rows.iter().find(|r| r.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let mut w = csv_writer(path)?;
    let mut write = || -> csv::Result<()> {
        let mut header = vec!["path".to_string(), "label".to_string()];
        header.extend((1..=dim).map(|i| format!("f{i}")));
        w.write_record(&header)?;
        for r in rows {
            let mut record = vec![r.source.clone().unwrap_or_default(), label_field(r.label)];
            record.extend(r.values.iter().map(|&v| fmt_float(v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(path, e))
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let mut r = open_csv(path)?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 3 || &headers[0] != "path" || &headers[1] != "label" {
        return Err(Error::parse(path, 1, "expected header path,label,f1..fN"));
    }
    let dim = headers.len() - 2;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim + 2 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: record.len().saturating_sub(2),
            });
        }
        let values = record
            .iter()
            .skip(2)
            .map(|f| parse_f64(path, line, f))
            .collect::<Result<Vec<_>>>()?;
        let source = (!record[0].is_empty()).then(|| record[0].to_string());
        out.push(FeatureVector {
            values,
            label: parse_label(path, line, &record[1])?,
            source,
        });
    }
    Ok(out)
}

/// One row of a scores file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub path: Option<String>,
    pub label: Option<Label>,
    pub score: f64,
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut write = || -> csv::Result<()> {
        w.write_record(["path", "label", "score"])?;
        for r in rows {
            w.write_record([
                r.path.clone().unwrap_or_default(),
                label_field(r.label),
                fmt_float(r.score),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(path, e))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = open_csv(path)?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label", "score"] {
        return Err(Error::parse(path, 1, "expected header path,label,score"));
    }
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        out.push(ScoreRow {
            path: (!record[0].is_empty()).then(|| record[0].to_string()),
            label: parse_label(path, line, &record[1])?,
            score: parse_f64(path, line, &record[2])?,
        });
    }
    Ok(out)
}

/// Scored examples for evaluation; every row must carry a label.
pub fn labeled_scores(path: &Path, rows: &[ScoreRow]) -> Result<Vec<ScoredExample>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let label = r
                .label
                .ok_or_else(|| Error::parse(path, i + 2, "evaluation needs labeled rows"))?;
            Ok(ScoredExample::new(r.score, label))
        })
        .collect()
}

/// `fpr,tpr` rows followed by a `# auc=<value>` line.
pub fn roc_csv(roc: &RocCurve) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (fpr, tpr) in &roc.points {
        let _ = writeln!(s, "{fpr},{tpr}");
    }
    let _ = writeln!(s, "# auc={}", roc.auc);
    s
}

pub fn write_roc_csv(path: &Path, roc: &RocCurve) -> Result<()> {
    write_text(path, &roc_csv(roc))
}

/// Parses the format written by [`roc_csv`] back into points and AUC.
pub fn read_roc_csv(path: &Path) -> Result<(Vec<(f64, f64)>, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    let mut auc = None;
    for (i, line) in text.lines().enumerate().skip(1) {
        if let Some(v) = line.strip_prefix("# auc=") {
            auc = Some(parse_f64(path, i + 1, v)?);
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, i + 1, "expected fpr,tpr"))?;
        points.push((parse_f64(path, i + 1, a)?, parse_f64(path, i + 1, b)?));
    }
    let auc = auc.ok_or_else(|| Error::parse(path, text.lines().count(), "missing '# auc=' line"))?;
    Ok((points, auc))
}

const SVG_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Standalone SVG plot of one or more ROC curves over the unit square, with
/// the chance diagonal for reference.
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let px = |fpr: f64| MARGIN + fpr * SIZE;
    let py = |tpr: f64| MARGIN + (1.0 - tpr) * SIZE;
    let total = SIZE + 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{total}" height="{total}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#,
            px(t),
            MARGIN + SIZE + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#,
            MARGIN - 6.0,
            py(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">false positive rate</text>"#,
        MARGIN + SIZE / 2.0,
        total - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">true positive rate</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for (i, (name, roc)) in curves.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let pts: Vec<String> = roc
            .points
            .iter()
            .map(|&(f, t)| format!("{:.3},{:.3}", px(f), py(t)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{} (AUC {:.3})</text>"#,
            MARGIN + SIZE - 150.0,
            MARGIN + SIZE - 12.0 - 16.0 * (curves.len() - 1 - i) as f64,
            escape_xml(name),
            roc.auc
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}

/// Resolves `entry` relative to the manifest that listed it.
pub fn manifest_relative(manifest: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}
