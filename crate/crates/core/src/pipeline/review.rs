use super::PipelineError;
use crate::losses::{accuracy, attention_loss, mae, read_labels, WeightFunction, WeightKind};
use image::{imageops, RgbImage};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

/// Image files of `dir` keyed by file stem.
fn images_by_id(dir: &Path) -> Result<BTreeMap<String, PathBuf>, PipelineError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", dir.display())))?
    {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if out.insert(id.clone(), path).is_some() {
            return Err(PipelineError::Input(format!("{}: two images share id {id}", dir.display())));
        }
    }
    Ok(out)
}

/// Predicted and target images matched by id. Any unmatched id is an error.
fn pairs(pred: &Path, target: &Path) -> Result<Vec<(String, RgbImage, RgbImage)>, PipelineError> {
    let p = images_by_id(pred)?;
    let t = images_by_id(target)?;
    if let Some(id) = p.keys().find(|k| !t.contains_key(*k)).or_else(|| t.keys().find(|k| !p.contains_key(*k))) {
        return Err(PipelineError::Input(format!("unpaired id {id}")));
    }
    if p.is_empty() {
        return Err(PipelineError::Input(format!("no images in {}", pred.display())));
    }
    p.into_iter()
        .map(|(id, path)| {
            let a = image::open(&path)?.to_rgb8();
            let b = image::open(&t[&id])?.to_rgb8();
            Ok((id, a, b))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub id: String,
    pub mae: f64,
    pub attention_tr: f64,
    pub attention_val: f64,
}

/// Per-pair MAE and attention losses written as CSV to `report`, followed
/// by a `mean` row. Returns the per-pair rows.
pub fn cmd_metrics(
    pred: &Path,
    target: &Path,
    weights: &WeightFunction,
    report: &Path,
) -> Result<Vec<MetricsRow>, PipelineError> {
    let tr = WeightFunction { kind: WeightKind::Training, ..*weights };
    let val = WeightFunction { kind: WeightKind::Validation, ..*weights };
    let rows = pairs(pred, target)?
        .into_iter()
        .map(|(id, p, t)| {
            Ok(MetricsRow {
                mae: mae(&p, &t)?,
                attention_tr: attention_loss(&p, &t, &tr)?,
                attention_val: attention_loss(&p, &t, &val)?,
                id,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let n = rows.len() as f64;
    let mean = MetricsRow {
        id: "mean".into(),
        mae: rows.iter().map(|r| r.mae).sum::<f64>() / n,
        attention_tr: rows.iter().map(|r| r.attention_tr).sum::<f64>() / n,
        attention_val: rows.iter().map(|r| r.attention_val).sum::<f64>() / n,
    };
    let mut w = csv::Writer::from_path(report)?;
    for r in rows.iter().chain(std::iter::once(&mean)) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

/// Writes one side-by-side sheet per pair (prediction left, target right)
/// into `out`, plus `labels.csv` listing every id for manual labeling.
/// Returns the number of sheets.
pub fn cmd_inspect(pred: &Path, target: &Path, out: &Path) -> Result<usize, PipelineError> {
    let pairs = pairs(pred, target)?;
    std::fs::create_dir_all(out)?;
    const GAP: u32 = 4;
    let mut ids = Vec::new();
    for (id, p, t) in &pairs {
        let (w, h) = (p.width() + GAP + t.width(), p.height().max(t.height()));
        let mut sheet = RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
        imageops::replace(&mut sheet, p, 0, 0);
        imageops::replace(&mut sheet, t, (p.width() + GAP) as i64, 0);
        sheet.save_with_format(out.join(format!("{id}.png")), image::ImageFormat::Png)?;
        ids.push(id.clone());
    }
    let mut w = csv::Writer::from_path(out.join("labels.csv"))?;
    w.write_record(["sample_id", "label"])?;
    for id in ids {
        w.write_record([id.as_str(), ""])?;
    }
    w.flush()?;
    Ok(pairs.len())
}

/// Accuracy in percent from a filled-in `sample_id,label` file.
pub fn cmd_accuracy(labels: &Path) -> Result<f64, PipelineError> {
    let file = std::fs::File::open(labels).map_err(|e| PipelineError::Input(format!("{}: {e}", labels.display())))?;
    let (_, tally) = read_labels(file)?;
    Ok(accuracy(&tally)?)
}
