use super::resample::flip_vertical;
use super::ImagingError;
use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Microstructure, von Mises stress at ESoDI and crack pattern of one RVE.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSample {
    pub id: String,
    pub images: [RgbImage; 3],
    pub flipped: bool,
}

impl TripleSample {
    pub fn new(id: impl Into<String>, images: [RgbImage; 3]) -> Result<Self, ImagingError> {
        let dims = images[0].dimensions();
        if images.iter().any(|i| i.dimensions() != dims) {
            return Err(ImagingError::Shape("triple images must share dimensions".into()));
        }
        Ok(Self {
            id: id.into(),
            images,
            flipped: false,
        })
    }

    /// Vertical mirror of all three images.
    pub fn flipped_copy(&self) -> Self {
        Self {
            id: format!("{}_flip", self.id),
            images: [0, 1, 2].map(|k| flip_vertical(&self.images[k])),
            flipped: !self.flipped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Seeded random partition into `(train, val)` with `n_val` validation
/// items. Both parts keep the input order.
pub fn split<T>(items: Vec<T>, n_val: usize, seed: u64) -> Result<(Vec<T>, Vec<T>), ImagingError> {
    if n_val >= items.len() {
        return Err(ImagingError::Split {
            n_val,
            total: items.len(),
        });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; items.len()];
    for &k in &order[..n_val] {
        is_val[k] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (item, v) in items.into_iter().zip(is_val) {
        if v { val.push(item) } else { train.push(item) }
    }
    Ok((train, val))
}

/// Training set followed by the vertical mirror of every sample.
pub fn augment(train: &[TripleSample]) -> Vec<TripleSample> {
    train.iter().cloned().chain(train.iter().map(TripleSample::flipped_copy)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageFormat {
    #[default]
    Png,
    Jpeg,
}

impl ImageFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpeg => "jpg",
        }
    }

    pub fn save(&self, img: &RgbImage, path: &Path) -> Result<(), ImagingError> {
        let fmt = match self {
            ImageFormat::Png => image::ImageFormat::Png,
            ImageFormat::Jpeg => image::ImageFormat::Jpeg,
        };
        img.save_with_format(path, fmt)?;
        Ok(())
    }
}

/// One line of the dataset manifest. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub path1: String,
    pub path2: String,
    pub path3: String,
    pub flipped: bool,
    pub split: Split,
}

/// Writes every sample as `<split>/<id>_{1,2,3}.<ext>` under `dir` and
/// returns the manifest records in write order.
pub fn write_samples(
    dir: &Path,
    samples: &[TripleSample],
    which: Split,
    format: ImageFormat,
) -> Result<Vec<ManifestRecord>, ImagingError> {
    let sub = match which {
        Split::Train => "train",
        Split::Val => "val",
    };
    std::fs::create_dir_all(dir.join(sub))?;
    samples
        .iter()
        .map(|s| {
            let rel = |k: usize| format!("{sub}/{}_{k}.{}", s.id, format.extension());
            for k in 0..3 {
                format.save(&s.images[k], &dir.join(rel(k + 1)))?;
            }
            Ok(ManifestRecord {
                id: s.id.clone(),
                path1: rel(1),
                path2: rel(2),
                path3: rel(3),
                flipped: s.flipped,
                split: which,
            })
        })
        .collect()
}

/// JSON lines, one record per line.
pub fn write_manifest(w: &mut impl Write, records: &[ManifestRecord]) -> Result<(), ImagingError> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest(r: impl BufRead) -> Result<Vec<ManifestRecord>, ImagingError> {
    let mut out: Vec<ManifestRecord> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)?;
        if out.iter().any(|o| o.id == rec.id) {
            return Err(ImagingError::Manifest(format!("duplicate id {}", rec.id)));
        }
        out.push(rec);
    }
    Ok(out)
}
