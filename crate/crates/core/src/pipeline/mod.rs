//! Batch orchestration: generation, simulation, rendering, dataset assembly
//! and the evaluation helpers behind the command line tool.
//!
//! Output layout under the run directory:
//!
//! ```text
//! config.used            resolved configuration, seed included
//! rve/<id>.rve           generated arrangements
//! sim/<id>.csv           stress-strain curves
//! sim/<id>_esodi.snap    fields at ESoDI
//! sim/<id>_final.snap    fields at the last converged increment
//! img/<id>_{1,2,3}.png   microstructure, stress and crack images
//! dataset/manifest.jsonl split and augmented dataset
//! manifest_<stage>.jsonl one record per requested sample
//! timings_<stage>.jsonl  wall-clock seconds per sample
//! ```
//!
//! Manifests hold only deterministic content so that reruns with the same
//! seed reproduce them byte for byte. Timings live in separate files.

mod config;
mod review;
mod stages;

pub use config::{PipelineConfig, CONFIG_KEYS};
pub use review::{cmd_accuracy, cmd_inspect, cmd_metrics, MetricsRow};
pub use stages::{cmd_dataset, cmd_gen, cmd_render, cmd_simulate};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Kv(#[from] crate::kv::KvError),
    #[error(transparent)]
    Rve(#[from] crate::rve::RveError),
    #[error(transparent)]
    Material(#[from] crate::constitutive::ConstitutiveError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
    #[error(transparent)]
    Loss(#[from] crate::losses::LossError),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Generated,
    Simulated,
    Rendered,
    Failed,
}

/// One sample's outcome in one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub seed: u64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_stress: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub esodi_reached: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleRecord {
    pub fn is_ok(&self) -> bool {
        self.status != Status::Failed
    }

    fn failed(&self, error: impl Into<String>) -> Self {
        Self {
            status: Status::Failed,
            files: Vec::new(),
            error: Some(error.into()),
            ..self.clone()
        }
    }
}

/// Counts returned by every batch stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageReport {
    pub total: usize,
    pub failed: usize,
}

impl StageReport {
    fn of(records: &[SampleRecord]) -> Self {
        Self {
            total: records.len(),
            failed: records.iter().filter(|r| !r.is_ok()).count(),
        }
    }

    pub fn all_ok(&self) -> bool {
        self.failed == 0
    }
}

/// Options shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
}

pub fn sample_id(k: usize) -> String {
    format!("s{k:05}")
}

/// Seed of sample `k`: first word of the ChaCha stream `k` under the master
/// seed. Any sample can be regenerated on its own.
pub fn sample_seed(master: u64, k: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(k as u64);
    rng.next_u64()
}

/// Seed of the train/validation split, on a stream no sample uses.
pub fn split_seed(master: u64) -> u64 {
    sample_seed(master, usize::MAX)
}

pub fn manifest_path(out: &Path, stage: &str) -> std::path::PathBuf {
    out.join(format!("manifest_{stage}.jsonl"))
}

pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>, PipelineError> {
    let file = std::fs::File::open(path)
        .map_err(|e| PipelineError::Manifest(format!("{}: {e}", path.display())))?;
    let mut out: Vec<SampleRecord> = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| PipelineError::Manifest(format!("{} line {}: {e}", path.display(), k + 1)))?;
        if out.iter().any(|o| o.id == rec.id) {
            return Err(PipelineError::Manifest(format!("duplicate id {}", rec.id)));
        }
        out.push(rec);
    }
    Ok(out)
}

fn write_timings(out: &Path, stage: &str, timings: &[(String, f64)]) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(std::fs::File::create(out.join(format!("timings_{stage}.jsonl")))?);
    for (id, secs) in timings {
        serde_json::to_writer(&mut w, &serde_json::json!({ "id": id, "seconds": secs }))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `f` on a pool of `jobs` threads.
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}
