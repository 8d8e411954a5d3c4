//! Pixel losses, inspection accuracy and epoch selection.
//!
//! The attention loss weights the absolute error of each pixel by a Gaussian
//! of the target's grayscale value, `W(g) = α·exp(−(g − β)²/(2γ²)) + 1` for
//! training and `exp(−(g − β)²/(2γ²))` for validation, so the loss
//! concentrates on the stress band around grayscale `β`.

mod files;

pub use files::{read_labels, read_loss_curve, write_loss_curve, Label, LabelRecord};

use image::RgbImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((u32, u32), (u32, u32)),
    #[error("invalid weight function: {0}")]
    InvalidWeights(String),
    #[error("empty tally")]
    EmptyTally,
    #[error("invalid epoch window: {0}")]
    Window(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read access to a 3-channel image with values on the 0–255 scale.
pub trait Pixels {
    fn dims(&self) -> (u32, u32);
    fn value(&self, x: u32, y: u32, c: usize) -> f64;

    fn gray(&self, x: u32, y: u32) -> f64 {
        (self.value(x, y, 0) + self.value(x, y, 1) + self.value(x, y, 2)) / 3.0
    }
}

impl Pixels for RgbImage {
    fn dims(&self) -> (u32, u32) {
        self.dimensions()
    }

    fn value(&self, x: u32, y: u32, c: usize) -> f64 {
        self.get_pixel(x, y).0[c] as f64
    }
}

/// Real-valued RGB image, e.g. an unquantized network output.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    /// Row-major pixels.
    pub data: Vec<[f64; 3]>,
}

impl FloatImage {
    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [f64; 3]) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, data }
    }
}

impl From<&RgbImage> for FloatImage {
    fn from(img: &RgbImage) -> Self {
        Self::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y).0.map(f64::from))
    }
}

impl Pixels for FloatImage {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn value(&self, x: u32, y: u32, c: usize) -> f64 {
        self.data[(y * self.width + x) as usize][c]
    }
}

fn check_shapes(a: &impl Pixels, b: &impl Pixels) -> Result<(u32, u32), LossError> {
    if a.dims() != b.dims() {
        return Err(LossError::Shape(a.dims(), b.dims()));
    }
    Ok(a.dims())
}

/// Mean absolute error over all pixels and channels.
pub fn mae(pred: &impl Pixels, target: &impl Pixels) -> Result<f64, LossError> {
    weighted_mean(pred, target, |_| 1.0)
}

fn weighted_mean(
    pred: &impl Pixels,
    target: &impl Pixels,
    weight: impl Fn(f64) -> f64,
) -> Result<f64, LossError> {
    let (w, h) = check_shapes(pred, target)?;
    if w == 0 || h == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let wt = weight(target.gray(x, y));
            for c in 0..3 {
                sum += wt * (pred.value(x, y, c) - target.value(x, y, c)).abs();
            }
        }
    }
    Ok(sum / (3.0 * w as f64 * h as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightKind {
    #[default]
    Training,
    Validation,
}

/// Units of the width parameter `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaUnits {
    /// `γ` is a fraction of the 0–255 grayscale range: `γ_eff = 255·γ`.
    #[default]
    Fraction,
    /// `γ` is used on the grayscale axis as is.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFunction {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub units: GammaUnits,
    pub kind: WeightKind,
}

impl Default for WeightFunction {
    fn default() -> Self {
        Self {
            alpha: 50.0,
            beta: 60.0,
            gamma: 0.1,
            units: GammaUnits::Fraction,
            kind: WeightKind::Training,
        }
    }
}

impl WeightFunction {
    pub fn validation() -> Self {
        Self {
            kind: WeightKind::Validation,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.alpha >= 0.0) {
            return Err(LossError::InvalidWeights(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if !(0.0..=255.0).contains(&self.beta) {
            return Err(LossError::InvalidWeights(format!("beta = {} outside [0, 255]", self.beta)));
        }
        if !(self.gamma > 0.0) {
            return Err(LossError::InvalidWeights(format!("gamma = {} must be > 0", self.gamma)));
        }
        Ok(())
    }

    pub fn gamma_eff(&self) -> f64 {
        match self.units {
            GammaUnits::Fraction => 255.0 * self.gamma,
            GammaUnits::Raw => self.gamma,
        }
    }

    fn bump(&self, g: f64) -> f64 {
        let s = self.gamma_eff();
        (-(g - self.beta).powi(2) / (2.0 * s * s)).exp()
    }

    pub fn weight(&self, g: f64) -> f64 {
        match self.kind {
            WeightKind::Training => weight_tr(g, self),
            WeightKind::Validation => weight_val(g, self),
        }
    }
}

/// Training weight `α·exp(−(g − β)²/(2γ²)) + 1`, in `[1, α + 1]`.
pub fn weight_tr(g: f64, w: &WeightFunction) -> f64 {
    w.alpha * w.bump(g) + 1.0
}

/// Validation weight `exp(−(g − β)²/(2γ²))`, in `(0, 1]`.
pub fn weight_val(g: f64, w: &WeightFunction) -> f64 {
    w.bump(g)
}

/// `Mean(W(Y) ∘ |Ŷ − Y|)` with the weight map taken from the target's
/// grayscale and shared by its three channels.
pub fn attention_loss(pred: &impl Pixels, target: &impl Pixels, w: &WeightFunction) -> Result<f64, LossError> {
    w.validate()?;
    weighted_mean(pred, target, |g| w.weight(g))
}

/// Expert labels of predicted crack patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InspectionTally {
    pub good: u64,
    pub partly_good: u64,
    pub bad: u64,
}

impl InspectionTally {
    pub fn total(&self) -> u64 {
        self.good + self.partly_good + self.bad
    }
}

/// `(n_G + ½·n_PG) / (n_G + n_PG + n_B) × 100`.
pub fn accuracy(t: &InspectionTally) -> Result<f64, LossError> {
    if t.total() == 0 {
        return Err(LossError::EmptyTally);
    }
    Ok((t.good as f64 + 0.5 * t.partly_good as f64) / t.total() as f64 * 100.0)
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(curve: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..curve.len())
        .map(|k| {
            let (a, b) = (k.saturating_sub(half), (k + half + 1).min(curve.len()));
            curve[a..b].iter().sum::<f64>() / (b - a) as f64
        })
        .collect()
}

/// Epoch in `first..=last` with the smallest (optionally smoothed) loss.
/// Ties go to the earlier epoch.
pub fn select_optimal_epoch(
    curve: &[f64],
    first: usize,
    last: usize,
    smoothing: Option<usize>,
) -> Result<usize, LossError> {
    if first > last {
        return Err(LossError::Window(format!("empty window {first}..={last}")));
    }
    if last >= curve.len() {
        return Err(LossError::Window(format!(
            "window end {last} beyond curve of {} epochs",
            curve.len()
        )));
    }
    let values = match smoothing {
        Some(k) if k > 1 => moving_average(curve, k),
        _ => curve.to_vec(),
    };
    let mut best = first;
    for e in first..=last {
        if values[e] < values[best] {
            best = e;
        }
    }
    Ok(best)
}
