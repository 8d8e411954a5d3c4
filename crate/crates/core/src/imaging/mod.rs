//! Images for the image-to-image models and dataset assembly.
//!
//! Three images describe one RVE: the microstructure (matrix white, fibers
//! black), the matrix von Mises stress at ESoDI through a fixed colormap, and
//! the crack pattern as a two-tone horizontal displacement map with blue
//! fibers. Grid cell `(i, j)` maps to pixel `(i, ny − 1 − j)`.

mod colormap;
mod dataset;
mod render;
mod resample;

pub use colormap::{gray_of, ColorMap, STRESS_TABLE};
pub use dataset::{
    augment, read_manifest, split, write_manifest, write_samples, ImageFormat, ManifestRecord, Split,
    TripleSample,
};
pub use render::{
    phase_from_image, render_crack, render_microstructure, render_von_mises, to_grayscale, CrackThreshold,
    RangePolicy, BLACK, BLUE, WHITE,
};
pub use resample::{flip_vertical, resize};

use thiserror::Error;

/// Side length of the dataset images.
pub const IMAGE_SIZE: u32 = 256;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cannot hold out {n_val} of {total} samples")]
    Split { n_val: usize, total: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
