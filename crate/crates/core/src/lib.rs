//! Microstructure-to-failure data pipeline for unidirectional fiber composites.
//!
//! * [`rve`]: random fiber arrangements matched to a nearest-neighbor-distance
//!   histogram.
//! * [`constitutive`]: matrix elasto-plastic damage law, fiber elasticity and a
//!   bilinear cohesive law.
//! * [`solver`]: regular-grid plane-strain simulation under transverse tension.
//! * [`imaging`]: microstructure, stress and crack images plus dataset handling.
//! * [`losses`]: pixel losses with Gaussian attention weights, accuracy tallies
//!   and epoch selection.
//! * [`pipeline`]: batch orchestration behind the `cfrp` command line tool.

pub mod constitutive;
pub mod grid;
pub mod imaging;
pub mod kv;
pub mod losses;
pub mod pipeline;
pub mod rve;
pub mod solver;

pub use grid::{Grid, Phase, PhaseGrid};
pub use rve::{BoundaryPolicy, Fiber, GenConfig, NndHistogram, Rve, RveError, RveSpec};
