use super::colormap::{gray_of, ColorMap};
use crate::grid::{Grid, Phase, PhaseGrid};
use image::{Rgb, RgbImage};

pub const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
pub const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
pub const BLUE: Rgb<u8> = Rgb([0, 0, 255]);

/// Image of a grid: cell `(i, j)` becomes pixel `(i, ny − 1 − j)`, so that
/// the grid's bottom row is the image's bottom row.
fn grid_image<T>(grid: &Grid<T>, mut paint: impl FnMut(&T) -> Rgb<u8>) -> RgbImage {
    let (nx, ny) = (grid.nx() as u32, grid.ny() as u32);
    RgbImage::from_fn(nx, ny, |x, y| paint(grid.get(x as usize, (ny - 1 - y) as usize)))
}

/// Matrix white, fiber black.
pub fn render_microstructure(phase: &PhaseGrid) -> RgbImage {
    grid_image(phase, |p| match p {
        Phase::Matrix => WHITE,
        Phase::Fiber => BLACK,
    })
}

/// Recovers the phase grid from a microstructure image (dark pixels are
/// fiber).
pub fn phase_from_image(img: &RgbImage) -> PhaseGrid {
    let (w, h) = img.dimensions();
    Grid::from_fn(w as usize, h as usize, |i, j| {
        let px = img.get_pixel(i as u32, h - 1 - j as u32);
        if gray_of(px.0) < 128.0 {
            Phase::Fiber
        } else {
            Phase::Matrix
        }
    })
}

/// How scalar fields are normalized before the color lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangePolicy {
    /// The same range for every image (MPa for stress).
    Fixed { lo: f64, hi: f64 },
    /// Per-image minimum and maximum of the finite values.
    MinMax,
}

impl RangePolicy {
    /// `[0, 1.5·σt]`.
    pub fn for_tensile_strength(sigma_t: f64) -> Self {
        RangePolicy::Fixed {
            lo: 0.0,
            hi: 1.5 * sigma_t,
        }
    }

    /// Normalization bounds for `values`, or `None` if degenerate.
    pub fn bounds<'a>(&self, values: impl Iterator<Item = &'a f64>) -> Option<(f64, f64)> {
        let (lo, hi) = match *self {
            RangePolicy::Fixed { lo, hi } => (lo, hi),
            RangePolicy::MinMax => values
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        };
        (hi > lo).then_some((lo, hi))
    }
}

/// Colors a scalar field through `cmap`. NaN cells (masked fibers) and
/// degenerate ranges use entry 0.
pub fn render_von_mises(field: &Grid<f64>, cmap: &ColorMap, range: RangePolicy) -> RgbImage {
    let bounds = range.bounds(field.iter());
    grid_image(field, |&v| {
        let t = match bounds {
            Some((lo, hi)) if v.is_finite() => (v - lo) / (hi - lo),
            _ => f64::NAN,
        };
        Rgb(cmap.color(t))
    })
}

/// Per-pixel mean of the three channels, row-major in image order.
pub fn to_grayscale(img: &RgbImage) -> Vec<f64> {
    img.pixels().map(|p| gray_of(p.0)).collect()
}

/// Split level of the crack image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrackThreshold {
    /// Median of the matrix displacements.
    Median,
    /// Midpoint of the smallest and largest matrix displacement; splits any
    /// two-level field at its step.
    #[default]
    Midrange,
}

impl std::str::FromStr for CrackThreshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median" => Ok(Self::Median),
            "midrange" => Ok(Self::Midrange),
            _ => Err(format!("unknown crack threshold {s:?} (median | midrange)")),
        }
    }
}

impl CrackThreshold {
    pub fn level(&self, ux: &Grid<f64>, phase: &PhaseGrid) -> f64 {
        let mut v: Vec<f64> = ux
            .iter()
            .zip(phase.iter())
            .filter(|(u, p)| **p == Phase::Matrix && u.is_finite())
            .map(|(u, _)| *u)
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        match self {
            CrackThreshold::Median => {
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            }
            CrackThreshold::Midrange => {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                0.5 * (lo + hi)
            }
        }
    }
}

/// Two-tone crack image: matrix cells displaced beyond the threshold are
/// white, the rest black; fibers are blue.
pub fn render_crack(ux: &Grid<f64>, phase: &PhaseGrid, threshold: CrackThreshold) -> RgbImage {
    assert_eq!((ux.nx(), ux.ny()), (phase.nx(), phase.ny()), "grids must share dimensions");
    let level = threshold.level(ux, phase);
    let cells = Grid::from_fn(ux.nx(), ux.ny(), |i, j| (*ux.get(i, j), *phase.get(i, j)));
    grid_image(&cells, |&(u, p)| match p {
        Phase::Fiber => BLUE,
        Phase::Matrix if u > level => WHITE,
        Phase::Matrix => BLACK,
    })
}
