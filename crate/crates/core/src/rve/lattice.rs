use super::{BoundaryPolicy, Fiber, Rve, RveError, RveSpec};

/// Densest hexagonal packing of equal disks in the plane.
const HEX_PACKING_DENSITY: f64 = 0.906_899_682_117_108_9;

struct Layout {
    cols: usize,
    rows: usize,
    pitch_x: f64,
    pitch_y: f64,
    score: f64,
}

/// Places `spec.n_fibers` on a staggered lattice (odd rows shifted by half the
/// horizontal pitch). Among all column counts that fit, the one with the
/// largest minimum center distance wins.
pub fn init_staggered(spec: &RveSpec, boundary: BoundaryPolicy) -> Result<Rve, RveError> {
    spec.validate()?;
    let n = spec.n_fibers;
    let r = spec.fiber_radius;
    if n == 0 {
        return Ok(Rve::new(*spec, boundary, Vec::new()));
    }
    let packed = n as f64 * std::f64::consts::PI * r * r;
    if packed > HEX_PACKING_DENSITY * spec.width * spec.height {
        return Err(RveError::Infeasible(format!(
            "{n} fibers of radius {r} exceed hexagonal packing capacity of a {}x{} domain",
            spec.width, spec.height
        )));
    }

    let d = spec.min_center_distance();
    let (x0, y0, usable_w, usable_h) = match boundary {
        BoundaryPolicy::Contained => {
            let (uw, uh) = (spec.width - 2.0 * r, spec.height - 2.0 * r);
            if uw < 0.0 || uh < 0.0 {
                return Err(RveError::Infeasible("fiber wider than domain".into()));
            }
            (r, r, uw, uh)
        }
        BoundaryPolicy::Periodic => (0.0, 0.0, spec.width, spec.height),
    };

    let mut best: Option<Layout> = None;
    for cols in 1..=n {
        let rows = n.div_ceil(cols);
        let layout = match boundary {
            BoundaryPolicy::Contained => contained_layout(cols, rows, usable_w, usable_h),
            BoundaryPolicy::Periodic => periodic_layout(cols, rows, usable_w, usable_h),
        };
        if layout.score + 1e-12 >= d && best.as_ref().is_none_or(|b| layout.score > b.score) {
            best = Some(layout);
        }
    }
    let layout = best.ok_or_else(|| {
        RveError::Infeasible(format!(
            "no staggered lattice hosts {n} fibers at spacing {d}"
        ))
    })?;

    let mut fibers = Vec::with_capacity(n);
    'rows: for row in 0..layout.rows {
        let shift = if row % 2 == 1 && layout.cols > 1 { 0.5 * layout.pitch_x } else { 0.0 };
        let (sx, sy) = match boundary {
            BoundaryPolicy::Contained => {
                let sy = if layout.rows == 1 { 0.5 * usable_h } else { 0.0 };
                let sx = if layout.cols == 1 && layout.rows == 1 { 0.5 * usable_w } else { 0.0 };
                (sx, sy)
            }
            BoundaryPolicy::Periodic => (0.25 * layout.pitch_x, 0.5 * layout.pitch_y),
        };
        for col in 0..layout.cols {
            if fibers.len() == n {
                break 'rows;
            }
            // Pitches are infinite along a single row or column.
            let x = x0 + sx + shift + if col == 0 { 0.0 } else { col as f64 * layout.pitch_x };
            let y = y0 + sy + if row == 0 { 0.0 } else { row as f64 * layout.pitch_y };
            fibers.push(Fiber {
                center: [x, y],
                radius: r,
            });
        }
    }
    Ok(Rve::new(*spec, boundary, fibers))
}

fn contained_layout(cols: usize, rows: usize, w: f64, h: f64) -> Layout {
    if rows == 1 {
        let pitch_x = if cols > 1 { w / (cols - 1) as f64 } else { f64::INFINITY };
        return Layout {
            cols,
            rows,
            pitch_x,
            pitch_y: f64::INFINITY,
            score: pitch_x,
        };
    }
    let pitch_x = w / (cols as f64 - 0.5);
    let pitch_y = h / (rows - 1) as f64;
    let mut score = (0.25 * pitch_x * pitch_x + pitch_y * pitch_y).sqrt();
    if cols > 1 {
        score = score.min(pitch_x);
    }
    if rows > 2 {
        score = score.min(2.0 * pitch_y);
    }
    Layout {
        cols,
        rows,
        pitch_x,
        pitch_y,
        score,
    }
}

fn periodic_layout(cols: usize, rows: usize, w: f64, h: f64) -> Layout {
    let pitch_x = w / cols as f64;
    let pitch_y = h / rows as f64;
    // Own periodic image in x, and in y when a single row exists.
    let mut score = pitch_x;
    if rows == 1 {
        score = score.min(h);
    } else {
        score = score.min((0.25 * pitch_x * pitch_x + pitch_y * pitch_y).sqrt());
        // An odd row count puts same-parity rows adjacent across the wrap.
        score = score.min(if rows % 2 == 1 { pitch_y } else { 2.0 * pitch_y });
    }
    Layout {
        cols,
        rows,
        pitch_x,
        pitch_y,
        score,
    }
}
