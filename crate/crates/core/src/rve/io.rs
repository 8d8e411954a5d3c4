//! Text formats.
//!
//! RVE file:
//! ```text
//! # rve v1
//! width 54
//! height 54
//! n_fibers 46
//! fiber_radius 3.5
//! min_gap 0.05
//! boundary contained
//! x y
//! 3.50000000e0 3.50000000e0
//! ...
//! ```
//! Centers are in μm with 9 significant digits.
//!
//! Histogram file: a `bins=<n>` header followed by `edge_lo edge_hi probability`
//! rows with contiguous edges.

use super::{BoundaryPolicy, Fiber, NndHistogram, Rve, RveError, RveSpec};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

pub const RVE_HEADER: &str = "# rve v1";

fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_rve<W: Write>(mut w: W, rve: &Rve) -> Result<(), RveError> {
    let s = &rve.spec;
    let mut out = String::new();
    writeln!(out, "{RVE_HEADER}").unwrap();
    writeln!(out, "width {}", s.width).unwrap();
    writeln!(out, "height {}", s.height).unwrap();
    writeln!(out, "n_fibers {}", s.n_fibers).unwrap();
    writeln!(out, "fiber_radius {}", s.fiber_radius).unwrap();
    writeln!(out, "min_gap {}", s.min_gap).unwrap();
    writeln!(out, "boundary {}", rve.boundary.as_str()).unwrap();
    writeln!(out, "x y").unwrap();
    for f in &rve.fibers {
        writeln!(out, "{} {}", sig9(f.center[0]), sig9(f.center[1])).unwrap();
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> RveError {
    RveError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, RveError> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{s}'")))
}

pub fn read_rve<R: BufRead>(r: R) -> Result<Rve, RveError> {
    let mut lines = r.lines().enumerate().map(|(k, l)| (k + 1, l));
    let mut next = |want: &str| -> Result<(usize, String), RveError> {
        let (k, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {want}")))?;
        Ok((k, l?))
    };
    let (k, header) = next("header")?;
    if header.trim() != RVE_HEADER {
        return Err(parse_err(k, "missing '# rve v1' header"));
    }
    let mut field = |name: &str| -> Result<(usize, String), RveError> {
        let (k, l) = next(name)?;
        let (key, value) = l
            .split_once(' ')
            .ok_or_else(|| parse_err(k, format!("expected '{name} <value>'")))?;
        if key != name {
            return Err(parse_err(k, format!("expected key '{name}', found '{key}'")));
        }
        Ok((k, value.to_string()))
    };
    let (k, v) = field("width")?;
    let width = parse_num(k, &v)?;
    let (k, v) = field("height")?;
    let height = parse_num(k, &v)?;
    let (k, v) = field("n_fibers")?;
    let n_fibers: usize = parse_num(k, &v)?;
    let (k, v) = field("fiber_radius")?;
    let fiber_radius = parse_num(k, &v)?;
    let (k, v) = field("min_gap")?;
    let min_gap = parse_num(k, &v)?;
    let (k, v) = field("boundary")?;
    let boundary: BoundaryPolicy = v.trim().parse().map_err(|e: String| parse_err(k, e))?;
    let (k, cols) = next("column header")?;
    if cols.trim() != "x y" {
        return Err(parse_err(k, "expected 'x y' column header"));
    }
    let spec = RveSpec {
        width,
        height,
        n_fibers,
        fiber_radius,
        min_gap,
    };
    let mut fibers = Vec::with_capacity(n_fibers);
    for (k, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let mut it = l.split_whitespace();
        let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(k, "expected 'x y'"));
        };
        fibers.push(Fiber {
            center: [parse_num(k, x)?, parse_num(k, y)?],
            radius: fiber_radius,
        });
    }
    if fibers.len() != n_fibers {
        return Err(parse_err(
            0,
            format!("header declares {n_fibers} fibers, found {}", fibers.len()),
        ));
    }
    Ok(Rve::new(spec, boundary, fibers))
}

pub fn write_histogram<W: Write>(mut w: W, h: &NndHistogram) -> Result<(), RveError> {
    let mut out = format!("bins={}\n", h.bins());
    for (e, p) in h.edges().windows(2).zip(h.probabilities()) {
        writeln!(out, "{} {} {}", e[0], e[1], p).unwrap();
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a histogram file. Probabilities are renormalized when their sum is
/// within 1e-6 of one, to absorb rounding in hand-written files.
pub fn read_histogram<R: BufRead>(r: R) -> Result<NndHistogram, RveError> {
    let mut lines = r.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (k, header) = lines.next().ok_or_else(|| parse_err(0, "empty histogram file"))?;
    let header = header?;
    let bins: usize = header
        .trim()
        .strip_prefix("bins=")
        .ok_or_else(|| parse_err(k, "expected 'bins=<n>' header"))
        .and_then(|v| parse_num(k, v))?;
    let mut edges = Vec::with_capacity(bins + 1);
    let mut probs = Vec::with_capacity(bins);
    for (k, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| parse_num(k, t))
            .collect::<Result<_, _>>()?;
        let [lo, hi, p] = vals[..] else {
            return Err(parse_err(k, "expected 'edge_lo edge_hi probability'"));
        };
        match edges.last() {
            None => edges.push(lo),
            Some(&prev) if (prev - lo).abs() <= 1e-9 * prev.abs().max(1.0) => {}
            Some(_) => return Err(parse_err(k, "bins are not contiguous")),
        }
        edges.push(hi);
        probs.push(p);
    }
    if probs.len() != bins {
        return Err(parse_err(0, format!("header declares {bins} bins, found {}", probs.len())));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(RveError::InvalidHistogram(format!("probabilities sum to {sum}")));
    }
    NndHistogram::normalized(edges, probs)
}
