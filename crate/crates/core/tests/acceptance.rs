//! Acceptance gate. Each criterion prints one PASS or FAIL line; the process
//! exits non-zero if any fails.

use cfrp_core::constitutive::tensor::{from_plane_strain, plane_strain_tangent, stress_in_plane, sym};
use cfrp_core::constitutive::{
    czm_envelope, damage_g, failure_criterion, hardening_modulus, matrix_stress_update, yield_function,
    MaterialSet, MatrixParams, PointState,
};
use cfrp_core::losses::{accuracy, attention_loss, mae, weight_tr, weight_val, FloatImage, InspectionTally, WeightFunction};
use cfrp_core::pipeline::{cmd_dataset, cmd_gen, cmd_render, cmd_simulate, PipelineConfig, RunOptions};
use cfrp_core::rve::{generate, reference_target, GenConfig, Rve, RveError, RveSpec};
use cfrp_core::solver::{
    build_mesh, detect_esodi, run, run_with, Dirichlet, FieldRetention, LoadSchedule, Mesh, MeshOptions,
    SolverError, SolverSettings,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

// RVE generator

/// Brute-force nearest-neighbor distances for a contained RVE.
fn nnd_oracle(rve: &Rve) -> Vec<f64> {
    let c: Vec<[f64; 2]> = rve.fibers.iter().map(|f| f.center).collect();
    (0..c.len())
        .map(|i| {
            (0..c.len())
                .filter(|&j| j != i)
                .map(|j| (c[i][0] - c[j][0]).hypot(c[i][1] - c[j][1]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// 30 bins over `[2r, 6r]` with out-of-range values clamped, then
/// `Σ p ln(p/q)` with empty target bins floored at 1e-9.
fn kl_oracle(nnd: &[f64], r: f64, q: &[f64]) -> f64 {
    let (lo, hi, bins) = (2.0 * r, 6.0 * r, 30usize);
    let mut p = vec![0.0; bins];
    for &v in nnd {
        let k = (((v - lo) / (hi - lo)) * bins as f64).floor();
        p[(k.max(0.0) as usize).min(bins - 1)] += 1.0 / nnd.len() as f64;
    }
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b.max(1e-9)).ln()).sum::<f64>().max(0.0)
}

fn rve_generator() -> Outcome {
    let spec = RveSpec::default();
    let target = reference_target(&spec);
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let cfg = GenConfig { rng_seed: seed, ..GenConfig::for_spec(&spec) };
        let out = generate(&spec, &target, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let rve = &out.rve;
        ensure(rve.fibers.len() == 46, || format!("seed {seed}: {} fibers", rve.fibers.len()))?;
        let r = spec.fiber_radius;
        for (i, a) in rve.fibers.iter().enumerate() {
            ensure(
                a.center[0] >= r && a.center[0] <= spec.width - r && a.center[1] >= r && a.center[1] <= spec.height - r,
                || format!("seed {seed}: fiber {i} leaves the domain"),
            )?;
            for b in &rve.fibers[i + 1..] {
                let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
                ensure(d >= 2.0 * r, || format!("seed {seed}: fibers {d} apart"))?;
            }
        }
        let kl = kl_oracle(&nnd_oracle(rve), r, target.probabilities());
        ensure((kl - out.final_kl()).abs() < 1e-9, || format!("seed {seed}: reported KL {} vs oracle {kl}", out.final_kl()))?;
        ensure(kl <= 0.05, || format!("seed {seed}: KL {kl}"))?;
        ensure(out.kl_trace.windows(2).all(|w| w[1] < w[0]), || format!("seed {seed}: KL trace not strictly decreasing"))?;
        worst = worst.max(kl);
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("20 seeds, max KL {worst:.4}, no overlaps, {:.2} s", elapsed.as_secs_f64()))
}

// Constitutive identities

fn constitutive_identities() -> Outcome {
    let p = MatrixParams::default();
    let rel = |v: f64, scale: f64| v.abs() / scale;
    let s_scale = 2.0 * p.sigma_c * p.sigma_t;
    let e_scale = 2.0 * p.eps_c * p.eps_t;
    let anchors = [
        ("phi(sigma_t)", rel(yield_function(&sym(p.sigma_t, 0.0, 0.0, 0.0), &p), s_scale)),
        ("phi(-sigma_c)", rel(yield_function(&sym(-p.sigma_c, 0.0, 0.0, 0.0), &p), s_scale)),
        ("phi'(eps_t)", rel(failure_criterion(&sym(p.eps_t, 0.0, 0.0, 0.0), &p), e_scale)),
        ("phi'(-eps_c)", rel(failure_criterion(&sym(-p.eps_c, 0.0, 0.0, 0.0), &p), e_scale)),
    ];
    for (name, v) in anchors {
        ensure(v < 1e-9, || format!("{name} = {v:e} relative"))?;
    }
    let sy = 75.0;
    let h = hardening_modulus(sy, sy, &p).map_err(|e| e.to_string())?;
    ensure(h == 20000.0, || format!("H(sigma_Y) = {h}"))?;

    let g0 = damage_g(1.0, 1.0, &p).map_err(|e| e.to_string())?;
    ensure(g0 == 0.0, || format!("G(tau0) = {g0}"))?;
    let g2 = damage_g(2.0, 1.0, &p).map_err(|e| e.to_string())?;
    let oracle = 1.0 - 0.05 / 2.0 - 0.95 * (-2.0f64).exp();
    ensure((g2 - oracle).abs() < 1e-5, || format!("G(2) = {g2} vs {oracle}"))?;

    // Envelope integral by the trapezoid rule; MPa·nm = 1e-3 N/m.
    let czm = MaterialSet::default().interface;
    let upper = 1.2 * czm.delta_f();
    let n = 200_000;
    let dx = upper / n as f64;
    let area: f64 = (0..n).map(|k| 0.5 * dx * (czm_envelope(k as f64 * dx, &czm) + czm_envelope((k + 1) as f64 * dx, &czm))).sum::<f64>() * 1e-3;
    ensure((area - 8.75).abs() <= 0.01 * 8.75, || format!("envelope integral {area} N/m"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for path in 0..1000 {
        let mut s = PointState::virgin(&p);
        for _ in 0..40 {
            let de = [rng.gen_range(-2e-3..4e-3), rng.gen_range(-2e-3..2e-3), rng.gen_range(-3e-3..3e-3)];
            let next = matrix_stress_update(&s, &from_plane_strain(de), 0.01, &p).map_err(|e| format!("path {path}: {e}"))?.state;
            ensure(next.damage >= s.damage && (0.0..=1.0).contains(&next.damage), || {
                format!("path {path}: d went {} -> {}", s.damage, next.damage)
            })?;
            s = next;
        }
    }
    Ok(format!(
        "anchors < 1e-9, H = 20000, G(2) = {g2:.7}, envelope {area:.4} N/m, 1000 paths monotone"
    ))
}

// Tangent

fn fd_error(state: &PointState, de: [f64; 3], p: &MatrixParams) -> Result<f64, String> {
    let step = |e: [f64; 3]| matrix_stress_update(state, &from_plane_strain(e), 0.01, p).map_err(|e| e.to_string());
    let analytic = plane_strain_tangent(&step(de)?.tangent);
    let scale = analytic.abs().max();
    let h = 1e-7;
    let mut err = 0.0f64;
    for j in 0..3 {
        let (mut plus, mut minus) = (de, de);
        plus[j] += h;
        minus[j] -= h;
        let sp = stress_in_plane(&step(plus)?.state.stress);
        let sm = stress_in_plane(&step(minus)?.state.stress);
        for i in 0..3 {
            err = err.max(((sp[i] - sm[i]) / (2.0 * h) - analytic[(i, j)]).abs() / scale);
        }
    }
    Ok(err)
}

fn ramp(total: [f64; 3], steps: usize, p: &MatrixParams) -> Result<PointState, String> {
    let inc = from_plane_strain(total) / steps as f64;
    let mut s = PointState::virgin(p);
    for _ in 0..steps {
        s = matrix_stress_update(&s, &inc, 0.01, p).map_err(|e| e.to_string())?.state;
    }
    Ok(s)
}

fn tangent_vs_fd() -> Outcome {
    let p = MatrixParams::default();
    let elastic = PointState::virgin(&p);
    let plastic = ramp([0.004, 0.001, 0.06], 10, &p)?;
    ensure(plastic.equivalent_plastic_strain > 0.0 && !plastic.damaged, || "plastic state not reached".into())?;
    let damaged = ramp([0.045, 0.0, 0.002], 45, &p)?;
    ensure(damaged.damaged, || "damaged state not reached".into())?;
    let cases = [
        ("elastic", &elastic, [1e-3, 2e-4, -5e-4]),
        ("plastic", &plastic, [1e-3, 1e-4, 2e-4]),
        ("damaged", &damaged, [1e-3, 0.0, 1e-4]),
    ];
    let mut parts = Vec::new();
    for (name, s, de) in cases {
        let e = fd_error(s, de, &p)?;
        ensure(e < 1e-4, || format!("{name}: {e:e}"))?;
        parts.push(format!("{name} {e:.1e}"));
    }
    Ok(parts.join(", "))
}

// Solver

fn ten_fiber_mesh() -> Result<Mesh, String> {
    let spec = RveSpec { width: 25.0, height: 25.0, n_fibers: 10, fiber_radius: 3.5, min_gap: 0.05 };
    let cfg = GenConfig { rng_seed: 1, ..GenConfig::for_spec(&spec) };
    let rve = match generate(&spec, &reference_target(&spec), &cfg) {
        Ok(o) => o.rve,
        Err(RveError::NotConverged { best, .. }) => *best,
        Err(e) => return Err(e.to_string()),
    };
    build_mesh(&rve, &MeshOptions { elems_per_diameter: 10, ..Default::default() }).map_err(|e| e.to_string())
}

fn solver() -> Outcome {
    let m = MaterialSet::default();
    let one = |target: f64, increments: usize| LoadSchedule { target_strain: target, increments, max_cutbacks: 8 };
    let err = |e: SolverError| e.to_string();

    // Patch test: a linear boundary displacement gives uniform stress.
    let mesh = Mesh::uniform(3.0, 2.0, 6, 5);
    let g = [[1e-3, 4e-4], [-2e-4, 6e-4]];
    let settings = SolverSettings { retention: FieldRetention::All, ..Default::default() };
    let res = run_with(&mesh, &m, &Dirichlet::linear_boundary(&mesh, g), &one(1.0, 1), &settings).map_err(err)?;
    let el = m.matrix.elasticity();
    let exact = stress_in_plane(&el.stress(&from_plane_strain([g[0][0], g[1][1], g[0][1] + g[1][0]])));
    let fields = &res.final_snapshot().ok_or("no snapshot")?.fields;
    let mut patch = 0.0f64;
    for (name, k) in [("sxx", 0), ("syy", 1), ("sxy", 2)] {
        for v in fields.get(name).ok_or("missing field")?.iter() {
            patch = patch.max((v - exact[k]).abs() / exact[0].abs());
        }
    }
    ensure(patch <= 1e-8, || format!("patch error {patch:e}"))?;

    // Homogeneous plate against E/(1 − ν²).
    let plate = run(&Mesh::uniform(10.0, 8.0, 10, 8), &m, &one(1e-3, 2), &SolverSettings::default()).map_err(err)?;
    let modulus = m.matrix.youngs_mpa() / (1.0 - m.matrix.poisson.powi(2));
    let plate_err = plate.curve.iter().map(|p| (p.stress / p.strain - modulus).abs() / modulus).fold(0.0, f64::max);
    ensure(plate_err <= 1e-8, || format!("plate error {plate_err:e}"))?;

    let t = Instant::now();
    let mesh = ten_fiber_mesh()?;
    let res = run(&mesh, &m, &LoadSchedule::default(), &SolverSettings::default()).map_err(err)?;
    let elapsed = t.elapsed();
    let s = res.stresses();
    let peak = res.peak_index.ok_or("no peak")?;
    let esodi = res.esodi_index.ok_or("ESoDI not reached")?;
    let drop = 1.0 - s[peak..].iter().copied().fold(f64::INFINITY, f64::min) / s[peak];
    ensure(esodi > peak && drop >= 0.05, || format!("drop {drop:.3} after peak {peak}"))?;
    ensure(s[esodi] <= 0.95 * s[peak] && s[esodi - 1] > 0.95 * s[peak], || "ESoDI index inconsistent".into())?;
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "patch {patch:.1e}, plate {plate_err:.1e}, {}x{} mesh peak {:.1} MPa at {:.4}, drop {:.0}%, ESoDI {esodi}, {:.1} s",
        mesh.nx,
        mesh.ny,
        s[peak],
        res.curve[peak].strain,
        100.0 * drop,
        elapsed.as_secs_f64()
    ))
}

// Losses

fn oracle_attention(pred: &FloatImage, target: &FloatImage, w: &WeightFunction, training: bool) -> f64 {
    let s = 255.0 * w.gamma;
    let mut sum = 0.0;
    for (a, b) in pred.data.iter().zip(&target.data) {
        let g = (b[0] + b[1] + b[2]) / 3.0;
        let bump = (-(g - w.beta) * (g - w.beta) / (2.0 * s * s)).exp();
        let weight = if training { w.alpha * bump + 1.0 } else { bump };
        sum += weight * ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs());
    }
    sum / (3.0 * pred.data.len() as f64)
}

fn losses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let image = |rng: &mut ChaCha8Rng| {
        let data: Vec<[f64; 3]> = (0..64 * 48).map(|_| [0, 1, 2].map(|_| rng.gen_range(0.0..255.0))).collect();
        FloatImage { width: 64, height: 48, data }
    };
    let w = WeightFunction::default();
    let val = WeightFunction::validation();
    let flat = WeightFunction { alpha: 0.0, ..w };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (a, b) = (image(&mut rng), image(&mut rng));
        let m = mae(&a, &b).map_err(|e| e.to_string())?;
        let l0 = attention_loss(&a, &b, &flat).map_err(|e| e.to_string())?;
        ensure(l0 == m, || format!("alpha = 0 gives {l0}, mae {m}"))?;
        for (wf, training) in [(&w, true), (&val, false)] {
            let got = attention_loss(&a, &b, wf).map_err(|e| e.to_string())?;
            let want = oracle_attention(&a, &b, wf, training);
            let e = (got - want).abs() / want.abs().max(1.0);
            worst = worst.max(e);
            ensure(e <= 1e-12, || format!("oracle mismatch {e:e}"))?;
        }
    }
    ensure(weight_tr(60.0, &w) == 51.0, || format!("W_tr(60) = {}", weight_tr(60.0, &w)))?;
    ensure(weight_val(60.0, &w) == 1.0, || format!("W_val(60) = {}", weight_val(60.0, &w)))?;
    for g in 0..=255 {
        let g = g as f64;
        ensure(weight_tr(g, &w) == w.alpha * weight_val(g, &w) + 1.0, || format!("W_tr != a*W_val + 1 at {g}"))?;
    }
    let a = accuracy(&InspectionTally { good: 400, partly_good: 50, bad: 50 }).map_err(|e| e.to_string())?;
    ensure(a == 85.0, || format!("accuracy {a}"))?;
    Ok(format!("alpha = 0 exact, W_tr(60) = 51, W_val(60) = 1, oracle {worst:.1e}, accuracy 85"))
}

// Pipeline

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                if !rel.starts_with("timings_") {
                    out.insert(rel, std::fs::read(&path).unwrap_or_default());
                }
            }
        }
    }
    out
}

fn pipeline_determinism() -> Outcome {
    // Ten fibers give only ten NND samples, so the KL threshold is loose.
    let text = "width = 25\nheight = 25\nn_fibers = 10\nkl_threshold = 0.35\nelems_per_diameter = 10\n\
                image_size = 64\nn_samples = 2\nn_val = 1\nseed = 42\n";
    let config = PipelineConfig::parse(text, Path::new(".")).map_err(|e| e.to_string())?;
    let once = |jobs: usize| -> Result<(tempfile::TempDir, BTreeMap<String, Vec<u8>>), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = RunOptions { jobs };
        let out = dir.path();
        for (stage, report) in [
            ("gen", cmd_gen(&config, out, opts)),
            ("simulate", cmd_simulate(&config, out, opts)),
            ("render", cmd_render(&config, out, opts)),
        ] {
            let report = report.map_err(|e| format!("{stage}: {e}"))?;
            ensure(report.all_ok(), || format!("{stage}: {} of {} failed", report.failed, report.total))?;
        }
        cmd_dataset(&config, out).map_err(|e| format!("dataset: {e}"))?;
        let files = files_under(out);
        Ok((dir, files))
    };
    let (_a, first) = once(1)?;
    let (_b, second) = once(2)?;
    ensure(first.keys().eq(second.keys()), || "file sets differ".into())?;
    if let Some(k) = first.keys().find(|k| first[*k] != second[*k]) {
        return Err(format!("{k} differs"));
    }
    let images = first.keys().filter(|k| k.ends_with(".png")).count();
    let manifests = first.keys().filter(|k| k.ends_with(".jsonl")).count();
    Ok(format!("{} files identical ({images} images, {manifests} manifests)", first.len()))
}

// ESoDI

fn esodi_fixture() -> Outcome {
    let k = detect_esodi(&[10.0, 20.0, 30.0, 29.0, 28.2]).map_err(|e| e.to_string())?;
    ensure(k == 4, || format!("index {k}"))?;
    ensure(
        matches!(detect_esodi(&[1.0, 2.0, 3.0, 4.0, 5.0]), Err(SolverError::EsodiNotReached(_))),
        || "monotone curve did not report not-reached".into(),
    )?;
    Ok("fixture -> 4, monotone -> not reached".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("rve-generator", rve_generator),
        ("constitutive-identities", constitutive_identities),
        ("tangent-finite-differences", tangent_vs_fd),
        ("solver", solver),
        ("losses", losses),
        ("pipeline-determinism", pipeline_determinism),
        ("esodi-detection", esodi_fixture),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {name}: {detail} [{:.1} s]", t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
