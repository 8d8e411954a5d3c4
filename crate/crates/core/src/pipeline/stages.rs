use super::{
    manifest_path, read_records, sample_id, sample_seed, split_seed, with_pool, write_records, write_timings,
    PipelineConfig, PipelineError, RunOptions, SampleRecord, StageReport, Status,
};
use crate::grid::Phase;
use crate::imaging::{
    augment, render_crack, render_microstructure, render_von_mises, resize, split, write_manifest, write_samples,
    ColorMap, Split, TripleSample,
};
use crate::rve::{generate, read_rve, reference_target, write_rve};
use crate::solver::{
    build_mesh, fields_of, read_snapshot, run, write_curve, write_snapshot, SimulationResult, SolverError,
    SolverSettings,
};
use image::RgbImage;
use rayon::prelude::*;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

/// Applies `work` to every upstream success in parallel. Upstream failures
/// are carried through unchanged and a panic fails only its own sample.
fn run_stage(
    out: &Path,
    stage: &str,
    inputs: Vec<SampleRecord>,
    opts: RunOptions,
    work: impl Fn(&SampleRecord) -> Result<SampleRecord, PipelineError> + Sync,
) -> Result<StageReport, PipelineError> {
    let results: Vec<(SampleRecord, f64)> = with_pool(opts.jobs, || {
        inputs
            .par_iter()
            .map(|rec| {
                if !rec.is_ok() {
                    return (rec.clone(), 0.0);
                }
                let t = Instant::now();
                let outcome = match catch_unwind(AssertUnwindSafe(|| work(rec))) {
                    Ok(Ok(next)) => next,
                    Ok(Err(e)) => rec.failed(format!("{stage}: {e}")),
                    Err(_) => rec.failed(format!("{stage}: worker panicked")),
                };
                (outcome, t.elapsed().as_secs_f64())
            })
            .collect()
    })?;
    let (records, secs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    write_records(&manifest_path(out, stage), &records)?;
    let timings: Vec<(String, f64)> = records.iter().map(|r| r.id.clone()).zip(secs).collect();
    write_timings(out, stage, &timings)?;
    Ok(StageReport::of(&records))
}

fn write_config(out: &Path, config: &PipelineConfig) -> Result<(), PipelineError> {
    std::fs::write(out.join("config.used"), config.to_kv_string())?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>, PipelineError> {
    Ok(BufWriter::new(std::fs::File::create(path)?))
}

/// Generates `config.n_samples` arrangements into `out/rve`.
pub fn cmd_gen(config: &PipelineConfig, out: &Path, opts: RunOptions) -> Result<StageReport, PipelineError> {
    std::fs::create_dir_all(out.join("rve"))
        .map_err(|e| PipelineError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display()))))?;
    write_config(out, config)?;
    let target = reference_target(&config.spec);
    let inputs: Vec<SampleRecord> = (0..config.n_samples)
        .map(|k| SampleRecord {
            id: sample_id(k),
            seed: sample_seed(config.seed, k),
            status: Status::Generated,
            kl: None,
            peak_stress: None,
            esodi_reached: None,
            files: Vec::new(),
            error: None,
        })
        .collect();
    run_stage(out, "gen", inputs, opts, |rec| {
        let mut gen = config.gen.clone();
        gen.rng_seed = rec.seed;
        let outcome = generate(&config.spec, &target, &gen)?;
        let rel = format!("rve/{}.rve", rec.id);
        let mut w = create(&out.join(&rel))?;
        write_rve(&mut w, &outcome.rve)?;
        w.flush()?;
        Ok(SampleRecord {
            kl: Some(outcome.final_kl()),
            files: vec![rel],
            ..rec.clone()
        })
    })
}

/// Simulates every generated arrangement. Samples without ESoDI fail.
pub fn cmd_simulate(config: &PipelineConfig, out: &Path, opts: RunOptions) -> Result<StageReport, PipelineError> {
    let inputs = read_records(&manifest_path(out, "gen"))?;
    std::fs::create_dir_all(out.join("sim"))?;
    let settings = SolverSettings::default();
    run_stage(out, "simulate", inputs, opts, |rec| {
        let rve = read_rve(BufReader::new(std::fs::File::open(out.join(&rec.files[0]))?))?;
        let mesh = build_mesh(&rve, &config.mesh)?;
        let result: SimulationResult = match run(&mesh, &config.materials, &config.schedule, &settings) {
            Ok(r) => r,
            Err(SolverError::CutbackLimit { partial, .. }) if partial.esodi_index.is_some() => *partial,
            Err(e) => return Err(e.into()),
        };
        let (Some(esodi), Some(peak)) = (result.esodi_index, result.peak_index) else {
            return Err(PipelineError::Solver(SolverError::EsodiNotReached(
                "load never dropped 5% below its peak".into(),
            )));
        };
        let curve = format!("sim/{}.csv", rec.id);
        let mut w = create(&out.join(&curve))?;
        write_curve(&mut w, &result.curve)?;
        w.flush()?;
        let mut files = vec![curve];
        let final_snap = result.final_snapshot().expect("final snapshot is retained");
        for (tag, snap) in [("esodi", result.snapshot(esodi)), ("final", Some(final_snap))] {
            let snap = snap.ok_or_else(|| SolverError::FieldUnavailable(format!("{tag} snapshot")))?;
            let rel = format!("sim/{}_{tag}.snap", rec.id);
            let mut w = create(&out.join(&rel))?;
            write_snapshot(&mut w, snap)?;
            w.flush()?;
            files.push(rel);
        }
        Ok(SampleRecord {
            status: Status::Simulated,
            peak_stress: Some(result.curve[peak].stress),
            esodi_reached: Some(true),
            files,
            ..rec.clone()
        })
    })
}

fn load_snapshot(path: &Path) -> Result<crate::solver::Snapshot, PipelineError> {
    Ok(read_snapshot(&mut BufReader::new(std::fs::File::open(path)?))?)
}

/// Renders the microstructure, ESoDI stress and crack images of every
/// simulated sample.
pub fn cmd_render(config: &PipelineConfig, out: &Path, opts: RunOptions) -> Result<StageReport, PipelineError> {
    let inputs = read_records(&manifest_path(out, "simulate"))?;
    let gen = read_records(&manifest_path(out, "gen"))?;
    std::fs::create_dir_all(out.join("img"))?;
    let cmap = ColorMap::default();
    let size = config.image_size;
    run_stage(out, "render", inputs, opts, |rec| {
        let rve_file = gen
            .iter()
            .find(|g| g.id == rec.id)
            .and_then(|g| g.files.first())
            .ok_or_else(|| PipelineError::Manifest(format!("{} missing from the gen manifest", rec.id)))?;
        let rve = read_rve(BufReader::new(std::fs::File::open(out.join(rve_file))?))?;
        let micro = render_microstructure(&rve.rasterize(size as usize));
        let esodi = fields_of(&load_snapshot(&out.join(&rec.files[1]))?.fields)?;
        let stress = resize(&render_von_mises(&esodi.von_mises, &cmap, config.stress_range()), size, size);
        let last = fields_of(&load_snapshot(&out.join(&rec.files[2]))?.fields)?;
        let phase = last.fiber_mask.map(|f| if *f { Phase::Fiber } else { Phase::Matrix });
        let crack = resize(&render_crack(&last.ux, &phase, config.crack_threshold), size, size);
        let mut files = Vec::new();
        for (k, img) in [micro, stress, crack].iter().enumerate() {
            let rel = format!("img/{}_{}.{}", rec.id, k + 1, config.image_format.extension());
            config.image_format.save(img, &out.join(&rel))?;
            files.push(rel);
        }
        Ok(SampleRecord {
            status: Status::Rendered,
            files,
            ..rec.clone()
        })
    })
}

fn open_image(path: &Path) -> Result<RgbImage, PipelineError> {
    Ok(image::open(path)?.to_rgb8())
}

/// Splits the rendered samples, doubles the training part with vertical
/// flips and writes `out/dataset`. Returns the number of records written.
pub fn cmd_dataset(config: &PipelineConfig, out: &Path) -> Result<usize, PipelineError> {
    let rendered: Vec<SampleRecord> = read_records(&manifest_path(out, "render"))?
        .into_iter()
        .filter(SampleRecord::is_ok)
        .collect();
    let samples = rendered
        .iter()
        .map(|r| {
            let imgs = [0, 1, 2].map(|k| open_image(&out.join(&r.files[k])));
            let [a, b, c] = imgs;
            Ok(TripleSample::new(r.id.clone(), [a?, b?, c?])?)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let (train, val) = split(samples, config.n_val, split_seed(config.seed))?;
    let dir = out.join("dataset");
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    let mut records = write_samples(&dir, &augment(&train), Split::Train, config.image_format)?;
    records.extend(write_samples(&dir, &val, Split::Val, config.image_format)?);
    let mut w = create(&dir.join("manifest.jsonl"))?;
    write_manifest(&mut w, &records)?;
    w.flush()?;
    Ok(records.len())
}
