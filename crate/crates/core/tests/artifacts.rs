use cfrp_core::imaging::{phase_from_image, read_manifest, render_microstructure, Split};
use cfrp_core::losses::{read_loss_curve, select_optimal_epoch, write_loss_curve};
use cfrp_core::rve::{generate, read_rve, reference_target, write_rve, GenConfig, RveSpec};
use cfrp_core::{Grid, Phase};

#[test]
fn rve_file_and_image_round_trip() {
    let spec = RveSpec::default();
    let out = generate(&spec, &reference_target(&spec), &GenConfig { rng_seed: 3, ..GenConfig::for_spec(&spec) }).unwrap();
    let mut buf = Vec::new();
    write_rve(&mut buf, &out.rve).unwrap();
    let back = read_rve(buf.as_slice()).unwrap();
    for (a, b) in out.rve.fibers.iter().zip(&back.fibers) {
        assert!((a.center[0] - b.center[0]).abs() < 1e-7 && (a.center[1] - b.center[1]).abs() < 1e-7);
    }
    let phase = back.rasterize(256);
    let img = render_microstructure(&phase);
    assert_eq!(img.dimensions(), (256, 256));
    assert_eq!(phase_from_image(&img), phase);
    let fraction = phase.iter().filter(|p| **p == Phase::Fiber).count() as f64 / (256.0 * 256.0);
    assert!((fraction - back.fiber_area_fraction()).abs() < 0.01);
}

#[test]
fn grid_bottom_row_is_image_bottom_row() {
    let mut phase = Grid::filled(3, 2, Phase::Matrix);
    phase.set(0, 0, Phase::Fiber);
    let img = render_microstructure(&phase);
    assert_eq!(img.get_pixel(0, 1).0, [0, 0, 0]);
    assert_eq!(img.get_pixel(0, 0).0, [255, 255, 255]);
}

#[test]
fn loss_curve_file_drives_epoch_selection() {
    // Plateau with a transient dip at epoch 25.
    let curve: Vec<f64> = (0..=60)
        .map(|e| match e {
            0 => 2.0,
            24 | 26 => 0.85,
            25 => 0.7,
            _ => 1.0,
        })
        .collect();
    let mut buf = Vec::new();
    write_loss_curve(&mut buf, &curve).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("epoch,loss\n0,2.0\n"));
    let back = read_loss_curve(buf.as_slice()).unwrap();
    assert_eq!(back, curve);
    assert_eq!(select_optimal_epoch(&back, 10, 50, None).unwrap(), 25);
    assert_eq!(select_optimal_epoch(&back, 10, 50, Some(3)).unwrap(), 25);
}

#[test]
fn manifest_lines_parse() {
    let text = r#"{"id":"s00000","path1":"train/s00000_1.png","path2":"train/s00000_2.png","path3":"train/s00000_3.png","flipped":false,"split":"train"}
{"id":"s00001","path1":"val/s00001_1.png","path2":"val/s00001_2.png","path3":"val/s00001_3.png","flipped":false,"split":"val"}
"#;
    let records = read_manifest(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1].split, Split::Val);
}
