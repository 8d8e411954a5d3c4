use image::{imageops, RgbImage};

/// Area-averaging resize: every output pixel is the overlap-weighted mean of
/// the input pixels it covers, rounded to the nearest integer.
pub fn resize(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (w0, h0) = img.dimensions();
    if (w0, h0) == (width, height) {
        return img.clone();
    }
    let wx = overlap_weights(w0, width);
    let wy = overlap_weights(h0, height);
    RgbImage::from_fn(width, height, |x, y| {
        let mut acc = [0.0f64; 3];
        for &(sy, fy) in &wy[y as usize] {
            for &(sx, fx) in &wx[x as usize] {
                let p = img.get_pixel(sx, sy).0;
                for c in 0..3 {
                    acc[c] += fx * fy * p[c] as f64;
                }
            }
        }
        image::Rgb(acc.map(|v| v.round().clamp(0.0, 255.0) as u8))
    })
}

/// For each output index, the input indices it overlaps with normalized
/// weights.
fn overlap_weights(n_in: u32, n_out: u32) -> Vec<Vec<(u32, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|k| {
            let (a, b) = (k as f64 * scale, (k + 1) as f64 * scale);
            let first = a.floor() as u32;
            let last = (b.ceil() as u32).min(n_in);
            (first..last)
                .filter_map(|s| {
                    let w = (b.min(s as f64 + 1.0) - a.max(s as f64)) / scale;
                    (w > 1e-12).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

pub fn flip_vertical(img: &RgbImage) -> RgbImage {
    imageops::flip_vertical(img)
}
