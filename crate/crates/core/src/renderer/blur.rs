use super::raster::Canvas;

/// Normalized 1-D Gaussian taps for standard deviation `sigma`, covering ±⌈3σ⌉.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let half = (3.0 * sigma).ceil() as i32;
    let denom = 2.0 * sigma * sigma;
    let taps: Vec<f32> = (-half..=half)
        .map(|i| (-((i * i) as f32) / denom).exp())
        .collect();
    let sum: f32 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Gaussian blur with standard deviation `radius` (the CSS `blur()` convention),
/// edge pixels clamped. A non-positive radius returns the input unchanged.
pub fn gaussian_blur(src: &Canvas, radius: f32) -> Canvas {
    if radius <= 0.0 || src.pixels.is_empty() {
        return src.clone();
    }
    let kernel = gaussian_kernel(radius);
    let half = (kernel.len() / 2) as i64;
    let (w, h) = (src.width as i64, src.height as i64);

    let mut horizontal = vec![[0f32; 4]; src.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f32; 4];
            for (k, weight) in kernel.iter().enumerate() {
                let sx = (x + k as i64 - half).clamp(0, w - 1);
                let p = src.pixels[(y * w + sx) as usize];
                for c in 0..4 {
                    acc[c] += weight * f32::from(p[c]);
                }
            }
            horizontal[(y * w + x) as usize] = acc;
        }
    }

    let mut out = src.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f32; 4];
            for (k, weight) in kernel.iter().enumerate() {
                let sy = (y + k as i64 - half).clamp(0, h - 1);
                let p = horizontal[(sy * w + x) as usize];
                for c in 0..4 {
                    acc[c] += weight * p[c];
                }
            }
            out.pixels[(y * w + x) as usize] = acc.map(|v| v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
