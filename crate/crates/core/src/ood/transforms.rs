use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::OodError;

/// Poisson rate scale per shot-noise level `1..=8`; lower is noisier.
pub const SHOT_NOISE_LAMBDAS: [f64; 8] = [60.0, 25.0, 12.0, 5.0, 3.0, 2.0, 1.0, 0.5];

/// `clip(Poisson(lambda * x) / lambda, 0, 1)` per pixel.
pub fn shot_noise<R: Rng + ?Sized>(x: &[f32], level: usize, rng: &mut R) -> Result<Vec<f32>, OodError> {
    if !(1..=SHOT_NOISE_LAMBDAS.len()).contains(&level) {
        return Err(OodError::LevelRange(level));
    }
    let lambda = SHOT_NOISE_LAMBDAS[level - 1];
    Ok(shot_noise_lambda(x, lambda, rng))
}

/// [`shot_noise`] at an explicit rate scale.
pub fn shot_noise_lambda<R: Rng + ?Sized>(x: &[f32], lambda: f64, rng: &mut R) -> Vec<f32> {
    x.iter()
        .map(|&v| {
            let mean = lambda * v as f64;
            if mean <= 0.0 {
                return 0.0;
            }
            let k = Poisson::new(mean).expect("positive mean").sample(rng);
            ((k / lambda) as f32).clamp(0.0, 1.0)
        })
        .collect()
}

/// Rotates a `rows x cols` image by `degrees` counter-clockwise (as
/// displayed, y pointing down) about its center, with bilinear sampling and
/// zero fill.
pub fn rotate(x: &[f32], rows: usize, cols: usize, degrees: f64) -> Vec<f32> {
    let (s, c) = degrees.to_radians().sin_cos();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    let at = |r: isize, q: isize| -> f64 {
        if r < 0 || q < 0 || r >= rows as isize || q >= cols as isize {
            0.0
        } else {
            x[r as usize * cols + q as usize] as f64
        }
    };
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows {
        for q in 0..cols {
            let (dx, dy) = (q as f64 - cx, r as f64 - cy);
            // Inverse map: output pixel pulled from the source rotated back.
            let sx = c * dx - s * dy + cx;
            let sy = s * dx + c * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
                + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
            out[r * cols + q] = v.clamp(0.0, 1.0) as f32;
        }
    }
    out
}
