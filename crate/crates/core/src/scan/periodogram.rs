//! Period seed from a discrete periodogram.

use std::f64::consts::PI;

use thiserror::Error;

/// Peak power (in units of the data variance) that counts as a fringe.
///
/// White noise gives roughly exponentially distributed powers, so the
/// largest of a few thousand trial frequencies stays near 10.
pub const SIGNIFICANCE: f64 = 30.0;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("no fringe detected (peak power {peak_power:.3} below {SIGNIFICANCE})")]
pub struct NoFringe {
    pub peak_power: f64,
}

/// Normalised power `|sum (y - mean) e^{-2 pi i f x}|^2 / (n var)`.
fn power(x: &[f64], dy: &[f64], var: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(dy) {
        let (s, c) = (2.0 * PI * f * xi).sin_cos();
        re += yi * c;
        im += yi * s;
    }
    (re * re + im * im) / (x.len() as f64 * var)
}

/// Period of the strongest periodogram peak between two periods per span and
/// the Nyquist frequency of the finest grid step.
pub fn estimate_period(x: &[f64], y: &[f64]) -> Result<f64, NoFringe> {
    let flat = NoFringe { peak_power: 0.0 };
    let n = x.len().min(y.len());
    if n < 4 {
        return Err(flat);
    }
    let (x, y) = (&x[..n], &y[..n]);
    let span = x[n - 1] - x[0];
    let step = x
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if !(span > 0.0) || !(step > 0.0) {
        return Err(flat);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let dy: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let var = dy.iter().map(|v| v * v).sum::<f64>() / n as f64;
    // roundoff-level wiggle on a constant record is not a fringe
    if !(var > (1e-12 * mean.abs()).powi(2)) {
        return Err(flat);
    }

    let f_min = 2.0 / span;
    let f_max = 0.5 / step;
    if f_max <= f_min {
        return Err(flat);
    }
    // coarse pass at half the Fourier resolution, then a fine pass around the winner
    let df = 0.5 / span;
    let count = ((f_max - f_min) / df).ceil() as usize + 1;
    let (mut best_f, mut best_p) = (f_min, f64::MIN);
    for k in 0..count {
        let f = (f_min + k as f64 * df).min(f_max);
        let p = power(x, &dy, var, f);
        if p > best_p {
            best_p = p;
            best_f = f;
        }
    }
    let fine = df / 32.0;
    let centre = best_f;
    for k in -32..=32 {
        let f = centre + k as f64 * fine;
        if f < f_min || f > f_max {
            continue;
        }
        let p = power(x, &dy, var, f);
        if p > best_p {
            best_p = p;
            best_f = f;
        }
    }
    if best_p < SIGNIFICANCE {
        return Err(NoFringe { peak_power: best_p });
    }
    Ok(1.0 / best_f)
}
