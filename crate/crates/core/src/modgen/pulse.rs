//! Pulse-shaping filters: root-raised-cosine for the linear classes and a
//! Gaussian frequency-smoothing filter for GFSK/GMSK.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

/// Root-raised-cosine taps spanning `span_symbols` symbols, normalized to unit energy.
pub fn root_raised_cosine(rolloff: f64, samples_per_symbol: usize, span_symbols: usize) -> Vec<f64> {
    let len = span_symbols * samples_per_symbol + 1;
    let center = (len / 2) as f64;
    let sps = samples_per_symbol as f64;
    let beta = rolloff;

    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let t = (k as f64 - center) / sps;
            rrc_at(t, beta)
        })
        .collect();

    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = energy.sqrt().recip();
    taps.iter_mut().for_each(|h| *h *= scale);
    taps
}

fn rrc_at(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && ((4.0 * beta * t).abs() - 1.0).abs() < 1e-12 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Gaussian frequency filter with bandwidth-time product `bt`, normalized to unit DC gain.
pub fn gaussian(bt: f64, samples_per_symbol: usize, span_symbols: usize) -> Vec<f64> {
    let len = span_symbols * samples_per_symbol + 1;
    let center = (len / 2) as f64;
    let sps = samples_per_symbol as f64;
    let alpha = 2.0 * PI * PI * bt * bt / LN_2;

    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let t = (k as f64 - center) / sps;
            (-alpha * t * t).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    taps
}

/// Full linear convolution of a complex sequence with real taps.
pub fn convolve(input: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    if input.is_empty() || taps.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); input.len() + taps.len() - 1];
    for (i, &x) in input.iter().enumerate() {
        if x.re == 0.0 && x.im == 0.0 {
            continue;
        }
        for (j, &h) in taps.iter().enumerate() {
            out[i + j] += x * h;
        }
    }
    out
}

/// Full linear convolution of a real sequence with real taps.
pub fn convolve_real(input: &[f64], taps: &[f64]) -> Vec<f64> {
    if input.is_empty() || taps.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; input.len() + taps.len() - 1];
    for (i, &x) in input.iter().enumerate() {
        for (j, &h) in taps.iter().enumerate() {
            out[i + j] += x * h;
        }
    }
    out
}
