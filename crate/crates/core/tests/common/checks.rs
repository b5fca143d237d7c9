//! Randomized property checks. Each takes a seed and reports the first
//! violation, so proptest and the acceptance runner can share them.

use amc_core::cumulants::{cumulant_features_with, CumulantConfig, CumulantSet, MomentConvention};
use amc_core::stats::{central_moment, describe, kstat, kstatvar, RealView};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{close, naive_stats};

/// `(name, p, q)` for every cumulant in a set.
pub const ORDERS: [(&str, u32, u32); 6] = [
    ("c40", 4, 0),
    ("c41", 4, 1),
    ("c42", 4, 2),
    ("c60", 6, 0),
    ("c63", 6, 3),
    ("c80", 8, 0),
];

pub fn by_name(c: &CumulantSet, name: &str) -> Complex64 {
    c.entries().iter().find(|(k, _, _)| *k == name).map(|(_, v, _)| *v).unwrap()
}

/// A non-circular complex vector (so every cumulant is generically non-zero).
pub fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let skew: f64 = rng.random_range(0.0..1.0);
    let off = Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(Exp1);
            Complex64::new(re + skew * e, 0.5 * im) + off
        })
        .collect()
}

fn raw(x: &[Complex64]) -> CumulantSet {
    cumulant_features_with(x, &CumulantConfig::default()).unwrap()
}

fn power(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// c_pq(a x) = a^(p-q) conj(a)^q c_pq(x) for a random complex `a`.
pub fn homogeneity_trial(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(16..512);
    let x = random_complex(&mut rng, n);
    let a = Complex64::from_polar(rng.random_range(0.2..5.0), rng.random_range(-3.2..3.2));
    let ax: Vec<Complex64> = x.iter().map(|v| a * v).collect();
    let (c, ca) = (raw(&x), raw(&ax));
    let p = power(&x);
    for (name, order, q) in ORDERS {
        let factor = a.powu(order - q) * a.conj().powu(q);
        let want = factor * by_name(&c, name);
        let got = by_name(&ca, name);
        let scale = (p * a.norm_sqr()).powf(order as f64 / 2.0);
        if (got - want).norm() > 1e-9 * scale.max(want.norm()) {
            return Err(format!("seed {seed} {name}: got {got}, want {want} (a = {a})"));
        }
    }
    Ok(())
}

/// c42 and m21 are unchanged by a phase rotation; power-normalized c40 picks
/// up exactly e^(4j theta).
pub fn phase_rotation_trial(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(16..512);
    let x = random_complex(&mut rng, n);
    let theta: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let rot = Complex64::from_polar(1.0, theta);
    let xr: Vec<Complex64> = x.iter().map(|v| rot * v).collect();
    let (c, cr) = (raw(&x), raw(&xr));
    let p = power(&x);
    let tol = 1e-10 * p * p;
    if (c.c42 - cr.c42).norm() > tol {
        return Err(format!("seed {seed}: c42 {} vs rotated {}", c.c42, cr.c42));
    }
    if (c.m21 - cr.m21).abs() > 1e-12 * p {
        return Err(format!("seed {seed}: m21 {} vs rotated {}", c.m21, cr.m21));
    }
    let (nc, ncr) = (c.power_normalized().unwrap(), cr.power_normalized().unwrap());
    let want = rot.powu(4) * nc.c40;
    if (ncr.c40 - want).norm() > 1e-10 * (1.0 + want.norm()) {
        return Err(format!("seed {seed}: normalized c40 {} vs {}", ncr.c40, want));
    }
    if (ncr.c42 - nc.c42).norm() > 1e-10 * (1.0 + nc.c42.norm()) {
        return Err(format!("seed {seed}: normalized c42 {} vs {}", ncr.c42, nc.c42));
    }
    Ok(())
}

/// Power normalization removes any positive real gain.
pub fn normalization_trial(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_complex(&mut rng, 256);
    let g: f64 = rng.random_range(0.05..20.0);
    let gx: Vec<Complex64> = x.iter().map(|v| v * g).collect();
    let (a, b) = (raw(&x).power_normalized().unwrap(), raw(&gx).power_normalized().unwrap());
    for (name, _, _) in ORDERS {
        let (va, vb) = (by_name(&a, name), by_name(&b, name));
        if (va - vb).norm() > 1e-9 * (1.0 + va.norm()) {
            return Err(format!("seed {seed} {name}: {va} vs {vb} at gain {g}"));
        }
    }
    Ok(())
}

/// E[k_r(X + Y)] = E[k_r(X)] + E[k_r(Y)] for independent X, Y. The difference
/// is estimated on 20 batches and must be within 5 batch-means standard errors
/// of zero.
pub fn additivity_trial(seed: u64) -> Result<(), String> {
    const BATCHES: usize = 20;
    const BATCH: usize = 250;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate: f64 = rng.random_range(0.5..2.0);
    let width: f64 = rng.random_range(0.5..3.0);
    let per_batch: Vec<[f64; 4]> = (0..BATCHES)
        .map(|_| {
            let x: Vec<f64> = (0..BATCH).map(|_| rng.sample::<f64, _>(Exp1) / rate).collect();
            let y: Vec<f64> = (0..BATCH).map(|_| rng.random_range(-width..width)).collect();
            let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let (vx, vy, vs) = (
                RealView::from_values(&x).unwrap(),
                RealView::from_values(&y).unwrap(),
                RealView::from_values(&s).unwrap(),
            );
            std::array::from_fn(|k| {
                let r = k as u32 + 1;
                kstat(&vs, r).unwrap() - kstat(&vx, r).unwrap() - kstat(&vy, r).unwrap()
            })
        })
        .collect();
    let diffs: [Vec<f64>; 4] = std::array::from_fn(|k| per_batch.iter().map(|d| d[k]).collect());
    for (r, d) in diffs.iter().enumerate() {
        let mean = d.iter().sum::<f64>() / BATCHES as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (BATCHES as f64 - 1.0);
        let se = (var / BATCHES as f64).sqrt();
        // Order one is exactly additive; allow rounding only.
        let tol = if r == 0 { 1e-12 * (1.0 + mean.abs()) } else { 5.0 * se };
        if mean.abs() > tol {
            return Err(format!("seed {seed} kstat_{}: mean difference {mean}, tolerance {tol}", r + 1));
        }
    }
    Ok(())
}

/// The printed c63/c80 variants are reachable and differ from the default
/// once the signal power is not 1.
pub fn literal_formulas_break_homogeneity() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_complex(&mut rng, 256);
    let cfg = CumulantConfig {
        formulas: amc_core::cumulants::CumulantFormulas::Literal,
        convention: MomentConvention::Conjugated,
        ..Default::default()
    };
    let two: Vec<Complex64> = x.iter().map(|v| v * 2.0).collect();
    let (a, b) = (
        cumulant_features_with(&x, &cfg).unwrap(),
        cumulant_features_with(&two, &cfg).unwrap(),
    );
    (b.c63 - a.c63 * 64.0).norm() > 1e-6 * a.c63.norm().max(1.0)
}

pub const STATS_REL: f64 = 1e-9;

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let loc: f64 = rng.random_range(-2.0..2.0);
    let scale: f64 = rng.random_range(0.1..5.0);
    match rng.random_range(0..3) {
        0 => (0..n).map(|_| loc + scale * rng.sample::<f64, _>(StandardNormal)).collect(),
        1 => (0..n).map(|_| loc + scale * rng.sample::<f64, _>(Exp1)).collect(),
        _ => (0..n).map(|_| loc + scale * rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Compares every library statistic with the direct-formula oracle; returns
/// a description of the first mismatch.
pub fn check_against_oracle(x: &[f64]) -> Result<(), String> {
    let o = naive_stats(x);
    let view = RealView::from_values(x).unwrap();
    let d = describe(&view).unwrap();
    let sd = o.variance.sqrt();
    let cmp = |name: &str, got: f64, want: f64, floor: f64| {
        if close(got, want, STATS_REL, floor) {
            Ok(())
        } else {
            Err(format!("n={} {name}: got {got:e}, oracle {want:e}", x.len()))
        }
    };
    cmp("min", d.min, o.min, 1.0)?;
    cmp("max", d.max, o.max, 1.0)?;
    cmp("mean", d.mean, o.mean, sd)?;
    cmp("variance", d.variance, o.variance, o.variance)?;
    cmp("skewness", d.skewness, o.skewness, 1.0)?;
    cmp("kurtosis", d.kurtosis, o.kurtosis, 1.0)?;
    for k in 0..8u32 {
        let got = central_moment(&view, k).unwrap();
        cmp(&format!("moment_{k}"), got, o.moments[k as usize], sd.powi(k as i32))?;
    }
    for r in 1..=4u32 {
        let got = kstat(&view, r).unwrap();
        let floor = if r == 1 { sd } else { sd.powi(r as i32) };
        cmp(&format!("kstat_{r}"), got, o.kstats[r as usize - 1], floor)?;
    }
    for r in 1..=2u32 {
        let got = kstatvar(&view, r).unwrap();
        cmp(&format!("kstatvar_{r}"), got, o.kstatvars[r as usize - 1], sd.powi(2 * r as i32) / x.len() as f64)?;
    }
    Ok(())
}

