//! Real-coded variation operators: simulated binary crossover and bounded polynomial
//! mutation, plus uniform sampling inside the bounds.

use rand::Rng;

use crate::problem::{repair, CalibrationBounds, CalibrationVector, NUM_VARIABLES};

use super::EvolutionConfig;

/// Genes closer than this are treated as equal and not recombined.
const SBX_MIN_GAP: f64 = 1e-14;

/// Spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exp = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exp)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exp)
    }
}

/// Children of two parent genes for a fixed draw `u`.
pub fn sbx_pair(a: f64, b: f64, u: f64, eta: f64) -> (f64, f64) {
    let beta = sbx_beta(u, eta);
    (
        0.5 * ((1.0 + beta) * a + (1.0 - beta) * b),
        0.5 * ((1.0 - beta) * a + (1.0 + beta) * b),
    )
}

/// Simulated binary crossover. With probability `sbx_probability` the parents are
/// recombined; each gene then crosses with probability `sbx_variable_probability` and
/// the two children swap that gene with probability 1/2.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &CalibrationVector,
    p2: &CalibrationVector,
    bounds: &CalibrationBounds,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> (CalibrationVector, CalibrationVector) {
    let mut c1 = p1.0;
    let mut c2 = p2.0;
    if rng.random::<f64>() < cfg.sbx_probability {
        for i in 0..NUM_VARIABLES {
            if rng.random::<f64>() >= cfg.sbx_variable_probability {
                continue;
            }
            if (p1.0[i] - p2.0[i]).abs() <= SBX_MIN_GAP {
                continue;
            }
            let u: f64 = rng.random();
            let (a, b) = sbx_pair(p1.0[i], p2.0[i], u, cfg.sbx_eta);
            if rng.random::<bool>() {
                c1[i] = b;
                c2[i] = a;
            } else {
                c1[i] = a;
                c2[i] = b;
            }
        }
    }
    (repair(c1, bounds), repair(c2, bounds))
}

/// Bounded polynomial perturbation of `y` in `[lo, hi]` for a fixed draw `u`.
pub fn polynomial_perturbation(y: f64, lo: f64, hi: f64, u: f64, eta: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return y;
    }
    let d1 = (y - lo) / span;
    let d2 = (hi - y) / span;
    let pow = 1.0 / (eta + 1.0);
    let delta = if u < 0.5 {
        let xy = 1.0 - d1;
        let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let xy = 1.0 - d2;
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    (y + delta * span).clamp(lo, hi)
}

pub fn polynomial_mutation<R: Rng + ?Sized>(
    x: &CalibrationVector,
    bounds: &CalibrationBounds,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> CalibrationVector {
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let mut out = x.0;
    for i in 0..NUM_VARIABLES {
        if rng.random::<f64>() < cfg.pm_probability {
            let u: f64 = rng.random();
            out[i] = polynomial_perturbation(out[i], lo[i], hi[i], u, cfg.pm_eta);
        }
    }
    repair(out, bounds)
}

/// Uniform sample inside the bounds.
pub fn random_genome<R: Rng + ?Sized>(bounds: &CalibrationBounds, rng: &mut R) -> CalibrationVector {
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let mut out = [0.0; NUM_VARIABLES];
    for i in 0..NUM_VARIABLES {
        out[i] = lo[i] + rng.random::<f64>() * (hi[i] - lo[i]);
    }
    repair(out, bounds)
}
