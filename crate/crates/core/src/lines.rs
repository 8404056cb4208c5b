//! High-resolution line extraction for uniformly sampled sums of complex
//! exponentials `s_k = sum_j a_j exp(-i w_j k delta)`.
//!
//! A windowed transform alone cannot separate lines closer than its main lobe,
//! and interfering neighbours shift or erase each other's maxima. Lines are
//! seeded by a matrix pencil, topped up from the residual's padded spectrum,
//! and refined jointly by damped Gauss-Newton least squares.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, Window};

/// Padding of the detection transform.
const DETECT_PAD: usize = 8;
const MAX_ITERATIONS: usize = 200;
/// Residual energy, relative to the signal, treated as an exact fit.
const EXACT_FIT: f64 = 1e-26;
/// Singular values below this fraction of the largest count as noise.
const PENCIL_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedLine {
    /// Angular frequency within `(-pi/delta, pi/delta]`.
    pub frequency: f64,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineFitOptions {
    /// Lines weaker than this fraction of the strongest are dropped.
    pub threshold_fraction: f64,
    pub max_lines: usize,
}

impl Default for LineFitOptions {
    fn default() -> Self {
        Self {
            threshold_fraction: 0.02,
            max_lines: 64,
        }
    }
}

fn wrap_phase(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

fn model(thetas: &[f64], amps: &[Complex64], len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|k| {
            thetas
                .iter()
                .zip(amps)
                .map(|(t, a)| a * Complex64::cis(-t * k as f64))
                .sum()
        })
        .collect()
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Least-squares amplitudes for fixed phases, via SVD of the real-stacked basis.
fn linear_amplitudes(samples: &[Complex64], thetas: &[f64]) -> Vec<Complex64> {
    let (len, n) = (samples.len(), thetas.len());
    let mut a = DMatrix::<f64>::zeros(2 * len, 2 * n);
    let mut b = DVector::<f64>::zeros(2 * len);
    for k in 0..len {
        b[k] = samples[k].re;
        b[len + k] = samples[k].im;
        for (j, t) in thetas.iter().enumerate() {
            let e = Complex64::cis(-t * k as f64);
            // a = x + i y contributes (x + i y) e
            a[(k, 2 * j)] = e.re;
            a[(len + k, 2 * j)] = e.im;
            a[(k, 2 * j + 1)] = -e.im;
            a[(len + k, 2 * j + 1)] = e.re;
        }
    }
    let x = a.svd(true, true).solve(&b, 1e-12).expect("u and v were computed");
    (0..n).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])).collect()
}

/// Phases of the signal poles by the matrix-pencil method: the rank of the
/// Hankel data matrix gives the number of lines and the shift between its
/// leading and trailing right singular vectors carries the poles.
fn pencil_phases(samples: &[Complex64], cap: usize) -> Vec<f64> {
    let len = samples.len();
    let p = len / 2;
    let rows = len - p;
    let y = DMatrix::<Complex64>::from_fn(rows, p + 1, |r, c| samples[r + c]);
    let svd = y.svd(false, true);
    let sv = &svd.singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    let order = sv.iter().filter(|s| **s > PENCIL_RANK_TOL * top).count().min(cap);
    if order == 0 {
        return Vec::new();
    }
    let vt = svd.v_t.expect("v_t was computed");
    // singular values come sorted in descending order
    let w = vt.rows(0, order);
    let w1 = w.columns(0, p).into_owned();
    let w2 = w.columns(1, p).into_owned();
    let Ok(pinv) = w1.pseudo_inverse(1e-14) else {
        return Vec::new();
    };
    let shift = w2 * pinv;
    match shift.eigenvalues() {
        Some(z) => z
            .iter()
            .filter(|z| z.norm() > 1e-3)
            .map(|z| wrap_phase(-z.arg()))
            .collect(),
        None => Vec::new(),
    }
}

/// Joint Levenberg-Marquardt refinement of phases and amplitudes.
fn refine(samples: &[Complex64], thetas: &mut [f64], amps: &mut [Complex64]) {
    let (len, n) = (samples.len(), thetas.len());
    let total = energy(samples);
    let residual = |t: &[f64], a: &[Complex64]| -> Vec<Complex64> {
        samples.iter().zip(model(t, a, len)).map(|(s, m)| s - m).collect()
    };
    let mut r = residual(thetas, amps);
    let mut cost = energy(&r);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        if cost <= EXACT_FIT * total {
            break;
        }
        // parameters per line: phase, Re a, Im a
        let mut jac = DMatrix::<f64>::zeros(2 * len, 3 * n);
        let mut rv = DVector::<f64>::zeros(2 * len);
        for k in 0..len {
            rv[k] = r[k].re;
            rv[len + k] = r[k].im;
            for j in 0..n {
                let e = Complex64::cis(-thetas[j] * k as f64);
                let d = amps[j] * e * Complex64::new(0.0, -(k as f64));
                let cols = [(3 * j, d), (3 * j + 1, e), (3 * j + 2, e * Complex64::i())];
                for (c, z) in cols {
                    jac[(k, c)] = z.re;
                    jac[(len + k, c)] = z.im;
                }
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &rv;
        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for i in 0..3 * n {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let t_new: Vec<f64> = (0..n).map(|j| wrap_phase(thetas[j] + step[3 * j])).collect();
            let a_new: Vec<Complex64> = (0..n)
                .map(|j| amps[j] + Complex64::new(step[3 * j + 1], step[3 * j + 2]))
                .collect();
            let r_new = residual(&t_new, &a_new);
            let c_new = energy(&r_new);
            if c_new < cost {
                let gain = (cost - c_new) / cost;
                thetas.copy_from_slice(&t_new);
                amps.copy_from_slice(&a_new);
                r = r_new;
                cost = c_new;
                lambda = (lambda / 5.0).max(1e-15);
                accepted = true;
                if gain < 1e-14 {
                    return;
                }
                break;
            }
            lambda *= 8.0;
        }
        if !accepted {
            return;
        }
    }
}

/// Resolve the lines of a uniformly sampled series with spacing `delta`,
/// strongest first.
pub fn fit_lines(samples: &[Complex64], delta: f64, options: LineFitOptions) -> Result<Vec<FittedLine>> {
    if !(options.threshold_fraction > 0.0 && options.threshold_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold fraction {} must lie in (0, 1)",
            options.threshold_fraction
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("sample spacing {delta} must be positive")));
    }
    let len = samples.len();
    if len < 4 {
        return Err(Error::InvalidParameter(format!("line fit needs at least 4 samples, got {len}")));
    }
    let total = energy(samples);
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let cap = options.max_lines.min(len / 2).max(1);
    let mut thetas = pencil_phases(samples, cap);
    let mut amps = linear_amplitudes(samples, &thetas);
    refine(samples, &mut thetas, &mut amps);
    let mut residual: Vec<Complex64> = samples
        .iter()
        .zip(model(&thetas, &amps, len))
        .map(|(s, m)| s - m)
        .collect();
    // greedy top-up for anything the pencil missed
    while thetas.len() < cap && energy(&residual) > EXACT_FIT * total {
        let spec = fft::transform(&residual, 1.0, Window::None, DETECT_PAD);
        let mags = spec.magnitudes();
        let (k, peak) = mags
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("transform is nonempty");
        let strongest = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if peak / len as f64 <= 0.5 * options.threshold_fraction * strongest {
            break;
        }
        let m = mags.len();
        let (l, r) = (mags[(k + m - 1) % m], mags[(k + 1) % m]);
        let denom = l - 2.0 * peak + r;
        let offset = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        thetas.push(wrap_phase(spec.frequencies[k] + offset * spec.bin_width));
        amps = linear_amplitudes(samples, &thetas);
        refine(samples, &mut thetas, &mut amps);
        residual = samples
            .iter()
            .zip(model(&thetas, &amps, len))
            .map(|(s, m)| s - m)
            .collect();
    }
    let strongest = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let keep: Vec<usize> = (0..thetas.len())
        .filter(|&j| amps[j].norm() >= options.threshold_fraction * strongest)
        .collect();
    let thetas: Vec<f64> = keep.iter().map(|&j| thetas[j]).collect();
    let amps: Vec<Complex64> = keep.iter().map(|&j| amps[j]).collect();
    let mut lines: Vec<FittedLine> = thetas
        .iter()
        .zip(&amps)
        .map(|(t, a)| FittedLine {
            frequency: t / delta,
            amplitude: *a,
        })
        .collect();
    lines.sort_by(|a, b| b.amplitude.norm().total_cmp(&a.amplitude.norm()));
    Ok(lines)
}
