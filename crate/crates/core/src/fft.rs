//! Discrete Fourier transform with the physics sign convention used by both
//! transforms of the protocol: `S(w_m) = sum_k s_k exp(+i w_m t_k)`, so a
//! signal `exp(-i W t)` shows up at `+W`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Spectrum on a signed, ascending angular-frequency axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Ascending, within `(-pi/dt, pi/dt]`.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    /// Bin spacing of the transform actually performed, `2 pi / (L dt)`.
    pub bin_width: f64,
    /// Amplitude produced by a unit on-bin tone: the window sum.
    pub gain: f64,
    /// Sampling interval of the input.
    pub step: f64,
    /// Number of input samples before padding.
    pub n_input: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.step
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm()).collect()
    }

    /// Position in the ascending arrays of the bin nearest to `omega`.
    pub fn nearest_position(&self, omega: f64) -> usize {
        let len = self.len() as i64;
        let m = (omega / self.bin_width).round() as i64;
        let shift = len - 1 - len / 2;
        (m + shift).rem_euclid(len) as usize
    }
}

/// Signed frequency index of FFT output bin `m` for length `len`, mapped into
/// `(-len/2, len/2]`.
fn signed_index(m: usize, len: usize) -> i64 {
    let m = m as i64;
    let len = len as i64;
    if m > len / 2 {
        m - len
    } else {
        m
    }
}

/// Windowed, zero-padded transform of uniformly sampled data.
pub fn transform(samples: &[Complex64], step: f64, window: Window, zero_pad: usize) -> Spectrum {
    let n = samples.len();
    let len = n * zero_pad.max(1);
    let coeffs = window.coefficients(n);
    let mut buf: Vec<Complex64> = samples
        .iter()
        .zip(&coeffs)
        .map(|(s, w)| s * *w)
        .chain(std::iter::repeat_n(Complex64::new(0.0, 0.0), len - n))
        .collect();
    if len > 0 {
        // rustfft's inverse direction carries the exp(+i ...) kernel, unnormalized.
        FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    }
    let bin_width = 2.0 * PI / (len as f64 * step);
    let mut bins: Vec<(i64, Complex64)> = buf
        .into_iter()
        .enumerate()
        .map(|(m, z)| (signed_index(m, len), z))
        .collect();
    bins.sort_by_key(|(k, _)| *k);
    Spectrum {
        frequencies: bins.iter().map(|(k, _)| *k as f64 * bin_width).collect(),
        amplitudes: bins.into_iter().map(|(_, z)| z).collect(),
        bin_width,
        gain: coeffs.iter().sum(),
        step,
        n_input: n,
    }
}

/// `sum |s|^2` and `(1/L) sum |S|^2` for an unwindowed transform.
pub fn parseval_sums(samples: &[Complex64], spectrum: &Spectrum) -> (f64, f64) {
    let time: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
    let freq: f64 = spectrum.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() / spectrum.len() as f64;
    (time, freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tone(n: usize, dt: f64, omega: f64) -> Vec<Complex64> {
        (0..n).map(|k| Complex64::cis(-omega * k as f64 * dt)).collect()
    }

    #[test]
    fn negative_exponent_lands_on_positive_bin() {
        let (n, dt) = (64, 0.1);
        let bin = 2.0 * PI / (n as f64 * dt);
        let s = transform(&tone(n, dt, 5.0 * bin), dt, Window::None, 1);
        let pos = s.nearest_position(5.0 * bin);
        assert_relative_eq!(s.frequencies[pos], 5.0 * bin, epsilon = 1e-12);
        assert_relative_eq!(s.amplitudes[pos].re, 64.0, epsilon = 1e-9);
        for (k, z) in s.amplitudes.iter().enumerate() {
            if k != pos {
                assert!(z.norm() <= 1e-10 * 64.0);
            }
        }
    }

    #[test]
    fn axis_is_ascending_and_bounded() {
        let s = transform(&tone(16, 0.5, 1.0), 0.5, Window::None, 1);
        assert!(s.frequencies.windows(2).all(|w| w[0] < w[1]));
        assert!(s.frequencies[0] > -PI / 0.5);
        assert_relative_eq!(*s.frequencies.last().unwrap(), PI / 0.5, epsilon = 1e-12);
        assert_eq!(s.nearest_position(0.0), 7);
        assert_eq!(s.frequencies[7], 0.0);
    }

    #[test]
    fn parseval() {
        let samples: Vec<Complex64> = (0..37).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let s = transform(&samples, 0.2, Window::None, 1);
        let (a, b) = parseval_sums(&samples, &s);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn hann_gain() {
        let (n, dt) = (64, 0.1);
        let bin = 2.0 * PI / (n as f64 * dt);
        let s = transform(&tone(n, dt, 3.0 * bin), dt, Window::Hann, 4);
        let pos = s.nearest_position(3.0 * bin);
        assert_relative_eq!(s.gain, 32.0, epsilon = 1e-12);
        assert_relative_eq!(s.amplitudes[pos].norm() / s.gain, 1.0, epsilon = 1e-12);
    }
}
