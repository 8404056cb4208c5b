//! Simulated NMR readout: free-induction decay of `Tr(e^{-iH t} rho e^{iH t} sum_k sigma_k^+)`,
//! the first Fourier transform over the acquisition time, peak integration,
//! and the closed-form coherence each peak must reproduce.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{raising_transitions, transition_weight, SpinBasisLabel};
use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::fft::{self, Spectrum, Window};
use crate::model::NmrModel;
use crate::states::QuantumState;

/// Absolute tolerance when matching NMR transition frequencies.
pub const FREQUENCY_MATCH_TOL: f64 = 1e-9;

/// Sampled FID, `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FidSignal {
    pub samples: Vec<Complex64>,
    pub dt: f64,
}

impl FidSignal {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 * self.dt)
    }
}

pub type NmrSpectrum = Spectrum;

/// A peak at `E_nmr^alpha - E_nmr^beta`, where `beta` is `alpha` with one spin
/// raised. It carries the coherence `rho_{alpha beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmrPeakId {
    pub alpha: SpinBasisLabel,
    pub beta: SpinBasisLabel,
    pub frequency: f64,
}

impl NmrPeakId {
    pub fn new(alpha: SpinBasisLabel, beta: SpinBasisLabel, nmr: &NmrModel) -> Result<Self> {
        if alpha.n_spins() != nmr.n_spins() {
            return Err(Error::SpinCountMismatch {
                left: alpha.n_spins(),
                right: nmr.n_spins(),
            });
        }
        if transition_weight(alpha, beta)? != 1 {
            return Err(Error::InvalidParameter(format!(
                "({}, {}) is not a single-flip raising transition",
                alpha.label(),
                beta.label()
            )));
        }
        Ok(Self {
            alpha,
            beta,
            frequency: nmr.energy(alpha) - nmr.energy(beta),
        })
    }
}

/// The transitions that share one NMR frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSelector {
    pub peak: NmrPeakId,
    /// Zero-based `(i, j)` index pairs with unit weight and matching frequency.
    pub pairs: Vec<(usize, usize)>,
}

impl PeakSelector {
    pub fn new(nmr: &NmrModel, peak: NmrPeakId) -> Result<Self> {
        let energies = nmr.energies();
        let pairs = raising_transitions(nmr.n_spins())?
            .into_iter()
            .map(|(i, j)| (i.index(), j.index()))
            .filter(|&(i, j)| (energies[i] - energies[j] - peak.frequency).abs() <= FREQUENCY_MATCH_TOL)
            .collect();
        Ok(Self { peak, pairs })
    }

    /// More than one transition contributes.
    pub fn is_degenerate(&self) -> bool {
        self.pairs.len() > 1
    }

    pub fn from_density(&self, rho: &DensityMatrix) -> Complex64 {
        self.pairs.iter().map(|&(i, j)| rho.matrix[(i, j)]).sum()
    }

    /// Same as [`Self::from_density`] for `rho = |psi><psi|`.
    pub fn from_state(&self, psi: &QuantumState) -> Complex64 {
        let a = psi.amplitudes();
        self.pairs.iter().map(|&(i, j)| a[i] * a[j].conj()).sum()
    }
}

/// Closed-form amplitude of `peak`: the sum of `rho_{i j}` over all unit-weight
/// transitions whose NMR frequency equals the peak's.
pub fn coherence_amplitude(rho: &DensityMatrix, nmr: &NmrModel, peak: &NmrPeakId) -> Result<Complex64> {
    check_dims(rho, nmr)?;
    Ok(PeakSelector::new(nmr, *peak)?.from_density(rho))
}

fn check_dims(rho: &DensityMatrix, nmr: &NmrModel) -> Result<()> {
    let expected = 1usize << nmr.n_spins();
    if rho.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: rho.dim(),
        });
    }
    Ok(())
}

/// Samples of `s(t_k) = sum_{(i,j)} rho_ij exp(-i (E_i - E_j) t_k)` over the
/// nonzero entries `<j|sum sigma^+|i>`.
pub fn fid_signal(rho: &DensityMatrix, nmr: &NmrModel, dt: f64, n_samples: usize) -> Result<FidSignal> {
    check_dims(rho, nmr)?;
    if n_samples < 2 {
        return Err(Error::InvalidParameter("FID needs at least two samples".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dwell time {dt} must be positive")));
    }
    let energies = nmr.energies();
    let terms: Vec<(Complex64, f64)> = raising_transitions(nmr.n_spins())?
        .into_iter()
        .map(|(i, j)| (rho.matrix[(i.index(), j.index())], energies[i.index()] - energies[j.index()]))
        .filter(|(c, _)| c.norm_sqr() > 0.0)
        .collect();
    let samples = (0..n_samples)
        .map(|k| {
            let t = k as f64 * dt;
            terms.iter().map(|(c, w)| c * Complex64::cis(-w * t)).sum()
        })
        .collect();
    Ok(FidSignal { samples, dt })
}

/// Options for the first transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstFtOptions {
    pub window: Window,
    pub zero_pad: usize,
}

impl Default for FirstFtOptions {
    fn default() -> Self {
        Self {
            window: Window::None,
            zero_pad: 1,
        }
    }
}

/// Transform over the acquisition time, without windowing.
pub fn first_ft(fid: &FidSignal) -> NmrSpectrum {
    first_ft_with(fid, FirstFtOptions::default())
}

pub fn first_ft_with(fid: &FidSignal, options: FirstFtOptions) -> NmrSpectrum {
    fft::transform(&fid.samples, fid.dt, options.window, options.zero_pad)
}

/// Complex area of `peak`: the sum of bins within `window_bins` of the bin
/// nearest the peak frequency. Divide by `spectrum.gain` to get the coherence.
pub fn peak_amplitude(spectrum: &NmrSpectrum, peak: &NmrPeakId, window_bins: usize) -> Result<Complex64> {
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let nyquist = spectrum.nyquist();
    if peak.frequency.abs() >= nyquist {
        return Err(Error::Aliased {
            frequency: peak.frequency,
            nyquist,
        });
    }
    let len = spectrum.len() as i64;
    let center = spectrum.nearest_position(peak.frequency) as i64;
    let w = window_bins as i64;
    Ok((center - w..=center + w)
        .map(|p| spectrum.amplitudes[p.rem_euclid(len) as usize])
        .sum())
}

/// Acquisition grid: dwell time and sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGrid {
    pub dt: f64,
    pub n_samples: usize,
}

/// Greatest common divisor of nonnegative reals, with relative tolerance.
fn float_gcd(values: &[f64], tol: f64) -> Option<f64> {
    let scale = values.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return Some(1.0);
    }
    let floor = tol * scale;
    let mut g = 0.0f64;
    for &v in values.iter().filter(|v| **v > floor) {
        let (mut a, mut b) = (g.max(v), g.min(v));
        let mut iterations = 0;
        while b > floor {
            let r = a % b;
            a = b;
            b = if r > b - floor { 0.0 } else { r };
            iterations += 1;
            if iterations > 200 {
                return None;
            }
        }
        g = a;
    }
    (g > 0.0).then_some(g)
}

/// Chooses `dt` and a power-of-two sample count so that every single-flip NMR
/// frequency of `nmr` sits exactly on a transform bin and below Nyquist.
/// Returns `None` when the frequencies share no usable common quantum.
pub fn commensurate_grid(nmr: &NmrModel) -> Option<AcquisitionGrid> {
    let energies = nmr.energies();
    let freqs: Vec<f64> = raising_transitions(nmr.n_spins())
        .ok()?
        .into_iter()
        .map(|(i, j)| (energies[i.index()] - energies[j.index()]).abs())
        .collect();
    let max = freqs.iter().copied().fold(0.0, f64::max);
    let quantum = float_gcd(&freqs, 1e-12)?;
    if max > 0.0 && quantum < max * 1e-5 {
        return None;
    }
    let on_grid = freqs.iter().all(|f| {
        let r = f / quantum;
        (r - r.round()).abs() <= 1e-9 * r.max(1.0)
    });
    if !on_grid {
        return None;
    }
    let needed = (2.0 * max / quantum).floor() as usize + 2;
    let n_samples = needed.next_power_of_two().max(64);
    Some(AcquisitionGrid {
        dt: 2.0 * PI / (quantum * n_samples as f64),
        n_samples,
    })
}

/// Fallback grid for incommensurate frequencies: Nyquist at twice the largest
/// frequency, `n_samples` points.
pub fn oversampled_grid(nmr: &NmrModel, n_samples: usize) -> AcquisitionGrid {
    let energies = nmr.energies();
    let max = raising_transitions(nmr.n_spins())
        .map(|pairs| {
            pairs
                .into_iter()
                .map(|(i, j)| (energies[i.index()] - energies[j.index()]).abs())
                .fold(0.0, f64::max)
        })
        .unwrap_or(0.0)
        .max(1.0);
    AcquisitionGrid {
        dt: PI / (2.0 * max),
        n_samples,
    }
}

/// FID of `rho`, transformed and integrated at `peak`, normalized to the
/// coherence scale.
pub fn measured_amplitude(
    rho: &DensityMatrix,
    nmr: &NmrModel,
    peak: &NmrPeakId,
    grid: AcquisitionGrid,
    options: FirstFtOptions,
    window_bins: usize,
) -> Result<Complex64> {
    let fid = fid_signal(rho, nmr, grid.dt, grid.n_samples)?;
    let spectrum = first_ft_with(&fid, options);
    Ok(peak_amplitude(&spectrum, peak, window_bins)? / spectrum.gain)
}
