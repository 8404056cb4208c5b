//! The protocol end to end: evolve the working state over a uniform grid of
//! protocol times, record the complex amplitude of each tracked NMR peak, run
//! the second Fourier transform over `tau`, and turn the recovered
//! frequencies into pairing-model level differences.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{dimension, SpinBasisLabel};
use crate::dynamics::{DensityMatrix, EvolutionMode, SpectralEvolver, TrotterEvolver};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::fft::{self, Window};
use crate::lines::{self, FittedLine, LineFitOptions};
use crate::model::{build_pairing_hamiltonian, exact_spectrum, Eigensystem, NmrModel, PairingModel};
use crate::readout::{self, AcquisitionGrid, FirstFtOptions, NmrPeakId, PeakSelector};
use crate::states::QuantumState;

/// Relative tolerance for grid uniformity.
const GRID_TOL: f64 = 1e-9;

/// Uniform protocol-time grid `tau_k = k * delta`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub delta: f64,
    pub count: usize,
}

impl TauGrid {
    pub fn new(delta: f64, count: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta_tau {delta} must be positive")));
        }
        if count == 0 {
            return Err(Error::InvalidParameter("tau grid is empty".into()));
        }
        Ok(Self { delta, count })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| k as f64 * self.delta).collect()
    }

    /// `2 pi / (M delta)`.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / (self.count as f64 * self.delta)
    }
}

/// Where the per-`tau` peak amplitudes come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum AmplitudePath {
    /// Closed-form coherence, no simulated acquisition.
    Oracle,
    /// Simulated FID, first transform and peak integration.
    Fid {
        grid: AcquisitionGrid,
        options: FirstFtOptions,
        window_bins: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub evolution: EvolutionMode,
    /// Product-formula slices per `delta_tau` increment.
    pub trotter_steps: usize,
    pub path: AmplitudePath,
    pub exec: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            evolution: EvolutionMode::Exact,
            trotter_steps: 64,
            path: AmplitudePath::Oracle,
            exec: Execution::default(),
        }
    }
}

/// Per-peak amplitude series over the `tau` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub tau: Vec<f64>,
    pub tracked_peaks: Vec<NmrPeakId>,
    /// `amplitudes[peak][tau_index]`.
    pub amplitudes: Vec<Vec<Complex64>>,
}

impl SweepRecord {
    /// Spacing of the grid, checked for uniformity.
    pub fn delta_tau(&self) -> Result<f64> {
        if self.tau.len() < 2 {
            return Err(Error::NonUniformGrid);
        }
        let delta = self.tau[1] - self.tau[0];
        if !(delta > 0.0) {
            return Err(Error::NonUniformGrid);
        }
        let uniform = self
            .tau
            .windows(2)
            .all(|w| ((w[1] - w[0]) - delta).abs() <= GRID_TOL * delta.max(w[1].abs()));
        if !uniform {
            return Err(Error::NonUniformGrid);
        }
        Ok(delta)
    }
}

/// The evolved state at every grid point. Exact mode evolves each `tau_k`
/// independently from the eigensystem. Trotter mode repeats one
/// `trotter_steps`-slice block of length `delta` `k` times, as a pulse sequence
/// would, so the record stays a sum of exponentials in `tau`.
pub fn sweep_states(
    model: &PairingModel,
    psi0: &QuantumState,
    grid: TauGrid,
    eigensystem: Option<&Eigensystem>,
    evolution: EvolutionMode,
    trotter_steps: usize,
    exec: Execution,
) -> Result<Vec<QuantumState>> {
    let n = model.n_spins();
    if psi0.dim() != dimension(n) {
        return Err(Error::DimensionMismatch {
            expected: dimension(n),
            found: psi0.dim(),
        });
    }
    match evolution {
        EvolutionMode::Exact => {
            let owned;
            let eig = match eigensystem {
                Some(e) => e,
                None => {
                    owned = exact_spectrum(&build_pairing_hamiltonian(model)?)?;
                    &owned
                }
            };
            let evolver = SpectralEvolver::new(eig, psi0)?;
            let tau = grid.values();
            Ok(crate::exec::map_indexed(exec, tau.len(), |k| evolver.evolve(tau[k])))
        }
        EvolutionMode::Trotter => {
            let block = TrotterEvolver::new(model, trotter_steps)?;
            let mut out = Vec::with_capacity(grid.count);
            let mut psi = psi0.clone();
            for _ in 0..grid.count {
                let next = block.evolve(&psi, grid.delta)?;
                out.push(psi);
                psi = next;
            }
            Ok(out)
        }
    }
}

/// Evolve, read out and record every tracked peak at every `tau`. The
/// eigensystem is used for exact evolution and is computed when not given.
pub fn run_tau_sweep(
    model: &PairingModel,
    nmr: &NmrModel,
    psi0: &QuantumState,
    grid: TauGrid,
    tracked_peaks: &[NmrPeakId],
    eigensystem: Option<&Eigensystem>,
    options: SweepOptions,
) -> Result<SweepRecord> {
    let n = model.n_spins();
    if nmr.n_spins() != n {
        return Err(Error::SpinCountMismatch {
            left: n,
            right: nmr.n_spins(),
        });
    }
    let selectors = tracked_peaks
        .iter()
        .map(|p| PeakSelector::new(nmr, *p))
        .collect::<Result<Vec<_>>>()?;
    let states = sweep_states(
        model,
        psi0,
        grid,
        eigensystem,
        options.evolution,
        options.trotter_steps,
        options.exec,
    )?;

    let per_tau = try_map_indexed(options.exec, states.len(), |k| {
        let psi = &states[k];
        match options.path {
            AmplitudePath::Oracle => Ok(selectors.iter().map(|s| s.from_state(psi)).collect::<Vec<_>>()),
            AmplitudePath::Fid {
                grid,
                options: ft,
                window_bins,
            } => {
                let rho = DensityMatrix::from_pure(psi);
                selectors
                    .iter()
                    .map(|s| readout::measured_amplitude(&rho, nmr, &s.peak, grid, ft, window_bins))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::AtTau {
                        index: k,
                        source: Box::new(e),
                    })
            }
        }
    })?;

    let amplitudes = (0..tracked_peaks.len())
        .map(|p| per_tau.iter().map(|row| row[p]).collect())
        .collect();
    Ok(SweepRecord {
        tau: grid.values(),
        tracked_peaks: tracked_peaks.to_vec(),
        amplitudes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondFtOptions {
    pub window: Window,
    pub zero_pad: usize,
}

impl Default for SecondFtOptions {
    fn default() -> Self {
        Self {
            window: Window::None,
            zero_pad: 1,
        }
    }
}

/// Spectrum of one peak's amplitude series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingSpectrum {
    pub peak: Option<NmrPeakId>,
    /// Signed angular frequencies, ascending, within `(-pi/delta, pi/delta]`.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    /// `2 pi / (M delta)` of the unpadded grid.
    pub resolution: f64,
    /// Spacing of the (possibly padded) output bins.
    pub bin_width: f64,
    pub assignments: Option<Vec<(usize, usize)>>,
}

/// Second transform over `tau` for `record.amplitudes[peak_index]`.
pub fn second_ft(record: &SweepRecord, peak_index: usize, options: SecondFtOptions) -> Result<PairingSpectrum> {
    let delta = record.delta_tau()?;
    if record.tau.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "second transform needs at least 4 tau points, got {}",
            record.tau.len()
        )));
    }
    let series = record
        .amplitudes
        .get(peak_index)
        .ok_or_else(|| Error::InvalidParameter(format!("no tracked peak {peak_index}")))?;
    let spectrum = fft::transform(series, delta, options.window, options.zero_pad);
    Ok(PairingSpectrum {
        peak: record.tracked_peaks.get(peak_index).copied(),
        magnitudes: spectrum.magnitudes(),
        frequencies: spectrum.frequencies,
        amplitudes: spectrum.amplitudes,
        resolution: 2.0 * PI / (record.tau.len() as f64 * delta),
        bin_width: spectrum.bin_width,
        assignments: None,
    })
}

/// Local maxima above `threshold_fraction` of the global maximum, refined by
/// a three-point parabola through the log-magnitudes, ascending.
pub fn extract_differences(spectrum: &PairingSpectrum, threshold_fraction: f64) -> Result<Vec<f64>> {
    Ok(extract_peaks(spectrum, threshold_fraction)?
        .into_iter()
        .map(|p| p.frequency)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub magnitude: f64,
}

pub fn extract_peaks(spectrum: &PairingSpectrum, threshold_fraction: f64) -> Result<Vec<SpectralPeak>> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold fraction {threshold_fraction} must lie in (0, 1)"
        )));
    }
    let mags = &spectrum.magnitudes;
    let len = mags.len();
    if len == 0 {
        return Err(Error::EmptySpectrum);
    }
    let max = mags.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(Vec::new());
    }
    let floor = threshold_fraction * max;
    if len < 3 {
        let k = mags.iter().position(|m| *m == max).expect("max is attained");
        return Ok(vec![SpectralPeak {
            frequency: spectrum.frequencies[k],
            magnitude: max,
        }]);
    }
    let at = |k: isize| mags[k.rem_euclid(len as isize) as usize];
    let mut peaks = Vec::new();
    for k in 0..len {
        let (l, c, r) = (at(k as isize - 1), mags[k], at(k as isize + 1));
        if c < floor || c <= l || c < r {
            continue;
        }
        // log-parabola vertex; skipped when a neighbour is numerically zero
        let offset = if l > 1e-12 * c && r > 1e-12 * c {
            let (ll, lc, lr) = (l.ln(), c.ln(), r.ln());
            let denom = ll - 2.0 * lc + lr;
            if denom < 0.0 {
                (0.5 * (ll - lr) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        } else {
            0.0
        };
        peaks.push(SpectralPeak {
            frequency: spectrum.frequencies[k] + offset * spectrum.bin_width,
            magnitude: c,
        });
    }
    peaks.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(peaks)
}

/// Lines of one tracked peak's amplitude series, strongest first. Unlike the
/// spectral maxima this separates lines closer than a bin.
pub fn resolve_lines(record: &SweepRecord, peak_index: usize, options: LineFitOptions) -> Result<Vec<FittedLine>> {
    let delta = record.delta_tau()?;
    let series = record
        .amplitudes
        .get(peak_index)
        .ok_or_else(|| Error::InvalidParameter(format!("no tracked peak {peak_index}")))?;
    lines::fit_lines(series, delta, options)
}

/// Frequencies of [`resolve_lines`], ascending.
pub fn resolve_differences(record: &SweepRecord, peak_index: usize, options: LineFitOptions) -> Result<Vec<f64>> {
    let mut f: Vec<f64> = resolve_lines(record, peak_index, options)?
        .into_iter()
        .map(|l| l.frequency)
        .collect();
    f.sort_by(f64::total_cmp);
    Ok(f)
}

/// Known level a peak's frequencies are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// `|2^N>`, energy `-sum(eps)/2`. Peaks with `alpha = 2^N` oscillate at
    /// `E_anchor - E_j`.
    AllDown,
    /// `|1>`, energy `+sum(eps)/2`. Peaks with `beta = 1` oscillate at
    /// `E_i - E_anchor`.
    AllUp,
}

impl Anchor {
    pub fn for_peak(peak: &NmrPeakId) -> Option<Self> {
        let n = peak.alpha.n_spins();
        if peak.alpha.label() == dimension(n) {
            Some(Anchor::AllDown)
        } else if peak.beta.label() == 1 {
            Some(Anchor::AllUp)
        } else {
            None
        }
    }

    pub fn energy(self, model: &PairingModel) -> f64 {
        match self {
            Anchor::AllDown => model.all_down_energy(),
            Anchor::AllUp => model.all_up_energy(),
        }
    }

    /// Level offset from the anchor for a recovered frequency.
    pub fn offset(self, frequency: f64) -> f64 {
        match self {
            Anchor::AllDown => -frequency,
            Anchor::AllUp => frequency,
        }
    }
}

/// A recovered frequency matched against the exact spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub frequency: f64,
    /// `E_i - E_j` of the matched pair.
    pub exact: f64,
    /// Eigenlevel indices (ascending-energy order) of the pair.
    pub levels: (usize, usize),
    pub subspaces: (Option<usize>, Option<usize>),
    pub residual: f64,
    pub residual_bins: f64,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub anchor: Anchor,
    /// Energy of the anchor level.
    pub reference: f64,
    /// Level offsets from the anchor, one per recovered frequency.
    pub differences: Vec<f64>,
    /// `reference + differences`.
    pub absolute_levels: Vec<f64>,
    pub assignments: Option<Vec<Assignment>>,
}

/// Exact data used to check recovered frequencies.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub eigensystem: &'a Eigensystem,
    /// Bin width used for residuals and ambiguity.
    pub resolution: f64,
}

/// Candidate level pairs `(i, j)` for a peak: `i` in the subspace of `alpha`,
/// `j` in that of `beta`.
pub fn candidate_pairs(eig: &Eigensystem, peak: &NmrPeakId) -> Vec<(usize, usize)> {
    let left = eig.indices_in(peak.alpha.excitation());
    let right = eig.indices_in(peak.beta.excitation());
    left.iter()
        .flat_map(|&i| right.iter().map(move |&j| (i, j)))
        .collect()
}

/// Convert recovered frequencies of `peak` into levels anchored at a known
/// basis-state energy and, with `validation`, match each to the nearest exact
/// `E_i - E_j`. Two distinct exact differences within one bin make a match
/// ambiguous; `strict` turns that into an error.
pub fn assign_and_anchor(
    differences: &[f64],
    model: &PairingModel,
    peak: &NmrPeakId,
    validation: Option<Validation<'_>>,
    strict: bool,
) -> Result<LevelReport> {
    let anchor = Anchor::for_peak(peak).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "peak ({}, {}) is not anchored at |1> or |2^N>",
            peak.alpha.label(),
            peak.beta.label()
        ))
    })?;
    let reference = anchor.energy(model);
    let offsets: Vec<f64> = differences.iter().map(|&f| anchor.offset(f)).collect();
    let absolute_levels = offsets.iter().map(|d| reference + d).collect();

    let assignments = validation
        .map(|v| {
            let pairs = candidate_pairs(v.eigensystem, peak);
            differences
                .iter()
                .map(|&f| assign_one(f, v, &pairs, strict))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;

    Ok(LevelReport {
        anchor,
        reference,
        differences: offsets,
        absolute_levels,
        assignments,
    })
}

fn assign_one(frequency: f64, v: Validation<'_>, pairs: &[(usize, usize)], strict: bool) -> Result<Assignment> {
    let values = &v.eigensystem.values;
    let diff = |(i, j): (usize, usize)| values[i] - values[j];
    let &best = pairs
        .iter()
        .min_by(|a, b| {
            (diff(**a) - frequency)
                .abs()
                .total_cmp(&(diff(**b) - frequency).abs())
        })
        .ok_or_else(|| Error::InvalidParameter("no candidate level pairs".into()))?;
    let exact = diff(best);
    let mut nearby: Vec<f64> = pairs
        .iter()
        .map(|p| diff(*p))
        .filter(|d| (d - frequency).abs() <= v.resolution)
        .collect();
    nearby.sort_by(f64::total_cmp);
    nearby.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    let ambiguous = nearby.len() > 1;
    if ambiguous && strict {
        return Err(Error::AmbiguousAssignment {
            frequency,
            candidates: nearby.len(),
        });
    }
    let residual = frequency - exact;
    Ok(Assignment {
        frequency,
        exact,
        levels: best,
        subspaces: (v.eigensystem.subspace_tags[best.0], v.eigensystem.subspace_tags[best.1]),
        residual,
        residual_bins: residual / v.resolution,
        ambiguous,
    })
}

/// Largest frequency the second transform has to resolve, and the matching
/// Nyquist bound `pi / max` on `delta_tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NyquistBound {
    pub max_frequency: f64,
    pub max_delta_tau: f64,
}

impl NyquistBound {
    /// Exact spread of the spectrum, `E_max - E_min`.
    pub fn from_spectrum(eig: &Eigensystem) -> Self {
        let lo = eig.values.first().copied().unwrap_or(0.0);
        let hi = eig.values.last().copied().unwrap_or(0.0);
        Self::from_max(hi - lo)
    }

    /// Parameter bound `sum |eps| + N (N - 1) |V|`, no diagonalization.
    pub fn from_model(model: &PairingModel) -> Self {
        Self::from_max(model.difference_bound())
    }

    fn from_max(max_frequency: f64) -> Self {
        Self {
            max_frequency,
            max_delta_tau: if max_frequency > 0.0 {
                PI / max_frequency
            } else {
                f64::INFINITY
            },
        }
    }

    pub fn check(&self, delta_tau: f64) -> Result<()> {
        if delta_tau > self.max_delta_tau {
            return Err(Error::NyquistViolation {
                delta: delta_tau,
                bound: self.max_delta_tau,
                max_frequency: self.max_frequency,
            });
        }
        Ok(())
    }
}

/// The single-flip peaks touching `|1>` or `|2^N>`: `(2^(N-k)+1 -> 1)` and
/// `(2^N -> 2^N - 2^(N-k))` for `k = 1..N`, kept when the state has weight in
/// both subspaces involved.
pub fn auto_peaks(nmr: &NmrModel, psi0: &QuantumState) -> Result<Vec<NmrPeakId>> {
    let n = nmr.n_spins();
    let support = psi0.support();
    let has = |m: usize| support.contains(&m);
    let mut peaks = Vec::new();
    for k in 1..=n {
        let flip = 1usize << (n - k);
        let alpha = SpinBasisLabel::new(flip + 1, n)?;
        let beta = SpinBasisLabel::new(1, n)?;
        if has(alpha.excitation()) && has(beta.excitation()) {
            peaks.push(NmrPeakId::new(alpha, beta, nmr)?);
        }
    }
    for k in 1..=n {
        let flip = 1usize << (n - k);
        let alpha = SpinBasisLabel::new(dimension(n), n)?;
        let beta = SpinBasisLabel::new(dimension(n) - flip, n)?;
        if has(alpha.excitation()) && has(beta.excitation()) {
            let p = NmrPeakId::new(alpha, beta, nmr)?;
            if !peaks.contains(&p) {
                peaks.push(p);
            }
        }
    }
    Ok(peaks)
}

/// `sum a_i b_{i alpha} a_j^* b_{j beta}^*` grouped by `E_i - E_j`: the exact
/// line strengths a tracked peak's second spectrum should show.
pub fn line_strengths(eig: &Eigensystem, psi0: &QuantumState, peak: &NmrPeakId) -> Result<Vec<(f64, Complex64)>> {
    let evolver = SpectralEvolver::new(eig, psi0)?;
    let a = evolver.coefficients();
    let (alpha, beta) = (peak.alpha.index(), peak.beta.index());
    let mut lines: Vec<(f64, Complex64)> = Vec::new();
    for (i, j) in candidate_pairs(eig, peak) {
        let c = a[i] * eig.vectors[(alpha, i)] * a[j].conj() * eig.vectors[(beta, j)];
        if c.norm() == 0.0 {
            continue;
        }
        let f = eig.values[i] - eig.values[j];
        match lines.iter_mut().find(|(g, _)| (g - f).abs() <= 1e-9) {
            Some(line) => line.1 += c,
            None => lines.push((f, c)),
        }
    }
    lines.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{basis_ket, proposal_initial_state};
    use approx::assert_abs_diff_eq;

    fn synthetic(delta: f64, count: usize, f: impl Fn(f64) -> Complex64) -> SweepRecord {
        let tau: Vec<f64> = (0..count).map(|k| k as f64 * delta).collect();
        SweepRecord {
            amplitudes: vec![tau.iter().map(|t| f(*t)).collect()],
            tau,
            tracked_peaks: vec![],
        }
    }

    #[test]
    fn synthetic_oscillator() {
        let rec = synthetic(0.1, 64, |t| Complex64::cis(-t));
        let s = second_ft(&rec, 0, SecondFtOptions::default()).unwrap();
        assert_abs_diff_eq!(s.resolution, 2.0 * PI / 6.4, epsilon = 1e-12);
        let (k, _) = s
            .magnitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((s.frequencies[k] - 1.0).abs() <= s.resolution);
        assert!(s.frequencies[k] > 0.0);
    }

    #[test]
    fn constant_series_is_zero_frequency() {
        let rec = synthetic(0.2, 32, |_| Complex64::new(0.7, 0.1));
        let s = second_ft(&rec, 0, SecondFtOptions::default()).unwrap();
        let d = extract_differences(&s, 0.5).unwrap();
        assert_eq!(d, vec![0.0]);
        let nonzero = s.magnitudes.iter().filter(|m| **m > 1e-12).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn symmetric_tones() {
        let (delta, count) = (0.25, 64);
        let omega = 5.0 * 2.0 * PI / (count as f64 * delta);
        let rec = synthetic(delta, count, |t| Complex64::cis(omega * t) + Complex64::cis(-omega * t));
        let s = second_ft(&rec, 0, SecondFtOptions::default()).unwrap();
        let d = extract_differences(&s, 0.5).unwrap();
        assert_eq!(d.len(), 2);
        assert_abs_diff_eq!(d[0], -omega, epsilon = 1e-9);
        assert_abs_diff_eq!(d[1], omega, epsilon = 1e-9);
        let mag = |w: f64| s.magnitudes[s.frequencies.iter().position(|f| (f - w).abs() < 1e-9).unwrap()];
        assert_abs_diff_eq!(mag(omega), mag(-omega), epsilon = 1e-8);
    }

    #[test]
    fn on_bin_refinement_is_exact() {
        let (delta, count) = (0.1, 128);
        let omega = 9.0 * 2.0 * PI / (count as f64 * delta);
        let rec = synthetic(delta, count, |t| Complex64::cis(-omega * t) * 0.3);
        let s = second_ft(&rec, 0, SecondFtOptions::default()).unwrap();
        let d = extract_differences(&s, 0.5).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0] - omega).abs() < 1e-6);
    }

    #[test]
    fn off_bin_refinement_with_hann() {
        let (delta, count) = (0.1, 128);
        let omega = 9.37 * 2.0 * PI / (count as f64 * delta);
        let rec = synthetic(delta, count, |t| Complex64::cis(-omega * t));
        let opts = SecondFtOptions {
            window: Window::Hann,
            zero_pad: 4,
        };
        let s = second_ft(&rec, 0, opts).unwrap();
        let d = extract_differences(&s, 0.1).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0] - omega).abs() < 0.05 * s.resolution, "{} vs {omega}", d[0]);
    }

    #[test]
    fn zero_signal_has_no_peaks() {
        let rec = synthetic(0.1, 16, |_| Complex64::new(0.0, 0.0));
        let s = second_ft(&rec, 0, SecondFtOptions::default()).unwrap();
        assert!(extract_differences(&s, 0.5).unwrap().is_empty());
        assert!(extract_differences(&s, 1.5).is_err());
        let empty = PairingSpectrum {
            magnitudes: vec![],
            frequencies: vec![],
            amplitudes: vec![],
            ..s
        };
        assert!(matches!(extract_differences(&empty, 0.5), Err(Error::EmptySpectrum)));
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let mut rec = synthetic(0.1, 16, |_| Complex64::new(1.0, 0.0));
        rec.tau[5] += 0.01;
        assert!(matches!(
            second_ft(&rec, 0, SecondFtOptions::default()),
            Err(Error::NonUniformGrid)
        ));
    }

    fn default_nmr(n: usize) -> NmrModel {
        NmrModel::uniform((0..n).map(|k| 100.0 + 50.0 * k as f64).collect(), 2.0 / PI).unwrap()
    }

    #[test]
    fn single_point_sweep_equals_coherence() {
        let model = PairingModel::new(vec![0.8, 1.0, 1.2], 0.3).unwrap();
        let nmr = default_nmr(3);
        let psi = proposal_initial_state(3).unwrap();
        let peaks = auto_peaks(&nmr, &psi).unwrap();
        assert_eq!(peaks.len(), 3);
        let rec = run_tau_sweep(&model, &nmr, &psi, TauGrid::new(1.0, 1).unwrap(), &peaks, None, SweepOptions::default()).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        for (p, series) in peaks.iter().zip(&rec.amplitudes) {
            let c = readout::coherence_amplitude(&rho, &nmr, p).unwrap();
            assert!((series[0] - c).norm() <= 1e-14);
        }
    }

    #[test]
    fn eigenvector_sweep_has_constant_modulus() {
        let model = PairingModel::new(vec![0.8, 1.0, 1.2], 0.3).unwrap();
        let nmr = default_nmr(3);
        let eig = exact_spectrum(&build_pairing_hamiltonian(&model).unwrap()).unwrap();
        let grid = TauGrid::new(0.3, 20).unwrap();
        let column = |k: usize| -> Vec<Complex64> { (0..8).map(|r| Complex64::new(eig.vectors[(r, k)], 0.0)).collect() };
        let bottom = SpinBasisLabel::new(8, 3).unwrap();
        let peaks: Vec<NmrPeakId> = [7, 6, 4]
            .iter()
            .map(|&b| NmrPeakId::new(bottom, SpinBasisLabel::new(b, 3).unwrap(), &nmr).unwrap())
            .collect();

        // an eigenvector alone: constant (here vanishing) coherence
        let k = eig.indices_in(1)[0];
        let psi = QuantumState::from_amplitudes(column(k)).unwrap();
        let rec = run_tau_sweep(&model, &nmr, &psi, grid, &peaks, Some(&eig), SweepOptions::default()).unwrap();
        for series in &rec.amplitudes {
            assert!(series.iter().all(|a| (a.norm() - series[0].norm()).abs() <= 1e-12));
        }

        // eigenvector plus the all-down ket: one frequency, fixed modulus
        let mut v = column(k);
        v[7] += Complex64::new(1.0, 0.0);
        let psi = QuantumState::from_amplitudes(v).unwrap();
        let rec = run_tau_sweep(&model, &nmr, &psi, grid, &peaks, Some(&eig), SweepOptions::default()).unwrap();
        let omega = model.all_down_energy() - eig.values[k];
        for series in &rec.amplitudes {
            assert!(series[0].norm() > 1e-3);
            for (t, a) in rec.tau.iter().zip(series) {
                let expected = series[0] * Complex64::cis(-omega * t);
                assert!((a - expected).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn anchoring_two_spins() {
        let model = PairingModel::new(vec![1.0, 1.0], 0.5).unwrap();
        let nmr = default_nmr(2);
        let eig = exact_spectrum(&build_pairing_hamiltonian(&model).unwrap()).unwrap();
        let peak = NmrPeakId::new(SpinBasisLabel::new(4, 2).unwrap(), SpinBasisLabel::new(2, 2).unwrap(), &nmr).unwrap();
        let empty = assign_and_anchor(&[], &model, &peak, None, false).unwrap();
        assert_eq!(empty.reference, -1.0);
        assert!(empty.absolute_levels.is_empty());
        let v = Validation {
            eigensystem: &eig,
            resolution: 0.05,
        };
        let report = assign_and_anchor(&[-1.5, -0.5], &model, &peak, Some(v), true).unwrap();
        assert_eq!(report.absolute_levels, vec![0.5, -0.5]);
        let a = report.assignments.unwrap();
        assert!(a.iter().all(|x| x.residual.abs() < 1e-12 && !x.ambiguous));
        assert_eq!(a[0].subspaces, (Some(0), Some(1)));
    }

    #[test]
    fn ambiguity_is_flagged() {
        let model = PairingModel::new(vec![1.0, 1.01], 0.001).unwrap();
        let nmr = default_nmr(2);
        let eig = exact_spectrum(&build_pairing_hamiltonian(&model).unwrap()).unwrap();
        let peak = NmrPeakId::new(SpinBasisLabel::new(4, 2).unwrap(), SpinBasisLabel::new(2, 2).unwrap(), &nmr).unwrap();
        let v = Validation {
            eigensystem: &eig,
            resolution: 0.1,
        };
        let lenient = assign_and_anchor(&[-1.0], &model, &peak, Some(v), false).unwrap();
        assert!(lenient.assignments.unwrap()[0].ambiguous);
        assert!(matches!(
            assign_and_anchor(&[-1.0], &model, &peak, Some(v), true),
            Err(Error::AmbiguousAssignment { .. })
        ));
    }

    #[test]
    fn nyquist_guard() {
        let model = PairingModel::new(vec![0.8, 1.0, 1.2], 0.3).unwrap();
        let eig = exact_spectrum(&build_pairing_hamiltonian(&model).unwrap()).unwrap();
        let exact = NyquistBound::from_spectrum(&eig);
        assert_abs_diff_eq!(exact.max_frequency, 3.0, epsilon = 1e-12);
        let blind = NyquistBound::from_model(&model);
        assert!(blind.max_frequency >= exact.max_frequency);
        assert!(exact.check(0.5).is_ok());
        assert!(exact.check(1.1).unwrap_err().is_aliasing());
    }

    #[test]
    fn auto_peaks_follow_support() {
        let nmr = default_nmr(3);
        let top = basis_ket(SpinBasisLabel::new(1, 3).unwrap());
        assert!(auto_peaks(&nmr, &top).unwrap().is_empty());
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        amps[0] = Complex64::new(1.0, 0.0);
        amps[1] = Complex64::new(1.0, 0.0);
        let psi = QuantumState::from_amplitudes(amps).unwrap();
        let peaks = auto_peaks(&nmr, &psi).unwrap();
        assert_eq!(peaks.len(), 3);
        assert!(peaks.iter().all(|p| p.beta.label() == 1));
    }
}
