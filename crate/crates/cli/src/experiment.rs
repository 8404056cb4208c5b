//! Orchestration of the four protocol steps and the artifacts they leave on
//! disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use pairsim::bcs::{self, GapRelationReport};
use pairsim::dynamics::DensityMatrix;
use pairsim::exec::{try_map_indexed, Execution};
use pairsim::fft::Spectrum;
use pairsim::lines::FittedLine;
use pairsim::model::{self, Eigensystem, NmrModel, PairingModel};
use pairsim::readout::{self, FirstFtOptions, NmrPeakId};
use pairsim::spectroscopy::{
    self, assign_and_anchor, Anchor, LevelReport, NyquistBound, PairingSpectrum, SweepOptions, SweepRecord,
    TauGrid, Validation,
};
use pairsim::states::QuantumState;
use pairsim::{Error, Result};

use crate::config::{ExperimentConfig, ReadoutMode};

/// Everything derived from a resolved config before the sweep starts.
pub struct Setup {
    pub model: PairingModel,
    pub nmr: NmrModel,
    pub psi0: QuantumState,
    pub eigensystem: Eigensystem,
    pub grid: TauGrid,
    pub peaks: Vec<NmrPeakId>,
    pub nyquist: NyquistBound,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let model = config.pairing_model()?;
        let nmr = config.nmr_model()?;
        let psi0 = config.initial_state()?;
        let eigensystem = model::exact_spectrum(&model::build_pairing_hamiltonian(&model)?)?;
        let grid = config.tau_grid()?;
        let peaks = match config.explicit_peaks(&nmr)? {
            Some(p) => p,
            None => spectroscopy::auto_peaks(&nmr, &psi0)?,
        };
        if peaks.is_empty() {
            return Err(Error::InvalidParameter(
                "no single-flip peak touching |1> or |2^N> carries signal for this initial state".into(),
            ));
        }
        let nyquist = config.nyquist_bound()?;
        Ok(Self {
            model,
            nmr,
            psi0,
            eigensystem,
            grid,
            peaks,
            nyquist,
        })
    }

    fn sweep_options(&self, config: &ExperimentConfig, exec: Execution) -> SweepOptions {
        SweepOptions {
            evolution: config.evolution.mode,
            trotter_steps: config.evolution.trotter_steps,
            path: config.amplitude_path(),
            exec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactLevel {
    pub energy: f64,
    pub subspace: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n_spins: usize,
    pub levels: Vec<ExactLevel>,
    pub nyquist: NyquistBound,
    /// Splitting of the two lowest single-excitation levels.
    pub subspace_one_gap: Option<f64>,
}

pub fn exact_levels(eig: &Eigensystem) -> Vec<ExactLevel> {
    eig.values
        .iter()
        .zip(&eig.subspace_tags)
        .map(|(&energy, &subspace)| ExactLevel { energy, subspace })
        .collect()
}

fn subspace_one_gap(eig: &Eigensystem) -> Option<f64> {
    let s1 = eig.values_in(1);
    (s1.len() >= 2).then(|| s1[1] - s1[0])
}

/// Step 1 on its own: build and diagonalize.
pub fn spectrum(config: &ExperimentConfig) -> Result<SpectrumReport> {
    let model = config.pairing_model()?;
    let eig = model::exact_spectrum(&model::build_pairing_hamiltonian(&model)?)?;
    Ok(SpectrumReport {
        n_spins: model.n_spins(),
        levels: exact_levels(&eig),
        nyquist: NyquistBound::from_spectrum(&eig),
        subspace_one_gap: subspace_one_gap(&eig),
    })
}

/// A sweep together with the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub config: ExperimentConfig,
    pub record: SweepRecord,
}

/// Steps 1-3: evolve and record the tracked peaks over the tau grid.
pub fn sweep(config: &ExperimentConfig, setup: &Setup, exec: Execution) -> Result<SweepFile> {
    let record = spectroscopy::run_tau_sweep(
        &setup.model,
        &setup.nmr,
        &setup.psi0,
        setup.grid,
        &setup.peaks,
        Some(&setup.eigensystem),
        setup.sweep_options(config, exec),
    )?;
    Ok(SweepFile {
        config: config.clone(),
        record,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub peak: NmrPeakId,
    /// Resolved lines of the amplitude series, strongest first.
    pub lines: Vec<FittedLine>,
    /// Their frequencies, ascending.
    pub recovered: Vec<f64>,
    /// Present for peaks anchored at `|1>` or `|2^N>`.
    pub levels: Option<LevelReport>,
}

/// Recovered levels of one excitation subspace, merged over peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceLevels {
    pub subspace: usize,
    pub levels: Vec<f64>,
    /// Splitting of the two lowest recovered levels.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSummary {
    pub delta: f64,
    pub count: usize,
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub nyquist: NyquistBound,
    pub tau: TauSummary,
    pub peaks: Vec<PeakReport>,
    pub recovered_levels: Vec<SubspaceLevels>,
    /// Exact levels, when validation is on.
    pub exact: Option<SpectrumReport>,
}

pub struct Analysis {
    pub report: Report,
    pub spectra: Vec<PairingSpectrum>,
}

/// Step 4: second transform, line resolution, anchoring and assignment.
pub fn analyze(config: &ExperimentConfig, setup: &Setup, record: &SweepRecord) -> Result<Analysis> {
    let delta = record.delta_tau()?;
    let grid = TauGrid::new(delta, record.tau.len())?;
    let validation = config.analysis.validate.then_some(Validation {
        eigensystem: &setup.eigensystem,
        resolution: grid.resolution(),
    });
    let mut spectra = Vec::new();
    let mut peaks = Vec::new();
    for (p, &peak) in record.tracked_peaks.iter().enumerate() {
        spectra.push(spectroscopy::second_ft(record, p, config.second_ft_options())?);
        let lines = spectroscopy::resolve_lines(record, p, config.line_fit_options())?;
        let mut recovered: Vec<f64> = lines.iter().map(|l| l.frequency).collect();
        recovered.sort_by(f64::total_cmp);
        let levels = match Anchor::for_peak(&peak) {
            Some(_) => Some(assign_and_anchor(
                &recovered,
                &setup.model,
                &peak,
                validation,
                config.analysis.strict_assignment,
            )?),
            None => None,
        };
        peaks.push(PeakReport {
            peak,
            lines,
            recovered,
            levels,
        });
    }
    let recovered_levels = merge_levels(&peaks, grid.resolution());
    let exact = config.analysis.validate.then(|| SpectrumReport {
        n_spins: setup.model.n_spins(),
        levels: exact_levels(&setup.eigensystem),
        nyquist: NyquistBound::from_spectrum(&setup.eigensystem),
        subspace_one_gap: subspace_one_gap(&setup.eigensystem),
    });
    Ok(Analysis {
        report: Report {
            config: config.clone(),
            nyquist: setup.nyquist,
            tau: TauSummary {
                delta,
                count: grid.count,
                resolution: grid.resolution(),
            },
            peaks,
            recovered_levels,
            exact,
        },
        spectra,
    })
}

/// Group anchored levels by the subspace of the non-anchor state and merge
/// values closer than half a bin.
fn merge_levels(peaks: &[PeakReport], resolution: f64) -> Vec<SubspaceLevels> {
    let mut by_subspace: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for report in peaks {
        let Some(levels) = &report.levels else { continue };
        let other = match levels.anchor {
            Anchor::AllDown => report.peak.beta,
            Anchor::AllUp => report.peak.alpha,
        };
        by_subspace
            .entry(other.excitation())
            .or_default()
            .extend(&levels.absolute_levels);
    }
    by_subspace
        .into_iter()
        .map(|(subspace, mut values)| {
            values.sort_by(f64::total_cmp);
            let mut groups: Vec<Vec<f64>> = Vec::new();
            for v in values {
                match groups.last_mut() {
                    Some(g) if v - g[g.len() - 1] <= 0.5 * resolution => g.push(v),
                    _ => groups.push(vec![v]),
                }
            }
            let levels: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
            SubspaceLevels {
                subspace,
                gap: (levels.len() >= 2).then(|| levels[1] - levels[0]),
                levels,
            }
        })
        .collect()
}

/// The quasiparticle/spectrum comparison for the config's model.
pub fn gap(config: &ExperimentConfig) -> Result<GapRelationReport> {
    let fermi = config
        .gap
        .fermi_level
        .unwrap_or_else(|| config.epsilon.iter().sum::<f64>() / config.n_spins as f64);
    bcs::gap_relation_check(&config.epsilon, config.coupling, fermi)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<SweepFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Columns `omega, magnitude, re, im`.
pub fn write_pairing_spectrum(path: &Path, spectrum: &PairingSpectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    w.write_record(["omega", "magnitude", "re", "im"]).map_err(std::io::Error::from)?;
    for ((omega, mag), z) in spectrum.frequencies.iter().zip(&spectrum.magnitudes).zip(&spectrum.amplitudes) {
        w.serialize((omega, mag, z.re, z.im)).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t_or_omega, re, im`.
pub fn write_complex_series(path: &Path, axis: impl IntoIterator<Item = f64>, values: &[Complex64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    w.write_record(["t_or_omega", "re", "im"]).map_err(std::io::Error::from)?;
    for (x, z) in axis.into_iter().zip(values) {
        w.serialize((x, z.re, z.im)).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn spectrum_file_name(peak: &NmrPeakId) -> String {
    format!("pairing_spectrum_{}_{}.csv", peak.alpha.label(), peak.beta.label())
}

/// Writes `report.json`, `pairing_spectrum.csv` (first tracked peak) and one
/// `pairing_spectrum_<alpha>_<beta>.csv` per tracked peak.
pub fn write_analysis(out: &Path, analysis: &Analysis) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &analysis.report)?;
    if let Some(first) = analysis.spectra.first() {
        write_pairing_spectrum(&out.join("pairing_spectrum.csv"), first)?;
    }
    for (spectrum, report) in analysis.spectra.iter().zip(&analysis.report.peaks) {
        write_pairing_spectrum(&out.join(spectrum_file_name(&report.peak)), spectrum)?;
    }
    Ok(())
}

/// Per-tau FID and first-transform dumps under `out/fid/`.
pub fn write_fid_dumps(out: &Path, config: &ExperimentConfig, setup: &Setup, exec: Execution) -> Result<()> {
    let dir = out.join("fid");
    fs::create_dir_all(&dir)?;
    let grid = readout::AcquisitionGrid {
        dt: config.readout.dt.unwrap_or(1.0),
        n_samples: config.readout.n_samples.unwrap_or(crate::config::FALLBACK_SAMPLES),
    };
    let options = FirstFtOptions {
        window: config.readout.window.unwrap_or_default(),
        zero_pad: config.readout.zero_pad.unwrap_or(1),
    };
    let states = spectroscopy::sweep_states(
        &setup.model,
        &setup.psi0,
        setup.grid,
        Some(&setup.eigensystem),
        config.evolution.mode,
        config.evolution.trotter_steps,
        exec,
    )?;
    let dumps = try_map_indexed(exec, states.len(), |k| -> Result<(readout::FidSignal, Spectrum)> {
        let fid = readout::fid_signal(&DensityMatrix::from_pure(&states[k]), &setup.nmr, grid.dt, grid.n_samples)?;
        let spectrum = readout::first_ft_with(&fid, options);
        Ok((fid, spectrum))
    })?;
    let width = states.len().saturating_sub(1).to_string().len();
    for (k, (fid, spectrum)) in dumps.iter().enumerate() {
        write_complex_series(&dir.join(format!("tau_{k:0width$}_fid.csv")), fid.times(), &fid.samples)?;
        write_complex_series(
            &dir.join(format!("tau_{k:0width$}_spectrum.csv")),
            spectrum.frequencies.iter().copied(),
            &spectrum.amplitudes,
        )?;
    }
    Ok(())
}

/// All four steps, with every artifact written to `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, exec: Execution) -> Result<Report> {
    let setup = Setup::new(config)?;
    let sweep = sweep(config, &setup, exec)?;
    if config.readout.mode == ReadoutMode::Fid {
        write_fid_dumps(out, config, &setup, exec)?;
    }
    let analysis = analyze(config, &setup, &sweep.record)?;
    write_analysis(out, &analysis)?;
    Ok(analysis.report)
}
