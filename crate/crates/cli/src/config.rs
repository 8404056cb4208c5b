//! Experiment configuration: JSON schema, defaults and validation.
//!
//! The resolved config serializes back to the same schema with every default
//! filled in, so a report's config echo can be fed straight back in.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use pairsim::basis::SpinBasisLabel;
use pairsim::dynamics::EvolutionMode;
use pairsim::fft::Window;
use pairsim::model::{self, NmrModel, PairingModel, MAX_DENSE_SPINS};
use pairsim::readout::{self, AcquisitionGrid, FirstFtOptions, NmrPeakId};
use pairsim::spectroscopy::{AmplitudePath, NyquistBound, SecondFtOptions, TauGrid};
use pairsim::states::{QuantumState, StateSpec};
use pairsim::lines::LineFitOptions;
use pairsim::{Error, Result};

/// Sample count of the fallback acquisition grid.
pub const FALLBACK_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n_spins: usize,
    pub epsilon: Vec<f64>,
    #[serde(rename = "V")]
    pub coupling: f64,
    #[serde(default)]
    pub nmr: NmrConfig,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub readout: ReadoutConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmrConfig {
    /// Larmor frequencies; default `100 + 50 (k - 1)`.
    pub larmor: Option<Vec<f64>>,
    /// Uniform scalar or full symmetric matrix; default `2 / pi`.
    pub j: Option<JCoupling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JCoupling {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(StateSpec),
    Explicit(ExplicitState),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Named(StateSpec::Proposal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitState {
    /// `[re, im]` per basis label, normalized on load.
    pub amplitudes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NyquistMode {
    /// Spread of the exact spectrum.
    #[default]
    Exact,
    /// Parameter bound, no diagonalization.
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrackedPeaks {
    Auto(AutoTag),
    Explicit(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Default for TrackedPeaks {
    fn default() -> Self {
        TrackedPeaks::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Default: half the Nyquist bound.
    #[serde(default)]
    pub delta_tau: Option<f64>,
    #[serde(default = "default_n_tau")]
    pub n_tau: usize,
    #[serde(default)]
    pub tracked_peaks: TrackedPeaks,
    #[serde(default)]
    pub nyquist: NyquistMode,
}

fn default_n_tau() -> usize {
    256
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            delta_tau: None,
            n_tau: default_n_tau(),
            tracked_peaks: TrackedPeaks::default(),
            nyquist: NyquistMode::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    #[default]
    Oracle,
    Fid,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    #[serde(default)]
    pub mode: ReadoutMode,
    /// Acquisition dwell time; default from a commensurate grid.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub n_samples: Option<usize>,
    /// First-transform window; default none on a commensurate grid, Hann otherwise.
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default)]
    pub zero_pad: Option<usize>,
    /// Half-width of the peak integration window in bins.
    #[serde(default)]
    pub window_bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_threshold")]
    pub threshold_fraction: f64,
    #[serde(default)]
    pub strict_assignment: bool,
    /// Second-transform window, used for the written spectra.
    #[serde(default)]
    pub window: Window,
    #[serde(default = "default_zero_pad")]
    pub zero_pad: usize,
    /// Match recovered frequencies against exact diagonalization.
    #[serde(default = "default_true")]
    pub validate: bool,
}

fn default_threshold() -> f64 {
    0.02
}

fn default_zero_pad() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            threshold_fraction: default_threshold(),
            strict_assignment: false,
            window: Window::None,
            zero_pad: default_zero_pad(),
            validate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default)]
    pub mode: EvolutionMode,
    #[serde(default = "default_trotter_steps")]
    pub trotter_steps: usize,
}

fn default_trotter_steps() -> usize {
    64
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            mode: EvolutionMode::Exact,
            trotter_steps: default_trotter_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    /// Default: mean of epsilon.
    #[serde(default)]
    pub fermi_level: Option<f64>,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parse without resolving defaults; schema errors carry the field path.
pub fn from_json_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner().to_string())
    })
}

/// Read, validate and fill defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    from_json_str(&std::fs::read_to_string(path)?)?.resolve()
}

impl ExperimentConfig {
    /// Minimal config with every optional section at its default.
    pub fn minimal(epsilon: Vec<f64>, coupling: f64) -> Self {
        Self {
            n_spins: epsilon.len(),
            epsilon,
            coupling,
            nmr: NmrConfig::default(),
            initial_state: InitialState::default(),
            sweep: SweepConfig::default(),
            readout: ReadoutConfig::default(),
            analysis: AnalysisConfig::default(),
            evolution: EvolutionConfig::default(),
            gap: GapConfig::default(),
            seed: 0,
        }
    }

    /// Validate and fill every derived default. Idempotent.
    pub fn resolve(mut self) -> Result<Self> {
        let n = self.n_spins;
        if n == 0 || n > MAX_DENSE_SPINS {
            return Err(config_error("N", format!("must lie in [1, {MAX_DENSE_SPINS}], got {n}")));
        }
        if self.epsilon.len() != n {
            return Err(config_error(
                "epsilon",
                format!("expected {n} level energies, got {}", self.epsilon.len()),
            ));
        }
        if let Some(k) = self.epsilon.iter().position(|e| !e.is_finite()) {
            return Err(config_error(&format!("epsilon[{k}]"), "must be finite"));
        }
        if !self.coupling.is_finite() {
            return Err(config_error("V", "must be finite"));
        }

        let larmor = self
            .nmr
            .larmor
            .get_or_insert_with(|| (0..n).map(|k| 100.0 + 50.0 * k as f64).collect());
        if larmor.len() != n {
            return Err(config_error(
                "nmr.larmor",
                format!("expected {n} Larmor frequencies, got {}", larmor.len()),
            ));
        }
        self.nmr.j.get_or_insert(JCoupling::Uniform(2.0 / PI));
        let nmr = self.nmr_model()?;

        // initial state, checked by building it
        self.initial_state()?;

        let sweep = &mut self.sweep;
        if sweep.n_tau == 0 {
            return Err(config_error("sweep.n_tau", "must be positive"));
        }
        if let TrackedPeaks::Explicit(list) = &sweep.tracked_peaks {
            if list.is_empty() {
                return Err(config_error("sweep.tracked_peaks", "list is empty"));
            }
            for (k, &[a, b]) in list.iter().enumerate() {
                peak_id(a, b, &nmr).map_err(|e| config_error(&format!("sweep.tracked_peaks[{k}]"), e.to_string()))?;
            }
        }
        let bound = self.nyquist_bound()?;
        let delta = *self.sweep.delta_tau.get_or_insert(0.5 * bound.max_delta_tau);
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(config_error("sweep.delta_tau", format!("must be positive and finite, got {delta}")));
        }
        bound.check(delta)?;

        let threshold = self.analysis.threshold_fraction;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(config_error("analysis.threshold_fraction", format!("must lie in (0, 1), got {threshold}")));
        }
        if self.analysis.zero_pad == 0 {
            return Err(config_error("analysis.zero_pad", "must be at least 1"));
        }
        if self.evolution.trotter_steps == 0 {
            return Err(config_error("evolution.trotter_steps", "must be positive"));
        }
        self.resolve_readout(&nmr)?;

        let mean = self.epsilon.iter().sum::<f64>() / n as f64;
        let fermi = *self.gap.fermi_level.get_or_insert(mean);
        if !fermi.is_finite() {
            return Err(config_error("gap.fermi_level", "must be finite"));
        }
        Ok(self)
    }

    fn resolve_readout(&mut self, nmr: &NmrModel) -> Result<()> {
        let r = &mut self.readout;
        let commensurate = readout::commensurate_grid(nmr);
        let grid = match (r.dt, r.n_samples, commensurate) {
            (None, None, Some(g)) => g,
            (None, n_samples, _) => readout::oversampled_grid(nmr, n_samples.unwrap_or(FALLBACK_SAMPLES)),
            (Some(dt), n_samples, _) => AcquisitionGrid {
                dt,
                n_samples: n_samples.unwrap_or(FALLBACK_SAMPLES),
            },
        };
        let on_bins = commensurate.is_some_and(|g| g == grid);
        if !(grid.dt > 0.0 && grid.dt.is_finite()) {
            return Err(config_error("readout.dt", format!("must be positive and finite, got {}", grid.dt)));
        }
        if grid.n_samples < 4 {
            return Err(config_error("readout.n_samples", "must be at least 4"));
        }
        r.dt = Some(grid.dt);
        r.n_samples = Some(grid.n_samples);
        r.window.get_or_insert(if on_bins { Window::None } else { Window::Hann });
        let pad = *r.zero_pad.get_or_insert(1);
        if pad == 0 {
            return Err(config_error("readout.zero_pad", "must be at least 1"));
        }
        r.window_bins.get_or_insert(if on_bins { 0 } else { 2 * pad });
        Ok(())
    }

    pub fn pairing_model(&self) -> Result<PairingModel> {
        PairingModel::new(self.epsilon.clone(), self.coupling)
    }

    pub fn nmr_model(&self) -> Result<NmrModel> {
        let n = self.n_spins;
        let larmor = self
            .nmr
            .larmor
            .clone()
            .unwrap_or_else(|| (0..n).map(|k| 100.0 + 50.0 * k as f64).collect());
        let built = match self.nmr.j.clone().unwrap_or(JCoupling::Uniform(2.0 / PI)) {
            JCoupling::Uniform(j) => NmrModel::uniform(larmor, j),
            JCoupling::Matrix(m) => NmrModel::with_matrix(larmor, m),
        };
        built.map_err(|e| config_error("nmr", e.to_string()))
    }

    pub fn initial_state(&self) -> Result<QuantumState> {
        let built = match &self.initial_state {
            InitialState::Named(spec) => spec.build(self.n_spins),
            InitialState::Explicit(e) => {
                let amps = e.amplitudes.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                QuantumState::from_amplitudes(amps).and_then(|s| {
                    if s.n_spins() == self.n_spins {
                        Ok(s)
                    } else {
                        Err(Error::DimensionMismatch {
                            expected: 1 << self.n_spins,
                            found: s.dim(),
                        })
                    }
                })
            }
        };
        built.map_err(|e| config_error("initial_state", e.to_string()))
    }

    pub fn nyquist_bound(&self) -> Result<NyquistBound> {
        let model = self.pairing_model()?;
        Ok(match self.sweep.nyquist {
            NyquistMode::Exact => {
                let eig = model::exact_spectrum(&model::build_pairing_hamiltonian(&model)?)?;
                NyquistBound::from_spectrum(&eig)
            }
            NyquistMode::Bound => NyquistBound::from_model(&model),
        })
    }

    /// The tau grid. Only meaningful after [`resolve`](Self::resolve).
    pub fn tau_grid(&self) -> Result<TauGrid> {
        let delta = self
            .sweep
            .delta_tau
            .ok_or_else(|| config_error("sweep.delta_tau", "config is not resolved"))?;
        TauGrid::new(delta, self.sweep.n_tau)
    }

    /// Explicit tracked peaks, or `None` for automatic selection.
    pub fn explicit_peaks(&self, nmr: &NmrModel) -> Result<Option<Vec<NmrPeakId>>> {
        match &self.sweep.tracked_peaks {
            TrackedPeaks::Auto(_) => Ok(None),
            TrackedPeaks::Explicit(list) => list.iter().map(|&[a, b]| peak_id(a, b, nmr)).collect::<Result<_>>().map(Some),
        }
    }

    pub fn amplitude_path(&self) -> AmplitudePath {
        let r = &self.readout;
        match r.mode {
            ReadoutMode::Oracle => AmplitudePath::Oracle,
            ReadoutMode::Fid => AmplitudePath::Fid {
                grid: AcquisitionGrid {
                    dt: r.dt.unwrap_or(1.0),
                    n_samples: r.n_samples.unwrap_or(FALLBACK_SAMPLES),
                },
                options: FirstFtOptions {
                    window: r.window.unwrap_or_default(),
                    zero_pad: r.zero_pad.unwrap_or(1),
                },
                window_bins: r.window_bins.unwrap_or(0),
            },
        }
    }

    pub fn second_ft_options(&self) -> SecondFtOptions {
        SecondFtOptions {
            window: self.analysis.window,
            zero_pad: self.analysis.zero_pad,
        }
    }

    pub fn line_fit_options(&self) -> LineFitOptions {
        LineFitOptions {
            threshold_fraction: self.analysis.threshold_fraction,
            ..LineFitOptions::default()
        }
    }
}

fn peak_id(alpha: usize, beta: usize, nmr: &NmrModel) -> Result<NmrPeakId> {
    let n = nmr.n_spins();
    NmrPeakId::new(SpinBasisLabel::new(alpha, n)?, SpinBasisLabel::new(beta, n)?, nmr)
}

/// Command-line overrides applied before resolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub evolution: Option<EvolutionMode>,
    pub trotter_steps: Option<usize>,
    pub readout: Option<ReadoutMode>,
    pub strict: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(mode) = self.evolution {
            config.evolution.mode = mode;
        }
        if let Some(steps) = self.trotter_steps {
            config.evolution.trotter_steps = steps;
        }
        if let Some(mode) = self.readout {
            config.readout.mode = mode;
        }
        if self.strict {
            config.analysis.strict_assignment = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        from_json_str(text)?.resolve()
    }

    #[test]
    fn minimal_fills_defaults() {
        let c = parse(r#"{"N": 2, "epsilon": [1, 1], "V": 0.5}"#).unwrap();
        assert_eq!(c.initial_state, InitialState::Named(StateSpec::Proposal));
        assert_eq!(c.sweep.tracked_peaks, TrackedPeaks::default());
        assert_eq!(c.readout.mode, ReadoutMode::Oracle);
        assert_eq!(c.sweep.n_tau, 256);
        assert_eq!(c.nmr.larmor.as_deref(), Some(&[100.0, 150.0][..]));
        assert_eq!(c.gap.fermi_level, Some(1.0));
        // spectrum spread 2: {-1, 1 - 0.5, 1 + 0.5, ... } -> bound from exact diagonalization
        let bound = c.nyquist_bound().unwrap();
        assert_eq!(c.sweep.delta_tau, Some(0.5 * bound.max_delta_tau));
        assert_eq!(c.clone().resolve().unwrap(), c);
    }

    #[test]
    fn echo_round_trips() {
        let c = parse(r#"{"N": 3, "epsilon": [0.8, 1.0, 1.2], "V": 0.3, "initial_state": "u:1,2"}"#).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn epsilon_length_is_checked() {
        let err = parse(r#"{"N": 3, "epsilon": [1, 1], "V": 0.5}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "epsilon"), "{err}");
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse(r#"{"N": 2, "epsilon": [1, 1], "V": 0.5, "sweep": {"n_taus": 3}}"#).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "sweep.n_taus");
                assert!(message.contains("n_taus"));
            }
            other => panic!("{other}"),
        }
        let err = parse(r#"{"N": 2, "epsilon": [1, "x"], "V": 0.5}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "epsilon[1]"), "{err}");
    }

    #[test]
    fn nyquist_rejection_names_bound() {
        let err = parse(r#"{"N": 2, "epsilon": [1, 1], "V": 0.5, "sweep": {"delta_tau": 5.0}}"#).unwrap_err();
        assert!(err.is_aliasing());
        match err {
            Error::NyquistViolation { bound, .. } => assert!(bound < 5.0),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn explicit_state_and_peaks() {
        let c = parse(
            r#"{"N": 1, "epsilon": [1], "V": 0, "initial_state": {"amplitudes": [[1, 0], [1, 0]]},
                "sweep": {"tracked_peaks": [[2, 1]]}}"#,
        )
        .unwrap();
        let psi = c.initial_state().unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert_eq!(c.explicit_peaks(&c.nmr_model().unwrap()).unwrap().unwrap().len(), 1);
        let bad = parse(r#"{"N": 2, "epsilon": [1, 1], "V": 0.5, "sweep": {"tracked_peaks": [[1, 4]]}}"#).unwrap_err();
        assert!(matches!(bad, Error::Config { ref path, .. } if path == "sweep.tracked_peaks[0]"), "{bad}");
    }

    #[test]
    fn default_readout_grid_is_commensurate() {
        let c = parse(r#"{"N": 3, "epsilon": [0.8, 1.0, 1.2], "V": 0.3, "readout": {"mode": "fid"}}"#).unwrap();
        assert_eq!(c.readout.window, Some(Window::None));
        assert_eq!(c.readout.window_bins, Some(0));
        let custom = parse(r#"{"N": 2, "epsilon": [1, 1], "V": 0.5, "readout": {"mode": "fid", "dt": 0.001}}"#).unwrap();
        assert_eq!(custom.readout.window, Some(Window::Hann));
        assert_eq!(custom.readout.n_samples, Some(FALLBACK_SAMPLES));
    }

    #[test]
    fn overrides_win() {
        let mut c = from_json_str(r#"{"N": 2, "epsilon": [1, 1], "V": 0.5}"#).unwrap();
        Overrides {
            evolution: Some(EvolutionMode::Trotter),
            trotter_steps: Some(8),
            readout: Some(ReadoutMode::Fid),
            strict: true,
        }
        .apply(&mut c);
        let c = c.resolve().unwrap();
        assert_eq!(c.evolution.mode, EvolutionMode::Trotter);
        assert_eq!(c.evolution.trotter_steps, 8);
        assert!(c.analysis.strict_assignment);
        assert!(matches!(c.amplitude_path(), AmplitudePath::Fid { .. }));
    }
}
