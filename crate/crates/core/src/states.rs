//! Working initial states: product kets, the anti-W state, the antisymmetric
//! pair states and the three-term superposition used to read the two lowest
//! single-excitation levels.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{dimension, SpinBasisLabel};
use crate::error::{Error, Result};
use crate::model::{apply_pairing_hamiltonian, PairingModel};

pub const NORM_TOL: f64 = 1e-12;

/// Normalized state vector, indexed by `label - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_spins: usize,
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    /// Normalizes the given amplitudes. Fails on a zero vector or a length
    /// that is not a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "state length {dim} is not 2^N with N >= 1"
            )));
        }
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter("state has zero norm".into()));
        }
        Ok(Self {
            n_spins: dim.trailing_zeros() as usize,
            amplitudes: v.unscale(norm),
        })
    }

    pub(crate) fn from_vector_unchecked(n_spins: usize, amplitudes: DVector<Complex64>) -> Self {
        Self {
            n_spins,
            amplitudes,
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: SpinBasisLabel) -> Complex64 {
        self.amplitudes[label.index()]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Excitation numbers carrying nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        let mut present = vec![false; self.n_spins + 1];
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm_sqr() > 0.0 {
                present[self.n_spins - i.count_ones() as usize] = true;
            }
        }
        (0..=self.n_spins).filter(|&n| present[n]).collect()
    }
}

fn ket_vector(n_spins: usize, entries: &[(usize, f64)]) -> DVector<Complex64> {
    let mut v = DVector::from_element(dimension(n_spins), Complex64::new(0.0, 0.0));
    for &(index, amp) in entries {
        v[index] += Complex64::new(amp, 0.0);
    }
    v
}

/// Label of the state with only spin `position` up.
fn single_up(position: usize, n_spins: usize) -> Result<SpinBasisLabel> {
    SpinBasisLabel::with_up_spins(&[position], n_spins)
}

pub fn basis_ket(label: SpinBasisLabel) -> QuantumState {
    QuantumState::from_vector_unchecked(label.n_spins(), ket_vector(label.n_spins(), &[(label.index(), 1.0)]))
}

fn require_pair_register(n_spins: usize) -> Result<()> {
    if n_spins < 2 {
        return Err(Error::InvalidSpinCount {
            n_spins,
            reason: "state needs at least two spins",
        });
    }
    Ok(())
}

/// `(1/sqrt N) sum_i |one up at i>`.
pub fn anti_w_state(n_spins: usize) -> Result<QuantumState> {
    require_pair_register(n_spins)?;
    let amp = (n_spins as f64).sqrt().recip();
    let entries = (1..=n_spins)
        .map(|i| Ok((single_up(i, n_spins)?.index(), amp)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantumState::from_vector_unchecked(n_spins, ket_vector(n_spins, &entries)))
}

/// `(|up at i> - |up at j>) / sqrt 2`.
pub fn u_state(i: usize, j: usize, n_spins: usize) -> Result<QuantumState> {
    require_pair_register(n_spins)?;
    if i == j {
        return Err(Error::CoincidentPositions(i));
    }
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let a = single_up(i, n_spins)?;
    let b = single_up(j, n_spins)?;
    Ok(QuantumState::from_vector_unchecked(
        n_spins,
        ket_vector(n_spins, &[(a.index(), amp), (b.index(), -amp)]),
    ))
}

/// `(|2^N> + |W> + |u_12>) / sqrt 3`.
pub fn proposal_initial_state(n_spins: usize) -> Result<QuantumState> {
    require_pair_register(n_spins)?;
    let w = anti_w_state(n_spins)?;
    let u = u_state(1, 2, n_spins)?;
    let bottom = basis_ket(SpinBasisLabel::all_down(n_spins)?);
    let sum = (bottom.amplitudes + w.amplitudes + u.amplitudes).unscale(3f64.sqrt());
    Ok(QuantumState::from_vector_unchecked(n_spins, sum))
}

fn residual(lhs: &[Complex64], rhs: &DVector<Complex64>) -> f64 {
    lhs.iter()
        .zip(rhs.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `|H_p |W> - RHS|` for the closed-form action
/// `H_p|W> = -[sum(eps)/2 + (N-1) V]|W> + (1/sqrt N) sum_m eps_m |up at m>`.
pub fn check_w_identity(model: &PairingModel) -> Result<f64> {
    let n = model.n_spins();
    let w = anti_w_state(n)?;
    let lhs = apply_pairing_hamiltonian(model, w.amplitudes.as_slice())?;
    let half_sum = -model.all_down_energy();
    let mut rhs = w.amplitudes.scale(-(half_sum + (n as f64 - 1.0) * model.coupling()));
    let inv = (n as f64).sqrt().recip();
    for (m, eps) in model.epsilon().iter().enumerate() {
        rhs[single_up(m + 1, n)?.index()] += Complex64::new(inv * eps, 0.0);
    }
    Ok(residual(&lhs, &rhs))
}

/// `|H_p |u_ij> - RHS|` for
/// `H_p|u_ij> = -[sum(eps)/2 - eps_j - V]|u_ij> - (eps_j - eps_i)/sqrt 2 |up at i>`.
pub fn check_u_identity(model: &PairingModel, i: usize, j: usize) -> Result<f64> {
    let n = model.n_spins();
    let u = u_state(i, j, n)?;
    let lhs = apply_pairing_hamiltonian(model, u.amplitudes.as_slice())?;
    let eps = model.epsilon();
    let half_sum = -model.all_down_energy();
    let mut rhs = u.amplitudes.scale(-(half_sum - eps[j - 1] - model.coupling()));
    rhs[single_up(i, n)?.index()] -=
        Complex64::new((eps[j - 1] - eps[i - 1]) * std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok(residual(&lhs, &rhs))
}

/// Named initial state, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StateSpec {
    Proposal,
    AntiW,
    U(usize, usize),
    Ket(usize),
}

impl StateSpec {
    pub fn build(&self, n_spins: usize) -> Result<QuantumState> {
        match *self {
            StateSpec::Proposal => proposal_initial_state(n_spins),
            StateSpec::AntiW => anti_w_state(n_spins),
            StateSpec::U(i, j) => u_state(i, j, n_spins),
            StateSpec::Ket(label) => Ok(basis_ket(SpinBasisLabel::new(label, n_spins)?)),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Proposal => write!(f, "proposal"),
            StateSpec::AntiW => write!(f, "anti_w"),
            StateSpec::U(i, j) => write!(f, "u:{i},{j}"),
            StateSpec::Ket(l) => write!(f, "ket:{l}"),
        }
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown initial state `{s}`"));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.trim() {
            "proposal" => Ok(StateSpec::Proposal),
            "anti_w" => Ok(StateSpec::AntiW),
            other => {
                if let Some(rest) = other.strip_prefix("u:") {
                    let (i, j) = rest.split_once(',').ok_or_else(bad)?;
                    Ok(StateSpec::U(parse(i)?, parse(j)?))
                } else if let Some(rest) = other.strip_prefix("ket:") {
                    Ok(StateSpec::Ket(parse(rest)?))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl TryFrom<String> for StateSpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<StateSpec> for String {
    fn from(value: StateSpec) -> Self {
        value.to_string()
    }
}
