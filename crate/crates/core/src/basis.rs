//! Product-state labels, excitation-number subspaces and the raising-operator
//! selection rule.
//!
//! A register of `N` spins has `2^N` product states labelled `1..=2^N`. The
//! binary digits of `label - 1`, read most-significant first, give the spins
//! `1..=N`: a `0` digit is spin-up `|0>`, a `1` digit is spin-down `|1>`. Label
//! `1` is all-up and label `2^N` is all-down. With this convention the state
//! with spins `i_1..i_n` up carries the label `2^N - sum_a 2^(N - i_a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register handled by the label arithmetic.
pub const MAX_SPINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    /// Eigenvalue of `sigma_z`: `+1` for up, `-1` for down.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

/// One-based label of a product spin state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpinBasisLabel {
    label: usize,
    n_spins: usize,
}

fn check_spins(n_spins: usize) -> Result<()> {
    if n_spins == 0 {
        return Err(Error::InvalidSpinCount {
            n_spins,
            reason: "need at least one spin",
        });
    }
    if n_spins > MAX_SPINS {
        return Err(Error::InvalidSpinCount {
            n_spins,
            reason: "register too large",
        });
    }
    Ok(())
}

/// `2^N`, the Hilbert-space dimension.
pub fn dimension(n_spins: usize) -> usize {
    1usize << n_spins
}

impl SpinBasisLabel {
    pub fn new(label: usize, n_spins: usize) -> Result<Self> {
        check_spins(n_spins)?;
        if label == 0 || label > dimension(n_spins) {
            return Err(Error::LabelOutOfRange { label, n_spins });
        }
        Ok(Self { label, n_spins })
    }

    /// Label from a zero-based vector index.
    pub fn from_index(index: usize, n_spins: usize) -> Result<Self> {
        Self::new(index + 1, n_spins)
    }

    pub fn all_up(n_spins: usize) -> Result<Self> {
        Self::new(1, n_spins)
    }

    pub fn all_down(n_spins: usize) -> Result<Self> {
        Self::new(dimension(n_spins), n_spins)
    }

    /// The state with exactly the listed (one-based) positions up.
    pub fn with_up_spins(positions: &[usize], n_spins: usize) -> Result<Self> {
        check_spins(n_spins)?;
        let mut label = dimension(n_spins);
        let mut seen = 0usize;
        for &p in positions {
            if p == 0 || p > n_spins {
                return Err(Error::PositionOutOfRange {
                    position: p,
                    n_spins,
                });
            }
            let bit = 1usize << (n_spins - p);
            if seen & bit != 0 {
                return Err(Error::CoincidentPositions(p));
            }
            seen |= bit;
            label -= bit;
        }
        Self::new(label, n_spins)
    }

    pub fn label(self) -> usize {
        self.label
    }

    pub fn n_spins(self) -> usize {
        self.n_spins
    }

    /// Zero-based index into a state vector.
    pub fn index(self) -> usize {
        self.label - 1
    }

    fn position_bit(self, position: usize) -> usize {
        1usize << (self.n_spins - position)
    }

    pub fn spin(self, position: usize) -> Spin {
        if self.index() & self.position_bit(position) == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    /// Number of up spins, i.e. the `n` of the subspace `S_n` the label lives in.
    pub fn excitation(self) -> usize {
        self.n_spins - self.index().count_ones() as usize
    }

    /// One-based positions of the up spins, ascending.
    pub fn up_positions(self) -> Vec<usize> {
        (1..=self.n_spins)
            .filter(|&p| self.spin(p) == Spin::Up)
            .collect()
    }
}

/// Decode a label into its spin configuration, spin 1 first.
pub fn label_to_config(label: SpinBasisLabel) -> Vec<Spin> {
    (1..=label.n_spins).map(|p| label.spin(p)).collect()
}

pub fn config_to_label(config: &[Spin]) -> Result<SpinBasisLabel> {
    let n_spins = config.len();
    check_spins(n_spins)?;
    let index = config
        .iter()
        .fold(0usize, |acc, s| (acc << 1) | usize::from(*s == Spin::Down));
    SpinBasisLabel::from_index(index, n_spins)
}

/// Members of one excitation-number subspace, ascending by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceIndex {
    pub n_spins: usize,
    pub n: usize,
    pub members: Vec<SpinBasisLabel>,
}

impl SubspaceIndex {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Position of `label` inside the block, if it belongs here.
    pub fn position_of(&self, label: SpinBasisLabel) -> Option<usize> {
        self.members.binary_search(&label).ok()
    }
}

pub fn enumerate_subspace(n_spins: usize, n: usize) -> Result<SubspaceIndex> {
    check_spins(n_spins)?;
    if n > n_spins {
        return Err(Error::SubspaceOutOfRange { n, n_spins });
    }
    let down = (n_spins - n) as u32;
    let members = (0..dimension(n_spins))
        .filter(|i| i.count_ones() == down)
        .map(|i| SpinBasisLabel {
            label: i + 1,
            n_spins,
        })
        .collect();
    Ok(SubspaceIndex {
        n_spins,
        n,
        members,
    })
}

/// All subspaces `S_0..=S_N`.
pub fn all_subspaces(n_spins: usize) -> Result<Vec<SubspaceIndex>> {
    (0..=n_spins).map(|n| enumerate_subspace(n_spins, n)).collect()
}

/// Labels produced by `sum_k sigma_k^-` acting on `label`: each up spin `k`
/// flipped down, which adds `2^(N-k)` to the label. Ordered by `k`.
pub fn lowering_image(label: SpinBasisLabel) -> Vec<SpinBasisLabel> {
    label
        .up_positions()
        .into_iter()
        .map(|k| SpinBasisLabel {
            label: label.label + label.position_bit(k),
            n_spins: label.n_spins,
        })
        .collect()
}

/// `Tr(|i><j| sum_k sigma_k^+) = <j| sum_k sigma_k^+ |i>`.
///
/// Evaluated with the three Kronecker-delta families: `j = 1` with `i` one
/// flip below, `i = 2^N` with `j` in `S_1`, and the generic `S_n`, `n` in
/// `2..=N-1`, family `i = j + 2^(N-k)` for an up position `k` of `j`. For
/// `N = 1` the first two families describe the same pair, so the single
/// transition is counted once.
pub fn transition_weight(i: SpinBasisLabel, j: SpinBasisLabel) -> Result<u32> {
    if i.n_spins != j.n_spins {
        return Err(Error::SpinCountMismatch {
            left: i.n_spins,
            right: j.n_spins,
        });
    }
    let n_spins = i.n_spins;
    let top = dimension(n_spins);
    if n_spins == 1 {
        return Ok(u32::from(i.label == 2 && j.label == 1));
    }

    let mut weight = 0u32;
    for k in 1..=n_spins {
        let flip = 1usize << (n_spins - k);
        // j = |1>, i = |2^(N-k) + 1>
        if j.label == 1 && i.label == flip + 1 {
            weight += 1;
        }
        // i = |2^N>, j = |2^N - 2^(N-k)>
        if i.label == top && j.label == top - flip {
            weight += 1;
        }
    }
    let n = j.excitation();
    if (2..n_spins).contains(&n) {
        weight += j
            .up_positions()
            .into_iter()
            .filter(|&k| i.label == j.label + j.position_bit(k))
            .count() as u32;
    }
    assert!(weight <= 1, "selection rule produced multiplicity {weight}");
    Ok(weight)
}

/// All `(i, j)` pairs with unit transition weight, i.e. the nonzero entries of
/// `sum_k sigma_k^+` written as `<j|.|i>`. Ordered by `i`, then by flipped spin.
pub fn raising_transitions(n_spins: usize) -> Result<Vec<(SpinBasisLabel, SpinBasisLabel)>> {
    check_spins(n_spins)?;
    let mut pairs = Vec::with_capacity(n_spins * dimension(n_spins) / 2);
    for index in 0..dimension(n_spins) {
        let i = SpinBasisLabel::from_index(index, n_spins)?;
        for k in 1..=n_spins {
            if i.spin(k) == Spin::Down {
                let j = SpinBasisLabel {
                    label: i.label - i.position_bit(k),
                    n_spins,
                };
                pairs.push((i, j));
            }
        }
    }
    Ok(pairs)
}
