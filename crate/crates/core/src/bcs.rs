//! BCS gap equation and its comparison with the exact single-excitation
//! spectrum of the pairing model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, PairingModel};

pub const GAP_LOWER: f64 = 1e-15;
pub const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProblem {
    /// Single-particle energies relative to the Fermi level.
    pub xi: Vec<f64>,
    pub coupling: f64,
}

impl GapProblem {
    pub fn new(xi: Vec<f64>, coupling: f64) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::InvalidParameter("gap problem needs at least one level".into()));
        }
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidParameter(format!("pairing strength {coupling} must be positive")));
        }
        Ok(Self { xi, coupling })
    }

    /// `1/2 V sum_m 1 / sqrt(xi_m^2 + gap^2)`.
    pub fn rhs(&self, gap: f64) -> f64 {
        0.5 * self.coupling * self.xi.iter().map(|x| (x * x + gap * gap).sqrt().recip()).sum::<f64>()
    }

    /// `|1 - rhs(gap)|`.
    pub fn residual(&self, gap: f64) -> f64 {
        (1.0 - self.rhs(gap)).abs()
    }
}

/// Positive root of `1 = 1/2 V sum 1/sqrt(xi^2 + gap^2)`.
///
/// The right-hand side falls strictly with the gap, so a root exists iff its
/// limit at zero, `1/2 V sum 1/|xi|`, exceeds one (any `xi = 0` makes it
/// infinite). At `1/2 V N + max|xi|` it is already below one.
pub fn solve_gap_equation(problem: &GapProblem) -> Result<f64> {
    if problem.xi.iter().all(|x| *x != 0.0) {
        let rhs_at_zero = 0.5 * problem.coupling * problem.xi.iter().map(|x| x.abs().recip()).sum::<f64>();
        if rhs_at_zero <= 1.0 {
            return Err(Error::NoSolution { rhs_at_zero });
        }
    }
    let max_xi = problem.xi.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut lo = GAP_LOWER;
    let mut hi = 0.5 * problem.coupling * problem.xi.len() as f64 + max_xi;
    if problem.rhs(lo) < 1.0 {
        // root lies below the bracket floor
        return Err(Error::NoSolution {
            rhs_at_zero: problem.rhs(lo),
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if problem.rhs(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if problem.residual(lo) <= problem.residual(hi) { lo } else { hi })
}

/// `sqrt(xi_m^2 + gap^2)` for each level.
pub fn quasiparticle_energies(xi: &[f64], gap: f64) -> Vec<f64> {
    xi.iter().map(|x| x.hypot(gap)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRelationReport {
    pub n_spins: usize,
    pub coupling: f64,
    pub fermi_level: f64,
    pub gap: f64,
    pub gap_residual: f64,
    /// Difference of the two smallest quasiparticle energies.
    pub lhs: f64,
    /// Splitting of the two lowest single-excitation levels of `H_p`.
    pub rhs: f64,
    /// The same splitting from full diagonalization, when it was computed.
    pub rhs_full: Option<f64>,
    pub abs_dev: f64,
    pub rel_dev: f64,
}

/// Largest register for which the full-matrix cross-check of the rhs runs.
pub const FULL_CHECK_MAX_SPINS: usize = 8;

/// Splitting of the two lowest eigenvalues of the `S_1` block, built directly.
pub fn single_excitation_gap(model: &PairingModel) -> Result<f64> {
    let vals = model::eigenvalues(&model::pairing_block(model, 1)?)?;
    Ok(vals[1] - vals[0])
}

/// The same splitting from the full `2^N` matrix, restricted to tagged `S_1` levels.
pub fn single_excitation_gap_full(model: &PairingModel) -> Result<f64> {
    let eig = model::dense_spectrum(&model::build_pairing_hamiltonian(model)?)?;
    // tag each dense eigenvector by where its weight sits
    let n = model.n_spins();
    let mut s1: Vec<f64> = (0..eig.dim())
        .filter(|&k| {
            let col = eig.vectors.column(k);
            let weight: f64 = col
                .iter()
                .enumerate()
                .filter(|(i, _)| n - i.count_ones() as usize == 1)
                .map(|(_, x)| x * x)
                .sum();
            weight > 0.5
        })
        .map(|k| eig.values[k])
        .collect();
    s1.sort_by(f64::total_cmp);
    Ok(s1[1] - s1[0])
}

/// Compare the quasiparticle splitting with the exact single-excitation gap
/// for `xi_m = epsilon_m - fermi_level`.
pub fn gap_relation_check(epsilon: &[f64], coupling: f64, fermi_level: f64) -> Result<GapRelationReport> {
    if epsilon.len() < 2 {
        return Err(Error::InvalidSpinCount {
            n_spins: epsilon.len(),
            reason: "gap relation needs at least two levels",
        });
    }
    let model = PairingModel::new(epsilon.to_vec(), coupling)?;
    let problem = GapProblem::new(epsilon.iter().map(|e| e - fermi_level).collect(), coupling)?;
    let gap = solve_gap_equation(&problem)?;
    let mut qp = quasiparticle_energies(&problem.xi, gap);
    qp.sort_by(f64::total_cmp);
    let lhs = qp[1] - qp[0];
    let rhs = single_excitation_gap(&model)?;
    let rhs_full = if epsilon.len() <= FULL_CHECK_MAX_SPINS {
        Some(single_excitation_gap_full(&model)?)
    } else {
        None
    };
    let abs_dev = (lhs - rhs).abs();
    Ok(GapRelationReport {
        n_spins: epsilon.len(),
        coupling,
        fermi_level,
        gap,
        gap_residual: problem.residual(gap),
        lhs,
        rhs,
        rhs_full,
        abs_dev,
        rel_dev: if rhs != 0.0 { abs_dev / rhs.abs() } else { f64::INFINITY },
    })
}

/// `n` levels spaced by `spacing`, centred on `center`.
pub fn uniform_levels(n: usize, spacing: f64, center: f64) -> Vec<f64> {
    (0..n)
        .map(|k| center + spacing * (k as f64 - 0.5 * (n as f64 - 1.0)))
        .collect()
}
