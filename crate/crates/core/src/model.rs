//! Pairing and NMR Hamiltonians, their excitation-number blocks and exact
//! diagonalization.
//!
//! Units are `hbar = 1`; every energy is an angular frequency. Both
//! Hamiltonians are real symmetric in the product basis, so they are stored as
//! real matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::{self, dimension, SpinBasisLabel, SubspaceIndex};
use crate::error::{Error, Result};

/// Largest register for which full `2^N x 2^N` matrices are built.
pub const MAX_DENSE_SPINS: usize = 12;

/// Tolerance used when checking symmetry of an input matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Spin-analogy pairing model: level energies `epsilon_m` and pairing strength `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingModel {
    epsilon: Vec<f64>,
    coupling: f64,
}

impl PairingModel {
    pub fn new(epsilon: Vec<f64>, coupling: f64) -> Result<Self> {
        if epsilon.is_empty() {
            return Err(Error::InvalidSpinCount {
                n_spins: 0,
                reason: "need at least one level",
            });
        }
        if epsilon.len() > basis::MAX_SPINS {
            return Err(Error::InvalidSpinCount {
                n_spins: epsilon.len(),
                reason: "register too large",
            });
        }
        if !coupling.is_finite() || epsilon.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(
                "pairing parameters must be finite".into(),
            ));
        }
        Ok(Self { epsilon, coupling })
    }

    pub fn n_spins(&self) -> usize {
        self.epsilon.len()
    }

    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Energy of the all-down state `|2^N>`: `-sum(epsilon) / 2`.
    pub fn all_down_energy(&self) -> f64 {
        -0.5 * self.epsilon.iter().sum::<f64>()
    }

    /// Energy of the all-up state `|1>`: `+sum(epsilon) / 2`.
    pub fn all_up_energy(&self) -> f64 {
        -self.all_down_energy()
    }

    /// Upper bound on any level difference, usable without diagonalizing:
    /// `sum |epsilon_m| + N (N - 1) |V|`.
    pub fn difference_bound(&self) -> f64 {
        let n = self.n_spins() as f64;
        self.epsilon.iter().map(|e| e.abs()).sum::<f64>() + n * (n - 1.0) * self.coupling.abs()
    }

    /// `<label|H_p|label>`.
    fn diagonal_element(&self, label: SpinBasisLabel) -> f64 {
        self.epsilon
            .iter()
            .enumerate()
            .map(|(m, e)| 0.5 * e * label.spin(m + 1).sign())
            .sum()
    }
}

/// Calls `f(target_index, amplitude)` for every off-diagonal entry in column
/// `index` of `H_p`. The pair term `-(V/2)(XX + YY)` swaps an up/down pair
/// with amplitude `-V`.
fn for_each_hop(n_spins: usize, index: usize, coupling: f64, mut f: impl FnMut(usize, f64)) {
    for m in 0..n_spins {
        for l in (m + 1)..n_spins {
            let bm = 1usize << (n_spins - 1 - m);
            let bl = 1usize << (n_spins - 1 - l);
            if ((index & bm) == 0) != ((index & bl) == 0) {
                f(index ^ bm ^ bl, -coupling);
            }
        }
    }
}

fn check_dense(n_spins: usize) -> Result<()> {
    if n_spins > MAX_DENSE_SPINS {
        return Err(Error::InvalidSpinCount {
            n_spins,
            reason: "dense matrices are limited to 12 spins",
        });
    }
    Ok(())
}

/// `H_p = sum_m (epsilon_m/2) Z_m - (V/2) sum_{m<l} (X_m X_l + Y_m Y_l)` in label order.
pub fn build_pairing_hamiltonian(model: &PairingModel) -> Result<DMatrix<f64>> {
    let n_spins = model.n_spins();
    check_dense(n_spins)?;
    let dim = dimension(n_spins);
    let mut h = DMatrix::zeros(dim, dim);
    for index in 0..dim {
        let label = SpinBasisLabel::from_index(index, n_spins)?;
        h[(index, index)] = model.diagonal_element(label);
        for_each_hop(n_spins, index, model.coupling, |target, amp| {
            h[(target, index)] += amp;
        });
    }
    Ok(h)
}

/// `H_p |psi>` without forming the matrix.
pub fn apply_pairing_hamiltonian(
    model: &PairingModel,
    psi: &[num_complex::Complex64],
) -> Result<Vec<num_complex::Complex64>> {
    let n_spins = model.n_spins();
    let dim = dimension(n_spins);
    if psi.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: psi.len(),
        });
    }
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); dim];
    for (index, amp) in psi.iter().enumerate() {
        if *amp == num_complex::Complex64::new(0.0, 0.0) {
            continue;
        }
        let label = SpinBasisLabel::from_index(index, n_spins)?;
        out[index] += amp * model.diagonal_element(label);
        for_each_hop(n_spins, index, model.coupling, |target, h| {
            out[target] += amp * h;
        });
    }
    Ok(out)
}

/// Block of `H_p` on `S_n`, built directly from the model parameters without
/// forming the full matrix. Rows follow [`basis::enumerate_subspace`] order.
pub fn pairing_block(model: &PairingModel, n: usize) -> Result<DMatrix<f64>> {
    let n_spins = model.n_spins();
    let sub = basis::enumerate_subspace(n_spins, n)?;
    let mut block = DMatrix::zeros(sub.len(), sub.len());
    for (col, label) in sub.members.iter().enumerate() {
        block[(col, col)] = model.diagonal_element(*label);
        for_each_hop(n_spins, label.index(), model.coupling, |target, amp| {
            let target = SpinBasisLabel::from_index(target, n_spins).expect("hop stays in range");
            let row = sub.position_of(target).expect("hop conserves excitation");
            block[(row, col)] += amp;
        });
    }
    Ok(block)
}

/// Laboratory-frame NMR Hamiltonian parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmrModel {
    larmor: Vec<f64>,
    j_coupling: Vec<Vec<f64>>,
}

impl NmrModel {
    /// Constant `J` between every pair.
    pub fn uniform(larmor: Vec<f64>, j: f64) -> Result<Self> {
        let n = larmor.len();
        let j_coupling = (0..n)
            .map(|a| (0..n).map(|b| if a == b { 0.0 } else { j }).collect())
            .collect();
        Self::with_matrix(larmor, j_coupling)
    }

    pub fn with_matrix(larmor: Vec<f64>, j_coupling: Vec<Vec<f64>>) -> Result<Self> {
        let n = larmor.len();
        if n == 0 {
            return Err(Error::InvalidSpinCount {
                n_spins: 0,
                reason: "need at least one spin",
            });
        }
        if j_coupling.len() != n || j_coupling.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidCoupling(format!("J must be {n}x{n}")));
        }
        for a in 0..n {
            if j_coupling[a][a] != 0.0 {
                return Err(Error::InvalidCoupling(format!(
                    "diagonal entry J[{a}][{a}] = {} must be zero",
                    j_coupling[a][a]
                )));
            }
            for b in (a + 1)..n {
                if j_coupling[a][b] != j_coupling[b][a] {
                    return Err(Error::InvalidCoupling(format!(
                        "J[{a}][{b}] = {} differs from J[{b}][{a}] = {}",
                        j_coupling[a][b], j_coupling[b][a]
                    )));
                }
            }
        }
        Ok(Self { larmor, j_coupling })
    }

    pub fn n_spins(&self) -> usize {
        self.larmor.len()
    }

    pub fn larmor(&self) -> &[f64] {
        &self.larmor
    }

    pub fn j_coupling(&self) -> &[Vec<f64>] {
        &self.j_coupling
    }

    /// `E_nmr` for one product state:
    /// `1/2 (sum_i w_i s_i + sum_{i<j} pi J_ij s_i s_j)`.
    pub fn energy(&self, label: SpinBasisLabel) -> f64 {
        let n = self.n_spins();
        let s: Vec<f64> = (1..=n).map(|p| label.spin(p).sign()).collect();
        let mut zeeman = 0.0;
        let mut scalar = 0.0;
        for a in 0..n {
            zeeman += self.larmor[a] * s[a];
            for b in (a + 1)..n {
                scalar += std::f64::consts::PI * self.j_coupling[a][b] * s[a] * s[b];
            }
        }
        0.5 * (zeeman + scalar)
    }

    /// All `E_nmr^j` in label order.
    pub fn energies(&self) -> Vec<f64> {
        let n = self.n_spins();
        (0..dimension(n))
            .map(|i| self.energy(SpinBasisLabel::from_index(i, n).expect("index in range")))
            .collect()
    }
}

/// Diagonal `H_nmr` as a dense matrix.
pub fn build_nmr_hamiltonian(model: &NmrModel) -> Result<DMatrix<f64>> {
    check_dense(model.n_spins())?;
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        model.energies(),
    )))
}

/// Number of spins for a `2^N`-dimensional matrix.
pub fn spins_for_dimension(dim: usize) -> Option<usize> {
    (dim.is_power_of_two() && dim > 1).then(|| dim.trailing_zeros() as usize)
}

/// Extract the `S_n` block of a `2^N`-dimensional matrix.
pub fn subspace_block(h: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let n_spins = spins_for_dimension(h.nrows()).ok_or_else(|| {
        Error::InvalidParameter(format!("dimension {} is not 2^N", h.nrows()))
    })?;
    let sub = basis::enumerate_subspace(n_spins, n)?;
    Ok(gather_block(h, &sub))
}

fn gather_block(h: &DMatrix<f64>, sub: &SubspaceIndex) -> DMatrix<f64> {
    let idx: Vec<usize> = sub.members.iter().map(|l| l.index()).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])])
}

/// Largest `|H - H^T|` entry.
pub fn asymmetry(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    let mut dev = 0.0f64;
    for r in 0..n {
        for c in (r + 1)..n {
            dev = dev.max((h[(r, c)] - h[(c, r)]).abs());
        }
    }
    dev
}

/// Whether every element coupling different excitation numbers is exactly zero.
pub fn conserves_excitation(h: &DMatrix<f64>) -> bool {
    if spins_for_dimension(h.nrows()).is_none() || !h.is_square() {
        return false;
    }
    let dim = h.nrows();
    (0..dim).all(|r| (0..dim).all(|c| h[(r, c)] == 0.0 || r.count_ones() == c.count_ones()))
}

/// Eigenpairs sorted ascending by eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
    /// Excitation number of each eigenvector, when the input conserves it.
    pub subspace_tags: Vec<Option<usize>>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Indices of eigenpairs tagged with subspace `n`, ascending by energy.
    pub fn indices_in(&self, n: usize) -> Vec<usize> {
        (0..self.dim())
            .filter(|&k| self.subspace_tags[k] == Some(n))
            .collect()
    }

    pub fn values_in(&self, n: usize) -> Vec<f64> {
        self.indices_in(n).into_iter().map(|k| self.values[k]).collect()
    }

    /// Largest `|H v - lambda v|` over all pairs.
    pub fn max_residual(&self, h: &DMatrix<f64>) -> f64 {
        (0..self.dim())
            .map(|k| {
                let v = self.vectors.column(k);
                (h * v - v * self.values[k]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `|V^T V - I|_max`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        (g - DMatrix::identity(self.dim(), self.dim())).amax()
    }
}

fn sorted_pairs(values: Vec<f64>, vectors: DMatrix<f64>, tags: Vec<Option<usize>>) -> Eigensystem {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Eigensystem {
        values: order.iter().map(|&k| values[k]).collect(),
        vectors: DMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]),
        subspace_tags: order.iter().map(|&k| tags[k]).collect(),
    }
}

fn check_symmetric(h: &DMatrix<f64>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    let deviation = asymmetry(h);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Full diagonalization with no use of block structure.
pub fn dense_spectrum(h: &DMatrix<f64>) -> Result<Eigensystem> {
    check_symmetric(h)?;
    let eig = SymmetricEigen::new(h.clone());
    let n = h.nrows();
    Ok(sorted_pairs(
        eig.eigenvalues.iter().copied().collect(),
        eig.eigenvectors,
        vec![None; n],
    ))
}

/// Diagonalize a real symmetric matrix. When the matrix conserves excitation
/// number each block is diagonalized on its own, so every eigenvector is
/// supported in a single subspace and carries its tag.
pub fn exact_spectrum(h: &DMatrix<f64>) -> Result<Eigensystem> {
    check_symmetric(h)?;
    let Some(n_spins) = spins_for_dimension(h.nrows()).filter(|_| conserves_excitation(h)) else {
        return dense_spectrum(h);
    };
    let dim = h.nrows();
    let mut values = Vec::with_capacity(dim);
    let mut vectors = DMatrix::zeros(dim, dim);
    let mut tags = Vec::with_capacity(dim);
    for sub in basis::all_subspaces(n_spins)? {
        let block = gather_block(h, &sub);
        let eig = SymmetricEigen::new(block);
        for k in 0..sub.len() {
            let col = values.len();
            values.push(eig.eigenvalues[k]);
            tags.push(Some(sub.n));
            for (r, label) in sub.members.iter().enumerate() {
                vectors[(label.index(), col)] = eig.eigenvectors[(r, k)];
            }
        }
    }
    Ok(sorted_pairs(values, vectors, tags))
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn eigenvalues(h: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(h)?;
    let mut v: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}
