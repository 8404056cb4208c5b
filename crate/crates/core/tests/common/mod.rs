//! Brute-force operators built from Pauli matrices and Kronecker products,
//! independent of the library's bit-twiddling constructions. Qubit 1 is the
//! most significant factor; single-qubit index 0 is spin up.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity() -> CMat {
    CMat::identity(2, 2)
}

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `|up><down|`.
pub fn sigma_plus() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
}

/// `op` on qubit `k` (1-based) of `n`.
pub fn on_qubit(op: &CMat, k: usize, n: usize) -> CMat {
    (1..=n)
        .map(|m| if m == k { op.clone() } else { identity() })
        .reduce(|acc, x| acc.kronecker(&x))
        .expect("n >= 1")
}

pub fn raising_sum(n: usize) -> CMat {
    (1..=n).map(|k| on_qubit(&sigma_plus(), k, n)).fold(CMat::zeros(1 << n, 1 << n), |a, b| a + b)
}

/// `sum eps_m/2 Z_m - V/2 sum_{m<l} (X_m X_l + Y_m Y_l)`.
pub fn pairing_hamiltonian(eps: &[f64], v: f64) -> CMat {
    let n = eps.len();
    let mut h = CMat::zeros(1 << n, 1 << n);
    for (m, e) in eps.iter().enumerate() {
        h += on_qubit(&sigma_z(), m + 1, n) * c(0.5 * e, 0.0);
    }
    for m in 1..=n {
        for l in m + 1..=n {
            let xx = on_qubit(&sigma_x(), m, n) * on_qubit(&sigma_x(), l, n);
            let yy = on_qubit(&sigma_y(), m, n) * on_qubit(&sigma_y(), l, n);
            h -= (xx + yy) * c(0.5 * v, 0.0);
        }
    }
    h
}

/// `1/2 (sum w_i Z_i + sum_{i<j} pi J_ij Z_i Z_j)`.
pub fn nmr_hamiltonian(larmor: &[f64], j: &[Vec<f64>]) -> CMat {
    let n = larmor.len();
    let mut h = CMat::zeros(1 << n, 1 << n);
    for (i, w) in larmor.iter().enumerate() {
        h += on_qubit(&sigma_z(), i + 1, n) * c(0.5 * w, 0.0);
    }
    for a in 0..n {
        for b in a + 1..n {
            let zz = on_qubit(&sigma_z(), a + 1, n) * on_qubit(&sigma_z(), b + 1, n);
            h += zz * c(0.5 * std::f64::consts::PI * j[a][b], 0.0);
        }
    }
    h
}

pub fn uniform_j(n: usize, j: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|a| (0..n).map(|b| if a == b { 0.0 } else { j }).collect())
        .collect()
}

/// `|label><label|`-style outer product `|i><j|` with 1-based labels.
pub fn outer(i: usize, j: usize, dim: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(i - 1, j - 1)] = c(1.0, 0.0);
    m
}

/// `exp(-i H t)` for Hermitian `H` via its eigen-decomposition.
pub fn unitary(h: &CMat, t: f64) -> CMat {
    let eig = h.clone().symmetric_eigen();
    let phases = CMat::from_diagonal(&eig.eigenvalues.map(|e| Complex64::cis(-e * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
