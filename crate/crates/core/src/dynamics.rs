//! Evolution under `H_p`, exact and first-order Trotterized, and the density
//! matrix of the evolved state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::dimension;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{exact_spectrum, Eigensystem, PairingModel};
use crate::states::QuantumState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    #[default]
    Exact,
    Trotter,
}

/// `U(tau) = exp(-i H tau)` as a dense matrix.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub matrix: DMatrix<Complex64>,
    pub tau: f64,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `|U^dagger U - I|_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.matrix.adjoint() * &self.matrix;
        (g - DMatrix::identity(self.dim(), self.dim()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, psi: &QuantumState) -> Result<QuantumState> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        Ok(QuantumState::from_vector_unchecked(
            psi.n_spins(),
            &self.matrix * psi.amplitudes(),
        ))
    }

    /// `V exp(-i Lambda tau) V^T` from a precomputed eigensystem.
    pub fn from_eigensystem(eig: &Eigensystem, tau: f64) -> Self {
        let n = eig.dim();
        let v = eig.vectors.map(|x| Complex64::new(x, 0.0));
        let phased = DMatrix::from_fn(n, n, |r, c| v[(r, c)] * Complex64::cis(-eig.values[c] * tau));
        Self {
            matrix: phased * v.transpose(),
            tau,
        }
    }
}

pub fn exact_propagator(h: &DMatrix<f64>, tau: f64) -> Result<Propagator> {
    Ok(Propagator::from_eigensystem(&exact_spectrum(h)?, tau))
}

/// Largest singular value of `a - b`.
pub fn operator_distance(a: &Propagator, b: &Propagator) -> f64 {
    let diff = &a.matrix - &b.matrix;
    diff.singular_values().max()
}

/// Evolves one initial state through the spectral decomposition of `H_p`.
/// The eigensystem is borrowed read-only, so one instance can serve every
/// `tau` of a sweep from any thread.
#[derive(Debug, Clone)]
pub struct SpectralEvolver<'a> {
    eig: &'a Eigensystem,
    n_spins: usize,
    /// `a_k = <v_k|psi0>`
    coefficients: Vec<Complex64>,
}

impl<'a> SpectralEvolver<'a> {
    pub fn new(eig: &'a Eigensystem, psi0: &QuantumState) -> Result<Self> {
        if psi0.dim() != eig.dim() {
            return Err(Error::DimensionMismatch {
                expected: eig.dim(),
                found: psi0.dim(),
            });
        }
        let coefficients = (0..eig.dim())
            .map(|k| {
                eig.vectors
                    .column(k)
                    .iter()
                    .zip(psi0.amplitudes().iter())
                    .map(|(b, a)| a * *b)
                    .sum()
            })
            .collect();
        Ok(Self {
            eig,
            n_spins: psi0.n_spins(),
            coefficients,
        })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn evolve(&self, tau: f64) -> QuantumState {
        let dim = self.eig.dim();
        let mut out = DVector::from_element(dim, ZERO);
        for (k, a) in self.coefficients.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let c = a * Complex64::cis(-self.eig.values[k] * tau);
            for (o, b) in out.iter_mut().zip(self.eig.vectors.column(k).iter()) {
                *o += c * *b;
            }
        }
        QuantumState::from_vector_unchecked(self.n_spins, out)
    }
}

/// First-order product formula for `H_p`: the `sigma_z` layer, then each pair
/// term `(m, l)` in lexicographic order, repeated `steps` times.
#[derive(Debug, Clone)]
pub struct TrotterEvolver {
    model: PairingModel,
    steps: usize,
    diagonal: Vec<f64>,
}

impl TrotterEvolver {
    pub fn new(model: &PairingModel, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidParameter("trotter steps must be >= 1".into()));
        }
        let n = model.n_spins();
        let diagonal = (0..dimension(n))
            .map(|i| {
                model
                    .epsilon()
                    .iter()
                    .enumerate()
                    .map(|(m, e)| {
                        let down = i & (1 << (n - 1 - m)) != 0;
                        if down {
                            -0.5 * e
                        } else {
                            0.5 * e
                        }
                    })
                    .sum()
            })
            .collect();
        Ok(Self {
            model: model.clone(),
            steps,
            diagonal,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn apply_in_place(&self, psi: &mut [Complex64], tau: f64) {
        let n = self.model.n_spins();
        let dt = tau / self.steps as f64;
        let z_phase: Vec<Complex64> = self.diagonal.iter().map(|e| Complex64::cis(-e * dt)).collect();
        // exp(-i dt h_ml) on the swapped pair: cos(V dt) + i sin(V dt) X
        let angle = self.model.coupling() * dt;
        let (s, c) = angle.sin_cos();
        let is = Complex64::new(0.0, s);
        for _ in 0..self.steps {
            for (a, p) in psi.iter_mut().zip(&z_phase) {
                *a *= p;
            }
            for m in 0..n {
                for l in (m + 1)..n {
                    let bm = 1usize << (n - 1 - m);
                    let bl = 1usize << (n - 1 - l);
                    for i in 0..psi.len() {
                        if i & bm == 0 && i & bl != 0 {
                            let j = i ^ bm ^ bl;
                            let (a, b) = (psi[i], psi[j]);
                            psi[i] = a * c + is * b;
                            psi[j] = b * c + is * a;
                        }
                    }
                }
            }
        }
    }

    pub fn evolve(&self, psi: &QuantumState, tau: f64) -> Result<QuantumState> {
        let dim = dimension(self.model.n_spins());
        if psi.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: psi.dim(),
            });
        }
        let mut v = psi.amplitudes().clone();
        self.apply_in_place(v.as_mut_slice(), tau);
        Ok(QuantumState::from_vector_unchecked(psi.n_spins(), v))
    }

    pub fn propagator(&self, tau: f64, exec: Execution) -> Propagator {
        let dim = dimension(self.model.n_spins());
        let columns = map_indexed(exec, dim, |k| {
            let mut col = vec![ZERO; dim];
            col[k] = Complex64::new(1.0, 0.0);
            self.apply_in_place(&mut col, tau);
            col
        });
        Propagator {
            matrix: DMatrix::from_fn(dim, dim, |r, c| columns[c][r]),
            tau,
        }
    }
}

pub fn trotter_propagator(model: &PairingModel, tau: f64, steps: usize) -> Result<Propagator> {
    Ok(TrotterEvolver::new(model, steps)?.propagator(tau, Execution::default()))
}

/// Density matrix of the register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// `|psi><psi|`.
    pub fn from_pure(psi: &QuantumState) -> Self {
        let v = psi.amplitudes();
        Self {
            matrix: v * v.adjoint(),
        }
    }

    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 || !matrix.nrows().is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "density matrix must be 2^N x 2^N, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_spins(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `|rho^2 - rho|_max`.
    pub fn purity_defect(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `rho = (U psi0)(U psi0)^dagger`.
pub fn evolve_to_density(psi0: &QuantumState, u: &Propagator) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_pure(&u.apply(psi0)?))
}
