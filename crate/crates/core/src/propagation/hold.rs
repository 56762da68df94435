use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::linalg::Packed;
use crate::dvr::OperatorCache;

/// Crank–Nicolson evolution under a constant Hamiltonian, done in its
/// eigenbasis: n steps of size τ multiply each eigencomponent by
/// ((1 − iEτ/2)/(1 + iEτ/2))ⁿ. Uses the dense matrix, so only for the
/// modest grids used in sweeps.
#[derive(Debug, Clone)]
pub struct HoldPropagator {
    vectors: DMatrix<f64>,
    /// Cayley phase per step, 2·atan(Eτ/2), for E relative to the offset.
    phases: DVector<f64>,
    shape: (usize, usize),
    pub tau: f64,
}

impl HoldPropagator {
    pub fn new(cache: &OperatorCache, tau: f64) -> Self {
        let eig = cache.dense().symmetric_eigen();
        let phases = eig.eigenvalues.map(|e| 2.0 * (0.5 * e * tau).atan());
        HoldPropagator {
            vectors: eig.eigenvectors,
            phases,
            shape: cache.basis.shape(),
            tau,
        }
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Coefficients of ψ in the eigenbasis.
    pub fn project(&self, psi: &Packed) -> DVector<Complex64> {
        let re = self.vectors.tr_mul(&DVector::from_column_slice(psi.re.as_slice()));
        let im = self.vectors.tr_mul(&DVector::from_column_slice(psi.im.as_slice()));
        DVector::from_fn(re.len(), |k, _| Complex64::new(re[k], im[k]))
    }

    pub fn expand(&self, c: &DVector<Complex64>) -> Packed {
        let re = &self.vectors * c.map(|z| z.re);
        let im = &self.vectors * c.map(|z| z.im);
        let (n, m) = self.shape;
        Packed {
            re: DMatrix::from_column_slice(n, m, re.as_slice()),
            im: DMatrix::from_column_slice(n, m, im.as_slice()),
        }
    }

    /// Per-eigencomponent factor after `steps` steps.
    pub fn factors(&self, steps: usize) -> DVector<Complex64> {
        self.phases.map(|p| Complex64::from_polar(1.0, -(steps as f64) * p))
    }

    pub fn advance(&self, psi: &Packed, steps: usize) -> Packed {
        let c = self.project(psi).component_mul(&self.factors(steps));
        self.expand(&c)
    }
}
