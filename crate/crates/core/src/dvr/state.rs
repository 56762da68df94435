use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::DvrGrid;
use crate::error::{Error, Result};

/// Product basis: electron 1 on the left grid, electron 2 on the right grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBodyBasis {
    pub left: DvrGrid,
    pub right: DvrGrid,
}

impl TwoBodyBasis {
    pub fn new(left: DvrGrid, right: DvrGrid) -> Result<Self> {
        if !(left.last() < right.start()) {
            return Err(Error::invalid(format!(
                "left grid (ends {}) overlaps right grid (starts {})",
                left.last(),
                right.start()
            )));
        }
        Ok(TwoBodyBasis { left, right })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.left.count(), self.right.count())
    }

    pub fn dim(&self) -> usize {
        self.left.count() * self.right.count()
    }
}

/// Two-electron wavefunction: C[α, β] multiplies χ^L_α(x₁) χ^R_β(x₂).
#[derive(Debug, Clone)]
pub struct TwoBodyState {
    pub coeffs: DMatrix<Complex64>,
    pub basis: Arc<TwoBodyBasis>,
}

impl TwoBodyState {
    pub fn new(basis: Arc<TwoBodyBasis>, coeffs: DMatrix<Complex64>) -> Result<Self> {
        if coeffs.shape() != basis.shape() {
            return Err(Error::BasisMismatch(format!(
                "coefficients {:?} vs basis {:?}",
                coeffs.shape(),
                basis.shape()
            )));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite("state coefficients".into()));
        }
        Ok(TwoBodyState { coeffs, basis })
    }

    pub fn zeros(basis: Arc<TwoBodyBasis>) -> Self {
        let (n, m) = basis.shape();
        TwoBodyState {
            coeffs: DMatrix::zeros(n, m),
            basis,
        }
    }

    pub fn from_real(basis: Arc<TwoBodyBasis>, c: &DMatrix<f64>) -> Result<Self> {
        Self::new(basis, c.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NonFinite("cannot normalize a zero or non-finite state".into()));
        }
        self.coeffs.unscale_mut(n);
        Ok(self)
    }

    pub fn same_basis(&self, other: &TwoBodyState) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis == other.basis {
            Ok(())
        } else {
            Err(Error::BasisMismatch("states live on different grids".into()))
        }
    }

    /// Real and imaginary parts as separate matrices.
    pub fn split(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.coeffs.map(|c| c.re), self.coeffs.map(|c| c.im))
    }

    pub fn from_parts(basis: Arc<TwoBodyBasis>, re: &DMatrix<f64>, im: &DMatrix<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::BasisMismatch("real/imaginary shape mismatch".into()));
        }
        Self::new(basis, re.zip_map(im, Complex64::new))
    }
}

/// ⟨a|b⟩ = Σ conj(A)·B.
pub fn inner(a: &TwoBodyState, b: &TwoBodyState) -> Result<Complex64> {
    a.same_basis(b)?;
    Ok(a.coeffs
        .iter()
        .zip(b.coeffs.iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}
