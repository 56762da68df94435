use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::grid::kinetic_matrix;
use super::state::{TwoBodyBasis, TwoBodyState};
use crate::electrostatics::{surface_potential, CouplingProfile, UnitSystem, VoltageVector};
use crate::error::{Error, Result};

/// Softened Coulomb repulsion u[α, β] = κ / √((x^L_α − x^R_β)² + ε²),
/// diagonal in the product DVR basis.
pub fn coulomb_diagonal(basis: &TwoBodyBasis, kappa: f64, epsilon: f64) -> Result<DMatrix<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("kappa must be finite and non-negative, got {kappa}")));
    }
    let (n, m) = basis.shape();
    Ok(DMatrix::from_fn(n, m, |a, b| {
        let d = basis.left.point(a) - basis.right.point(b);
        kappa / (d * d + epsilon * epsilon).sqrt()
    }))
}

/// One-body potential on the left and right grids.
pub fn potential_diagonals(
    basis: &TwoBodyBasis,
    profile: &CouplingProfile,
    v: &VoltageVector,
    units: &UnitSystem,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let eval = |x: f64| surface_potential(profile, v, units.length_to_um(x), units);
    let left = basis.left.points().into_iter().map(eval).collect::<Result<Vec<_>>>()?;
    let right = basis.right.points().into_iter().map(eval).collect::<Result<Vec<_>>>()?;
    Ok((DVector::from_vec(left), DVector::from_vec(right)))
}

/// Everything needed to apply H to a two-body state without forming the
/// full product-space matrix.
///
/// `energy_offset` is subtracted from H. It is a pure gauge choice used by
/// the propagator to keep the relevant eigenvalues near zero, which keeps
/// Crank-Nicolson phase errors small.
#[derive(Debug, Clone)]
pub struct OperatorCache {
    pub basis: Arc<TwoBodyBasis>,
    pub kinetic_left: DMatrix<f64>,
    pub kinetic_right: DMatrix<f64>,
    pub coulomb: DMatrix<f64>,
    pub potential_left: DVector<f64>,
    pub potential_right: DVector<f64>,
    pub energy_offset: f64,
    local: DMatrix<f64>,
}

impl OperatorCache {
    pub fn new(
        basis: Arc<TwoBodyBasis>,
        coulomb: DMatrix<f64>,
        potential_left: DVector<f64>,
        potential_right: DVector<f64>,
    ) -> Result<Self> {
        if coulomb.shape() != basis.shape() {
            return Err(Error::BasisMismatch("coulomb matrix shape".into()));
        }
        let mut cache = OperatorCache {
            kinetic_left: kinetic_matrix(&basis.left),
            kinetic_right: kinetic_matrix(&basis.right),
            local: DMatrix::zeros(coulomb.nrows(), coulomb.ncols()),
            coulomb,
            potential_left: DVector::zeros(0),
            potential_right: DVector::zeros(0),
            energy_offset: 0.0,
            basis,
        };
        cache.set_potentials(potential_left, potential_right)?;
        Ok(cache)
    }

    /// Builds the cache for one voltage setting.
    pub fn build(
        basis: Arc<TwoBodyBasis>,
        profile: &CouplingProfile,
        units: &UnitSystem,
        kappa: f64,
        epsilon: f64,
        v: &VoltageVector,
    ) -> Result<Self> {
        let u = coulomb_diagonal(&basis, kappa, epsilon)?;
        let (vl, vr) = potential_diagonals(&basis, profile, v, units)?;
        OperatorCache::new(basis, u, vl, vr)
    }

    pub fn set_potentials(&mut self, left: DVector<f64>, right: DVector<f64>) -> Result<()> {
        let (n, m) = self.basis.shape();
        if left.len() != n || right.len() != m {
            return Err(Error::BasisMismatch("potential vector length".into()));
        }
        self.potential_left = left;
        self.potential_right = right;
        self.refresh_local();
        Ok(())
    }

    pub fn set_energy_offset(&mut self, offset: f64) {
        self.energy_offset = offset;
        self.refresh_local();
    }

    fn refresh_local(&mut self) {
        let (vl, vr, off) = (&self.potential_left, &self.potential_right, self.energy_offset);
        let u = &self.coulomb;
        self.local = DMatrix::from_fn(u.nrows(), u.ncols(), |a, b| vl[a] + vr[b] + u[(a, b)] - off);
    }

    /// v^L_α + v^R_β + u_αβ − offset.
    pub fn local_potential(&self) -> &DMatrix<f64> {
        &self.local
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// out ← H x for a real coefficient matrix.
    pub fn apply_real(&self, x: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        out.gemm(1.0, &self.kinetic_left, x, 0.0);
        out.gemm(1.0, x, &self.kinetic_right, 1.0);
        for ((o, l), xi) in out.iter_mut().zip(self.local.iter()).zip(x.iter()) {
            *o += l * xi;
        }
    }

    /// Diagonal of H in the product basis, column-major (α fastest).
    pub fn diagonal(&self) -> DVector<f64> {
        let (n, m) = self.basis.shape();
        DVector::from_fn(n * m, |k, _| {
            let (a, b) = (k % n, k / n);
            self.kinetic_left[(a, a)] + self.kinetic_right[(b, b)] + self.local[(a, b)]
        })
    }

    /// Explicit product-space matrix (small grids only: oracles and the
    /// constant-Hamiltonian hold propagator).
    pub fn dense(&self) -> DMatrix<f64> {
        let (n, m) = self.basis.shape();
        let mut h = DMatrix::zeros(n * m, n * m);
        for b in 0..m {
            for a in 0..n {
                let row = a + n * b;
                for g in 0..n {
                    h[(row, g + n * b)] += self.kinetic_left[(a, g)];
                }
                for d in 0..m {
                    h[(row, a + n * d)] += self.kinetic_right[(b, d)];
                }
                h[(row, row)] += self.local[(a, b)];
            }
        }
        h
    }

    /// One-body Hamiltonians T + v of each well (no Coulomb term).
    pub fn one_body(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut hl = self.kinetic_left.clone();
        for (i, v) in self.potential_left.iter().enumerate() {
            hl[(i, i)] += v;
        }
        let mut hr = self.kinetic_right.clone();
        for (i, v) in self.potential_right.iter().enumerate() {
            hr[(i, i)] += v;
        }
        (hl, hr)
    }
}

/// H|ψ⟩ for a complex state.
pub fn apply_hamiltonian(cache: &OperatorCache, state: &TwoBodyState) -> Result<TwoBodyState> {
    if state.coeffs.shape() != cache.basis.shape() || *state.basis != *cache.basis {
        return Err(Error::BasisMismatch("state and operator cache use different bases".into()));
    }
    let (re, im) = state.split();
    let mut hre = DMatrix::zeros(re.nrows(), re.ncols());
    let mut him = hre.clone();
    cache.apply_real(&re, &mut hre);
    cache.apply_real(&im, &mut him);
    TwoBodyState::from_parts(cache.basis.clone(), &hre, &him)
}
