//! Lowest eigenpairs of the two-electron Hamiltonian, computational-state
//! labels and the ZZ coupling.

mod davidson;
mod labels;

pub use davidson::{davidson_lowest, DavidsonOptions, DavidsonOutput, LinearOperator};
pub use labels::{label_states, Labeling, QubitLabels, StateLabel, REFERENCE_ORDER};

use nalgebra::{DMatrix, DVector};

use crate::dvr::{OperatorCache, TwoBodyState};
use crate::error::{Error, Result};

/// Eigenpairs in ascending energy order. Energies are absolute (the
/// cache's gauge offset is added back).
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub energies: Vec<f64>,
    pub states: Vec<TwoBodyState>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub matvecs: usize,
}

impl EigenSolution {
    /// ζ from the labeled |11⟩, |01⟩, |10⟩, |00⟩ energies.
    pub fn labeled_zz(&self, labels: &QubitLabels) -> f64 {
        let [i00, i01, i10, i11] = labels.qubit_indices();
        self.energies[i11] - self.energies[i01] - self.energies[i10] + self.energies[i00]
    }
}

/// Products of the lowest one-body eigenvectors, ordered by summed energy.
pub fn product_guesses(cache: &OperatorCache, count: usize) -> Vec<DVector<f64>> {
    let (hl, hr) = cache.one_body();
    let el = hl.symmetric_eigen();
    let er = hr.symmetric_eigen();
    let per = count.min(el.eigenvalues.len()).min(er.eigenvalues.len()).max(1);
    let mut pairs = Vec::new();
    for a in 0..el.eigenvalues.len() {
        for b in 0..er.eigenvalues.len() {
            pairs.push((el.eigenvalues[a] + er.eigenvalues[b], a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (n, m) = cache.basis.shape();
    pairs
        .into_iter()
        .take(count.max(per))
        .map(|(_, a, b)| {
            let p: DMatrix<f64> = el.eigenvectors.column(a) * er.eigenvectors.column(b).transpose();
            DVector::from_column_slice(&p.as_slice()[..n * m])
        })
        .collect()
}

/// The `k` lowest eigenpairs of the cached Hamiltonian.
pub fn solve_spectrum(cache: &OperatorCache, k: usize, opts: &DavidsonOptions) -> Result<EigenSolution> {
    let guesses = product_guesses(cache, k + opts.extra);
    let out = davidson_lowest(cache, k, opts, &guesses)?;
    let (n, m) = cache.basis.shape();
    let states = out
        .vectors
        .iter()
        .map(|v| {
            TwoBodyState::from_real(cache.basis.clone(), &DMatrix::from_column_slice(n, m, v.as_slice()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenSolution {
        energies: out.values.iter().map(|e| e + cache.energy_offset).collect(),
        states,
        residuals: out.residuals,
        iterations: out.iterations,
        matvecs: out.matvecs,
    })
}

/// ζ = E₄ − E₂ − E₁ + E₀ on ascending energies.
pub fn zz_coupling(energies: &[f64]) -> Result<f64> {
    if energies.len() < 5 {
        return Err(Error::invalid(format!(
            "zz coupling needs five energies, got {}",
            energies.len()
        )));
    }
    Ok(energies[4] - energies[2] - energies[1] + energies[0])
}

#[cfg(test)]
mod tests;
