//! Sinc-DVR discretization of the two-electron problem and the matrix-free
//! Hamiltonian action.

mod grid;
mod hamiltonian;
mod state;

pub use grid::{kinetic_matrix, DvrGrid};
pub use hamiltonian::{apply_hamiltonian, coulomb_diagonal, potential_diagonals, OperatorCache};
pub use state::{inner, TwoBodyBasis, TwoBodyState};
