use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EigenSolution;
use crate::dvr::OperatorCache;
use crate::error::{Error, Result};

/// Computational labels |n_L n_R⟩ in the conventional energy order.
pub const REFERENCE_ORDER: [(usize, usize); 6] = [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)];

/// Natural-orbital occupation below which a state counts as entangled
/// across the wells, so node counting is not trusted.
const MIN_OCCUPATION: f64 = 0.75;
/// Energies closer than this are treated as degenerate.
const DEGENERACY: f64 = 1e-6;

/// Bijection from the six computational labels to eigenstate indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLabels {
    /// `index[k]` is the eigenstate carrying `REFERENCE_ORDER[k]`.
    pub index: [usize; 6],
}

impl QubitLabels {
    pub fn reference() -> Self {
        QubitLabels {
            index: [0, 1, 2, 3, 4, 5],
        }
    }

    pub fn of(&self, label: (usize, usize)) -> Option<usize> {
        REFERENCE_ORDER
            .iter()
            .position(|&l| l == label)
            .map(|k| self.index[k])
    }

    /// Eigenstate indices of |00⟩, |01⟩, |10⟩, |11⟩: (0, 1, 2, 4) in the
    /// reference order.
    pub fn qubit_indices(&self) -> [usize; 4] {
        [self.index[0], self.index[1], self.index[2], self.index[4]]
    }

    pub fn is_reference(&self) -> bool {
        self.index == [0, 1, 2, 3, 4, 5]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateLabel {
    pub label: (usize, usize),
    pub occupation_left: f64,
    pub occupation_right: f64,
    /// Assigned by overlap with uncoupled products rather than node counting.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Labeling {
    pub states: Vec<StateLabel>,
    pub labels: QubitLabels,
    /// Positions where the found order departs from `REFERENCE_ORDER`.
    pub mismatches: Vec<usize>,
}

impl Labeling {
    pub fn matches_reference(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn count_nodes(phi: &DVector<f64>) -> usize {
    let peak = phi.amax();
    let mut last = 0.0f64;
    let mut nodes = 0;
    for &v in phi.iter() {
        if v.abs() < 1e-3 * peak {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            nodes += 1;
        }
        last = v;
    }
    nodes
}

fn dominant(rho: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = rho.symmetric_eigen();
    let i = eig.eigenvalues.imax();
    (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
}

/// Assigns |n_L n_R⟩ labels to the six lowest eigenstates by counting nodes
/// of the dominant natural orbital of each well. States that are strongly
/// entangled across the wells or degenerate with a neighbour fall back to
/// maximal overlap with κ = 0 product states and are flagged.
pub fn label_states(sol: &EigenSolution, cache: &OperatorCache) -> Result<Labeling> {
    if sol.states.len() < 6 {
        return Err(Error::LabelingFailed(format!(
            "need six eigenstates, got {}",
            sol.states.len()
        )));
    }
    let (hl, hr) = cache.one_body();
    let el = hl.symmetric_eigen();
    let er = hr.symmetric_eigen();
    let sorted = |e: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>| {
        let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
        idx.into_iter()
            .take(4)
            .map(|i| e.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>()
    };
    let (orb_l, orb_r) = (sorted(&el), sorted(&er));

    let mut states = Vec::with_capacity(6);
    for i in 0..6 {
        let c = sol.states[i].coeffs.map(|z| z.re);
        let (pl, phil) = dominant(&c * c.transpose());
        let (pr, phir) = dominant(c.transpose() * &c);
        let degenerate = (0..6)
            .filter(|&j| j != i)
            .any(|j| (sol.energies[j] - sol.energies[i]).abs() < DEGENERACY);
        let mut label = (count_nodes(&phil), count_nodes(&phir));
        let ambiguous = degenerate || pl < MIN_OCCUPATION || pr < MIN_OCCUPATION;
        if ambiguous {
            let mut best = (0.0, (0, 0));
            for (a, fl) in orb_l.iter().enumerate() {
                for (b, fr) in orb_r.iter().enumerate() {
                    let ov = fl.dot(&(&c * fr)).powi(2);
                    if ov > best.0 {
                        best = (ov, (a, b));
                    }
                }
            }
            label = best.1;
        }
        states.push(StateLabel {
            label,
            occupation_left: pl,
            occupation_right: pr,
            ambiguous,
        });
    }

    let mut index = [usize::MAX; 6];
    for (i, s) in states.iter().enumerate() {
        let Some(k) = REFERENCE_ORDER.iter().position(|&l| l == s.label) else {
            return Err(Error::LabelingFailed(format!(
                "state {i} carries non-computational label {:?}",
                s.label
            )));
        };
        if index[k] != usize::MAX {
            return Err(Error::LabelingFailed(format!(
                "label {:?} assigned to states {} and {i}",
                s.label, index[k]
            )));
        }
        index[k] = i;
    }
    let mismatches = (0..6).filter(|&i| states[i].label != REFERENCE_ORDER[i]).collect();
    Ok(Labeling {
        states,
        labels: QubitLabels { index },
        mismatches,
    })
}
