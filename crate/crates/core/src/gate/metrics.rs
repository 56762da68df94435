use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dvr::{inner, TwoBodyState};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};

/// Eigenstate indices of |00⟩, |01⟩, |10⟩, |11⟩ in the conventional order.
pub const QUBIT_EIGEN_INDICES: [usize; 4] = [0, 1, 2, 4];

/// 4×4 matrix over the computational states in the order 00, 01, 10, 11
/// (left qubit first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMatrix(pub Matrix4<Complex64>);

impl GateMatrix {
    pub fn identity() -> Self {
        GateMatrix(Matrix4::identity())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        self.0.column(j).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        GateMatrix(self.0.adjoint())
    }

    pub fn mul(&self, other: &GateMatrix) -> Self {
        GateMatrix(self.0 * other.0)
    }

    pub fn max_abs_diff(&self, other: &GateMatrix) -> f64 {
        (self.0 - other.0).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    SqrtIswap,
    Cz,
    Identity,
}

impl std::str::FromStr for GateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt_iswap" => Ok(GateKind::SqrtIswap),
            "cz" => Ok(GateKind::Cz),
            "identity" => Ok(GateKind::Identity),
            _ => Err(Error::invalid(format!("unknown gate `{s}` (sqrt_iswap | cz | identity)"))),
        }
    }
}

pub fn target_gate(kind: GateKind) -> GateMatrix {
    let one = Complex64::new(1.0, 0.0);
    let mut m = Matrix4::identity();
    match kind {
        GateKind::Identity => {}
        GateKind::Cz => m[(3, 3)] = -one,
        GateKind::SqrtIswap => {
            let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
            let ri = Complex64::new(0.0, FRAC_1_SQRT_2);
            m[(1, 1)] = r;
            m[(2, 2)] = r;
            m[(1, 2)] = ri;
            m[(2, 1)] = ri;
        }
    }
    GateMatrix(m)
}

/// U_ij = ⟨Φ_{n_i} | Ψ_{n_j}(t_gate)⟩. `eigenstates` and `finals` are the
/// four qubit states in the order 00, 01, 10, 11.
pub fn overlap_gate_matrix(eigenstates: &[TwoBodyState], finals: &[TwoBodyState]) -> Result<GateMatrix> {
    if eigenstates.len() != 4 || finals.len() != 4 {
        return Err(Error::invalid(format!(
            "gate matrix needs 4 eigenstates and 4 propagated states, got {} and {}",
            eigenstates.len(),
            finals.len()
        )));
    }
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] = inner(&eigenstates[i], &finals[j])?;
        }
    }
    let g = GateMatrix(m);
    if !g.is_finite() {
        return Err(Error::NonFinite("gate matrix".into()));
    }
    Ok(g)
}

/// Reduces an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationAngles {
    pub theta_left: f64,
    pub theta_right: f64,
    pub global_phase: f64,
}

impl RotationAngles {
    pub fn new(theta_left: f64, theta_right: f64, global_phase: f64) -> Self {
        RotationAngles {
            theta_left: wrap_angle(theta_left),
            theta_right: wrap_angle(theta_right),
            global_phase: wrap_angle(global_phase),
        }
    }

    fn diagonal(&self) -> [Complex64; 4] {
        let (l, r) = (self.theta_left, self.theta_right);
        [0.0, r, l, l + r].map(|p| Complex64::from_polar(1.0, p + self.global_phase))
    }
}

/// G = e^{iγ} diag(1, e^{iθ_R}, e^{iθ_L}, e^{i(θ_L+θ_R)}) U.
pub fn apply_z_rotations(u: &GateMatrix, a: &RotationAngles) -> GateMatrix {
    let d = a.diagonal();
    let mut m = u.0;
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] *= d[i];
        }
    }
    GateMatrix(m)
}

/// F = (Tr MM† + |Tr M|²)/20 with M = target†·g.
pub fn average_fidelity(g: &GateMatrix, target: &GateMatrix) -> f64 {
    let m = target.0.adjoint() * g.0;
    let tr_mm = m.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let tr = m.trace();
    (tr_mm + tr.norm_sqr()) / 20.0
}

/// Angles that make G₀₀, G₁₁, G₂₂ real and non-negative.
pub fn canonical_angles(u: &GateMatrix) -> Result<RotationAngles> {
    let d = [u.get(0, 0), u.get(1, 1), u.get(2, 2)];
    if d.iter().any(|c| c.norm() < 1e-300) {
        return Err(Error::invalid("canonical angles need non-vanishing U00, U11, U22"));
    }
    let p0 = d[0].arg();
    Ok(RotationAngles::new(p0 - d[2].arg(), p0 - d[1].arg(), -p0))
}

/// Σ_{i,j∈{1,2}} |0.5 − |U_ij|²| / 2.
pub fn swap_error(u: &GateMatrix) -> f64 {
    let mut s = 0.0;
    for i in 1..=2 {
        for j in 1..=2 {
            s += (0.5 - u.get(i, j).norm_sqr()).abs();
        }
    }
    s / 2.0
}

/// 1 − |U₃₃|².
pub fn leakage_error(u: &GateMatrix) -> f64 {
    1.0 - u.get(3, 3).norm_sqr()
}

/// arg(G₃₃ G₀₀ / (G₁₁ G₂₂)): the part of the diagonal phase that no local
/// Z rotation can remove.
pub fn conditional_phase(u: &GateMatrix) -> f64 {
    (u.get(3, 3) * u.get(0, 0) / (u.get(1, 1) * u.get(2, 2))).arg()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub angles: RotationAngles,
    pub swap_error: f64,
    pub leakage_error: f64,
    #[serde(skip)]
    pub gate: GateMatrixSerde,
    /// The fidelity varies by less than 1e-10 over the angle grid.
    pub flat: bool,
}

/// Wrapper so reports stay `Copy` while the gate matrix is serialized by
/// the JSON writer instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMatrixSerde(pub GateMatrix);

impl Default for GateMatrixSerde {
    fn default() -> Self {
        GateMatrixSerde(GateMatrix::identity())
    }
}

impl FidelityReport {
    pub fn gate(&self) -> &GateMatrix {
        &self.gate.0
    }
}

/// Σ_i D_i w_i with w_i = Σ_j U_ij conj(T_ij), so Tr(T† D U) is cheap.
fn trace_weights(u: &GateMatrix, target: &GateMatrix) -> [Complex64; 4] {
    let mut w = [Complex64::new(0.0, 0.0); 4];
    for (i, wi) in w.iter_mut().enumerate() {
        for j in 0..4 {
            *wi += u.get(i, j) * target.get(i, j).conj();
        }
    }
    w
}

fn trace_at(w: &[Complex64; 4], l: f64, r: f64) -> Complex64 {
    w[0] + w[1] * Complex64::from_polar(1.0, r)
        + w[2] * Complex64::from_polar(1.0, l)
        + w[3] * Complex64::from_polar(1.0, l + r)
}

const ANGLE_GRID: usize = 8;

/// Maximizes F over θ_L, θ_R. The global phase is set so Tr M is real and
/// positive; it does not change F. Multistart: canonical angles plus an
/// 8×8 grid, each polished by a simplex search.
pub fn optimize_rotations(u: &GateMatrix, target: &GateMatrix) -> FidelityReport {
    let w = trace_weights(u, target);
    let frob = u.0.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let fid = |l: f64, r: f64| (frob + trace_at(&w, l, r).norm_sqr()) / 20.0;

    let mut starts: Vec<(f64, f64)> = Vec::with_capacity(ANGLE_GRID * ANGLE_GRID + 1);
    if let Ok(c) = canonical_angles(u) {
        starts.push((c.theta_left, c.theta_right));
    }
    for a in 0..ANGLE_GRID {
        for b in 0..ANGLE_GRID {
            let step = 2.0 * PI / ANGLE_GRID as f64;
            starts.push((-PI + (a as f64 + 0.5) * step, -PI + (b as f64 + 0.5) * step));
        }
    }
    let grid_vals: Vec<f64> = starts.iter().map(|&(l, r)| fid(l, r)).collect();
    let lo = grid_vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let flat = hi - lo < 1e-10;

    // polish the best few starts; the landscape has at most a handful of basins
    let mut ranked: Vec<usize> = (0..starts.len()).collect();
    ranked.sort_by(|&a, &b| grid_vals[b].total_cmp(&grid_vals[a]));
    if !starts.is_empty() && ranked[0] != 0 && canonical_angles(u).is_ok() {
        ranked.retain(|&i| i != 0);
        ranked.insert(1.min(ranked.len()), 0);
    }
    let opts = SimplexOptions {
        ftol: 1e-14,
        xtol: 1e-9,
        max_evals: 600,
    };
    let mut best = (starts[ranked[0]].0, starts[ranked[0]].1, grid_vals[ranked[0]]);
    for &i in ranked.iter().take(6) {
        let (l0, r0) = starts[i];
        let res = nelder_mead(|x| Some(-fid(x[0], x[1])), &[l0, r0], &[0.3, 0.3], &opts);
        if -res.value > best.2 {
            best = (res.x[0], res.x[1], -res.value);
        }
    }
    let (l, r, f) = best;
    let tr = trace_at(&w, l, r);
    let angles = RotationAngles::new(l, r, if tr.norm() > 0.0 { -tr.arg() } else { 0.0 });
    let g = apply_z_rotations(u, &angles);
    FidelityReport {
        fidelity: f.min(1.0).max(0.0),
        angles,
        swap_error: swap_error(&g),
        leakage_error: leakage_error(&g),
        gate: GateMatrixSerde(g),
        flat,
    }
}

/// Per-element amplitude |G_ij|² and phase deviation ∠G_ij − ∠T_ij (rad,
/// wrapped to (−π, π]) after canonical angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementwiseReport {
    pub target: GateKind,
    pub amplitude: [[f64; 4]; 4],
    pub ideal_amplitude: [[f64; 4]; 4],
    pub phase_deviation: [[f64; 4]; 4],
    pub angles: RotationAngles,
}

pub fn elementwise_report(u: &GateMatrix, kind: GateKind) -> Result<ElementwiseReport> {
    let angles = canonical_angles(u)?;
    let g = apply_z_rotations(u, &angles);
    let t = target_gate(kind);
    let mut amplitude = [[0.0; 4]; 4];
    let mut ideal_amplitude = [[0.0; 4]; 4];
    let mut phase_deviation = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            amplitude[i][j] = g.get(i, j).norm_sqr();
            ideal_amplitude[i][j] = t.get(i, j).norm_sqr();
            let ideal_phase = if t.get(i, j).norm() > 0.0 { t.get(i, j).arg() } else { 0.0 };
            phase_deviation[i][j] = if g.get(i, j).norm() > 0.0 {
                wrap_angle(g.get(i, j).arg() - ideal_phase)
            } else {
                0.0
            };
        }
    }
    Ok(ElementwiseReport {
        target: kind,
        amplitude,
        ideal_amplitude,
        phase_deviation,
        angles,
    })
}
