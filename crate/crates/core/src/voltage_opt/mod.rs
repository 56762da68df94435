//! Loss functions for the idle (I), SWAP (II) and CZ (III) voltage
//! configurations, and a boxed simplex search over the seven electrode
//! voltages.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::{Device, GridOptions};
use crate::electrostatics::{VoltageVector, ELECTRODE_COUNT};
use crate::error::{Error, Result};
use crate::gate::QUBIT_EIGEN_INDICES;
use crate::optim::{nelder_mead, SimplexOptions};
use crate::pipeline::QubitIndexing;
use crate::spectrum::{label_states, solve_spectrum, DavidsonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossConfig {
    /// ζ² only.
    #[serde(rename = "bare")]
    Bare,
    I,
    II,
    III,
}

impl std::str::FromStr for LossConfig {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bare" => Ok(LossConfig::Bare),
            "I" | "i" | "1" => Ok(LossConfig::I),
            "II" | "ii" | "2" => Ok(LossConfig::II),
            "III" | "iii" | "3" => Ok(LossConfig::III),
            _ => Err(format!("unknown configuration `{s}` (expected bare, I, II or III)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Config I: qubit frequencies outside the band.
    pub band: f64,
    /// Config I: qubit detuning below the minimum.
    pub detuning: f64,
    /// Config II: (E₂ − E₁)².
    pub swap_resonance: f64,
    /// Config II: each of the two upper gaps below the minimum.
    pub upper_gap: f64,
    /// Config III: each of the three degeneracy terms.
    pub cz_degeneracy: f64,
    /// Config III: E₂ − E₁ below the minimum gap.
    pub qubit_gap: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            band: 1e-2,
            detuning: 1e-2,
            swap_resonance: 1e-4,
            upper_gap: 1e-2,
            cz_degeneracy: 1.0,
            qubit_gap: 1e4,
        }
    }
}

/// GHz
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossThresholds {
    pub band: (f64, f64),
    pub min_detuning: f64,
    pub min_gap: f64,
}

impl Default for LossThresholds {
    fn default() -> Self {
        LossThresholds {
            band: (5.0, 15.0),
            min_detuning: 3.0,
            min_gap: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub config: LossConfig,
    pub weights: LossWeights,
    pub thresholds: LossThresholds,
}

impl LossSpec {
    pub fn new(config: LossConfig) -> Self {
        LossSpec {
            config,
            weights: LossWeights::default(),
            thresholds: LossThresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if [w.band, w.detuning, w.swap_resonance, w.upper_gap, w.cz_degeneracy, w.qubit_gap]
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        let t = &self.thresholds;
        if !(t.band.0 > 0.0 && t.band.1 > t.band.0 && t.min_detuning > 0.0 && t.min_gap > 0.0) {
            return Err(Error::invalid("loss thresholds must be positive with band.0 < band.1"));
        }
        Ok(())
    }
}

/// max(0, threshold − gap)²
pub fn hinge(gap: f64, threshold: f64) -> f64 {
    let d = (threshold - gap).max(0.0);
    d * d
}

/// Six lowest energies (GHz, ascending) and the indices of |00⟩, |01⟩,
/// |10⟩, |11⟩ among them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub energies_ghz: [f64; 6],
    pub qubit_indices: [usize; 4],
}

impl SpectrumPoint {
    pub fn zz(&self) -> f64 {
        let [a, b, c, d] = self.qubit_indices;
        let e = &self.energies_ghz;
        e[d] - e[b] - e[c] + e[a]
    }
}

pub trait SpectrumModel: Sync {
    fn evaluate(&self, v: &VoltageVector) -> Result<SpectrumPoint>;
}

/// Spectrum from the device model; the grid follows the wells of each
/// candidate vector.
#[derive(Debug, Clone)]
pub struct DeviceSpectrum {
    pub device: Device,
    pub grid: GridOptions,
    pub indexing: QubitIndexing,
    pub davidson: DavidsonOptions,
}

impl DeviceSpectrum {
    pub fn new(device: Device, grid: GridOptions) -> Self {
        DeviceSpectrum {
            device,
            grid,
            indexing: QubitIndexing::Labeled,
            davidson: DavidsonOptions { tol: 1e-9, ..Default::default() },
        }
    }
}

impl SpectrumModel for DeviceSpectrum {
    fn evaluate(&self, v: &VoltageVector) -> Result<SpectrumPoint> {
        let basis = Arc::new(self.device.build_basis(v, &[], &self.grid)?);
        let cache = self.device.operators(basis, v)?;
        let sol = solve_spectrum(&cache, 6, &self.davidson)?;
        let qubit_indices = match self.indexing {
            QubitIndexing::Labeled => label_states(&sol, &cache)?.labels.qubit_indices(),
            QubitIndexing::Positional => QUBIT_EIGEN_INDICES,
        };
        let e0 = sol.energies[0];
        let mut energies_ghz = [0.0; 6];
        for (o, e) in energies_ghz.iter_mut().zip(&sol.energies) {
            *o = self.device.units.energy_to_ghz(e - e0);
        }
        Ok(SpectrumPoint { energies_ghz, qubit_indices })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    pub name: String,
    pub weight: f64,
    /// Unweighted value.
    pub value: f64,
}

impl LossTerm {
    pub fn weighted(&self) -> f64 {
        self.weight * self.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub terms: Vec<LossTerm>,
    pub spectrum: SpectrumPoint,
}

/// Loss terms for one spectrum. ζ uses the labeled qubit energies; the
/// remaining terms use the ascending energies E₀..E₅.
pub fn loss_terms(spec: &LossSpec, p: &SpectrumPoint) -> LossBreakdown {
    let e = &p.energies_ghz;
    let w = &spec.weights;
    let th = &spec.thresholds;
    let term = |name: &str, weight: f64, value: f64| LossTerm { name: name.into(), weight, value };
    let zeta = p.zz();
    let mut terms = vec![term("zz", 1.0, zeta * zeta)];
    match spec.config {
        LossConfig::Bare => {}
        LossConfig::I => {
            let (f1, f2) = (e[1] - e[0], e[2] - e[0]);
            let band = |f: f64| hinge(f, th.band.0) + hinge(th.band.1, f);
            terms.push(term("band", w.band, band(f1) + band(f2)));
            terms.push(term("detuning", w.detuning, hinge((f2 - f1).abs(), th.min_detuning)));
        }
        LossConfig::II => {
            terms.push(term("swap_resonance", w.swap_resonance, (e[2] - e[1]).powi(2)));
            terms.push(term("gap_43", w.upper_gap, hinge(e[4] - e[3], th.min_gap)));
            terms.push(term("gap_54", w.upper_gap, hinge(e[5] - e[4], th.min_gap)));
        }
        LossConfig::III => {
            let (d54, d43) = (e[5] - e[4], e[4] - e[3]);
            terms.push(term("degeneracy_54", w.cz_degeneracy, d54 * d54));
            terms.push(term("degeneracy_43", w.cz_degeneracy, d43 * d43));
            terms.push(term("degeneracy_diff", w.cz_degeneracy, (d54 - d43).powi(2)));
            terms.push(term("qubit_gap", w.qubit_gap, hinge(e[2] - e[1], th.min_gap)));
        }
    }
    LossBreakdown {
        total: terms.iter().map(LossTerm::weighted).sum(),
        terms,
        spectrum: *p,
    }
}

pub fn loss_value(model: &dyn SpectrumModel, spec: &LossSpec, v: &VoltageVector) -> Result<LossBreakdown> {
    Ok(loss_terms(spec, &model.evaluate(v)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageSearchOptions {
    /// Half-width of the search box around the initial vector, mV.
    pub box_mv: f64,
    /// Initial simplex edge, mV.
    pub step_mv: f64,
    pub restarts: usize,
    /// Stop a simplex when its loss spread falls below this.
    pub ftol: f64,
    /// Seeds the edge signs of restart simplices.
    #[serde(default)]
    pub seed: u64,
}

impl Default for VoltageSearchOptions {
    fn default() -> Self {
        VoltageSearchOptions {
            box_mv: 50.0,
            step_mv: 5.0,
            restarts: 3,
            ftol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub voltages: VoltageVector,
    pub loss: f64,
    /// Loss evaluations spent when this point was found.
    pub evaluation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub spec: LossSpec,
    pub initial: VoltageVector,
    /// Accepted improvements, loss strictly decreasing.
    pub iterates: Vec<Iterate>,
    pub best: VoltageVector,
    pub breakdown: LossBreakdown,
    pub evaluations: usize,
    pub budget: usize,
    pub budget_exhausted: bool,
    pub failed_evaluations: usize,
}

/// Simplex descent with restarts inside a box around `initial`. Points
/// outside the box or where the spectrum fails count as +∞. `budget` caps
/// loss evaluations; the best point's breakdown is evaluated once more on
/// top of it.
pub fn optimize_voltages(
    model: &dyn SpectrumModel,
    initial: &VoltageVector,
    spec: &LossSpec,
    budget: usize,
    opts: &VoltageSearchOptions,
) -> Result<OptimizationTrace> {
    spec.validate()?;
    if !(opts.box_mv > 0.0 && opts.step_mv > 0.0) {
        return Err(Error::invalid("box_mv and step_mv must be positive"));
    }
    let mut evaluations = 0usize;
    let mut failed = 0usize;
    let mut iterates: Vec<Iterate> = Vec::new();
    let mut best = (*initial, f64::INFINITY);
    let mut step = opts.step_mv.min(opts.box_mv);
    let mut round = 0;
    let mut converged = false;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while evaluations < budget && round <= opts.restarts {
        let start = best.0;
        let x0: Vec<f64> = (0..ELECTRODE_COUNT).map(|k| start[k] - initial[k]).collect();
        let so = SimplexOptions {
            ftol: opts.ftol,
            xtol: 1e-6,
            max_evals: budget - evaluations,
        };
        let before = best.1;
        let mut f = |x: &[f64]| -> Option<f64> {
            if x.iter().any(|d| d.abs() > opts.box_mv) {
                return None;
            }
            let mut v = *initial;
            for k in 0..ELECTRODE_COUNT {
                v[k] = initial[k] + x[k];
            }
            evaluations += 1;
            match loss_value(model, spec, &v) {
                Ok(b) if b.total.is_finite() => {
                    if b.total < best.1 {
                        best = (v, b.total);
                        iterates.push(Iterate { voltages: v, loss: b.total, evaluation: evaluations });
                    }
                    Some(b.total)
                }
                _ => {
                    failed += 1;
                    None
                }
            }
        };
        let steps: Vec<f64> = (0..ELECTRODE_COUNT)
            .map(|_| if round > 0 && rng.gen::<bool>() { -step } else { step })
            .collect();
        let res = nelder_mead(&mut f, &x0, &steps, &so);
        converged = res.converged;
        round += 1;
        // a restart that found nothing new ends the search
        if round > 1 && !(best.1 < before - opts.ftol) {
            break;
        }
        step *= 0.5;
    }
    let breakdown = loss_value(model, spec, &best.0)?;
    Ok(OptimizationTrace {
        spec: *spec,
        initial: *initial,
        iterates,
        best: best.0,
        breakdown,
        evaluations,
        budget,
        budget_exhausted: evaluations >= budget && !converged,
        failed_evaluations: failed,
    })
}

#[cfg(test)]
mod tests;
