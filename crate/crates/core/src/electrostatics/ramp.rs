use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// erf(2): the rise of a ramp of width 4√2σ covers ±2 in erf argument.
pub const ERF_TWO: f64 = 0.995_322_265_018_952_7;

/// How λ(t) is evaluated along a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampShape {
    /// Rise, hold and fall stages evaluated separately. The rise is the
    /// erf step rescaled to run from exactly 0 to exactly λ_max over
    /// t_ramp, the hold is flat at λ_max, and the fall mirrors the rise.
    /// Differs from `Exact` by at most (1 - erf 2)/2 · λ_max ≈ 2.3e-3 λ_max,
    /// and makes every hold stage share one Hamiltonian.
    #[default]
    Staged,
    /// The difference-of-erf pulse, evaluated literally.
    Exact,
}

/// Timing of one gate: ramp up over `t_ramp`, hold for `t_hold`, ramp down.
/// All times in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub t_ramp: f64,
    pub t_hold: f64,
    pub sigma: f64,
    pub t_gate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Rise,
    Hold,
    Fall,
}

impl RampSchedule {
    pub fn new(t_ramp: f64, t_hold: f64) -> Result<Self> {
        if !(t_ramp.is_finite() && t_ramp > 0.0) {
            return Err(Error::invalid(format!("t_ramp must be positive, got {t_ramp}")));
        }
        if !(t_hold.is_finite() && t_hold >= 0.0) {
            return Err(Error::invalid(format!("t_hold must be non-negative, got {t_hold}")));
        }
        Ok(RampSchedule {
            t_ramp,
            t_hold,
            sigma: t_ramp / (4.0 * std::f64::consts::SQRT_2),
            t_gate: t_hold + 2.0 * t_ramp,
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.t_gate) {
            return Err(Error::invalid(format!(
                "t = {t} ns outside [0, {}]",
                self.t_gate
            )));
        }
        Ok(())
    }

    /// The literal difference-of-erf pulse.
    pub fn lambda_at(&self, lambda_max: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let s = std::f64::consts::SQRT_2 * self.sigma;
        let r = self.t_ramp;
        let a = libm::erf((t - 0.5 * r) / s);
        let b = libm::erf((t - self.t_gate + 0.5 * r) / s);
        Ok(0.5 * lambda_max * (a - b))
    }

    /// The staged pulse (see [`RampShape::Staged`]).
    pub fn staged_lambda_at(&self, lambda_max: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let rise = |u: f64| {
            let s = std::f64::consts::SQRT_2 * self.sigma;
            let e = libm::erf((u - 0.5 * self.t_ramp) / s);
            lambda_max * (e + ERF_TWO) / (2.0 * ERF_TWO)
        };
        Ok(match self.stage_of(t) {
            Stage::Rise => rise(t),
            Stage::Hold => lambda_max,
            Stage::Fall => rise(self.t_gate - t),
        })
    }

    pub fn lambda(&self, shape: RampShape, lambda_max: f64, t: f64) -> Result<f64> {
        match shape {
            RampShape::Staged => self.staged_lambda_at(lambda_max, t),
            RampShape::Exact => self.lambda_at(lambda_max, t),
        }
    }

    pub fn stage_of(&self, t: f64) -> Stage {
        if t < self.t_ramp {
            Stage::Rise
        } else if t <= self.t_ramp + self.t_hold {
            Stage::Hold
        } else {
            Stage::Fall
        }
    }

    /// Start times of the three stages: 0, t_ramp, t_ramp + t_hold.
    pub fn stage_bounds(&self) -> [f64; 4] {
        [0.0, self.t_ramp, self.t_ramp + self.t_hold, self.t_gate]
    }
}
