//! The physical device: coupling profile, units and Coulomb parameters, plus
//! construction of the left/right DVR grids around the two qubit wells.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dvr::{DvrGrid, OperatorCache, TwoBodyBasis};
use crate::electrostatics::{surface_potential, CouplingProfile, UnitSystem, VoltageVector};
use crate::error::{Error, Result};

pub const DEFAULT_KAPPA: f64 = 2326.0;
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub profile: CouplingProfile,
    pub units: UnitSystem,
    pub kappa: f64,
    pub epsilon: f64,
}

impl Default for Device {
    fn default() -> Self {
        Device {
            profile: CouplingProfile::default(),
            units: UnitSystem::default(),
            kappa: DEFAULT_KAPPA,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Positions (µm) of the two qubit wells and the barrier between them,
/// with the harmonic length of each well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellGeometry {
    pub left_min_um: f64,
    pub right_min_um: f64,
    pub barrier_um: f64,
    pub left_length_um: f64,
    pub right_length_um: f64,
    pub left_curvature: f64,
    pub right_curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub points_left: usize,
    pub points_right: usize,
    pub harmonic_lengths: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            points_left: 32,
            points_right: 32,
            harmonic_lengths: 5.0,
        }
    }
}

impl GridOptions {
    pub fn square(points: usize) -> Self {
        GridOptions {
            points_left: points,
            points_right: points,
            ..Default::default()
        }
    }
}

const SCAN_SAMPLES: usize = 4000;

impl Device {
    pub fn validate(&self) -> Result<()> {
        self.units.validate()?;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid("kappa must be finite and non-negative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if let CouplingProfile::Analytic(layout) = &self.profile {
            layout.validate()?;
        }
        Ok(())
    }

    /// Potential energy (simulation units) at `x_um`.
    pub fn potential(&self, v: &VoltageVector, x_um: f64) -> Result<f64> {
        surface_potential(&self.profile, v, x_um, &self.units)
    }

    fn scan_window(&self) -> (f64, f64) {
        match &self.profile {
            CouplingProfile::Analytic(l) => {
                let pitch = (l.centers_um[6] - l.centers_um[0]) / 6.0;
                (l.centers_um[0] - pitch, l.centers_um[6] + pitch)
            }
            CouplingProfile::Tabulated(_) => self.profile.domain(),
        }
    }

    fn centre(&self) -> f64 {
        match &self.profile {
            CouplingProfile::Analytic(l) => 0.5 * (l.centers_um[0] + l.centers_um[6]),
            CouplingProfile::Tabulated(_) => {
                let (lo, hi) = self.profile.domain();
                0.5 * (lo + hi)
            }
        }
    }

    /// Finds the barrier maximum nearest the middle of the electrode array
    /// and the nearest minimum on each side of it.
    pub fn locate_wells(&self, v: &VoltageVector) -> Result<WellGeometry> {
        let (lo, hi) = self.scan_window();
        let h = (hi - lo) / SCAN_SAMPLES as f64;
        let xs: Vec<f64> = (0..=SCAN_SAMPLES).map(|i| lo + i as f64 * h).collect();
        let vs = xs.iter().map(|&x| self.potential(v, x)).collect::<Result<Vec<_>>>()?;

        let centre = self.centre();
        let barrier_idx = (1..SCAN_SAMPLES)
            .filter(|&i| vs[i] >= vs[i - 1] && vs[i] > vs[i + 1])
            .min_by(|&a, &b| (xs[a] - centre).abs().total_cmp(&(xs[b] - centre).abs()))
            .ok_or_else(|| Error::invalid("potential has no barrier between the wells"))?;
        let left_idx = (1..barrier_idx)
            .rev()
            .find(|&i| vs[i] <= vs[i - 1] && vs[i] < vs[i + 1])
            .ok_or_else(|| Error::invalid("no left well minimum found"))?;
        let right_idx = (barrier_idx + 1..SCAN_SAMPLES)
            .find(|&i| vs[i] < vs[i - 1] && vs[i] <= vs[i + 1])
            .ok_or_else(|| Error::invalid("no right well minimum found"))?;

        let f = |x: f64| self.potential(v, x);
        let barrier = golden(|x| f(x).map(|e| -e), xs[barrier_idx] - h, xs[barrier_idx] + h)?;
        let left = golden(f, xs[left_idx] - h, xs[left_idx] + h)?;
        let right = golden(f, xs[right_idx] - h, xs[right_idx] + h)?;

        let curvature = |x: f64| -> Result<f64> {
            let d = 1e-4;
            Ok((f(x + d)? - 2.0 * f(x)? + f(x - d)?) / (d * d))
        };
        let (kl, kr) = (curvature(left)?, curvature(right)?);
        if !(kl > 0.0 && kr > 0.0) {
            return Err(Error::invalid("well curvature is not positive"));
        }
        // ω = √k in simulation units; ℓ = ω^(-1/2)
        let length = |k_um: f64| {
            let l = self.units.length_unit_um;
            let k = k_um * l * l;
            k.powf(-0.25) * l
        };
        Ok(WellGeometry {
            left_min_um: left,
            right_min_um: right,
            barrier_um: barrier,
            left_length_um: length(kl),
            right_length_um: length(kr),
            left_curvature: kl,
            right_curvature: kr,
        })
    }

    /// Grids spanning each idle well ± `harmonic_lengths` harmonic lengths,
    /// widened to cover the wells of every voltage vector in `also`, and
    /// split at the idle barrier.
    pub fn build_basis(
        &self,
        idle: &VoltageVector,
        also: &[VoltageVector],
        opts: &GridOptions,
    ) -> Result<TwoBodyBasis> {
        if !(opts.harmonic_lengths > 0.0) {
            return Err(Error::invalid("harmonic_lengths must be positive"));
        }
        let base = self.locate_wells(idle)?;
        let nh = opts.harmonic_lengths;
        let (mut l_lo, mut l_hi) = (
            base.left_min_um - nh * base.left_length_um,
            base.left_min_um + nh * base.left_length_um,
        );
        let (mut r_lo, mut r_hi) = (
            base.right_min_um - nh * base.right_length_um,
            base.right_min_um + nh * base.right_length_um,
        );
        for v in also {
            let w = self.locate_wells(v)?;
            l_lo = l_lo.min(w.left_min_um - nh * w.left_length_um);
            l_hi = l_hi.max(w.left_min_um + nh * w.left_length_um);
            r_lo = r_lo.min(w.right_min_um - nh * w.right_length_um);
            r_hi = r_hi.max(w.right_min_um + nh * w.right_length_um);
        }
        let split = base.barrier_um;
        let gap = 1e-9;
        l_hi = l_hi.min(split - gap);
        r_lo = r_lo.max(split + gap);
        let (d_lo, d_hi) = self.profile.domain();
        l_lo = l_lo.max(d_lo);
        r_hi = r_hi.min(d_hi);
        let to = |x: f64| self.units.um_to_length(x);
        let left = DvrGrid::spanning(to(l_lo), to(l_hi), opts.points_left)?;
        let right = DvrGrid::spanning(to(r_lo), to(r_hi), opts.points_right)?;
        TwoBodyBasis::new(left, right)
    }

    pub fn operators(&self, basis: Arc<TwoBodyBasis>, v: &VoltageVector) -> Result<OperatorCache> {
        OperatorCache::build(basis, &self.profile, &self.units, self.kappa, self.epsilon, v)
    }
}

fn golden(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > 1e-11 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
