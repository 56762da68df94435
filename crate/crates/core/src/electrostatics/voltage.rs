use std::fmt::Write as _;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use super::profile::{CouplingProfile, ELECTRODE_COUNT};
use super::units::UnitSystem;
use crate::error::{Error, Result};

/// Seven electrode voltages in millivolts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoltageVector(pub [f64; ELECTRODE_COUNT]);

impl VoltageVector {
    pub fn new(mv: [f64; ELECTRODE_COUNT]) -> Result<Self> {
        if mv.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("voltages must be finite"));
        }
        Ok(VoltageVector(mv))
    }

    pub fn from_slice(mv: &[f64]) -> Result<Self> {
        let arr: [f64; ELECTRODE_COUNT] = mv
            .try_into()
            .map_err(|_| Error::invalid(format!("expected 7 voltages, got {}", mv.len())))?;
        Self::new(arr)
    }

    pub fn as_array(&self) -> &[f64; ELECTRODE_COUNT] {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &VoltageVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for VoltageVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for VoltageVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for VoltageVector {
    type Output = VoltageVector;
    fn add(mut self, rhs: VoltageVector) -> VoltageVector {
        for k in 0..ELECTRODE_COUNT {
            self.0[k] += rhs.0[k];
        }
        self
    }
}

impl Sub for VoltageVector {
    type Output = VoltageVector;
    fn sub(mut self, rhs: VoltageVector) -> VoltageVector {
        for k in 0..ELECTRODE_COUNT {
            self.0[k] -= rhs.0[k];
        }
        self
    }
}

impl Mul<VoltageVector> for f64 {
    type Output = VoltageVector;
    fn mul(self, mut rhs: VoltageVector) -> VoltageVector {
        for v in rhs.0.iter_mut() {
            *v *= self;
        }
        rhs
    }
}

/// Idle configuration of the ZZ-suppressed device (mV).
pub const TABLE_I_IDLE: VoltageVector =
    VoltageVector([389.50, 200.70, 400.36, -290.61, 398.59, 200.15, 381.40]);
/// SWAP-type interaction configuration (mV).
pub const TABLE_I_SWAP: VoltageVector =
    VoltageVector([388.68, 206.69, 404.88, -288.37, 401.04, 192.98, 382.57]);
/// CZ-type interaction configuration (mV).
pub const TABLE_I_CZ: VoltageVector =
    VoltageVector([388.17, 194.01, 401.87, -289.10, 398.95, 198.82, 382.44]);

/// λ_max used to stop the β-family function at the SWAP configuration.
pub const LAMBDA_BETA_SWAP: f64 = 0.46;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionFamily {
    /// Single straight line from the idle to the CZ configuration; the SWAP
    /// configuration is reached part-way along it.
    Beta,
    /// Separate straight lines from idle to each interaction configuration.
    Zeta,
    /// No family constraint on `lambda_max` (static evolution, experiments).
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetConfig {
    II,
    III,
}

/// Linear interpolation V(λ) = (1-λ)·start + λ·end, used for λ ∈ [0, λ_max].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageFunction {
    pub start: VoltageVector,
    pub end: VoltageVector,
    pub lambda_max: f64,
    pub family: FunctionFamily,
    pub target: TargetConfig,
}

impl VoltageFunction {
    pub fn new(
        start: VoltageVector,
        end: VoltageVector,
        lambda_max: f64,
        family: FunctionFamily,
        target: TargetConfig,
    ) -> Result<Self> {
        let f = VoltageFunction {
            start,
            end,
            lambda_max,
            family,
            target,
        };
        f.validate()?;
        Ok(f)
    }

    /// β-family function; λ_max follows from the target.
    pub fn beta(idle: VoltageVector, cz: VoltageVector, target: TargetConfig) -> Self {
        let lambda_max = match target {
            TargetConfig::II => LAMBDA_BETA_SWAP,
            TargetConfig::III => 1.0,
        };
        VoltageFunction {
            start: idle,
            end: cz,
            lambda_max,
            family: FunctionFamily::Beta,
            target,
        }
    }

    pub fn zeta(idle: VoltageVector, interaction: VoltageVector, target: TargetConfig) -> Self {
        VoltageFunction {
            start: idle,
            end: interaction,
            lambda_max: 1.0,
            family: FunctionFamily::Zeta,
            target,
        }
    }

    /// Constant idle voltages (λ_max = 0).
    pub fn idle(idle: VoltageVector) -> Self {
        VoltageFunction {
            start: idle,
            end: idle,
            lambda_max: 0.0,
            family: FunctionFamily::Custom,
            target: TargetConfig::II,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lm = self.lambda_max;
        match self.family {
            FunctionFamily::Beta if self.target == TargetConfig::II && lm != LAMBDA_BETA_SWAP => Err(
                Error::invalid(format!("beta family targeting II needs lambda_max = 0.46, got {lm}")),
            ),
            FunctionFamily::Zeta if lm != 1.0 => Err(Error::invalid(format!(
                "zeta family needs lambda_max = 1, got {lm}"
            ))),
            FunctionFamily::Beta | FunctionFamily::Zeta if !(lm > 0.0 && lm <= 1.0) => {
                Err(Error::invalid(format!("lambda_max must lie in (0, 1], got {lm}")))
            }
            FunctionFamily::Custom if !(0.0..=1.0).contains(&lm) => Err(Error::invalid(format!(
                "lambda_max must lie in [0, 1], got {lm}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn voltage_at(&self, lambda: f64) -> Result<VoltageVector> {
        if !(lambda >= 0.0 && lambda <= self.lambda_max.max(0.0) + 1e-12) {
            return Err(Error::invalid(format!(
                "lambda = {lambda} outside [0, {}]",
                self.lambda_max
            )));
        }
        Ok((1.0 - lambda) * self.start + lambda * self.end)
    }
}

/// Potential energy of one electron at `x_um`, in simulation energy units:
/// v(x) = -energy_per_mv · Σ_k α_k(x) V_k.
pub fn surface_potential(
    profile: &CouplingProfile,
    v: &VoltageVector,
    x_um: f64,
    units: &UnitSystem,
) -> Result<f64> {
    let a = profile.alphas(x_um)?;
    let s: f64 = a.iter().zip(v.0.iter()).map(|(a, v)| a * v).sum();
    Ok(-units.energy_per_mv * s)
}

/// Named voltage vectors in the `electrode,<name>...` CSV layout, one row
/// per electrode (1-based), values in mV.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTable {
    pub names: Vec<String>,
    pub vectors: Vec<VoltageVector>,
}

impl VoltageTable {
    pub fn single(v: VoltageVector) -> Self {
        VoltageTable {
            names: vec!["mV".into()],
            vectors: vec![v],
        }
    }

    pub fn table_i() -> Self {
        VoltageTable {
            names: vec!["I".into(), "II".into(), "III".into()],
            vectors: vec![TABLE_I_IDLE, TABLE_I_SWAP, TABLE_I_CZ],
        }
    }

    pub fn get(&self, name: &str) -> Option<&VoltageVector> {
        self.names.iter().position(|n| n == name).map(|i| &self.vectors[i])
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or("empty file")?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        if header.len() < 2 || header[0] != "electrode" {
            return Err("header must start with `electrode,`".into());
        }
        let names = header[1..].to_vec();
        let mut cols = vec![[f64::NAN; ELECTRODE_COUNT]; names.len()];
        let mut seen = [false; ELECTRODE_COUNT];
        for line in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != header.len() {
                return Err(format!("row `{line}` has {} fields, expected {}", f.len(), header.len()));
            }
            let e: usize = f[0].parse().map_err(|_| format!("bad electrode index `{}`", f[0]))?;
            if !(1..=ELECTRODE_COUNT).contains(&e) || seen[e - 1] {
                return Err(format!("electrode index {e} out of range or repeated"));
            }
            seen[e - 1] = true;
            for (c, s) in f[1..].iter().enumerate() {
                let v: f64 = s.parse().map_err(|_| format!("bad voltage `{s}`"))?;
                if !v.is_finite() {
                    return Err(format!("non-finite voltage `{s}`"));
                }
                cols[c][e - 1] = v;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("all seven electrodes must be listed".into());
        }
        Ok(VoltageTable {
            names,
            vectors: cols.into_iter().map(VoltageVector).collect(),
        })
    }

    /// Shortest round-trip float formatting, so parse(to_csv(t)) == t bit for bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("electrode");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for e in 0..ELECTRODE_COUNT {
            let _ = write!(out, "{}", e + 1);
            for v in &self.vectors {
                let _ = write!(out, ",{}", v[e]);
            }
            out.push('\n');
        }
        out
    }
}
