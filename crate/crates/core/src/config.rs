//! TOML run configuration. Every section is optional and falls back to the
//! defaults below; unknown keys are rejected. The hash of the parsed
//! configuration (after command-line overrides) stamps every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::{Device, GridOptions};
use crate::electrostatics::{
    CouplingProfile, ElectrodeLayout, FunctionFamily, RampShape, TabulatedProfile, TargetConfig, UnitSystem, VoltageFunction,
    VoltageTable, VoltageVector, ELECTRODE_COUNT,
};
use crate::error::{Error, Result};
use crate::gate::GateKind;
use crate::pipeline::QubitIndexing;
use crate::propagation::DEFAULT_DT_NS;
use crate::search::{Strategy, SweepSpec};
use crate::voltage_opt::{LossConfig, LossSpec, LossThresholds, LossWeights, VoltageSearchOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub device: DeviceConfig,
    #[serde(default)]
    pub grid: GridOptions,
    #[serde(default)]
    pub voltages: VoltagesConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub propagate: PropagateConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
    #[serde(default)]
    pub volt_opt: VoltOptConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            device: DeviceConfig::default(),
            grid: GridOptions::default(),
            voltages: VoltagesConfig::default(),
            numerics: NumericsConfig::default(),
            spectrum: SpectrumConfig::default(),
            propagate: PropagateConfig::default(),
            search: SearchConfig::default(),
            sensitivity: SensitivityConfig::default(),
            volt_opt: VoltOptConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub kappa: f64,
    pub epsilon: f64,
    pub units: UnitSystem,
    pub profile: ProfileConfig,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let d = Device::default();
        DeviceConfig {
            kappa: d.kappa,
            epsilon: d.epsilon,
            units: d.units,
            profile: ProfileConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSource {
    #[default]
    Analytic,
    Tabulated,
}

/// Strip electrodes (`analytic`) or an `x,alpha1..alpha7` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub source: ProfileSource,
    pub pitch_um: f64,
    pub width_um: f64,
    pub depth_um: f64,
    /// Overrides the uniform pitch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers_um: Option<[f64; ELECTRODE_COUNT]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            source: ProfileSource::Analytic,
            pitch_um: 0.4,
            width_um: 0.2,
            depth_um: 0.2,
            centers_um: None,
            csv: None,
        }
    }
}

/// Named voltage vectors. Lookup order: `vectors`, then the `table` CSV,
/// then the built-in I/II/III columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoltagesConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    pub vectors: BTreeMap<String, VoltageVector>,
    pub function: FunctionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionConfig {
    pub family: FunctionFamily,
    pub target: TargetConfig,
    pub start: String,
    pub end: String,
    /// Only read for the custom family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
}

impl Default for FunctionConfig {
    fn default() -> Self {
        FunctionConfig {
            family: FunctionFamily::Zeta,
            target: TargetConfig::II,
            start: "I".into(),
            end: "II".into(),
            lambda_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub dt_ns: f64,
    pub indexing: QubitIndexing,
    pub shape: RampShape,
    pub seed: u64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            dt_ns: DEFAULT_DT_NS,
            indexing: QubitIndexing::Labeled,
            shape: RampShape::Staged,
            seed: 0,
        }
    }
}

/// An explicit list, or `{ start, stop, step }` with `stop` included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueList {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl ValueList {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            ValueList::Values(ref v) => Ok(v.clone()),
            ValueList::Range { start, stop, step } => {
                if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
                    return Err(Error::Config(format!("bad range {start}..{stop} step {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| start + k as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub lambdas: ValueList,
    /// Switch off the Coulomb term.
    pub kappa_zero: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            lambdas: ValueList::Values(vec![0.0]),
            kappa_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagateConfig {
    pub target: GateKind,
    pub t_ramp_ns: f64,
    pub t_hold_ns: f64,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        PropagateConfig {
            target: GateKind::SqrtIswap,
            t_ramp_ns: 1.41,
            t_hold_ns: 0.1,
        }
    }
}

/// Missing ramp/hold lists take the preset ranges for the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub target: GateKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp_ns: Option<ValueList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hold_ns: Option<ValueList>,
    pub strategy: Strategy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            target: GateKind::SqrtIswap,
            ramp_ns: None,
            hold_ns: None,
            strategy: Strategy::Adjoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    /// (t_ramp, t_hold) in ns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_ns: Option<[f64; 2]>,
    pub window_ns: f64,
    pub resolution_ns: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            center_ns: None,
            window_ns: 0.1,
            resolution_ns: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoltOptConfig {
    pub kind: LossConfig,
    /// Name of the starting vector; defaults to the configuration's own
    /// column (I, II or III).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    pub budget: usize,
    pub box_mv: f64,
    pub step_mv: f64,
    pub restarts: usize,
    pub weights: LossWeights,
    pub thresholds: LossThresholds,
}

impl Default for VoltOptConfig {
    fn default() -> Self {
        let o = VoltageSearchOptions::default();
        VoltOptConfig {
            kind: LossConfig::I,
            initial: None,
            budget: 1500,
            box_mv: o.box_mv,
            step_mv: o.step_mv,
            restarts: o.restarts,
            weights: LossWeights::default(),
            thresholds: LossThresholds::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::parse(&text, &base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.numerics.dt_ns.is_finite() && self.numerics.dt_ns > 0.0) {
            return Err(Error::Config("numerics.dt_ns must be positive".into()));
        }
        if self.grid.points_left < 2 || self.grid.points_right < 2 || !(self.grid.harmonic_lengths > 0.0) {
            return Err(Error::Config("grid needs at least 2 points per well and positive harmonic_lengths".into()));
        }
        if self.device.profile.source == ProfileSource::Tabulated && self.device.profile.csv.is_none() {
            return Err(Error::Config("device.profile.source = \"tabulated\" needs device.profile.csv".into()));
        }
        Ok(())
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Files the configuration reads besides itself.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        if let (ProfileSource::Tabulated, Some(p)) = (self.device.profile.source, &self.device.profile.csv) {
            out.push(self.resolve(p));
        }
        if let Some(p) = &self.voltages.table {
            out.push(self.resolve(p));
        }
        out
    }

    pub fn device(&self) -> Result<Device> {
        let p = &self.device.profile;
        let profile = match p.source {
            ProfileSource::Analytic => {
                let mut layout = ElectrodeLayout::uniform(p.pitch_um, p.width_um, p.depth_um);
                if let Some(c) = p.centers_um {
                    layout.centers_um = c;
                }
                layout.validate()?;
                CouplingProfile::Analytic(layout)
            }
            ProfileSource::Tabulated => {
                let path = self.resolve(p.csv.as_deref().expect("validated"));
                CouplingProfile::Tabulated(TabulatedProfile::read_csv(&path)?)
            }
        };
        let d = Device {
            profile,
            units: self.device.units,
            kappa: self.device.kappa,
            epsilon: self.device.epsilon,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn voltage_table(&self) -> Result<Option<VoltageTable>> {
        let Some(p) = &self.voltages.table else { return Ok(None) };
        let path = self.resolve(p);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        VoltageTable::parse_csv(&text).map(Some).map_err(|msg| Error::Parse { path, msg })
    }

    pub fn vector(&self, name: &str) -> Result<VoltageVector> {
        if let Some(v) = self.voltages.vectors.get(name) {
            return VoltageVector::new(v.0);
        }
        if let Some(t) = self.voltage_table()? {
            if let Some(v) = t.get(name) {
                return Ok(*v);
            }
        }
        VoltageTable::table_i()
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("no voltage vector named `{name}`")))
    }

    pub fn voltage_function(&self) -> Result<VoltageFunction> {
        let f = &self.voltages.function;
        let start = self.vector(&f.start)?;
        let end = self.vector(&f.end)?;
        let vf = match f.family {
            FunctionFamily::Beta => VoltageFunction::beta(start, end, f.target),
            FunctionFamily::Zeta => VoltageFunction::zeta(start, end, f.target),
            FunctionFamily::Custom => VoltageFunction {
                start,
                end,
                lambda_max: f.lambda_max.unwrap_or(1.0),
                family: FunctionFamily::Custom,
                target: f.target,
            },
        };
        if f.family != FunctionFamily::Custom && f.lambda_max.is_some() {
            return Err(Error::Config("voltages.function.lambda_max is only read for the custom family".into()));
        }
        vf.validate()?;
        Ok(vf)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let vf = self.voltage_function()?;
        let dt = self.numerics.dt_ns;
        let mut spec = match self.search.target {
            GateKind::Cz => SweepSpec::cz(vf, dt),
            _ => SweepSpec::sqrt_iswap(vf, dt),
        };
        spec.target = self.search.target;
        if let Some(r) = &self.search.ramp_ns {
            spec.ramp_values = r.values()?;
        }
        if let Some(h) = &self.search.hold_ns {
            spec.hold_values = h.values()?;
        }
        spec.shape = self.numerics.shape;
        spec.strategy = self.search.strategy;
        spec.validate()?;
        Ok(spec)
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            config: self.volt_opt.kind,
            weights: self.volt_opt.weights,
            thresholds: self.volt_opt.thresholds,
        }
    }

    pub fn initial_vector_name(&self, kind: LossConfig) -> String {
        self.volt_opt.initial.clone().unwrap_or_else(|| {
            match kind {
                LossConfig::Bare | LossConfig::I => "I",
                LossConfig::II => "II",
                LossConfig::III => "III",
            }
            .into()
        })
    }

    pub fn search_options(&self) -> VoltageSearchOptions {
        VoltageSearchOptions {
            box_mv: self.volt_opt.box_mv,
            step_mv: self.volt_opt.step_mv,
            restarts: self.volt_opt.restarts,
            seed: self.numerics.seed,
            ..Default::default()
        }
    }
}
