use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::metrics::{FidelityReport, GateKind, GateMatrix, RotationAngles};
use crate::error::{Error, Result};

/// (modulus, phase/π), the form the gate matrices are usually printed in.
pub type PolarEntry = [f64; 2];

/// JSON form of a gate matrix. `entries` is authoritative on import;
/// `polar` is written for reading convenience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateJson {
    pub basis: [String; 4],
    pub entries: [[[f64; 2]; 4]; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<[[PolarEntry; 4]; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<GateKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<RotationAngles>,
}

impl GateJson {
    pub fn from_gate(g: &GateMatrix) -> Self {
        let mut entries = [[[0.0; 2]; 4]; 4];
        let mut polar = [[[0.0; 2]; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let c = g.get(i, j);
                entries[i][j] = [c.re, c.im];
                polar[i][j] = [c.norm(), c.arg() / PI];
            }
        }
        GateJson {
            basis: ["00", "01", "10", "11"].map(String::from),
            entries,
            polar: Some(polar),
            target: None,
            fidelity: None,
            swap_error: None,
            leakage_error: None,
            angles: None,
        }
    }

    pub fn from_report(report: &FidelityReport, target: GateKind) -> Self {
        GateJson {
            target: Some(target),
            fidelity: Some(report.fidelity),
            swap_error: Some(report.swap_error),
            leakage_error: Some(report.leakage_error),
            angles: Some(report.angles),
            ..GateJson::from_gate(report.gate())
        }
    }

    pub fn gate(&self) -> Result<GateMatrix> {
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let [re, im] = self.entries[i][j];
                if !(re.is_finite() && im.is_finite()) {
                    return Err(Error::invalid(format!("entry ({i},{j}) is not finite")));
                }
                m[(i, j)] = Complex64::new(re, im);
            }
        }
        Ok(GateMatrix(m))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gate JSON is always serializable")
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("line {}, column {}: {e}", e.line(), e.column()))
    }
}
