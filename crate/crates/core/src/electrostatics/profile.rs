use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ELECTRODE_COUNT: usize = 7;

/// Geometry of seven finite-width strip electrodes a depth `depth_um`
/// below the electron plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeLayout {
    pub centers_um: [f64; ELECTRODE_COUNT],
    pub widths_um: [f64; ELECTRODE_COUNT],
    pub depth_um: f64,
}

impl Default for ElectrodeLayout {
    fn default() -> Self {
        ElectrodeLayout::uniform(0.4, 0.2, 0.2)
    }
}

impl ElectrodeLayout {
    /// Evenly spaced electrodes centred on the origin.
    pub fn uniform(pitch_um: f64, width_um: f64, depth_um: f64) -> Self {
        let mut centers_um = [0.0; ELECTRODE_COUNT];
        for (k, c) in centers_um.iter_mut().enumerate() {
            *c = (k as f64 - 3.0) * pitch_um;
        }
        ElectrodeLayout {
            centers_um,
            widths_um: [width_um; ELECTRODE_COUNT],
            depth_um,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.depth_um > 0.0) {
            return Err(Error::invalid("electrode depth must be positive"));
        }
        if self.widths_um.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("electrode widths must be positive"));
        }
        if self.centers_um.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::invalid("electrode centres must be strictly ascending"));
        }
        Ok(())
    }

    /// Coupling of an infinitely long strip: the angle it subtends, over π.
    fn alpha(&self, k: usize, x_um: f64) -> f64 {
        let (c, w, d) = (self.centers_um[k], self.widths_um[k], self.depth_um);
        ((x_um - c + 0.5 * w) / d).atan() / PI - ((x_um - c - 0.5 * w) / d).atan() / PI
    }
}

/// Per-electrode coupling coefficients α_k(x).
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingProfile {
    Analytic(ElectrodeLayout),
    Tabulated(TabulatedProfile),
}

impl Default for CouplingProfile {
    fn default() -> Self {
        CouplingProfile::Analytic(ElectrodeLayout::default())
    }
}

impl CouplingProfile {
    /// Coupling of electrode `k` (0-based) at position `x_um`.
    pub fn alpha(&self, k: usize, x_um: f64) -> Result<f64> {
        if k >= ELECTRODE_COUNT {
            return Err(Error::ElectrodeIndex(k));
        }
        match self {
            CouplingProfile::Analytic(layout) => Ok(layout.alpha(k, x_um)),
            CouplingProfile::Tabulated(t) => t.eval(k, x_um),
        }
    }

    pub fn alphas(&self, x_um: f64) -> Result<[f64; ELECTRODE_COUNT]> {
        let mut out = [0.0; ELECTRODE_COUNT];
        for (k, a) in out.iter_mut().enumerate() {
            *a = self.alpha(k, x_um)?;
        }
        Ok(out)
    }

    /// Closed interval on which the profile may be evaluated.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            CouplingProfile::Analytic(_) => (f64::NEG_INFINITY, f64::INFINITY),
            CouplingProfile::Tabulated(t) => (t.x[0], t.x[t.x.len() - 1]),
        }
    }
}

/// Coupling coefficients sampled on an ascending grid, interpolated with a
/// monotone piecewise-cubic Hermite scheme (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    x: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
}

impl TabulatedProfile {
    pub fn new(x: Vec<f64>, alpha: Vec<Vec<f64>>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::invalid("tabulated profile needs at least two samples"));
        }
        if alpha.len() != ELECTRODE_COUNT || alpha.iter().any(|a| a.len() != x.len()) {
            return Err(Error::invalid("tabulated profile needs seven columns of equal length"));
        }
        if x.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::invalid("tabulated x must be strictly ascending"));
        }
        if x.iter().chain(alpha.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated profile contains non-finite values"));
        }
        let slope = alpha.iter().map(|a| pchip_slopes(&x, a)).collect();
        Ok(TabulatedProfile { x, alpha, slope })
    }

    /// Samples another profile on `x` (useful for round-trip checks).
    pub fn sample(profile: &CouplingProfile, x: Vec<f64>) -> Result<Self> {
        let mut alpha = vec![Vec::with_capacity(x.len()); ELECTRODE_COUNT];
        for &xi in &x {
            for (k, col) in alpha.iter_mut().enumerate() {
                col.push(profile.alpha(k, xi)?);
            }
        }
        TabulatedProfile::new(x, alpha)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.alpha[k]
    }

    fn eval(&self, k: usize, xq: f64) -> Result<f64> {
        let (lo, hi) = (self.x[0], self.x[self.x.len() - 1]);
        if !(xq >= lo && xq <= hi) {
            return Err(Error::OutOfDomain { x: xq, lo, hi });
        }
        let i = match self.x.partition_point(|&v| v <= xq) {
            0 => 0,
            p if p >= self.x.len() => self.x.len() - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let s = (xq - x0) / h;
        let (y0, y1) = (self.alpha[k][i], self.alpha[k][i + 1]);
        let (d0, d1) = (self.slope[k][i], self.slope[k][i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1;
        Ok(y.clamp(0.0, 1.0))
    }

    /// Reads the `x,alpha1,...,alpha7` CSV format (x in µm).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty file")?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let expected: Vec<String> = std::iter::once("x".to_string())
            .chain((1..=ELECTRODE_COUNT).map(|k| format!("alpha{k}")))
            .collect();
        if cols != expected {
            return Err(format!("header must be `{}`", expected.join(",")));
        }
        let mut x = Vec::new();
        let mut alpha = vec![Vec::new(); ELECTRODE_COUNT];
        for (n, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("row {}: {e}", n + 2))?;
            if vals.len() != ELECTRODE_COUNT + 1 {
                return Err(format!("row {}: expected 8 fields, found {}", n + 2, vals.len()));
            }
            x.push(vals[0]);
            for k in 0..ELECTRODE_COUNT {
                alpha[k].push(vals[k + 1]);
            }
        }
        TabulatedProfile::new(x, alpha).map_err(|e| e.to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,alpha1,alpha2,alpha3,alpha4,alpha5,alpha6,alpha7\n");
        for (i, xi) in self.x.iter().enumerate() {
            out.push_str(&format!("{xi:?}"));
            for k in 0..ELECTRODE_COUNT {
                out.push_str(&format!(",{:?}", self.alpha[k][i]));
            }
            out.push('\n');
        }
        out
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_end(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}
