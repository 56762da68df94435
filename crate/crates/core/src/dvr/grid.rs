use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of sinc-DVR points, in simulation length units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvrGrid {
    start: f64,
    spacing: f64,
    count: usize,
}

impl DvrGrid {
    pub fn new(start: f64, spacing: f64, count: usize) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        if count < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {count}")));
        }
        if !start.is_finite() {
            return Err(Error::invalid("grid start must be finite"));
        }
        Ok(DvrGrid {
            start,
            spacing,
            count,
        })
    }

    /// `count` points spanning the closed interval [lo, hi].
    pub fn spanning(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::invalid(format!("cannot span [{lo}, {hi}] with {count} points")));
        }
        DvrGrid::new(lo, (hi - lo) / (count - 1) as f64, count)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    pub fn last(&self) -> f64 {
        self.point(self.count - 1)
    }
}

/// Sinc-DVR matrix of -½ d²/dx² on `grid`.
pub fn kinetic_matrix(grid: &DvrGrid) -> DMatrix<f64> {
    let n = grid.count();
    let inv = 1.0 / (grid.spacing() * grid.spacing());
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            PI * PI / 6.0 * inv
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * inv / (d * d)
        }
    })
}
