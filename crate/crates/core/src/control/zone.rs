use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desired zone, control target zone and output constraint set, all boxes
/// around per-branch centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub center: Vec<f64>,
    /// Half-width of the desired zone, m.
    pub half_width: f64,
    /// Target zone half-width as a fraction of `half_width`.
    pub contraction: f64,
    /// Half-width of the hard output constraint set, m.
    pub output_band: f64,
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LevelBox {
    fn around(center: &[f64], half: f64) -> Self {
        Self {
            lower: center.iter().map(|c| c - half).collect(),
            upper: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| v >= lo && v <= hi)
    }

    /// Per-coordinate distance to the box (zero inside).
    pub fn distances(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, lo), hi)| (lo - v).max(v - hi).max(0.0))
            .collect()
    }

    /// 1-norm distance to the box.
    pub fn l1_distance(&self, y: &[f64]) -> f64 {
        self.distances(y).iter().sum()
    }
}

impl ZoneSpec {
    pub fn new(center: Vec<f64>, half_width: f64, contraction: f64, output_band: f64) -> Result<Self> {
        let zone = Self { center, half_width, contraction, output_band };
        zone.validate()?;
        Ok(zone)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.contraction) {
            return Err(Error::config(format!("zone contraction {} outside [0, 1]", self.contraction)));
        }
        if !(self.half_width > 0.0) || self.output_band < self.half_width {
            return Err(Error::config("zone half-width must be positive and inside the output band"));
        }
        Ok(())
    }

    pub fn with_contraction(&self, contraction: f64) -> Self {
        Self { contraction, ..self.clone() }
    }

    pub fn desired(&self) -> LevelBox {
        LevelBox::around(&self.center, self.half_width)
    }

    pub fn target(&self) -> LevelBox {
        LevelBox::around(&self.center, self.contraction * self.half_width)
    }

    pub fn output_set(&self) -> LevelBox {
        LevelBox::around(&self.center, self.output_band)
    }
}
