use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recorded input/output (and optionally disturbance) sequences, one entry
/// per sampling instant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryData {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    #[serde(default)]
    pub disturbances: Vec<Vec<f64>>,
}

impl TrajectoryData {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        let data = Self { inputs, outputs, disturbances: Vec::new() };
        data.validate()?;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.outputs.len() {
            return Err(Error::dims(format!(
                "{} input samples but {} output samples",
                self.inputs.len(),
                self.outputs.len()
            )));
        }
        if !self.disturbances.is_empty() && self.disturbances.len() != self.inputs.len() {
            return Err(Error::dims("disturbance log length differs from input length"));
        }
        let (m, p) = (self.input_dim(), self.output_dim());
        if self.inputs.iter().any(|u| u.len() != m) || self.outputs.iter().any(|y| y.len() != p) {
            return Err(Error::dims("ragged trajectory rows"));
        }
        Ok(())
    }

    /// Write as CSV with columns `t, u_1..u_m, y_1..y_p[, d_1..d_q]`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let q = self.disturbances.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.input_dim()).map(|i| format!("u_{i}")));
        header.extend((1..=self.output_dim()).map(|i| format!("y_{i}")));
        header.extend((1..=q).map(|i| format!("d_{i}")));
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![t.to_string()];
            row.extend(self.inputs[t].iter().map(f64::to_string));
            row.extend(self.outputs[t].iter().map(f64::to_string));
            if q > 0 {
                row.extend(self.disturbances[t].iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let kind = |prefix: &str| -> Vec<usize> {
            header.iter().enumerate().filter(|(_, h)| h.starts_with(prefix)).map(|(i, _)| i).collect()
        };
        let (ui, yi, di) = (kind("u_"), kind("y_"), kind("d_"));
        if ui.is_empty() || yi.is_empty() {
            return Err(Error::dims("trajectory CSV needs u_* and y_* columns"));
        }
        let mut data = TrajectoryData::default();
        for record in r.records() {
            let record = record?;
            let parse = |cols: &[usize]| -> Result<Vec<f64>> {
                cols.iter()
                    .map(|&c| {
                        record[c]
                            .trim()
                            .parse::<f64>()
                            .map_err(|e| Error::dims(format!("bad number '{}': {e}", &record[c])))
                    })
                    .collect()
            };
            data.inputs.push(parse(&ui)?);
            data.outputs.push(parse(&yi)?);
            if !di.is_empty() {
                data.disturbances.push(parse(&di)?);
            }
        }
        data.validate()?;
        Ok(data)
    }
}

/// Per-channel affine normalization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ChannelScaling {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Mean and standard deviation per channel; constant channels get scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = s.sqrt();
            if *s < 1e-9 {
                *s = 1.0;
            }
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| m + v * s).collect()
    }
}
