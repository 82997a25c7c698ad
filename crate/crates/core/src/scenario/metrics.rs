use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::control::LevelBox;
use crate::error::{Error, Result};

/// Closed-loop record. `levels[k]` is the state at instant `k`, so there is
/// one more level vector than inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemTrajectory {
    pub levels: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    /// Pump energy spent in each period, kWh.
    pub energy_kwh: Vec<f64>,
}

impl SystemTrajectory {
    pub fn with_initial(levels: Vec<f64>) -> Self {
        Self { levels: vec![levels], ..Self::default() }
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    /// One row per period: `t`, levels at the start, applied inputs,
    /// disturbances and energy. A final row carries the last levels only.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let ny = self.levels.first().map_or(0, Vec::len);
        let nu = self.inputs.first().map_or(0, Vec::len);
        let nd = self.disturbances.first().map_or(0, Vec::len);
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..ny).map(|i| format!("y_{i}")));
        header.extend((0..nu).map(|i| format!("u_{i}")));
        header.extend((0..nd).map(|i| format!("d_{i}")));
        header.push("energy_kwh".into());
        out.write_record(&header)?;
        for (t, y) in self.levels.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(y.iter().map(|v| v.to_string()));
            let blank = |n: usize| std::iter::repeat_n(String::new(), n);
            match self.inputs.get(t) {
                Some(u) => {
                    row.extend(u.iter().map(|v| v.to_string()));
                    row.extend(self.disturbances[t].iter().map(|v| v.to_string()));
                    row.push(self.energy_kwh[t].to_string());
                }
                None => {
                    row.extend(blank(nu + nd + 1));
                }
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn push(&mut self, input: Vec<f64>, disturbance: Vec<f64>, next_levels: Vec<f64>, energy_kwh: f64) {
        self.inputs.push(input);
        self.disturbances.push(disturbance);
        self.levels.push(next_levels);
        self.energy_kwh.push(energy_kwh);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMetrics {
    pub mae: f64,
    pub max_deviation: f64,
    pub violation_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean 1-norm distance of the level vector to the desired zone, m.
    pub mae: f64,
    /// Largest single-branch distance to the desired zone, m.
    pub max_deviation: f64,
    /// Fraction of instants with any branch outside the desired zone.
    pub violation_pct: f64,
    /// Mean pump energy per sampling period, kWh.
    pub avg_energy: f64,
    pub per_branch: Vec<BranchMetrics>,
    pub window_start: usize,
    pub window_len: usize,
}

/// Metrics over instants `start..start + len`. Energy is averaged over the
/// periods that begin inside the window.
pub fn compute_metrics(traj: &SystemTrajectory, zone: &LevelBox, len: usize, start: usize) -> Result<MetricsReport> {
    if len == 0 || traj.levels.len() < start + len {
        return Err(Error::WindowTooShort { len: traj.levels.len(), needed: start + len.max(1) });
    }
    let nb = zone.lower.len();
    let mut per = vec![(0.0, 0.0_f64, 0usize); nb];
    let mut total = 0.0;
    let mut violations = 0usize;
    for y in &traj.levels[start..start + len] {
        let dist = zone.distances(y);
        total += dist.iter().sum::<f64>();
        if dist.iter().any(|&d| d > 0.0) {
            violations += 1;
        }
        for (b, &d) in dist.iter().enumerate() {
            per[b].0 += d;
            per[b].1 = per[b].1.max(d);
            per[b].2 += usize::from(d > 0.0);
        }
    }
    let n = len as f64;
    let energy: Vec<f64> = traj.energy_kwh.iter().skip(start).take(len).copied().collect();
    let avg_energy = if energy.is_empty() { 0.0 } else { energy.iter().sum::<f64>() / energy.len() as f64 };
    let per_branch: Vec<BranchMetrics> = per
        .into_iter()
        .map(|(s, m, v)| BranchMetrics { mae: s / n, max_deviation: m, violation_pct: v as f64 / n })
        .collect();
    Ok(MetricsReport {
        mae: total / n,
        max_deviation: per_branch.iter().map(|b| b.max_deviation).fold(0.0, f64::max),
        violation_pct: violations as f64 / n,
        avg_energy,
        per_branch,
        window_start: start,
        window_len: len,
    })
}
