//! The two lexicographic stage problems over the predictor coefficients.
//!
//! Decision vector `x = [g2, g3, yz]`: the free predictor coefficients and the
//! zone reference trajectory. Inputs and outputs are affine in `x`:
//! `u = u0 + Bu·x`, `y = y0 + By·x`, both in physical units.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bounds::InputBounds;
use super::config::{BinaryMode, ControllerConfig};
use super::surrogate::PowerSurrogate;
use super::zone::LevelBox;
use crate::deepc::{ChannelScaling, GammaPredictor};
use crate::error::{Error, Result};
use crate::qp::{self, QpOptions, QpProblem};

/// Outcome flag of a stage solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// The binary budget ran out; the best pattern found so far is returned.
    BinaryBudgetExhausted,
    /// Stage 2 found nothing better than the stage-1 solution.
    Stage1Fallback,
    /// The optimizer failed and the passive rules were applied instead.
    PassiveFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub x: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub gamma3: Vec<f64>,
    /// Predicted inputs, horizon-major (`j·m + i`).
    pub inputs: Vec<f64>,
    /// Predicted outputs, horizon-major.
    pub outputs: Vec<f64>,
    pub zone_reference: Vec<f64>,
    /// On/off pattern, `[pump][step]`.
    pub binaries: Vec<Vec<bool>>,
    pub objective: f64,
    /// Weighted squared distance between predicted outputs and the zone reference.
    pub zone_cost: f64,
    /// Pump energy over the horizon under the power surrogates, kWh.
    pub energy: f64,
    pub status: SolveStatus,
    pub combos_explored: usize,
}

/// A group of (pump, horizon step) input entries that share one on/off decision.
#[derive(Debug, Clone, PartialEq)]
struct Slot {
    pump: usize,
    steps: Vec<usize>,
}

/// Affine maps and constraint data for one control instant.
pub struct StageContext<'a> {
    config: &'a ControllerConfig,
    m: usize,
    p: usize,
    horizon: usize,
    nu: usize,
    ny: usize,
    nx: usize,
    continuous: usize,
    u0: DVector<f64>,
    bu: DMatrix<f64>,
    y0: DVector<f64>,
    by: DMatrix<f64>,
    /// `u0` and `Bu` in standardized units, for the optional input weight.
    u0_std: DVector<f64>,
    bu_std: DMatrix<f64>,
    weights: DVector<f64>,
    bounds: &'a InputBounds,
    target: LevelBox,
    output: LevelBox,
    slots: Vec<Slot>,
    current_on: Vec<bool>,
    period_hours: f64,
    options: QpOptions,
}

/// Linear constraint rows in `QpProblem` form.
struct Rows {
    nx: usize,
    eq: Vec<(DVector<f64>, f64)>,
    ineq: Vec<(DVector<f64>, f64)>,
}

impl Rows {
    fn new(nx: usize) -> Self {
        Self { nx, eq: Vec::new(), ineq: Vec::new() }
    }

    /// `lo ≤ a·x + off ≤ hi`; an equality when the range is degenerate.
    fn range(&mut self, a: DVector<f64>, off: f64, lo: f64, hi: f64) {
        if (hi - lo).abs() <= 1e-12 {
            self.eq.push((a, lo - off));
            return;
        }
        if lo.is_finite() {
            self.ineq.push((a.clone(), lo - off));
        }
        if hi.is_finite() {
            self.ineq.push((-a, off - hi));
        }
    }

    fn into_problem(self, g: DMatrix<f64>, c: DVector<f64>) -> QpProblem {
        let stack = |rows: &[(DVector<f64>, f64)]| {
            let a = DMatrix::from_fn(rows.len(), self.nx, |r, col| rows[r].0[col]);
            let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
            (a, b)
        };
        let (ae, be) = stack(&self.eq);
        let (ai, bi) = stack(&self.ineq);
        QpProblem::new(g, c).with_equalities(ae, be).with_inequalities(ai, bi)
    }
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

impl<'a> StageContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        predictor: &GammaPredictor,
        input_scaling: &ChannelScaling,
        output_scaling: &ChannelScaling,
        gamma1: &DVector<f64>,
        bounds: &'a InputBounds,
        target: LevelBox,
        output: LevelBox,
        current_on: &[bool],
        config: &'a ControllerConfig,
        period_hours: f64,
    ) -> Result<Self> {
        let d = predictor.dims;
        let (m, p, n) = (d.inputs, d.outputs, d.horizon);
        let (nu, ny) = (m * n, p * n);
        let nx = nu + 2 * ny;
        let continuous = bounds.lower.len();
        if continuous + bounds.pumps.len() != m || target.lower.len() != p || output.lower.len() != p {
            return Err(Error::dims("stage data does not match the predictor dimensions"));
        }
        let su = DVector::from_fn(nu, |r, _| input_scaling.scale[r % m]);
        let mu = DVector::from_fn(nu, |r, _| input_scaling.mean[r % m]);
        let sy = DVector::from_fn(ny, |r, _| output_scaling.scale[r % p]);
        let my = DVector::from_fn(ny, |r, _| output_scaling.mean[r % p]);

        let u0_std = &predictor.l21 * gamma1;
        let mut bu_std = DMatrix::zeros(nu, nx);
        bu_std.view_mut((0, 0), (nu, nu)).copy_from(&predictor.l22);
        let u0 = mu + u0_std.component_mul(&su);
        let mut bu = bu_std.clone();
        for r in 0..nu {
            bu.row_mut(r).scale_mut(su[r]);
        }
        let y0 = my + (&predictor.l31 * gamma1).component_mul(&sy);
        let mut by = DMatrix::zeros(ny, nx);
        by.view_mut((0, 0), (ny, nu)).copy_from(&predictor.l32);
        by.view_mut((0, nu), (ny, ny)).copy_from(&predictor.l33);
        for r in 0..ny {
            by.row_mut(r).scale_mut(sy[r]);
        }
        let weights = DVector::from_fn(ny, |r, _| config.weight(r % p));

        let mut slots = Vec::new();
        for (k, iv) in bounds.pumps.iter().enumerate() {
            if iv.is_none() {
                continue;
            }
            match config.binary_mode {
                BinaryMode::ConstantOverHorizon => slots.push(Slot { pump: k, steps: (0..n).collect() }),
                BinaryMode::PerStep => slots.extend((0..n).map(|j| Slot { pump: k, steps: vec![j] })),
            }
        }
        Ok(Self {
            config,
            m,
            p,
            horizon: n,
            nu,
            ny,
            nx,
            continuous,
            u0,
            bu,
            y0,
            by,
            u0_std,
            bu_std,
            weights,
            bounds,
            target,
            output,
            slots,
            current_on: current_on.to_vec(),
            period_hours,
            options: QpOptions { kkt_tol: config.kkt_tol, ..QpOptions::default() },
        })
    }

    pub fn decision_dim(&self) -> usize {
        self.nx
    }

    fn zone_index(&self, r: usize) -> usize {
        self.nu + self.ny + r
    }

    fn input_row(&self, j: usize, i: usize) -> (DVector<f64>, f64) {
        let r = j * self.m + i;
        (self.bu.row(r).transpose(), self.u0[r])
    }

    /// Residual `y - yz` as an affine map: returns (row, offset).
    fn residual_row(&self, r: usize) -> (DVector<f64>, f64) {
        let mut a = self.by.row(r).transpose();
        a[self.zone_index(r)] -= 1.0;
        (a, self.y0[r])
    }

    /// Constraint rows shared by both stages for a (partial) pump pattern.
    /// `pattern[s]` is the decision for slot `s`; `None` relaxes it to `[0, ub]`.
    fn common_rows(&self, pattern: &[Option<bool>], with_outputs: bool) -> Rows {
        let mut rows = Rows::new(self.nx);
        if with_outputs {
            for r in 0..self.ny {
                let i = r % self.p;
                rows.range(self.by.row(r).transpose(), self.y0[r], self.output.lower[i], self.output.upper[i]);
            }
        }
        for r in 0..self.ny {
            let i = r % self.p;
            rows.range(unit(self.nx, self.zone_index(r)), 0.0, self.target.lower[i], self.target.upper[i]);
        }
        for j in 0..self.horizon {
            for i in 0..self.continuous {
                let (a, off) = self.input_row(j, i);
                rows.range(a, off, self.bounds.lower[i], self.bounds.upper[i]);
            }
        }
        let mut state: Vec<Vec<Option<bool>>> = self
            .bounds
            .pumps
            .iter()
            .map(|iv| vec![if iv.is_none() { Some(false) } else { None }; self.horizon])
            .collect();
        for (slot, decision) in self.slots.iter().zip(pattern) {
            for &j in &slot.steps {
                state[slot.pump][j] = *decision;
            }
        }
        for (k, steps) in state.iter().enumerate() {
            let iv = self.bounds.pumps[k];
            for (j, s) in steps.iter().enumerate() {
                let (a, off) = self.input_row(j, self.continuous + k);
                match (s, iv) {
                    (Some(true), Some(iv)) => rows.range(a, off, iv.lower, iv.upper),
                    (None, Some(iv)) => rows.range(a, off, 0.0, iv.upper),
                    _ => rows.range(a, off, 0.0, 0.0),
                }
            }
        }
        rows
    }

    fn zone_objective(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut r = self.by.clone();
        for i in 0..self.ny {
            r[(i, self.zone_index(i))] -= 1.0;
        }
        let mut qr = r.clone();
        for i in 0..self.ny {
            qr.row_mut(i).scale_mut(self.weights[i]);
        }
        let mut g = 2.0 * r.tr_mul(&qr);
        let mut c = 2.0 * qr.tr_mul(&self.y0);
        for i in 0..self.nu {
            g[(i, i)] += 2.0 * self.config.zone_reg_inputs;
        }
        for i in self.nu..self.nu + self.ny {
            g[(i, i)] += 2.0 * self.config.zone_reg_outputs;
        }
        if let Some(w) = self.config.input_weight {
            g += 2.0 * w * self.bu_std.tr_mul(&self.bu_std);
            c += 2.0 * w * self.bu_std.tr_mul(&self.u0_std);
        }
        for i in 0..self.nx {
            g[(i, i)] += self.config.ridge;
        }
        (g, c)
    }

    fn zone_constant(&self) -> f64 {
        self.y0.iter().zip(&self.weights).map(|(y, q)| q * y * y).sum()
    }

    /// Weighted squared distance between predicted outputs and the zone reference.
    pub fn zone_cost(&self, x: &DVector<f64>) -> f64 {
        (0..self.ny)
            .map(|r| {
                let (a, off) = self.residual_row(r);
                self.weights[r] * (a.dot(x) + off).powi(2)
            })
            .sum()
    }

    fn solve_qp(&self, rows: Rows, g: DMatrix<f64>, c: DVector<f64>) -> Result<DVector<f64>> {
        let problem = rows.into_problem(g, c);
        let sol = qp::solve(&problem, &self.options)?;
        if !sol.converged(&self.options) {
            log::debug!("QP KKT residual {:.3e} above tolerance", sol.kkt_residual);
        }
        Ok(sol.x)
    }

    fn full_pattern(&self, pattern: &[bool]) -> Vec<Option<bool>> {
        pattern.iter().map(|&b| Some(b)).collect()
    }

    fn binaries(&self, pattern: &[bool]) -> Vec<Vec<bool>> {
        let mut out = vec![vec![false; self.horizon]; self.bounds.pumps.len()];
        for (slot, &on) in self.slots.iter().zip(pattern) {
            for &j in &slot.steps {
                out[slot.pump][j] = on;
            }
        }
        out
    }

    fn slot_current(&self, s: usize) -> bool {
        self.current_on.get(self.slots[s].pump).copied().unwrap_or(false)
    }

    /// Pump energy over the horizon (kWh) of inputs `u` under the surrogates.
    pub fn energy(&self, u: &DVector<f64>, binaries: &[Vec<bool>], surrogates: &[Option<PowerSurrogate>]) -> f64 {
        let mut e = 0.0;
        for (k, sur) in surrogates.iter().enumerate() {
            let Some(sur) = sur else { continue };
            for j in 0..self.horizon {
                if binaries[k][j] {
                    e += self.period_hours * sur.value(u[j * self.m + self.continuous + k]);
                }
            }
        }
        e
    }

    fn solution(&self, x: DVector<f64>, pattern: &[bool], objective: f64, status: SolveStatus) -> StageSolution {
        let u = &self.u0 + &self.bu * &x;
        let y = &self.y0 + &self.by * &x;
        StageSolution {
            gamma2: x.rows(0, self.nu).iter().copied().collect(),
            gamma3: x.rows(self.nu, self.ny).iter().copied().collect(),
            zone_reference: x.rows(self.nu + self.ny, self.ny).iter().copied().collect(),
            inputs: u.iter().copied().collect(),
            outputs: y.iter().copied().collect(),
            binaries: self.binaries(pattern),
            zone_cost: self.zone_cost(&x),
            x: x.iter().copied().collect(),
            objective,
            energy: 0.0,
            status,
            combos_explored: 0,
        }
    }

    /// Stage 1: minimize zone tracking cost plus regularization over all
    /// admissible pump patterns by depth-first branch and bound.
    pub fn solve_zone_stage(&self) -> Result<StageSolution> {
        let (g, c) = self.zone_objective();
        let constant = self.zone_constant();
        let mut search = ZoneSearch {
            ctx: self,
            g: &g,
            c: &c,
            constant,
            best: None,
            leaves: 0,
            exhausted: false,
        };
        let mut pattern = vec![None; self.slots.len()];
        search.visit(&mut pattern, 0);
        let (leaves, exhausted) = (search.leaves, search.exhausted);
        match search.best {
            Some((x, pat, obj)) => {
                let status = if exhausted { SolveStatus::BinaryBudgetExhausted } else { SolveStatus::Optimal };
                let mut sol = self.solution(x, &pat, obj, status);
                sol.combos_explored = leaves;
                Ok(sol)
            }
            None => Err(self.diagnose_infeasible()),
        }
    }

    /// Find the branch whose output bound is hardest to meet.
    fn diagnose_infeasible(&self) -> Error {
        let (g, c) = self.zone_objective();
        let pattern: Vec<Option<bool>> = vec![None; self.slots.len()];
        let rows = self.common_rows(&pattern, false);
        let detail = "output constraint set cannot be met".to_string();
        match self.solve_qp(rows, g, c) {
            Ok(x) => {
                let y = &self.y0 + &self.by * &x;
                let mut worst = (None, 0.0);
                for r in 0..self.ny {
                    let i = r % self.p;
                    let v = (self.output.lower[i] - y[r]).max(y[r] - self.output.upper[i]);
                    if v > worst.1 {
                        worst = (Some(i), v);
                    }
                }
                Error::Infeasible { branch: worst.0, detail }
            }
            Err(_) => Error::Infeasible { branch: None, detail: "input constraint set is empty".into() },
        }
    }

    /// Stage 2: minimize pump energy plus regularization subject to not
    /// degrading the stage-1 zone cost.
    ///
    /// The zone-cost bound is enforced through a box on the weighted
    /// residuals sized so that every point in it satisfies the quadratic
    /// bound and the stage-1 solution lies inside it.
    pub fn solve_energy_stage(
        &self,
        stage1: &StageSolution,
        surrogates: &[Option<PowerSurrogate>],
    ) -> Result<StageSolution> {
        let zc_star = stage1.zone_cost;
        let slack = (1e-6 * zc_star).max(1e-8);
        let x1 = DVector::from_column_slice(&stage1.x);
        let n_res = self.ny as f64;
        let residual_limits: Vec<f64> = (0..self.ny)
            .map(|r| {
                let (a, off) = self.residual_row(r);
                let w = self.weights[r].sqrt() * (a.dot(&x1) + off);
                (w * w + slack / n_res).sqrt() / self.weights[r].sqrt()
            })
            .collect();

        let stage1_pattern: Vec<bool> = self
            .slots
            .iter()
            .map(|s| stage1.binaries[s.pump][s.steps[0]])
            .collect();
        let f1 = self.energy_objective(&x1, &stage1_pattern, surrogates);

        let mut best: Option<(DVector<f64>, Vec<bool>, f64)> = None;
        let mut explored = 0;
        let mut exhausted = false;
        let candidates = self.energy_candidates(&stage1_pattern, surrogates);
        for (pattern, lower_bound) in candidates.into_iter() {
            if explored >= self.config.max_binary_combos {
                exhausted = true;
                break;
            }
            if let Some((_, _, fb)) = &best {
                if lower_bound >= *fb {
                    continue;
                }
            }
            explored += 1;
            let start = if pattern == stage1_pattern { Some(&x1) } else { None };
            let Ok((x, f)) = self.energy_sqp(&pattern, &residual_limits, surrogates, start, &x1) else {
                continue;
            };
            // An inexact QP solve may leave the residual box slightly; such
            // points are dropped so the zone bound holds exactly.
            if self.zone_cost(&x) > zc_star + slack {
                log::debug!("stage-2 candidate exceeds the zone bound; discarded");
                continue;
            }
            if best.as_ref().is_none_or(|(_, _, fb)| f < *fb - 1e-12 * fb.abs().max(1.0)) {
                best = Some((x, pattern, f));
            }
        }
        let mut sol = match best {
            Some((x, pattern, f)) if f <= f1 => {
                let status = if exhausted { SolveStatus::BinaryBudgetExhausted } else { SolveStatus::Optimal };
                self.solution(x, &pattern, f, status)
            }
            _ => self.solution(x1, &stage1_pattern, f1, SolveStatus::Stage1Fallback),
        };
        let u = DVector::from_column_slice(&sol.inputs);
        sol.energy = self.energy(&u, &sol.binaries, surrogates);
        sol.combos_explored = explored;
        Ok(sol)
    }

    /// Patterns in evaluation order (stage-1 pattern, then by Hamming
    /// distance and lower bound), with their energy lower bounds.
    fn energy_candidates(&self, start: &[bool], surrogates: &[Option<PowerSurrogate>]) -> Vec<(Vec<bool>, f64)> {
        let ns = self.slots.len();
        let slot_min: Vec<f64> = self
            .slots
            .iter()
            .map(|s| {
                let min = surrogates[s.pump].as_ref().map_or(0.0, |sur| sur.min_value().max(0.0));
                self.period_hours * min * s.steps.len() as f64
            })
            .collect();
        let bound = |p: &[bool]| -> f64 { p.iter().zip(&slot_min).filter(|(on, _)| **on).map(|(_, e)| e).sum() };
        let budget = self.config.max_binary_combos;
        let mut out = Vec::new();
        for dist in 0..=ns {
            let mut level = Vec::new();
            let mut flips = Vec::with_capacity(dist);
            combinations(ns, dist, 0, &mut flips, &mut level, 4 * budget + 16);
            let mut level: Vec<(Vec<bool>, f64)> = level
                .into_iter()
                .map(|fl: Vec<usize>| {
                    let mut p = start.to_vec();
                    for i in fl {
                        p[i] = !p[i];
                    }
                    let b = bound(&p);
                    (p, b)
                })
                .collect();
            level.sort_by(|a, b| a.1.total_cmp(&b.1));
            out.extend(level);
            if out.len() >= budget {
                break;
            }
        }
        out
    }

    fn energy_objective(&self, x: &DVector<f64>, pattern: &[bool], surrogates: &[Option<PowerSurrogate>]) -> f64 {
        let u = &self.u0 + &self.bu * x;
        let e = self.energy(&u, &self.binaries(pattern), surrogates);
        let g2: f64 = x.rows(0, self.nu).norm_squared();
        let g3: f64 = x.rows(self.nu, self.ny).norm_squared();
        e + self.config.energy_reg_inputs * g2 + self.config.energy_reg_outputs * g3
    }

    fn energy_rows(&self, pattern: &[bool], limits: &[f64]) -> Rows {
        let mut rows = self.common_rows(&self.full_pattern(pattern), true);
        for (r, &lim) in limits.iter().enumerate() {
            let (a, off) = self.residual_row(r);
            rows.range(a, off, -lim, lim);
        }
        rows
    }

    /// Sequential convex QP for a fixed pump pattern. Curvature of the power
    /// surrogates is clipped at zero and a small proximal term keeps every
    /// subproblem strictly convex. Iterates stay feasible because the
    /// constraint set is a polyhedron and steps are convex combinations.
    fn energy_sqp(
        &self,
        pattern: &[bool],
        limits: &[f64],
        surrogates: &[Option<PowerSurrogate>],
        feasible_start: Option<&DVector<f64>>,
        linearize_at: &DVector<f64>,
    ) -> Result<(DVector<f64>, f64)> {
        let binaries = self.binaries(pattern);
        let on_terms: Vec<(usize, usize)> = (0..self.bounds.pumps.len())
            .flat_map(|k| (0..self.horizon).map(move |j| (k, j)))
            .filter(|&(k, j)| binaries[k][j] && surrogates[k].is_some())
            .collect();
        let mut base_g = DMatrix::zeros(self.nx, self.nx);
        for i in 0..self.nu {
            base_g[(i, i)] = 2.0 * self.config.energy_reg_inputs;
        }
        for i in self.nu..self.nu + self.ny {
            base_g[(i, i)] = 2.0 * self.config.energy_reg_outputs;
        }
        let prox = 1e-6 * (1.0 + base_g.diagonal().amax()) + self.config.ridge;

        let f = |x: &DVector<f64>| self.energy_objective(x, pattern, surrogates);
        let mut x = feasible_start.cloned().unwrap_or_else(|| linearize_at.clone());
        let mut feasible = feasible_start.is_some();
        let mut fx = if feasible { f(&x) } else { f64::INFINITY };

        for _ in 0..self.config.sqp_max_iterations {
            let u = &self.u0 + &self.bu * &x;
            let mut g = base_g.clone();
            let mut c = DVector::zeros(self.nx);
            let mut grad = DVector::zeros(self.nx);
            for i in 0..self.nu + self.ny {
                grad[i] = base_g[(i, i)] * x[i];
            }
            for &(k, j) in &on_terms {
                let sur = surrogates[k].as_ref().expect("on terms have surrogates");
                let r = j * self.m + self.continuous + k;
                let a = self.bu.row(r).transpose();
                let uk = u[r];
                let slope = self.period_hours * sur.slope(uk);
                let curv = self.period_hours * sur.curvature(uk).max(0.0);
                g.ger(curv, &a, &a, 1.0);
                c.axpy(slope - curv * a.dot(&x), &a, 1.0);
                grad.axpy(slope, &a, 1.0);
            }
            for i in 0..self.nx {
                g[(i, i)] += prox;
                c[i] -= prox * x[i];
            }
            let rows = self.energy_rows(pattern, limits);
            let candidate = self.solve_qp(rows, g, c)?;
            if !feasible {
                fx = f(&candidate);
                x = candidate;
                feasible = true;
                continue;
            }
            let dir = &candidate - &x;
            let slope = grad.dot(&dir);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial = &x + t * &dir;
                let ft = f(&trial);
                if ft <= fx + 1e-4 * t * slope.min(0.0) {
                    accepted = Some((trial, ft));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, fnext)) = accepted else { break };
            let step = (&next - &x).norm();
            x = next;
            fx = fnext;
            if step <= self.config.sqp_step_tol {
                break;
            }
        }
        Ok((x, fx))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn output_dim(&self) -> usize {
        self.p
    }
}

/// Depth-first enumeration of `k`-subsets of `0..n`, capped at `cap` results.
fn combinations(n: usize, k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, cap: usize) {
    if out.len() >= cap {
        return;
    }
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in from..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combinations(n, k, i + 1, cur, out, cap);
        cur.pop();
        if out.len() >= cap {
            return;
        }
    }
}

struct ZoneSearch<'c, 'a> {
    ctx: &'c StageContext<'a>,
    g: &'c DMatrix<f64>,
    c: &'c DVector<f64>,
    constant: f64,
    best: Option<(DVector<f64>, Vec<bool>, f64)>,
    leaves: usize,
    exhausted: bool,
}

impl ZoneSearch<'_, '_> {
    fn visit(&mut self, pattern: &mut Vec<Option<bool>>, depth: usize) {
        if self.exhausted {
            return;
        }
        let rows = self.ctx.common_rows(pattern, true);
        let Ok(x) = self.ctx.solve_qp(rows, self.g.clone(), self.c.clone()) else {
            return;
        };
        let obj = 0.5 * x.dot(&(self.g * &x)) + self.c.dot(&x) + self.constant;
        if let Some((_, _, best)) = &self.best {
            if obj >= *best - 1e-12 * best.abs().max(1.0) {
                return;
            }
        }
        if depth == pattern.len() {
            self.leaves += 1;
            let full: Vec<bool> = pattern.iter().map(|d| d.expect("leaf is fully decided")).collect();
            self.best = Some((x, full, obj));
            if self.leaves >= self.ctx.config.max_binary_combos {
                self.exhausted = depth > 0;
            }
            return;
        }
        let first = self.ctx.slot_current(depth);
        for choice in [first, !first] {
            pattern[depth] = Some(choice);
            self.visit(pattern, depth + 1);
            if self.exhausted {
                break;
            }
        }
        pattern[depth] = None;
    }
}
