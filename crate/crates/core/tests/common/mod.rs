#![allow(dead_code)]

use ezdeepc::deepc::{ChannelScaling, GammaPredictor, TrajectoryData};
use ezdeepc::control::{BinaryMode, ControllerConfig, InputBounds, LevelBox, StageContext, StageSolution};
use ezdeepc::hydro::SpeedInterval;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Single-input single-output state-space model `x+ = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone)]
pub struct Lti {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl Lti {
    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// Outputs `y_t` for inputs `u_t`, starting from `x0`.
    pub fn simulate(&self, x0: &DVector<f64>, u: &[f64]) -> Vec<f64> {
        let mut x = x0.clone();
        let mut y = Vec::with_capacity(u.len());
        for &v in u {
            y.push(self.c.dot(&x) + self.d * v);
            x = &self.a * &x + &self.b * v;
        }
        y
    }

    fn observability_condition(&self) -> f64 {
        let n = self.order();
        let mut o = DMatrix::zeros(n, n);
        let mut row = self.c.transpose();
        for i in 0..n {
            o.set_row(i, &row);
            row = &row * &self.a;
        }
        let sv = o.singular_values();
        sv.max() / sv.min().max(f64::MIN_POSITIVE)
    }
}

/// Random stable model of order 1 to 3 in controllable canonical form, with
/// real poles in (-0.9, 0.9) and a reasonably conditioned observability matrix.
pub fn random_lti(rng: &mut ChaCha8Rng) -> Lti {
    loop {
        let n = rng.random_range(1..=3usize);
        let poles: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..0.9)).collect();
        // characteristic polynomial coefficients, highest power first
        let mut poly = vec![1.0];
        for p in &poles {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= p * c;
            }
            poly = next;
        }
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -poly[n - j];
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let d = rng.random_range(-0.5..0.5);
        let sys = Lti { a, b, c, d };
        if sys.observability_condition() < 1e4 {
            return sys;
        }
    }
}

pub fn uniform_inputs(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn scalar_data(u: &[f64], y: &[f64]) -> TrajectoryData {
    TrajectoryData::new(u.iter().map(|&v| vec![v]).collect(), y.iter().map(|&v| vec![v]).collect()).unwrap()
}

/// Relative error of the predicted continuation of a fresh trajectory.
///
/// The first `past` samples pin the initial condition, the next `horizon`
/// inputs are imposed through the free coefficients, and the predicted
/// outputs are compared with the true ones.
pub fn continuation_error(pred: &GammaPredictor, u: &[f64], y: &[f64]) -> f64 {
    let d = pred.dims;
    let (past, horizon) = (d.past, d.horizon);
    let u_ini: Vec<Vec<f64>> = u[..past].iter().map(|&v| vec![v]).collect();
    let y_ini: Vec<Vec<f64>> = y[..past].iter().map(|&v| vec![v]).collect();
    let g1 = pred.gamma1(&pred.stack_past(&u_ini, &y_ini).unwrap()).unwrap();
    let uf = DVector::from_column_slice(&u[past..past + horizon]);
    let rhs = uf - &pred.l21 * &g1;
    let g2 = pred.l22.solve_lower_triangular(&rhs).expect("input block is invertible");
    let g3 = DVector::zeros(d.future_outputs());
    let (_, yhat) = pred.predict(&g2, &g3, &g1).unwrap();
    let truth = DVector::from_column_slice(&y[past..past + horizon]);
    (yhat - &truth).norm() / truth.norm().max(1e-12)
}

/// Two pumps feeding one storage: `y+ = a·y + b1·n1 + b2·n2`, speeds in rpm.
#[derive(Debug, Clone, Copy)]
pub struct TwoPumpPlant {
    pub a: f64,
    pub gains: [f64; 2],
}

impl TwoPumpPlant {
    pub const SPEED_RANGE: (f64, f64) = (120.0, 250.0);

    pub fn new() -> Self {
        Self { a: 0.7, gains: [0.002, 0.0012] }
    }

    pub fn next(&self, y: f64, n: [f64; 2]) -> f64 {
        self.a * y + self.gains[0] * n[0] + self.gains[1] * n[1]
    }

    /// Random on/off speed data paired as `(u_t, y_{t+1})`.
    pub fn collect(&self, rng: &mut ChaCha8Rng, len: usize) -> (TrajectoryData, f64) {
        let mut y = 0.0;
        let (mut us, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..len {
            let mut n = [0.0; 2];
            for v in &mut n {
                if rng.random_bool(0.6) {
                    *v = rng.random_range(Self::SPEED_RANGE.0..Self::SPEED_RANGE.1);
                }
            }
            y = self.next(y, n);
            us.push(n.to_vec());
            ys.push(vec![y]);
        }
        (TrajectoryData::new(us, ys).unwrap(), y)
    }

    /// Horizon cost of a speed sequence on the true plant: squared distance
    /// of each produced level to `target` plus `input_weight·Σn²`.
    pub fn cost(&self, y0: f64, speeds: &[[f64; 2]], target: (f64, f64), input_weight: f64) -> f64 {
        let mut y = y0;
        let mut j = 0.0;
        for n in speeds {
            y = self.next(y, *n);
            let dist = (target.0 - y).max(y - target.1).max(0.0);
            j += dist * dist + input_weight * (n[0] * n[0] + n[1] * n[1]);
        }
        j
    }
}

impl Default for TwoPumpPlant {
    fn default() -> Self {
        Self::new()
    }
}

/// Controller settings for the two-pump instance: per-step binaries, raw
/// units, no regularization beyond the solver ridge.
pub fn two_pump_config(horizon: usize, input_weight: f64) -> ControllerConfig {
    ControllerConfig {
        past: 2,
        horizon,
        output_weight: vec![1.0],
        input_weight: Some(input_weight),
        zone_reg_inputs: 0.0,
        zone_reg_outputs: 0.0,
        binary_mode: BinaryMode::PerStep,
        max_binary_combos: 1 << 12,
        kkt_tol: 1e-10,
        standardize: false,
        ..ControllerConfig::default()
    }
}

pub fn two_pump_bounds() -> InputBounds {
    let iv = SpeedInterval { lower: TwoPumpPlant::SPEED_RANGE.0, upper: TwoPumpPlant::SPEED_RANGE.1 };
    InputBounds { lower: vec![], upper: vec![], pumps: vec![Some(iv); 2], static_heads: vec![2.0; 2] }
}

/// Solve the zone stage of the two-pump instance from a measured past.
pub fn solve_two_pump(
    pred: &GammaPredictor,
    config: &ControllerConfig,
    u_ini: &[Vec<f64>],
    y_ini: &[Vec<f64>],
    target: (f64, f64),
) -> StageSolution {
    let bounds = two_pump_bounds();
    let g1 = pred.gamma1(&pred.stack_past(u_ini, y_ini).unwrap()).unwrap();
    let ctx = StageContext::new(
        pred,
        &ChannelScaling::identity(2),
        &ChannelScaling::identity(1),
        &g1,
        &bounds,
        LevelBox { lower: vec![target.0], upper: vec![target.1] },
        LevelBox { lower: vec![-10.0], upper: vec![10.0] },
        &[false, false],
        config,
        0.5,
    )
    .unwrap();
    ctx.solve_zone_stage().unwrap()
}

/// Exhaustive search over every per-step on/off pattern and a speed grid
/// (5 rpm), refined on a 1 rpm grid around the best point.
pub fn brute_force_two_pump(
    plant: &TwoPumpPlant,
    y0: f64,
    horizon: usize,
    target: (f64, f64),
    input_weight: f64,
) -> (f64, Vec<[f64; 2]>) {
    let (lo, hi) = TwoPumpPlant::SPEED_RANGE;
    let mut levels = vec![0.0];
    let mut s = lo;
    while s <= hi + 1e-9 {
        levels.push(s);
        s += 5.0;
    }
    let slots = 2 * horizon;
    let mut best = (f64::INFINITY, vec![[0.0; 2]; horizon]);
    let mut idx = vec![0usize; slots];
    let mut speeds = vec![[0.0; 2]; horizon];
    loop {
        for (k, &i) in idx.iter().enumerate() {
            speeds[k / 2][k % 2] = levels[i];
        }
        let j = plant.cost(y0, &speeds, target, input_weight);
        if j < best.0 {
            best = (j, speeds.clone());
        }
        let mut k = 0;
        while k < slots {
            idx[k] += 1;
            if idx[k] < levels.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == slots {
            break;
        }
    }

    // 1 rpm refinement: coordinate sweeps over each running slot
    let mut improved = true;
    while improved {
        improved = false;
        for k in 0..slots {
            let (j, i) = (k / 2, k % 2);
            if best.1[j][i] == 0.0 {
                continue;
            }
            let centre = best.1[j][i];
            let mut cand = best.1.clone();
            for delta in -10..=10 {
                let v = (centre + delta as f64).clamp(lo, hi);
                cand[j][i] = v;
                let c = plant.cost(y0, &cand, target, input_weight);
                if c < best.0 - 1e-15 {
                    best = (c, cand.clone());
                    improved = true;
                }
            }
        }
    }
    best
}
