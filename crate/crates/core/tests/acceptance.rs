//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any of them fails.

mod common;

use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use ezdeepc::bo::{matern_kernel, run_bo, unit_grid, BoConfig, GpSurrogate, KernelParams};
use ezdeepc::control::{build_input_bounds, LevelBox};
use ezdeepc::deepc::GammaPredictor;
use ezdeepc::hydro::{
    demand_head, gate_discharge, pump_head_capacity, pump_power, solve_pump_operating_point, step, weir_discharge,
    Disturbance, FlowDirection, PipeSection, Pump, SluiceGate, Weir,
};
use ezdeepc::scenario::{compute_metrics, desk_experiment, generate_disturbances, ControlMode, SystemTrajectory};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::*;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

type Check = fn() -> Verdict;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 7] = [
        ("1 predictor exactness", predictor_exactness),
        ("2 hydraulic properties", hydraulic_properties),
        ("3 lexicographic dominance", lexicographic_dominance),
        ("4 binary enumeration optimality", enumeration_optimality),
        ("5 surrogate and tuner", surrogate_and_tuner),
        ("6 desk comparison ordering", comparison_ordering),
        ("7 metrics", metrics_example),
    ];
    let results: Vec<(Verdict, Duration)> = thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                let f = *f;
                s.spawn(move || {
                    let t = Instant::now();
                    let v = std::panic::catch_unwind(f)
                        .unwrap_or_else(|_| Verdict::new(false, "panicked while evaluating"));
                    (v, t.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });

    let mut failed = 0;
    for ((name, _), (v, dt)) in criteria.iter().zip(&results) {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {name}: {tag} ({:.1} s) {}", dt.as_secs_f64(), v.detail);
        failed += usize::from(!v.passed);
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}

fn predictor_exactness() -> Verdict {
    let mut rng = rng(20);
    let (systems, trials) = (25, 4);
    let mut worst = 0.0f64;
    for _ in 0..systems {
        let sys = random_lti(&mut rng);
        let u = uniform_inputs(&mut rng, 80);
        let x0 = random_state(&mut rng, sys.order());
        let y = sys.simulate(&x0, &u);
        let pred = match GammaPredictor::build(&scalar_data(&u, &y), 3, 5) {
            Ok(p) => p,
            Err(e) => return Verdict::new(false, format!("predictor build failed: {e}")),
        };
        if !pred.excitation.persistently_exciting {
            return Verdict::new(false, "random input was not persistently exciting");
        }
        for _ in 0..trials {
            let u = uniform_inputs(&mut rng, 8);
            let y = sys.simulate(&random_state(&mut rng, sys.order()), &u);
            worst = worst.max(continuation_error(&pred, &u, &y));
        }
    }
    Verdict::new(worst <= 1e-8, format!("{systems} systems x {trials} trajectories, worst relative error {worst:.2e}"))
}

fn hydraulic_properties() -> Verdict {
    let g = 9.81;
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    let weir = Weir { upstream: 0, downstream: 1, discharge_coeff: 0.61, crest_width: 6.0, height_bounds: (7.0, 12.0) };
    check((weir_discharge(9.0, 8.5, &weir, g) - 3.821152182261261).abs() <= 1e-9, "weir spot value");
    check(weir_discharge(8.5, 8.5, &weir, g) == 0.0, "weir zero head");
    let gate = SluiceGate {
        branch: 0,
        river: 0,
        discharge_coeff: 0.61,
        width: 5.0,
        max_opening: 0.6,
        direction: FlowDirection::Inflow,
    };
    check((gate_discharge(8.0, 9.0, 0.5, &gate, g) - 4.052943930034068).abs() <= 1e-9, "gate spot value");
    check(gate_discharge(9.0, 8.0, 1.0, &gate, g) == 0.0, "gate check valve");
    let pump = Pump::with_direction(FlowDirection::Outflow);
    let pipe = PipeSection::default();
    check((demand_head(5.0, 2.0, &pipe) - 2.250306233456242).abs() <= 1e-9, "demand head spot value");
    check((pump_power(2.0, 1.0, &pump) - 404.43).abs() <= 1e-9, "power spot value");
    check(pump_power(0.0, 1.0, &pump) == 506.15, "power at shut-off head");
    check((pump_head_capacity(4.0, 0.6, &pump) - 2.40).abs() <= 1e-12, "head capacity spot value");

    let mut rng = rng(2);
    let mut affinity = 0.0f64;
    let mut residual = 0.0f64;
    for _ in 0..2000 {
        let (q, n, s) = (rng.random_range(0.0..8.0), rng.random_range(0.48..1.0), rng.random_range(0.2..3.0));
        let base = pump_head_capacity(q, n, &pump);
        let scaled = pump_head_capacity(s * q, s * n, &pump);
        affinity = affinity.max((scaled - s * s * base).abs() / (s * s * base).abs().max(1e-300));
        let hs = rng.random_range(-2.0..6.0);
        if let Ok(q) = solve_pump_operating_point(n, hs, &pump, &pipe) {
            residual = residual.max((pump_head_capacity(q, n, &pump) - demand_head(q, hs, &pipe)).abs());
        }
    }
    check(affinity <= 1e-12, "affinity scaling");
    check(residual <= 1e-9, "operating point residual");

    let exp = desk_experiment().expect("desk config");
    let plant = &exp.system;
    let disturbances = generate_disturbances(plant, &exp.scenario.with_steps(500)).expect("disturbances");
    let mut levels = plant.centers();
    let dim = plant.layout().dim();
    let mut closure = 0.0f64;
    for d in &disturbances {
        let input: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut u = input;
        let layout = plant.layout();
        for (i, w) in plant.weirs.iter().enumerate() {
            u[layout.weir(i)] = plant.branches[w.upstream].level_center - rng.random_range(0.0..0.4);
        }
        for k in 0..layout.pumps {
            u[layout.pump(k)] = if rng.random_bool(0.5) { rng.random_range(120.0..250.0) } else { 0.0 };
        }
        let out = match step(plant, &levels, &u, d) {
            Ok(o) => o,
            Err(e) => return Verdict::new(false, format!("simulation failed: {e}")),
        };
        for (b, br) in plant.branches.iter().enumerate() {
            let dh = out.levels[b] - levels[b];
            closure = closure.max((dh - out.flows.net_volume[b] / br.backwater_area).abs());
        }
        levels = out.levels;
    }
    check(closure <= 1e-6, "mass balance closure");
    Verdict::new(
        failures.is_empty(),
        format!(
            "affinity {affinity:.1e}, residual {residual:.1e} m, closure {closure:.1e} m over 500 steps{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn lexicographic_dominance() -> Verdict {
    let exp = desk_experiment().expect("desk config");
    let collected = match exp.collect() {
        Ok(c) => c,
        Err(e) => return Verdict::new(false, format!("collection failed: {e}")),
    };
    let base = exp.controller(&collected.data, exp.zone.contraction).expect("controller");
    let d = exp.evaluation_disturbances(&exp.scenario).expect("disturbances");
    let run = match exp.run_mode(ControlMode::Ez, Some(&base), exp.zone.contraction, &d, &exp.system.centers()) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, format!("closed loop failed: {e}")),
    };
    let layout = exp.system.layout();
    let (mut checked, mut dominance, mut domain) = (0, 0, 0);
    for (k, entry) in run.log.iter().enumerate().skip(exp.bootstrap_steps()) {
        if let (Some(zc), Some(z2)) = (entry.zc_star, entry.stage2_zone_cost) {
            checked += 1;
            if z2 > zc + 1e-6 {
                dominance += 1;
            }
        }
        let levels = &run.trajectory.levels[k];
        let dist = Disturbance::from_slice(&run.trajectory.disturbances[k], exp.system.stations.len());
        let bounds = build_input_bounds(&exp.system, levels, &dist);
        for (p, iv) in bounds.pumps.iter().enumerate() {
            let v = run.trajectory.inputs[k][layout.pump(p)];
            let ok = v == 0.0 || iv.is_some_and(|iv| v >= iv.lower - 1e-9 && v <= iv.upper + 1e-9);
            if !ok {
                domain += 1;
            }
        }
    }
    let controlled = run.log.len() - exp.bootstrap_steps();
    Verdict::new(
        controlled == 200 && checked > 0 && dominance == 0 && domain == 0,
        format!(
            "{controlled} controlled steps, {checked} with both stages, {dominance} dominance and {domain} pump domain violations"
        ),
    )
}

fn enumeration_optimality() -> Verdict {
    let plant = TwoPumpPlant::new();
    let (data, _) = plant.collect(&mut rng(4), 160);
    let pred = GammaPredictor::build(&data, 2, 3).expect("predictor");
    let input_weight = 2e-6;
    let config = two_pump_config(3, input_weight);
    // (initial level, target zone): reach up, hold, and let it fall
    let cases = [(0.2, (0.5, 0.6)), (0.55, (0.5, 0.6)), (0.9, (0.3, 0.35)), (0.1, (0.25, 0.3))];
    let gaps: Vec<(f64, f64)> = thread::scope(|s| {
        let handles: Vec<_> = cases
            .iter()
            .map(|&(y_start, target)| {
                let (pred, config) = (&pred, &config);
                s.spawn(move || {
                    let y1 = plant.next(y_start, [0.0; 2]);
                    let y2 = plant.next(y1, [0.0; 2]);
                    let u_ini = vec![vec![0.0; 2]; 2];
                    let y_ini = vec![vec![y1], vec![y2]];
                    let sol = solve_two_pump(pred, config, &u_ini, &y_ini, target);
                    let speeds: Vec<[f64; 2]> = sol.inputs.chunks(2).map(|c| [c[0], c[1]]).collect();
                    let j_enum = plant.cost(y2, &speeds, target, input_weight);
                    let (j_brute, _) = brute_force_two_pump(&plant, y2, 3, target, input_weight);
                    (j_enum, j_brute)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("brute force thread")).collect()
    });
    let worst = gaps.iter().map(|(e, b)| (e - b).abs() / b.max(1e-12)).fold(0.0f64, f64::max);
    let details: Vec<String> = gaps.iter().map(|(e, b)| format!("{e:.4}/{b:.4}")).collect();
    Verdict::new(worst <= 0.01, format!("enumerated/brute-force cost {}, worst gap {:.3}%", details.join(" "), worst * 100.0))
}

/// Posterior by explicit inversion of the noise-inflated kernel matrix.
fn naive_posterior(samples: &[f64], obs: &[f64], kernel: &KernelParams, noise: f64, alpha: f64) -> (f64, f64) {
    let n = samples.len();
    let mean = obs.iter().sum::<f64>() / n as f64;
    let var = obs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let k = DMatrix::from_fn(n, n, |i, j| matern_kernel(samples[i], samples[j], kernel) + if i == j { noise } else { 0.0 });
    let kinv = k.try_inverse().expect("invertible kernel matrix");
    let ks = DVector::from_fn(n, |i, _| matern_kernel(alpha, samples[i], kernel));
    let y = DVector::from_fn(n, |i, _| (obs[i] - mean) / scale);
    let mu = (ks.transpose() * &kinv * y)[0];
    let s2 = kernel.variance - (ks.transpose() * &kinv * &ks)[0];
    (mean + scale * mu, scale * s2.max(0.0).sqrt())
}

fn surrogate_and_tuner() -> Verdict {
    let mut rng = rng(5);
    let kernel = KernelParams::default();
    let noise = 0.35f64.powi(2);
    let mut oracle_gap = 0.0f64;
    for _ in 0..20 {
        let samples: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
        let obs: Vec<f64> = (0..5).map(|_| rng.random_range(-50.0..10.0)).collect();
        let gp = GpSurrogate::fit(kernel, noise, &samples, &obs).expect("fit");
        for a in unit_grid(41) {
            let (m, s) = gp.posterior(a);
            let (mo, so) = naive_posterior(&samples, &obs, &kernel, noise, a);
            oracle_gap = oracle_gap.max((m - mo).abs() / mo.abs().max(1.0)).max((s - so).abs() / so.abs().max(1.0));
        }
    }

    let samples = [0.05, 0.3, 0.5, 0.72, 0.95];
    let obs = [-3.0, 1.5, 0.25, -0.7, 2.0];
    let gp = GpSurrogate::fit(kernel, 0.0, &samples, &obs).expect("noiseless fit");
    let interp = samples
        .iter()
        .zip(&obs)
        .map(|(&a, &y)| {
            let (m, s) = gp.posterior(a);
            (m - y).abs().max(s * s)
        })
        .fold(0.0f64, f64::max);

    let mut hits = 0;
    let mut found = Vec::new();
    for seed in 0..10u64 {
        let mut r = common::rng(100 + seed);
        let config = if seed == 0 {
            BoConfig::default()
        } else {
            BoConfig { initial: (0..3).map(|_| r.random_range(0.0..1.0)).collect(), seed, ..BoConfig::default() }
        };
        let (offset, scale) = (r.random_range(-100.0..100.0), r.random_range(0.1..10.0));
        let res = run_bo(&config, |a, _| Ok(offset - scale * (a - 0.6) * (a - 0.6))).expect("bo");
        if (0.55..=0.65).contains(&res.alpha_star) && res.audit.len() <= 16 {
            hits += 1;
        }
        found.push(format!("{:.3}", res.alpha_star));
    }
    Verdict::new(
        oracle_gap <= 1e-10 && interp <= 1e-9 && hits == 10,
        format!(
            "oracle gap {oracle_gap:.1e}, interpolation error {interp:.1e}, synthetic optimum hit {hits}/10 (alpha* {})",
            found.join(" ")
        ),
    )
}

fn comparison_ordering() -> Verdict {
    let exp = desk_experiment().expect("desk config");
    let collected = match exp.collect() {
        Ok(c) => c,
        Err(e) => return Verdict::new(false, format!("collection failed: {e}")),
    };
    let base = exp.controller(&collected.data, 1.0).expect("controller");
    let tuning = match exp.tune(&base, &exp.tuning_scenarios()) {
        Ok(t) => t,
        Err(e) => return Verdict::new(false, format!("tuning failed: {e}")),
    };
    let report = match exp.compare(Some(&base), tuning.alpha_star) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, format!("comparison failed: {e}")),
    };
    let (Some(ez), Some(raw), Some(es)) =
        (report.metrics(ControlMode::Ez), report.metrics(ControlMode::EzRaw), report.metrics(ControlMode::Es))
    else {
        return Verdict::new(false, "a controller run failed");
    };
    let a = ez.violation_pct <= 0.10;
    let b = ez.avg_energy < es.avg_energy;
    let c = ez.violation_pct < raw.violation_pct;
    Verdict::new(
        a && b && c,
        format!(
            "alpha* {:.3}; violation tuned {:.1}% vs alpha=1 {:.1}%; energy tuned {:.3} vs set-point {:.3} kWh",
            tuning.alpha_star,
            100.0 * ez.violation_pct,
            100.0 * raw.violation_pct,
            ez.avg_energy,
            es.avg_energy
        ),
    )
}

fn metrics_example() -> Verdict {
    let zone = LevelBox { lower: vec![8.9, 8.5, 8.06, 7.9], upper: vec![9.1, 8.7, 8.26, 8.1] };
    let centers = [9.0, 8.6, 8.16, 8.0];
    let start = 15;
    let mut traj = SystemTrajectory::with_initial(centers.to_vec());
    for k in 0..start + 100 {
        let mut next = centers.to_vec();
        // levels[k + 1] is the level at instant k + 1; instants 40..50 are high
        if (40..50).contains(&(k + 1)) {
            next[2] = zone.upper[2] + 0.05;
        }
        traj.push(vec![0.0; 3], vec![0.0; 2], next, 1.0);
    }
    let m = compute_metrics(&traj, &zone, 100, start).expect("metrics");
    let dev = zone.upper[2] + 0.05 - zone.upper[2];
    let hand_sum = (0..10).fold(0.0, |acc, _| acc + dev);
    let ok = m.mae == hand_sum / 100.0
        && m.violation_pct == 0.1
        && m.max_deviation == dev
        && m.avg_energy == 1.0
        && (m.mae - 0.005).abs() < 1e-15
        && (m.max_deviation - 0.05).abs() < 1e-15;
    Verdict::new(
        ok,
        format!("MAE {} m, violation {}, max deviation {} m, energy {}", m.mae, m.violation_pct, m.max_deviation, m.avg_energy),
    )
}
