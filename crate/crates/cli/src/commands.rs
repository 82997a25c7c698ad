use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use ezdeepc::bo::run_bo;
use ezdeepc::deepc::TrajectoryData;
use ezdeepc::hydro::step;
use ezdeepc::control::PassiveController;
use ezdeepc::scenario::{
    desk_experiment, generate_disturbances, ClosedLoopRun, ControlMode, DisturbanceScenario, ExperimentConfig, StepSource,
    SystemTrajectory, DESK_CONFIG, FULL_CONFIG,
};

use crate::manifest::{now_unix, RunManifest, Seeds};
use crate::svg::line_chart;
use crate::Common;

fn load_experiment(common: &Common) -> Result<ExperimentConfig> {
    let mut exp = match &common.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => desk_experiment()?,
    };
    if let Some(path) = &common.scenario {
        let text = fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        exp.scenario = DisturbanceScenario::from_toml_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?;
    }
    exp.validate()?;
    Ok(exp)
}

fn manifest(command: &str, common: &Common, argv: &[String], exp: &ExperimentConfig, data: Option<&Path>) -> Result<RunManifest> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(RunManifest {
        command: command.to_string(),
        args: argv.to_vec(),
        config: common.config.clone(),
        scenario: common.scenario.clone(),
        data: data.map(Path::to_path_buf),
        seeds: Seeds { scenario: exp.scenario.seed, collection: exp.collection.seed, tuning: exp.bo.seed },
        version: RunManifest::version().to_string(),
        out_dir: common.out.clone(),
        started_unix: now_unix(),
        finished_unix: None,
        outputs: Vec::new(),
    })
}

fn create(dir: &Path, name: &str, m: &mut RunManifest) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    m.record(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, m: &mut RunManifest) -> Result<()> {
    let mut w = create(dir, name, m)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn load_data(exp: &ExperimentConfig, path: Option<&Path>) -> Result<TrajectoryData> {
    match path {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening data {}", p.display()))?;
            Ok(TrajectoryData::read_csv(f)?)
        }
        None => {
            log::info!("no data file given; collecting {} samples", exp.collection.steps);
            Ok(exp.collect()?.data)
        }
    }
}

fn level_chart(exp: &ExperimentConfig, traj: &SystemTrajectory, title: &str) -> String {
    let nb = exp.system.branches.len();
    let series: Vec<(String, Vec<f64>)> =
        (0..nb).map(|b| (format!("branch {b}"), traj.levels.iter().map(|y| y[b]).collect())).collect();
    let zone = exp.desired_zone();
    let bands: Vec<(f64, f64)> = zone.lower.iter().zip(&zone.upper).map(|(&a, &b)| (a, b)).collect();
    line_chart(title, &series, &bands)
}

pub fn init(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("desk4.toml"), DESK_CONFIG)?;
    fs::write(out.join("full14.toml"), FULL_CONFIG)?;
    println!("wrote {} and {}", out.join("desk4.toml").display(), out.join("full14.toml").display());
    Ok(())
}

fn read_inputs(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening inputs {}", path.display()))?;
    let cols: Vec<usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("u_"))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        bail!("input file {} has no u_ columns", path.display());
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = cols.iter().map(|&i| rec[i].trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("input file {} has no rows", path.display());
    }
    Ok(rows)
}

pub fn simulate(common: &Common, argv: &[String], steps: usize, inputs: Option<&Path>, svg: bool) -> Result<()> {
    let mut exp = load_experiment(common)?;
    if let Some(s) = common.seed {
        exp.scenario.seed = s;
    }
    let mut m = manifest("simulate", common, argv, &exp, inputs)?;
    let plant = &exp.system;
    let d = generate_disturbances(plant, &exp.scenario.with_steps(steps))?;
    let given = inputs.map(read_inputs).transpose()?;
    if let Some(rows) = &given {
        if rows[0].len() != plant.layout().dim() {
            bail!("inputs have {} columns, the plant has {} inputs", rows[0].len(), plant.layout().dim());
        }
    }
    let mut passive = PassiveController::new(plant.clone(), exp.zone_spec(1.0)?);
    let mut levels = plant.centers();
    let mut traj = SystemTrajectory::with_initial(levels.clone());
    for (t, dist) in d.iter().enumerate() {
        let u = match &given {
            Some(rows) => rows[t.min(rows.len() - 1)].clone(),
            None => passive.step(&levels, dist),
        };
        let out = step(plant, &levels, &u, dist)?;
        traj.push(out.flows.applied, dist.to_vec(), out.levels.clone(), out.energy_kwh);
        levels = out.levels;
    }
    traj.write_csv(create(&common.out, "trajectory.csv", &mut m)?)?;
    if svg {
        let mut w = create(&common.out, "levels.svg", &mut m)?;
        w.write_all(level_chart(&exp, &traj, "open-loop levels").as_bytes())?;
    }
    println!("simulated {steps} steps; output in {}", common.out.display());
    m.finish(&common.out)
}

pub fn collect(common: &Common, argv: &[String], steps: Option<usize>) -> Result<()> {
    let mut exp = load_experiment(common)?;
    if let Some(s) = common.seed {
        exp.collection.seed = s;
    }
    if let Some(n) = steps {
        exp.collection.steps = n;
    }
    exp.validate()?;
    let mut m = manifest("collect", common, argv, &exp, None)?;
    let col = exp.collect()?;
    col.data.write_csv(create(&common.out, "data.csv", &mut m)?)?;
    {
        let mut w = csv::Writer::from_writer(create(&common.out, "interventions.csv", &mut m)?);
        for iv in &col.interventions {
            w.serialize(iv)?;
        }
        w.flush()?;
    }
    write_json(&common.out, "excitation.json", &col.excitation, &mut m)?;
    let pe = &col.excitation;
    println!(
        "collected {} samples; persistently exciting of order {}: {} (rank {} of {}, smallest singular value {:.3e})",
        col.data.len(),
        exp.controller.past + exp.controller.horizon,
        pe.persistently_exciting,
        pe.rank,
        pe.rows,
        pe.smallest_singular_value
    );
    println!("{} intervention intervals", col.interventions.len());
    for iv in &col.interventions {
        println!(
            "  branch {} steps {}..{} ({})",
            iv.branch,
            iv.start,
            iv.end,
            if iv.too_high { "too high" } else { "too low" }
        );
    }
    m.finish(&common.out)
}

pub fn tune(common: &Common, argv: &[String], data: Option<&Path>, steps: Option<usize>, synthetic: bool) -> Result<()> {
    let mut exp = load_experiment(common)?;
    if let Some(s) = common.seed {
        exp.bo.seed = s;
    }
    if let Some(n) = steps {
        exp.bo.eval_steps = n;
    }
    let mut m = manifest("tune", common, argv, &exp, data)?;
    if synthetic {
        let res = run_bo(&exp.bo, |a, _| Ok(-(a - 0.6) * (a - 0.6)))?;
        res.write_audit_csv(create(&common.out, "bo_audit.csv", &mut m)?)?;
        write_json(&common.out, "surrogate.json", &res.surrogate, &mut m)?;
        write_json(&common.out, "tuning.json", &serde_json::json!({ "alpha_star": res.alpha_star, "evaluations": res.audit.len() }), &mut m)?;
        println!("alpha* = {:.4} after {} evaluations", res.alpha_star, res.audit.len());
        return m.finish(&common.out);
    }
    let data = load_data(&exp, data)?;
    let base = exp.controller(&data, 1.0)?;
    let scenarios = exp.tuning_scenarios();
    let report = exp.tune(&base, &scenarios)?;
    for (sc, run) in scenarios.iter().zip(&report.runs) {
        run.write_audit_csv(create(&common.out, &format!("bo_audit_{}.csv", sc.seed), &mut m)?)?;
        write_json(&common.out, &format!("surrogate_{}.json", sc.seed), &run.surrogate, &mut m)?;
        println!("scenario {}: alpha* = {:.4}", sc.seed, run.alpha_star);
    }
    {
        let mut w = csv::Writer::from_writer(create(&common.out, "mean_curve.csv", &mut m)?);
        w.write_record(["alpha", "mean"])?;
        for (a, v) in report.grid.iter().zip(&report.mean_curve) {
            w.write_record([a.to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    write_json(
        &common.out,
        "tuning.json",
        &serde_json::json!({ "alpha_star": report.alpha_star, "scenario_seeds": exp.bo.scenario_seeds }),
        &mut m,
    )?;
    println!("aggregated alpha* = {:.4}", report.alpha_star);
    m.finish(&common.out)
}

#[derive(Debug, Serialize)]
struct Audit {
    /// Steps whose stage-2 zone cost exceeds the stage-1 optimum by more than 1e-6.
    dominance_violations: usize,
    /// Steps with a pump speed outside {0} and its running interval.
    domain_violations: usize,
    passive_fallbacks: usize,
}

fn audit(run: &ClosedLoopRun) -> Audit {
    Audit {
        dominance_violations: run
            .log
            .iter()
            .filter(|l| matches!((l.zc_star, l.stage2_zone_cost), (Some(z), Some(s)) if s > z + 1e-6))
            .count(),
        domain_violations: run.log.iter().filter(|l| !l.pumps_in_domain).count(),
        passive_fallbacks: run.log.iter().filter(|l| l.solver_status == StepSource::PassiveFallback).count(),
    }
}

pub fn control(
    common: &Common,
    argv: &[String],
    data: Option<&Path>,
    alpha: Option<f64>,
    mode: &str,
    steps: Option<usize>,
    svg: bool,
) -> Result<()> {
    let mut exp = load_experiment(common)?;
    if let Some(s) = common.seed {
        exp.scenario.seed = s;
    }
    if let Some(n) = steps {
        exp.evaluation.steps = n;
    }
    let mode: ControlMode = mode.parse()?;
    let alpha = alpha.unwrap_or(exp.zone.contraction);
    if !(0.0..=1.0).contains(&alpha) {
        bail!("--alpha must lie in [0, 1], got {alpha}");
    }
    let mut m = manifest("control", common, argv, &exp, data)?;
    let base = match mode {
        ControlMode::Passive => None,
        _ => Some(exp.controller(&load_data(&exp, data)?, mode.contraction(alpha))?),
    };
    let d = exp.evaluation_disturbances(&exp.scenario)?;
    let run = exp.run_mode(mode, base.as_ref(), alpha, &d, &exp.system.centers())?;
    let metrics = exp.metrics(&run.trajectory)?;
    run.write_jsonl(create(&common.out, "log.jsonl", &mut m)?)?;
    run.trajectory.write_csv(create(&common.out, "trajectory.csv", &mut m)?)?;
    let audit = audit(&run);
    write_json(
        &common.out,
        "metrics.json",
        &serde_json::json!({ "mode": mode, "contraction": mode.contraction(alpha), "metrics": metrics, "audit": audit }),
        &mut m,
    )?;
    if svg {
        let mut w = create(&common.out, "levels.svg", &mut m)?;
        w.write_all(level_chart(&exp, &run.trajectory, mode.label()).as_bytes())?;
    }
    println!(
        "{}: MAE {:.4e} m, max deviation {:.4} m, violation {:.2} %, energy {:.3} kWh/step",
        mode.label(),
        metrics.mae,
        metrics.max_deviation,
        100.0 * metrics.violation_pct,
        metrics.avg_energy
    );
    println!(
        "audit: {} dominance violations, {} pump domain violations, {} passive fallbacks",
        audit.dominance_violations, audit.domain_violations, audit.passive_fallbacks
    );
    m.finish(&common.out)?;
    if audit.dominance_violations > 0 || audit.domain_violations > 0 {
        bail!("closed-loop audit failed");
    }
    Ok(())
}

pub fn compare(common: &Common, argv: &[String], data: Option<&Path>, alpha: Option<f64>, steps: Option<usize>) -> Result<()> {
    let mut exp = load_experiment(common)?;
    if let Some(s) = common.seed {
        exp.scenario.seed = s;
    }
    if let Some(n) = steps {
        exp.evaluation.steps = n;
    }
    let mut m = manifest("compare", common, argv, &exp, data)?;
    let base = exp.controller(&load_data(&exp, data)?, 1.0)?;
    let alpha = match alpha {
        Some(a) if (0.0..=1.0).contains(&a) => a,
        Some(a) => bail!("--alpha must lie in [0, 1], got {a}"),
        None => {
            log::info!("no --alpha given; tuning first");
            let report = exp.tune(&base, &exp.tuning_scenarios())?;
            println!("tuned alpha* = {:.4}", report.alpha_star);
            report.alpha_star
        }
    };
    let report = exp.compare(Some(&base), alpha)?;
    for row in &report.rows {
        if let Some(run) = &row.run {
            let name = format!("log_{}.jsonl", serde_json::to_value(row.mode)?.as_str().unwrap_or("run"));
            run.write_jsonl(create(&common.out, &name, &mut m)?)?;
        }
    }
    let table = report.to_table();
    create(&common.out, "report.txt", &mut m)?.write_all(table.as_bytes())?;
    write_json(&common.out, "report.json", &report, &mut m)?;
    print!("{table}");
    m.finish(&common.out)?;
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        bail!("{failed} controller run(s) failed");
    }
    Ok(())
}
