use ezdeepc::hydro::*;
use ezdeepc::scenario::{desk_experiment, full_experiment, generate_disturbances};
use proptest::prelude::*;

const G: f64 = 9.81;

fn weir() -> Weir {
    Weir { upstream: 0, downstream: 1, discharge_coeff: 0.61, crest_width: 6.0, height_bounds: (7.0, 12.0) }
}

fn gate(direction: FlowDirection) -> SluiceGate {
    SluiceGate { branch: 0, river: 0, discharge_coeff: 0.61, width: 5.0, max_opening: 0.6, direction }
}

proptest! {
    #[test]
    fn weir_flow_is_nonnegative_and_monotone(crest in 7.0..10.0f64, h in -1.0..2.0f64, dh in 0.0..0.5f64) {
        let w = weir();
        let q = weir_discharge(crest + h, crest, &w, G);
        prop_assert!(q >= 0.0);
        if h <= 0.0 {
            prop_assert_eq!(q, 0.0);
        }
        prop_assert!(weir_discharge(crest + h + dh, crest, &w, G) >= q);
    }

    #[test]
    fn gate_never_flows_against_its_direction(branch in 6.0..10.0f64, river in 6.0..10.0f64, ratio in 0.0..1.0f64) {
        let inflow = gate_discharge(branch, river, ratio, &gate(FlowDirection::Inflow), G);
        let outflow = gate_discharge(branch, river, ratio, &gate(FlowDirection::Outflow), G);
        prop_assert!(inflow >= 0.0 && outflow >= 0.0);
        if river <= branch {
            prop_assert_eq!(inflow, 0.0);
        }
        if branch <= river {
            prop_assert_eq!(outflow, 0.0);
        }
    }

    #[test]
    fn affinity_scaling_holds(q in 0.0..8.0f64, n in 0.48..1.0f64, s in 0.1..4.0f64) {
        let pump = Pump::with_direction(FlowDirection::Outflow);
        let base = pump_head_capacity(q, n, &pump);
        let scaled = pump_head_capacity(s * q, s * n, &pump);
        prop_assert!((scaled - s * s * base).abs() <= 1e-12 * (s * s * base).abs().max(1e-12));
    }

    #[test]
    fn operating_point_residual_is_tiny(n in 0.48..1.0f64, hs in -3.0..8.0f64) {
        let pump = Pump::with_direction(FlowDirection::Inflow);
        let pipe = PipeSection::default();
        if let Ok(q) = solve_pump_operating_point(n, hs, &pump, &pipe) {
            prop_assert!(q >= 0.0);
            prop_assert!((pump_head_capacity(q, n, &pump) - demand_head(q, hs, &pipe)).abs() <= 1e-9);
        }
    }

    #[test]
    fn power_is_zero_at_shutdown_and_continuous(q in 0.0..8.0f64, n in 0.48..1.0f64) {
        let pump = Pump::with_direction(FlowDirection::Outflow);
        prop_assert_eq!(pump_power(q, 0.0, &pump), 0.0);
        let p = pump_power(q, n, &pump);
        let near = pump_power(q + 1e-7, n + 1e-7, &pump);
        prop_assert!((p - near).abs() < 1e-3);
    }

    #[test]
    fn demand_friction_is_even(q in 0.0..10.0f64, hs in -2.0..5.0f64) {
        let pipe = PipeSection::default();
        prop_assert_eq!(demand_head(q, hs, &pipe), demand_head(-q, hs, &pipe));
        prop_assert!(demand_head(q + 0.1, hs, &pipe) > demand_head(q, hs, &pipe));
    }
}

#[test]
fn wide_static_head_range_keeps_full_speed_interval() {
    let pump = Pump::with_direction(FlowDirection::Outflow);
    let pipe = PipeSection::default();
    let iv = feasible_speed_interval(2.0, &pump, &pipe).unwrap();
    assert!((iv.lower - 120.0).abs() < 1e-6 && (iv.upper - 250.0).abs() < 1e-6);
    assert!(feasible_speed_interval(20.0, &pump, &pipe).is_none());
}

#[test]
fn equilibrium_without_flows_is_unchanged() {
    let exp = desk_experiment().unwrap();
    let plant = &exp.system;
    let level = 8.5;
    let levels = vec![level; plant.branches.len()];
    let d = Disturbance { river_levels: vec![level; plant.stations.len()], inflows: vec![0.0; plant.branches.len()] };
    let layout = plant.layout();
    let mut u = vec![0.0; layout.dim()];
    for i in 0..layout.weirs {
        u[layout.weir(i)] = level;
    }
    let out = step(plant, &levels, &u, &d).unwrap();
    for (a, b) in out.levels.iter().zip(&levels) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(out.energy_kwh, 0.0);
}

#[test]
fn mass_balance_closes_on_a_long_run() {
    let exp = desk_experiment().unwrap();
    let plant = &exp.system;
    let d = generate_disturbances(plant, &exp.scenario.with_steps(500)).unwrap();
    let layout = plant.layout();
    let mut levels = plant.centers();
    for (k, dk) in d.iter().enumerate() {
        let mut u = vec![0.0; layout.dim()];
        for (i, w) in plant.weirs.iter().enumerate() {
            u[layout.weir(i)] = plant.branches[w.upstream].level_center - 0.15;
        }
        for s in 0..layout.gates {
            u[layout.gate(s)] = 0.3;
        }
        u[layout.pump(1)] = if k % 7 < 3 { 180.0 } else { 0.0 };
        let out = step(plant, &levels, &u, dk).unwrap();
        for (b, br) in plant.branches.iter().enumerate() {
            let dh = out.levels[b] - levels[b];
            assert!((dh - out.flows.net_volume[b] / br.backwater_area).abs() <= 1e-6, "step {k} branch {b}");
        }
        levels = out.levels;
    }
    assert!(levels.iter().all(|v| v.is_finite()));
}

#[test]
fn pump_energy_matches_power_over_the_period() {
    let exp = desk_experiment().unwrap();
    let plant = &exp.system;
    let layout = plant.layout();
    let levels = plant.centers();
    let mut u = vec![0.0; layout.dim()];
    for (i, w) in plant.weirs.iter().enumerate() {
        u[layout.weir(i)] = plant.branches[w.upstream].level_center;
    }
    // 140 rpm lies inside the feasible interval at a 0.5 m static head
    u[layout.pump(1)] = 140.0;
    let d = Disturbance { river_levels: vec![8.0, 8.5], inflows: vec![0.0; plant.branches.len()] };
    let out = step(plant, &levels, &u, &d).unwrap();
    assert!(out.energy_kwh > 0.0);
    assert!(out.flows.pump_discharge[1] > 0.0);
    // the static head barely moves over the period, so the average power is
    // close to the power at the initial operating point
    let st = &plant.stations[1];
    let n = st.pumps[0].normalized(140.0);
    let q = solve_pump_operating_point(n, 0.5, &st.pumps[0], &st.pipe).unwrap();
    let p0 = pump_power(q, n, &st.pumps[0]);
    let avg_kw = out.energy_kwh / plant.period_hours();
    assert!((avg_kw - p0).abs() < 0.05 * p0, "average {avg_kw} kW vs {p0} kW");
}

#[test]
fn clamped_inputs_are_reported() {
    let exp = desk_experiment().unwrap();
    let plant = &exp.system;
    let layout = plant.layout();
    let mut u = vec![0.0; layout.dim()];
    u[layout.weir(0)] = 20.0;
    u[layout.gate(0)] = 3.0;
    let (applied, clamped) = clamp_input(plant, &plant.centers(), &u);
    assert!(clamped.contains(&layout.weir(0)));
    assert!(clamped.contains(&layout.gate(0)));
    assert!(applied[layout.gate(0)] <= 1.0);
}

#[test]
fn full_plant_config_loads_and_simulates() {
    let exp = full_experiment().unwrap();
    let plant = &exp.system;
    assert_eq!(plant.branches.len(), 14);
    assert_eq!(plant.weirs.len(), 13);
    assert_eq!(plant.stations.len(), 4);
    let d = generate_disturbances(plant, &exp.scenario.with_steps(48)).unwrap();
    let layout = plant.layout();
    let mut levels = plant.centers();
    for dk in &d {
        let mut u = vec![0.0; layout.dim()];
        for (i, w) in plant.weirs.iter().enumerate() {
            u[layout.weir(i)] = plant.branches[w.upstream].level_center - 0.1;
        }
        levels = step(plant, &levels, &u, dk).unwrap().levels;
    }
    assert!(levels.iter().all(|v| v.is_finite()));
}
