mod common;

use proptest::prelude::*;

use common::{ieee39, max_abs_diff, random_instance};
use dofc_core::network::{Line, PowerNetwork, Topology};
use dofc_core::plant::{line_flows, load_bus_freq, plant_rhs, solve_power_flow, BusParams, PlantState};
use dofc_core::Error;

fn two_bus() -> (Topology, BusParams) {
    let net = PowerNetwork::new(
        2,
        1,
        vec![Line {
            from: 0,
            to: 1,
            susceptance: 4.0,
        }],
        vec![0, 0],
        vec![0.0],
    )
    .unwrap();
    let params = BusParams {
        inertia: vec![10.0],
        damping: vec![1.0, 2.0],
        time_constant: vec![0.3],
        droop: vec![0.05],
        base_load: vec![0.5],
    };
    (Topology::mirrored(net).unwrap(), params)
}

#[test]
fn flows_follow_sine_law() {
    let f = line_flows(&[0.0, std::f64::consts::FRAC_PI_6, -0.1], &[2.0, 4.0, 1.0]);
    assert_eq!(f[0], 0.0);
    assert!((f[1] - 2.0).abs() < 1e-15);
    assert!((f[2] + 0.1f64.sin()).abs() < 1e-15);
}

#[test]
fn load_frequency_is_algebraic() {
    let (topo, params) = two_bus();
    // line 0 -> 1 carries 4 sin(0.1) towards the load, so C_pL P = -4 sin(0.1)
    let flow = 4.0 * 0.1f64.sin();
    let w = load_bus_freq(&[0.1], &[0.5], &[flow], &topo, &params).unwrap();
    assert!((w[0] - (-(0.1 + 0.5 - flow) / 2.0)).abs() < 1e-15);
}

#[test]
fn zero_load_damping_is_rejected() {
    let (topo, mut params) = two_bus();
    params.damping[1] = 0.0;
    assert!(matches!(
        load_bus_freq(&[0.0], &[0.5], &[0.0], &topo, &params),
        Err(Error::ZeroLoadDamping { bus: 2 })
    ));
    assert!(params.validate(&topo).is_err());
}

#[test]
fn balanced_operating_point_is_stationary() {
    let (topo, params) = two_bus();
    // generator covers r + d through the line at zero frequency
    let (r, d) = (0.5, 0.1);
    let xi = ((r + d) / 4.0f64).asin();
    let p = r + d;
    let state = PlantState {
        xi: vec![xi],
        omega_g: vec![0.0],
        p_m: vec![p],
        p_c: vec![p],
        d: vec![d],
    };
    let der = plant_rhs(&state, &[r], &params, &topo).unwrap();
    assert!(der.xi[0].abs() < 1e-15 && der.omega_g[0].abs() < 1e-15 && der.p_m[0].abs() < 1e-15);
}

#[test]
fn swing_and_governor_signs() {
    let (topo, params) = two_bus();
    let state = PlantState {
        xi: vec![0.0],
        omega_g: vec![0.01],
        p_m: vec![0.2],
        p_c: vec![0.0],
        d: vec![0.0],
    };
    let der = plant_rhs(&state, &[0.0], &params, &topo).unwrap();
    // M w' = -D w + P_m, T P_m' = -w/R - P_m + P_c
    assert!((der.omega_g[0] - (-0.01 + 0.2) / 10.0).abs() < 1e-15);
    assert!((der.p_m[0] - (-0.01 / 0.05 - 0.2) / 0.3).abs() < 1e-14);
    // load bus frequency is zero here, so xi' = w_G
    assert!((der.xi[0] - 0.01).abs() < 1e-15);
}

#[test]
fn ieee39_power_flow_matches_injections() {
    let model = ieee39();
    let topo = &model.topo;
    let mut s = vec![0.0; topo.n()];
    let total: f64 = model.params.base_load.iter().sum();
    for (i, v) in s.iter_mut().enumerate().take(topo.ng()) {
        *v = total / topo.ng() as f64 + 0.1 * (i as f64 - 4.5);
    }
    for j in 0..topo.nl() {
        s[topo.ng() + j] = -model.params.base_load[j];
    }
    let xi = solve_power_flow(topo, &s).unwrap();
    let net = topo.net_outflow(&line_flows(&xi, &topo.susceptances()));
    assert!(max_abs_diff(&net, &s) < 1e-10);
    assert!(xi.iter().all(|x| x.abs() < std::f64::consts::FRAC_PI_2));
}

#[test]
fn power_flow_rejects_overload_and_imbalance() {
    let (topo, _) = two_bus();
    assert!(matches!(solve_power_flow(&topo, &[5.0, -5.0]), Err(Error::NoNormalOperatingPoint(_))));
    assert!(matches!(solve_power_flow(&topo, &[1.0, -0.5]), Err(Error::NoNormalOperatingPoint(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_flow_round_trip(seed in any::<u64>(), scale in 0.0..0.3f64) {
        let inst = random_instance(seed, (3, 8), 3);
        let topo = &inst.topo;
        let n = topo.n();
        let mut s: Vec<f64> = (0..n).map(|i| scale * ((i as f64 + 1.0) * 2.3).sin()).collect();
        let mean = s.iter().sum::<f64>() / n as f64;
        s.iter_mut().for_each(|v| *v -= mean);
        let xi = solve_power_flow(topo, &s).unwrap();
        let net = topo.net_outflow(&line_flows(&xi, &topo.susceptances()));
        prop_assert!(max_abs_diff(&net, &s) < 1e-10);
    }
}
