mod common;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{max_abs_diff, random_instance, scenario};
use dofc_core::config::ControllerSelection;
use dofc_core::controller::ControlMode;
use dofc_core::scenario::{build_closed_loop, run_distributed, simulate, RunOptions};
use dofc_core::simulator::{
    energy_w, find_equilibrium, integrate, lyapunov_v, rhs_norm, simulate as simulate_trajectory,
    solve_predisturbance_equilibrium, Anchors, ClosedLoop, ClosedLoopState, Dynamics, LoadEvent, StepControl,
};
use dofc_core::{Error, Result};

/// `x' = a x + load`.
struct Linear(f64);

impl Dynamics for Linear {
    fn dim(&self) -> usize {
        1
    }
    fn n_loads(&self) -> usize {
        1
    }
    fn rhs(&self, x: &[f64], load: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = self.0 * x[0] + load[0];
        Ok(())
    }
}

/// `x' = x^2`, which blows up at `t = 1/x0`.
struct Blowup;

impl Dynamics for Blowup {
    fn dim(&self) -> usize {
        1
    }
    fn n_loads(&self) -> usize {
        0
    }
    fn rhs(&self, x: &[f64], _: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = x[0] * x[0];
        Ok(())
    }
}

fn rk4(step: f64) -> StepControl {
    StepControl::Rk4 { step }
}

fn final_state<D: Dynamics>(sys: &D, x0: &[f64], load: &[f64], t_end: f64, ctl: &StepControl, ev: &[LoadEvent]) -> Vec<f64> {
    integrate(sys, x0, load, 0.0, t_end, ctl, ev, |_, _, _| {}).unwrap()
}

#[test]
fn rk4_is_fourth_order() {
    let exact = (-2.0f64).exp();
    let err = |h: f64| (final_state(&Linear(-1.0), &[1.0], &[0.0], 2.0, &rk4(h), &[])[0] - exact).abs();
    let ratio = err(0.1) / err(0.05);
    assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
}

#[test]
fn dormand_prince_meets_tolerance() {
    let ctl = StepControl::DormandPrince {
        rtol: 1e-10,
        atol: 1e-12,
        max_step: 0.5,
    };
    let x = final_state(&Linear(-1.0), &[1.0], &[0.0], 3.0, &ctl, &[]);
    assert!((x[0] - (-3.0f64).exp()).abs() < 1e-9);
}

#[test]
fn load_events_are_right_continuous() {
    let ev = [LoadEvent {
        time: 1.0,
        load: 0,
        delta: 1.0,
    }];
    let mut seen = Vec::new();
    let x = integrate(&Linear(0.0), &[0.0], &[0.0], 0.0, 2.0, &rk4(0.25), &ev, |t, _, r| seen.push((t, r[0]))).unwrap();
    assert!((x[0] - 1.0).abs() < 1e-14);
    assert!(seen.contains(&(1.0, 1.0)));
    assert!(seen.contains(&(0.75, 0.0)));
}

#[test]
fn blow_up_is_reported_as_divergence() {
    match integrate(&Blowup, &[1.0], &[], 0.0, 2.0, &rk4(1e-3), &[], |_, _, _| {}) {
        Err(Error::Diverged { time }) => assert!(time > 0.9 && time < 1.01, "{time}"),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn sampled_trajectory_includes_end_points() {
    let traj = simulate_trajectory(&Linear(-1.0), &[1.0], &[0.0], 0.0, 1.0, &rk4(0.01), &[], 0.1).unwrap();
    assert_eq!(traj.len(), 11);
    assert_eq!(traj.times[0], 0.0);
    assert!((traj.times[10] - 1.0).abs() < 1e-12);
}

fn ieee39_loop() -> (ClosedLoop, dofc_core::config::Scenario) {
    let scn = scenario("ieee39_step.cfg");
    (build_closed_loop(&scn).unwrap(), scn)
}

fn bus16_load(scn: &dofc_core::config::Scenario) -> usize {
    scn.model.topo.network.bus_by_label(16).unwrap() - scn.model.topo.ng()
}

#[test]
fn predisturbance_equilibrium_is_stationary_and_optimal() {
    let (sys, scn) = ieee39_loop();
    let eq = solve_predisturbance_equilibrium(&sys).unwrap();
    let base = &scn.model.params.base_load;
    assert!(rhs_norm(&sys, &eq.to_vec(), base).unwrap() < 1e-9);

    let problem = dofc_core::oracle::OlfcProblem::new(&scn.model.topo, &scn.model.costs, base.clone());
    let opt = dofc_core::oracle::solve_olfc_kkt(&problem).unwrap();
    assert!(max_abs_diff(&eq.p_m, &opt.p_m) < 1e-8);
    assert!(max_abs_diff(&eq.d, &opt.d) < 1e-8);
    assert!(max_abs_diff(&eq.lambda, &opt.lambda) < 1e-8);
    assert!(eq.omega_g.iter().all(|w| w.abs() < 1e-12));
    assert!(max_abs_diff(&eq.p_c, &eq.p_m) < 1e-12);
    // zero anchors
    assert!(eq.phi.iter().sum::<f64>().abs() < 1e-10);
    assert!(eq.gamma.iter().sum::<f64>().abs() < 1e-10);
}

#[test]
fn post_disturbance_equilibrium_identities() {
    let (sys, scn) = ieee39_loop();
    let topo = &scn.model.topo;
    let n = topo.n();
    let mut load = scn.model.params.base_load.clone();
    load[bus16_load(&scn)] += 0.13;
    let anchors = Anchors {
        phi_sum: 0.3,
        gamma_sum: -0.2,
        z_area: vec![0.1, -0.4],
    };
    let eq = find_equilibrium(&sys, &load, &anchors).unwrap();
    assert!(rhs_norm(&sys, &eq.to_vec(), &load).unwrap() < 1e-9);

    let problem = dofc_core::oracle::OlfcProblem::new(topo, &scn.model.costs, load.clone());
    let opt = dofc_core::oracle::solve_olfc_kkt(&problem).unwrap();
    assert!(max_abs_diff(&eq.p_m, &opt.p_m) < 1e-8);
    assert!(max_abs_diff(&eq.d, &opt.d) < 1e-8);

    assert!((eq.phi.iter().sum::<f64>() - 0.3).abs() < 1e-10);
    assert!((eq.gamma.iter().sum::<f64>() + 0.2).abs() < 1e-10);
    for s in 0..2 {
        let z: f64 = topo.network.area_members(s).iter().map(|&i| eq.z[i]).sum();
        assert!((z - anchors.z_area[s]).abs() < 1e-10);
    }
    // gamma* = alpha lambda* - mean(alpha lambda*) + 1'gamma(0)/n
    let al: Vec<f64> = (0..n).map(|i| sys.gains.alpha[i] * eq.lambda[i]).collect();
    let mean = al.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        assert!((eq.gamma[i] - (al[i] - mean - 0.2 / n as f64)).abs() < 1e-10);
    }
}

#[test]
fn gamma_anchor_moves_only_gamma() {
    let (sys, scn) = ieee39_loop();
    let load = scn.model.params.base_load.clone();
    let a = find_equilibrium(&sys, &load, &Anchors::zero(2)).unwrap();
    let b = find_equilibrium(
        &sys,
        &load,
        &Anchors {
            gamma_sum: 1.5,
            ..Anchors::zero(2)
        },
    )
    .unwrap();
    for (x, y) in [(&a.p_m, &b.p_m), (&a.d, &b.d), (&a.xi, &b.xi), (&a.lambda, &b.lambda)] {
        assert!(max_abs_diff(x, y) < 1e-10);
    }
    assert!(max_abs_diff(&a.gamma, &b.gamma) > 1e-2);
}

#[test]
fn zero_disturbance_keeps_zero_anchor_equilibrium() {
    let (sys, scn) = ieee39_loop();
    let pre = solve_predisturbance_equilibrium(&sys).unwrap();
    let again = find_equilibrium(&sys, &scn.model.params.base_load, &Anchors::zero(2)).unwrap();
    assert!(max_abs_diff(&pre.to_vec(), &again.to_vec()) < 1e-10);
}

#[test]
fn inertia_estimates_do_not_move_the_equilibrium() {
    let scn = scenario("ieee39_robust.cfg");
    let robust = solve_predisturbance_equilibrium(&build_closed_loop(&scn).unwrap()).unwrap();
    let (sys, _) = ieee39_loop();
    let exact = solve_predisturbance_equilibrium(&sys).unwrap();
    assert!(max_abs_diff(&robust.p_m, &exact.p_m) < 1e-10);
    assert!(max_abs_diff(&robust.lambda, &exact.lambda) < 1e-10);
}

#[test]
fn energy_function_is_nonnegative_on_domain() {
    let (sys, _) = ieee39_loop();
    let eq = solve_predisturbance_equilibrium(&sys).unwrap();
    let t = sys.topo().susceptances();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 10_000 {
        // sample xi with |xi - xi* + 2 xi*| < pi on every line
        let xi: Vec<f64> = eq
            .xi
            .iter()
            .map(|&s| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) - s)
            .collect();
        let w = energy_w(&xi, &eq.xi, &t);
        if !w.in_domain {
            continue;
        }
        assert!(w.value >= -1e-12, "{}", w.value);
        checked += 1;
    }
    assert_eq!(energy_w(&eq.xi, &eq.xi, &t).value, 0.0);
}

#[test]
fn energy_function_second_order_taylor() {
    let (sys, _) = ieee39_loop();
    let eq = solve_predisturbance_equilibrium(&sys).unwrap();
    let t = sys.topo().susceptances();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let mut dir: Vec<f64> = (0..t.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v *= 1e-4 / norm);
        let xi: Vec<f64> = eq.xi.iter().zip(&dir).map(|(a, b)| a + b).collect();
        let w = energy_w(&xi, &eq.xi, &t).value;
        let quad: f64 = 0.5 * dir.iter().zip(&eq.xi).zip(&t).map(|((d, s), t)| t * s.cos() * d * d).sum::<f64>();
        assert!(((w - quad) / quad).abs() < 1e-4, "{w} vs {quad}");
    }
}

#[test]
fn lyapunov_vanishes_only_at_equilibrium() {
    let (sys, _) = ieee39_loop();
    let eq = solve_predisturbance_equilibrium(&sys).unwrap().to_vec();
    assert_eq!(lyapunov_v(&sys, &eq, &eq), 0.0);
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..1000 {
        let x: Vec<f64> = eq.iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
        assert!(lyapunov_v(&sys, &x, &eq) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The closed loop conserves 1'phi, 1'gamma (schedules sum to zero)
    /// and the area sums E z at every state.
    #[test]
    fn conserved_quantities_have_zero_derivative(seed in any::<u64>()) {
        let inst = random_instance(seed, (3, 8), 3);
        let sys = inst.closed_loop(0.8, 1.0, ControlMode::Distributed);
        let l = sys.layout();
        let mut rng = StdRng::seed_from_u64(seed);
        let x: Vec<f64> = (0..l.dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut dx = vec![0.0; l.dim()];
        sys.rhs(&x, &inst.params.base_load, &mut dx).unwrap();
        prop_assert!(dx[l.phi()].iter().sum::<f64>().abs() < 1e-12);
        prop_assert!(dx[l.gamma()].iter().sum::<f64>().abs() < 1e-12);
        for s in 0..inst.topo.k() {
            let ez: f64 = inst.topo.network.area_members(s).iter().map(|&i| dx[l.z()][i]).sum();
            prop_assert!(ez.abs() < 1e-12);
        }
    }
}

/// Halving the step near the 1 ms default shrinks the terminal difference
/// by about 16. The horizon is kept short so truncation error stays well
/// above round-off; 4 ms is already outside the RK4 stability region of the
/// fast line-angle modes.
#[test]
fn step_halving_shows_high_order() {
    let (sys, scn) = ieee39_loop();
    let x0 = solve_predisturbance_equilibrium(&sys).unwrap().to_vec();
    let ev = [LoadEvent {
        time: 0.5,
        load: bus16_load(&scn),
        delta: 0.13,
    }];
    let base = &scn.model.params.base_load;
    let run = |h| final_state(&sys, &x0, base, 1.5, &rk4(h), &ev);
    let (a, b, c) = (run(2e-3), run(1e-3), run(5e-4));
    let ratio = max_abs_diff(&a, &b) / max_abs_diff(&b, &c);
    assert!(ratio >= 8.0, "ratio {ratio}");
}

#[test]
fn rk4_and_adaptive_agree_on_ieee39() {
    let (sys, scn) = ieee39_loop();
    let x0 = solve_predisturbance_equilibrium(&sys).unwrap().to_vec();
    let ev = [LoadEvent {
        time: 0.5,
        load: bus16_load(&scn),
        delta: 0.13,
    }];
    let base = &scn.model.params.base_load;
    let a = final_state(&sys, &x0, base, 5.0, &rk4(1e-3), &ev);
    let ctl = StepControl::DormandPrince {
        rtol: 1e-10,
        atol: 1e-12,
        max_step: 0.05,
    };
    let b = final_state(&sys, &x0, base, 5.0, &ctl, &ev);
    assert!(max_abs_diff(&a, &b) < 1e-7, "{}", max_abs_diff(&a, &b));
}

#[test]
fn zero_disturbance_trajectory_is_constant() {
    let mut scn = scenario("ieee39_step.cfg");
    scn.events.iter_mut().for_each(|e| e.delta = 0.0);
    scn.t_end = 5.0;
    scn.controller = ControllerSelection::Distributed;
    let run = run_distributed(&scn).unwrap();
    assert!(max_abs_diff(&run.final_state.to_vec(), &run.initial.to_vec()) < 1e-10);
    let omega = run.table.column("omega_16").unwrap();
    assert!(omega.iter().all(|w| w.abs() < 1e-10));
    let out = simulate(&scn, &RunOptions::default()).unwrap();
    assert!(out.report.pass, "{:#?}", out.report.checks);
}

#[test]
fn identical_runs_are_bit_identical() {
    let mut scn = scenario("ieee39_step.cfg");
    scn.t_end = 3.0;
    let a = simulate(&scn, &RunOptions::default()).unwrap();
    let b = simulate(&scn, &RunOptions::default()).unwrap();
    let (da, db) = (a.distributed.unwrap(), b.distributed.unwrap());
    assert_eq!(da.table.to_csv(), db.table.to_csv());
    assert_eq!(a.agc.unwrap().table.to_csv(), b.agc.unwrap().table.to_csv());
}

#[test]
fn state_layout_round_trip() {
    let (sys, _) = ieee39_loop();
    let eq = solve_predisturbance_equilibrium(&sys).unwrap();
    let back = ClosedLoopState::from_slice(sys.layout(), &eq.to_vec()).unwrap();
    assert_eq!(back, eq);
    assert!(ClosedLoopState::from_slice(sys.layout(), &[0.0; 3]).is_err());
}
