mod common;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{desk_instance, grid_minimum, ieee39, max_abs_diff, random_instance, repo_path};
use dofc_core::config::NetworkConfig;
use dofc_core::oracle::{check_kkt, solve_olfc_kkt, solve_olfc_pgd, OlfcProblem};
use dofc_core::Error;

#[test]
fn grid_search_confirms_desk_instance() {
    let (topo, costs) = desk_instance();
    for r in [0.5, 0.8] {
        // 0.5 is the base demand, 0.8 the same after a 0.3 step
        let sol = solve_olfc_kkt(&OlfcProblem::new(&topo, &costs, vec![r])).unwrap();
        let (p1, p2, d) = grid_minimum(&costs, r);
        assert!((sol.p_m[0] - p1).abs() < 1e-3, "{} vs {p1}", sol.p_m[0]);
        assert!((sol.p_m[1] - p2).abs() < 1e-3, "{} vs {p2}", sol.p_m[1]);
        assert!((sol.d[0] - d).abs() < 1e-3, "{} vs {d}", sol.d[0]);
    }
}

#[test]
fn desk_instance_closed_form() {
    // Every unit sits at the same incremental cost
    // mu = 2 P1 + 1 = 4 P2 + 0.5 = 2 - 3 d with lambda = -mu, and the
    // balance P1 + P2 - d = r fixes mu.
    let (topo, costs) = desk_instance();
    let r = 0.8;
    let mu = (r + 2.0 / 3.0 + 0.5 + 0.125) / (0.5 + 0.25 + 1.0 / 3.0);
    let sol = solve_olfc_kkt(&OlfcProblem::new(&topo, &costs, vec![r])).unwrap();
    assert!((sol.p_m[0] - (mu - 1.0) / 2.0).abs() < 1e-12);
    assert!((sol.p_m[1] - (mu - 0.5) / 4.0).abs() < 1e-12);
    assert!((sol.d[0] - (2.0 - mu) / 3.0).abs() < 1e-12);
    assert!(sol.lambda.iter().all(|l| (l + mu).abs() < 1e-12), "{:?}", sol.lambda);
}

#[test]
fn kkt_and_gradient_oracles_agree_on_random_instances() {
    let mut worst = 0.0_f64;
    for seed in 0..100 {
        let inst = random_instance(seed, (3, 8), 3);
        let problem = OlfcProblem::new(&inst.topo, &inst.costs, inst.params.base_load.clone());
        let kkt = solve_olfc_kkt(&problem).unwrap();
        let pgd = solve_olfc_pgd(&problem).unwrap().solution;
        let gap = max_abs_diff(&kkt.p_m, &pgd.p_m)
            .max(max_abs_diff(&kkt.d, &pgd.d))
            .max(max_abs_diff(&kkt.area_price, &pgd.area_price));
        assert!(gap < 1e-6, "seed {seed}: gap {gap:e}");
        worst = worst.max(gap);
        let report = check_kkt(&kkt, &problem, 1e-9).unwrap();
        assert!(report.pass, "seed {seed}: {report:?}");
    }
    println!("largest oracle gap over 100 instances: {worst:e}");
}

#[test]
fn optimum_beats_feasible_perturbations() {
    let mut rng = StdRng::seed_from_u64(7);
    for seed in 0..20 {
        let inst = random_instance(seed, (3, 8), 3);
        let topo = &inst.topo;
        let problem = OlfcProblem::new(topo, &inst.costs, inst.params.base_load.clone());
        let sol = solve_olfc_kkt(&problem).unwrap();
        let best = problem.objective(&sol.p_m, &sol.d);
        for _ in 0..50 {
            // shift generation and load inside one area by the same amount
            let s = rng.gen_range(0..topo.k());
            let members = topo.network.area_members(s);
            let i = members[rng.gen_range(0..members.len())];
            let j = members[rng.gen_range(0..members.len())];
            let delta = rng.gen_range(-0.1..0.1);
            let (mut p_m, mut d) = (sol.p_m.clone(), sol.d.clone());
            let mut bump = |bus: usize, sign: f64| {
                if bus < topo.ng() {
                    p_m[bus] += sign * delta;
                } else {
                    d[bus - topo.ng()] -= sign * delta;
                }
            };
            bump(i, 1.0);
            bump(j, -1.0);
            assert!(problem.objective(&p_m, &d) >= best - 1e-12);
        }
    }
}

#[test]
fn ieee39_base_case_residuals() {
    let model = ieee39();
    let problem = OlfcProblem::new(&model.topo, &model.costs, model.params.base_load.clone());
    let sol = solve_olfc_kkt(&problem).unwrap();
    let report = check_kkt(&sol, &problem, 1e-9).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(report.max_residual() < 1e-9);
    // the two areas settle on different prices
    assert!((sol.area_price[0] - sol.area_price[1]).abs() > 1e-3);
}

#[test]
fn single_area_prices_are_uniform() {
    let model = NetworkConfig::load(&repo_path("configs/five_bus.cfg")).unwrap().build().unwrap();
    let problem = OlfcProblem::new(&model.topo, &model.costs, model.params.base_load.clone());
    let sol = solve_olfc_kkt(&problem).unwrap();
    let hi = sol.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = sol.lambda.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi - lo < 1e-9);
}

#[test]
fn unbalanced_schedule_is_infeasible_with_certificate() {
    let model = ieee39();
    let mut problem = OlfcProblem::new(&model.topo, &model.costs, model.params.base_load.clone());
    problem.scheduled_tie = vec![0.2, 0.1];
    match solve_olfc_kkt(&problem) {
        Err(Error::Infeasible { certificate, residual }) => {
            assert_eq!(certificate, vec![1.0, 1.0]);
            assert!((residual - 0.3).abs() < 1e-12);
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
    assert!(matches!(solve_olfc_pgd(&problem), Err(Error::Infeasible { .. })));
}

#[test]
fn perturbed_candidate_fails_kkt() {
    let model = ieee39();
    let problem = OlfcProblem::new(&model.topo, &model.costs, model.params.base_load.clone());
    let mut sol = solve_olfc_kkt(&problem).unwrap();
    sol.p_m[0] += 1e-3;
    let report = check_kkt(&sol, &problem, 1e-6).unwrap();
    assert!(!report.pass);
    assert!(report.generator_balance > 5e-4 && report.generator_stationarity > 1e-3);
}

#[test]
fn min_norm_flow_meets_area_schedule() {
    for seed in 0..30 {
        let inst = random_instance(seed, (3, 8), 3);
        let problem = OlfcProblem::new(&inst.topo, &inst.costs, inst.params.base_load.clone());
        let sol = solve_olfc_kkt(&problem).unwrap();
        let flows = problem.min_norm_flow(&sol.p_m, &sol.d);
        let dev = inst.topo.tie_deviation(&flows);
        assert!(dev.iter().all(|v| v.abs() < 1e-10), "seed {seed}: {dev:?}");
    }
}
