#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dofc_core::config::{load_scenario, NetworkConfig, NetworkModel, Scenario};
use dofc_core::controller::{ControlMode, ControllerGains, CostModel, QuadraticCost};
use dofc_core::network::{Line, PowerNetwork, Topology};
use dofc_core::plant::BusParams;
use dofc_core::simulator::ClosedLoop;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(&repo_path(&format!("configs/{name}"))).expect("shipped scenario loads")
}

pub fn ieee39() -> NetworkModel {
    NetworkConfig::load(&repo_path("configs/ieee39.cfg")).unwrap().build().unwrap()
}

/// Random connected multi-area instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub topo: Topology,
    pub params: BusParams,
    pub costs: CostModel,
}

impl Instance {
    pub fn closed_loop(&self, alpha: f64, k: f64, mode: ControlMode) -> ClosedLoop {
        let gains = ControllerGains::uniform(&self.topo, alpha, k, self.params.inertia.clone());
        ClosedLoop::new(self.topo.clone(), self.params.clone(), gains, self.costs.clone(), mode).unwrap()
    }
}

/// Builds an instance with `n` in `n_range` buses and up to `max_areas`
/// areas. Each area is internally connected by a random spanning tree,
/// consecutive areas are joined by one tie line, and a few extra lines are
/// sprinkled on top.
pub fn random_instance(seed: u64, n_range: (usize, usize), max_areas: usize) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(n_range.0..=n_range.1);
    let k = rng.gen_range(1..=max_areas.min(n));
    let ng = rng.gen_range(1..n);

    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut areas = vec![0; n];
    for (pos, &bus) in order.iter().enumerate() {
        areas[bus] = if pos < k { pos } else { rng.gen_range(0..k) };
    }
    let members: Vec<Vec<usize>> = (0..k).map(|s| (0..n).filter(|&i| areas[i] == s).collect()).collect();

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let add = |a: usize, b: usize, pairs: &mut Vec<(usize, usize)>| {
        if a != b && !pairs.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            pairs.push((a, b));
        }
    };
    for m in &members {
        for i in 1..m.len() {
            let j = rng.gen_range(0..i);
            add(m[i], m[j], &mut pairs);
        }
    }
    for s in 1..k {
        let a = members[s - 1][rng.gen_range(0..members[s - 1].len())];
        let b = members[s][rng.gen_range(0..members[s].len())];
        add(a, b, &mut pairs);
    }
    for _ in 0..rng.gen_range(0..=n / 2) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        add(a, b, &mut pairs);
    }
    let lines = pairs
        .into_iter()
        .map(|(from, to)| Line {
            from,
            to,
            susceptance: rng.gen_range(5.0..30.0),
        })
        .collect();

    let mut tie: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let mean = tie.iter().sum::<f64>() / k as f64;
    tie.iter_mut().for_each(|t| *t -= mean);
    tie[k - 1] = -tie[..k - 1].iter().sum::<f64>();

    let network = PowerNetwork::new(n, ng, lines, areas, tie).unwrap();
    let topo = Topology::mirrored(network).unwrap();
    let params = BusParams {
        inertia: (0..ng).map(|_| rng.gen_range(5.0..15.0)).collect(),
        damping: (0..n).map(|_| rng.gen_range(0.8..1.2)).collect(),
        time_constant: (0..ng).map(|_| rng.gen_range(0.2..0.5)).collect(),
        droop: vec![0.05; ng],
        base_load: (0..n - ng).map(|_| rng.gen_range(0.0..2.0)).collect(),
    };
    let costs = CostModel::new(
        (0..n)
            .map(|i| {
                let c1 = rng.gen_range(1.0..5.0);
                let c2 = rng.gen_range(5.0..11.0);
                if i < ng {
                    QuadraticCost::new(c1, c2, 10.0)
                } else {
                    QuadraticCost::new(-c1, c2, 10.0)
                }
            })
            .collect(),
        &topo,
    )
    .unwrap();
    Instance { topo, params, costs }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Two generators with c1 = 2 and 4 feeding one controllable load.
pub fn desk_instance() -> (Topology, CostModel) {
    let line = |from, to| Line {
        from,
        to,
        susceptance: 10.0,
    };
    let net = PowerNetwork::new(3, 2, vec![line(0, 2), line(1, 2)], vec![0; 3], vec![0.0]).unwrap();
    let topo = Topology::mirrored(net).unwrap();
    let costs = CostModel::new(
        vec![
            QuadraticCost::new(2.0, 1.0, 0.0),
            QuadraticCost::new(4.0, 0.5, 0.0),
            QuadraticCost::new(-3.0, 2.0, 0.0),
        ],
        &topo,
    )
    .unwrap();
    (topo, costs)
}

/// Exhaustive search over (P_1, d) with P_2 eliminated by the balance
/// constraint: a 1e-3 lattice on [-2, 2]^2, then a 1e-5 lattice around the
/// best point.
pub fn grid_minimum(costs: &CostModel, r: f64) -> (f64, f64, f64) {
    let f = |p1: f64, d: f64| {
        let p2 = r + d - p1;
        costs.get(0).value(p1) + costs.get(1).value(p2) - costs.get(2).value(d)
    };
    let search = |c1: f64, c2: f64, half: f64, h: f64| {
        let steps = (2.0 * half / h).round() as i64;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=steps {
            let p1 = c1 - half + i as f64 * h;
            for j in 0..=steps {
                let d = c2 - half + j as f64 * h;
                let v = f(p1, d);
                if v < best.0 {
                    best = (v, p1, d);
                }
            }
        }
        (best.1, best.2)
    };
    let (p1, d) = search(0.0, 0.0, 2.0, 1e-3);
    let (p1, d) = search(p1, d, 2e-3, 1e-5);
    (p1, r + d - p1, d)
}
