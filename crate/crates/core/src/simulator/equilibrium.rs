//! Closed-loop equilibria.
//!
//! At rest the plant and the unit controllers sit at the dispatch optimum,
//! so the equilibrium is assembled from the dispatch oracle and a power-flow
//! solve. What remains (`phi`, `gamma`, `z`) is linear and determined up to
//! the conserved quantities `1'phi`, `1'gamma` and `E z`, which the caller
//! supplies as anchors.

use nalgebra::{DMatrix, DVector};

use crate::controller::law::ControlMode;
use crate::error::{Error, Result};
use crate::oracle::{solve_olfc_kkt, OlfcProblem};
use crate::plant::{check_len, line_flows, solve_power_flow};
use crate::simulator::dynamics::ClosedLoop;
use crate::simulator::integrate::{integrate, StepControl};
use crate::simulator::state::ClosedLoopState;
use crate::simulator::steady::rhs_norm;

/// Values of the conserved quantities that pin the equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    pub phi_sum: f64,
    pub gamma_sum: f64,
    /// `E z`, one entry per area.
    pub z_area: Vec<f64>,
}

impl Anchors {
    pub fn zero(k: usize) -> Self {
        Self {
            phi_sum: 0.0,
            gamma_sum: 0.0,
            z_area: vec![0.0; k],
        }
    }

    pub fn of_state(sys: &ClosedLoop, state: &ClosedLoopState) -> Self {
        let topo = sys.topo();
        let mut z_area = vec![0.0; topo.k()];
        for (i, z) in state.z.iter().enumerate() {
            z_area[topo.network.area_of(i)] += z;
        }
        Self {
            phi_sum: state.phi.iter().sum(),
            gamma_sum: state.gamma.iter().sum(),
            z_area,
        }
    }
}

/// Residual tolerance for a state to count as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Equilibrium for load `r` with the given anchors.
pub fn find_equilibrium(sys: &ClosedLoop, load: &[f64], anchors: &Anchors) -> Result<ClosedLoopState> {
    let topo = sys.topo();
    let (n, ng, k) = (topo.n(), topo.ng(), topo.k());
    check_len("load", topo.nl(), load.len())?;
    check_len("z anchors", k, anchors.z_area.len())?;

    let problem = OlfcProblem::new(topo, &sys.costs, load.to_vec());
    let opt = solve_olfc_kkt(&problem)?;
    let injections: Vec<f64> = (0..n)
        .map(|i| if i < ng { opt.p_m[i] } else { -(load[i - ng] + opt.d[i - ng]) })
        .collect();
    let xi = solve_power_flow(topo, &injections)?;
    let flows = line_flows(&xi, &topo.susceptances());
    let cp = DVector::from_vec(topo.net_outflow(&flows));

    let ones = DMatrix::from_element(n, n, 1.0 / n as f64);
    let phi_rhs = &cp + DVector::from_element(n, anchors.phi_sum / n as f64);
    let phi = (&topo.laplacian_full + ones)
        .lu()
        .solve(&phi_rhs)
        .ok_or_else(|| Error::InvalidCommGraph("communication Laplacian is not connected".into()))?;

    let alpha = &sys.gains.alpha;
    let alpha_lambda: Vec<f64> = (0..n).map(|i| alpha[i] * opt.lambda[i]).collect();
    let mean = alpha_lambda.iter().sum::<f64>() / n as f64;

    let (gamma, z) = match sys.mode {
        ControlMode::Distributed => {
            let gamma: Vec<f64> = alpha_lambda
                .iter()
                .map(|v| v - mean + anchors.gamma_sum / n as f64)
                .collect();
            let e = &topo.area_matrix;
            let pt = DVector::from_column_slice(topo.network.scheduled_tie());
            let rhs = &cp - &topo.selector * pt + e.transpose() * DVector::from_column_slice(&anchors.z_area);
            let z = (&topo.laplacian_intra + e.transpose() * e)
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::InvalidCommGraph("intra-area Laplacian is singular on E".into()))?;
            (gamma, z.as_slice().to_vec())
        }
        // gamma and z do not move in single-area mode; spread the anchors evenly
        ControlMode::SingleArea => {
            let z = (0..n)
                .map(|i| {
                    let s = topo.network.area_of(i);
                    anchors.z_area[s] / topo.network.area_members(s).len() as f64
                })
                .collect();
            (vec![anchors.gamma_sum / n as f64; n], z)
        }
    };

    Ok(ClosedLoopState {
        xi,
        omega_g: vec![0.0; ng],
        p_m: opt.p_m.clone(),
        p_c: opt.p_m,
        d: opt.d,
        lambda: opt.lambda,
        phi: phi.as_slice().to_vec(),
        gamma,
        z,
    })
}

/// Longest warm-up allowed when the direct construction misses the
/// residual target.
const WARMUP_HORIZON: f64 = 5000.0;

/// Operating point before any disturbance: the equilibrium for the base
/// load with every anchor at zero. Falls back to integrating from that
/// point when its residual exceeds [`EQUILIBRIUM_TOL`].
pub fn solve_predisturbance_equilibrium(sys: &ClosedLoop) -> Result<ClosedLoopState> {
    let load = sys.params().base_load.clone();
    let eq = find_equilibrium(sys, &load, &Anchors::zero(sys.topo().k()))?;
    let mut x = eq.to_vec();
    let residual = rhs_norm(sys, &x, &load)?;
    if residual < EQUILIBRIUM_TOL {
        return Ok(eq);
    }
    log::warn!("direct equilibrium residual {residual:e}; warming up by integration");
    let chunk = 10.0;
    let mut t = 0.0;
    let mut last = residual;
    while t < WARMUP_HORIZON {
        x = integrate(sys, &x, &load, t, t + chunk, &StepControl::default(), &[], |_, _, _| {})?;
        t += chunk;
        last = rhs_norm(sys, &x, &load)?;
        if last < EQUILIBRIUM_TOL {
            return ClosedLoopState::from_slice(sys.layout(), &x);
        }
    }
    Err(Error::NotConverged {
        what: "equilibrium warm-up",
        iterations: (WARMUP_HORIZON / chunk) as usize,
        residual: last,
    })
}
