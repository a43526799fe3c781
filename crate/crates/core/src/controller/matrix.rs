//! Dense vectorized form of the controller, used to cross-check the per-bus
//! implementation. It is too slow for long simulations.

use nalgebra::DVector;

use crate::controller::cost::CostModel;
use crate::controller::gains::ControllerGains;
use crate::controller::law::{ControlMode, ControllerState};
use crate::error::Result;
use crate::network::Topology;
use crate::plant::{check_len, BusParams};

#[allow(clippy::too_many_arguments)]
pub fn controller_rhs_matrix(
    topo: &Topology,
    params: &BusParams,
    gains: &ControllerGains,
    costs: &CostModel,
    omega: &[f64],
    p_m: &[f64],
    flows: &[f64],
    state: &ControllerState,
    mode: ControlMode,
) -> Result<ControllerState> {
    let (n, ng) = (topo.n(), topo.ng());
    check_len("bus frequencies", n, omega.len())?;
    check_len("line flows", topo.n_lines(), flows.len())?;
    let v = |x: &[f64]| DVector::from_column_slice(x);
    let lc = &topo.laplacian_full;
    let l = &topo.laplacian_intra;

    let net = &topo.incidence * v(flows);
    let phi = v(&state.phi);
    let gamma = v(&state.gamma);
    let z = v(&state.z);
    let lc_phi = lc * &phi;
    let m_omega = DVector::from_iterator(n, gains.m_hat_full(n).iter().zip(omega).map(|(m, w)| m * w));
    let alpha_lambda = DVector::from_iterator(n, gains.alpha.iter().zip(&state.lambda).map(|(a, l)| a * l));

    let mut p_c = vec![0.0; ng];
    let mut lambda = vec![0.0; n];
    for i in 0..ng {
        let (c, a) = (costs.get(i), gains.alpha[i]);
        let target = c.inv_grad(-state.lambda[i] - gains.m_hat[i] * omega[i] / a);
        let aa = a * a * c.a();
        p_c[i] = p_m[i] - (1.0 + aa) * state.p_c[i] + aa * target;
        let r = params.droop[i];
        lambda[i] = (gains.k[i] * omega[i] - p_m[i] - a * r * state.p_c[i] + (1.0 + a * r) * target + net[i]
            - lc_phi[i])
            / a;
    }
    let mut d = vec![0.0; n - ng];
    for i in ng..n {
        let j = i - ng;
        let (c, a) = (costs.get(i), gains.alpha[i]);
        let target = c.inv_grad(-state.lambda[i]);
        let aa = a * a * c.a();
        d[j] = aa * state.d[j] - aa * target + omega[i];
        lambda[i] =
            (gains.k[i] * omega[i] + (1.0 + a) * state.d[j] - (1.0 + a) * target + net[i] - lc_phi[i]) / a;
    }

    let (phi_dot, gamma_dot, z_dot) = match mode {
        ControlMode::Distributed => {
            let pt = v(topo.network.scheduled_tie());
            (
                lc * &m_omega + lc * &alpha_lambda - lc * &gamma,
                -(l * &z) - l * &gamma + &lc_phi - &topo.selector * pt,
                l * &gamma,
            )
        }
        ControlMode::SingleArea => (lc * &m_omega + lc * &alpha_lambda, DVector::zeros(n), DVector::zeros(n)),
    };
    Ok(ControllerState {
        p_c,
        d,
        lambda,
        phi: phi_dot.as_slice().to_vec(),
        gamma: gamma_dot.as_slice().to_vec(),
        z: z_dot.as_slice().to_vec(),
    })
}
