//! Per-bus form of the distributed controller.
//!
//! Each bus evaluates its own derivatives from local measurements and the
//! messages it receives from cyber-connected peers. Nothing else is visible
//! to it, which is what the locality tests rely on.

use crate::controller::cost::{CostModel, QuadraticCost};
use crate::controller::gains::ControllerGains;
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::plant::{check_len, BusParams};

/// Which consensus dynamics the controller runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Full multi-area law with tie-line scheduling through `gamma` and `z`.
    #[default]
    Distributed,
    /// Single-area simplification: `gamma` and `z` are not used.
    SingleArea,
}

/// What bus `i` hears from one peer `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerMessage {
    pub weight: f64,
    pub intra_area: bool,
    /// `M_hat_j omega_j` (zero for load buses).
    pub m_omega: f64,
    pub alpha_lambda: f64,
    pub phi: f64,
    pub gamma: f64,
    /// Only shared with peers of the same area.
    pub z: Option<f64>,
}

/// Local physical measurements at one bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalObservation {
    pub omega: f64,
    /// Mechanical power; ignored on load buses.
    pub p_m: f64,
    /// `sum_e C_ie P_e` over the lines incident to the bus.
    pub net_outflow: f64,
}

/// Controller state held by one bus. `unit` is `P_c` on a generator bus and
/// `d` on a load bus.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalState {
    pub unit: f64,
    pub lambda: f64,
    pub phi: f64,
    pub gamma: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitKind {
    Generator { droop: f64 },
    Load,
}

/// Constant data one bus needs to run its controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusController {
    pub kind: UnitKind,
    pub cost: QuadraticCost,
    pub alpha: f64,
    pub k: f64,
    pub m_hat: f64,
    /// Scheduled export of the area if this is its designated bus, else 0.
    pub scheduled_export: f64,
}

impl BusController {
    /// Derivatives of the local controller state. Fails if a peer violates
    /// the information contract (`z` across areas, or missing inside one).
    pub fn rhs(
        &self,
        bus: usize,
        obs: LocalObservation,
        state: LocalState,
        peers: impl IntoIterator<Item = PeerMessage>,
        mode: ControlMode,
    ) -> Result<LocalState> {
        let alpha = self.alpha;
        let m_omega = self.m_hat * obs.omega;
        let alpha_lambda = alpha * state.lambda;

        let (mut l_phi, mut l_m_omega, mut l_alpha_lambda, mut l_gamma) = (0.0, 0.0, 0.0, 0.0);
        let (mut intra_z, mut intra_gamma) = (0.0, 0.0);
        for p in peers {
            let w = p.weight;
            l_phi += w * (state.phi - p.phi);
            l_m_omega += w * (m_omega - p.m_omega);
            l_alpha_lambda += w * (alpha_lambda - p.alpha_lambda);
            l_gamma += w * (state.gamma - p.gamma);
            match (p.intra_area, p.z) {
                (true, Some(z)) => {
                    intra_z += w * (state.z - z);
                    intra_gamma += w * (state.gamma - p.gamma);
                }
                (false, Some(_)) => {
                    return Err(Error::PeerContract {
                        bus,
                        reason: "z received over an inter-area link".into(),
                    })
                }
                (true, None) if mode == ControlMode::Distributed => {
                    return Err(Error::PeerContract {
                        bus,
                        reason: "intra-area peer did not share z".into(),
                    })
                }
                _ => {}
            }
        }

        let a = self.cost.a();
        let (unit, lambda) = match self.kind {
            UnitKind::Generator { droop } => {
                let target = self.cost.inv_grad(-state.lambda - m_omega / alpha);
                let p_c = state.unit;
                let unit = obs.p_m - (1.0 + alpha * alpha * a) * p_c + alpha * alpha * a * target;
                let lambda = (self.k * obs.omega - obs.p_m - alpha * droop * p_c
                    + (1.0 + alpha * droop) * target
                    + obs.net_outflow
                    - l_phi)
                    / alpha;
                (unit, lambda)
            }
            UnitKind::Load => {
                let target = self.cost.inv_grad(-state.lambda);
                let d = state.unit;
                let unit = alpha * alpha * a * d - alpha * alpha * a * target + obs.omega;
                let lambda = (self.k * obs.omega + (1.0 + alpha) * d - (1.0 + alpha) * target + obs.net_outflow
                    - l_phi)
                    / alpha;
                (unit, lambda)
            }
        };

        let (phi, gamma, z) = match mode {
            ControlMode::Distributed => (
                l_m_omega + l_alpha_lambda - l_gamma,
                -intra_z - intra_gamma + l_phi - self.scheduled_export,
                intra_gamma,
            ),
            ControlMode::SingleArea => (l_m_omega + l_alpha_lambda, 0.0, 0.0),
        };
        Ok(LocalState {
            unit,
            lambda,
            phi,
            gamma,
            z,
        })
    }
}

/// Builds the per-bus controller data for the whole network.
pub fn bus_controllers(
    topo: &Topology,
    params: &BusParams,
    gains: &ControllerGains,
    costs: &CostModel,
) -> Result<Vec<BusController>> {
    gains.validate(topo)?;
    costs.validate(topo)?;
    let n = topo.n();
    check_len("droop", topo.ng(), params.droop.len())?;
    Ok((0..n)
        .map(|i| {
            let generator = topo.network.is_generator(i);
            BusController {
                kind: if generator {
                    UnitKind::Generator {
                        droop: params.droop[i],
                    }
                } else {
                    UnitKind::Load
                },
                cost: *costs.get(i),
                alpha: gains.alpha[i],
                k: gains.k[i],
                m_hat: if generator { gains.m_hat[i] } else { 0.0 },
                scheduled_export: topo.designated_export(i),
            }
        })
        .collect())
}

/// Controller state of the whole network, generators first.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub p_c: Vec<f64>,
    pub d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub z: Vec<f64>,
}

impl ControllerState {
    pub fn local(&self, bus: usize, ng: usize) -> LocalState {
        LocalState {
            unit: if bus < ng { self.p_c[bus] } else { self.d[bus - ng] },
            lambda: self.lambda[bus],
            phi: self.phi[bus],
            gamma: self.gamma[bus],
            z: self.z[bus],
        }
    }
}

/// Evaluates every bus controller with peer messages assembled from the
/// communication graph. `omega` and `p_m` are full-length per bus
/// (`p_m` only on generators); `flows` are the line flows.
pub fn controller_rhs(
    topo: &Topology,
    controllers: &[BusController],
    omega: &[f64],
    p_m: &[f64],
    flows: &[f64],
    state: &ControllerState,
    mode: ControlMode,
) -> Result<ControllerState> {
    let (n, ng) = (topo.n(), topo.ng());
    check_len("bus frequencies", n, omega.len())?;
    check_len("mechanical power", ng, p_m.len())?;
    let net = topo.net_outflow(flows);
    let mut out = ControllerState {
        p_c: vec![0.0; ng],
        d: vec![0.0; n - ng],
        lambda: vec![0.0; n],
        phi: vec![0.0; n],
        gamma: vec![0.0; n],
        z: vec![0.0; n],
    };
    for i in 0..n {
        let obs = LocalObservation {
            omega: omega[i],
            p_m: if i < ng { p_m[i] } else { 0.0 },
            net_outflow: net[i],
        };
        let peers = topo.links[i].iter().map(|link| {
            let j = link.peer;
            PeerMessage {
                weight: link.weight,
                intra_area: link.intra_area,
                m_omega: controllers[j].m_hat * omega[j],
                alpha_lambda: controllers[j].alpha * state.lambda[j],
                phi: state.phi[j],
                gamma: state.gamma[j],
                z: link.intra_area.then(|| state.z[j]),
            }
        });
        let der = controllers[i].rhs(i, obs, state.local(i, ng), peers, mode)?;
        if i < ng {
            out.p_c[i] = der.unit;
        } else {
            out.d[i - ng] = der.unit;
        }
        out.lambda[i] = der.lambda;
        out.phi[i] = der.phi;
        out.gamma[i] = der.gamma;
        out.z[i] = der.z;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator() -> BusController {
        BusController {
            kind: UnitKind::Generator { droop: 0.05 },
            cost: QuadraticCost::new(2.0, 0.0, 0.0),
            alpha: 1.0,
            k: 1.2,
            m_hat: 10.0,
            scheduled_export: 0.0,
        }
    }

    fn peer(intra: bool, z: Option<f64>) -> PeerMessage {
        PeerMessage {
            weight: 1.0,
            intra_area: intra,
            m_omega: 0.0,
            alpha_lambda: 0.0,
            phi: 0.0,
            gamma: 0.0,
            z,
        }
    }

    #[test]
    fn z_across_areas_violates_contract() {
        let obs = LocalObservation {
            omega: 0.0,
            p_m: 0.0,
            net_outflow: 0.0,
        };
        let err = generator()
            .rhs(0, obs, LocalState::default(), [peer(false, Some(0.0))], ControlMode::Distributed)
            .unwrap_err();
        assert!(matches!(err, Error::PeerContract { bus: 0, .. }));
        let err = generator()
            .rhs(0, obs, LocalState::default(), [peer(true, None)], ControlMode::Distributed)
            .unwrap_err();
        assert!(matches!(err, Error::PeerContract { .. }));
        assert!(generator()
            .rhs(0, obs, LocalState::default(), [peer(true, None)], ControlMode::SingleArea)
            .is_ok());
    }

    #[test]
    fn zero_state_is_at_rest_with_zero_offsets() {
        let obs = LocalObservation {
            omega: 0.0,
            p_m: 0.0,
            net_outflow: 0.0,
        };
        let der = generator()
            .rhs(0, obs, LocalState::default(), [peer(true, Some(0.0))], ControlMode::Distributed)
            .unwrap();
        assert_eq!(der, LocalState::default());
    }
}
