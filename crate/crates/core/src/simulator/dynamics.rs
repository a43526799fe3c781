use crate::controller::agc::AgcConfig;
use crate::controller::cost::CostModel;
use crate::controller::gains::ControllerGains;
use crate::controller::law::{bus_controllers, BusController, ControlMode, LocalObservation, LocalState, PeerMessage};
use crate::error::Result;
use crate::network::Topology;
use crate::plant::{check_len, BusParams};
use crate::simulator::state::Layout;

/// An autonomous vector field driven by the uncontrollable loads `r`.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn n_loads(&self) -> usize;
    fn rhs(&self, x: &[f64], load: &[f64], dx: &mut [f64]) -> Result<()>;
}

/// Frequencies and flows that follow algebraically from a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub flows: Vec<f64>,
    /// `C_p P` per bus.
    pub net_outflow: Vec<f64>,
    /// Frequency deviation of every bus, generators first.
    pub omega: Vec<f64>,
}

/// Shared physical core: flows, load-bus frequencies and swing/governor
/// derivatives for states whose first blocks are `(xi, omega_G, P_m)`.
#[derive(Debug, Clone)]
struct Physics {
    topo: Topology,
    params: BusParams,
    susceptance: Vec<f64>,
}

impl Physics {
    fn new(topo: Topology, params: BusParams) -> Result<Self> {
        params.validate(&topo)?;
        let susceptance = topo.susceptances();
        Ok(Self {
            topo,
            params,
            susceptance,
        })
    }

    fn observe(&self, xi: &[f64], omega_g: &[f64], d: &[f64], load: &[f64]) -> Observables {
        let ng = self.topo.ng();
        let flows: Vec<f64> = xi
            .iter()
            .zip(&self.susceptance)
            .map(|(x, t)| t * x.sin())
            .collect();
        let mut net = vec![0.0; self.topo.n()];
        self.topo.net_outflow_into(&flows, &mut net);
        let mut omega = omega_g.to_vec();
        omega.extend(
            (0..self.topo.nl()).map(|j| -(d[j] + load[j] + net[ng + j]) / self.params.damping[ng + j]),
        );
        Observables {
            flows,
            net_outflow: net,
            omega,
        }
    }

    /// Writes `(xi', omega_G', P_m')` into the leading part of `dx`.
    fn swing(&self, obs: &Observables, omega_g: &[f64], p_m: &[f64], p_c: &[f64], dx: &mut [f64]) {
        let (ng, nlines) = (self.topo.ng(), self.topo.n_lines());
        let p = &self.params;
        for (e, line) in self.topo.network.lines().iter().enumerate() {
            dx[e] = obs.omega[line.from] - obs.omega[line.to];
        }
        for i in 0..ng {
            dx[nlines + i] = (-p.damping[i] * omega_g[i] + p_m[i] - obs.net_outflow[i]) / p.inertia[i];
            dx[nlines + ng + i] = (-omega_g[i] / p.droop[i] - p_m[i] + p_c[i]) / p.time_constant[i];
        }
    }
}

/// Plant in closed loop with the distributed controller.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    physics: Physics,
    pub gains: ControllerGains,
    pub costs: CostModel,
    pub mode: ControlMode,
    controllers: Vec<BusController>,
    layout: Layout,
}

impl ClosedLoop {
    pub fn new(
        topo: Topology,
        params: BusParams,
        gains: ControllerGains,
        costs: CostModel,
        mode: ControlMode,
    ) -> Result<Self> {
        if mode == ControlMode::SingleArea && topo.k() != 1 {
            return Err(crate::error::Error::InvalidParameter(format!(
                "single-area control needs exactly one area, found {}",
                topo.k()
            )));
        }
        let controllers = bus_controllers(&topo, &params, &gains, &costs)?;
        let layout = Layout::new(topo.n_lines(), topo.ng(), topo.nl());
        Ok(Self {
            physics: Physics::new(topo, params)?,
            gains,
            costs,
            mode,
            controllers,
            layout,
        })
    }

    pub fn topo(&self) -> &Topology {
        &self.physics.topo
    }

    pub fn params(&self) -> &BusParams {
        &self.physics.params
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn observe(&self, x: &[f64], load: &[f64]) -> Observables {
        let l = self.layout;
        self.physics.observe(&x[l.xi()], &x[l.omega_g()], &x[l.d()], load)
    }
}

impl Dynamics for ClosedLoop {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn n_loads(&self) -> usize {
        self.layout.nl
    }

    fn rhs(&self, x: &[f64], load: &[f64], dx: &mut [f64]) -> Result<()> {
        let l = self.layout;
        check_len("closed-loop state", l.dim(), x.len())?;
        check_len("load", l.nl, load.len())?;
        let (ng, n) = (l.ng, l.n());
        let obs = self.observe(x, load);
        let (p_m, p_c, d) = (&x[l.p_m()], &x[l.p_c()], &x[l.d()]);
        self.physics.swing(&obs, &x[l.omega_g()], p_m, p_c, dx);

        let (lambda, phi, gamma, z) = (&x[l.lambda()], &x[l.phi()], &x[l.gamma()], &x[l.z()]);
        let topo = &self.physics.topo;
        let ctrl = &self.controllers;
        for i in 0..n {
            let local = LocalState {
                unit: if i < ng { p_c[i] } else { d[i - ng] },
                lambda: lambda[i],
                phi: phi[i],
                gamma: gamma[i],
                z: z[i],
            };
            let local_obs = LocalObservation {
                omega: obs.omega[i],
                p_m: if i < ng { p_m[i] } else { 0.0 },
                net_outflow: obs.net_outflow[i],
            };
            let peers = topo.links[i].iter().map(|link| {
                let j = link.peer;
                PeerMessage {
                    weight: link.weight,
                    intra_area: link.intra_area,
                    m_omega: ctrl[j].m_hat * obs.omega[j],
                    alpha_lambda: ctrl[j].alpha * lambda[j],
                    phi: phi[j],
                    gamma: gamma[j],
                    z: link.intra_area.then(|| z[j]),
                }
            });
            let der = ctrl[i].rhs(i, local_obs, local, peers, self.mode)?;
            if i < ng {
                dx[l.p_c().start + i] = der.unit;
            } else {
                dx[l.d().start + i - ng] = der.unit;
            }
            dx[l.lambda().start + i] = der.lambda;
            dx[l.phi().start + i] = der.phi;
            dx[l.gamma().start + i] = der.gamma;
            dx[l.z().start + i] = der.z;
        }
        Ok(())
    }
}

/// Plant under area-level AGC. State `(xi, omega_G, P_m, A)` with one
/// integrator `A_s` per area; controllable loads stay at their base values.
#[derive(Debug, Clone)]
pub struct AgcLoop {
    physics: Physics,
    pub agc: AgcConfig,
    pub base_setpoint: Vec<f64>,
    pub base_demand: Vec<f64>,
}

impl AgcLoop {
    pub fn new(
        topo: Topology,
        params: BusParams,
        agc: AgcConfig,
        base_setpoint: Vec<f64>,
        base_demand: Vec<f64>,
    ) -> Result<Self> {
        agc.validate(&topo)?;
        check_len("base setpoints", topo.ng(), base_setpoint.len())?;
        check_len("base demand", topo.nl(), base_demand.len())?;
        Ok(Self {
            physics: Physics::new(topo, params)?,
            agc,
            base_setpoint,
            base_demand,
        })
    }

    pub fn topo(&self) -> &Topology {
        &self.physics.topo
    }

    fn blocks(&self) -> (usize, usize, usize) {
        let t = &self.physics.topo;
        (t.n_lines(), t.ng(), t.k())
    }

    /// Initial AGC state from a plant operating point, integrators at zero.
    pub fn initial_state(&self, xi: &[f64], omega_g: &[f64], p_m: &[f64]) -> Vec<f64> {
        let (_, _, k) = self.blocks();
        let mut y = Vec::with_capacity(self.dim());
        y.extend_from_slice(xi);
        y.extend_from_slice(omega_g);
        y.extend_from_slice(p_m);
        y.extend(std::iter::repeat_n(0.0, k));
        y
    }

    pub fn observe(&self, y: &[f64], load: &[f64]) -> Observables {
        let (nl, ng, _) = self.blocks();
        self.physics.observe(&y[..nl], &y[nl..nl + ng], &self.base_demand, load)
    }

    pub fn setpoints(&self, y: &[f64]) -> Vec<f64> {
        let (nl, ng, _) = self.blocks();
        self.agc.setpoints(&self.physics.topo, &self.base_setpoint, &y[nl + 2 * ng..])
    }
}

impl Dynamics for AgcLoop {
    fn dim(&self) -> usize {
        let (nl, ng, k) = self.blocks();
        nl + 2 * ng + k
    }

    fn n_loads(&self) -> usize {
        self.physics.topo.nl()
    }

    fn rhs(&self, y: &[f64], load: &[f64], dy: &mut [f64]) -> Result<()> {
        check_len("AGC state", self.dim(), y.len())?;
        check_len("load", self.n_loads(), load.len())?;
        let (nl, ng, _) = self.blocks();
        let obs = self.observe(y, load);
        let p_c = self.setpoints(y);
        self.physics.swing(&obs, &y[nl..nl + ng], &y[nl + ng..nl + 2 * ng], &p_c, dy);
        let ace = self.agc.area_control_error(&self.physics.topo, &obs.flows, &obs.omega);
        for (s, v) in self.agc.integral_rhs(&ace).into_iter().enumerate() {
            dy[nl + 2 * ng + s] = v;
        }
        Ok(())
    }
}
