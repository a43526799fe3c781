//! Swing, turbine-governor and line-flow dynamics of the physical network.
//!
//! Load buses carry no inertia; their frequency is eliminated in closed form
//! from the algebraic power balance, which requires `D_i > 0` there.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::Topology;

pub use crate::simulator::equilibrium::solve_predisturbance_equilibrium;

#[derive(Debug, Clone, PartialEq)]
pub struct BusParams {
    /// Generator inertia `M_i` (n_g).
    pub inertia: Vec<f64>,
    /// Damping / frequency sensitivity `D_i` for every bus (n).
    pub damping: Vec<f64>,
    /// Turbine-governor time constant `T_i` (n_g).
    pub time_constant: Vec<f64>,
    /// Droop `R_i` (n_g).
    pub droop: Vec<f64>,
    /// Uncontrollable base load `r_i` at every load bus (n_l).
    pub base_load: Vec<f64>,
}

impl BusParams {
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        let (n, ng, nl) = (topo.n(), topo.ng(), topo.nl());
        check_len("inertia", ng, self.inertia.len())?;
        check_len("damping", n, self.damping.len())?;
        check_len("time constants", ng, self.time_constant.len())?;
        check_len("droop", ng, self.droop.len())?;
        check_len("base load", nl, self.base_load.len())?;
        for i in 0..ng {
            for (name, v) in [
                ("M", self.inertia[i]),
                ("D", self.damping[i]),
                ("T", self.time_constant[i]),
                ("R", self.droop[i]),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "generator bus {} needs {name} > 0, got {v}",
                        topo.network.label(i)
                    )));
                }
            }
        }
        for i in ng..n {
            let d = self.damping[i];
            if d == 0.0 {
                return Err(Error::ZeroLoadDamping {
                    bus: topo.network.label(i) as usize,
                });
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "load bus {} needs D >= 0, got {d}",
                    topo.network.label(i)
                )));
            }
        }
        if self.base_load.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("base load must be finite".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// Physical part of the state plus the two control inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub xi: Vec<f64>,
    pub omega_g: Vec<f64>,
    pub p_m: Vec<f64>,
    pub p_c: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantDerivative {
    pub xi: Vec<f64>,
    pub omega_g: Vec<f64>,
    pub p_m: Vec<f64>,
}

/// `P_e = T_pe sin(xi_e)`.
pub fn line_flows(xi: &[f64], susceptance: &[f64]) -> Vec<f64> {
    xi.iter()
        .zip(susceptance)
        .map(|(x, t)| t * x.sin())
        .collect()
}

/// `omega_L = -D_L^{-1} (d + r + C_pL P)`.
pub fn load_bus_freq(d: &[f64], r: &[f64], flows: &[f64], topo: &Topology, params: &BusParams) -> Result<Vec<f64>> {
    let (ng, nl) = (topo.ng(), topo.nl());
    check_len("controllable loads", nl, d.len())?;
    check_len("uncontrollable loads", nl, r.len())?;
    check_len("line flows", topo.n_lines(), flows.len())?;
    let net = topo.net_outflow(flows);
    (0..nl)
        .map(|j| {
            let damping = params.damping[ng + j];
            if damping == 0.0 {
                return Err(Error::ZeroLoadDamping {
                    bus: topo.network.label(ng + j) as usize,
                });
            }
            Ok(-(d[j] + r[j] + net[ng + j]) / damping)
        })
        .collect()
}

/// Time derivatives of `(xi, omega_G, P_m)` for load vector `r`.
pub fn plant_rhs(state: &PlantState, r: &[f64], params: &BusParams, topo: &Topology) -> Result<PlantDerivative> {
    let (n, ng) = (topo.n(), topo.ng());
    check_len("line angles", topo.n_lines(), state.xi.len())?;
    check_len("generator frequencies", ng, state.omega_g.len())?;
    check_len("mechanical power", ng, state.p_m.len())?;
    check_len("setpoints", ng, state.p_c.len())?;
    let flows = line_flows(&state.xi, &topo.susceptances());
    let omega_l = load_bus_freq(&state.d, r, &flows, topo, params)?;
    let net = topo.net_outflow(&flows);
    let mut omega = state.omega_g.clone();
    omega.extend_from_slice(&omega_l);
    debug_assert_eq!(omega.len(), n);

    let xi = topo
        .network
        .lines()
        .iter()
        .map(|l| omega[l.from] - omega[l.to])
        .collect();
    let omega_g = (0..ng)
        .map(|i| (-params.damping[i] * state.omega_g[i] + state.p_m[i] - net[i]) / params.inertia[i])
        .collect();
    let p_m = (0..ng)
        .map(|i| {
            (-state.omega_g[i] / params.droop[i] - state.p_m[i] + state.p_c[i]) / params.time_constant[i]
        })
        .collect();
    Ok(PlantDerivative { xi, omega_g, p_m })
}

/// Solves the lossless AC power flow `C_p T_p sin(C_p^T theta) = s` by
/// Newton's method with the first bus as angle reference, starting from the
/// DC solution. Returns the line angle differences `xi = C_p^T theta`.
pub fn solve_power_flow(topo: &Topology, injections: &[f64]) -> Result<Vec<f64>> {
    let n = topo.n();
    check_len("injections", n, injections.len())?;
    let total: f64 = injections.iter().sum();
    let scale = injections.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if total.abs() > 1e-9 * scale {
        return Err(Error::NoNormalOperatingPoint(format!(
            "injections are unbalanced by {total:e}"
        )));
    }
    let lines = topo.network.lines();
    let tp = topo.susceptances();
    let reduced_jacobian = |xi: &[f64]| {
        let mut jac = DMatrix::zeros(n - 1, n - 1);
        for (e, line) in lines.iter().enumerate() {
            let w = tp[e] * xi[e].cos();
            for (a, b, s) in [(line.from, line.from, w), (line.to, line.to, w), (line.from, line.to, -w), (line.to, line.from, -w)] {
                if a > 0 && b > 0 {
                    jac[(a - 1, b - 1)] += s;
                }
            }
        }
        jac
    };
    let angles_to_xi = |theta: &DVector<f64>| -> Vec<f64> {
        let th = |i: usize| if i == 0 { 0.0 } else { theta[i - 1] };
        lines.iter().map(|l| th(l.from) - th(l.to)).collect()
    };
    let rhs = DVector::from_iterator(n - 1, injections[1..].iter().copied());

    let dc = reduced_jacobian(&vec![0.0; lines.len()]);
    let mut theta = dc
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoNormalOperatingPoint("singular DC power flow".into()))?;

    const MAX_ITER: usize = 50;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let xi = angles_to_xi(&theta);
        let flows = line_flows(&xi, &tp);
        let net = topo.net_outflow(&flows);
        let mismatch = DVector::from_iterator(n - 1, (1..n).map(|i| net[i] - injections[i]));
        residual = mismatch.amax();
        if residual < 1e-13 * scale.max(1.0) {
            break;
        }
        let step = reduced_jacobian(&xi)
            .lu()
            .solve(&mismatch)
            .ok_or_else(|| Error::NoNormalOperatingPoint("singular power-flow Jacobian".into()))?;
        theta -= step;
    }
    if !(residual < 1e-10 * scale.max(1.0)) {
        return Err(Error::NoNormalOperatingPoint(format!(
            "power flow did not converge (mismatch {residual:e})"
        )));
    }
    let xi = angles_to_xi(&theta);
    if let Some((e, x)) = xi.iter().enumerate().find(|(_, x)| x.abs() >= std::f64::consts::FRAC_PI_2) {
        return Err(Error::NoNormalOperatingPoint(format!(
            "line {e} operates at angle {x} beyond pi/2"
        )));
    }
    Ok(xi)
}
