use serde::Serialize;

use crate::controller::consensus::max_consensus;
use crate::controller::cost::CostModel;
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::plant::{check_len, BusParams};

/// Per-bus controller gains. `m_hat` is the inertia the controller believes
/// each generator has; it defaults to the true inertia.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub alpha: Vec<f64>,
    pub k: Vec<f64>,
    pub m_hat: Vec<f64>,
}

impl ControllerGains {
    pub fn uniform(topo: &Topology, alpha: f64, k: f64, m_hat: Vec<f64>) -> Self {
        Self {
            alpha: vec![alpha; topo.n()],
            k: vec![k; topo.n()],
            m_hat,
        }
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        check_len("alpha", topo.n(), self.alpha.len())?;
        check_len("K", topo.n(), self.k.len())?;
        check_len("inertia estimates", topo.ng(), self.m_hat.len())?;
        if let Some(i) = self.alpha.iter().position(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "alpha at bus {} must be positive",
                topo.network.label(i)
            )));
        }
        if let Some(i) = self.k.iter().position(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "K at bus {} must be non-negative",
                topo.network.label(i)
            )));
        }
        if self.m_hat.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter("inertia estimates must be non-negative".into()));
        }
        for area in 0..topo.k() {
            let members = topo.network.area_members(area);
            let a0 = self.alpha[members[0]];
            if members.iter().any(|&i| self.alpha[i] != a0) {
                return Err(Error::NonUniformAlpha { area });
            }
        }
        Ok(())
    }

    /// Inertia estimates padded with zeros on load buses.
    pub fn m_hat_full(&self, n: usize) -> Vec<f64> {
        let mut m = self.m_hat.clone();
        m.resize(n, 0.0);
        m
    }
}

/// Known damping interval and margin used to bound the admissible alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct GainBounds {
    pub d_min: Vec<f64>,
    pub d_max: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl GainBounds {
    pub fn uniform(n: usize, d_min: f64, d_max: f64, epsilon: f64) -> Self {
        Self {
            d_min: vec![d_min; n],
            d_max: vec![d_max; n],
            epsilon: vec![epsilon; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusKind {
    Generator { droop: f64 },
    Load,
}

/// Upper bound `rho*_i` on the matrix-inequality parameter of one bus.
pub fn rho_star(kind: BusKind, a: f64, b: f64, k: f64, d_min: f64, d_max: f64, epsilon: f64) -> f64 {
    // K = 0 is allowed with D_min = 0 and then the first term vanishes
    let quad = if k == 0.0 { 0.0 } else { b * k * k / (4.0 * d_min) };
    let common = quad - b * k / 2.0 + b * d_max / 4.0;
    match kind {
        BusKind::Generator { droop } => common + b * droop / a - droop + epsilon,
        BusKind::Load => common - b / a - 1.0 + epsilon,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AreaCertificate {
    pub area: usize,
    pub alpha: f64,
    pub rho_max: f64,
    /// `None` when every `rho*` in the area is non-positive, so any alpha works.
    pub alpha_star: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainCertificate {
    pub rho: Vec<f64>,
    pub areas: Vec<AreaCertificate>,
    pub consensus_rounds: usize,
    pub pass: bool,
}

/// Computes `rho*_i` for every bus, spreads the per-area maximum by
/// max-consensus over the intra-area links, and checks `alpha <= 1/max rho*`.
pub fn certify_gains(
    topo: &Topology,
    params: &BusParams,
    gains: &ControllerGains,
    costs: &CostModel,
    bounds: &GainBounds,
) -> Result<GainCertificate> {
    gains.validate(topo)?;
    let n = topo.n();
    check_len("D_min", n, bounds.d_min.len())?;
    check_len("D_max", n, bounds.d_max.len())?;
    check_len("epsilon", n, bounds.epsilon.len())?;
    let mut rho = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi, eps) = (bounds.d_min[i], bounds.d_max[i], bounds.epsilon[i]);
        let label = topo.network.label(i);
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bus {label} needs 0 <= D_min <= D_max, got [{lo}, {hi}]"
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("bus {label} needs epsilon > 0")));
        }
        let generator = topo.network.is_generator(i);
        if lo == 0.0 && gains.k[i] != 0.0 {
            if generator {
                return Err(Error::InvalidParameter(format!(
                    "generator bus {label} needs D_min > 0"
                )));
            }
            return Err(Error::InvalidParameter(format!(
                "load bus {label} has zero frequency sensitivity, so K must be 0"
            )));
        }
        let cost = costs.get(i);
        let kind = if generator {
            BusKind::Generator {
                droop: params.droop[i],
            }
        } else {
            BusKind::Load
        };
        rho.push(rho_star(kind, cost.a(), cost.b(), gains.k[i], lo, hi, eps));
    }

    let neighbours: Vec<Vec<usize>> = topo
        .links
        .iter()
        .map(|ls| ls.iter().filter(|l| l.intra_area).map(|l| l.peer).collect())
        .collect();
    let consensus = max_consensus(&rho, &neighbours, topo.network.areas())?;

    let areas: Vec<AreaCertificate> = (0..topo.k())
        .map(|area| {
            let bus = topo.comm.designated[area];
            let rho_max = consensus.values[bus];
            let alpha = gains.alpha[bus];
            let alpha_star = (rho_max > 0.0).then(|| 1.0 / rho_max);
            let pass = alpha_star.is_none_or(|bound| alpha <= bound);
            AreaCertificate {
                area,
                alpha,
                rho_max,
                alpha_star,
                pass,
            }
        })
        .collect();
    let pass = areas.iter().all(|a| a.pass);
    Ok(GainCertificate {
        rho,
        areas,
        consensus_rounds: consensus.rounds,
        pass,
    })
}
