use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Topology;

/// `f(x) = c1/2 x^2 + c2 x + c3`. Generators use it as a cost (`c1 > 0`),
/// loads as a utility (`c1 < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCost {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl QuadraticCost {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        Self { c1, c2, c3 }
    }

    pub fn value(&self, x: f64) -> f64 {
        0.5 * self.c1 * x * x + self.c2 * x + self.c3
    }

    pub fn grad(&self, x: f64) -> f64 {
        self.c1 * x + self.c2
    }

    pub fn inv_grad(&self, y: f64) -> f64 {
        (y - self.c2) / self.c1
    }

    /// Curvature bound `a_i`; the second derivative is exactly `c1`.
    pub fn a(&self) -> f64 {
        self.c1
    }

    /// Lipschitz constant of the gradient.
    pub fn b(&self) -> f64 {
        self.c1.abs()
    }
}

/// One quadratic per bus, generators first.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub buses: Vec<QuadraticCost>,
}

impl CostModel {
    pub fn new(buses: Vec<QuadraticCost>, topo: &Topology) -> Result<Self> {
        let model = Self { buses };
        model.validate(topo)?;
        Ok(model)
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        crate::plant::check_len("bus costs", topo.n(), self.buses.len())?;
        for (i, c) in self.buses.iter().enumerate() {
            let ok = if topo.network.is_generator(i) {
                c.c1 > 0.0
            } else {
                c.c1 < 0.0
            };
            if !ok || !c.c1.is_finite() || !c.c2.is_finite() || !c.c3.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bus {} needs c1 {} 0 for strict {}, got {}",
                    topo.network.label(i),
                    if topo.network.is_generator(i) { ">" } else { "<" },
                    if topo.network.is_generator(i) { "convexity" } else { "concavity" },
                    c.c1
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, bus: usize) -> &QuadraticCost {
        &self.buses[bus]
    }

    /// `sum F(P_m) - sum U(d)`.
    pub fn objective(&self, p_m: &[f64], d: &[f64]) -> f64 {
        let ng = p_m.len();
        let gen: f64 = p_m.iter().enumerate().map(|(i, &p)| self.buses[i].value(p)).sum();
        let util: f64 = d.iter().enumerate().map(|(j, &x)| self.buses[ng + j].value(x)).sum();
        gen - util
    }
}
