use std::ops::Range;

use serde::Serialize;

use crate::plant::check_len;
use crate::error::Result;

/// Offsets of each block inside the flat closed-loop state vector
/// `(xi, omega_G, P_m, P_c, d, lambda, phi, gamma, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_lines: usize,
    pub ng: usize,
    pub nl: usize,
}

impl Layout {
    pub fn new(n_lines: usize, ng: usize, nl: usize) -> Self {
        Self { n_lines, ng, nl }
    }

    pub fn n(&self) -> usize {
        self.ng + self.nl
    }

    pub fn dim(&self) -> usize {
        self.n_lines + 3 * self.ng + self.nl + 4 * self.n()
    }

    pub fn xi(&self) -> Range<usize> {
        0..self.n_lines
    }

    pub fn omega_g(&self) -> Range<usize> {
        let s = self.n_lines;
        s..s + self.ng
    }

    pub fn p_m(&self) -> Range<usize> {
        let s = self.omega_g().end;
        s..s + self.ng
    }

    pub fn p_c(&self) -> Range<usize> {
        let s = self.p_m().end;
        s..s + self.ng
    }

    pub fn d(&self) -> Range<usize> {
        let s = self.p_c().end;
        s..s + self.nl
    }

    pub fn lambda(&self) -> Range<usize> {
        let s = self.d().end;
        s..s + self.n()
    }

    pub fn phi(&self) -> Range<usize> {
        let s = self.lambda().end;
        s..s + self.n()
    }

    pub fn gamma(&self) -> Range<usize> {
        let s = self.phi().end;
        s..s + self.n()
    }

    pub fn z(&self) -> Range<usize> {
        let s = self.gamma().end;
        s..s + self.n()
    }
}

/// Structured view of the closed-loop state. Load-bus frequencies are not
/// part of it; they follow algebraically from the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopState {
    pub xi: Vec<f64>,
    pub omega_g: Vec<f64>,
    pub p_m: Vec<f64>,
    pub p_c: Vec<f64>,
    pub d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub z: Vec<f64>,
}

impl ClosedLoopState {
    pub fn zeros(layout: Layout) -> Self {
        Self::from_slice(layout, &vec![0.0; layout.dim()]).expect("dimension matches by construction")
    }

    pub fn from_slice(layout: Layout, x: &[f64]) -> Result<Self> {
        check_len("closed-loop state", layout.dim(), x.len())?;
        Ok(Self {
            xi: x[layout.xi()].to_vec(),
            omega_g: x[layout.omega_g()].to_vec(),
            p_m: x[layout.p_m()].to_vec(),
            p_c: x[layout.p_c()].to_vec(),
            d: x[layout.d()].to_vec(),
            lambda: x[layout.lambda()].to_vec(),
            phi: x[layout.phi()].to_vec(),
            gamma: x[layout.gamma()].to_vec(),
            z: x[layout.z()].to_vec(),
        })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.xi.len(), self.omega_g.len(), self.d.len())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        [
            &self.xi,
            &self.omega_g,
            &self.p_m,
            &self.p_c,
            &self.d,
            &self.lambda,
            &self.phi,
            &self.gamma,
            &self.z,
        ]
        .into_iter()
        .flatten()
        .copied()
        .collect()
    }
}
