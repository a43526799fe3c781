//! Energy function of the line angles and the closed-loop Lyapunov function.

use std::f64::consts::PI;

use crate::simulator::dynamics::ClosedLoop;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub value: f64,
    /// `|xi_e - xi*_e + 2 xi*_e| < pi` on every line, where `W` is known to
    /// be positive definite.
    pub in_domain: bool,
}

/// `W = 1'T cos(xi*) - 1'T cos(xi) - (T sin xi*)'(xi - xi*)`.
pub fn energy_w(xi: &[f64], xi_star: &[f64], susceptance: &[f64]) -> Energy {
    let mut value = 0.0;
    let mut in_domain = true;
    for ((&x, &xs), &t) in xi.iter().zip(xi_star).zip(susceptance) {
        let dev = x - xs;
        value += t * xs.cos() - t * x.cos() - t * xs.sin() * dev;
        in_domain &= (dev + 2.0 * xs).abs() < PI;
    }
    Energy { value, in_domain }
}

/// Lyapunov function of the closed loop around `eq`, built with the true
/// inertia `M` and the controller's `alpha`.
pub fn lyapunov_v(sys: &ClosedLoop, x: &[f64], eq: &[f64]) -> f64 {
    let l = sys.layout();
    let p = sys.params();
    let alpha = &sys.gains.alpha;
    let dev = |r: std::ops::Range<usize>| x[r.clone()].iter().zip(&eq[r]).map(|(a, b)| a - b).collect::<Vec<_>>();
    let (w, pm, pc, d) = (dev(l.omega_g()), dev(l.p_m()), dev(l.p_c()), dev(l.d()));
    let (lambda, phi, gamma, z) = (dev(l.lambda()), dev(l.phi()), dev(l.gamma()), dev(l.z()));
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();

    let mut quad = 0.0;
    for i in 0..l.ng {
        quad += p.inertia[i] * w[i] * w[i];
        quad += p.droop[i] * p.time_constant[i] * pm[i] * pm[i];
        quad += p.droop[i] * pc[i] * pc[i];
    }
    quad += sq(&d) + sq(&phi) + sq(&gamma) + sq(&z);

    let mut cross = 0.0;
    for i in 0..l.n() {
        let m_omega = if i < l.ng { p.inertia[i] * w[i] } else { 0.0 };
        let v = m_omega + alpha[i] * lambda[i];
        cross += v * v;
    }
    let energy = energy_w(&x[l.xi()], &eq[l.xi()], &sys.topo().susceptances());
    0.5 * quad + cross + energy.value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_vanishes_at_reference() {
        let xs = [0.1, -0.3];
        let e = energy_w(&xs, &xs, &[2.0, 5.0]);
        assert_eq!(e.value, 0.0);
        assert!(e.in_domain);
    }

    #[test]
    fn energy_domain_flag() {
        let e = energy_w(&[3.0], &[1.0], &[1.0]);
        assert!(!e.in_domain);
    }
}
