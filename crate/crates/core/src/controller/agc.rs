//! Conventional automatic generation control, used as a comparison baseline.
//!
//! Each area integrates its area control error and distributes the result
//! over its generators by fixed participation factors.

use crate::controller::cost::CostModel;
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::plant::{check_len, BusParams};

#[derive(Debug, Clone, PartialEq)]
pub struct AgcConfig {
    pub integral_gain: f64,
    /// Frequency bias `B_s` per area.
    pub bias: Vec<f64>,
    /// Bus whose frequency enters the area control error, per area.
    pub reference_bus: Vec<usize>,
    /// Participation factor per generator, summing to 1 inside each area.
    pub participation: Vec<f64>,
}

impl AgcConfig {
    /// Gain 0.2, the default frequency bias, lowest-labelled generator
    /// as frequency reference and participation proportional to `1 / c1`.
    pub fn standard(topo: &Topology, params: &BusParams, costs: &CostModel) -> Result<Self> {
        // Economic participation: at equal incremental cost a unit picks up
        // a share of a change in demand proportional to 1/c1.
        let mut participation: Vec<f64> = (0..topo.ng()).map(|i| 1.0 / costs.get(i).c1).collect();
        let mut sums = vec![0.0; topo.k()];
        for (i, w) in participation.iter().enumerate() {
            sums[topo.network.area_of(i)] += w;
        }
        for (i, w) in participation.iter_mut().enumerate() {
            *w /= sums[topo.network.area_of(i)];
        }
        Ok(Self {
            integral_gain: 0.2,
            bias: default_bias(topo, params),
            reference_bus: default_reference_buses(topo),
            participation,
        })
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        check_len("AGC bias", topo.k(), self.bias.len())?;
        check_len("AGC reference buses", topo.k(), self.reference_bus.len())?;
        check_len("participation factors", topo.ng(), self.participation.len())?;
        for (area, &bus) in self.reference_bus.iter().enumerate() {
            if bus >= topo.n() || topo.network.area_of(bus) != area {
                return Err(Error::InvalidParameter(format!(
                    "AGC reference bus {bus} is not in area {area}"
                )));
            }
        }
        if !(self.integral_gain > 0.0) {
            return Err(Error::InvalidParameter("AGC integral gain must be positive".into()));
        }
        Ok(())
    }

    /// `ACE_s = (E C_p P - P_t)_s + B_s omega_ref`.
    pub fn area_control_error(&self, topo: &Topology, flows: &[f64], omega: &[f64]) -> Vec<f64> {
        topo.tie_deviation(flows)
            .into_iter()
            .enumerate()
            .map(|(s, dev)| dev + self.bias[s] * omega[self.reference_bus[s]])
            .collect()
    }

    /// Integrator derivative `-gain * ACE`.
    pub fn integral_rhs(&self, ace: &[f64]) -> Vec<f64> {
        ace.iter().map(|e| -self.integral_gain * e).collect()
    }

    /// Generator setpoints `P_c = base + pf * A_s`.
    pub fn setpoints(&self, topo: &Topology, base: &[f64], integral: &[f64]) -> Vec<f64> {
        (0..topo.ng())
            .map(|i| base[i] + self.participation[i] * integral[topo.network.area_of(i)])
            .collect()
    }
}

/// Frequency bias `sum_i D_i + sum_generators 1/R_i` of each area.
pub fn default_bias(topo: &Topology, params: &BusParams) -> Vec<f64> {
    let mut bias = vec![0.0; topo.k()];
    for i in 0..topo.n() {
        let s = topo.network.area_of(i);
        bias[s] += params.damping[i];
        if topo.network.is_generator(i) {
            bias[s] += 1.0 / params.droop[i];
        }
    }
    bias
}

/// Lowest-labelled generator of each area, or the lowest-labelled bus if
/// the area has no generator.
pub fn default_reference_buses(topo: &Topology) -> Vec<usize> {
    (0..topo.k())
        .map(|s| {
            let members = topo.network.area_members(s);
            let label = |&i: &usize| topo.network.label(i);
            members
                .iter()
                .copied()
                .filter(|&i| topo.network.is_generator(i))
                .min_by_key(label)
                .or_else(|| members.iter().copied().min_by_key(label))
                .expect("areas are never empty")
        })
        .collect()
}

/// Rescales raw weights so they sum to 1 inside each area.
pub fn normalize_participation(topo: &Topology, raw: &[f64]) -> Result<Vec<f64>> {
    check_len("participation factors", topo.ng(), raw.len())?;
    let mut sums = vec![0.0; topo.k()];
    for (i, w) in raw.iter().enumerate() {
        if !(*w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "participation factor of bus {} must be non-negative",
                topo.network.label(i)
            )));
        }
        sums[topo.network.area_of(i)] += w;
    }
    for (s, sum) in sums.iter().enumerate() {
        let has_gen = (0..topo.ng()).any(|i| topo.network.area_of(i) == s);
        if has_gen && *sum == 0.0 {
            return Err(Error::InvalidParameter(format!("participation factors of area {s} are all zero")));
        }
        if has_gen && (sum - 1.0).abs() > 1e-12 {
            log::warn!("participation factors of area {s} sum to {sum}; normalizing");
        }
    }
    Ok(raw
        .iter()
        .enumerate()
        .map(|(i, w)| w / sums[topo.network.area_of(i)])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Line, PowerNetwork};

    fn topo() -> Topology {
        let line = |from, to| Line {
            from,
            to,
            susceptance: 1.0,
        };
        let net = PowerNetwork::new(
            4,
            2,
            vec![line(0, 2), line(1, 3), line(2, 3)],
            vec![0, 1, 0, 1],
            vec![0.0, 0.0],
        )
        .unwrap();
        Topology::mirrored(net).unwrap()
    }

    #[test]
    fn single_generator_takes_everything() {
        let pf = normalize_participation(&topo(), &[2.4, 4.0]).unwrap();
        assert_eq!(pf, vec![1.0, 1.0]);
    }

    #[test]
    fn quiet_system_has_no_error() {
        let t = topo();
        let cfg = AgcConfig {
            integral_gain: 0.2,
            bias: vec![21.0, 21.0],
            reference_bus: default_reference_buses(&t),
            participation: vec![1.0, 1.0],
        };
        cfg.validate(&t).unwrap();
        let ace = cfg.area_control_error(&t, &[0.0; 3], &[0.0; 4]);
        assert_eq!(ace, vec![0.0, 0.0]);
        assert_eq!(cfg.integral_rhs(&ace), vec![0.0, 0.0]);
        assert_eq!(cfg.setpoints(&t, &[0.5, 0.7], &[0.0, 0.0]), vec![0.5, 0.7]);
    }
}
