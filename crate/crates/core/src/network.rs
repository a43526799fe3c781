//! Physical and cyber graphs of a multi-area transmission network.
//!
//! Buses are indexed internally with generator buses first (`0..n_g`) and
//! load buses after (`n_g..n`). Areas are indexed `0..k`. External bus
//! labels (as written in config files) are kept only for reporting.
//!
//! Communication weights are stored as positive numbers `w = -l_cij`, so the
//! Laplacian entries are `L_c[i][j] = -w` and `L_c[i][i] = sum_j w`.

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A transmission line with a fixed orientation `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// `T_pe = |V_i||V_j| Y_ij` in p.u.
    pub susceptance: f64,
}

#[derive(Debug, Clone)]
pub struct PowerNetwork {
    n_buses: usize,
    n_generators: usize,
    lines: Vec<Line>,
    areas: Vec<usize>,
    scheduled_tie: Vec<f64>,
    labels: Vec<u32>,
}

impl PowerNetwork {
    /// Validates and builds a network. `areas[i]` is the 0-based area of bus
    /// `i`; every area in `0..scheduled_tie.len()` must own at least one bus.
    pub fn new(
        n_buses: usize,
        n_generators: usize,
        lines: Vec<Line>,
        areas: Vec<usize>,
        scheduled_tie: Vec<f64>,
    ) -> Result<Self> {
        if n_buses == 0 {
            return Err(Error::InvalidNetwork("network has no buses".into()));
        }
        if n_generators > n_buses {
            return Err(Error::InvalidNetwork(format!(
                "{n_generators} generator buses but only {n_buses} buses"
            )));
        }
        if areas.len() != n_buses {
            return Err(Error::DimensionMismatch {
                what: "area map",
                expected: n_buses,
                found: areas.len(),
            });
        }
        let k = scheduled_tie.len();
        if k == 0 {
            return Err(Error::InvalidNetwork("no control areas".into()));
        }
        let mut populated = vec![false; k];
        for (bus, &a) in areas.iter().enumerate() {
            if a >= k {
                return Err(Error::InvalidNetwork(format!(
                    "bus {bus} assigned to area {a} but only {k} areas are scheduled"
                )));
            }
            populated[a] = true;
        }
        if let Some(empty) = populated.iter().position(|p| !p) {
            return Err(Error::InvalidNetwork(format!("area {empty} has no buses")));
        }
        let tie_sum: f64 = scheduled_tie.iter().sum();
        let tie_scale = scheduled_tie.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if tie_sum.abs() > 1e-9 * tie_scale {
            return Err(Error::InvalidNetwork(format!(
                "scheduled tie-line exports sum to {tie_sum:e}, expected 0"
            )));
        }

        let mut seen = HashSet::new();
        for (e, line) in lines.iter().enumerate() {
            if line.from >= n_buses || line.to >= n_buses {
                return Err(Error::InvalidNetwork(format!("line {e} references a missing bus")));
            }
            if line.from == line.to {
                return Err(Error::SelfLoop { bus: line.from });
            }
            if !(line.susceptance > 0.0) || !line.susceptance.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "line {e} has non-positive susceptance {}",
                    line.susceptance
                )));
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if !seen.insert(key) {
                return Err(Error::DuplicateLine {
                    from: line.from,
                    to: line.to,
                });
            }
        }
        let edges: Vec<(usize, usize)> = lines.iter().map(|l| (l.from, l.to)).collect();
        if !is_connected(n_buses, &edges, |_| true) {
            return Err(Error::Disconnected);
        }

        Ok(Self {
            n_buses,
            n_generators,
            lines,
            areas,
            scheduled_tie,
            labels: (1..=n_buses as u32).collect(),
        })
    }

    /// Attaches external bus labels used in reports and CSV headers.
    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.n_buses {
            return Err(Error::DimensionMismatch {
                what: "bus labels",
                expected: self.n_buses,
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_buses(&self) -> usize {
        self.n_buses
    }

    pub fn n_generators(&self) -> usize {
        self.n_generators
    }

    pub fn n_loads(&self) -> usize {
        self.n_buses - self.n_generators
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_areas(&self) -> usize {
        self.scheduled_tie.len()
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    pub fn area_of(&self, bus: usize) -> usize {
        self.areas[bus]
    }

    pub fn scheduled_tie(&self) -> &[f64] {
        &self.scheduled_tie
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, bus: usize) -> u32 {
        self.labels[bus]
    }

    pub fn bus_by_label(&self, label: u32) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn is_generator(&self, bus: usize) -> bool {
        bus < self.n_generators
    }

    /// Buses of area `s` in increasing internal index order.
    pub fn area_members(&self, area: usize) -> Vec<usize> {
        (0..self.n_buses).filter(|&i| self.areas[i] == area).collect()
    }

    /// Lines whose ends lie in different areas.
    pub fn tie_lines(&self) -> impl Iterator<Item = (usize, &Line)> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| self.areas[l.from] != self.areas[l.to])
    }
}

/// Undirected communication link with weight `w = -l_cij > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct CommGraph {
    pub edges: Vec<CommEdge>,
    /// One bus per area that knows the scheduled export of that area.
    pub designated: Vec<usize>,
}

impl CommGraph {
    /// Communication network with the physical topology and unit weights,
    /// designating the lowest-labelled bus of each area.
    pub fn mirror(network: &PowerNetwork) -> Self {
        let edges = network
            .lines()
            .iter()
            .map(|l| CommEdge {
                a: l.from,
                b: l.to,
                weight: 1.0,
            })
            .collect();
        Self {
            edges,
            designated: default_designated(network),
        }
    }

    pub fn validate(&self, network: &PowerNetwork) -> Result<()> {
        let n = network.n_buses();
        let k = network.n_areas();
        if self.designated.len() != k {
            return Err(Error::DimensionMismatch {
                what: "designated buses",
                expected: k,
                found: self.designated.len(),
            });
        }
        for (area, &bus) in self.designated.iter().enumerate() {
            if bus >= n || network.area_of(bus) != area {
                return Err(Error::DesignatedBusOutsideArea { area, bus });
            }
        }
        let physical: HashSet<(usize, usize)> = network
            .lines()
            .iter()
            .map(|l| (l.from.min(l.to), l.from.max(l.to)))
            .collect();
        let mut seen = HashSet::new();
        for edge in &self.edges {
            if edge.a >= n || edge.b >= n {
                return Err(Error::InvalidCommGraph("edge references a missing bus".into()));
            }
            if edge.a == edge.b {
                return Err(Error::SelfLoop { bus: edge.a });
            }
            if !(edge.weight > 0.0) || !edge.weight.is_finite() {
                return Err(Error::InvalidCommGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    edge.a, edge.b, edge.weight
                )));
            }
            let key = (edge.a.min(edge.b), edge.a.max(edge.b));
            if !seen.insert(key) {
                return Err(Error::InvalidCommGraph(format!(
                    "duplicate link between buses {} and {}",
                    edge.a, edge.b
                )));
            }
            if network.area_of(edge.a) != network.area_of(edge.b) && !physical.contains(&key) {
                return Err(Error::InvalidCommGraph(format!(
                    "inter-area link ({}, {}) has no matching tie line",
                    edge.a, edge.b
                )));
            }
        }
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.a, e.b)).collect();
        for area in 0..k {
            let members = network.area_members(area);
            let intra: Vec<(usize, usize)> = pairs
                .iter()
                .copied()
                .filter(|&(a, b)| network.area_of(a) == area && network.area_of(b) == area)
                .collect();
            if !is_connected_subset(&members, &intra) {
                return Err(Error::AreaDisconnected { area });
            }
        }
        if !is_connected(n, &pairs, |_| true) {
            return Err(Error::InvalidCommGraph(
                "communication network is not connected".into(),
            ));
        }
        Ok(())
    }
}

/// Lowest-labelled bus of each area.
pub fn default_designated(network: &PowerNetwork) -> Vec<usize> {
    (0..network.n_areas())
        .map(|s| {
            network
                .area_members(s)
                .into_iter()
                .min_by_key(|&i| network.label(i))
                .expect("validated networks have no empty area")
        })
        .collect()
}

/// Incidence matrix `C_p` (n x l): `+1` at the source, `-1` at the target.
pub fn build_incidence(network: &PowerNetwork) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(network.n_buses(), network.n_lines());
    for (e, line) in network.lines().iter().enumerate() {
        c[(line.from, e)] = 1.0;
        c[(line.to, e)] = -1.0;
    }
    c
}

/// Full communication Laplacian `L_c` and intra-area Laplacian `L`.
pub fn build_laplacians(
    comm: &CommGraph,
    network: &PowerNetwork,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    comm.validate(network)?;
    let n = network.n_buses();
    let mut full = DMatrix::zeros(n, n);
    let mut intra = DMatrix::zeros(n, n);
    for e in &comm.edges {
        add_edge(&mut full, e);
        if network.area_of(e.a) == network.area_of(e.b) {
            add_edge(&mut intra, e);
        }
    }
    Ok((full, intra))
}

fn add_edge(lap: &mut DMatrix<f64>, e: &CommEdge) {
    lap[(e.a, e.a)] += e.weight;
    lap[(e.b, e.b)] += e.weight;
    lap[(e.a, e.b)] -= e.weight;
    lap[(e.b, e.a)] -= e.weight;
}

/// Area aggregation `E` (k x n) and designated-bus selector `J` (n x k).
pub fn build_area_matrices(
    network: &PowerNetwork,
    comm: &CommGraph,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = network.n_buses();
    let k = network.n_areas();
    if comm.designated.len() != k {
        return Err(Error::DimensionMismatch {
            what: "designated buses",
            expected: k,
            found: comm.designated.len(),
        });
    }
    let mut e = DMatrix::zeros(k, n);
    for i in 0..n {
        e[(network.area_of(i), i)] = 1.0;
    }
    let mut j = DMatrix::zeros(n, k);
    for (area, &bus) in comm.designated.iter().enumerate() {
        if bus >= n || network.area_of(bus) != area {
            return Err(Error::DesignatedBusOutsideArea { area, bus });
        }
        j[(bus, area)] = 1.0;
    }
    Ok((e, j))
}

/// A communication link as seen from one bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommLink {
    pub peer: usize,
    pub weight: f64,
    /// Both ends in the same area; only such links carry `z`.
    pub intra_area: bool,
}

/// A line incident to a bus, with the orientation sign `C_ie`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentLine {
    pub line: usize,
    pub sign: f64,
}

/// Validated network plus every derived matrix and adjacency list.
#[derive(Debug, Clone)]
pub struct Topology {
    pub network: PowerNetwork,
    pub comm: CommGraph,
    pub incidence: DMatrix<f64>,
    pub laplacian_full: DMatrix<f64>,
    pub laplacian_intra: DMatrix<f64>,
    pub area_matrix: DMatrix<f64>,
    pub selector: DMatrix<f64>,
    pub links: Vec<Vec<CommLink>>,
    pub incident: Vec<Vec<IncidentLine>>,
}

impl Topology {
    pub fn new(network: PowerNetwork, comm: CommGraph) -> Result<Self> {
        let incidence = build_incidence(&network);
        let (laplacian_full, laplacian_intra) = build_laplacians(&comm, &network)?;
        let (area_matrix, selector) = build_area_matrices(&network, &comm)?;
        let n = network.n_buses();
        let mut links = vec![Vec::new(); n];
        for e in &comm.edges {
            let intra_area = network.area_of(e.a) == network.area_of(e.b);
            links[e.a].push(CommLink {
                peer: e.b,
                weight: e.weight,
                intra_area,
            });
            links[e.b].push(CommLink {
                peer: e.a,
                weight: e.weight,
                intra_area,
            });
        }
        let mut incident = vec![Vec::new(); n];
        for (idx, line) in network.lines().iter().enumerate() {
            incident[line.from].push(IncidentLine { line: idx, sign: 1.0 });
            incident[line.to].push(IncidentLine {
                line: idx,
                sign: -1.0,
            });
        }
        Ok(Self {
            network,
            comm,
            incidence,
            laplacian_full,
            laplacian_intra,
            area_matrix,
            selector,
            links,
            incident,
        })
    }

    /// Topology with the default mirrored communication network.
    pub fn mirrored(network: PowerNetwork) -> Result<Self> {
        let comm = CommGraph::mirror(&network);
        Self::new(network, comm)
    }

    pub fn n(&self) -> usize {
        self.network.n_buses()
    }

    pub fn ng(&self) -> usize {
        self.network.n_generators()
    }

    pub fn nl(&self) -> usize {
        self.network.n_loads()
    }

    pub fn n_lines(&self) -> usize {
        self.network.n_lines()
    }

    pub fn k(&self) -> usize {
        self.network.n_areas()
    }

    pub fn susceptances(&self) -> Vec<f64> {
        self.network.lines().iter().map(|l| l.susceptance).collect()
    }

    /// `J_i^T P_t`: the scheduled export known to bus `i`, zero elsewhere.
    pub fn designated_export(&self, bus: usize) -> f64 {
        let area = self.network.area_of(bus);
        if self.comm.designated[area] == bus {
            self.network.scheduled_tie()[area]
        } else {
            0.0
        }
    }

    /// `(C_p P)_i` for every bus: net power flowing out of the bus.
    pub fn net_outflow(&self, flows: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.net_outflow_into(flows, &mut out);
        out
    }

    pub(crate) fn net_outflow_into(&self, flows: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (line, p) in self.network.lines().iter().zip(flows) {
            out[line.from] += p;
            out[line.to] -= p;
        }
    }

    /// Net export of each area, `E C_p P`.
    pub fn area_exports(&self, flows: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        for (line, p) in self.network.lines().iter().zip(flows) {
            let (sa, sb) = (self.network.area_of(line.from), self.network.area_of(line.to));
            if sa != sb {
                out[sa] += p;
                out[sb] -= p;
            }
        }
        out
    }

    /// Deviation of area exports from schedule, `E C_p P - P_t`.
    pub fn tie_deviation(&self, flows: &[f64]) -> Vec<f64> {
        self.area_exports(flows)
            .into_iter()
            .zip(self.network.scheduled_tie())
            .map(|(a, t)| a - t)
            .collect()
    }
}

fn is_connected(n: usize, edges: &[(usize, usize)], _keep: impl Fn(usize) -> bool) -> bool {
    let members: Vec<usize> = (0..n).collect();
    is_connected_subset(&members, edges)
}

fn is_connected_subset(members: &[usize], edges: &[(usize, usize)]) -> bool {
    let Some(&start) = members.first() else {
        return true;
    };
    let set: HashSet<usize> = members.iter().copied().collect();
    let mut adj: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    for &(a, b) in edges {
        if set.contains(&a) && set.contains(&b) {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
    }
    let mut visited = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if visited.insert(v) {
                queue.push_back(v);
            }
        }
    }
    visited.len() == set.len()
}
