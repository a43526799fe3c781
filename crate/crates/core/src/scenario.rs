//! End-to-end scenario runs: warm start, disturbance, instrumentation,
//! verification checks and the AGC comparison.

use std::path::Path;

use serde::Serialize;

use crate::config::{ChannelSet, ControllerSelection, Scenario, StateVariable};
use crate::controller::gains::{certify_gains, GainCertificate};
use crate::controller::law::ControlMode;
use crate::error::{Error, Result};
use crate::oracle::{area_means, check_kkt, lambda_spread, solve_olfc_kkt, KktReport, OlfcProblem, OlfcSolution};
use crate::output::{ChannelTable, Column};
use crate::simulator::{
    detect_steady_state, energy_w, find_equilibrium, integrate, lyapunov_v, solve_predisturbance_equilibrium, AgcLoop,
    Anchors, ClosedLoop, ClosedLoopState, Dynamics, Sampler, StepControl,
};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub allow_uncertified: bool,
    pub step: Option<f64>,
    pub t_end: Option<f64>,
}

impl RunOptions {
    pub fn apply(&self, scn: &mut Scenario) -> Result<()> {
        if let Some(step) = self.step {
            if !(step > 0.0) {
                return Err(Error::Config("--step must be positive".into()));
            }
            scn.integration = StepControl::Rk4 { step };
        }
        if let Some(t_end) = self.t_end {
            if !(t_end > 0.0) {
                return Err(Error::Config("--t-end must be positive".into()));
            }
            scn.t_end = t_end;
        }
        Ok(())
    }
}

pub fn certify(scn: &Scenario) -> Result<GainCertificate> {
    certify_gains(&scn.model.topo, &scn.model.params, &scn.gains, &scn.model.costs, &scn.bounds)
}

pub fn build_closed_loop(scn: &Scenario) -> Result<ClosedLoop> {
    ClosedLoop::new(
        scn.model.topo.clone(),
        scn.model.params.clone(),
        scn.gains.clone(),
        scn.model.costs.clone(),
        scn.mode,
    )
}

/// Base load plus every event that fires before `t_end`.
pub fn post_disturbance_load(scn: &Scenario) -> Vec<f64> {
    let mut load = scn.model.params.base_load.clone();
    for e in scn.events.iter().filter(|e| e.time <= scn.t_end) {
        load[e.load] += e.delta;
    }
    load
}

pub fn first_event_time(scn: &Scenario) -> f64 {
    scn.events.iter().map(|e| e.time).fold(f64::INFINITY, f64::min).min(scn.t_end)
}

/// Areas touched by a non-zero load event.
pub fn disturbed_areas(scn: &Scenario) -> Vec<bool> {
    let topo = &scn.model.topo;
    let mut out = vec![false; topo.k()];
    for e in &scn.events {
        if e.delta != 0.0 {
            out[topo.network.area_of(topo.ng() + e.load)] = true;
        }
    }
    out
}

/// Largest deviation of a conserved quantity from its initial value.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Drift {
    pub phi_sum: f64,
    pub gamma_sum: f64,
    pub z_area: f64,
}

/// Frequency of the monitored bus after every integration step.
#[derive(Debug, Clone, Default)]
pub struct MonitorSeries {
    pub bus: usize,
    pub times: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub pre: ClosedLoopState,
    pub initial: ClosedLoopState,
    pub equilibrium: ClosedLoopState,
    pub final_state: ClosedLoopState,
    pub final_load: Vec<f64>,
    pub table: ChannelTable,
    pub times: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub rhs_norm: Vec<f64>,
    pub drift: Drift,
    /// Samples at which some line left the region where `W` is certified.
    pub domain_exits: usize,
    pub monitor: Option<MonitorSeries>,
    pub settled_at: Option<f64>,
}

fn state_columns(scn: &Scenario, set: ChannelSet) -> Vec<Column> {
    let topo = &scn.model.topo;
    let net = &topo.network;
    let (n, ng) = (topo.n(), topo.ng());
    let mut cols = vec![Column::new("time", "s", "simulation time")];
    if set == ChannelSet::Full {
        for (e, l) in net.lines().iter().enumerate() {
            cols.push(Column::new(
                format!("xi_{e}"),
                "rad",
                format!("angle difference across line {}-{}", net.label(l.from), net.label(l.to)),
            ));
        }
    }
    for i in 0..n {
        cols.push(Column::new(format!("omega_{}", net.label(i)), "rad/s", "frequency deviation"));
    }
    for i in 0..ng {
        cols.push(Column::new(format!("p_m_{}", net.label(i)), "pu", "mechanical power"));
    }
    for i in 0..ng {
        cols.push(Column::new(format!("p_c_{}", net.label(i)), "pu", "governor setpoint"));
    }
    for i in ng..n {
        cols.push(Column::new(format!("d_{}", net.label(i)), "pu", "controllable load"));
    }
    cols
}

fn distributed_columns(scn: &Scenario) -> Vec<Column> {
    let topo = &scn.model.topo;
    let net = &topo.network;
    let n = topo.n();
    let mut cols = state_columns(scn, scn.channels);
    for i in 0..n {
        cols.push(Column::new(format!("lambda_{}", net.label(i)), "pu", "incremental cost estimate"));
    }
    if scn.channels == ChannelSet::Full {
        for name in ["phi", "gamma", "z"] {
            for i in 0..n {
                cols.push(Column::new(format!("{name}_{}", net.label(i)), "pu", "consensus variable"));
            }
        }
    }
    for s in 0..topo.k() {
        cols.push(Column::new(format!("tie_dev_area{}", s + 1), "pu", "net export minus schedule"));
    }
    for s in 0..topo.k() {
        cols.push(Column::new(format!("lambda_spread_area{}", s + 1), "pu", "max minus min lambda in area"));
    }
    cols.push(Column::new("lyapunov_v", "-", "Lyapunov function around the post-disturbance equilibrium"));
    cols.push(Column::new("energy_w", "-", "line-angle energy term"));
    cols.push(Column::new("in_domain", "bool", "1 if every line satisfies |xi + xi*| < pi"));
    cols.push(Column::new("rhs_norm", "-", "infinity norm of the state derivative"));
    cols.push(Column::new("phi_sum", "pu", "1'phi"));
    cols.push(Column::new("gamma_sum", "pu", "1'gamma"));
    for s in 0..topo.k() {
        cols.push(Column::new(format!("z_sum_area{}", s + 1), "pu", "sum of z in area"));
    }
    cols
}

fn apply_offsets(scn: &Scenario, state: &mut ClosedLoopState) {
    for o in &scn.offsets {
        let v = match o.variable {
            StateVariable::Lambda => &mut state.lambda,
            StateVariable::Phi => &mut state.phi,
            StateVariable::Gamma => &mut state.gamma,
            StateVariable::Z => &mut state.z,
        };
        v[o.bus] += o.delta;
    }
}

fn conserved(sys: &ClosedLoop, x: &[f64]) -> (f64, f64, Vec<f64>) {
    let l = sys.layout();
    let topo = sys.topo();
    let mut z_area = vec![0.0; topo.k()];
    for (i, z) in x[l.z()].iter().enumerate() {
        z_area[topo.network.area_of(i)] += z;
    }
    (x[l.phi()].iter().sum(), x[l.gamma()].iter().sum(), z_area)
}

/// Runs the distributed controller from the pre-disturbance operating point.
pub fn run_distributed(scn: &Scenario) -> Result<DistributedRun> {
    let sys = build_closed_loop(scn)?;
    let topo = sys.topo();
    let layout = sys.layout();
    let (n, ng, k) = (topo.n(), topo.ng(), topo.k());

    let pre = solve_predisturbance_equilibrium(&sys)?;
    let mut initial = pre.clone();
    apply_offsets(scn, &mut initial);
    let final_load = post_disturbance_load(scn);
    let equilibrium = find_equilibrium(&sys, &final_load, &Anchors::of_state(&sys, &initial))?;
    log::info!("{}: equilibrium found, integrating to t = {} s", scn.name, scn.t_end);
    let eq_vec = equilibrium.to_vec();
    let x0 = initial.to_vec();
    let (phi0, gamma0, z0) = conserved(&sys, &x0);

    let mut table = ChannelTable::new(distributed_columns(scn));
    let mut times = Vec::new();
    let mut lyapunov = Vec::new();
    let mut rhs_norm = Vec::new();
    let mut drift = Drift::default();
    let mut domain_exits = 0;
    let mut monitor = scn.monitor_bus.map(|bus| MonitorSeries {
        bus,
        ..Default::default()
    });
    let mut sampler = Sampler::new(0.0, scn.sample_interval);
    let mut dx = vec![0.0; sys.dim()];
    let susceptance = topo.susceptances();
    let full = scn.channels == ChannelSet::Full;
    let mut failure = None;

    let last = integrate(
        &sys,
        &x0,
        &scn.model.params.base_load,
        0.0,
        scn.t_end,
        &scn.integration,
        &scn.events,
        |t, x, r| {
            let (phi, gamma, z) = conserved(&sys, x);
            drift.phi_sum = drift.phi_sum.max((phi - phi0).abs());
            drift.gamma_sum = drift.gamma_sum.max((gamma - gamma0).abs());
            for s in 0..k {
                drift.z_area = drift.z_area.max((z[s] - z0[s]).abs());
            }
            let obs = sys.observe(x, r);
            if let Some(m) = monitor.as_mut() {
                m.times.push(t);
                m.omega.push(obs.omega[m.bus]);
            }
            if !sampler.take(t) {
                return;
            }
            if let Err(e) = sys.rhs(x, r, &mut dx) {
                failure.get_or_insert(e);
                return;
            }
            let norm = dx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let v = lyapunov_v(&sys, x, &eq_vec);
            let w = energy_w(&x[layout.xi()], &equilibrium.xi, &susceptance);
            if !w.in_domain {
                domain_exits += 1;
            }
            let lambda = &x[layout.lambda()];
            let mut row = Vec::with_capacity(table.columns.len());
            row.push(t);
            if full {
                row.extend_from_slice(&x[layout.xi()]);
            }
            row.extend_from_slice(&obs.omega);
            row.extend_from_slice(&x[layout.p_m()]);
            row.extend_from_slice(&x[layout.p_c()]);
            row.extend_from_slice(&x[layout.d()]);
            row.extend_from_slice(lambda);
            if full {
                row.extend_from_slice(&x[layout.phi()]);
                row.extend_from_slice(&x[layout.gamma()]);
                row.extend_from_slice(&x[layout.z()]);
            }
            row.extend(topo.tie_deviation(&obs.flows));
            row.extend(lambda_spread(topo, lambda));
            row.extend([v, w.value, if w.in_domain { 1.0 } else { 0.0 }, norm, phi, gamma]);
            row.extend(z);
            table.push(row);
            times.push(t);
            lyapunov.push(v);
            rhs_norm.push(norm);
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    if domain_exits > 0 {
        log::warn!("{domain_exits} samples left the certified angle domain; integration continued");
    }
    debug_assert_eq!(x0.len(), layout.dim());
    debug_assert!(n >= ng);
    let settled_at = detect_steady_state(&times, &rhs_norm, scn.checks.steady_tol, scn.checks.steady_window);
    log::info!("{}: distributed run done, {} samples, steady from {settled_at:?}", scn.name, times.len());
    Ok(DistributedRun {
        pre,
        initial,
        equilibrium,
        final_state: ClosedLoopState::from_slice(layout, &last)?,
        final_load,
        table,
        times,
        lyapunov,
        rhs_norm,
        drift,
        domain_exits,
        monitor,
        settled_at,
    })
}

#[derive(Debug, Clone)]
pub struct AgcRun {
    pub table: ChannelTable,
    pub final_state: Vec<f64>,
    pub final_omega_max: f64,
    pub final_tie_max: f64,
    pub monitor: Option<MonitorSeries>,
}

/// Runs the AGC baseline from the same pre-disturbance operating point.
pub fn run_agc(scn: &Scenario) -> Result<AgcRun> {
    log::info!("{}: running the AGC baseline", scn.name);
    let closed = build_closed_loop(scn)?;
    let pre = solve_predisturbance_equilibrium(&closed)?;
    let sys = AgcLoop::new(
        scn.model.topo.clone(),
        scn.model.params.clone(),
        scn.agc.clone(),
        pre.p_c.clone(),
        pre.d.clone(),
    )?;
    let topo = sys.topo();
    let (nlines, ng, k) = (topo.n_lines(), topo.ng(), topo.k());
    let y0 = sys.initial_state(&pre.xi, &pre.omega_g, &pre.p_m);

    let mut cols = state_columns(scn, scn.channels);
    for s in 0..k {
        cols.push(Column::new(format!("agc_integral_area{}", s + 1), "pu", "AGC integrator state"));
    }
    for s in 0..k {
        cols.push(Column::new(format!("tie_dev_area{}", s + 1), "pu", "net export minus schedule"));
    }
    let mut table = ChannelTable::new(cols);
    let mut monitor = scn.monitor_bus.map(|bus| MonitorSeries {
        bus,
        ..Default::default()
    });
    let mut sampler = Sampler::new(0.0, scn.sample_interval);
    let full = scn.channels == ChannelSet::Full;
    let mut last_obs = None;
    let last = integrate(
        &sys,
        &y0,
        &scn.model.params.base_load,
        0.0,
        scn.t_end,
        &scn.integration,
        &scn.events,
        |t, y, r| {
            let obs = sys.observe(y, r);
            if let Some(m) = monitor.as_mut() {
                m.times.push(t);
                m.omega.push(obs.omega[m.bus]);
            }
            if sampler.take(t) {
                let mut row = vec![t];
                if full {
                    row.extend_from_slice(&y[..nlines]);
                }
                row.extend_from_slice(&obs.omega);
                row.extend_from_slice(&y[nlines + ng..nlines + 2 * ng]);
                row.extend(sys.setpoints(y));
                row.extend_from_slice(&sys.base_demand);
                row.extend_from_slice(&y[nlines + 2 * ng..]);
                row.extend(topo.tie_deviation(&obs.flows));
                table.push(row);
            }
            last_obs = Some(obs);
        },
    )?;
    let obs = last_obs.expect("observer runs at least once");
    Ok(AgcRun {
        table,
        final_state: last,
        final_omega_max: obs.omega.iter().fold(0.0, |m, v| m.max(v.abs())),
        final_tie_max: topo.tie_deviation(&obs.flows).iter().fold(0.0, |m, v| m.max(v.abs())),
        monitor,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value < threshold,
            value,
            threshold,
            note: String::new(),
        }
    }

    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            pass: value <= threshold,
            ..Self::below(name, value, threshold)
        }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Candidate dispatch read off a closed-loop state.
pub fn candidate_from_state(scn: &Scenario, state: &ClosedLoopState) -> OlfcSolution {
    let topo = &scn.model.topo;
    let flows = crate::plant::line_flows(&state.xi, &topo.susceptances());
    OlfcSolution {
        p_m: state.p_m.clone(),
        d: state.d.clone(),
        flows,
        lambda: state.lambda.clone(),
        area_price: area_means(topo, &state.lambda),
    }
}

/// Steady-state figures of a finished distributed run.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateSummary {
    pub max_abs_omega: f64,
    pub max_abs_tie_deviation: f64,
    pub max_lambda_spread: f64,
    pub quiet_area_deviation: Option<f64>,
    pub load_response_spread: Option<f64>,
    pub optimality_gap: f64,
    pub kkt: KktReport,
    pub equilibrium_distance: f64,
}

pub fn summarize(scn: &Scenario, run: &DistributedRun) -> Result<SteadyStateSummary> {
    let topo = &scn.model.topo;
    let (n, ng) = (topo.n(), topo.ng());
    let fin = &run.final_state;
    let sys = build_closed_loop(scn)?;
    let obs = sys.observe(&fin.to_vec(), &run.final_load);

    let disturbed = disturbed_areas(scn);
    let quiet: Vec<usize> = (0..n).filter(|&i| !disturbed[topo.network.area_of(i)]).collect();
    let quiet_area_deviation = (!quiet.is_empty() && disturbed.iter().any(|d| *d)).then(|| {
        quiet
            .iter()
            .map(|&i| {
                let dl = (fin.lambda[i] - run.pre.lambda[i]).abs();
                let du = if i < ng {
                    (fin.p_m[i] - run.pre.p_m[i]).abs()
                } else {
                    (fin.d[i - ng] - run.pre.d[i - ng]).abs()
                };
                dl.max(du)
            })
            .fold(0.0, f64::max)
    });

    let costs = &scn.model.costs;
    let mut load_response_spread: Option<f64> = None;
    for (s, hit) in disturbed.iter().enumerate() {
        let loads: Vec<usize> = (ng..n).filter(|&i| topo.network.area_of(i) == s).collect();
        let identical = loads.windows(2).all(|w| costs.get(w[0]) == costs.get(w[1]));
        if *hit && identical && !loads.is_empty() {
            let delta: Vec<f64> = loads.iter().map(|&i| fin.d[i - ng] - run.pre.d[i - ng]).collect();
            let hi = delta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = delta.iter().copied().fold(f64::INFINITY, f64::min);
            load_response_spread = Some(load_response_spread.unwrap_or(0.0).max(hi - lo));
        }
    }

    let problem = OlfcProblem::new(topo, costs, run.final_load.clone());
    let opt = solve_olfc_kkt(&problem)?;
    let optimality_gap = max_abs_diff(&fin.p_m, &opt.p_m).max(max_abs_diff(&fin.d, &opt.d));
    let kkt = check_kkt(&candidate_from_state(scn, fin), &problem, scn.checks.optimality_tol)?;
    Ok(SteadyStateSummary {
        max_abs_omega: obs.omega.iter().fold(0.0, |m, v| m.max(v.abs())),
        max_abs_tie_deviation: topo.tie_deviation(&obs.flows).iter().fold(0.0, |m, v| m.max(v.abs())),
        max_lambda_spread: lambda_spread(topo, &fin.lambda).into_iter().fold(0.0, f64::max),
        quiet_area_deviation,
        load_response_spread,
        optimality_gap,
        kkt,
        equilibrium_distance: max_abs_diff(&fin.to_vec(), &run.equilibrium.to_vec()),
    })
}

/// Largest increase of `V` between consecutive samples.
pub fn max_lyapunov_increase(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

pub fn distributed_checks(scn: &Scenario, run: &DistributedRun, summary: &SteadyStateSummary) -> Vec<Check> {
    let c = &scn.checks;
    let mut checks = vec![
        Check::below("frequency_restored", summary.max_abs_omega, c.frequency_tol),
        Check::below("tie_line_restored", summary.max_abs_tie_deviation, c.tie_tol),
        Check {
            name: "steady_state_reached".into(),
            pass: run.settled_at.is_some(),
            value: run.settled_at.unwrap_or(f64::NAN),
            threshold: scn.t_end,
            note: format!("rhs norm below {:e} for {} s", c.steady_tol, c.steady_window),
        },
        Check::below("lambda_consensus", summary.max_lambda_spread, c.consensus_tol),
    ];
    if let Some(dev) = summary.quiet_area_deviation {
        checks.push(
            Check::below("undisturbed_areas_idle", dev, c.consensus_tol)
                .note("lambda, P_m and d change in areas without load events"),
        );
    }
    if let Some(spread) = summary.load_response_spread {
        checks.push(Check::below("equal_load_response", spread, c.consensus_tol));
    }
    checks.push(Check::below("optimality_gap", summary.optimality_gap, c.optimality_tol));
    checks.push(Check::below("kkt_residual", summary.kkt.max_residual(), c.optimality_tol));
    checks.push(Check::below("equilibrium_match", summary.equilibrium_distance, 1e-5));

    // The certificate needs exact inertia and the full controller; the
    // single-area variant has no Lyapunov argument of its own.
    let exact_inertia = scn.gains.m_hat == scn.model.params.inertia;
    if c.lyapunov && exact_inertia && scn.mode == ControlMode::Distributed {
        checks.push(
            Check::at_most("lyapunov_monotone", max_lyapunov_increase(&run.lyapunov), c.lyapunov_allowance)
                .note(format!("largest increase between samples {} s apart", scn.sample_interval)),
        );
        checks.push(Check::below(
            "lyapunov_final",
            run.lyapunov.last().copied().unwrap_or(f64::NAN),
            c.lyapunov_final,
        ));
    }
    checks.push(Check::below("conservation_phi", run.drift.phi_sum, c.conservation_tol));
    let tie_sum: f64 = scn.model.topo.network.scheduled_tie().iter().sum();
    if tie_sum == 0.0 && scn.mode == ControlMode::Distributed {
        checks.push(Check::below("conservation_gamma", run.drift.gamma_sum, c.conservation_tol));
    }
    checks.push(Check::below("conservation_z", run.drift.z_area, c.conservation_tol));
    checks
}

pub fn agc_checks(scn: &Scenario, run: &AgcRun) -> Vec<Check> {
    vec![
        Check::below("agc_frequency_restored", run.final_omega_max, scn.checks.frequency_tol),
        Check::below("agc_tie_line_restored", run.final_tie_max, scn.checks.tie_tol),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseMetrics {
    /// Most negative interior local minimum after the first event; 0 if the
    /// response has none.
    pub nadir: f64,
    /// Plain signed minimum after the first event, including the algebraic
    /// jump at the event itself.
    pub raw_minimum: f64,
    /// Time from the event until `|omega|` last exceeds 1e-3 of its peak.
    pub settling_time: f64,
}

pub fn response_metrics(times: &[f64], omega: &[f64], event_time: f64) -> ResponseMetrics {
    let start = times.iter().position(|&t| t >= event_time).unwrap_or(times.len());
    let (t, w) = (&times[start..], &omega[start..]);
    let raw_minimum = w.iter().copied().fold(0.0, f64::min);
    let mut nadir = 0.0_f64;
    for i in 1..w.len().saturating_sub(1) {
        if w[i] < w[i - 1] && w[i] <= w[i + 1] {
            nadir = nadir.min(w[i]);
        }
    }
    let peak = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let settling_time = if peak == 0.0 {
        0.0
    } else {
        let threshold = 1e-3 * peak;
        w.iter()
            .rposition(|v| v.abs() > threshold)
            .map_or(0.0, |i| t[i] - event_time)
    };
    ResponseMetrics {
        nadir,
        raw_minimum,
        settling_time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ProposedBetter,
    Tie,
    Mixed,
    AgcBetter,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub bus: u32,
    pub proposed: ResponseMetrics,
    pub agc: ResponseMetrics,
    pub nadir_shallower: bool,
    pub settles_faster: bool,
    pub verdict: Verdict,
}

pub fn compare_runs(scn: &Scenario, proposed: &MonitorSeries, agc: &MonitorSeries) -> Comparison {
    let t0 = first_event_time(scn);
    let p = response_metrics(&proposed.times, &proposed.omega, t0);
    let a = response_metrics(&agc.times, &agc.omega, t0);
    let nadir_shallower = p.nadir > a.nadir;
    let settles_faster = p.settling_time < a.settling_time;
    let verdict = if p.nadir == a.nadir && p.settling_time == a.settling_time {
        Verdict::Tie
    } else if nadir_shallower && settles_faster {
        Verdict::ProposedBetter
    } else if !nadir_shallower && !settles_faster {
        Verdict::AgcBetter
    } else {
        Verdict::Mixed
    };
    Comparison {
        bus: scn.model.topo.network.label(proposed.bus),
        proposed: p,
        agc: a,
        nadir_shallower,
        settles_faster,
        verdict,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub controller: ControllerSelection,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<GainCertificate>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settled_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_state: Option<SteadyStateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub struct Outcome {
    pub report: Report,
    pub distributed: Option<DistributedRun>,
    pub agc: Option<AgcRun>,
}

/// Certifies gains unless only the AGC runs. Refuses uncertified gains
/// unless `allow_uncertified` is set, in which case a warning is recorded.
fn gate(scn: &Scenario, opts: &RunOptions, warnings: &mut Vec<String>) -> Result<Option<GainCertificate>> {
    if scn.controller == ControllerSelection::Agc {
        return Ok(None);
    }
    let cert = certify(scn)?;
    if !cert.pass {
        let failing: Vec<String> = cert
            .areas
            .iter()
            .filter(|a| !a.pass)
            .map(|a| format!("area {}: alpha {} > bound {:.6}", a.area + 1, a.alpha, a.alpha_star.unwrap_or(f64::INFINITY)))
            .collect();
        let msg = failing.join("; ");
        if !opts.allow_uncertified {
            return Err(Error::Uncertified(msg));
        }
        log::warn!("running with uncertified gains: {msg}");
        warnings.push(format!("gains are not certified ({msg})"));
    }
    Ok(Some(cert))
}

/// Runs whatever the scenario selects and evaluates every enabled check.
pub fn simulate(scn: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let mut warnings = Vec::new();
    let certificate = gate(scn, opts, &mut warnings)?;
    let mut checks = Vec::new();
    let mut steady_state = None;
    let mut settled_at = None;
    let distributed = match scn.controller {
        ControllerSelection::Agc => None,
        _ => {
            let run = run_distributed(scn)?;
            let summary = summarize(scn, &run)?;
            checks.extend(distributed_checks(scn, &run, &summary));
            if run.domain_exits > 0 {
                warnings.push(format!(
                    "{} samples left the certified angle domain",
                    run.domain_exits
                ));
            }
            settled_at = run.settled_at;
            steady_state = Some(summary);
            Some(run)
        }
    };
    let agc = match scn.controller {
        ControllerSelection::Distributed => None,
        _ => {
            let run = run_agc(scn)?;
            checks.extend(agc_checks(scn, &run));
            Some(run)
        }
    };
    let comparison = match (&distributed, &agc) {
        (Some(d), Some(a)) => match (&d.monitor, &a.monitor) {
            (Some(pm), Some(am)) => Some(compare_runs(scn, pm, am)),
            _ => None,
        },
        _ => None,
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(Outcome {
        report: Report {
            scenario: scn.name.clone(),
            controller: scn.controller,
            t_end: scn.t_end,
            certificate,
            warnings,
            settled_at,
            steady_state,
            comparison,
            checks,
            pass,
        },
        distributed,
        agc,
    })
}

/// Side-by-side run of both controllers. With an AGC-only scenario only the
/// AGC channels are produced and nothing is compared.
pub fn compare(scn: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    match scn.controller {
        ControllerSelection::Both | ControllerSelection::Agc => {}
        ControllerSelection::Distributed => {
            return Err(Error::Config("compare needs controller = \"both\" (or \"agc\")".into()))
        }
    }
    if scn.controller == ControllerSelection::Both && scn.monitor_bus.is_none() {
        return Err(Error::Config("compare needs monitor_bus".into()));
    }
    let mut outcome = simulate(scn, opts)?;
    if let Some(cmp) = &outcome.report.comparison {
        let ok = matches!(cmp.verdict, Verdict::ProposedBetter | Verdict::Tie);
        outcome.report.checks.push(Check {
            name: "proposed_outperforms_agc".into(),
            pass: ok,
            value: f64::NAN,
            threshold: f64::NAN,
            note: format!(
                "nadir {:.6e} vs {:.6e}, settling {:.3} s vs {:.3} s",
                cmp.proposed.nadir, cmp.agc.nadir, cmp.proposed.settling_time, cmp.agc.settling_time
            ),
        });
        outcome.report.pass = outcome.report.checks.iter().all(|c| c.pass);
    }
    Ok(outcome)
}

/// Writes CSV channels, manifests and the JSON report into `dir`.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(run) = &outcome.distributed {
        run.table
            .write(&dir.join("trajectory.csv"), &dir.join("trajectory_columns.tsv"))?;
    }
    if let Some(run) = &outcome.agc {
        run.table.write(&dir.join("agc.csv"), &dir.join("agc_columns.tsv"))?;
    }
    std::fs::write(dir.join("report.json"), to_json(&outcome.report) + "\n")?;
    Ok(())
}

/// Both dispatch oracles on one load vector, with their KKT residuals.
#[derive(Debug, Clone, Serialize)]
pub struct OlfcReport {
    pub name: String,
    pub load: Vec<f64>,
    pub objective: f64,
    pub solution: OlfcSolution,
    pub residuals: KktReport,
    pub gradient_iterations: usize,
    pub gradient_residuals: KktReport,
    /// Largest difference between the two oracles over `P_m`, `d` and area prices.
    pub oracle_gap: f64,
    pub lambda_spread: Vec<f64>,
    pub pass: bool,
}

pub fn olfc_report(
    name: &str,
    topo: &crate::network::Topology,
    costs: &crate::controller::CostModel,
    load: Vec<f64>,
    tol: f64,
) -> Result<OlfcReport> {
    let problem = OlfcProblem::new(topo, costs, load.clone());
    let solution = solve_olfc_kkt(&problem)?;
    let residuals = check_kkt(&solution, &problem, tol)?;
    let pgd = crate::oracle::solve_olfc_pgd(&problem)?;
    let gradient_residuals = check_kkt(&pgd.solution, &problem, tol.max(1e-6))?;
    let oracle_gap = max_abs_diff(&solution.p_m, &pgd.solution.p_m)
        .max(max_abs_diff(&solution.d, &pgd.solution.d))
        .max(max_abs_diff(&solution.area_price, &pgd.solution.area_price));
    Ok(OlfcReport {
        name: name.into(),
        objective: problem.objective(&solution.p_m, &solution.d),
        lambda_spread: lambda_spread(topo, &solution.lambda),
        pass: residuals.pass && oracle_gap < 1e-6,
        load,
        solution,
        residuals,
        gradient_iterations: pgd.iterations,
        gradient_residuals,
        oracle_gap,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize infallibly")
}
