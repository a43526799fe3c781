//! Explicit Runge-Kutta integration with step changes in the load.
//!
//! Load events split the horizon into segments; every segment is integrated
//! from its left end so an event never falls inside a step. The load vector
//! is right-continuous: at an event time the observer already sees the new
//! load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::check_len;
use crate::simulator::dynamics::Dynamics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum StepControl {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with error-per-step control.
    DormandPrince { rtol: f64, atol: f64, max_step: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Rk4 { step: 1e-3 }
    }
}

/// Step change `delta` of the uncontrollable load at load index `load`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadEvent {
    pub time: f64,
    pub load: usize,
    pub delta: f64,
}

const MAX_ADAPTIVE_STEPS: usize = 100_000_000;

/// Integrates `sys` from `(t0, x0)` to `t_end`, calling `observer(t, x, r)`
/// at `t0` and after every step. Returns the final state.
#[allow(clippy::too_many_arguments)]
pub fn integrate<D: Dynamics + ?Sized>(
    sys: &D,
    x0: &[f64],
    load0: &[f64],
    t0: f64,
    t_end: f64,
    control: &StepControl,
    events: &[LoadEvent],
    mut observer: impl FnMut(f64, &[f64], &[f64]),
) -> Result<Vec<f64>> {
    check_len("initial state", sys.dim(), x0.len())?;
    check_len("initial load", sys.n_loads(), load0.len())?;
    if !(t_end >= t0) {
        return Err(Error::InvalidParameter(format!("t_end {t_end} precedes t0 {t0}")));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial state is not finite".into()));
    }
    match *control {
        StepControl::Rk4 { step } if !(step > 0.0) => {
            return Err(Error::InvalidParameter("step must be positive".into()))
        }
        StepControl::DormandPrince { rtol, atol, max_step } if !(rtol > 0.0 && atol > 0.0 && max_step > 0.0) => {
            return Err(Error::InvalidParameter("tolerances and max step must be positive".into()))
        }
        _ => {}
    }
    for e in events {
        if e.load >= sys.n_loads() || !e.time.is_finite() || !e.delta.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid load event {e:?}")));
        }
    }

    let mut pending: Vec<LoadEvent> = events.iter().copied().filter(|e| e.time <= t_end).collect();
    pending.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut pending = pending.into_iter().peekable();

    let mut load = load0.to_vec();
    let mut apply_until = |t: f64, load: &mut Vec<f64>| {
        while let Some(e) = pending.next_if(|e| e.time <= t) {
            load[e.load] += e.delta;
        }
    };
    apply_until(t0, &mut load);

    let mut boundaries: Vec<f64> = events
        .iter()
        .map(|e| e.time)
        .filter(|&t| t > t0 && t < t_end)
        .collect();
    boundaries.sort_by(f64::total_cmp);
    boundaries.dedup();
    boundaries.push(t_end);

    let mut x = x0.to_vec();
    let mut work = Workspace::new(sys.dim());
    observer(t0, &x, &load);
    let mut a = t0;
    for &b in &boundaries {
        if b > a {
            match *control {
                StepControl::Rk4 { step } => {
                    let m = (((b - a) / step) - 1e-9).ceil().max(1.0) as usize;
                    let h = (b - a) / m as f64;
                    let mut t_prev = a;
                    for i in 1..=m {
                        rk4_step(sys, &mut x, &load, h, &mut work)?;
                        let t = if i == m { b } else { a + i as f64 * h };
                        ensure_finite(&x, t_prev)?;
                        if i == m {
                            apply_until(b, &mut load);
                        }
                        observer(t, &x, &load);
                        t_prev = t;
                    }
                }
                StepControl::DormandPrince { rtol, atol, max_step } => {
                    let mut t = a;
                    let mut h = max_step.min(b - a).min(1e-3);
                    let mut steps = 0;
                    while t < b {
                        let last = t + h >= b;
                        let h_try = if last { b - t } else { h };
                        let err = dopri_step(sys, &x, &load, h_try, rtol, atol, &mut work)?;
                        steps += 1;
                        if steps > MAX_ADAPTIVE_STEPS {
                            return Err(Error::NotConverged {
                                what: "adaptive integration",
                                iterations: steps,
                                residual: err,
                            });
                        }
                        if err <= 1.0 {
                            x.copy_from_slice(&work.out);
                            let t_new = if last { b } else { t + h_try };
                            ensure_finite(&x, t)?;
                            if last {
                                apply_until(b, &mut load);
                            }
                            observer(t_new, &x, &load);
                            t = t_new;
                        }
                        if !err.is_finite() {
                            h = h_try * 0.2;
                        } else {
                            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                            h = (h_try * factor).min(max_step);
                        }
                        if h < 1e-14 * (1.0 + t.abs()) {
                            return Err(Error::Diverged { time: t });
                        }
                    }
                }
            }
        }
        a = b;
    }
    Ok(x)
}

fn ensure_finite(x: &[f64], last_valid: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { time: last_valid })
    }
}

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    out: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            out: vec![0.0; dim],
        }
    }
}

fn rk4_step<D: Dynamics + ?Sized>(sys: &D, x: &mut [f64], load: &[f64], h: f64, w: &mut Workspace) -> Result<()> {
    let [k1, k2, k3, k4, ..] = &mut w.k;
    let tmp = &mut w.tmp;
    sys.rhs(x, load, k1)?;
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    sys.rhs(tmp, load, k2)?;
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    sys.rhs(tmp, load, k3)?;
    for i in 0..x.len() {
        tmp[i] = x[i] + h * k3[i];
    }
    sys.rhs(tmp, load, k4)?;
    for i in 0..x.len() {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

// Dormand-Prince 5(4) tableau; the field is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One trial step; the candidate lands in `w.out`. Returns the scaled RMS
/// error estimate (accept when <= 1).
fn dopri_step<D: Dynamics + ?Sized>(
    sys: &D,
    x: &[f64],
    load: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
    w: &mut Workspace,
) -> Result<f64> {
    let n = x.len();
    for stage in 0..7 {
        for i in 0..n {
            let mut acc = x[i];
            for (j, a) in A[stage].iter().enumerate().take(stage) {
                acc += h * a * w.k[j][i];
            }
            w.tmp[i] = acc;
        }
        sys.rhs(&w.tmp, load, &mut w.k[stage])?;
    }
    let mut sum = 0.0;
    for i in 0..n {
        let mut hi = x[i];
        let mut err = 0.0;
        for s in 0..7 {
            hi += h * B5[s] * w.k[s][i];
            err += h * (B5[s] - B4[s]) * w.k[s][i];
        }
        w.out[i] = hi;
        let scale = atol + rtol * x[i].abs().max(hi.abs());
        sum += (err / scale).powi(2);
    }
    Ok((sum / n as f64).sqrt())
}

/// Sampled states of one integration run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub loads: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

/// Keeps a sample whenever at least `interval` has elapsed since the last
/// one, plus the first and the final state.
pub fn simulate<D: Dynamics + ?Sized>(
    sys: &D,
    x0: &[f64],
    load0: &[f64],
    t0: f64,
    t_end: f64,
    control: &StepControl,
    events: &[LoadEvent],
    interval: f64,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    let mut sampler = Sampler::new(t0, interval);
    let last = integrate(sys, x0, load0, t0, t_end, control, events, |t, x, r| {
        if sampler.take(t) {
            traj.times.push(t);
            traj.states.push(x.to_vec());
            traj.loads.push(r.to_vec());
        }
    })?;
    if traj.times.last() != Some(&t_end) {
        traj.times.push(t_end);
        traj.states.push(last);
        traj.loads.push(traj.loads.last().cloned().unwrap_or_default());
    }
    Ok(traj)
}

/// Decides which observer calls are recorded.
#[derive(Debug, Clone)]
pub struct Sampler {
    next: f64,
    interval: f64,
    started: bool,
}

impl Sampler {
    pub fn new(t0: f64, interval: f64) -> Self {
        Self {
            next: t0,
            interval,
            started: false,
        }
    }

    pub fn take(&mut self, t: f64) -> bool {
        let slack = 1e-9 * (1.0 + t.abs());
        if !self.started || t + slack >= self.next {
            self.started = true;
            while self.next <= t + slack {
                self.next += self.interval;
            }
            true
        } else {
            false
        }
    }
}
