//! Independent solvers for the optimal load frequency control problem
//!
//! ```text
//!     minimize    sum F_i(P_m,i) - sum U_i(d_i)
//!     subject to  P_m - C_pG P = 0
//!                 r + d + C_pL P = 0
//!                 E C_p P = P_t
//! ```
//!
//! The objective does not depend on the flows `P`, so the problem reduces to
//! `(P_m, d)` with one balance constraint per area:
//! `sum_{gen in s} P_m - sum_{load in s} d = P_t,s + sum_{load in s} r`.
//! Any connected network can then carry the balanced injections; we report
//! the minimum-norm flow.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::controller::cost::CostModel;
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::plant::check_len;

#[derive(Debug, Clone)]
pub struct OlfcProblem<'a> {
    pub topo: &'a Topology,
    pub costs: &'a CostModel,
    /// Uncontrollable load `r` per load bus.
    pub load: Vec<f64>,
    pub scheduled_tie: Vec<f64>,
}

impl<'a> OlfcProblem<'a> {
    pub fn new(topo: &'a Topology, costs: &'a CostModel, load: Vec<f64>) -> Self {
        Self {
            topo,
            costs,
            load,
            scheduled_tie: topo.network.scheduled_tie().to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        check_len("load", self.topo.nl(), self.load.len())?;
        check_len("scheduled tie", self.topo.k(), self.scheduled_tie.len())?;
        self.costs.validate(self.topo)?;
        // summing E C_p P = P_t over areas gives 0 = 1'P_t
        let residual: f64 = self.scheduled_tie.iter().sum();
        let scale = self.scheduled_tie.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if residual.abs() > 1e-12 * scale {
            return Err(Error::Infeasible {
                certificate: vec![1.0; self.topo.k()],
                residual,
            });
        }
        Ok(())
    }

    /// Area balance `A x = b` over `x = (P_m, d)`.
    fn constraints(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (n, ng, k) = (self.topo.n(), self.topo.ng(), self.topo.k());
        let mut a = DMatrix::zeros(k, n);
        let mut b = DVector::from_column_slice(&self.scheduled_tie);
        for i in 0..n {
            let s = self.topo.network.area_of(i);
            if i < ng {
                a[(s, i)] = 1.0;
            } else {
                a[(s, i)] = -1.0;
                b[s] += self.load[i - ng];
            }
        }
        (a, b)
    }

    /// Diagonal Hessian and linear term of the objective over `x = (P_m, d)`.
    fn quadratic(&self) -> (Vec<f64>, Vec<f64>) {
        let ng = self.topo.ng();
        let sign = |i: usize| if i < ng { 1.0 } else { -1.0 };
        self.costs
            .buses
            .iter()
            .enumerate()
            .map(|(i, c)| (sign(i) * c.c1, sign(i) * c.c2))
            .unzip()
    }

    pub fn objective(&self, p_m: &[f64], d: &[f64]) -> f64 {
        self.costs.objective(p_m, d)
    }

    /// Minimum-norm flow delivering injections `(P_m, -(r + d))`.
    pub fn min_norm_flow(&self, p_m: &[f64], d: &[f64]) -> Vec<f64> {
        let topo = self.topo;
        let n = topo.n();
        let c = &topo.incidence;
        let mut s = DVector::zeros(n);
        for i in 0..n {
            s[i] = if i < topo.ng() {
                p_m[i]
            } else {
                -(self.load[i - topo.ng()] + d[i - topo.ng()])
            };
        }
        let lap = c * c.transpose() + DMatrix::from_element(n, n, 1.0 / n as f64);
        let theta = lap.lu().solve(&s).expect("grounded Laplacian of a connected graph is regular");
        (c.transpose() * theta).as_slice().to_vec()
    }

    fn assemble(&self, x: &DVector<f64>, area_price: Vec<f64>) -> OlfcSolution {
        let ng = self.topo.ng();
        let p_m = x.as_slice()[..ng].to_vec();
        let d = x.as_slice()[ng..].to_vec();
        let flows = self.min_norm_flow(&p_m, &d);
        let lambda = (0..self.topo.n())
            .map(|i| area_price[self.topo.network.area_of(i)])
            .collect();
        OlfcSolution {
            p_m,
            d,
            flows,
            lambda,
            area_price,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlfcSolution {
    pub p_m: Vec<f64>,
    pub d: Vec<f64>,
    pub flows: Vec<f64>,
    /// Incremental cost per bus; equals `E^T area_price`.
    pub lambda: Vec<f64>,
    pub area_price: Vec<f64>,
}

/// Solves the KKT linear system of the reduced problem directly.
pub fn solve_olfc_kkt(problem: &OlfcProblem) -> Result<OlfcSolution> {
    problem.validate()?;
    let (n, k) = (problem.topo.n(), problem.topo.k());
    let (h, g) = problem.quadratic();
    let (a, b) = problem.constraints();
    // [ H  -A^T ] [x]   [-g]
    // [ A   0   ] [v] = [ b]
    let mut kkt = DMatrix::zeros(n + k, n + k);
    for i in 0..n {
        kkt[(i, i)] = h[i];
    }
    kkt.view_mut((0, n), (n, k)).copy_from(&(-a.transpose()));
    kkt.view_mut((n, 0), (k, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + k);
    for i in 0..n {
        rhs[i] = -g[i];
    }
    rhs.rows_mut(n, k).copy_from(&b);
    let sol = kkt.lu().solve(&rhs).ok_or_else(|| Error::NotConverged {
        what: "KKT factorization",
        iterations: 0,
        residual: f64::NAN,
    })?;
    let x = sol.rows(0, n).into_owned();
    let area_price = sol.rows(n, k).iter().map(|v| -v).collect();
    Ok(problem.assemble(&x, area_price))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdSolution {
    pub solution: OlfcSolution,
    pub iterations: usize,
}

pub const PGD_MAX_ITER: usize = 1_000_000;

/// Projected gradient descent on the affine feasible set with step
/// `1 / max b_i`, started from the projection of the unconstrained minimizer.
pub fn solve_olfc_pgd(problem: &OlfcProblem) -> Result<PgdSolution> {
    problem.validate()?;
    let (n, k) = (problem.topo.n(), problem.topo.k());
    let (h, g) = problem.quadratic();
    let (a, b) = problem.constraints();
    // A A^T is diagonal with the area sizes on it
    let area_size: Vec<f64> = (0..k).map(|s| a.row(s).iter().map(|v| v * v).sum()).collect();
    let project_rows = |v: &DVector<f64>| -> DVector<f64> {
        let y = &a * v;
        DVector::from_iterator(k, (0..k).map(|s| y[s] / area_size[s]))
    };
    let onto_null = |v: DVector<f64>| -> DVector<f64> {
        let c = project_rows(&v);
        v - a.transpose() * c
    };

    let unconstrained = DVector::from_iterator(n, (0..n).map(|i| -g[i] / h[i]));
    let violation = &a * &unconstrained - &b;
    let shift = DVector::from_iterator(k, (0..k).map(|s| violation[s] / area_size[s]));
    let mut x = &unconstrained - a.transpose() * shift;

    let step = 1.0 / h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let gradient = |x: &DVector<f64>| DVector::from_iterator(n, (0..n).map(|i| h[i] * x[i] + g[i]));
    let mut iterations = 0;
    loop {
        let pg = onto_null(gradient(&x));
        let norm = pg.norm();
        if norm < 1e-10 {
            break;
        }
        if iterations >= PGD_MAX_ITER {
            return Err(Error::NotConverged {
                what: "projected gradient",
                iterations,
                residual: norm,
            });
        }
        x -= step * pg;
        iterations += 1;
    }
    // the multiplier satisfies grad = A^T v on the optimum
    let v = project_rows(&gradient(&x));
    let area_price = v.iter().map(|v| -v).collect();
    Ok(PgdSolution {
        solution: problem.assemble(&x, area_price),
        iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    /// `max |P_m - C_pG P|`
    pub generator_balance: f64,
    /// `max |r + d + C_pL P|`
    pub load_balance: f64,
    /// `max |E C_p P - P_t|`
    pub tie_balance: f64,
    /// `max |grad F(P_m) + lambda_G|`
    pub generator_stationarity: f64,
    /// `max |grad U(d) + lambda_L|`
    pub load_stationarity: f64,
    /// `max |lambda - E^T area_price|`
    pub price_consistency: f64,
    /// Largest spread of `lambda` inside one area.
    pub lambda_spread: f64,
    pub tol: f64,
    pub pass: bool,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.generator_balance,
            self.load_balance,
            self.tie_balance,
            self.generator_stationarity,
            self.load_stationarity,
            self.price_consistency,
            self.lambda_spread,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn check_kkt(candidate: &OlfcSolution, problem: &OlfcProblem, tol: f64) -> Result<KktReport> {
    let topo = problem.topo;
    let (n, ng, k) = (topo.n(), topo.ng(), topo.k());
    check_len("candidate P_m", ng, candidate.p_m.len())?;
    check_len("candidate d", n - ng, candidate.d.len())?;
    check_len("candidate flows", topo.n_lines(), candidate.flows.len())?;
    check_len("candidate lambda", n, candidate.lambda.len())?;
    check_len("candidate area prices", k, candidate.area_price.len())?;
    let amax = |it: &mut dyn Iterator<Item = f64>| it.map(f64::abs).fold(0.0, f64::max);
    let net = topo.net_outflow(&candidate.flows);
    let tie = topo
        .area_exports(&candidate.flows)
        .iter()
        .zip(&problem.scheduled_tie)
        .map(|(a, t)| a - t)
        .collect::<Vec<_>>();
    let generator_balance = amax(&mut (0..ng).map(|i| candidate.p_m[i] - net[i]));
    let load_balance = amax(&mut (ng..n).map(|i| problem.load[i - ng] + candidate.d[i - ng] + net[i]));
    let tie_balance = amax(&mut tie.into_iter());
    let generator_stationarity =
        amax(&mut (0..ng).map(|i| problem.costs.get(i).grad(candidate.p_m[i]) + candidate.lambda[i]));
    let load_stationarity =
        amax(&mut (ng..n).map(|i| problem.costs.get(i).grad(candidate.d[i - ng]) + candidate.lambda[i]));
    let price_consistency =
        amax(&mut (0..n).map(|i| candidate.lambda[i] - candidate.area_price[topo.network.area_of(i)]));
    let lambda_spread = lambda_spread(topo, &candidate.lambda)
        .into_iter()
        .fold(0.0, f64::max);
    let mut report = KktReport {
        generator_balance,
        load_balance,
        tie_balance,
        generator_stationarity,
        load_stationarity,
        price_consistency,
        lambda_spread,
        tol,
        pass: false,
    };
    report.pass = report.max_residual() < tol;
    Ok(report)
}

/// `max - min` of `lambda` inside each area.
pub fn lambda_spread(topo: &Topology, lambda: &[f64]) -> Vec<f64> {
    let mut lo = vec![f64::INFINITY; topo.k()];
    let mut hi = vec![f64::NEG_INFINITY; topo.k()];
    for (i, &l) in lambda.iter().enumerate() {
        let s = topo.network.area_of(i);
        lo[s] = lo[s].min(l);
        hi[s] = hi[s].max(l);
    }
    hi.iter().zip(&lo).map(|(h, l)| h - l).collect()
}

/// Area-mean of `lambda`, a natural estimate of the area prices.
pub fn area_means(topo: &Topology, lambda: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; topo.k()];
    let mut count = vec![0.0; topo.k()];
    for (i, &l) in lambda.iter().enumerate() {
        let s = topo.network.area_of(i);
        sum[s] += l;
        count[s] += 1.0;
    }
    sum.iter().zip(&count).map(|(s, c)| s / c).collect()
}
