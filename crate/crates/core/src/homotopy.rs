//! Homotopy in `t`: the full primal/dual solution path from
//! `t0 = ||A^T b||_inf` down to basis pursuit at `t = 0`.
//!
//! On each segment `x` is linear in `t` and `p` is affine in `1/t`. A segment
//! ends either when a new column reaches the dual constraint boundary (`T+`)
//! or when a nonzero primal coordinate hits zero (`T-`).

use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, DesignMatrix, IndexSet};
use crate::nnls::{solve_nnls, Bound, NnlsOptions, NnlsProblem};
use crate::report::{PrimalDualPair, SolverReport};
use crate::slow::{default_start, make_dual_point, DualPoint, DEFAULT_TOL_EQ};

/// Slack in the departure test `v_j <= -|x_j|`.
const DEPARTURE_SLACK: f64 = 1e-12;
/// Relative size below which the subproblem residual counts as zero.
const XI_ZERO: f64 = 1e-10;
/// Breakpoints below this fraction of the current `t` are round-off and snap to 0.
const ZERO_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PathBreakpoint {
    pub t: f64,
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

/// Breakpoints of a solution path, `t` strictly decreasing and ending at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    breakpoints: Vec<PathBreakpoint>,
}

impl SolutionPath {
    pub fn new(breakpoints: Vec<PathBreakpoint>) -> Result<Self> {
        let Some(first) = breakpoints.first() else {
            return Err(Error::Validation("a path needs at least one breakpoint".into()));
        };
        let (n, m) = (first.x.len(), first.p.len());
        for (k, bp) in breakpoints.iter().enumerate() {
            if bp.x.len() != n || bp.p.len() != m {
                return Err(Error::Validation(format!("breakpoint {k} has inconsistent dimensions")));
            }
            if !bp.t.is_finite() || bp.t < 0.0 {
                return Err(Error::Validation(format!("breakpoint {k} has invalid t = {}", bp.t)));
            }
        }
        if let Some(k) = breakpoints.windows(2).position(|w| !(w[1].t < w[0].t)) {
            return Err(Error::Validation(format!("t is not strictly decreasing at breakpoint {}", k + 1)));
        }
        if breakpoints.last().map(|bp| bp.t) != Some(0.0) {
            return Err(Error::Validation("the last breakpoint must have t = 0".into()));
        }
        Ok(SolutionPath { breakpoints })
    }

    pub fn breakpoints(&self) -> &[PathBreakpoint] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.breakpoints.iter().map(|bp| bp.t).collect()
    }

    /// The basis pursuit end point.
    pub fn last(&self) -> &PathBreakpoint {
        self.breakpoints.last().expect("validated non-empty")
    }
}

/// Working state at one breakpoint.
#[derive(Debug, Clone)]
pub struct HomotopyState {
    pub t: f64,
    pub x: DVector<f64>,
    pub p: DualPoint,
    pub v_hat: DVector<f64>,
    pub xi: DVector<f64>,
    pub t_plus: f64,
    pub t_minus: f64,
    /// Smallest `1/t' - 1/t` at which a constraint becomes active.
    pub c: f64,
    /// Active set of the last subproblem, reused as a warm start.
    pub warm: Option<IndexSet>,
}

impl HomotopyState {
    pub fn new(t: f64, x: DVector<f64>, p: DualPoint) -> Self {
        let (n, m) = (x.len(), p.p().len());
        HomotopyState {
            t,
            x,
            p,
            v_hat: DVector::zeros(n),
            xi: DVector::zeros(m),
            t_plus: f64::NAN,
            t_minus: f64::NAN,
            c: f64::NAN,
            warm: None,
        }
    }
}

/// Direction subproblem: `min ||A D v + t p||^2` with `v_j >= 0` where
/// `j` is equicorrelated and `x_j = 0`, `v_j` free where `x_j != 0`, and
/// `v_j = 0` off the equicorrelation set. Returns `(v_hat, xi)` with
/// `xi = A D v_hat + t p`.
pub fn homotopy_subproblem(
    a: &DesignMatrix,
    state: &HomotopyState,
    opts: &NnlsOptions,
) -> Result<(DVector<f64>, DVector<f64>, usize, IndexSet)> {
    let n = a.ncols();
    let mut bounds = vec![Bound::Zero; n];
    for j in state.p.equicorrelation().iter() {
        bounds[j] = if state.x[j] != 0.0 { Bound::Free } else { Bound::NonNeg };
    }
    let target = -state.p.p() * state.t;
    let prob = NnlsProblem::new(a, state.p.signs().clone(), bounds, target)?;
    let sol = solve_nnls(&prob, state.warm.as_ref(), opts)?;
    Ok((sol.u, sol.residual, sol.iterations, sol.active_set))
}

/// True when the subproblem residual `xi` is round-off relative to `t p`.
///
/// Below this level `xi` carries no direction, and dividing it by a tiny
/// breakpoint would throw the dual point out of the feasible set.
pub(crate) fn xi_negligible(xi: &DVector<f64>, t: f64, p: &DVector<f64>) -> bool {
    xi.norm() <= XI_ZERO * t * p.norm()
}

/// `(T-, T+, C)` for the current subproblem solution.
pub fn breakpoints(a: &DesignMatrix, state: &HomotopyState) -> (f64, f64, f64) {
    let t = state.t;
    let xi = &state.xi;
    let xi_norm = xi.norm();
    let c = if xi_negligible(xi, t, state.p.p()) {
        f64::INFINITY
    } else {
        let slopes = state.p.signs().apply(&a.tr_mul(xi));
        let tol = 1e-11 * xi_norm;
        let mut c = f64::INFINITY;
        for j in 0..slopes.len() {
            let s = slopes[j];
            if s.abs() <= tol || (s < 0.0 && state.p.equicorrelation().contains(j)) {
                continue;
            }
            c = c.min((s.signum() + state.p.correlation()[j].abs()) / s);
        }
        c
    };
    let t_plus = if c.is_infinite() { 0.0 } else { t / (1.0 + t * c) };

    let mut ratio = f64::INFINITY;
    for j in state.p.equicorrelation().iter() {
        let xj = state.x[j].abs();
        if xj != 0.0 && state.v_hat[j] <= -xj + DEPARTURE_SLACK {
            ratio = ratio.min(xj / state.v_hat[j].abs());
        }
    }
    let t_minus = if ratio.is_infinite() { f64::NEG_INFINITY } else { t * (1.0 - ratio) };
    (t_minus, t_plus, c)
}

#[derive(Debug, Clone, Copy)]
pub struct HomotopyOptions {
    pub tol_eq: f64,
    /// Breakpoint cap; defaults to `50 * n`.
    pub max_breakpoints: Option<usize>,
    pub nnls: NnlsOptions,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions { tol_eq: DEFAULT_TOL_EQ, max_breakpoints: None, nnls: NnlsOptions::default() }
    }
}

/// Traces the piecewise-linear solution path from `t = ||A^T b||_inf` down to 0.
/// Returns the path and a run summary.
pub fn solution_path(
    a: &DesignMatrix,
    b: &DVector<f64>,
    opts: &HomotopyOptions,
) -> Result<(SolutionPath, SolverReport)> {
    let started = Instant::now();
    if b.len() != a.nrows() {
        return Err(Error::invalid("b has the wrong length"));
    }
    if b.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("b must be nonzero"));
    }
    let n = a.ncols();
    let t0 = norm_inf(&a.tr_mul(b));
    let p0 = default_start(a, b)?;
    let mut state = HomotopyState::new(t0, DVector::zeros(n), make_dual_point(a, &p0, opts.tol_eq)?);
    let mut nodes = vec![PathBreakpoint { t: t0, x: state.x.clone(), p: p0 }];
    let mut report = SolverReport::new();
    let cap = opts.max_breakpoints.unwrap_or(50 * n);

    for _ in 0..cap {
        let (v_hat, xi, iters, active) = homotopy_subproblem(a, &state, &opts.nnls)?;
        report.nnls_iterations += iters;
        report.iterations += 1;
        state.v_hat = v_hat;
        state.xi = xi;
        state.warm = Some(active);
        let (t_minus, t_plus, c) = breakpoints(a, &state);
        if c.is_infinite() {
            // The dual point no longer moves; leftover round-off in xi would be
            // amplified by 1/t' below.
            state.xi.fill(0.0);
        }
        state.t_minus = t_minus;
        state.t_plus = t_plus;
        state.c = c;
        let t = state.t;
        let mut t_next = t_minus.max(t_plus).max(0.0);
        if t_next <= ZERO_SNAP * t {
            t_next = 0.0;
        }
        if t_next >= t * (1.0 - 1e-14) {
            return Err(Error::PathStall {
                t,
                breakpoints: nodes.len(),
                active: state.warm.as_ref().map_or(0, |w| w.len()),
            });
        }

        let step = 1.0 - t_next / t;
        let dv = state.p.signs().apply(&state.v_hat);
        let mut x = &state.x + dv * step;
        if t_minus >= t_plus {
            // Departing coordinates land on zero up to round-off; make it exact.
            for j in state.p.equicorrelation().iter() {
                let xj = state.x[j].abs();
                if xj != 0.0 && state.v_hat[j] <= -xj + DEPARTURE_SLACK {
                    let tj = t * (1.0 - xj / state.v_hat[j].abs());
                    if tj >= t_next - 1e-12 * t {
                        x[j] = 0.0;
                    }
                }
            }
        }
        // Off the equicorrelation set v_hat is pinned, so x stays zero there.
        let p = if t_next == 0.0 { state.p.p().clone() } else { state.p.p() + &state.xi * (1.0 / t_next - 1.0 / t) };
        nodes.push(PathBreakpoint { t: t_next, x: x.clone(), p: p.clone() });
        if t_next == 0.0 {
            report.final_descent_norm = state.xi.norm();
            report.wall_time = started.elapsed();
            return Ok((SolutionPath::new(nodes)?, report));
        }
        let warm = state.warm.take();
        state = HomotopyState::new(t_next, x, make_dual_point(a, &p, opts.tol_eq)?);
        state.warm = warm;
    }
    report.wall_time = started.elapsed();
    Err(Error::NonConvergence { iterations: cap, report: Box::new(report) })
}

/// Primal/dual pair on the path at `t`, interpolating between breakpoints.
pub fn path_query(path: &SolutionPath, t: f64) -> Result<PrimalDualPair> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be nonnegative, got {t}")));
    }
    let bps = path.breakpoints();
    let first = &bps[0];
    if t >= first.t {
        let p = if t == first.t { first.p.clone() } else { &first.p * (first.t / t) };
        return Ok(PrimalDualPair { t, x: DVector::zeros(first.x.len()), p });
    }
    // bps[k].t > t >= bps[k + 1].t
    let k = bps.partition_point(|bp| bp.t > t) - 1;
    let (lo, hi) = (&bps[k], &bps[k + 1]);
    if t == hi.t {
        return Ok(PrimalDualPair { t, x: hi.x.clone(), p: hi.p.clone() });
    }
    let w = (lo.t - t) / (lo.t - hi.t);
    let x = &lo.x + (&hi.x - &lo.x) * w;
    let p = if hi.t == 0.0 {
        lo.p.clone()
    } else {
        let xi = (&hi.p - &lo.p) / (1.0 / hi.t - 1.0 / lo.t);
        &lo.p + xi * (1.0 / t - 1.0 / lo.t)
    };
    Ok(PrimalDualPair { t, x, p })
}
