//! Greedy continuation in `(t, b)` towards a feasible basis pursuit pair.
//!
//! Each iteration perturbs the data so that the direction subproblem is
//! solved in closed form by a least-squares vector on a maximal independent
//! subset `M` of the equicorrelation set, no coordinate leaves the support,
//! and at least one new independent column enters. After at most
//! `rank(A)` iterations `t` reaches zero; undoing the accumulated data
//! perturbation gives `x_f` with `A x_f = b`.

use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::homotopy::xi_negligible;
use crate::linalg::{extend_independent_subset, gram_solve, norm_inf, DesignMatrix, IndexSet};
use crate::nnls::{solve_nnls, Bound, NnlsOptions, NnlsProblem};
use crate::report::SolverReport;
use crate::slow::{default_start, make_dual_point, pull_inside, DualPoint, DEFAULT_TOL_EQ};

/// Snapshot of one greedy iteration, taken after the primal/data updates.
#[derive(Debug, Clone)]
pub struct GreedyState {
    /// Hyperparameter at the start of the iteration.
    pub t: f64,
    /// Hyperparameter after the iteration.
    pub t_next: f64,
    /// Perturbed data after the iteration.
    pub b_current: DVector<f64>,
    pub x: DVector<f64>,
    /// Dual point at the start of the iteration.
    pub p: DualPoint,
    pub m_set: IndexSet,
    pub w: DVector<f64>,
    pub v_hat: DVector<f64>,
    pub xi: DVector<f64>,
    /// Departure breakpoint of the perturbed subproblem (never positive).
    pub t_minus: f64,
    pub w_total: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePair {
    pub x_f: DVector<f64>,
    pub p_f: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyOptions {
    pub tol_eq: f64,
    /// Rank threshold for the independent subset; default scales with `||A_E||_F`.
    pub tol_rank: Option<f64>,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions { tol_eq: DEFAULT_TOL_EQ, tol_rank: None }
    }
}

/// Least-squares direction on `M`: `v_M = t D_M (A_M^T A_M)^{-1} D_M 1`,
/// zero elsewhere. It solves `D_M A_M^T (A_M D_M v + t p) = 0` whenever
/// `D_M A_M^T p = -1`.
pub fn v_lsq(a: &DesignMatrix, pt: &DualPoint, m_set: &IndexSet, t: f64) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut v = DVector::zeros(n);
    if m_set.is_empty() {
        return Ok(v);
    }
    let a_m = a.submatrix_columns(m_set)?;
    let signs = pt.signs();
    let rhs = DVector::from_iterator(m_set.len(), m_set.iter().map(|j| signs.get(j)));
    let sol = gram_solve(&a_m, &rhs)?;
    for (c, j) in m_set.iter().enumerate() {
        v[j] = t * signs.get(j) * sol[c];
    }
    Ok(v)
}

/// Minimal-norm correction keeping every coordinate on its side of zero:
/// `max(0, -D_j x_j - v_j)` on `M`, `-D_j x_j` elsewhere.
pub fn w_min(pt: &DualPoint, m_set: &IndexSet, x: &DVector<f64>, v_lsq: &DVector<f64>) -> DVector<f64> {
    let signs = pt.signs();
    DVector::from_fn(x.len(), |j, _| {
        let dx = signs.get(j) * x[j];
        if m_set.contains(j) {
            (-dx - v_lsq[j]).max(0.0)
        } else {
            -dx
        }
    })
}

/// Greedy continuation to a feasible BP primal/dual pair in at most `rank(A)` rounds.
pub fn greedy_feasible(
    a: &DesignMatrix,
    b: &DVector<f64>,
    opts: &GreedyOptions,
) -> Result<(FeasiblePair, SolverReport)> {
    run(a, b, opts, |_| {})
}

/// As [`greedy_feasible`], also returning every iteration's state.
pub fn greedy_trace(
    a: &DesignMatrix,
    b: &DVector<f64>,
    opts: &GreedyOptions,
) -> Result<(FeasiblePair, Vec<GreedyState>)> {
    let mut states = Vec::new();
    let (pair, _) = run(a, b, opts, |s| states.push(s.clone()))?;
    Ok((pair, states))
}

fn run(
    a: &DesignMatrix,
    b: &DVector<f64>,
    opts: &GreedyOptions,
    mut observe: impl FnMut(&GreedyState),
) -> Result<(FeasiblePair, SolverReport)> {
    let started = Instant::now();
    if b.len() != a.nrows() {
        return Err(Error::invalid("b has the wrong length"));
    }
    if b.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("b must be nonzero"));
    }
    let (m, n) = (a.nrows(), a.ncols());
    let mut t = norm_inf(&a.tr_mul(b));
    let mut p = default_start(a, b)?;
    let mut x = DVector::zeros(n);
    let mut b_cur = b.clone();
    let mut w_total = DVector::zeros(n);
    let mut m_prev = IndexSet::empty();
    let mut report = SolverReport::new();

    for k in 1..=m + 1 {
        let pt = make_dual_point(a, &p, opts.tol_eq)?;
        let e = pt.equicorrelation().clone();
        let m_set = extend_independent_subset(a, &m_prev.intersection(&e), &e, opts.tol_rank);
        let vl = v_lsq(a, &pt, &m_set, t)?;
        let w = w_min(&pt, &m_set, &x, &vl);
        let v_hat = &vl + &w;
        let xi = a.mul(&pt.signs().apply(&vl)) + &p * t;

        let c = if m_set.len() == m || xi_negligible(&xi, t, &p) {
            f64::INFINITY
        } else {
            let slopes = pt.signs().apply(&a.tr_mul(&xi));
            let tol = 1e-11 * xi.norm();
            let mut c = f64::INFINITY;
            for j in e.complement(n).iter() {
                let s = slopes[j];
                if s.abs() > tol {
                    c = c.min((s.signum() + pt.correlation()[j].abs()) / s);
                }
            }
            c
        };
        let t_next = if c.is_infinite() { 0.0 } else { t / (1.0 + t * c) };
        let mut ratio = f64::INFINITY;
        for j in e.iter() {
            let xj = x[j].abs();
            if xj != 0.0 && v_hat[j] <= -xj {
                ratio = ratio.min(xj / v_hat[j].abs());
            }
        }
        let t_minus = if ratio.is_infinite() { f64::NEG_INFINITY } else { t * (1.0 - ratio) };
        let step = 1.0 - t_next / t;
        let dw = pt.signs().apply(&w);
        b_cur += a.mul(&dw) * step;
        x += pt.signs().apply(&v_hat) * step;
        w_total += &dw * step;

        report.iterations = k;
        let p_next = if t_next == 0.0 { p.clone() } else { &p + &xi * (1.0 / t_next - 1.0 / t) };
        observe(&GreedyState {
            t,
            t_next,
            b_current: b_cur.clone(),
            x: x.clone(),
            p: pt,
            m_set: m_set.clone(),
            w,
            v_hat,
            xi: xi.clone(),
            t_minus,
            w_total: w_total.clone(),
        });

        if t_next == 0.0 {
            let x_f = &x - &w_total;
            let resid = norm_inf(&(a.mul(&x_f) - b));
            report.final_descent_norm = xi.norm();
            report.wall_time = started.elapsed();
            if resid > 1e-9 * (1.0 + norm_inf(b)) {
                return Err(Error::InfeasibleBp { descent_norm: resid });
            }
            return Ok((FeasiblePair { x_f, p_f: p, iterations: k }, report));
        }
        p = pull_inside(a, p_next);
        t = t_next;
        m_prev = m_set;
    }
    Err(Error::InternalConsistency(format!("greedy continuation did not reach t = 0 within {} iterations", m + 1)))
}

/// Descent direction at a stationary point after moving the hyperparameter
/// from `t0` to `t` and the data from `b` to `b - (t0 - t) q`.
///
/// With `r = t / t0` the direction is `(1 - r) (A D v + t0 (p + q))`, where
/// `v` minimizes `||A D v + t0 (p + q)||` subject to
/// `v_E >= -u_E / (1 - r)` and `v = 0` off `E`. Here `u` is the NNLS
/// solution at `(t0, b)`; when it is not supplied, `A D u = b + t0 p` is used,
/// which holds at stationarity.
pub fn perturbed_direction(
    a: &DesignMatrix,
    pt: &DualPoint,
    t0: f64,
    t: f64,
    b: &DVector<f64>,
    q: &DVector<f64>,
    u_hat_prev: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    if !(t0 > 0.0) || !(0.0..=t0).contains(&t) {
        return Err(Error::invalid(format!("need 0 <= t <= t0 with t0 > 0, got t = {t}, t0 = {t0}")));
    }
    let m = a.nrows();
    if t == t0 {
        return Ok(DVector::zeros(m));
    }
    let scale = 1.0 - t / t0;
    let adu = match u_hat_prev {
        Some(u) => a.mul(&pt.signs().apply(u)),
        None => b + pt.p() * t0,
    };
    // v = v' - u / (1 - r) with v' >= 0 on E.
    let target = adu / scale - (pt.p() + q) * t0;
    let mut bounds = vec![Bound::Zero; a.ncols()];
    for j in pt.equicorrelation().iter() {
        bounds[j] = Bound::NonNeg;
    }
    let prob = NnlsProblem::new(a, pt.signs().clone(), bounds, target)?;
    let sol = solve_nnls(&prob, None, &NnlsOptions::default())?;
    Ok(sol.residual * scale)
}
