//! Exact integration of the dual slow system.
//!
//! Between changes of the equicorrelation set the trajectory moves on a
//! straight line, `p(tau) = p_k + f(tau - tau_k, t) d_k`, so each outer step is
//! one cone projection plus a ratio test. Worked example (`A = I`, `b = (3, 1)`,
//! `t = 1`): from `p0 = -b/3 = (-1, -1/3)` the equicorrelation set is `{0}`,
//! the projection gives `d = (0, -2/3)` and the ratio test gives `Delta = 1`.
//! Since `t * Delta >= 1` the run stops with `x = (2, 0)` and
//! `p = p0 + d / t = (-1, -1)`.

use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, DesignMatrix, IndexSet, SignVector};
use crate::nnls::{cone_projection_direction, NnlsOptions, NnlsSolution};
use crate::report::{PrimalDualPair, SolverReport};

/// Default tolerance for equicorrelation membership.
pub const DEFAULT_TOL_EQ: f64 = 1e-8;

/// A dual-feasible point with its correlations, equicorrelation set and signs.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    p: DVector<f64>,
    correlation: DVector<f64>,
    equicorrelation: IndexSet,
    signs: SignVector,
    tol_eq: f64,
}

impl DualPoint {
    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    /// `c = -A^T p`.
    pub fn correlation(&self) -> &DVector<f64> {
        &self.correlation
    }

    pub fn equicorrelation(&self) -> &IndexSet {
        &self.equicorrelation
    }

    pub fn signs(&self) -> &SignVector {
        &self.signs
    }

    pub fn tol_eq(&self) -> f64 {
        self.tol_eq
    }

    pub fn into_p(self) -> DVector<f64> {
        self.p
    }
}

pub fn make_dual_point(a: &DesignMatrix, p: &DVector<f64>, tol_eq: f64) -> Result<DualPoint> {
    if p.len() != a.nrows() {
        return Err(Error::invalid(format!("dual vector has length {}, expected {}", p.len(), a.nrows())));
    }
    if !(tol_eq >= 0.0) {
        return Err(Error::invalid("tol_eq must be nonnegative"));
    }
    let correlation = -a.tr_mul(p);
    let cmax = norm_inf(&correlation);
    if !cmax.is_finite() || cmax > 1.0 + tol_eq {
        return Err(Error::Domain { violation: cmax - 1.0 });
    }
    let equicorrelation = IndexSet::from_sorted_unchecked(
        (0..correlation.len()).filter(|&j| correlation[j].abs() >= 1.0 - tol_eq).collect(),
    );
    let signs = SignVector::of(correlation.as_slice());
    Ok(DualPoint { p: p.clone(), correlation, equicorrelation, signs, tol_eq })
}

/// Slopes `D A^T v` whose magnitude is at most this are treated as zero.
pub(crate) fn slope_tol(v: &DVector<f64>) -> f64 {
    1e-12 * (1.0 + v.norm())
}

/// Largest step along `d` that keeps `p + Delta d` dual feasible.
///
/// Equicorrelated indices only bound the step when their slope is positive
/// (the point then crosses to the opposite face); a negative slope there is
/// projection round-off.
pub fn max_descent_time(a: &DesignMatrix, pt: &DualPoint, d: &DVector<f64>) -> Result<f64> {
    let slopes = pt.signs.apply(&a.tr_mul(d));
    let tol = slope_tol(d);
    let mut best = f64::INFINITY;
    for j in 0..slopes.len() {
        let s = slopes[j];
        if s.abs() <= tol {
            continue;
        }
        let in_e = pt.equicorrelation.contains(j);
        if in_e && s < 0.0 {
            continue;
        }
        let ratio = (s.signum() + pt.correlation[j].abs()) / s;
        best = best.min(ratio);
    }
    if best <= 0.0 || best.is_nan() {
        return Err(Error::InternalConsistency(format!(
            "maximal descent time {best:e} is not positive; tol_eq too small for the correlations"
        )));
    }
    Ok(best)
}

/// `f(tau, t)`: `tau` for `t = 0`, otherwise `(1 - exp(-t tau)) / t`.
pub fn evolve_f(tau: f64, t: f64) -> f64 {
    if t == 0.0 {
        tau
    } else if tau.is_infinite() {
        1.0 / t
    } else {
        -(-t * tau).exp_m1() / t
    }
}

/// Time at which the slow solution reaches the end of a segment of length `delta`.
pub fn segment_duration(delta: f64, t: f64) -> f64 {
    if t == 0.0 {
        delta
    } else if t * delta < 1.0 {
        -(-t * delta).ln_1p() / t
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// `t * Delta < 1`: the step ends at a new face.
    Interior,
    /// `t > 0` and `t * Delta >= 1`: the solution is reached.
    ConvergedTPositive,
    /// `t = 0` and `d = 0`.
    ConvergedTZero,
    /// `d != 0` with `A^T d = 0`: the trajectory leaves to infinity.
    Drift,
}

#[derive(Debug, Clone)]
pub struct SlowStep {
    pub d: DVector<f64>,
    pub delta_star: f64,
    pub u_hat: NnlsSolution,
    pub step_kind: StepKind,
}

/// One step of the exact integrator at `pt`.
pub fn slow_step(
    a: &DesignMatrix,
    pt: &DualPoint,
    t: f64,
    b: &DVector<f64>,
    warm_start: Option<&IndexSet>,
    tol_conv: f64,
    nnls: &NnlsOptions,
) -> Result<SlowStep> {
    let (d, u_hat) = cone_projection_direction(a, pt, t, b, warm_start, nnls)?;
    if t == 0.0 && d.norm() <= tol_conv {
        return Ok(SlowStep { d, delta_star: f64::INFINITY, u_hat, step_kind: StepKind::ConvergedTZero });
    }
    let delta_star = max_descent_time(a, pt, &d)?;
    let step_kind = if t > 0.0 && t * delta_star >= 1.0 {
        StepKind::ConvergedTPositive
    } else if delta_star.is_infinite() {
        StepKind::Drift
    } else {
        StepKind::Interior
    };
    Ok(SlowStep { d, delta_star, u_hat, step_kind })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryNode {
    /// Slow time at which the node is reached (`+inf` for a limit node).
    pub tau: f64,
    /// Step length taken from this node; `+inf` on the final node.
    pub delta: f64,
    pub p: DVector<f64>,
    pub d: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: f64,
    pub nodes: Vec<TrajectoryNode>,
    /// Index of the node carrying the solution.
    pub converged_index: Option<usize>,
}

/// `p(tau)` on a recorded trajectory.
pub fn eval_trajectory(traj: &Trajectory, tau: f64) -> Result<DVector<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("tau must be nonnegative, got {tau}")));
    }
    let Some(first) = traj.nodes.first() else {
        return Err(Error::invalid("trajectory has no nodes"));
    };
    if first.tau != 0.0 {
        return Err(Error::invalid("trajectory was not recorded from tau = 0"));
    }
    let k = traj.nodes.partition_point(|n| n.tau <= tau) - 1;
    let node = &traj.nodes[k];
    if k + 1 == traj.nodes.len() || tau == node.tau {
        return Ok(node.p.clone());
    }
    Ok(&node.p + &node.d * evolve_f(tau - node.tau, traj.t))
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol_eq: f64,
    /// Convergence threshold on `||d||` at `t = 0`; defaults to `1e-10 * (1 + ||b||)`.
    pub tol_conv: Option<f64>,
    /// Outer iteration cap; defaults to `50 * n`.
    pub max_outer: Option<usize>,
    pub nnls: NnlsOptions,
    /// Keep every node. Long grids can turn this off to save memory; only the
    /// final node is kept then.
    pub record_trajectory: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_eq: DEFAULT_TOL_EQ,
            tol_conv: None,
            max_outer: None,
            nnls: NnlsOptions::default(),
            record_trajectory: true,
        }
    }
}

/// `-b / ||A^T b||_inf`, the standard dual-feasible starting point.
pub fn default_start(a: &DesignMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = norm_inf(&a.tr_mul(b));
    if scale == 0.0 {
        return Err(Error::invalid("A^T b = 0: the zero solution is optimal for every t"));
    }
    Ok(-b / scale)
}

fn check_inputs(a: &DesignMatrix, b: &DVector<f64>, t: f64) -> Result<()> {
    if b.len() != a.nrows() {
        return Err(Error::invalid(format!("b has length {}, expected {}", b.len(), a.nrows())));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be finite and nonnegative, got {t}")));
    }
    if b.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("b must be nonzero"));
    }
    Ok(())
}

/// Exact dual descent: primal and dual solutions of BPDN (`t > 0`) or BP (`t = 0`).
pub fn solve_bpdn(
    a: &DesignMatrix,
    b: &DVector<f64>,
    t: f64,
    p0: Option<&DVector<f64>>,
    opts: &SolveOptions,
) -> Result<(PrimalDualPair, Trajectory, SolverReport)> {
    let started = Instant::now();
    check_inputs(a, b, t)?;
    let mut p = match p0 {
        Some(p) => p.clone(),
        None => default_start(a, b)?,
    };
    let tol_conv = opts.tol_conv.unwrap_or(1e-10 * (1.0 + b.norm()));
    let max_outer = opts.max_outer.unwrap_or(50 * a.ncols());
    let mut report = SolverReport::new();
    let mut traj = Trajectory { t, nodes: Vec::new(), converged_index: None };
    let mut tau = 0.0;
    let mut warm: Option<IndexSet> = None;

    for k in 0..max_outer {
        let pt = make_dual_point(a, &p, opts.tol_eq)?;
        let step = slow_step(a, &pt, t, b, warm.as_ref(), tol_conv, &opts.nnls)?;
        report.iterations = k + 1;
        report.nnls_iterations += step.u_hat.iterations;
        report.final_descent_norm = step.d.norm();
        let x = pt.signs().apply(&step.u_hat.u);
        let mut node = TrajectoryNode { tau, delta: step.delta_star, p: p.clone(), d: step.d.clone() };
        match step.step_kind {
            StepKind::ConvergedTZero => {
                node.delta = f64::INFINITY;
                push_final(&mut traj, node, opts.record_trajectory);
                report.wall_time = started.elapsed();
                return Ok((PrimalDualPair { t, x, p }, traj, report));
            }
            StepKind::ConvergedTPositive => {
                let p_final = pull_inside(a, &p + &step.d / t);
                if opts.record_trajectory {
                    traj.nodes.push(node);
                }
                let last = TrajectoryNode {
                    tau: f64::INFINITY,
                    delta: f64::INFINITY,
                    p: p_final.clone(),
                    d: DVector::zeros(p.len()),
                };
                push_final(&mut traj, last, opts.record_trajectory);
                report.final_descent_norm = 0.0;
                report.wall_time = started.elapsed();
                return Ok((PrimalDualPair { t, x, p: p_final }, traj, report));
            }
            StepKind::Drift => {
                return Err(Error::InfeasibleBp { descent_norm: step.d.norm() });
            }
            StepKind::Interior => {
                if opts.record_trajectory {
                    traj.nodes.push(node);
                }
                tau += segment_duration(step.delta_star, t);
                p = pull_inside(a, p + &step.d * step.delta_star);
                warm = Some(step.u_hat.active_set);
            }
        }
    }
    report.wall_time = started.elapsed();
    Err(Error::NonConvergence { iterations: max_outer, report: Box::new(report) })
}

/// Scales `p` back onto the feasible set when round-off has pushed
/// `||A^T p||_inf` slightly above 1. Slopes skipped as round-off in the step
/// length can otherwise accumulate over long steps.
pub(crate) fn pull_inside(a: &DesignMatrix, p: DVector<f64>) -> DVector<f64> {
    let s = norm_inf(&a.tr_mul(&p));
    if s > 1.0 {
        p / s
    } else {
        p
    }
}

fn push_final(traj: &mut Trajectory, node: TrajectoryNode, record: bool) {
    if !record {
        traj.nodes.clear();
    }
    traj.nodes.push(node);
    traj.converged_index = Some(traj.nodes.len() - 1);
}

/// Solves on a strictly decreasing grid, warm-starting each solve from the
/// previous dual solution.
pub fn regularization_path(
    a: &DesignMatrix,
    b: &DVector<f64>,
    ts: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<PrimalDualPair>> {
    regularization_path_with_reports(a, b, ts, opts).map(|v| v.into_iter().map(|(pair, _)| pair).collect())
}

/// As [`regularization_path`], also returning per-point reports.
pub fn regularization_path_with_reports(
    a: &DesignMatrix,
    b: &DVector<f64>,
    ts: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<(PrimalDualPair, SolverReport)>> {
    for (i, w) in ts.windows(2).enumerate() {
        if !(w[1] < w[0]) {
            return Err(Error::invalid(format!("grid is not strictly decreasing at index {}", i + 1)));
        }
    }
    if let Some(&last) = ts.last() {
        if !(last >= 0.0) {
            return Err(Error::invalid("grid values must be nonnegative"));
        }
    }
    let mut out: Vec<(PrimalDualPair, SolverReport)> = Vec::with_capacity(ts.len());
    for (index, &t) in ts.iter().enumerate() {
        let start = out.last().map(|(pair, _)| &pair.p);
        let (pair, _, report) =
            solve_bpdn(a, b, t, start, opts).map_err(|e| Error::AtGridIndex { index, source: Box::new(e) })?;
        out.push((pair, report));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn dual_point_caches_equicorrelation() {
        let a = DesignMatrix::from_rows(&[&[1.0, 0.0, 0.5], &[0.0, 1.0, 0.5]]).unwrap();
        let pt = make_dual_point(&a, &v(&[-1.0, 0.0]), 1e-8).unwrap();
        assert_eq!(pt.correlation(), &v(&[1.0, 0.0, 0.5]));
        assert_eq!(pt.equicorrelation().as_slice(), &[0]);
        assert_eq!(pt.signs().as_slice(), &[1.0, 1.0, 1.0]);

        let zero = make_dual_point(&a, &v(&[0.0, 0.0]), 1e-8).unwrap();
        assert!(zero.equicorrelation().is_empty());

        match make_dual_point(&a, &v(&[-2.0, 0.0]), 1e-8) {
            Err(Error::Domain { violation }) => assert_close!(violation, 1.0, 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_start_touches_the_max_correlation() {
        let a = DesignMatrix::from_rows(&[&[1.0, 0.0, 0.5], &[0.0, 1.0, 0.5]]).unwrap();
        let b = v(&[2.0, -1.0]);
        let pt = make_dual_point(&a, &default_start(&a, &b).unwrap(), 1e-8).unwrap();
        assert!(pt.equicorrelation().contains(0));
    }

    #[test]
    fn descent_time_examples() {
        let a = DesignMatrix::identity(2);
        let pt = make_dual_point(&a, &v(&[-1.0, -1.0 / 3.0]), 1e-8).unwrap();
        let delta = max_descent_time(&a, &pt, &v(&[0.0, -2.0 / 3.0])).unwrap();
        assert_close!(delta, 1.0, 1e-15);
        assert_eq!(max_descent_time(&a, &pt, &v(&[0.0, 0.0])).unwrap(), f64::INFINITY);
        // Positive slope on an equicorrelated index: the point crosses to the
        // opposite face after 2 / slope.
        let pt = make_dual_point(&a, &v(&[-1.0, 0.0]), 1e-8).unwrap();
        assert_close!(max_descent_time(&a, &pt, &v(&[1.0, 0.0])).unwrap(), 2.0, 1e-15);
    }

    #[test]
    fn f_values() {
        assert_eq!(evolve_f(0.0, 2.5), 0.0);
        assert_eq!(evolve_f(1.75, 0.0), 1.75);
        assert_close!(evolve_f(std::f64::consts::LN_2, 1.0), 0.5, 1e-15);
        assert_eq!(evolve_f(f64::INFINITY, 4.0), 0.25);
        assert_close!(segment_duration(0.5, 1.0), std::f64::consts::LN_2, 1e-15);
        assert_eq!(segment_duration(1.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn identity_trace() {
        let a = DesignMatrix::identity(2);
        let b = v(&[3.0, 1.0]);
        let (pair, traj, report) = solve_bpdn(&a, &b, 1.0, None, &SolveOptions::default()).unwrap();
        assert_eq!(pair.x, v(&[2.0, 0.0]));
        assert!((pair.p - v(&[-1.0, -1.0])).amax() < 1e-15);
        assert_eq!(report.iterations, 1);
        assert_eq!(traj.nodes.len(), 2);
        assert_close!(traj.nodes[0].delta, 1.0, 1e-15);
        assert_eq!(traj.converged_index, Some(1));

        let p_inf = eval_trajectory(&traj, f64::INFINITY).unwrap();
        assert!((p_inf - v(&[-1.0, -1.0])).amax() < 1e-15);
        assert_eq!(eval_trajectory(&traj, 0.0).unwrap(), v(&[-1.0, -1.0 / 3.0]));
        let mid = eval_trajectory(&traj, std::f64::consts::LN_2).unwrap();
        assert!((mid - v(&[-1.0, -2.0 / 3.0])).amax() < 1e-15);
        assert!(eval_trajectory(&traj, -1.0).is_err());
    }

    #[test]
    fn converges_immediately_from_the_optimum() {
        let a = DesignMatrix::identity(2);
        let (pair, _, report) =
            solve_bpdn(&a, &v(&[3.0, 0.0]), 1.0, Some(&v(&[-1.0, 0.0])), &SolveOptions::default()).unwrap();
        assert_eq!(pair.x, v(&[2.0, 0.0]));
        assert_eq!(pair.p, v(&[-1.0, 0.0]));
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn large_t_gives_zero() {
        let a = DesignMatrix::from_rows(&[&[1.0, 0.0, 0.6], &[0.0, 1.0, 0.8]]).unwrap();
        let b = v(&[1.0, 2.0]);
        let t = 5.0;
        let (pair, _, _) = solve_bpdn(&a, &b, t, None, &SolveOptions::default()).unwrap();
        assert!(pair.x.amax() < 1e-15);
        assert!((pair.p + &b / t).amax() < 1e-15);
    }

    #[test]
    fn identity_path_is_soft_thresholding() {
        let a = DesignMatrix::identity(2);
        let b = v(&[3.0, 1.0]);
        let path = regularization_path(&a, &b, &[3.0, 1.0, 0.0], &SolveOptions::default()).unwrap();
        let xs: Vec<_> = path.iter().map(|p| p.x.clone()).collect();
        assert!(xs[0].amax() < 1e-15);
        assert!((&xs[1] - v(&[2.0, 0.0])).amax() < 1e-15);
        assert!((&xs[2] - v(&[3.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = DesignMatrix::identity(2);
        assert!(matches!(
            solve_bpdn(&a, &v(&[0.0, 0.0]), 1.0, None, &SolveOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(solve_bpdn(&a, &v(&[1.0, 0.0]), -1.0, None, &SolveOptions::default()).is_err());
        let err = regularization_path(&a, &v(&[1.0, 0.0]), &[1.0, 1.0], &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn drift_signals_infeasible_bp() {
        // Both columns equal: b outside their span cannot be matched at t = 0.
        let a = DesignMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap();
        let err = solve_bpdn(&a, &v(&[1.0, 1.0]), 0.0, None, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleBp { .. }), "{err:?}");
    }
}
