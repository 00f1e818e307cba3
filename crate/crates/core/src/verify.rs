//! Independent checks: KKT residuals, objectives, a FISTA baseline and an
//! exhaustive support-enumeration oracle for tiny instances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_solve_dense, norm_inf, norm_one, DesignMatrix, IndexSet, DEFAULT_RANK_TOL};
use crate::par;

/// Optimality residuals of a candidate pair `(x, p)`.
///
/// `stationarity` is `||Ax - b - t p||_inf` for `t > 0` and `||Ax - b||_inf`
/// for `t = 0`; `gap` is the primal objective plus the dual objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub dual_feasibility: f64,
    pub sign_consistency: f64,
    pub gap: f64,
    /// `||Ax - b||_inf`, only reported for `t = 0`.
    pub bp_residual: Option<f64>,
    #[serde(skip)]
    pub primal_objective: f64,
    #[serde(skip)]
    pub b_inf: f64,
}

/// Acceptance thresholds for a [`KktReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktTolerances {
    /// Scaled by `1 + ||b||_inf`.
    pub stationarity: f64,
    /// Scaled by `1 + ||b||_inf`.
    pub sign_consistency: f64,
    pub dual_feasibility: f64,
    /// Relative to `1 + |primal objective|`.
    pub relative_gap: f64,
}

impl Default for KktTolerances {
    fn default() -> Self {
        KktTolerances { stationarity: 1e-9, sign_consistency: 1e-9, dual_feasibility: 1e-12, relative_gap: 1e-9 }
    }
}

impl KktReport {
    pub fn relative_gap(&self) -> f64 {
        self.gap.abs() / (1.0 + self.primal_objective.abs())
    }

    /// Largest residual after scaling each one by its tolerance's reference
    /// quantity; handy for one-number summaries.
    pub fn max_scaled(&self) -> f64 {
        let s = 1.0 + self.b_inf;
        (self.stationarity / s).max(self.sign_consistency / s).max(self.dual_feasibility).max(self.relative_gap())
    }

    pub fn passes(&self, tol: &KktTolerances) -> bool {
        let s = 1.0 + self.b_inf;
        self.stationarity <= tol.stationarity * s
            && self.sign_consistency <= tol.sign_consistency * s
            && self.dual_feasibility <= tol.dual_feasibility
            && self.relative_gap() <= tol.relative_gap
    }
}

/// `||x||_1 + ||Ax - b||^2 / (2t)`, or `||x||_1` for `t = 0`.
pub fn primal_objective(a: &DesignMatrix, b: &DVector<f64>, t: f64, x: &DVector<f64>) -> f64 {
    let l1 = norm_one(x);
    if t == 0.0 {
        l1
    } else {
        l1 + (a.mul(x) - b).norm_squared() / (2.0 * t)
    }
}

/// Dual objective `(t/2)||p||^2 + <p, b>` (to be minimized), `+inf` outside
/// the feasible set `||A^T p||_inf <= 1`.
pub fn dual_objective(a: &DesignMatrix, b: &DVector<f64>, t: f64, p: &DVector<f64>) -> f64 {
    if norm_inf(&a.tr_mul(p)) > 1.0 + 1e-12 {
        return f64::INFINITY;
    }
    dual_objective_unchecked(b, t, p)
}

pub(crate) fn dual_objective_unchecked(b: &DVector<f64>, t: f64, p: &DVector<f64>) -> f64 {
    0.5 * t * p.norm_squared() + p.dot(b)
}

pub fn kkt_check(a: &DesignMatrix, b: &DVector<f64>, t: f64, x: &DVector<f64>, p: &DVector<f64>) -> KktReport {
    let r = a.mul(x) - b;
    let r_inf = norm_inf(&r);
    let (stationarity, bp_residual) = if t == 0.0 { (r_inf, Some(r_inf)) } else { (norm_inf(&(&r - p * t)), None) };
    let c = -a.tr_mul(p);
    let dual_feasibility = (norm_inf(&c) - 1.0).max(0.0);
    let sign_consistency = x
        .iter()
        .zip(c.iter())
        .filter(|(xj, _)| **xj != 0.0)
        .map(|(xj, cj)| (cj - xj.signum()).abs())
        .fold(0.0, f64::max);
    let primal = if t == 0.0 { norm_one(x) } else { norm_one(x) + r.norm_squared() / (2.0 * t) };
    let gap = primal + dual_objective_unchecked(b, t, p);
    KktReport {
        stationarity,
        dual_feasibility,
        sign_consistency,
        gap,
        bp_residual,
        primal_objective: primal,
        b_inf: norm_inf(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMethod {
    SupportEnum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x_opt: DVector<f64>,
    pub objective: f64,
    pub support: IndexSet,
    pub method: OracleMethod,
}

/// Largest `n` the enumeration oracle accepts.
pub const ORACLE_MAX_N: usize = 12;

/// Exhaustive BPDN/BP solver for tiny instances.
///
/// Some optimum is supported on linearly independent columns, so only supports
/// with `|S| <= m` and full column rank are visited. For `t > 0` each sign
/// pattern `sigma` on `S` gives `x_S = (A_S^T A_S)^{-1} (A_S^T b - t sigma)`;
/// for `t = 0` the support's least-squares solution is kept when it
/// reproduces `b`.
pub fn brute_force_bpdn(a: &DesignMatrix, b: &DVector<f64>, t: f64) -> Result<OracleSolution> {
    enumerate(a, b, t, a.nrows().min(a.ncols()), false)
}

/// Enumeration over every support, rank-deficient ones included (solved in
/// the minimum-norm sense). Only meant to cross-check the pruning above.
pub fn brute_force_bpdn_unpruned(a: &DesignMatrix, b: &DVector<f64>, t: f64) -> Result<OracleSolution> {
    enumerate(a, b, t, a.ncols(), true)
}

fn enumerate(a: &DesignMatrix, b: &DVector<f64>, t: f64, max_support: usize, pinv: bool) -> Result<OracleSolution> {
    let (m, n) = (a.nrows(), a.ncols());
    if n > ORACLE_MAX_N {
        return Err(Error::SizeLimit { n, limit: ORACLE_MAX_N });
    }
    if b.len() != m || !(t >= 0.0) {
        return Err(Error::invalid("oracle needs len(b) = m and t >= 0"));
    }
    let dense = a.to_dense();
    let threshold = DEFAULT_RANK_TOL * dense.norm();
    let feas_tol = 1e-9 * (1.0 + b.norm());
    let supports: Vec<u32> = (0u32..1 << n).filter(|s| (s.count_ones() as usize) <= max_support).collect();

    let best_per_support = par::map_slice(&supports, par::for_work(supports.len() * m * m * 16), |&mask| {
        let idx: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let a_s = DMatrix::from_fn(m, idx.len(), |r, c| dense[(r, idx[c])]);
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut consider = |xs: DVector<f64>| {
            let mut x = DVector::zeros(n);
            for (c, &j) in idx.iter().enumerate() {
                x[j] = xs[c];
            }
            let obj = primal_objective(a, b, t, &x);
            if t == 0.0 && norm_inf(&(a.mul(&x) - b)) > feas_tol {
                return;
            }
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        };
        if idx.is_empty() {
            consider(DVector::zeros(0));
            return best;
        }
        let atb = a_s.tr_mul(b);
        if t == 0.0 {
            if let Some(xs) = restricted_solve(&a_s, &atb, threshold, pinv) {
                consider(xs);
            }
            return best;
        }
        for pattern in 0u32..1 << idx.len() {
            let sigma = DVector::from_fn(idx.len(), |c, _| if pattern & (1 << c) != 0 { -1.0 } else { 1.0 });
            let Some(xs) = restricted_solve(&a_s, &(&atb - &sigma * t), threshold, pinv) else {
                continue;
            };
            if xs.iter().zip(sigma.iter()).all(|(x, s)| x * s >= 0.0) {
                consider(xs);
            }
        }
        best
    });

    let mut best: Option<(f64, DVector<f64>)> = None;
    for (obj, x) in best_per_support.into_iter().flatten() {
        // Visiting supports in increasing mask order keeps ties deterministic.
        if best.as_ref().is_none_or(|(o, _)| obj < *o - 1e-15 * (1.0 + o.abs())) {
            best = Some((obj, x));
        }
    }
    let (objective, x_opt) = best.ok_or(Error::InfeasibleBp { descent_norm: f64::NAN })?;
    let support = IndexSet::from_sorted_unchecked((0..n).filter(|&j| x_opt[j] != 0.0).collect());
    Ok(OracleSolution { x_opt, objective, support, method: OracleMethod::SupportEnum })
}

/// Solves `A_S^T A_S x = rhs`, or returns `None` for a rank-deficient support
/// (unless `pinv`, which takes the minimum-norm solution when the system is
/// consistent).
fn restricted_solve(a_s: &DMatrix<f64>, rhs: &DVector<f64>, threshold: f64, pinv: bool) -> Option<DVector<f64>> {
    if let Ok(x) = gram_solve_dense(a_s, rhs, threshold) {
        return Some(x);
    }
    if !pinv {
        return None;
    }
    let gram = a_s.tr_mul(a_s);
    let svd = gram.clone().svd(true, true);
    let eps = 1e-10 * svd.singular_values.max().max(1e-300);
    let x = svd.solve(rhs, eps).ok()?;
    let resid = (&gram * &x - rhs).amax();
    (resid <= 1e-9 * (1.0 + rhs.amax())).then_some(x)
}

#[derive(Debug, Clone)]
pub struct FistaResult {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of `A^T A` by power iteration to `rel_tol`.
pub fn spectral_norm_sq(a: &DesignMatrix, rel_tol: f64) -> f64 {
    let n = a.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    // A deterministic but non-symmetric start avoids orthogonality to the
    // top eigenvector on structured matrices.
    for (j, e) in v.iter_mut().enumerate() {
        *e *= 1.0 + 0.01 * ((j % 7) as f64);
    }
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = a.tr_mul(&a.mul(&v));
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - lambda).abs() <= rel_tol * next {
            return next.max(wn);
        }
        lambda = next;
    }
    lambda
}

/// Plain FISTA on `t ||x||_1 + ||Ax - b||^2 / 2`, stopping on the relative
/// sup-norm change of the dual estimate `p = (Ax - b) / t`.
pub fn fista_baseline(
    a: &DesignMatrix,
    b: &DVector<f64>,
    t: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<FistaResult> {
    if !(t > 0.0) {
        return Err(Error::invalid("FISTA needs t > 0"));
    }
    if b.len() != a.nrows() {
        return Err(Error::invalid("b has the wrong length"));
    }
    // Power iteration converges from below; pad the estimate slightly.
    let lip = spectral_norm_sq(a, 1e-6) * 1.01;
    let n = a.ncols();
    let thresh = t / lip;
    let mut x = DVector::zeros(n);
    let mut ax = DVector::zeros(a.nrows());
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut theta = 1.0f64;
    let mut p = -b / t;
    for k in 1..=max_iter {
        let grad = a.tr_mul(&(&ay - b));
        let z = &y - grad / lip;
        let x_new = z.map(|v| v.signum() * (v.abs() - thresh).max(0.0));
        let ax_new = a.mul(&x_new);
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_new;
        y = &x_new + (&x_new - &x) * beta;
        ay = &ax_new + (&ax_new - &ax) * beta;
        x = x_new;
        ax = ax_new;
        theta = theta_new;
        let p_new = (&ax - b) / t;
        let change = norm_inf(&(&p_new - &p));
        let scale = norm_inf(&p_new).max(f64::MIN_POSITIVE);
        p = p_new;
        if change <= rel_tol * scale {
            return Ok(FistaResult { x, p, iterations: k, converged: true });
        }
    }
    Ok(FistaResult { x, p, iterations: max_iter, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn identity_optimum_has_zero_residuals() {
        let a = DesignMatrix::identity(2);
        let r = kkt_check(&a, &v(&[3.0, 1.0]), 1.0, &v(&[2.0, 0.0]), &v(&[-1.0, -1.0]));
        assert!(r.stationarity <= 1e-15);
        assert!(r.dual_feasibility <= 1e-15);
        assert!(r.sign_consistency <= 1e-15);
        assert!(r.gap.abs() <= 1e-15);
        assert_eq!(r.bp_residual, None);
        assert!(r.passes(&KktTolerances::default()));
    }

    #[test]
    fn zero_solution_at_max_correlation() {
        let a = DesignMatrix::from_rows(&[&[1.0, 0.0, 0.6], &[0.0, 1.0, 0.8]]).unwrap();
        let b = v(&[1.0, 2.0]);
        let t = norm_inf(&a.tr_mul(&b));
        let r = kkt_check(&a, &b, t, &DVector::zeros(3), &(-&b / t));
        assert!(r.stationarity == 0.0 && r.dual_feasibility == 0.0 && r.sign_consistency == 0.0);
        assert!(r.gap.abs() <= 1e-15);
    }

    #[test]
    fn non_optimal_point_has_positive_gap() {
        let a = DesignMatrix::identity(2);
        let b = v(&[3.0, 1.0]);
        let r = kkt_check(&a, &b, 1.0, &v(&[1.0, 1.0]), &v(&[-1.0, -1.0]));
        assert!(r.gap > 0.1);
        assert!(!r.passes(&KktTolerances::default()));
    }

    #[test]
    fn bp_report_fills_residual() {
        let a = DesignMatrix::identity(2);
        let b = v(&[3.0, 1.0]);
        let r = kkt_check(&a, &b, 0.0, &v(&[3.0, 1.0]), &v(&[-1.0, -1.0]));
        assert_eq!(r.bp_residual, Some(0.0));
        assert_eq!(r.gap, 0.0);
        let json = serde_json::to_value(r).unwrap();
        let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["bp_residual", "dual_feasibility", "gap", "sign_consistency", "stationarity"]);
    }

    #[test]
    fn oracle_examples() {
        let a = DesignMatrix::identity(2);
        let o = brute_force_bpdn(&a, &v(&[3.0, 1.0]), 1.0).unwrap();
        assert_eq!(o.x_opt, v(&[2.0, 0.0]));
        assert_close!(o.objective, 3.0, 1e-15);
        assert_eq!(o.support.as_slice(), &[0]);

        let o = brute_force_bpdn(&a, &v(&[3.0, 1.0]), 5.0).unwrap();
        assert_eq!(o.x_opt, DVector::zeros(2));

        let wide = DesignMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let o = brute_force_bpdn(&wide, &v(&[2.0]), 0.0).unwrap();
        assert_close!(o.objective, 2.0, 1e-15);

        let big = DesignMatrix::dense(DMatrix::zeros(1, 13)).unwrap();
        assert!(matches!(brute_force_bpdn(&big, &v(&[1.0]), 1.0), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn fista_identity() {
        let a = DesignMatrix::identity(2);
        let r = fista_baseline(&a, &v(&[3.0, 1.0]), 1.0, 1e-8, 10_000).unwrap();
        assert!(r.converged);
        assert!((r.x - v(&[2.0, 0.0])).amax() < 1e-7);
    }

    #[test]
    fn fista_rejects_bp() {
        let a = DesignMatrix::identity(2);
        assert!(fista_baseline(&a, &v(&[3.0, 1.0]), 0.0, 1e-8, 10).is_err());
    }
}
