//! Active-set nonnegative least squares.
//!
//! Solves
//!
//! ```text
//! min_u || A diag(s) u - target ||^2   s.t.  u_j >= 0 (NonNeg), u_j = 0 (Zero), u_j free (Free)
//! ```
//!
//! with a Lawson–Hanson iteration that may start from any passive set. The
//! primal iterate starts at zero, which is feasible for every bound, so a warm
//! start only seeds the passive set; the inner loop then walks back to
//! feasibility. The residual is unique even when `u` is not.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_dense, DesignMatrix, IndexSet, LstsqOutcome, SignVector, DEFAULT_RANK_TOL};
use crate::slow::DualPoint;

/// Constraint on one NNLS variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    NonNeg,
    Zero,
    Free,
}

#[derive(Debug, Clone)]
pub struct NnlsProblem<'a> {
    pub a: &'a DesignMatrix,
    pub signs: SignVector,
    pub bounds: Vec<Bound>,
    pub target: DVector<f64>,
}

impl<'a> NnlsProblem<'a> {
    pub fn new(a: &'a DesignMatrix, signs: SignVector, bounds: Vec<Bound>, target: DVector<f64>) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if target.len() != m {
            return Err(Error::invalid(format!("target has length {}, expected {m}", target.len())));
        }
        if bounds.len() != n || signs.len() != n {
            return Err(Error::invalid(format!("bounds and signs must have length {n}")));
        }
        Ok(NnlsProblem { a, signs, bounds, target })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    /// Full-length solution, zero off the passive set.
    pub u: DVector<f64>,
    /// `A diag(s) u - target`.
    pub residual: DVector<f64>,
    /// Passive (unpinned) variables at termination.
    pub active_set: IndexSet,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NnlsOptions {
    /// Dual-feasibility tolerance; defaults to `1e-12 * (1 + ||target||_2)`.
    pub tol_kkt: Option<f64>,
    /// Iteration cap; defaults to `10 * n`.
    pub max_iter: Option<usize>,
}

pub fn solve_nnls(prob: &NnlsProblem<'_>, warm_start: Option<&IndexSet>, opts: &NnlsOptions) -> Result<NnlsSolution> {
    let n = prob.a.ncols();
    let cand: Vec<usize> = (0..n).filter(|&j| prob.bounds[j] != Bound::Zero).collect();
    let b = prob.a.gather_columns(&cand, Some(&prob.signs));
    let free: Vec<bool> = cand.iter().map(|&j| prob.bounds[j] == Bound::Free).collect();
    let mut start = free.clone();
    if let Some(ws) = warm_start {
        for (pos, &j) in cand.iter().enumerate() {
            if ws.contains(j) {
                start[pos] = true;
            }
        }
    }
    let tol = opts.tol_kkt.unwrap_or(1e-12 * (1.0 + prob.target.norm()));
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let mut kernel = Kernel::new(b, &prob.target, free, tol, max_iter);
    let outcome = kernel.run(start);
    let sol = kernel.solution(&cand, n);
    match outcome {
        Ok(()) => Ok(sol),
        Err(iterations) => Err(Error::NnlsNonConvergence { iterations, best: Box::new(sol) }),
    }
}

struct Kernel<'t> {
    b: DMatrix<f64>,
    target: &'t DVector<f64>,
    free: Vec<bool>,
    col_tol: Vec<f64>,
    dep_threshold: f64,
    max_iter: usize,
    x: DVector<f64>,
    passive: Vec<bool>,
    blocked: Vec<bool>,
    iterations: usize,
}

impl<'t> Kernel<'t> {
    fn new(b: DMatrix<f64>, target: &'t DVector<f64>, free: Vec<bool>, tol: f64, max_iter: usize) -> Self {
        let k = b.ncols();
        let col_tol = (0..k).map(|i| tol * b.column(i).norm().max(1.0)).collect();
        let dep_threshold = DEFAULT_RANK_TOL * b.norm();
        Kernel {
            b,
            target,
            free,
            col_tol,
            dep_threshold,
            max_iter,
            x: DVector::zeros(k),
            passive: vec![false; k],
            blocked: vec![false; k],
            iterations: 0,
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn run(&mut self, start: Vec<bool>) -> std::result::Result<(), usize> {
        let k = self.b.ncols();
        if k == 0 {
            return Ok(());
        }
        self.passive = start;
        if self.passive.iter().any(|&p| p) {
            self.inner()?;
        }
        let mut bland = false;
        let mut bounces = vec![0u8; k];
        let mut skip = vec![false; k];
        let mut unblock_rounds = 0;
        loop {
            let w = self.b.tr_mul(&(self.target - &self.b * &self.x));
            let violation = |i: usize| if self.free[i] { w[i].abs() } else { w[i] };
            let mut entering: Option<usize> = None;
            for i in 0..k {
                if self.passive[i] || self.blocked[i] || skip[i] || violation(i) <= self.col_tol[i] {
                    continue;
                }
                match entering {
                    None => entering = Some(i),
                    Some(e) if !bland && violation(i) > violation(e) => entering = Some(i),
                    _ => {}
                }
            }
            let Some(j) = entering else {
                // A blocked column can become useful once its partners leave.
                let stuck = (0..k).any(|i| self.blocked[i] && !self.passive[i] && violation(i) > self.col_tol[i]);
                if stuck && unblock_rounds < k {
                    unblock_rounds += 1;
                    self.blocked.iter_mut().for_each(|b| *b = false);
                    continue;
                }
                return Ok(());
            };
            self.passive[j] = true;
            let before = self.objective();
            self.inner()?;
            if !self.passive[j] {
                bounces[j] = bounces[j].saturating_add(1);
                if bounces[j] >= 2 {
                    bland = true;
                }
                if self.objective() >= before {
                    skip[j] = true;
                }
            } else {
                skip.iter_mut().for_each(|s| *s = false);
            }
        }
    }

    fn objective(&self) -> f64 {
        (self.target - &self.b * &self.x).norm_squared()
    }

    /// Lawson–Hanson inner loop: restores feasibility of the passive set.
    fn inner(&mut self) -> std::result::Result<(), usize> {
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iter {
                return Err(self.iterations - 1);
            }
            let pos: Vec<usize> = (0..self.passive.len()).filter(|&i| self.passive[i]).collect();
            if pos.is_empty() {
                self.x.fill(0.0);
                return Ok(());
            }
            let sub = DMatrix::from_fn(self.b.nrows(), pos.len(), |r, c| self.b[(r, pos[c])]);
            let z = match lstsq_dense(&sub, self.target, self.dep_threshold) {
                LstsqOutcome::Solved(z) => z,
                LstsqOutcome::Dependent { column } => {
                    let i = pos[column];
                    self.passive[i] = false;
                    self.blocked[i] = true;
                    self.x[i] = 0.0;
                    continue;
                }
            };
            let mut alpha = 1.0f64;
            let mut argmin = None;
            for (c, &i) in pos.iter().enumerate() {
                if !self.free[i] && z[c] <= 0.0 {
                    let denom = self.x[i] - z[c];
                    let a = if denom > 0.0 { self.x[i] / denom } else { 0.0 };
                    if a < alpha || argmin.is_none() {
                        alpha = alpha.min(a);
                        argmin = Some(i);
                    }
                }
            }
            if argmin.is_none() {
                self.x.fill(0.0);
                for (c, &i) in pos.iter().enumerate() {
                    self.x[i] = z[c];
                }
                return Ok(());
            }
            let scale = self.x.amax().max(z.amax());
            for (c, &i) in pos.iter().enumerate() {
                self.x[i] += alpha * (z[c] - self.x[i]);
            }
            let removed_any = {
                let mut any = false;
                for (c, &i) in pos.iter().enumerate() {
                    if self.free[i] {
                        continue;
                    }
                    let hit = Some(i) == argmin || (z[c] <= 0.0 && self.x[i] <= 1e-15 * scale);
                    if hit || self.x[i] <= 0.0 {
                        self.passive[i] = false;
                        self.x[i] = 0.0;
                        any = true;
                    }
                }
                any
            };
            if removed_any {
                self.blocked.iter_mut().for_each(|b| *b = false);
            }
        }
    }

    /// Projects the residual off the passive columns once more. The first solve leaves it
    /// orthogonal only up to eps * |target|, which matters when the residual itself is tiny.
    fn polish(&mut self) -> DVector<f64> {
        let residual = &self.b * &self.x - self.target;
        let pos: Vec<usize> = (0..self.passive.len()).filter(|&i| self.passive[i]).collect();
        if pos.is_empty() {
            return residual;
        }
        let sub = DMatrix::from_fn(self.b.nrows(), pos.len(), |r, c| self.b[(r, pos[c])]);
        let LstsqOutcome::Solved(z) = lstsq_dense(&sub, &residual, self.dep_threshold) else {
            return residual;
        };
        if pos.iter().zip(z.iter()).any(|(&i, &zc)| !self.free[i] && self.x[i] - zc <= 0.0) {
            return residual;
        }
        for (c, &i) in pos.iter().enumerate() {
            self.x[i] -= z[c];
        }
        residual - sub * z
    }

    fn solution(&mut self, cand: &[usize], n: usize) -> NnlsSolution {
        let residual = self.polish();
        let mut u = DVector::zeros(n);
        let mut active = Vec::new();
        for (pos, &j) in cand.iter().enumerate() {
            u[j] = self.x[pos];
            if self.passive[pos] {
                active.push(j);
            }
        }
        NnlsSolution { u, residual, active_set: IndexSet::from_sorted_unchecked(active), iterations: self.iterations }
    }
}

/// Cone projection at `p0`: the descent direction `d = A D u - (b + t p0)`
/// where `u` solves the NNLS problem with `NonNeg` on the equicorrelation
/// set and `Zero` elsewhere.
pub fn cone_projection_direction(
    a: &DesignMatrix,
    p0: &DualPoint,
    t: f64,
    b: &DVector<f64>,
    warm_start: Option<&IndexSet>,
    opts: &NnlsOptions,
) -> Result<(DVector<f64>, NnlsSolution)> {
    let n = a.ncols();
    let mut bounds = vec![Bound::Zero; n];
    for j in p0.equicorrelation().iter() {
        bounds[j] = Bound::NonNeg;
    }
    let target = b + p0.p() * t;
    let prob = NnlsProblem::new(a, p0.signs().clone(), bounds, target)?;
    let sol = solve_nnls(&prob, warm_start, opts)?;
    Ok((sol.residual.clone(), sol))
}
