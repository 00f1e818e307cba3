//! Independent solves over many instances or grid points, run on the rayon
//! pool or sequentially. Results come back in input order either way.

use nalgebra::DVector;

use crate::error::Result;
use crate::linalg::DesignMatrix;
use crate::par::{map_range, map_slice, Execution};
use crate::report::{PrimalDualPair, SolverReport};
use crate::slow::{regularization_path_with_reports, solve_bpdn, SolveOptions};
use crate::verify::{kkt_check, KktReport};

/// One BPDN/BP problem.
#[derive(Debug, Clone, Copy)]
pub struct Job<'a> {
    pub a: &'a DesignMatrix,
    pub b: &'a DVector<f64>,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub pair: PrimalDualPair,
    pub report: SolverReport,
    pub kkt: KktReport,
}

/// Solves every job with the exact descent solver and checks its KKT residuals.
pub fn solve_batch(jobs: &[Job<'_>], opts: &SolveOptions, exec: Execution) -> Vec<Result<Solved>> {
    let opts = SolveOptions { record_trajectory: false, ..*opts };
    map_slice(jobs, exec, |job| {
        let (pair, _, mut report) = solve_bpdn(job.a, job.b, job.t, None, &opts)?;
        let kkt = kkt_check(job.a, job.b, job.t, &pair.x, &pair.p);
        report.kkt = Some(kkt);
        Ok(Solved { pair, report, kkt })
    })
}

/// Warm-started grid solve for each instance; instances run in parallel,
/// the grid within an instance is sequential.
pub fn solve_grids(
    instances: &[(&DesignMatrix, &DVector<f64>)],
    grid: impl Fn(&DesignMatrix, &DVector<f64>) -> Vec<f64> + Sync + Send,
    opts: &SolveOptions,
    exec: Execution,
) -> Vec<Result<Vec<Solved>>> {
    let opts = SolveOptions { record_trajectory: false, ..*opts };
    map_slice(instances, exec, |&(a, b)| {
        let ts = grid(a, b);
        let out = regularization_path_with_reports(a, b, &ts, &opts)?;
        Ok(out
            .into_iter()
            .map(|(pair, mut report)| {
                let kkt = kkt_check(a, b, pair.t, &pair.x, &pair.p);
                report.kkt = Some(kkt);
                Solved { pair, report, kkt }
            })
            .collect())
    })
}

/// KKT reports for precomputed pairs.
pub fn kkt_batch(a: &DesignMatrix, b: &DVector<f64>, pairs: &[PrimalDualPair], exec: Execution) -> Vec<KktReport> {
    map_range(pairs.len(), exec, |i| kkt_check(a, b, pairs[i].t, &pairs[i].x, &pairs[i].p))
}

/// `count` log-spaced values of `t / ||A^T b||_inf` from `hi` down to `lo`,
/// optionally followed by 0.
pub fn log_grid(t0: f64, count: usize, lo: f64, hi: f64, include_zero: bool) -> Vec<f64> {
    let mut ts: Vec<f64> = match count {
        0 => Vec::new(),
        1 => vec![t0 * hi],
        _ => {
            let (l, h) = (lo.ln(), hi.ln());
            (0..count).map(|i| t0 * (h + (l - h) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    };
    if include_zero {
        ts.push(0.0);
    }
    ts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = log_grid(2.0, 512, 1e-4, 1.0, true);
        assert_eq!(g.len(), 513);
        assert_close!(g[0], 2.0, 1e-15);
        assert_close!(g[511], 2e-4, 1e-17);
        assert_eq!(g[512], 0.0);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let a = DesignMatrix::identity(3);
        let bs: Vec<DVector<f64>> = (1..6).map(|k| DVector::from_column_slice(&[k as f64, 1.0, -2.0])).collect();
        let jobs: Vec<Job> = bs.iter().map(|b| Job { a: &a, b, t: 0.5 }).collect();
        let par = solve_batch(&jobs, &SolveOptions::default(), Execution::Parallel);
        let seq = solve_batch(&jobs, &SolveOptions::default(), Execution::Sequential);
        for (p, s) in par.iter().zip(&seq) {
            let (p, s) = (p.as_ref().unwrap(), s.as_ref().unwrap());
            assert_eq!(p.pair, s.pair);
            assert_eq!(p.kkt, s.kkt);
        }
    }
}
