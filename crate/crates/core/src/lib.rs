//! Exact active-set solvers for basis pursuit denoising
//! `min ||x||_1 + ||Ax - b||^2 / (2t)` and basis pursuit (`t = 0`).
//!
//! * [`slow::solve_bpdn`] integrates the dual projected dynamical system in
//!   closed form and stops after finitely many steps.
//! * [`homotopy::solution_path`] traces the whole piecewise-linear path in `t`.
//! * [`greedy::greedy_feasible`] finds a feasible BP primal/dual pair in at
//!   most `rank(A)` iterations.
//! * [`verify`] holds the KKT checker, a FISTA baseline and a brute-force
//!   oracle used by the tests.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "|{a} - {b}| = {} > {tol}", (a - b).abs());
    }};
}

pub mod batch;
pub mod data;
pub mod error;
pub mod greedy;
pub mod homotopy;
pub mod linalg;
pub mod nnls;
pub mod par;
pub mod report;
pub mod slow;
pub mod verify;

#[cfg(test)]
mod testutil;

pub use batch::{solve_batch, Job};
pub use data::{generate_instance, DynamicRange, InstanceBundle};
pub use error::{Error, Result};
pub use greedy::{greedy_feasible, FeasiblePair, GreedyOptions};
pub use homotopy::{path_query, solution_path, HomotopyOptions, PathBreakpoint, SolutionPath};
pub use linalg::{CscMatrix, DesignMatrix, IndexSet, SignVector};
pub use par::Execution;
pub use report::{PrimalDualPair, SolverReport};
pub use slow::{make_dual_point, solve_bpdn, DualPoint, SolveOptions};
pub use verify::{kkt_check, KktReport, KktTolerances};
