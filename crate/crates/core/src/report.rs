use std::time::Duration;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::verify::KktReport;

/// Name of the factorization every least-squares kernel uses.
pub const FACTORIZATION: &str = "householder-qr";

/// A primal/dual candidate `(x, p)` at hyperparameter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPair {
    pub t: f64,
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

/// Summary of one solver run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverReport {
    /// Outer iterations (descent steps, breakpoints or greedy rounds).
    pub iterations: usize,
    /// Total inner NNLS iterations across the run.
    pub nnls_iterations: usize,
    /// `||d||_2` at the last evaluated point.
    pub final_descent_norm: f64,
    pub kkt: Option<KktReport>,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub factorization: String,
}

impl SolverReport {
    pub(crate) fn new() -> Self {
        SolverReport { factorization: FACTORIZATION.to_string(), ..Default::default() }
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}
