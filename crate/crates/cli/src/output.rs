use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Duration;

use exactbpdn::data::SparseVector;
use exactbpdn::{KktReport, KktTolerances, PrimalDualPair, SolverReport};
use serde::{Deserialize, Serialize};

/// KKT residuals plus the derived pass/fail verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktOut {
    pub stationarity: f64,
    pub dual_feasibility: f64,
    pub sign_consistency: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub bp_residual: Option<f64>,
    pub pass: bool,
}

impl From<&KktReport> for KktOut {
    fn from(k: &KktReport) -> Self {
        KktOut {
            stationarity: k.stationarity,
            dual_feasibility: k.dual_feasibility,
            sign_consistency: k.sign_consistency,
            gap: k.gap,
            relative_gap: k.relative_gap(),
            bp_residual: k.bp_residual,
            pass: k.passes(&KktTolerances::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionOut {
    pub t: f64,
    pub x: SparseVector,
    pub p: Vec<f64>,
    pub kkt: KktOut,
    pub iterations: usize,
    pub nnls_iterations: usize,
    pub wall_ms: f64,
}

impl SolutionOut {
    pub fn new(pair: &PrimalDualPair, report: &SolverReport, kkt: &KktReport) -> Self {
        SolutionOut {
            t: pair.t,
            x: SparseVector::from_dense(&pair.x),
            p: pair.p.iter().copied().collect(),
            kkt: kkt.into(),
            iterations: report.iterations,
            nnls_iterations: report.nnls_iterations,
            wall_ms: ms(report.wall_time),
        }
    }
}

/// Output of `solve` with a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridOut {
    pub instance: String,
    pub solutions: Vec<SolutionOut>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibleSection {
    pub x: SparseVector,
    pub p: Vec<f64>,
    pub iterations: usize,
    pub kkt: KktOut,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibleOut {
    pub instance: String,
    pub feasible: FeasibleSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<SolutionOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyEntry {
    pub t: f64,
    pub kkt: KktOut,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOut {
    pub results: Vec<VerifyEntry>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub method: &'static str,
    pub grid_size: usize,
    pub seconds: f64,
    pub max_kkt: f64,
    pub status: String,
}

/// Per-grid-point CSV row for `solve --format csv`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveCsvRow {
    pub t: f64,
    pub nnz: usize,
    pub iterations: usize,
    pub wall_ms: f64,
    pub stationarity: f64,
    pub dual_feasibility: f64,
    pub sign_consistency: f64,
    pub relative_gap: f64,
    pub pass: bool,
}

impl From<&SolutionOut> for SolveCsvRow {
    fn from(s: &SolutionOut) -> Self {
        SolveCsvRow {
            t: s.t,
            nnz: s.x.index.len(),
            iterations: s.iterations,
            wall_ms: s.wall_ms,
            stationarity: s.kkt.stationarity,
            dual_feasibility: s.kkt.dual_feasibility,
            sign_consistency: s.kkt.sign_consistency,
            relative_gap: s.kkt.relative_gap,
            pass: s.kkt.pass,
        }
    }
}

pub fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> io::Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

pub fn write_csv<T: Serialize>(path: Option<&Path>, rows: &[T]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}
