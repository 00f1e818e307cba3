use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exactbpdn::DynamicRange;

#[derive(Parser, Debug)]
#[command(name = "exactbpdn", version, about = "Exact solvers for basis pursuit denoising and basis pursuit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve at one t, or along a warm-started grid of t values.
    Solve(SolveArgs),
    /// Compute the full homotopy path down to t = 0 and write it as JSON.
    Path(PathArgs),
    /// Greedy feasible pair for basis pursuit, optionally polished to the exact solution.
    Feasible(FeasibleArgs),
    /// Check the optimality conditions of a candidate solution.
    Verify(VerifyArgs),
    /// Time the exact solver against FISTA over a grid of t values.
    Bench(BenchArgs),
    /// Write a random instance to disk.
    Gen(GenArgs),
}

/// Where the problem data comes from: files or the built-in generator.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Design matrix in Matrix Market format.
    #[arg(long, requires = "rhs", conflicts_with = "gen")]
    pub matrix: Option<PathBuf>,
    /// Right-hand side: single-column Matrix Market or raw little-endian f64.
    #[arg(long, requires = "matrix")]
    pub rhs: Option<PathBuf>,
    /// Generate an instance instead: "m n k hdr|ldr".
    #[arg(long)]
    pub gen: Option<GenSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct TolArgs {
    /// Equicorrelation tolerance.
    #[arg(long, default_value_t = exactbpdn::slow::DEFAULT_TOL_EQ)]
    pub tol_eq: f64,
    /// Convergence threshold on the descent direction at t = 0.
    #[arg(long)]
    pub tol_conv: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: TolArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Regularization parameter (absolute). Defaults to 0 (basis pursuit).
    #[arg(long, conflicts_with = "t_grid")]
    pub t: Option<f64>,
    /// Grid relative to ||A^T b||_inf: "<count> log <lo> <hi> [--include-zero]".
    #[arg(long, allow_hyphen_values = true)]
    pub t_grid: Option<GridSpec>,
    /// Append t = 0 to the grid.
    #[arg(long, requires = "t_grid")]
    pub include_zero: bool,
    /// Re-read the written solution, rerun the KKT check and fail with exit 2 if it does not pass.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args, Debug)]
pub struct PathArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = exactbpdn::slow::DEFAULT_TOL_EQ)]
    pub tol_eq: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FeasibleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: TolArgs,
    /// Warm-start the exact t = 0 solver from the greedy dual point.
    #[arg(long)]
    pub continue_exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// JSON written by `solve`.
    #[arg(long, conflicts_with_all = ["x", "p"])]
    pub solution: Option<PathBuf>,
    /// Primal vector file (Matrix Market column or raw f64).
    #[arg(long, requires_all = ["p", "t"])]
    pub x: Option<PathBuf>,
    /// Dual vector file.
    #[arg(long, requires_all = ["x", "t"])]
    pub p: Option<PathBuf>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: TolArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Number of generated instances (seeds seed, seed+1, ...). Needs --gen.
    #[arg(long, default_value_t = 1, requires = "gen")]
    pub instances: u64,
    #[arg(long, allow_hyphen_values = true, default_value = "32 log 1e-4 1 --include-zero")]
    pub t_grid: GridSpec,
    #[arg(long, requires = "t_grid")]
    pub include_zero: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "alg1,alg1-warm-alg3,fista")]
    pub methods: Vec<Method>,
    /// Timed runs per instance and method; seconds are averaged.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Relative stopping tolerance for FISTA.
    #[arg(long, default_value_t = 1e-8)]
    pub fista_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub fista_max_iter: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Alg1,
    #[value(name = "alg1-warm-alg3")]
    Alg1WarmAlg3,
    Fista,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Alg1 => "alg1",
            Method::Alg1WarmAlg3 => "alg1-warm-alg3",
            Method::Fista => "fista",
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub gen: GenSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for A.mtx, b.bin, x_ref.bin and meta.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// `m n k hdr|ldr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub range: DynamicRange,
}

impl FromStr for GenSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let [m, n, k, range] = parts[..] else {
            return Err(format!("expected \"m n k hdr|ldr\", got {s:?}"));
        };
        let num = |v: &str, what: &str| v.parse::<usize>().map_err(|e| format!("bad {what} {v:?}: {e}"));
        let range = match range.to_ascii_lowercase().as_str() {
            "hdr" => DynamicRange::Hdr,
            "ldr" => DynamicRange::Ldr,
            other => return Err(format!("dynamic range must be hdr or ldr, got {other:?}")),
        };
        Ok(GenSpec { m: num(m, "m")?, n: num(n, "n")?, k: num(k, "k")?, range })
    }
}

/// `<count> log <lo> <hi> [--include-zero]`, relative to `||A^T b||_inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    pub include_zero: bool,
}

impl GridSpec {
    pub fn expand(&self, t0: f64, include_zero: bool) -> Vec<f64> {
        exactbpdn::batch::log_grid(t0, self.count, self.lo, self.hi, self.include_zero || include_zero)
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let (head, include_zero) = match parts.split_last() {
            Some((&"--include-zero", head)) => (head, true),
            _ => (&parts[..], false),
        };
        let [count, "log", lo, hi] = head[..] else {
            return Err(format!("expected \"<count> log <lo> <hi> [--include-zero]\", got {s:?}"));
        };
        let count: usize = count.parse().map_err(|e| format!("bad count {count:?}: {e}"))?;
        let lo: f64 = lo.parse().map_err(|e| format!("bad lower end {lo:?}: {e}"))?;
        let hi: f64 = hi.parse().map_err(|e| format!("bad upper end {hi:?}: {e}"))?;
        if count == 0 && !include_zero {
            return Err("grid is empty".into());
        }
        if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
            return Err(format!("need 0 < lo <= hi, got lo = {lo}, hi = {hi}"));
        }
        if count > 1 && lo == hi {
            return Err("grid with more than one point needs lo < hi".into());
        }
        Ok(GridSpec { count, lo, hi, include_zero })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses() {
        let g: GridSpec = "512 log 1e-4 1 --include-zero".parse().unwrap();
        assert_eq!(g, GridSpec { count: 512, lo: 1e-4, hi: 1.0, include_zero: true });
        let ts = g.expand(3.0, false);
        assert_eq!(ts.len(), 513);
        assert_eq!(ts[0], 3.0);
        assert_eq!(*ts.last().unwrap(), 0.0);
        assert!(ts.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn grid_spec_rejects_bad_input() {
        for s in ["", "10 lin 1e-4 1", "10 log 1 1e-4", "10 log 0 1", "0 log 1e-4 1", "3 log 1 1"] {
            assert!(s.parse::<GridSpec>().is_err(), "{s:?}");
        }
    }

    #[test]
    fn gen_spec_parses() {
        let g: GenSpec = "20 50 5 LDR".parse().unwrap();
        assert_eq!((g.m, g.n, g.k, g.range), (20, 50, 5, DynamicRange::Ldr));
        assert!("20 50 5".parse::<GenSpec>().is_err());
        assert!("20 50 5 mid".parse::<GenSpec>().is_err());
    }
}
