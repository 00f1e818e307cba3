use std::fs;
use std::path::Path;
use std::time::Instant;

use exactbpdn::data::{
    read_matrix_market, read_vector, write_matrix_market, write_path, write_vector_raw, SparseVector,
};
use exactbpdn::linalg::norm_inf;
use exactbpdn::slow::regularization_path_with_reports;
use exactbpdn::verify::fista_baseline;
use exactbpdn::{
    generate_instance, greedy_feasible, kkt_check, solution_path, solve_bpdn, DesignMatrix, Error, GreedyOptions,
    HomotopyOptions, InstanceBundle, KktReport, KktTolerances, PrimalDualPair, SolveOptions, SolverReport,
};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use crate::args::{
    BenchArgs, FeasibleArgs, Format, GenArgs, InputArgs, Method, PathArgs, SolveArgs, TolArgs, VerifyArgs,
};
use crate::output::{
    ms, write_csv, write_json, BenchRow, FeasibleOut, FeasibleSection, GridOut, KktOut, SolutionOut, SolveCsvRow,
    VerifyEntry, VerifyOut,
};

pub const EXIT_IO: u8 = 1;
pub const EXIT_SOLVER: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }

    fn solver(message: impl Into<String>) -> Self {
        CliError { code: EXIT_SOLVER, message: message.into() }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Parse { .. } | Error::Validation(_) | Error::InvalidArgument(_) => {
            EXIT_IO
        }
        Error::InfeasibleBp { .. } => EXIT_INFEASIBLE,
        Error::AtGridIndex { source, .. } => exit_code(source),
        _ => EXIT_SOLVER,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn load(input: &InputArgs) -> Result<InstanceBundle, CliError> {
    match (&input.matrix, &input.rhs, &input.gen) {
        (Some(m), Some(r), None) => {
            let a = read_matrix_market(m).map_err(|e| CliError::input(format!("{}: {e}", m.display())))?;
            let b = read_vector(r).map_err(|e| CliError::input(format!("{}: {e}", r.display())))?;
            let name = m.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let meta = exactbpdn::data::InstanceMeta { name, ..Default::default() };
            Ok(InstanceBundle::new(a, b, None, meta)?)
        }
        (None, None, Some(g)) => Ok(generate_instance(g.m, g.n, g.k, input.seed, g.range)?),
        _ => Err(CliError::input("give either --matrix and --rhs, or --gen")),
    }
}

fn solve_options(tol: &TolArgs) -> SolveOptions {
    SolveOptions { tol_eq: tol.tol_eq, tol_conv: tol.tol_conv, record_trajectory: false, ..Default::default() }
}

fn t0_of(a: &DesignMatrix, b: &DVector<f64>) -> f64 {
    norm_inf(&a.tr_mul(b))
}

fn solutions(a: &DesignMatrix, b: &DVector<f64>, out: Vec<(PrimalDualPair, SolverReport)>) -> Vec<SolutionOut> {
    out.iter()
        .map(|(pair, report)| SolutionOut::new(pair, report, &kkt_check(a, b, pair.t, &pair.x, &pair.p)))
        .collect()
}

pub fn solve(args: &SolveArgs) -> CliResult {
    let inst = load(&args.input)?;
    let (a, b) = (&inst.a, &inst.b);
    let opts = solve_options(&args.tol);
    let started = Instant::now();
    let sols = match &args.t_grid {
        Some(grid) => {
            let ts = grid.expand(t0_of(a, b), args.include_zero);
            solutions(a, b, regularization_path_with_reports(a, b, &ts, &opts)?)
        }
        None => {
            let (pair, _, report) = solve_bpdn(a, b, args.t.unwrap_or(0.0), None, &opts)?;
            solutions(a, b, vec![(pair, report)])
        }
    };
    let out_path = args.out.out.as_deref();
    match (args.out.format.unwrap_or(Format::Json), args.t_grid.is_some()) {
        (Format::Csv, _) => write_csv(out_path, &sols.iter().map(SolveCsvRow::from).collect::<Vec<_>>())?,
        (Format::Json, true) => {
            let out =
                GridOut { instance: inst.meta.name.clone(), solutions: sols.clone(), wall_ms: ms(started.elapsed()) };
            write_json(out_path, &out)?
        }
        (Format::Json, false) => write_json(out_path, &sols[0])?,
    }
    if args.verify {
        let reports = match (out_path, args.out.format) {
            (Some(p), None | Some(Format::Json)) => verify_solution_file(a, b, p)?,
            _ => sols
                .iter()
                .map(|s| Ok((s.t, kkt_check(a, b, s.t, &s.x.to_dense()?, &DVector::from_vec(s.p.clone())))))
                .collect::<Result<Vec<_>, Error>>()?,
        };
        let tol = KktTolerances::default();
        if let Some((t, _)) = reports.iter().find(|(_, k)| !k.passes(&tol)) {
            return Err(CliError::solver(format!("KKT check failed at t = {t:e}")));
        }
    }
    Ok(())
}

/// Reads solutions written by `solve` (single or grid form) and checks each one.
fn verify_solution_file(a: &DesignMatrix, b: &DVector<f64>, path: &Path) -> Result<Vec<(f64, KktReport)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let sols: Vec<SolutionOut> = match value.get("solutions") {
        Some(list) => serde_json::from_value(list.clone())?,
        None => vec![serde_json::from_value(value)?],
    };
    sols.iter()
        .map(|s| {
            let x = s.x.to_dense()?;
            let p = DVector::from_vec(s.p.clone());
            if x.len() != a.ncols() || p.len() != a.nrows() {
                return Err(CliError::input(format!("solution at t = {:e} has the wrong dimensions", s.t)));
            }
            Ok((s.t, kkt_check(a, b, s.t, &x, &p)))
        })
        .collect()
}

pub fn path(args: &PathArgs) -> CliResult {
    let inst = load(&args.input)?;
    let opts = HomotopyOptions { tol_eq: args.tol_eq, ..Default::default() };
    let (path, report) = solution_path(&inst.a, &inst.b, &opts)?;
    let meta = json!({
        "instance": inst.meta.name,
        "breakpoints": path.len(),
        "nnls_iterations": report.nnls_iterations,
        "wall_ms": ms(report.wall_time),
    });
    let w = crate::output::sink(args.out.as_deref())?;
    write_path(&path, &meta, w)?;
    Ok(())
}

pub fn feasible(args: &FeasibleArgs) -> CliResult {
    let inst = load(&args.input)?;
    let (a, b) = (&inst.a, &inst.b);
    let gopts = GreedyOptions { tol_eq: args.tol.tol_eq, ..Default::default() };
    let (pair, report) = greedy_feasible(a, b, &gopts)?;
    let kkt = kkt_check(a, b, 0.0, &pair.x_f, &pair.p_f);
    let feasible = FeasibleSection {
        x: SparseVector::from_dense(&pair.x_f),
        p: pair.p_f.iter().copied().collect(),
        iterations: pair.iterations,
        kkt: KktOut::from(&kkt),
        wall_ms: ms(report.wall_time),
    };
    let exact = if args.continue_exact {
        let (sol, _, rep) = solve_bpdn(a, b, 0.0, Some(&pair.p_f), &solve_options(&args.tol))?;
        Some(SolutionOut::new(&sol, &rep, &kkt_check(a, b, 0.0, &sol.x, &sol.p)))
    } else {
        None
    };
    write_json(args.out.as_deref(), &FeasibleOut { instance: inst.meta.name.clone(), feasible, exact })?;
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CliResult {
    let inst = load(&args.input)?;
    let (a, b) = (&inst.a, &inst.b);
    let reports = match (&args.solution, &args.x, &args.p, args.t) {
        (Some(path), _, _, _) => verify_solution_file(a, b, path)?,
        (None, Some(xp), Some(pp), Some(t)) => {
            let x = read_vector(xp).map_err(|e| CliError::input(format!("{}: {e}", xp.display())))?;
            let p = read_vector(pp).map_err(|e| CliError::input(format!("{}: {e}", pp.display())))?;
            if x.len() != a.ncols() || p.len() != a.nrows() {
                return Err(CliError::input("x or p has the wrong length"));
            }
            vec![(t, kkt_check(a, b, t, &x, &p))]
        }
        _ => return Err(CliError::input("give --solution, or --x, --p and --t")),
    };
    let results: Vec<VerifyEntry> = reports.iter().map(|(t, k)| VerifyEntry { t: *t, kkt: k.into() }).collect();
    let pass = results.iter().all(|r| r.kkt.pass);
    write_json(args.out.as_deref(), &VerifyOut { results, pass })?;
    if pass {
        Ok(())
    } else {
        Err(CliError::solver("KKT check failed"))
    }
}

/// One timed method on one instance; `Err` carries the failure message.
fn bench_method(
    a: &DesignMatrix,
    b: &DVector<f64>,
    ts: &[f64],
    method: Method,
    args: &BenchArgs,
) -> Result<(usize, f64, Vec<KktReport>), String> {
    let opts = solve_options(&args.tol);
    let run = || -> Result<Vec<KktReport>, Error> {
        let check = |pairs: Vec<(PrimalDualPair, SolverReport)>| {
            pairs.iter().map(|(p, _)| kkt_check(a, b, p.t, &p.x, &p.p)).collect::<Vec<_>>()
        };
        match method {
            Method::Alg1 => Ok(check(regularization_path_with_reports(a, b, ts, &opts)?)),
            Method::Alg1WarmAlg3 => {
                let split = ts.iter().position(|&t| t == 0.0).unwrap_or(ts.len());
                let mut out = check(regularization_path_with_reports(a, b, &ts[..split], &opts)?);
                if split < ts.len() {
                    let (pair, _) =
                        greedy_feasible(a, b, &GreedyOptions { tol_eq: args.tol.tol_eq, ..Default::default() })?;
                    let (sol, _, _) = solve_bpdn(a, b, 0.0, Some(&pair.p_f), &opts)?;
                    out.push(kkt_check(a, b, 0.0, &sol.x, &sol.p));
                }
                Ok(out)
            }
            Method::Fista => ts
                .iter()
                .filter(|&&t| t > 0.0)
                .map(|&t| {
                    let r = fista_baseline(a, b, t, args.fista_tol, args.fista_max_iter)?;
                    Ok(kkt_check(a, b, t, &r.x, &r.p))
                })
                .collect(),
        }
    };
    let runs = args.runs.max(1);
    let started = Instant::now();
    let mut kkts = Vec::new();
    for _ in 0..runs {
        kkts = run().map_err(|e| e.to_string())?;
    }
    Ok((kkts.len(), started.elapsed().as_secs_f64() / runs as f64, kkts))
}

pub fn bench(args: &BenchArgs) -> CliResult {
    let instances: Vec<InstanceBundle> = match &args.input.gen {
        Some(_) => (0..args.instances)
            .map(|i| load(&InputArgs { seed: args.input.seed + i, ..args.input.clone() }))
            .collect::<Result<_, _>>()?,
        None => vec![load(&args.input)?],
    };
    let tol = KktTolerances::default();
    let rows: Vec<BenchRow> = instances
        .par_iter()
        .flat_map_iter(|inst| {
            let ts = args.t_grid.expand(t0_of(&inst.a, &inst.b), args.include_zero);
            args.methods.iter().map(move |&method| {
                let row = |grid_size, seconds, max_kkt, status: String| BenchRow {
                    instance: inst.meta.name.clone(),
                    method: method.name(),
                    grid_size,
                    seconds,
                    max_kkt,
                    status,
                };
                match bench_method(&inst.a, &inst.b, &ts, method, args) {
                    Ok((size, secs, kkts)) => {
                        let max_kkt = kkts.iter().map(KktReport::max_scaled).fold(0.0, f64::max);
                        let status = if kkts.iter().all(|k| k.passes(&tol)) { "ok" } else { "inexact" };
                        row(size, secs, max_kkt, status.to_string())
                    }
                    Err(msg) => row(0, f64::NAN, f64::NAN, format!("error: {msg}")),
                }
            })
        })
        .collect();
    match args.out.format.unwrap_or(Format::Csv) {
        Format::Csv => write_csv(args.out.out.as_deref(), &rows)?,
        Format::Json => write_json(args.out.out.as_deref(), &rows)?,
    }
    if !rows.is_empty() && rows.iter().all(|r| r.status.starts_with("error")) {
        return Err(CliError::solver("every benchmark run failed"));
    }
    Ok(())
}

pub fn gen(args: &GenArgs) -> CliResult {
    let g = args.gen;
    let inst = generate_instance(g.m, g.n, g.k, args.seed, g.range)?;
    fs::create_dir_all(&args.out)?;
    write_matrix_market(&inst.a, fs::File::create(args.out.join("A.mtx"))?)?;
    write_vector_raw(&inst.b, fs::File::create(args.out.join("b.bin"))?)?;
    if let Some(x) = &inst.x_ref {
        write_vector_raw(x, fs::File::create(args.out.join("x_ref.bin"))?)?;
    }
    fs::write(args.out.join("meta.json"), serde_json::to_string_pretty(&inst.meta)?)?;
    Ok(())
}
