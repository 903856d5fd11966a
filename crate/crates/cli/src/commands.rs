use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use varspline::curve::suggest_grid_near;
use varspline::cylinder::{bump_energy, convergent_classes, record_classes};
use varspline::rational::small_rational;
use varspline::{
    constrained_winding_scan, dirichlet_sequence, exact_energy, initial_curve, minimize_from,
    natural_periodic_sequence, solve_exact, verify, Candidate, ChartCurve, InterpolationProblem,
    OptimizerOptions, Parametrization, PiecewisePolynomial, Tolerances, VerificationReport,
    VelocityConstraint, GOLDEN,
};

use crate::error::CliError;
use crate::io::{curve_table, emit, envelope, num, read_curve, Format, Table};
use crate::problem_file::ProblemFile;

/// Flags shared by every command.
#[derive(Debug, Clone)]
pub struct Common {
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: Option<u64>,
}

/// Result of a command that may still have produced output.
pub enum Status {
    Ok,
    NotConverged(String),
}

fn load(path: &Path) -> Result<ProblemFile, CliError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read problem file: {e}")).in_file(&name))?;
    ProblemFile::parse(&text).map_err(|e| e.in_file(&name))
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn with_order(problem: &InterpolationProblem, k: usize) -> Result<InterpolationProblem, CliError> {
    if k == problem.order() {
        return Ok(problem.clone());
    }
    let velocity = match problem.velocity() {
        None => None,
        Some(v) if v.derivs.len() == k - 1 => Some(v.clone()),
        Some(v) => {
            return Err(CliError::input(format!(
                "--k {k} needs {} prescribed derivatives at the velocity site, the file has {}",
                k - 1,
                v.derivs.len()
            )))
        }
    };
    Ok(InterpolationProblem::new(
        problem.manifold().clone(),
        k,
        problem.knots().to_vec(),
        velocity.map(|v: VelocityConstraint| v),
    )?)
}

pub fn solve_exact_cmd(common: &Common, problem_path: &Path, k: Option<usize>, samples: usize) -> Result<Status, CliError> {
    let start = Instant::now();
    let file = load(problem_path)?;
    let problem = match k {
        Some(k) => with_order(&file.problem, k)?,
        None => file.problem.clone(),
    };
    if samples == 0 {
        return Err(CliError::input("--samples must be positive"));
    }
    let poly = solve_exact(&problem)?;
    let energy = exact_energy(&poly);
    let check = verify(&Candidate::Exact(poly.clone()), &problem)?;
    let d = problem.manifold().dim();
    let mut table = Table::new(std::iter::once("t".to_string()).chain((0..d).map(|q| format!("x{q}"))));
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        table.push(std::iter::once(num(t)).chain(poly.eval(t, 0).into_iter().map(num)).collect());
    }
    let report = envelope(
        "solve-exact",
        json!({
            "input": { "problem": problem, "winding": file.winding, "samples": samples },
            "energy_int": energy.energy_int,
            "energy_f": energy.energy_f,
            "polynomial": poly,
            "verification": verification_json(&check),
            "wall_time_ms": elapsed_ms(start),
        }),
    );
    eprintln!("exact energy f = {} (∫|γ^(k)|² = {})", energy.energy_f, energy.energy_int);
    emit(common.out.as_deref(), common.format, &table, &report)?;
    Ok(Status::Ok)
}

fn verification_json(rep: &VerificationReport) -> Value {
    let tol = Tolerances::for_report(rep);
    json!({
        "passed": rep.passed(),
        "tolerances": tol,
        "report": rep,
    })
}

pub struct MinimizeArgs {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

fn perturbed_start(problem: &InterpolationProblem, m: usize, seed: u64) -> Result<ChartCurve, CliError> {
    let start = initial_curve(problem, m)?;
    let param = Parametrization::new(problem, start.grid())?;
    let mut z = param.extract(start.coords());
    let scale = start.coords().iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut z {
        *v += 1e-3 * scale * rng.gen_range(-1.0..1.0);
    }
    Ok(start.with_coords(param.expand(&z))?)
}

pub fn minimize_cmd(common: &Common, problem_path: &Path, args: &MinimizeArgs) -> Result<Status, CliError> {
    let start = Instant::now();
    let file = load(problem_path)?;
    let problem = &file.problem;
    let m = match args.grid.or(file.solver.grid) {
        Some(m) => m,
        None => suggest_grid_near(&problem.knot_times(), 128)?,
    };
    let mut opts = OptimizerOptions::default();
    if let Some(t) = args.tol.or(file.solver.tol) {
        opts.tol_grad = t;
    }
    if let Some(n) = args.max_iter.or(file.solver.max_iter) {
        opts.max_iter = n;
    }
    opts.validate()?;
    let initial = match common.seed {
        Some(seed) => perturbed_start(problem, m, seed).map_err(|e| e.in_file(&problem_path.display().to_string()))?,
        None => initial_curve(problem, m).map_err(|e| locate_knot(e, &file, problem_path))?,
    };
    let (curve, conv) = minimize_from(problem, &initial, &opts)?;
    let verification = match verify(&Candidate::Discrete(curve.clone()), problem) {
        Ok(rep) => verification_json(&rep),
        Err(e) => json!({ "skipped": e.to_string() }),
    };
    let exact = if problem.manifold().is_flat() {
        match solve_exact(problem) {
            Ok(poly) => {
                let sup = sup_diff(&curve, &poly);
                json!({ "energy_f": exact_energy(&poly).energy_f, "sup_error": sup })
            }
            Err(e) => json!({ "skipped": e.to_string() }),
        }
    } else {
        Value::Null
    };
    let report = envelope(
        "minimize",
        json!({
            "input": { "problem": problem, "winding": file.winding, "grid_m": m, "options": opts, "seed": common.seed },
            "convergence": conv,
            "verification": verification,
            "exact_comparison": exact,
            "wall_time_ms": elapsed_ms(start),
        }),
    );
    eprintln!(
        "{:?} after {} iterations, energy {} (M = {m})",
        conv.termination, conv.iterations, conv.final_energy
    );
    emit(common.out.as_deref(), common.format, &curve_table(&curve), &report)?;
    if conv.converged {
        Ok(Status::Ok)
    } else {
        Ok(Status::NotConverged(format!(
            "optimizer stopped without converging ({:?}, gradient {:e})",
            conv.termination, conv.final_grad_norm
        )))
    }
}

fn locate_knot(e: varspline::Error, file: &ProblemFile, path: &Path) -> CliError {
    let loc = match &e {
        varspline::Error::KnotOffGrid { t, .. } => file
            .problem
            .knots()
            .iter()
            .position(|k| k.t == *t)
            .and_then(|i| file.knot_location(i).map(|l| (i, l))),
        _ => None,
    };
    let mut err = CliError::from(e).in_file(&path.display().to_string());
    if let Some((i, l)) = loc {
        err.field = Some(format!("knot[{i}].t"));
        err.location = Some(l);
    }
    err
}

fn sup_diff(curve: &ChartCurve, poly: &PiecewisePolynomial) -> f64 {
    let mut sup = 0.0_f64;
    for (i, t) in curve.grid().times().into_iter().enumerate() {
        for (a, b) in curve.node(i).iter().zip(poly.eval(t, 0)) {
            sup = sup.max((a - b).abs());
        }
    }
    sup
}

pub fn verify_cmd(
    common: &Common,
    problem_path: &Path,
    curve: Option<&Path>,
    poly: Option<&Path>,
) -> Result<Status, CliError> {
    let start = Instant::now();
    let file = load(problem_path)?;
    let problem = &file.problem;
    let (candidate, source) = match (curve, poly) {
        (Some(c), None) => (Candidate::Discrete(read_curve(c, problem.manifold())?), c),
        (None, Some(p)) => (Candidate::Exact(read_poly(p)?), p),
        _ => return Err(CliError::input("pass exactly one of --curve or --poly")),
    };
    let rep = verify(&candidate, problem)?;
    let tol = Tolerances::for_report(&rep);
    let mut table = Table::new(["check", "value", "tolerance", "pass"]);
    let rows = [
        ("el_residual", rep.el_max(), tol.el),
        ("junction", rep.junctions.max_constrained_jump(problem.order()), tol.junction),
        ("natural", rep.junctions.max_natural(), tol.natural),
        ("structure", rep.structure_max(), tol.structure),
    ];
    for (name, v, t) in rows {
        table.push(vec![name.into(), num(v), num(t), (v <= t).to_string()]);
    }
    let report = envelope(
        "verify",
        json!({
            "input": { "problem": problem, "candidate": source.display().to_string() },
            "verification": verification_json(&rep),
            "wall_time_ms": elapsed_ms(start),
        }),
    );
    eprintln!("verification {}", if rep.passed() { "passed" } else { "failed" });
    emit(common.out.as_deref(), common.format, &table, &report)?;
    Ok(Status::Ok)
}

fn read_poly(path: &Path) -> Result<PiecewisePolynomial, CliError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read polynomial: {e}")).in_file(&name))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::input(format!("invalid JSON: {e}")).in_file(&name))?;
    let body = doc.get("polynomial").cloned().unwrap_or(doc);
    serde_json::from_value(body).map_err(|e| CliError::input(format!("not a piecewise polynomial: {e}")).in_file(&name))
}

/// Parses `golden` or a number in `(0, 1)`.
pub fn parse_r(s: &str) -> Result<f64, String> {
    let r = if s.eq_ignore_ascii_case("golden") {
        GOLDEN
    } else {
        s.parse::<f64>().map_err(|e| e.to_string())?
    };
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(format!("r must lie in (0, 1), got {r}"))
    }
}

fn warn_rational(r: f64) {
    if let Some((p, q)) = small_rational(r, 10_000, 1e-14) {
        eprintln!("warning: r = {p}/{q} is rational; the non-existence mechanism needs irrational r");
    }
}

pub fn sequence_cmd(common: &Common, r: f64, k_max: i64) -> Result<Status, CliError> {
    let start = Instant::now();
    warn_rational(r);
    let seq = dirichlet_sequence(r, k_max)?;
    let mut table = Table::new(["K", "k0", "m", "gap", "energy_int", "energy_f", "initial_speed"]);
    for e in &seq {
        table.push(vec![
            e.k_max.to_string(),
            e.k0.to_string(),
            e.m.to_string(),
            num(e.gap),
            num(e.energy_int),
            num(e.energy_f),
            num(e.initial_speed),
        ]);
    }
    let records = record_classes(r, k_max);
    let convergents = convergent_classes(r, k_max);
    let report = envelope(
        "cylinder sequence",
        json!({
            "input": { "r": r, "k_max": k_max },
            "sequence": seq,
            "record_classes": records,
            "convergent_classes": convergents,
            "convergents_match_records": records == convergents,
            "wall_time_ms": elapsed_ms(start),
        }),
    );
    emit(common.out.as_deref(), common.format, &table, &report)?;
    Ok(Status::Ok)
}

pub fn scan_cmd(common: &Common, r: f64, v: Option<f64>, window: i64) -> Result<Status, CliError> {
    let start = Instant::now();
    if window < 0 {
        return Err(CliError::input("--window must be non-negative"));
    }
    warn_rational(r);
    let scan = constrained_winding_scan(r, v, -window..=window, -window..=window)?;
    let mut table = Table::new(["m", "k0", "energy_int", "energy_f"]);
    for c in &scan.cells {
        table.push(vec![c.m.to_string(), c.k0.to_string(), num(c.energy_int), num(c.energy_f)]);
    }
    let a = &scan.argmin;
    eprintln!("argmin m = {}, k0 = {}, energy_int = {}", a.m, a.k0, a.energy_int);
    let report = envelope(
        "cylinder scan",
        json!({
            "input": { "r": r, "v": v, "window": window },
            "argmin": a,
            "min_boundary_energy": scan.min_boundary_energy(),
            "cells": scan.cells,
            "wall_time_ms": elapsed_ms(start),
        }),
    );
    emit(common.out.as_deref(), common.format, &table, &report)?;
    Ok(Status::Ok)
}

pub fn natural_periodic_cmd(common: &Common, r: f64, k_max: i64, delta: f64) -> Result<Status, CliError> {
    let start = Instant::now();
    warn_rational(r);
    let seq = natural_periodic_sequence(r, k_max, delta)?;
    let mut table = Table::new(["K", "k0", "m", "alpha", "energy_int", "energy_f"]);
    for c in &seq {
        table.push(vec![
            c.k_max.to_string(),
            c.k0.to_string(),
            c.m.to_string(),
            num(c.alpha),
            num(c.energy_int),
            num(c.energy_f),
        ]);
    }
    let report = envelope(
        "cylinder natural-periodic",
        json!({
            "input": { "r": r, "k_max": k_max, "delta": delta },
            "bump_energy": bump_energy(delta),
            "curves": seq,
            "wall_time_ms": elapsed_ms(start),
        }),
    );
    emit(common.out.as_deref(), common.format, &table, &report)?;
    Ok(Status::Ok)
}
