use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use wolffkit::potentials::wolff_potential_batch;
use wolffkit::suite::{self, SuiteConfig};
use wolffkit::{
    derive_exponents, kernel_potential, manufacture_solution, solve_kernel, solve_wolff, validate_params,
    BoxGrid, CheckOptions, Measure, Point,
};

use crate::output::{read_field_values, write_field_csv, write_json};
use crate::scenario::{manufactured_scenario, raw_kernel, PointSet, Scenario};
use crate::CliError;

#[derive(Serialize)]
struct Meta<'a> {
    subcommand: &'a str,
    scenario: &'a Path,
    output: &'a Path,
    started: String,
    elapsed_seconds: f64,
    threads: usize,
    version: &'a str,
}

/// Loads the scenario, runs `f` and writes the metadata file. `Ok(false)`
/// means a hard assertion failed.
pub fn run(
    name: &str,
    path: &Path,
    output: Option<PathBuf>,
    f: impl FnOnce(&mut Scenario) -> Result<bool, CliError>,
) -> Result<bool, CliError> {
    let mut s = Scenario::load(path)?;
    if let Some(o) = output {
        s.output = o;
    }
    std::fs::create_dir_all(&s.output)
        .map_err(|e| CliError::Io(format!("{}: {e}", s.output.display())))?;
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let result = f(&mut s);
    let meta = Meta {
        subcommand: name,
        scenario: path,
        output: &s.output,
        started: started.to_rfc3339(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&s.output.join(format!("{name}.meta.json")), &meta)?;
    result
}

fn trivial_gate(s: &Scenario) -> Result<(), CliError> {
    let v = validate_params(&s.params);
    match v.first_violation() {
        Some(rule) => Err(CliError::Trivial {
            rule: rule.clone(),
            diagnostics: v.diagnostics.clone(),
        }),
        None => Ok(()),
    }
}

pub fn exponents(s: &mut Scenario) -> Result<bool, CliError> {
    let validity = validate_params(&s.params);
    let set = derive_exponents(&s.params).ok();
    let report = json!({ "config": s, "validity": validity, "exponents": set });
    write_json(&s.output.join("exponents.json"), &report)?;
    if let Some(set) = &set {
        println!("{:<26} {:>14} {:>22}", "exponent", "exact", "value");
        for (name, v) in set.entries() {
            match v {
                Some(v) => println!(
                    "{name:<26} {:>14} {:>22}",
                    wolffkit::exponents::format_rational(v),
                    wolffkit::exponents::to_f64(v)
                ),
                None => println!("{name:<26} {:>14} {:>22}", "-", "undefined"),
            }
        }
        println!("{}", serde_json::to_string(set).map_err(|e| CliError::Io(e.to_string()))?);
    }
    trivial_gate(s)?;
    Ok(true)
}

fn eval_points(s: &Scenario, mu: &Measure) -> Result<Vec<Point>, CliError> {
    Ok(match &s.points {
        PointSet::Nodes => mu.reference_points(),
        PointSet::Grid(g) => BoxGrid::cube(&g.lo, g.side, g.cells)?.centers(),
        PointSet::List { points } => points
            .iter()
            .map(|p| Point::new(p.clone()))
            .collect::<Result<_, _>>()?,
    })
}

pub fn potential(s: &mut Scenario) -> Result<bool, CliError> {
    let mu = s.build_measure()?;
    let points = eval_points(s, &mu)?;
    if let Some(x) = points.iter().find(|x| x.dim() != s.n()) {
        return Err(CliError::Config(format!("point {:?} does not have dimension {}", x.0, s.n())));
    }
    let (values, bounds): (Vec<f64>, Vec<f64>) = if s.potential_target == "kernel" {
        let k = s.kernel()?;
        let tol = s.solver.kernel_tol;
        let v = points
            .par_iter()
            .map(|x| kernel_potential(k, &mu, x, tol))
            .collect::<Result<Vec<_>, _>>()?;
        let b = v.iter().map(|v| v * tol).collect();
        (v, b)
    } else {
        let wp = s.params.wolff();
        wp.validate()?;
        wolff_potential_batch(&mu, &wp, &points, &s.quadrature)?
            .into_iter()
            .map(|e| (e.value, e.error_bound))
            .unzip()
    };
    write_field_csv(&s.output.join("potential.csv"), &points, &values, &bounds)?;
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let report = json!({
        "config": s,
        "points": points.len(),
        "infinite_values": values.len() - finite.len(),
        "min": finite.iter().copied().fold(f64::INFINITY, f64::min),
        "max": finite.iter().copied().fold(0.0, f64::max),
        "max_error_bound": bounds.iter().copied().fold(0.0, f64::max),
        "total_mass": mu.total_mass(),
        "field": "potential.csv",
    });
    write_json(&s.output.join("potential.json"), &report)?;
    println!("potential: {} points written to {}", points.len(), s.output.join("potential.csv").display());
    Ok(true)
}

pub fn solve(s: &mut Scenario) -> Result<bool, CliError> {
    trivial_gate(s)?;
    let sigma = s.build_measure()?;
    let q = s.params.q_f64();
    let (mode, sol) = match &s.kernel {
        Some(k) => ("kernel", solve_kernel(k, &sigma, q, &s.solver)?),
        None => ("wolff", solve_wolff(&sigma, &s.params, &s.solver)?),
    };
    let u = &sol.u;
    let bounds: Vec<f64> = u.values.iter().map(|v| v * sol.report.final_residual).collect();
    write_field_csv(&s.output.join("solution.csv"), &u.nodes, &u.values, &bounds)?;
    let reference_error = match &s.reference {
        None => None,
        Some(p) => {
            let exact = read_field_values(&s.path(p))?;
            if exact.len() != u.values.len() {
                return Err(CliError::Config(format!(
                    "reference has {} values, solution has {}",
                    exact.len(),
                    u.values.len()
                )));
            }
            Some(
                u.values
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| ((a - b) / b).abs())
                    .fold(0.0, f64::max),
            )
        }
    };
    let ok = sol.report.converged && sol.report.monotone_ok;
    let report = json!({
        "config": s,
        "mode": mode,
        "exponents": derive_exponents(&s.params)?,
        "solve": sol.report,
        "reference_sup_relative_error": reference_error,
        "field": "solution.csv",
    });
    write_json(&s.output.join("solve.json"), &report)?;
    println!(
        "solve: converged={} iterations={} final_change={:e} monotone={}",
        sol.report.converged, sol.report.iterations, sol.report.final_change, sol.report.monotone_ok
    );
    if let Some(e) = reference_error {
        println!("solve: sup relative error vs reference {e:e}");
    }
    Ok(ok)
}

pub fn manufacture(s: &mut Scenario) -> Result<bool, CliError> {
    let k = s.kernel()?.clone();
    let rho = match s.build_measure()? {
        Measure::Cells(c) => c,
        Measure::Atomic(_) => return Err(CliError::Config("manufacture needs a cell density measure".into())),
    };
    let q = s.params.q_f64();
    let (sigma, ustar) = manufacture_solution(&k, &rho, q, s.solver.kernel_tol)?;
    write_json(&s.output.join("sigma.json"), &sigma)?;
    let bounds: Vec<f64> = ustar.values.iter().map(|v| v * s.solver.kernel_tol).collect();
    write_field_csv(&s.output.join("ustar.csv"), &ustar.nodes, &ustar.values, &bounds)?;
    let toml = manufactured_scenario(s, &raw_kernel(&k))?;
    let path = s.output.join("solve.toml");
    std::fs::write(&path, toml).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let report = json!({
        "config": s,
        "cells": rho.cell_count(),
        "sigma_total_mass": sigma.total_mass(),
        "ustar_max": ustar.values.iter().copied().fold(0.0, f64::max),
        "files": ["sigma.json", "ustar.csv", "solve.toml"],
    });
    write_json(&s.output.join("manufacture.json"), &report)?;
    println!("manufacture: wrote {}", path.display());
    Ok(true)
}

pub struct VerifyOverrides {
    pub check: Option<String>,
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub trials: Option<usize>,
}

pub fn verify(s: &mut Scenario, ov: &VerifyOverrides) -> Result<bool, CliError> {
    if let Some(c) = &ov.check {
        s.verify.check = c.clone();
    }
    if let Some(seed) = ov.seed {
        s.seed = seed;
    }
    if let Some(p) = ov.points {
        s.verify.points = p;
    }
    if let Some(t) = ov.trials {
        s.verify.trials = t;
    }
    let mut opts = CheckOptions::default();
    opts.quad = s.quadrature;
    let cfg = SuiteConfig {
        seed: s.seed,
        points: s.verify.points,
        trials: s.verify.trials,
        atoms: s.verify.atoms,
        measures: s.verify.measures,
        cells: s.verify.cells,
        params: s.params.clone(),
        options: opts,
    };
    let reports = suite::run(&s.verify.check, &cfg)?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| r.asserted && !r.skipped && !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    for r in &reports {
        let verdict = match (r.skipped, r.asserted, r.passed) {
            (true, _, _) => "skip",
            (false, false, _) => "report",
            (false, true, true) => "pass",
            (false, true, false) => "FAIL",
        };
        let c = r.empirical_constant.map(|c| format!(" constant={c:.6}")).unwrap_or_default();
        println!(
            "{verdict:<6} {:<44} margin={:.3e} violations={}{c}",
            r.name, r.worst_margin, r.violations
        );
    }
    let report = json!({
        "config": s,
        "suite": cfg,
        "checks": reports,
        "summary": {
            "total": reports.len(),
            "asserted": reports.iter().filter(|r| r.asserted).count(),
            "skipped": reports.iter().filter(|r| r.skipped).count(),
            "failed": failed,
        },
    });
    write_json(&s.output.join("verify.json"), &report)?;
    Ok(failed.is_empty())
}
