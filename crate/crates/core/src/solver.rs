//! Monotone iteration for `u = W_{α,p}(u^q dσ)` and `u = G(u^q dσ)` on the
//! cell centres of a density measure, and manufactured exact solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{derive_exponents, to_f64, ProblemParams};
use crate::field::SampledField;
use crate::kernels::{kernel_potential, KernelGridOperator, KernelSpec};
use crate::measures::{CellDensityMeasure, Measure};
use crate::norms::{potential_lp_dx, ConditionOptions, Potential};
use crate::potentials::{wolff_potential, GridWolffOperator, QuadratureSpec};

/// Allowed relative decrease between consecutive iterates.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Growth of the `dσ` norm, relative to its first value, treated as divergence.
pub const DIVERGENCE_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub c0: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub quad: QuadratureSpec,
    /// Relative tolerance of kernel near-field integration.
    pub kernel_tol: f64,
    /// Also compute `‖u‖_{L^r(dx)}` after convergence.
    pub dx_norm: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            c0: 1.0,
            tol: 1e-4,
            max_iter: 500,
            max_halvings: 60,
            quad: QuadratureSpec::default(),
            kernel_tol: 1e-6,
            dx_norm: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("c0 = {}", self.c0)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        self.quad.validate()
    }
}

/// One step of the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub j: usize,
    /// `sup |u_j − u_{j−1}| / u_j`.
    #[serde(with = "crate::serde_f64")]
    pub change: f64,
    /// Smallest `(u_j − u_{j−1}) / u_{j−1}` over the nodes.
    #[serde(with = "crate::serde_f64")]
    pub min_increment: f64,
    pub monotone_ok: bool,
    /// `‖u_j‖_{L^{γ+q}(dσ)}`.
    #[serde(with = "crate::serde_f64")]
    pub sigma_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    #[serde(with = "crate::serde_f64")]
    pub final_residual: f64,
    #[serde(with = "crate::serde_f64")]
    pub final_change: f64,
    #[serde(with = "crate::serde_f64")]
    pub lgq_sigma_norm: f64,
    #[serde(with = "crate::serde_f64::option")]
    pub lr_dx_norm: Option<f64>,
    pub divergence_flag: bool,
    pub monotone_ok: bool,
    /// Smallest relative increment over all iterations and nodes.
    #[serde(with = "crate::serde_f64")]
    pub worst_increment: f64,
    pub c0: f64,
    pub halvings: usize,
    pub norm_exponent: f64,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub report: SolveReport,
    pub u: SampledField,
    /// Every iterate, `u_0` first, when requested.
    pub iterates: Vec<Vec<f64>>,
}

fn cells_of(sigma: &Measure) -> Result<&CellDensityMeasure> {
    match sigma {
        Measure::Atomic(_) => Err(Error::AtomicMeasure),
        Measure::Cells(c) => Ok(c),
    }
}

struct Problem<'a> {
    sigma: &'a CellDensityMeasure,
    q: f64,
    /// `u_0 = c_0 P(σ)^seed_power`.
    seed_power: f64,
    /// `T(c u) = c^homogeneity T(u)`.
    homogeneity: f64,
    norm_exponent: f64,
}

fn sigma_norm(sigma: &CellDensityMeasure, u: &[f64], e: f64) -> f64 {
    let vol = sigma.cell_volume();
    let mut s = 0.0;
    for (d, v) in sigma.density().iter().zip(u) {
        if *d > 0.0 && *v > 0.0 {
            s += d * vol * v.powf(e);
        }
    }
    s.powf(1.0 / e)
}

fn weighted(sigma: &CellDensityMeasure, u: &[f64], q: f64) -> Vec<f64> {
    sigma
        .density()
        .iter()
        .zip(u)
        .map(|(&d, &v)| if d == 0.0 || v == 0.0 { 0.0 } else { d * v.powf(q) })
        .collect()
}

fn relative_change(new: &[f64], old: &[f64]) -> (f64, f64) {
    let mut change: f64 = 0.0;
    let mut min_inc = f64::INFINITY;
    for (a, b) in new.iter().zip(old) {
        if *a > 0.0 {
            change = change.max((a - b).abs() / a);
        }
        if *b > 0.0 {
            min_inc = min_inc.min((a - b) / b);
        }
    }
    (change, if min_inc.is_finite() { min_inc } else { 0.0 })
}

fn iterate<T: Fn(&[f64]) -> Vec<f64>>(
    apply: T,
    prob: &Problem,
    opts: &SolverOptions,
    keep_iterates: bool,
) -> Result<(Vec<f64>, SolveReport, Vec<Vec<f64>>)> {
    let sigma = prob.sigma;
    let count = sigma.cell_count();
    let mut report = SolveReport {
        converged: false,
        iterations: 0,
        final_residual: 0.0,
        final_change: 0.0,
        lgq_sigma_norm: 0.0,
        lr_dx_norm: None,
        divergence_flag: false,
        monotone_ok: true,
        worst_increment: 0.0,
        c0: opts.c0,
        halvings: 0,
        norm_exponent: prob.norm_exponent,
        trace: Vec::new(),
    };
    if sigma.density().iter().all(|&d| d == 0.0) {
        report.converged = true;
        report.iterations = 1;
        return Ok((vec![0.0; count], report, Vec::new()));
    }
    let base = apply(sigma.density());
    if let Some(i) = base.iter().position(|v| !v.is_finite()) {
        return Err(Error::InfinitePotential(i));
    }
    let shape: Vec<f64> = base.iter().map(|v| v.powf(prob.seed_power)).collect();
    let t1 = apply(&weighted(sigma, &shape, prob.q));
    // u_1 = c^h T1 must dominate u_0 = c · shape
    let mut c0 = opts.c0;
    let mut halvings = 0;
    loop {
        let ok = shape
            .iter()
            .zip(&t1)
            .all(|(s, t)| c0.powf(prob.homogeneity) * t >= c0 * s * (1.0 + 1e-9));
        if ok {
            break;
        }
        if halvings == opts.max_halvings {
            return Err(Error::SeedExhausted(halvings));
        }
        c0 *= 0.5;
        halvings += 1;
    }
    report.c0 = c0;
    report.halvings = halvings;
    let mut u: Vec<f64> = shape.iter().map(|s| c0 * s).collect();
    let mut iterates = Vec::new();
    if keep_iterates {
        iterates.push(u.clone());
    }
    let mut first_norm = None;
    let mut worst: f64 = f64::INFINITY;
    let mut prev_change = f64::INFINITY;
    for j in 1..=opts.max_iter {
        let next = apply(&weighted(sigma, &u, prob.q));
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::InfinitePotential(i));
        }
        let (change, min_inc) = relative_change(&next, &u);
        worst = worst.min(min_inc);
        let norm = sigma_norm(sigma, &next, prob.norm_exponent);
        let monotone_ok = min_inc >= -MONOTONE_SLACK;
        report.monotone_ok &= monotone_ok;
        report.trace.push(IterationRecord {
            j,
            change,
            min_increment: min_inc,
            monotone_ok,
            sigma_norm: norm,
        });
        report.iterations = j;
        let first = *first_norm.get_or_insert(norm);
        if first > 0.0 && norm > DIVERGENCE_CAP * first {
            report.divergence_flag = true;
            u = next;
            break;
        }
        // the change of this step is the residual of the previous iterate
        if prev_change < opts.tol && change < opts.tol {
            report.converged = true;
            report.final_residual = change;
            report.final_change = prev_change;
            report.lgq_sigma_norm = sigma_norm(sigma, &u, prob.norm_exponent);
            break;
        }
        prev_change = change;
        u = next;
        if keep_iterates {
            iterates.push(u.clone());
        }
    }
    if !report.converged && !report.divergence_flag {
        let next = apply(&weighted(sigma, &u, prob.q));
        report.final_residual = relative_change(&next, &u).0;
        report.final_change = prev_change;
    }
    if !report.converged {
        report.lgq_sigma_norm = sigma_norm(sigma, &u, prob.norm_exponent);
    }
    report.worst_increment = if worst.is_finite() { worst } else { 0.0 };
    report.monotone_ok = report.worst_increment >= -MONOTONE_SLACK;
    Ok((u, report, iterates))
}

/// Solves `u = W_{α,p}(u^q dσ)` at the cell centres of `σ`.
pub fn solve_wolff(sigma: &Measure, pp: &ProblemParams, opts: &SolverOptions) -> Result<Solution> {
    solve_wolff_traced(sigma, pp, opts, false)
}

pub fn solve_wolff_traced(sigma: &Measure, pp: &ProblemParams, opts: &SolverOptions, keep_iterates: bool) -> Result<Solution> {
    opts.validate()?;
    let exps = derive_exponents(pp)?;
    let cells = cells_of(sigma)?;
    if cells.dim() != pp.n as usize {
        return Err(Error::DimensionMismatch {
            expected: pp.n as usize,
            got: cells.dim(),
        });
    }
    let wp = pp.wolff();
    let p = pp.p_f64();
    let q = pp.q_f64();
    let op = GridWolffOperator::new(&wp, cells.grid(), &opts.quad)?;
    let prob = Problem {
        sigma: cells,
        q,
        seed_power: (p - 1.0) / (p - 1.0 - q),
        homogeneity: q / (p - 1.0),
        norm_exponent: to_f64(&exps.solution_sigma_exponent),
    };
    let (u, mut report, iterates) = iterate(|d| op.apply(d), &prob, opts, keep_iterates)?;
    if opts.dx_norm && report.converged {
        let omega = cells.with_density(weighted(cells, &u, q))?;
        let om = Measure::Cells(omega.clone());
        let copts = ConditionOptions {
            quad: opts.quad,
            tol: opts.kernel_tol,
            ..ConditionOptions::default()
        };
        let r = potential_lp_dx(&omega, &om, &Potential::Wolff(wp), pp.r_f64(), &copts)?;
        report.lr_dx_norm = Some(r.value);
    }
    Ok(Solution {
        report,
        u: SampledField::new(sigma.reference_points(), u)?,
        iterates,
    })
}

/// Solves `u = G(u^q dσ)` at the cell centres of `σ`, `0 < q < 1`. The
/// `dσ` norm history uses the exponent `1 + q`.
pub fn solve_kernel(k: &KernelSpec, sigma: &Measure, q: f64, opts: &SolverOptions) -> Result<Solution> {
    solve_kernel_traced(k, sigma, q, opts, false)
}

pub fn solve_kernel_traced(
    k: &KernelSpec,
    sigma: &Measure,
    q: f64,
    opts: &SolverOptions,
    keep_iterates: bool,
) -> Result<Solution> {
    opts.validate()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")));
    }
    let cells = cells_of(sigma)?;
    k.check_support(sigma)?;
    let op = KernelGridOperator::new(k, cells.grid(), opts.kernel_tol)?;
    let prob = Problem {
        sigma: cells,
        q,
        seed_power: 1.0 / (1.0 - q),
        homogeneity: q,
        norm_exponent: 1.0 + q,
    };
    let (u, report, iterates) = iterate(|d| op.apply(d), &prob, opts, keep_iterates)?;
    Ok(Solution {
        report,
        u: SampledField::new(sigma.reference_points(), u)?,
        iterates,
    })
}

/// What the fixed-point map integrates against.
#[derive(Debug, Clone)]
pub enum Target {
    Wolff(ProblemParams),
    Kernel { kernel: KernelSpec, q: f64 },
}

impl Target {
    fn q(&self) -> f64 {
        match self {
            Target::Wolff(pp) => pp.q_f64(),
            Target::Kernel { q, .. } => *q,
        }
    }
}

/// One application of the fixed-point map at an arbitrary point:
/// `W(u^q dσ)(x)` or `G(u^q dσ)(x)`.
pub fn extend_solution(
    u: &SampledField,
    sigma: &Measure,
    target: &Target,
    x: &crate::geometry::Point,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<f64> {
    u.check_nodes(&sigma.reference_points())?;
    let cells = cells_of(sigma)?;
    let omega = Measure::Cells(cells.with_density(weighted(cells, &u.values, target.q()))?);
    match target {
        Target::Wolff(pp) => Ok(wolff_potential(&omega, &pp.wolff(), x, quad)?.value),
        Target::Kernel { kernel, .. } => kernel_potential(kernel, &omega, x, tol),
    }
}

/// Builds `σ = ρ (u*)^{−q}` with `u* = Gρ`, so that `u*` solves
/// `u = G(u^q dσ)` exactly on the grid.
pub fn manufacture_solution(k: &KernelSpec, rho: &CellDensityMeasure, q: f64, tol: f64) -> Result<(Measure, SampledField)> {
    if !(q >= 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in [0, 1)")));
    }
    k.check_support(&Measure::Cells(rho.clone()))?;
    let op = KernelGridOperator::new(k, rho.grid(), tol)?;
    let u = op.apply(rho.density());
    let mut density = Vec::with_capacity(u.len());
    for (i, (&d, &v)) in rho.density().iter().zip(&u).enumerate() {
        if d == 0.0 {
            density.push(0.0);
        } else if !(v > 0.0 && v.is_finite()) {
            return Err(Error::VanishingSolution(i));
        } else {
            density.push(d * v.powf(-q));
        }
    }
    let sigma = Measure::Cells(rho.with_density(density)?);
    let field = SampledField::new(sigma.reference_points(), u)?;
    Ok((sigma, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomicMeasure;

    #[test]
    fn zero_measure_gives_zero_solution() {
        let sigma = Measure::Cells(CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 2, 0.0).unwrap());
        let pp = ProblemParams::parse(3, "2", "0.5", "1", "6").unwrap();
        let s = solve_wolff(&sigma, &pp, &SolverOptions::default()).unwrap();
        assert!(s.report.converged);
        assert_eq!(s.report.iterations, 1);
        assert!(s.u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn atomic_sigma_is_rejected() {
        let sigma: Measure = AtomicMeasure::from_pairs(vec![(vec![0.0; 3], 1.0)]).unwrap().into();
        let pp = ProblemParams::parse(3, "2", "0.5", "1", "6").unwrap();
        assert_eq!(solve_wolff(&sigma, &pp, &SolverOptions::default()).unwrap_err(), Error::AtomicMeasure);
    }

    #[test]
    fn trivial_regime_is_rejected() {
        let sigma = Measure::Cells(CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 2, 1.0).unwrap());
        let pp = ProblemParams::parse(3, "2", "0.5", "1", "3").unwrap();
        assert!(matches!(
            solve_wolff(&sigma, &pp, &SolverOptions::default()),
            Err(Error::TrivialRegime(_))
        ));
    }

    #[test]
    fn kernel_solve_recovers_manufactured_solution() {
        let k = KernelSpec::green_half_space(3).unwrap();
        let rho = CellDensityMeasure::uniform_cube(&[-0.5, -0.5, 0.5], 1.0, 4, 1.0).unwrap();
        let (sigma, ustar) = manufacture_solution(&k, &rho, 0.5, 1e-6).unwrap();
        let s = solve_kernel(&k, &sigma, 0.5, &SolverOptions::default()).unwrap();
        assert!(s.report.converged && s.report.monotone_ok);
        for (a, b) in s.u.values.iter().zip(&ustar.values) {
            assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
        }
    }
}
