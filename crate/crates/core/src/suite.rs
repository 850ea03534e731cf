//! Seeded standard scenarios for every check in [`crate::verify`]. Each
//! check draws from its own ChaCha stream, so a check's report does not
//! depend on which other checks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::field::SampledField;
use crate::geometry::{BoxGrid, Point};
use crate::kernels::KernelSpec;
use crate::measures::{AtomicMeasure, CellDensityMeasure, Measure};
use crate::potentials::WolffParams;
use crate::solver::{manufacture_solution, solve_kernel, solve_wolff, SolverOptions, Target};
use crate::verify::*;

pub const CHECKS: [&str; 8] = [
    "wolff-quadrature",
    "fubini",
    "iterated",
    "wmp",
    "lower-bound",
    "maximal",
    "domination",
    "weighted-norm",
];

/// Exponents `t` of the iterated inequalities.
pub const ITERATED_T: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Evaluation points per check.
    pub points: usize,
    /// Random test functions for the maximal and weighted-norm checks.
    pub trials: usize,
    /// Atoms (or supported cells) per random measure.
    pub atoms: usize,
    /// Random measures in the WMP check.
    pub measures: usize,
    /// Cells per side of the box scenarios.
    pub cells: usize,
    /// Problem used by the Wolff checks.
    pub params: ProblemParams,
    pub options: CheckOptions,
}

impl SuiteConfig {
    pub fn new(seed: u64, params: ProblemParams) -> Self {
        Self {
            seed,
            points: 1000,
            trials: 50,
            atoms: 20,
            measures: 20,
            cells: 8,
            params,
            options: CheckOptions::default(),
        }
    }

    fn rng(&self, check: &str) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        let stream = CHECKS.iter().position(|c| *c == check).unwrap_or(CHECKS.len());
        r.set_stream(stream as u64);
        r
    }
}

/// Runs one named check (or `"all"`) and returns its reports in a fixed
/// order.
pub fn run(check: &str, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    if check == "all" {
        let mut out = Vec::new();
        for c in CHECKS {
            out.extend(run(c, cfg)?);
        }
        return Ok(out);
    }
    let mut rng = cfg.rng(check);
    let reports = match check {
        "wolff-quadrature" => vec![wolff_quadrature(&mut rng, cfg)?],
        "fubini" => vec![fubini(&mut rng, cfg)?],
        "iterated" => iterated(&mut rng, cfg)?,
        "wmp" => wmp(&mut rng, cfg)?,
        "lower-bound" => lower_bound(cfg)?,
        "maximal" => maximal(&mut rng, cfg)?,
        "domination" => domination(&mut rng, cfg)?,
        "weighted-norm" => {
            let sigma = unit_box(cfg.params.n as usize, cfg.cells)?;
            check_weighted_norm(&sigma, &cfg.params, cfg.trials, cfg.seed, &cfg.options)?
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown check {other:?}; expected one of {} or all",
                CHECKS.join(", ")
            )))
        }
    };
    Ok(reports.into_iter().map(|r| r.with_seed(cfg.seed)).collect())
}

fn unit_box(n: usize, cells: usize) -> Result<Measure> {
    Ok(Measure::Cells(CellDensityMeasure::uniform_cube(&vec![0.0; n], 1.0, cells, 1.0)?))
}

/// The pairs `(n, α, p)` of the quadrature check, skipping `αp ≥ n`.
pub fn quadrature_cases() -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for n in [2, 3, 4] {
        for (alpha, p) in [(1.0, 2.0), (1.0, 1.5), (0.5, 3.0)] {
            if alpha * p < n as f64 {
                out.push((n, alpha, p));
            }
        }
    }
    out
}

fn wolff_quadrature(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<CheckReport> {
    let combos = quadrature_cases();
    let mut cases = Vec::with_capacity(cfg.points);
    for i in 0..cfg.points {
        let (n, alpha, p) = combos[i % combos.len()];
        let m = random_atomic(rng, n, 1 + i % cfg.atoms.max(1), 0.0, 1.0)?;
        let x = random_point(rng, n, -1.0, 2.0);
        cases.push((m, WolffParams::new(n, alpha, p)?, x));
    }
    check_wolff_quadrature(&cases, &cfg.options.quad, 1e-6)
}

fn fubini(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<CheckReport> {
    let combos: Vec<(usize, f64)> = [(2, 0.5), (3, 0.5), (3, 1.0), (4, 0.5), (4, 1.0), (4, 1.5)].to_vec();
    let mut cases = Vec::with_capacity(cfg.points);
    for i in 0..cfg.points {
        let (n, alpha) = combos[i % combos.len()];
        let m = random_atomic(rng, n, cfg.atoms.max(1), 0.0, 1.0)?;
        cases.push((m, alpha, random_point(rng, n, -1.0, 2.0)));
    }
    check_fubini(&cases, 1e-10)
}

/// `count` distinct cells of `grid` with density uniform in `(0, 1]`.
pub fn random_sparse_cells(rng: &mut ChaCha8Rng, grid: &BoxGrid, count: usize) -> Result<CellDensityMeasure> {
    use rand::seq::index::sample;
    use rand::Rng;
    let total = grid.cell_count();
    let mut d = vec![0.0; total];
    for i in sample(rng, total, count.min(total)).into_vec() {
        d[i] = 1.0 - rng.random::<f64>();
    }
    CellDensityMeasure::on_grid(grid.clone(), d)
}

fn iterated(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let riesz = IteratedTarget::Kernel(KernelSpec::riesz(3, 2.0)?);
    let atomic = Measure::Atomic(random_atomic(rng, 3, cfg.atoms, 0.0, 1.0)?);
    let grid = BoxGrid::cube(&[0.0; 3], 1.0, 6)?;
    let cells = Measure::Cells(random_sparse_cells(rng, &grid, cfg.atoms)?);
    let points = random_points(rng, 3, cfg.points, -0.5, 1.5, |_| true);
    let n = cfg.params.n as usize;
    let wolff = IteratedTarget::Wolff(cfg.params.wolff());
    let wgrid = BoxGrid::cube(&vec![0.0; n], 1.0, 6)?;
    let wcells = Measure::Cells(random_sparse_cells(rng, &wgrid, cfg.atoms)?);
    let wpoints = random_points(rng, n, cfg.points.min(200), -0.5, 1.5, |_| true);
    let mut out = Vec::new();
    for t in ITERATED_T {
        out.push(check_iterated(&riesz, &atomic, t, &points, &cfg.options)?.with_note(
            "on atoms the inner potential is infinite at the atoms, so t ≠ 1 holds trivially",
        ));
        out.push(check_iterated(&riesz, &cells, t, &points, &cfg.options)?);
        out.push(check_iterated(&wolff, &wcells, t, &wpoints, &cfg.options)?);
    }
    Ok(out)
}

fn in_unit_ball(x: &[f64]) -> bool {
    x.iter().map(|v| v * v).sum::<f64>() <= 1.0
}

fn wmp(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let ball = KernelSpec::green_ball(3, 1.0, Point::origin(3))?;
    let riesz = KernelSpec::riesz(3, 2.0)?;
    let grid = BoxGrid::cube(&[-0.5; 3], 1.0, 6)?;
    let ball_points = random_points(rng, 3, cfg.points, -1.0, 1.0, in_unit_ball);
    let box_points = random_points(rng, 3, cfg.points, -1.5, 1.5, |_| true);
    let mut out = Vec::new();
    for (k, pts) in [(ball, &ball_points), (riesz, &box_points)] {
        let mut merged: Option<CheckReport> = None;
        for _ in 0..cfg.measures.max(1) {
            let mu = Measure::Cells(random_sparse_cells(rng, &grid, cfg.atoms)?);
            let rep = check_wmp(&WmpTarget::Kernel(k.clone()), &mu, pts, &cfg.options)?;
            merged = Some(match merged {
                None => rep,
                Some(m) => m.merge(rep),
            });
        }
        out.extend(merged);
    }
    let n = cfg.params.n as usize;
    let wgrid = BoxGrid::cube(&vec![-0.5; n], 1.0, 6)?;
    let mu = Measure::Cells(random_sparse_cells(rng, &wgrid, cfg.atoms)?);
    let pts = random_points(rng, n, cfg.points.min(200), -1.5, 1.5, |_| true);
    out.push(check_wmp(&WmpTarget::Wolff(cfg.params.wolff()), &mu, &pts, &cfg.options)?);
    Ok(out)
}

fn lower_bound(cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let k = KernelSpec::green_half_space(3)?;
    let q = 0.5;
    let rho = CellDensityMeasure::uniform_cube(&[-0.5, -0.5, 0.5], 1.0, cfg.cells, 1.0)?;
    let (sigma, _) = manufacture_solution(&k, &rho, q, cfg.options.tol)?;
    let sol = solve_kernel(&k, &sigma, q, &SolverOptions::default())?;
    let kernel = check_lower_bound(&sol.u, &sigma, &Target::Kernel { kernel: k, q }, &cfg.options)?;
    let sigma = unit_box(cfg.params.n as usize, cfg.cells)?;
    let sol = solve_wolff(&sigma, &cfg.params, &SolverOptions::default())?;
    let wolff = check_lower_bound(&sol.u, &sigma, &Target::Wolff(cfg.params.clone()), &cfg.options)?;
    Ok(vec![kernel, wolff])
}

fn maximal(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let n = cfg.params.n as usize;
    let wp = cfg.params.wolff();
    let sigma = Measure::Atomic(random_atomic(rng, n, cfg.atoms, 0.0, 1.0)?);
    let points = random_points(rng, n, cfg.points, -0.5, 1.5, |_| true);
    let one = SampledField::constant(sigma.reference_points(), 1.0)?;
    let constant = check_maximal_domination(&sigma, &one, &wp, &points, &cfg.options)?;
    let mut merged: Option<CheckReport> = None;
    for _ in 0..cfg.trials {
        let f = random_test_function(rng, &sigma, 1.0)?;
        let rep = check_maximal_domination(&sigma, &f, &wp, &points, &cfg.options)?;
        merged = Some(match merged {
            None => rep,
            Some(m) => m.merge(rep),
        });
    }
    let mut out = vec![CheckReport {
        name: "maximal-domination/atomic/f=1".into(),
        ..constant
    }];
    out.extend(merged);
    Ok(out)
}

fn domination(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let half = KernelSpec::green_half_space(3)?;
    let ball = KernelSpec::green_ball(3, 1.0, Point::origin(3))?;
    // atoms and cells inside each domain
    let half_atoms = shift(random_atomic(rng, 3, cfg.atoms, 0.0, 1.0)?, [-0.5, -0.5, 0.25]);
    let half_cells = Measure::Cells(random_sparse_cells(rng, &BoxGrid::cube(&[-0.5, -0.5, 0.25], 1.0, 6)?, cfg.atoms)?);
    let half_points = random_points(rng, 3, cfg.points, -1.5, 1.5, |x| x[2] >= 0.0);
    let ball_atoms = shift(random_atomic(rng, 3, cfg.atoms, 0.0, 1.0)?, [-0.5; 3]);
    let ball_cells = Measure::Cells(random_sparse_cells(rng, &BoxGrid::cube(&[-0.5; 3], 1.0, 6)?, cfg.atoms)?);
    let ball_points = random_points(rng, 3, cfg.points, -1.0, 1.0, in_unit_ball);
    for (k, atoms, cells, pts) in [
        (half, half_atoms, half_cells, &half_points),
        (ball, ball_atoms, ball_cells, &ball_points),
    ] {
        let pair = DominationPair::GreenVsRiesz(k);
        let a = check_domination(&pair, &Measure::Atomic(atoms), pts, &cfg.options)?;
        let c = check_domination(&pair, &cells, pts, &cfg.options)?;
        out.push(a.merge(c));
    }
    let wp = WolffParams::new(3, 1.0, 1.5)?;
    let sigma = unit_box(3, cfg.cells)?;
    let grid = BoxGrid::cube(&[-1.0; 3], 3.0, 3 * cfg.cells)?;
    let points = random_points(rng, 3, cfg.points, -1.0, 2.0, |_| true);
    out.push(check_domination(&DominationPair::WolffVsHm { wp, grid }, &sigma, &points, &cfg.options)?);
    Ok(out)
}

fn shift(m: AtomicMeasure, by: [f64; 3]) -> AtomicMeasure {
    let pairs = m
        .atoms()
        .iter()
        .map(|a| (a.at.0.iter().zip(&by).map(|(x, b)| x + b).collect(), a.mass))
        .collect();
    AtomicMeasure::from_pairs(pairs).expect("translation keeps atoms valid")
}
