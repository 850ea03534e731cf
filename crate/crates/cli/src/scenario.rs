//! Scenario files: the raw TOML shape, and its resolution into concrete
//! library inputs with every default filled in.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wolffkit::exponents::{format_rational, parse_rational, rational_from_f64};
use wolffkit::potentials::QuadratureSpec;
use wolffkit::{AtomicMeasure, CellDensityMeasure, KernelSpec, Measure, Point, ProblemParams, SolverOptions};

use crate::CliError;

/// A number written either as a TOML number or as a string such as `"3/2"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    fn rational(&self, field: &str) -> Result<wolffkit::exponents::Rational, CliError> {
        let r = match self {
            Num::Int(i) => parse_rational(&i.to_string()),
            Num::Float(x) => rational_from_f64(*x),
            Num::Text(s) => parse_rational(s),
        };
        r.map_err(|e| CliError::Config(format!("params.{field}: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub name: String,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub params: RawParams,
    pub measure: Option<RawMeasure>,
    pub kernel: Option<RawKernel>,
    pub solver: Option<RawSolver>,
    pub quadrature: Option<RawQuadrature>,
    pub potential: Option<RawPotential>,
    pub verify: Option<RawVerify>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub n: u32,
    pub p: Num,
    pub q: Num,
    pub alpha: Num,
    pub r: Num,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RawMeasure {
    UniformBox {
        lo: Vec<f64>,
        side: f64,
        cells: usize,
        density: Option<f64>,
    },
    Cells {
        origin: Vec<f64>,
        cell_size: f64,
        extents: Vec<usize>,
        density: Vec<f64>,
    },
    Atoms {
        atoms: Vec<RawAtom>,
    },
    RandomAtoms {
        count: usize,
        lo: Option<f64>,
        hi: Option<f64>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAtom {
    pub at: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RawKernel {
    Riesz { two_alpha: Option<f64> },
    GreenBall { radius: Option<f64>, center: Option<Vec<f64>> },
    GreenHalfSpace {},
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub c0: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_halvings: Option<usize>,
    pub kernel_tol: Option<f64>,
    pub dx_norm: Option<bool>,
    /// CSV of a reference solution on the same nodes.
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQuadrature {
    pub nodes_per_decade: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPotential {
    /// `wolff` (default) or `kernel`.
    pub target: Option<String>,
    pub points: Option<Vec<Vec<f64>>>,
    pub grid: Option<RawGrid>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub lo: Vec<f64>,
    pub side: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVerify {
    pub check: Option<String>,
    pub points: Option<usize>,
    pub trials: Option<usize>,
    pub atoms: Option<usize>,
    pub measures: Option<usize>,
    pub cells: Option<usize>,
}

/// Where the potential is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PointSet {
    /// Reference points of the measure.
    Nodes,
    Grid(RawGridEcho),
    List { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawGridEcho {
    pub lo: Vec<f64>,
    pub side: f64,
    pub cells: usize,
}

/// The fully resolved scenario. Its serialization is the config echo in
/// every report.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub params: ProblemParams,
    pub measure: Option<MeasureEcho>,
    pub kernel: Option<KernelSpec>,
    pub solver: SolverOptions,
    pub reference: Option<PathBuf>,
    pub quadrature: QuadratureSpec,
    pub potential_target: String,
    pub points: PointSet,
    pub verify: VerifyEcho,
    #[serde(skip)]
    pub output: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    raw_measure: Option<RawMeasure>,
}

/// The measure section with defaults filled in. Explicit density and atom
/// lists are summarized rather than repeated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureEcho {
    UniformBox { lo: Vec<f64>, side: f64, cells: usize, density: f64 },
    Cells { origin: Vec<f64>, cell_size: f64, extents: Vec<usize>, cell_count: usize },
    Atoms { count: usize },
    RandomAtoms { count: usize, lo: f64, hi: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyEcho {
    pub check: String,
    pub points: usize,
    pub trials: usize,
    pub atoms: usize,
    pub measures: usize,
    pub cells: usize,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let raw: RawScenario = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::resolve(raw, &base)
    }

    pub fn resolve(raw: RawScenario, base_dir: &Path) -> Result<Self, CliError> {
        let p = &raw.params;
        let params = ProblemParams::new(
            p.n,
            p.p.rational("p")?,
            p.q.rational("q")?,
            p.alpha.rational("alpha")?,
            p.r.rational("r")?,
        );
        let n = p.n as usize;
        let rq = raw.quadrature.clone().unwrap_or_default();
        let dq = QuadratureSpec::default();
        let quadrature = QuadratureSpec {
            r_min: rq.r_min,
            r_max: rq.r_max,
            nodes_per_decade: rq.nodes_per_decade.unwrap_or(dq.nodes_per_decade),
        };
        quadrature.validate()?;
        let rs = raw.solver.clone().unwrap_or_default();
        let ds = SolverOptions::default();
        let solver = SolverOptions {
            c0: rs.c0.unwrap_or(ds.c0),
            tol: rs.tol.unwrap_or(ds.tol),
            max_iter: rs.max_iter.unwrap_or(ds.max_iter),
            max_halvings: rs.max_halvings.unwrap_or(ds.max_halvings),
            quad: quadrature,
            kernel_tol: rs.kernel_tol.unwrap_or(ds.kernel_tol),
            dx_norm: rs.dx_norm.unwrap_or(ds.dx_norm),
        };
        let kernel = match &raw.kernel {
            None => None,
            Some(RawKernel::Riesz { two_alpha }) => Some(KernelSpec::riesz(
                n,
                two_alpha.unwrap_or(2.0 * params.alpha_f64()),
            )?),
            Some(RawKernel::GreenBall { radius, center }) => {
                let c = match center {
                    Some(c) => Point::new(c.clone())?,
                    None => Point::origin(n),
                };
                Some(KernelSpec::green_ball(n, radius.unwrap_or(1.0), c)?)
            }
            Some(RawKernel::GreenHalfSpace {}) => Some(KernelSpec::green_half_space(n)?),
        };
        if let Some(k) = &kernel {
            if k.dim() != n {
                return Err(CliError::Config(format!("kernel dimension {} differs from n = {n}", k.dim())));
            }
        }
        let measure = raw.measure.as_ref().map(|m| echo_measure(m));
        let rp = raw.potential.clone().unwrap_or_default();
        let potential_target = rp.target.unwrap_or_else(|| "wolff".into());
        if !matches!(potential_target.as_str(), "wolff" | "kernel") {
            return Err(CliError::Config(format!(
                "potential.target = {potential_target:?}; expected \"wolff\" or \"kernel\""
            )));
        }
        let points = match (rp.points, rp.grid) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("potential: give either points or grid, not both".into()))
            }
            (Some(points), None) => PointSet::List { points },
            (None, Some(g)) => PointSet::Grid(RawGridEcho { lo: g.lo, side: g.side, cells: g.cells }),
            (None, None) => PointSet::Nodes,
        };
        let rv = raw.verify.clone().unwrap_or_default();
        let verify = VerifyEcho {
            check: rv.check.unwrap_or_else(|| "all".into()),
            points: rv.points.unwrap_or(1000),
            trials: rv.trials.unwrap_or(50),
            atoms: rv.atoms.unwrap_or(20),
            measures: rv.measures.unwrap_or(20),
            cells: rv.cells.unwrap_or(8),
        };
        let output = match &raw.output {
            Some(o) => base_dir.join(o),
            None => base_dir.join("out").join(&raw.name),
        };
        Ok(Self {
            name: raw.name,
            seed: raw.seed.unwrap_or(0),
            params,
            measure,
            kernel,
            solver,
            reference: rs.reference,
            quadrature,
            potential_target,
            points,
            verify,
            output,
            base_dir: base_dir.to_path_buf(),
            raw_measure: raw.measure,
        })
    }

    pub fn n(&self) -> usize {
        self.params.n as usize
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Builds the measure. Random atoms are drawn from the scenario seed.
    pub fn build_measure(&self) -> Result<Measure, CliError> {
        let raw = self
            .raw_measure
            .as_ref()
            .ok_or_else(|| CliError::Config("this subcommand needs a [measure] section".into()))?;
        let n = self.n();
        let m = match raw {
            RawMeasure::UniformBox { lo, side, cells, density } => {
                Measure::Cells(CellDensityMeasure::uniform_cube(lo, *side, *cells, density.unwrap_or(1.0))?)
            }
            RawMeasure::Cells { origin, cell_size, extents, density } => Measure::Cells(CellDensityMeasure::new(
                Point::new(origin.clone())?,
                *cell_size,
                extents.clone(),
                density.clone(),
            )?),
            RawMeasure::Atoms { atoms } => Measure::Atomic(AtomicMeasure::from_pairs(
                atoms.iter().map(|a| (a.at.clone(), a.mass)).collect(),
            )?),
            RawMeasure::RandomAtoms { count, lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Measure::Atomic(wolffkit::verify::random_atomic(
                    &mut rng,
                    n,
                    *count,
                    lo.unwrap_or(0.0),
                    hi.unwrap_or(1.0),
                )?)
            }
            RawMeasure::File { path } => {
                let full = self.path(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", full.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?
            }
        };
        if m.dim() != n {
            return Err(CliError::Config(format!("measure dimension {} differs from n = {n}", m.dim())));
        }
        Ok(m)
    }

    pub fn kernel(&self) -> Result<&KernelSpec, CliError> {
        self.kernel
            .as_ref()
            .ok_or_else(|| CliError::Config("this subcommand needs a [kernel] section".into()))
    }
}

fn echo_measure(m: &RawMeasure) -> MeasureEcho {
    match m {
        RawMeasure::UniformBox { lo, side, cells, density } => MeasureEcho::UniformBox {
            lo: lo.clone(),
            side: *side,
            cells: *cells,
            density: density.unwrap_or(1.0),
        },
        RawMeasure::Cells { origin, cell_size, extents, density } => MeasureEcho::Cells {
            origin: origin.clone(),
            cell_size: *cell_size,
            extents: extents.clone(),
            cell_count: density.len(),
        },
        RawMeasure::Atoms { atoms } => MeasureEcho::Atoms { count: atoms.len() },
        RawMeasure::RandomAtoms { count, lo, hi } => MeasureEcho::RandomAtoms {
            count: *count,
            lo: lo.unwrap_or(0.0),
            hi: hi.unwrap_or(1.0),
        },
        RawMeasure::File { path } => MeasureEcho::File { path: path.clone() },
    }
}

/// The TOML of a scenario that solves the manufactured problem.
pub fn manufactured_scenario(s: &Scenario, kernel: &RawKernel) -> Result<String, CliError> {
    let pp = &s.params;
    let raw = RawScenario {
        name: format!("{}-solve", s.name),
        seed: Some(s.seed),
        output: Some(PathBuf::from("solve")),
        params: RawParams {
            n: pp.n,
            p: Num::Text(format_rational(&pp.p)),
            q: Num::Text(format_rational(&pp.q)),
            alpha: Num::Text(format_rational(&pp.alpha)),
            r: Num::Text(format_rational(&pp.r)),
        },
        measure: Some(RawMeasure::File { path: "sigma.json".into() }),
        kernel: Some(kernel.clone()),
        solver: Some(RawSolver {
            c0: Some(s.solver.c0),
            tol: Some(s.solver.tol),
            max_iter: Some(s.solver.max_iter),
            max_halvings: Some(s.solver.max_halvings),
            kernel_tol: Some(s.solver.kernel_tol),
            dx_norm: Some(s.solver.dx_norm),
            reference: Some("ustar.csv".into()),
        }),
        quadrature: Some(RawQuadrature {
            nodes_per_decade: Some(s.quadrature.nodes_per_decade),
            r_min: s.quadrature.r_min,
            r_max: s.quadrature.r_max,
        }),
        potential: None,
        verify: None,
    };
    toml::to_string(&raw).map_err(|e| CliError::Config(e.to_string()))
}

/// Raw kernel section equivalent to a resolved kernel.
pub fn raw_kernel(k: &KernelSpec) -> RawKernel {
    use wolffkit::KernelVariant as V;
    match &k.variant {
        V::Riesz { two_alpha, .. } => RawKernel::Riesz { two_alpha: Some(*two_alpha) },
        V::GreenBall { radius, center, .. } => RawKernel::GreenBall {
            radius: Some(*radius),
            center: Some(center.0.clone()),
        },
        V::GreenHalfSpace { .. } => RawKernel::GreenHalfSpace {},
    }
}
