//! Lebesgue norms of sampled fields with respect to `dx` and `dσ`, and the
//! membership conditions built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{derive_exponents, to_f64, ProblemParams};
use crate::field::{SampledField, TailModel};
use crate::geometry::{box_ball_volume, unit_ball_volume, BoxGrid, Point};
use crate::kernels::{kernel_potential, KernelGridOperator, KernelSpec, KernelVariant};
use crate::measures::{CellDensityMeasure, Measure};
use crate::potentials::{wolff_potential, GridWolffOperator, QuadratureSpec, WolffParams};
use crate::quadrature::RadialNodes;

/// Where an infinite norm comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Locus {
    /// A singularity at finite distance (infinite node value, atom).
    Head,
    /// Insufficient decay at infinity.
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    #[serde(with = "crate::serde_f64")]
    pub value: f64,
    pub finite: bool,
    pub locus: Option<Locus>,
    pub warning: Option<String>,
    #[serde(with = "crate::serde_f64::vec")]
    pub refinement_history: Vec<f64>,
}

impl NormReport {
    fn finite(value: f64) -> Self {
        Self {
            value,
            finite: true,
            locus: None,
            warning: None,
            refinement_history: Vec::new(),
        }
    }

    fn infinite(locus: Locus) -> Self {
        Self {
            value: f64::INFINITY,
            finite: false,
            locus: Some(locus),
            warning: None,
            refinement_history: Vec::new(),
        }
    }
}

/// `∫_{ℝⁿ \ box} (C(1 + |x − c|)^{−δ})^e dx`, or `None` when divergent.
fn tail_integral(tail: &TailModel, exponent: f64, grid: &BoxGrid) -> Option<f64> {
    let n = grid.dim();
    let nf = n as f64;
    let de = tail.delta * exponent;
    if de <= nf {
        return None;
    }
    if tail.c == 0.0 {
        return Some(0.0);
    }
    let (lo, hi) = grid.bounding_box();
    let c = tail.center.coords();
    let g = |rho: f64| (tail.c * (1.0 + rho).powf(-tail.delta)).powf(exponent);
    let area = nf * unit_ball_volume(n);
    // smallest ball around c that leaves the box, and the one that covers it
    let mut r_in = f64::INFINITY;
    let mut r_out2 = 0.0;
    for i in 0..n {
        r_in = r_in.min((c[i] - lo[i]).max(0.0)).min((hi[i] - c[i]).max(0.0));
        let far = (c[i] - lo[i]).abs().max((hi[i] - c[i]).abs());
        r_out2 += far * far;
    }
    let r_out = r_out2.sqrt();
    let outside = |rho: f64| unit_ball_volume(n) * rho.powi(n as i32) - box_ball_volume(&lo, &hi, c, rho);
    let mut total = 0.0;
    let r_start = if r_in.is_finite() { r_in } else { 0.0 };
    let steps = 256;
    let mut prev = outside(r_start).max(0.0);
    for k in 0..steps {
        let a = r_start + (r_out - r_start) * k as f64 / steps as f64;
        let b = r_start + (r_out - r_start) * (k + 1) as f64 / steps as f64;
        let next = outside(b).max(prev);
        total += g(0.5 * (a + b)) * (next - prev);
        prev = next;
    }
    let far = r_out.max(1.0) * 1e6;
    let nodes = RadialNodes::log_panels(r_out.max(1e-12), far, 8, &[]);
    for (r, w) in nodes.radii.iter().zip(&nodes.weights) {
        total += w * area * r.powi(n as i32) * g(*r);
    }
    total += area * tail.c.powf(exponent) * far.powf(nf - de) / (de - nf);
    Some(total)
}

/// `‖f‖_{L^e(dx)}` for a field sampled at the centres of `grid`, with the
/// field's tail model integrated over the complement of the grid.
pub fn lp_norm_dx(field: &SampledField, exponent: f64, grid: &BoxGrid) -> Result<NormReport> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent {exponent}")));
    }
    field.check_nodes(&grid.centers())?;
    if field.values.iter().any(|v| v.is_infinite()) {
        return Ok(NormReport::infinite(Locus::Head));
    }
    let vol = grid.cell_volume();
    let mut sum = 0.0;
    for v in &field.values {
        if *v > 0.0 {
            sum += vol * v.powf(exponent);
        }
    }
    let mut warning = None;
    match &field.tail {
        Some(t) => match tail_integral(t, exponent, grid) {
            Some(s) => sum += s,
            None => return Ok(NormReport::infinite(Locus::Tail)),
        },
        None => {
            let peak = field.values.iter().cloned().fold(0.0, f64::max);
            let edge = boundary_max(field, grid);
            if peak > 0.0 && edge > 1e-3 * peak {
                warning = Some(format!(
                    "no tail model and the field is not small on the grid boundary (ratio {:.3e})",
                    edge / peak
                ));
            }
        }
    }
    let mut r = NormReport::finite(sum.powf(1.0 / exponent));
    r.warning = warning;
    Ok(r)
}

fn boundary_max(field: &SampledField, grid: &BoxGrid) -> f64 {
    let n = grid.dim();
    let mut idx = vec![0usize; n];
    let mut best: f64 = 0.0;
    for (j, v) in field.values.iter().enumerate() {
        grid.multi_index(j, &mut idx);
        if (0..n).any(|i| idx[i] == 0 || idx[i] + 1 == grid.extents()[i]) {
            best = best.max(*v);
        }
    }
    best
}

/// `‖f‖_{L^e(dσ)} = (Σ f(node)^e σ(node))^{1/e}`.
pub fn lp_norm_dsigma(field: &SampledField, exponent: f64, mu: &Measure) -> Result<NormReport> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent {exponent}")));
    }
    field.check_nodes(&mu.reference_points())?;
    let mut sum = 0.0;
    for (v, m) in field.values.iter().zip(mu.node_masses()) {
        if m == 0.0 {
            continue;
        }
        if v.is_infinite() {
            return Ok(NormReport::infinite(Locus::Head));
        }
        if *v > 0.0 {
            sum += v.powf(exponent) * m;
        }
    }
    Ok(NormReport::finite(sum.powf(1.0 / exponent)))
}

/// Which membership condition to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionKind {
    /// `W_{α,p}σ ∈ L^{(γ+q)(p−1)/(p−1−q)}(dσ)`.
    DsigmaWolff,
    /// `I_{2α}σ ∈ L^{(γ+q)/(1−q)}(dσ)` with `γ` taken at `p = 2`.
    DsigmaRiesz,
    /// `Gσ ∈ L^{(γ+q)/(1−q)}(dσ)` with `γ` taken at `p = 2`, `α = 1`.
    DsigmaGreen { kernel: KernelSpec },
    /// `W_{α,p}σ ∈ L^{r(p−1)/(p−1−q)}(dx)`.
    DxWolff,
    /// `I_{2α}σ ∈ L^{r/(1−q)}(dx)`.
    DxRiesz,
    /// `Gσ ∈ L^{r/(1−q)}(dx)` over the kernel's domain.
    DxGreen { kernel: KernelSpec },
}

impl ConditionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConditionKind::DsigmaWolff => "dsigma-wolff",
            ConditionKind::DsigmaRiesz => "dsigma-riesz",
            ConditionKind::DsigmaGreen { .. } => "dsigma-green",
            ConditionKind::DxWolff => "dx-wolff",
            ConditionKind::DxRiesz => "dx-riesz",
            ConditionKind::DxGreen { .. } => "dx-green",
        }
    }

    fn is_dx(&self) -> bool {
        matches!(
            self,
            ConditionKind::DxWolff | ConditionKind::DxRiesz | ConditionKind::DxGreen { .. }
        )
    }
}

/// Numerical controls for condition integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub quad: QuadratureSpec,
    /// Relative tolerance for kernel near fields.
    pub tol: f64,
    /// Padding of the `dx` grid around the measure's grid, as a multiple of
    /// the grid's largest side.
    pub pad_fraction: f64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            quad: QuadratureSpec::default(),
            tol: 1e-6,
            pad_fraction: 0.5,
        }
    }
}

/// The potential whose integrability a condition tests.
#[derive(Debug, Clone)]
pub enum Potential {
    Wolff(WolffParams),
    Kernel(KernelSpec),
}

impl Potential {
    /// Decay exponent at infinity used by tail models.
    pub fn decay(&self) -> f64 {
        match self {
            Potential::Wolff(wp) => wp.kappa(),
            Potential::Kernel(k) => k.singularity(),
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Potential::Wolff(_) => true,
            Potential::Kernel(k) => k.contains(x),
        }
    }

    /// Pointwise value, with cells integrated by the general-purpose rules.
    pub fn eval(&self, mu: &Measure, x: &Point, quad: &QuadratureSpec, tol: f64) -> Result<f64> {
        match self {
            Potential::Wolff(wp) => Ok(wolff_potential(mu, wp, x, quad)?.value),
            Potential::Kernel(k) => kernel_potential(k, mu, x, tol),
        }
    }

    /// Values at the centres of `grid` for a density on the same grid.
    pub fn on_grid(&self, grid: &BoxGrid, density: &[f64], quad: &QuadratureSpec, tol: f64) -> Result<Vec<f64>> {
        Ok(match self {
            Potential::Wolff(wp) => GridWolffOperator::new(wp, grid, quad)?.apply(density),
            Potential::Kernel(k) => KernelGridOperator::new(k, grid, tol)?.apply(density),
        })
    }
}

/// The potential, exponent and measure kind behind a condition.
pub fn condition_setup(pp: &ProblemParams, which: &ConditionKind) -> Result<(Potential, f64)> {
    let e = derive_exponents(pp)?;
    let q = pp.q_f64();
    let r = pp.r_f64();
    let p2 = |alpha: &crate::exponents::Rational| -> Result<f64> {
        let pp2 = ProblemParams::new(
            pp.n,
            crate::exponents::rational_from_f64(2.0)?,
            pp.q.clone(),
            alpha.clone(),
            pp.r.clone(),
        );
        let e2 = derive_exponents(&pp2)?;
        Ok(to_f64(&e2.solution_sigma_exponent) / (1.0 - q))
    };
    let n = pp.n as usize;
    Ok(match which {
        ConditionKind::DsigmaWolff => (Potential::Wolff(pp.wolff()), to_f64(&e.sigma_norm_exponent)),
        ConditionKind::DxWolff => (Potential::Wolff(pp.wolff()), to_f64(&e.dx_exponent)),
        ConditionKind::DsigmaRiesz => (
            Potential::Kernel(KernelSpec::riesz(n, 2.0 * pp.alpha_f64())?),
            p2(&pp.alpha)?,
        ),
        ConditionKind::DxRiesz => (
            Potential::Kernel(KernelSpec::riesz(n, 2.0 * pp.alpha_f64())?),
            r / (1.0 - q),
        ),
        ConditionKind::DsigmaGreen { kernel } => (
            Potential::Kernel(kernel.clone()),
            p2(&crate::exponents::rational_from_f64(1.0)?)?,
        ),
        ConditionKind::DxGreen { kernel } => (Potential::Kernel(kernel.clone()), r / (1.0 - q)),
    })
}

/// Evaluates a membership condition. `value` is the integral `∫ f^e`, not
/// its `e`-th root.
pub fn condition_integral(
    mu: &Measure,
    pp: &ProblemParams,
    which: &ConditionKind,
    opts: &ConditionOptions,
) -> Result<NormReport> {
    let (pot, exponent) = condition_setup(pp, which)?;
    if let Potential::Kernel(k) = &pot {
        k.check_support(mu)?;
        if !(q_below_one(pp)) {
            return Err(Error::InvalidParameter("kernel conditions need 0 < q < 1".into()));
        }
    }
    if mu.is_zero() {
        return Ok(NormReport::finite(0.0));
    }
    if !which.is_dx() {
        return Ok(match mu {
            Measure::Atomic(_) => NormReport::infinite(Locus::Head),
            Measure::Cells(c) => {
                let values = pot.on_grid(c.grid(), c.density(), &opts.quad, opts.tol)?;
                let field = SampledField::new(mu.reference_points(), values)?;
                let r = lp_norm_dsigma(&field, exponent, mu)?;
                if r.finite {
                    NormReport::finite(r.value.powf(exponent))
                } else {
                    r
                }
            }
        });
    }
    match mu {
        Measure::Atomic(_) => {
            // near an atom the potential behaves like |x − a|^{−d}
            let local = match &pot {
                Potential::Wolff(wp) => wp.kappa(),
                Potential::Kernel(k) => k.singularity(),
            };
            if local * exponent >= mu.dim() as f64 {
                return Ok(NormReport::infinite(Locus::Head));
            }
            Err(Error::InvalidParameter(
                "dx conditions for atomic measures with integrable singularities need a cell measure".into(),
            ))
        }
        Measure::Cells(c) => dx_condition(c, mu, &pot, exponent, opts),
    }
}

fn q_below_one(pp: &ProblemParams) -> bool {
    let q = pp.q_f64();
    q > 0.0 && q < 1.0
}

/// `dx` grid around a cell measure: padded on every side, except that no
/// padding crosses the boundary of a half-space domain.
pub fn dx_grid(c: &CellDensityMeasure, pot: &Potential, pad_fraction: f64) -> (BoxGrid, Vec<usize>) {
    let grid = c.grid();
    let n = grid.dim();
    let h = grid.cell_size();
    let side = grid.extents().iter().copied().max().unwrap_or(1);
    let pad = ((pad_fraction * side as f64).ceil() as usize).max(1);
    let mut below = vec![pad; n];
    let mut above = vec![pad; n];
    if let Potential::Kernel(k) = pot {
        match &k.variant {
            KernelVariant::GreenHalfSpace { .. } => {
                let room = (grid.origin().coords()[n - 1] / h + 1e-9).floor().max(0.0) as usize;
                below[n - 1] = below[n - 1].min(room);
            }
            KernelVariant::GreenBall { radius, center, .. } => {
                // cover the whole ball
                let (lo, hi) = grid.bounding_box();
                for i in 0..n {
                    let need_lo = ((lo[i] - (center.coords()[i] - radius)) / h).ceil().max(0.0) as usize;
                    let need_hi = ((center.coords()[i] + radius - hi[i]) / h).ceil().max(0.0) as usize;
                    below[i] = need_lo;
                    above[i] = need_hi;
                }
            }
            KernelVariant::Riesz { .. } => {}
        }
    }
    (grid.padded(&below, &above), below)
}

fn dx_condition(
    c: &CellDensityMeasure,
    mu: &Measure,
    pot: &Potential,
    exponent: f64,
    opts: &ConditionOptions,
) -> Result<NormReport> {
    let r = potential_lp_dx(c, mu, pot, exponent, opts)?;
    Ok(if r.finite {
        let mut out = NormReport::finite(r.value.powf(exponent));
        out.warning = r.warning;
        out
    } else {
        r
    })
}

/// `‖P ω‖_{L^e(dx)}` for the potential `P` of a cell measure `ω`, sampled on
/// a padded grid with a fitted power-law tail. `mu` must be `ω` itself.
pub fn potential_lp_dx(
    c: &CellDensityMeasure,
    mu: &Measure,
    pot: &Potential,
    exponent: f64,
    opts: &ConditionOptions,
) -> Result<NormReport> {
    let (grid, below) = dx_grid(c, pot, opts.pad_fraction);
    let density = c.embed(&grid, &below);
    let values = pot.on_grid(&grid, &density, &opts.quad, opts.tol)?;
    let mut field = SampledField::new(grid.centers(), values)?;
    let bounded = matches!(pot, Potential::Kernel(KernelSpec { variant: KernelVariant::GreenBall { .. }, .. }));
    if !bounded {
        let center = grid.center();
        let (lo, hi) = grid.bounding_box();
        let half = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(0.0, f64::max);
        field.tail = fit_tail(pot, mu, &center, half, &opts.quad, opts.tol)?;
    }
    lp_norm_dx(&field, exponent, &grid)
}

/// Fits `C` in `C(1 + |x − center|)^{−δ}` on samples along the `2n` axis
/// rays at distances beyond `r0`, skipping points outside the domain.
pub fn fit_tail(
    pot: &Potential,
    mu: &Measure,
    center: &Point,
    r0: f64,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<Option<TailModel>> {
    let n = center.dim();
    let mut pts = Vec::new();
    for axis in 0..n {
        for sign in [-1.0, 1.0] {
            for f in [1.5, 2.0, 3.0, 4.0] {
                let mut x = center.0.clone();
                x[axis] += sign * f * r0;
                if pot.contains(&x) {
                    pts.push(Point(x));
                }
            }
        }
    }
    if pts.is_empty() {
        return Ok(None);
    }
    let values = pts
        .par_iter()
        .map(|x| pot.eval(mu, x, quad, tol))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(Point, f64)> = pts.into_iter().zip(values).collect();
    TailModel::fit(&samples, pot.decay(), center.clone()).map(Some)
}

/// `condition_integral` on the measure refined by 1, 2, 4, … per axis; the
/// report carries the value of every level and the finest value.
pub fn condition_refinement(
    mu: &CellDensityMeasure,
    pp: &ProblemParams,
    which: &ConditionKind,
    opts: &ConditionOptions,
    levels: usize,
) -> Result<NormReport> {
    let mut history = Vec::new();
    let mut last = None;
    for l in 0..levels.max(1) {
        let m = Measure::Cells(mu.refined(1 << l));
        let r = condition_integral(&m, pp, which, opts)?;
        history.push(r.value);
        let stop = !r.finite;
        last = Some(r);
        if stop {
            break;
        }
    }
    let mut r = last.expect("at least one level");
    r.refinement_history = history;
    Ok(r)
}

/// Relative change between the two finest levels of a refinement history.
pub fn refinement_drift(history: &[f64]) -> Option<f64> {
    match history {
        [.., a, b] if a.is_finite() && b.is_finite() && *b != 0.0 => Some(((b - a) / b).abs()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomicMeasure;

    #[test]
    fn zero_field_has_zero_norm() {
        let grid = BoxGrid::cube(&[0.0; 3], 1.0, 4).unwrap();
        let f = SampledField::constant(grid.centers(), 0.0).unwrap();
        let r = lp_norm_dx(&f, 2.0, &grid).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.finite);
    }

    #[test]
    fn tail_threshold() {
        let grid = BoxGrid::cube(&[-2.0; 3], 4.0, 16).unwrap();
        let c = Point::origin(3);
        let values = grid
            .centers()
            .iter()
            .map(|x| (1.0 + x.norm()).powi(-2))
            .collect();
        let tail = TailModel::new(1.0, 2.0, c).unwrap();
        let f = SampledField::new(grid.centers(), values).unwrap().with_tail(tail);
        assert!(lp_norm_dx(&f, 2.0, &grid).unwrap().finite);
        let r = lp_norm_dx(&f, 1.4, &grid).unwrap();
        assert!(!r.finite);
        assert_eq!(r.locus, Some(Locus::Tail));
    }

    #[test]
    fn tail_integral_matches_radial_integral() {
        // (1 + |x|)^{-4} squared over ℝ³ is 4π ∫ r² (1 + r)^{-8} dr = 4π/105
        let grid = BoxGrid::cube(&[-1.0; 3], 2.0, 40).unwrap();
        let values = grid
            .centers()
            .iter()
            .map(|x| (1.0 + x.norm()).powi(-4))
            .collect();
        let tail = TailModel::new(1.0, 4.0, Point::origin(3)).unwrap();
        let f = SampledField::new(grid.centers(), values).unwrap().with_tail(tail);
        let v = lp_norm_dx(&f, 2.0, &grid).unwrap().value.powi(2);
        let exact = 4.0 * std::f64::consts::PI / 105.0;
        assert!((v - exact).abs() < 2e-3 * exact, "{v} vs {exact}");
    }

    #[test]
    fn infinite_node_is_head_divergence() {
        let grid = BoxGrid::cube(&[-0.5; 3], 1.0, 1).unwrap();
        let f = SampledField::new(grid.centers(), vec![f64::INFINITY]).unwrap();
        let r = lp_norm_dx(&f, 12.0, &grid).unwrap();
        assert_eq!(r.locus, Some(Locus::Head));
    }

    #[test]
    fn dsigma_norm_examples() {
        let mu: Measure = AtomicMeasure::from_pairs(vec![(vec![0.0, 0.0], 2.0), (vec![1.0, 0.0], 6.0)])
            .unwrap()
            .into();
        let ones = SampledField::constant(mu.reference_points(), 1.0).unwrap();
        let r = lp_norm_dsigma(&ones, 3.0, &mu).unwrap();
        assert!((r.value - 2.0).abs() < 1e-15);
        let inf = SampledField::new(mu.reference_points(), vec![f64::INFINITY, 1.0]).unwrap();
        assert!(!lp_norm_dsigma(&inf, 3.0, &mu).unwrap().finite);
    }

    #[test]
    fn atomic_sigma_condition_is_infinite() {
        let mu: Measure = AtomicMeasure::from_pairs(vec![(vec![0.0; 3], 1.0)]).unwrap().into();
        let pp = ProblemParams::parse(3, "2", "0.5", "1", "6").unwrap();
        let r = condition_integral(&mu, &pp, &ConditionKind::DsigmaWolff, &ConditionOptions::default()).unwrap();
        assert!(!r.finite);
        assert_eq!(r.locus, Some(Locus::Head));
        let zero = Measure::Atomic(AtomicMeasure::empty(3));
        let r = condition_integral(&zero, &pp, &ConditionKind::DsigmaWolff, &ConditionOptions::default()).unwrap();
        assert!(r.finite && r.value == 0.0);
    }
}
