//! Wolff potentials, the Havin–Maz'ya potential and the centred maximal
//! function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::geometry::{box_ball_volume, box_max_dist, box_min_dist, dist2, unit_ball_volume, BoxGrid, Point};
use crate::kernels::{kernel_cell_integral, kernel_potential, KernelSpec, NEAR_FIELD_DIAMETERS};
use crate::measures::{AtomicMeasure, CellDensityMeasure, Measure, PARTIAL_VOLUME_REL_ERR};
use crate::quadrature::RadialNodes;

/// Scale of the smallest radius resolved by quadrature, relative to the
/// measure's feature scale.
pub const R_MIN_FACTOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WolffParams {
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
}

impl WolffParams {
    pub fn new(n: usize, alpha: f64, p: f64) -> Result<Self> {
        let wp = Self { n, alpha, p };
        wp.validate()?;
        Ok(wp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {} must exceed 1", self.p)));
        }
        if !(self.alpha > 0.0 && self.alpha * self.p < self.n as f64) {
            return Err(Error::InvalidParameter(format!(
                "Wolff potential needs 0 < alpha*p < n, got alpha = {}, p = {}, n = {}",
                self.alpha, self.p, self.n
            )));
        }
        Ok(())
    }

    /// Decay exponent `(n − αp)/(p − 1)`.
    pub fn kappa(&self) -> f64 {
        (self.n as f64 - self.alpha * self.p) / (self.p - 1.0)
    }

    fn power(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    #[inline]
    fn integrand(&self, mass: f64, r: f64) -> f64 {
        if mass <= 0.0 {
            return 0.0;
        }
        let base = mass * r.powf(self.alpha * self.p - self.n as f64);
        if self.p == 2.0 {
            base
        } else {
            base.powf(self.power())
        }
    }

    /// `∫_R^∞` with constant mass `m`.
    fn tail(&self, m: f64, r: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        m.powf(self.power()) * r.powf(-self.kappa()) / self.kappa()
    }

    /// `∫_0^R` with mass `m (t/R)^n`.
    fn head(&self, m: f64, r: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        m.powf(self.power()) * r.powf(-self.kappa()) * (self.p - 1.0) / (self.alpha * self.p)
    }
}

/// Radial quadrature controls. Unset radii are derived from the measure and
/// the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub nodes_per_decade: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            r_min: None,
            r_max: None,
            nodes_per_decade: 32,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_decade < 8 {
            return Err(Error::InvalidParameter(format!(
                "nodes_per_decade = {} must be at least 8",
                self.nodes_per_decade
            )));
        }
        for r in [self.r_min, self.r_max].into_iter().flatten() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("quadrature radius {r}")));
            }
        }
        if let (Some(a), Some(b)) = (self.r_min, self.r_max) {
            if a >= b {
                return Err(Error::InvalidParameter(format!("r_min = {a} must be below r_max = {b}")));
            }
        }
        Ok(())
    }

    /// Four-point Gauss panels per decade.
    pub fn panels_per_decade(&self) -> usize {
        self.nodes_per_decade.div_ceil(4)
    }

    /// Panels per decade for an integrand decaying like `r^{-κ}`: at least
    /// the configured count, and enough that `κ` times the panel width in
    /// `ln r` stays below 1.5.
    pub fn panels_for(&self, wp: &WolffParams) -> usize {
        let needed = (wp.kappa() * std::f64::consts::LN_10 / 1.5).ceil() as usize;
        self.panels_per_decade().max(needed)
    }
}

/// A computed value with a bound on the error of its ball masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "crate::serde_f64")]
    pub value: f64,
    #[serde(with = "crate::serde_f64")]
    pub error_bound: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error_bound: 0.0,
        }
    }
}

fn sorted_distances(mu: &AtomicMeasure, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .map(|a| (dist2(a.at.coords(), x).sqrt(), a.mass))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Closed form of the Wolff potential of a finite sum of point masses.
pub fn wolff_atomic_exact(mu: &AtomicMeasure, wp: &WolffParams, x: &Point) -> Result<f64> {
    wp.validate()?;
    x.check_dim(mu.dim())?;
    let (d, m) = sorted_distances(mu, x.coords());
    if d.is_empty() {
        return Ok(0.0);
    }
    if d[0] == 0.0 {
        return Ok(f64::INFINITY);
    }
    let kappa = wp.kappa();
    let mut s = 0.0;
    let mut total = 0.0;
    for i in 0..d.len() {
        s += m[i];
        let next = if i + 1 < d.len() { d[i + 1].powf(-kappa) } else { 0.0 };
        let step = d[i].powf(-kappa) - next;
        if step > 0.0 {
            total += s.powf(wp.power()) * step;
        }
    }
    Ok(total / kappa)
}

/// `σ(B(x, r_k))` for sorted radii, cell measures. Also returns the mass of
/// cells cut by some sphere, for error bounds.
fn cell_masses(m: &CellDensityMeasure, density: &[f64], x: &[f64], radii: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    let vol = m.cell_volume();
    let k_count = radii.len();
    let mut diff = vec![0.0; k_count + 1];
    let mut mass = vec![0.0; k_count];
    let mut cut = vec![0.0; k_count];
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for (j, &rho) in density.iter().enumerate() {
        if rho == 0.0 {
            continue;
        }
        m.cell_bounds_into(j, &mut lo, &mut hi);
        let dmin = box_min_dist(&lo, &hi, x);
        let dmax = box_max_dist(&lo, &hi, x);
        let k_start = radii.partition_point(|&r| r <= dmin);
        let k_full = radii.partition_point(|&r| r < dmax);
        diff[k_full] += rho * vol;
        for k in k_start..k_full {
            mass[k] += rho * box_ball_volume(&lo, &hi, x, radii[k]);
            cut[k] += rho * vol;
        }
    }
    let mut run = 0.0;
    for k in 0..k_count {
        run += diff[k];
        mass[k] += run;
    }
    (mass, cut)
}

fn support_range(mu: &Measure, x: &[f64]) -> (f64, f64) {
    (mu.dist_to_support(x), mu.max_dist_to_support(x))
}

/// Wolff potential by composite Gauss quadrature in `ln r` between the
/// nearest and farthest support distances, with the tail in closed form and
/// the head from the local density near `x`.
pub fn wolff_potential(mu: &Measure, wp: &WolffParams, x: &Point, quad: &QuadratureSpec) -> Result<Estimate> {
    wp.validate()?;
    quad.validate()?;
    x.check_dim(mu.dim())?;
    if wp.n != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: wp.n,
        });
    }
    match mu {
        Measure::Atomic(a) => Ok(wolff_atomic_quadrature(a, wp, x.coords(), quad)),
        Measure::Cells(c) => Ok(wolff_cells(c, c.density(), mu, wp, x.coords(), quad)),
    }
}

fn wolff_atomic_quadrature(mu: &AtomicMeasure, wp: &WolffParams, x: &[f64], quad: &QuadratureSpec) -> Estimate {
    let (d, m) = sorted_distances(mu, x);
    if d.is_empty() {
        return Estimate::exact(0.0);
    }
    if d[0] == 0.0 {
        return Estimate::exact(f64::INFINITY);
    }
    let mut cum = m.clone();
    for i in 1..cum.len() {
        cum[i] += cum[i - 1];
    }
    let total = *cum.last().unwrap();
    let mass_at = |r: f64| {
        let k = d.partition_point(|&t| t < r);
        if k == 0 {
            0.0
        } else {
            cum[k - 1]
        }
    };
    let lo = quad.r_min.unwrap_or(d[0]);
    let hi = quad.r_max.unwrap_or(*d.last().unwrap()).max(lo);
    let nodes = RadialNodes::log_panels(lo, hi, quad.panels_for(wp), &d);
    let mut value = wp.head(mass_at(lo), lo) + wp.tail(total, hi);
    for (r, w) in nodes.radii.iter().zip(&nodes.weights) {
        value += w * wp.integrand(mass_at(*r), *r);
    }
    Estimate::exact(value)
}

fn wolff_cells(
    m: &CellDensityMeasure,
    density: &[f64],
    mu: &Measure,
    wp: &WolffParams,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Estimate {
    let (dmin, dmax) = support_range(mu, x);
    if !dmin.is_finite() {
        return Estimate::exact(0.0);
    }
    let lo = quad
        .r_min
        .unwrap_or_else(|| dmin.max(R_MIN_FACTOR * m.cell_size()));
    let hi = quad.r_max.unwrap_or(dmax).max(lo);
    let nodes = RadialNodes::log_panels(lo, hi, quad.panels_for(wp), &[]);
    let mut radii = Vec::with_capacity(nodes.len() + 1);
    radii.push(lo);
    radii.extend_from_slice(&nodes.radii);
    let (mass, cut) = cell_masses(m, density, x, &radii);
    let total = mu.total_mass();
    let mut value = wp.head(mass[0], lo) + wp.tail(total, hi);
    let mut err = wp.power() * PARTIAL_VOLUME_REL_ERR * wp.head(cut[0], lo);
    for (k, w) in nodes.weights.iter().enumerate() {
        let f = w * wp.integrand(mass[k + 1], radii[k + 1]);
        value += f;
        if mass[k + 1] > 0.0 {
            err += wp.power() * f * PARTIAL_VOLUME_REL_ERR * cut[k + 1] / mass[k + 1];
        }
    }
    Estimate {
        value,
        error_bound: err,
    }
}

/// Wolff potential of the same measure at many points.
pub fn wolff_potential_batch(
    mu: &Measure,
    wp: &WolffParams,
    points: &[Point],
    quad: &QuadratureSpec,
) -> Result<Vec<Estimate>> {
    points
        .par_iter()
        .map(|x| wolff_potential(mu, wp, x, quad))
        .collect()
}

/// Wolff potentials of densities on a fixed grid, evaluated at the cell
/// centres. Cell ∩ ball volumes are tabulated once per relative offset.
#[derive(Debug, Clone)]
pub struct GridWolffOperator {
    wp: WolffParams,
    grid: BoxGrid,
    /// Radii in units of the cell size.
    radii: Vec<f64>,
    weights: Vec<f64>,
    /// End of the last panel, in units of the cell size.
    r_end: f64,
    offsets: Vec<OffsetEntry>,
    index: Vec<u32>,
}

#[derive(Debug, Clone)]
struct OffsetEntry {
    k_start: u32,
    k_full: u32,
    fractions: Vec<f64>,
}

impl GridWolffOperator {
    pub fn new(wp: &WolffParams, grid: &BoxGrid, quad: &QuadratureSpec) -> Result<Self> {
        wp.validate()?;
        quad.validate()?;
        if wp.n != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: wp.n,
            });
        }
        let n = grid.dim();
        let ext = grid.extents();
        let r_hi = ext.iter().map(|&e| (e as f64) * (e as f64)).sum::<f64>().sqrt().max(1.0);
        let nodes = RadialNodes::log_panels(0.5, r_hi, quad.panels_for(wp), &[(n as f64).sqrt() / 2.0]);
        let radii = nodes.radii;
        let weights = nodes.weights;
        let offset_grid = BoxGrid::new(Point::origin(n), 1.0, ext.to_vec())?;
        let offsets: Vec<OffsetEntry> = (0..offset_grid.cell_count())
            .into_par_iter()
            .map(|o| {
                let mut a = vec![0usize; n];
                offset_grid.multi_index(o, &mut a);
                let lo: Vec<f64> = a.iter().map(|&k| k as f64 - 0.5).collect();
                let hi: Vec<f64> = a.iter().map(|&k| k as f64 + 0.5).collect();
                let c = vec![0.0; n];
                let dmin = box_min_dist(&lo, &hi, &c);
                let dmax = box_max_dist(&lo, &hi, &c);
                let k_start = radii.partition_point(|&r| r <= dmin);
                let k_full = radii.partition_point(|&r| r < dmax);
                let fractions = (k_start..k_full)
                    .map(|k| box_ball_volume(&lo, &hi, &c, radii[k]))
                    .collect();
                OffsetEntry {
                    k_start: k_start as u32,
                    k_full: k_full as u32,
                    fractions,
                }
            })
            .collect();
        let mut index = vec![0u32; grid.cell_count() * n];
        for i in 0..grid.cell_count() {
            let mut mi = vec![0usize; n];
            grid.multi_index(i, &mut mi);
            for a in 0..n {
                index[i * n + a] = mi[a] as u32;
            }
        }
        Ok(Self {
            wp: *wp,
            grid: grid.clone(),
            radii,
            weights,
            r_end: r_hi,
            offsets,
            index,
        })
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn params(&self) -> &WolffParams {
        &self.wp
    }

    /// `W(ρ dx)` at every cell centre.
    pub fn apply(&self, density: &[f64]) -> Vec<f64> {
        let count = self.grid.cell_count();
        assert_eq!(density.len(), count, "density length must match the grid");
        let n = self.grid.dim();
        let h = self.grid.cell_size();
        let vol = self.grid.cell_volume();
        let ext = self.grid.extents();
        let mut strides = vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * ext[a + 1];
        }
        let active: Vec<usize> = (0..count).filter(|&j| density[j] > 0.0).collect();
        let total: f64 = active.iter().map(|&j| density[j] * vol).sum();
        let k_count = self.radii.len();
        let r_hi = h * self.r_end;
        let wp = &self.wp;
        (0..count)
            .into_par_iter()
            .map(|i| {
                if active.is_empty() {
                    return 0.0;
                }
                let mut diff = vec![0.0; k_count + 1];
                let mut mass = vec![0.0; k_count];
                let mi = &self.index[i * n..(i + 1) * n];
                for &j in &active {
                    let mj = &self.index[j * n..(j + 1) * n];
                    let mut o = 0usize;
                    for a in 0..n {
                        o += (mi[a] as i64 - mj[a] as i64).unsigned_abs() as usize * strides[a];
                    }
                    let e = &self.offsets[o];
                    let mj_mass = density[j] * vol;
                    diff[e.k_full as usize] += mj_mass;
                    let base = e.k_start as usize;
                    for (t, f) in e.fractions.iter().enumerate() {
                        mass[base + t] += density[j] * f * vol;
                    }
                }
                let mut run = 0.0;
                let mut value = 0.0;
                for k in 0..k_count {
                    run += diff[k];
                    let r = self.radii[k] * h;
                    value += self.weights[k] * wp.integrand(mass[k] + run, r);
                }
                // ball of radius h/2 inside the node's own cell
                let own = density[i] * unit_ball_volume(n) * (0.5 * h).powi(n as i32);
                value + wp.head(own, 0.5 * h) + wp.tail(total, r_hi)
            })
            .collect()
    }
}

/// `M_σ f(x) = sup_r σ(B(x,r))⁻¹ ∫_{B(x,r)} f dσ`. Exact for atomic
/// measures; for cell measures the supremum runs over a finite radius set
/// and is a lower bound.
pub fn maximal_function(mu: &Measure, f: &SampledField, x: &Point) -> Result<f64> {
    x.check_dim(mu.dim())?;
    f.check_nodes(&mu.reference_points())?;
    let masses = mu.node_masses();
    for (i, (&v, &m)) in f.values.iter().zip(&masses).enumerate() {
        if m > 0.0 && !(v >= 0.0) {
            return Err(Error::InvalidWeight { node: i, value: v });
        }
    }
    match mu {
        Measure::Atomic(a) => {
            let mut order: Vec<(f64, usize)> = a
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, at)| (dist2(at.at.coords(), x.coords()), i))
                .collect();
            order.sort_by(|u, v| u.0.total_cmp(&v.0));
            let mut best: f64 = 0.0;
            let (mut fm, mut mm) = (0.0, 0.0);
            for (k, &(d, i)) in order.iter().enumerate() {
                fm += f.values[i] * masses[i];
                mm += masses[i];
                let group_ends = k + 1 == order.len() || order[k + 1].0 > d;
                if group_ends && mm > 0.0 {
                    best = best.max(fm / mm);
                }
            }
            Ok(best)
        }
        Measure::Cells(c) => {
            let xc = x.coords();
            let (dmin, dmax) = support_range(mu, xc);
            if !dmin.is_finite() {
                return Ok(0.0);
            }
            let h = c.cell_size();
            let lo = dmin.max(R_MIN_FACTOR * h);
            let mut radii = RadialNodes::log_panels(lo, dmax.max(lo * 1.0001), 16, &[]).radii;
            radii.push(dmax * (1.0 + 1e-12));
            let mut centre = vec![0.0; xc.len()];
            for j in 0..c.cell_count() {
                c.cell_center_into(j, &mut centre);
                let d = dist2(&centre, xc).sqrt();
                if d <= 3.0 * h && d > 0.0 {
                    radii.push(d * (1.0 + 1e-9));
                }
            }
            radii.sort_by(|a, b| a.total_cmp(b));
            let (mass, _) = cell_masses(c, c.density(), xc, &radii);
            let weighted: Vec<f64> = c
                .density()
                .iter()
                .zip(&f.values)
                .map(|(d, v)| if *d == 0.0 { 0.0 } else { d * v })
                .collect();
            let (fmass, _) = cell_masses(c, &weighted, xc, &radii);
            let mut best: f64 = 0.0;
            for k in 0..radii.len() {
                if mass[k] > 0.0 {
                    best = best.max(fmass[k] / mass[k]);
                }
            }
            Ok(best)
        }
    }
}

/// Havin–Maz'ya potential `I_α[(I_α σ)^{1/(p−1)} dx]`, with the inner
/// potential sampled on a box grid.
#[derive(Debug, Clone)]
pub struct HavinMazya {
    wp: WolffParams,
    grid: BoxGrid,
    inner: Vec<f64>,
    kernel: KernelSpec,
    mass: f64,
    tol: f64,
}

impl HavinMazya {
    pub fn new(mu: &Measure, wp: &WolffParams, grid: &BoxGrid, tol: f64) -> Result<Self> {
        wp.validate()?;
        if grid.dim() != mu.dim() || wp.n != mu.dim() {
            return Err(Error::DimensionMismatch {
                expected: mu.dim(),
                got: grid.dim(),
            });
        }
        let kernel = KernelSpec::riesz(wp.n, wp.alpha)?;
        let power = 1.0 / (wp.p - 1.0);
        let inner = grid
            .centers()
            .par_iter()
            .map(|c| kernel_potential(&kernel, mu, c, tol).map(|v| v.powf(power)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            wp: *wp,
            grid: grid.clone(),
            inner,
            kernel,
            mass: mu.total_mass(),
            tol,
        })
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.grid.dim())?;
        let n = self.grid.dim();
        let h = self.grid.cell_size();
        let vol = self.grid.cell_volume();
        let near = NEAR_FIELD_DIAMETERS * h * (n as f64).sqrt();
        let xc = x.coords();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut s = 0.0;
        for (j, &g) in self.inner.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.grid.cell_bounds_into(j, &mut lo, &mut hi);
            if box_min_dist(&lo, &hi, xc) < near {
                s += g * kernel_cell_integral(&self.kernel, xc, &lo, &hi, self.tol);
            } else {
                self.grid.cell_center_into(j, &mut c);
                s += g * vol * self.kernel.eval_raw(xc, &c);
            }
        }
        Ok(s + self.tail())
    }

    /// Outer integral over the complement of the grid, with the inner
    /// potential replaced by its far-field form `M |y|^{α−n}` and the grid
    /// replaced by the ball of equal volume.
    fn tail(&self) -> f64 {
        if self.mass == 0.0 {
            return 0.0;
        }
        let n = self.grid.dim();
        let nf = n as f64;
        let a = self.wp.alpha;
        let decay = (nf - a) / (self.wp.p - 1.0);
        let volume = self.grid.cell_volume() * self.grid.cell_count() as f64;
        let r = (volume / unit_ball_volume(n)).powf(1.0 / nf);
        nf * unit_ball_volume(n) * self.mass.powf(1.0 / (self.wp.p - 1.0)) * r.powf(a - decay) / (decay - a)
    }
}

pub fn havin_mazya_potential(mu: &Measure, wp: &WolffParams, x: &Point, grid: &BoxGrid, tol: f64) -> Result<f64> {
    HavinMazya::new(mu, wp, grid, tol)?.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(pairs: &[(&[f64], f64)]) -> AtomicMeasure {
        AtomicMeasure::from_pairs(pairs.iter().map(|(c, m)| (c.to_vec(), *m)).collect()).unwrap()
    }

    #[test]
    fn atomic_examples() {
        let one = atoms(&[(&[0.0, 0.0, 0.0], 1.0)]);
        let x = Point(vec![1.0, 0.0, 0.0]);
        let wp = WolffParams::new(3, 1.0, 2.0).unwrap();
        assert!((wolff_atomic_exact(&one, &wp, &x).unwrap() - 1.0).abs() < 1e-15);
        let wp32 = WolffParams::new(3, 1.0, 1.5).unwrap();
        assert!((wolff_atomic_exact(&one, &wp32, &x).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let pair = atoms(&[(&[1.0, 0.0, 0.0], 1.0), (&[-1.0, 0.0, 0.0], 1.0)]);
        assert!((wolff_atomic_exact(&pair, &wp, &Point::origin(3)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(wolff_atomic_exact(&one, &wp, &Point::origin(3)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quadrature_matches_exact_on_atoms() {
        let mu = atoms(&[(&[0.0, 0.0, 0.0], 1.0), (&[0.3, 0.1, -0.2], 0.5), (&[2.0, 1.0, 0.0], 3.0)]);
        for (alpha, p) in [(1.0, 2.0), (1.0, 1.5), (0.5, 3.0)] {
            let wp = WolffParams::new(3, alpha, p).unwrap();
            let x = Point(vec![0.7, -0.4, 0.2]);
            let exact = wolff_atomic_exact(&mu, &wp, &x).unwrap();
            let q = wolff_potential(&Measure::Atomic(mu.clone()), &wp, &x, &QuadratureSpec::default())
                .unwrap()
                .value;
            assert!((q - exact).abs() < 1e-9 * exact, "{q} vs {exact}");
        }
    }

    #[test]
    fn zero_measure_has_zero_potential() {
        let mu = Measure::Atomic(AtomicMeasure::empty(3));
        let wp = WolffParams::new(3, 1.0, 2.0).unwrap();
        let v = wolff_potential(&mu, &wp, &Point::origin(3), &QuadratureSpec::default()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn grid_operator_matches_pointwise_quadrature() {
        let cells = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 6, 1.0).unwrap();
        for (alpha, p) in [(1.0, 2.0), (1.0, 1.5)] {
            let wp = WolffParams::new(3, alpha, p).unwrap();
            let op = GridWolffOperator::new(&wp, cells.grid(), &QuadratureSpec::default()).unwrap();
            let u = op.apply(cells.density());
            let mu = Measure::Cells(cells.clone());
            for i in [0, 17, 100, 215] {
                let x = Point(cells.cell_center(i));
                let v = wolff_potential(&mu, &wp, &x, &QuadratureSpec::default()).unwrap().value;
                assert!((u[i] - v).abs() < 1e-4 * v, "p={p}: {} vs {}", u[i], v);
            }
        }
    }

    #[test]
    fn uniform_ball_density_p2_matches_newtonian_potential() {
        // p = 2, α = 1: W σ (n − 2) = ∫ |x − y|^{-1} dσ for n = 3, and a unit
        // cube of density 1 seen from far away acts like a point mass.
        let cells = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0).unwrap();
        let wp = WolffParams::new(3, 1.0, 2.0).unwrap();
        let x = Point(vec![30.0, 0.5, 0.5]);
        let v = wolff_potential(&Measure::Cells(cells), &wp, &x, &QuadratureSpec::default())
            .unwrap()
            .value;
        assert!((v - 1.0 / 29.5).abs() < 1e-4 / 29.5, "{v}");
    }

    #[test]
    fn maximal_function_examples() {
        let mu: Measure = atoms(&[(&[0.0, 0.0], 1.0), (&[1.0, 0.0], 1.0)]).into();
        let f = SampledField::new(mu.reference_points(), vec![2.0, 4.0]).unwrap();
        assert_eq!(maximal_function(&mu, &f, &Point(vec![0.0, 0.0])).unwrap(), 3.0);
        assert_eq!(maximal_function(&mu, &f, &Point(vec![1.0, 0.0])).unwrap(), 4.0);
        let c = SampledField::constant(mu.reference_points(), 5.0).unwrap();
        assert_eq!(maximal_function(&mu, &c, &Point(vec![0.3, 0.2])).unwrap(), 5.0);
    }

    #[test]
    fn havin_mazya_point_mass_oracle() {
        // n = 3, α = 1, p = 2: V δ(x) = ∫ |z|^{-2} |x − z|^{-2} dz = π³/|x|
        let mu: Measure = atoms(&[(&[0.0, 0.0, 0.0], 1.0)]).into();
        let wp = WolffParams::new(3, 1.0, 2.0).unwrap();
        let grid = BoxGrid::cube(&[-4.0; 3], 8.0, 32).unwrap();
        let x = Point(vec![1.0, 0.0, 0.0]);
        let v = havin_mazya_potential(&mu, &wp, &x, &grid, 1e-4).unwrap();
        let exact = std::f64::consts::PI.powi(3);
        assert!((v - exact).abs() < 0.05 * exact, "{v} vs {exact}");
    }
}
