//! Riesz kernels and the Green kernels of a ball and of the upper
//! half-space, with their potentials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_max_dist, box_min_dist, dist2, BoxGrid, Point};
use crate::measures::{CellDensityMeasure, Measure};
use crate::quadrature::{gauss10, gauss4};

/// Cells closer than this many cell diameters to the evaluation point are
/// integrated with the near-field rule.
pub const NEAR_FIELD_DIAMETERS: f64 = 2.0;
/// Maximum number of bisection levels in the near field.
pub const MAX_DEPTH: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum KernelVariant {
    /// `|x − y|^{2α − n}`.
    Riesz { n: usize, two_alpha: f64 },
    /// Green function of `B(center, radius)`, without dimensional constant.
    GreenBall { n: usize, radius: f64, center: Point },
    /// Green function of `{x_n > 0}`, without dimensional constant.
    GreenHalfSpace { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    /// Weak maximum principle constant, when known.
    pub wmp_constant: Option<f64>,
    /// Quasi-symmetry constant.
    pub quasi_symmetry: f64,
}

impl KernelSpec {
    pub fn riesz(n: usize, two_alpha: f64) -> Result<Self> {
        if n < 1 || !(two_alpha > 0.0 && two_alpha < n as f64) {
            return Err(Error::InvalidParameter(format!(
                "Riesz kernel needs 0 < 2alpha < n, got 2alpha = {two_alpha}, n = {n}"
            )));
        }
        Ok(Self {
            variant: KernelVariant::Riesz { n, two_alpha },
            wmp_constant: (two_alpha <= 2.0).then_some(1.0),
            quasi_symmetry: 1.0,
        })
    }

    pub fn green_ball(n: usize, radius: f64, center: Point) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("Green kernels need n >= 3, got {n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius {radius}")));
        }
        center.check_dim(n)?;
        Ok(Self {
            variant: KernelVariant::GreenBall { n, radius, center },
            wmp_constant: Some(1.0),
            quasi_symmetry: 1.0,
        })
    }

    pub fn green_half_space(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("Green kernels need n >= 3, got {n}")));
        }
        Ok(Self {
            variant: KernelVariant::GreenHalfSpace { n },
            wmp_constant: Some(1.0),
            quasi_symmetry: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.variant {
            KernelVariant::Riesz { n, .. }
            | KernelVariant::GreenBall { n, .. }
            | KernelVariant::GreenHalfSpace { n } => *n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            KernelVariant::Riesz { .. } => "riesz",
            KernelVariant::GreenBall { .. } => "green-ball",
            KernelVariant::GreenHalfSpace { .. } => "green-half-space",
        }
    }

    pub fn domain_name(&self) -> &'static str {
        match self.variant {
            KernelVariant::Riesz { .. } => "whole space",
            KernelVariant::GreenBall { .. } => "ball",
            KernelVariant::GreenHalfSpace { .. } => "upper half-space",
        }
    }

    /// Exponent `e` of the singular part `|x − y|^{−e}`.
    pub fn singularity(&self) -> f64 {
        match self.variant {
            KernelVariant::Riesz { n, two_alpha } => n as f64 - two_alpha,
            KernelVariant::GreenBall { n, .. } | KernelVariant::GreenHalfSpace { n } => n as f64 - 2.0,
        }
    }

    /// Whether `x` lies in the closed domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.variant {
            KernelVariant::Riesz { .. } => true,
            KernelVariant::GreenBall { radius, center, .. } => {
                dist2(x, center.coords()) <= radius * radius
            }
            KernelVariant::GreenHalfSpace { n } => x[n - 1] >= 0.0,
        }
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        x.check_dim(self.dim())?;
        if !self.contains(x.coords()) {
            return Err(Error::OutsideDomain {
                point: x.0.clone(),
                domain: self.domain_name(),
            });
        }
        Ok(())
    }

    /// `G(x, y)`, `+∞` when `x = y`.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval_raw(x.coords(), y.coords()))
    }

    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2 = dist2(x, y);
        if d2 == 0.0 {
            return f64::INFINITY;
        }
        (self.singular(d2) - self.regular(x, y)).max(0.0)
    }

    /// `|x − y|^{−e}` from the squared distance.
    #[inline]
    pub(crate) fn singular(&self, d2: f64) -> f64 {
        let e = self.singularity();
        if e == 1.0 {
            1.0 / d2.sqrt()
        } else if e == 2.0 {
            1.0 / d2
        } else {
            d2.powf(-0.5 * e)
        }
    }

    /// The smooth part subtracted from the singular part.
    #[inline]
    pub(crate) fn regular(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.variant {
            KernelVariant::Riesz { .. } => 0.0,
            KernelVariant::GreenHalfSpace { n } => {
                let mut d2 = 0.0;
                for i in 0..n - 1 {
                    d2 += (x[i] - y[i]) * (x[i] - y[i]);
                }
                let s = x[n - 1] + y[n - 1];
                d2 += s * s;
                if d2 == 0.0 {
                    f64::INFINITY
                } else {
                    self.singular(d2)
                }
            }
            KernelVariant::GreenBall { radius, center, .. } => {
                let c = center.coords();
                let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
                for i in 0..c.len() {
                    let a = x[i] - c[i];
                    let b = y[i] - c[i];
                    xx += a * a;
                    yy += b * b;
                    xy += a * b;
                }
                let r2 = radius * radius;
                let q = ((xx * yy - 2.0 * r2 * xy + r2 * r2) / r2).max(0.0);
                if q == 0.0 {
                    f64::INFINITY
                } else {
                    self.singular(q)
                }
            }
        }
    }

    /// Confirms that every point or cell carrying mass lies in the closed
    /// domain.
    pub fn check_support(&self, mu: &Measure) -> Result<()> {
        if mu.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: mu.dim(),
            });
        }
        match mu {
            Measure::Atomic(m) => {
                for a in m.atoms() {
                    self.check_point(&a.at)?;
                }
            }
            Measure::Cells(m) => {
                let n = m.dim();
                let mut lo = vec![0.0; n];
                let mut hi = vec![0.0; n];
                for (i, &rho) in m.density().iter().enumerate() {
                    if rho == 0.0 {
                        continue;
                    }
                    m.cell_bounds_into(i, &mut lo, &mut hi);
                    let inside = match &self.variant {
                        KernelVariant::Riesz { .. } => true,
                        KernelVariant::GreenBall { radius, center, .. } => {
                            box_max_dist(&lo, &hi, center.coords()) <= radius * (1.0 + 1e-12)
                        }
                        KernelVariant::GreenHalfSpace { n } => lo[n - 1] >= 0.0,
                    };
                    if !inside {
                        return Err(Error::OutsideDomain {
                            point: m.cell_center(i),
                            domain: self.domain_name(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// `∫_{[lo, hi]} K(x, y) dy` with the near-field rule.
pub(crate) fn kernel_cell_integral(k: &KernelSpec, x: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> f64 {
    let s = singular_cell_integral(k, x, lo, hi, tol);
    let r = regular_cell_integral(k, x, lo, hi, tol);
    (s - r).max(0.0)
}

/// `∫_{[lo, hi]} |x − y|^{−e} dy`.
fn singular_cell_integral(k: &KernelSpec, x: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> f64 {
    singular_box_integral(k.singularity(), x, lo, hi, tol)
}

/// Both Green kernels have a regular part `λ |x* − y|^{−e}` with an image
/// point `x*` outside the domain: the reflection for the half-space, the
/// Kelvin inversion for the ball (a constant when `x` is the centre).
enum Image {
    None,
    Point(Vec<f64>, f64),
    Constant(f64),
}

impl KernelSpec {
    fn image(&self, x: &[f64]) -> Image {
        match &self.variant {
            KernelVariant::Riesz { .. } => Image::None,
            KernelVariant::GreenHalfSpace { n } => {
                let mut xs = x.to_vec();
                xs[n - 1] = -xs[n - 1];
                Image::Point(xs, 1.0)
            }
            KernelVariant::GreenBall { radius, center, .. } => {
                let c = center.coords();
                let s = dist2(x, c);
                let r2 = radius * radius;
                let e = self.singularity();
                if s < 1e-30 * r2 {
                    return Image::Constant(radius.powf(-e));
                }
                let xs = x.iter().zip(c).map(|(a, b)| b + r2 * (a - b) / s).collect();
                Image::Point(xs, (r2 / s).powf(0.5 * e))
            }
        }
    }
}

fn regular_cell_integral(k: &KernelSpec, x: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> f64 {
    match k.image(x) {
        Image::None => 0.0,
        Image::Constant(c) => c * lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>(),
        Image::Point(xs, lambda) => lambda * singular_box_integral(k.singularity(), &xs, lo, hi, tol),
    }
}

/// `∫_{[lo, hi]} |x − y|^{−e} dy` for `0 < e < n`. A box containing `x` is
/// split at `x` into boxes with a corner at `x`, each a union of pyramids
/// with apex `x` over its far faces; homogeneity integrates out the radial
/// direction exactly and leaves smooth face integrals. Other boxes are
/// bisected until every piece is well separated from `x`, then integrated
/// with a tensor Gauss rule.
pub(crate) fn singular_box_integral(e: f64, x: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> f64 {
    let n = x.len();
    let inside = (0..n).all(|i| lo[i] <= x[i] && x[i] <= hi[i]);
    if !inside {
        return separated_box_integral(e, x, lo, hi, separation_for(tol), 0);
    }
    let mut a = vec![0.0; n];
    let mut total = 0.0;
    'corners: for c in 0..(1usize << n) {
        for i in 0..n {
            a[i] = if (c >> i) & 1 == 1 { hi[i] - x[i] } else { x[i] - lo[i] };
            if a[i] == 0.0 {
                continue 'corners;
            }
        }
        total += corner_box_integral(e, &a);
    }
    total
}

/// Separation, in box diameters, beyond which the tensor rule meets `tol`
/// with a tenfold margin (worst case over points around a cube).
fn separation_for(tol: f64) -> f64 {
    const TABLE: [(f64, f64); 5] = [(3e-5, 0.5), (2e-6, 0.75), (4e-7, 1.0), (1.5e-8, 1.5), (1.5e-9, 2.0)];
    TABLE.iter().find(|(t, _)| tol >= *t).map_or(3.0, |e| e.1)
}

fn separated_box_integral(e: f64, x: &[f64], lo: &[f64], hi: &[f64], sep: f64, depth: u32) -> f64 {
    let n = x.len();
    let diam = dist2(lo, hi).sqrt();
    let d = box_min_dist(lo, hi, x);
    if d >= sep * diam || depth >= MAX_DEPTH {
        return tensor_gauss(e, x, lo, hi);
    }
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut clo = vec![0.0; n];
    let mut chi = vec![0.0; n];
    let mut total = 0.0;
    for c in 0..(1usize << n) {
        for i in 0..n {
            let upper = (c >> i) & 1 == 1;
            clo[i] = if upper { mid[i] } else { lo[i] };
            chi[i] = if upper { hi[i] } else { mid[i] };
        }
        total += separated_box_integral(e, x, &clo, &chi, sep, depth + 1);
    }
    total
}

fn tensor_gauss(e: f64, x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let g = gauss4();
    let n = x.len();
    let m = g.nodes.len();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        let mut r2 = 0.0;
        for i in 0..n {
            let y = mid[i] + half[i] * g.nodes[idx[i]];
            w *= g.weights[idx[i]];
            r2 += (y - x[i]) * (y - x[i]);
        }
        total += w * r2.powf(-0.5 * e);
        let mut d = 0;
        loop {
            if d == n {
                return total * half.iter().product::<f64>();
            }
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// `∫_{Π[0, a_i]} |y|^{−e} dy`.
fn corner_box_integral(e: f64, a: &[f64]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for i in 0..n {
        // pyramid over the face y_i = a_i
        let rules: Vec<Vec<(f64, f64)>> = (0..n).filter(|&j| j != i).map(|j| graded_nodes(a[j], a[i])).collect();
        let mut face = 0.0;
        let mut idx = vec![0usize; rules.len()];
        'tensor: loop {
            let mut w = 1.0;
            let mut r2 = a[i] * a[i];
            for (rule, &k) in rules.iter().zip(&idx) {
                let (z, wz) = rule[k];
                w *= wz;
                r2 += z * z;
            }
            face += w * r2.powf(-0.5 * e);
            for d in 0..idx.len() {
                idx[d] += 1;
                if idx[d] < rules[d].len() {
                    continue 'tensor;
                }
                idx[d] = 0;
            }
            break;
        }
        total += a[i] * face / (n as f64 - e);
    }
    total
}

/// Composite Gauss nodes on `[0, len]`, graded geometrically from `scale`,
/// the distance of the face from the apex.
fn graded_nodes(len: f64, scale: f64) -> Vec<(f64, f64)> {
    let g = gauss10();
    let mut breaks = vec![0.0];
    let mut b = scale.max(len * 1e-9);
    while b < len {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(len);
    let mut out = Vec::with_capacity(10 * breaks.len());
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (t, wt) in g.nodes.iter().zip(&g.weights) {
            out.push((mid + half * t, half * wt));
        }
    }
    out
}

/// `∫ G(x, y) dμ(y)`.
pub fn kernel_potential(k: &KernelSpec, mu: &Measure, x: &Point, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    k.check_point(x)?;
    k.check_support(mu)?;
    Ok(match mu {
        Measure::Atomic(m) => {
            let mut s = 0.0;
            for a in m.atoms() {
                s += a.mass * k.eval_raw(x.coords(), a.at.coords());
            }
            s
        }
        Measure::Cells(m) => cell_potential(k, m, m.density(), x.coords(), tol),
    })
}

fn cell_potential(k: &KernelSpec, m: &CellDensityMeasure, density: &[f64], x: &[f64], tol: f64) -> f64 {
    let n = m.dim();
    let h = m.cell_size();
    let vol = m.cell_volume();
    let near = NEAR_FIELD_DIAMETERS * h * (n as f64).sqrt();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut s = 0.0;
    for (i, &rho) in density.iter().enumerate() {
        if rho == 0.0 {
            continue;
        }
        m.cell_bounds_into(i, &mut lo, &mut hi);
        if box_min_dist(&lo, &hi, x) < near {
            s += rho * kernel_cell_integral(k, x, &lo, &hi, tol);
        } else {
            m.cell_center_into(i, &mut c);
            s += rho * vol * k.eval_raw(x, &c);
        }
    }
    s
}

/// Kernel potentials of densities on a fixed cell grid, evaluated at the
/// cell centres. Near-field weights are computed once; the singular part of
/// the near field is shared between cells with the same relative offset.
/// Centres outside the kernel's domain get the value zero.
#[derive(Debug, Clone)]
pub struct KernelGridOperator {
    kernel: KernelSpec,
    grid: BoxGrid,
    inside: Vec<bool>,
    near: Vec<Vec<(usize, f64)>>,
    dense: Option<Vec<f64>>,
}

/// Largest node count for which the full weight matrix is stored.
const DENSE_LIMIT: usize = 4096;

impl KernelGridOperator {
    pub fn new(kernel: &KernelSpec, grid: &BoxGrid, tol: f64) -> Result<Self> {
        if grid.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: grid.dim(),
            });
        }
        let n = grid.dim();
        let h = grid.cell_size();
        let count = grid.cell_count();
        let ext = grid.extents().to_vec();
        let reach = (NEAR_FIELD_DIAMETERS * (n as f64).sqrt()).ceil() as i64 + 1;
        let near_dist = NEAR_FIELD_DIAMETERS * h * (n as f64).sqrt();
        let origin = vec![0.0; n];
        // signed offsets in the near window, with the singular integral
        let window = BoxGrid::new(Point::origin(n), 1.0, vec![2 * reach as usize + 1; n])?;
        let stencil: Vec<(Vec<i64>, f64)> = (0..window.cell_count())
            .into_par_iter()
            .filter_map(|w| {
                let mut a = vec![0usize; n];
                window.multi_index(w, &mut a);
                let o: Vec<i64> = a.iter().map(|&k| k as i64 - reach).collect();
                // the integral only depends on |offset| per axis
                let lo: Vec<f64> = o.iter().map(|&k| (k.abs() as f64 - 0.5) * h).collect();
                let hi: Vec<f64> = o.iter().map(|&k| (k.abs() as f64 + 0.5) * h).collect();
                (box_min_dist(&lo, &hi, &origin) < near_dist)
                    .then(|| (o, singular_cell_integral(kernel, &origin, &lo, &hi, tol)))
            })
            .collect();
        let inside: Vec<bool> = (0..count).map(|i| kernel.contains(&grid.cell_center(i))).collect();
        let near: Vec<Vec<(usize, f64)>> = (0..count)
            .into_par_iter()
            .map(|i| {
                if !inside[i] {
                    return Vec::new();
                }
                let mut mi = vec![0usize; n];
                grid.multi_index(i, &mut mi);
                let x = grid.cell_center(i);
                let mut lo = vec![0.0; n];
                let mut hi = vec![0.0; n];
                let mut row = Vec::with_capacity(stencil.len());
                for (o, s) in &stencil {
                    let mut j = 0usize;
                    let mut ok = true;
                    for a in 0..n {
                        let t = mi[a] as i64 + o[a];
                        if t < 0 || t >= ext[a] as i64 {
                            ok = false;
                            break;
                        }
                        j = j * ext[a] + t as usize;
                    }
                    if !ok {
                        continue;
                    }
                    grid.cell_bounds_into(j, &mut lo, &mut hi);
                    let r = regular_cell_integral(kernel, &x, &lo, &hi, tol);
                    row.push((j, (s - r).max(0.0)));
                }
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();
        let mut op = Self {
            kernel: kernel.clone(),
            grid: grid.clone(),
            inside,
            near,
            dense: None,
        };
        if count <= DENSE_LIMIT {
            let rows: Vec<Vec<f64>> = (0..count).into_par_iter().map(|i| op.row(i)).collect();
            op.dense = Some(rows.into_iter().flatten().collect());
        }
        Ok(op)
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let count = self.grid.cell_count();
        if !self.inside[i] {
            return vec![0.0; count];
        }
        let vol = self.grid.cell_volume();
        let x = self.grid.cell_center(i);
        let mut c = vec![0.0; x.len()];
        let mut out = Vec::with_capacity(count);
        for j in 0..count {
            self.grid.cell_center_into(j, &mut c);
            out.push(vol * self.kernel.eval_raw(&x, &c));
        }
        for &(j, w) in &self.near[i] {
            out[j] = w;
        }
        out
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Whether each cell centre lies in the kernel's closed domain.
    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    /// `G(ρ dx)` at every cell centre.
    pub fn apply(&self, density: &[f64]) -> Vec<f64> {
        let count = self.grid.cell_count();
        assert_eq!(density.len(), count, "density length must match the grid");
        if let Some(mat) = &self.dense {
            return (0..count)
                .into_par_iter()
                .map(|i| {
                    let row = &mat[i * count..(i + 1) * count];
                    row.iter().zip(density).map(|(w, d)| w * d).sum()
                })
                .collect();
        }
        let active: Vec<usize> = (0..count).filter(|&j| density[j] != 0.0).collect();
        let vol = self.grid.cell_volume();
        (0..count)
            .into_par_iter()
            .map(|i| {
                if !self.inside[i] {
                    return 0.0;
                }
                let x = self.grid.cell_center(i);
                let mut c = vec![0.0; x.len()];
                let near = &self.near[i];
                let mut k = 0;
                let mut s = 0.0;
                for &j in &active {
                    while k < near.len() && near[k].0 < j {
                        k += 1;
                    }
                    if k < near.len() && near[k].0 == j {
                        s += near[k].1 * density[j];
                        continue;
                    }
                    self.grid.cell_center_into(j, &mut c);
                    s += vol * density[j] * self.kernel.eval_raw(&x, &c);
                }
                s
            })
            .collect()
    }

    /// `G(ρ dx)(x)` at arbitrary points.
    pub fn apply_at(&self, density: &[f64], points: &[Point], tol: f64) -> Result<Vec<f64>> {
        for p in points {
            self.kernel.check_point(p)?;
        }
        let m = CellDensityMeasure::on_grid(self.grid.clone(), density.to_vec())?;
        Ok(points
            .par_iter()
            .map(|p| cell_potential(&self.kernel, &m, density, p.coords(), tol))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    #[test]
    fn kernel_examples() {
        let riesz = KernelSpec::riesz(3, 2.0).unwrap();
        let v = riesz.eval(&pt(&[0.0, 0.0, 0.0]), &pt(&[2.0, 0.0, 0.0])).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let hs = KernelSpec::green_half_space(3).unwrap();
        let v = hs.eval(&pt(&[0.0, 0.0, 1.0]), &pt(&[0.0, 0.0, 2.0])).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(riesz.eval(&pt(&[1.0; 3]), &pt(&[1.0; 3])).unwrap(), f64::INFINITY);
        assert!(matches!(
            hs.eval(&pt(&[0.0, 0.0, -1.0]), &pt(&[0.0, 0.0, 1.0])),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn green_ball_origin_limit() {
        let g = KernelSpec::green_ball(3, 2.0, Point::origin(3)).unwrap();
        let x = pt(&[0.5, 0.0, 0.0]);
        let v = g.eval(&x, &Point::origin(3)).unwrap();
        assert!((v - (2.0 - 0.5)).abs() < 1e-14);
        let near = g.eval(&x, &pt(&[1e-9, 0.0, 0.0])).unwrap();
        assert!((near - v).abs() < 1e-6);
    }

    #[test]
    fn green_ball_vanishes_on_sphere() {
        let g = KernelSpec::green_ball(3, 1.0, pt(&[1.0, 0.0, 0.0])).unwrap();
        let y = pt(&[1.2, 0.1, 0.0]);
        let x = pt(&[2.0 - 1e-4, 0.0, 0.0]);
        assert!(g.eval(&x, &y).unwrap() < 1e-3);
        assert!(g.eval(&pt(&[2.0, 0.0, 0.0]), &y).unwrap() < 1e-12);
    }

    #[test]
    fn atomic_potentials() {
        let k = KernelSpec::riesz(3, 2.0).unwrap();
        let one: Measure = crate::measures::AtomicMeasure::from_pairs(vec![(vec![0.0; 3], 1.0)])
            .unwrap()
            .into();
        let v = kernel_potential(&k, &one, &pt(&[0.0, 2.0, 0.0]), 1e-6).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let two: Measure = crate::measures::AtomicMeasure::from_pairs(vec![
            (vec![1.0, 0.0, 0.0], 1.0),
            (vec![-1.0, 0.0, 0.0], 1.0),
        ])
        .unwrap()
        .into();
        assert_eq!(kernel_potential(&k, &two, &Point::origin(3), 1e-6).unwrap(), 2.0);
    }

    #[test]
    fn centred_cell_integral_matches_closed_form() {
        // ∫ |y|^{-1} over [-1, 1]^3
        let k = KernelSpec::riesz(3, 2.0).unwrap();
        let v = singular_cell_integral(&k, &[0.0; 3], &[-1.0; 3], &[1.0; 3], 1e-8);
        let s3 = 3f64.sqrt();
        let exact = 8.0 * (1.5 * (2.0 + s3).ln() - std::f64::consts::PI / 4.0);
        assert!((v - exact).abs() < 1e-5 * exact, "{v} vs {exact}");
    }

    #[test]
    fn grid_operator_matches_pointwise_potential() {
        let k = KernelSpec::green_half_space(3).unwrap();
        let grid = CellDensityMeasure::uniform_cube(&[-0.5, -0.5, 0.5], 1.0, 4, 1.0).unwrap();
        let op = KernelGridOperator::new(&k, grid.grid(), 1e-6).unwrap();
        let u = op.apply(grid.density());
        let mu = Measure::Cells(grid.clone());
        for i in [0, 5, 21, 63] {
            let x = Point(grid.cell_center(i));
            let v = kernel_potential(&k, &mu, &x, 1e-6).unwrap();
            assert!((u[i] - v).abs() < 1e-4 * v, "{} vs {}", u[i], v);
        }
    }

    /// Antiderivative of `1/|y|` in three dimensions.
    fn newton_corner(a: f64, b: f64, c: f64) -> f64 {
        let r = (a * a + b * b + c * c).sqrt();
        let l = |u: f64, v: f64, w: f64| if v * w == 0.0 { 0.0 } else { v * w * (u + r).ln() };
        let t = |u: f64, v: f64, w: f64| if u == 0.0 { 0.0 } else { 0.5 * u * u * (v * w / (u * r)).atan() };
        l(a, b, c) + l(b, a, c) + l(c, a, b) - t(a, b, c) - t(b, a, c) - t(c, a, b)
    }

    fn newton_box(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..8 {
            let mut sign = 1.0;
            let mut v = [0.0; 3];
            for d in 0..3 {
                if (c >> d) & 1 == 1 {
                    v[d] = hi[d] - x[d];
                } else {
                    v[d] = lo[d] - x[d];
                    sign = -sign;
                }
            }
            s += sign * newton_corner(v[0], v[1], v[2]);
        }
        s
    }

    #[test]
    fn singular_box_integral_matches_closed_form() {
        let lo = [0.0, 0.0, 0.0];
        let hi = [1.0, 0.5, 2.0];
        let xs = [
            [0.3, 0.2, 0.7],
            [0.0, 0.25, 1.0],
            [1.0, 0.5, 2.0],
            [1.0 + 1e-7, 0.1, 0.1],
            [-0.4, 0.6, 2.3],
            [0.01, 0.02, 1.0],
            [5.0, 4.0, -3.0],
        ];
        for x in xs {
            let exact = newton_box(&lo, &hi, &x);
            let v = singular_box_integral(1.0, &x, &lo, &hi, 1e-9);
            assert!((v - exact).abs() < 1e-7 * exact, "{x:?}: {v} vs {exact}");
        }
    }
}
