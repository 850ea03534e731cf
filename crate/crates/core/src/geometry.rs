//! Points in ℝⁿ and the exact box ∩ ball volume.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss10;

/// A point of ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point with no coordinates".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coordinate {c}")));
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// `scale · e_axis`.
    pub fn axis(dim: usize, axis: usize, scale: f64) -> Self {
        let mut c = vec![0.0; dim];
        c[axis] = scale;
        Self(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Uniform grid of `∏ extents[i]` cubic cells of side `cell_size`, with the
/// first cell's lower corner at `origin`. Cells are numbered with the last
/// axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    origin: Point,
    cell_size: f64,
    extents: Vec<usize>,
}

impl BoxGrid {
    pub fn new(origin: Point, cell_size: f64, extents: Vec<usize>) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell size {cell_size}")));
        }
        origin.check_dim(extents.len())?;
        Ok(Self {
            origin,
            cell_size,
            extents,
        })
    }

    /// The cube `[lo, lo + side]ⁿ` with `cells_per_side` cells per axis.
    pub fn cube(lo: &[f64], side: f64, cells_per_side: usize) -> Result<Self> {
        if cells_per_side == 0 {
            return Err(Error::InvalidParameter("grid needs at least one cell per side".into()));
        }
        Self::new(
            Point::new(lo.to_vec())?,
            side / cells_per_side as f64,
            vec![cells_per_side; lo.len()],
        )
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn origin(&self) -> &Point {
        &self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn cell_count(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_size.powi(self.dim() as i32)
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for i in (0..self.dim()).rev() {
            out[i] = flat % self.extents[i];
            flat /= self.extents[i];
        }
    }

    pub fn cell_center_into(&self, flat: usize, out: &mut [f64]) {
        let mut f = flat;
        for i in (0..self.dim()).rev() {
            let k = f % self.extents[i];
            f /= self.extents[i];
            out[i] = self.origin.0[i] + (k as f64 + 0.5) * self.cell_size;
        }
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.cell_center_into(flat, &mut c);
        c
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.cell_count()).map(|i| Point(self.cell_center(i))).collect()
    }

    pub fn cell_bounds_into(&self, flat: usize, lo: &mut [f64], hi: &mut [f64]) {
        self.cell_center_into(flat, lo);
        let half = 0.5 * self.cell_size;
        for i in 0..self.dim() {
            hi[i] = lo[i] + half;
            lo[i] -= half;
        }
    }

    /// Lower and upper corners of the whole grid.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.origin.0.clone();
        let hi = lo
            .iter()
            .zip(&self.extents)
            .map(|(o, &e)| o + e as f64 * self.cell_size)
            .collect();
        (lo, hi)
    }

    /// Index of the cell whose closed box contains `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for i in 0..self.dim() {
            let t = (x[i] - self.origin.0[i]) / self.cell_size;
            if !(t >= 0.0 && t <= self.extents[i] as f64) || self.extents[i] == 0 {
                return None;
            }
            let k = (t.floor() as usize).min(self.extents[i] - 1);
            flat = flat * self.extents[i] + k;
        }
        Some(flat)
    }

    /// Grid extended by `below[i]` cells before and `above[i]` cells after
    /// the original cells along axis `i`.
    pub fn padded(&self, below: &[usize], above: &[usize]) -> Self {
        let origin = self
            .origin
            .0
            .iter()
            .zip(below)
            .map(|(o, &b)| o - b as f64 * self.cell_size)
            .collect();
        Self {
            origin: Point(origin),
            cell_size: self.cell_size,
            extents: (0..self.dim())
                .map(|i| self.extents[i] + below[i] + above[i])
                .collect(),
        }
    }

    /// Centre of the bounding box.
    pub fn center(&self) -> Point {
        let (lo, hi) = self.bounding_box();
        Point(lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    /// Same geometry with every cell split into `factor` cells per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            origin: self.origin.clone(),
            cell_size: self.cell_size / factor as f64,
            extents: self.extents.iter().map(|e| e * factor).collect(),
        }
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Distance from `x` to the closed box `[lo, hi]` (zero inside).
pub(crate) fn box_min_dist(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = if x[i] < lo[i] {
            lo[i] - x[i]
        } else if x[i] > hi[i] {
            x[i] - hi[i]
        } else {
            0.0
        };
        s += d * d;
    }
    s.sqrt()
}

/// Distance from `x` to the farthest corner of `[lo, hi]`.
pub(crate) fn box_max_dist(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = (x[i] - lo[i]).abs().max((hi[i] - x[i]).abs());
        s += d * d;
    }
    s.sqrt()
}

/// Volume of `[lo, hi] ∩ B(c, r)`.
///
/// Dimensions one and two are closed form. Higher dimensions integrate the
/// (n−1)-dimensional slice volume over the last coordinate, splitting at
/// every height where the slice changes combinatorial type and using a
/// cosine-mapped Gauss rule on each piece.
pub fn box_ball_volume(lo: &[f64], hi: &[f64], c: &[f64], r: f64) -> f64 {
    let n = c.len();
    debug_assert!(lo.len() == n && hi.len() == n);
    if r <= 0.0 {
        return 0.0;
    }
    if box_min_dist(lo, hi, c) >= r {
        return 0.0;
    }
    if box_max_dist(lo, hi, c) <= r {
        return lo.iter().zip(hi).map(|(a, b)| b - a).product();
    }
    match n {
        1 => (hi[0].min(c[0] + r) - lo[0].max(c[0] - r)).max(0.0),
        2 => rect_disk_area(lo[0] - c[0], hi[0] - c[0], lo[1] - c[1], hi[1] - c[1], r),
        _ => sliced_volume(lo, hi, c, r),
    }
}

fn sliced_volume(lo: &[f64], hi: &[f64], c: &[f64], r: f64) -> f64 {
    let n = c.len();
    let (lo_s, hi_s, c_s) = (&lo[..n - 1], &hi[..n - 1], &c[..n - 1]);
    let zc = c[n - 1];
    let a = lo[n - 1].max(zc - r);
    let b = hi[n - 1].min(zc + r);
    if b <= a {
        return 0.0;
    }
    let mut breaks = vec![a, b];
    if zc > a && zc < b {
        breaks.push(zc);
    }
    // Slice type changes where the slice radius equals a distance from the
    // slice centre to the affine hull of some face of the lower box.
    let m = n - 1;
    let combos = 3usize.pow(m as u32);
    for code in 1..combos {
        let mut k = code;
        let mut d2 = 0.0;
        for i in 0..m {
            let t = match k % 3 {
                1 => c_s[i] - lo_s[i],
                2 => c_s[i] - hi_s[i],
                _ => 0.0,
            };
            d2 += t * t;
            k /= 3;
        }
        if d2 < r * r {
            let h = (r * r - d2).sqrt();
            for z in [zc - h, zc + h] {
                if z > a && z < b {
                    breaks.push(z);
                }
            }
        }
    }
    breaks.sort_by(|x, y| x.total_cmp(y));
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    let rule = gauss10();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        total += rule.integrate_cosine_mapped(w[0], w[1], |z| {
            let rho2 = r * r - (z - zc) * (z - zc);
            if rho2 <= 0.0 {
                0.0
            } else {
                box_ball_volume(lo_s, hi_s, c_s, rho2.sqrt())
            }
        });
    }
    total
}

/// Area of `[x0, x1] × [y0, y1]` intersected with the disk of radius `rho`
/// centred at the origin.
pub(crate) fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64, rho: f64) -> f64 {
    let g = |a: f64, b: f64| quadrant_disk_area(a, b, rho);
    (g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0)).max(0.0)
}

/// Area of `{x ≤ a, y ≤ b}` intersected with the disk of radius `rho`.
fn quadrant_disk_area(a: f64, b: f64, rho: f64) -> f64 {
    if b <= -rho || a <= -rho {
        return 0.0;
    }
    let a = a.min(rho);
    // primitive of sqrt(rho² − x²)
    let prim = |x: f64| {
        let x = x.clamp(-rho, rho);
        0.5 * (x * (rho * rho - x * x).max(0.0).sqrt() + rho * rho * (x / rho).asin())
    };
    let chord = |lo: f64, hi: f64| -> (f64, f64) {
        // (∫ sqrt, length) over [lo, hi] ∩ [-rho, a]
        let hi = hi.min(a);
        if hi <= lo {
            (0.0, 0.0)
        } else {
            (prim(hi) - prim(lo), hi - lo)
        }
    };
    if b >= rho {
        let (s, _) = chord(-rho, rho);
        return 2.0 * s;
    }
    let w = (rho * rho - b * b).max(0.0).sqrt();
    let (s_mid, len_mid) = chord(-w, w);
    if b >= 0.0 {
        let (s_left, _) = chord(-rho, -w);
        let (s_right, _) = chord(w, rho);
        2.0 * s_left + s_mid + b * len_mid + 2.0 * s_right
    } else {
        s_mid + b * len_mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn disk_inside_rectangle_is_full_disk() {
        let a = rect_disk_area(-2.0, 2.0, -2.0, 2.0, 1.0);
        assert!((a - PI).abs() < 1e-13);
        let half = rect_disk_area(0.0, 2.0, -2.0, 2.0, 1.0);
        assert!((half - PI / 2.0).abs() < 1e-13);
        let quarter = rect_disk_area(0.0, 2.0, 0.0, 2.0, 1.0);
        assert!((quarter - PI / 4.0).abs() < 1e-13);
    }

    #[test]
    fn disk_rectangle_against_grid_count() {
        // rectangle clipping the disk on two sides
        let (x0, x1, y0, y1, rho) = (-0.3, 1.4, 0.2, 0.9, 1.0);
        let exact = rect_disk_area(x0, x1, y0, y1, rho);
        let m = 2000;
        let mut count = 0usize;
        for i in 0..m {
            for j in 0..m {
                let x = x0 + (x1 - x0) * (i as f64 + 0.5) / m as f64;
                let y = y0 + (y1 - y0) * (j as f64 + 0.5) / m as f64;
                if x * x + y * y < rho * rho {
                    count += 1;
                }
            }
        }
        let approx = count as f64 / (m * m) as f64 * (x1 - x0) * (y1 - y0);
        assert!((exact - approx).abs() < 2e-5, "{exact} vs {approx}");
    }

    #[test]
    fn ball_inside_box_has_ball_volume() {
        let v = box_ball_volume(&[0.0; 3], &[1.0; 3], &[0.5; 3], 0.25);
        assert!((v - 4.0 / 3.0 * PI * 0.25f64.powi(3)).abs() < 1e-12);
        let v4 = box_ball_volume(&[-1.0; 4], &[1.0; 4], &[0.0; 4], 0.5);
        assert!((v4 - unit_ball_volume(4) * 0.5f64.powi(4)).abs() < 1e-10);
    }

    #[test]
    fn octant_of_ball() {
        let v = box_ball_volume(&[0.0; 3], &[2.0; 3], &[0.0; 3], 1.0);
        assert!((v - PI / 6.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn cube_ball_volume_against_midpoint_count() {
        let lo = [0.2, -0.4, 0.1];
        let hi = [1.2, 0.6, 1.1];
        let c = [0.0, 0.0, 0.0];
        let r = 1.05;
        let exact = box_ball_volume(&lo, &hi, &c, r);
        let m = 200;
        let h = 1.0 / m as f64;
        let mut count = 0usize;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = [
                        lo[0] + (i as f64 + 0.5) * h,
                        lo[1] + (j as f64 + 0.5) * h,
                        lo[2] + (k as f64 + 0.5) * h,
                    ];
                    if p.iter().map(|v| v * v).sum::<f64>() < r * r {
                        count += 1;
                    }
                }
            }
        }
        let approx = count as f64 * h * h * h;
        assert!((exact - approx).abs() < 5e-5, "{exact} vs {approx}");
    }
}
