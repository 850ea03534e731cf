//! Nonnegative measures on ℝⁿ: finite sums of point masses and piecewise
//! constant densities on a uniform grid of cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::geometry::{box_ball_volume, box_max_dist, box_min_dist, dist2, BoxGrid, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub at: Point,
    pub mass: f64,
}

/// Finite sum of point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            a.at.check_dim(dim)?;
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom mass {} must be positive", a.mass)));
            }
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| {
            atoms[i]
                .at
                .coords()
                .iter()
                .zip(atoms[j].at.coords())
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(w) = order.windows(2).find(|w| atoms[w[0]].at == atoms[w[1]].at) {
            return Err(Error::InvalidMeasure(format!(
                "duplicate atom location {:?}",
                atoms[w[0]].at.0
            )));
        }
        Ok(Self { dim, atoms })
    }

    pub fn from_pairs(pairs: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let dim = pairs.first().map(|(p, _)| p.len()).ok_or_else(|| {
            Error::InvalidMeasure("dimension of an empty atom list is unknown".into())
        })?;
        let atoms = pairs
            .into_iter()
            .map(|(c, m)| Ok(Atom { at: Point::new(c)?, mass: m }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, atoms)
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Piecewise constant density on the cells of a [`BoxGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDensityMeasure {
    #[serde(flatten)]
    grid: BoxGrid,
    density: Vec<f64>,
}

impl CellDensityMeasure {
    pub fn new(origin: Point, cell_size: f64, extents: Vec<usize>, density: Vec<f64>) -> Result<Self> {
        Self::on_grid(BoxGrid::new(origin, cell_size, extents)?, density)
    }

    pub fn on_grid(grid: BoxGrid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.cell_count() {
            return Err(Error::InvalidMeasure(format!(
                "{} densities for {} cells",
                density.len(),
                grid.cell_count()
            )));
        }
        if let Some(d) = density.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidMeasure(format!("density {d} must be finite and nonnegative")));
        }
        Ok(Self { grid, density })
    }

    pub fn uniform(origin: Point, cell_size: f64, extents: Vec<usize>, value: f64) -> Result<Self> {
        let count = extents.iter().product();
        Self::new(origin, cell_size, extents, vec![value; count])
    }

    /// Uniform density `value` on the cube `[lo, lo + side]ⁿ` split into
    /// `cells_per_side` cells per axis.
    pub fn uniform_cube(lo: &[f64], side: f64, cells_per_side: usize, value: f64) -> Result<Self> {
        let grid = BoxGrid::cube(lo, side, cells_per_side)?;
        let count = grid.cell_count();
        Self::on_grid(grid, vec![value; count])
    }

    pub fn with_density(&self, density: Vec<f64>) -> Result<Self> {
        Self::on_grid(self.grid.clone(), density)
    }

    /// Same measure on a grid with every cell split into `factor` cells per
    /// axis.
    pub fn refined(&self, factor: usize) -> Self {
        let fine = self.grid.refined(factor);
        let n = self.dim();
        let mut density = vec![0.0; fine.cell_count()];
        let mut idx = vec![0usize; n];
        for (j, d) in density.iter_mut().enumerate() {
            fine.multi_index(j, &mut idx);
            let mut flat = 0;
            for i in 0..n {
                flat = flat * self.grid.extents()[i] + idx[i] / factor;
            }
            *d = self.density[flat];
        }
        Self {
            grid: fine,
            density,
        }
    }

    /// Densities placed on `padded`, which must be `self.grid().padded(below, _)`.
    pub fn embed(&self, padded: &BoxGrid, below: &[usize]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; padded.cell_count()];
        let mut idx = vec![0usize; n];
        for (j, &d) in self.density.iter().enumerate() {
            self.grid.multi_index(j, &mut idx);
            let mut flat = 0;
            for i in 0..n {
                flat = flat * padded.extents()[i] + idx[i] + below[i];
            }
            out[flat] = d;
        }
        out
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn origin(&self) -> &Point {
        self.grid.origin()
    }

    pub fn cell_size(&self) -> f64 {
        self.grid.cell_size()
    }

    pub fn extents(&self) -> &[usize] {
        self.grid.extents()
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cell_count()
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume()
    }

    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        self.grid.multi_index(flat, out)
    }

    pub fn cell_center_into(&self, flat: usize, out: &mut [f64]) {
        self.grid.cell_center_into(flat, out)
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.grid.cell_center(flat)
    }

    pub fn cell_bounds_into(&self, flat: usize, lo: &mut [f64], hi: &mut [f64]) {
        self.grid.cell_bounds_into(flat, lo, hi)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.grid.bounding_box()
    }

    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.grid.locate(x)
    }

    fn ball_mass(&self, x: &[f64], r: f64) -> BallMass {
        let n = self.dim();
        let vol = self.cell_volume();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        let mut value = 0.0;
        let mut partial = 0.0;
        for (i, &rho) in self.density.iter().enumerate() {
            if rho == 0.0 {
                continue;
            }
            self.cell_bounds_into(i, &mut lo, &mut hi);
            if box_min_dist(&lo, &hi, x) >= r {
                continue;
            }
            if box_max_dist(&lo, &hi, x) <= r {
                value += rho * vol;
                continue;
            }
            let m = rho * box_ball_volume(&lo, &hi, x, r);
            value += m;
            partial += rho * vol;
        }
        BallMass {
            value,
            error_bound: PARTIAL_VOLUME_REL_ERR * partial,
        }
    }
}

/// Relative accuracy of the sliced cell ∩ ball volume, used for reported
/// error bounds.
pub const PARTIAL_VOLUME_REL_ERR: f64 = 1e-9;

/// `σ(B(x, r))` together with a bound on its numerical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMass {
    pub value: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Measure {
    Atomic(AtomicMeasure),
    Cells(CellDensityMeasure),
}

impl From<AtomicMeasure> for Measure {
    fn from(m: AtomicMeasure) -> Self {
        Measure::Atomic(m)
    }
}

impl From<CellDensityMeasure> for Measure {
    fn from(m: CellDensityMeasure) -> Self {
        Measure::Cells(m)
    }
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Atomic(m) => m.dim(),
            Measure::Cells(m) => m.dim(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Atomic(m) => m.atoms.iter().map(|a| a.mass).sum(),
            Measure::Cells(m) => m.cell_volume() * m.density.iter().sum::<f64>(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }

    /// Atoms, or cell centres. Every sampled field attached to this measure
    /// is indexed by these points.
    pub fn reference_points(&self) -> Vec<Point> {
        match self {
            Measure::Atomic(m) => m.atoms.iter().map(|a| a.at.clone()).collect(),
            Measure::Cells(m) => (0..m.cell_count()).map(|i| Point(m.cell_center(i))).collect(),
        }
    }

    /// Mass carried by each reference point.
    pub fn node_masses(&self) -> Vec<f64> {
        match self {
            Measure::Atomic(m) => m.atoms.iter().map(|a| a.mass).collect(),
            Measure::Cells(m) => {
                let v = m.cell_volume();
                m.density.iter().map(|d| d * v).collect()
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Measure::Atomic(m) => m.atoms.len(),
            Measure::Cells(m) => m.cell_count(),
        }
    }

    /// `σ(B(x, r))` for the open ball. Atomic measures are exact; partial
    /// cells are integrated by slicing, whose error is far below any
    /// practical `tol`.
    pub fn ball_mass(&self, x: &Point, r: f64, tol: f64) -> Result<BallMass> {
        x.check_dim(self.dim())?;
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {r} must be positive")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
        }
        Ok(match self {
            Measure::Atomic(m) => {
                let r2 = r * r;
                let value = m
                    .atoms
                    .iter()
                    .filter(|a| dist2(a.at.coords(), x.coords()) < r2)
                    .map(|a| a.mass)
                    .sum();
                BallMass { value, error_bound: 0.0 }
            }
            Measure::Cells(m) => m.ball_mass(x.coords(), r),
        })
    }

    /// Diameter of the support (zero for the zero measure).
    pub fn support_diameter(&self) -> f64 {
        match self {
            Measure::Atomic(m) => {
                let mut d: f64 = 0.0;
                for (i, a) in m.atoms.iter().enumerate() {
                    for b in &m.atoms[i + 1..] {
                        d = d.max(a.at.dist(&b.at));
                    }
                }
                d
            }
            Measure::Cells(m) => match support_box(m) {
                Some((lo, hi)) => crate::geometry::dist(&lo, &hi),
                None => 0.0,
            },
        }
    }

    /// Distance from `x` to the support (infinite for the zero measure).
    pub fn dist_to_support(&self, x: &[f64]) -> f64 {
        match self {
            Measure::Atomic(m) => m
                .atoms
                .iter()
                .map(|a| dist2(a.at.coords(), x))
                .fold(f64::INFINITY, f64::min)
                .sqrt(),
            Measure::Cells(m) => {
                let n = m.dim();
                let mut lo = vec![0.0; n];
                let mut hi = vec![0.0; n];
                let mut best = f64::INFINITY;
                for (i, &rho) in m.density.iter().enumerate() {
                    if rho > 0.0 {
                        m.cell_bounds_into(i, &mut lo, &mut hi);
                        best = best.min(box_min_dist(&lo, &hi, x));
                    }
                }
                best
            }
        }
    }

    /// Distance from `x` to the farthest point of the support.
    pub fn max_dist_to_support(&self, x: &[f64]) -> f64 {
        match self {
            Measure::Atomic(m) => m
                .atoms
                .iter()
                .map(|a| dist2(a.at.coords(), x))
                .fold(0.0, f64::max)
                .sqrt(),
            Measure::Cells(m) => {
                let n = m.dim();
                let mut lo = vec![0.0; n];
                let mut hi = vec![0.0; n];
                let mut best: f64 = 0.0;
                for (i, &rho) in m.density.iter().enumerate() {
                    if rho > 0.0 {
                        m.cell_bounds_into(i, &mut lo, &mut hi);
                        best = best.max(box_max_dist(&lo, &hi, x));
                    }
                }
                best
            }
        }
    }

    /// Smallest geometric length present in the measure: cell size, or the
    /// minimal pairwise atom separation.
    pub fn feature_scale(&self) -> f64 {
        match self {
            Measure::Cells(m) => m.cell_size(),
            Measure::Atomic(m) => {
                let mut d = f64::INFINITY;
                for (i, a) in m.atoms.iter().enumerate() {
                    for b in &m.atoms[i + 1..] {
                        d = d.min(a.at.dist(&b.at));
                    }
                }
                if d.is_finite() {
                    d
                } else {
                    1.0
                }
            }
        }
    }
}

fn support_box(m: &CellDensityMeasure) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = m.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut clo = vec![0.0; n];
    let mut chi = vec![0.0; n];
    let mut any = false;
    for (i, &rho) in m.density.iter().enumerate() {
        if rho > 0.0 {
            any = true;
            m.cell_bounds_into(i, &mut clo, &mut chi);
            for k in 0..n {
                lo[k] = lo[k].min(clo[k]);
                hi[k] = hi[k].max(chi[k]);
            }
        }
    }
    any.then_some((lo, hi))
}

/// `σ_k = χ_{Ω_k} σ` with `Ω_k = {gate ≤ k} ∩ B(0, k)`, decided at each
/// reference point.
pub fn restrict_measure(mu: &Measure, k: f64, gate: &SampledField) -> Result<Measure> {
    let refs = mu.reference_points();
    gate.check_nodes(&refs)?;
    let keep: Vec<bool> = refs
        .iter()
        .zip(&gate.values)
        .map(|(p, &g)| g <= k && p.norm() < k)
        .collect();
    Ok(match mu {
        Measure::Atomic(m) => Measure::Atomic(AtomicMeasure {
            dim: m.dim,
            atoms: m
                .atoms
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(a, _)| a.clone())
                .collect(),
        }),
        Measure::Cells(m) => {
            let density = m
                .density
                .iter()
                .zip(&keep)
                .map(|(&d, &keep)| if keep { d } else { 0.0 })
                .collect();
            Measure::Cells(m.with_density(density)?)
        }
    })
}

/// `weights^q dσ`, applied per reference point. Atoms whose weight vanishes
/// are dropped.
pub fn scale_density(mu: &Measure, weights: &SampledField, q: f64) -> Result<Measure> {
    gate_weights(weights)?;
    weights.check_nodes(&mu.reference_points())?;
    scale_by_values(mu, &weights.values, q)
}

fn gate_weights(weights: &SampledField) -> Result<()> {
    if let Some((i, &v)) = weights
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidWeight { node: i, value: v });
    }
    Ok(())
}

/// Same as [`scale_density`] with raw per-node values (no node check).
pub(crate) fn scale_by_values(mu: &Measure, values: &[f64], q: f64) -> Result<Measure> {
    if values.len() != mu.node_count() {
        return Err(Error::NodeMismatch(format!(
            "{} weights for {} reference points",
            values.len(),
            mu.node_count()
        )));
    }
    if let Some((i, &v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidWeight { node: i, value: v });
    }
    Ok(match mu {
        Measure::Atomic(m) => Measure::Atomic(AtomicMeasure {
            dim: m.dim,
            atoms: m
                .atoms
                .iter()
                .zip(values)
                .map(|(a, &w)| Atom {
                    at: a.at.clone(),
                    mass: a.mass * w.powf(q),
                })
                .filter(|a| a.mass > 0.0)
                .collect(),
        }),
        Measure::Cells(m) => {
            let density = m
                .density
                .iter()
                .zip(values)
                .map(|(&d, &w)| if d == 0.0 { 0.0 } else { d * w.powf(q) })
                .collect();
            Measure::Cells(m.with_density(density)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> Measure {
        AtomicMeasure::from_pairs(vec![(vec![0.0, 0.0, 0.0], 1.0), (vec![1.0, 0.0, 0.0], 2.0)])
            .unwrap()
            .into()
    }

    #[test]
    fn total_mass_examples() {
        assert_eq!(two_atoms().total_mass(), 3.0);
        let empty: Measure = CellDensityMeasure::new(Point::origin(3), 0.5, vec![0, 4, 4], vec![])
            .unwrap()
            .into();
        assert_eq!(empty.total_mass(), 0.0);
        for cells in [1, 3, 8] {
            let m: Measure = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, cells, 1.0)
                .unwrap()
                .into();
            assert!((m.total_mass() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn atomic_ball_mass_uses_open_balls() {
        let m = two_atoms();
        let o = Point::origin(3);
        assert_eq!(m.ball_mass(&o, 0.5, 1e-6).unwrap().value, 1.0);
        assert_eq!(m.ball_mass(&o, 1.0, 1e-6).unwrap().value, 1.0);
        assert_eq!(m.ball_mass(&o, 1.0 + 1e-12, 1e-6).unwrap().value, 3.0);
    }

    #[test]
    fn cell_ball_mass_interior_ball() {
        let m: Measure = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0)
            .unwrap()
            .into();
        let bm = m.ball_mass(&Point(vec![0.5; 3]), 0.25, 1e-6).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.25f64.powi(3);
        assert!((bm.value - exact).abs() <= 1e-10 * exact, "{}", bm.value);
        assert!(bm.error_bound <= 1e-6 * bm.value);
    }

    #[test]
    fn ball_mass_rejects_bad_input() {
        let m = two_atoms();
        assert!(matches!(
            m.ball_mass(&Point::origin(2), 1.0, 1e-6),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m.ball_mass(&Point::origin(3), 0.0, 1e-6).is_err());
    }

    #[test]
    fn duplicate_atoms_rejected() {
        let r = AtomicMeasure::from_pairs(vec![(vec![0.0, 1.0], 1.0), (vec![0.0, 1.0], 2.0)]);
        assert!(r.is_err());
        assert!(AtomicMeasure::from_pairs(vec![(vec![0.0], -1.0)]).is_err());
    }

    #[test]
    fn restrict_examples() {
        let m = two_atoms();
        let gate = SampledField::new(m.reference_points(), vec![3.0, 10.0]).unwrap();
        let r = restrict_measure(&m, 5.0, &gate).unwrap();
        assert_eq!(r.total_mass(), 1.0);
        assert_eq!(restrict_measure(&m, 1e9, &gate).unwrap(), m);
        assert_eq!(restrict_measure(&m, 2.0, &gate).unwrap().total_mass(), 0.0);
        let bad = SampledField::new(vec![Point::origin(3)], vec![1.0]).unwrap();
        assert!(matches!(restrict_measure(&m, 5.0, &bad), Err(Error::NodeMismatch(_))));
    }

    #[test]
    fn scale_examples() {
        let m: Measure = AtomicMeasure::from_pairs(vec![(vec![0.0, 0.0], 2.0)]).unwrap().into();
        let w = SampledField::new(m.reference_points(), vec![4.0]).unwrap();
        let s = scale_density(&m, &w, 0.5).unwrap();
        assert_eq!(s.total_mass(), 4.0);
        assert_eq!(scale_density(&m, &w, 0.0).unwrap(), m);
        let ones = SampledField::constant(m.reference_points(), 1.0).unwrap();
        assert_eq!(scale_density(&m, &ones, 3.7).unwrap(), m);
        let neg = SampledField {
            nodes: m.reference_points(),
            values: vec![-1.0],
            tail: None,
        };
        assert!(matches!(scale_density(&m, &neg, 1.0), Err(Error::InvalidWeight { .. })));
    }
}
