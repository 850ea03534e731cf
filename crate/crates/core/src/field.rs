use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Power-law decay model `value ≈ c (1 + |x − center|)^(−delta)` used outside
/// the sampled region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub c: f64,
    pub delta: f64,
    pub center: Point,
}

impl TailModel {
    pub fn new(c: f64, delta: f64, center: Point) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("tail constant {c}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("tail exponent {delta}")));
        }
        Ok(Self { c, delta, center })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = crate::geometry::dist(x, self.center.coords());
        self.c * (1.0 + d).powf(-self.delta)
    }

    /// Fits `c` by least squares on `ln v + delta ln(1 + |x − center|)` with
    /// `delta` held fixed.
    pub fn fit(samples: &[(Point, f64)], delta: f64, center: Point) -> Result<Self> {
        let logs: Vec<f64> = samples
            .iter()
            .filter(|(_, v)| *v > 0.0 && v.is_finite())
            .map(|(x, v)| v.ln() + delta * (1.0 + x.dist(&center)).ln())
            .collect();
        if logs.is_empty() {
            return Self::new(0.0, delta, center);
        }
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        Self::new(mean.exp(), delta, center)
    }
}

/// Values of a nonnegative function on a finite node set, plus an optional
/// tail model for the region outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub nodes: Vec<Point>,
    #[serde(with = "crate::serde_f64::vec")]
    pub values: Vec<f64>,
    pub tail: Option<TailModel>,
}

impl SampledField {
    pub fn new(nodes: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::NodeMismatch(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidWeight { node: i, value: *v });
        }
        Ok(Self {
            nodes,
            values,
            tail: None,
        })
    }

    pub fn constant(nodes: Vec<Point>, value: f64) -> Result<Self> {
        let values = vec![value; nodes.len()];
        Self::new(nodes, values)
    }

    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Confirms that the nodes coincide with `points` (same order).
    pub fn check_nodes(&self, points: &[Point]) -> Result<()> {
        if self.nodes.len() != points.len() {
            return Err(Error::NodeMismatch(format!(
                "field has {} nodes, measure has {} reference points",
                self.nodes.len(),
                points.len()
            )));
        }
        for (i, (a, b)) in self.nodes.iter().zip(points).enumerate() {
            if a.dim() != b.dim() {
                return Err(Error::NodeMismatch(format!("node {i} has wrong dimension")));
            }
            let scale = 1.0 + b.norm();
            if a.dist(b) > 1e-9 * scale {
                return Err(Error::NodeMismatch(format!(
                    "node {i} at {:?} does not match reference point {:?}",
                    a.0, b.0
                )));
            }
        }
        Ok(())
    }
}
