//! Gauss–Legendre rules and the log-spaced radial panels used by the Wolff
//! quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss rule needs at least one node");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_order.
            let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }

    /// Integrates `f` over `[a, b]` after the substitution
    /// `z = a + (b - a)(1 - cos θ)/2`, which absorbs square-root behaviour
    /// at both endpoints.
    pub fn integrate_cosine_mapped<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let len = b - a;
        self.integrate(0.0, PI, |theta| {
            let z = a + 0.5 * len * (1.0 - theta.cos());
            f(z) * 0.5 * len * theta.sin()
        })
    }
}

fn legendre(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if order == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn gauss4() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(4))
}

pub(crate) fn gauss10() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(10))
}

/// Radii and weights (with respect to `d ln r`) of a composite rule on
/// `[r_lo, r_hi]`: panels equally spaced in `ln r`, split at `breaks`, four
/// Gauss points per panel.
#[derive(Debug, Clone, Default)]
pub struct RadialNodes {
    pub radii: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialNodes {
    pub fn log_panels(r_lo: f64, r_hi: f64, panels_per_decade: usize, breaks: &[f64]) -> Self {
        let mut out = RadialNodes::default();
        if !(r_hi > r_lo) || r_lo <= 0.0 {
            return out;
        }
        let (t_lo, t_hi) = (r_lo.ln(), r_hi.ln());
        let step = std::f64::consts::LN_10 / panels_per_decade.max(1) as f64;
        let count = ((t_hi - t_lo) / step).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..=count)
            .map(|k| t_lo + (t_hi - t_lo) * k as f64 / count as f64)
            .collect();
        edges.extend(
            breaks
                .iter()
                .filter(|&&b| b > r_lo && b < r_hi)
                .map(|b| b.ln()),
        );
        edges.sort_by(|a, b| a.total_cmp(b));
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        let rule = gauss4();
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                out.radii.push((mid + half * t).exp());
                out.weights.push(w * half);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let rule = GaussRule::new(4);
        // degree 7 is the highest exact degree for four nodes
        let v = rule.integrate(0.0, 2.0, |x| x.powi(7) + 3.0 * x * x);
        assert!((v - (2f64.powi(8) / 8.0 + 8.0)).abs() < 1e-12);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cosine_map_handles_sqrt_endpoints() {
        let rule = GaussRule::new(10);
        // quarter disk area
        let v = rule.integrate_cosine_mapped(0.0, 1.0, |x| (1.0 - x * x).max(0.0).sqrt());
        assert!((v - PI / 4.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn log_panels_integrate_power_laws() {
        let nodes = RadialNodes::log_panels(0.5, 40.0, 32, &[1.3, 7.0]);
        let v: f64 = nodes
            .radii
            .iter()
            .zip(&nodes.weights)
            .map(|(r, w)| w * r.powf(-1.5))
            .sum();
        let exact = (0.5f64.powf(-1.5) - 40f64.powf(-1.5)) / 1.5;
        assert!((v - exact).abs() < 1e-12 * exact);
    }
}
