//! Radial quadrature on the semi-infinite momentum axis.
//!
//! Integrands vary on a logarithmic scale, so the rule is a composite
//! Gauss–Legendre panel rule in y = log k mapped back with dk = k dy.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0_f64, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite log-scale Gauss–Legendre rule for ∫ dk over [p_min, p_max].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    p_min: f64,
    p_max: f64,
    n_panels: usize,
    panel_order: usize,
}

impl RadialGrid {
    pub fn log_legendre(p_min: f64, p_max: f64, n_panels: usize, panel_order: usize) -> Result<Self> {
        if !(p_min > 0.0 && p_max > p_min) {
            return Err(Error::Grid(format!(
                "need 0 < p_min < p_max, got [{p_min}, {p_max}]"
            )));
        }
        if n_panels == 0 || panel_order == 0 {
            return Err(Error::Grid("need at least one panel and one node".into()));
        }
        let (gx, gw) = legendre_rule(panel_order);
        let (ya, yb) = (p_min.ln(), p_max.ln());
        let h = (yb - ya) / n_panels as f64;
        let mut nodes = Vec::with_capacity(n_panels * panel_order);
        let mut weights = Vec::with_capacity(n_panels * panel_order);
        for p in 0..n_panels {
            let (a, b) = (ya + p as f64 * h, ya + (p as f64 + 1.0) * h);
            for (&x, &w) in gx.iter().zip(&gw) {
                let y = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let k = y.exp();
                nodes.push(k);
                weights.push(0.5 * (b - a) * w * k);
            }
        }
        Ok(Self { nodes, weights, p_min, p_max, n_panels, panel_order })
    }

    /// Convenience constructor: ~10 nodes per panel.
    pub fn with_nodes(p_min: f64, p_max: f64, n_nodes: usize) -> Result<Self> {
        let order = 10usize.min(n_nodes.max(1));
        let panels = n_nodes.div_ceil(order).max(1);
        Self::log_legendre(p_min, p_max, panels, order)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| w * f(k))
            .sum()
    }

    /// Same span, twice the panels. Used by refinement-stability checks.
    pub fn refined(&self) -> Self {
        Self::log_legendre(self.p_min, self.p_max, 2 * self.n_panels, self.panel_order)
            .expect("refining a valid grid cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_five_point_matches_reference() {
        let (x, w) = legendre_rule(5);
        // Abramowitz & Stegun 25.4.30
        assert!((x[4] - 0.906179845938664).abs() < 1e-14);
        assert!((x[3] - 0.538469310105683).abs() < 1e-14);
        assert!(x[2].abs() < 1e-15);
        assert!((w[4] - 0.236926885056189).abs() < 1e-14);
        assert!((w[2] - 0.568888888888889).abs() < 1e-14);
    }

    #[test]
    fn legendre_is_exact_for_polynomials() {
        let (x, w) = legendre_rule(8);
        for deg in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn radial_rule_integrates_gaussian_moment() {
        // ∫_0^∞ k^3 e^{-k^2} dk = 1/2
        let g = RadialGrid::log_legendre(1e-4, 1e3, 40, 10).unwrap();
        let v = g.integrate(|k| k.powi(3) * (-k * k).exp());
        assert!((v - 0.5).abs() / 0.5 < 1e-10, "got {v}");
    }

    #[test]
    fn nodes_strictly_increasing_and_positive() {
        let g = RadialGrid::with_nodes(1e-4, 1e3, 400).unwrap();
        assert!(g.nodes()[0] > 0.0);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rejects_bad_spans() {
        assert!(RadialGrid::log_legendre(0.0, 1.0, 4, 4).is_err());
        assert!(RadialGrid::log_legendre(2.0, 1.0, 4, 4).is_err());
    }
}
