//! Angular integration over the unit 3-sphere.
//!
//! For a function of q² = (p − k)², the S³ integral reduces to
//! ∫₀^π dθ sin²θ · 4π applied to g(q²(θ)). The rule is Gauss–Legendre in θ
//! with the sin²θ measure folded into the weights, so the weights sum to the
//! sphere surface 2π². Kinematic quantities are evaluated in the
//! cancellation-free forms
//!
//! q² = (p − k)² + 2pk·s,   s ≡ 1 − cosθ = 2 sin²(θ/2),
//!
//! and, for the vector channel, the contracted weight
//! p·k + 2(p·q)(k·q)/q² = pk·[(1 − s) + 2((p − k)²(1 − s) − pk·s²)/q²],
//! which stay accurate through the near-diagonal region where the naive
//! p² + k² − 2pk cosθ form loses ~9 digits.

use serde::{Deserialize, Serialize};

use crate::gluon::GluonKernel;
use crate::{Error, Result};

pub const SPHERE_SURFACE: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngularRule {
    theta: Vec<f64>,
    /// Weights including the sin²θ measure and the 4π azimuthal factor.
    weights: Vec<f64>,
    haversine: Vec<f64>, // s = 1 - cos(theta), via 2 sin²(θ/2)
    base_x: Vec<f64>,    // Legendre base rule for segment mapping
    base_w: Vec<f64>,
}

#[inline]
fn q2_of(p: f64, k: f64, s: f64) -> f64 {
    let d = p - k;
    d * d + 2.0 * p * k * s
}

/// Vector-channel contracted weight p·k + 2(p·q)(k·q)/q² in its stable form.
#[inline]
fn z_weight(p: f64, k: f64, s: f64, q2: f64) -> f64 {
    let d2 = (p - k) * (p - k);
    let pk = p * k;
    pk * ((1.0 - s) + 2.0 * (d2 * (1.0 - s) - pk * s * s) / q2)
}

impl AngularRule {
    /// Gauss–Legendre rule in θ on [0, π] with n nodes (default used
    /// throughout the crate: 64).
    pub fn new(n: usize) -> Self {
        let (gx, gw) = crate::grid::legendre_rule(n);
        let half_pi = 0.5 * std::f64::consts::PI;
        let mut theta = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut haversine = Vec::with_capacity(n);
        for (&x, &w) in gx.iter().zip(&gw) {
            let th = half_pi * (x + 1.0);
            let sth = th.sin();
            theta.push(th);
            weights.push(4.0 * std::f64::consts::PI * half_pi * w * sth * sth);
            let sh = (0.5 * th).sin();
            haversine.push(2.0 * sh * sh);
        }
        Self { theta, weights, haversine, base_x: gx, base_w: gw }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫_{S³} g(q²(k, p)).
    pub fn integrate(&self, p: f64, k: f64, mut g: impl FnMut(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&w, &s) in self.weights.iter().zip(&self.haversine) {
            acc += w * g(q2_of(p, k, s));
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(Error::AngularDomain(format!(
                "non-finite angular integral at p={p}, k={k}"
            )))
        }
    }

    /// ∫_{S³} g(q²) · (p·k + 2(p·q)(k·q)/q²).
    pub fn integrate_z(&self, p: f64, k: f64, mut g: impl FnMut(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&w, &s) in self.weights.iter().zip(&self.haversine) {
            let q2 = q2_of(p, k, s);
            acc += w * g(q2) * z_weight(p, k, s, q2);
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(Error::AngularDomain(format!(
                "non-finite vector-channel angular integral at p={p}, k={k}"
            )))
        }
    }

    /// θ segments for a kernel: split at the kernel's non-smooth q² point
    /// when it falls inside the reachable range.
    fn segments(&self, p: f64, k: f64, kernel: &GluonKernel) -> [Option<(f64, f64)>; 2] {
        if let Some(q2k) = kernel.kink_q2() {
            if p > 0.0 && k > 0.0 {
                let c = (p * p + k * k - q2k) / (2.0 * p * k);
                if c.abs() < 1.0 {
                    let th = c.acos();
                    return [Some((0.0, th)), Some((th, std::f64::consts::PI))];
                }
            }
        }
        [Some((0.0, std::f64::consts::PI)), None]
    }

    fn seg_integrate(
        &self,
        p: f64,
        k: f64,
        (a, b): (f64, f64),
        mut f: impl FnMut(f64, f64) -> f64, // (q2, s) -> integrand factor incl. kernel
    ) -> f64 {
        let mut acc = 0.0;
        for (&x, &w) in self.base_x.iter().zip(&self.base_w) {
            let th = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let sth = th.sin();
            let sh = (0.5 * th).sin();
            let s = 2.0 * sh * sh;
            let q2 = q2_of(p, k, s);
            acc += 0.5 * (b - a) * w * 4.0 * std::f64::consts::PI * sth * sth * f(q2, s);
        }
        acc
    }

    /// ∫_{S³} 𝒢(q²) for a gluon kernel, splitting at its kink when present.
    /// The perturbative kernel is a domain error whenever the reachable q²
    /// range touches its Landau region.
    pub fn integrate_kernel(&self, p: f64, k: f64, kernel: &GluonKernel) -> Result<f64> {
        kernel.check_range(q2_of(p, k, 0.0))?;
        let segs = self.segments(p, k, kernel);
        let mut acc = 0.0;
        for seg in segs.into_iter().flatten() {
            acc += self.seg_integrate(p, k, seg, |q2, _| kernel.value(q2));
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(Error::AngularDomain(format!(
                "non-finite kernel integral at p={p}, k={k}"
            )))
        }
    }

    /// Vector-channel version of [`integrate_kernel`](Self::integrate_kernel).
    pub fn integrate_kernel_z(&self, p: f64, k: f64, kernel: &GluonKernel) -> Result<f64> {
        kernel.check_range(q2_of(p, k, 0.0))?;
        let segs = self.segments(p, k, kernel);
        let mut acc = 0.0;
        for seg in segs.into_iter().flatten() {
            acc += self.seg_integrate(p, k, seg, |q2, s| kernel.value(q2) * z_weight(p, k, s, q2));
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(Error::AngularDomain(format!(
                "non-finite vector-channel kernel integral at p={p}, k={k}"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sphere_surface() {
        for n in [16, 64, 128] {
            let r = AngularRule::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!(
                (s / SPHERE_SURFACE - 1.0).abs() < 1e-12,
                "n={n}: sum {s} vs {SPHERE_SURFACE}"
            );
        }
    }

    #[test]
    fn inverse_q2_closed_form_at_p2_k1() {
        let r = AngularRule::new(64);
        let v = r.integrate(2.0, 1.0, |q2| 1.0 / q2).unwrap();
        let exact = SPHERE_SURFACE / 4.0; // 2π²/max(p²,k²) ≈ 4.9348
        assert!((v / exact - 1.0).abs() < 1e-12);
        assert!((exact - 4.9348022005446).abs() < 1e-10);
    }

    #[test]
    fn k_zero_reduces_to_constant_integrand() {
        let r = AngularRule::new(64);
        for p in [0.3, 1.0, 7.5] {
            let v = r.integrate(p, 0.0, |q2| 1.0 / q2).unwrap();
            assert!((v - SPHERE_SURFACE / (p * p)).abs() / v.abs() < 1e-14);
        }
    }

    #[test]
    fn unit_integrand_gives_surface() {
        let r = AngularRule::new(64);
        let v = r.integrate(1.0, 1.0, |_| 1.0).unwrap();
        assert!((v / SPHERE_SURFACE - 1.0).abs() < 1e-13);
    }

    #[test]
    fn z_channel_inverse_q2_vanishes_on_diagonal() {
        let r = AngularRule::new(64);
        for x in [0.1, 1.0, 10.0] {
            let v = r.integrate_z(x, x, |q2| 1.0 / q2).unwrap();
            assert!(v.abs() < 1e-12, "p=k={x}: {v}");
        }
    }

    #[test]
    fn z_channel_large_p_log_kernel_formula() {
        // g = 1/(q² log(q²/μ²)), p ≫ k → 3π² k²/(p² log²(p²/μ²)) within 5%
        let r = AngularRule::new(96);
        let (p, k) = (100.0, 1.0);
        let v = r.integrate_z(p, k, |q2| 1.0 / (q2 * q2.ln())).unwrap();
        let pred = 3.0 * std::f64::consts::PI.powi(2) * k * k / (p * p * (p * p).ln().powi(2));
        assert!((v / pred - 1.0).abs() < 0.05, "{v} vs {pred}");
    }

    #[test]
    fn zero_kernel_integrates_to_zero() {
        let r = AngularRule::new(32);
        assert_eq!(r.integrate_z(2.0, 3.0, |_| 0.0).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_integrand_is_domain_error() {
        let r = AngularRule::new(64);
        // pole of 1/q⁴ at q²→0 sits inside the range when p=k; force a NaN
        let res = r.integrate(1.0, 1.0, |q2| {
            if q2 < 1e-4 {
                f64::NAN
            } else {
                1.0 / q2
            }
        });
        assert!(res.is_err());
    }

    #[test]
    fn doubling_nodes_is_self_convergent() {
        let g = |q2: f64| 1.0 / (q2 + 0.5);
        let a = AngularRule::new(64).integrate(1.3, 0.9, g).unwrap();
        let b = AngularRule::new(128).integrate(1.3, 0.9, g).unwrap();
        assert!((a - b).abs() / b.abs() < 1e-12);
    }
}
