//! Perron-root computation for the linearized scalar channel and
//! critical-coupling location.

use serde::{Deserialize, Serialize};

use crate::operators::TcMatrix;
use crate::quark::WeightFunction;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda_max: f64,
    /// Positive Perron eigenvector, normalized to sup-norm 1.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Power iteration with the deterministic seed t ≡ 1 and a Rayleigh-quotient
/// readout. The matrix must be nonnegative with strictly positive rows
/// (checked), which makes the Perron pair unique.
pub fn spectral_radius(m: &TcMatrix) -> Result<SpectralResult> {
    spectral_radius_seeded(m, &vec![1.0; m.n()])
}

pub fn spectral_radius_seeded(m: &TcMatrix, seed: &[f64]) -> Result<SpectralResult> {
    let n = m.n();
    if n == 0 {
        return Err(Error::Invalid("empty matrix".into()));
    }
    for i in 0..n {
        let has_pos = (0..n).any(|j| j != i && m.entry(i, j) > 0.0);
        if !has_pos {
            return Err(Error::Invalid(format!(
                "row {i} has no positive off-diagonal entry; irreducibility check failed"
            )));
        }
    }
    let mut t: Vec<f64> = seed.to_vec();
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let s0 = sup(&t);
    if s0 == 0.0 {
        return Err(Error::Invalid("zero seed vector".into()));
    }
    t.iter_mut().for_each(|v| *v /= s0);
    let tol = 1e-12;
    let max_iters = 50_000;
    let mut lambda = 0.0;
    for it in 0..max_iters {
        let mt = m.apply(&t);
        let s = sup(&mt);
        if s == 0.0 {
            return Err(Error::Invalid("matrix annihilated the iterate".into()));
        }
        let next: Vec<f64> = mt.iter().map(|&v| v / s).collect();
        let delta = t
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        t = next;
        lambda = s;
        if delta < tol {
            // Rayleigh-quotient readout on the converged direction
            let mt = m.apply(&t);
            let num: f64 = t.iter().zip(&mt).map(|(&a, &b)| a * b).sum();
            let den: f64 = t.iter().map(|&a| a * a).sum();
            lambda = num / den;
            let residual = mt
                .iter()
                .zip(&t)
                .fold(0.0f64, |m, (&a, &b)| m.max((a - lambda * b).abs()))
                / sup(&t);
            if residual > 1e-8 {
                return Err(Error::NoConvergence { residual, iterations: it });
            }
            return Ok(SpectralResult { lambda_max: lambda, eigenvector: t, iterations: it, residual });
        }
    }
    Err(Error::NoConvergence { residual: lambda, iterations: max_iters })
}

/// Bisection for λ_max(control) = 1.
///
/// Monotonicity of λ in the control is verified on the bracket endpoints
/// plus the midpoint rather than assumed: the coupled problem can be
/// non-monotone in its control.
pub fn critical_coupling(
    mut lambda_of: impl FnMut(f64) -> Result<f64>,
    (lo, hi): (f64, f64),
    rel_tol: f64,
) -> Result<CriticalPoint> {
    let f_lo = lambda_of(lo)?;
    let f_hi = lambda_of(hi)?;
    if !(f_lo < 1.0 && 1.0 < f_hi) {
        return Err(Error::Bracket(format!(
            "lambda({lo}) = {f_lo:.6}, lambda({hi}) = {f_hi:.6} do not bracket 1"
        )));
    }
    let f_mid = lambda_of(0.5 * (lo + hi))?;
    if !(f_lo < f_mid && f_mid < f_hi) {
        return Err(Error::Bracket(format!(
            "lambda not monotone on bracket: {f_lo:.6}, {f_mid:.6}, {f_hi:.6}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f_lo, f_hi);
    let mut evals = 3;
    while (b - a) > rel_tol * b.abs() {
        let mid = 0.5 * (a + b);
        let fm = lambda_of(mid)?;
        evals += 1;
        if fm < 1.0 {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
        if evals > 200 {
            return Err(Error::Bracket("bisection did not shrink".into()));
        }
    }
    Ok(CriticalPoint {
        control: 0.5 * (a + b),
        lambda_lo: fa,
        lambda_hi: fb,
        evaluations: evals,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub control: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub evaluations: usize,
}

/// Optimal weight r̄(p) = λ/t̄(p) from the Perron pair, with the asymptotic
/// exponent γ_m/λ attached for extension beyond the grid.
pub fn optimal_weight(
    result: &SpectralResult,
    nodes: &[f64],
    gamma_m: f64,
    mu: f64,
) -> Result<WeightFunction> {
    if result.eigenvector.iter().any(|&t| t <= 0.0) {
        return Err(Error::Invalid("eigenvector not strictly positive".into()));
    }
    let log_p: Vec<f64> = nodes.iter().map(|&p| p.ln()).collect();
    let log_r: Vec<f64> = result
        .eigenvector
        .iter()
        .map(|&t| (result.lambda_max / t).ln())
        .collect();
    Ok(WeightFunction::Eigenvector {
        log_p,
        log_r,
        delta: gamma_m / result.lambda_max,
        mu,
    })
}
