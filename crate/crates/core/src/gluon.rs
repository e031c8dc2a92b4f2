//! Gluon interaction models 𝒢(q²).
//!
//! All models are positive and asymptotically perturbative:
//! q² log(q²/μ²) 𝒢(q²) → 4π²γ_m as q² → ∞ (μ ↦ Λ_QCD for the range model).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default range-model parameters (dimensionful, GeV units).
pub const RANGE_TAU: f64 = std::f64::consts::E * std::f64::consts::E - 1.0;
pub const RANGE_MT: f64 = 0.5;
pub const RANGE_LAMBDA_QCD: f64 = 0.234;
/// One-loop anomalous-dimension exponent at N_f = 4.
pub const RANGE_GAMMA_M: f64 = 12.0 / 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum GluonKernel {
    /// 4π²γ_m / (q² log(q²/μ²)); only defined away from the Landau pole,
    /// q² > e·μ².
    Perturbative { gamma_m: f64, mu: f64 },
    /// 4π²γ_m / (max(q², μ²) · log(e + q²/μ²)); finite everywhere.
    SimplestExtension { gamma_m: f64, mu: f64 },
    /// Gaussian infrared term plus a regularized logarithmic tail,
    /// 8π²D/ω⁴ e^{−q²/ω²} + 8π²γ_m 𝓕(q²)/log[τ + (1 + q²/Λ²)²],
    /// 𝓕(q²) = (1 − e^{−q²/(4m_t²)})/q².
    RangeModel {
        gamma_m: f64,
        d: f64,
        omega: f64,
        lambda_qcd: f64,
        tau: f64,
        m_t: f64,
    },
}

impl GluonKernel {
    pub fn perturbative(gamma_m: f64, mu: f64) -> Self {
        Self::Perturbative { gamma_m, mu }
    }

    pub fn simplest_extension(gamma_m: f64, mu: f64) -> Self {
        Self::SimplestExtension { gamma_m, mu }
    }

    /// Range model with literature-conventional defaults; `d` and `omega`
    /// are the configuration inputs.
    pub fn range_model(d: f64, omega: f64) -> Self {
        Self::RangeModel {
            gamma_m: RANGE_GAMMA_M,
            d,
            omega,
            lambda_qcd: RANGE_LAMBDA_QCD,
            tau: RANGE_TAU,
            m_t: RANGE_MT,
        }
    }

    pub fn gamma_m(&self) -> f64 {
        match *self {
            Self::Perturbative { gamma_m, .. }
            | Self::SimplestExtension { gamma_m, .. }
            | Self::RangeModel { gamma_m, .. } => gamma_m,
        }
    }

    /// Reference scale of the perturbative tail (μ, or Λ_QCD for the range
    /// model).
    pub fn reference_scale(&self) -> f64 {
        match *self {
            Self::Perturbative { mu, .. } | Self::SimplestExtension { mu, .. } => mu,
            Self::RangeModel { lambda_qcd, .. } => lambda_qcd,
        }
    }

    /// The perturbative kernel with the same γ_m and matching UV scale.
    pub fn perturbative_equivalent(&self) -> GluonKernel {
        GluonKernel::Perturbative { gamma_m: self.gamma_m(), mu: self.reference_scale() }
    }

    /// q² at which the kernel is continuous but not smooth, if any.
    /// Angular integration splits its θ-range there.
    pub fn kink_q2(&self) -> Option<f64> {
        match *self {
            Self::SimplestExtension { mu, .. } => Some(mu * mu),
            _ => None,
        }
    }

    /// Whether q² (the minimum over an angular sweep is enough) is inside
    /// the kernel's domain of validity.
    pub fn check_range(&self, q2_min: f64) -> Result<()> {
        if let Self::Perturbative { mu, .. } = *self {
            if q2_min <= std::f64::consts::E * mu * mu {
                return Err(Error::KernelDomain(format!(
                    "perturbative kernel needs q > mu*sqrt(e); reachable q2 {q2_min:.6e} <= e*mu^2"
                )));
            }
        }
        Ok(())
    }

    /// Kernel value. For the perturbative kernel callers must have verified
    /// the Landau-pole constraint (see [`check_range`](Self::check_range));
    /// here it is a debug assertion so that hot loops stay branch-light.
    #[inline]
    pub fn value(&self, q2: f64) -> f64 {
        let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        match *self {
            Self::Perturbative { gamma_m, mu } => {
                debug_assert!(q2 > std::f64::consts::E * mu * mu);
                four_pi2 * gamma_m / (q2 * (q2 / (mu * mu)).ln())
            }
            Self::SimplestExtension { gamma_m, mu } => {
                let mu2 = mu * mu;
                four_pi2 * gamma_m / (q2.max(mu2) * (std::f64::consts::E + q2 / mu2).ln())
            }
            Self::RangeModel { gamma_m, d, omega, lambda_qcd, tau, m_t } => {
                let w2 = omega * omega;
                let ir = 2.0 * four_pi2 * d / (w2 * w2) * (-q2 / w2).exp();
                let z = q2 / (4.0 * m_t * m_t);
                // series below q² < 1e-6·m_t² to avoid cancellation in 1−e^{−z}
                let f = if q2 < 1e-6 * m_t * m_t {
                    (1.0 - z / 2.0 + z * z / 6.0) / (4.0 * m_t * m_t)
                } else {
                    (1.0 - (-z).exp()) / q2
                };
                let r = 1.0 + q2 / (lambda_qcd * lambda_qcd);
                ir + 2.0 * four_pi2 * gamma_m * f / (tau + r * r).ln()
            }
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, q2: f64) -> Result<f64> {
        if q2 < 0.0 {
            return Err(Error::KernelDomain(format!("negative q2 {q2}")));
        }
        self.check_range(q2)?;
        Ok(self.value(q2))
    }
}
