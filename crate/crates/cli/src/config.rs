//! Run configuration: JSON in, strictly validated, resolved defaults out.
//! Every report embeds the resolved form verbatim.

use serde::{Deserialize, Serialize};

use gapforge_core::gluon::{RANGE_GAMMA_M, RANGE_LAMBDA_QCD, RANGE_MT, RANGE_TAU};
use gapforge_core::GluonKernel;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub analysis: AnalysisConfig,
    #[serde(default = "default_out")]
    pub output_dir: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// 0 = library default thread pool.
    #[serde(default)]
    pub threads: usize,
}

fn default_schema() -> u32 {
    gapforge_core::report::SCHEMA_VERSION
}

fn default_out() -> String {
    "gapforge-out".into()
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    SimplestExtension {
        gamma_m: f64,
        #[serde(default = "one")]
        mu: f64,
    },
    Perturbative {
        gamma_m: f64,
        #[serde(default = "one")]
        mu: f64,
    },
    RangeModel {
        d_over_omega2: f64,
        #[serde(default = "default_omega")]
        omega: f64,
        #[serde(default = "default_range_gamma")]
        gamma_m: f64,
        #[serde(default = "default_lambda_qcd")]
        lambda_qcd: f64,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default = "default_mt")]
        m_t: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_omega() -> f64 {
    0.5
}

fn default_range_gamma() -> f64 {
    RANGE_GAMMA_M
}

fn default_lambda_qcd() -> f64 {
    RANGE_LAMBDA_QCD
}

fn default_tau() -> f64 {
    RANGE_TAU
}

fn default_mt() -> f64 {
    RANGE_MT
}

impl ModelConfig {
    pub fn kernel(&self) -> GluonKernel {
        match *self {
            Self::SimplestExtension { gamma_m, mu } => GluonKernel::simplest_extension(gamma_m, mu),
            Self::Perturbative { gamma_m, mu } => GluonKernel::perturbative(gamma_m, mu),
            Self::RangeModel { d_over_omega2, omega, gamma_m, lambda_qcd, tau, m_t } => {
                GluonKernel::RangeModel {
                    gamma_m,
                    d: d_over_omega2 * omega * omega,
                    omega,
                    lambda_qcd,
                    tau,
                    m_t,
                }
            }
        }
    }

    pub fn is_range_model(&self) -> bool {
        matches!(self, Self::RangeModel { .. })
    }

    /// Same model at a different control value (γ_m or D/ω²).
    pub fn with_control(&self, value: f64) -> ModelConfig {
        let mut m = self.clone();
        match &mut m {
            ModelConfig::SimplestExtension { gamma_m, .. }
            | ModelConfig::Perturbative { gamma_m, .. } => *gamma_m = value,
            ModelConfig::RangeModel { d_over_omega2, .. } => *d_over_omega2 = value,
        }
        m
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults: 1e−4·μ (toy) or 1e−4 GeV (range model).
    pub p_min: Option<f64>,
    /// Defaults: 1e3·μ (toy) or 18 GeV (range model).
    pub p_max: Option<f64>,
    #[serde(default = "default_panels")]
    pub n_panels: usize,
    #[serde(default = "default_order")]
    pub panel_order: usize,
    #[serde(default = "default_angular")]
    pub angular_nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            p_min: None,
            p_max: None,
            n_panels: default_panels(),
            panel_order: default_order(),
            angular_nodes: default_angular(),
        }
    }
}

fn default_panels() -> usize {
    40
}

fn default_order() -> usize {
    10
}

fn default_angular() -> usize {
    64
}

impl GridConfig {
    pub fn resolve(&self, model: &ModelConfig) -> ResolvedGrid {
        let (pmin_default, pmax_default) = if model.is_range_model() {
            (1e-4, 18.0)
        } else {
            (1e-4, 1e3)
        };
        ResolvedGrid {
            p_min: self.p_min.unwrap_or(pmin_default),
            p_max: self.p_max.unwrap_or(pmax_default),
            n_panels: self.n_panels,
            panel_order: self.panel_order,
            angular_nodes: self.angular_nodes,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResolvedGrid {
    pub p_min: f64,
    pub p_max: f64,
    pub n_panels: usize,
    pub panel_order: usize,
    pub angular_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMode {
    Unit,
    SelfConsistent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisConfig {
    Solve {
        #[serde(default = "default_mode")]
        mode: String, // "asymptotic" | "finite_renorm"
        #[serde(default)]
        m_param: f64,
        #[serde(default = "default_damping")]
        damping: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_seed_amp")]
        seed_amplitude: f64,
        #[serde(default = "one")]
        seed_scale: f64,
        #[serde(default = "default_z_mode")]
        z_mode: ZMode,
        #[serde(default = "truthy")]
        tail_correction: bool,
        #[serde(default)]
        anderson: bool,
        /// Shooting target for the asymptotic tail coefficient c1.
        target_c1: Option<f64>,
    },
    Critical {
        bracket: (f64, f64),
        #[serde(default = "default_crit_tol")]
        rel_tol: f64,
        /// Range model: λ shift when the grid stops at 12 GeV instead of 18.
        #[serde(default)]
        sensitivity: bool,
    },
    Bounds {
        #[serde(default)]
        minimize: bool,
        #[serde(default = "default_starts")]
        n_starts: usize,
        /// Window (a, b) for the small-solution bound.
        window: Option<(f64, f64)>,
        #[serde(default)]
        rho: f64,
        /// δ of the default three-parameter weight; γ_m/2 when absent.
        delta: Option<f64>,
    },
    Certify {
        #[serde(default = "default_trials")]
        trials: usize,
    },
    Scan {
        from: f64,
        to: f64,
        step: f64,
    },
    VerifyTails {
        #[serde(default = "default_js")]
        j_values: Vec<f64>,
        #[serde(default = "default_chiral_j")]
        chiral_j: f64,
        #[serde(default = "default_chi_ps")]
        chi_ps: Vec<f64>,
    },
    VerifyNorm {
        #[serde(default = "default_delta_ratios")]
        delta_ratios: Vec<f64>,
        #[serde(default = "default_heights")]
        log_heights: Vec<f64>,
        #[serde(default = "default_nscan")]
        n_scan: usize,
    },
}

fn default_mode() -> String {
    "asymptotic".into()
}

fn default_damping() -> f64 {
    0.3
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iters() -> usize {
    40_000
}

fn default_seed_amp() -> f64 {
    0.5
}

fn default_z_mode() -> ZMode {
    ZMode::Unit
}

fn truthy() -> bool {
    true
}

fn default_crit_tol() -> f64 {
    1e-3
}

fn default_starts() -> usize {
    8
}

fn default_trials() -> usize {
    100
}

fn default_js() -> Vec<f64> {
    vec![1.0, 2.0]
}

fn default_chiral_j() -> f64 {
    0.5
}

fn default_chi_ps() -> Vec<f64> {
    vec![4.0, 10.0, 100.0]
}

fn default_delta_ratios() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

fn default_heights() -> Vec<f64> {
    vec![6.0, 12.0, 20.0, 30.0]
}

fn default_nscan() -> usize {
    13
}

impl AnalysisConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Solve { .. } => "solve",
            Self::Critical { .. } => "critical",
            Self::Bounds { .. } => "bounds",
            Self::Certify { .. } => "certify",
            Self::Scan { .. } => "scan",
            Self::VerifyTails { .. } => "verify-tails",
            Self::VerifyNorm { .. } => "verify-norm",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{
            "model": {"kind": "simplest_extension", "gamma_m": 1.0},
            "analysis": {"kind": "certify"},
            "surprise": 1
        }"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());
        let bad_model = r#"{
            "model": {"kind": "simplest_extension", "gamma_m": 1.0, "omega": 0.5},
            "analysis": {"kind": "certify"}
        }"#;
        assert!(serde_json::from_str::<RunConfig>(bad_model).is_err());
    }

    #[test]
    fn defaults_resolve_per_model() {
        let toy: RunConfig = serde_json::from_str(
            r#"{"model": {"kind": "simplest_extension", "gamma_m": 0.74},
                "analysis": {"kind": "certify"}}"#,
        )
        .unwrap();
        let g = toy.grid.resolve(&toy.model);
        assert_eq!(g.p_max, 1e3);
        let range: RunConfig = serde_json::from_str(
            r#"{"model": {"kind": "range_model", "d_over_omega2": 2.4},
                "analysis": {"kind": "certify"}}"#,
        )
        .unwrap();
        let g = range.grid.resolve(&range.model);
        assert_eq!(g.p_max, 18.0);
        match range.model.kernel() {
            GluonKernel::RangeModel { d, omega, gamma_m, .. } => {
                assert!((d - 2.4 * 0.25).abs() < 1e-12);
                assert_eq!(omega, 0.5);
                assert!((gamma_m - 0.48).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
