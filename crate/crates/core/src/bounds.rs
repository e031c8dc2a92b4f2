//! Row-integral bounds on the weighted scalar kernel: the sup bound K_r
//! (no solutions when < 1), the window-infimum bound K_r(a,b) (small
//! solutions grow when > 1), the weight-family minimization of K_r, and the
//! amplitude scan certifying the second-order character of the transition.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::angular::AngularRule;
use crate::gluon::GluonKernel;
use crate::grid::RadialGrid;
use crate::operators::{Assembly, ZProfile};
use crate::optimize;
use crate::quark::WeightFunction;
use crate::solver::{self, SeedSpec, SolveConfig, SolveMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    NonExistence,
    SmallSolution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    /// K_r or K_r(a,b).
    pub value: f64,
    /// Window (a, b) for the small-solution bound.
    pub window: Option<(f64, f64)>,
    /// Momentum where the extremum over p is attained.
    pub arg_p: f64,
    pub weight: WeightFunction,
    /// Damped value K_r(a,b)/(1 + sup Z² ρ²/(a² inf r²)) at finite amplitude.
    pub damped_value: Option<f64>,
    /// Growth threshold (1 + dρ/μ), d = sup Z²/inf r².
    pub threshold: Option<f64>,
    pub verdict: String,
    /// Set when a family minimization could not improve on its best start.
    pub warning: Option<String>,
}

/// K_r = sup_p ∫dk K(k, p) over grid nodes (UV tail of the weighted
/// integrand included when the assembly has tail correction on and the
/// weight grows).
pub fn kr_sup(assembly: &Assembly) -> Result<BoundReport> {
    let rows = assembly.row_integrals()?;
    let (imax, &value) = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .ok_or_else(|| Error::Invalid("empty grid".into()))?;
    let verdict = if value < 1.0 {
        "no non-trivial solution (K_r < 1)".to_string()
    } else {
        "no exclusion (K_r >= 1)".to_string()
    };
    Ok(BoundReport {
        kind: BoundKind::NonExistence,
        value,
        window: None,
        arg_p: assembly.grid().nodes()[imax],
        weight: assembly.weight().clone(),
        damped_value: None,
        threshold: None,
        verdict,
        warning: None,
    })
}

/// K_r(a, b) = inf_{a<p<b} ∫_a^b dk K(k, p), plus the amplitude-damped value
/// at infimum amplitude ρ and the growth threshold (1 + dρ/μ).
pub fn kr_window(assembly: &Assembly, a: f64, b: f64, rho: f64) -> Result<BoundReport> {
    if !(a >= 0.0 && b > a) {
        return Err(Error::Invalid(format!("empty window [{a}, {b}]")));
    }
    let nodes = assembly.grid().nodes();
    let z2 = match assembly.z_profile() {
        ZProfile::Unit => vec![1.0; nodes.len()],
        ZProfile::Fixed(av) => av.iter().map(|&x| 1.0 / (x * x)).collect(),
        ZProfile::SelfConsistent => {
            return Err(Error::Invalid("window bound needs a fixed Z profile".into()))
        }
    };
    let idx: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i] > a && nodes[i] < b)
        .collect();
    if idx.len() < 2 {
        return Err(Error::Invalid(format!("window [{a}, {b}] holds no grid interior")));
    }
    let mut inf = f64::INFINITY;
    let mut arg_p = nodes[idx[0]];
    for &i in &idx {
        let row = assembly.kernel_row(i)?;
        let s: f64 = idx.iter().map(|&j| row[j]).sum();
        if s < inf {
            inf = s;
            arg_p = nodes[i];
        }
    }
    let mu = assembly.mu();
    let sup_z2 = idx.iter().map(|&i| z2[i]).fold(0.0f64, f64::max);
    let inf_r2 = idx
        .iter()
        .map(|&i| assembly.weight().eval(nodes[i]).powi(2))
        .fold(f64::INFINITY, f64::min);
    let (damped, threshold) = if rho > 0.0 {
        let a_eff = nodes[idx[0]].max(a);
        if a_eff * a_eff <= rho * mu {
            return Err(Error::Invalid(format!(
                "rho-condition violated: a^2 = {:.3e} <= rho*mu = {:.3e}",
                a_eff * a_eff,
                rho * mu
            )));
        }
        let damp = 1.0 + sup_z2 * rho * rho / (a_eff * a_eff * inf_r2);
        let d = sup_z2 / inf_r2;
        (Some(inf / damp), Some(1.0 + d * rho / mu))
    } else {
        (Some(inf), Some(1.0))
    };
    let verdict = if inf > 1.0 {
        "small solutions grow (K_r(a,b) > 1)".to_string()
    } else {
        "no growth certificate (K_r(a,b) <= 1)".to_string()
    };
    Ok(BoundReport {
        kind: BoundKind::SmallSolution,
        value: inf,
        window: Some((a, b)),
        arg_p,
        weight: assembly.weight().clone(),
        damped_value: damped,
        threshold,
        verdict,
        warning: None,
    })
}

/// Parameter box for the three-parameter weight family (+ tail exponent δ).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightFamilyBox {
    pub alpha: (f64, f64),
    pub c0: (f64, f64),
    pub log10_scale: (f64, f64),
    pub delta: (f64, f64),
}

impl WeightFamilyBox {
    /// Default box around the literature family, δ capped below γ_m.
    pub fn default_for(gamma_m: f64) -> Self {
        Self {
            alpha: (0.5, 1.3),
            c0: (0.5, 40.0),
            log10_scale: (2.0, 6.0),
            delta: (0.05, (gamma_m - 0.02).max(0.06)),
        }
    }
}

/// Derivative-free minimization of K_r over the weight family with
/// multistart. Returns the best bound and the weight realizing it.
pub fn minimize_kr(
    kernel: &GluonKernel,
    grid: &RadialGrid,
    angular: &AngularRule,
    z_profile: ZProfile,
    family: &WeightFamilyBox,
    n_starts: usize,
    seed: u64,
) -> Result<BoundReport> {
    let mu = kernel.reference_scale();
    let mut assembly = Assembly::new(
        kernel.clone(),
        grid.clone(),
        angular,
        WeightFunction::Unit,
        z_profile,
        true,
    )?;
    let lo = [family.alpha.0, family.c0.0, family.log10_scale.0, family.delta.0];
    let hi = [family.alpha.1, family.c0.1, family.log10_scale.1, family.delta.1];
    let x0 = [0.9, 10.0, 4.0, 0.5 * (family.delta.0 + family.delta.1)];
    let mut best_eval = f64::INFINITY;
    let mut objective = |x: &[f64]| -> f64 {
        assembly.set_weight(WeightFunction::ThreeParam {
            alpha: x[0],
            c0: x[1],
            scale: 10f64.powf(x[2]),
            delta: x[3],
            mu,
        });
        match kr_sup(&assembly) {
            Ok(r) => {
                best_eval = best_eval.min(r.value);
                r.value
            }
            Err(_) => f64::INFINITY,
        }
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let res = optimize::multistart(&mut objective, &x0, &lo, &hi, n_starts.max(8), &mut rng, 1e-4, 600);
    assembly.set_weight(WeightFunction::ThreeParam {
        alpha: res.x[0],
        c0: res.x[1],
        scale: 10f64.powf(res.x[2]),
        delta: res.x[3],
        mu,
    });
    let mut report = kr_sup(&assembly)?;
    let start_value = {
        assembly.set_weight(WeightFunction::ThreeParam { alpha: x0[0], c0: x0[1], scale: 10f64.powf(x0[2]), delta: x0[3], mu });
        kr_sup(&assembly)?.value
    };
    if res.value >= start_value - 1e-12 {
        report.warning = Some("no start improved on the default family point".into());
    }
    report.verdict = if report.value < 1.0 {
        format!("no non-trivial solution (min K_r = {:.4} < 1)", report.value)
    } else {
        format!("no exclusion (min K_r = {:.4} >= 1)", report.value)
    };
    Ok(report)
}

/// One row of the transition scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub control: f64,
    pub amplitude: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionScan {
    pub rows: Vec<ScanRow>,
    /// β maximizing linearity of ‖B‖^β against the control.
    pub beta: f64,
    /// Zero crossing of the fitted line.
    pub fitted_critical: f64,
}

/// Solve the chiral system at each control value (toy kernel: γ_m) and fit
/// ‖B‖_∞^β against the control near the transition. The fitted zero
/// crossing cross-validates the spectral critical point.
pub fn transition_order_scan(
    kernel_of: impl Fn(f64) -> GluonKernel + Sync,
    controls: &[f64],
    grid: &RadialGrid,
    angular: &AngularRule,
) -> Result<TransitionScan> {
    use rayon::prelude::*;
    let rows: Vec<ScanRow> = controls
        .par_iter()
        .map(|&c| {
            let kernel = kernel_of(c);
            let asm = Assembly::new(
                kernel,
                grid.clone(),
                angular,
                WeightFunction::Unit,
                ZProfile::Fixed(vec![1.0; grid.len()]),
                false,
            )?;
            let cfg = SolveConfig {
                mode: SolveMode::Asymptotic,
                m_param: 0.0,
                damping: 0.4,
                tol: 1e-11,
                max_iters: 60_000,
                seed: SeedSpec::ChiralGaussian { amplitude: 0.5, scale: 1.0 },
                anderson: false,
            };
            match solver::solve(&cfg, &asm) {
                Ok(rep) => Ok(ScanRow {
                    control: c,
                    amplitude: rep.b_sup,
                    converged: rep.converged,
                    iterations: rep.iterations,
                }),
                Err(_) => Ok(ScanRow { control: c, amplitude: f64::NAN, converged: false, iterations: 0 }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    // fit ||B||^beta = s (c - c0) over converged nonzero rows, beta by best linearity
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged && r.amplitude > 1e-10)
        .map(|r| (r.control, r.amplitude))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Invalid("too few converged scan points for a fit".into()));
    }
    let mut best = (f64::INFINITY, 2.0, 0.0);
    let mut beta = 1.2;
    while beta <= 3.2 {
        let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let n = pts.len() as f64;
        for &(c, a) in &pts {
            let y = a.powf(beta);
            sx += c;
            sy += y;
            sxx += c * c;
            sxy += c * y;
            syy += y * y;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icpt = (sy - slope * sx) / n;
        let mut ss = 0.0;
        let mut tot = 0.0;
        let ybar = sy / n;
        for &(c, a) in &pts {
            let y = a.powf(beta);
            ss += (y - slope * c - icpt).powi(2);
            tot += (y - ybar).powi(2);
        }
        let rel = ss / tot.max(1e-300);
        if rel < best.0 {
            best = (rel, beta, -icpt / slope);
        }
        let _ = syy;
        beta += 0.02;
    }
    Ok(TransitionScan { rows, beta: best.1, fitted_critical: best.2 })
}

/// Random admissible weights for sandwich-style property checks.
pub fn random_weight(rng: &mut impl Rng, gamma_m: f64, mu: f64) -> WeightFunction {
    WeightFunction::ThreeParam {
        alpha: rng.gen_range(0.6..1.1),
        c0: rng.gen_range(1.0..20.0),
        scale: 10f64.powf(rng.gen_range(2.5..5.0)),
        delta: rng.gen_range(0.08..(gamma_m * 0.9).max(0.1)),
        mu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(gm: f64) -> (GluonKernel, RadialGrid, AngularRule) {
        (
            GluonKernel::simplest_extension(gm, 1.0),
            RadialGrid::with_nodes(1e-4, 1e3, 240).unwrap(),
            AngularRule::new(48),
        )
    }

    #[test]
    fn zero_kernel_scaling_gives_zero_bound() {
        // emulate the zero kernel by scaling γ_m to (near) zero
        let (k, g, a) = toy(1e-12);
        let asm = Assembly::new(k, g, &a, WeightFunction::Unit, ZProfile::Unit, false).unwrap();
        let r = kr_sup(&asm).unwrap();
        assert!(r.value < 1e-9);
        assert!(r.verdict.contains("no non-trivial solution"));
    }

    #[test]
    fn window_shrunk_to_near_single_node_matches_hand_sum() {
        let (k, g, a) = toy(1.0);
        let asm = Assembly::new(k, g, &a, WeightFunction::Unit, ZProfile::Unit, false).unwrap();
        let nodes = asm.grid().nodes();
        let i = 120;
        let (lo, hi) = (nodes[i] * 0.999, nodes[i + 1] * 1.001);
        let r = kr_window(&asm, lo, hi, 0.0).unwrap();
        // hand sum over the two enclosed nodes at the worse of the two rows
        let row_i = asm.kernel_row(i).unwrap();
        let row_j = asm.kernel_row(i + 1).unwrap();
        let si = row_i[i] + row_i[i + 1];
        let sj = row_j[i] + row_j[i + 1];
        let expect = si.min(sj);
        assert!((r.value / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_leaves_damping_at_one() {
        let (k, g, a) = toy(1.0);
        let asm = Assembly::new(k, g, &a, WeightFunction::Unit, ZProfile::Unit, false).unwrap();
        let r = kr_window(&asm, 0.0, 4.0, 0.0).unwrap();
        assert_eq!(r.damped_value.unwrap(), r.value);
        assert_eq!(r.threshold.unwrap(), 1.0);
    }

    #[test]
    fn window_monotone_in_width() {
        let (k, g, a) = toy(1.0);
        let mut asm = Assembly::new(k, g, &a, WeightFunction::Unit, ZProfile::Unit, false).unwrap();
        asm.set_weight(WeightFunction::three_param_default(0.33, 1.0));
        let narrow = kr_window(&asm, 0.5, 2.0, 0.0).unwrap().value;
        let wide = kr_window(&asm, 0.25, 4.0, 0.0).unwrap().value;
        assert!(wide >= narrow, "{wide} < {narrow}");
    }
}
