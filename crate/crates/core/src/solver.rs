//! Damped fixed-point solution of the coupled system B = T(A,B),
//! A = T_Z(A,B), at infinite renormalization scale or in subtracted
//! finite-scale form.

use serde::{Deserialize, Serialize};

use crate::operators::{Assembly, ZProfile};
use crate::quark::{measure_tail, QuarkState, TailBranch, TailSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// B = T(A,B), A = T_Z(A,B) directly (μ_ren → ∞).
    Asymptotic,
    /// B = m(μ_ren) + T(p) − T(μ_ren), A = 1 + T_Z(p) − T_Z(μ_ren), with
    /// μ_ren pinned to the last grid node.
    FiniteRenorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedSpec {
    /// B(p) = amplitude · exp(−p²/(2 scale²)), A ≡ 1.
    ChiralGaussian { amplitude: f64, scale: f64 },
    Constant { value: f64 },
    FromSamples { a: Vec<f64>, b: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub mode: SolveMode,
    /// Current-mass input: m(μ_ren) in FiniteRenorm mode; ignored in
    /// Asymptotic mode (see [`solve_with_target_tail`] for fixing c1).
    pub m_param: f64,
    /// Damping η ∈ (0, 1].
    pub damping: f64,
    /// Relative sup-norm tolerance on both channels.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: SeedSpec,
    /// Depth-3 Anderson mixing of the update.
    pub anderson: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mode: SolveMode::Asymptotic,
            m_param: 0.0,
            damping: 0.3,
            tol: 1e-10,
            max_iters: 40_000,
            seed: SeedSpec::ChiralGaussian { amplitude: 0.5, scale: 1.0 },
            anderson: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub state: QuarkState,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub measured_tail: Option<TailSpec>,
    pub b_sup: f64,
    pub converged: bool,
    /// The iteration collapsed to the trivial solution.
    pub collapsed: bool,
    pub mass_decreasing: bool,
    pub b_decreasing: bool,
    /// u = r·B decreasing under the assembly's weight.
    pub u_decreasing: bool,
}

pub fn seed_state(spec: &SeedSpec, assembly: &Assembly) -> Result<QuarkState> {
    let grid = assembly.grid().clone();
    let n = grid.len();
    let mu = assembly.mu();
    let (a, b) = match spec {
        SeedSpec::ChiralGaussian { amplitude, scale } => {
            let b = grid
                .nodes()
                .iter()
                .map(|&p| amplitude * (-p * p / (2.0 * scale * scale)).exp())
                .collect();
            (vec![1.0; n], b)
        }
        SeedSpec::Constant { value } => (vec![1.0; n], vec![*value; n]),
        SeedSpec::FromSamples { a, b } => {
            if a.len() != n || b.len() != n {
                return Err(Error::Invalid("seed sample length != grid".into()));
            }
            (a.clone(), b.clone())
        }
    };
    QuarkState::new(grid, a, b, TailSpec::none(assembly.kernel().gamma_m()), mu)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let d = new
        .iter()
        .zip(old)
        .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
    d / sup(old).max(1e-300)
}

/// Depth-limited Anderson mixing on the stacked iterate.
struct Anderson {
    depth: usize,
    xs: Vec<Vec<f64>>,
    gs: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self { depth, xs: Vec::new(), gs: Vec::new() }
    }

    fn next(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        self.xs.push(x.to_vec());
        self.gs.push(gx.to_vec());
        if self.xs.len() > self.depth {
            self.xs.remove(0);
            self.gs.remove(0);
        }
        let m = self.xs.len();
        if m == 1 {
            return gx.to_vec();
        }
        // residuals f_i = g_i − x_i; minimize ‖Σ θ_i f_i‖, Σθ = 1
        let fs: Vec<Vec<f64>> = self
            .xs
            .iter()
            .zip(&self.gs)
            .map(|(x, g)| x.iter().zip(g).map(|(&a, &b)| b - a).collect())
            .collect();
        // reduce to differences against the last residual
        let last = m - 1;
        let k = m - 1;
        let mut ata = vec![0.0; k * k];
        let mut atb = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for d in 0..fs[0].len() {
                    s += (fs[i][d] - fs[last][d]) * (fs[j][d] - fs[last][d]);
                }
                ata[i * k + j] = s;
            }
            let mut s = 0.0;
            for d in 0..fs[0].len() {
                s += (fs[i][d] - fs[last][d]) * fs[last][d];
            }
            atb[i] = -s;
        }
        // ridge for near-singular geometry
        for i in 0..k {
            ata[i * k + i] += 1e-12 * (1.0 + ata[i * k + i].abs());
        }
        let theta = solve_small(&mut ata, &mut atb, k);
        let mut coeff = vec![0.0; m];
        let mut rest = 1.0;
        for i in 0..k {
            coeff[i] = theta[i];
            rest -= theta[i];
        }
        coeff[last] = rest;
        // safeguard: wild extrapolation weights mean the history is
        // degenerate; fall back to the plain update
        if coeff.iter().map(|c| c.abs()).sum::<f64>() > 4.0 {
            return gx.to_vec();
        }
        let dim = x.len();
        let mut out = vec![0.0; dim];
        for (c, g) in coeff.iter().zip(&self.gs) {
            for d in 0..dim {
                out[d] += c * g[d];
            }
        }
        out
    }
}

fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> Vec<f64> {
    // Gaussian elimination with partial pivoting on an n×n system
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        if d.abs() < 1e-300 {
            continue;
        }
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r * n + c] * x[c];
        }
        let d = a[r * n + r];
        x[r] = if d.abs() < 1e-300 { 0.0 } else { s / d };
    }
    x
}

pub fn solve(config: &SolveConfig, assembly: &Assembly) -> Result<SolveReport> {
    if !(config.damping > 0.0 && config.damping <= 1.0) {
        return Err(Error::Invalid(format!("damping {} outside (0,1]", config.damping)));
    }
    if config.tol <= 0.0 {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let mu = assembly.mu();
    let n = assembly.grid().len();
    let coupled = matches!(assembly.z_profile(), ZProfile::SelfConsistent);
    let frozen_a: Option<Vec<f64>> = match assembly.z_profile() {
        ZProfile::Unit => Some(vec![1.0; n]),
        ZProfile::Fixed(a) => Some(a.clone()),
        ZProfile::SelfConsistent => None,
    };
    let seed = seed_state(&config.seed, assembly)?;
    let mut a = match &frozen_a {
        Some(fa) => fa.clone(),
        None => seed.a_values().to_vec(),
    };
    let mut b = seed.b_values().to_vec();
    let mut tail = TailSpec::none(assembly.kernel().gamma_m());
    let eta = config.damping;
    let mut history = Vec::new();
    let mut collapse_count = 0usize;
    let mut converged = false;
    let mut collapsed = false;
    let mut iterations = 0usize;
    let mut anderson = Anderson::new(3);
    for it in 0..config.max_iters {
        iterations = it + 1;
        let state = QuarkState::new(assembly.grid().clone(), a.clone(), b.clone(), tail, mu)?;
        let t = assembly.apply_t(&state);
        let mut b_new: Vec<f64> = match config.mode {
            SolveMode::Asymptotic => t,
            SolveMode::FiniteRenorm => {
                let t_ren = t[n - 1];
                t.iter().map(|&v| config.m_param + v - t_ren).collect()
            }
        };
        let mut a_new = if coupled {
            let tz = assembly.apply_tz(&state);
            match config.mode {
                SolveMode::Asymptotic => tz,
                SolveMode::FiniteRenorm => {
                    let tz_ren = tz[n - 1];
                    tz.iter().map(|&v| 1.0 + v - tz_ren).collect()
                }
            }
        } else {
            a.clone()
        };
        if config.anderson && it > 4 {
            let x: Vec<f64> = b.iter().chain(a.iter()).cloned().collect();
            let gx: Vec<f64> = b_new.iter().chain(a_new.iter()).cloned().collect();
            let mixed = anderson.next(&x, &gx);
            b_new = mixed[..n].to_vec();
            a_new = mixed[n..].to_vec();
        }
        let db = rel_change(&b_new, &b);
        let da = if coupled { rel_change(&a_new, &a) } else { 0.0 };
        history.push(db.max(da));
        for i in 0..n {
            b[i] = (1.0 - eta) * b[i] + eta * b_new[i];
            if coupled {
                a[i] = (1.0 - eta) * a[i] + eta * a_new[i];
            }
        }
        if sup(&b) < 1e-12 * mu {
            collapse_count += 1;
            if collapse_count >= 50 {
                collapsed = true;
                converged = true;
                b.iter_mut().for_each(|v| *v = 0.0);
                break;
            }
        } else {
            collapse_count = 0;
        }
        // refresh the analytic tail used by tail-corrected applications
        if assembly.tail_correction() && it % 25 == 24 {
            let state = QuarkState::new(assembly.grid().clone(), a.clone(), b.clone(), tail, mu)?;
            let x_hi = (assembly.grid().p_max() / mu).ln() - 0.5;
            if x_hi > 4.5 {
                if let Ok(t) = measure_tail(&state, (4.0, x_hi), TailBranch::Auto) {
                    tail = TailSpec { x_onset: x_hi.min(5.0).max(4.0), ..t };
                }
            }
        }
        if db < config.tol && da < config.tol && it > 3 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Solver(format!(
            "no convergence after {} iterations (last residual {:.3e})",
            config.max_iters,
            history.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let x_hi = (assembly.grid().p_max() / mu).ln() - 1.0;
    let mut final_tail = TailSpec::none(assembly.kernel().gamma_m());
    let mut measured = None;
    if !collapsed && x_hi > 4.5 {
        if let Ok(t) = measure_tail(
            &QuarkState::new(assembly.grid().clone(), a.clone(), b.clone(), final_tail, mu)?,
            (4.0, x_hi),
            TailBranch::Auto,
        ) {
            measured = Some(t);
            final_tail = t;
        }
    }
    let state = QuarkState::new(assembly.grid().clone(), a.clone(), b.clone(), final_tail, mu)?;
    let m: Vec<f64> = state.mass_function();
    let mass_decreasing = m.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
    let b_decreasing = b.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
    let nodes = assembly.grid().nodes();
    let u: Vec<f64> = nodes
        .iter()
        .zip(&b)
        .map(|(&p, &bv)| assembly.weight().eval(p) * bv)
        .collect();
    let u_decreasing = u.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
    Ok(SolveReport {
        b_sup: sup(&b),
        state,
        iterations,
        residual_history: history,
        measured_tail: measured,
        converged,
        collapsed,
        mass_decreasing,
        b_decreasing,
        u_decreasing,
    })
}

/// Residual of a state under one exact re-application of the maps.
pub fn fixed_point_residual(config: &SolveConfig, assembly: &Assembly, state: &QuarkState) -> f64 {
    let n = assembly.grid().len();
    let t = assembly.apply_t(state);
    let b = state.b_values();
    let rb = match config.mode {
        SolveMode::Asymptotic => t
            .iter()
            .zip(b)
            .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs())),
        SolveMode::FiniteRenorm => {
            let t_ren = t[n - 1];
            t.iter()
                .zip(b)
                .fold(0.0f64, |m, (&x, &y)| m.max((config.m_param + x - t_ren - y).abs()))
        }
    };
    let ra = if matches!(assembly.z_profile(), ZProfile::SelfConsistent) {
        let tz = assembly.apply_tz(state);
        let a = state.a_values();
        match config.mode {
            SolveMode::Asymptotic => tz
                .iter()
                .zip(a)
                .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs())),
            SolveMode::FiniteRenorm => {
                let tz_ren = tz[n - 1];
                tz.iter()
                    .zip(a)
                    .fold(0.0f64, |m, (&x, &y)| m.max((1.0 + x - tz_ren - y).abs()))
            }
        }
    } else {
        0.0
    };
    (rb / sup(b).max(1e-300)).max(ra / 1.0)
}

/// Check of the M → −M symmetry: the negated solution's residual under the
/// scalar map, which vanishes in the chiral case and is O(m) otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NegationCheck {
    pub residual: f64,
    pub symmetric: bool,
}

pub fn branch_pair(
    config: &SolveConfig,
    assembly: &Assembly,
    report: &SolveReport,
) -> Result<(QuarkState, NegationCheck)> {
    let neg_b: Vec<f64> = report.state.b_values().iter().map(|&v| -v).collect();
    let neg = QuarkState::new(
        assembly.grid().clone(),
        report.state.a_values().to_vec(),
        neg_b,
        TailSpec::none(report.state.tail.gamma_m),
        assembly.mu(),
    )?;
    let res = fixed_point_residual(config, assembly, &neg);
    let tol = (config.tol * 100.0).max(1e-8);
    Ok((neg, NegationCheck { residual: res, symmetric: res < tol }))
}

/// Shooting for a target asymptotic tail coefficient c1: secant iteration on
/// m(μ_ren) in FiniteRenorm mode until the measured c1 matches.
pub fn solve_with_target_tail(
    base: &SolveConfig,
    assembly: &Assembly,
    c1_target: f64,
    rel_tol: f64,
) -> Result<SolveReport> {
    let x_max = (assembly.grid().p_max() / assembly.mu()).ln();
    let measure = |rep: &SolveReport| -> Result<f64> {
        rep.measured_tail
            .filter(|t| t.c1 > 0.0)
            .map(|t| t.c1)
            .ok_or_else(|| Error::TailFit("no massive tail measured during shooting".into()))
    };
    let mut cfg = SolveConfig { mode: SolveMode::FiniteRenorm, ..base.clone() };
    // initial guesses from the pure power tail: m(μ_ren) ≈ c1 / x_max^γ
    let gm = assembly.kernel().gamma_m();
    let mut m0 = c1_target / x_max.powf(gm);
    cfg.m_param = m0;
    let rep0 = solve(&cfg, assembly)?;
    let mut c0 = measure(&rep0)?;
    if (c0 / c1_target - 1.0).abs() < rel_tol {
        return Ok(rep0);
    }
    let mut m1 = m0 * c1_target / c0;
    for _ in 0..20 {
        cfg.m_param = m1;
        let rep1 = solve(&cfg, assembly)?;
        let c1 = measure(&rep1)?;
        if (c1 / c1_target - 1.0).abs() < rel_tol {
            return Ok(rep1);
        }
        let dm = (c1_target - c1) * (m1 - m0) / (c1 - c0);
        m0 = m1;
        c0 = c1;
        m1 += dm;
        if !(m1.is_finite() && m1 > 0.0) {
            return Err(Error::Solver("secant left the physical region".into()));
        }
    }
    Err(Error::Solver(format!(
        "shooting did not reach c1 = {c1_target} within rel tol {rel_tol:.3}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularRule;
    use crate::gluon::GluonKernel;
    use crate::grid::RadialGrid;
    use crate::quark::WeightFunction;

    fn toy_assembly(gm: f64, z: ZProfile) -> Assembly {
        let grid = RadialGrid::with_nodes(1e-4, 1e3, 240).unwrap();
        let ang = AngularRule::new(48);
        Assembly::new(
            GluonKernel::simplest_extension(gm, 1.0),
            grid,
            &ang,
            WeightFunction::three_param_default(0.4, 1.0),
            z,
            false,
        )
        .unwrap()
    }

    #[test]
    fn subcritical_chiral_solve_collapses_to_trivial() {
        let asm = toy_assembly(0.36, ZProfile::Unit); // ~0.5 γ_c
        let cfg = SolveConfig { tol: 1e-10, ..Default::default() };
        let rep = solve(&cfg, &asm).unwrap();
        assert!(rep.collapsed);
        assert_eq!(rep.b_sup, 0.0);
    }

    #[test]
    fn supercritical_chiral_solution_is_positive_and_mass_decreasing() {
        let asm = toy_assembly(1.0, ZProfile::Unit);
        let cfg = SolveConfig { tol: 1e-11, ..Default::default() };
        let rep = solve(&cfg, &asm).unwrap();
        assert!(!rep.collapsed);
        assert!(rep.b_sup > 0.5);
        assert!(rep.state.b_values().iter().all(|&v| v > 0.0));
        assert!(rep.mass_decreasing);
        // fixed-point residual under exact re-application
        let res = fixed_point_residual(&cfg, &asm, &rep.state);
        assert!(res < 10.0 * cfg.tol, "residual {res}");
    }

    #[test]
    fn seed_state_shapes() {
        let asm = toy_assembly(1.0, ZProfile::Unit);
        let s = seed_state(&SeedSpec::ChiralGaussian { amplitude: 0.5, scale: 1.0 }, &asm).unwrap();
        let (a0, b0) = s.evaluate(1e-4);
        assert!((a0 - 1.0).abs() < 1e-12);
        assert!((b0 - 0.5).abs() < 1e-6);
        // decays by e^{1/2} at p = scale
        let (_, b1) = s.evaluate(1.0);
        assert!((b1 / 0.5 - (-0.5f64).exp()).abs() < 1e-3);
        let z = seed_state(&SeedSpec::Constant { value: 0.0 }, &asm).unwrap();
        assert!(z.b_values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn halving_damping_converges_to_the_same_fixed_point() {
        let asm = toy_assembly(0.95, ZProfile::Unit);
        let mut cfg = SolveConfig { tol: 1e-12, ..Default::default() };
        cfg.damping = 0.5;
        let r1 = solve(&cfg, &asm).unwrap();
        cfg.damping = 0.25;
        let r2 = solve(&cfg, &asm).unwrap();
        let d = r1
            .state
            .b_values()
            .iter()
            .zip(r2.state.b_values())
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        assert!(d / r1.b_sup < 1e-9, "paths differ by {d}");
    }

    #[test]
    fn anderson_matches_plain_fixed_point() {
        let asm = toy_assembly(0.95, ZProfile::Unit);
        let plain = solve(&SolveConfig { tol: 1e-12, ..Default::default() }, &asm).unwrap();
        let accel = solve(
            &SolveConfig { tol: 1e-12, anderson: true, ..Default::default() },
            &asm,
        )
        .unwrap();
        let d = plain
            .state
            .b_values()
            .iter()
            .zip(accel.state.b_values())
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        assert!(d / plain.b_sup < 1e-8, "differ by {d}");
        assert!(accel.iterations <= plain.iterations);
    }

    #[test]
    fn chiral_negation_is_a_fixed_point_and_massive_is_not() {
        let asm = toy_assembly(1.0, ZProfile::Unit);
        let cfg = SolveConfig { tol: 1e-11, ..Default::default() };
        let rep = solve(&cfg, &asm).unwrap();
        let (_, check) = branch_pair(&cfg, &asm, &rep).unwrap();
        assert!(check.symmetric, "chiral residual {}", check.residual);

        let cfg_m = SolveConfig {
            mode: SolveMode::FiniteRenorm,
            m_param: 0.05,
            tol: 1e-11,
            ..Default::default()
        };
        let rep_m = solve(&cfg_m, &asm).unwrap();
        let (_, check_m) = branch_pair(&cfg_m, &asm, &rep_m).unwrap();
        assert!(!check_m.symmetric, "massive residual {}", check_m.residual);
    }

    #[test]
    fn trivial_solution_is_its_own_negation() {
        let asm = toy_assembly(0.36, ZProfile::Unit);
        let cfg = SolveConfig::default();
        let rep = solve(&cfg, &asm).unwrap();
        let (neg, check) = branch_pair(&cfg, &asm, &rep).unwrap();
        assert!(check.symmetric);
        assert!(neg.b_values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn positivity_preserved_from_positive_seed() {
        let asm = toy_assembly(1.2, ZProfile::Unit);
        let cfg = SolveConfig { tol: 1e-10, max_iters: 3000, ..Default::default() };
        let rep = solve(&cfg, &asm).unwrap();
        assert!(rep.state.b_values().iter().all(|&v| v > 0.0));
    }
}
