//! Analysis dispatch: build the assembly from the resolved config, run the
//! requested computation, emit report.json + CSV tables + summary text.

use std::fmt::Write as _;

use anyhow::{anyhow, Context};
use serde_json::{json, Value};

use gapforge_core::asymptotics::{self, NormFunctional, TailBranchKind};
use gapforge_core::bounds::{self, WeightFamilyBox};
use gapforge_core::certificates;
use gapforge_core::quark::{measure_tail, TailBranch};
use gapforge_core::report::{eigenvector_table, state_table, Table};
use gapforge_core::solver::{self, SeedSpec, SolveConfig, SolveMode};
use gapforge_core::spectral;
use gapforge_core::{AngularRule, Assembly, GluonKernel, RadialGrid, WeightFunction, ZProfile};

use crate::config::{AnalysisConfig, ModelConfig, ResolvedGrid, RunConfig, ZMode};

pub struct AnalysisOutput {
    pub results: Value,
    pub tables: Vec<Table>,
    pub summary: String,
}

fn build_grid(g: &ResolvedGrid) -> anyhow::Result<RadialGrid> {
    Ok(RadialGrid::log_legendre(g.p_min, g.p_max, g.n_panels, g.panel_order)?)
}

fn build_assembly(
    model: &ModelConfig,
    grid: &ResolvedGrid,
    weight: WeightFunction,
    z: ZProfile,
    tail: bool,
) -> anyhow::Result<Assembly> {
    let kernel = model.kernel();
    let g = build_grid(grid)?;
    let ang = AngularRule::new(grid.angular_nodes);
    Ok(Assembly::new(kernel, g, &ang, weight, z, tail)?)
}

pub fn run_analysis(cfg: &RunConfig) -> anyhow::Result<AnalysisOutput> {
    let grid = cfg.grid.resolve(&cfg.model);
    match &cfg.analysis {
        AnalysisConfig::Solve {
            mode,
            m_param,
            damping,
            tol,
            max_iters,
            seed_amplitude,
            seed_scale,
            z_mode,
            tail_correction,
            anderson,
            target_c1,
        } => {
            let solve_mode = match mode.as_str() {
                "asymptotic" => SolveMode::Asymptotic,
                "finite_renorm" => SolveMode::FiniteRenorm,
                other => return Err(anyhow!("unknown solve mode '{other}'")),
            };
            let z = match z_mode {
                ZMode::Unit => ZProfile::Unit,
                ZMode::SelfConsistent => ZProfile::SelfConsistent,
            };
            let asm = build_assembly(&cfg.model, &grid, WeightFunction::Unit, z, *tail_correction)?;
            let sc = SolveConfig {
                mode: solve_mode,
                m_param: *m_param,
                damping: *damping,
                tol: *tol,
                max_iters: *max_iters,
                seed: SeedSpec::ChiralGaussian { amplitude: *seed_amplitude, scale: *seed_scale },
                anderson: *anderson,
            };
            let rep = match target_c1 {
                Some(c1) => solver::solve_with_target_tail(&sc, &asm, *c1, 0.02)
                    .context("shooting for the target tail coefficient")?,
                None => solver::solve(&sc, &asm).context("fixed-point solve")?,
            };
            let mut tables = vec![state_table("state", &rep.state)];
            let mut hist = Table::new("residuals", &["iteration", "residual"]);
            for (i, &r) in rep.residual_history.iter().enumerate() {
                hist.push(vec![i as f64, r]);
            }
            tables.push(hist);
            let results = json!({
                "iterations": rep.iterations,
                "converged": rep.converged,
                "collapsed": rep.collapsed,
                "b_sup": rep.b_sup,
                "mass_decreasing": rep.mass_decreasing,
                "b_decreasing": rep.b_decreasing,
                "u_decreasing": rep.u_decreasing,
                "measured_tail": rep.measured_tail,
            });
            let summary = format!(
                "solve: converged={} collapsed={} iterations={} ||B||={:.6e}\n",
                rep.converged, rep.collapsed, rep.iterations, rep.b_sup
            );
            Ok(AnalysisOutput { results, tables, summary })
        }
        AnalysisConfig::Critical { bracket, rel_tol, sensitivity } => {
            let lambda_at = |control: f64, g: &ResolvedGrid| -> anyhow::Result<f64> {
                let model = cfg.model.with_control(control);
                let asm =
                    build_assembly(&model, g, WeightFunction::Unit, ZProfile::Unit, false)?;
                Ok(spectral::spectral_radius(&asm.linearized()?)?.lambda_max)
            };
            let cp = spectral::critical_coupling(
                |c| {
                    lambda_at(c, &grid).map_err(|e| {
                        gapforge_core::Error::Invalid(format!("lambda evaluation failed: {e}"))
                    })
                },
                *bracket,
                *rel_tol,
            )?;
            // Perron pair and optimal weight at the critical point
            let model_c = cfg.model.with_control(cp.control);
            let asm = build_assembly(&model_c, &grid, WeightFunction::Unit, ZProfile::Unit, false)?;
            let sp = spectral::spectral_radius(&asm.linearized()?)?;
            let rbar = spectral::optimal_weight(
                &sp,
                asm.grid().nodes(),
                model_c.kernel().gamma_m(),
                asm.mu(),
            )?;
            let rbar_increasing = match &rbar {
                WeightFunction::Eigenvector { log_r, .. } => {
                    log_r.windows(2).all(|w| w[1] >= w[0] - 1e-9)
                }
                _ => false,
            };
            let mut results = json!({
                "critical_control": cp.control,
                "control_name": if cfg.model.is_range_model() { "d_over_omega2" } else { "gamma_m" },
                "lambda_bracket": [cp.lambda_lo, cp.lambda_hi],
                "evaluations": cp.evaluations,
                "lambda_at_critical": sp.lambda_max,
                "residual": sp.residual,
                "optimal_weight_increasing": rbar_increasing,
            });
            if *sensitivity && cfg.model.is_range_model() {
                let mut g12 = grid;
                g12.p_max = 12.0;
                let l18 = lambda_at(cp.control, &grid)?;
                let l12 = lambda_at(cp.control, &g12)?;
                results["sensitivity_12_vs_18_gev"] = json!({
                    "lambda_18": l18,
                    "lambda_12": l12,
                    "relative_shift": (l18 - l12).abs() / l18,
                });
            }
            let tables = vec![eigenvector_table("eigenvector", asm.grid().nodes(), &sp)];
            let summary = format!(
                "critical: control={:.6} lambda in [{:.6}, {:.6}]\n",
                cp.control, cp.lambda_lo, cp.lambda_hi
            );
            Ok(AnalysisOutput { results, tables, summary })
        }
        AnalysisConfig::Bounds { minimize, n_starts, window, rho, delta } => {
            let kernel = cfg.model.kernel();
            let gm = kernel.gamma_m();
            let mu = kernel.reference_scale();
            let delta = delta.unwrap_or(gm / 2.0);
            let weight = WeightFunction::three_param_default(delta, mu);
            let asm = build_assembly(&cfg.model, &grid, weight, ZProfile::Unit, true)?;
            let sup = bounds::kr_sup(&asm)?;
            let mut results = json!({ "kr_sup": sup });
            let mut summary = format!(
                "bounds: K_r = {:.5} at p = {:.4} ({})\n",
                sup.value, sup.arg_p, sup.verdict
            );
            if *minimize {
                let g = build_grid(&grid)?;
                let ang = AngularRule::new(grid.angular_nodes);
                let fam = WeightFamilyBox::default_for(gm);
                let min = bounds::minimize_kr(
                    &kernel,
                    &g,
                    &ang,
                    ZProfile::Unit,
                    &fam,
                    *n_starts,
                    cfg.seed,
                )?;
                let _ = write!(
                    summary,
                    "minimized K_r = {:.5} at p = {:.4}\n",
                    min.value, min.arg_p
                );
                results["kr_minimized"] = serde_json::to_value(&min)?;
            }
            if let Some((a, b)) = window {
                let win = bounds::kr_window(&asm, *a, *b, *rho)?;
                let _ = write!(
                    summary,
                    "K_r({a}, {b}) = {:.5} at p = {:.4} ({})\n",
                    win.value, win.arg_p, win.verdict
                );
                results["kr_window"] = serde_json::to_value(&win)?;
            }
            Ok(AnalysisOutput { results, tables: vec![], summary })
        }
        AnalysisConfig::Certify { trials } => {
            let asm = build_assembly(
                &cfg.model,
                &grid,
                WeightFunction::Unit,
                ZProfile::SelfConsistent,
                false,
            )?;
            let cert = certificates::coupled_existence(&asm)?;
            let invariance = if cert.pass {
                Some(certificates::verify_bracket_invariance(&asm, &cert, *trials, cfg.seed)?)
            } else {
                None
            };
            let mut a_minus = Table::new("a_minus", &["p", "a_minus"]);
            let mut a_plus = Table::new("a_plus", &["p", "a_plus"]);
            for (i, &p) in asm.grid().nodes().iter().enumerate() {
                if !cert.a_minus.is_empty() {
                    a_minus.push(vec![p, cert.a_minus[i]]);
                    a_plus.push(vec![p, cert.a_plus[i]]);
                }
            }
            let decreasing_mass = cert.checks.lambda_exceeds_one && cert.checks.rstar_increasing;
            let results = json!({
                "certificate": cert,
                "invariance": invariance,
                "decreasing_mass": decreasing_mass,
                "a_minus_csv": a_minus.to_csv(),
                "a_plus_csv": a_plus.to_csv(),
            });
            let summary = format!(
                "certify: pass={} lambda_at_solution={:.5} lambda_at_bound={:.5} margin={:.4e} ({})\n",
                cert.pass, cert.lambda_at_solution, cert.lambda_at_bound, cert.growth_margin,
                cert.candidate
            );
            Ok(AnalysisOutput { results, tables: vec![a_minus, a_plus], summary })
        }
        AnalysisConfig::Scan { from, to, step } => {
            if !(step > 0.0 && to >= from) {
                return Err(anyhow!("scan needs step > 0 and to >= from"));
            }
            let n = ((to - from) / step + 1.0 + 1e-9).floor() as usize;
            let controls: Vec<f64> = (0..n).map(|i| from + step * i as f64).collect();
            use rayon::prelude::*;
            let rows: Vec<(f64, Value)> = controls
                .par_iter()
                .map(|&c| -> anyhow::Result<(f64, Value)> {
                    let model = cfg.model.with_control(c);
                    let asm = build_assembly(
                        &model,
                        &grid,
                        WeightFunction::Unit,
                        ZProfile::SelfConsistent,
                        false,
                    )?;
                    let cert = certificates::coupled_existence(&asm)?;
                    Ok((
                        c,
                        json!({
                            "control": c,
                            "pass": cert.pass,
                            "lambda_at_solution": cert.lambda_at_solution,
                            "lambda_at_bound": cert.lambda_at_bound,
                            "growth_margin": cert.growth_margin,
                            "candidate": cert.candidate,
                        }),
                    ))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let mut table = Table::new(
                "scan",
                &["control", "pass", "lambda_at_solution", "lambda_at_bound", "growth_margin"],
            );
            let mut summary = String::from("scan:\n");
            for (c, v) in &rows {
                table.push(vec![
                    *c,
                    if v["pass"].as_bool().unwrap() { 1.0 } else { 0.0 },
                    v["lambda_at_solution"].as_f64().unwrap_or(f64::NAN),
                    v["lambda_at_bound"].as_f64().unwrap_or(f64::NAN),
                    v["growth_margin"].as_f64().unwrap_or(f64::NAN),
                ]);
                let _ = writeln!(
                    summary,
                    "  control={:.4} pass={} lambda_sol={:.5}",
                    c, v["pass"], v["lambda_at_solution"]
                );
            }
            let results = json!({
                "rows": rows.into_iter().map(|(_, v)| v).collect::<Vec<_>>(),
                "count": n,
            });
            Ok(AnalysisOutput { results, tables: vec![table], summary })
        }
        AnalysisConfig::VerifyTails { j_values, chiral_j, chi_ps } => {
            let kernel = cfg.model.kernel();
            let gm = kernel.gamma_m();
            let mu = kernel.reference_scale();
            let mut contraction = Table::new(
                "contraction",
                &["j", "chiral", "measured", "window_mean", "predicted"],
            );
            let mut results_rows = Vec::new();
            for &j in j_values {
                let c = asymptotics::contraction_ratio(&kernel, j, TailBranchKind::Massive)?;
                contraction.push(vec![j, 0.0, c.ratio, c.window_mean, c.predicted]);
                results_rows.push(serde_json::to_value(&c)?);
            }
            let cc = asymptotics::contraction_ratio(&kernel, *chiral_j, TailBranchKind::Chiral)?;
            contraction.push(vec![*chiral_j, 1.0, cc.ratio, cc.window_mean, cc.predicted]);
            let chi = asymptotics::chi_suppression(gm, mu, chi_ps, TailBranchKind::Massive)?;
            let mut chi_table = Table::new("chi", &["p", "ratio", "bound"]);
            for r in &chi {
                chi_table.push(vec![r.p, r.ratio, r.bound]);
            }
            // c2 relation on a converged chiral solution of this kernel
            let asm = build_assembly(&cfg.model, &grid, WeightFunction::Unit, ZProfile::Unit, false)?;
            let rep = solver::solve(
                &SolveConfig { tol: 1e-12, damping: 0.5, ..Default::default() },
                &asm,
            )?;
            let x_max = (grid.p_max / mu).ln();
            let c2 = asymptotics::c2_relation(
                &rep.state,
                gm,
                mu * (0.65 * x_max).exp(),
                (3.5, x_max - 0.8),
            )?;
            let results = json!({
                "contraction": results_rows,
                "chiral_contraction": cc,
                "chi": chi,
                "c2": c2,
            });
            let summary = format!(
                "verify-tails: c2 ratio = {:.4}; chiral |ratio| = {:.3}\n",
                c2.ratio,
                cc.ratio.abs()
            );
            Ok(AnalysisOutput { results, tables: vec![contraction, chi_table], summary })
        }
        AnalysisConfig::VerifyNorm { delta_ratios, log_heights, n_scan } => {
            let kernel = cfg.model.kernel();
            let gm = kernel.gamma_m();
            let mu = kernel.reference_scale();
            let mut table = Table::new(
                "norm_ratio",
                &["delta_ratio", "log_height", "r_norm", "best_ratio", "best_n", "target"],
            );
            let mut blocks = Vec::new();
            for &dr in delta_ratios {
                let nf = NormFunctional::new(gm, dr * gm, mu)?;
                let exp = asymptotics::large_norm_ratio(&kernel, &nf, log_heights, *n_scan)?;
                for row in &exp.rows {
                    table.push(vec![
                        dr,
                        row.log_height,
                        row.r_norm,
                        row.best_ratio,
                        row.best_n,
                        exp.target,
                    ]);
                }
                blocks.push(serde_json::to_value(&exp)?);
            }
            let results = json!({ "experiments": blocks });
            let summary = "verify-norm: see norm_ratio.csv\n".to_string();
            Ok(AnalysisOutput { results, tables: vec![table], summary })
        }
    }
}
