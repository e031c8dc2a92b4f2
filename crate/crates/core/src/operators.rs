//! Discretized channel operators built from a kernel, a radial grid and an
//! angular rule.
//!
//! The scalar channel maps B ↦ (1/4π⁴)∫dk k³ B/(A²k² + B²) ∮𝒢, the vector
//! channel maps A ↦ 1 + (1/12π⁴p²)∫dk k³ A/(A²k² + B²) ∮𝒢·(p·k + 2(p·q)(k·q)/q²).
//! Angular factors are precomputed once per assembly, so operator
//! applications are dense mat-vecs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::AngularRule;
use crate::gluon::GluonKernel;
use crate::grid::RadialGrid;
use crate::quark::{QuarkState, TailSpec, WeightFunction};
use crate::{Error, Result};

const FOUR_PI4: f64 = 4.0 * 97.40909103400243; // 4π⁴
const TWELVE_PI4: f64 = 12.0 * 97.40909103400243;

/// Field-renormalization profile entering the weighted kernel and T_c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ZProfile {
    /// Z ≡ 1.
    Unit,
    /// A fixed A(p) sampled on the grid nodes; Z² = 1/A².
    Fixed(Vec<f64>),
    /// A evolves with the solve; weighted-kernel quantities are not defined
    /// until a profile is supplied.
    SelfConsistent,
}

/// Everything needed to apply the channel operators on one grid.
#[derive(Debug, Clone)]
pub struct Assembly {
    kernel: GluonKernel,
    grid: RadialGrid,
    weight: WeightFunction,
    z_profile: ZProfile,
    tail_correction: bool,
    mu: f64,
    n: usize,
    /// ∮𝒢(q²(k_j, p_i)), row-major.
    g_scalar: Vec<f64>,
    /// ∮𝒢·W(q²(k_j, p_i)), row-major.
    h_vector: Vec<f64>,
    tail: Option<TailAux>,
}

/// Auxiliary quadrature for ∫dk beyond p_max (exact kernel up to x_far,
/// min-form analytic remainder beyond).
#[derive(Debug, Clone)]
struct TailAux {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    xs: Vec<f64>,
    /// ∮𝒢(q²(k_aux_j, p_i)), row-major n × m.
    g_scalar: Vec<f64>,
    x_far: f64,
}

pub const TAIL_X_FAR: f64 = 40.0;

impl Assembly {
    pub fn new(
        kernel: GluonKernel,
        grid: RadialGrid,
        angular: &AngularRule,
        weight: WeightFunction,
        z_profile: ZProfile,
        tail_correction: bool,
    ) -> Result<Self> {
        if matches!(kernel, GluonKernel::Perturbative { .. }) {
            return Err(Error::KernelDomain(
                "perturbative kernel reaches its Landau region on the grid diagonal; \
                 use a regular kernel for operator assembly"
                    .into(),
            ));
        }
        if let ZProfile::Fixed(a) = &z_profile {
            if a.len() != grid.len() {
                return Err(Error::Invalid("fixed A profile length != grid".into()));
            }
        }
        let mu = kernel.reference_scale();
        let n = grid.len();
        let nodes = grid.nodes().to_vec();
        let pairs = |targets: &[f64], sources: &[f64], z_channel: bool| -> Result<Vec<f64>> {
            targets
                .par_iter()
                .map(|&p| {
                    let mut row = Vec::with_capacity(sources.len());
                    for &k in sources {
                        let v = if z_channel {
                            angular.integrate_kernel_z(p, k, &kernel)?
                        } else {
                            angular.integrate_kernel(p, k, &kernel)?
                        };
                        row.push(v);
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()
                .map(|rows| rows.concat())
        };
        let g_scalar = pairs(&nodes, &nodes, false)?;
        let h_vector = pairs(&nodes, &nodes, true)?;
        let tail = if tail_correction {
            let x_max = (grid.p_max() / mu).ln();
            let x_far = TAIL_X_FAR.max(x_max + 5.0);
            let panels = ((x_far - x_max) * 2.0).ceil() as usize;
            let aux = RadialGrid::log_legendre(grid.p_max(), mu * x_far.exp(), panels.max(4), 8)?;
            let g_aux = pairs(&nodes, aux.nodes(), false)?;
            let xs = aux.nodes().iter().map(|&k| (k / mu).ln()).collect();
            Some(TailAux {
                nodes: aux.nodes().to_vec(),
                weights: aux.weights().to_vec(),
                xs,
                g_scalar: g_aux,
                x_far,
            })
        } else {
            None
        };
        Ok(Self { kernel, grid, weight: weight.clone(), z_profile, tail_correction, mu, n, g_scalar, h_vector, tail })
    }

    pub fn kernel(&self) -> &GluonKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    pub fn set_weight(&mut self, w: WeightFunction) {
        self.weight = w;
    }

    pub fn z_profile(&self) -> &ZProfile {
        &self.z_profile
    }

    pub fn set_z_profile(&mut self, z: ZProfile) -> Result<()> {
        if let ZProfile::Fixed(a) = &z {
            if a.len() != self.n {
                return Err(Error::Invalid("fixed A profile length != grid".into()));
            }
        }
        self.z_profile = z;
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn tail_correction(&self) -> bool {
        self.tail_correction
    }

    /// Z²(k_j) for weighted-kernel quantities.
    fn z2(&self) -> Result<Vec<f64>> {
        match &self.z_profile {
            ZProfile::Unit => Ok(vec![1.0; self.n]),
            ZProfile::Fixed(a) => Ok(a.iter().map(|&a| 1.0 / (a * a)).collect()),
            ZProfile::SelfConsistent => Err(Error::Invalid(
                "weighted-kernel quantities need a fixed Z profile; supply one with set_z_profile"
                    .into(),
            )),
        }
    }

    /// Tail add-on for the scalar channel: ∫_{p_max}^∞ dk k³ B_t/(k² + B_t²) ∮𝒢 / 4π⁴
    /// with A → 1 beyond the grid, plus the min-form remainder beyond x_far,
    /// γ_m ∫ B_t(x)/x dx (constant in p for k ≥ p_max ≥ p).
    fn scalar_tail_terms(&self, tail: &TailSpec) -> Option<(Vec<f64>, f64)> {
        let aux = self.tail.as_ref()?;
        if tail.c1 == 0.0 && !(tail.include_c2 && tail.c2 != 0.0) {
            return None;
        }
        let m = aux.nodes.len();
        let mut f = Vec::with_capacity(m);
        for j in 0..m {
            let b = tail.value(aux.xs[j]);
            let k = aux.nodes[j];
            f.push(aux.weights[j] * k.powi(3) * b / (k * k + b * b) / FOUR_PI4);
        }
        let per_row: Vec<f64> = (0..self.n)
            .map(|i| {
                let row = &aux.g_scalar[i * m..(i + 1) * m];
                row.iter().zip(&f).map(|(&g, &f)| g * f).sum()
            })
            .collect();
        // remainder: γ_m ∫_{x_far}^{x_big} B_t(x)/x dx via GL in ln x
        let gm = self.kernel.gamma_m();
        let (gx, gw) = crate::grid::legendre_rule(40);
        let (ta, tb) = (aux.x_far.ln(), (1e6f64).ln());
        let mut rem = 0.0;
        for (&x, &w) in gx.iter().zip(&gw) {
            let t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * x;
            rem += 0.5 * (tb - ta) * w * tail.value(t.exp());
        }
        Some((per_row, gm * rem))
    }

    /// Scalar-channel image B'(p_i) = (1/4π⁴) ∫dk k³ B/(A²k² + B²) ∮𝒢.
    pub fn apply_t(&self, state: &QuarkState) -> Vec<f64> {
        let k = self.grid.nodes();
        let w = self.grid.weights();
        let a = state.a_values();
        let b = state.b_values();
        let f: Vec<f64> = (0..self.n)
            .map(|j| w[j] * k[j].powi(3) * b[j] / (a[j] * a[j] * k[j] * k[j] + b[j] * b[j]) / FOUR_PI4)
            .collect();
        let tail = self.scalar_tail_terms(&state.tail);
        let mut out: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.g_scalar[i * self.n..(i + 1) * self.n];
                row.iter().zip(&f).map(|(&g, &f)| g * f).sum()
            })
            .collect();
        if let Some((per_row, rem)) = tail {
            for i in 0..self.n {
                out[i] += per_row[i] + rem;
            }
        }
        out
    }

    /// Vector-channel image A'(p_i) = 1 + (1/12π⁴p²) ∫dk k³ A/(A²k² + B²) ∮𝒢·W.
    pub fn apply_tz(&self, state: &QuarkState) -> Vec<f64> {
        let k = self.grid.nodes();
        let w = self.grid.weights();
        let a = state.a_values();
        let b = state.b_values();
        let f: Vec<f64> = (0..self.n)
            .map(|j| w[j] * k[j].powi(3) * a[j] / (a[j] * a[j] * k[j] * k[j] + b[j] * b[j]) / TWELVE_PI4)
            .collect();
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.h_vector[i * self.n..(i + 1) * self.n];
                let s: f64 = row.iter().zip(&f).map(|(&h, &f)| h * f).sum();
                1.0 + s / (k[i] * k[i])
            })
            .collect()
    }

    /// Weighted kernel row K(·, p_i) with quadrature weights folded in:
    /// w_j · k_j Z²(k_j) r(p_i)/(4π⁴ r(k_j)) ∮𝒢.
    pub fn kernel_row(&self, i: usize) -> Result<Vec<f64>> {
        let z2 = self.z2()?;
        let k = self.grid.nodes();
        let w = self.grid.weights();
        let rp = self.weight.eval(k[i]);
        let row = &self.g_scalar[i * self.n..(i + 1) * self.n];
        Ok((0..self.n)
            .map(|j| w[j] * k[j] * z2[j] * rp / (FOUR_PI4 * self.weight.eval(k[j])) * row[j])
            .collect())
    }

    /// ∫dk K(k, p_i) for every i, including the UV tail of the weighted
    /// integrand when tail correction is on and the weight grows (δ > 0).
    pub fn row_integrals(&self) -> Result<Vec<f64>> {
        let z2 = self.z2()?;
        let k = self.grid.nodes();
        let w = self.grid.weights();
        let inv_r: Vec<f64> = k.iter().map(|&k| 1.0 / self.weight.eval(k)).collect();
        let base: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.g_scalar[i * self.n..(i + 1) * self.n];
                let s: f64 = (0..self.n).map(|j| w[j] * k[j] * z2[j] * inv_r[j] * row[j]).sum();
                s / FOUR_PI4
            })
            .collect();
        let mut tail_per_row = vec![0.0; self.n];
        if self.tail_correction && self.weight.delta() > 0.0 {
            if let Some(aux) = &self.tail {
                let m = aux.nodes.len();
                let f: Vec<f64> = (0..m)
                    .map(|j| {
                        aux.weights[j] * aux.nodes[j]
                            / (FOUR_PI4 * self.weight.eval(aux.nodes[j]))
                    })
                    .collect();
                for i in 0..self.n {
                    let row = &aux.g_scalar[i * m..(i + 1) * m];
                    tail_per_row[i] = row.iter().zip(&f).map(|(&g, &f)| g * f).sum();
                }
                // min-form remainder: γ_m ∫_{x_far}^{x_big} dx / (x r(μ e^x))
                let gm = self.kernel.gamma_m();
                let (gx, gw) = crate::grid::legendre_rule(40);
                let (ta, tb) = (aux.x_far.ln(), (1e6f64).ln());
                let mut rem = 0.0;
                for (&x, &wgt) in gx.iter().zip(&gw) {
                    let t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * x;
                    let xx = t.exp();
                    rem += 0.5 * (tb - ta) * wgt / self.weight_at_x(xx);
                }
                for t in tail_per_row.iter_mut() {
                    *t += gm * rem;
                }
            }
        }
        Ok((0..self.n)
            .map(|i| self.weight.eval(k[i]) * (base[i] + tail_per_row[i]))
            .collect())
    }

    /// Weight at huge momenta p = μ e^x without overflowing p².
    fn weight_at_x(&self, x: f64) -> f64 {
        if x < 300.0 {
            self.weight.eval(self.mu * x.exp())
        } else {
            match &self.weight {
                WeightFunction::ThreeParam { c0, delta, .. } => c0 + x.powf(*delta),
                WeightFunction::Eigenvector { log_p, log_r, delta, mu } => {
                    let x_n = (log_p[log_p.len() - 1] - mu.ln()).max(1e-12);
                    log_r[log_r.len() - 1].exp() * (x / x_n).powf(*delta)
                }
                WeightFunction::Unit => 1.0,
            }
        }
    }

    /// Dense linearization of the scalar channel at B → 0 with r ≡ 1:
    /// M_ij = w_j k_j Z²(k_j) ∮𝒢(q²(k_j, p_i)) / 4π⁴.
    pub fn linearized(&self) -> Result<TcMatrix> {
        let z2 = self.z2()?;
        let k = self.grid.nodes();
        let w = self.grid.weights();
        let mut data = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let row = &self.g_scalar[i * self.n..(i + 1) * self.n];
            for j in 0..self.n {
                data[i * self.n + j] = w[j] * k[j] * z2[j] * row[j] / FOUR_PI4;
            }
        }
        Ok(TcMatrix { n: self.n, data })
    }

    /// Sign split of the vector channel. Never fails structurally: the
    /// clipped operators are exact regardless of the sign pattern, which is
    /// reported (with a relative floor for noise) rather than assumed.
    pub fn split_z(&self) -> SplitZ {
        let n = self.n;
        let k = self.grid.nodes().to_vec();
        let w = self.grid.weights().to_vec();
        let mut h_plus = vec![0.0; n * n];
        let mut h_minus = vec![0.0; n * n];
        for (i, (hp, hm)) in h_plus.iter_mut().zip(h_minus.iter_mut()).enumerate() {
            let h = self.h_vector[i];
            if h > 0.0 {
                *hp = h;
            } else {
                *hm = h;
            }
        }
        const FLOOR_REL: f64 = 1e-3;
        let mut kstar = vec![0.0; n];
        let mut violations = 0usize;
        let mut worst_blip: f64 = 0.0;
        for i in 0..n {
            let row = &self.h_vector[i * n..(i + 1) * n];
            let maxmag = row.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let floor = FLOOR_REL * maxmag;
            // sign runs above the noise floor
            let mut runs: Vec<i8> = Vec::new();
            for &v in row.iter() {
                let s = if v > floor {
                    1
                } else if v < -floor {
                    -1
                } else {
                    continue;
                };
                if runs.last() != Some(&s) {
                    runs.push(s);
                }
            }
            // clean patterns: [], [+], [-], [-, +]; anything else deviates
            let clean = matches!(runs.as_slice(), [] | [1] | [-1] | [-1, 1]);
            if !clean {
                violations += 1;
                if runs.first() == Some(&1) {
                    let blip = row
                        .iter()
                        .take_while(|&&v| v >= -floor)
                        .fold(0.0f64, |m, &v| m.max(v / maxmag));
                    worst_blip = worst_blip.max(blip);
                }
            }
            // principal crossing: first negative→positive flip after the row
            // minimum; 0 when the row has no negative part above the floor.
            let jmin = row
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(j, _)| j)
                .unwrap_or(0);
            if row[jmin] < -floor {
                let mut jcross = None;
                for j in jmin..n - 1 {
                    if row[j] < 0.0 && row[j + 1] > 0.0 {
                        jcross = Some(j);
                        break;
                    }
                }
                kstar[i] = match jcross {
                    Some(j) => self.bisect_kstar(k[i], k[j], k[j + 1]),
                    None => self.grid.p_max(),
                };
            }
        }
        SplitZ {
            n,
            nodes: k,
            weights: w,
            h_plus,
            h_minus,
            kstar,
            pattern_violations: violations,
            worst_leading_blip: worst_blip,
        }
    }

    /// Bisection for the continuous crossing of ∮𝒢·W between two nodes.
    fn bisect_kstar(&self, p: f64, mut lo: f64, mut hi: f64) -> f64 {
        let angular = AngularRule::new(48);
        let h = |k: f64| angular.integrate_kernel_z(p, k, &self.kernel).unwrap_or(f64::NAN);
        if !(h(lo) < 0.0 && h(hi) > 0.0) {
            return 0.5 * (lo + hi);
        }
        while (hi - lo) / hi > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Shifted scalar map in u-coordinates: T_Δ(u) = r·T((u + u0)/r) − u0,
    /// with A ≡ 1 and no tail (profiles are compactly supported).
    pub fn apply_t_shifted(&self, u: &[f64], u0: &[f64], working_radius: f64) -> Result<Vec<f64>> {
        if u.len() != self.n || u0.len() != self.n {
            return Err(Error::Invalid("profile length != grid".into()));
        }
        let k = self.grid.nodes();
        let u0_max = u0.iter().fold(0.0f64, |m, &v| m.max(v));
        for (j, &v) in u0.iter().enumerate() {
            if k[j] < self.mu && v != 0.0 {
                return Err(Error::Invalid("shift u0 must vanish below mu".into()));
            }
        }
        if 2.0 * u0_max * working_radius >= self.mu * self.mu {
            return Err(Error::Invalid(format!(
                "shift too large: 2*||u0||*R = {:.3e} >= mu^2",
                2.0 * u0_max * working_radius
            )));
        }
        let w = self.grid.weights();
        let f: Vec<f64> = (0..self.n)
            .map(|j| {
                let r = self.weight.eval(k[j]);
                let b = (u[j] + u0[j]) / r;
                w[j] * k[j].powi(3) * b / (k[j] * k[j] + b * b) / FOUR_PI4
            })
            .collect();
        Ok((0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.g_scalar[i * self.n..(i + 1) * self.n];
                let t: f64 = row.iter().zip(&f).map(|(&g, &f)| g * f).sum();
                self.weight.eval(k[i]) * t - u0[i]
            })
            .collect())
    }
}

/// Dense nonnegative linearization of the scalar channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TcMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TcMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(v).map(|(&m, &v)| m * v).sum()
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().sum())
            .collect()
    }

    /// Scale all entries (used by linearity checks).
    pub fn scaled(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&v| s * v).collect() }
    }
}

/// Clipped sign split of the vector channel, with the crossing table.
#[derive(Debug, Clone)]
pub struct SplitZ {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    h_plus: Vec<f64>,
    h_minus: Vec<f64>,
    /// k*(p_i); 0 when the row has no negative part, p_max when it never
    /// turns positive again.
    pub kstar: Vec<f64>,
    /// Rows whose sign pattern deviates from (negative, then positive) by
    /// more than the relative floor.
    pub pattern_violations: usize,
    pub worst_leading_blip: f64,
}

impl SplitZ {
    /// Bare positive part (no +1): (1/12π⁴p²)∫dk k³ f_A(k) ∮𝒢·W⁺,
    /// f_A = 1/(A(k² + M²)).
    pub fn tz_plus(&self, a: &[f64], m: Option<&[f64]>) -> Vec<f64> {
        self.apply_half(&self.h_plus, a, m)
    }

    /// Bare negative part (≤ 0).
    pub fn tz_minus(&self, a: &[f64], m: Option<&[f64]>) -> Vec<f64> {
        self.apply_half(&self.h_minus, a, m)
    }

    fn apply_half(&self, h: &[f64], a: &[f64], m: Option<&[f64]>) -> Vec<f64> {
        let k = &self.nodes;
        let f: Vec<f64> = (0..self.n)
            .map(|j| {
                let m2 = m.map_or(0.0, |m| m[j] * m[j]);
                self.weights[j] * k[j].powi(3) / (a[j] * (k[j] * k[j] + m2)) / TWELVE_PI4
            })
            .collect();
        (0..self.n)
            .map(|i| {
                let row = &h[i * self.n..(i + 1) * self.n];
                let s: f64 = row.iter().zip(&f).map(|(&h, &f)| h * f).sum();
                s / (k[i] * k[i])
            })
            .collect()
    }

    /// Enforce the strict single-crossing pattern.
    pub fn assert_single_crossing(&self) -> Result<()> {
        if self.pattern_violations > 0 {
            return Err(Error::SplitViolated(format!(
                "{} rows deviate from the single-crossing pattern (worst leading positive {:.2e} of row max)",
                self.pattern_violations, self.worst_leading_blip
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quark::TailBranch;

    fn toy_assembly(gm: f64, tail: bool) -> Assembly {
        let grid = RadialGrid::with_nodes(1e-4, 1e3, 240).unwrap();
        let ang = AngularRule::new(48);
        Assembly::new(
            GluonKernel::simplest_extension(gm, 1.0),
            grid,
            &ang,
            WeightFunction::Unit,
            ZProfile::Unit,
            tail,
        )
        .unwrap()
    }

    fn state_of(asm: &Assembly, f: impl Fn(f64) -> f64, tail: TailSpec) -> QuarkState {
        let g = asm.grid().clone();
        let a = vec![1.0; g.len()];
        let b = g.nodes().iter().map(|&p| f(p)).collect();
        QuarkState::new(g, a, b, tail, asm.mu()).unwrap()
    }

    #[test]
    fn zero_input_maps_to_zero() {
        let asm = toy_assembly(1.0, false);
        let s = state_of(&asm, |_| 0.0, TailSpec::none(1.0));
        let out = asm.apply_t(&s);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_impulse_matches_hand_quadrature() {
        let asm = toy_assembly(0.9, false);
        let j0 = 120;
        let eps = 1e-6;
        let g = asm.grid().clone();
        let mut b = vec![0.0; g.len()];
        b[j0] = eps;
        let s = QuarkState::new(g.clone(), vec![1.0; g.len()], b, TailSpec::none(0.9), 1.0).unwrap();
        let out = asm.apply_t(&s);
        let k0 = g.nodes()[j0];
        let w0 = g.weights()[j0];
        let ang = AngularRule::new(48);
        for &i in &[0usize, 57, 199] {
            let p = g.nodes()[i];
            let gval = ang.integrate_kernel(p, k0, asm.kernel()).unwrap();
            let expect = w0 * k0.powi(3) * eps / (k0 * k0 + eps * eps) * gval / FOUR_PI4;
            assert!((out[i] / expect - 1.0).abs() < 1e-12, "{} vs {}", out[i], expect);
        }
    }

    #[test]
    fn scalar_channel_is_monotone_below_saturation() {
        let asm = toy_assembly(1.0, false);
        // B1 ≤ B2 pointwise, both ≤ k at each node → T(B1) ≤ T(B2)
        let s1 = state_of(&asm, |p| 0.2 * p.min(0.4), TailSpec::none(1.0));
        let s2 = state_of(&asm, |p| 0.5 * p.min(0.8), TailSpec::none(1.0));
        let (t1, t2) = (asm.apply_t(&s1), asm.apply_t(&s2));
        assert!(t1.iter().zip(&t2).all(|(&a, &b)| a <= b + 1e-15));
    }

    #[test]
    fn f_factor_saturates_at_rk_over_z() {
        // f(u,k) = u/(1 + Z²u²/(r²k²)) has max rk/(2Z) at u = rk/Z
        let (r, k, z) = (1.3, 0.7, 1.0);
        let f = |u: f64| u / (1.0 + z * z * u * u / (r * r * k * k));
        let u_star = r * k / z;
        let fmax = f(u_star);
        assert!((fmax - r * k / (2.0 * z)).abs() < 1e-14);
        for du in [-0.1, -0.01, 0.01, 0.1] {
            assert!(f(u_star * (1.0 + du)) <= fmax);
        }
    }

    #[test]
    fn tc_matrix_matches_small_b_finite_difference() {
        let asm = toy_assembly(0.8, false);
        let m = asm.linearized().unwrap();
        let eps = 1e-8;
        let s = state_of(&asm, |_| eps, TailSpec::none(0.8));
        let fd: Vec<f64> = asm.apply_t(&s).iter().map(|&v| v / eps).collect();
        let lin = m.apply(&vec![1.0; m.n()]);
        for (a, b) in fd.iter().zip(&lin) {
            assert!((a - b).abs() / b.abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn tc_matrix_entries_nonnegative_and_similarity_symmetric() {
        let asm = toy_assembly(0.8, false);
        let m = asm.linearized().unwrap();
        let k = asm.grid().nodes();
        let w = asm.grid().weights();
        let d: Vec<f64> = (0..m.n()).map(|i| (w[i] * k[i]).sqrt()).collect();
        let mut worst = 0.0f64;
        for i in 0..m.n() {
            for j in 0..m.n() {
                assert!(m.entry(i, j) >= 0.0);
                let sym = d[i] * m.entry(i, j) / d[j];
                let tys = d[j] * m.entry(j, i) / d[i];
                let scale = sym.abs().max(tys.abs()).max(1e-300);
                worst = worst.max((sym - tys).abs() / scale);
            }
        }
        assert!(worst < 1e-10, "similarity symmetry violated: {worst}");
    }

    #[test]
    fn unit_weight_kernel_row_drops_weight() {
        let asm = toy_assembly(0.9, false);
        let i = 100;
        let row = asm.kernel_row(i).unwrap();
        let k = asm.grid().nodes();
        let w = asm.grid().weights();
        let ang = AngularRule::new(48);
        let j = 150;
        let g = ang.integrate_kernel(k[i], k[j], asm.kernel()).unwrap();
        let expect = w[j] * k[j] * g / FOUR_PI4;
        assert!((row[j] / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_scaling_leaves_kernel_row_unchanged() {
        let mut asm = toy_assembly(0.9, false);
        asm.set_weight(WeightFunction::three_param_default(0.4, 1.0));
        let r1 = asm.kernel_row(77).unwrap();
        // scaling r ↦ 2r is invisible through the r(p)/r(k) ratio
        if let WeightFunction::ThreeParam { alpha, c0, scale, delta, mu } = *asm.weight() {
            asm.set_weight(WeightFunction::ThreeParam { alpha, c0: c0 * 2.0, scale, delta, mu });
        }
        // note: c0 scaling is NOT an overall scale; emulate true scaling via
        // a wrapper assembly comparison instead: r and 2r differ by the
        // eigenvector table trick
        let log_p: Vec<f64> = asm.grid().nodes().iter().map(|&p| p.ln()).collect();
        let w0 = WeightFunction::three_param_default(0.4, 1.0);
        let log_r: Vec<f64> = asm.grid().nodes().iter().map(|&p| w0.eval(p).ln()).collect();
        let log_r2: Vec<f64> = log_r.iter().map(|&v| v + 2.0f64.ln()).collect();
        asm.set_weight(WeightFunction::Eigenvector { log_p: log_p.clone(), log_r, delta: 0.4, mu: 1.0 });
        let ra = asm.kernel_row(77).unwrap();
        asm.set_weight(WeightFunction::Eigenvector { log_p, log_r: log_r2, delta: 0.4, mu: 1.0 });
        let rb = asm.kernel_row(77).unwrap();
        for ((a, b), c) in ra.iter().zip(&rb).zip(&r1) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            let _ = c;
        }
    }

    #[test]
    fn split_partition_identity() {
        let asm = toy_assembly(1.1, false);
        let split = asm.split_z();
        let n = asm.grid().len();
        let mut rng_state = 12345u64;
        let mut rand = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.5 + (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let a: Vec<f64> = (0..n).map(|_| rand()).collect();
        let s = QuarkState::new(
            asm.grid().clone(),
            a.clone(),
            vec![0.0; n],
            TailSpec::none(1.1),
            1.0,
        )
        .unwrap();
        let tz = asm.apply_tz(&s);
        let tp = split.tz_plus(&a, None);
        let tm = split.tz_minus(&a, None);
        for i in 0..n {
            let lhs = tp[i] + tm[i];
            let rhs = tz[i] - 1.0;
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                "row {i}: {lhs} vs {rhs}"
            );
        }
        assert!(tp.iter().all(|&v| v >= 0.0));
        assert!(tm.iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn toy_kstar_exists_and_is_finite() {
        let asm = toy_assembly(1.1, false);
        let split = asm.split_z();
        assert!(split.kstar.iter().all(|k| k.is_finite()));
        // around p = μ the crossing sits near 1.5μ (brute-force scan agrees)
        let i = asm
            .grid()
            .nodes()
            .iter()
            .position(|&p| p > 1.0)
            .unwrap();
        assert!((split.kstar[i] - 1.49).abs() < 0.1, "k*(mu) = {}", split.kstar[i]);
    }

    #[test]
    fn shifted_map_reduces_to_t_at_zero_shift() {
        let asm = toy_assembly(1.0, false);
        let n = asm.grid().len();
        let u: Vec<f64> = asm.grid().nodes().iter().map(|&p| 0.3 / (1.0 + p)).collect();
        let zero = vec![0.0; n];
        let td = asm.apply_t_shifted(&u, &zero, 1.0).unwrap();
        let s = state_of(&asm, |p| 0.3 / (1.0 + p), TailSpec::none(1.0));
        let t = asm.apply_t(&s);
        for (a, b) in td.iter().zip(&t) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn shifted_map_positive_at_zero_with_valid_shift() {
        let asm = toy_assembly(1.2, false);
        let n = asm.grid().len();
        let mu = asm.mu();
        let radius = 3.0;
        let u0max = 0.9 * mu * mu / (2.0 * radius);
        let u0: Vec<f64> = asm
            .grid()
            .nodes()
            .iter()
            .map(|&p| if p > mu { u0max / (1.0 + (p / mu).ln()) } else { 0.0 })
            .collect();
        let zero = vec![0.0; n];
        let td0 = asm.apply_t_shifted(&zero, &u0, radius).unwrap();
        // T_Δ(0) = T(u0) − u0 is positive where the truncated domain still
        // resolves the slowly divergent k-integral that drives the continuum
        // statement; near p_max the grid cuts that integral off.
        for (i, &p) in asm.grid().nodes().iter().enumerate() {
            if p <= mu * std::f64::consts::E {
                assert!(td0[i] > 0.0, "T_delta(0) <= 0 at p={p}");
            }
        }
        // and T_Δ(u) ≥ T_Δ(0) pointwise for positive u (exact monotonicity)
        let u: Vec<f64> = asm
            .grid()
            .nodes()
            .iter()
            .map(|&p| if p < 2.0 { 0.4 } else { 0.0 })
            .collect();
        let tdu = asm.apply_t_shifted(&u, &u0, radius).unwrap();
        assert!(tdu.iter().zip(&td0).all(|(&a, &b)| a >= b - 1e-14));
    }

    #[test]
    fn shifted_map_rejects_bad_shifts() {
        let asm = toy_assembly(1.0, false);
        let n = asm.grid().len();
        let bad = vec![1.0; n]; // nonzero below mu
        assert!(asm.apply_t_shifted(&vec![0.0; n], &bad, 1.0).is_err());
    }

    #[test]
    fn tail_correction_reproduces_power_tail_fixed_point_scale() {
        // T of the pure B₊ profile reproduces the profile within a few % in
        // the far window (tail attraction); without the correction the
        // image loses the constant ~B(p_max) UV contribution.
        let asm = toy_assembly(0.48, true);
        let m = 0.1;
        let tail = TailSpec::massive(m, 0.48, 4.0);
        let s = state_of(
            &asm,
            |p: f64| {
                let x = p.ln().max(1.0);
                m / x.powf(0.48)
            },
            tail,
        );
        let out = asm.apply_t(&s);
        let nodes = asm.grid().nodes();
        // the image carries an O(1/x) surplus from the k < p region; the
        // tail itself is reproduced, which the 1/x → 0 extrapolation of the
        // window ratio isolates
        let mut pts = Vec::new();
        for (i, &p) in nodes.iter().enumerate() {
            let x = p.ln();
            if x > 5.0 && x < 6.8 {
                let expect = m / x.powf(0.48);
                let ratio = out[i] / expect;
                assert!((ratio - 1.0).abs() < 0.06, "x={x}: ratio {ratio}");
                pts.push((1.0 / x, ratio));
            }
        }
        let n = pts.len() as f64;
        let (mut su, mut sr, mut suu, mut sur) = (0.0, 0.0, 0.0, 0.0);
        for &(u, r) in &pts {
            su += u;
            sr += r;
            suu += u * u;
            sur += u * r;
        }
        let slope = (n * sur - su * sr) / (n * suu - su * su);
        let intercept = (sr - slope * su) / n;
        assert!((intercept - 1.0).abs() < 0.02, "extrapolated ratio {intercept}");
    }
}
