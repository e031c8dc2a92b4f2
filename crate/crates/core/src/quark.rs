//! Sampled quark dressing functions A(p), B(p) with analytic UV tails, and
//! the weight functions r(p) used to reweight the scalar channel.

use serde::{Deserialize, Serialize};

use crate::grid::RadialGrid;
use crate::{Error, Result};

/// UV tail B(x) = c1/x^γ + c2 x^{γ−1} e^{−2x}, x = log(p/μ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub c1: f64,
    pub c2: f64,
    pub gamma_m: f64,
    /// log(p/μ) above which the tail replaces grid samples.
    pub x_onset: f64,
    /// Whether the exponentially suppressed c2 term participates in
    /// extensions (off by default; it is negligible beyond the onset).
    pub include_c2: bool,
}

impl TailSpec {
    pub fn massive(c1: f64, gamma_m: f64, x_onset: f64) -> Self {
        Self { c1, c2: 0.0, gamma_m, x_onset, include_c2: false }
    }

    pub fn chiral(c2: f64, gamma_m: f64, x_onset: f64) -> Self {
        Self { c1: 0.0, c2, gamma_m, x_onset, include_c2: true }
    }

    pub fn none(gamma_m: f64) -> Self {
        Self { c1: 0.0, c2: 0.0, gamma_m, x_onset: f64::INFINITY, include_c2: false }
    }

    /// Tail value at x = log(p/μ).
    pub fn value(&self, x: f64) -> f64 {
        let mut b = 0.0;
        if self.c1 != 0.0 {
            b += self.c1 / x.powf(self.gamma_m);
        }
        if self.include_c2 && self.c2 != 0.0 {
            b += self.c2 * x.powf(self.gamma_m - 1.0) * (-2.0 * x).exp();
        }
        b
    }
}

/// Monotone (Fritsch–Carlson) cubic interpolant.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2);
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        }
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        Self { xs, ys, slopes: m }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

/// Sampled (A, B) pair on a radial grid with tail extension. Snapshots are
/// immutable; the solver produces a new one per iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuarkState {
    grid: RadialGrid,
    a: Vec<f64>,
    b: Vec<f64>,
    pub tail: TailSpec,
    mu: f64,
    #[serde(skip)]
    interp: Option<StateInterp>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateInterp {
    a_lin: Pchip, // A linear in log p is realized as pchip on 2-pt slopes; see new()
    b_kind: BInterp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum BInterp {
    /// monotone cubic in (log p, log B) for strictly positive B
    LogLog(Pchip),
    /// linear in log p on raw values otherwise
    Linear { xs: Vec<f64>, ys: Vec<f64> },
}

fn lerp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v < x).max(1) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - t) + ys[i + 1] * t
}

impl QuarkState {
    pub fn new(grid: RadialGrid, a: Vec<f64>, b: Vec<f64>, tail: TailSpec, mu: f64) -> Result<Self> {
        if a.len() != grid.len() || b.len() != grid.len() {
            return Err(Error::Invalid("sample length must match grid".into()));
        }
        let mut s = Self { grid, a, b, tail, mu, interp: None };
        s.build_interp();
        Ok(s)
    }

    fn build_interp(&mut self) {
        let xs: Vec<f64> = self.grid.nodes().iter().map(|&p| p.ln()).collect();
        let a_lin = Pchip::new(xs.clone(), self.a.clone());
        let b_kind = if self.b.iter().all(|&b| b > 0.0) {
            BInterp::LogLog(Pchip::new(xs, self.b.iter().map(|&b| b.ln()).collect()))
        } else {
            BInterp::Linear { xs, ys: self.b.clone() }
        };
        self.interp = Some(StateInterp { a_lin, b_kind });
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b
    }

    /// M(p_i) = B/A per node.
    pub fn mass_function(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(&a, &b)| b / a).collect()
    }

    /// Interpolated (A, B) at momentum p; beyond the tail onset B follows
    /// the analytic tail and A is extended as 1.
    pub fn evaluate(&self, p: f64) -> (f64, f64) {
        let interp = self.interp.as_ref().expect("interp built at construction");
        let x = if p > 0.0 { (p / self.mu).ln() } else { f64::NEG_INFINITY };
        if x >= self.tail.x_onset {
            return (1.0, self.tail.value(x));
        }
        let lp = if p > 0.0 { p.ln() } else { self.grid.nodes()[0].ln() - 30.0 };
        let a = interp.a_lin.eval(lp);
        let b = match &interp.b_kind {
            BInterp::LogLog(p) => p.eval(lp).exp(),
            BInterp::Linear { xs, ys } => lerp(xs, ys, lp),
        };
        (a, b)
    }

    /// B extended off the grid by the tail (used by tail-corrected
    /// operator applications).
    pub fn b_tail_at_x(&self, x: f64) -> f64 {
        self.tail.value(x)
    }
}

/// Which tail family a fit should assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailBranch {
    /// c1/x^γ with the exponentially suppressed term ignored.
    Massive,
    /// c1 = 0 enforced; fits c2 x^{γ−1} e^{−2x}.
    Chiral,
    /// Decide from the local log-derivative at the window end.
    Auto,
}

/// Least-squares tail fit of log B over a window in x = log(p/μ).
///
/// Both branches include a 1/x correction term (log B = a − γ log x + b/x,
/// with +γ−1 and −2x for the chiral branch); the B± asymptotics carry O(1/x)
/// corrections that bias a plain log-log fit well beyond the tolerances the
/// fits are consumed at.
pub fn measure_tail(state: &QuarkState, window: (f64, f64), branch: TailBranch) -> Result<TailSpec> {
    let (x_lo, x_hi) = window;
    if !(x_lo > 2.0 && x_hi > x_lo) {
        return Err(Error::Invalid(format!("bad tail window [{x_lo}, {x_hi}], need x_lo > 2")));
    }
    let mu = state.mu();
    let mut xs = Vec::new();
    let mut bs = Vec::new();
    for (&p, &b) in state.grid().nodes().iter().zip(state.b_values()) {
        let x = (p / mu).ln();
        if x >= x_lo && x <= x_hi {
            if b <= 0.0 {
                return Err(Error::TailFit(format!("non-positive B at x={x:.3}")));
            }
            xs.push(x);
            bs.push(b);
        }
    }
    if xs.len() < 6 {
        return Err(Error::TailFit(format!(
            "window [{x_lo}, {x_hi}] holds only {} samples",
            xs.len()
        )));
    }
    let branch = match branch {
        TailBranch::Auto => {
            // d log B/dx ≈ −2 on the chiral branch, ≈ −γ/x ≈ 0 on the massive one
            let n = xs.len();
            let slope = (bs[n - 1].ln() - bs[n - 4].ln()) / (xs[n - 1] - xs[n - 4]);
            if slope < -1.0 {
                TailBranch::Chiral
            } else {
                TailBranch::Massive
            }
        }
        b => b,
    };
    // Scan γ; for fixed γ the remaining model is linear in (intercept, 1/x).
    let mut best: Option<(f64, f64, f64, f64)> = None; // (resid, gamma, intercept, bcoef)
    let mut gamma = 0.05;
    while gamma <= 3.0 {
        let mut s = [0.0f64; 5]; // sums for 2x2 normal equations
        let mut sy = [0.0f64; 2];
        let mut ss = 0.0;
        for (&x, &b) in xs.iter().zip(&bs) {
            let y = match branch {
                TailBranch::Massive => b.ln() + gamma * x.ln(),
                TailBranch::Chiral => b.ln() + 2.0 * x - (gamma - 1.0) * x.ln(),
                TailBranch::Auto => unreachable!(),
            };
            let u = 1.0 / x;
            s[0] += 1.0;
            s[1] += u;
            s[2] += u * u;
            sy[0] += y;
            sy[1] += u * y;
            ss += y * y;
        }
        let det = s[0] * s[2] - s[1] * s[1];
        let c0 = (sy[0] * s[2] - sy[1] * s[1]) / det;
        let c1 = (s[0] * sy[1] - s[1] * sy[0]) / det;
        let resid = ss - c0 * sy[0] - c1 * sy[1];
        if best.map_or(true, |(r, ..)| resid < r) {
            best = Some((resid, gamma, c0, c1));
        }
        gamma += 0.0025;
    }
    let (_, gamma_m, intercept, _) = best.unwrap();
    let coef = intercept.exp();
    let x_onset = x_lo.min(5.0);
    Ok(match branch {
        TailBranch::Massive => TailSpec { c1: coef, c2: 0.0, gamma_m, x_onset, include_c2: false },
        TailBranch::Chiral => TailSpec { c1: 0.0, c2: coef, gamma_m, x_onset, include_c2: true },
        TailBranch::Auto => unreachable!(),
    })
}

/// Positive weight function r(p) with asymptotic r ~ log^δ(p/μ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightFunction {
    /// (c0 + log^δ √(e + p²/μ²)) · [(μ² + p²)/(scale·μ² + p²)]^alpha
    ThreeParam { alpha: f64, c0: f64, scale: f64, delta: f64, mu: f64 },
    /// Tabulated r̄ = λ/t̄ on grid nodes, extended by (x/x_N)^delta beyond.
    Eigenvector { log_p: Vec<f64>, log_r: Vec<f64>, delta: f64, mu: f64 },
    Unit,
}

impl WeightFunction {
    /// The §-family defaults: r(p) = (10 + log^δ√(e+p²/μ²))(μ²+p²)^{0.9}/(10⁴μ²+p²)^{0.9}.
    pub fn three_param_default(delta: f64, mu: f64) -> Self {
        Self::ThreeParam { alpha: 0.9, c0: 10.0, scale: 1e4, delta, mu }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            Self::ThreeParam { delta, .. } | Self::Eigenvector { delta, .. } => delta,
            Self::Unit => 0.0,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Self::ThreeParam { alpha, c0, scale, delta, mu } => {
                let r2 = p * p / (mu * mu);
                let l = (std::f64::consts::E + r2).sqrt().ln();
                (c0 + l.powf(*delta))
                    * ((mu * mu + p * p) / (scale * mu * mu + p * p)).powf(*alpha)
            }
            Self::Eigenvector { log_p, log_r, delta, mu } => {
                let lp = (p.max(1e-300)).ln();
                let n = log_p.len();
                if lp >= log_p[n - 1] {
                    // r ~ x^delta extension anchored at the last node
                    let x_n = (log_p[n - 1] - mu.ln()).max(1e-12);
                    let x = (lp - mu.ln()).max(x_n);
                    return log_r[n - 1].exp() * (x / x_n).powf(*delta);
                }
                lerp(log_p, log_r, lp).exp()
            }
            Self::Unit => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::with_nodes(1e-4, 1e3, 300).unwrap()
    }

    fn state_from(f: impl Fn(f64) -> f64, tail: TailSpec) -> QuarkState {
        let g = grid();
        let a = vec![1.0; g.len()];
        let b = g.nodes().iter().map(|&p| f(p)).collect();
        QuarkState::new(g, a, b, tail, 1.0).unwrap()
    }

    #[test]
    fn evaluate_reproduces_samples_at_nodes() {
        let s = state_from(|p| 0.3 / (1.0 + p * p), TailSpec::none(0.5));
        for (i, &p) in s.grid().nodes().iter().enumerate().step_by(17) {
            let (a, b) = s.evaluate(p);
            assert!((a - s.a_values()[i]).abs() < 1e-14);
            assert!((b - s.b_values()[i]).abs() / b.abs() < 1e-12);
        }
    }

    #[test]
    fn evaluate_beyond_onset_follows_tail() {
        let m = 0.25;
        let gm = 0.62;
        let tail = TailSpec::massive(m, gm, 5.0);
        let s = state_from(|p| 0.3 / (1.0 + p * p), tail);
        let x = 6.5f64;
        let (a, b) = s.evaluate(x.exp());
        assert_eq!(a, 1.0);
        assert!((b - m / x.powf(gm)).abs() < 1e-14);
    }

    #[test]
    fn constant_samples_extrapolate_flat_to_zero() {
        let s = state_from(|_| 0.7, TailSpec::none(0.5));
        let (_, b) = s.evaluate(0.0);
        assert!((b - 0.7).abs() < 1e-12);
    }

    #[test]
    fn measure_tail_recovers_pure_power() {
        let s = state_from(
            |p: f64| {
                let x = p.ln().max(0.2);
                3.0 / x.powf(0.48)
            },
            TailSpec::none(0.48),
        );
        let t = measure_tail(&s, (3.0, 6.5), TailBranch::Massive).unwrap();
        assert!((t.c1 - 3.0).abs() / 3.0 < 0.01, "c1={}", t.c1);
        assert!((t.gamma_m - 0.48).abs() / 0.48 < 0.01, "gamma={}", t.gamma_m);
    }

    #[test]
    fn measure_tail_recovers_chiral_branch() {
        let s = state_from(
            |p: f64| {
                let x = p.ln().max(0.2);
                5.0 * x.powf(-0.52) * (-2.0 * x).exp()
            },
            TailSpec::none(0.48),
        );
        let t = measure_tail(&s, (3.0, 6.0), TailBranch::Chiral).unwrap();
        assert!((t.c2 - 5.0).abs() / 5.0 < 0.02, "c2={}", t.c2);
        assert!((t.gamma_m - 0.48).abs() / 0.48 < 0.02, "gamma={}", t.gamma_m);
    }

    #[test]
    fn measure_tail_auto_detects_branches() {
        let massive = state_from(
            |p: f64| 2.0 / p.ln().max(0.2).powf(0.7),
            TailSpec::none(0.7),
        );
        let t = measure_tail(&massive, (3.0, 6.5), TailBranch::Auto).unwrap();
        assert!(t.c1 > 0.0 && t.c2 == 0.0);
        let chiral = state_from(
            |p: f64| {
                let x = p.ln().max(0.2);
                x.powf(-0.3) * (-2.0 * x).exp()
            },
            TailSpec::none(0.7),
        );
        let t = measure_tail(&chiral, (3.0, 6.0), TailBranch::Auto).unwrap();
        assert!(t.c2 > 0.0 && t.c1 == 0.0);
    }

    #[test]
    fn measure_tail_round_trips_tailspec_states() {
        let tail = TailSpec::massive(0.8, 0.9, 2.5);
        let s = state_from(|p: f64| tail.value((p.ln()).max(0.15)), tail);
        let t = measure_tail(&s, (2.8, 6.8), TailBranch::Massive).unwrap();
        assert!((t.c1 / tail.c1 - 1.0).abs() < 0.01);
        assert!((t.gamma_m / tail.gamma_m - 1.0).abs() < 0.01);
    }

    #[test]
    fn measure_tail_rejects_nonpositive_windows() {
        let s = state_from(|p| 1.0 - p, TailSpec::none(0.5)); // negative beyond p=1
        assert!(measure_tail(&s, (2.1, 4.0), TailBranch::Massive).is_err());
    }

    #[test]
    fn three_param_weight_matches_formula_and_asymptotics() {
        let w = WeightFunction::three_param_default(0.33, 1.0);
        // spot value at p = 1.4
        let p = 1.4;
        let l = (std::f64::consts::E + p * p).sqrt().ln();
        let expect = (10.0 + l.powf(0.33)) * ((1.0 + p * p) / (1e4 + p * p)).powf(0.9);
        assert!((w.eval(p) / expect - 1.0).abs() < 1e-14);
        // measured log-exponent d log r / d log log p; far beyond the window
        // scale the family's own analytic slope is δ x^δ/(c0 + x^δ)
        let x1: f64 = 1e6f64.ln();
        let x2 = x1 * 1.02;
        let (r1, r2) = (w.eval(x1.exp()), w.eval(x2.exp()));
        let slope = (r2.ln() - r1.ln()) / (x2.ln() - x1.ln());
        let analytic = 0.33 * x1.powf(0.33) / (10.0 + x1.powf(0.33));
        assert!((slope - analytic).abs() < 0.01, "{slope} vs {analytic}");
    }

    #[test]
    fn eigenvector_weight_extends_with_power_of_log() {
        let log_p: Vec<f64> = (0..50).map(|i| -2.0 + 0.1 * i as f64).collect();
        let log_r: Vec<f64> = log_p.iter().map(|&lp| 0.4 * (lp.max(0.1)).ln()).collect();
        let w = WeightFunction::Eigenvector { log_p: log_p.clone(), log_r, delta: 0.4, mu: 1.0 };
        let x_n = log_p.last().unwrap();
        let r_end = w.eval(x_n.exp());
        let r_far = w.eval((x_n * 3.0).exp());
        assert!((r_far / r_end - 3.0f64.powf(0.4)).abs() < 1e-9);
    }
}
