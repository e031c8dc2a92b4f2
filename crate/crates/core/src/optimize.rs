//! Bounded Nelder–Mead simplex minimization with multistart.
//!
//! Box constraints are enforced by clamping candidate points; the landscape
//! targets here are smooth but not convex, so restarts matter more than a
//! fancy local method.

use rand::Rng;

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_evals: usize,
) -> NelderMeadResult {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    // initial simplex: x0 plus steps of 10% of each box extent
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut p0 = x0.to_vec();
    clamp(&mut p0, lo, hi);
    let v0 = eval(&p0, &mut evals);
    pts.push((p0.clone(), v0));
    for i in 0..n {
        let mut p = p0.clone();
        let step = 0.1 * (hi[i] - lo[i]);
        p[i] = if p[i] + step <= hi[i] { p[i] + step } else { p[i] - step };
        clamp(&mut p, lo, hi);
        let v = eval(&p, &mut evals);
        pts.push((p, v));
    }
    while evals < max_evals {
        pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = pts[n].1 - pts[0].1;
        if spread.abs() <= tol * (1.0 + pts[0].1.abs()) {
            return NelderMeadResult { x: pts[0].0.clone(), value: pts[0].1, evaluations: evals, converged: true };
        }
        // centroid of all but worst
        let mut c = vec![0.0; n];
        for (p, _) in pts.iter().take(n) {
            for i in 0..n {
                c[i] += p[i] / n as f64;
            }
        }
        let worst = pts[n].clone();
        let mut xr: Vec<f64> = (0..n).map(|i| c[i] + alpha * (c[i] - worst.0[i])).collect();
        clamp(&mut xr, lo, hi);
        let fr = eval(&xr, &mut evals);
        if fr < pts[0].1 {
            let mut xe: Vec<f64> = (0..n).map(|i| c[i] + gamma * (xr[i] - c[i])).collect();
            clamp(&mut xe, lo, hi);
            let fe = eval(&xe, &mut evals);
            pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < pts[n - 1].1 {
            pts[n] = (xr, fr);
        } else {
            let mut xc: Vec<f64> = (0..n).map(|i| c[i] + rho * (worst.0[i] - c[i])).collect();
            clamp(&mut xc, lo, hi);
            let fc = eval(&xc, &mut evals);
            if fc < worst.1 {
                pts[n] = (xc, fc);
            } else {
                // shrink toward best
                let best = pts[0].0.clone();
                for entry in pts.iter_mut().skip(1) {
                    for i in 0..n {
                        entry.0[i] = best[i] + sigma * (entry.0[i] - best[i]);
                    }
                    clamp(&mut entry.0, lo, hi);
                    entry.1 = eval(&entry.0, &mut evals);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    NelderMeadResult { x: pts[0].0.clone(), value: pts[0].1, evaluations: evals, converged: false }
}

/// Multistart wrapper: the supplied start plus uniform draws inside the box.
pub fn multistart(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    n_starts: usize,
    rng: &mut impl Rng,
    tol: f64,
    max_evals_per_start: usize,
) -> NelderMeadResult {
    let mut best: Option<NelderMeadResult> = None;
    for s in 0..n_starts.max(1) {
        let start: Vec<f64> = if s == 0 {
            x0.to_vec()
        } else {
            lo.iter().zip(hi).map(|(&a, &b)| rng.gen_range(a..=b)).collect()
        };
        let r = nelder_mead(f, &start, lo, hi, tol, max_evals_per_start);
        if best.as_ref().map_or(true, |b| r.value < b.value) {
            best = Some(r);
        }
    }
    best.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn minimizes_shifted_quadratic_inside_box() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.4).powi(2);
        let r = nelder_mead(&mut f, &[0.9, 0.9], &[-1.0, -1.0], &[1.0, 1.0], 1e-12, 2000);
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-5);
        assert!((r.x[1] + 0.4).abs() < 1e-5);
    }

    #[test]
    fn respects_active_box_constraint() {
        let mut f = |x: &[f64]| (x[0] - 2.0).powi(2);
        let r = nelder_mead(&mut f, &[0.0], &[-1.0], &[1.0], 1e-12, 2000);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn multistart_escapes_poor_start() {
        // two-well function; start in the shallow well
        let mut f = |x: &[f64]| {
            let a = (x[0] + 0.5).powi(2) + 0.05;
            let b = (x[0] - 0.6).powi(2);
            a.min(b)
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let r = multistart(&mut f, &[-0.5], &[-1.0], &[1.0], 12, &mut rng, 1e-12, 400);
        assert!((r.x[0] - 0.6).abs() < 1e-4, "{:?}", r.x);
    }
}
