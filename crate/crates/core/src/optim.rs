//! Derivative-free minimization: adaptive Nelder–Mead with simplex restarts, and a
//! deterministic parallel multi-start driver.

use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct NmSpec {
    pub max_evals: usize,
    /// A run stops once the spread of simplex values is below `tol_f`
    /// and its diameter below `tol_x`.
    pub tol_f: f64,
    pub tol_x: f64,
    pub step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub rebuilds: usize,
}

impl Default for NmSpec {
    fn default() -> Self {
        Self { max_evals: 2000, tol_f: 1e-10, tol_x: 1e-6, step: 0.3, rebuilds: 2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], spec: &NmSpec) -> NmResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        sanitize(f(x))
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return NmResult { x: Vec::new(), f: v, evals, converged: true, trace: vec![v] };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut trace = vec![best_f];
    let mut converged = false;
    let mut step = spec.step;

    for round in 0..=spec.rebuilds {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += if x[i].abs() > 1e-12 { step * x[i].abs().max(1.0) } else { step };
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        converged = false;
        while evals < spec.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            let diam = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let flat = spread <= spec.tol_f || simplex[0].1 == simplex[n].1;
            if flat && diam <= spec.tol_x {
                converged = true;
                break;
            }
            let mut c = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (ci, xi) in c.iter_mut().zip(x) {
                    *ci += xi / nf;
                }
            }
            let toward = |t: f64| -> Vec<f64> { c.iter().zip(&simplex[n].0).map(|(ci, wi)| ci + t * (ci - wi)).collect() };
            let xr = toward(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = toward(gamma);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = toward(alpha * rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = toward(-rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for (x, v) in simplex[1..].iter_mut() {
                        for (xi, bi) in x.iter_mut().zip(&x0) {
                            *xi = bi + sigma * (*xi - bi);
                        }
                        *v = eval(x, &mut evals);
                    }
                }
            }
            let lo = simplex.iter().fold(f64::INFINITY, |a, s| a.min(s.1));
            trace.push(lo.min(best_f));
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best_f - spec.tol_f;
        if simplex[0].1 <= best_f {
            best_f = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        if evals >= spec.max_evals || (round > 0 && !improved) {
            break;
        }
        step = (step * 0.5).max(spec.tol_x * 10.0);
    }
    NmResult { x: best_x, f: best_f, evals, converged, trace }
}

/// Runs one Nelder–Mead per start in parallel and returns all runs in start order
/// together with the index of the best (lowest value, then lowest index).
pub fn multi_start<F>(f: F, starts: &[Vec<f64>], spec: &NmSpec) -> (usize, Vec<NmResult>)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let runs: Vec<NmResult> = starts.par_iter().map(|s| nelder_mead(&f, s, spec)).collect();
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.f < runs[b].f { i } else { b });
    (best, runs)
}

/// Maximizes a function on [lo, hi] by golden-section search after a coarse scan.
pub fn maximize_interval(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, scan: usize, tol: f64) -> (f64, f64) {
    let scan = scan.max(2);
    let pts: Vec<(f64, f64)> = (0..=scan)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / scan as f64;
            (t, sanitize(-f(t)))
        })
        .collect();
    let k = pts.iter().enumerate().fold(0, |b, (i, p)| if p.1 < pts[b].1 { i } else { b });
    let h = (hi - lo) / scan as f64;
    let (mut a, mut b) = ((pts[k].0 - h).max(lo), (pts[k].0 + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sanitize(-f(c)), sanitize(-f(d)));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sanitize(-f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sanitize(-f(d));
        }
    }
    let (t, v) = if fc < fd { (c, fc) } else { (d, fd) };
    if pts[k].1 < v {
        (pts[k].0, -pts[k].1)
    } else {
        (t, -v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
    }

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(|x| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.5).powi(2)).sum(), &[0.0; 4], &NmSpec::default());
        assert!(r.converged);
        assert!(r.f < 1e-9);
        assert!(r.x.iter().all(|v| (v - 0.5).abs() < 1e-4));
    }

    #[test]
    fn rosenbrock_3d() {
        let spec = NmSpec { max_evals: 20_000, tol_f: 1e-14, tol_x: 1e-9, ..NmSpec::default() };
        let r = nelder_mead(rosenbrock, &[-1.0, 1.0, 0.5], &spec);
        assert!(r.f < 1e-8, "{}", r.f);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nan_is_rejected() {
        let r = nelder_mead(|x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) }, &[0.5], &NmSpec::default());
        assert!((r.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn multi_start_is_deterministic() {
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.1 * x[0];
        let starts = vec![vec![2.0], vec![-2.0], vec![0.1]];
        let (b1, r1) = multi_start(f, &starts, &NmSpec::default());
        let (b2, r2) = multi_start(f, &starts, &NmSpec::default());
        assert_eq!(b1, b2);
        assert_eq!(r1, r2);
        assert!(r1[b1].x[0] < 0.0);
    }

    #[test]
    fn interval_max() {
        let (t, v) = maximize_interval(|t| -(t - 0.3).powi(2) + 2.0, 0.0, 1.0, 10, 1e-10);
        assert!((t - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }
}
