//! Mixture function ξ, its derivatives and conjugate, and the single-spin measure P₁.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream, tags};
use crate::scalar::Scalar;
use crate::symcone::{psd_order, PsdMatrix, SymMatrix};

/// One monomial family Σ_{kk'} β(k)β(k') a_{kk'}^p.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureTerm<T> {
    pub p: u32,
    pub beta: Vec<T>,
}

/// ξ(a) = Σ_p Σ_{k,k'} β_p(k) β_p(k') a_{kk'}^p.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureModel<T> {
    dim: usize,
    terms: Vec<MixtureTerm<T>>,
}

impl<T: Scalar> MixtureModel<T> {
    pub fn new(dim: usize, terms: Vec<MixtureTerm<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("D must be positive".into()));
        }
        for t in &terms {
            if t.p == 0 {
                return Err(Error::InvalidModel("p must be at least 1".into()));
            }
            if t.beta.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, got: t.beta.len() });
            }
            if t.beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidModel("non-finite beta".into()));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    /// Single term with β constant across components.
    pub fn symmetric(dim: usize, p: u32, beta: T) -> Self {
        Self { dim, terms: vec![MixtureTerm { p, beta: vec![beta; dim] }] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[MixtureTerm<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.beta.iter().all(|b| *b == T::zero()))
    }

    /// Every β_p constant in k.
    pub fn is_symmetric(&self) -> bool {
        self.terms.iter().all(|t| t.beta.windows(2).all(|w| w[0] == w[1]))
    }

    pub fn has_odd_terms(&self) -> bool {
        self.terms.iter().any(|t| t.p % 2 == 1 && t.p > 1)
    }

    fn check(&self, a: &SymMatrix<T>) -> Result<()> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: a.dim() });
        }
        Ok(())
    }

    /// Entrywise ξ_{kk'}(a_{kk'}).
    pub fn xi_entries(&self, a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
        self.check(a)?;
        Ok(SymMatrix::from_fn(self.dim, |i, j| {
            let x = a.get(i, j);
            self.terms.iter().map(|t| t.beta[i] * t.beta[j] * x.powi(t.p as i32)).sum()
        }))
    }

    pub fn xi(&self, a: &SymMatrix<T>) -> Result<T> {
        let e = self.xi_entries(a)?;
        Ok(e.dot(&SymMatrix::from_fn(self.dim, |_, _| T::one())))
    }

    /// Entry (k,k') is Σ_p p β_p(k)β_p(k') a_{kk'}^{p−1}.
    pub fn grad_xi(&self, a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
        self.check(a)?;
        Ok(SymMatrix::from_fn(self.dim, |i, j| {
            let x = a.get(i, j);
            self.terms
                .iter()
                .map(|t| T::of(t.p as f64) * t.beta[i] * t.beta[j] * x.powi(t.p as i32 - 1))
                .sum()
        }))
    }

    /// θ(a) = a·∇ξ(a) − ξ(a).
    pub fn theta(&self, a: &SymMatrix<T>) -> Result<T> {
        Ok(a.dot(&self.grad_xi(a)?) - self.xi(a)?)
    }

    /// Entrywise x ξ'_{kk'}(x) − ξ_{kk'}(x); its entry sum is θ(a).
    pub fn theta_entries(&self, a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
        self.check(a)?;
        Ok(SymMatrix::from_fn(self.dim, |i, j| {
            let x = a.get(i, j);
            self.terms
                .iter()
                .map(|t| {
                    let xp = x.powi(t.p as i32);
                    let b = t.beta[i] * t.beta[j];
                    T::of(t.p as f64) * b * xp - b * xp
                })
                .sum()
        }))
    }

    /// ξ*(y) = sup_{z ⪰ 0} z·y − ξ(z), by coordinate ascent over a lower Cholesky factor.
    pub fn xi_star(&self, y: &SymMatrix<T>, spec: &XiStarSpec) -> Result<XiStar<T>> {
        self.check(y)?;
        let d = self.dim;
        let nl = d * (d + 1) / 2;
        let build = |l: &[T]| -> SymMatrix<T> {
            let lo = |i: usize, j: usize| if j <= i { l[i * (i + 1) / 2 + j] } else { T::zero() };
            SymMatrix::from_fn(d, |i, j| (0..=i.min(j)).map(|k| lo(i, k) * lo(j, k)).sum())
        };
        let cap = T::of(spec.cap);
        let obj = |l: &[T]| -> T {
            let z = build(l);
            z.dot(y) - self.xi(&z).unwrap_or(T::infinity())
        };

        let mut starts: Vec<Vec<T>> = vec![vec![T::zero(); nl]];
        let mut diag = vec![T::zero(); nl];
        for i in 0..d {
            diag[i * (i + 1) / 2 + i] = T::of(0.5);
        }
        starts.push(diag);
        let mut rng = stream(spec.seed, tags::XI_STAR, 0);
        for _ in 2..spec.starts.max(2) {
            starts.push((0..nl).map(|_| T::of(rng.sample::<f64, _>(StandardNormal) * 0.5)).collect());
        }

        let mut best: Option<(T, Vec<T>)> = None;
        for mut l in starts {
            let mut f = obj(&l);
            for _cycle in 0..spec.max_cycles {
                let f0 = f;
                for c in 0..nl {
                    let base = l[c];
                    let line = |t: T| {
                        let mut w = l.clone();
                        w[c] = t;
                        obj(&w)
                    };
                    let (t, ft) = maximize_1d(&line, base, T::of(0.25).max(base.abs() * T::of(0.5)));
                    if ft > f {
                        l[c] = t;
                        f = ft;
                    }
                }
                if build(&l).norm() > cap {
                    return Err(Error::Divergent(format!("xi_star iterate norm exceeds cap {}", spec.cap)));
                }
                if (f - f0).abs() <= T::of(1e-14) * (T::one() + f.abs()) {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
                best = Some((f, l));
            }
        }
        let (value, l) = best.expect("at least one start");
        Ok(XiStar { value, argmax: PsdMatrix::new(build(&l))? })
    }

    /// Randomized checks of ξ ≥ 0, monotonicity of ξ and ∇ξ, and midpoint convexity on S^D_+.
    pub fn validate_hypotheses(&self, samples: usize, seed: u64) -> HypothesisReport<T> {
        let d = self.dim;
        let mut rng = stream(seed, tags::VALIDATE, 0);
        let mut report = HypothesisReport {
            samples,
            nonnegative: Check::default(),
            monotone: Check::default(),
            gradient_monotone: Check::default(),
            convex: Check::default(),
            odd_terms: self.has_odd_terms(),
        };
        let rand_psd = |rng: &mut rand_chacha::ChaCha8Rng| -> SymMatrix<T> {
            let scale = rng.gen_range(0.05..1.0) / d as f64;
            let rows: Vec<Vec<T>> = (0..d)
                .map(|_| (0..d).map(|_| T::of(rng.sample::<f64, _>(StandardNormal) * scale.sqrt())).collect())
                .collect();
            PsdMatrix::gram(&rows).into_sym()
        };
        let tol = T::of(1e-12);
        for _ in 0..samples {
            let a = rand_psd(&mut rng);
            let b = rand_psd(&mut rng);
            let c = &a + &b;
            let xa = self.xi(&a).unwrap();
            let xb = self.xi(&b).unwrap();
            let xc = self.xi(&c).unwrap();
            report.nonnegative.record(-xa, tol, || vec![a.clone()]);
            report.monotone.record(xb - xc, tol, || vec![c.clone(), b.clone()]);
            let gc = self.grad_xi(&c).unwrap();
            let gb = self.grad_xi(&b).unwrap();
            let ok = psd_order(&gc, &gb).unwrap_or(false);
            report.gradient_monotone.record(if ok { T::zero() } else { T::one() }, T::zero(), || vec![c.clone(), b.clone()]);

            // random pair, then a symmetric perturbation pair around a PD centre
            let mid = (&a + &b).scale(T::of(0.5));
            let gap = self.xi(&mid).unwrap() - (xa + xb) * T::of(0.5);
            report.convex.record(gap, tol * (T::one() + xa.abs() + xb.abs()), || vec![a.clone(), b.clone()]);

            let lmin = c.eigen().values.last().copied().unwrap_or(T::zero());
            let h = SymMatrix::from_fn(d, |_, _| T::of(rng.sample::<f64, _>(StandardNormal)));
            let hop = h.eigen().values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if lmin > T::zero() && hop > T::zero() {
                let t = T::of(0.95) * lmin / hop;
                let p = &c + &h.scale(t);
                let q = &c - &h.scale(t);
                let xp = self.xi(&p).unwrap();
                let xq = self.xi(&q).unwrap();
                let gap = xc - (xp + xq) * T::of(0.5);
                report.convex.record(gap, tol * (T::one() + xp.abs() + xq.abs()), || vec![p.clone(), q.clone()]);
            }
        }
        report
    }
}

/// Resolution controls for ξ*.
#[derive(Clone, Debug)]
pub struct XiStarSpec {
    pub starts: usize,
    pub max_cycles: usize,
    pub cap: f64,
    pub seed: u64,
}

impl Default for XiStarSpec {
    fn default() -> Self {
        Self { starts: 4, max_cycles: 400, cap: 1e3, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct XiStar<T> {
    pub value: T,
    pub argmax: PsdMatrix<T>,
}

/// Outcome of one randomized hypothesis check; `worst` is the largest violation seen.
#[derive(Clone, Debug)]
pub struct Check<T> {
    pub passed: bool,
    pub worst: T,
    pub counterexample: Option<Vec<SymMatrix<T>>>,
}

impl<T: Scalar> Default for Check<T> {
    fn default() -> Self {
        Self { passed: true, worst: T::neg_infinity(), counterexample: None }
    }
}

impl<T: Scalar> Check<T> {
    fn record(&mut self, violation: T, tol: T, witness: impl FnOnce() -> Vec<SymMatrix<T>>) {
        if violation > self.worst {
            self.worst = violation;
            if violation > tol {
                self.passed = false;
                self.counterexample = Some(witness());
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct HypothesisReport<T> {
    pub samples: usize,
    pub nonnegative: Check<T>,
    pub monotone: Check<T>,
    pub gradient_monotone: Check<T>,
    pub convex: Check<T>,
    pub odd_terms: bool,
}

impl<T: Scalar> HypothesisReport<T> {
    pub fn passed(&self) -> bool {
        self.nonnegative.passed && self.monotone.passed && self.gradient_monotone.passed && self.convex.passed
    }
}

/// Maximizes a 1-D function by bracketing from `x0` then golden-section search.
pub(crate) fn maximize_1d<T: Scalar>(f: &impl Fn(T) -> T, x0: T, step: T) -> (T, T) {
    let f0 = f(x0);
    let (mut a, mut b);
    let (fp, fm) = (f(x0 + step), f(x0 - step));
    let dir = if fp >= fm { T::one() } else { -T::one() };
    if fp.max(fm) <= f0 {
        a = x0 - step;
        b = x0 + step;
    } else {
        let mut s = step;
        let mut prev = x0;
        let mut cur = x0 + dir * s;
        let mut fc = f(cur);
        for _ in 0..80 {
            s *= T::of(2.0);
            let next = cur + dir * s;
            let fnx = f(next);
            if fnx < fc || !fnx.is_finite() {
                a = prev;
                b = next;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                return golden(f, a, b);
            }
            prev = cur;
            cur = next;
            fc = fnx;
        }
        return (cur, fc);
    }
    let (x, fx) = golden(f, a, b);
    if fx >= f0 {
        (x, fx)
    } else {
        (x0, f0)
    }
}

fn golden<T: Scalar>(f: &impl Fn(T) -> T, mut a: T, mut b: T) -> (T, T) {
    let g = T::of((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= T::of(1e-12) * (T::one() + a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// One atom of P₁.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom<T> {
    pub tau: Vec<T>,
    pub weight: T,
}

/// Finite probability measure on the unit ball of R^D.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinMeasure<T> {
    dim: usize,
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> SpinMeasure<T> {
    pub fn new(dim: usize, atoms: Vec<Atom<T>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut total = T::zero();
        for a in &atoms {
            if a.tau.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, got: a.tau.len() });
            }
            if !(a.weight > T::zero()) || !a.weight.is_finite() {
                return Err(Error::InvalidMeasure("weights must be positive".into()));
            }
            let n2: T = a.tau.iter().map(|&t| t * t).sum();
            if n2.sqrt() > T::one() + T::of(1e-12) {
                return Err(Error::InvalidMeasure("atom outside the unit ball".into()));
            }
            total += a.weight;
        }
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { dim, atoms })
    }

    /// D = 1, atoms ±1 with weight ½.
    pub fn ising() -> Self {
        let h = T::of(0.5);
        Self {
            dim: 1,
            atoms: vec![Atom { tau: vec![T::one()], weight: h }, Atom { tau: vec![-T::one()], weight: h }],
        }
    }

    /// Uniform measure on the standard basis e₁,…,e_D.
    pub fn potts(dim: usize) -> Self {
        let w = T::one() / T::of(dim as f64);
        let atoms = (0..dim)
            .map(|k| Atom { tau: (0..dim).map(|j| if j == k { T::one() } else { T::zero() }).collect(), weight: w })
            .collect();
        Self { dim, atoms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// τ_i τ_iᵀ
    pub fn gram(&self, i: usize) -> SymMatrix<T> {
        SymMatrix::outer(&self.atoms[i].tau)
    }

    pub fn overlap_hull(&self) -> OverlapHull<T> {
        let mut vertices: Vec<SymMatrix<T>> = Vec::new();
        for i in 0..self.atoms.len() {
            let g = self.gram(i);
            if !vertices.iter().any(|v| (v - &g).max_abs() <= T::of(1e-14)) {
                vertices.push(g);
            }
        }
        OverlapHull { dim: self.dim, vertices }
    }
}

/// 𝒟 = conv{ττᵀ : τ ∈ supp P₁}, held by its (deduplicated) generating points.
#[derive(Clone, Debug)]
pub struct OverlapHull<T> {
    dim: usize,
    vertices: Vec<SymMatrix<T>>,
}

impl<T: Scalar> OverlapHull<T> {
    pub fn vertices(&self) -> &[SymMatrix<T>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn barycenter(&self) -> SymMatrix<T> {
        let n = T::of(self.vertices.len() as f64);
        self.vertices.iter().fold(SymMatrix::zeros(self.dim), |acc, v| &acc + v).scale(n.recip())
    }

    /// Σ w_i V_i for nonnegative weights summing to one.
    pub fn combine(&self, w: &[T]) -> SymMatrix<T> {
        self.vertices.iter().zip(w).fold(SymMatrix::zeros(self.dim), |acc, (v, &wi)| &acc + &v.scale(wi))
    }

    /// Frobenius distance from `z` to the hull (Wolfe's minimum-norm-point algorithm).
    pub fn distance(&self, z: &SymMatrix<T>) -> T {
        let pts: Vec<Vec<f64>> = self.vertices.iter().map(|v| euclid(&(v - z))).collect();
        T::of(min_norm_point(&pts).1)
    }

    pub fn contains(&self, z: &SymMatrix<T>, tol: T) -> bool {
        z.dim() == self.dim && self.distance(z) <= tol
    }
}

/// Packed coordinates with off-diagonals scaled by √2, so Euclidean = entrywise inner product.
fn euclid<T: Scalar>(a: &SymMatrix<T>) -> Vec<f64> {
    let d = a.dim();
    let mut out = Vec::with_capacity(a.packed().len());
    for i in 0..d {
        for j in i..d {
            let s = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
            out.push(a.get(i, j).f64() * s);
        }
    }
    out
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum-norm point of conv(pts); returns (barycentric weights, norm).
pub(crate) fn min_norm_point(pts: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = pts.len();
    let dim = pts[0].len();
    let scale = pts.iter().map(|p| dotv(p, p)).fold(0.0, f64::max).max(1e-300);
    let start = (0..n).min_by(|&i, &j| dotv(&pts[i], &pts[i]).total_cmp(&dotv(&pts[j], &pts[j]))).unwrap();
    let mut set = vec![start];
    let mut lam = vec![1.0];
    let point = |set: &[usize], lam: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (&i, &l) in set.iter().zip(lam) {
            for k in 0..dim {
                x[k] += l * pts[i][k];
            }
        }
        x
    };
    let mut x = point(&set, &lam);
    for _ in 0..1000 {
        let xx = dotv(&x, &x);
        let j = (0..n).min_by(|&a, &b| dotv(&x, &pts[a]).total_cmp(&dotv(&x, &pts[b]))).unwrap();
        if xx - dotv(&x, &pts[j]) <= 1e-14 * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        lam.push(0.0);
        loop {
            let alpha = affine_min_norm(pts, &set);
            if alpha.iter().all(|&a| a > 1e-14) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lam.iter().zip(&alpha) {
                if *a <= 1e-14 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let mut k = 0;
            while k < set.len() {
                if lam[k] <= 1e-14 {
                    set.remove(k);
                    lam.remove(k);
                } else {
                    k += 1;
                }
            }
            let s: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= s);
        }
        x = point(&set, &lam);
    }
    let mut w = vec![0.0; n];
    for (&i, &l) in set.iter().zip(&lam) {
        w[i] += l;
    }
    (w, dotv(&x, &x).sqrt())
}

/// Minimizes |Σ α_i p_i| subject to Σ α_i = 1 over the affine hull of the selected points.
fn affine_min_norm(pts: &[Vec<f64>], set: &[usize]) -> Vec<f64> {
    let k = set.len();
    let n = k + 1;
    let mut m = vec![vec![0.0; n + 1]; n];
    for a in 0..k {
        for b in 0..k {
            m[a][b] = dotv(&pts[set[a]], &pts[set[b]]);
        }
        m[a][a] += 1e-13;
        m[a][k] = 1.0;
        m[k][a] = 1.0;
    }
    m[k][n] = 1.0;
    solve_dense(&mut m).into_iter().take(k).collect()
}

/// Gaussian elimination with partial pivoting on an augmented n×(n+1) system.
pub(crate) fn solve_dense(m: &mut [Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        if piv.abs() < 1e-300 {
            continue;
        }
        for r in c + 1..n {
            let f = m[r][c] / piv;
            if f != 0.0 {
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = if m[r][r].abs() < 1e-300 { 0.0 } else { (m[r][n] - s) / m[r][r] };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sk(beta: f64) -> MixtureModel<f64> {
        MixtureModel::symmetric(1, 2, beta)
    }

    #[test]
    fn xi_examples() {
        let m = MixtureModel::new(2, vec![MixtureTerm { p: 1, beta: vec![1.0, 1.0] }]).unwrap();
        let a = SymMatrix::from_rows(&[vec![0.3, -0.2], vec![-0.2, 0.5]]).unwrap();
        assert!((m.xi(&a).unwrap() - (0.3f64 - 0.4 + 0.5)).abs() < 1e-15);
        assert_eq!(m.xi(&SymMatrix::zeros(2)).unwrap(), 0.0);
        assert_eq!(sk(1.0).xi(&SymMatrix::from_diag(&[0.7])).unwrap(), 0.7f64.powi(2));
        assert!(m.xi(&SymMatrix::zeros(3)).is_err());
    }

    #[test]
    fn grad_and_theta_examples() {
        let q = SymMatrix::from_diag(&[0.4]);
        assert!((sk(1.0).grad_xi(&q).unwrap().get(0, 0) - 0.8).abs() < 1e-15);
        assert!((sk(1.0).theta(&q).unwrap() - 0.16).abs() < 1e-15);
        let m = MixtureModel::symmetric(3, 2, 0.7);
        assert_eq!(m.grad_xi(&SymMatrix::zeros(3)).unwrap(), SymMatrix::zeros(3));
        assert_eq!(m.theta(&SymMatrix::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_mixture_flags() {
        let t = |b: Vec<f64>| MixtureModel::new(2, vec![MixtureTerm { p: 2, beta: b }]).unwrap();
        assert!(t(vec![1.0, 1.0]).is_symmetric());
        assert!(!t(vec![1.0, 2.0]).is_symmetric());
        assert!(MixtureModel::<f64>::zero(2).is_symmetric());
    }

    #[test]
    fn xi_star_quadratic() {
        let m = sk(1.0);
        for y in [0.0, 0.3, 1.0, 2.5] {
            let r = m.xi_star(&SymMatrix::from_diag(&[y]), &XiStarSpec::default()).unwrap();
            // independent grid search over z ∈ [0, 5]
            let grid = (0..=50_000).map(|k| k as f64 * 1e-4).map(|z| z * y - z * z).fold(f64::MIN, f64::max);
            assert!((r.value - grid).abs() < 1e-7, "y={y}: {} vs {grid}", r.value);
            assert!((r.value - y * y / 4.0).abs() < 1e-10);
            assert!((r.argmax.get(0, 0) - y / 2.0).abs() < 1e-5);
        }
        let r = m.xi_star(&SymMatrix::from_diag(&[-1.0]), &XiStarSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn xi_star_diverges_for_linear() {
        let m = MixtureModel::new(1, vec![MixtureTerm { p: 1, beta: vec![1.0] }]).unwrap();
        let r = m.xi_star(&SymMatrix::from_diag(&[2.0]), &XiStarSpec::default());
        assert!(matches!(r, Err(Error::Divergent(_))));
    }

    #[test]
    fn validator_examples() {
        let potts = MixtureModel::new(
            2,
            vec![MixtureTerm { p: 1, beta: vec![0.5, 0.5] }, MixtureTerm { p: 2, beta: vec![1.0, 1.0] }],
        )
        .unwrap();
        assert!(potts.validate_hypotheses(500, 1).passed());
        assert!(MixtureModel::<f64>::zero(2).validate_hypotheses(100, 1).passed());
        let cubic = MixtureModel::symmetric(2, 3, 1.0);
        let r = cubic.validate_hypotheses(500, 1);
        assert!(!r.convex.passed);
        assert!(r.odd_terms);
        let w = r.convex.counterexample.unwrap();
        assert!(w.iter().any(|a| a.get(0, 1) < 0.0));
    }

    #[test]
    fn hull_examples() {
        let h = SpinMeasure::<f64>::ising().overlap_hull();
        assert_eq!(h.vertices().len(), 1);
        assert_eq!(h.vertices()[0], SymMatrix::from_diag(&[1.0]));
        let p = SpinMeasure::<f64>::potts(2).overlap_hull();
        assert_eq!(p.vertices().len(), 2);
        assert!(p.contains(&SymMatrix::from_diag(&[0.5, 0.5]), 1e-12));
        assert!(p.contains(&SymMatrix::from_diag(&[0.2, 0.8]), 1e-12));
        assert!((p.distance(&SymMatrix::from_diag(&[1.0, 1.0])) - 0.5f64.sqrt()).abs() < 1e-12);
        let off = SymMatrix::from_rows(&[vec![0.5, 0.1], vec![0.1, 0.5]]).unwrap();
        assert!((p.distance(&off) - 0.02f64.sqrt()).abs() < 1e-12);
        let p3 = SpinMeasure::<f64>::potts(3).overlap_hull();
        assert!(p3.contains(&SymMatrix::from_diag(&[1.0 / 3.0; 3]), 1e-12));
    }

    #[test]
    fn measure_validation() {
        let bad = SpinMeasure::new(1, vec![Atom { tau: vec![1.0], weight: 0.7 }]);
        assert!(bad.is_err());
        let out = SpinMeasure::new(1, vec![Atom { tau: vec![1.5], weight: 1.0 }]);
        assert!(out.is_err());
    }
}
