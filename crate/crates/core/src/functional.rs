//! The Parisi functional 𝒫(π, x) of a step path, by the finite cascade recursion.
//!
//! For canonical levels l = 1..n with breakpoints b, the level-l increment
//! Δ_l = ∇ξ(γ_l) − ∇ξ(γ_{l−1}) (γ₀ = 0, ∇ξ(γ₀) := 0) carries the parameter
//! m_l = b_{l−1}. Starting from the leaf
//! `Y_n = log Σ_i p_i exp(h·τ_i − ½ μ_n·τ_iτ_iᵀ + x·τ_iτ_iᵀ)` the recursion
//! `Y_{l−1} = (1/m) log E exp(m Y_l)` (plain expectation when m = 0) gives
//! `𝒫 = Y₀ + ½ ∫ θ(π)`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MixtureModel, SpinMeasure};
use crate::paths::{merged_pieces, StepPath};
use crate::quadrature::gauss_hermite;
use crate::rng::{derive_seed, stream, tags};
use crate::scalar::Scalar;
use crate::symcone::{PsdMatrix, SymMatrix};

pub const GH_NODE_LIMIT: f64 = 1e7;
pub const CASCADE_LEAF_LIMIT: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadMode {
    GaussHermite,
    MonteCarlo,
}

/// How the nested Gaussian expectations are computed.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub mode: QuadMode,
    pub gh_nodes: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { mode: QuadMode::GaussHermite, gh_nodes: 20, mc_samples: 100_000, seed: 0, antithetic: true }
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(nodes: usize) -> Self {
        Self { gh_nodes: nodes, ..Self::default() }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self { mode: QuadMode::MonteCarlo, mc_samples: samples, seed, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult<T> {
    pub value: T,
    pub std_error: T,
    /// |Δ_l| per canonical level.
    pub level_norms: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct GradEstimate<T> {
    pub value: EvalResult<T>,
    pub grad: SymMatrix<T>,
    /// Largest entrywise standard error.
    pub std_error: T,
}

struct Level<T> {
    m: T,
    tag: u64,
    /// dirs[k][i] = (√λ_k u_k)·τ_i
    dirs: Vec<Vec<T>>,
}

struct Prepared<T> {
    log_p: Vec<T>,
    leaf: Vec<T>,
    levels: Vec<Level<T>>,
    offset: T,
    grams: Vec<SymMatrix<T>>,
    level_norms: Vec<T>,
}

#[derive(Clone, Copy)]
enum Leaf {
    /// −½ μ_n·ττᵀ + x·ττᵀ and the ½∫θ term.
    Parisi,
    /// λ·ττᵀ only.
    Bare,
}

fn prepare<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    path: &StepPath<T>,
    field: &SymMatrix<T>,
    leaf_kind: Leaf,
) -> Result<Prepared<T>> {
    let d = model.dim();
    for got in [spins.dim(), path.dim(), field.dim()] {
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
    }
    let grams: Vec<SymMatrix<T>> = (0..spins.len()).map(|i| spins.gram(i)).collect();
    let log_p = spins.atoms().iter().map(|a| a.weight.ln()).collect();
    let grid = path.grid();
    let mut prev = SymMatrix::zeros(d);
    let mut levels = Vec::new();
    let mut level_norms = Vec::new();
    for (l, gamma) in path.values().iter().enumerate() {
        let mu = model.grad_xi(gamma)?;
        let delta = &mu - &prev;
        level_norms.push(delta.norm());
        let psd = PsdMatrix::new(delta)
            .map_err(|e| Error::Hypothesis(format!("increment {l} of ∇ξ∘π is not PSD ({e})")))?;
        let eig = psd.eigen();
        let tol = T::tol_psd() * (T::one() + psd.norm());
        let dirs: Vec<Vec<T>> = eig
            .values
            .iter()
            .zip(&eig.vectors)
            .filter(|(&lam, _)| lam > tol)
            .map(|(&lam, u)| {
                let s = lam.sqrt();
                spins.atoms().iter().map(|a| s * a.tau.iter().zip(u).map(|(&t, &v)| t * v).sum::<T>()).collect()
            })
            .collect();
        if !dirs.is_empty() {
            levels.push(Level { m: grid[l], tag: l as u64, dirs });
        }
        prev = mu;
    }
    let (leaf_field, offset) = match leaf_kind {
        Leaf::Parisi => {
            let half_mu = prev.scale(T::of(0.5));
            let theta = path.integrate(|v| model.theta(v).unwrap_or(T::nan()));
            (field - &half_mu, T::of(0.5) * theta)
        }
        Leaf::Bare => (field.clone(), T::zero()),
    };
    let leaf = grams.iter().map(|g| g.dot(&leaf_field)).collect();
    Ok(Prepared { log_p, leaf, levels, offset, grams, level_norms })
}

struct Node<T> {
    w: T,
    shift: Vec<T>,
}

enum Sampler<T> {
    Fixed(Vec<Vec<Node<T>>>),
    Random { n: Vec<usize>, seed: u64, antithetic: bool },
}

fn tensor_nodes<T: Scalar>(dirs: &[Vec<T>], rule: &[(f64, f64)]) -> Vec<Node<T>> {
    let a = dirs[0].len();
    let mut nodes = vec![Node { w: T::one(), shift: vec![T::zero(); a] }];
    for dir in dirs {
        let mut next = Vec::with_capacity(nodes.len() * rule.len());
        for node in &nodes {
            for &(x, w) in rule {
                let x = T::of(x);
                let shift = node.shift.iter().zip(dir).map(|(&s, &d)| s + x * d).collect();
                next.push(Node { w: node.w * T::of(w), shift });
            }
        }
        nodes = next;
    }
    nodes
}

fn build_sampler<T: Scalar>(p: &Prepared<T>, q: &QuadratureSpec) -> Result<Sampler<T>> {
    match q.mode {
        QuadMode::GaussHermite => {
            let n = q.gh_nodes.max(1);
            let total: f64 = p.levels.iter().map(|l| (n as f64).powi(l.dirs.len() as i32)).product();
            if total > GH_NODE_LIMIT {
                return Err(Error::QuadratureGuard { nodes: total, limit: GH_NODE_LIMIT });
            }
            let rule = gauss_hermite(n);
            Ok(Sampler::Fixed(p.levels.iter().map(|l| tensor_nodes(&l.dirs, &rule)).collect()))
        }
        QuadMode::MonteCarlo => {
            let depth = p.levels.len();
            let mc = q.mc_samples.max(2) as f64;
            let even = |k: usize| if q.antithetic { (k + 1) & !1 } else { k };
            let n = if depth <= 1 {
                vec![even(mc as usize); depth]
            } else {
                let inner = even((mc.powf(1.0 / (depth as f64 + 1.0)).floor() as usize).clamp(8, 256));
                let top = even(((mc / (inner as f64).powi(depth as i32 - 1)) as usize).max(32));
                let mut v = vec![inner; depth];
                v[0] = top;
                v
            };
            Ok(Sampler::Random { n, seed: q.seed, antithetic: q.antithetic })
        }
    }
}

fn fill_random<T: Scalar>(level: &Level<T>, n: usize, seed: u64, antithetic: bool, id: u64, out: &mut Vec<Node<T>>) {
    out.clear();
    let mut rng = stream(seed, tags::QUADRATURE ^ (level.tag << 8), id);
    let a = level.dirs[0].len();
    let w = T::one() / T::of(n as f64);
    let draws = if antithetic { n / 2 } else { n };
    let mut g = vec![T::zero(); level.dirs.len()];
    for _ in 0..draws {
        for gk in g.iter_mut() {
            *gk = T::of(rng.sample::<f64, _>(StandardNormal));
        }
        let shift: Vec<T> = (0..a).map(|i| level.dirs.iter().zip(&g).map(|(d, &gk)| gk * d[i]).sum()).collect();
        if antithetic {
            out.push(Node { w, shift: shift.iter().map(|&s| -s).collect() });
        }
        out.push(Node { w, shift });
    }
}

/// (1/m) log(Σ w e^{m v} / Σ w) for m > 0, centred at the weighted mean; log1p/expm1 for small m·spread.
fn soft_mean<T: Scalar>(w: impl Iterator<Item = T> + Clone, v: &[T], m: T) -> T {
    let wsum: T = w.clone().sum();
    let mean = w.clone().zip(v).map(|(w, &v)| w * v).sum::<T>() / wsum;
    let spread = v.iter().fold(T::zero(), |a, &x| a.max((x - mean).abs()));
    if m * spread <= T::of(0.5) {
        let s = w.zip(v).map(|(w, &x)| w * (m * (x - mean)).exp_m1()).sum::<T>() / wsum;
        mean + s.ln_1p() / m
    } else {
        let mx = v.iter().fold(T::neg_infinity(), |a, &x| a.max(m * (x - mean)));
        let s = w.zip(v).map(|(w, &x)| w * (m * (x - mean) - mx).exp()).sum::<T>() / wsum;
        mean + (mx + s.ln()) / m
    }
}

struct Scratch<T> {
    state: Vec<Vec<T>>,
    nodes: Vec<Vec<Node<T>>>,
    probs: Vec<Vec<T>>,
    acc: Vec<Vec<T>>,
    vals: Vec<Vec<T>>,
}

impl<T: Scalar> Scratch<T> {
    fn new(depth: usize, atoms: usize) -> Self {
        Self {
            state: vec![vec![T::zero(); atoms]; depth + 1],
            nodes: (0..=depth).map(|_| Vec::new()).collect(),
            probs: vec![vec![T::zero(); atoms]; depth + 1],
            acc: vec![vec![T::zero(); atoms]; depth + 1],
            vals: (0..=depth).map(|_| Vec::new()).collect(),
        }
    }
}

struct Engine<'a, T> {
    p: &'a Prepared<T>,
    sampler: &'a Sampler<T>,
    grad: bool,
}

impl<'a, T: Scalar> Engine<'a, T> {
    fn leaf(&self, s: &mut Scratch<T>, l: usize) -> T {
        let st = &s.state[l];
        let a = st.len();
        let mut mx = T::neg_infinity();
        for i in 0..a {
            let e = self.p.log_p[i] + self.p.leaf[i] + st[i];
            s.probs[l][i] = e;
            mx = mx.max(e);
        }
        let mut sum = T::zero();
        for i in 0..a {
            let e = (s.probs[l][i] - mx).exp();
            s.probs[l][i] = e;
            sum += e;
        }
        if self.grad {
            for v in s.probs[l].iter_mut() {
                *v /= sum;
            }
        }
        mx + sum.ln()
    }

    /// Value of Y at depth `l` with its state already in `s.state[l]`; the tilted
    /// Gibbs weights over atoms land in `s.probs[l]` when gradients are on.
    fn eval(&self, l: usize, id: u64, s: &mut Scratch<T>) -> T {
        if l == self.p.levels.len() {
            return self.leaf(s, l);
        }
        let level = &self.p.levels[l];
        let mut nodes = std::mem::take(&mut s.nodes[l]);
        let nodes_ref: &[Node<T>] = match self.sampler {
            Sampler::Fixed(all) => &all[l],
            Sampler::Random { n, seed, antithetic } => {
                fill_random(level, n[l], *seed, *antithetic, id, &mut nodes);
                &nodes
            }
        };
        let a = s.state[l].len();
        let m = level.m;
        let mut total = T::zero();
        let mut mx = T::neg_infinity();
        if self.grad {
            s.acc[l].iter_mut().for_each(|v| *v = T::zero());
        }
        let mut vals = std::mem::take(&mut s.vals[l]);
        vals.clear();
        for (k, node) in nodes_ref.iter().enumerate() {
            for i in 0..a {
                s.state[l + 1][i] = s.state[l][i] + node.shift[i];
            }
            let v = self.eval(l + 1, derive_seed(id, l as u64, k as u64), s);
            vals.push(v);
            if m == T::zero() {
                total += node.w * v;
                if self.grad {
                    for i in 0..a {
                        s.acc[l][i] += node.w * s.probs[l + 1][i];
                    }
                }
            } else {
                let mv = m * v;
                if mv > mx {
                    let scale = if mx == T::neg_infinity() { T::zero() } else { (mx - mv).exp() };
                    total *= scale;
                    if self.grad {
                        s.acc[l].iter_mut().for_each(|x| *x *= scale);
                    }
                    mx = mv;
                }
                let e = node.w * (mv - mx).exp();
                total += e;
                if self.grad {
                    for i in 0..a {
                        s.acc[l][i] += e * s.probs[l + 1][i];
                    }
                }
            }
        }
        if self.grad {
            let norm = if m == T::zero() { T::one() } else { total };
            for i in 0..a {
                s.probs[l][i] = s.acc[l][i] / norm;
            }
        }
        let value = if m == T::zero() { total } else { soft_mean(nodes_ref.iter().map(|n| n.w), &vals, m) };
        s.nodes[l] = nodes;
        s.vals[l] = vals;
        value
    }

    /// Evaluates the whole recursion. The outermost level is fanned out in
    /// parallel and reduced in node order, which also yields the MC error.
    fn run(&self) -> (T, T, Option<(SymMatrix<T>, T)>) {
        let p = self.p;
        let a = p.log_p.len();
        let depth = p.levels.len();
        let to_grad = |probs: &[T]| -> SymMatrix<T> {
            p.grams.iter().zip(probs).fold(SymMatrix::zeros(p.grams[0].dim()), |acc, (g, &w)| &acc + &g.scale(w))
        };
        if depth == 0 {
            let mut s = Scratch::new(0, a);
            let v = self.leaf(&mut s, 0);
            let g = self.grad.then(|| (to_grad(&s.probs[0]), T::zero()));
            return (v, T::zero(), g);
        }
        let mut top: Vec<Node<T>> = Vec::new();
        let (nodes, random) = match self.sampler {
            Sampler::Fixed(all) => (&all[0][..], false),
            Sampler::Random { n, seed, antithetic } => {
                fill_random(&p.levels[0], n[0], *seed, *antithetic, *seed, &mut top);
                (&top[..], true)
            }
        };
        let root_id = match self.sampler {
            Sampler::Random { seed, .. } => *seed,
            _ => 0,
        };
        let children: Vec<(T, Option<Vec<T>>)> = nodes
            .par_iter()
            .enumerate()
            .map_init(
                || Scratch::new(depth, a),
                |s, (k, node)| {
                    s.state[1].copy_from_slice(&node.shift);
                    let v = self.eval(1, derive_seed(root_id, 0, k as u64), s);
                    (v, self.grad.then(|| s.probs[1].clone()))
                },
            )
            .collect();

        let m = p.levels[0].m;
        let ws: Vec<T> = nodes.iter().map(|n| n.w).collect();
        let vals: Vec<T> = children.iter().map(|c| c.0).collect();
        let (value, e): (T, Vec<T>) = if m == T::zero() {
            (ws.iter().zip(&vals).map(|(&w, &v)| w * v).sum(), ws.clone())
        } else {
            let mx = vals.iter().fold(T::neg_infinity(), |a, &v| a.max(m * v));
            let e: Vec<T> = ws.iter().zip(&vals).map(|(&w, &v)| w * (m * v - mx).exp()).collect();
            let tot: T = e.iter().copied().sum();
            (soft_mean(ws.iter().copied(), &vals, m), e.iter().map(|&x| x / tot).collect())
        };

        let grad = self.grad.then(|| {
            let mut probs = vec![T::zero(); a];
            for (c, &ek) in children.iter().zip(&e) {
                for (pi, &ci) in probs.iter_mut().zip(c.1.as_ref().unwrap()) {
                    *pi += ek * ci;
                }
            }
            to_grad(&probs)
        });

        if !random {
            return (value, T::zero(), grad.map(|g| (g, T::zero())));
        }

        // error from independent units: antithetic pairs are averaged first
        let unit = match self.sampler {
            Sampler::Random { antithetic: true, .. } => 2,
            _ => 1,
        };
        let n_units = vals.len() / unit;
        let stat: Vec<T> = if m == T::zero() {
            vals.chunks(unit).map(|c| c.iter().copied().sum::<T>() / T::of(c.len() as f64)).collect()
        } else {
            let mx = vals.iter().fold(T::neg_infinity(), |a, &v| a.max(m * v));
            vals.chunks(unit)
                .map(|c| c.iter().map(|&v| (m * v - mx).exp()).sum::<T>() / T::of(c.len() as f64))
                .collect()
        };
        let se_of = |xs: &[T]| -> (T, T) {
            let n = T::of(xs.len() as f64);
            let mean = xs.iter().copied().sum::<T>() / n;
            let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one()).max(T::one());
            (mean, (var / n).sqrt())
        };
        let (mean, se) = se_of(&stat);
        let std_error = if m == T::zero() { se } else { se / (m * mean) };

        let grad = grad.map(|g| {
            // entrywise ratio-estimator error on ⟨ττᵀ⟩
            let weights: Vec<T> = if m == T::zero() {
                vec![T::one(); vals.len()]
            } else {
                let mx = vals.iter().fold(T::neg_infinity(), |a, &v| a.max(m * v));
                vals.iter().map(|&v| (m * v - mx).exp()).collect()
            };
            let mut worst = T::zero();
            let mats: Vec<SymMatrix<T>> = children.iter().map(|c| to_grad(c.1.as_ref().unwrap())).collect();
            for idx in 0..g.packed().len() {
                let mut num = T::zero();
                let mut den = T::zero();
                for (u, chunk) in mats.chunks(unit).enumerate() {
                    let mut r = T::zero();
                    let mut wsum = T::zero();
                    for (j, mtx) in chunk.iter().enumerate() {
                        let w = weights[u * unit + j];
                        r += w * (mtx.packed()[idx] - g.packed()[idx]);
                        wsum += w;
                    }
                    num += r * r;
                    den += wsum;
                }
                let se = num.sqrt() / den * T::of((n_units as f64 / (n_units as f64 - 1.0).max(1.0)).sqrt());
                worst = worst.max(se);
            }
            (g, worst)
        });
        (value, std_error, grad)
    }
}

fn evaluate<T: Scalar>(p: &Prepared<T>, q: &QuadratureSpec, grad: bool) -> Result<(EvalResult<T>, Option<(SymMatrix<T>, T)>)> {
    let sampler = build_sampler(p, q)?;
    let engine = Engine { p, sampler: &sampler, grad };
    let (v, se, g) = engine.run();
    let res = EvalResult { value: v + p.offset, std_error: se, level_norms: p.level_norms.clone() };
    Ok((res, g))
}

/// 𝒫(π, x).
pub fn parisi_functional<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    path: &StepPath<T>,
    x: &SymMatrix<T>,
    q: &QuadratureSpec,
) -> Result<EvalResult<T>> {
    let p = prepare(model, spins, path, x, Leaf::Parisi)?;
    Ok(evaluate(&p, q, false)?.0)
}

/// Φ(λ, π) = E log ∫ exp(w^{∇ξ∘π}·τ + λ·ττᵀ) dP₁ dℜ, without the self-overlap and θ terms.
pub fn cascade_phi<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    path: &StepPath<T>,
    lambda: &SymMatrix<T>,
    q: &QuadratureSpec,
) -> Result<EvalResult<T>> {
    let p = prepare(model, spins, path, lambda, Leaf::Bare)?;
    Ok(evaluate(&p, q, false)?.0)
}

/// ∇ₓ𝒫(π, x) as the cascade-Gibbs average of ττᵀ, by tilted reweighting through the recursion.
pub fn functional_gradient_x<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    path: &StepPath<T>,
    x: &SymMatrix<T>,
    q: &QuadratureSpec,
) -> Result<GradEstimate<T>> {
    let p = prepare(model, spins, path, x, Leaf::Parisi)?;
    let (value, g) = evaluate(&p, q, true)?;
    let (grad, std_error) = g.expect("gradient requested");
    Ok(GradEstimate { value, grad, std_error })
}

/// Central differences of 𝒫(π, ·) along the symmetric unit directions, with common random numbers.
pub fn functional_gradient_x_fd<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    path: &StepPath<T>,
    x: &SymMatrix<T>,
    q: &QuadratureSpec,
    h: T,
) -> Result<GradEstimate<T>> {
    let d = x.dim();
    let value = parisi_functional(model, spins, path, x, q)?;
    let mut grad = SymMatrix::zeros(d);
    let mut worst = T::zero();
    for i in 0..d {
        for j in i..d {
            let mut e = SymMatrix::zeros(d);
            e.set(i, j, h);
            let fp = parisi_functional(model, spins, path, &(x + &e), q)?;
            let fm = parisi_functional(model, spins, path, &(x - &e), q)?;
            // d/dh 𝒫(x + hE) = G·E, which is 2G_ij off the diagonal
            let scale = if i == j { T::one() } else { T::of(2.0) };
            grad.set(i, j, (fp.value - fm.value) / (T::of(2.0) * h * scale));
            worst = worst.max((fp.std_error + fm.std_error) / (T::of(2.0) * h * scale));
        }
    }
    Ok(GradEstimate { value, grad, std_error: worst })
}

/// ½ ∫ (|∇ξ(π) − ∇ξ(π′)| + |θ(π) − θ(π′)|) ds on the merged grid.
pub fn lipschitz_path_bound<T: Scalar>(model: &MixtureModel<T>, a: &StepPath<T>, b: &StepPath<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let mut s = T::zero();
    for (w, u, v) in merged_pieces(a, b) {
        let dg = (&model.grad_xi(u)? - &model.grad_xi(v)?).norm();
        let dt = (model.theta(u)? - model.theta(v)?).abs();
        s += w * (dg + dt);
    }
    Ok(T::of(0.5) * s)
}

/// Controls for the direct cascade-sampling estimate.
#[derive(Clone, Debug)]
pub struct OracleSpec {
    /// Points kept per Poisson–Dirichlet level.
    pub atoms: usize,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct OracleResult<T> {
    pub value: T,
    pub std_error: T,
    /// Mean estimated weight fraction lost to truncation, worst level.
    pub tail_mass: T,
    pub truncation_flag: bool,
}

/// Direct estimate of E log ∬ exp(…) dP₁ dℜ over a truncated Ruelle cascade.
pub fn cascade_oracle<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    path: &StepPath<T>,
    x: &SymMatrix<T>,
    spec: &OracleSpec,
) -> Result<OracleResult<T>> {
    if path.levels() > 3 {
        return Err(Error::Unsupported("cascade oracle supports at most 3 levels".into()));
    }
    if spec.atoms == 0 || spec.atoms > 5000 {
        return Err(Error::Unsupported("cascade oracle needs 1 ≤ K ≤ 5000".into()));
    }
    let d = model.dim();
    let p = prepare(model, spins, path, x, Leaf::Parisi)?;
    // all canonical levels branch, including ones with a vanishing increment
    let mut prev = SymMatrix::zeros(d);
    let mut tree: Vec<(f64, Vec<Vec<T>>)> = Vec::new();
    for (l, gamma) in path.values().iter().enumerate() {
        let mu = model.grad_xi(gamma)?;
        let delta = PsdMatrix::new(&mu - &prev)?;
        let eig = delta.eigen();
        let dirs: Vec<Vec<T>> = eig
            .values
            .iter()
            .zip(&eig.vectors)
            .filter(|(&lam, _)| lam > T::zero())
            .map(|(&lam, u)| {
                let s = lam.sqrt();
                spins.atoms().iter().map(|a| s * a.tau.iter().zip(u).map(|(&t, &v)| t * v).sum::<T>()).collect()
            })
            .collect();
        tree.push((path.grid()[l].f64(), dirs));
        prev = mu;
    }
    let leaves: f64 = tree.iter().map(|(m, _)| if *m > 0.0 { spec.atoms as f64 } else { 1.0 }).product();
    if leaves > CASCADE_LEAF_LIMIT {
        return Err(Error::CascadeGuard { leaves, limit: CASCADE_LEAF_LIMIT });
    }
    let a = spins.len();

    struct Rep {
        value: f64,
        tail: Vec<f64>,
    }
    let reps: Vec<Rep> = (0..spec.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(spec.seed, tags::CASCADE, r as u64);
            let mut tail = vec![0.0; tree.len()];
            let state = vec![0.0; a];
            let (lz, ln) = cascade_node(&p, &tree, 0, &state, &mut rng, spec.atoms, &mut tail);
            Rep { value: lz - ln, tail }
        })
        .collect();

    let n = reps.len() as f64;
    let mean = reps.iter().map(|r| r.value).sum::<f64>() / n;
    let var = reps.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut tail_mass = 0.0f64;
    for l in 0..tree.len() {
        let t = reps.iter().map(|r| r.tail[l]).sum::<f64>() / n;
        tail_mass = tail_mass.max(t);
    }
    Ok(OracleResult {
        value: T::of(mean) + p.offset,
        std_error: T::of((var / n).sqrt()),
        tail_mass: T::of(tail_mass),
        truncation_flag: tail_mass > 1e-3,
    })
}

/// Returns (log Σ weights·exp(leaf), log Σ weights) below one cascade node.
fn cascade_node<T: Scalar>(
    p: &Prepared<T>,
    tree: &[(f64, Vec<Vec<T>>)],
    l: usize,
    state: &[f64],
    rng: &mut rand_chacha::ChaCha8Rng,
    k_max: usize,
    tail: &mut [f64],
) -> (f64, f64) {
    let a = state.len();
    if l == tree.len() {
        let es: Vec<f64> = (0..a).map(|i| p.log_p[i].f64() + p.leaf[i].f64() + state[i]).collect();
        return (logsumexp(&es), 0.0);
    }
    let (m, dirs) = &tree[l];
    let k = if *m > 0.0 { k_max } else { 1 };
    // top-k points of PPP(m t^{−m−1} dt): t_j = Γ_j^{−1/m}
    let mut log_t = Vec::with_capacity(k);
    if *m > 0.0 {
        let mut gamma = 0.0f64;
        for _ in 0..k {
            gamma += rng.sample::<f64, _>(Exp1);
            log_t.push(-gamma.ln() / m);
        }
        let last = log_t[k - 1];
        let lsum = logsumexp(&log_t);
        let est = (last + (k as f64).ln() + (m / (1.0 - m)).ln()).exp();
        let frac = est / (est + lsum.exp());
        tail[l] += frac;
    } else {
        log_t.push(0.0);
    }
    let mut zs = Vec::with_capacity(k);
    let mut ns = Vec::with_capacity(k);
    let mut child = vec![0.0; a];
    for lt in log_t.iter() {
        child.copy_from_slice(state);
        for dir in dirs {
            let g: f64 = rng.sample(StandardNormal);
            for i in 0..a {
                child[i] += g * dir[i].f64();
            }
        }
        let (z, n) = cascade_node(p, tree, l + 1, &child, rng, k_max, tail);
        zs.push(lt + z);
        ns.push(lt + n);
    }
    (logsumexp(&zs), logsumexp(&ns))
}

fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}
