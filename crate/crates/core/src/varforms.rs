//! Variational formulas built on the Parisi functional: 𝒫(x), its endpoint-constrained
//! version and gradient, the two sup-inf free-energy formulas, the ξ*-form, the Hopf
//! formula and a harness comparing them.
//!
//! Every sup/inf runs Nelder–Mead on unconstrained parameters. Paths use cumulative
//! Cholesky-factor increments (or normalized increments conjugated by √z for a pinned
//! endpoint) and softmax grid widths. Inner infima over y add ε√(1+|y|²) over a
//! decreasing ε schedule with warm starts; a minimizer stuck at the norm cap marks the
//! infimum as −∞.

use std::cell::RefCell;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::{cascade_phi, functional_gradient_x, parisi_functional, QuadratureSpec};
use crate::model::{MixtureModel, SpinMeasure, XiStarSpec};
use crate::optim::{maximize_interval, nelder_mead, NmResult, NmSpec};
use crate::paths::StepPath;
use crate::rng::{stream, tags};
use crate::scalar::Scalar;
use crate::symcone::{pinv_sqrt, sqrt_psd, PsdMatrix, Square, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMode {
    FixedUniform,
    Free,
}

/// Range of the y and z variables in the sup-inf formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// y ∈ S^D, z in the affine hull of 𝒟.
    Full,
    /// y, z ∈ S^D_+.
    Cone,
}

#[derive(Clone, Debug)]
pub struct OptimizerSpec {
    pub levels: usize,
    pub grid_mode: GridMode,
    pub restarts: usize,
    /// Starts of the outer sup over z or y.
    pub outer_restarts: usize,
    /// Evaluation budget per inner Nelder–Mead run.
    pub max_evals: usize,
    pub outer_evals: usize,
    pub tol_value: f64,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
    pub y_cap: f64,
    pub z_cap: f64,
    pub epsilons: Vec<f64>,
    pub xi_star: XiStarSpec,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            levels: 3,
            grid_mode: GridMode::Free,
            restarts: 8,
            outer_restarts: 2,
            max_evals: 4000,
            outer_evals: 200,
            tol_value: 1e-3,
            seed: 0,
            quadrature: QuadratureSpec::gauss_hermite(12),
            y_cap: 10.0,
            z_cap: 10.0,
            epsilons: vec![1e-1, 1e-2, 1e-3],
            xi_star: XiStarSpec::default(),
        }
    }
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidPath("levels must be at least 1".into()));
        }
        if !(self.tol_value > 0.0) {
            return Err(Error::Unsupported("tol_value must be positive".into()));
        }
        if self.restarts == 0 || self.outer_restarts == 0 {
            return Err(Error::Unsupported("restarts must be at least 1".into()));
        }
        Ok(())
    }

    fn inner_nm(&self) -> NmSpec {
        NmSpec { max_evals: self.max_evals, tol_f: self.tol_value * 1e-4, tol_x: 1e-5, step: 0.3, rebuilds: 2 }
    }

    fn outer_nm(&self) -> NmSpec {
        NmSpec { max_evals: self.outer_evals, tol_f: self.tol_value * 1e-2, tol_x: 1e-4, step: 0.2, rebuilds: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct VariationalResult<T> {
    pub value: T,
    pub path: StepPath<T>,
    pub y: Option<SymMatrix<T>>,
    pub z: Option<SymMatrix<T>>,
    pub std_error: T,
    /// Every Nelder–Mead run behind the reported optimizer collapsed its simplex.
    pub converged: bool,
    /// The inner infimum at the reported point ran to the norm cap.
    pub diverged: bool,
    pub evals: usize,
    /// Best objective value after each optimizer iteration.
    pub trace: Vec<f64>,
}

fn tri(d: usize) -> usize {
    d * (d + 1) / 2
}

/// L Lᵀ for the lower-triangular L whose rows are packed in `p`.
fn gram_factor<T: Scalar>(d: usize, p: &[f64]) -> SymMatrix<T> {
    let mut l = vec![0.0; d * d];
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            l[i * d + j] = p[k];
            k += 1;
        }
    }
    SymMatrix::from_fn(d, |i, j| T::of((0..d).map(|k| l[i * d + k] * l[j * d + k]).sum()))
}

/// Inverse of [`gram_factor`] for a PSD input (Cholesky with a small diagonal floor).
fn factor_params<T: Scalar>(a: &SymMatrix<T>) -> Vec<f64> {
    let d = a.dim();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a.get(i, j).f64();
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = if i == j { s.max(1e-12).sqrt() } else { s / l[j * d + j] };
        }
    }
    (0..d).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| l[i * d + j]).collect()
}

/// Decodes optimizer parameters into step paths of a fixed number of levels.
struct PathCoder<T> {
    dim: usize,
    levels: usize,
    free_grid: bool,
    end: Option<(SymMatrix<T>, Square<T>)>,
}

impl<T: Scalar> PathCoder<T> {
    fn new(dim: usize, spec: &OptimizerSpec, end: Option<&PsdMatrix<T>>) -> Self {
        Self {
            dim,
            levels: spec.levels,
            free_grid: spec.grid_mode == GridMode::Free,
            end: end.map(|z| (z.as_sym().clone(), Square::from_sym(sqrt_psd(z).as_sym()))),
        }
    }

    fn factors(&self) -> usize {
        match self.end {
            Some(_) if self.levels == 1 => 0,
            _ => self.levels * tri(self.dim),
        }
    }

    fn len(&self) -> usize {
        self.factors() + if self.free_grid { self.levels - 1 } else { 0 }
    }

    fn grid(&self, u: &[f64]) -> Vec<T> {
        let r = self.levels;
        if !self.free_grid || r == 1 {
            return (0..=r).map(|j| T::of(j as f64 / r as f64)).collect();
        }
        let logits: Vec<f64> = std::iter::once(0.0).chain(u.iter().copied()).collect();
        let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
        let s: f64 = w.iter().sum();
        let mut g = vec![T::zero()];
        let mut acc = 0.0;
        for wi in &w[..r - 1] {
            acc += wi / s;
            g.push(T::of(acc.min(1.0)));
        }
        g.push(T::one());
        g
    }

    fn decode(&self, p: &[f64]) -> StepPath<T> {
        let d = self.dim;
        let (fac, u) = p.split_at(self.factors());
        let grid = self.grid(u);
        let mut cum: Vec<SymMatrix<T>> = Vec::with_capacity(self.levels);
        for c in fac.chunks(tri(d)) {
            let inc = gram_factor::<T>(d, c);
            let next = match cum.last() {
                Some(prev) => prev + &inc,
                None => inc,
            };
            cum.push(next);
        }
        let values = match &self.end {
            None => cum,
            Some((z, _)) if self.levels == 1 => vec![z.clone()],
            Some((z, sz)) => {
                let s_inv = Square::from_sym(&pinv_sqrt(cum.last().unwrap()));
                let mut vals: Vec<SymMatrix<T>> =
                    cum[..self.levels - 1].iter().map(|c| c.congruence(&s_inv).congruence(sz)).collect();
                vals.push(z.clone());
                vals
            }
        };
        StepPath::canonical(grid, values)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum YSpace {
    Fixed,
    Full,
    Cone,
}

impl From<Domain> for YSpace {
    fn from(d: Domain) -> Self {
        match d {
            Domain::Full => YSpace::Full,
            Domain::Cone => YSpace::Cone,
        }
    }
}

/// inf over (y, π) of 𝒫(π, y) − y·lin, with y fixed or free.
struct Joint<'a, T> {
    model: &'a MixtureModel<T>,
    spins: &'a SpinMeasure<T>,
    quad: &'a QuadratureSpec,
    coder: PathCoder<T>,
    yspace: YSpace,
    y_fixed: SymMatrix<T>,
    lin: SymMatrix<T>,
    cap: f64,
}

struct Point<T> {
    value: f64,
    std_error: T,
    y: SymMatrix<T>,
    y_norm: f64,
    penalty: f64,
    path: StepPath<T>,
}

impl<'a, T: Scalar> Joint<'a, T> {
    fn ny(&self) -> usize {
        if self.yspace == YSpace::Fixed {
            0
        } else {
            tri(self.coder.dim)
        }
    }

    fn len(&self) -> usize {
        self.ny() + self.coder.len()
    }

    fn point(&self, p: &[f64]) -> Option<Point<T>> {
        let d = self.coder.dim;
        let (py, pp) = p.split_at(self.ny());
        let mut y = match self.yspace {
            YSpace::Fixed => self.y_fixed.clone(),
            YSpace::Full => SymMatrix::from_packed(d, py.iter().map(|&v| T::of(v)).collect()).ok()?,
            YSpace::Cone => gram_factor(d, py),
        };
        let y_norm = y.norm().f64();
        let mut penalty = 0.0;
        if self.yspace != YSpace::Fixed && y_norm > self.cap {
            y = y.scale(T::of(self.cap / y_norm));
            penalty = y_norm - self.cap;
        }
        let path = self.coder.decode(pp);
        let r = parisi_functional(self.model, self.spins, &path, &y, self.quad).ok()?;
        let value = (r.value - y.dot(&self.lin)).f64();
        value.is_finite().then_some(Point { value, std_error: r.std_error, y, y_norm, penalty, path })
    }

    fn objective(&self, p: &[f64], eps: f64) -> f64 {
        match self.point(p) {
            Some(pt) => pt.value + eps * (1.0 + pt.y_norm.min(self.cap).powi(2)).sqrt() + pt.penalty,
            None => f64::INFINITY,
        }
    }
}

struct Inner<T> {
    /// Unregularized objective at the returned point.
    value: f64,
    /// Last regularized value, finite even when the infimum diverges.
    surrogate: f64,
    diverged: bool,
    params: Vec<f64>,
    point: Point<T>,
    evals: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn run_schedule<T: Scalar>(joint: &Joint<'_, T>, start: &[f64], spec: &OptimizerSpec) -> (NmResult, usize, bool, Vec<f64>) {
    let eps_list: Vec<f64> = if joint.ny() == 0 { vec![0.0] } else { spec.epsilons.clone() };
    let nm = spec.inner_nm();
    let mut x = start.to_vec();
    let mut evals = 0;
    let mut trace = Vec::new();
    let mut last = None;
    for &eps in &eps_list {
        let r = nelder_mead(|p| joint.objective(p, eps), &x, &nm);
        x = r.x.clone();
        evals += r.evals;
        trace.extend_from_slice(&r.trace);
        last = Some(r);
    }
    let r = last.expect("non-empty schedule");
    let conv = r.converged;
    (r, evals, conv, trace)
}

fn minimize_joint<T: Scalar>(joint: &Joint<'_, T>, starts: &[Vec<f64>], spec: &OptimizerSpec) -> Result<Inner<T>> {
    let runs: Vec<(NmResult, usize, bool, Vec<f64>)> = if starts.len() == 1 {
        vec![run_schedule(joint, &starts[0], spec)]
    } else {
        starts.par_iter().map(|s| run_schedule(joint, s, spec)).collect()
    };
    let best = runs.iter().enumerate().fold(0, |b, (i, r)| if r.0.f < runs[b].0.f { i } else { b });
    let evals = runs.iter().map(|r| r.1).sum();
    let (r, _, converged, trace) = runs.into_iter().nth(best).unwrap();
    let point = joint
        .point(&r.x)
        .ok_or_else(|| Error::Divergent("no finite objective value found".into()))?;
    let diverged = joint.ny() > 0 && point.y_norm >= 0.9 * joint.cap;
    Ok(Inner { value: point.value, surrogate: r.f, diverged, params: r.x, point, evals, converged, trace })
}

fn random_starts(first: Vec<f64>, count: usize, seed: u64, salt: u64, scale: f64) -> Vec<Vec<f64>> {
    let mut out = vec![first.clone()];
    for k in 1..count {
        let mut rng = stream(seed, tags::RESTART ^ (salt << 8), k as u64);
        out.push(first.iter().map(|&v| v + scale * rng.sample::<f64, _>(StandardNormal)).collect());
    }
    out
}

fn check_dims<T: Scalar>(model: &MixtureModel<T>, spins: &SpinMeasure<T>, mats: &[&SymMatrix<T>]) -> Result<()> {
    let d = model.dim();
    if spins.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: spins.dim() });
    }
    for m in mats {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
        }
    }
    Ok(())
}

fn finish<T: Scalar>(inner: Inner<T>, extra: f64, z: Option<SymMatrix<T>>, y: bool) -> VariationalResult<T> {
    let value = if inner.diverged { f64::NEG_INFINITY } else { inner.value + extra };
    VariationalResult {
        value: T::of(value),
        path: inner.point.path,
        y: y.then_some(inner.point.y),
        z,
        std_error: inner.point.std_error,
        converged: inner.converged,
        diverged: inner.diverged,
        evals: inner.evals,
        trace: inner.trace,
    }
}

/// 𝒫(x) = inf over r-level step paths of 𝒫(π, x).
pub fn parisi_value<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    x: &SymMatrix<T>,
    spec: &OptimizerSpec,
) -> Result<VariationalResult<T>> {
    spec.validate()?;
    check_dims(model, spins, &[x])?;
    let d = model.dim();
    if model.is_zero() {
        let path = StepPath::zero(d);
        let r = parisi_functional(model, spins, &path, x, &spec.quadrature)?;
        return Ok(VariationalResult {
            value: r.value,
            path,
            y: None,
            z: None,
            std_error: r.std_error,
            converged: true,
            diverged: false,
            evals: 1,
            trace: vec![r.value.f64()],
        });
    }
    let joint = Joint {
        model,
        spins,
        quad: &spec.quadrature,
        coder: PathCoder::new(d, spec, None),
        yspace: YSpace::Fixed,
        y_fixed: x.clone(),
        lin: SymMatrix::zeros(d),
        cap: spec.y_cap,
    };
    let starts = random_starts(vec![0.0; joint.len()], spec.restarts, spec.seed, 1, 0.5);
    Ok(finish(minimize_joint(&joint, &starts, spec)?, 0.0, None, false))
}

/// inf over π ∈ Π(z) of 𝒫(π, x).
pub fn parisi_value_constrained<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    x: &SymMatrix<T>,
    z: &PsdMatrix<T>,
    spec: &OptimizerSpec,
) -> Result<VariationalResult<T>> {
    spec.validate()?;
    check_dims(model, spins, &[x, z.as_sym()])?;
    let d = model.dim();
    if z.is_zero() || model.is_zero() {
        let path = if z.is_zero() { StepPath::zero(d) } else { StepPath::constant(z.clone()) };
        let r = parisi_functional(model, spins, &path, x, &spec.quadrature)?;
        return Ok(VariationalResult {
            value: r.value,
            path,
            y: None,
            z: Some(z.as_sym().clone()),
            std_error: r.std_error,
            converged: true,
            diverged: false,
            evals: 1,
            trace: vec![r.value.f64()],
        });
    }
    let joint = Joint {
        model,
        spins,
        quad: &spec.quadrature,
        coder: PathCoder::new(d, spec, Some(z)),
        yspace: YSpace::Fixed,
        y_fixed: x.clone(),
        lin: SymMatrix::zeros(d),
        cap: spec.y_cap,
    };
    let starts = random_starts(vec![0.0; joint.len()], spec.restarts, spec.seed, 2, 0.5);
    Ok(finish(minimize_joint(&joint, &starts, spec)?, 0.0, Some(z.as_sym().clone()), false))
}

#[derive(Clone, Debug)]
pub struct GradResult<T> {
    pub grad: SymMatrix<T>,
    pub optimum: VariationalResult<T>,
    pub std_error: T,
    /// Central differences of 𝒫 when requested.
    pub fd: Option<SymMatrix<T>>,
    /// Envelope and difference estimates disagree by more than 5·tol_value.
    pub flagged: bool,
}

/// ∇𝒫(x) by the envelope rule at an optimal path, optionally checked against
/// central differences of 𝒫 with step `fd_step`.
pub fn grad_parisi<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    x: &SymMatrix<T>,
    spec: &OptimizerSpec,
    fd_step: Option<f64>,
) -> Result<GradResult<T>> {
    let optimum = parisi_value(model, spins, x, spec)?;
    let g = functional_gradient_x(model, spins, &optimum.path, x, &spec.quadrature)?;
    let mut fd = None;
    let mut flagged = false;
    if let Some(h) = fd_step {
        let d = x.dim();
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        let vals: Vec<Result<T>> = pairs
            .iter()
            .map(|&(i, j)| {
                let mut e = SymMatrix::zeros(d);
                e.set(i, j, T::of(h));
                let fp = parisi_value(model, spins, &(x + &e), spec)?.value;
                let fm = parisi_value(model, spins, &(x - &e), spec)?.value;
                let scale = if i == j { 2.0 * h } else { 4.0 * h };
                Ok((fp - fm) / T::of(scale))
            })
            .collect();
        let mut m = SymMatrix::zeros(d);
        for (&(i, j), v) in pairs.iter().zip(vals) {
            m.set(i, j, v?);
        }
        flagged = (&m - &g.grad).max_abs().f64() > 5.0 * spec.tol_value;
        fd = Some(m);
    }
    Ok(GradResult { grad: g.grad, optimum, std_error: g.std_error, fd, flagged })
}

/// One evaluation of an outer sup: the inner result plus the surrogate the outer optimizer sees.
struct OuterEval<T> {
    inner: Inner<T>,
    z: SymMatrix<T>,
    extra: f64,
}

impl<T> OuterEval<T> {
    fn surrogate(&self) -> f64 {
        self.inner.surrogate + self.extra
    }
}

/// Maximizes `eval` over parameters with warm-started inner solves, then re-solves the
/// inner problem at the maximizer with full restarts.
fn outer_max<T: Scalar, F>(starts: Vec<Vec<f64>>, spec: &OptimizerSpec, eval: F) -> Result<(OuterEval<T>, usize, Vec<f64>, bool)>
where
    F: Fn(&[f64], Option<&[f64]>, usize) -> Result<OuterEval<T>> + Sync,
{
    let nm = spec.outer_nm();
    let runs: Vec<(NmResult, usize)> = starts
        .par_iter()
        .map(|s| {
            let warm: RefCell<Option<Vec<f64>>> = RefCell::new(None);
            let inner_evals = RefCell::new(0usize);
            let r = nelder_mead(
                |p| {
                    let w = warm.borrow().clone();
                    match eval(p, w.as_deref(), 1) {
                        Ok(o) => {
                            *inner_evals.borrow_mut() += o.inner.evals;
                            let s = o.surrogate();
                            *warm.borrow_mut() = Some(o.inner.params);
                            -s
                        }
                        Err(_) => f64::INFINITY,
                    }
                },
                s,
                &nm,
            );
            let e = inner_evals.into_inner();
            (r, e)
        })
        .collect();
    let best = runs.iter().enumerate().fold(0, |b, (i, r)| if r.0.f < runs[b].0.f { i } else { b });
    let evals: usize = runs.iter().map(|r| r.1).sum();
    let converged = runs[best].0.converged;
    let trace: Vec<f64> = runs[best].0.trace.iter().map(|v| -v).collect();
    let x = runs[best].0.x.clone();
    let fin = eval(&x, None, spec.restarts)?;
    Ok((fin, evals, trace, converged))
}

fn assemble<T: Scalar>(o: OuterEval<T>, evals: usize, trace: Vec<f64>, converged: bool) -> VariationalResult<T> {
    let mut r = finish(o.inner, o.extra, Some(o.z), true);
    r.evals += evals;
    r.converged &= converged;
    r.trace = trace;
    r
}

fn inner_starts(len: usize, warm: Option<&[f64]>, restarts: usize, seed: u64, salt: u64) -> Vec<Vec<f64>> {
    match warm {
        Some(w) if restarts <= 1 => vec![w.to_vec()],
        Some(w) => {
            let mut s = random_starts(vec![0.0; len], restarts - 1, seed, salt, 0.5);
            s.insert(0, w.to_vec());
            s
        }
        None => random_starts(vec![0.0; len], restarts, seed, salt, 0.5),
    }
}

fn softmax(u: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = std::iter::once(0.0).chain(u.iter().copied()).collect();
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// sup over z ∈ 𝒟 of inf over y ∈ S^D, π ∈ Π(z) of 𝒫(π,y) − y·z + ½ξ(z).
pub fn free_energy_pan<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &OptimizerSpec,
) -> Result<VariationalResult<T>> {
    spec.validate()?;
    check_dims(model, spins, &[])?;
    let d = model.dim();
    let hull = spins.overlap_hull();
    let nv = hull.vertices().len();
    let at = |z: SymMatrix<T>, warm: Option<&[f64]>, restarts: usize| -> Result<OuterEval<T>> {
        let zp = PsdMatrix::new(z.clone())?;
        let joint = Joint {
            model,
            spins,
            quad: &spec.quadrature,
            coder: PathCoder::new(d, spec, Some(&zp)),
            yspace: YSpace::Full,
            y_fixed: SymMatrix::zeros(d),
            lin: z.clone(),
            cap: spec.y_cap,
        };
        let starts = inner_starts(joint.len(), warm, restarts, spec.seed, 3);
        let inner = minimize_joint(&joint, &starts, spec)?;
        Ok(OuterEval { inner, extra: 0.5 * model.xi(&z)?.f64(), z })
    };
    let weights = |p: &[f64]| -> Vec<T> { softmax(p).into_iter().map(T::of).collect() };
    if nv == 1 {
        let o = at(hull.vertices()[0].clone(), None, spec.restarts)?;
        return Ok(assemble(o, 0, Vec::new(), true));
    }
    if nv == 2 {
        let warm: RefCell<Option<Vec<f64>>> = RefCell::new(None);
        let mut evals = 0usize;
        let mut trace = Vec::new();
        let f = |t: f64| -> f64 {
            let z = hull.combine(&[T::of(1.0 - t), T::of(t)]);
            let w = warm.borrow().clone();
            match at(z, w.as_deref(), 1) {
                Ok(o) => {
                    let s = o.surrogate();
                    *warm.borrow_mut() = Some(o.inner.params.clone());
                    s
                }
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let counted = |t: f64| {
            let v = f(t);
            evals += 1;
            trace.push(v);
            v
        };
        let (t, _) = maximize_interval(counted, 0.0, 1.0, 8, 1e-4);
        let o = at(hull.combine(&[T::of(1.0 - t), T::of(t)]), warm.borrow().as_deref(), spec.restarts)?;
        return Ok(assemble(o, 0, trace, true));
    }
    let starts = random_starts(vec![0.0; nv - 1], spec.outer_restarts, spec.seed, 4, 1.0);
    let (o, evals, trace, conv) = outer_max(starts, spec, |p, warm, restarts| at(hull.combine(&weights(p)), warm, restarts))?;
    Ok(assemble(o, evals, trace, conv))
}

fn capped_factor<T: Scalar>(d: usize, p: &[f64], cap: f64) -> (SymMatrix<T>, f64) {
    let z: SymMatrix<T> = gram_factor(d, p);
    let n = z.norm().f64();
    if n > cap {
        (z.scale(T::of(cap / n)), n - cap)
    } else {
        (z, 0.0)
    }
}

/// sup over z ⪰ 0 of inf over y ⪰ 0, π ∈ Π of 𝒫(π,y) − y·z + ½ξ(z).
pub fn free_energy_hj<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &OptimizerSpec,
) -> Result<VariationalResult<T>> {
    spec.validate()?;
    check_dims(model, spins, &[])?;
    let d = model.dim();
    let start = factor_params(&spins.overlap_hull().barycenter());
    let starts = random_starts(start, spec.outer_restarts, spec.seed, 5, 0.2);
    let (o, evals, trace, conv) = outer_max(starts, spec, |p, warm, restarts| {
        let (z, pen) = capped_factor::<T>(d, p, spec.z_cap);
        let joint = Joint {
            model,
            spins,
            quad: &spec.quadrature,
            coder: PathCoder::new(d, spec, None),
            yspace: YSpace::Cone,
            y_fixed: SymMatrix::zeros(d),
            lin: z.clone(),
            cap: spec.y_cap,
        };
        let s = inner_starts(joint.len(), warm, restarts, spec.seed, 6);
        let inner = minimize_joint(&joint, &s, spec)?;
        Ok(OuterEval { inner, extra: 0.5 * model.xi(&z)?.f64() - pen, z })
    })?;
    Ok(assemble(o, evals, trace, conv))
}

/// sup over y ⪰ 0 of inf over π ∈ Π of 𝒫(π,y) − ½ξ*(2y).
pub fn free_energy_xistar<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &OptimizerSpec,
) -> Result<VariationalResult<T>> {
    spec.validate()?;
    check_dims(model, spins, &[])?;
    let d = model.dim();
    let y0 = model.grad_xi(&spins.overlap_hull().barycenter())?.scale(T::of(0.5));
    let starts = random_starts(factor_params(&y0), spec.outer_restarts, spec.seed, 7, 0.2);
    let (o, evals, trace, conv) = outer_max(starts, spec, |p, warm, restarts| {
        let (y, pen) = capped_factor::<T>(d, p, spec.y_cap);
        let star = model.xi_star(&y.scale(T::of(2.0)), &spec.xi_star)?;
        let joint = Joint {
            model,
            spins,
            quad: &spec.quadrature,
            coder: PathCoder::new(d, spec, None),
            yspace: YSpace::Fixed,
            y_fixed: y.clone(),
            lin: SymMatrix::zeros(d),
            cap: spec.y_cap,
        };
        let s = inner_starts(joint.len(), warm, restarts, spec.seed, 8);
        let inner = minimize_joint(&joint, &s, spec)?;
        Ok(OuterEval { inner, extra: -0.5 * star.value.f64() - pen, z: y })
    })?;
    let mut r = assemble(o, evals, trace, conv);
    // the outer variable here is y
    r.y = r.z.take();
    Ok(r)
}

/// f(t, x) = sup_z inf_y {𝒫(y) + z·(x − y) + tξ(z)}.
pub fn hopf_value<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    t: T,
    x: &SymMatrix<T>,
    domain: Domain,
    spec: &OptimizerSpec,
) -> Result<VariationalResult<T>> {
    spec.validate()?;
    check_dims(model, spins, &[x])?;
    if t < T::zero() {
        return Err(Error::Unsupported("hopf formula needs t ≥ 0".into()));
    }
    let d = model.dim();
    let hull = spins.overlap_hull();
    let nv = hull.vertices().len();
    let decode_z = |p: &[f64]| -> (SymMatrix<T>, f64) {
        match domain {
            Domain::Cone => capped_factor(d, p, spec.z_cap),
            Domain::Full => {
                let mut w = vec![T::one() - T::of(p.iter().sum::<f64>())];
                w.extend(p.iter().map(|&v| T::of(v)));
                let z = hull.combine(&w);
                let n = z.norm().f64();
                if n > spec.z_cap {
                    (z.scale(T::of(spec.z_cap / n)), n - spec.z_cap)
                } else {
                    (z, 0.0)
                }
            }
        }
    };
    let eval = |p: &[f64], warm: Option<&[f64]>, restarts: usize| -> Result<OuterEval<T>> {
        let (z, pen) = decode_z(p);
        let joint = Joint {
            model,
            spins,
            quad: &spec.quadrature,
            coder: PathCoder::new(d, spec, None),
            yspace: domain.into(),
            y_fixed: SymMatrix::zeros(d),
            lin: z.clone(),
            cap: spec.y_cap,
        };
        let s = inner_starts(joint.len(), warm, restarts, spec.seed, 9);
        let inner = minimize_joint(&joint, &s, spec)?;
        let extra = z.dot(x).f64() + t.f64() * model.xi(&z)?.f64() - pen;
        Ok(OuterEval { inner, extra, z })
    };
    let start = match domain {
        Domain::Cone => factor_params(&hull.barycenter()),
        Domain::Full => vec![1.0 / nv as f64; nv - 1],
    };
    let (o, evals, trace, conv) = if start.is_empty() {
        (eval(&[], None, spec.restarts)?, 0, Vec::new(), true)
    } else {
        let starts = random_starts(start, spec.outer_restarts, spec.seed, 10, 0.2);
        outer_max(starts, spec, eval)?
    };
    Ok(assemble(o, evals, trace, conv))
}

/// Both sides of the rewriting of Panchenko's functional:
/// Φ(λ,π) − λ·z − ½θ(z) + ½∫θ(π) and 𝒫(π, λ+½∇ξ(z)) − (λ+½∇ξ(z))·z + ½ξ(z).
pub fn translate_panchenko<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    lambda: &SymMatrix<T>,
    z: &PsdMatrix<T>,
    path: &StepPath<T>,
    q: &QuadratureSpec,
) -> Result<(T, T)> {
    check_dims(model, spins, &[lambda, z.as_sym(), path.endpoint()])?;
    let gap = (path.endpoint() - z.as_sym()).norm();
    if gap > T::of(1e-10) * (T::one() + z.norm()) {
        return Err(Error::EndpointMismatch(gap.f64()));
    }
    let half = T::of(0.5);
    let sum_theta = |a: &SymMatrix<T>| -> T {
        model.theta_entries(a).map(|m| {
            let d = m.dim();
            (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m.get(i, j)).sum()
        })
        .unwrap_or(T::nan())
    };
    let phi = cascade_phi(model, spins, path, lambda, q)?.value;
    let lhs = phi - lambda.dot(z) - half * sum_theta(z) + half * path.integrate(|v| sum_theta(v));

    let shifted = lambda + &model.grad_xi(z)?.scale(half);
    let p = parisi_functional(model, spins, path, &shifted, q)?.value;
    let rhs = p - shifted.dot(z) + half * model.xi(z)?;
    Ok((lhs, rhs))
}

#[derive(Clone, Debug)]
pub struct EquivalenceRow {
    pub label: String,
    pub a: f64,
    pub b: f64,
    pub diff: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport<T> {
    pub pan: VariationalResult<T>,
    pub hj: VariationalResult<T>,
    pub xistar: VariationalResult<T>,
    pub hopf: VariationalResult<T>,
    pub rows: Vec<EquivalenceRow>,
}

impl<T> EquivalenceReport<T> {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn row(label: impl Into<String>, a: f64, b: f64, tol: f64) -> EquivalenceRow {
    let diff = if a == b { 0.0 } else { (a - b).abs() };
    EquivalenceRow { label: label.into(), a, b, diff, tol, pass: diff <= tol }
}

/// inf over y ∈ S^D and π (optionally in Π(z)) of 𝒫(π,y) − y·z.
pub fn legendre_inf<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    z: &PsdMatrix<T>,
    pinned: bool,
    spec: &OptimizerSpec,
) -> Result<VariationalResult<T>> {
    check_dims(model, spins, &[z.as_sym()])?;
    let d = model.dim();
    let joint = Joint {
        model,
        spins,
        quad: &spec.quadrature,
        coder: PathCoder::new(d, spec, pinned.then_some(z)),
        yspace: YSpace::Full,
        y_fixed: SymMatrix::zeros(d),
        lin: z.as_sym().clone(),
        cap: spec.y_cap,
    };
    let starts = random_starts(vec![0.0; joint.len()], spec.restarts, spec.seed, 11, 0.5);
    Ok(finish(minimize_joint(&joint, &starts, spec)?, 0.0, Some(z.as_sym().clone()), true))
}

/// Runs the three free-energy formulas and the Hopf value at (½, 0), compares them
/// pairwise at 2·tol_value, and checks the pinned/unpinned Legendre identity at
/// the barycenter of 𝒟 and at `extra_points` random hull points.
pub fn check_equivalence<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &OptimizerSpec,
    extra_points: usize,
) -> Result<EquivalenceReport<T>> {
    let tol = 2.0 * spec.tol_value;
    let pan = free_energy_pan(model, spins, spec)?;
    let hj = free_energy_hj(model, spins, spec)?;
    let xistar = free_energy_xistar(model, spins, spec)?;
    let hopf = hopf_value(model, spins, T::of(0.5), &SymMatrix::zeros(model.dim()), Domain::Cone, spec)?;
    let (p, h, s, f) = (pan.value.f64(), hj.value.f64(), xistar.value.f64(), hopf.value.f64());
    let mut rows = vec![
        row("pan vs hj", p, h, tol),
        row("pan vs xistar", p, s, tol),
        row("hj vs xistar", h, s, tol),
        row("hopf(1/2,0) vs hj", f, h, tol),
    ];
    let hull = spins.overlap_hull();
    let mut points = vec![hull.barycenter()];
    let mut rng = stream(spec.seed, tags::VALIDATE, 0);
    for _ in 0..extra_points {
        let w: Vec<f64> = (0..hull.vertices().len()).map(|_| -rng.gen::<f64>().ln()).collect();
        let s: f64 = w.iter().sum();
        points.push(hull.combine(&w.iter().map(|v| T::of(v / s)).collect::<Vec<_>>()));
    }
    for (k, z) in points.into_iter().enumerate() {
        let zp = PsdMatrix::new(z)?;
        let free = legendre_inf(model, spins, &zp, false, spec)?.value.f64();
        let pinned = legendre_inf(model, spins, &zp, true, spec)?.value.f64();
        rows.push(row(format!("legendre identity at z{k}"), free, pinned, tol));
    }
    Ok(EquivalenceReport { pan, hj, xistar, hopf, rows })
}
