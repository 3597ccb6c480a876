//! Finite-N vector spin glass with self-overlap correction.
//!
//! A configuration σ is a D×N matrix whose columns are atoms of P₁. The Hamiltonian
//! H_N(σ) = Σ_p N^{−(p−1)/2} Σ_{i₁…i_p} g_{i₁…i_p} Σ_k β_p(k) σ_{k,i₁}⋯σ_{k,i_p}
//! has covariance N ξ(σσ′ᵀ/N). Gibbs weights are
//! Π_i P₁(σ_i) · exp(H_N(σ) − (N/2) ξ(σσᵀ/N) + x·σσᵀ), the correction being optional.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::EvalResult;
use crate::model::{MixtureModel, SpinMeasure};
use crate::rng::{derive_seed, stream, tags};
use crate::scalar::Scalar;
use crate::symcone::SymMatrix;

pub const ENUMERATION_LIMIT: f64 = 2e6;
const TENSOR_LIMIT: f64 = 1e7;

/// Gaussian couplings for every mixture term at one size N.
#[derive(Clone, Debug)]
pub struct DisorderSample {
    n: usize,
    seed: u64,
    /// (p, N^p standard normals in row-major index order)
    tensors: Vec<(u32, Vec<f64>)>,
}

impl DisorderSample {
    pub fn draw<T: Scalar>(model: &MixtureModel<T>, n: usize, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, tags::DISORDER, n as u64);
        let mut tensors = Vec::with_capacity(model.terms().len());
        for t in model.terms() {
            let size = (n as f64).powi(t.p as i32);
            if size > TENSOR_LIMIT {
                return Err(Error::EnumerationGuard { configs: size, limit: TENSOR_LIMIT });
            }
            let g = (0..size as usize).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            tensors.push((t.p, g));
        }
        Ok(Self { n, seed, tensors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// H_N(σ), with σ given as rows σ_k ∈ ℝ^N.
    pub fn hamiltonian<T: Scalar>(&self, model: &MixtureModel<T>, rows: &[Vec<f64>]) -> f64 {
        let n = self.n;
        let mut h = 0.0;
        let mut buf = Vec::new();
        for ((p, g), term) in self.tensors.iter().zip(model.terms()) {
            let scale = (n as f64).powf(-((*p as f64) - 1.0) / 2.0);
            for (k, row) in rows.iter().enumerate() {
                let b = term.beta[k].f64();
                if b == 0.0 {
                    continue;
                }
                h += scale * b * contract(g, row, &mut buf);
            }
        }
        h
    }
}

/// Σ g_{i₁…i_p} v_{i₁}⋯v_{i_p} by repeated contraction of the last index.
fn contract(g: &[f64], v: &[f64], buf: &mut Vec<f64>) -> f64 {
    let n = v.len();
    buf.clear();
    buf.extend(g.chunks(n).map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()));
    while buf.len() > 1 {
        let next: Vec<f64> = buf.chunks(n).map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()).collect();
        *buf = next;
    }
    buf[0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GibbsMode {
    Enumerate,
    Metropolis,
}

#[derive(Clone, Debug)]
pub struct GibbsSpec<T> {
    pub mode: GibbsMode,
    pub n: usize,
    pub x: SymMatrix<T>,
    pub correction: bool,
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl<T: Scalar> GibbsSpec<T> {
    pub fn enumerate(n: usize, x: SymMatrix<T>, seed: u64) -> Self {
        Self { mode: GibbsMode::Enumerate, n, x, correction: true, sweeps: 5000, burn_in: 1000, seed }
    }
}

/// Gibbs law of the self-overlap σσᵀ/N for one disorder draw.
#[derive(Clone, Debug)]
pub struct GibbsSummary {
    /// log Σ_σ weight(σ); NaN when sampled.
    pub log_z: f64,
    /// Distinct self-overlaps (packed, counts/N) with their Gibbs probabilities.
    pub histogram: Vec<(Vec<f64>, f64)>,
    pub seed: u64,
}

impl GibbsSummary {
    pub fn mean(&self) -> Vec<f64> {
        let len = self.histogram.first().map_or(0, |h| h.0.len());
        let mut m = vec![0.0; len];
        for (r, w) in &self.histogram {
            for (mi, ri) in m.iter_mut().zip(r) {
                *mi += w * ri;
            }
        }
        m
    }
}

fn packed_norm(d: usize, v: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            s += if i == j { v[k] * v[k] } else { 2.0 * v[k] * v[k] };
            k += 1;
        }
    }
    s.sqrt()
}

struct Setup<T> {
    d: usize,
    n: usize,
    taus: Vec<Vec<f64>>,
    weights: Vec<f64>,
    x: SymMatrix<T>,
    correction: bool,
}

impl<T: Scalar> Setup<T> {
    fn new(model: &MixtureModel<T>, spins: &SpinMeasure<T>, spec: &GibbsSpec<T>) -> Result<Self> {
        let d = model.dim();
        for got in [spins.dim(), spec.x.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        if spec.n == 0 {
            return Err(Error::Unsupported("N must be positive".into()));
        }
        Ok(Self {
            d,
            n: spec.n,
            taus: spins.atoms().iter().map(|a| a.tau.iter().map(|t| t.f64()).collect()).collect(),
            weights: spins.atoms().iter().map(|a| a.weight.f64()).collect(),
            x: spec.x.clone(),
            correction: spec.correction,
        })
    }

    fn rows(&self, cfg: &[usize]) -> Vec<Vec<f64>> {
        (0..self.d).map(|k| cfg.iter().map(|&a| self.taus[a][k]).collect()).collect()
    }

    /// Packed σσᵀ from per-atom counts.
    fn gram(&self, counts: &[usize]) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.d * (self.d + 1) / 2);
        for i in 0..self.d {
            for j in i..self.d {
                g.push(counts.iter().zip(&self.taus).map(|(&c, t)| c as f64 * t[i] * t[j]).sum());
            }
        }
        g
    }

    /// Prior mass Π_i P₁(σ_i), in linear space.
    fn prior(&self, counts: &[usize]) -> f64 {
        counts.iter().zip(&self.weights).map(|(&c, w)| w.powi(c as i32)).product()
    }

    /// Correction and field, which depend on σ only through σσᵀ.
    fn static_part(&self, model: &MixtureModel<T>, gram: &[f64]) -> f64 {
        let s = SymMatrix::from_packed(self.d, gram.iter().map(|&v| T::of(v)).collect()).expect("packed size");
        let field = s.dot(&self.x).f64();
        let corr = if self.correction {
            let r = s.scale(T::of(1.0 / self.n as f64));
            0.5 * self.n as f64 * model.xi(&r).map(|v| v.f64()).unwrap_or(f64::NAN)
        } else {
            0.0
        };
        field - corr
    }
}

fn key(v: &[f64]) -> Vec<i64> {
    v.iter().map(|x| (x * 1e9).round() as i64).collect()
}

/// Exact Gibbs summary by enumerating all |atoms|^N configurations.
pub fn enumerate_gibbs<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &GibbsSpec<T>,
    disorder: &DisorderSample,
) -> Result<GibbsSummary> {
    let s = Setup::new(model, spins, spec)?;
    let a = s.taus.len();
    let total = (a as f64).powi(s.n as i32);
    if total > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { configs: total, limit: ENUMERATION_LIMIT });
    }
    let mut cfg = vec![0usize; s.n];
    let mut counts = vec![0usize; a];
    counts[0] = s.n;
    let mut statics: BTreeMap<Vec<usize>, (Vec<f64>, f64, f64)> = BTreeMap::new();
    let mut energies: Vec<(f64, Vec<usize>)> = Vec::with_capacity(total as usize);
    loop {
        let entry = statics.entry(counts.clone()).or_insert_with(|| {
            let g = s.gram(&counts);
            let st = s.static_part(model, &g);
            (g, st, s.prior(&counts))
        });
        let e = entry.1 + disorder.hamiltonian(model, &s.rows(&cfg));
        energies.push((e, counts.clone()));
        // colexicographic successor, updating counts per changed column
        let mut i = 0;
        loop {
            if i == s.n {
                return finish_enumeration(&s, energies, &statics, disorder.seed());
            }
            counts[cfg[i]] -= 1;
            cfg[i] += 1;
            if cfg[i] < a {
                counts[cfg[i]] += 1;
                break;
            }
            cfg[i] = 0;
            counts[0] += 1;
            i += 1;
        }
    }
}

fn finish_enumeration<T: Scalar>(
    s: &Setup<T>,
    energies: Vec<(f64, Vec<usize>)>,
    statics: &BTreeMap<Vec<usize>, (Vec<f64>, f64, f64)>,
    seed: u64,
) -> Result<GibbsSummary> {
    let mx = energies.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return Err(Error::Unsupported("non-finite Gibbs weights".into()));
    }
    let mut z = 0.0;
    let mut hist: BTreeMap<Vec<i64>, (Vec<f64>, f64)> = BTreeMap::new();
    for (e, counts) in &energies {
        let st = &statics[counts];
        let w = st.2 * (e - mx).exp();
        z += w;
        let r: Vec<f64> = st.0.iter().map(|g| g / s.n as f64).collect();
        hist.entry(key(&r)).or_insert_with(|| (r, 0.0)).1 += w;
    }
    let histogram = hist.into_values().map(|(r, w)| (r, w / z)).collect();
    Ok(GibbsSummary { log_z: mx + z.ln(), histogram, seed })
}

/// Metropolis estimate of the self-overlap law: single-column proposals drawn from P₁,
/// N proposals per sweep. No partition function.
pub fn metropolis_gibbs<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &GibbsSpec<T>,
    disorder: &DisorderSample,
    chain: u64,
) -> Result<GibbsSummary> {
    let s = Setup::new(model, spins, spec)?;
    let a = s.taus.len();
    let mut rng = stream(spec.seed, tags::METROPOLIS, derive_seed(disorder.seed(), chain, s.n as u64));
    let weights = s.weights.clone();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        a - 1
    };
    let mut cfg: Vec<usize> = (0..s.n).map(|_| draw(&mut rng)).collect();
    let mut counts = vec![0usize; a];
    for &c in &cfg {
        counts[c] += 1;
    }
    // the proposal is the prior, so the acceptance ratio drops the prior term
    let energy = |cfg: &[usize], counts: &[usize]| -> f64 {
        s.static_part(model, &s.gram(counts)) + disorder.hamiltonian(model, &s.rows(cfg))
    };
    let mut e = energy(&cfg, &counts);
    let mut hist: BTreeMap<Vec<i64>, (Vec<f64>, f64)> = BTreeMap::new();
    let mut kept = 0usize;
    for sweep in 0..spec.burn_in + spec.sweeps {
        for _ in 0..s.n {
            let i = rng.gen_range(0..s.n);
            let new = draw(&mut rng);
            if new == cfg[i] {
                continue;
            }
            let old = cfg[i];
            cfg[i] = new;
            counts[old] -= 1;
            counts[new] += 1;
            let e2 = energy(&cfg, &counts);
            if rng.gen::<f64>().ln() < e2 - e {
                e = e2;
            } else {
                cfg[i] = old;
                counts[new] -= 1;
                counts[old] += 1;
            }
        }
        if sweep >= spec.burn_in {
            let r: Vec<f64> = s.gram(&counts).iter().map(|g| g / s.n as f64).collect();
            hist.entry(key(&r)).or_insert_with(|| (r, 0.0)).1 += 1.0;
            kept += 1;
        }
    }
    let histogram = hist.into_values().map(|(r, c)| (r, c / kept.max(1) as f64)).collect();
    Ok(GibbsSummary { log_z: f64::NAN, histogram, seed: disorder.seed() })
}

fn disorder_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, tags::DISORDER, r as u64)
}

/// Per-disorder Gibbs summaries, in replica order.
pub fn gibbs_replicas<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &GibbsSpec<T>,
    n_disorder: usize,
) -> Result<Vec<GibbsSummary>> {
    if spec.mode == GibbsMode::Enumerate {
        let total = (spins.len() as f64).powi(spec.n as i32);
        if total > ENUMERATION_LIMIT {
            return Err(Error::EnumerationGuard { configs: total, limit: ENUMERATION_LIMIT });
        }
    }
    (0..n_disorder)
        .into_par_iter()
        .map(|r| {
            let dis = DisorderSample::draw(model, spec.n, disorder_seed(spec.seed, r))?;
            match spec.mode {
                GibbsMode::Enumerate => enumerate_gibbs(model, spins, spec, &dis),
                GibbsMode::Metropolis => metropolis_gibbs(model, spins, spec, &dis, 0),
            }
        })
        .collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// F_N(x) = (1/N) 𝔼 log Z, averaged over independent disorder draws.
pub fn free_energy_finite<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &GibbsSpec<T>,
    n_disorder: usize,
) -> Result<EvalResult<T>> {
    if spec.mode != GibbsMode::Enumerate {
        return Err(Error::Unsupported("free energy needs enumerate mode".into()));
    }
    let reps = gibbs_replicas(model, spins, spec, n_disorder)?;
    let vals: Vec<f64> = reps.iter().map(|r| r.log_z / spec.n as f64).collect();
    let (m, se) = mean_se(&vals);
    Ok(EvalResult { value: T::of(m), std_error: T::of(se), level_norms: Vec::new() })
}

#[derive(Clone, Debug)]
pub struct SelfOverlapStats<T> {
    pub mean: SymMatrix<T>,
    /// Entrywise standard error over disorder.
    pub mean_se: SymMatrix<T>,
    pub concentration: T,
    pub concentration_se: T,
    pub seeds: Vec<u64>,
}

fn stats_from<T: Scalar>(d: usize, reps: &[GibbsSummary]) -> Result<SelfOverlapStats<T>> {
    if reps.is_empty() {
        return Err(Error::Unsupported("need at least one disorder draw".into()));
    }
    let means: Vec<Vec<f64>> = reps.iter().map(|r| r.mean()).collect();
    let len = means[0].len();
    let mut mean = vec![0.0; len];
    let mut se = vec![0.0; len];
    for k in 0..len {
        let col: Vec<f64> = means.iter().map(|m| m[k]).collect();
        let (m, s) = mean_se(&col);
        mean[k] = m;
        se[k] = s;
    }
    let conc: Vec<f64> = reps
        .iter()
        .map(|r| {
            r.histogram
                .iter()
                .map(|(v, w)| {
                    let diff: Vec<f64> = v.iter().zip(&mean).map(|(a, b)| a - b).collect();
                    w * packed_norm(d, &diff)
                })
                .sum()
        })
        .collect();
    let (c, cse) = mean_se(&conc);
    let to = |v: &[f64]| SymMatrix::from_packed(d, v.iter().map(|&x| T::of(x)).collect());
    Ok(SelfOverlapStats {
        mean: to(&mean)?,
        mean_se: to(&se)?,
        concentration: T::of(c),
        concentration_se: T::of(cse),
        seeds: reps.iter().map(|r| r.seed).collect(),
    })
}

/// 𝔼⟨σσᵀ/N⟩ and 𝔼⟨|σσᵀ/N − 𝔼⟨σσᵀ/N⟩|⟩.
pub fn self_overlap_stats<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &GibbsSpec<T>,
    n_disorder: usize,
) -> Result<SelfOverlapStats<T>> {
    let reps = gibbs_replicas(model, spins, spec, n_disorder)?;
    stats_from(model.dim(), &reps)
}

#[derive(Clone, Debug)]
pub struct GradientCheck<T> {
    pub finite_difference: T,
    pub predicted: T,
    /// Combined standard error of the two estimates.
    pub std_error: T,
}

/// Central difference of F_N along y against y·𝔼⟨σσᵀ/N⟩, both on the same disorder draws.
pub fn gradient_check<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    spec: &GibbsSpec<T>,
    n_disorder: usize,
    y: &SymMatrix<T>,
    h: T,
) -> Result<GradientCheck<T>> {
    let shifted = |s: T| GibbsSpec { x: &spec.x + &y.scale(s), ..spec.clone() };
    let plus = gibbs_replicas(model, spins, &shifted(h), n_disorder)?;
    let minus = gibbs_replicas(model, spins, &shifted(-h), n_disorder)?;
    let base = gibbs_replicas(model, spins, spec, n_disorder)?;
    let n = spec.n as f64;
    let fd: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p.log_z - m.log_z) / (2.0 * h.f64() * n)).collect();
    let d = model.dim();
    let yv: Vec<f64> = y.packed().iter().map(|v| v.f64()).collect();
    let pred: Vec<f64> = base
        .iter()
        .map(|r| {
            let m = r.mean();
            let mut s = 0.0;
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    s += if i == j { 1.0 } else { 2.0 } * m[k] * yv[k];
                    k += 1;
                }
            }
            s
        })
        .collect();
    let (f, fse) = mean_se(&fd);
    let (p, pse) = mean_se(&pred);
    Ok(GradientCheck { finite_difference: T::of(f), predicted: T::of(p), std_error: T::of((fse * fse + pse * pse).sqrt()) })
}

#[derive(Clone, Debug)]
pub struct TrendRow<T> {
    pub n: usize,
    pub concentration: T,
    pub std_error: T,
    pub mean: SymMatrix<T>,
}

pub fn concentration_trend<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    x: &SymMatrix<T>,
    n_list: &[usize],
    n_disorder: usize,
    seed: u64,
) -> Result<Vec<TrendRow<T>>> {
    n_list
        .iter()
        .map(|&n| {
            let s = self_overlap_stats(model, spins, &GibbsSpec::enumerate(n, x.clone(), seed), n_disorder)?;
            Ok(TrendRow { n, concentration: s.concentration, std_error: s.concentration_se, mean: s.mean })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct CovarianceRow {
    pub pair: usize,
    pub empirical: f64,
    pub expected: f64,
    pub band: f64,
    pub pass: bool,
}

fn column_config(rng: &mut rand_chacha::ChaCha8Rng, a: usize, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..a)).collect()
}

/// Empirical 𝔼 H_N(σ)H_N(σ′) over fresh disorder against N ξ(σσ′ᵀ/N), for random pairs
/// (the first pair has σ = σ′). The band is 4/√n_disorder times √(Nξ(σσᵀ/N)·Nξ(σ′σ′ᵀ/N)).
pub fn covariance_selftest<T: Scalar>(
    model: &MixtureModel<T>,
    spins: &SpinMeasure<T>,
    n: usize,
    n_pairs: usize,
    n_disorder: usize,
    seed: u64,
) -> Result<Vec<CovarianceRow>> {
    let spec = GibbsSpec::enumerate(n, SymMatrix::zeros(model.dim()), seed);
    let s = Setup::new(model, spins, &spec)?;
    let a = s.taus.len();
    let mut rng = stream(seed, tags::COVARIANCE, n as u64);
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = (0..n_pairs)
        .map(|k| {
            let c1 = column_config(&mut rng, a, n);
            let c2 = if k == 0 { c1.clone() } else { column_config(&mut rng, a, n) };
            (c1, c2)
        })
        .collect();
    let xi_of = |r1: &[Vec<f64>], r2: &[Vec<f64>]| -> Result<f64> {
        let m = SymMatrix::from_fn(s.d, |i, j| {
            let v: f64 = r1[i].iter().zip(&r2[j]).map(|(a, b)| a * b).sum();
            T::of(v / n as f64)
        });
        // σσ′ᵀ need not be symmetric; ξ only sees entrywise powers, so use both triangles
        let mt = SymMatrix::from_fn(s.d, |i, j| {
            let v: f64 = r1[j].iter().zip(&r2[i]).map(|(a, b)| a * b).sum();
            T::of(v / n as f64)
        });
        Ok(0.5 * (model.xi(&m)?.f64() + model.xi(&mt)?.f64()) * n as f64)
    };
    let mut rows = Vec::with_capacity(n_pairs);
    for (k, (c1, c2)) in pairs.iter().enumerate() {
        let (r1, r2) = (s.rows(c1), s.rows(c2));
        let expected = xi_of(&r1, &r2)?;
        let v1 = xi_of(&r1, &r1)?;
        let v2 = xi_of(&r2, &r2)?;
        let prods: Vec<f64> = (0..n_disorder)
            .into_par_iter()
            .map(|r| {
                let dis = DisorderSample::draw(model, n, derive_seed(seed, tags::COVARIANCE, (k * n_disorder + r) as u64))
                    .expect("tensor size checked by caller");
                dis.hamiltonian(model, &r1) * dis.hamiltonian(model, &r2)
            })
            .collect();
        let empirical = prods.iter().sum::<f64>() / n_disorder as f64;
        let band = 4.0 / (n_disorder as f64).sqrt() * (v1 * v2).sqrt() + 1e-12;
        rows.push(CovarianceRow { pair: k, empirical, expected, band, pass: (empirical - expected).abs() <= band });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MixtureTerm;

    #[test]
    fn zero_mixture_free_energy() {
        let m = MixtureModel::<f64>::zero(2);
        for n in 1..=6 {
            let r = free_energy_finite(&m, &SpinMeasure::potts(2), &GibbsSpec::enumerate(n, SymMatrix::zeros(2), 1), 3)
                .unwrap();
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn ising_correction_shift() {
        let beta = 0.7;
        let m = MixtureModel::<f64>::symmetric(1, 2, beta);
        let on = GibbsSpec::enumerate(5, SymMatrix::zeros(1), 4);
        let off = GibbsSpec { correction: false, ..on.clone() };
        let a = free_energy_finite(&m, &SpinMeasure::ising(), &on, 10).unwrap();
        let b = free_energy_finite(&m, &SpinMeasure::ising(), &off, 10).unwrap();
        assert!((b.value - a.value - 0.5 * beta * beta).abs() < 1e-12);
    }

    #[test]
    fn two_spin_brute_force() {
        let beta = 0.9;
        let m = MixtureModel::<f64>::symmetric(1, 2, beta);
        let dis = DisorderSample::draw(&m, 2, 77).unwrap();
        let g = &dis.tensors[0].1;
        let x = 0.2;
        let mut z = 0.0;
        for s0 in [-1.0, 1.0] {
            for s1 in [-1.0f64, 1.0] {
                let s = [s0, s1];
                let mut h = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        h += g[i * 2 + j] * s[i] * s[j];
                    }
                }
                h *= beta / 2f64.sqrt();
                z += 0.25 * (h - 0.5 * 2.0 * beta * beta + x * 2.0).exp();
            }
        }
        let spec = GibbsSpec::enumerate(2, SymMatrix::from_diag(&[x]), 0);
        let r = enumerate_gibbs(&m, &SpinMeasure::ising(), &spec, &dis).unwrap();
        assert!((r.log_z - z.ln()).abs() < 1e-12);
    }

    #[test]
    fn ising_self_overlap_is_one() {
        let m = MixtureModel::<f64>::symmetric(1, 2, 1.0);
        let s = self_overlap_stats(&m, &SpinMeasure::ising(), &GibbsSpec::enumerate(6, SymMatrix::zeros(1), 2), 5).unwrap();
        assert_eq!(s.mean.get(0, 0), 1.0);
        assert_eq!(s.concentration, 0.0);
    }

    #[test]
    fn zero_mixture_concentration_oracle() {
        // i.i.d. uniform colors: |R − I/2| = √2 |f − ½| with f ~ Binomial(N, ½)/N
        let binom = |n: u64| -> f64 {
            let mut c = 1.0;
            let mut s = 0.0;
            for k in 0..=n {
                s += c * (k as f64 / n as f64 - 0.5).abs();
                c = c * (n - k) as f64 / (k + 1) as f64;
            }
            2f64.sqrt() * s / 2f64.powi(n as i32)
        };
        let m = MixtureModel::<f64>::zero(2);
        for n in [4usize, 8] {
            let s = self_overlap_stats(&m, &SpinMeasure::potts(2), &GibbsSpec::enumerate(n, SymMatrix::zeros(2), 0), 2)
                .unwrap();
            assert!((s.concentration - binom(n as u64)).abs() < 1e-12);
        }
    }

    #[test]
    fn metropolis_matches_enumeration() {
        let m = MixtureModel::<f64>::symmetric(2, 2, 0.8);
        let spins = SpinMeasure::potts(2);
        let x = SymMatrix::from_diag(&[0.3, 0.0]);
        let dis = DisorderSample::draw(&m, 8, 5).unwrap();
        let spec = GibbsSpec::enumerate(8, x, 5);
        let exact = enumerate_gibbs(&m, &spins, &spec, &dis).unwrap().mean();
        let mc = metropolis_gibbs(&m, &spins, &GibbsSpec { mode: GibbsMode::Metropolis, sweeps: 20_000, ..spec }, &dis, 0)
            .unwrap()
            .mean();
        assert!((exact[0] - mc[0]).abs() < 0.02, "{} vs {}", exact[0], mc[0]);
    }

    #[test]
    fn covariance_matches_xi() {
        let m = MixtureModel::<f64>::new(
            2,
            vec![MixtureTerm { p: 1, beta: vec![0.5, 0.3] }, MixtureTerm { p: 2, beta: vec![0.7, 0.9] }],
        )
        .unwrap();
        let spins = SpinMeasure::new(
            2,
            vec![
                crate::model::Atom { tau: vec![1.0, 0.0], weight: 0.5 },
                crate::model::Atom { tau: vec![0.6, 0.8], weight: 0.5 },
            ],
        )
        .unwrap();
        let rows = covariance_selftest(&m, &spins, 5, 4, 10_000, 3).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
    }

    #[test]
    fn guard_trips() {
        let m = MixtureModel::<f64>::symmetric(2, 2, 1.0);
        let r = free_energy_finite(&m, &SpinMeasure::potts(2), &GibbsSpec::enumerate(21, SymMatrix::zeros(2), 0), 1);
        assert!(matches!(r, Err(Error::EnumerationGuard { .. })));
    }
}
