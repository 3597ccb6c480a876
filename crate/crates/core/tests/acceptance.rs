//! Acceptance criteria. Each test writes one PASS/FAIL line directly to stdout, past the harness capture.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vglass::finiten::{
    concentration_trend, free_energy_finite, gibbs_replicas, gradient_check, self_overlap_stats, GibbsSpec,
};
use vglass::functional::{
    cascade_oracle, lipschitz_path_bound, parisi_functional, OracleSpec, QuadratureSpec,
};
use vglass::model::{Atom, MixtureModel, MixtureTerm, SpinMeasure};
use vglass::paths::{path_distance, project_to_endpoint, StepPath};
use vglass::symcone::{min_positive_eig, psd_order, sqrt_psd, PsdMatrix, SymMatrix};
use vglass::varforms::{
    check_equivalence, grad_parisi, parisi_value, parisi_value_constrained, translate_panchenko, GridMode,
    OptimizerSpec,
};

type M = SymMatrix<f64>;

fn report(n: usize, name: &str, pass: bool, started: Instant, detail: String) {
    let line = format!(
        "acceptance {n:>2} [{}] {name}: {detail} ({:.1}s)\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stdout().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn random_psd(r: &mut ChaCha8Rng, d: usize, rank: usize, scale: f64) -> M {
    let g: Vec<Vec<f64>> = (0..d).map(|_| (0..rank).map(|_| scale * normal(r)).collect()).collect();
    SymMatrix::from_fn(d, |i, j| g[i].iter().zip(&g[j]).map(|(a, b)| a * b).sum())
}

fn random_psd_any(r: &mut ChaCha8Rng, d: usize, scale: f64) -> M {
    let rank = r.gen_range(1..=d);
    random_psd(r, d, rank, scale)
}

fn random_sym(r: &mut ChaCha8Rng, d: usize, scale: f64) -> M {
    SymMatrix::from_fn(d, |_, _| scale * normal(r))
}

fn random_grid(r: &mut ChaCha8Rng, levels: usize) -> Vec<f64> {
    let mut inner: Vec<f64> = (0..levels - 1).map(|_| r.gen::<f64>()).collect();
    inner.sort_by(f64::total_cmp);
    let mut g = vec![0.0];
    g.extend(inner);
    g.push(1.0);
    g
}

fn random_path(r: &mut ChaCha8Rng, d: usize, levels: usize, scale: f64) -> StepPath<f64> {
    let grid = random_grid(r, levels);
    let mut acc = M::zeros(d);
    let mut values = Vec::new();
    for _ in 0..levels {
        let rank = r.gen_range(1..=d);
        acc = &acc + &random_psd(r, d, rank, scale);
        values.push(acc.clone());
    }
    StepPath::new(grid, values).unwrap()
}

fn random_spins(r: &mut ChaCha8Rng, d: usize) -> SpinMeasure<f64> {
    if d == 1 {
        return SpinMeasure::ising();
    }
    if r.gen::<bool>() {
        return SpinMeasure::potts(d);
    }
    let k = r.gen_range(2..=4);
    let w: Vec<f64> = (0..k).map(|_| 0.2 + r.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    let atoms = w
        .iter()
        .map(|wi| {
            let tau: Vec<f64> = (0..d).map(|_| normal(r)).collect();
            let n = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
            let len = 0.5 + 0.5 * r.gen::<f64>();
            Atom { tau: tau.iter().map(|t| t / n * len).collect(), weight: wi / s }
        })
        .collect();
    SpinMeasure::new(d, atoms).unwrap()
}

/// Mixture with p ∈ {1, 2}; both terms keep ∇ξ monotone on the PSD cone.
fn random_model(r: &mut ChaCha8Rng, d: usize) -> MixtureModel<f64> {
    let b1: Vec<f64> = (0..d).map(|_| 0.4 * r.gen::<f64>()).collect();
    let b2: Vec<f64> = (0..d).map(|_| 0.4 + 0.8 * r.gen::<f64>()).collect();
    MixtureModel::new(d, vec![MixtureTerm { p: 1, beta: b1 }, MixtureTerm { p: 2, beta: b2 }]).unwrap()
}

/// 𝔼 log cosh(s g) by composite Simpson on [−12, 12].
fn e_log_cosh(s: f64) -> f64 {
    let n = 48_000;
    let h = 24.0 / n as f64;
    let f = |g: f64| (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt() * (s * g).cosh().ln();
    let mut acc = f(-12.0) + f(12.0);
    for i in 1..n {
        let g = -12.0 + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(g);
    }
    acc * h / 3.0
}

#[test]
fn c01_zero_model_identities() {
    let t = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = r.gen_range(1..=3);
        let levels = r.gen_range(1..=3);
        let path = random_path(&mut r, d, levels, 0.5);
        let spins = random_spins(&mut r, d);
        let v = parisi_functional(&MixtureModel::zero(d), &spins, &path, &M::zeros(d), &QuadratureSpec::default())
            .unwrap()
            .value;
        worst = worst.max(v.abs());
    }
    let mut exact = true;
    for (d, spins) in [(1, SpinMeasure::ising()), (2, SpinMeasure::potts(2)), (4, SpinMeasure::potts(4))] {
        for n in 1..=8 {
            let f = free_energy_finite(&MixtureModel::zero(d), &spins, &GibbsSpec::enumerate(n, M::zeros(d), 7), 2)
                .unwrap();
            exact &= f.value == 0.0 && f.std_error == 0.0;
        }
    }
    report(
        1,
        "zero-model identities",
        worst <= 1e-12 && exact,
        t,
        format!("max |P(pi,0)| = {worst:.1e} over 20 paths; finite-N free energy exactly 0 for N<=8: {exact}"),
    );
}

#[test]
fn c02_ising_closed_form() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for beta in [0.3, 1.0] {
        let model = MixtureModel::symmetric(1, 2, beta);
        for k in 1..=9 {
            let q = k as f64 / 10.0;
            for x in [0.0, 0.2] {
                let xp = 2.0 * beta * beta * q;
                let theta = beta * beta * q * q;
                let oracle = e_log_cosh(xp.sqrt()) - 0.5 * xp + x + 0.5 * theta;
                let path = StepPath::constant(PsdMatrix::new(M::from_diag(&[q])).unwrap());
                let v = parisi_functional(
                    &model,
                    &SpinMeasure::ising(),
                    &path,
                    &M::from_diag(&[x]),
                    &QuadratureSpec::gauss_hermite(40),
                )
                .unwrap()
                .value;
                worst = worst.max((v - oracle).abs());
            }
        }
    }
    report(2, "ising closed form", worst <= 1e-6, t, format!("max deviation {worst:.2e} (tol 1e-6)"));
}

#[test]
fn c03_recursion_vs_cascade() {
    let t = Instant::now();
    let mut r = rng(303);
    let mut worst_z = 0.0f64;
    let mut worst_tail = 0.0f64;
    let mut fails = 0;
    for k in 0..10 {
        let d = if k < 5 { 1 } else { 2 };
        let model = random_model(&mut r, d);
        let spins = random_spins(&mut r, d);
        let b1 = 0.2 + 0.35 * r.gen::<f64>();
        let g1 = random_psd(&mut r, d, d, 0.4);
        let g2 = &g1 + &random_psd(&mut r, d, d, 0.4);
        let path = StepPath::new(vec![0.0, b1, 1.0], vec![g1, g2]).unwrap();
        let x = random_sym(&mut r, d, 0.2);
        let rec = parisi_functional(&model, &spins, &path, &x, &QuadratureSpec::monte_carlo(100_000, 1000 + k)).unwrap();
        let orc = cascade_oracle(&model, &spins, &path, &x, &OracleSpec { atoms: 2000, replicas: 10_000, seed: 2000 + k })
            .unwrap();
        let sigma = (rec.std_error.powi(2) + orc.std_error.powi(2)).sqrt();
        let z = (rec.value - orc.value).abs() / sigma;
        worst_z = worst_z.max(z);
        worst_tail = worst_tail.max(orc.tail_mass);
        if z > 3.0 {
            fails += 1;
        }
    }
    report(
        3,
        "recursion vs cascade oracle",
        fails == 0,
        t,
        format!("10 instances, max |diff|/sigma = {worst_z:.2}, max tail mass {worst_tail:.1e}, {fails} beyond 3 sigma"),
    );
}

#[test]
fn c04_lipschitz_in_path() {
    let t = Instant::now();
    let mut r = rng(404);
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for _ in 0..100 {
        let d = r.gen_range(1..=2);
        let max_levels = if d == 1 { 3 } else { 2 };
        let model = random_model(&mut r, d);
        let spins = random_spins(&mut r, d);
        let x = random_sym(&mut r, d, 0.3);
        let la = r.gen_range(1..=max_levels);
        let lb = r.gen_range(1..=max_levels);
        let a = random_path(&mut r, d, la, 0.4);
        let b = random_path(&mut r, d, lb, 0.4);
        let q = QuadratureSpec::gauss_hermite(if d == 1 { 16 } else { 10 });
        let fa = parisi_functional(&model, &spins, &a, &x, &q).unwrap();
        let fb = parisi_functional(&model, &spins, &b, &x, &q).unwrap();
        let bound = lipschitz_path_bound(&model, &a, &b).unwrap();
        let sigma = (fa.std_error.powi(2) + fb.std_error.powi(2)).sqrt();
        let diff = (fa.value - fb.value).abs();
        worst_ratio = worst_ratio.max(diff / bound);
        if diff > bound + 3.0 * sigma {
            violations += 1;
        }
    }
    report(
        4,
        "lipschitz in path",
        violations == 0,
        t,
        format!("100 pairs, {violations} violations, max |diff|/bound = {worst_ratio:.3}"),
    );
}

#[test]
fn c05_cone_suite() {
    let t = Instant::now();
    let mut r = rng(505);
    let mut bad = [0usize; 4];
    for _ in 0..1000 {
        let d = r.gen_range(1..=4);
        let a = random_psd_any(&mut r, d, 1.0);
        let b = random_psd_any(&mut r, d, 1.0);
        let sa = sqrt_psd(&PsdMatrix::new(a.clone()).unwrap());
        let sab = sqrt_psd(&PsdMatrix::new(&a + &b).unwrap());
        if (sab.as_sym() - sa.as_sym()).norm() > b.trace().max(0.0).sqrt() + 1e-9 {
            bad[0] += 1;
        }
        let n = a.norm();
        let tr = a.trace();
        if tr / (d as f64).sqrt() > n + 1e-12 || n > tr + 1e-12 {
            bad[1] += 1;
        }
        let pd = &a + &M::identity(d).scale(0.05 + r.gen::<f64>());
        let rows = pd.to_rows();
        let inv = invert(&rows);
        let m = min_positive_eig(&PsdMatrix::new(pd.clone()).unwrap()).unwrap();
        if frob(&inv) > (d as f64).sqrt() / m * (1.0 + 1e-10) {
            bad[2] += 1;
        }
        // partial order: reflexive, antisymmetric, transitive along a chain
        let c = &a + &b;
        let e = &c + &random_psd(&mut r, d, 1, 0.5);
        let ok = psd_order(&a, &a).unwrap()
            && psd_order(&c, &a).unwrap()
            && psd_order(&e, &c).unwrap()
            && psd_order(&e, &a).unwrap()
            && !(psd_order(&a, &c).unwrap() && (&c - &a).norm() > 1e-8);
        if !ok {
            bad[3] += 1;
        }
    }
    report(
        5,
        "cone suite",
        bad.iter().all(|&b| b == 0),
        t,
        format!(
            "1000 samples; violations: powers-stormer {}, norm/trace {}, inverse {}, order {}",
            bad[0], bad[1], bad[2], bad[3]
        ),
    );
}

fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for i in 0..n {
            if i != c {
                let f = m[i][c];
                let row = m[c].clone();
                for (v, rv) in m[i].iter_mut().zip(row) {
                    *v -= f * rv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn frob(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn c06_projection() {
    let t = Instant::now();
    let mut r = rng(606);
    let mut bad = 0;
    let mut max_ratio = 0.0f64;
    for k in 0..500 {
        let d = r.gen_range(1..=3);
        let z = if k % 10 == 0 { M::zeros(d) } else { random_psd_any(&mut r, d, 0.6) };
        let w = random_psd_any(&mut r, d, 0.3);
        let end = &z + &w;
        // random path ending at z + w: normalized cumulative increments conjugated by √(z+w)
        let levels = r.gen_range(1..=4);
        let grid = random_grid(&mut r, levels);
        let se = sqrt_psd(&PsdMatrix::new(end.clone()).unwrap());
        let fracs: Vec<f64> = {
            let mut f: Vec<f64> = (0..levels - 1).map(|_| r.gen::<f64>()).collect();
            f.sort_by(f64::total_cmp);
            f.push(1.0);
            f
        };
        let values: Vec<M> = fracs
            .iter()
            .enumerate()
            .map(|(i, &f)| if i + 1 == levels { end.clone() } else { congruence(se.as_sym(), &M::identity(d).scale(f)) })
            .collect();
        let path = StepPath::new(grid, values).unwrap();
        let zp = PsdMatrix::new(z.clone()).unwrap();
        let proj = project_to_endpoint(&path, &zp).unwrap();
        let p = &proj.path;
        let monotone = StepPath::new(p.grid().to_vec(), p.values().to_vec()).is_ok();
        let end_ok = (p.endpoint() - &z).norm() <= 1e-10;
        let dist = path_distance(&path, p).unwrap();
        if !(monotone && end_ok && (dist - proj.distance).abs() < 1e-12) {
            bad += 1;
        }
        if proj.k_bound > 0.0 {
            let ratio = proj.ratio();
            if !ratio.is_finite() {
                bad += 1;
            } else {
                max_ratio = max_ratio.max(ratio);
            }
        } else if dist > 1e-12 {
            bad += 1;
        }
    }
    report(
        6,
        "projection to endpoint",
        bad == 0,
        t,
        format!("500 instances, {bad} failures, max distance/K ratio {max_ratio:.3}"),
    );
}

fn congruence(h: &M, a: &M) -> M {
    let d = h.dim();
    SymMatrix::from_fn(d, |i, j| {
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                s += h.get(i, k) * a.get(k, l) * h.get(l, j);
            }
        }
        s
    })
}

#[test]
fn c07_translation_identity() {
    let t = Instant::now();
    let mut r = rng(707);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = r.gen_range(1..=2);
        let model = random_model(&mut r, d);
        let spins = random_spins(&mut r, d);
        let levels = r.gen_range(1..=2);
        let path = random_path(&mut r, d, levels, 0.4);
        let z = PsdMatrix::new(path.endpoint().clone()).unwrap();
        let lambda = random_sym(&mut r, d, 0.4);
        let (lhs, rhs) =
            translate_panchenko(&model, &spins, &lambda, &z, &path, &QuadratureSpec::gauss_hermite(10)).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    report(7, "translation identity", worst <= 1e-8, t, format!("50 instances, max |lhs - rhs| = {worst:.2e}"));
}

fn potts_model(beta: f64) -> MixtureModel<f64> {
    MixtureModel::symmetric(2, 2, beta)
}

#[test]
fn c08_potts_structure() {
    let t = Instant::now();
    let n = 6usize;
    // every configuration, integer arithmetic
    let mut structural = true;
    for code in 0..(1u32 << n) {
        let cols: Vec<[i64; 2]> = (0..n).map(|i| if code >> i & 1 == 1 { [0, 1] } else { [1, 0] }).collect();
        let mut g = [[0i64; 2]; 2];
        for c in &cols {
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] += c[a] * c[b];
                }
            }
        }
        structural &= g[0][1] == 0 && g[1][0] == 0 && g[0][0] + g[1][1] == n as i64;
    }
    let model = potts_model(0.5);
    let spins = SpinMeasure::potts(2);
    let spec = GibbsSpec::enumerate(n, M::zeros(2), 808);
    let reps = gibbs_replicas(&model, &spins, &spec, 200).unwrap();
    for rep in &reps {
        for (v, _) in &rep.histogram {
            structural &= v[1] == 0.0 && ((v[0] + v[2]) * n as f64 - n as f64).abs() < 1e-12;
        }
    }
    let stats = self_overlap_stats(&model, &spins, &spec, 200).unwrap();
    let within = |k: usize| (stats.mean.get(k, k) - 0.5).abs() <= 3.0 * stats.mean_se.get(k, k) + 1e-12;
    report(
        8,
        "potts structural invariants",
        structural && within(0) && within(1),
        t,
        format!(
            "N=6 structure exact: {structural}; mean diag ({:.4}, {:.4}) with se ({:.1e}, {:.1e})",
            stats.mean.get(0, 0),
            stats.mean.get(1, 1),
            stats.mean_se.get(0, 0),
            stats.mean_se.get(1, 1)
        ),
    );
}

fn quick_spec(levels: usize, gh: usize, restarts: usize) -> OptimizerSpec {
    OptimizerSpec {
        levels,
        grid_mode: GridMode::Free,
        restarts,
        outer_restarts: 1,
        max_evals: 3000,
        outer_evals: 80,
        tol_value: 1e-3,
        seed: 11,
        quadrature: QuadratureSpec::gauss_hermite(gh),
        ..OptimizerSpec::default()
    }
}

#[test]
fn c09_finite_n_trends() {
    let t = Instant::now();
    let model = potts_model(0.5);
    let spins = SpinMeasure::potts(2);
    let rows = concentration_trend(&model, &spins, &M::zeros(2), &[4, 10], 200, 909).unwrap();
    let (c4, c10) = (&rows[0], &rows[1]);
    let sd = (c4.std_error.powi(2) + c10.std_error.powi(2)).sqrt();
    let decreasing = c4.concentration - c10.concentration > 3.0 * sd;
    let g = grad_parisi(&model, &spins, &M::zeros(2), &quick_spec(2, 8, 3), None).unwrap();
    let stats = self_overlap_stats(&model, &spins, &GibbsSpec::enumerate(10, M::zeros(2), 909), 200).unwrap();
    let gap = (&stats.mean - &g.grad).norm();
    let sigma = stats.mean_se.norm();
    report(
        9,
        "finite-N trends",
        decreasing && gap <= 0.05 + 3.0 * sigma,
        t,
        format!(
            "concentration N=4 {:.4} vs N=10 {:.4} (3 sigma = {:.4}); |mean - grad P(0)| = {gap:.4} (allow {:.4})",
            c4.concentration,
            c10.concentration,
            3.0 * sd,
            0.05 + 3.0 * sigma
        ),
    );
}

#[test]
fn c10_endpoint_constrained_infimum() {
    let t = Instant::now();
    let mut r = rng(1010);
    let mut lines = Vec::new();
    let mut pass = true;
    let cases: Vec<(MixtureModel<f64>, SpinMeasure<f64>, OptimizerSpec)> = vec![
        (MixtureModel::symmetric(1, 2, 1.0), SpinMeasure::ising(), quick_spec(3, 16, 4)),
        (potts_model(0.5), SpinMeasure::potts(2), quick_spec(3, 6, 4)),
    ];
    for (model, spins, spec) in &cases {
        let d = model.dim();
        let mut xr = random_sym(&mut r, d, 1.0);
        xr = xr.scale(0.3 / xr.norm());
        for x in [M::zeros(d), xr] {
            let g = grad_parisi(model, spins, &x, spec, None).unwrap();
            let z = PsdMatrix::new(g.grad.clone()).unwrap();
            let c = parisi_value_constrained(model, spins, &x, &z, spec).unwrap();
            let gap = (g.optimum.value - c.value).abs();
            pass &= gap <= 2.0 * spec.tol_value;
            lines.push(format!("D={d} |x|={:.2}: {:.5} vs {:.5}", x.norm(), g.optimum.value, c.value));
        }
    }
    report(10, "endpoint-constrained infimum", pass, t, lines.join("; "));
}

#[test]
fn c11_formula_equivalence() {
    let t = Instant::now();
    let mut pass = true;
    let mut lines = Vec::new();
    let cases = vec![
        ("ising", MixtureModel::symmetric(1, 2, 0.3), SpinMeasure::ising()),
        ("potts", potts_model(0.3), SpinMeasure::potts(2)),
    ];
    for (name, model, spins) in &cases {
        let spec = quick_spec(2, 8, 2);
        let rep = check_equivalence(model, spins, &spec, 0).unwrap();
        let formula_rows: Vec<_> = rep.rows.iter().filter(|r| !r.label.starts_with("legendre")).collect();
        pass &= formula_rows.iter().all(|r| r.pass);
        lines.push(format!(
            "{name}: pan {:.5} hj {:.5} xistar {:.5} hopf {:.5}",
            rep.pan.value, rep.hj.value, rep.xistar.value, rep.hopf.value
        ));
    }
    report(11, "formula equivalence", pass, t, lines.join("; "));
}

#[test]
fn c12_regularity_of_parisi_value() {
    let t = Instant::now();
    let mut r = rng(1212);
    let model = MixtureModel::new(2, vec![MixtureTerm { p: 1, beta: vec![0.3, 0.2] }, MixtureTerm { p: 2, beta: vec![0.8, 0.6] }])
        .unwrap();
    let spins = SpinMeasure::potts(2);
    let spec = quick_spec(2, 8, 3);
    let tol = 2.0 * spec.tol_value;
    let value = |x: &M| parisi_value(&model, &spins, x, &spec).unwrap().value;
    let (mut lip, mut conv) = (0, 0);
    for _ in 0..20 {
        let x = random_sym(&mut r, 2, 0.5);
        let y = random_sym(&mut r, 2, 0.5);
        let (fx, fy) = (value(&x), value(&y));
        if (fx - fy).abs() > (&x - &y).norm() + tol {
            lip += 1;
        }
        let mid = (&x + &y).scale(0.5);
        if value(&mid) > 0.5 * (fx + fy) + tol {
            conv += 1;
        }
    }
    let hull = spins.overlap_hull();
    let mut grad_bad = 0;
    for _ in 0..5 {
        let x = random_sym(&mut r, 2, 0.5);
        let g = grad_parisi(&model, &spins, &x, &spec, None).unwrap().grad;
        let psd = psd_order(&g, &M::zeros(2)).unwrap();
        if !psd || hull.distance(&g) > 1e-8 {
            grad_bad += 1;
        }
    }
    report(
        12,
        "regularity of P",
        lip == 0 && conv == 0 && grad_bad == 0,
        t,
        format!("20 pairs/triples: lipschitz violations {lip}, convexity violations {conv}; gradient outside PSD/hull {grad_bad} of 5"),
    );
}

#[test]
fn c13_finite_n_gradient() {
    let t = Instant::now();
    let mut r = rng(1313);
    let model = MixtureModel::new(2, vec![MixtureTerm { p: 1, beta: vec![0.3, 0.5] }, MixtureTerm { p: 2, beta: vec![0.7, 0.9] }])
        .unwrap();
    let spins = random_spins(&mut r, 2);
    let spec = GibbsSpec::enumerate(6, random_sym(&mut r, 2, 0.2), 1313);
    let (mut worst, mut worst_gap, mut pass) = (0.0f64, 0.0f64, true);
    for _ in 0..5 {
        let mut y = random_sym(&mut r, 2, 1.0);
        y = y.scale(1.0 / y.norm());
        let c = gradient_check(&model, &spins, &spec, 200, &y, 1e-4).unwrap();
        let gap = (c.finite_difference - c.predicted).abs();
        pass &= gap <= 3.0 * c.std_error;
        worst = worst.max(gap / c.std_error);
        worst_gap = worst_gap.max(gap);
    }
    report(
        13,
        "finite-N gradient",
        pass,
        t,
        format!("5 directions at N=6, max |fd - y.mean| = {worst_gap:.2e} ({worst:.2e} sigma)"),
    );
}
