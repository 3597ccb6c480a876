use proptest::prelude::*;

use vglass::finiten::{free_energy_finite, GibbsSpec};
use vglass::functional::{functional_gradient_x, parisi_functional, QuadratureSpec};
use vglass::model::{MixtureModel, MixtureTerm, SpinMeasure};
use vglass::optim::{nelder_mead, NmSpec};
use vglass::paths::{path_distance, project_to_endpoint, StepPath};
use vglass::symcone::{psd_order, sqrt_psd, PsdMatrix, SymMatrix};

type M = SymMatrix<f64>;

/// G Gᵀ from a D×D factor.
fn gram(d: usize, f: &[f64]) -> M {
    SymMatrix::from_fn(d, |i, j| (0..d).map(|k| f[i * d + k] * f[j * d + k]).sum())
}

fn sym(d: usize, f: &[f64]) -> M {
    SymMatrix::from_fn(d, |i, j| f[i * d + j])
}

fn psd() -> impl Strategy<Value = M> {
    (1usize..=3).prop_flat_map(|d| prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |f| gram(d, &f)))
}

fn psd_pair() -> impl Strategy<Value = (M, M)> {
    (1usize..=3).prop_flat_map(|d| {
        (prop::collection::vec(-1.0f64..1.0, d * d), prop::collection::vec(-1.0f64..1.0, d * d))
            .prop_map(move |(a, b)| (gram(d, &a), gram(d, &b)))
    })
}

/// Path with 1–3 levels built from PSD increments, plus a model, spins and two fields.
#[derive(Debug, Clone)]
struct Instance {
    model: MixtureModel<f64>,
    spins: SpinMeasure<f64>,
    path: StepPath<f64>,
    x: M,
    y: M,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=2, 1usize..=2).prop_flat_map(|(d, levels)| {
        (
            prop::collection::vec(0.2f64..1.0, d),
            prop::collection::vec(-0.6f64..0.6, levels * d * d),
            prop::collection::vec(0.05f64..1.0, levels),
            prop::collection::vec(-0.5f64..0.5, 2 * d * d),
        )
            .prop_map(move |(beta, inc, widths, fields)| {
                let model = MixtureModel::new(d, vec![MixtureTerm { p: 2, beta }]).unwrap();
                let spins = if d == 1 { SpinMeasure::ising() } else { SpinMeasure::potts(d) };
                let total: f64 = widths.iter().sum();
                let mut grid = vec![0.0];
                let mut acc = 0.0;
                for w in &widths[..levels - 1] {
                    acc += w / total;
                    grid.push(acc);
                }
                grid.push(1.0);
                let mut cum = M::zeros(d);
                let values = inc
                    .chunks(d * d)
                    .map(|c| {
                        cum = &cum + &gram(d, c);
                        cum.clone()
                    })
                    .collect();
                let path = StepPath::new(grid, values).unwrap();
                let (fx, fy) = fields.split_at(d * d);
                Instance { model, spins, path, x: sym(d, fx), y: sym(d, fy) }
            })
    })
}

fn gh() -> QuadratureSpec {
    QuadratureSpec::gauss_hermite(10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sqrt_squares_back(a in psd()) {
        let s = sqrt_psd(&PsdMatrix::new(a.clone()).unwrap());
        let rows = s.as_sym().to_rows();
        let d = a.dim();
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|k| rows[i][k] * rows[k][j]).sum();
                prop_assert!((v - a.get(i, j)).abs() <= 1e-9 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn powers_stormer((a, b) in psd_pair()) {
        let sa = sqrt_psd(&PsdMatrix::new(a.clone()).unwrap());
        let sab = sqrt_psd(&PsdMatrix::new(&a + &b).unwrap());
        prop_assert!((sab.as_sym() - sa.as_sym()).norm() <= b.trace().sqrt() + 1e-9);
    }

    #[test]
    fn order_is_compatible_with_addition((a, b) in psd_pair()) {
        let c = &a + &b;
        prop_assert!(psd_order(&c, &a).unwrap());
        prop_assert!(psd_order(&c, &b).unwrap());
        prop_assert!(psd_order(&a, &a).unwrap());
        prop_assert!(a.dot(&b) >= -1e-12);
    }

    #[test]
    fn norm_trace_sandwich(a in psd()) {
        let d = a.dim() as f64;
        prop_assert!(a.trace() / d.sqrt() <= a.norm() + 1e-12);
        prop_assert!(a.norm() <= a.trace() + 1e-12);
    }

    #[test]
    fn xi_identities(inst in instance()) {
        let m = &inst.model;
        let a = inst.path.endpoint();
        let xi = m.xi(a).unwrap();
        let g = m.grad_xi(a).unwrap();
        prop_assert!(xi >= -1e-12);
        prop_assert!((m.theta(a).unwrap() - (a.dot(&g) - xi)).abs() <= 1e-10 * (1.0 + xi.abs()));
        // degree-2 homogeneity
        prop_assert!((m.xi(&a.scale(2.0)).unwrap() - 4.0 * xi).abs() <= 1e-10 * (1.0 + xi));
    }

    #[test]
    fn projection_lands_in_class(inst in instance(), t in 0.0f64..1.0) {
        let end = inst.path.endpoint().clone();
        let z = PsdMatrix::new(end.scale(t)).unwrap();
        let p = project_to_endpoint(&inst.path, &z).unwrap();
        prop_assert!((p.path.endpoint() - z.as_sym()).norm() <= 1e-10);
        prop_assert!(StepPath::new(p.path.grid().to_vec(), p.path.values().to_vec()).is_ok());
        prop_assert!(p.ratio().is_finite());
    }

    #[test]
    fn path_distance_is_a_metric(a in instance(), b in instance()) {
        prop_assume!(a.path.dim() == b.path.dim());
        let dab = path_distance(&a.path, &b.path).unwrap();
        let dba = path_distance(&b.path, &a.path).unwrap();
        prop_assert!((dab - dba).abs() <= 1e-12);
        prop_assert!(path_distance(&a.path, &a.path).unwrap() <= 1e-12);
        let zero = StepPath::zero(a.path.dim());
        let tri = path_distance(&a.path, &zero).unwrap() + path_distance(&zero, &b.path).unwrap();
        prop_assert!(dab <= tri + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn functional_is_convex_and_lipschitz_in_x(inst in instance()) {
        let f = |x: &M| parisi_functional(&inst.model, &inst.spins, &inst.path, x, &gh()).unwrap().value;
        let (fx, fy) = (f(&inst.x), f(&inst.y));
        let mid = f(&(&inst.x + &inst.y).scale(0.5));
        prop_assert!(mid <= 0.5 * (fx + fy) + 1e-10);
        prop_assert!((fx - fy).abs() <= (&inst.x - &inst.y).norm() + 1e-10);
    }

    #[test]
    fn gradient_in_x_lies_in_the_hull(inst in instance()) {
        let g = functional_gradient_x(&inst.model, &inst.spins, &inst.path, &inst.x, &gh()).unwrap();
        prop_assert!(psd_order(&g.grad, &M::zeros(g.grad.dim())).unwrap());
        prop_assert!(inst.spins.overlap_hull().distance(&g.grad) <= 1e-8);
    }

    #[test]
    fn potts_trace_shift(inst in instance(), c in -1.0f64..1.0) {
        // ττᵀ has unit trace, so x ↦ x + cI shifts 𝒫 by c
        prop_assume!(inst.path.dim() == 2);
        let shifted = &inst.x + &M::identity(2).scale(c);
        let a = parisi_functional(&inst.model, &inst.spins, &inst.path, &inst.x, &gh()).unwrap().value;
        let b = parisi_functional(&inst.model, &inst.spins, &inst.path, &shifted, &gh()).unwrap().value;
        prop_assert!((b - a - c).abs() <= 1e-10);
    }

    #[test]
    fn monte_carlo_is_reproducible(inst in instance(), seed in any::<u64>()) {
        let q = QuadratureSpec::monte_carlo(2000, seed);
        let a = parisi_functional(&inst.model, &inst.spins, &inst.path, &inst.x, &q).unwrap();
        let b = parisi_functional(&inst.model, &inst.spins, &inst.path, &inst.x, &q).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn single_precision_tracks_double(inst in instance()) {
        let v64 = parisi_functional(&inst.model, &inst.spins, &inst.path, &inst.x, &gh()).unwrap().value;
        let model32 = MixtureModel::<f32>::new(
            inst.model.dim(),
            inst.model.terms().iter().map(|t| MixtureTerm { p: t.p, beta: t.beta.iter().map(|&b| b as f32).collect() }).collect(),
        ).unwrap();
        let spins32 = if inst.model.dim() == 1 { SpinMeasure::<f32>::ising() } else { SpinMeasure::<f32>::potts(2) };
        let path32 = StepPath::new(
            inst.path.grid().iter().map(|&g| g as f32).collect(),
            inst.path.values().iter().map(|v| v.cast::<f32>()).collect(),
        ).unwrap();
        let v32 = parisi_functional(&model32, &spins32, &path32, &inst.x.cast::<f32>(), &gh()).unwrap().value;
        prop_assert!((v32 as f64 - v64).abs() <= 1e-4 * (1.0 + v64.abs()));
    }

    #[test]
    fn finite_volume_trace_shift(beta in 0.1f64..1.0, c in -1.0f64..1.0, seed in any::<u64>()) {
        let model = MixtureModel::symmetric(2, 2, beta);
        let spins = SpinMeasure::potts(2);
        let a = free_energy_finite(&model, &spins, &GibbsSpec::enumerate(5, M::zeros(2), seed), 3).unwrap();
        let b = free_energy_finite(&model, &spins, &GibbsSpec::enumerate(5, M::identity(2).scale(c), seed), 3).unwrap();
        prop_assert!((b.value - a.value - c).abs() <= 1e-10);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum(center in prop::collection::vec(-2.0f64..2.0, 1..5), scale in 0.5f64..5.0) {
        let f = |x: &[f64]| x.iter().zip(&center).enumerate().map(|(i, (a, b))| scale * (i as f64 + 1.0) * (a - b).powi(2)).sum::<f64>();
        let r = nelder_mead(f, &vec![0.0; center.len()], &NmSpec::default());
        prop_assert!(r.f <= 1e-8);
    }
}
