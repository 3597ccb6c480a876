//! Monotone PSD step paths on (0, 1].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::symcone::{k_bound, pinv_sqrt, psd_order, sqrt_psd, PsdMatrix, Square, SymMatrix};

/// A left-continuous increasing step path.
///
/// `grid` holds breakpoints 0 = b₀ < b₁ < … < b_n = 1 and `values[l]` is the
/// value on (b_l, b_{l+1}]. Construction always yields the canonical form:
/// no empty interval, no two consecutive equal values.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPath<T> {
    grid: Vec<T>,
    values: Vec<SymMatrix<T>>,
}

impl<T: Scalar> StepPath<T> {
    /// Validates ordering and PSD monotonicity, then canonicalizes.
    pub fn new(grid: Vec<T>, values: Vec<SymMatrix<T>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidPath("path needs at least one level".into()));
        }
        if grid.len() != values.len() + 1 {
            return Err(Error::LengthMismatch { expected: values.len() + 1, got: grid.len() });
        }
        if grid[0] != T::zero() || *grid.last().unwrap() != T::one() {
            return Err(Error::InvalidPath("grid must start at 0 and end at 1".into()));
        }
        if grid.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidPath("grid must be nondecreasing".into()));
        }
        let d = values[0].dim();
        let mut prev = SymMatrix::zeros(d);
        for (l, v) in values.iter().enumerate() {
            v.check_dim(&prev)?;
            if !v.is_finite() {
                return Err(Error::InvalidPath(format!("non-finite value at level {l}")));
            }
            if !psd_order(v, &prev)? {
                return Err(Error::OrderViolation(format!("level {l} is not above level {}", l as i64 - 1)));
            }
            prev = v.clone();
        }
        Ok(Self::canonical(grid, values))
    }

    /// Canonicalizes without order checks; callers guarantee monotonicity.
    pub(crate) fn canonical(grid: Vec<T>, values: Vec<SymMatrix<T>>) -> Self {
        let mut g = vec![T::zero()];
        let mut v: Vec<SymMatrix<T>> = Vec::new();
        for (l, val) in values.into_iter().enumerate() {
            let right = grid[l + 1];
            if right <= *g.last().unwrap() {
                continue;
            }
            if v.last() == Some(&val) {
                *g.last_mut().unwrap() = right;
            } else {
                v.push(val);
                g.push(right);
            }
        }
        Self { grid: g, values: v }
    }

    pub fn zero(dim: usize) -> Self {
        Self { grid: vec![T::zero(), T::one()], values: vec![SymMatrix::zeros(dim)] }
    }

    pub fn constant(value: PsdMatrix<T>) -> Self {
        Self { grid: vec![T::zero(), T::one()], values: vec![value.into_sym()] }
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[SymMatrix<T>] {
        &self.values
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn endpoint(&self) -> &SymMatrix<T> {
        self.values.last().unwrap()
    }

    pub fn in_class(&self, z: &SymMatrix<T>) -> bool {
        z.dim() == self.dim() && (self.endpoint() - z).norm() <= T::of(1e-10)
    }

    /// π(s); π(0) = 0 by convention.
    pub fn eval(&self, s: T) -> SymMatrix<T> {
        if s <= T::zero() {
            return SymMatrix::zeros(self.dim());
        }
        for l in 0..self.values.len() {
            if s <= self.grid[l + 1] {
                return self.values[l].clone();
            }
        }
        self.endpoint().clone()
    }

    /// ∫₀¹ f(π(s)) ds
    pub fn integrate(&self, mut f: impl FnMut(&SymMatrix<T>) -> T) -> T {
        self.values.iter().enumerate().map(|(l, v)| f(v) * (self.grid[l + 1] - self.grid[l])).sum()
    }

    pub fn map_values(&self, f: impl Fn(&SymMatrix<T>) -> SymMatrix<T>) -> Self {
        Self::canonical(self.grid.clone(), self.values.iter().map(f).collect())
    }
}

/// Pieces (width, π value, π′ value) on the union of both grids.
pub fn merged_pieces<'a, T: Scalar>(
    a: &'a StepPath<T>,
    b: &'a StepPath<T>,
) -> Vec<(T, &'a SymMatrix<T>, &'a SymMatrix<T>)> {
    let (mut i, mut j) = (0, 0);
    let mut left = T::zero();
    let mut out = Vec::new();
    while i < a.levels() && j < b.levels() {
        let ra = a.grid[i + 1];
        let rb = b.grid[j + 1];
        let right = ra.min(rb);
        if right > left {
            out.push((right - left, &a.values[i], &b.values[j]));
        }
        left = right;
        if ra <= right {
            i += 1;
        }
        if rb <= right {
            j += 1;
        }
    }
    out
}

/// ∫₀¹ |π(s) − π′(s)| ds
pub fn path_distance<T: Scalar>(a: &StepPath<T>, b: &StepPath<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(merged_pieces(a, b).into_iter().map(|(w, x, y)| w * (x - y).norm()).sum())
}

#[derive(Clone, Debug)]
pub struct Projection<T> {
    pub path: StepPath<T>,
    pub distance: T,
    pub k_bound: T,
    pub w_norm: T,
}

impl<T: Scalar> Projection<T> {
    /// distance / K(z, |w|), zero when both vanish.
    pub fn ratio(&self) -> T {
        if self.k_bound > T::zero() {
            self.distance / self.k_bound
        } else if self.distance <= T::of(1e-14) {
            T::zero()
        } else {
            T::infinity()
        }
    }
}

/// Moves π ∈ Π(z + w) into Π(z) by the conjugation π ↦ h π hᵀ, h = √z (√(z+w))⁻¹,
/// on the positive eigenblock of z.
pub fn project_to_endpoint<T: Scalar>(path: &StepPath<T>, z: &PsdMatrix<T>) -> Result<Projection<T>> {
    let d = path.dim();
    if z.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: z.dim() });
    }
    let e = path.endpoint();
    let w = e - z.as_sym();
    if !psd_order(e, z.as_sym())? {
        return Err(Error::OrderViolation("endpoint(π) − z is not PSD".into()));
    }
    let w_norm = w.norm();
    let kb = k_bound(z, w_norm);

    let projected = if z.is_zero() {
        StepPath::zero(d)
    } else {
        let eig = z.eigen();
        let tol = T::tol_psd() * (T::one() + z.norm());
        let block = eig.values.iter().filter(|&&l| l > tol).count();
        // rotate into z's eigenbasis, keep the leading block
        let u = Square::from_fn(d, |i, k| eig.vectors[k][i]);
        let ut = u.transpose();
        let reduce = |a: &SymMatrix<T>| -> SymMatrix<T> {
            let r = a.congruence(&ut);
            SymMatrix::from_fn(block, |i, j| r.get(i, j))
        };
        let zc = SymMatrix::from_diag(&eig.values[..block]);
        let ec = reduce(e);
        let zc_sqrt = sqrt_psd(&PsdMatrix::new(zc)?);
        let inv = pinv_sqrt(&ec);
        let h = Square::from_sym(zc_sqrt.as_sym()).mul(&Square::from_sym(&inv));
        let values = path
            .values()
            .iter()
            .map(|v| {
                let p = reduce(v).congruence(&h);
                let padded = SymMatrix::from_fn(d, |i, j| if i < block && j < block { p.get(i, j) } else { T::zero() });
                padded.congruence(&u)
            })
            .collect::<Vec<_>>();
        let mut values = values;
        *values.last_mut().unwrap() = z.as_sym().clone();
        StepPath::canonical(path.grid().to_vec(), values)
    };
    let distance = path_distance(path, &projected)?;
    Ok(Projection { path: projected, distance, k_bound: kb, w_norm })
}

/// The increment |z − z′|·I, which dominates z′ − z.
pub fn lift_increment<T: Scalar>(z: &SymMatrix<T>, z_prime: &SymMatrix<T>) -> PsdMatrix<T> {
    let n = (z - z_prime).norm();
    PsdMatrix::new(SymMatrix::identity(z.dim()).scale(n)).expect("scaled identity")
}

/// π·1_{[0,1−ε]} + (z + w)·1_{(1−ε,1]}.
pub fn lift_to_endpoint<T: Scalar>(
    path: &StepPath<T>,
    z: &SymMatrix<T>,
    w: &SymMatrix<T>,
    eps: T,
) -> Result<StepPath<T>> {
    let target = z + w;
    if !psd_order(&target, path.endpoint())? {
        return Err(Error::OrderViolation("z + w is not above the endpoint".into()));
    }
    if !(eps > T::zero() && eps < T::one()) {
        return Err(Error::InvalidPath("lift width must lie in (0, 1)".into()));
    }
    let cut = T::one() - eps;
    let mut grid = vec![T::zero()];
    let mut values = Vec::new();
    for (l, v) in path.values().iter().enumerate() {
        let right = path.grid()[l + 1].min(cut);
        if right > *grid.last().unwrap() {
            grid.push(right);
            values.push(v.clone());
        }
    }
    grid.push(T::one());
    values.push(target);
    Ok(StepPath::canonical(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1(v: f64) -> SymMatrix<f64> {
        SymMatrix::from_diag(&[v])
    }

    #[test]
    fn canonicalize_examples() {
        let q = 0.4;
        let p = StepPath::new(vec![0.0, 0.5, 0.5, 1.0], vec![d1(0.0), d1(q), d1(q)]).unwrap();
        assert_eq!(p.grid(), &[0.0, 0.5, 1.0]);
        assert_eq!(p.values(), &[d1(0.0), d1(q)]);

        let p = StepPath::new(vec![0.0, 0.0, 1.0], vec![d1(0.0), d1(q)]).unwrap();
        assert_eq!(p.grid(), &[0.0, 1.0]);
        assert_eq!(p.values(), &[d1(q)]);

        let c = StepPath::new(vec![0.0, 0.3, 1.0], vec![d1(0.1), d1(0.2)]).unwrap();
        assert_eq!(StepPath::new(c.grid().to_vec(), c.values().to_vec()).unwrap(), c);
    }

    #[test]
    fn canonicalize_preserves_function() {
        let raw_g = vec![0.0, 0.2, 0.2, 0.5, 0.7, 1.0];
        let raw_v = vec![d1(0.1), d1(0.3), d1(0.3), d1(0.3), d1(0.9)];
        let p = StepPath::new(raw_g.clone(), raw_v.clone()).unwrap();
        for k in 1..=100 {
            let s = k as f64 / 100.0;
            let l = (0..raw_v.len()).find(|&l| s <= raw_g[l + 1]).unwrap();
            assert_eq!(p.eval(s), raw_v[l]);
        }
    }

    #[test]
    fn rejects_non_monotone() {
        let r = StepPath::new(vec![0.0, 0.5, 1.0], vec![d1(0.5), d1(0.2)]);
        assert!(matches!(r, Err(Error::OrderViolation(_))));
        assert!(StepPath::new(vec![0.0, 0.6, 0.5, 1.0], vec![d1(0.0); 3]).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = StepPath::constant(PsdMatrix::new(d1(0.3)).unwrap());
        let b = StepPath::constant(PsdMatrix::new(d1(0.8)).unwrap());
        assert_eq!(path_distance(&a, &a).unwrap(), 0.0);
        assert!((path_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn distance_matches_riemann_sum() {
        let a = StepPath::new(vec![0.0, 0.37, 1.0], vec![d1(0.1), d1(0.6)]).unwrap();
        let b = StepPath::constant(PsdMatrix::new(d1(0.25)).unwrap());
        let n = 10_000;
        let riemann: f64 = (0..n)
            .map(|k| (k as f64 + 0.5) / n as f64)
            .map(|s| (a.eval(s) - b.eval(s)).norm() / n as f64)
            .sum();
        assert!((path_distance(&a, &b).unwrap() - riemann).abs() < 1e-8);
    }

    #[test]
    fn projection_examples() {
        let p = StepPath::new(
            vec![0.0, 0.4, 1.0],
            vec![SymMatrix::from_diag(&[0.3, 0.05]), SymMatrix::from_diag(&[0.7, 0.2])],
        )
        .unwrap();
        let same = project_to_endpoint(&p, &PsdMatrix::new(p.endpoint().clone()).unwrap()).unwrap();
        assert!(path_distance(&same.path, &p).unwrap() < 1e-12);

        let zero = project_to_endpoint(&p, &PsdMatrix::zeros(2)).unwrap();
        assert_eq!(zero.path, StepPath::zero(2));

        let q = StepPath::new(
            vec![0.0, 0.5, 1.0],
            vec![SymMatrix::from_diag(&[0.5, 0.02]), SymMatrix::from_diag(&[1.2, 0.1])],
        )
        .unwrap();
        let z = PsdMatrix::new(SymMatrix::from_diag(&[1.0, 0.0])).unwrap();
        let r = project_to_endpoint(&q, &z).unwrap();
        assert!(r.path.in_class(&z));
        let vals = r.path.values();
        for l in 1..vals.len() {
            assert!(psd_order(&vals[l], &vals[l - 1]).unwrap());
        }
        assert!(r.distance <= 20.0 * r.k_bound);
    }

    #[test]
    fn projection_rejects_non_psd_increment() {
        let p = StepPath::constant(PsdMatrix::new(d1(0.3)).unwrap());
        let z = PsdMatrix::new(d1(0.5)).unwrap();
        assert!(project_to_endpoint(&p, &z).is_err());
    }

    #[test]
    fn lift_examples() {
        let q = StepPath::constant(PsdMatrix::new(d1(0.5)).unwrap());
        let same = lift_to_endpoint(&q, &d1(0.5), &d1(0.0), 1e-3).unwrap();
        assert_eq!(same, q);
        let up = lift_to_endpoint(&q, &d1(0.5), &d1(0.3), 0.1).unwrap();
        assert_eq!(up.grid(), &[0.0, 0.9, 1.0]);
        assert_eq!(up.values(), &[d1(0.5), d1(0.8)]);
        assert!(lift_to_endpoint(&q, &d1(0.4), &d1(0.0), 1e-3).is_err());
    }
}
