//! Symmetric matrices, the PSD cone and its order.

use std::ops::{Add, Deref, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[inline]
fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

#[inline]
fn idx(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * d - i + 1) / 2 + (j - i)
}

/// Dimension recovered from a packed upper-triangle length.
pub fn dim_from_packed(len: usize) -> Option<usize> {
    let mut d = 0;
    while packed_len(d) < len {
        d += 1;
    }
    (packed_len(d) == len && d > 0).then_some(d)
}

/// A D×D real symmetric matrix stored as its upper triangle.
///
/// Packed order is row-major over `i <= j`: (0,0), (0,1), …, (0,D−1), (1,1), …
/// The inner product `dot` is the entrywise one over all D² entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![T::one(); dim])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in i..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds from row-major nested rows; rejects non-square or visibly asymmetric input.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
        }
        let tol = T::of(1e-12);
        for i in 0..d {
            for j in i + 1..d {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > tol * (T::one() + a.abs().max(b.abs())) {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self::from_fn(d, |i, j| (rows[i][j] + rows[j][i]) * T::of(0.5)))
    }

    pub fn from_packed(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != packed_len(dim) {
            return Err(Error::LengthMismatch { expected: packed_len(dim), got: data.len() });
        }
        Ok(Self { dim, data })
    }

    /// v vᵀ
    pub fn outer(v: &[T]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn packed(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[idx(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = idx(self.dim, i, j);
        self.data[k] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    /// Entrywise inner product Σ_{k,k'} a_{kk'} b_{kk'}.
    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut s = T::zero();
        let mut k = 0;
        for i in 0..d {
            s += self.data[k] * other.data[k];
            k += 1;
            for _ in i + 1..d {
                s += T::of(2.0) * self.data[k] * other.data[k];
                k += 1;
            }
        }
        s
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&v| v * s).collect() }
    }

    /// x ↦ xᵀ a x
    pub fn quad_form(&self, x: &[T]) -> T {
        let d = self.dim;
        let mut s = T::zero();
        for i in 0..d {
            s += self.get(i, i) * x[i] * x[i];
            for j in i + 1..d {
                s += T::of(2.0) * self.get(i, j) * x[i] * x[j];
            }
        }
        s
    }

    pub fn map_entries(&self, f: impl Fn(T) -> T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> SymMatrix<U> {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|v| U::of(v.f64())).collect() }
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations, eigenvalues descending.
    pub fn eigen(&self) -> SymEigen<T> {
        let d = self.dim;
        let mut a: Vec<Vec<T>> = self.to_rows();
        let mut v: Vec<Vec<T>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        let frob2: T = self.dot(self);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for p in 0..d {
                for q in p + 1..d {
                    off += a[p][q] * a[p][q];
                }
            }
            if off <= eps * eps * frob2 * T::of(1e-4) || off == T::zero() {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    let apq = a[p][q];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (T::of(2.0) * apq);
                    let t = if theta.abs() > T::of(1e150).min(T::max_value().sqrt()) {
                        T::one() / (T::of(2.0) * theta)
                    } else {
                        let sgn = if theta >= T::zero() { T::one() } else { -T::one() };
                        sgn / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    a[p][p] -= t * apq;
                    a[q][q] += t * apq;
                    a[p][q] = T::zero();
                    a[q][p] = T::zero();
                    for r in 0..d {
                        if r != p && r != q {
                            let arp = a[r][p];
                            let arq = a[r][q];
                            a[r][p] = c * arp - s * arq;
                            a[p][r] = a[r][p];
                            a[r][q] = s * arp + c * arq;
                            a[q][r] = a[r][q];
                        }
                        let vrp = v[r][p];
                        let vrq = v[r][q];
                        v[r][p] = c * vrp - s * vrq;
                        v[r][q] = s * vrp + c * vrq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
        SymEigen {
            values: order.iter().map(|&k| a[k][k]).collect(),
            vectors: order.iter().map(|&k| (0..d).map(|r| v[r][k]).collect()).collect(),
        }
    }

    /// U f(Λ) Uᵀ
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> Self {
        self.eigen().rebuild(f)
    }

    /// h a hᵀ for a square h.
    pub fn congruence(&self, h: &Square<T>) -> Self {
        let d = h.dim;
        let a = Square::from_sym(self);
        let ha = h.mul(&a);
        Self::from_fn(d, |i, j| (0..self.dim).map(|k| ha.get(i, k) * h.get(j, k)).sum())
    }
}

impl<T: Scalar> Add<&SymMatrix<T>> for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn add(self, rhs: &SymMatrix<T>) -> SymMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub<&SymMatrix<T>> for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn sub(self, rhs: &SymMatrix<T>) -> SymMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Add for SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<T: Scalar> Sub for SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<T: Scalar> Neg for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn neg(self) -> SymMatrix<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul<T> for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn mul(self, s: T) -> SymMatrix<T> {
        self.scale(s)
    }
}

/// Eigenpairs sorted by descending eigenvalue; `vectors[k]` pairs with `values[k]`.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

impl<T: Scalar> SymEigen<T> {
    pub fn rebuild(&self, f: impl Fn(T) -> T) -> SymMatrix<T> {
        let d = self.values.len();
        let fv: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_fn(d, |i, j| {
            (0..d).map(|k| fv[k] * self.vectors[k][i] * self.vectors[k][j]).sum()
        })
    }
}

/// Dense row-major square matrix, used only for non-symmetric products.
#[derive(Clone, Debug, PartialEq)]
pub struct Square<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Square<T> {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self { dim, data }
    }

    pub fn from_sym(a: &SymMatrix<T>) -> Self {
        let d = a.dim();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(a.get(i, j));
            }
        }
        Self { dim: d, data }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.dim;
        Self::from_fn(d, |i, j| (0..d).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }
}

/// A symmetric matrix certified positive semidefinite, with cached spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix<T> {
    base: SymMatrix<T>,
    eig: Vec<T>,
}

impl<T: Scalar> PsdMatrix<T> {
    /// Certifies `a`; eigenvalues in [−tol, 0) are clipped to zero and the matrix rebuilt.
    pub fn new(a: SymMatrix<T>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NotPsd(f64::NAN));
        }
        let e = a.eigen();
        let tol = T::tol_psd() * (T::one() + a.norm());
        let min = e.values.last().copied().unwrap_or(T::zero());
        if min < -tol {
            return Err(Error::NotPsd(min.f64()));
        }
        if min < T::zero() {
            let base = e.rebuild(|l| l.max(T::zero()));
            let eig = e.values.iter().map(|l| l.max(T::zero())).collect();
            return Ok(Self { base, eig });
        }
        Ok(Self { base: a, eig: e.values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { base: SymMatrix::zeros(dim), eig: vec![T::zero(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self { base: SymMatrix::identity(dim), eig: vec![T::one(); dim] }
    }

    /// L Lᵀ for a row-major D×k factor given as rows.
    pub fn gram(rows: &[Vec<T>]) -> Self {
        let d = rows.len();
        let base = SymMatrix::from_fn(d, |i, j| {
            rows[i].iter().zip(&rows[j]).map(|(&a, &b)| a * b).sum()
        });
        Self::new(base.clone()).unwrap_or_else(|_| Self { eig: base.eigen().values, base })
    }

    pub fn as_sym(&self) -> &SymMatrix<T> {
        &self.base
    }

    pub fn into_sym(self) -> SymMatrix<T> {
        self.base
    }

    /// Eigenvalues, descending.
    pub fn eig(&self) -> &[T] {
        &self.eig
    }

    pub fn is_zero(&self) -> bool {
        let tol = T::tol_psd() * (T::one() + self.base.norm());
        self.eig.first().is_none_or(|&l| l <= tol)
    }
}

impl<T> Deref for PsdMatrix<T> {
    type Target = SymMatrix<T>;
    fn deref(&self) -> &SymMatrix<T> {
        &self.base
    }
}

/// a ⪰ b, with tolerance tol_psd scaled by the larger norm.
pub fn psd_order<T: Scalar>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> Result<bool> {
    a.check_dim(b)?;
    let diff = a - b;
    let min = diff.eigen().values.last().copied().unwrap_or(T::zero());
    let tol = T::tol_psd() * (T::one() + a.norm().max(b.norm()));
    Ok(min >= -tol)
}

pub fn sqrt_psd<T: Scalar>(a: &PsdMatrix<T>) -> PsdMatrix<T> {
    let e = a.eigen();
    let base = e.rebuild(|l| l.max(T::zero()).sqrt());
    let eig = a.eig.iter().map(|l| l.max(T::zero()).sqrt()).collect();
    PsdMatrix { base, eig }
}

/// Smallest eigenvalue strictly above tol_psd.
pub fn min_positive_eig<T: Scalar>(a: &PsdMatrix<T>) -> Result<T> {
    let tol = T::tol_psd() * (T::one() + a.norm());
    a.eig.iter().rev().copied().find(|&l| l > tol).ok_or(Error::ZeroMatrix)
}

/// K(z, r) = (|z|+r)(1+|z|^{1/2} m^{-1/2}) m^{-1/2} r^{1/2} + √((|z|+r) r), and r at z = 0.
pub fn k_bound<T: Scalar>(z: &PsdMatrix<T>, r: T) -> T {
    let m = match min_positive_eig(z) {
        Ok(m) => m,
        Err(_) => return r,
    };
    let nz = z.norm();
    let mi = m.sqrt().recip();
    (nz + r) * (T::one() + nz.sqrt() * mi) * mi * r.sqrt() + ((nz + r) * r).sqrt()
}

/// Maps (λ_{kk'})_{k≤k'} to the symmetric λ̃ with halved off-diagonal entries,
/// so that Σ_{k≤k'} λ_{kk'} a_{kk'} = λ̃·a.
pub fn lambda_embed<T: Scalar>(dim: usize, upper: &[T]) -> Result<SymMatrix<T>> {
    let mut m = SymMatrix::from_packed(dim, upper.to_vec())?;
    for i in 0..dim {
        for j in i + 1..dim {
            let v = m.get(i, j);
            m.set(i, j, v * T::of(0.5));
        }
    }
    Ok(m)
}

/// (a)^{-1/2} restricted to eigenvalues above tol; the rest map to 0.
pub(crate) fn pinv_sqrt<T: Scalar>(a: &SymMatrix<T>) -> SymMatrix<T> {
    let tol = T::tol_psd() * (T::one() + a.norm());
    a.map_spectrum(|l| if l > tol { l.sqrt().recip() } else { T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SymMatrix<f64> {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn packed_layout() {
        let a = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 5.0], &[3.0, 5.0, 6.0]]);
        assert_eq!(a.packed(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(dim_from_packed(6), Some(3));
        assert_eq!(dim_from_packed(5), None);
    }

    #[test]
    fn dot_counts_all_entries() {
        let a = m(&[&[1.0, 2.0], &[2.0, 3.0]]);
        let b = m(&[&[4.0, -1.0], &[-1.0, 2.0]]);
        assert_eq!(a.dot(&b), 4.0 - 2.0 - 2.0 + 6.0);
    }

    #[test]
    fn order_examples() {
        let i = SymMatrix::<f64>::identity(2);
        let z = SymMatrix::zeros(2);
        assert!(psd_order(&i, &z).unwrap());
        assert!(!psd_order(&SymMatrix::from_diag(&[1.0, -1.0]), &z).unwrap());
        assert!(psd_order(&i, &SymMatrix::zeros(3)).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let r = sqrt_psd(&PsdMatrix::<f64>::identity(3));
        assert!((r.as_sym() - &SymMatrix::identity(3)).max_abs() < 1e-14);
        let r = sqrt_psd(&PsdMatrix::new(SymMatrix::from_diag(&[4.0, 9.0])).unwrap());
        assert!((r.as_sym() - &SymMatrix::from_diag(&[2.0, 3.0])).max_abs() < 1e-14);
    }

    #[test]
    fn min_positive_examples() {
        let p = |d: &[f64]| PsdMatrix::new(SymMatrix::from_diag(d)).unwrap();
        assert_eq!(min_positive_eig(&p(&[3.0, 0.0])).unwrap(), 3.0);
        assert_eq!(min_positive_eig(&p(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(min_positive_eig(&p(&[2.0, 5.0, 0.0])).unwrap(), 2.0);
        assert_eq!(min_positive_eig(&p(&[0.0, 0.0])), Err(Error::ZeroMatrix));
    }

    #[test]
    fn k_bound_examples() {
        let i2 = PsdMatrix::<f64>::identity(2);
        assert_eq!(k_bound(&i2, 0.0), 0.0);
        assert_eq!(k_bound(&PsdMatrix::zeros(2), 0.3), 0.3);
        let s2 = 2f64.sqrt();
        let want = (s2 + 1.0) * (1.0 + 2f64.powf(0.25)) + (s2 + 1.0).sqrt();
        assert!((k_bound(&i2, 1.0) - want).abs() < 1e-12);
    }

    #[test]
    fn lambda_embed_examples() {
        assert_eq!(lambda_embed(1, &[5.0]).unwrap(), m(&[&[5.0]]));
        assert_eq!(lambda_embed(2, &[1.0, 4.0, 1.0]).unwrap(), m(&[&[1.0, 2.0], &[2.0, 1.0]]));
        assert!(lambda_embed(2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn clipping_on_construction() {
        let a = SymMatrix::from_diag(&[1.0, -1e-12]);
        let p = PsdMatrix::new(a).unwrap();
        assert_eq!(p.eig()[1], 0.0);
        assert!(PsdMatrix::new(SymMatrix::from_diag(&[1.0, -1e-6])).is_err());
    }

    #[test]
    fn rejects_asymmetric_rows() {
        let rows = vec![vec![1.0, 2.0], vec![2.5, 1.0]];
        assert_eq!(SymMatrix::<f64>::from_rows(&rows), Err(Error::NotSymmetric(0, 1)));
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = m(&[&[2.0, -1.0, 0.5], &[-1.0, 3.0, 0.2], &[0.5, 0.2, -1.0]]);
        let e = a.eigen();
        assert!((e.rebuild(|l| l) - a).max_abs() < 1e-13);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn works_in_f32() {
        let a = SymMatrix::<f32>::from_diag(&[4.0, 1.0]);
        let r = sqrt_psd(&PsdMatrix::new(a).unwrap());
        assert!((r.get(0, 0) - 2.0).abs() < 1e-6);
    }
}
