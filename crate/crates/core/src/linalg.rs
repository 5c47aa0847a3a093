//! Small dense complex linear algebra: the matrices in this crate are at most a few
//! hundred on a side, so a row-major `Vec` with straightforward loops is enough.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::{czero, Cx, Real};

/// `u^H v`.
pub fn dotc<T: Real>(u: &[Cx<T>], v: &[Cx<T>]) -> Cx<T> {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).fold(czero(), |acc, (a, b)| acc + a.conj() * b)
}

pub fn norm_sq<T: Real>(v: &[Cx<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn axpy<T: Real>(alpha: Cx<T>, x: &[Cx<T>], y: &mut [Cx<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn column(v: &[Cx<T>]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// `u v^H`.
    pub fn outer(u: &[Cx<T>], v: &[Cx<T>]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    pub fn diag(d: &[Cx<T>]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Cx<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Cx::new(s, T::zero()))
    }

    pub fn trace(&self) -> Cx<T> {
        (0..self.rows.min(self.cols)).fold(czero(), |acc, i| acc + self[(i, i)])
    }

    /// `Σ_ab self[a,b] · conj(other[a,b])`, i.e. `Tr(self · other^H)`.
    pub fn frob_inner(&self, other: &Self) -> Cx<T> {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(czero(), |acc, (a, b)| acc + a * b.conj())
    }

    pub fn frob_norm_sq(&self) -> T {
        norm_sq(&self.data)
    }

    pub fn mul_vec(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        debug_assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).fold(czero(), |acc, (a, b)| acc + a * b))
            .collect()
    }

    /// `self^H v` without materializing the adjoint.
    pub fn adjoint_mul_vec(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        debug_assert_eq!(self.rows, v.len());
        let mut out = vec![czero(); self.cols];
        for (r, vr) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * vr;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == czero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self^H · other`.
    pub fn adjoint_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "adjoint_matmul dimension mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let srow = self.row(k);
            let orow = other.row(k);
            for (r, a) in srow.iter().enumerate() {
                if *a == czero() {
                    continue;
                }
                let a = a.conj();
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add_assign_scaled(&mut self, s: Cx<T>, other: &Self) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Copies `block` into `self` starting at `(r0, c0)`, adding to what is there.
    pub fn add_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] += block[(r, c)];
            }
        }
    }

    /// `(self + self^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()).scale(half)
        })
    }

    /// `‖self − self^H‖_F / ‖self‖_F` (0 for the zero matrix).
    pub fn hermitian_deviation(&self) -> T {
        let n = self.frob_norm_sq().sqrt();
        if n == T::zero() {
            return T::zero();
        }
        let mut d = T::zero();
        for r in 0..self.rows {
            for c in 0..self.cols {
                d += (self[(r, c)] - self[(c, r)].conj()).norm_sqr();
            }
        }
        d.sqrt() / n
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Cx<T> {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: Self) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: Self) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: Self) -> CMatrix<T> {
        self.matmul(rhs)
    }
}

/// Cholesky factor `L` of a Hermitian positive-definite matrix, `C = L L^H`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: CMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes the Hermitian part of `c`. Fails when a pivot is not strictly positive.
    pub fn new(c: &CMatrix<T>) -> Result<Self> {
        let n = c.rows();
        if c.cols() != n {
            return Err(Error::InvalidArgument(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                c.cols()
            )));
        }
        let c = c.hermitian_part();
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = c[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NumericalDegeneracy(format!(
                    "matrix not positive definite (pivot {j} = {d:e})"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = Cx::new(djj, T::zero());
            for i in (j + 1)..n {
                let mut s = c[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s.unscale(djj);
            }
        }
        Ok(Self { l })
    }

    /// Ratio of the largest to smallest squared pivot; a cheap condition estimate.
    pub fn condition_estimate(&self) -> T {
        let n = self.l.rows();
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for i in 0..n {
            let p = self.l[(i, i)].re * self.l[(i, i)].re;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        hi / lo
    }

    pub fn solve_vec(&self, b: &[Cx<T>]) -> Vec<Cx<T>> {
        let n = self.l.rows();
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s.unscale(l[(i, i)].re);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * y[k];
            }
            y[i] = s.unscale(l[(i, i)].re);
        }
        y
    }

    pub fn solve_mat(&self, b: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(b.rows(), b.cols());
        for c in 0..b.cols() {
            let x = self.solve_vec(&b.col(c));
            for (r, v) in x.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }
}

/// Solves `a x = b` for a general square `a` by LU with partial pivoting.
pub fn lu_solve<T: Real>(a: &CMatrix<T>, b: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::InvalidArgument("lu_solve dimension mismatch".into()));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let (piv, best) =
            (k..n)
                .map(|r| (r, m[(r, k)].norm()))
                .fold((k, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == T::zero() {
            return Err(Error::NumericalDegeneracy("singular matrix in lu_solve".into()));
        }
        if piv != k {
            for c in 0..n {
                let tmp = m[(k, c)];
                m[(k, c)] = m[(piv, c)];
                m[(piv, c)] = tmp;
            }
            x.swap(k, piv);
        }
        let d = m[(k, k)];
        for r in (k + 1)..n {
            let f = m[(r, k)] / d;
            if f == czero() {
                continue;
            }
            for c in k..n {
                let v = m[(k, c)];
                m[(r, c)] -= f * v;
            }
            let xk = x[k];
            x[r] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in (k + 1)..n {
            s -= m[(k, c)] * x[c];
        }
        x[k] = s / m[(k, k)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn sample_hpd() -> CMatrix<f64> {
        let b = CMatrix::from_fn(3, 3, |r, c| {
            cx((r + 2 * c) as f64 * 0.3 - 0.5, (r as f64 - c as f64) * 0.7)
        });
        &b.adjoint_matmul(&b) + &CMatrix::identity(3)
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let c = sample_hpd();
        let b = vec![cx(1.0, -2.0), cx(0.5, 0.0), cx(-1.0, 3.0)];
        let x = Cholesky::new(&c).unwrap().solve_vec(&b);
        let r = c.mul_vec(&x);
        let res: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(res / norm_sq(&b).sqrt() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut c = CMatrix::<f64>::identity(2);
        c[(1, 1)] = cx(-1.0, 0.0);
        assert!(matches!(Cholesky::new(&c), Err(Error::NumericalDegeneracy(_))));
    }

    #[test]
    fn lu_matches_cholesky() {
        let c = sample_hpd();
        let b = vec![cx(0.2, 0.1), cx(-0.4, 1.0), cx(2.0, 0.0)];
        let x1 = Cholesky::new(&c).unwrap().solve_vec(&b);
        let x2 = lu_solve(&c, &b).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_products_agree() {
        let a = CMatrix::from_fn(3, 2, |r, c| cx(r as f64 - c as f64, 0.5 * (r * c) as f64));
        let b = CMatrix::from_fn(3, 4, |r, c| cx(0.1 * c as f64, r as f64));
        let p1 = a.adjoint_matmul(&b);
        let p2 = a.adjoint().matmul(&b);
        assert!((&p1 - &p2).frob_norm_sq() < 1e-24);
        let v = vec![cx(1.0, 1.0), cx(0.0, -1.0), cx(2.0, 0.5)];
        let w1 = a.adjoint_mul_vec(&v);
        let w2 = a.adjoint().mul_vec(&v);
        for (x, y) in w1.iter().zip(&w2) {
            assert!((x - y).norm() < 1e-14);
        }
    }
}
