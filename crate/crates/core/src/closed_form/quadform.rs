//! Expectations of affine-sesquilinear forms `F(g) = c + uᴴg + gᴴv + gᴴQg`
//! in a standard circular Gaussian vector `g ~ CN(0, I_D)`.

use crate::linalg::{dotc, CMatrix};
use crate::scalar::{czero, Cx, Real};

/// Random vector `c + L g`.
#[derive(Clone, Debug)]
pub struct AffineVec<T> {
    pub c: Vec<Cx<T>>,
    pub l: CMatrix<T>,
}

impl<T: Real> AffineVec<T> {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            c: vec![czero(); n],
            l: CMatrix::zeros(n, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.cols()
    }

    /// `M (c + L g)`.
    pub fn left_mul(&self, m: &CMatrix<T>) -> Self {
        Self {
            c: m.mul_vec(&self.c),
            l: m.matmul(&self.l),
        }
    }

    /// `Mᴴ (c + L g)`.
    pub fn left_mul_adjoint(&self, m: &CMatrix<T>) -> Self {
        Self {
            c: m.adjoint_mul_vec(&self.c),
            l: m.adjoint_matmul(&self.l),
        }
    }

    /// `pᴴ q` as a form.
    pub fn inner(&self, q: &Self) -> Form<T> {
        Form {
            c: dotc(&self.c, &q.c),
            u: q.l.adjoint_mul_vec(&self.c),
            v: self.l.adjoint_mul_vec(&q.c),
            q: self.l.adjoint_matmul(&q.l),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Form<T> {
    pub c: Cx<T>,
    pub u: Vec<Cx<T>>,
    pub v: Vec<Cx<T>>,
    pub q: CMatrix<T>,
}

impl<T: Real> Form<T> {
    pub fn constant(c: Cx<T>, dim: usize) -> Self {
        Self {
            c,
            u: vec![czero(); dim],
            v: vec![czero(); dim],
            q: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.add_scaled(Cx::new(T::one(), T::zero()), other);
    }

    pub fn add_scaled(&mut self, s: Cx<T>, other: &Self) {
        self.c += s * other.c;
        for (a, b) in self.u.iter_mut().zip(&other.u) {
            // uᴴ enters conjugated, so scaling the form by s scales u by s*.
            *a += s.conj() * b;
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += s * b;
        }
        self.q.add_assign_scaled(s, &other.q);
    }

    pub fn add_const(&mut self, x: Cx<T>) {
        self.c += x;
    }

    /// `E{F} = c + Tr Q`.
    pub fn mean(&self) -> Cx<T> {
        self.c + self.q.trace()
    }

    /// The form of `conj(F)`.
    pub fn conj(&self) -> Self {
        Self {
            c: self.c.conj(),
            u: self.v.clone(),
            v: self.u.clone(),
            q: self.q.adjoint(),
        }
    }

    /// `E{F₁ F₂*}`; the linear-quadratic cross terms vanish (odd Gaussian moments).
    pub fn cross(&self, other: &Self) -> Cx<T> {
        self.mean() * other.mean().conj()
            + dotc(&self.u, &other.u)
            + dotc(&other.v, &self.v)
            + self.q.frob_inner(&other.q)
    }

    /// `E{F₁ F₂}`.
    pub fn product(&self, other: &Self) -> Cx<T> {
        self.cross(&other.conj())
    }

    /// Evaluates the form at a point.
    pub fn eval(&self, g: &[Cx<T>]) -> Cx<T> {
        self.c + dotc(&self.u, g) + dotc(g, &self.v) + dotc(g, &self.q.mul_vec(g))
    }
}
