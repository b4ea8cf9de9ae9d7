//! Small dense complex matrices for density-matrix algebra.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::scalar::{cone, czero, Cplx, Real};

/// Row-major `n × n` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T> {
    n: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![czero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for a in 0..n {
            m[(a, a)] = cone();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Cplx<T>) -> Self {
        let mut m = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] = f(a, b);
            }
        }
        m
    }

    pub fn diag(d: &[Cplx<T>]) -> Self {
        let mut m = Self::zeros(d.len());
        for (a, v) in d.iter().enumerate() {
            m[(a, a)] = *v;
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |a, b| self[(b, a)].conj())
    }

    pub fn trace(&self) -> Cplx<T> {
        (0..self.n).fold(czero(), |acc, a| acc + self[(a, a)])
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Cplx<T> {
        let n = self.n;
        let mut acc = czero();
        for a in 0..n {
            for b in 0..n {
                acc = acc + self[(a, b)] * other[(b, a)];
            }
        }
        acc
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        CMat {
            n: self.n,
            data: self.data.iter().map(|v| *v * s).collect(),
        }
    }

    /// Element-wise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Self {
        CMat {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a * *b).collect(),
        }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: Cplx<T>, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * *b;
        }
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn hermiticity_deviation(&self) -> T {
        let mut d = T::zero();
        for a in 0..self.n {
            for b in 0..self.n {
                d = d.max((self[(a, b)] - self[(b, a)].conj()).norm());
            }
        }
        d
    }

    /// Cholesky test for positive semi-definiteness of `self + shift·I`.
    /// Assumes Hermitian input.
    pub fn is_psd(&self, shift: T) -> bool {
        let n = self.n;
        let mut l = vec![czero::<T>(); n * n];
        for j in 0..n {
            let mut d = self[(j, j)].re + shift;
            for k in 0..j {
                d = d - l[j * n + k].norm_sqr();
            }
            if !(d > T::zero()) {
                return false;
            }
            let d = d.sqrt();
            l[j * n + j] = Cplx::new(d, T::zero());
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / d;
            }
        }
        true
    }
}

impl<T> Index<(usize, usize)> for CMat<T> {
    type Output = Cplx<T>;
    #[inline]
    fn index(&self, (a, b): (usize, usize)) -> &Cplx<T> {
        &self.data[a * self.n + b]
    }
}

impl<T> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (a, b): (usize, usize)) -> &mut Cplx<T> {
        &mut self.data[a * self.n + b]
    }
}

impl<T: Real> Mul for &CMat<T> {
    type Output = CMat<T>;
    fn mul(self, rhs: &CMat<T>) -> CMat<T> {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for a in 0..n {
            for k in 0..n {
                let x = self.data[a * n + k];
                if x == czero() {
                    continue;
                }
                for b in 0..n {
                    out.data[a * n + b] = out.data[a * n + b] + x * rhs.data[k * n + b];
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &CMat<T> {
    type Output = CMat<T>;
    fn add(self, rhs: &CMat<T>) -> CMat<T> {
        CMat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Real> Sub for &CMat<T> {
    type Output = CMat<T>;
    fn sub(self, rhs: &CMat<T>) -> CMat<T> {
        CMat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}
