//! Truncated Taylor series `sum_k c_k h^k` with `c_k = f^(k)(x) / k!`.

use std::ops::{Add, Mul, Sub};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Jet<T>(pub Vec<T>);

impl<T: Real> Jet<T> {
    pub fn zeros(len: usize) -> Self {
        Jet(vec![T::zero(); len])
    }

    #[cfg(test)]
    pub fn constant(c: T, len: usize) -> Self {
        let mut j = Self::zeros(len);
        j.0[0] = c;
        j
    }

    /// From derivatives `f(x), f'(x), ..., f^(n)(x)`.
    pub fn from_derivatives(ds: impl IntoIterator<Item = T>) -> Self {
        let mut fact = T::one();
        Jet(ds
            .into_iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 1 {
                    fact *= T::from_count(k);
                }
                d / fact
            })
            .collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn value(&self) -> T {
        self.0[0]
    }

    /// `f^(k)(x)`.
    pub fn derivative_at(&self, k: usize) -> T {
        let fact: T = (2..=k).map(T::from_count).fold(T::one(), |a, b| a * b);
        self.0[k] * fact
    }

    pub fn truncate(mut self, len: usize) -> Self {
        self.0.truncate(len);
        self
    }

    /// Jet of `f'`, one order shorter.
    pub fn derive(&self) -> Self {
        Jet(self.0.iter().enumerate().skip(1).map(|(k, &c)| c * T::from_count(k)).collect())
    }

    pub fn scale(&self, s: T) -> Self {
        Jet(self.0.iter().map(|&c| c * s).collect())
    }

    pub fn shift(&self, s: T) -> Self {
        let mut j = self.clone();
        j.0[0] += s;
        j
    }

    pub fn exp(&self) -> Self {
        // f = e^a  =>  k f_k = sum_{i=1}^k i a_i f_{k-i}
        let a = &self.0;
        let mut f = vec![T::zero(); a.len()];
        f[0] = a[0].exp();
        for k in 1..a.len() {
            let s: T = (1..=k).map(|i| T::from_count(i) * a[i] * f[k - i]).sum();
            f[k] = s / T::from_count(k);
        }
        Jet(f)
    }

    pub fn ln(&self) -> Self {
        // f = ln a  =>  k a_0 f_k = k a_k - sum_{i=1}^{k-1} i f_i a_{k-i}
        let a = &self.0;
        let mut f = vec![T::zero(); a.len()];
        f[0] = a[0].ln();
        for k in 1..a.len() {
            let s: T = (1..k).map(|i| T::from_count(i) * f[i] * a[k - i]).sum();
            f[k] = (T::from_count(k) * a[k] - s) / (T::from_count(k) * a[0]);
        }
        Jet(f)
    }

    pub fn div(&self, rhs: &Self) -> Self {
        let len = self.len().min(rhs.len());
        let (a, b) = (&self.0, &rhs.0);
        let mut q = vec![T::zero(); len];
        for k in 0..len {
            let s: T = (0..k).map(|i| q[i] * b[k - i]).sum();
            q[k] = (a[k] - s) / b[0];
        }
        Jet(q)
    }
}

impl<T: Real> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Jet<T> {
        Jet(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a + b).collect())
    }
}

impl<T: Real> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Jet<T> {
        Jet(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a - b).collect())
    }
}

impl<T: Real> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        let len = self.len().min(rhs.len());
        Jet((0..len).map(|k| (0..=k).map(|i| self.0[i] * rhs.0[k - i]).sum()).collect())
    }
}
