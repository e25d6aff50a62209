use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

/// Inner test function `φ` with its first two derivatives.
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d × d` Hessian.
    fn hess(&self, x: &[f64], out: &mut [f64]);
    /// A constant `c` with `|φ(x)| ≤ c (1 + |x|)`.
    fn growth(&self) -> f64;
}

/// Outer function `f(t, y_1, ..., y_K)` with its partials.
pub trait Outer: Send + Sync {
    fn arity(&self) -> usize;
    fn value(&self, t: f64, y: &[f64]) -> f64;
    fn time_derivative(&self, t: f64, y: &[f64]) -> f64;
    fn grad(&self, t: f64, y: &[f64], out: &mut [f64]);
    /// Row-major `K × K`.
    fn hess(&self, t: f64, y: &[f64], out: &mut [f64]);
}

/// `φ(x) = c + <b, x>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub linear: Vec<f64>,
}

impl Affine {
    pub fn one(dim: usize) -> Self {
        Self {
            constant: 1.0,
            linear: vec![0.0; dim],
        }
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut linear = vec![0.0; dim];
        linear[i] = 1.0;
        Self { constant: 0.0, linear }
    }
}

impl TestFunction for Affine {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.linear.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
    fn grad(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.linear);
    }
    fn hess(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    fn growth(&self) -> f64 {
        self.constant.abs().max(self.linear.iter().map(|b| b * b).sum::<f64>().sqrt())
    }
}

/// `q(x) = sqrt(1 + |x|^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub dim: usize,
}

impl TestFunction for Bracket {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let q = self.value(x);
        out.iter_mut().zip(x).for_each(|(o, v)| *o = v / q);
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let q = self.value(x);
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * d + j] = (delta - x[i] * x[j] / (q * q)) / q;
            }
        }
    }
    fn growth(&self) -> f64 {
        1.0
    }
}

/// `φ(x) = amplitude cos(<k, x> + phase)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Wave {
    pub amplitude: f64,
    pub frequency: Vec<f64>,
    pub phase: f64,
}

impl TestFunction for Wave {
    fn dim(&self) -> usize {
        self.frequency.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.amplitude * (self.arg(x)).cos()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let s = -self.amplitude * self.arg(x).sin();
        out.iter_mut().zip(&self.frequency).for_each(|(o, k)| *o = s * k);
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let c = -self.amplitude * self.arg(x).cos();
        let d = self.frequency.len();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = c * self.frequency[i] * self.frequency[j];
            }
        }
    }
    fn growth(&self) -> f64 {
        self.amplitude.abs()
    }
}

impl Wave {
    fn arg(&self, x: &[f64]) -> f64 {
        self.phase + self.frequency.iter().zip(x).map(|(k, v)| k * v).sum::<f64>()
    }
}

/// `f(t, y) = e^{rate t} (c + <b, y> + ½ yᵀ A y)` with `A` symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpQuadratic {
    pub rate: f64,
    pub constant: f64,
    pub linear: Vec<f64>,
    /// Row-major, symmetric.
    pub quadratic: Vec<f64>,
}

impl ExpQuadratic {
    pub fn linear(linear: Vec<f64>) -> Self {
        let k = linear.len();
        Self {
            rate: 0.0,
            constant: 0.0,
            linear,
            quadratic: vec![0.0; k * k],
        }
    }

    /// `f = y_0^2`.
    pub fn square() -> Self {
        Self {
            rate: 0.0,
            constant: 0.0,
            linear: vec![0.0],
            quadratic: vec![2.0],
        }
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    fn polynomial(&self, y: &[f64]) -> f64 {
        let k = self.linear.len();
        let mut v = self.constant;
        for i in 0..k {
            v += self.linear[i] * y[i];
            for j in 0..k {
                v += 0.5 * self.quadratic[i * k + j] * y[i] * y[j];
            }
        }
        v
    }
}

impl Outer for ExpQuadratic {
    fn arity(&self) -> usize {
        self.linear.len()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        (self.rate * t).exp() * self.polynomial(y)
    }
    fn time_derivative(&self, t: f64, y: &[f64]) -> f64 {
        self.rate * self.value(t, y)
    }
    fn grad(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let k = self.linear.len();
        let e = (self.rate * t).exp();
        for i in 0..k {
            let mut g = self.linear[i];
            for j in 0..k {
                g += self.quadratic[i * k + j] * y[j];
            }
            out[i] = e * g;
        }
    }
    fn hess(&self, t: f64, _y: &[f64], out: &mut [f64]) {
        let e = (self.rate * t).exp();
        out.iter_mut().zip(&self.quadratic).for_each(|(o, a)| *o = e * a);
    }
}

/// `F(t, m) = f(t, <φ_1, m>, ..., <φ_K, m>)`.
#[derive(Clone)]
pub struct CylinderFunctional {
    inner: Vec<Arc<dyn TestFunction>>,
    outer: Arc<dyn Outer>,
    dim: usize,
}

impl fmt::Debug for CylinderFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunctional")
            .field("dim", &self.dim)
            .field("arity", &self.inner.len())
            .finish()
    }
}

impl CylinderFunctional {
    pub fn new(inner: Vec<Arc<dyn TestFunction>>, outer: Arc<dyn Outer>) -> Result<Self> {
        let Some(first) = inner.first() else {
            return Err(Error::Config("a cylinder functional needs at least one test function".into()));
        };
        let dim = first.dim();
        if let Some(bad) = inner.iter().find(|p| p.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.dim(),
            });
        }
        if outer.arity() != inner.len() {
            return Err(Error::Config(format!(
                "outer function takes {} arguments, {} test functions given",
                outer.arity(),
                inner.len()
            )));
        }
        if inner.iter().any(|p| !p.growth().is_finite()) {
            return Err(Error::Config("test function without a linear growth certificate".into()));
        }
        Ok(Self { inner, outer, dim })
    }

    /// `F(m) = <φ, m>`.
    pub fn linear(phi: Arc<dyn TestFunction>) -> Result<Self> {
        Self::new(vec![phi], Arc::new(ExpQuadratic::linear(vec![1.0])))
    }

    /// `F(m) = m(R^d)`.
    pub fn mass(dim: usize) -> Result<Self> {
        Self::linear(Arc::new(Affine::one(dim)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.inner.len()
    }

    pub fn inner(&self) -> &[Arc<dyn TestFunction>] {
        &self.inner
    }

    pub fn outer(&self) -> &dyn Outer {
        self.outer.as_ref()
    }

    /// `(<φ_1, m>, ..., <φ_K, m>)`.
    pub fn coordinates(&self, m: &AtomicMeasure) -> Result<Vec<f64>> {
        if m.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: m.dim(),
            });
        }
        Ok(self.inner.iter().map(|p| m.integrate(|x| p.value(x))).collect())
    }

    pub fn value(&self, t: f64, m: &AtomicMeasure) -> Result<f64> {
        Ok(self.outer.value(t, &self.coordinates(m)?))
    }

    pub fn time_derivative(&self, t: f64, m: &AtomicMeasure) -> Result<f64> {
        Ok(self.outer.time_derivative(t, &self.coordinates(m)?))
    }

    /// `∂_{y_i} f` at the coordinates of `m`.
    pub fn weights(&self, t: f64, m: &AtomicMeasure) -> Result<Vec<f64>> {
        let y = self.coordinates(m)?;
        Ok(self.weights_at(t, &y))
    }

    pub(crate) fn weights_at(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.inner.len()];
        self.outer.grad(t, y, &mut w);
        w
    }

    /// `δ_μF(t, m)(x) = Σ ∂_{y_i} f φ_i(x)`.
    pub fn lfd(&self, t: f64, m: &AtomicMeasure, x: &[f64]) -> Result<f64> {
        let w = self.weights(t, m)?;
        Ok(self.lfd_with(&w, x))
    }

    pub fn lfd_grad(&self, t: f64, m: &AtomicMeasure, x: &[f64], out: &mut [f64]) -> Result<()> {
        let w = self.weights(t, m)?;
        self.lfd_grad_with(&w, x, out);
        Ok(())
    }

    pub fn lfd_hess(&self, t: f64, m: &AtomicMeasure, x: &[f64], out: &mut [f64]) -> Result<()> {
        let w = self.weights(t, m)?;
        self.lfd_hess_with(&w, x, out);
        Ok(())
    }

    pub(crate) fn lfd_with(&self, w: &[f64], x: &[f64]) -> f64 {
        self.inner.iter().zip(w).map(|(p, wi)| wi * p.value(x)).sum()
    }

    pub(crate) fn lfd_grad_with(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.dim];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (p, wi) in self.inner.iter().zip(w) {
            p.grad(x, &mut g);
            out.iter_mut().zip(&g).for_each(|(o, v)| *o += wi * v);
        }
    }

    pub(crate) fn lfd_hess_with(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let mut h = vec![0.0; self.dim * self.dim];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (p, wi) in self.inner.iter().zip(w) {
            p.hess(x, &mut h);
            out.iter_mut().zip(&h).for_each(|(o, v)| *o += wi * v);
        }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let step = p0 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `∫_0^1 <D((1-λ) m' + λ m), m - m'> dλ` for a derivative candidate `D`,
/// by Gauss-Legendre quadrature with `nodes` points.
pub fn segment_integral<D>(candidate: D, m: &AtomicMeasure, m_prime: &AtomicMeasure, nodes: usize) -> Result<f64>
where
    D: Fn(&AtomicMeasure, &[f64]) -> Result<f64>,
{
    if m.dim() != m_prime.dim() {
        return Err(Error::Dimension {
            expected: m.dim(),
            got: m_prime.dim(),
        });
    }
    let (lambda, w) = gauss_legendre(nodes);
    let mut total = 0.0;
    for (l, wl) in lambda.iter().zip(&w) {
        let point = m.scaled(*l)?.plus(&m_prime.scaled(1.0 - l)?)?;
        let mut inner = 0.0;
        for (x, wx) in m.atoms() {
            inner += wx * candidate(&point, x)?;
        }
        for (x, wx) in m_prime.atoms() {
            inner -= wx * candidate(&point, x)?;
        }
        total += wl * inner;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(64);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(11)).sum();
        assert!((s - 1.0 / 12.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_arity_mismatch() {
        let outer = Arc::new(ExpQuadratic::linear(vec![1.0, 1.0]));
        assert!(CylinderFunctional::new(vec![Arc::new(Affine::one(1))], outer).is_err());
    }
}
