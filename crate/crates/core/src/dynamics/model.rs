use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

/// Largest admissible offspring number.
pub const MAX_OFFSPRING: usize = 64;

const PMF_TOL: f64 = 1e-12;

/// The coefficient bundle `(b, σ, γ, (p_ℓ))` of a controlled branching
/// diffusion. Callers never use these directly; [`ModelSpec`] wraps them with
/// the declared bounds and checks every value it hands out.
pub trait Coefficients: Send + Sync {
    fn dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Writes `b(t, x, m, a)` into `out` (length `d`).
    fn drift(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut [f64]);
    /// Writes `σ(t, x, m, a)` row-major into `out` (length `d * d`).
    fn diffusion(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut [f64]);
    fn rate(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> f64;
    /// Writes `(p_0, p_1, ...)` into `out`, replacing its contents.
    fn offspring(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut Vec<f64>);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Bounded,
    Linear,
}

/// Declared Lipschitz constants of the coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Lipschitz {
    pub drift: f64,
    pub diffusion: f64,
    pub rate: f64,
    pub offspring: f64,
}

/// Metadata recording which standing assumptions a model satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Assumptions {
    pub drift_growth: Growth,
    pub diffusion_growth: Growth,
    /// Declared sup of `|b|` when bounded.
    pub drift_bound: Option<f64>,
    /// Declared sup of `|σ|_F` when bounded.
    pub diffusion_bound: Option<f64>,
}

#[derive(Clone)]
pub struct ModelSpec {
    coeffs: Arc<dyn Coefficients>,
    pub gamma_bar: f64,
    pub m1: f64,
    pub m2: f64,
    pub lipschitz: Lipschitz,
    pub assumptions: Assumptions,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("dim", &self.dim())
            .field("gamma_bar", &self.gamma_bar)
            .field("m1", &self.m1)
            .field("m2", &self.m2)
            .field("lipschitz", &self.lipschitz)
            .field("assumptions", &self.assumptions)
            .finish()
    }
}

impl ModelSpec {
    pub fn new(
        coeffs: Arc<dyn Coefficients>,
        gamma_bar: f64,
        m1: f64,
        m2: f64,
        lipschitz: Lipschitz,
        assumptions: Assumptions,
    ) -> Result<Self> {
        if !(gamma_bar.is_finite() && gamma_bar > 0.0) {
            return Err(Error::Config(format!("gamma_bar must be positive, got {gamma_bar}")));
        }
        if !(m1.is_finite() && m1 >= 0.0 && m2.is_finite() && m2 >= 0.0) {
            return Err(Error::Config("offspring moment bounds must be finite and nonnegative".into()));
        }
        if coeffs.dim() == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        Ok(Self {
            coeffs,
            gamma_bar,
            m1,
            m2,
            lipschitz,
            assumptions,
        })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.coeffs.action_dim()
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coeffs.as_ref()
    }

    pub fn drift(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut [f64]) {
        self.coeffs.drift(t, x, m, a, out);
    }

    pub fn diffusion(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut [f64]) {
        self.coeffs.diffusion(t, x, m, a, out);
    }

    /// `γ(t, x, m, a)`, rejected unless it lies in `[0, γ̄]`.
    pub fn rate(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> Result<f64> {
        let g = self.coeffs.rate(t, x, m, a);
        if !(0.0..=self.gamma_bar).contains(&g) {
            return Err(Error::Bound(format!("rate {g} outside [0, {}] at t = {t}", self.gamma_bar)));
        }
        Ok(g)
    }

    /// Offspring pmf, rejected unless it is a probability vector on
    /// `{0, ..., 64}` whose first two moments respect `M1` and `M2`.
    pub fn offspring(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut Vec<f64>) -> Result<()> {
        self.coeffs.offspring(t, x, m, a, out);
        check_pmf(out, self.m1, self.m2)
    }

    /// `Σ ℓ p_ℓ` at the given point.
    pub fn mean_offspring(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> Result<f64> {
        let mut pmf = Vec::new();
        self.offspring(t, x, m, a, &mut pmf)?;
        Ok(pmf.iter().enumerate().map(|(l, p)| l as f64 * p).sum())
    }
}

pub fn check_pmf(pmf: &[f64], m1: f64, m2: f64) -> Result<()> {
    if pmf.is_empty() || pmf.len() > MAX_OFFSPRING + 1 {
        return Err(Error::Bound(format!(
            "offspring support must be nonempty and within 0..={MAX_OFFSPRING}, got {} entries",
            pmf.len()
        )));
    }
    if pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Bound("offspring probabilities must be nonnegative".into()));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PMF_TOL {
        return Err(Error::Bound(format!("offspring pmf sums to {total}")));
    }
    let first: f64 = pmf.iter().enumerate().map(|(l, p)| l as f64 * p).sum();
    let second: f64 = pmf.iter().enumerate().map(|(l, p)| (l * l) as f64 * p).sum();
    if first > m1 + PMF_TOL {
        return Err(Error::Bound(format!("mean offspring {first} exceeds M1 = {m1}")));
    }
    if second > m2 + PMF_TOL {
        return Err(Error::Bound(format!("second offspring moment {second} exceeds M2 = {m2}")));
    }
    Ok(())
}

/// The `ℓ` with `z ∈ I_ℓ = [p_0 + ... + p_{ℓ-1}, p_0 + ... + p_ℓ)`.
pub fn select_offspring(pmf: &[f64], z: f64) -> usize {
    let mut acc = 0.0;
    for (l, &p) in pmf.iter().enumerate() {
        acc += p;
        if z < acc {
            return l;
        }
    }
    // z landed in the rounding gap below 1
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_checks() {
        assert!(check_pmf(&[0.0, 0.0, 1.0], 2.0, 4.0).is_ok());
        assert!(check_pmf(&[0.0, 0.0, 1.0], 1.5, 4.0).is_err());
        assert!(check_pmf(&[0.0, 0.0, 1.0], 2.0, 3.0).is_err());
        assert!(check_pmf(&[0.5, 0.4], 2.0, 4.0).is_err());
        assert!(check_pmf(&[], 2.0, 4.0).is_err());
        assert!(check_pmf(&vec![1.0 / 66.0; 66], 100.0, 1e4).is_err());
    }

    #[test]
    fn partition_selection() {
        let pmf = [0.25, 0.5, 0.25];
        assert_eq!(select_offspring(&pmf, 0.0), 0);
        assert_eq!(select_offspring(&pmf, 0.2499), 0);
        assert_eq!(select_offspring(&pmf, 0.25), 1);
        assert_eq!(select_offspring(&pmf, 0.75), 2);
        assert_eq!(select_offspring(&[0.3, 0.7, 0.0], 0.99999999999999999), 1);
    }
}
