//! Built-in coefficient families.
//!
//! Measure dependence goes through `m(R^d)` and `<m, x>` only, so evaluating
//! a coefficient costs O(d) regardless of the size of the mean measure.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

use super::model::{check_pmf, Assumptions, Coefficients, Growth, Lipschitz, ModelSpec, MAX_OFFSPRING};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `b_i = offset_i + slope x_i + mass m(R^d) + mean <m, x_i> + control a_i`,
/// passed through `scale * tanh(· / scale)` when `saturation` is set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftFamily {
    pub offset: Vec<f64>,
    pub slope: f64,
    pub mass: f64,
    pub mean: f64,
    pub control: f64,
    pub saturation: Option<f64>,
}

impl DriftFamily {
    pub fn zero(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            slope: 0.0,
            mass: 0.0,
            mean: 0.0,
            control: 0.0,
            saturation: None,
        }
    }

    pub fn constant(offset: Vec<f64>) -> Self {
        let dim = offset.len();
        Self { offset, ..Self::zero(dim) }
    }

    pub fn linear(dim: usize, slope: f64) -> Self {
        Self { slope, ..Self::zero(dim) }
    }

    pub fn controlled(dim: usize, control: f64) -> Self {
        Self { control, ..Self::zero(dim) }
    }
}

/// `σ = level (1 + mass_coupling tanh(m(R^d))) I`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffusionFamily {
    pub level: f64,
    pub mass_coupling: f64,
}

impl DiffusionFamily {
    pub fn constant(level: f64) -> Self {
        Self {
            level,
            mass_coupling: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RateFamily {
    Constant { value: f64 },
    /// `γ̄ sigmoid(value + slope x_1 + mass m(R^d) + control a_1)`.
    Logistic {
        value: f64,
        slope: f64,
        mass: f64,
        control: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OffspringFamily {
    Fixed { pmf: Vec<f64> },
    /// `(1 - w) base + w alt` with `w = sigmoid(value + slope x_1)`.
    Mixed {
        base: Vec<f64>,
        alt: Vec<f64>,
        value: f64,
        slope: f64,
    },
}

impl OffspringFamily {
    /// Exactly `ℓ` children.
    pub fn deterministic(l: usize) -> Self {
        let mut pmf = vec![0.0; l + 1];
        pmf[l] = 1.0;
        OffspringFamily::Fixed { pmf }
    }

    fn moment_bounds(&self) -> (f64, f64) {
        let moments = |p: &[f64]| {
            let m1: f64 = p.iter().enumerate().map(|(l, q)| l as f64 * q).sum();
            let m2: f64 = p.iter().enumerate().map(|(l, q)| (l * l) as f64 * q).sum();
            (m1, m2)
        };
        match self {
            OffspringFamily::Fixed { pmf } => moments(pmf),
            OffspringFamily::Mixed { base, alt, .. } => {
                let (a1, a2) = moments(base);
                let (b1, b2) = moments(alt);
                (a1.max(b1), a2.max(b2))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyModel {
    pub dim: usize,
    pub action_dim: usize,
    pub drift: DriftFamily,
    pub diffusion: DiffusionFamily,
    pub rate: RateFamily,
    pub offspring: OffspringFamily,
}

fn action_component(a: &[f64], i: usize) -> f64 {
    match a.len() {
        0 => 0.0,
        1 => a[0],
        _ => a[i],
    }
}

impl Coefficients for FamilyModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn drift(&self, _t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut [f64]) {
        let f = &self.drift;
        let mass = m.mass();
        let first = m.first_moment();
        for i in 0..self.dim {
            let v = f.offset[i] + f.slope * x[i] + f.mass * mass + f.mean * first[i] + f.control * action_component(a, i);
            out[i] = match f.saturation {
                Some(s) => s * (v / s).tanh(),
                None => v,
            };
        }
    }

    fn diffusion(&self, _t: f64, _x: &[f64], m: &AtomicMeasure, _a: &[f64], out: &mut [f64]) {
        let s = self.diffusion.level * (1.0 + self.diffusion.mass_coupling * m.mass().tanh());
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = s;
        }
    }

    fn rate(&self, _t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> f64 {
        match &self.rate {
            RateFamily::Constant { value } => *value,
            RateFamily::Logistic {
                value,
                slope,
                mass,
                control,
            } => {
                // γ̄ is applied by `FamilyModel::spec`
                sigmoid(value + slope * x[0] + mass * m.mass() + control * action_component(a, 0))
            }
        }
    }

    fn offspring(&self, _t: f64, x: &[f64], _m: &AtomicMeasure, _a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match &self.offspring {
            OffspringFamily::Fixed { pmf } => out.extend_from_slice(pmf),
            OffspringFamily::Mixed {
                base,
                alt,
                value,
                slope,
            } => {
                let w = sigmoid(value + slope * x[0]);
                let n = base.len().max(alt.len());
                out.extend((0..n).map(|l| {
                    (1.0 - w) * base.get(l).copied().unwrap_or(0.0) + w * alt.get(l).copied().unwrap_or(0.0)
                }));
            }
        }
    }
}

/// Logistic rates are stored as a sigmoid in `[0, 1]` and scaled by `γ̄`
/// here, which keeps `FamilyModel` itself free of `γ̄`.
struct Scaled {
    inner: FamilyModel,
    gamma_bar: f64,
}

impl Coefficients for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim
    }
    fn action_dim(&self) -> usize {
        self.inner.action_dim
    }
    fn drift(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut [f64]) {
        self.inner.drift(t, x, m, a, out)
    }
    fn diffusion(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut [f64]) {
        self.inner.diffusion(t, x, m, a, out)
    }
    fn rate(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> f64 {
        let r = self.inner.rate(t, x, m, a);
        match self.inner.rate {
            RateFamily::Constant { .. } => r,
            RateFamily::Logistic { .. } => self.gamma_bar * r,
        }
    }
    fn offspring(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64], out: &mut Vec<f64>) {
        self.inner.offspring(t, x, m, a, out)
    }
}

impl FamilyModel {
    /// A model with everything switched off.
    pub fn frozen(dim: usize) -> Self {
        Self {
            dim,
            action_dim: 1,
            drift: DriftFamily::zero(dim),
            diffusion: DiffusionFamily::constant(0.0),
            rate: RateFamily::Constant { value: 0.0 },
            offspring: OffspringFamily::deterministic(1),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if self.action_dim != 1 && self.action_dim != self.dim {
            return Err(Error::Config(format!(
                "action dimension must be 1 or {}, got {}",
                self.dim, self.action_dim
            )));
        }
        if self.drift.offset.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: self.drift.offset.len(),
            });
        }
        if self.drift.saturation.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("drift saturation must be positive".into()));
        }
        match &self.offspring {
            OffspringFamily::Fixed { pmf } => check_pmf(pmf, f64::INFINITY, f64::INFINITY)?,
            OffspringFamily::Mixed { base, alt, .. } => {
                check_pmf(base, f64::INFINITY, f64::INFINITY)?;
                check_pmf(alt, f64::INFINITY, f64::INFINITY)?;
            }
        }
        let params = [
            self.drift.slope,
            self.drift.mass,
            self.drift.mean,
            self.drift.control,
            self.diffusion.level,
            self.diffusion.mass_coupling,
        ];
        if params.iter().chain(&self.drift.offset).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite coefficient parameter".into()));
        }
        debug_assert!(MAX_OFFSPRING >= 1);
        Ok(())
    }

    /// Wraps the family into a checked model, deriving `M1`, `M2`, the
    /// Lipschitz metadata and the growth tags from the parameters.
    pub fn spec(self, gamma_bar: f64) -> Result<ModelSpec> {
        self.validate()?;
        if let RateFamily::Constant { value } = self.rate {
            if !(0.0..=gamma_bar).contains(&value) {
                return Err(Error::Config(format!("constant rate {value} outside [0, {gamma_bar}]")));
            }
        }
        let (m1, m2) = self.offspring.moment_bounds();
        let d = &self.drift;
        let lipschitz = Lipschitz {
            drift: d.slope.abs() + d.mass.abs() + d.mean.abs() + d.control.abs(),
            diffusion: (self.diffusion.level * self.diffusion.mass_coupling).abs() * (self.dim as f64).sqrt(),
            rate: match self.rate {
                RateFamily::Constant { .. } => 0.0,
                RateFamily::Logistic {
                    slope, mass, control, ..
                } => gamma_bar * (slope.abs() + mass.abs() + control.abs()) / 4.0,
            },
            offspring: match &self.offspring {
                OffspringFamily::Fixed { .. } => 0.0,
                OffspringFamily::Mixed { slope, .. } => 2.0 * slope.abs() / 4.0,
            },
        };
        let linear = d.slope != 0.0 || d.mean != 0.0 || d.mass != 0.0;
        let (drift_growth, drift_bound) = match d.saturation {
            Some(s) => (Growth::Bounded, Some(s * (self.dim as f64).sqrt())),
            None if linear => (Growth::Linear, None),
            // constant offset plus a control term bounded by the action box
            None => (Growth::Bounded, None),
        };
        let sigma_sup = self.diffusion.level.abs() * (1.0 + self.diffusion.mass_coupling.abs()) * (self.dim as f64).sqrt();
        let assumptions = Assumptions {
            drift_growth,
            diffusion_growth: Growth::Bounded,
            drift_bound,
            diffusion_bound: Some(sigma_sup),
        };
        ModelSpec::new(
            Arc::new(Scaled { inner: self, gamma_bar }),
            gamma_bar,
            m1,
            m2,
            lipschitz,
            assumptions,
        )
    }
}
