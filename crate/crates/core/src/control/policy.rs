use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyFamily {
    /// `α(t, x) = c`.
    Constant,
    /// `α(t, x) = clamp(c + K x)`.
    AffineClamped,
    /// `α(t, x) = clamp(c + W tanh(x))`, tanh taken coordinatewise.
    TanhFeatures,
}

impl PolicyFamily {
    /// Number of parameters for state dimension `d` and action dimension `n`.
    pub fn param_count(self, d: usize, n: usize) -> usize {
        match self {
            PolicyFamily::Constant => n,
            PolicyFamily::AffineClamped | PolicyFamily::TanhFeatures => n + n * d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyFamily::Constant => "constant",
            PolicyFamily::AffineClamped => "affine_clamped",
            PolicyFamily::TanhFeatures => "tanh_features",
        }
    }
}

impl std::str::FromStr for PolicyFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(PolicyFamily::Constant),
            "affine_clamped" => Ok(PolicyFamily::AffineClamped),
            "tanh_features" => Ok(PolicyFamily::TanhFeatures),
            other => Err(Error::Config(format!("unknown policy family {other:?}"))),
        }
    }
}

/// A box-valued closed-loop control. Parameters are `c` (length `n`)
/// followed, for the two state-dependent families, by the `n × d` matrix
/// row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Policy {
    pub family: PolicyFamily,
    pub state_dim: usize,
    pub params: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Policy {
    pub fn new(family: PolicyFamily, state_dim: usize, params: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = lo.len();
        if n == 0 || hi.len() != n {
            return Err(Error::Config("action box bounds must be nonempty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::Config("action box needs finite lo <= hi".into()));
        }
        let want = family.param_count(state_dim, n);
        if params.len() != want {
            return Err(Error::Config(format!(
                "{} policy needs {want} parameters, got {}",
                family.name(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite policy parameter".into()));
        }
        Ok(Self {
            family,
            state_dim,
            params,
            lo,
            hi,
        })
    }

    pub fn constant(action: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>, state_dim: usize) -> Result<Self> {
        Self::new(PolicyFamily::Constant, state_dim, action, lo, hi)
    }

    /// The constant policy at zero, clamped into a symmetric box `[-r, r]^n`.
    pub fn zero(state_dim: usize, action_dim: usize, radius: f64) -> Self {
        Self::new(
            PolicyFamily::Constant,
            state_dim,
            vec![0.0; action_dim],
            vec![-radius; action_dim],
            vec![radius; action_dim],
        )
        .expect("zero policy is always valid")
    }

    pub fn action_dim(&self) -> usize {
        self.lo.len()
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::new(self.family, self.state_dim, params, self.lo.clone(), self.hi.clone())
    }

    /// Writes `α(t, x)` into `out`; the clamp into the box is part of the
    /// evaluation.
    pub fn action(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let n = self.action_dim();
        let d = self.state_dim;
        for j in 0..n {
            let mut v = self.params[j];
            match self.family {
                PolicyFamily::Constant => {}
                PolicyFamily::AffineClamped => {
                    for i in 0..d {
                        v += self.params[n + j * d + i] * x[i];
                    }
                }
                PolicyFamily::TanhFeatures => {
                    for i in 0..d {
                        v += self.params[n + j * d + i] * x[i].tanh();
                    }
                }
            }
            out[j] = v.clamp(self.lo[j], self.hi[j]);
        }
    }

    /// Certified Lipschitz constant in `x`: the Frobenius norm of the gain
    /// matrix bounds its operator norm, and tanh and the clamp are
    /// 1-Lipschitz.
    pub fn lipschitz(&self) -> f64 {
        match self.family {
            PolicyFamily::Constant => 0.0,
            _ => self.params[self.action_dim()..].iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Certified growth constant: `|α(t, x)| ≤ growth (1 + |x|)`.
    pub fn growth(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_into_box() {
        let p = Policy::new(PolicyFamily::AffineClamped, 1, vec![0.5, 2.0], vec![-1.0], vec![1.0]).unwrap();
        let mut a = [0.0];
        p.action(0.0, &[3.0], &mut a);
        assert_eq!(a[0], 1.0);
        p.action(0.0, &[-0.1], &mut a);
        assert!((a[0] - 0.3).abs() < 1e-15);
        p.action(0.0, &[-9.0], &mut a);
        assert_eq!(a[0], -1.0);
    }

    #[test]
    fn rejects_wrong_parameter_count() {
        assert!(Policy::new(PolicyFamily::TanhFeatures, 2, vec![0.0; 2], vec![-1.0], vec![1.0]).is_err());
        assert!(Policy::new(PolicyFamily::Constant, 2, vec![0.0], vec![1.0], vec![-1.0]).is_err());
    }
}
