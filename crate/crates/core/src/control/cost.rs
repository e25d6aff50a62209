use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

/// Running cost `L(t, x, m, a)` and terminal cost `g(x, m)`.
pub trait CostFunctions: Send + Sync {
    fn running(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> f64;
    fn terminal(&self, x: &[f64], m: &AtomicMeasure) -> f64;
}

/// Cost functions with declared bounds `|L| ≤ C_L`, `|g| ≤ C_g`, checked at
/// every evaluation.
#[derive(Clone)]
pub struct CostSpec {
    funcs: Arc<dyn CostFunctions>,
    pub c_l: f64,
    pub c_g: f64,
    pub lip_l: f64,
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostSpec")
            .field("c_l", &self.c_l)
            .field("c_g", &self.c_g)
            .field("lip_l", &self.lip_l)
            .finish()
    }
}

impl CostSpec {
    pub fn new(funcs: Arc<dyn CostFunctions>, c_l: f64, c_g: f64, lip_l: f64) -> Result<Self> {
        if !(c_l >= 0.0 && c_g >= 0.0 && lip_l >= 0.0) {
            return Err(Error::Config("cost bounds must be nonnegative".into()));
        }
        Ok(Self { funcs, c_l, c_g, lip_l })
    }

    pub fn running(&self, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> Result<f64> {
        let v = self.funcs.running(t, x, m, a);
        if !(v.abs() <= self.c_l) {
            return Err(Error::Bound(format!("running cost {v} exceeds C_L = {}", self.c_l)));
        }
        Ok(v)
    }

    pub fn terminal(&self, x: &[f64], m: &AtomicMeasure) -> Result<f64> {
        let v = self.funcs.terminal(x, m);
        if !(v.abs() <= self.c_g) {
            return Err(Error::Bound(format!("terminal cost {v} exceeds C_g = {}", self.c_g)));
        }
        Ok(v)
    }

    /// `<g(·, m), m>`.
    pub fn terminal_integral(&self, m: &AtomicMeasure) -> Result<f64> {
        let mut total = 0.0;
        for (x, w) in m.atoms() {
            total += w * self.terminal(x, m)?;
        }
        Ok(total)
    }
}

/// `L = action |a|^2 + state (|x|^2 ∧ cap) + constant`,
/// `g = terminal_state (|x|^2 ∧ cap) + terminal_constant`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticCost {
    pub action: f64,
    pub state: f64,
    pub constant: f64,
    pub terminal_state: f64,
    pub terminal_constant: f64,
    pub cap: f64,
}

impl QuadraticCost {
    pub fn zero() -> Self {
        Self {
            action: 0.0,
            state: 0.0,
            constant: 0.0,
            terminal_state: 0.0,
            terminal_constant: 0.0,
            cap: 1e4,
        }
    }

    /// Declares `C_L`, `C_g` and `L_L` for actions in a box whose points have
    /// norm at most `action_radius`.
    pub fn spec(self, action_radius: f64) -> Result<CostSpec> {
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return Err(Error::Config("cost cap must be positive and finite".into()));
        }
        let c_l = self.action.abs() * action_radius * action_radius + self.state.abs() * self.cap + self.constant.abs();
        let c_g = self.terminal_state.abs() * self.cap + self.terminal_constant.abs();
        let lip_l = 2.0 * (self.action.abs() * action_radius + self.state.abs() * self.cap.sqrt());
        CostSpec::new(Arc::new(self), c_l, c_g, lip_l)
    }
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl CostFunctions for QuadraticCost {
    fn running(&self, _t: f64, x: &[f64], _m: &AtomicMeasure, a: &[f64]) -> f64 {
        self.action * sq(a) + self.state * sq(x).min(self.cap) + self.constant
    }

    fn terminal(&self, x: &[f64], _m: &AtomicMeasure) -> f64 {
        self.terminal_state * sq(x).min(self.cap) + self.terminal_constant
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_enforced() {
        let spec = QuadraticCost {
            action: 1.0,
            ..QuadraticCost::zero()
        }
        .spec(1.0)
        .unwrap();
        let m = AtomicMeasure::zero(1);
        assert_eq!(spec.running(0.0, &[0.0], &m, &[0.5]).unwrap(), 0.25);
        assert!(matches!(spec.running(0.0, &[0.0], &m, &[2.0]), Err(Error::Bound(_))));
    }

    #[test]
    fn terminal_integral_on_atoms() {
        let spec = QuadraticCost {
            terminal_state: 1.0,
            ..QuadraticCost::zero()
        }
        .spec(1.0)
        .unwrap();
        let m = AtomicMeasure::new(1, vec![(vec![1.0], 2.0), (vec![3.0], 0.5)]).unwrap();
        assert_eq!(spec.terminal_integral(&m).unwrap(), 2.0 + 4.5);
    }
}
