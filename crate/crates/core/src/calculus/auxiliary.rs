use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

/// `ϑ(t, m) = e^{-Lt} (<sqrt(1 + |x|^2), m> + m(R^d)^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuxFunction {
    pub l_coeff: f64,
}

impl AuxFunction {
    pub fn new(l_coeff: f64) -> Result<Self> {
        if !(l_coeff > 0.0 && l_coeff.is_finite()) {
            return Err(Error::Config(format!("L must be positive, got {l_coeff}")));
        }
        Ok(Self { l_coeff })
    }

    pub fn value(&self, t: f64, m: &AtomicMeasure) -> f64 {
        let q = m.integrate(|x| (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt());
        (-self.l_coeff * t).exp() * (q + m.mass() * m.mass())
    }

    /// `δ_μϑ(t, m)(x) = e^{-Lt} (sqrt(1 + |x|^2) + 2 m(R^d))`.
    pub fn derivative(&self, t: f64, m: &AtomicMeasure, x: &[f64]) -> f64 {
        let q = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        (-self.l_coeff * t).exp() * (q + 2.0 * m.mass())
    }

    /// Largest mass compatible with `ϑ ≤ c1 + c2 m(R^d)` on `[0, T]`: the
    /// positive root of `M^2 + (1 - c2 e^{LT}) M - c1 e^{LT}`.
    pub fn mass_cap(&self, c1: f64, c2: f64, horizon: f64) -> f64 {
        let e = (self.l_coeff * horizon).exp();
        let b = 1.0 - c2 * e;
        let c = -c1 * e;
        let disc = (b * b - 4.0 * c).sqrt();
        // stable form of the larger root
        if b <= 0.0 {
            0.5 * (-b + disc)
        } else {
            -2.0 * c / (b + disc)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SublevelReport {
    pub samples: usize,
    pub members: usize,
    pub cap: f64,
    pub max_member_mass: f64,
    pub cap_violations: usize,
    pub tail_radius: f64,
    pub tail_violations: usize,
    pub holds: bool,
}

/// For every sample in `{ϑ ≤ c1 + c2 m(R^d)}` checks the mass cap and the
/// tail bound `m(|x| > R) ≤ e^{LT} (c1 + c2 cap) / R`. Times must lie in
/// `[0, horizon]`.
pub fn aux_sublevel_check(
    samples: &[(f64, AtomicMeasure)],
    c1: f64,
    c2: f64,
    aux: &AuxFunction,
    horizon: f64,
    tail_radius: f64,
) -> Result<SublevelReport> {
    if !(c1 >= 0.0 && c2 >= 0.0) {
        return Err(Error::Config("c1 and c2 must be nonnegative".into()));
    }
    if !(tail_radius > 0.0) {
        return Err(Error::Config("tail radius must be positive".into()));
    }
    let cap = aux.mass_cap(c1, c2, horizon);
    let tail_bound = (aux.l_coeff * horizon).exp() * (c1 + c2 * cap) / tail_radius;
    let mut report = SublevelReport {
        samples: samples.len(),
        members: 0,
        cap,
        max_member_mass: 0.0,
        cap_violations: 0,
        tail_radius,
        tail_violations: 0,
        holds: true,
    };
    for (t, m) in samples {
        if !(0.0..=horizon).contains(t) {
            return Err(Error::Config(format!("sample time {t} outside [0, {horizon}]")));
        }
        let mass = m.mass();
        if aux.value(*t, m) > c1 + c2 * mass {
            continue;
        }
        report.members += 1;
        report.max_member_mass = report.max_member_mass.max(mass);
        if mass > cap * (1.0 + 1e-12) {
            report.cap_violations += 1;
        }
        let tail = m.integrate(|x| if x.iter().map(|v| v * v).sum::<f64>().sqrt() > tail_radius { 1.0 } else { 0.0 });
        if tail > tail_bound * (1.0 + 1e-12) {
            report.tail_violations += 1;
        }
    }
    report.holds = report.cap_violations == 0 && report.tail_violations == 0;
    Ok(report)
}

/// Smallest `n` for which `n δ_0` leaves the sub-level set at time
/// `horizon`, located by bisection on the membership test itself.
pub fn exclusion_threshold(aux: &AuxFunction, c1: f64, c2: f64, horizon: f64) -> f64 {
    let outside = |n: f64| {
        let theta = (-aux.l_coeff * horizon).exp() * (n + n * n);
        theta > c1 + c2 * n
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !outside(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if outside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
