//! Truncated Wasserstein-1 distance between finite measures of unequal mass.
//!
//! Ground cost `ρ(x, y) = |x - y| ∧ 1`, extended by a cemetery point `∂` with
//! `ρ(x, ∂) = ρ(x, x0) + 1` and `ρ(∂, ∂) = 0`. Both measures are padded at
//! `∂` to a common mass and transported exactly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{check_dims, euclid, AtomicMeasure};
use crate::metrics::transport::solve_transport;

pub fn truncated_cost(x: &[f64], y: &[f64]) -> f64 {
    euclid(x, y).min(1.0)
}

pub fn cemetery_cost(x: &[f64], base: &[f64]) -> f64 {
    truncated_cost(x, base) + 1.0
}

fn check_base(m: &AtomicMeasure, base: &[f64]) -> Result<()> {
    if base.len() != m.dim() {
        return Err(Error::Dimension {
            expected: m.dim(),
            got: base.len(),
        });
    }
    Ok(())
}

/// `W̄_1(m1, m2)` with padding at the smallest admissible level.
pub fn truncated_w1(m1: &AtomicMeasure, m2: &AtomicMeasure, base: &[f64]) -> Result<f64> {
    let level = m1.mass().max(m2.mass());
    truncated_w1_padded(m1, m2, base, level)
}

/// `W̄_1(m1, m2)` computed on the instance padded to total mass `level`.
///
/// Mass that both padded measures hold at `∂` is left in place before the
/// transport is solved; for a metric cost this does not change the optimum,
/// and it makes the instance itself independent of `level`.
pub fn truncated_w1_padded(m1: &AtomicMeasure, m2: &AtomicMeasure, base: &[f64], level: f64) -> Result<f64> {
    check_dims(m1, m2)?;
    check_base(m1, base)?;
    if level < m1.mass().max(m2.mass()) {
        return Err(Error::Measure(format!(
            "padding level {level} below the larger mass {}",
            m1.mass().max(m2.mass())
        )));
    }
    let pad1 = level - m1.mass();
    let pad2 = level - m2.mass();
    let shared = pad1.min(pad2);
    let (pad1, pad2) = (pad1 - shared, pad2 - shared);

    let a = m1.normalized();
    let b = m2.normalized();
    let mut supply: Vec<f64> = a.weights().to_vec();
    let mut demand: Vec<f64> = b.weights().to_vec();
    let src_cemetery = pad1 > 0.0;
    let dst_cemetery = pad2 > 0.0;
    if src_cemetery {
        supply.push(pad1);
    }
    if dst_cemetery {
        demand.push(pad2);
    }
    let (na, nb) = (a.len(), b.len());
    let plan = solve_transport(&supply, &demand, |i, j| match (i < na, j < nb) {
        (true, true) => truncated_cost(a.position(i), b.position(j)),
        (true, false) => cemetery_cost(a.position(i), base),
        (false, true) => cemetery_cost(b.position(j), base),
        (false, false) => 0.0,
    });
    Ok(plan.cost)
}

/// Exact `W̄_1` for d = 1 through its dual on a path graph.
///
/// On the sorted support (with `x0` added) the metric `ρ` extended by `∂` is the
/// shortest-path metric of a graph made of the line segments, a hub joined
/// to every node at cost 1/2, and `∂` hanging off `x0` at cost 1. Eliminating
/// the hub and `∂` leaves
/// `W̄_1 = |m1(R) - m2(R)| + max Σ_i e_i φ_i` over `|φ_i| ≤ 1/2`,
/// `|φ_{i+1} - φ_i| ≤ z_{i+1} - z_i`, which is solved by a forward pass over
/// concave piecewise-linear value functions.
pub fn truncated_w1_line(m1: &AtomicMeasure, m2: &AtomicMeasure, base: f64) -> Result<f64> {
    check_dims(m1, m2)?;
    if m1.dim() != 1 {
        return Err(Error::Scheme("line solver requires d = 1".into()));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(m1.len() + m2.len() + 1);
    pts.extend(m1.atoms().map(|(x, w)| (x[0], w)));
    pts.extend(m2.atoms().map(|(x, w)| (x[0], -w)));
    let gap = m2.mass() - m1.mass();
    pts.push((base, gap));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (x, e) in pts {
        match nodes.last_mut() {
            Some(last) if last.0 == x => last.1 += e,
            _ => nodes.push((x, e)),
        }
    }
    let mut value = ConcavePiecewise::linear(nodes[0].1);
    for w in nodes.windows(2) {
        value.window_max(w[1].0 - w[0].0);
        value.add_linear(w[1].1);
    }
    Ok(gap.abs() + value.maximum())
}

/// Concave piecewise-linear function on [-1/2, 1/2].
struct ConcavePiecewise {
    left_value: f64,
    breaks: Vec<f64>,
    slopes: Vec<f64>,
}

const HALF: f64 = 0.5;

impl ConcavePiecewise {
    fn linear(slope: f64) -> Self {
        Self {
            left_value: -HALF * slope,
            breaks: Vec::new(),
            slopes: vec![slope],
        }
    }

    fn add_linear(&mut self, slope: f64) {
        self.left_value -= HALF * slope;
        self.slopes.iter_mut().for_each(|s| *s += slope);
    }

    fn eval(&self, x: f64) -> f64 {
        let mut v = self.left_value;
        let mut left = -HALF;
        for (k, &s) in self.slopes.iter().enumerate() {
            let right = self.breaks.get(k).copied().unwrap_or(HALF);
            if x <= right {
                return v + s * (x - left);
            }
            v += s * (right - left);
            left = right;
        }
        v
    }

    /// Left and right ends of the set of maximisers.
    fn argmax_interval(&self) -> (f64, f64) {
        let seg_left = |k: usize| if k == 0 { -HALF } else { self.breaks[k - 1] };
        let seg_right = |k: usize| self.breaks.get(k).copied().unwrap_or(HALF);
        let p = match self.slopes.iter().position(|&s| s <= 0.0) {
            Some(k) => seg_left(k),
            None => HALF,
        };
        let q = match self.slopes.iter().rposition(|&s| s >= 0.0) {
            Some(k) => seg_right(k),
            None => -HALF,
        };
        (p, q.max(p))
    }

    fn maximum(&self) -> f64 {
        self.eval(self.argmax_interval().0)
    }

    /// `f ← x ↦ max { f(y) : |y - x| ≤ g, y ∈ [-1/2, 1/2] }`.
    fn window_max(&mut self, g: f64) {
        let (p, q) = self.argmax_interval();
        let top = self.eval(p);
        let new_left = if -HALF + g <= p { self.eval(-HALF + g) } else { top };

        let mut breaks = Vec::with_capacity(self.breaks.len() + 2);
        let mut slopes = Vec::with_capacity(self.slopes.len() + 2);
        // increasing part, shifted left
        for (k, &s) in self.slopes.iter().enumerate() {
            if s <= 0.0 {
                break;
            }
            slopes.push(s);
            breaks.push(self.breaks.get(k).copied().unwrap_or(HALF).min(p) - g);
        }
        slopes.push(0.0);
        // decreasing part, shifted right
        let first_neg = self.slopes.iter().rposition(|&s| s >= 0.0).map_or(0, |k| k + 1);
        if first_neg < self.slopes.len() {
            breaks.push(q + g);
            for k in first_neg..self.slopes.len() {
                slopes.push(self.slopes[k]);
                if k + 1 < self.slopes.len() {
                    breaks.push(self.breaks[k] + g);
                }
            }
        }
        // clip to (-1/2, 1/2)
        let lo = breaks.iter().take_while(|&&b| b <= -HALF).count();
        let hi = breaks.iter().take_while(|&&b| b < HALF).count();
        self.breaks = breaks[lo..hi].to_vec();
        self.slopes = slopes[lo..=hi].to_vec();
        self.left_value = new_left;
    }
}

/// Picks the line solver for d = 1 and the transport solver otherwise.
pub fn truncated_w1_auto(m1: &AtomicMeasure, m2: &AtomicMeasure, base: &[f64]) -> Result<f64> {
    check_dims(m1, m2)?;
    check_base(m1, base)?;
    if m1.dim() == 1 {
        truncated_w1_line(m1, m2, base[0])
    } else {
        truncated_w1(m1, m2, base)
    }
}

/// A test function for the dual bound, with a certified Lipschitz constant
/// for `ρ` and a point where it vanishes.
#[derive(Clone)]
pub struct TrialFunction {
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    lipschitz: f64,
    anchor: Vec<f64>,
}

impl std::fmt::Debug for TrialFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrialFunction")
            .field("lipschitz", &self.lipschitz)
            .field("anchor", &self.anchor)
            .finish()
    }
}

impl TrialFunction {
    pub fn new<F>(f: F, lipschitz: f64, anchor: Vec<f64>) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz.is_finite() && (0.0..=1.0).contains(&lipschitz)) {
            return Err(Error::Uncertified(format!("Lipschitz constant {lipschitz} exceeds 1")));
        }
        let at_anchor = f(&anchor);
        if at_anchor.abs() > 1e-12 {
            return Err(Error::Uncertified(format!("value {at_anchor} at the declared zero")));
        }
        Ok(Self {
            f: Arc::new(f),
            lipschitz,
            anchor,
        })
    }

    /// `x ↦ ρ(x, p)`.
    pub fn truncated_distance_to(p: Vec<f64>) -> Self {
        let q = p.clone();
        Self {
            f: Arc::new(move |x| truncated_cost(x, &q)),
            lipschitz: 1.0,
            anchor: p,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }
}

/// Dual lower bound `max_φ |<m1 - m2, φ - φ(x0)>| + |m1(R) - m2(R)|`.
///
/// Trials are re-anchored at the cemetery base point `x0`; without this the
/// bound can exceed the primal value (δ_0 against the null measure with
/// `φ = 1 - (|x| ∧ 1)` would give 2 against a distance of 1).
pub fn w1_dual_lower_bound(
    m1: &AtomicMeasure,
    m2: &AtomicMeasure,
    trials: &[TrialFunction],
    base: &[f64],
) -> Result<f64> {
    check_dims(m1, m2)?;
    check_base(m1, base)?;
    let gap = m1.mass() - m2.mass();
    let mut best = 0.0f64;
    for t in trials {
        if t.anchor.len() != m1.dim() {
            return Err(Error::Dimension {
                expected: m1.dim(),
                got: t.anchor.len(),
            });
        }
        let shift = t.eval(base);
        let v = m1.integrate(|x| t.eval(x)) - m2.integrate(|x| t.eval(x)) - shift * gap;
        best = best.max(v.abs());
    }
    Ok(best + gap.abs())
}
