use serde::Serialize;

use crate::control::{CostSpec, Policy};
use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

use super::cylinder::CylinderFunctional;

/// `½ Tr(σσᵀ H)` for row-major `d × d` matrices.
pub(crate) fn half_trace(sigma: &[f64], h: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            let a: f64 = (0..d).map(|k| sigma[i * d + k] * sigma[j * d + k]).sum();
            s += a * h[j * d + i];
        }
    }
    0.5 * s
}

/// Per-atom coefficients under a fixed action.
pub(crate) struct LocalCoefficients {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    /// `Γ = γ (Σ ℓ p_ℓ - 1)`.
    pub growth_rate: f64,
    pub rate: f64,
    pub mean_offspring: f64,
}

pub(crate) fn local(model: &ModelSpec, t: f64, x: &[f64], m: &AtomicMeasure, a: &[f64]) -> Result<LocalCoefficients> {
    let d = model.dim();
    let mut drift = vec![0.0; d];
    let mut diffusion = vec![0.0; d * d];
    model.drift(t, x, m, a, &mut drift);
    model.diffusion(t, x, m, a, &mut diffusion);
    let rate = model.rate(t, x, m, a)?;
    let mean_offspring = model.mean_offspring(t, x, m, a)?;
    Ok(LocalCoefficients {
        drift,
        diffusion,
        growth_rate: rate * (mean_offspring - 1.0),
        rate,
        mean_offspring,
    })
}

fn check_dims(model: &ModelSpec, m: &AtomicMeasure, functional: &CylinderFunctional) -> Result<()> {
    for got in [m.dim(), functional.dim()] {
        if got != model.dim() {
            return Err(Error::Dimension {
                expected: model.dim(),
                got,
            });
        }
    }
    Ok(())
}

/// `𝒢F(t, m) = <b·∂_xδF + ½Tr(σσᵀ∂²_xxδF) + γ Σ(ℓ-1)p_ℓ δF, m>` with the
/// coefficients evaluated at `m` and the policy's action at each atom.
pub fn generator_apply(
    model: &ModelSpec,
    policy: &Policy,
    functional: &CylinderFunctional,
    t: f64,
    m: &AtomicMeasure,
) -> Result<f64> {
    check_dims(model, m, functional)?;
    let d = model.dim();
    let w = functional.weights(t, m)?;
    let mut a = vec![0.0; policy.action_dim()];
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut total = 0.0;
    for (x, mass) in m.atoms() {
        policy.action(t, x, &mut a);
        let c = local(model, t, x, m, &a)?;
        functional.lfd_grad_with(&w, x, &mut g);
        functional.lfd_hess_with(&w, x, &mut h);
        let transport: f64 = c.drift.iter().zip(&g).map(|(b, v)| b * v).sum();
        let branching = if c.growth_rate == 0.0 {
            0.0
        } else {
            c.growth_rate * functional.lfd_with(&w, x)
        };
        total += mass * (transport + half_trace(&c.diffusion, &h, d) + branching);
    }
    Ok(total)
}

/// Finite set of constant actions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionGrid {
    pub points: Vec<Vec<f64>>,
}

impl ActionGrid {
    pub const DEFAULT_PER_AXIS: usize = 33;

    /// Tensor grid with `per_axis` equispaced points on each side of the box.
    pub fn boxed(lo: &[f64], hi: &[f64], per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::Config("action box must satisfy lo <= hi componentwise".into()));
        }
        let axes: Vec<Vec<f64>> = lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| match per_axis {
                0 => Vec::new(),
                1 => vec![0.5 * (l + h)],
                n => (0..n).map(|i| l + (h - l) * i as f64 / (n - 1) as f64).collect(),
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .iter()
                .flat_map(|p| {
                    axis.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        Ok(Self { points })
    }
}

/// Test fields `p: R^d → R^d`, `q: R^d → R^{d×d}`, `r: R^d → R`.
pub struct Fields<'a> {
    pub p: &'a dyn Fn(&[f64], &mut [f64]),
    pub q: &'a dyn Fn(&[f64], &mut [f64]),
    pub r: &'a dyn Fn(&[f64]) -> f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonianValue {
    pub value: f64,
    pub argmin: Vec<f64>,
}

/// `min_a <L(t,·,m,a) + b·p + ½Tr(σσᵀq) + Γ r, m>` over the constant actions
/// of the grid. Never below the infimum over feedback actions.
pub fn hamiltonian(
    model: &ModelSpec,
    cost: &CostSpec,
    t: f64,
    m: &AtomicMeasure,
    fields: &Fields<'_>,
    grid: &ActionGrid,
) -> Result<HamiltonianValue> {
    if grid.points.is_empty() {
        return Err(Error::Config("empty action grid".into()));
    }
    if m.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: m.dim(),
        });
    }
    let d = model.dim();
    // fields do not depend on the action
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d * d];
    let at_atoms: Vec<(Vec<f64>, Vec<f64>, f64)> = m
        .atoms()
        .map(|(x, _)| {
            (fields.p)(x, &mut p);
            (fields.q)(x, &mut q);
            (p.clone(), q.clone(), (fields.r)(x))
        })
        .collect();
    let mut best: Option<HamiltonianValue> = None;
    for a in &grid.points {
        if a.len() != model.action_dim() {
            return Err(Error::Dimension {
                expected: model.action_dim(),
                got: a.len(),
            });
        }
        let mut total = 0.0;
        for ((x, mass), (p, q, r)) in m.atoms().zip(&at_atoms) {
            let c = local(model, t, x, m, a)?;
            let transport: f64 = c.drift.iter().zip(p).map(|(b, v)| b * v).sum();
            total += mass * (cost.running(t, x, m, a)? + transport + half_trace(&c.diffusion, q, d) + c.growth_rate * r);
        }
        if best.as_ref().is_none_or(|b| total < b.value) {
            best = Some(HamiltonianValue {
                value: total,
                argmin: a.clone(),
            });
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// `L_G` such that perturbing `(p, q, r)` by fields of sup norm `η` moves the
/// Hamiltonian by at most `L_G <1 + |x|, m> 3η`. Needs bounded coefficients.
pub fn hamiltonian_lipschitz(model: &ModelSpec) -> Result<f64> {
    let (Some(b), Some(s)) = (model.assumptions.drift_bound, model.assumptions.diffusion_bound) else {
        return Err(Error::Config("L_G needs declared bounds on drift and diffusion".into()));
    };
    let branching = model.gamma_bar * 1f64.max(model.m1 - 1.0);
    Ok(b.max(0.5 * s * s).max(branching))
}
