//! Maps resolved configs onto the built-in coefficient, policy and cost
//! families.

use bmv_core::control::{CostSpec, Policy, PolicyFamily, QuadraticCost};
use bmv_core::dynamics::{
    DiffusionFamily, DriftFamily, FamilyModel, ModelSpec, OffspringFamily, RateFamily,
};

use crate::config::ResolvedConfig;
use crate::error::{HarnessError, Result};

/// A model together with its action box.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub family: FamilyModel,
    pub spec: ModelSpec,
    pub action_lo: Vec<f64>,
    pub action_hi: Vec<f64>,
}

impl BuiltModel {
    pub fn action_radius(&self) -> f64 {
        self.action_lo
            .iter()
            .zip(&self.action_hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Broadcasts a one-element list to length `n`.
fn sized(key: &str, v: &[f64], n: usize) -> Result<Vec<f64>> {
    match v.len() {
        len if len == n => Ok(v.to_vec()),
        1 => Ok(vec![v[0]; n]),
        len => Err(HarnessError::config(format!("key '{key}' has {len} entries, expected 1 or {n}"))),
    }
}

pub fn build_model(c: &ResolvedConfig) -> Result<BuiltModel> {
    let dim = c.count("dim")?;
    let action_dim = c.count("action_dim")?;
    if dim == 0 || action_dim == 0 {
        return Err(HarnessError::config("dim and action_dim must be positive"));
    }
    let action_lo = sized("action_lo", c.floats("action_lo"), action_dim)?;
    let action_hi = sized("action_hi", c.floats("action_hi"), action_dim)?;
    let rate = match c.str("rate.family") {
        "constant" => RateFamily::Constant {
            value: c.f64("rate.value"),
        },
        _ => RateFamily::Logistic {
            value: c.f64("rate.value"),
            slope: c.f64("rate.slope"),
            mass: c.f64("rate.mass"),
            control: c.f64("rate.control"),
        },
    };
    let pmf = c.floats("offspring.pmf").to_vec();
    let alt = c.floats("offspring.alt").to_vec();
    let offspring = if alt.is_empty() {
        OffspringFamily::Fixed { pmf }
    } else {
        OffspringFamily::Mixed {
            base: pmf,
            alt,
            value: c.f64("offspring.value"),
            slope: c.f64("offspring.slope"),
        }
    };
    let family = FamilyModel {
        dim,
        action_dim,
        drift: DriftFamily {
            offset: sized("drift.offset", c.floats("drift.offset"), dim)?,
            slope: c.f64("drift.slope"),
            mass: c.f64("drift.mass"),
            mean: c.f64("drift.mean"),
            control: c.f64("drift.control"),
            saturation: c.opt_f64("drift.saturation"),
        },
        diffusion: DiffusionFamily {
            level: c.f64("diffusion.level"),
            mass_coupling: c.f64("diffusion.mass_coupling"),
        },
        rate,
        offspring,
    };
    let spec = family.clone().spec(c.f64("gamma_bar"))?;
    Ok(BuiltModel {
        family,
        spec,
        action_lo,
        action_hi,
    })
}

pub fn build_policy(c: &ResolvedConfig, model: &BuiltModel) -> Result<Policy> {
    let family: PolicyFamily = c.str("family").parse()?;
    let n = model.spec.action_dim();
    let d = model.spec.dim();
    let lo = if c.floats("lo").is_empty() {
        model.action_lo.clone()
    } else {
        sized("lo", c.floats("lo"), n)?
    };
    let hi = if c.floats("hi").is_empty() {
        model.action_hi.clone()
    } else {
        sized("hi", c.floats("hi"), n)?
    };
    let params = if c.floats("params").is_empty() {
        vec![0.0; family.param_count(d, n)]
    } else {
        c.floats("params").to_vec()
    };
    Ok(Policy::new(family, d, params, lo, hi)?)
}

pub fn build_cost(c: &ResolvedConfig, model: &BuiltModel) -> Result<CostSpec> {
    Ok(QuadraticCost {
        action: c.f64("action"),
        state: c.f64("state"),
        constant: c.f64("constant"),
        terminal_state: c.f64("terminal_state"),
        terminal_constant: c.f64("terminal_constant"),
        cap: c.f64("cap"),
    }
    .spec(model.action_radius())?)
}
