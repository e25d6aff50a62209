use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::control::Policy;
use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, Configuration, Label};

use super::init::InitLaw;
use super::model::{select_offspring, ModelSpec};
use super::rng::{Channel, CounterRng};

/// A deterministic measure flow `t ↦ μ_t` used in place of the replica
/// average.
#[derive(Clone)]
pub struct FrozenFlow(pub Arc<dyn Fn(f64) -> AtomicMeasure + Send + Sync>);

impl fmt::Debug for FrozenFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FrozenFlow(..)")
    }
}

#[derive(Clone, Debug)]
pub enum Interaction {
    MeanField,
    Frozen(FrozenFlow),
}

/// Which configurations a run keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Recording {
    /// Keep every `stride`-th grid time; 0 keeps only the two endpoints.
    pub stride: usize,
    pub events: bool,
}

impl Default for Recording {
    fn default() -> Self {
        Self { stride: 0, events: true }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub interaction: Interaction,
    pub recording: Recording,
}

impl SimConfig {
    pub fn new(t0: f64, t_end: f64, dt: f64, replicas: usize, seed: u64) -> Self {
        Self {
            t0,
            t_end,
            dt,
            replicas,
            seed,
            interaction: Interaction::MeanField,
            recording: Recording::default(),
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.recording.stride = stride;
        self
    }

    /// Grid index of `t`: times are `key * dt`, so restarts land on the
    /// same lattice.
    pub fn key_of(&self, t: f64) -> Result<i64> {
        lattice_key(t, self.dt)
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<(i64, i64)> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.t0 <= self.t_end) {
            return Err(Error::Config(format!("need t0 <= T, got {} and {}", self.t0, self.t_end)));
        }
        if self.dt * model.gamma_bar >= 1.0 {
            return Err(Error::Config(format!(
                "dt * gamma_bar = {} must be below 1",
                self.dt * model.gamma_bar
            )));
        }
        if self.replicas == 0 {
            return Err(Error::Config("at least one replica is required".into()));
        }
        let start = self.key_of(self.t0)?;
        let end = self.key_of(self.t_end)?;
        Ok((start, end))
    }
}

pub(crate) fn lattice_key(t: f64, dt: f64) -> Result<i64> {
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::Config(format!("time {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as i64)
}

/// A branching or death event. `offspring = 0` is a death.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub step: i64,
    pub time: f64,
    pub replica: u32,
    #[serde(serialize_with = "serialize_label")]
    pub parent: Label,
    pub offspring: u32,
}

fn serialize_label<S: serde::Serializer>(l: &Label, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(l)
}

/// Hook called at every grid time, before the step that leaves it, and at
/// the terminal time. `mu` is the interaction measure in force.
pub trait StepObserver {
    fn observe(&mut self, key: i64, t: f64, mu: &AtomicMeasure, replicas: &[Configuration]) -> Result<()>;
}

impl StepObserver for () {
    fn observe(&mut self, _: i64, _: f64, _: &AtomicMeasure, _: &[Configuration]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PopulationPath {
    pub dim: usize,
    pub dt: f64,
    pub start_key: i64,
    pub end_key: i64,
    pub replicas: usize,
    pub seed: u64,
    snapshot_keys: Vec<i64>,
    snapshots: Vec<Vec<Configuration>>,
    /// Mass and first moment of `μ̂` at every grid time.
    pub mass: Vec<f64>,
    pub first_moment: Vec<Vec<f64>>,
    pub initial_count: Vec<u32>,
    pub final_count: Vec<u32>,
    /// Per replica: `sup_s #K_s` and `sup_s Σ_k |X^k_s|` over the grid.
    pub sup_count: Vec<u32>,
    pub sup_abs_sum: Vec<f64>,
    pub events: Vec<Event>,
}

impl PopulationPath {
    pub fn t0(&self) -> f64 {
        self.start_key as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.end_key as f64 * self.dt
    }

    pub fn steps(&self) -> usize {
        (self.end_key - self.start_key) as usize
    }

    pub fn grid_times(&self) -> Vec<f64> {
        (self.start_key..=self.end_key).map(|k| k as f64 * self.dt).collect()
    }

    pub fn recorded_times(&self) -> Vec<f64> {
        self.snapshot_keys.iter().map(|&k| k as f64 * self.dt).collect()
    }

    fn grid_index(&self, s: f64) -> Result<usize> {
        let k = lattice_key(s, self.dt).map_err(|_| Error::OffGrid(s))?;
        if k < self.start_key || k > self.end_key {
            return Err(Error::OffGrid(s));
        }
        Ok((k - self.start_key) as usize)
    }

    /// Configurations of all replicas at a recorded time.
    pub fn configurations(&self, s: f64) -> Result<&[Configuration]> {
        let k = self.start_key + self.grid_index(s)? as i64;
        let i = self.snapshot_keys.binary_search(&k).map_err(|_| Error::OffGrid(s))?;
        Ok(&self.snapshots[i])
    }

    pub fn final_configurations(&self) -> &[Configuration] {
        self.snapshots.last().expect("the terminal time is always recorded")
    }

    pub fn initial_configurations(&self) -> &[Configuration] {
        &self.snapshots[0]
    }

    /// `μ̂_s`: every particle of every replica with weight `1/M`.
    pub fn mean_measure(&self, s: f64) -> Result<AtomicMeasure> {
        Ok(empirical_mean(self.dim, self.configurations(s)?))
    }

    pub fn mass_at(&self, s: f64) -> Result<f64> {
        Ok(self.mass[self.grid_index(s)?])
    }

    /// Replica mean of `<Z_s, φ>` and its standard error.
    pub fn functional(&self, s: f64, phi: impl Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
        let values: Vec<f64> = self.configurations(s)?.iter().map(|c| c.sum(&phi)).collect();
        Ok(mean_stderr(&values))
    }
}

pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn empirical_mean(dim: usize, replicas: &[Configuration]) -> AtomicMeasure {
    let total: usize = replicas.iter().map(Configuration::len).sum();
    let mut positions = Vec::with_capacity(total * dim);
    for c in replicas {
        positions.extend_from_slice(c.positions_flat());
    }
    let w = 1.0 / replicas.len() as f64;
    AtomicMeasure::from_parts_unchecked(dim, positions, vec![w; total])
}

pub fn simulate(model: &ModelSpec, policy: &Policy, init: &InitLaw, cfg: &SimConfig) -> Result<PopulationPath> {
    simulate_observed(model, policy, init, cfg, &mut ())
}

/// The barrier loop: rebuild `μ̂` from all replicas, hand it to the
/// observer, then advance every replica one step in parallel.
pub fn simulate_observed(
    model: &ModelSpec,
    policy: &Policy,
    init: &InitLaw,
    cfg: &SimConfig,
    observer: &mut dyn StepObserver,
) -> Result<PopulationPath> {
    let (start, end) = cfg.validate(model)?;
    let dim = model.dim();
    if policy.state_dim != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: policy.state_dim,
        });
    }
    if policy.action_dim() != model.action_dim() {
        return Err(Error::Config(format!(
            "policy has {} action components, model expects {}",
            policy.action_dim(),
            model.action_dim()
        )));
    }
    init.validate(dim, cfg.replicas)?;
    let mut configs: Vec<Configuration> = (0..cfg.replicas)
        .map(|r| init.sample(cfg.seed, r, start))
        .collect::<Result<_>>()?;

    let m = cfg.replicas;
    let steps = (end - start) as usize;
    let mut path = PopulationPath {
        dim,
        dt: cfg.dt,
        start_key: start,
        end_key: end,
        replicas: m,
        seed: cfg.seed,
        snapshot_keys: Vec::new(),
        snapshots: Vec::new(),
        mass: Vec::with_capacity(steps + 1),
        first_moment: Vec::with_capacity(steps + 1),
        initial_count: configs.iter().map(|c| c.len() as u32).collect(),
        final_count: Vec::new(),
        sup_count: vec![0; m],
        sup_abs_sum: vec![0.0; m],
        events: Vec::new(),
    };

    for key in start..=end {
        let t = key as f64 * cfg.dt;
        let count: usize = configs.iter().map(Configuration::len).sum();
        path.mass.push(count as f64 / m as f64);
        let mut first = vec![0.0; dim];
        for c in &configs {
            for x in c.positions_flat().chunks_exact(dim) {
                first.iter_mut().zip(x).for_each(|(f, v)| *f += v);
            }
        }
        first.iter_mut().for_each(|f| *f /= m as f64);
        path.first_moment.push(first);
        for (r, c) in configs.iter().enumerate() {
            path.sup_count[r] = path.sup_count[r].max(c.len() as u32);
            let s: f64 = c.positions_flat().chunks_exact(dim).map(norm).sum();
            path.sup_abs_sum[r] = path.sup_abs_sum[r].max(s);
        }
        let offset = (key - start) as usize;
        let keep = key == start
            || key == end
            || (cfg.recording.stride > 0 && offset % cfg.recording.stride == 0);
        if keep {
            path.snapshot_keys.push(key);
            path.snapshots.push(configs.clone());
        }

        let mu = match &cfg.interaction {
            Interaction::MeanField => empirical_mean(dim, &configs),
            Interaction::Frozen(flow) => {
                let mu = (flow.0)(t);
                if mu.dim() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: mu.dim(),
                    });
                }
                mu
            }
        };
        observer.observe(key, t, &mu, &configs)?;
        if key == end {
            break;
        }

        let stepper = Stepper {
            model,
            policy,
            mu: &mu,
            seed: cfg.seed,
            dt: cfg.dt,
            key,
            record_events: cfg.recording.events,
        };
        let results: Vec<Result<(Configuration, Vec<Event>)>> = configs
            .par_iter()
            .enumerate()
            .map(|(r, c)| stepper.advance(r, c))
            .collect();
        for (r, res) in results.into_iter().enumerate() {
            let (next, events) = res?;
            configs[r] = next;
            path.events.extend(events);
        }
    }
    path.final_count = configs.iter().map(|c| c.len() as u32).collect();
    Ok(path)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct Stepper<'a> {
    model: &'a ModelSpec,
    policy: &'a Policy,
    mu: &'a AtomicMeasure,
    seed: u64,
    dt: f64,
    key: i64,
    record_events: bool,
}

impl Stepper<'_> {
    fn advance(&self, replica: usize, config: &Configuration) -> Result<(Configuration, Vec<Event>)> {
        let d = config.dim();
        let t = self.key as f64 * self.dt;
        let sqrt_dt = self.dt.sqrt();
        let gamma_bar = self.model.gamma_bar;
        let mut labels = Vec::with_capacity(config.len());
        let mut positions = Vec::with_capacity(config.len() * d);
        let mut events = Vec::new();
        let mut a = vec![0.0; self.policy.action_dim()];
        let mut b = vec![0.0; d];
        let mut sigma = vec![0.0; d * d];
        let mut z = vec![0.0; d];
        let mut next = vec![0.0; d];
        let mut pmf = Vec::new();
        let r = replica as u64;

        for (label, x) in config.particles() {
            self.policy.action(t, x, &mut a);
            self.model.drift(t, x, self.mu, &a, &mut b);
            self.model.diffusion(t, x, self.mu, &a, &mut sigma);
            if sigma.iter().any(|&s| s != 0.0) {
                let mut motion = CounterRng::at(self.seed, r, label, Channel::Motion, self.key);
                for zi in z.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut motion);
                    *zi = n * sqrt_dt;
                }
            } else {
                z.iter_mut().for_each(|v| *v = 0.0);
            }
            for i in 0..d {
                let noise: f64 = (0..d).map(|j| sigma[i * d + j] * z[j]).sum();
                next[i] = x[i] + b[i] * self.dt + noise;
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    step: (self.key) as usize,
                    time: t,
                    detail: format!("replica {replica}, particle {label}: position {next:?}"),
                });
            }

            let mut children = 1usize;
            let mut ev = CounterRng::at(self.seed, r, label, Channel::Event, self.key);
            if ev.uniform() < gamma_bar * self.dt {
                let z1 = gamma_bar * ev.uniform();
                let gamma = self.model.rate(t, x, self.mu, &a)?;
                if z1 < gamma {
                    self.model.offspring(t, x, self.mu, &a, &mut pmf)?;
                    let z2 = CounterRng::at(self.seed, r, label, Channel::Offspring, self.key).uniform();
                    children = select_offspring(&pmf, z2);
                    if self.record_events {
                        events.push(Event {
                            step: self.key,
                            time: t,
                            replica: replica as u32,
                            parent: label.clone(),
                            offspring: children as u32,
                        });
                    }
                    for i in 1..=children {
                        labels.push(label.child(i as u32));
                        positions.extend_from_slice(&next);
                    }
                    continue;
                }
            }
            debug_assert_eq!(children, 1);
            labels.push(label.clone());
            positions.extend_from_slice(&next);
        }
        Ok((Configuration::from_sorted_parts(d, labels, positions), events))
    }
}
