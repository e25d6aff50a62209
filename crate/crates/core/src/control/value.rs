use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::rng::{mix64, Channel, CounterRng};
use crate::dynamics::{
    empirical_mean, lattice_key, simulate_observed, Construction, InitLaw, ModelSpec, PopulationPath, SimConfig,
    StepObserver,
};
use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, Configuration, Label};

use super::cost::CostSpec;
use super::nelder_mead::{nelder_mead, SimplexOptions};
use super::policy::{Policy, PolicyFamily};

const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub running: f64,
    pub terminal: f64,
}

/// Standard error of the replica mean by resampling replicas.
pub fn bootstrap_stderr(values: &[f64], seed: u64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut rng = CounterRng::new(mix64(seed ^ 0x626f6f74));
    let means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..n {
                s += values[((rng.uniform() * n as f64) as usize).min(n - 1)];
            }
            s / n as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
}

struct CostObserver<'a> {
    policy: &'a Policy,
    cost: &'a CostSpec,
    dt: f64,
    end_key: i64,
    terminal: bool,
    running: Vec<f64>,
    final_cost: Vec<f64>,
}

impl StepObserver for CostObserver<'_> {
    fn observe(&mut self, key: i64, t: f64, mu: &AtomicMeasure, replicas: &[Configuration]) -> Result<()> {
        if self.running.is_empty() {
            self.running = vec![0.0; replicas.len()];
            self.final_cost = vec![0.0; replicas.len()];
        }
        let (policy, cost, dt) = (self.policy, self.cost, self.dt);
        if key < self.end_key {
            let parts: Vec<Result<f64>> = replicas
                .par_iter()
                .map(|c| {
                    let mut a = vec![0.0; policy.action_dim()];
                    let mut s = 0.0;
                    for (_, x) in c.particles() {
                        policy.action(t, x, &mut a);
                        s += cost.running(t, x, mu, &a)?;
                    }
                    Ok(dt * s)
                })
                .collect();
            for (acc, p) in self.running.iter_mut().zip(parts) {
                *acc += p?;
            }
        } else if self.terminal {
            for (acc, c) in self.final_cost.iter_mut().zip(replicas) {
                for (_, x) in c.particles() {
                    *acc += cost.terminal(x, mu)?;
                }
            }
        }
        Ok(())
    }
}

/// `J` on `[cfg.t0, cfg.t_end]` with or without the terminal term, together
/// with the simulated path.
pub(crate) fn cost_and_path(
    model: &ModelSpec,
    policy: &Policy,
    cost: &CostSpec,
    init: &InitLaw,
    cfg: &SimConfig,
    terminal: bool,
) -> Result<(CostEstimate, PopulationPath)> {
    let mut obs = CostObserver {
        policy,
        cost,
        dt: cfg.dt,
        end_key: lattice_key(cfg.t_end, cfg.dt)?,
        terminal,
        running: Vec::new(),
        final_cost: Vec::new(),
    };
    let path = simulate_observed(model, policy, init, cfg, &mut obs)?;
    let totals: Vec<f64> = obs.running.iter().zip(&obs.final_cost).map(|(a, b)| a + b).collect();
    let n = totals.len() as f64;
    let estimate = totals.iter().sum::<f64>() / n;
    Ok((
        CostEstimate {
            estimate,
            stderr: bootstrap_stderr(&totals, cfg.seed),
            running: obs.running.iter().sum::<f64>() / n,
            terminal: obs.final_cost.iter().sum::<f64>() / n,
        },
        path,
    ))
}

/// Monte Carlo estimate of `J(t, ξ, α) = ∫_t^T <L(s, ·, μ_s, α_s), μ_s> ds + <g(·, μ_T), μ_T>`
/// with the left-endpoint rule on the step grid.
pub fn evaluate_cost(
    model: &ModelSpec,
    policy: &Policy,
    cost: &CostSpec,
    init: &InitLaw,
    cfg: &SimConfig,
) -> Result<CostEstimate> {
    Ok(cost_and_path(model, policy, cost, init, cfg, true)?.0)
}

/// Everything a value search needs besides the start and the family.
#[derive(Clone, Debug)]
pub struct ValueProblem {
    pub model: ModelSpec,
    pub cost: CostSpec,
    pub t_end: f64,
    pub dt: f64,
    /// Common-random-numbers seed shared by every policy evaluation.
    pub seed: u64,
    pub action_lo: Vec<f64>,
    pub action_hi: Vec<f64>,
    pub construction: Construction,
    pub simplex: SimplexOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub restarts: usize,
    pub iterations: usize,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartSummary {
    pub start: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub stderr: f64,
    pub policy: Policy,
    pub converged: bool,
    pub simplex_diameter: f64,
    pub value_spread: f64,
    pub crn_seed: u64,
    pub evaluations: usize,
    pub restarts: Vec<RestartSummary>,
    /// Best value per iteration of the winning restart.
    pub trace: Vec<f64>,
}

impl ValueProblem {
    fn sim_config(&self, t0: f64, t_end: f64, replicas: usize) -> SimConfig {
        SimConfig::new(t0, t_end, self.dt, replicas, self.seed)
    }

    fn policy(&self, family: PolicyFamily, params: Vec<f64>) -> Result<Policy> {
        Policy::new(family, self.model.dim(), params, self.action_lo.clone(), self.action_hi.clone())
    }

    fn start_points(&self, family: PolicyFamily, restarts: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.action_lo.len();
        let p = family.param_count(self.model.dim(), n);
        let mut step = vec![0.5; p];
        for j in 0..n {
            step[j] = 0.25 * (self.action_hi[j] - self.action_lo[j]).max(1e-3);
        }
        let mut starts = Vec::with_capacity(restarts.max(1));
        let mut first = vec![0.0; p];
        for j in 0..n {
            first[j] = 0.0f64.clamp(self.action_lo[j], self.action_hi[j]);
        }
        starts.push(first);
        for r in 1..restarts.max(1) {
            let mut rng = CounterRng::at(self.seed, r as u64, &Label::root(), Channel::Optimizer, 0);
            let s: Vec<f64> = (0..p)
                .map(|k| {
                    let u = rng.uniform();
                    if k < n {
                        self.action_lo[k] + u * (self.action_hi[k] - self.action_lo[k])
                    } else {
                        2.0 * u - 1.0
                    }
                })
                .collect();
            starts.push(s);
        }
        (starts, step)
    }
}

/// `v̂(t, ν)`: the best cost over `family`, searched by restarted simplex
/// descent with common random numbers.
pub fn approximate_value(
    problem: &ValueProblem,
    nu: &AtomicMeasure,
    t: f64,
    family: PolicyFamily,
    budget: Budget,
) -> Result<ValueEstimate> {
    let init = InitLaw::from_measure(nu.clone(), problem.construction);
    if is_terminal(problem, t)? {
        return terminal_value(problem, nu, family);
    }
    approximate_value_from(problem, &init, t, family, budget)
}

fn is_terminal(problem: &ValueProblem, t: f64) -> Result<bool> {
    let (k, end) = (lattice_key(t, problem.dt)?, lattice_key(problem.t_end, problem.dt)?);
    if k > end {
        return Err(Error::Config(format!("t = {t} lies after T = {}", problem.t_end)));
    }
    Ok(k == end)
}

fn terminal_value(problem: &ValueProblem, nu: &AtomicMeasure, family: PolicyFamily) -> Result<ValueEstimate> {
    let (starts, _) = problem.start_points(family, 1);
    let value = problem.cost.terminal_integral(nu)?;
    Ok(ValueEstimate {
        value,
        stderr: 0.0,
        policy: problem.policy(family, starts[0].clone())?,
        converged: true,
        simplex_diameter: 0.0,
        value_spread: 0.0,
        crn_seed: problem.seed,
        evaluations: 0,
        restarts: Vec::new(),
        trace: Vec::new(),
    })
}

/// As [`approximate_value`], starting from an arbitrary initial law.
pub fn approximate_value_from(
    problem: &ValueProblem,
    init: &InitLaw,
    t: f64,
    family: PolicyFamily,
    budget: Budget,
) -> Result<ValueEstimate> {
    if is_terminal(problem, t)? {
        let nu = match init {
            InitLaw::Fixed(c) => c.to_measure(),
            InitLaw::FromMeasure { measure, .. } => measure.clone(),
            InitLaw::Empirical(cs) => empirical_mean(problem.model.dim(), cs),
        };
        return terminal_value(problem, &nu, family);
    }
    let cfg = problem.sim_config(t, problem.t_end, budget.replicas);
    let (starts, step) = problem.start_points(family, budget.restarts);
    let opts = SimplexOptions {
        max_iterations: budget.iterations,
        ..problem.simplex
    };
    let mut best: Option<(super::nelder_mead::SimplexResult, usize)> = None;
    let mut summaries = Vec::new();
    let mut evaluations = 0;
    for (i, start) in starts.iter().enumerate() {
        let objective = |theta: &[f64]| -> Result<f64> {
            let policy = problem.policy(family, theta.to_vec())?;
            Ok(evaluate_cost(&problem.model, &policy, &problem.cost, init, &cfg)?.estimate)
        };
        let res = nelder_mead(objective, start, &step, opts)?;
        evaluations += res.evaluations;
        summaries.push(RestartSummary {
            start: start.clone(),
            value: res.value,
            iterations: res.iterations,
            converged: res.converged,
        });
        if best.as_ref().is_none_or(|(b, _)| res.value < b.value) {
            best = Some((res, i));
        }
    }
    let (res, _) = best.expect("at least one restart");
    let policy = problem.policy(family, res.x.clone())?;
    let check = evaluate_cost(&problem.model, &policy, &problem.cost, init, &cfg)?;
    Ok(ValueEstimate {
        value: res.value,
        stderr: check.stderr,
        policy,
        converged: res.converged,
        simplex_diameter: res.diameter,
        value_spread: res.value_spread,
        crn_seed: problem.seed,
        evaluations,
        restarts: summaries,
        trace: res.trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DppReport {
    pub t: f64,
    pub s: f64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// Running cost on `[t, s]` and inner value at `s` of the minimiser.
    pub partial_cost: f64,
    pub inner_value: f64,
    pub gap: f64,
    /// Three joint standard errors.
    pub eps_mc: f64,
    /// Value spread left on the final simplices of both searches.
    pub eps_opt: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Compares `v̂(t, ν)` with `inf_α { ∫_t^s <L, μ> + v̂(s, μ_s^α) }` over the
/// same family. The inner value is searched again from the configurations
/// each outer candidate reaches at `s`.
pub fn check_dpp(
    problem: &ValueProblem,
    nu: &AtomicMeasure,
    t: f64,
    s: f64,
    family: PolicyFamily,
    budget: Budget,
    tolerance: f64,
) -> Result<DppReport> {
    let (kt, ks, ke) = (
        lattice_key(t, problem.dt)?,
        lattice_key(s, problem.dt)?,
        lattice_key(problem.t_end, problem.dt)?,
    );
    if !(kt <= ks && ks <= ke) {
        return Err(Error::Config(format!("need t <= s <= T, got {t}, {s}, {}", problem.t_end)));
    }
    let lhs = approximate_value(problem, nu, t, family, budget)?;
    let (rhs, rhs_stderr, partial, inner, rhs_spread) = if ks == kt {
        (lhs.value, lhs.stderr, 0.0, lhs.value, lhs.value_spread)
    } else {
        let init = InitLaw::from_measure(nu.clone(), problem.construction);
        let cfg = problem.sim_config(t, s, budget.replicas);
        let outer = |theta: &[f64]| -> Result<(CostEstimate, ValueEstimate)> {
            let policy = problem.policy(family, theta.to_vec())?;
            let (partial, path) = cost_and_path(&problem.model, &policy, &problem.cost, &init, &cfg, false)?;
            let reached = InitLaw::Empirical(Arc::new(path.final_configurations().to_vec()));
            let inner = approximate_value_from(problem, &reached, s, family, budget)?;
            Ok((partial, inner))
        };
        let (starts, step) = problem.start_points(family, budget.restarts);
        let opts = SimplexOptions {
            max_iterations: budget.iterations,
            ..problem.simplex
        };
        let mut best: Option<super::nelder_mead::SimplexResult> = None;
        for start in &starts {
            let res = nelder_mead(
                |theta| outer(theta).map(|(p, v)| p.estimate + v.value),
                start,
                &step,
                opts,
            )?;
            if best.as_ref().is_none_or(|b| res.value < b.value) {
                best = Some(res);
            }
        }
        let best = best.expect("at least one restart");
        let (p, v) = outer(&best.x)?;
        (
            best.value,
            (p.stderr * p.stderr + v.stderr * v.stderr).sqrt(),
            p.estimate,
            v.value,
            best.value_spread,
        )
    };
    let gap = (lhs.value - rhs).abs();
    let eps_mc = 3.0 * (lhs.stderr * lhs.stderr + rhs_stderr * rhs_stderr).sqrt();
    let eps_opt = lhs.value_spread + rhs_spread;
    Ok(DppReport {
        t,
        s,
        lhs: lhs.value,
        lhs_stderr: lhs.stderr,
        rhs,
        rhs_stderr,
        partial_cost: partial,
        inner_value: inner,
        gap,
        eps_mc,
        eps_opt,
        tolerance,
        holds: gap <= eps_mc + eps_opt + tolerance,
    })
}
