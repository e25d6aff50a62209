//! Monte Carlo checks of the a priori estimates on simulated paths.

use serde::Serialize;

use crate::control::Policy;
use crate::error::{Error, Result};
use crate::measures::config_distance;
use crate::metrics::truncated_w1_auto;

use super::init::InitLaw;
use super::model::ModelSpec;
use super::sim::{empirical_mean, mean_stderr, simulate, PopulationPath, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `estimate - 3 stderr <= bound`.
    pub holds: bool,
}

fn bound_report(values: &[f64], bound: f64) -> BoundReport {
    let (estimate, stderr) = mean_stderr(values);
    BoundReport {
        estimate,
        stderr,
        bound,
        holds: estimate - 3.0 * stderr <= bound,
    }
}

/// `E[sup_s #K_s] ≤ E<ξ, 1> e^{γ̄ M1 (T - t)}`.
pub fn check_first_moment_bound(model: &ModelSpec, path: &PopulationPath) -> BoundReport {
    let horizon = path.t_end() - path.t0();
    let init: Vec<f64> = path.initial_count.iter().map(|&n| n as f64).collect();
    let (e_init, _) = mean_stderr(&init);
    let bound = e_init * (model.gamma_bar * model.m1 * horizon).exp();
    let sups: Vec<f64> = path.sup_count.iter().map(|&n| n as f64).collect();
    bound_report(&sups, bound)
}

/// `E[sup_s (#K_s)^2] ≤ 3 (E<ξ,1>^2 + (T-t) γ̄ M2 e^{γ̄ M1 (T-t)} E<ξ,1>) e^{3 (T-t)^2 γ̄^2 M1^2}`,
/// with `E<ξ,1>^2` read as the second moment of the initial count.
pub fn check_second_moment_bound(model: &ModelSpec, path: &PopulationPath) -> BoundReport {
    let tau = path.t_end() - path.t0();
    let (g, m1, m2) = (model.gamma_bar, model.m1, model.m2);
    let init: Vec<f64> = path.initial_count.iter().map(|&n| n as f64).collect();
    let (e1, _) = mean_stderr(&init);
    let sq: Vec<f64> = init.iter().map(|n| n * n).collect();
    let (e2, _) = mean_stderr(&sq);
    let bound = 3.0 * (e2 + tau * g * m2 * (g * m1 * tau).exp() * e1) * (3.0 * tau * tau * g * g * m1 * m1).exp();
    let sups: Vec<f64> = path.sup_count.iter().map(|&n| (n as f64).powi(2)).collect();
    bound_report(&sups, bound)
}

/// Replica mean of the terminal population size.
pub fn terminal_count(path: &PopulationPath) -> (f64, f64) {
    let v: Vec<f64> = path.final_count.iter().map(|&n| n as f64).collect();
    mean_stderr(&v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositionSumReport {
    pub estimate: f64,
    pub stderr: f64,
    pub doubled: Option<(f64, f64)>,
    pub finite: bool,
    /// Estimates at `M` and `2M` differ by less than three joint standard
    /// errors (vacuous without a doubled run).
    pub stable: bool,
}

/// `E[sup_s Σ_k |X^k_s|]`, optionally compared with a run on twice as
/// many replicas.
pub fn check_position_sum_bound(path: &PopulationPath, doubled: Option<&PopulationPath>) -> PositionSumReport {
    let (estimate, stderr) = mean_stderr(&path.sup_abs_sum);
    let other = doubled.map(|p| mean_stderr(&p.sup_abs_sum));
    let stable = match other {
        Some((e2, s2)) => (estimate - e2).abs() <= 3.0 * (stderr * stderr + s2 * s2).sqrt(),
        None => true,
    };
    PositionSumReport {
        estimate,
        stderr,
        doubled: other,
        finite: estimate.is_finite() && other.is_none_or(|(e, _)| e.is_finite()),
        stable,
    }
}

/// Shift applied to every initial particle to build the perturbed start.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityRow {
    pub eps: f64,
    pub initial_de: f64,
    pub terminal_de: f64,
    pub terminal_de_stderr: f64,
    pub de_ratio: f64,
    pub initial_w1: f64,
    pub terminal_w1: f64,
    pub w1_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// `(max - min) / max` of the ratios across the sweep.
    pub de_spread: f64,
    pub w1_spread: f64,
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        (max - min) / max
    } else {
        0.0
    }
}

/// Runs the base start and its shifted copy on identical noise streams and
/// reports `E d_E(Z_T, Z'_T) / E d_E(ξ, ξ')` and the same ratio for `W̄_1`
/// of the mean measures, for each `eps`.
///
/// The two configurations must agree in everything that keys the noise;
/// otherwise the comparison is not a coupling and is refused.
pub fn check_path_stability(
    model: &ModelSpec,
    policy: &Policy,
    init: &InitLaw,
    perturbation: &Perturbation,
    cfgs: (&SimConfig, &SimConfig),
    eps: &[f64],
) -> Result<StabilityReport> {
    let (a, b) = cfgs;
    if a.seed != b.seed || a.replicas != b.replicas || a.dt != b.dt || a.t0 != b.t0 || a.t_end != b.t_end {
        return Err(Error::Coupling(
            "paired runs must share seed, replicas and time grid".into(),
        ));
    }
    if perturbation.direction.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: perturbation.direction.len(),
        });
    }
    let base_path = simulate(model, policy, init, a)?;
    let base_start = base_path.initial_configurations().to_vec();
    let origin = vec![0.0; model.dim()];
    let mut rows = Vec::new();
    for &e in eps {
        let shifted = base_start
            .iter()
            .map(|c| {
                let pos: Vec<f64> = c
                    .positions_flat()
                    .chunks_exact(model.dim())
                    .flat_map(|x| x.iter().zip(&perturbation.direction).map(|(v, d)| v + e * d).collect::<Vec<_>>())
                    .collect();
                c.with_positions(pos)
            })
            .collect::<Result<Vec<_>>>()?;
        let base_fixed = InitLaw::Empirical(std::sync::Arc::new(base_start.clone()));
        let pert = InitLaw::Empirical(std::sync::Arc::new(shifted));
        let p1 = simulate(model, policy, &base_fixed, a)?;
        let p2 = simulate(model, policy, &pert, b)?;
        let d0: Vec<f64> = pair_distances(p1.initial_configurations(), p2.initial_configurations())?;
        let d1: Vec<f64> = pair_distances(p1.final_configurations(), p2.final_configurations())?;
        let (initial_de, _) = mean_stderr(&d0);
        let (terminal_de, terminal_de_stderr) = mean_stderr(&d1);
        let dim = model.dim();
        let initial_w1 = truncated_w1_auto(
            &empirical_mean(dim, p1.initial_configurations()),
            &empirical_mean(dim, p2.initial_configurations()),
            &origin,
        )?;
        let terminal_w1 = truncated_w1_auto(
            &empirical_mean(dim, p1.final_configurations()),
            &empirical_mean(dim, p2.final_configurations()),
            &origin,
        )?;
        rows.push(StabilityRow {
            eps: e,
            initial_de,
            terminal_de,
            terminal_de_stderr,
            de_ratio: terminal_de / initial_de,
            initial_w1,
            terminal_w1,
            w1_ratio: terminal_w1 / initial_w1,
        });
    }
    Ok(StabilityReport {
        de_spread: spread(rows.iter().map(|r| r.de_ratio)),
        w1_spread: spread(rows.iter().map(|r| r.w1_ratio)),
        rows,
    })
}

fn pair_distances(a: &[crate::measures::Configuration], b: &[crate::measures::Configuration]) -> Result<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| config_distance(x, y)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityReport {
    /// `(h, E d_E(Z_{r+h}, Z_r))` averaged over recorded `r` and replicas.
    pub increments: Vec<(f64, f64)>,
    /// Least-squares slope of `log E d_E` against `log h`.
    pub exponent: f64,
    /// `max_h E d_E / √h`.
    pub envelope: f64,
}

/// Fits `E d_E(Z_{r+h}, Z_r)` against `h` for `h = dt, 2dt, 4dt, ...` up to
/// `h_max`. The path must be recorded at every grid time.
pub fn check_time_continuity(path: &PopulationPath, h_max: f64) -> Result<ContinuityReport> {
    let times = path.recorded_times();
    if times.len() != path.steps() + 1 {
        return Err(Error::Config("time continuity needs a path recorded at every step".into()));
    }
    let mut increments = Vec::new();
    let mut lag = 1usize;
    while (lag as f64) * path.dt <= h_max * (1.0 + 1e-9) && lag <= path.steps() {
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..times.len() - lag {
            let z0 = path.configurations(times[i])?;
            let z1 = path.configurations(times[i + lag])?;
            for (a, b) in z0.iter().zip(z1) {
                total += config_distance(a, b)?;
                count += 1;
            }
        }
        increments.push((lag as f64 * path.dt, total / count as f64));
        lag *= 2;
    }
    let pts: Vec<(f64, f64)> = increments
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(h, v)| (h.ln(), v.ln()))
        .collect();
    let exponent = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        0.0
    };
    let envelope = increments.iter().map(|&(h, v)| v / h.sqrt()).fold(0.0, f64::max);
    Ok(ContinuityReport {
        increments,
        exponent,
        envelope,
    })
}
