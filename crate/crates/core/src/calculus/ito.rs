//! Monte Carlo check of the Itô formula for cylinder functionals along the
//! simulated mean measure.
//!
//! The residual is accumulated while the path is simulated, so no snapshots
//! are kept. At every grid time the observer records, per replica, the
//! coordinates `<φ_i, ξ>`, the generator sums `<Aφ_i, ξ>` and the one-step
//! conditional means of `<φ_i, ξ'>` under the Euler scheme. Replica averages
//! give `μ̂`, and replica resampling gives the bootstrap error.
//!
//! The systematic part is the sum over steps of
//! `f(t_{k+1}, E_k y_{k+1}) - f(t_k, y_k) - dt (∂_t f + ∇f · 𝒢y)`,
//! which is the scheme's drift error and is O(dt) over a fixed horizon.

use rayon::prelude::*;
use serde::Serialize;

use crate::control::Policy;
use crate::dynamics::rng::{mix64, CounterRng};
use crate::dynamics::{
    lattice_key, simulate_observed, DiffusionFamily, DriftFamily, FamilyModel, InitLaw, ModelSpec, OffspringFamily,
    RateFamily, SimConfig, StepObserver,
};
use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, Configuration};

use super::cylinder::{Affine, CylinderFunctional, ExpQuadratic};
use super::generator::{half_trace, local};

use std::sync::Arc;

pub const DEFAULT_RESAMPLES: usize = 200;
const HERMITE_NODES: usize = 8;

/// Gauss-Hermite rule for `E h(Z)`, `Z ~ N(0, 1)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton on the orthonormal Hermite recursion, physicists' weight e^{-x^2}
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-0.16667),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2 - (j as f64 / (j + 1) as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let scale = std::f64::consts::PI.sqrt();
    let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().map(|v| v / scale).collect();
    (nodes, weights)
}

/// Tensor Gauss-Hermite rule for `N(0, I_d)`.
fn hermite_tensor(d: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    let (x, w) = gauss_hermite(n);
    let mut rule = vec![(Vec::new(), 1.0)];
    for _ in 0..d {
        rule = rule
            .iter()
            .flat_map(|(p, pw)| {
                x.iter().zip(&w).map(move |(xi, wi)| {
                    let mut q = p.clone();
                    q.push(*xi);
                    (q, pw * wi)
                })
            })
            .collect();
    }
    rule
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItoReport {
    pub s: f64,
    pub t: f64,
    pub dt: f64,
    pub replicas: usize,
    pub start_value: f64,
    pub end_value: f64,
    pub integral: f64,
    pub residual: f64,
    pub stderr: f64,
    pub systematic: f64,
    /// `sup_k <1 + |x|^2, μ̂_k>` over the grid.
    pub envelope: f64,
}

/// Per-replica sums at one grid time.
#[derive(Default)]
struct ReplicaSums {
    y: Vec<f64>,
    g: Vec<f64>,
    e: Vec<f64>,
    moment: f64,
}

struct Running {
    start: f64,
    integral: f64,
}

struct ItoObserver<'a> {
    model: &'a ModelSpec,
    policy: &'a Policy,
    functional: &'a CylinderFunctional,
    dt: f64,
    start_key: i64,
    end_key: i64,
    seed: u64,
    resamples: usize,
    rule: Vec<(Vec<f64>, f64)>,
    counts: Vec<Vec<u32>>,
    main: Running,
    boot: Vec<Running>,
    boot_residuals: Vec<f64>,
    systematic: f64,
    envelope: f64,
    end_value: f64,
}

impl ItoObserver<'_> {
    fn sums(&self, t: f64, mu: &AtomicMeasure, c: &Configuration, with_step: bool) -> Result<ReplicaSums> {
        let d = self.model.dim();
        let k = self.functional.arity();
        let inner = self.functional.inner();
        let mut out = ReplicaSums {
            y: vec![0.0; k],
            g: vec![0.0; k],
            e: vec![0.0; k],
            moment: 0.0,
        };
        let mut a = vec![0.0; self.policy.action_dim()];
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        let mut moved = vec![0.0; d];
        let sq_dt = self.dt.sqrt();
        for (_, x) in c.particles() {
            out.moment += 1.0 + x.iter().map(|v| v * v).sum::<f64>();
            for (i, phi) in inner.iter().enumerate() {
                out.y[i] += phi.value(x);
            }
            if !with_step {
                continue;
            }
            self.policy.action(t, x, &mut a);
            let lc = local(self.model, t, x, mu, &a)?;
            let survival = 1.0 + lc.rate * self.dt * (lc.mean_offspring - 1.0);
            for (i, phi) in inner.iter().enumerate() {
                phi.grad(x, &mut grad);
                phi.hess(x, &mut hess);
                let transport: f64 = lc.drift.iter().zip(&grad).map(|(b, v)| b * v).sum();
                out.g[i] += transport + half_trace(&lc.diffusion, &hess, d) + lc.growth_rate * phi.value(x);
            }
            for (z, wz) in &self.rule {
                for j in 0..d {
                    let noise: f64 = (0..d).map(|l| lc.diffusion[j * d + l] * z[l]).sum();
                    moved[j] = x[j] + lc.drift[j] * self.dt + sq_dt * noise;
                }
                for (i, phi) in inner.iter().enumerate() {
                    out.e[i] += survival * wz * phi.value(&moved);
                }
            }
        }
        Ok(out)
    }

    fn step_increment(&self, t: f64, y: &[f64], g: &[f64]) -> f64 {
        let outer = self.functional.outer();
        let w = self.functional.weights_at(t, y);
        self.dt * (outer.time_derivative(t, y) + w.iter().zip(g).map(|(a, b)| a * b).sum::<f64>())
    }
}

fn weighted_mean(rows: &[ReplicaSums], counts: Option<&[u32]>, pick: impl Fn(&ReplicaSums) -> &[f64]) -> Vec<f64> {
    let k = pick(&rows[0]).len();
    let mut acc = vec![0.0; k];
    for (r, row) in rows.iter().enumerate() {
        let c = counts.map_or(1.0, |c| c[r] as f64);
        if c == 0.0 {
            continue;
        }
        acc.iter_mut().zip(pick(row)).for_each(|(a, v)| *a += c * v);
    }
    acc.iter_mut().for_each(|a| *a /= rows.len() as f64);
    acc
}

impl StepObserver for ItoObserver<'_> {
    fn observe(&mut self, key: i64, t: f64, mu: &AtomicMeasure, replicas: &[Configuration]) -> Result<()> {
        let m = replicas.len();
        if m == 0 {
            return Err(Error::Config("no replicas".into()));
        }
        if self.counts.is_empty() && self.resamples > 0 {
            let mut rng = CounterRng::new(mix64(self.seed ^ 0x69746f));
            self.counts = (0..self.resamples)
                .map(|_| {
                    let mut c = vec![0u32; m];
                    for _ in 0..m {
                        c[((rng.uniform() * m as f64) as usize).min(m - 1)] += 1;
                    }
                    c
                })
                .collect();
        }
        let with_step = key < self.end_key;
        let rows: Vec<ReplicaSums> = replicas
            .par_iter()
            .map(|c| self.sums(t, mu, c, with_step))
            .collect::<Result<_>>()?;
        let moment = rows.iter().map(|r| r.moment).sum::<f64>() / m as f64;
        self.envelope = self.envelope.max(moment);

        let outer = self.functional.outer();
        let y = weighted_mean(&rows, None, |r| &r.y);
        let boot_y: Vec<Vec<f64>> = self.counts.par_iter().map(|c| weighted_mean(&rows, Some(c), |r| &r.y)).collect();
        if key == self.start_key {
            self.main.start = outer.value(t, &y);
            self.boot = boot_y
                .iter()
                .map(|yb| Running {
                    start: outer.value(t, yb),
                    integral: 0.0,
                })
                .collect();
        }
        if with_step {
            let g = weighted_mean(&rows, None, |r| &r.g);
            let e = weighted_mean(&rows, None, |r| &r.e);
            let inc = self.step_increment(t, &y, &g);
            self.main.integral += inc;
            self.systematic += outer.value(t + self.dt, &e) - outer.value(t, &y) - inc;
            let boot_inc: Vec<f64> = self
                .counts
                .par_iter()
                .zip(&boot_y)
                .map(|(c, yb)| self.step_increment(t, yb, &weighted_mean(&rows, Some(c), |r| &r.g)))
                .collect();
            self.boot.iter_mut().zip(boot_inc).for_each(|(b, inc)| b.integral += inc);
        } else {
            self.end_value = outer.value(t, &y);
            self.boot_residuals = self
                .boot
                .iter()
                .zip(&boot_y)
                .map(|(b, yb)| outer.value(t, yb) - b.start - b.integral)
                .collect();
        }
        Ok(())
    }
}

/// Residual of the Itô formula for `F` between the endpoints of `cfg`,
/// with a bootstrap standard error over `resamples` replica resamples.
pub fn ito_residual(
    model: &ModelSpec,
    policy: &Policy,
    functional: &CylinderFunctional,
    init: &InitLaw,
    cfg: &SimConfig,
    resamples: usize,
) -> Result<ItoReport> {
    if functional.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: functional.dim(),
        });
    }
    let mut obs = ItoObserver {
        model,
        policy,
        functional,
        dt: cfg.dt,
        start_key: lattice_key(cfg.t0, cfg.dt)?,
        end_key: lattice_key(cfg.t_end, cfg.dt)?,
        seed: cfg.seed,
        resamples,
        rule: hermite_tensor(model.dim(), HERMITE_NODES),
        counts: Vec::new(),
        main: Running {
            start: 0.0,
            integral: 0.0,
        },
        boot: Vec::new(),
        boot_residuals: Vec::new(),
        systematic: 0.0,
        envelope: 0.0,
        end_value: 0.0,
    };
    let mut cfg = cfg.clone();
    cfg.recording.events = false;
    simulate_observed(model, policy, init, &cfg, &mut obs)?;
    let residual = obs.end_value - obs.main.start - obs.main.integral;
    let stderr = if obs.boot_residuals.len() > 1 {
        let n = obs.boot_residuals.len() as f64;
        let mean = obs.boot_residuals.iter().sum::<f64>() / n;
        (obs.boot_residuals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ItoReport {
        s: cfg.t0,
        t: cfg.t_end,
        dt: cfg.dt,
        replicas: cfg.replicas,
        start_value: obs.main.start,
        end_value: obs.end_value,
        integral: obs.main.integral,
        residual,
        stderr,
        systematic: obs.systematic,
        envelope: obs.envelope,
    })
}

/// The registered Itô instances, all in one dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItoKind {
    /// `F = e^{ct} m(R)` under pure death at rate `rate`.
    PureDeath { rate: f64, growth: f64 },
    /// `F = e^{-βt} <x, m>` under `b = βx`, constant `σ`, no branching.
    LinearDrift { beta: f64, sigma: f64 },
    /// `F = <x, m>^2` under `b = -θx`, constant `σ`, no branching.
    QuadraticOu { theta: f64, sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItoInstance {
    pub name: &'static str,
    pub kind: ItoKind,
    pub start: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItoCheck {
    pub name: &'static str,
    pub report: ItoReport,
    pub c_f: f64,
    /// `3 stderr + C_F dt`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HalvingReport {
    pub name: &'static str,
    pub dt: f64,
    pub coarse: f64,
    pub fine: f64,
    pub ratio: f64,
    pub holds: bool,
}

impl ItoInstance {
    pub fn registered() -> Vec<Self> {
        vec![
            Self {
                name: "mass_pure_death",
                kind: ItoKind::PureDeath { rate: 1.0, growth: 0.5 },
                start: 0.0,
                s: 0.0,
                t: 0.5,
            },
            Self {
                name: "first_moment_linear_drift",
                kind: ItoKind::LinearDrift { beta: 0.8, sigma: 0.5 },
                start: 1.0,
                s: 0.0,
                t: 0.5,
            },
            Self {
                name: "quadratic_ou",
                kind: ItoKind::QuadraticOu { theta: 1.0, sigma: 0.5 },
                start: 1.0,
                s: 0.0,
                t: 0.5,
            },
        ]
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let mut m = FamilyModel::frozen(1);
        match self.kind {
            ItoKind::PureDeath { rate, .. } => {
                m.rate = RateFamily::Constant { value: rate };
                m.offspring = OffspringFamily::deterministic(0);
                return m.spec(rate.max(1.0));
            }
            ItoKind::LinearDrift { beta, sigma } => {
                m.drift = DriftFamily::linear(1, beta);
                m.diffusion = DiffusionFamily::constant(sigma);
            }
            ItoKind::QuadraticOu { theta, sigma } => {
                m.drift = DriftFamily::linear(1, -theta);
                m.diffusion = DiffusionFamily::constant(sigma);
            }
        }
        m.spec(1.0)
    }

    pub fn functional(&self) -> Result<CylinderFunctional> {
        let (phi, outer) = match self.kind {
            ItoKind::PureDeath { growth, .. } => (Affine::one(1), ExpQuadratic::linear(vec![1.0]).with_rate(growth)),
            ItoKind::LinearDrift { beta, .. } => {
                (Affine::coordinate(1, 0), ExpQuadratic::linear(vec![1.0]).with_rate(-beta))
            }
            ItoKind::QuadraticOu { .. } => (Affine::coordinate(1, 0), ExpQuadratic::square()),
        };
        CylinderFunctional::new(vec![Arc::new(phi)], Arc::new(outer))
    }

    pub fn init(&self) -> Result<InitLaw> {
        Ok(InitLaw::Fixed(Configuration::single(vec![self.start])?))
    }

    /// Analytic `C_F` with `|systematic| ≤ C_F dt`, in terms of the
    /// envelope `sup <1 + |x|^2, μ̂>` seen along the path.
    pub fn constant(&self, report: &ItoReport) -> f64 {
        let span = report.t - report.s;
        let env = report.envelope;
        match self.kind {
            ItoKind::PureDeath { rate, growth: c } => {
                span * (c.abs() * (report.t + report.dt)).exp() * (0.5 * c * c + rate * c.abs()) * env
            }
            ItoKind::LinearDrift { beta, .. } => {
                span * 0.5 * beta * beta * (beta.abs() * (report.t + report.dt)).exp() * env
            }
            ItoKind::QuadraticOu { theta, .. } => span * theta * theta * env * env,
        }
    }

    fn run(&self, dt: f64, replicas: usize, seed: u64, resamples: usize) -> Result<ItoReport> {
        let cfg = SimConfig::new(self.s, self.t, dt, replicas, seed);
        ito_residual(
            &self.model()?,
            &Policy::zero(1, 1, 1.0),
            &self.functional()?,
            &self.init()?,
            &cfg,
            resamples,
        )
    }

    pub fn check(&self, dt: f64, replicas: usize, seed: u64) -> Result<ItoCheck> {
        let report = self.run(dt, replicas, seed, DEFAULT_RESAMPLES)?;
        let c_f = self.constant(&report);
        let bound = 3.0 * report.stderr + c_f * dt;
        Ok(ItoCheck {
            name: self.name,
            holds: report.residual.abs() <= bound,
            report,
            c_f,
            bound,
        })
    }

    /// The systematic part alone, without bootstrap resampling.
    pub fn systematic(&self, dt: f64, replicas: usize, seed: u64) -> Result<f64> {
        Ok(self.run(dt, replicas, seed, 0)?.systematic)
    }

    /// Ratio of the systematic parts at `dt / 2` and `dt` on the same seed.
    pub fn halving(&self, dt: f64, replicas: usize, seed: u64) -> Result<HalvingReport> {
        let coarse = self.systematic(dt, replicas, seed)?;
        let fine = self.systematic(dt / 2.0, replicas, seed)?;
        let ratio = fine.abs() / coarse.abs();
        Ok(HalvingReport {
            name: self.name,
            dt,
            coarse,
            fine,
            ratio,
            holds: (0.3..=0.7).contains(&ratio),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(8);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-12);
        assert!((m(14) - 135135.0).abs() < 1e-6);
    }
}
