//! Registered check suites. Every check draws its random instances from the
//! master seed, so a suite report is a pure function of `(name, seed)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use bmv_core::calculus::{
    aux_sublevel_check, exclusion_threshold, hamiltonian, hamiltonian_lipschitz, segment_integral, ActionGrid, Affine,
    AuxFunction, Bracket, CylinderFunctional, ExpQuadratic, Fields, ItoInstance, Wave,
};
use bmv_core::control::{approximate_value, check_dpp, Budget, Policy, PolicyFamily, QuadraticCost, SimplexOptions, ValueProblem};
use bmv_core::dynamics::rng::{mix64, CounterRng};
use bmv_core::dynamics::{
    check_first_moment_bound, check_path_stability, check_time_continuity, simulate, terminal_count, Construction,
    DiffusionFamily, DriftFamily, FamilyModel, InitLaw, ModelSpec, OffspringFamily, Perturbation, RateFamily,
    SimConfig,
};
use bmv_core::measures::{AtomicMeasure, Configuration};
use bmv_core::metrics::{
    cemetery_cost, check_domination, domination_constant, rho_f, sobolev_neg_norm, truncated_cost, truncated_w1,
    truncated_w1_padded, LambdaIndex, QuadratureScheme,
};

use crate::error::{ErrorKind, HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Observed quantities next to the tolerances they are held to.
    pub budget: BTreeMap<String, f64>,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

type CheckFn = fn(u64) -> Result<CheckReport>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("metric_identity", metric_identity),
    ("domination", domination),
    ("w1_exact", w1_exact),
    ("first_moment", first_moment),
    ("pure_death", pure_death),
    ("ito_residual", ito_residual_check),
    ("time_continuity", time_continuity),
    ("stability", stability),
    ("dpp", dpp),
    ("terminal_condition", terminal_condition),
    ("aux_function", aux_function),
];

/// Suites and their checks, in run order.
pub fn suite_checks(name: &str) -> Option<Vec<&'static str>> {
    let names: &[&str] = match name {
        "metrics" => &["metric_identity", "domination", "w1_exact"],
        "dynamics" => &["first_moment", "pure_death", "time_continuity", "stability"],
        "calculus" => &["ito_residual", "aux_function"],
        "control" => &["dpp", "terminal_condition"],
        "all" => return Some(CHECKS.iter().map(|(n, _)| *n).collect()),
        // the check subcommand batteries
        "ito" => &["ito_residual"],
        "aux" => &["aux_function"],
        "lfd" => &["lfd"],
        "hamiltonian" => &["hamiltonian"],
        _ => return None,
    };
    Some(names.to_vec())
}

pub const SUITES: &[&str] = &["metrics", "dynamics", "calculus", "control", "all"];
pub const BATTERIES: &[&str] = &["ito", "hamiltonian", "aux", "lfd"];

fn lookup(name: &str) -> CheckFn {
    match name {
        "lfd" => lfd_battery,
        "hamiltonian" => hamiltonian_battery,
        _ => CHECKS.iter().find(|(n, _)| *n == name).map(|(_, f)| *f).expect("registered check"),
    }
}

/// Runs a suite; the second component holds wall-clock seconds per check.
pub fn run_suite(name: &str, seed: u64) -> Result<(SuiteReport, BTreeMap<String, f64>)> {
    let Some(names) = suite_checks(name) else {
        return Err(HarnessError::new(
            ErrorKind::Suite,
            format!("unregistered suite '{name}' (known: {})", [SUITES, BATTERIES].concat().join(", ")),
        ));
    };
    let mut checks = Vec::new();
    let mut timings = BTreeMap::new();
    for n in names {
        let start = Instant::now();
        let report = lookup(n)(check_seed(seed, n))?;
        timings.insert(n.to_string(), start.elapsed().as_secs_f64());
        checks.push(report);
    }
    Ok((
        SuiteReport {
            suite: name.to_string(),
            seed,
            passed: checks.iter().all(|c| c.passed),
            checks,
        },
        timings,
    ))
}

/// Each check gets its own stream, independent of which suite runs it.
fn check_seed(seed: u64, name: &str) -> u64 {
    let h = name.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    mix64(seed ^ mix64(h))
}

struct Draw(CounterRng);

impl Draw {
    fn new(seed: u64) -> Self {
        Draw(CounterRng::new(seed))
    }
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.uniform()
    }
    fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        (lo + (self.0.uniform() * (hi_inclusive - lo + 1) as f64) as usize).min(hi_inclusive)
    }
    fn measure(&mut self, max_atoms: usize, span: f64, max_weight: f64) -> AtomicMeasure {
        let n = self.index(1, max_atoms);
        let atoms = (0..n)
            .map(|_| (vec![self.uniform(-span, span)], self.uniform(0.0, max_weight)))
            .collect();
        AtomicMeasure::new(1, atoms).expect("valid random measure")
    }
}

fn budget(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn random_pairs(seed: u64) -> Vec<(AtomicMeasure, AtomicMeasure)> {
    let mut d = Draw::new(seed);
    (0..200).map(|_| (d.measure(5, 3.0, 2.0), d.measure(5, 3.0, 2.0))).collect()
}

fn metric_identity(seed: u64) -> Result<CheckReport> {
    let idx = LambdaIndex::for_dim(1);
    let grid = QuadratureScheme::grid(50.0, 20_001);
    let (mut max_diff, mut max_tail) = (0.0f64, 0.0f64);
    for (a, b) in random_pairs(seed) {
        let closed = rho_f(&a, &b, idx, QuadratureScheme::closed_form())?;
        let sob = sobolev_neg_norm(&a, &b, idx, grid)?;
        let diff = (closed.value.powi(2) - sob.value.powi(2) / (2.0 * PI)).abs();
        max_diff = max_diff.max(diff);
        max_tail = max_tail.max(sob.tail_bound / (2.0 * PI));
    }
    let tol = 1e-8;
    Ok(CheckReport {
        name: "metric_identity".into(),
        passed: max_diff <= tol,
        budget: budget(&[("max_abs_diff", max_diff), ("tolerance", tol), ("max_tail_bound", max_tail)]),
        detail: json!({"pairs": 200, "lambda": idx.lambda, "radius": 50.0, "nodes": 20_001}),
    })
}

fn domination(seed: u64) -> Result<CheckReport> {
    let idx = LambdaIndex::for_dim(1);
    let scheme = QuadratureScheme::closed_form();
    let constant = domination_constant(idx, scheme.radius, scheme.nodes_per_axis)?;
    let (mut violations, mut max_ratio) = (0usize, 0.0f64);
    for (a, b) in random_pairs(seed) {
        let r = check_domination(&a, &b, idx, scheme, &[0.0])?;
        if !r.holds {
            violations += 1;
        }
        if r.w1 > 0.0 {
            max_ratio = max_ratio.max(r.rho_f / (r.constant * r.w1));
        }
    }
    Ok(CheckReport {
        name: "domination".into(),
        passed: violations == 0,
        budget: budget(&[("violations", violations as f64), ("max_rho_over_cw1", max_ratio), ("constant", constant)]),
        detail: json!({"pairs": 200}),
    })
}

/// Minimum over matchings of unit atoms, the lighter side padded with the
/// cemetery.
fn matching_oracle(a: &[f64], b: &[f64], base: f64) -> f64 {
    let n = a.len().max(b.len());
    let side = |v: &[f64]| -> Vec<Option<f64>> { (0..n).map(|i| v.get(i).copied()).collect() };
    let (pa, pb) = (side(a), side(b));
    let cost = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => truncated_cost(&[x], &[y]),
        (Some(x), None) | (None, Some(x)) => cemetery_cost(&[x], &[base]),
        (None, None) => 0.0,
    };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost(pa[i], pb[j])).sum::<f64>();
    best = best.min(eval(&perm));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn w1_exact(_seed: u64) -> Result<CheckReport> {
    let positions = [0.0, 0.3, 0.9, 2.0];
    let weights = [1usize, 2];
    let choices: Vec<(f64, usize)> = positions.iter().flat_map(|&p| weights.iter().map(move |&w| (p, w))).collect();
    // multisets of at most three (position, weight) atoms
    let mut measures: Vec<Vec<(f64, usize)>> = vec![Vec::new()];
    for k in 1..=3 {
        let mut idx = vec![0usize; k];
        loop {
            measures.push(idx.iter().map(|&i| choices[i]).collect());
            let mut j = k;
            while j > 0 && idx[j - 1] == choices.len() - 1 {
                j -= 1;
            }
            if j == 0 {
                break;
            }
            idx[j - 1] += 1;
            let v = idx[j - 1];
            idx[j..].iter_mut().for_each(|x| *x = v);
        }
    }
    let to_measure = |atoms: &[(f64, usize)]| {
        AtomicMeasure::new(1, atoms.iter().map(|&(p, w)| (vec![p], w as f64)).collect()).expect("valid")
    };
    let units = |atoms: &[(f64, usize)]| -> Vec<f64> {
        atoms.iter().flat_map(|&(p, w)| std::iter::repeat_n(p, w)).collect()
    };
    let (mut max_err, mut padding_mismatch, mut pairs) = (0.0f64, 0usize, 0usize);
    for a in &measures {
        for b in &measures {
            let (ma, mb) = (to_measure(a), to_measure(b));
            let lp = truncated_w1(&ma, &mb, &[0.0])?;
            let oracle = matching_oracle(&units(a), &units(b), 0.0);
            max_err = max_err.max((lp - oracle).abs());
            let heavier = ma.mass().max(mb.mass());
            for extra in [0.0, 0.5, 3.0] {
                if truncated_w1_padded(&ma, &mb, &[0.0], heavier + extra)? != lp {
                    padding_mismatch += 1;
                }
            }
            pairs += 1;
        }
    }
    let tol = 1e-12;
    Ok(CheckReport {
        name: "w1_exact".into(),
        passed: max_err <= tol && padding_mismatch == 0,
        budget: budget(&[
            ("max_abs_err", max_err),
            ("tolerance", tol),
            ("padding_mismatches", padding_mismatch as f64),
        ]),
        detail: json!({"instances": pairs, "positions": positions, "weights": weights}),
    })
}

fn one_particle() -> InitLaw {
    InitLaw::Fixed(Configuration::single(vec![0.0]).expect("valid"))
}

fn zero_policy() -> Policy {
    Policy::zero(1, 1, 1.0)
}

fn first_moment(seed: u64) -> Result<CheckReport> {
    let mut m = FamilyModel::frozen(1);
    m.rate = RateFamily::Constant { value: 1.0 };
    m.offspring = OffspringFamily::deterministic(2);
    let model = m.spec(1.0)?;
    let path = simulate(&model, &zero_policy(), &one_particle(), &SimConfig::new(0.0, 0.5, 1e-3, 10_000, seed))?;
    let (mean, se) = terminal_count(&path);
    let exact = 0.5f64.exp();
    let bound = check_first_moment_bound(&model, &path);
    let mean_ok = (mean - exact).abs() <= 3.0 * se;
    Ok(CheckReport {
        name: "first_moment".into(),
        passed: mean_ok && bound.holds,
        budget: budget(&[
            ("terminal_mean", mean),
            ("terminal_stderr", se),
            ("yule_mean", exact),
            ("sup_mean", bound.estimate),
            ("sup_stderr", bound.stderr),
            ("sup_bound", bound.bound),
        ]),
        detail: json!({"replicas": 10_000, "dt": 1e-3, "horizon": 0.5}),
    })
}

fn pure_death(seed: u64) -> Result<CheckReport> {
    let mut m = FamilyModel::frozen(1);
    m.rate = RateFamily::Constant { value: 1.0 };
    m.offspring = OffspringFamily::deterministic(0);
    let cfg = SimConfig::new(0.0, 1.0, 1e-3, 10_000, seed).with_stride(250);
    let path = simulate(&m.spec(1.0)?, &zero_policy(), &one_particle(), &cfg)?;
    let mut rows = Vec::new();
    let mut passed = true;
    let mut worst = 0.0f64;
    for s in [0.25, 0.5, 1.0] {
        let (mean, se) = path.functional(s, |_| 1.0)?;
        let z = (mean - (-s).exp()).abs() / se;
        worst = worst.max(z);
        passed &= z <= 3.0;
        rows.push(json!({"s": s, "mass": mean, "stderr": se, "exact": (-s).exp()}));
    }
    Ok(CheckReport {
        name: "pure_death".into(),
        passed,
        budget: budget(&[("max_abs_z", worst), ("z_tolerance", 3.0)]),
        detail: json!({"rows": rows, "replicas": 10_000, "dt": 1e-3}),
    })
}

fn ito_residual_check(seed: u64) -> Result<CheckReport> {
    let dt = 1e-3;
    let replicas = 10_000;
    let mut passed = true;
    let mut b = BTreeMap::new();
    let mut detail = Vec::new();
    for inst in ItoInstance::registered() {
        let check = inst.check(dt, replicas, seed)?;
        let fine = inst.systematic(dt / 2.0, replicas, seed)?;
        let ratio = fine.abs() / check.report.systematic.abs();
        let halves = (0.3..=0.7).contains(&ratio);
        passed &= check.holds && halves;
        b.insert(format!("{}.abs_residual", inst.name), check.report.residual.abs());
        b.insert(format!("{}.bound", inst.name), check.bound);
        b.insert(format!("{}.halving_ratio", inst.name), ratio);
        detail.push(json!({"check": check, "fine_systematic": fine, "halves": halves}));
    }
    Ok(CheckReport {
        name: "ito_residual".into(),
        passed,
        budget: b,
        detail: json!({"instances": detail, "dt": dt, "replicas": replicas, "halving_range": [0.3, 0.7]}),
    })
}

/// Brownian particles with weak critical branching and a controlled drift.
fn diffusive_model() -> Result<ModelSpec> {
    Ok(FamilyModel {
        dim: 1,
        action_dim: 1,
        drift: DriftFamily {
            slope: -0.2,
            control: 1.0,
            ..DriftFamily::zero(1)
        },
        diffusion: DiffusionFamily::constant(1.0),
        rate: RateFamily::Constant { value: 0.1 },
        offspring: OffspringFamily::Fixed {
            pmf: vec![0.5, 0.0, 0.5],
        },
    }
    .spec(1.0)?)
}

fn time_continuity(seed: u64) -> Result<CheckReport> {
    let model = diffusive_model()?;
    let init = InitLaw::Fixed(Configuration::from_positions(1, vec![vec![0.0], vec![0.5]])?);
    let policies = [
        Policy::constant(vec![0.0], vec![-1.0], vec![1.0], 1)?,
        Policy::constant(vec![0.8], vec![-1.0], vec![1.0], 1)?,
        Policy::new(PolicyFamily::AffineClamped, 1, vec![0.3, -1.0], vec![-1.0], vec![1.0])?,
    ];
    let cfg = SimConfig::new(0.0, 0.2, 1e-3, 400, seed).with_stride(1);
    let mut reports = Vec::new();
    for p in &policies {
        let path = simulate(&model, p, &init, &cfg)?;
        reports.push(check_time_continuity(&path, 0.1)?);
    }
    let max_exp = reports.iter().map(|r| r.exponent).fold(f64::NEG_INFINITY, f64::max);
    let envs: Vec<f64> = reports.iter().map(|r| r.envelope).collect();
    let mean_env = envs.iter().sum::<f64>() / envs.len() as f64;
    let env_dev = envs.iter().map(|e| (e / mean_env - 1.0).abs()).fold(0.0, f64::max);
    Ok(CheckReport {
        name: "time_continuity".into(),
        passed: max_exp <= 0.6 && env_dev <= 0.2,
        budget: budget(&[
            ("max_exponent", max_exp),
            ("exponent_limit", 0.6),
            ("envelope_rel_deviation", env_dev),
            ("envelope_limit", 0.2),
        ]),
        detail: json!({"policies": reports, "replicas": 400, "dt": 1e-3}),
    })
}

/// Mean-field drift, logistic rate and position-dependent offspring law.
pub fn branching_model() -> Result<ModelSpec> {
    Ok(FamilyModel {
        dim: 1,
        action_dim: 1,
        drift: DriftFamily {
            offset: vec![0.1],
            slope: -0.5,
            mass: 0.0,
            mean: 0.2,
            control: 0.5,
            saturation: Some(3.0),
        },
        diffusion: DiffusionFamily {
            level: 0.4,
            mass_coupling: 0.1,
        },
        rate: RateFamily::Logistic {
            value: 0.0,
            slope: 0.5,
            mass: -0.1,
            control: 0.2,
        },
        offspring: OffspringFamily::Mixed {
            base: vec![0.4, 0.0, 0.6],
            alt: vec![0.3, 0.3, 0.2, 0.2],
            value: 0.0,
            slope: 0.5,
        },
    }
    .spec(1.5)?)
}

fn stability(seed: u64) -> Result<CheckReport> {
    let model = branching_model()?;
    let policy = Policy::new(PolicyFamily::AffineClamped, 1, vec![0.1, -0.2], vec![-1.0], vec![1.0])?;
    let nu = AtomicMeasure::new(1, vec![(vec![-0.5], 1.0), (vec![0.8], 1.0)])?;
    let init = InitLaw::from_measure(nu, Construction::Rounded);
    let cfg = SimConfig::new(0.0, 1.0, 0.01, 4000, seed);
    let eps = [0.1, 0.05, 0.01];
    let r = check_path_stability(&model, &policy, &init, &Perturbation { direction: vec![1.0] }, (&cfg, &cfg), &eps)?;
    Ok(CheckReport {
        name: "stability".into(),
        passed: r.de_spread < 0.5 && r.w1_spread < 0.5,
        budget: budget(&[("de_ratio_spread", r.de_spread), ("w1_ratio_spread", r.w1_spread), ("spread_limit", 0.5)]),
        detail: json!({"sweep": r, "replicas": 4000, "dt": 0.01}),
    })
}

/// `dx = a dt`, `L = a^2`, `g = x^2`: constant actions are optimal and
/// `v(t, δ_x) = x^2 / (1 + T - t)`.
pub fn lq_problem() -> Result<ValueProblem> {
    let mut model = FamilyModel::frozen(1);
    model.drift = DriftFamily::controlled(1, 1.0);
    Ok(ValueProblem {
        model: model.spec(1.0)?,
        cost: QuadraticCost {
            action: 1.0,
            terminal_state: 1.0,
            cap: 100.0,
            ..QuadraticCost::zero()
        }
        .spec(5.0)?,
        t_end: 1.0,
        dt: 0.1,
        seed: 0,
        action_lo: vec![-5.0],
        action_hi: vec![5.0],
        construction: Construction::Rounded,
        simplex: SimplexOptions {
            max_iterations: 200,
            x_tol: 1e-7,
            f_tol: 1e-12,
        },
    })
}

fn dpp(seed: u64) -> Result<CheckReport> {
    let mut problem = lq_problem()?;
    problem.seed = seed;
    let nu = AtomicMeasure::dirac(vec![1.0], 1.0)?;
    let budget_ = Budget {
        restarts: 1,
        iterations: 80,
        replicas: 4000,
    };
    let (t, s) = (0.0, 0.5);
    let r = check_dpp(&problem, &nu, t, s, PolicyFamily::Constant, budget_, 5e-3)?;
    let oracle = 1.0 / (1.0 + problem.t_end - t);
    let lhs_err = (r.lhs - oracle).abs();
    let rhs_err = (r.rhs - oracle).abs();
    let oracle_tol_lhs = 1e-4 + 3.0 * r.lhs_stderr;
    let oracle_tol_rhs = 1e-4 + 3.0 * r.rhs_stderr;
    Ok(CheckReport {
        name: "dpp".into(),
        passed: r.gap <= 5e-3 && lhs_err <= oracle_tol_lhs && rhs_err <= oracle_tol_rhs,
        budget: budget(&[
            ("gap", r.gap),
            ("gap_limit", 5e-3),
            ("lhs_oracle_err", lhs_err),
            ("lhs_oracle_tol", oracle_tol_lhs),
            ("rhs_oracle_err", rhs_err),
            ("rhs_oracle_tol", oracle_tol_rhs),
        ]),
        detail: json!({"report": r, "oracle": oracle, "replicas": 4000}),
    })
}

fn terminal_condition(seed: u64) -> Result<CheckReport> {
    let mut problem = lq_problem()?;
    problem.cost = QuadraticCost {
        terminal_state: 0.7,
        terminal_constant: 0.2,
        cap: 100.0,
        ..QuadraticCost::zero()
    }
    .spec(5.0)?;
    let mut d = Draw::new(seed);
    let mut mismatches = 0usize;
    let mut simulated = 0usize;
    for _ in 0..20 {
        let nu = d.measure(5, 3.0, 2.0);
        let v = approximate_value(&problem, &nu, problem.t_end, PolicyFamily::Constant, Budget {
            restarts: 2,
            iterations: 10,
            replicas: 10,
        })?;
        if v.value != problem.cost.terminal_integral(&nu)? {
            mismatches += 1;
        }
        simulated += v.evaluations;
    }
    Ok(CheckReport {
        name: "terminal_condition".into(),
        passed: mismatches == 0 && simulated == 0,
        budget: budget(&[("mismatches", mismatches as f64), ("simulations", simulated as f64)]),
        detail: json!({"samples": 20}),
    })
}

fn aux_function(seed: u64) -> Result<CheckReport> {
    let mut d = Draw::new(seed);
    let aux = AuxFunction::new(0.5)?;
    let (c1, c2, horizon) = (4.0, 1.5, 1.0);
    let samples: Vec<(f64, AtomicMeasure)> = (0..100)
        .map(|_| (d.uniform(0.0, horizon), d.measure(5, 6.0, 1.5)))
        .collect();
    let report = aux_sublevel_check(&samples, c1, c2, &aux, horizon, 2.0)?;
    let mut max_root_err = 0.0f64;
    for _ in 0..20 {
        let a = AuxFunction::new(d.uniform(0.1, 2.0))?;
        let (k1, k2, h) = (d.uniform(0.0, 10.0), d.uniform(0.0, 5.0), d.uniform(0.1, 2.0));
        let root = a.mass_cap(k1, k2, h);
        let n = exclusion_threshold(&a, k1, k2, h);
        max_root_err = max_root_err.max((n - root).abs() / root.max(1.0));
    }
    Ok(CheckReport {
        name: "aux_function".into(),
        passed: report.holds && max_root_err <= 1e-12,
        budget: budget(&[
            ("cap_violations", report.cap_violations as f64),
            ("tail_violations", report.tail_violations as f64),
            ("max_threshold_rel_err", max_root_err),
            ("threshold_tolerance", 1e-12),
        ]),
        detail: json!({"sublevel": report}),
    })
}

fn lfd_battery(seed: u64) -> Result<CheckReport> {
    let mut d = Draw::new(seed);
    let wave = Arc::new(Wave {
        amplitude: 1.5,
        frequency: vec![0.7],
        phase: 0.3,
    });
    let outer = ExpQuadratic {
        rate: 0.0,
        constant: 0.5,
        linear: vec![1.0, -2.0],
        quadratic: vec![1.0, 0.5, 0.5, -3.0],
    };
    let f = CylinderFunctional::new(vec![Arc::new(Bracket { dim: 1 }), wave], Arc::new(outer))?;
    let mut max_seg = 0.0f64;
    for _ in 0..50 {
        let (m, mp) = (d.measure(5, 3.0, 2.0), d.measure(5, 3.0, 2.0));
        let lhs = f.value(0.0, &m)? - f.value(0.0, &mp)?;
        let rhs = segment_integral(|p, x| f.lfd(0.0, p, x), &m, &mp, 64)?;
        max_seg = max_seg.max((lhs - rhs).abs());
    }
    let square = CylinderFunctional::new(vec![Arc::new(Affine::one(1))], Arc::new(ExpQuadratic::square()))?;
    let m = d.measure(5, 3.0, 2.0);
    let sq_err = (square.lfd(0.0, &m, &[0.7])? - 2.0 * m.mass()).abs();
    let mass = CylinderFunctional::mass(1)?;
    let (m, mp) = (d.measure(3, 3.0, 2.0), d.measure(3, 3.0, 2.0));
    let diff = mass.value(0.0, &m)? - mass.value(0.0, &mp)?;
    let shifted = segment_integral(|_, _| Ok(1.5), &m, &mp, 64)?;
    let separates = m.mass() == mp.mass() || (shifted - diff).abs() > 0.0;
    Ok(CheckReport {
        name: "lfd".into(),
        passed: max_seg <= 1e-10 && sq_err <= 1e-12 && separates,
        budget: budget(&[
            ("max_segment_err", max_seg),
            ("segment_tolerance", 1e-10),
            ("squared_mass_err", sq_err),
        ]),
        detail: json!({"segments": 50, "shifted_candidate_rejected": separates}),
    })
}

fn hamiltonian_battery(seed: u64) -> Result<CheckReport> {
    let mut d = Draw::new(seed);
    let zero_cost = QuadraticCost::zero().spec(1.0)?;
    let grid = ActionGrid::boxed(&[-1.0], &[1.0], ActionGrid::DEFAULT_PER_AXIS)?;
    let one = |_: &[f64], o: &mut [f64]| o[0] = 1.0;
    let zero_q = |_: &[f64], o: &mut [f64]| o[0] = 0.0;
    let zero_r = |_: &[f64]| 0.0;

    let inert = FamilyModel::frozen(1).spec(1.0)?;
    let m = d.measure(5, 3.0, 2.0);
    let h0 = hamiltonian(&inert, &zero_cost, 0.0, &m, &Fields { p: &one, q: &one, r: &|x| x[0] }, &grid)?;

    let mut ctl = FamilyModel::frozen(1);
    ctl.drift = DriftFamily::controlled(1, 1.0);
    let ctl = ctl.spec(1.0)?;
    let dirac = AtomicMeasure::dirac(vec![0.4], 1.0)?;
    let h1 = hamiltonian(&ctl, &zero_cost, 0.0, &dirac, &Fields { p: &one, q: &zero_q, r: &zero_r }, &grid)?;

    let model = branching_model()?;
    let cost = QuadraticCost {
        action: 0.3,
        state: 0.1,
        ..QuadraticCost::zero()
    }
    .spec(1.0)?;
    let l_g = hamiltonian_lipschitz(&model)?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = d.measure(4, 3.0, 2.0);
        let (k, eta) = (d.uniform(0.1, 2.0), d.uniform(0.0, 1.0));
        let (dp, dq, dr) = (d.uniform(-1.0, 1.0), d.uniform(-1.0, 1.0), d.uniform(-1.0, 1.0));
        let p1 = move |x: &[f64], o: &mut [f64]| o[0] = (k * x[0]).sin();
        let q1 = move |x: &[f64], o: &mut [f64]| o[0] = (k * x[0]).cos();
        let r1 = |x: &[f64]| 0.5 * x[0];
        let p2 = move |x: &[f64], o: &mut [f64]| o[0] = (k * x[0]).sin() + eta * dp * x[0].cos();
        let q2 = move |x: &[f64], o: &mut [f64]| o[0] = (k * x[0]).cos() + eta * dq;
        let r2 = move |x: &[f64]| 0.5 * x[0] + eta * dr * (2.0 * x[0]).sin();
        let small = ActionGrid::boxed(&[-1.0], &[1.0], 9)?;
        let a = hamiltonian(&model, &cost, 0.0, &m, &Fields { p: &p1, q: &q1, r: &r1 }, &small)?.value;
        let b = hamiltonian(&model, &cost, 0.0, &m, &Fields { p: &p2, q: &q2, r: &r2 }, &small)?.value;
        let allowed = l_g * m.integrate(|x| 1.0 + x[0].abs()) * 3.0 * eta + 1e-12;
        worst = worst.max((a - b).abs() / allowed);
    }
    let empty_rejected = hamiltonian(&ctl, &zero_cost, 0.0, &dirac, &Fields { p: &one, q: &zero_q, r: &zero_r }, &ActionGrid {
        points: Vec::new(),
    })
    .is_err();
    Ok(CheckReport {
        name: "hamiltonian".into(),
        passed: h0.value == 0.0 && h1.value == -1.0 && h1.argmin == vec![-1.0] && worst <= 1.0 && empty_rejected,
        budget: budget(&[
            ("inert_value", h0.value),
            ("linear_value", h1.value),
            ("max_lipschitz_usage", worst),
            ("lipschitz_constant", l_g),
        ]),
        detail: json!({"linear_argmin": h1.argmin, "empty_grid_rejected": empty_rejected, "instances": 50}),
    })
}
