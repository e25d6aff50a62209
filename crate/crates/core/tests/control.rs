use bmv_core::control::*;
use bmv_core::dynamics::*;
use bmv_core::measures::{AtomicMeasure, Configuration};
use proptest::prelude::*;

fn one_at(x: f64) -> InitLaw {
    InitLaw::Fixed(Configuration::single(vec![x]).unwrap())
}

fn zero_policy() -> Policy {
    Policy::zero(1, 1, 1.0)
}

fn lq_problem(dt: f64) -> ValueProblem {
    let mut model = FamilyModel::frozen(1);
    model.drift = DriftFamily::controlled(1, 1.0);
    ValueProblem {
        model: model.spec(1.0).unwrap(),
        cost: QuadraticCost {
            action: 1.0,
            terminal_state: 1.0,
            cap: 100.0,
            ..QuadraticCost::zero()
        }
        .spec(5.0)
        .unwrap(),
        t_end: 1.0,
        dt,
        seed: 5,
        action_lo: vec![-5.0],
        action_hi: vec![5.0],
        construction: Construction::Rounded,
        simplex: SimplexOptions {
            max_iterations: 200,
            x_tol: 1e-7,
            f_tol: 1e-12,
        },
    }
}

#[test]
fn cost_examples() {
    let frozen = FamilyModel::frozen(1).spec(1.0).unwrap();
    let cfg = SimConfig::new(0.0, 1.0, 0.01, 100, 1);
    let zero = QuadraticCost::zero().spec(1.0).unwrap();
    let e = evaluate_cost(&frozen, &zero_policy(), &zero, &one_at(0.3), &cfg).unwrap();
    assert_eq!((e.estimate, e.stderr), (0.0, 0.0));

    let mut conserving = FamilyModel::frozen(1);
    conserving.rate = RateFamily::Constant { value: 1.0 };
    conserving.diffusion = DiffusionFamily::constant(1.0);
    let conserving = conserving.spec(1.0).unwrap();
    let g1 = QuadraticCost {
        terminal_constant: 1.0,
        ..QuadraticCost::zero()
    }
    .spec(1.0)
    .unwrap();
    let e = evaluate_cost(&conserving, &zero_policy(), &g1, &one_at(0.0), &cfg).unwrap();
    assert!((e.estimate - 1.0).abs() < 1e-12);

    let l1 = QuadraticCost {
        constant: 1.0,
        ..QuadraticCost::zero()
    }
    .spec(1.0)
    .unwrap();
    let e = evaluate_cost(&frozen, &zero_policy(), &l1, &one_at(0.0), &cfg).unwrap();
    assert!((e.estimate - 1.0).abs() < 1e-12);
}

#[test]
fn running_cost_sees_branching_population() {
    // Yule process: ∫_0^T E#K_s ds = e^T - 1 on the continuous clock.
    let mut m = FamilyModel::frozen(1);
    m.rate = RateFamily::Constant { value: 1.0 };
    m.offspring = OffspringFamily::deterministic(2);
    let spec = m.spec(1.0).unwrap();
    let l1 = QuadraticCost {
        constant: 1.0,
        ..QuadraticCost::zero()
    }
    .spec(1.0)
    .unwrap();
    let cfg = SimConfig::new(0.0, 0.5, 1e-3, 4000, 3);
    let e = evaluate_cost(&spec, &zero_policy(), &l1, &one_at(0.0), &cfg).unwrap();
    let exact = 0.5f64.exp() - 1.0;
    assert!((e.estimate - exact).abs() < 3.0 * e.stderr + 1e-3, "{e:?} vs {exact}");
    assert!(e.stderr > 0.0);
}

#[test]
fn terminal_value_needs_no_simulation() {
    let problem = lq_problem(0.1);
    let nu = AtomicMeasure::new(1, vec![(vec![0.5], 1.5), (vec![-2.0], 0.25)]).unwrap();
    let v = approximate_value(&problem, &nu, 1.0, PolicyFamily::Constant, Budget {
        restarts: 3,
        iterations: 10,
        replicas: 10,
    })
    .unwrap();
    assert_eq!(v.value, 1.5 * 0.25 + 0.25 * 4.0);
    assert_eq!(v.evaluations, 0);
}

#[test]
fn lq_toy_matches_scalar_oracle() {
    let problem = lq_problem(0.1);
    let budget = Budget {
        restarts: 2,
        iterations: 200,
        replicas: 50,
    };
    for (x0, t) in [(1.0, 0.0), (-0.6, 0.3), (2.0, 0.5)] {
        let nu = AtomicMeasure::dirac(vec![x0], 1.0).unwrap();
        let v = approximate_value(&problem, &nu, t, PolicyFamily::Constant, budget).unwrap();
        let tau = 1.0 - t;
        // minimise τ a² + (x0 + a τ)² by hand
        let a_star = -x0 * tau / (tau + tau * tau);
        let v_star = tau * a_star * a_star + (x0 + a_star * tau).powi(2);
        assert!((v.value - v_star).abs() < 1e-4, "x0 = {x0}, t = {t}: {} vs {v_star}", v.value);
        assert!((v.policy.params[0] - a_star).abs() < 1e-3);
        assert!(v.converged);
    }
}

#[test]
fn flat_objective_restarts_agree() {
    let mut problem = lq_problem(0.1);
    problem.cost = QuadraticCost {
        terminal_state: 1.0,
        ..QuadraticCost::zero()
    }
    .spec(5.0)
    .unwrap();
    let mut m = FamilyModel::frozen(1);
    m.diffusion = DiffusionFamily::constant(0.5);
    problem.model = m.spec(1.0).unwrap();
    let nu = AtomicMeasure::dirac(vec![0.3], 1.0).unwrap();
    let v = approximate_value(&problem, &nu, 0.0, PolicyFamily::Constant, Budget {
        restarts: 4,
        iterations: 30,
        replicas: 200,
    })
    .unwrap();
    let baseline = evaluate_cost(
        &problem.model,
        &Policy::zero(1, 1, 5.0),
        &problem.cost,
        &InitLaw::from_measure(nu, Construction::Rounded),
        &SimConfig::new(0.0, 1.0, 0.1, 200, problem.seed),
    )
    .unwrap();
    for r in &v.restarts {
        assert_eq!(r.value, baseline.estimate);
    }
}

#[test]
fn dpp_on_lq_toy() {
    let problem = lq_problem(0.1);
    let nu = AtomicMeasure::dirac(vec![1.0], 1.0).unwrap();
    let budget = Budget {
        restarts: 1,
        iterations: 80,
        replicas: 20,
    };
    let mid = check_dpp(&problem, &nu, 0.0, 0.5, PolicyFamily::Constant, budget, 5e-3).unwrap();
    assert!(mid.holds && mid.gap <= 5e-3, "{mid:?}");
    assert!((mid.lhs - 0.5).abs() < 1e-4);

    let same = check_dpp(&problem, &nu, 0.0, 0.0, PolicyFamily::Constant, budget, 0.0).unwrap();
    assert_eq!(same.gap, 0.0);

    let full = check_dpp(&problem, &nu, 0.0, 1.0, PolicyFamily::Constant, budget, 1e-9).unwrap();
    assert!(full.holds, "{full:?}");
}

#[test]
fn dpp_rejects_split_outside_horizon() {
    let problem = lq_problem(0.1);
    let nu = AtomicMeasure::dirac(vec![1.0], 1.0).unwrap();
    let budget = Budget {
        restarts: 1,
        iterations: 5,
        replicas: 2,
    };
    assert!(check_dpp(&problem, &nu, 0.5, 0.2, PolicyFamily::Constant, budget, 0.0).is_err());
}

fn noisy_problem() -> ValueProblem {
    let mut model = FamilyModel::frozen(1);
    model.drift = DriftFamily::controlled(1, 1.0);
    model.diffusion = DiffusionFamily::constant(0.5);
    model.rate = RateFamily::Constant { value: 0.5 };
    model.offspring = OffspringFamily::Fixed {
        pmf: vec![0.3, 0.3, 0.4],
    };
    ValueProblem {
        model: model.spec(1.0).unwrap(),
        cost: QuadraticCost {
            action: 0.5,
            state: 1.0,
            terminal_state: 1.0,
            cap: 25.0,
            ..QuadraticCost::zero()
        }
        .spec(2.0)
        .unwrap(),
        t_end: 0.5,
        dt: 0.05,
        seed: 17,
        action_lo: vec![-2.0],
        action_hi: vec![2.0],
        construction: Construction::Rounded,
        simplex: SimplexOptions::default(),
    }
}

#[test]
fn richer_family_does_not_lose() {
    let problem = noisy_problem();
    let nu = AtomicMeasure::dirac(vec![1.0], 1.0).unwrap();
    let budget = Budget {
        restarts: 2,
        iterations: 60,
        replicas: 300,
    };
    let c = approximate_value(&problem, &nu, 0.0, PolicyFamily::Constant, budget).unwrap();
    let a = approximate_value(&problem, &nu, 0.0, PolicyFamily::AffineClamped, budget).unwrap();
    assert!(a.value <= c.value + 3.0 * c.stderr, "{} vs {}", a.value, c.value);
}

#[test]
fn value_is_continuous_in_the_initial_measure() {
    let problem = noisy_problem();
    let nu = AtomicMeasure::dirac(vec![1.0], 1.0).unwrap();
    let budget = Budget {
        restarts: 1,
        iterations: 40,
        replicas: 400,
    };
    let base = approximate_value(&problem, &nu, 0.0, PolicyFamily::Constant, budget).unwrap().value;
    let gaps: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let bumped = nu.plus(&AtomicMeasure::dirac(vec![-0.5], eps).unwrap()).unwrap();
            let v = approximate_value(&problem, &bumped, 0.0, PolicyFamily::Constant, budget).unwrap().value;
            (v - base).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn cost_is_invariant_across_initial_constructions() {
    let problem = noisy_problem();
    let nu = AtomicMeasure::new(1, vec![(vec![0.5], 1.3), (vec![-1.0], 0.6)]).unwrap();
    let cfg = SimConfig::new(0.0, 0.5, 0.05, 4000, 8);
    let policy = Policy::new(PolicyFamily::Constant, 1, vec![-0.4], vec![-2.0], vec![2.0]).unwrap();
    let est: Vec<CostEstimate> = [Construction::Rounded, Construction::Poissonized]
        .iter()
        .map(|&c| {
            evaluate_cost(&problem.model, &policy, &problem.cost, &InitLaw::from_measure(nu.clone(), c), &cfg).unwrap()
        })
        .collect();
    let joint = (est[0].stderr.powi(2) + est[1].stderr.powi(2)).sqrt();
    assert!((est[0].estimate - est[1].estimate).abs() <= 3.0 * joint, "{est:?}");
}

proptest! {
    #[test]
    fn policy_lipschitz_probe(
        family in prop::sample::select(vec![PolicyFamily::Constant, PolicyFamily::AffineClamped, PolicyFamily::TanhFeatures]),
        params in prop::collection::vec(-3.0f64..3.0, 6),
        x in prop::collection::vec(-5.0f64..5.0, 2),
        y in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let n = 2;
        let k = family.param_count(2, n);
        let p = Policy::new(family, 2, params[..k].to_vec(), vec![-1.0, -2.0], vec![1.0, 0.5]).unwrap();
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        p.action(0.0, &x, &mut a);
        p.action(0.0, &y, &mut b);
        for j in 0..2 {
            prop_assert!(a[j] >= p.lo[j] && a[j] <= p.hi[j]);
        }
        let da = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let dx = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assert!(da <= p.lipschitz() * dx * (1.0 + 1e-6) + 1e-12);
        let xn = (x[0] * x[0] + x[1] * x[1]).sqrt();
        prop_assert!((a[0] * a[0] + a[1] * a[1]).sqrt() <= p.growth() * (1.0 + xn));
    }
}
