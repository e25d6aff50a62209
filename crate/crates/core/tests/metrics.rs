use bmv_core::measures::AtomicMeasure;
use bmv_core::metrics::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn line(atoms: &[(f64, f64)]) -> AtomicMeasure {
    AtomicMeasure::new(1, atoms.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
}

/// Adaptive Simpson on [a, b].
fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let (l, r) = (simpson(f, a, c), simpson(f, c, b));
        if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
            return l + r + (l + r - whole) / 15.0;
        }
        rec(f, a, c, l, tol / 2.0, depth - 1) + rec(f, c, b, r, tol / 2.0, depth - 1)
    }
    // split at the origin and at a few scales so the recursion sees the bulk
    let cuts = [a, -100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0, b];
    cuts.windows(2)
        .filter(|w| w[0] >= a && w[1] <= b && w[0] < w[1])
        .map(|w| rec(&f, w[0], w[1], simpson(&f, w[0], w[1]), tol, 50))
        .sum()
}

/// Exhaustive matching on the padded instance with unit atoms.
fn brute_force_w1(a: &[f64], b: &[f64], x0: f64) -> f64 {
    #[derive(Clone, Copy)]
    enum P {
        At(f64),
        Cemetery,
    }
    let n = a.len().max(b.len());
    let pad = |v: &[f64]| {
        let mut out: Vec<P> = v.iter().map(|&x| P::At(x)).collect();
        out.resize(n, P::Cemetery);
        out
    };
    let (pa, pb) = (pad(a), pad(b));
    let cost = |p: P, q: P| match (p, q) {
        (P::At(x), P::At(y)) => (x - y).abs().min(1.0),
        (P::At(x), P::Cemetery) | (P::Cemetery, P::At(x)) => (x - x0).abs().min(1.0) + 1.0,
        (P::Cemetery, P::Cemetery) => 0.0,
    };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| cost(pa[i], pb[j])).sum();
        best = best.min(c);
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

fn unit_measure(xs: &[f64]) -> AtomicMeasure {
    line(&xs.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>())
}

#[test]
fn rho_f_dirac_mass_gap_matches_quadrature_oracle() {
    let idx = LambdaIndex::for_dim(1);
    let integral = adaptive_simpson(|n| (1.0 + n * n).powi(-4), -1e4, 1e4, 1e-14);
    assert!((integral - 5.0 * PI / 16.0).abs() < 1e-10);
    let oracle = integral / (2.0 * PI);
    assert!((oracle - 5.0 / 32.0).abs() < 1e-10);
    for scheme in [QuadratureScheme::closed_form(), QuadratureScheme::grid(50.0, 20_001)] {
        let r = rho_f(&line(&[(0.0, 1.0)]), &line(&[(0.0, 2.0)]), idx, scheme).unwrap();
        assert!((r.value.powi(2) - oracle).abs() < 1e-10, "{scheme:?}: {}", r.value);
    }
}

#[test]
fn rho_f_unit_shift_matches_quadrature_oracle() {
    let idx = LambdaIndex::for_dim(1);
    let oracle = adaptive_simpson(|n| (1.0 - n.cos()) * (1.0 + n * n).powi(-4), -1e4, 1e4, 1e-14) / PI;
    for scheme in [QuadratureScheme::closed_form(), QuadratureScheme::grid(50.0, 20_001)] {
        let r = rho_f(&line(&[(0.0, 1.0)]), &line(&[(1.0, 1.0)]), idx, scheme).unwrap();
        assert!((r.value.powi(2) - oracle).abs() < 1e-8, "{scheme:?}");
    }
}

#[test]
fn sobolev_identity_closed_form_vs_grid() {
    let idx = LambdaIndex::for_dim(1);
    let s = sobolev_neg_norm(&line(&[(0.0, 1.0)]), &line(&[(0.0, 2.0)]), idx, QuadratureScheme::grid(50.0, 20_001))
        .unwrap();
    assert!((s.value.powi(2) - 5.0 * PI / 16.0).abs() < 1e-9);

    let mut rng_state = 7u64;
    let mut next = || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..20 {
        let a: Vec<(f64, f64)> = (0..3).map(|_| (4.0 * next() - 2.0, 2.0 * next())).collect();
        let b: Vec<(f64, f64)> = (0..4).map(|_| (4.0 * next() - 2.0, 2.0 * next())).collect();
        let (ma, mb) = (line(&a), line(&b));
        let sob = sobolev_neg_norm(&ma, &mb, idx, QuadratureScheme::closed_form()).unwrap();
        let rho = rho_f(&ma, &mb, idx, QuadratureScheme::grid(50.0, 20_001)).unwrap();
        assert!((sob.value.powi(2) / (2.0 * PI) - rho.value.powi(2)).abs() < 1e-8);
    }
}

#[test]
fn rho_f_grid_in_two_dimensions_is_symmetric_and_vanishes_on_diagonal() {
    let idx = LambdaIndex::for_dim(2);
    let scheme = QuadratureScheme::default_for(2);
    let a = AtomicMeasure::new(2, vec![(vec![0.0, 0.0], 1.0), (vec![0.5, -0.2], 0.5)]).unwrap();
    let b = AtomicMeasure::new(2, vec![(vec![0.1, 0.0], 1.2)]).unwrap();
    assert_eq!(rho_f(&a, &a, idx, scheme).unwrap().value, 0.0);
    let ab = rho_f(&a, &b, idx, scheme).unwrap().value;
    let ba = rho_f(&b, &a, idx, scheme).unwrap().value;
    assert!(ab > 0.0 && (ab - ba).abs() < 1e-14);
}

#[test]
fn w1_examples_match_exhaustive_oracle() {
    let cases: &[(&[f64], &[f64])] = &[
        (&[0.0], &[0.0, 0.0]),
        (&[0.0], &[0.3]),
        (&[0.2, 1.7, -3.0], &[0.1]),
        (&[0.0, 0.4, 0.9, 2.5], &[0.35, 3.0]),
        (&[], &[0.5, -0.5]),
    ];
    for &(a, b) in cases {
        let (ma, mb) = (unit_measure(a), unit_measure(b));
        let oracle = brute_force_w1(a, b, 0.0);
        let primal = truncated_w1(&ma, &mb, &[0.0]).unwrap();
        let fast = truncated_w1_line(&ma, &mb, 0.0).unwrap();
        assert!((primal - oracle).abs() <= 1e-12, "{a:?} {b:?}: {primal} vs {oracle}");
        assert!((fast - oracle).abs() <= 1e-12, "{a:?} {b:?}: {fast} vs {oracle}");
    }
}

#[test]
fn w1_padding_invariance_is_exact() {
    let a = line(&[(0.1, 2.0), (0.8, 1.0), (4.0, 1.0)]);
    let b = line(&[(0.0, 1.0), (0.5, 1.0)]);
    let tight = truncated_w1(&a, &b, &[0.0]).unwrap();
    let padded = truncated_w1_padded(&a, &b, &[0.0], a.mass() + 5.0).unwrap();
    assert_eq!(tight, padded);
}

#[test]
fn weak_convergence_is_detected_monotonically() {
    let limit = line(&[(0.0, 2.0)]);
    let idx = LambdaIndex::for_dim(1);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for n in 1..=100 {
        let inv = 1.0 / n as f64;
        let m = line(&[(inv, 1.0), (0.0, 1.0 + inv)]);
        let w = truncated_w1(&m, &limit, &[0.0]).unwrap();
        let r = rho_f(&m, &limit, idx, QuadratureScheme::closed_form()).unwrap().value;
        assert!(w < last.0 && r < last.1, "n = {n}");
        last = (w, r);
    }
    assert!(last.0 < 0.03 && last.1 < 0.01);
}

#[test]
fn domination_holds_on_random_pairs() {
    let idx = LambdaIndex::for_dim(1);
    let mut state = 99u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let r = check_domination(&line(&[(0.0, 1.0)]), &line(&[(0.0, 2.0)]), idx, QuadratureScheme::closed_form(), &[0.0])
        .unwrap();
    assert!(r.holds && (r.rho_f - (5.0f64 / 32.0).sqrt()).abs() < 1e-15 && r.w1 == 1.0);
    for _ in 0..100 {
        let k1 = 1 + (next() * 4.0) as usize;
        let k2 = 1 + (next() * 4.0) as usize;
        let a: Vec<(f64, f64)> = (0..k1).map(|_| (6.0 * next() - 3.0, 3.0 * next())).collect();
        let b: Vec<(f64, f64)> = (0..k2).map(|_| (6.0 * next() - 3.0, 3.0 * next())).collect();
        let r = check_domination(&line(&a), &line(&b), idx, QuadratureScheme::closed_form(), &[0.0]).unwrap();
        assert!(r.holds, "{a:?} {b:?}: {r:?}");
    }
}

#[test]
fn dual_matches_primal_on_hand_built_potentials() {
    // δ_0 vs δ_{0.4}: the potential ρ(·, 0) is optimal.
    let a = line(&[(0.0, 1.0)]);
    let b = line(&[(0.4, 1.0)]);
    let t = TrialFunction::truncated_distance_to(vec![0.0]);
    let dual = w1_dual_lower_bound(&a, &b, &[t.clone()], &[0.0]).unwrap();
    assert!((dual - truncated_w1(&a, &b, &[0.0]).unwrap()).abs() < 1e-6);
    // 2δ_0 vs δ_{0.7}: move one unit and bury the other.
    let a = line(&[(0.0, 2.0)]);
    let b = line(&[(0.7, 1.0)]);
    let dual = w1_dual_lower_bound(&a, &b, &[t], &[0.0]).unwrap();
    assert!((dual - truncated_w1(&a, &b, &[0.0]).unwrap()).abs() < 1e-6);
}

fn atoms(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 0..=max)
}

fn unit_atoms(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.5f64..2.5, 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn w1_is_a_metric(a in atoms(5), b in atoms(5), c in atoms(5)) {
        let (a, b, c) = (line(&a), line(&b), line(&c));
        let ab = truncated_w1(&a, &b, &[0.0]).unwrap();
        let ba = truncated_w1(&b, &a, &[0.0]).unwrap();
        let bc = truncated_w1(&b, &c, &[0.0]).unwrap();
        let ac = truncated_w1(&a, &c, &[0.0]).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-8);
        prop_assert_eq!(truncated_w1(&a, &a, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn rho_f_is_a_metric(a in atoms(5), b in atoms(5), c in atoms(5)) {
        let idx = LambdaIndex::for_dim(1);
        let s = QuadratureScheme::closed_form();
        let (a, b, c) = (line(&a), line(&b), line(&c));
        let ab = rho_f(&a, &b, idx, s).unwrap().value;
        let ba = rho_f(&b, &a, idx, s).unwrap().value;
        let bc = rho_f(&b, &c, idx, s).unwrap().value;
        let ac = rho_f(&a, &c, idx, s).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-6);
        prop_assert_eq!(rho_f(&a, &a, idx, s).unwrap().value, 0.0);
    }

    #[test]
    fn line_solver_agrees_with_transport(a in atoms(6), b in atoms(6), x0 in -1.0f64..1.0) {
        let (a, b) = (line(&a), line(&b));
        let slow = truncated_w1(&a, &b, &[x0]).unwrap();
        let fast = truncated_w1_line(&a, &b, x0).unwrap();
        prop_assert!((slow - fast).abs() < 1e-9 * (1.0 + slow), "{} vs {}", slow, fast);
    }

    #[test]
    fn transport_matches_exhaustive_matching(a in unit_atoms(4), b in unit_atoms(4), x0 in -0.5f64..0.5) {
        let oracle = brute_force_w1(&a, &b, x0);
        let got = truncated_w1(&unit_measure(&a), &unit_measure(&b), &[x0]).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-12);
    }

    #[test]
    fn padding_invariance(a in unit_atoms(4), b in unit_atoms(4), extra in 0u32..6) {
        let (ma, mb) = (unit_measure(&a), unit_measure(&b));
        let tight = truncated_w1(&ma, &mb, &[0.0]).unwrap();
        let level = ma.mass().max(mb.mass()) + extra as f64;
        prop_assert_eq!(tight, truncated_w1_padded(&ma, &mb, &[0.0], level).unwrap());
    }

    #[test]
    fn dual_never_exceeds_primal(a in atoms(4), b in atoms(4), centres in prop::collection::vec(-3.0f64..3.0, 0..4)) {
        let (a, b) = (line(&a), line(&b));
        let trials: Vec<TrialFunction> = centres.into_iter().map(|c| TrialFunction::truncated_distance_to(vec![c])).collect();
        let dual = w1_dual_lower_bound(&a, &b, &trials, &[0.0]).unwrap();
        let primal = truncated_w1(&a, &b, &[0.0]).unwrap();
        prop_assert!(dual <= primal + 1e-9, "{} > {}", dual, primal);
    }
}
