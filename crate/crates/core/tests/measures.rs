use bmv_core::measures::*;
use proptest::prelude::*;

fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-4.0f64..4.0, 0.0f64..2.0), 0..6)
}

fn measure(a: &[(f64, f64)]) -> AtomicMeasure {
    AtomicMeasure::new(1, a.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
}

/// Depth-two labels `ij` with `i, j ∈ 1..=4` form an antichain, so any
/// subset is a valid configuration.
fn config() -> impl Strategy<Value = Configuration> {
    prop::collection::vec(prop::option::of(-3.0f64..3.0), 16).prop_map(|slots| {
        let particles = slots
            .iter()
            .enumerate()
            .filter_map(|(k, x)| {
                x.map(|x| (Label::from_path(&[(k / 4 + 1) as u32, (k % 4 + 1) as u32]).unwrap(), vec![x]))
            })
            .collect();
        Configuration::new(1, particles).unwrap()
    })
}

proptest! {
    #[test]
    fn config_distance_is_a_metric(a in config(), b in config(), c in config()) {
        let d = |x: &Configuration, y: &Configuration| config_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        if a != b {
            prop_assert!(d(&a, &b) > 0.0);
        }
    }

    #[test]
    fn integration_is_linear_and_additive(a in atoms(), b in atoms(), s in -2.0f64..2.0) {
        let (ma, mb) = (measure(&a), measure(&b));
        let phi = |x: &[f64]| x[0].sin() + 0.5 * x[0];
        let psi = |x: &[f64]| (x[0] * x[0]).min(3.0);
        let lin = ma.integrate(|x| phi(x) + s * psi(x));
        let split = ma.integrate(phi) + s * ma.integrate(psi);
        prop_assert!((lin - split).abs() <= 1e-12 * (1.0 + split.abs()));
        let sum = ma.plus(&mb).unwrap().integrate(phi);
        let parts = ma.integrate(phi) + mb.integrate(phi);
        prop_assert!((sum - parts).abs() <= 1e-12 * (1.0 + parts.abs()));
    }

    #[test]
    fn merging_preserves_integrals(a in atoms()) {
        let mut doubled = a.clone();
        doubled.extend(a.iter().map(|&(x, w)| (x, 0.5 * w)));
        let m = measure(&doubled);
        let merged = m.merged();
        prop_assert!(merged.len() <= m.len());
        for phi in [|x: &[f64]| 1.0 + 0.0 * x[0], |x: &[f64]| x[0], |x: &[f64]| x[0].cos()] {
            let (u, v) = (m.integrate(phi), merged.integrate(phi));
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn configuration_measure_counts_particles(c in config()) {
        let m = c.to_measure();
        prop_assert_eq!(m.mass(), c.len() as f64);
        let s = c.sum(|x| x[0]);
        prop_assert!((m.integrate(|x| x[0]) - s).abs() < 1e-12);
    }
}
