use ehtx::{BatteryModel, EfficiencyModel};
use proptest::prelude::*;

fn model(r: f64, v: f64) -> BatteryModel {
    BatteryModel::internal_resistance(1.0, r, v).unwrap()
}

// Efficiencies written out independently of the library.
fn n_c(c: f64, r: f64, v: f64) -> f64 {
    1.5 - 0.5 * (1.0 + 4.0 * r * c / (v * v)).sqrt()
}

fn n_d(d: f64, r: f64, v: f64) -> f64 {
    0.5 + 0.5 * (1.0 - 4.0 * r * d / (v * v)).sqrt()
}

#[test]
fn reference_values_at_five_ohm() {
    let m = model(5.0, 1.5);
    assert!((m.max_charge_power() - 0.9).abs() < 1e-12);
    assert!((m.max_discharge_power() - 0.1125).abs() < 1e-12);
    assert!(m.charge_efficiency(0.9).unwrap().abs() < 1e-12);
    assert!((m.charge_efficiency(0.1).unwrap() - n_c(0.1, 5.0, 1.5)).abs() < 1e-14);
    assert!((m.charge_efficiency(0.1).unwrap() - 0.81281).abs() < 1e-5);
    assert!((m.discharge_efficiency(0.1125).unwrap() - 0.5).abs() < 1e-12);
    assert!((m.internal_charge_power(0.1).unwrap() - 0.081281).abs() < 1e-6);
    assert!((m.internal_discharge_power(0.05).unwrap() - 0.05729).abs() < 1e-5);
    assert!((m.internal_discharge_power(0.1125).unwrap() - 0.225).abs() < 1e-12);
    assert!((m.invert_internal_discharge(0.225).unwrap() - 0.1125).abs() < 1e-9);
    assert!((m.optimal_charge_power(1.0) - 0.409807621).abs() < 1e-8);
    assert_eq!(m.optimal_charge_power(0.05), 0.05);
}

#[test]
fn fixed_efficiency_ignores_resistance() {
    let m = BatteryModel::new(1.0, 50.0, 1.5, EfficiencyModel::fixed_default()).unwrap();
    let eta = 0.75f64.sqrt();
    assert!((m.charge_efficiency(10.0).unwrap() - eta).abs() < 1e-15);
    assert!((m.discharge_efficiency(10.0).unwrap() - eta).abs() < 1e-15);
    assert!(m.max_charge_power().is_infinite());
}

proptest! {
    #[test]
    fn efficiencies_strictly_decrease(r in 0.1f64..100.0, v in 0.5f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!((a - b).abs() > 1e-6);
        let m = model(r, v);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (cp, dp) = (m.max_charge_power(), m.max_discharge_power());
        prop_assert!(m.charge_efficiency(lo * cp).unwrap() > m.charge_efficiency(hi * cp).unwrap());
        prop_assert!(m.discharge_efficiency(lo * dp).unwrap() > m.discharge_efficiency(hi * dp).unwrap());
    }

    #[test]
    fn internal_maps_have_the_right_curvature(r in 0.1f64..100.0, v in 0.5f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let m = model(r, v);
        let (cp, dp) = (m.max_charge_power(), m.max_discharge_power());
        let f = |x: f64| m.internal_charge_power(x).unwrap();
        let g = |x: f64| m.internal_discharge_power(x).unwrap();
        let (ca, cb) = (a * cp, b * cp);
        let mid = f(0.5 * (ca + cb));
        prop_assert!(mid >= 0.5 * (f(ca) + f(cb)) - 1e-12 * mid.abs().max(1e-300));
        let (da, db) = (a * dp, b * dp);
        let mid = g(0.5 * (da + db));
        prop_assert!(mid <= 0.5 * (g(da) + g(db)) + 1e-12 * mid.abs().max(1e-300));
    }

    #[test]
    fn discharge_inversion_round_trips(r in 0.1f64..100.0, v in 0.5f64..3.0, a in 0.0f64..=1.0) {
        let m = model(r, v);
        let d = a * m.max_discharge_power();
        let back = m.invert_internal_discharge(m.internal_discharge_power(d).unwrap()).unwrap();
        prop_assert!((back - d).abs() <= 1e-9, "{} vs {}", back, d);
    }

    #[test]
    fn higher_resistance_is_never_more_efficient(r1 in 0.1f64..50.0, k in 1.0f64..10.0, v in 0.5f64..3.0, a in 0.0f64..1.0) {
        let (m1, m2) = (model(r1, v), model(r1 * k, v));
        let c = a * m2.max_charge_power();
        let d = a * m2.max_discharge_power();
        prop_assert!(m1.charge_efficiency(c).unwrap() >= m2.charge_efficiency(c).unwrap() - 1e-15);
        prop_assert!(m1.discharge_efficiency(d).unwrap() >= m2.discharge_efficiency(d).unwrap() - 1e-15);
        prop_assert!((m2.charge_efficiency(c).unwrap() - n_c(c, r1 * k, v)).abs() < 1e-12);
        prop_assert!((m2.discharge_efficiency(d).unwrap() - n_d(d, r1 * k, v)).abs() < 1e-12);
    }

    #[test]
    fn optimal_charge_power_beats_a_grid(r in 0.1f64..100.0, v in 0.5f64..3.0, c in 1e-6f64..2.0) {
        let m = model(r, v);
        let cp = m.optimal_charge_power(c);
        prop_assert!(cp <= c.min(m.max_charge_power()) + 1e-15);
        let best = m.internal_charge_power(cp).unwrap();
        let hi = c.min(m.max_charge_power());
        let step = 1e-4 * m.max_charge_power();
        let mut x = 0.0;
        while x <= hi {
            prop_assert!(best >= m.internal_charge_power(x).unwrap() - 1e-15);
            x += step;
        }
    }
}
