use mrl_core::device::*;
use proptest::prelude::*;

fn params() -> MemristorParams {
    MemristorParams::default()
}

#[test]
fn memristance_examples() {
    let p = params();
    assert_eq!(memristance(MemristorState::new(1.0), &p), 1e3);
    assert_eq!(memristance(MemristorState::new(0.0), &p), 1e6);
    let half = memristance(MemristorState::new(0.5), &p);
    assert!((half - 1998.002).abs() < 1e-3);
}

#[test]
fn pinched_at_origin_for_every_state() {
    let p = params();
    for k in 0..=10 {
        let s = MemristorState::new(k as f64 / 10.0);
        assert_eq!(memristor_current(s, 0.0, &p), 0.0);
        assert_eq!(state_derivative(s, 0.0, &p), 0.0);
    }
}

#[test]
fn rails_hold_against_outward_drive() {
    let p = params();
    assert_eq!(state_derivative(MemristorState::new(1.0), 0.5, &p), 0.0);
    assert_eq!(state_derivative(MemristorState::new(0.0), -0.5, &p), 0.0);
}

#[test]
fn symmetric_drive_returns_to_start() {
    let p = params();
    let start = MemristorState::new(0.5);
    let up = advance_state(start, 0.3, 1e-12, 8, &p);
    let back = advance_state(up, -0.3, 1e-12, 8, &p);
    assert!(up.x() > 0.5);
    assert!((back.x() - 0.5).abs() < 1e-3);
}

proptest! {
    #[test]
    fn memristance_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let p = params();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(memristance(MemristorState::new(hi), &p) <= memristance(MemristorState::new(lo), &p));
    }

    #[test]
    fn drift_follows_voltage_sign(x in 0.01f64..0.99, v in -2.0f64..2.0) {
        prop_assume!(v.abs() > 1e-6);
        let d = state_derivative(MemristorState::new(x), v, &params());
        prop_assert_eq!(d > 0.0, v > 0.0);
    }

    #[test]
    fn integration_stays_in_unit_interval(x in 0.0f64..=1.0, v in -3.0f64..3.0, dt in 1e-13f64..1e-9) {
        let s = advance_state(MemristorState::new(x), v, dt, 4, &params());
        prop_assert!((0.0..=1.0).contains(&s.x()));
    }

    #[test]
    fn current_is_ohmic_at_fixed_state(x in 0.0f64..=1.0, v in -2.0f64..2.0) {
        let p = params();
        let s = MemristorState::new(x);
        let i = memristor_current(s, v, &p);
        prop_assert!((i * memristance(s, &p) - v).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn mosfet_is_a_switch(v_gs in -2.0f64..2.0) {
        let n = MosfetParams::nmos();
        let p = MosfetParams::pmos();
        let gn = mosfet_conductance(v_gs, 0.0, &n);
        let gp = mosfet_conductance(v_gs, 0.0, &p);
        prop_assert!(gn == 1.0 / n.r_ds_on || gn == 1.0 / n.r_ds_off);
        prop_assert_eq!(gn == 1.0 / n.r_ds_on, v_gs > n.v_th);
        prop_assert_eq!(gp == 1.0 / p.r_ds_on, v_gs < -p.v_th);
    }
}
