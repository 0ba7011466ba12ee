use proptest::prelude::*;

use iptm::model::{
    self, cabin_derivative, coolant_derivative, fuel_rate, power_split, soc_derivative,
    ControlInput, EngineMode, PowertrainState, VehicleParams,
};

fn mode() -> impl Strategy<Value = EngineMode> {
    prop_oneof![Just(EngineMode::Off), Just(EngineMode::Idle), Just(EngineMode::On)]
}

/// A state, control and demand that `model::step` may or may not accept.
fn operating_point() -> impl Strategy<Value = (PowertrainState, ControlInput, f64)> {
    let p = VehicleParams::default();
    let b = p.battery.clone();
    let c = p.cabin.clone();
    (
        b.soc_min + 0.01..b.soc_max - 0.01,
        p.t_amb..p.engine.t_cl_max,
        0.0..30.0f64,
        mode(),
        b.p_bat_min..b.p_bat_max,
        c.q_heat_min..c.q_heat_max,
        -20_000.0..30_000.0f64,
    )
        .prop_map(move |(soc, t_cl, t_cab, mode, p_bat, q_heat, p_trac)| {
            let p_bat = match mode {
                EngineMode::On => p_bat,
                _ => model::unloaded_battery_power(p_trac, &p),
            };
            (
                PowertrainState { soc, t_cl, t_cab },
                ControlInput { mode, p_bat, q_heat },
                p_trac,
            )
        })
}

proptest! {
    #[test]
    fn coolant_energy_bookkeeping((x, u, p_trac) in operating_point()) {
        let p = VehicleParams::default();
        if let Ok(out) = model::step(&x, &u, p_trac, &p) {
            let f = out.flows;
            let stored = (out.next.t_cl - x.t_cl) * p.engine.m_eng_c_eng;
            let balance = p.t_s * (f.q_fuel - f.p_e - f.q_exh - f.q_air - f.q_rad - f.q_heat);
            let scale = p.t_s * f.gross();
            prop_assert!((stored - balance).abs() <= 1e-12 * scale, "{stored} vs {balance}");
        }
    }

    #[test]
    fn soc_rate_strictly_decreasing_in_battery_power(
        soc in 0.35..0.85f64,
        a in -25_000.0..25_000.0f64,
        d in 1.0..5_000.0f64,
    ) {
        let b = VehicleParams::default().battery;
        if let (Ok(lo), Ok(hi)) = (soc_derivative(soc, a, &b), soc_derivative(soc, a + d, &b)) {
            prop_assert!(hi < lo);
        }
    }

    #[test]
    fn cold_engine_never_burns_less(
        p_e in 1.0..40_000.0f64,
        t_cold in -20.0..100.0f64,
        warmer in 0.0..60.0f64,
    ) {
        let p = VehicleParams::default();
        let p_e = p_e.min(p.engine.p_e_max);
        let cold = fuel_rate(EngineMode::On, p_e, t_cold, &p).unwrap();
        let warm = fuel_rate(EngineMode::On, p_e, t_cold + warmer, &p).unwrap();
        prop_assert!(cold >= warm);
    }

    #[test]
    fn fuel_is_zero_exactly_when_off((x, u, p_trac) in operating_point()) {
        let p = VehicleParams::default();
        if let Ok(out) = model::step(&x, &u, p_trac, &p) {
            prop_assert_eq!(out.fuel_g == 0.0, u.mode == EngineMode::Off);
        }
    }

    #[test]
    fn step_is_pure((x, u, p_trac) in operating_point()) {
        let p = VehicleParams::default();
        let a = model::step(&x, &u, p_trac, &p);
        let b = model::step(&x, &u, p_trac, &p);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a.next.soc.to_bits(), b.next.soc.to_bits());
            prop_assert_eq!(a.next.t_cl.to_bits(), b.next.t_cl.to_bits());
            prop_assert_eq!(a.next.t_cab.to_bits(), b.next.t_cab.to_bits());
        }
    }

    #[test]
    fn step_is_euler_on_the_analytic_rates((x, u, p_trac) in operating_point()) {
        let p = VehicleParams::default();
        if let Ok(out) = model::step(&x, &u, p_trac, &p) {
            let p_e = power_split(p_trac, u.mode, u.p_bat, &p).unwrap();
            let d_soc = soc_derivative(x.soc, u.p_bat, &p.battery).unwrap();
            let d_cl = coolant_derivative(x.t_cl, u.mode, p_e, u.q_heat, &p).unwrap();
            let d_cab = cabin_derivative(x.t_cab, u.q_heat, &p);
            prop_assert_eq!(out.next.soc, x.soc + p.t_s * d_soc);
            prop_assert_eq!(out.next.t_cl, x.t_cl + p.t_s * d_cl);
            prop_assert_eq!(out.next.t_cab, x.t_cab + p.t_s * d_cab);
        }
    }
}

/// State after `t_end` seconds of constant control with Euler step `h`.
fn integrate(x0: PowertrainState, u: &ControlInput, p_trac: f64, h: f64, t_end: f64) -> PowertrainState {
    let mut p = VehicleParams::default();
    p.t_s = h;
    let n = (t_end / h).round() as usize;
    let mut x = x0;
    for _ in 0..n {
        x = model::step(&x, u, p_trac, &p).unwrap().next;
    }
    x
}

#[test]
fn euler_error_shrinks_at_first_order() {
    let cases = [
        (
            PowertrainState { soc: 0.6, t_cl: 60.0, t_cab: 5.0 },
            ControlInput { mode: EngineMode::On, p_bat: -6_000.0, q_heat: 1_500.0 },
            8_000.0,
        ),
        (
            PowertrainState { soc: 0.45, t_cl: 85.0, t_cab: 20.0 },
            ControlInput { mode: EngineMode::Off, p_bat: 15_000.0, q_heat: 1_800.0 },
            13_000.0,
        ),
    ];
    for (x0, mut u, p_trac) in cases {
        if u.mode == EngineMode::Off {
            u.p_bat = model::unloaded_battery_power(p_trac, &VehicleParams::default());
        }
        let t_end = 20.0;
        let reference = integrate(x0, &u, p_trac, 1e-4, t_end);
        let err = |h: f64| {
            let x = integrate(x0, &u, p_trac, h, t_end);
            [
                (x.soc - reference.soc).abs(),
                (x.t_cl - reference.t_cl).abs(),
                (x.t_cab - reference.t_cab).abs(),
            ]
        };
        let e = [err(1.0), err(0.1), err(0.01)];
        for d in 0..3 {
            for w in e.windows(2) {
                let order = (w[0][d] / w[1][d]).log10();
                assert!(order >= 0.9, "state {d}: errors {:?}, order {order}", e.map(|x| x[d]));
            }
        }
    }
}
