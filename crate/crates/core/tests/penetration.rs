use granusense::sim::{
    analytic_stall_depth, dimensionless_acceleration, onset_depth, resistance_force,
    simulate_penetration, MediumSpec, PenetrationConfig, ProbeSpec, VibrationProfile,
    MEASURED_PROFILES,
};
use proptest::prelude::*;

const G: f64 = 9.81;

/// Stall depth found by bisection on the force law written out by hand.
fn bisect_stall(m: &MediumSpec, probe: &ProbeSpec, accel: f64) -> f64 {
    let gamma = accel / G;
    let z_on = m.onset_depth
        + if accel > 0.0 {
            m.onset_extension * gamma.min(1.0)
        } else {
            0.0
        };
    let f = |z: f64| {
        let excess = (z - z_on).max(0.0);
        m.jamming * m.bulk_density * G * probe.tip_area * excess.powf(1.5)
            / (1.0 + m.fluidization * gamma)
    };
    let (mut lo, mut hi) = (z_on, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < probe.force_limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn calibrated_stall_depths() {
    let probe = ProbeSpec::default();
    let p10 = VibrationProfile::for_voltage(10.0).unwrap();
    for (m, still) in [(MediumSpec::sand(), 0.055), (MediumSpec::rice(), 0.060)] {
        let z0 = bisect_stall(&m, &probe, 0.0);
        let z10 = bisect_stall(&m, &probe, 23.6);
        assert!((z0 - still).abs() < 1e-6, "{}: {z0}", m.name);
        assert!((z10 - 2.0 * still).abs() < 1e-6, "{}: {z10}", m.name);
        assert!(
            (analytic_stall_depth(&m, &probe, &VibrationProfile::OFF).unwrap() - z0).abs() < 1e-9
        );
        assert!((analytic_stall_depth(&m, &probe, &p10).unwrap() - z10).abs() < 1e-9);
    }
}

#[test]
fn onset_saturates_above_one_g() {
    let m = MediumSpec::rice();
    let p6 = VibrationProfile::for_voltage(6.0).unwrap();
    assert!((onset_depth(&m, &p6) - (0.005 + 0.04 * 9.6 / G)).abs() < 1e-12);
    for p in MEASURED_PROFILES.iter().filter(|p| p.accel_amplitude > G) {
        assert_eq!(onset_depth(&m, p), 0.045);
    }
}

#[test]
fn noise_free_trace_stalls_at_analytic_depth() {
    let probe = ProbeSpec::default();
    let cfg = PenetrationConfig {
        noise: false,
        ripple: false,
        ..Default::default()
    };
    for v in [0.0, 6.0, 8.0, 10.0, 12.0] {
        let vib = VibrationProfile::for_voltage(v).unwrap();
        for m in [MediumSpec::sand(), MediumSpec::rice()] {
            let trace = simulate_penetration(&m, &probe, &vib, &cfg, 1).unwrap();
            let want = analytic_stall_depth(&m, &probe, &vib).unwrap();
            let step = probe.descent_speed / cfg.sample_rate;
            assert!(trace.stalled);
            let got = trace.stall_depth.unwrap();
            assert!(
                got >= want - 1e-12 && got < want + step + 1e-12,
                "{} {v} V: {got} vs {want}",
                m.name
            );
        }
    }
}

#[test]
fn same_seed_same_trace() {
    let m = MediumSpec::sand();
    let vib = VibrationProfile::for_voltage(8.0).unwrap();
    let cfg = PenetrationConfig::default();
    let a = simulate_penetration(&m, &ProbeSpec::default(), &vib, &cfg, 42).unwrap();
    let b = simulate_penetration(&m, &ProbeSpec::default(), &vib, &cfg, 42).unwrap();
    let c = simulate_penetration(&m, &ProbeSpec::default(), &vib, &cfg, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.forces(), c.forces());
}

#[test]
fn rejects_profile_above_motor_limit() {
    let vib = VibrationProfile {
        voltage: 14.0,
        frequency: 320.0,
        accel_amplitude: 10.0,
    };
    let cfg = PenetrationConfig::default();
    assert!(
        simulate_penetration(&MediumSpec::sand(), &ProbeSpec::default(), &vib, &cfg, 0).is_err()
    );
}

proptest! {
    #[test]
    fn force_never_increases_with_gamma(z in 0.0..0.15f64, a in 0.0..40.0f64, b in 0.0..40.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let probe = ProbeSpec::default();
        let mk = |acc: f64| VibrationProfile { voltage: if acc == 0.0 { 0.0 } else { 1.0 }, frequency: 100.0 * (acc > 0.0) as u8 as f64, accel_amplitude: acc };
        for m in [MediumSpec::sand(), MediumSpec::rice()] {
            let f_lo = resistance_force(z, &m, &probe, &mk(lo)).unwrap();
            let f_hi = resistance_force(z, &m, &probe, &mk(hi)).unwrap();
            prop_assert!(f_hi <= f_lo + 1e-12);
        }
    }

    #[test]
    fn force_grows_with_depth_past_onset(v in prop::sample::select(vec![0.0, 6.0, 8.0, 10.0, 12.0]), a in 0.0..0.15f64, b in 0.0..0.15f64) {
        let vib = VibrationProfile::for_voltage(v).unwrap();
        let probe = ProbeSpec::default();
        let m = MediumSpec::sand();
        let z_on = onset_depth(&m, &vib);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f_lo = resistance_force(lo, &m, &probe, &vib).unwrap();
        let f_hi = resistance_force(hi, &m, &probe, &vib).unwrap();
        prop_assert!(f_hi >= f_lo);
        if lo > z_on && hi > lo {
            prop_assert!(f_hi > f_lo);
        }
        prop_assert!(dimensionless_acceleration(&vib) >= 0.0);
    }
}
