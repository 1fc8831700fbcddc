use proptest::prelude::*;
use qlink_core::schedules::{adiabaticity_integral, tau_swap, Schedule};
use qlink_core::units::mhz;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pap_keeps_gbar(gbar in 1.0f64..50.0, t_f in 10.0f64..400.0, frac in 0.0f64..=1.0, half in any::<bool>()) {
        let g = mhz(gbar);
        let s = if half { Schedule::adiabatic_half(g, t_f) } else { Schedule::adiabatic_transfer(g, t_f) }.unwrap();
        let (g1, g2) = s.couplings(frac * s.duration()).unwrap();
        prop_assert!(((g1 * g1 + g2 * g2).sqrt() - g).abs() <= 1e-12 * g);
    }

    #[test]
    fn adiabaticity_integral_is_gbar_tf(gbar in 5.0f64..50.0, t_f in 100.0f64..400.0) {
        let s = Schedule::adiabatic_transfer(mhz(gbar), t_f).unwrap();
        let a = adiabaticity_integral(&s).unwrap();
        prop_assert!((a - mhz(gbar) * t_f * 1e-9).abs() <= 1e-12 * a);
    }

    #[test]
    fn relay_segments_partition_duration(g in 1.0f64..20.0, eps in 1e-6f64..1e-3) {
        let s = Schedule::relay_transfer(mhz(g)).unwrap();
        let tau = tau_swap(mhz(g));
        prop_assert!((s.duration() - 2.0 * tau).abs() < 1e-9);
        prop_assert_eq!(s.breakpoints(), vec![tau]);
        // Right-continuous at the boundary: the second segment starts at τ.
        prop_assert_eq!(s.couplings(tau).unwrap(), (0.0, mhz(g)));
        prop_assert_eq!(s.couplings(tau - eps).unwrap(), (mhz(g), 0.0));
    }
}
