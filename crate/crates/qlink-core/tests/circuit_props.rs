use proptest::prelude::*;
use qlink_core::circuit::{effective_load, loaded_q1_t1, ChannelModel, LoadingNetwork};
use qlink_core::model::DeviceParams;
use qlink_core::units::mhz;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mode_resonance_units(n in 1u32..200) {
        let rlc = ChannelModel::from_device(&DeviceParams::reference()).mode_rlc(n).unwrap();
        let w = n as f64 * mhz(84.0);
        prop_assert!((w * w * rlc.l_h * rlc.c_f - 1.0).abs() < 1e-12);
        prop_assert!(rlc.r_ohm > 0.0 && rlc.l_h > 0.0 && rlc.c_f > 0.0);
    }

    #[test]
    fn effective_load_is_monotone(a in 5.0f64..3000.0, b in 5.0f64..3000.0) {
        prop_assume!((a - b).abs() > 1e-3);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let l_r = 146.73e-9;
        let more_loss = effective_load(lo, 3410.0, l_r).unwrap();
        let less_loss = effective_load(hi, 3410.0, l_r).unwrap();
        prop_assert!(more_loss.t1r_ext_ns < less_loss.t1r_ext_ns);
        prop_assert!(more_loss.r_load_ohm > less_loss.r_load_ohm);
    }

    #[test]
    fn loaded_t1_is_even_in_detuning(g in 2.0f64..30.0, det in 0.0f64..20.0, t1r in 20.0f64..3000.0) {
        let net = LoadingNetwork::from_device(&DeviceParams::reference(), t1r).unwrap();
        let plus = loaded_q1_t1(&net, mhz(det), mhz(g)).unwrap();
        let minus = loaded_q1_t1(&net, -mhz(det), mhz(g)).unwrap();
        prop_assert!((plus - minus).abs() <= 1e-9 * plus);
    }

    #[test]
    fn no_load_means_no_loading(g in 0.0f64..30.0, det in -20.0f64..20.0) {
        let net = LoadingNetwork::from_device(&DeviceParams::reference(), 3410.0).unwrap();
        prop_assert_eq!(net.r_load_ohm, 0.0);
        prop_assert_eq!(loaded_q1_t1(&net, mhz(det), mhz(g)).unwrap(), f64::INFINITY);
    }
}
