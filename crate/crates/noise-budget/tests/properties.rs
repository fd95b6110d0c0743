use noise_budget::{total_budget, HardwareProfile};
use proptest::prelude::*;
use ratecalc_lca::{ChannelScenario, ProtocolParams};

fn profile() -> impl Strategy<Value = HardwareProfile> {
    (-160.0..-90.0f64, -160.0..-90.0f64, 0.0..0.01f64, 0.0..1e-3f64, 0.0..60.0f64, 1.0..1e6f64, 0.0..5e-11f64, 4u32..=16, 0.0..1e4f64)
        .prop_map(|(rq, rl, dv, ar, d, re, nep, bits, lw)| HardwareProfile {
            rin_quan: 10f64.powf(rq / 10.0),
            rin_lo: 10f64.powf(rl / 10.0),
            delta_v_dac: dv,
            a_r_sq: ar,
            d_db: d,
            r_e: re,
            nep,
            n_bits: bits,
            linewidth_a: lw,
            linewidth_b: lw,
            ..HardwareProfile::separate_path()
        })
}

proptest! {
    #[test]
    fn total_is_the_sum_of_its_terms(hw in profile(), t in 0.01f64..1.0, v_a in 0.05f64..2.0, slow in 0.0f64..1e-3) {
        let params = ProtocolParams::from_modulation_variance(v_a, 0.45, 0.297, 0.95, 5e9).unwrap();
        let ch = ChannelScenario::from_transmittance(t, 0.0).unwrap();
        let b = total_budget(&hw, &ch, &params, slow).unwrap();
        let sum: f64 = b.terms().iter().map(|(_, v)| v).sum();
        prop_assert_eq!(b.total, sum);
        prop_assert!(b.terms().iter().all(|(_, v)| *v >= 0.0));
        prop_assert_eq!(b.phase_slow, slow);
    }

    #[test]
    fn switching_a_source_off_removes_only_its_term(hw in profile(), t in 0.01f64..1.0) {
        let params = ProtocolParams::from_modulation_variance(0.456, 0.45, 0.297, 0.95, 5e9).unwrap();
        let ch = ChannelScenario::from_transmittance(t, 0.0).unwrap();
        let full = total_budget(&hw, &ch, &params, 0.0).unwrap();
        let no_det = total_budget(&HardwareProfile { nep: 0.0, epsilon_lf: 0.0, ..hw.clone() }, &ch, &params, 0.0).unwrap();
        prop_assert_eq!(no_det.det, 0.0);
        prop_assert_eq!(no_det.adc, full.adc);
        prop_assert_eq!(no_det.dac, full.dac);
        prop_assert!(no_det.total <= full.total);
    }
}
