use dsp_chain::keymap::{decide_symbol, quadrant_bits, symbol_bits, symbol_point};
use num_complex::Complex64;
use proptest::prelude::*;

fn coordinate() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(-0.0), -10.0..10.0f64, 1e-300..1e-200f64]
}

proptest! {
    #[test]
    fn quadrant_map_is_exhaustive_and_exclusive(z1 in coordinate(), z2 in coordinate()) {
        let cases = [
            z1 >= 0.0 && z2 > 0.0,
            z1 < 0.0 && z2 >= 0.0,
            z1 <= 0.0 && z2 < 0.0,
            z1 > 0.0 && z2 <= 0.0,
        ];
        let hits = cases.iter().filter(|&&c| c).count();
        let origin = z1 == 0.0 && z2 == 0.0;
        prop_assert_eq!(hits, if origin { 0 } else { 1 });
        match quadrant_bits(z1, z2) {
            None => prop_assert!(origin),
            Some(bits) => {
                let k = cases.iter().position(|&c| c).unwrap();
                prop_assert_eq!(bits, symbol_bits(k as u8));
            }
        }
    }

    #[test]
    fn constellation_points_decode_to_their_bits(k in 0u8..4, amp in 1e-6..100.0f64, f1 in 0.01..10.0f64, f2 in 0.01..10.0f64) {
        let s = symbol_point(k, amp);
        let z = Complex64::new(s.re * f1, s.im * f2);
        prop_assert_eq!(quadrant_bits(z.re, z.im), Some(symbol_bits(k)));
        prop_assert_eq!(decide_symbol(z), k);
    }
}
