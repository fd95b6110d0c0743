//! Quadrant mapping between constellation points, bit pairs and received
//! samples.

use num_complex::Complex64;

pub use phys_sim::constellation::{symbol_bits, symbol_point};

/// Quadrant decision on one received sample:
///
/// ```text
/// (0,0)  z₁ ≥ 0, z₂ > 0        (0,1)  z₁ < 0, z₂ ≥ 0
/// (1,0)  z₁ ≤ 0, z₂ < 0        (1,1)  z₁ > 0, z₂ ≤ 0
/// ```
///
/// The origin satisfies none of the cases and maps to `None`.
pub fn quadrant_bits(z1: f64, z2: f64) -> Option<[u8; 2]> {
    if z1 >= 0.0 && z2 > 0.0 {
        Some([0, 0])
    } else if z1 < 0.0 && z2 >= 0.0 {
        Some([0, 1])
    } else if z1 <= 0.0 && z2 < 0.0 {
        Some([1, 0])
    } else if z1 > 0.0 && z2 <= 0.0 {
        Some([1, 1])
    } else {
        None
    }
}

pub fn map_raw_key(z: &[Complex64]) -> Vec<Option<[u8; 2]>> {
    z.iter().map(|v| quadrant_bits(v.re, v.im)).collect()
}

/// Hard QPSK decision (constellation index) used by decision-directed
/// adaptation.
pub fn decide_symbol(z: Complex64) -> u8 {
    match quadrant_bits(z.re, z.im) {
        Some([0, 0]) | None => 0,
        Some([0, 1]) => 1,
        Some([1, 0]) => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_examples() {
        assert_eq!(quadrant_bits(1.0, 0.5), Some([0, 0]));
        assert_eq!(quadrant_bits(-0.3, 0.2), Some([0, 1]));
        assert_eq!(quadrant_bits(0.4, -0.2), Some([1, 1]));
        assert_eq!(quadrant_bits(-0.4, -0.2), Some([1, 0]));
    }

    #[test]
    fn axis_ties_follow_the_inequalities() {
        assert_eq!(quadrant_bits(0.0, 1.0), Some([0, 0]));
        assert_eq!(quadrant_bits(-1.0, 0.0), Some([0, 1]));
        assert_eq!(quadrant_bits(0.0, -1.0), Some([1, 0]));
        assert_eq!(quadrant_bits(1.0, 0.0), Some([1, 1]));
        assert_eq!(quadrant_bits(0.0, 0.0), None);
        assert_eq!(quadrant_bits(-0.0, 0.0), None);
    }

    #[test]
    fn constellation_points_map_to_their_labels() {
        for k in 0..4u8 {
            let p = symbol_point(k, 0.4775);
            assert_eq!(quadrant_bits(p.re, p.im), Some(symbol_bits(k)));
            assert!((p.re.abs() - 0.4775).abs() < 1e-12 && (p.im.abs() - 0.4775).abs() < 1e-12);
            assert_eq!(decide_symbol(p), k);
        }
    }
}
