//! Four-point constellation: point `k` sits at phase `(2k+1)π/4` and
//! carries the bit pair of its quadrant.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

/// Bit pair carried by constellation point `k` (phase `(2k+1)π/4`): the
/// quadrant label of that point.
pub fn symbol_bits(k: u8) -> [u8; 2] {
    [(k >> 1) & 1, k & 1]
}

/// Transmitted complex symbol with quadratures `±amplitude`.
pub fn symbol_point(k: u8, amplitude: f64) -> Complex64 {
    Complex64::from_polar(amplitude * 2f64.sqrt(), (2 * k as u32 + 1) as f64 * FRAC_PI_4)
}
