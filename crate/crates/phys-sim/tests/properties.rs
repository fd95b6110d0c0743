use num_complex::Complex64;
use phys_sim::filters::{convolve_same, convolve_same_direct};
use proptest::prelude::*;

proptest! {
    #[test]
    fn fft_convolution_matches_direct(
        x in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..400),
        h in prop::collection::vec(-1.0..1.0f64, 1..40),
    ) {
        let x: Vec<Complex64> = x.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        let mut h = h;
        if h.len() % 2 == 0 { h.push(0.0); }
        let a = convolve_same(&x, &h);
        let b = convolve_same_direct(&x, &h);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).norm() < 1e-9);
        }
    }
}
