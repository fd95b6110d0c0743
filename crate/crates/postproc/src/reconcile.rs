//! Multidimensional reverse reconciliation over the normed division
//! algebras of dimension 1, 2, 4 and 8.
//!
//! Bob draws a uniform bit vector `b`, forms the unit vector
//! `u_i = (−1)^{b_i}/√d` and sends `m = u·ȳ'` with `y' = y/‖y‖`, so that
//! `m·y' = u`. Alice applies the same map to her vector and obtains a noisy
//! copy of `u`: a binary-input AWGN channel with the SNR of the original.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{PostprocError, Result};

/// Cayley–Dickson product `(a, b)(c, d) = (ac − d̄b, da + bc̄)`.
pub fn cd_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len();
    if n == 1 {
        return vec![x[0] * y[0]];
    }
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let (c, d) = y.split_at(h);
    let ac = cd_mul(a, c);
    let db = cd_mul(&cd_conj(d), b);
    let da = cd_mul(d, a);
    let bc = cd_mul(b, &cd_conj(c));
    let mut out = Vec::with_capacity(n);
    out.extend(ac.iter().zip(&db).map(|(p, q)| p - q));
    out.extend(da.iter().zip(&bc).map(|(p, q)| p + q));
    out
}

pub fn cd_conj(x: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = x.iter().map(|v| -v).collect();
    c[0] = x[0];
    c
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dim(d: usize) -> Result<()> {
    if matches!(d, 1 | 2 | 4 | 8) {
        Ok(())
    } else {
        Err(PostprocError::InvalidParameter(format!("reconciliation dimension {d} not in {{1, 2, 4, 8}}")))
    }
}

/// Bob's side of one batch: his key bits and the public messages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BobMessages {
    pub d: usize,
    pub bits: Vec<u8>,
    /// Concatenated `d`-vectors `m = u·ȳ'`.
    pub rotations: Vec<f64>,
    /// `‖y‖` per `d`-block.
    pub norms: Vec<f64>,
}

/// Draws Bob's bits and computes the public rotations for `bob` (length a
/// multiple of `d`).
pub fn bob_encode(bob: &[f64], d: usize, seed: u64) -> Result<BobMessages> {
    check_dim(d)?;
    if bob.len() % d != 0 {
        return Err(PostprocError::InvalidParameter(format!("block length {} not a multiple of {d}", bob.len())));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..bob.len()).map(|_| rng.gen_range(0..2u8)).collect();
    let scale = 1.0 / (d as f64).sqrt();
    let mut rotations = Vec::with_capacity(bob.len());
    let mut norms = Vec::with_capacity(bob.len() / d);
    for (k, y) in bob.chunks(d).enumerate() {
        let ny = norm(y);
        if !(ny > 0.0) || !ny.is_finite() {
            return Err(PostprocError::Degenerate(format!("zero-norm vector in block {k}; resample")));
        }
        let u: Vec<f64> = bits[k * d..(k + 1) * d].iter().map(|&b| if b == 0 { scale } else { -scale }).collect();
        let yc: Vec<f64> = cd_conj(y).iter().map(|v| v / ny).collect();
        rotations.extend(cd_mul(&u, &yc));
        norms.push(ny);
    }
    Ok(BobMessages { d, bits, rotations, norms })
}

/// Alice's LLRs for Bob's bits (positive favours 0). `snr` is the
/// per-dimension signal-to-noise ratio of `y = x + n` with unit-variance
/// `x`; `f64::INFINITY` gives infinite-magnitude LLRs.
pub fn alice_llrs(alice: &[f64], msg: &BobMessages, snr: f64) -> Result<Vec<f64>> {
    let d = msg.d;
    if alice.len() != msg.rotations.len() || msg.norms.len() * d != alice.len() {
        return Err(PostprocError::InvalidParameter("Alice block does not match Bob's messages".into()));
    }
    if !(snr > 0.0) {
        return Err(PostprocError::InvalidParameter(format!("SNR must be positive, got {snr}")));
    }
    let sigma2 = 1.0 / snr;
    let gamma = 1.0 / (1.0 + sigma2);
    let var_w = sigma2 / (1.0 + sigma2);
    let mut llr = Vec::with_capacity(alice.len());
    for (k, x) in alice.chunks(d).enumerate() {
        let v = cd_mul(&msg.rotations[k * d..(k + 1) * d], x);
        let amp = gamma * msg.norms[k] / (d as f64).sqrt();
        llr.extend(v.iter().map(|vi| {
            if var_w == 0.0 {
                if *vi >= 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                2.0 * amp * vi / var_w
            }
        }));
    }
    Ok(llr)
}

/// Least-squares normalization of a correlated pair to the model
/// `y = x + n`, `E x² = 1`. Returns `(x, y, snr)`.
pub fn normalize_pair(alice: &[f64], bob: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if alice.len() != bob.len() || alice.is_empty() {
        return Err(PostprocError::InvalidParameter("pair lengths differ or are empty".into()));
    }
    let n = alice.len() as f64;
    let sxx = alice.iter().map(|x| x * x).sum::<f64>() / n;
    let sxy = alice.iter().zip(bob).map(|(x, y)| x * y).sum::<f64>() / n;
    if !(sxx > 0.0) || sxy == 0.0 {
        return Err(PostprocError::Degenerate("uncorrelated or zero data".into()));
    }
    let t = sxy / sxx;
    let noise = alice.iter().zip(bob).map(|(x, y)| (y - t * x).powi(2)).sum::<f64>() / n;
    let sx = sxx.sqrt();
    let x: Vec<f64> = alice.iter().map(|v| v / sx).collect();
    let y: Vec<f64> = bob.iter().map(|v| v / (t * sx)).collect();
    let snr = if noise > 0.0 { t * t * sxx / noise } else { f64::INFINITY };
    Ok((x, y, snr))
}

/// `C(s) = ½ log2(1 + s)`.
pub fn capacity(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

/// `β = R_eff / C(snr)`.
pub fn efficiency_beta(rate_eff: f64, snr: f64) -> f64 {
    rate_eff / capacity(snr)
}

/// Mutual information between bits and LLRs for a consistent channel,
/// `1 − E log2(1 + e^{−(1−2b)L})`.
pub fn empirical_capacity(bits: &[u8], llr: &[f64]) -> f64 {
    let s: f64 = bits
        .iter()
        .zip(llr)
        .map(|(&b, &l)| {
            let z = if b == 0 { l } else { -l };
            if z > 40.0 {
                (-z).exp() / std::f64::consts::LN_2
            } else {
                (-z).exp().ln_1p() / std::f64::consts::LN_2
            }
        })
        .sum();
    1.0 - s / bits.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn correlated(n: usize, snr: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let sd = (1.0 / snr).sqrt();
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = x.iter().map(|v| v + sd * { let e: f64 = StandardNormal.sample(&mut rng); e }).collect();
        (x, y)
    }

    #[test]
    fn algebra_is_normed_and_has_inverses() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for d in [1usize, 2, 4, 8] {
            for _ in 0..50 {
                let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert!((norm(&cd_mul(&a, &b)) - norm(&a) * norm(&b)).abs() < 1e-12);
                // (a b̄) b = a ‖b‖²
                let back = cd_mul(&cd_mul(&a, &cd_conj(&b)), &b);
                let nb2 = norm(&b).powi(2);
                for (p, q) in back.iter().zip(&a) {
                    assert!((p - q * nb2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn noiseless_pairs_give_infinite_llrs_with_correct_signs() {
        let (x, _) = correlated(800, 1.0, 1);
        let msg = bob_encode(&x, 8, 9).unwrap();
        let llr = alice_llrs(&x, &msg, f64::INFINITY).unwrap();
        for (l, b) in llr.iter().zip(&msg.bits) {
            assert!(l.is_infinite());
            assert_eq!((*l < 0.0) as u8, *b);
        }
    }

    #[test]
    fn one_dimension_is_sign_reconciliation() {
        let (x, y) = correlated(1000, 0.5, 2);
        let msg = bob_encode(&y, 1, 4).unwrap();
        let llr = alice_llrs(&x, &msg, 0.5).unwrap();
        for k in 0..x.len() {
            let flip = (y[k] < 0.0) as u8 ^ msg.bits[k];
            let expect = if flip == 1 { -x[k] } else { x[k] };
            assert!(llr[k].signum() == expect.signum());
        }
    }

    #[test]
    fn virtual_channel_capacity_matches_awgn() {
        let snr = 0.094;
        let (x, y) = correlated(400_000, snr, 5);
        let msg = bob_encode(&y, 8, 6).unwrap();
        let llr = alice_llrs(&x, &msg, snr).unwrap();
        let c = empirical_capacity(&msg.bits, &llr);
        assert!((c / capacity(snr) - 1.0).abs() < 0.02, "{c} vs {}", capacity(snr));
    }

    #[test]
    fn zero_norm_and_bad_shapes_are_rejected() {
        assert!(matches!(bob_encode(&[0.0; 8], 8, 1), Err(PostprocError::Degenerate(_))));
        assert!(bob_encode(&[1.0; 7], 8, 1).is_err());
        assert!(bob_encode(&[1.0; 6], 3, 1).is_err());
    }

    #[test]
    fn normalization_recovers_snr() {
        let (x, y) = correlated(200_000, 0.2, 8);
        let y3: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
        let (_, _, snr) = normalize_pair(&x, &y3).unwrap();
        assert!((snr / 0.2 - 1.0).abs() < 0.02, "{snr}");
    }

    #[test]
    fn beta_relation() {
        assert!((efficiency_beta(0.07, 1.0 / 3.074f64.powi(2)) - 0.9645).abs() < 5e-4);
        assert!((efficiency_beta(0.03, 1.0 / 4.789f64.powi(2)) - 0.9743).abs() < 5e-4);
        assert!((efficiency_beta(capacity(0.3), 0.3) - 1.0).abs() < 1e-15);
    }
}
