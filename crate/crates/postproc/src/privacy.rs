//! Toeplitz-matrix privacy amplification.
//!
//! The `m × n` matrix has entries `T[i][j] = t[i − j + n − 1]` for a seed
//! vector `t` of length `n + m − 1`, so `T·x` is a slice of the linear
//! convolution `t * x`, reduced mod 2. The convolution runs in floating
//! point FFT; every output is an integer below `n`, so rounding is exact
//! for the supported sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

use crate::error::{PostprocError, Result};

/// Largest input length handled by the FFT path.
pub const MAX_INPUT_BITS: usize = 1 << 24;

/// Seed vector of length `n + m − 1` drawn from `seed`.
pub fn toeplitz_seed(n: usize, m: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n + m - 1).map(|_| rng.gen_range(0..2u8)).collect()
}

fn check_shapes(bits: &[u8], t: &[u8], m: usize) -> Result<()> {
    let n = bits.len();
    if n == 0 || m == 0 || m > n {
        return Err(PostprocError::Infeasible(format!("output length {m} not in 1..={n}")));
    }
    if t.len() != n + m - 1 {
        return Err(PostprocError::InvalidParameter(format!("seed vector has length {}, expected {}", t.len(), n + m - 1)));
    }
    if n > MAX_INPUT_BITS {
        return Err(PostprocError::InvalidParameter(format!("input of {n} bits exceeds {MAX_INPUT_BITS}")));
    }
    Ok(())
}

/// `T·x mod 2` through FFT convolution.
pub fn toeplitz_hash(bits: &[u8], t: &[u8], m: usize) -> Result<Vec<u8>> {
    check_shapes(bits, t, m)?;
    let n = bits.len();
    let len = (n + t.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let load = |v: &[u8]| {
        let mut b = vec![Complex::new(0.0, 0.0); len];
        for (dst, &x) in b.iter_mut().zip(v) {
            dst.re = (x & 1) as f64;
        }
        b
    };
    let mut a = load(t);
    let mut b = load(bits);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / len as f64;
    Ok((0..m).map(|i| ((a[i + n - 1].re * scale).round() as u64 & 1) as u8).collect())
}

/// Direct `O(n·m)` product, the reference for [`toeplitz_hash`].
pub fn toeplitz_hash_naive(bits: &[u8], t: &[u8], m: usize) -> Result<Vec<u8>> {
    check_shapes(bits, t, m)?;
    let n = bits.len();
    Ok((0..m)
        .map(|i| (0..n).fold(0u8, |acc, j| acc ^ (t[i + n - 1 - j] & bits[j] & 1)))
        .collect())
}

/// Compresses `bits` to `final_len` bits with a Toeplitz matrix drawn from
/// `seed`.
pub fn privacy_amplify(bits: &[u8], final_len: usize, seed: u64) -> Result<Vec<u8>> {
    if final_len == 0 || final_len > bits.len() {
        return Err(PostprocError::Infeasible(format!(
            "final length {final_len} not in 1..={}",
            bits.len()
        )));
    }
    let t = toeplitz_seed(bits.len(), final_len, seed);
    toeplitz_hash(bits, &t, final_len)
}

/// Packs bits MSB-first into bytes.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))).collect()
}

/// Hex SHA-256 of the packed bits and their count.
pub fn bits_digest(bits: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update((bits.len() as u64).to_le_bytes());
    h.update(pack_bits(bits));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Monobit statistic `(#1 − #0)/√n`, standard normal for fair bits.
pub fn monobit_z(bits: &[u8]) -> f64 {
    let ones = bits.iter().filter(|&&b| b & 1 == 1).count() as f64;
    let n = bits.len() as f64;
    (2.0 * ones - n) / n.sqrt()
}

/// Runs statistic: observed runs against `2nπ(1−π)` with the Wald–Wolfowitz
/// variance, standard normal for independent bits.
pub fn runs_z(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let pi = bits.iter().filter(|&&b| b & 1 == 1).count() as f64 / n;
    let runs = 1 + bits.windows(2).filter(|w| (w[0] ^ w[1]) & 1 == 1).count();
    let mean = 2.0 * n * pi * (1.0 - pi) + 1.0;
    let var = 2.0 * n * pi * (1.0 - pi) * (2.0 * n * pi * (1.0 - pi) - 1.0) / (n - 1.0).max(1.0);
    (runs as f64 - mean) / var.max(f64::MIN_POSITIVE).sqrt()
}
