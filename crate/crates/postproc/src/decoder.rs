//! Layered (row-serial) belief-propagation decoding with a syndrome.

use serde::{Deserialize, Serialize};

use crate::code::LdpcCode;
use crate::error::{PostprocError, Result};

/// Magnitude standing in for a certain bit.
pub const LLR_CLAMP: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckRule {
    /// Normalized min-sum with the given scaling factor.
    MinSum(f64),
    SumProduct,
}

impl Default for CheckRule {
    fn default() -> Self {
        CheckRule::MinSum(0.8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
    /// Checks violated by the final hard decision.
    pub unsatisfied: usize,
}

/// Exact pairwise check update `2 atanh(tanh(a/2) tanh(b/2))`.
#[inline]
fn boxplus(a: f64, b: f64) -> f64 {
    let s = a.signum() * b.signum();
    s * a.abs().min(b.abs()) + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Decodes toward a word with syndrome `syndrome` (all zeros for a
/// codeword). `llr[v] > 0` favours bit 0. Punctured positions should carry
/// 0, shortened ones a saturated value.
pub fn layered_decode(
    code: &LdpcCode,
    llr: &[f64],
    syndrome: &[u8],
    rule: CheckRule,
    max_iters: usize,
) -> Result<DecodeOutcome> {
    if llr.len() != code.n || syndrome.len() != code.m() {
        return Err(PostprocError::InvalidParameter(format!(
            "expected {} LLRs and {} syndrome bits, got {} and {}",
            code.n,
            code.m(),
            llr.len(),
            syndrome.len()
        )));
    }
    if llr.iter().any(|l| l.is_nan()) {
        return Err(PostprocError::InvalidParameter("NaN LLR".into()));
    }
    if let CheckRule::MinSum(a) = rule {
        if !(a > 0.0 && a <= 1.0) {
            return Err(PostprocError::InvalidParameter(format!("min-sum factor {a} outside (0, 1]")));
        }
    }
    let mut post: Vec<f64> = llr.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();
    let mut r = vec![0.0f64; code.edges()];
    let max_deg = (0..code.m()).map(|c| code.row_ptr[c + 1] - code.row_ptr[c]).max().unwrap_or(0);
    let mut q = vec![0.0f64; max_deg];
    let mut fwd = vec![0.0f64; max_deg];
    let mut bits = vec![0u8; code.n];

    for it in 1..=max_iters {
        for c in 0..code.m() {
            let (lo, hi) = (code.row_ptr[c], code.row_ptr[c + 1]);
            let d = hi - lo;
            if d == 0 {
                continue;
            }
            let flip = if syndrome[c] & 1 == 1 { -1.0 } else { 1.0 };
            for k in 0..d {
                q[k] = post[code.cols[lo + k] as usize] - r[lo + k];
            }
            match rule {
                CheckRule::MinSum(alpha) => {
                    let mut sign = flip;
                    let (mut m1, mut m2, mut at) = (f64::INFINITY, f64::INFINITY, 0);
                    for (k, &x) in q[..d].iter().enumerate() {
                        if x < 0.0 {
                            sign = -sign;
                        }
                        let a = x.abs();
                        if a < m1 {
                            m2 = m1;
                            m1 = a;
                            at = k;
                        } else if a < m2 {
                            m2 = a;
                        }
                    }
                    for k in 0..d {
                        let mag = if k == at { m2 } else { m1 };
                        let s = if q[k] < 0.0 { -sign } else { sign };
                        let new = if mag.is_finite() { s * alpha * mag } else { 0.0 };
                        let v = code.cols[lo + k] as usize;
                        post[v] = q[k] + new;
                        r[lo + k] = new;
                    }
                }
                CheckRule::SumProduct => {
                    if d == 1 {
                        let v = code.cols[lo] as usize;
                        r[lo] = flip * LLR_CLAMP;
                        post[v] = q[0] + r[lo];
                        continue;
                    }
                    fwd[0] = q[0];
                    for k in 1..d {
                        fwd[k] = boxplus(fwd[k - 1], q[k]);
                    }
                    let mut back = 0.0;
                    for k in (0..d).rev() {
                        let excl = match (k, k == d - 1) {
                            (0, _) => back,
                            (_, true) => fwd[k - 1],
                            _ => boxplus(fwd[k - 1], back),
                        };
                        let new = (flip * excl).clamp(-LLR_CLAMP, LLR_CLAMP);
                        back = if k == d - 1 { q[k] } else { boxplus(back, q[k]) };
                        let v = code.cols[lo + k] as usize;
                        post[v] = q[k] + new;
                        r[lo + k] = new;
                    }
                }
            }
        }
        for (b, p) in bits.iter_mut().zip(&post) {
            *b = (*p < 0.0) as u8;
        }
        let unsatisfied = code.syndrome(&bits).iter().zip(syndrome).filter(|(a, b)| **a != (*b & 1)).count();
        if unsatisfied == 0 {
            return Ok(DecodeOutcome { bits, converged: true, iterations: it, unsatisfied });
        }
        if it == max_iters {
            return Ok(DecodeOutcome { bits, converged: false, iterations: it, unsatisfied });
        }
    }
    Ok(DecodeOutcome { converged: false, iterations: 0, unsatisfied: code.syndrome(&bits).iter().zip(syndrome).filter(|(a, b)| **a != (*b & 1)).count(), bits })
}
