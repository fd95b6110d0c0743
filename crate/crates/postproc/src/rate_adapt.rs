//! Rate adaptation of a mother code by puncturing (raise the rate) or
//! shortening (lower it).
//!
//! Positions come from a designated variable class in seeded random order,
//! spilling over into the remaining classes when the class is exhausted.
//! The default class is the degree-one class: a punctured degree-one node
//! silences its check, which keeps the threshold efficiency close to the
//! mother code's.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::code::LdpcCode;
use crate::error::{PostprocError, Result};
use crate::reconcile::capacity;

/// At most this share of the block may be punctured.
pub const MAX_PUNCTURE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptClass {
    /// Variables of total degree one.
    #[default]
    DegreeOne,
    /// The highest-degree variables.
    Core,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptPattern {
    pub punctured: Vec<u32>,
    pub shortened: Vec<u32>,
    pub rate_eff: f64,
    pub beta: f64,
    pub snr: f64,
    pub class: AdaptClass,
}

impl AdaptPattern {
    /// Applies the pattern to a copy of `code`.
    pub fn apply(&self, code: &LdpcCode) -> LdpcCode {
        let mut c = code.clone();
        c.punctured = self.punctured.clone();
        c.shortened = self.shortened.clone();
        c
    }
}

/// Variables ordered for adaptation: designated class first, each class
/// shuffled with `seed`.
fn candidate_order(code: &LdpcCode, class: AdaptClass, seed: u64) -> Vec<u32> {
    let degree: Vec<usize> = code.var_adjacency().iter().map(Vec::len).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut groups: std::collections::BTreeMap<usize, Vec<u32>> = Default::default();
    for (v, &d) in degree.iter().enumerate() {
        groups.entry(d).or_default().push(v as u32);
    }
    let mut keys: Vec<usize> = groups.keys().copied().collect();
    match class {
        AdaptClass::DegreeOne => keys.sort_unstable(),
        AdaptClass::Core => keys.sort_unstable_by(|a, b| b.cmp(a)),
    }
    let mut out = Vec::with_capacity(code.n);
    for k in keys {
        let mut g = groups.remove(&k).expect("key present");
        g.shuffle(&mut rng);
        out.extend(g);
    }
    out
}

/// Chooses the pattern with `R_eff = target_beta · C(snr)`.
pub fn rate_adapt(code: &LdpcCode, target_beta: f64, snr: f64, class: AdaptClass, seed: u64) -> Result<AdaptPattern> {
    rate_adapt_aligned(code, target_beta, snr, class, seed, 1)
}

/// As [`rate_adapt`], with the number of transmitted positions rounded
/// (by puncturing or shortening a few more) to a multiple of `align`.
pub fn rate_adapt_aligned(
    code: &LdpcCode,
    target_beta: f64,
    snr: f64,
    class: AdaptClass,
    seed: u64,
    align: usize,
) -> Result<AdaptPattern> {
    if align == 0 {
        return Err(PostprocError::InvalidParameter("alignment must be positive".into()));
    }
    if !(target_beta > 0.0 && target_beta <= 1.0) || !(snr > 0.0) || !snr.is_finite() {
        return Err(PostprocError::InvalidParameter(format!("need 0 < β ≤ 1 and finite SNR > 0, got {target_beta}, {snr}")));
    }
    let n = code.n as f64;
    let k = (code.n - code.m()) as f64;
    let target = target_beta * capacity(snr);
    let order = candidate_order(code, class, seed);
    let (mut punctured, mut shortened) = (Vec::new(), Vec::new());
    if target > code.rate() {
        // k/(n − p) = target
        let p = (n - k / target).round();
        if target >= 1.0 || p > MAX_PUNCTURE_FRACTION * n {
            return Err(PostprocError::Infeasible(format!(
                "effective rate {target:.5} above the ceiling {:.5} of the rate-{:.4} code",
                k / ((1.0 - MAX_PUNCTURE_FRACTION) * n),
                code.rate()
            )));
        }
        let p = p as usize + (code.n - p as usize) % align;
        punctured = order[..p].to_vec();
    } else if target < code.rate() {
        // (k − s)/(n − s) = target
        let s = ((k - target * n) / (1.0 - target)).round();
        if s >= k {
            return Err(PostprocError::Infeasible(format!("effective rate {target:.5} needs shortening every information bit")));
        }
        let s = s as usize + (code.n - s as usize) % align;
        shortened = order[..s].to_vec();
    } else if code.n % align != 0 {
        punctured = order[..code.n % align].to_vec();
    }
    punctured.sort_unstable();
    shortened.sort_unstable();
    let mut adapted = code.clone();
    adapted.punctured = punctured.clone();
    adapted.shortened = shortened.clone();
    let rate_eff = adapted.effective_rate();
    Ok(AdaptPattern { punctured, shortened, rate_eff, beta: rate_eff / capacity(snr), snr, class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_met_ldpc;
    use crate::met::DESIGN_TABLE;

    #[test]
    fn puncture_fraction_for_rate_007() {
        let row = &DESIGN_TABLE[0];
        let code = build_met_ldpc(&row.distribution().unwrap(), 100_000, 1).unwrap();
        let p = rate_adapt(&code, row.beta_adaptive, row.snr, AdaptClass::DegreeOne, 2).unwrap();
        assert!((p.rate_eff - 0.077_422_850_3).abs() < 2e-5, "{}", p.rate_eff);
        assert!((p.punctured.len() as f64 / 1e5 - 0.095_874_2).abs() < 2e-5);
        assert!((p.beta - row.beta_adaptive).abs() < 3e-4);
        assert!(p.shortened.is_empty());
        // degree-one class holds 91.12 % of nodes
        let adj = code.var_adjacency();
        assert!(p.punctured.iter().all(|&v| adj[v as usize].len() == 1));
    }

    #[test]
    fn core_class_overflows_into_next_class() {
        let row = &DESIGN_TABLE[0];
        let code = build_met_ldpc(&row.distribution().unwrap(), 20_000, 1).unwrap();
        let p = rate_adapt(&code, row.beta_adaptive, row.snr, AdaptClass::Core, 2).unwrap();
        let adj = code.var_adjacency();
        let core = p.punctured.iter().filter(|&&v| adj[v as usize].len() > 1).count();
        assert_eq!(core, adj.iter().filter(|a| a.len() > 1).count());
        assert!(core < p.punctured.len());
    }

    #[test]
    fn matching_target_gives_empty_pattern() {
        let code = build_met_ldpc(&DESIGN_TABLE[2].distribution().unwrap(), 10_000, 1).unwrap();
        let snr = 2f64.powf(2.0 * 0.03) - 1.0;
        let p = rate_adapt(&code, 1.0, snr, AdaptClass::DegreeOne, 0).unwrap();
        assert!(p.punctured.is_empty() && p.shortened.is_empty());
    }

    #[test]
    fn shortening_lowers_the_rate() {
        let code = build_met_ldpc(&DESIGN_TABLE[2].distribution().unwrap(), 10_000, 1).unwrap();
        let p = rate_adapt(&code, 0.8, 0.0233, AdaptClass::DegreeOne, 0).unwrap();
        assert!(p.punctured.is_empty() && !p.shortened.is_empty());
        assert!((p.beta - 0.8).abs() < 0.01);
    }

    #[test]
    fn aligned_patterns_leave_whole_blocks() {
        let code = build_met_ldpc(&DESIGN_TABLE[2].distribution().unwrap(), 10_000, 1).unwrap();
        for (beta, snr) in [(0.93, 0.047), (0.8, 0.0233)] {
            let p = rate_adapt_aligned(&code, beta, snr, AdaptClass::DegreeOne, 0, 8).unwrap();
            assert_eq!((code.n - p.punctured.len() - p.shortened.len()) % 8, 0);
        }
    }

    #[test]
    fn infeasible_targets_are_rejected() {
        let code = build_met_ldpc(&DESIGN_TABLE[2].distribution().unwrap(), 10_000, 1).unwrap();
        assert!(matches!(rate_adapt(&code, 0.95, 3.0, AdaptClass::DegreeOne, 0), Err(PostprocError::Infeasible(_))));
        assert!(rate_adapt(&code, 1.2, 0.05, AdaptClass::DegreeOne, 0).is_err());
    }
}
