//! Key extraction from correlated real data: multidimensional reverse
//! reconciliation, syndrome decoding, digest verification and privacy
//! amplification, with a full accounting of every term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{build_met_ldpc, LdpcCode};
use crate::decoder::{layered_decode, CheckRule, LLR_CLAMP};
use crate::error::{PostprocError, Result};
use crate::met::table_row;
use crate::privacy::{bits_digest, privacy_amplify};
use crate::rate_adapt::{rate_adapt_aligned, AdaptClass, AdaptPattern};
use crate::reconcile::{alice_llrs, bob_encode, capacity, normalize_pair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Design rate of the tabulated mother ensemble.
    pub code_rate: f64,
    pub block_len: usize,
    pub code_seed: u64,
    /// Reconciliation dimension (1, 2, 4 or 8).
    pub dimension: usize,
    pub target_beta: f64,
    pub adapt_class: AdaptClass,
    pub rule: CheckRule,
    pub max_iters: usize,
    /// Seeds Bob's bits, puncture fill and the hashing matrix.
    pub seed: u64,
    /// Fixed per-dimension SNR; estimated from the data when absent.
    pub snr: Option<f64>,
    /// Frames whose syndrome is corrupted in transit (fault injection).
    pub corrupt_frames: Vec<usize>,
    /// Real dimensions per channel use.
    pub dims_per_symbol: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            code_rate: 0.03,
            block_len: 100_000,
            code_seed: 1,
            dimension: 8,
            target_beta: 0.93,
            adapt_class: AdaptClass::DegreeOne,
            rule: CheckRule::SumProduct,
            max_iters: 500,
            seed: 1,
            snr: None,
            corrupt_frames: Vec::new(),
            dims_per_symbol: 2,
        }
    }
}

/// Security terms per channel use, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityTerms {
    pub mutual_information: f64,
    pub holevo_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameOutcome {
    pub converged: bool,
    pub verified: bool,
    pub iterations: usize,
    pub unsatisfied_checks: usize,
    pub bob_digest: String,
    pub alice_digest: String,
    /// Bob's word without shortened positions; empty unless verified.
    #[serde(skip)]
    pub key_bits: Vec<u8>,
}

/// Reconciles one frame of an adapted code. `alice`/`bob` hold one value
/// per transmitted position, normalized to `y = x + n`, `E x² = 1`.
pub fn reconcile_frame(
    code: &LdpcCode,
    alice: &[f64],
    bob: &[f64],
    snr: f64,
    cfg: &ExtractConfig,
    frame_seed: u64,
    corrupt_syndrome: bool,
) -> Result<FrameOutcome> {
    let mut role = vec![0u8; code.n]; // 0 data, 1 punctured, 2 shortened
    for &v in &code.punctured {
        role[v as usize] = 1;
    }
    for &v in &code.shortened {
        role[v as usize] = 2;
    }
    let data: Vec<usize> = (0..code.n).filter(|&v| role[v] == 0).collect();
    if alice.len() != data.len() || bob.len() != data.len() {
        return Err(PostprocError::InvalidParameter(format!(
            "frame carries {} positions, got {} and {} values",
            data.len(),
            alice.len(),
            bob.len()
        )));
    }
    let msg = bob_encode(bob, cfg.dimension, frame_seed)?;
    // punctured fill is Bob's secret, shortened values are public
    let mut fill = ChaCha20Rng::seed_from_u64(frame_seed);
    fill.set_stream(1);
    let mut word = vec![0u8; code.n];
    for (&v, &b) in data.iter().zip(&msg.bits) {
        word[v] = b;
    }
    let mut llr = vec![0.0; code.n];
    for v in 0..code.n {
        match role[v] {
            1 => word[v] = fill.gen_range(0..2),
            2 => {
                word[v] = fill.gen_range(0..2);
                llr[v] = if word[v] == 0 { LLR_CLAMP } else { -LLR_CLAMP };
            }
            _ => {}
        }
    }
    let mut syndrome = code.syndrome(&word);
    if corrupt_syndrome && !syndrome.is_empty() {
        syndrome[0] ^= 1;
    }
    for (&v, l) in data.iter().zip(alice_llrs(alice, &msg, snr)?) {
        llr[v] = l;
    }
    let out = layered_decode(code, &llr, &syndrome, cfg.rule, cfg.max_iters)?;
    let bob_digest = bits_digest(&word);
    let alice_digest = bits_digest(&out.bits);
    let verified = bob_digest == alice_digest;
    let key_bits = if verified { (0..code.n).filter(|&v| role[v] != 2).map(|v| word[v]).collect() } else { Vec::new() };
    Ok(FrameOutcome {
        converged: out.converged,
        verified,
        iterations: out.iterations,
        unsatisfied_checks: out.unsatisfied,
        bob_digest, alice_digest, key_bits })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractReport {
    pub n_symbols: usize,
    pub snr: f64,
    pub snr_estimated: bool,
    pub capacity: f64,
    pub code_rate: f64,
    pub block_len: usize,
    pub punctured: usize,
    pub shortened: usize,
    pub rate_eff: f64,
    pub target_beta: f64,
    pub beta: f64,
    pub frames: usize,
    pub frames_verified: usize,
    pub frames_converged_unverified: usize,
    /// `None` when the run aborts before decoding.
    pub fer: Option<f64>,
    pub mean_iterations: f64,
    pub mutual_information: f64,
    pub holevo_bound: f64,
    /// `β·I_AB − S_BE` per channel use.
    pub secret_fraction: f64,
    pub symbols_verified: usize,
    pub pa_input_bits: usize,
    pub leaked_bits: usize,
    pub final_len: usize,
    /// Final bits per consumed channel use.
    pub key_per_symbol: f64,
    pub key_digest: Option<String>,
    pub aborted: Option<String>,
    pub frame_outcomes: Vec<FrameOutcome>,
}

/// Runs reconciliation, verification and privacy amplification over
/// `alice`/`bob` (one value per real dimension). A non-positive secret
/// fraction or no verified frame yields an empty key with `aborted` set.
pub fn end_to_end_extract(
    alice: &[f64],
    bob: &[f64],
    terms: SecurityTerms,
    cfg: &ExtractConfig,
) -> Result<(Vec<u8>, ExtractReport)> {
    let dist = table_row(cfg.code_rate)?.distribution()?;
    let code = build_met_ldpc(&dist, cfg.block_len, cfg.code_seed)?;
    extract_with_code(&code, alice, bob, terms, cfg)
}

/// As [`end_to_end_extract`] with a prebuilt mother code.
pub fn extract_with_code(
    code: &LdpcCode,
    alice: &[f64],
    bob: &[f64],
    terms: SecurityTerms,
    cfg: &ExtractConfig,
) -> Result<(Vec<u8>, ExtractReport)> {
    if cfg.dims_per_symbol == 0 {
        return Err(PostprocError::InvalidParameter("dims_per_symbol must be positive".into()));
    }
    let (x, y, snr_est) = normalize_pair(alice, bob)?;
    let snr = cfg.snr.unwrap_or(snr_est);
    let pattern: AdaptPattern =
        rate_adapt_aligned(code, cfg.target_beta, snr, cfg.adapt_class, cfg.seed ^ 0x5eed, cfg.dimension)?;
    let adapted = pattern.apply(code);
    let per_frame = code.n - pattern.punctured.len() - pattern.shortened.len();
    let frames = x.len() / per_frame;
    let secret_fraction = pattern.beta * terms.mutual_information - terms.holevo_bound;

    let mut report = ExtractReport {
        n_symbols: frames * per_frame / cfg.dims_per_symbol,
        snr,
        snr_estimated: cfg.snr.is_none(),
        capacity: capacity(snr),
        code_rate: code.rate(),
        block_len: code.n,
        punctured: pattern.punctured.len(),
        shortened: pattern.shortened.len(),
        rate_eff: pattern.rate_eff,
        target_beta: cfg.target_beta,
        beta: pattern.beta,
        frames,
        frames_verified: 0,
        frames_converged_unverified: 0,
        fer: None,
        mean_iterations: 0.0,
        mutual_information: terms.mutual_information,
        holevo_bound: terms.holevo_bound,
        secret_fraction,
        symbols_verified: 0,
        pa_input_bits: 0,
        leaked_bits: 0,
        final_len: 0,
        key_per_symbol: 0.0,
        key_digest: None,
        aborted: None,
        frame_outcomes: Vec::new(),
    };
    if frames == 0 {
        return Err(PostprocError::InvalidParameter(format!(
            "{} values do not fill one frame of {per_frame}",
            x.len()
        )));
    }
    if !(secret_fraction > 0.0) {
        report.aborted = Some(format!("secret fraction {secret_fraction:.3e} ≤ 0"));
        return Ok((Vec::new(), report));
    }

    let outcomes: Vec<FrameOutcome> = (0..frames)
        .into_par_iter()
        .map(|f| {
            let r = f * per_frame..(f + 1) * per_frame;
            let frame_seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(f as u64);
            reconcile_frame(&adapted, &x[r.clone()], &y[r], snr, cfg, frame_seed, cfg.corrupt_frames.contains(&f))
        })
        .collect::<Result<_>>()?;

    let verified: Vec<&FrameOutcome> = outcomes.iter().filter(|o| o.verified).collect();
    report.frames_verified = verified.len();
    report.frames_converged_unverified = outcomes.iter().filter(|o| o.converged && !o.verified).count();
    report.fer = Some(1.0 - verified.len() as f64 / frames as f64);
    report.mean_iterations = outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / frames as f64;
    report.symbols_verified = verified.len() * per_frame / cfg.dims_per_symbol;
    let input: Vec<u8> = verified.iter().flat_map(|o| o.key_bits.iter().copied()).collect();
    report.pa_input_bits = input.len();
    report.leaked_bits = verified.len() * adapted.m();
    report.final_len = (report.symbols_verified as f64 * secret_fraction).floor() as usize;
    report.frame_outcomes = outcomes.iter().map(|o| FrameOutcome { key_bits: Vec::new(), ..o.clone() }).collect();

    if verified.is_empty() || report.final_len == 0 {
        report.aborted = Some("no verified frame".into());
        report.final_len = 0;
        return Ok((Vec::new(), report));
    }
    let available = report.pa_input_bits - report.leaked_bits.min(report.pa_input_bits);
    if report.final_len > available {
        return Err(PostprocError::Infeasible(format!(
            "final length {} exceeds the {available} bits left after {} leaked syndrome bits",
            report.final_len, report.leaked_bits
        )));
    }
    let key = privacy_amplify(&input, report.final_len, cfg.seed ^ 0x7031_7a11)?;
    report.key_per_symbol = key.len() as f64 / report.n_symbols as f64;
    report.key_digest = Some(bits_digest(&key));
    Ok((key, report))
}
