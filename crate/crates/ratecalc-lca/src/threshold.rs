//! Excess noise at which the key rate vanishes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lca;
use crate::params::{ChannelScenario, Method, ProtocolParams, SkrReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdOptions {
    /// Stop once `|β·I_AB − S_BE|` is below this (bits/symbol).
    pub tol_bits: f64,
    /// Lower end of the search. Numerical bounds can be ill-posed at ε = 0
    /// (pure-loss channel), so the bracket starts slightly above zero.
    pub min_epsilon: f64,
    /// Largest excess noise searched.
    pub max_epsilon: f64,
    pub max_iter: usize,
    /// Allowed increase of the key fraction between two evaluations at
    /// growing ε before monotonicity is declared violated. Covers solver
    /// tolerance of numerical bounds.
    pub monotonicity_slack: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self { tol_bits: 1e-6, min_epsilon: 1e-3, max_epsilon: 1.0, max_iter: 200, monotonicity_slack: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub method: Method,
    pub epsilon: f64,
    /// Key fraction at the returned ε.
    pub residual_bits: f64,
    pub evaluations: usize,
}

/// Bisection on ε for `key_fraction(ε) = 0`, where `key_fraction` returns
/// `β·I_AB − S_BE` and must decrease in ε. Every evaluation is checked
/// against the earlier ones for monotonicity.
pub fn bisect_threshold<F>(method: Method, mut key_fraction: F, opts: &ThresholdOptions) -> Result<Threshold>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut eval = |eps: f64| -> Result<f64> {
        let f = key_fraction(eps)?;
        if !f.is_finite() {
            return Err(Error::NumericDomain(format!("key fraction {f} at ε = {eps}")));
        }
        for &(e, v) in &history {
            let violated = (e < eps && f > v + opts.monotonicity_slack) || (e > eps && f < v - opts.monotonicity_slack);
            if violated {
                return Err(Error::NumericDomain(format!(
                    "key fraction not monotone in excess noise: f({e}) = {v}, f({eps}) = {f}"
                )));
            }
        }
        history.push((eps, f));
        Ok(f)
    };
    let lo0 = opts.min_epsilon;
    if !(lo0 >= 0.0 && lo0 < opts.max_epsilon) {
        return Err(Error::InvalidParameter(format!("need 0 <= min_epsilon < max_epsilon, got {lo0}, {}", opts.max_epsilon)));
    }
    let f0 = eval(lo0)?;
    if f0 <= 0.0 {
        return Err(Error::NoRoot(format!("no key at excess noise {lo0} (key fraction {f0:e})")));
    }
    let (mut lo, mut hi) = (lo0, (2.0 * lo0).max(0.01).min(opts.max_epsilon));
    let mut f_hi = eval(hi)?;
    while f_hi > 0.0 {
        if hi >= opts.max_epsilon {
            return Err(Error::NoRoot(format!("key fraction still positive at ε = {hi}")));
        }
        lo = hi;
        hi = (hi * 2.0).min(opts.max_epsilon);
        f_hi = eval(hi)?;
    }
    let mut best = (hi, f_hi);
    for _ in 0..opts.max_iter {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid)?;
        if f.abs() < best.1.abs() {
            best = (mid, f);
        }
        if f.abs() < opts.tol_bits || hi - lo < 1e-12 {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    drop(eval);
    let evaluations = history.len();
    if best.1.abs() >= opts.tol_bits && hi - lo >= 1e-12 {
        return Err(Error::NotConverged { iterations: evaluations, residual: best.1.abs() });
    }
    Ok(Threshold { method, epsilon: best.0, residual_bits: best.1, evaluations })
}

/// LCA key fraction `β·I_AB − S_BE` at excess noise `eps`.
pub fn key_fraction_lca(params: &ProtocolParams, channel: &ChannelScenario, eps: f64) -> Result<f64> {
    let ch = channel.with_excess_noise(eps);
    Ok(lca::mutual_information_lca(params, &ch)? * params.beta() - lca::holevo_bound_lca(params, &ch)?.s_be)
}

/// Null-key threshold of the LCA bound; the excess noise already set on
/// `channel` is ignored.
pub fn null_skr_threshold_lca(params: &ProtocolParams, channel: &ChannelScenario, opts: &ThresholdOptions) -> Result<Threshold> {
    channel.validate()?;
    bisect_threshold(Method::Lca, |e| key_fraction_lca(params, channel, e), opts)
}

/// LCA key-rate report with the null-rate threshold filled in. A missing
/// root (no key even at zero noise) leaves the threshold empty.
pub fn skr_with_threshold_lca(params: &ProtocolParams, channel: &ChannelScenario, opts: &ThresholdOptions) -> Result<SkrReport> {
    let mut report = lca::skr_lca(params, channel)?;
    report.threshold_epsilon = optional_root(null_skr_threshold_lca(params, channel, opts))?;
    Ok(report)
}

/// Maps a missing root to `None`.
pub fn optional_root(r: Result<Threshold>) -> Result<Option<f64>> {
    match r {
        Ok(t) => Ok(Some(t.epsilon)),
        Err(Error::NoRoot(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
