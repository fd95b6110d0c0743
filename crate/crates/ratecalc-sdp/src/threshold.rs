//! Null-key threshold of the numerical bound, and dispatch over both bounds.

use ratecalc_lca::error::Result;
use ratecalc_lca::lca;
use ratecalc_lca::params::{ChannelScenario, Method, ProtocolParams, SkrReport};
use ratecalc_lca::threshold::{bisect_threshold, null_skr_threshold_lca, optional_root, Threshold, ThresholdOptions};

use crate::{holevo_bound_sdp, mutual_information_sdp, skr_sdp, solve_correlation_sdp_warm, SdpOptions, WarmStart};

/// Null-key threshold of the SDP bound. Consecutive solves along the
/// bisection are warm-started from the previous dual iterate.
pub fn null_skr_threshold_sdp(
    params: &ProtocolParams,
    channel: &ChannelScenario,
    opts: &ThresholdOptions,
    sdp: &SdpOptions,
) -> Result<Threshold> {
    channel.validate()?;
    let p = params.ideal_detector();
    let (t, a) = (channel.transmittance, p.alpha());
    let mut warm: Option<WarmStart> = None;
    let key_fraction = |eps: f64| -> Result<f64> {
        let (sol, w) = solve_correlation_sdp_warm(a, t, eps, sdp, warm.as_ref())?;
        warm = Some(w);
        Ok(mutual_information_sdp(a, t, eps)? * p.beta() - holevo_bound_sdp(&sol)?)
    };
    bisect_threshold(Method::Sdp, key_fraction, opts)
}

/// Key-rate report of either bound.
pub fn skr(method: Method, params: &ProtocolParams, channel: &ChannelScenario, sdp: &SdpOptions) -> Result<SkrReport> {
    match method {
        Method::Lca => lca::skr_lca(params, channel),
        Method::Sdp => skr_sdp(params, channel, sdp),
    }
}

/// Null-key threshold of either bound.
pub fn null_skr_threshold(
    params: &ProtocolParams,
    channel: &ChannelScenario,
    method: Method,
    opts: &ThresholdOptions,
    sdp: &SdpOptions,
) -> Result<Threshold> {
    match method {
        Method::Lca => null_skr_threshold_lca(params, channel, opts),
        Method::Sdp => null_skr_threshold_sdp(params, channel, opts, sdp),
    }
}

/// Key-rate report with the threshold filled in; `None` when there is no
/// key even at zero excess noise.
pub fn skr_with_threshold(
    method: Method,
    params: &ProtocolParams,
    channel: &ChannelScenario,
    opts: &ThresholdOptions,
    sdp: &SdpOptions,
) -> Result<SkrReport> {
    let mut report = skr(method, params, channel, sdp)?;
    report.threshold_epsilon = optional_root(null_skr_threshold(params, channel, method, opts, sdp))?;
    Ok(report)
}
