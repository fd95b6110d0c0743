//! Key rate under the linear-channel-assuming analysis with trusted
//! heterodyne detector noise.
//!
//! Conventions: shot-noise units, Alice's variance `V = V_A + 1`, channel
//! noise referred to the input `χ_line = 1/T − 1 + ε`, heterodyne detector
//! noise `χ_het = (2 − η + 2v_el)/η`.

use serde::Serialize;

use crate::entropy::{check_physical_tol, g_of_eigenvalue, symplectic_pair};
use crate::error::{ensure, Error, Result};
use crate::params::{ChannelScenario, Method, ProtocolParams, SkrReport};

/// Round-off allowance for eigenvalues obtained from the closed-form
/// invariants, which become ill-conditioned near a pure state.
const CLOSED_FORM_TOL: f64 = 1e-7;

/// Largest `α²` for which the state weights are evaluated.
const MAX_ALPHA_SQ: f64 = 500.0;

/// Heterodyne detection noise referred to Bob's input.
pub fn chi_het(eta: f64, v_el: f64) -> Result<f64> {
    ensure(eta > 0.0 && eta <= 1.0, || format!("eta must lie in (0,1], got {eta}"))?;
    ensure(v_el >= 0.0, || format!("v_el must be >= 0, got {v_el}"))?;
    Ok(((2.0 - eta) + 2.0 * v_el) / eta)
}

pub fn chi_line(transmittance: f64, excess_noise: f64) -> f64 {
    1.0 / transmittance - 1.0 + excess_noise
}

/// `ξ_m = Σ_n α^{2(4n+m)}/(4n+m)!` for `m = 0..3`, i.e.
/// `½[cosh α² ± cos α²]` and `½[sinh α² ± sin α²]`, summed as series so the
/// odd pair does not cancel catastrophically for small `α`.
pub fn xi_weights(alpha: f64) -> Result<[f64; 4]> {
    ensure(alpha.is_finite() && alpha >= 0.0, || format!("alpha must be >= 0, got {alpha}"))?;
    let x = alpha * alpha;
    ensure(x <= MAX_ALPHA_SQ, || format!("alpha² = {x} too large"))?;
    let mut xi = [0.0; 4];
    let mut term = 1.0; // x^k / k!
    let mut k = 0usize;
    loop {
        xi[k % 4] += term;
        k += 1;
        term *= x / k as f64;
        if term == 0.0 {
            break;
        }
        // past the peak the terms shrink geometrically
        let smallest = xi.iter().cloned().fold(f64::INFINITY, f64::min);
        if k >= 4 && (k as f64) > 2.0 * x + 4.0 && term < 1e-18 * smallest {
            break;
        }
    }
    Ok(xi)
}

/// Populations `λ_m = e^{−α²}·ξ_m` of the four phase-symmetric components
/// of the modulated ensemble; they sum to 1.
pub fn state_weights(alpha: f64) -> Result<[f64; 4]> {
    let xi = xi_weights(alpha)?;
    let scale = (-alpha * alpha).exp();
    Ok(xi.map(|v| v * scale))
}

/// Alice–Bob correlation of the four-state ensemble,
/// `Z4 = 2α² Σ_m λ_m^{3/2} λ_{m+1}^{−1/2}`.
pub fn correlation_z4(alpha: f64) -> Result<f64> {
    ensure(alpha.is_finite() && alpha > 0.0, || format!("alpha must be > 0, got {alpha}"))?;
    let lam = state_weights(alpha)?;
    if lam.iter().any(|&l| !(l >= f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate(format!("state weights underflow at alpha = {alpha:e}: {lam:?}")));
    }
    let sum: f64 = (0..4).map(|m| lam[m].powf(1.5) / lam[(m + 1) % 4].sqrt()).sum();
    Ok(2.0 * alpha * alpha * sum)
}

/// `I_AB = log2[(V + χ_line + χ_het/T)/(1 + χ_line + χ_het/T)]`.
pub fn mutual_information_lca(params: &ProtocolParams, channel: &ChannelScenario) -> Result<f64> {
    channel.validate()?;
    let t = channel.transmittance;
    let chi_h = chi_het(params.eta(), params.v_el())?;
    let chi_l = chi_line(t, channel.excess_noise);
    let v = params.v_a() + 1.0;
    let i = ((v + chi_l + chi_h / t) / (1.0 + chi_l + chi_h / t)).log2();
    Ok(i.max(0.0))
}

/// Intermediate quantities of the Holevo-bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LcaHolevo {
    pub s_be: f64,
    pub correlation: f64,
    /// `λ1..λ4`: two of the Alice–Bob state, two of Alice conditioned on Bob.
    pub eigenvalues: [f64; 4],
}

/// Holevo bound with the four-state correlation `Z4`.
pub fn holevo_bound_lca(params: &ProtocolParams, channel: &ChannelScenario) -> Result<LcaHolevo> {
    let z = correlation_z4(params.alpha())?;
    holevo_bound_lca_with_correlation(params, channel, z)
}

/// Holevo bound for an arbitrary correlation `z`. Passing
/// `sqrt(V² − 1)` gives the Gaussian-modulation bound.
pub fn holevo_bound_lca_with_correlation(
    params: &ProtocolParams,
    channel: &ChannelScenario,
    z: f64,
) -> Result<LcaHolevo> {
    channel.validate()?;
    let t = channel.transmittance;
    let v = params.v_a() + 1.0;
    let chi_l = chi_line(t, channel.excess_noise);
    let chi_h = chi_het(params.eta(), params.v_el())?;
    let z2 = z * z;

    let a = v * v + t * t * (v + chi_l).powi(2) - 2.0 * t * z2;
    let b = (t * v * v + t * v * chi_l - t * z2).powi(2);
    let denom = (t * (v + chi_l + chi_h / t)).powi(2);
    let c = (a * chi_h * chi_h + b + 1.0 + 2.0 * chi_h * (v * b.sqrt() + t * (v + chi_l)) + 2.0 * t * z2) / denom;
    let d = (v + chi_h * b.sqrt()).powi(2) / denom;

    let (l1, l2) = symplectic_pair(a, b)?;
    let (l3, l4) = symplectic_pair(c, d)?;
    let eigenvalues = [
        check_physical_tol(l1, "λ1", CLOSED_FORM_TOL)?,
        check_physical_tol(l2, "λ2", CLOSED_FORM_TOL)?,
        check_physical_tol(l3, "λ3", CLOSED_FORM_TOL)?,
        check_physical_tol(l4, "λ4", CLOSED_FORM_TOL)?,
    ];
    let s_be = g_of_eigenvalue(eigenvalues[0]) + g_of_eigenvalue(eigenvalues[1])
        - g_of_eigenvalue(eigenvalues[2])
        - g_of_eigenvalue(eigenvalues[3]);
    Ok(LcaHolevo { s_be: s_be.max(0.0), correlation: z, eigenvalues })
}

pub fn skr_lca(params: &ProtocolParams, channel: &ChannelScenario) -> Result<SkrReport> {
    let i_ab = mutual_information_lca(params, channel)?;
    let h = holevo_bound_lca(params, channel)?;
    Ok(SkrReport::new(Method::Lca, params, channel, i_ab, h.s_be, h.correlation))
}
