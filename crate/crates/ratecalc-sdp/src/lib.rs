//! Numerical security bound against collective attacks.
//!
//! The worst-case Alice–Bob correlation `Z*` compatible with the observed
//! Bob variance, the observed displacement and Alice's fixed reduced state
//! is found by a semidefinite program on a truncated Fock space. `Z*`
//! enters a Gaussian covariance matrix whose symplectic spectrum bounds
//! Eve's information. The detector is modelled as ideal on this path.

pub mod ensemble;
pub mod fock;
pub mod problem;
pub mod solver;
pub mod threshold;

use std::path::PathBuf;

use serde::Serialize;

use ratecalc_lca::entropy::{check_physical, g_entropy, g_of_eigenvalue, symmetric_two_mode, two_mode_symplectic_eigenvalues};
use ratecalc_lca::error::{Error, Result};
use ratecalc_lca::params::{ChannelScenario, Method, ProtocolParams, SkrReport};
pub use problem::{bob_variance, CorrelationProblem};
pub use solver::{SolverOptions, WarmStart};
pub use threshold::{null_skr_threshold, null_skr_threshold_sdp, skr, skr_with_threshold};

/// Largest cutoff tried by automatic escalation.
pub const MAX_CUTOFF: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpOptions {
    /// Starting Fock cutoff; raised in steps of 4 while the truncated
    /// signal states are not normalised.
    pub cutoff: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Solve the four symmetry sectors as separate blocks.
    pub blocked: bool,
    /// Write the dense problem as JSON before solving.
    #[serde(skip)]
    pub dump_path: Option<PathBuf>,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { cutoff: 16, tol: 1e-6, max_iter: 100_000, blocked: true, dump_path: None }
    }
}

impl SdpOptions {
    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    pub alpha: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
    /// Certified lower bound on the SDP minimum (dual value corrected for
    /// residual dual infeasibility). Conservative for key rates.
    pub z_star: f64,
    /// Objective at the returned primal point.
    pub z_primal: f64,
    pub nu: f64,
    pub gamma_star: [[f64; 4]; 4],
    /// Relative primal–dual objective gap at termination.
    pub dual_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub cutoff: usize,
}

/// `Γ* = [[(1+2α²)I, Zσz], [Zσz, νI]]`.
pub fn optimized_covariance(alpha: f64, nu: f64, z: f64) -> [[f64; 4]; 4] {
    symmetric_two_mode(1.0 + 2.0 * alpha * alpha, nu, z)
}

fn build(alpha: f64, t: f64, eps: f64, options: &SdpOptions) -> Result<CorrelationProblem> {
    let mut cutoff = options.cutoff.max(fock::MIN_CUTOFF);
    loop {
        match CorrelationProblem::new(alpha, t, eps, cutoff) {
            Err(Error::CutoffTooSmall { .. }) if cutoff + 4 <= MAX_CUTOFF => cutoff += 4,
            other => return other,
        }
    }
}

/// Solves for `Z*` and assembles `Γ*`.
pub fn solve_correlation_sdp(alpha: f64, transmittance: f64, excess_noise: f64, options: &SdpOptions) -> Result<SdpSolution> {
    solve_correlation_sdp_warm(alpha, transmittance, excess_noise, options, None).map(|(s, _)| s)
}

/// As [`solve_correlation_sdp`], seeded from and returning solver state.
/// Warm starts are only meaningful between problems with the same `alpha`
/// and cutoff.
pub fn solve_correlation_sdp_warm(
    alpha: f64,
    transmittance: f64,
    excess_noise: f64,
    options: &SdpOptions,
    warm: Option<&WarmStart>,
) -> Result<(SdpSolution, WarmStart)> {
    let problem = build(alpha, transmittance, excess_noise, options)?;
    if let Some(path) = &options.dump_path {
        let text = serde_json::to_string_pretty(&problem.to_json()).expect("plain data");
        std::fs::write(path, text)
            .map_err(|e| Error::InvalidParameter(format!("cannot write SDP dump {}: {e}", path.display())))?;
    }
    let sdp = problem.to_sdp(options.blocked);
    let solver_opts = SolverOptions { tol: options.tol, max_iter: options.max_iter, ..Default::default() };
    let out = sdp.solve(&solver_opts, warm)?;
    let z_star = out.lower_bound.unwrap_or(out.dual_objective);
    let solution = SdpSolution {
        alpha,
        transmittance,
        excess_noise,
        z_star,
        z_primal: out.primal_objective,
        nu: problem.nu,
        gamma_star: optimized_covariance(alpha, problem.nu, z_star),
        dual_gap: out.gap,
        primal_residual: out.primal_residual,
        dual_residual: out.dual_residual,
        min_eigenvalue: out.min_eigenvalue,
        iterations: out.iterations,
        cutoff: problem.cutoff,
    };
    Ok((solution, out.warm))
}

/// `S_BE = G((ν₁−1)/2) + G((ν₂−1)/2) − G((ν₃−1)/2)` with
/// `ν₃ = 1 + 2α² − Z²/(1 + ν)`.
pub fn holevo_bound_from_correlation(alpha: f64, nu: f64, z: f64) -> Result<f64> {
    let gamma = optimized_covariance(alpha, nu, z);
    let (n1, n2) = two_mode_symplectic_eigenvalues(&gamma)?;
    let n1 = check_physical(n1, "ν1")?;
    let n2 = check_physical(n2, "ν2")?;
    let n3 = check_physical(1.0 + 2.0 * alpha * alpha - z * z / (1.0 + nu), "ν3")?;
    let s = g_of_eigenvalue(n1) + g_of_eigenvalue(n2) - g_of_eigenvalue(n3);
    Ok(s.max(0.0))
}

pub fn holevo_bound_sdp(sol: &SdpSolution) -> Result<f64> {
    holevo_bound_from_correlation(sol.alpha, sol.nu, sol.z_star)
}

/// `I_AB = log2(1 + 2Tα²/(2 + Tε))`.
pub fn mutual_information_sdp(alpha: f64, transmittance: f64, excess_noise: f64) -> Result<f64> {
    if !(alpha >= 0.0 && transmittance > 0.0 && transmittance <= 1.0 && excess_noise >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need alpha >= 0, T in (0, 1], eps >= 0; got {alpha}, {transmittance}, {excess_noise}"
        )));
    }
    let snr = 2.0 * transmittance * alpha * alpha / (2.0 + transmittance * excess_noise);
    Ok(snr.ln_1p() / std::f64::consts::LN_2)
}

pub fn skr_sdp(params: &ProtocolParams, channel: &ChannelScenario, options: &SdpOptions) -> Result<SkrReport> {
    channel.validate()?;
    let p = params.ideal_detector();
    let (t, eps) = (channel.transmittance, channel.excess_noise);
    let i_ab = mutual_information_sdp(p.alpha(), t, eps)?;
    let sol = solve_correlation_sdp(p.alpha(), t, eps, options)?;
    let s_be = holevo_bound_sdp(&sol)?;
    Ok(SkrReport::new(Method::Sdp, &p, channel, i_ab, s_be, sol.z_star))
}

/// `G(α²)`: entropy of Alice's thermal reduced state, the value `S_BE`
/// takes when `Z = 0` and `ν = 1 + 2α²`.
pub fn alice_thermal_entropy(alpha: f64) -> f64 {
    g_entropy(alpha * alpha)
}
