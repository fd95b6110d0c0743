//! Protocol, channel and report types shared by both security analyses.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Standard single-mode fiber loss at 1550 nm.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// Fixed loss (connectors, couplers) added on top of the fiber loss in the
/// reference scenarios. Fitting the reference LCA rates gives 0.3 dB at all
/// three distances.
pub const REFERENCE_INSERTION_LOSS_DB: f64 = 0.3;

/// Transceiver-side protocol parameters.
///
/// The modulation variance is always `2·alpha²`; both are set together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    alpha: f64,
    v_a: f64,
    eta: f64,
    v_el: f64,
    beta: f64,
    r_sym: f64,
}

impl ProtocolParams {
    pub fn from_alpha(alpha: f64, eta: f64, v_el: f64, beta: f64, r_sym: f64) -> Result<Self> {
        ensure(alpha.is_finite() && alpha > 0.0, || format!("alpha must be > 0, got {alpha}"))?;
        ensure(eta.is_finite() && eta > 0.0 && eta <= 1.0, || format!("eta must lie in (0,1], got {eta}"))?;
        ensure(v_el.is_finite() && v_el >= 0.0, || format!("v_el must be >= 0, got {v_el}"))?;
        ensure(beta.is_finite() && beta > 0.0 && beta <= 1.0, || format!("beta must lie in (0,1], got {beta}"))?;
        ensure(r_sym.is_finite() && r_sym > 0.0, || format!("symbol rate must be > 0, got {r_sym}"))?;
        Ok(Self { alpha, v_a: 2.0 * alpha * alpha, eta, v_el, beta, r_sym })
    }

    /// Builds the parameters from the modulation variance `V_A` in SNU.
    pub fn from_modulation_variance(v_a: f64, eta: f64, v_el: f64, beta: f64, r_sym: f64) -> Result<Self> {
        ensure(v_a.is_finite() && v_a > 0.0, || format!("modulation variance must be > 0, got {v_a}"))?;
        Self::from_alpha((v_a / 2.0).sqrt(), eta, v_el, beta, r_sym)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn v_a(&self) -> f64 {
        self.v_a
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn v_el(&self) -> f64 {
        self.v_el
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn r_sym(&self) -> f64 {
        self.r_sym
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::from_alpha(self.alpha, self.eta, self.v_el, beta, self.r_sym)
    }

    /// Ideal detector (`eta = 1`, `v_el = 0`), as used by the SDP analysis.
    pub fn ideal_detector(self) -> Self {
        Self { eta: 1.0, v_el: 0.0, ..self }
    }
}

/// Fiber link and excess noise seen by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub distance_km: f64,
    pub attenuation_db_per_km: f64,
    pub insertion_loss_db: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
}

impl ChannelScenario {
    /// Derives `T = 10^(-(a·L + loss)/10)` from the link description.
    pub fn from_distance(
        distance_km: f64,
        attenuation_db_per_km: f64,
        insertion_loss_db: f64,
        excess_noise: f64,
    ) -> Result<Self> {
        ensure(distance_km.is_finite() && distance_km >= 0.0, || format!("distance must be >= 0, got {distance_km}"))?;
        ensure(attenuation_db_per_km.is_finite() && attenuation_db_per_km >= 0.0, || {
            format!("attenuation must be >= 0, got {attenuation_db_per_km}")
        })?;
        ensure(insertion_loss_db.is_finite() && insertion_loss_db >= 0.0, || {
            format!("insertion loss must be >= 0, got {insertion_loss_db}")
        })?;
        ensure(excess_noise.is_finite() && excess_noise >= 0.0, || format!("excess noise must be >= 0, got {excess_noise}"))?;
        let loss_db = attenuation_db_per_km * distance_km + insertion_loss_db;
        Ok(Self {
            distance_km,
            attenuation_db_per_km,
            insertion_loss_db,
            transmittance: 10f64.powf(-loss_db / 10.0),
            excess_noise,
        })
    }

    /// Channel given directly by its transmittance; distance is back-filled
    /// from the default attenuation for reporting only.
    pub fn from_transmittance(transmittance: f64, excess_noise: f64) -> Result<Self> {
        ensure(transmittance.is_finite() && transmittance > 0.0 && transmittance <= 1.0, || {
            format!("transmittance must lie in (0,1], got {transmittance}")
        })?;
        ensure(excess_noise.is_finite() && excess_noise >= 0.0, || format!("excess noise must be >= 0, got {excess_noise}"))?;
        Ok(Self {
            distance_km: -10.0 * transmittance.log10() / DEFAULT_ATTENUATION_DB_PER_KM,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            insertion_loss_db: 0.0,
            transmittance,
            excess_noise,
        })
    }

    pub fn with_excess_noise(self, excess_noise: f64) -> Self {
        Self { excess_noise, ..self }
    }

    pub fn total_loss_db(&self) -> f64 {
        -10.0 * self.transmittance.log10()
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.transmittance.is_finite() && self.transmittance > 0.0 && self.transmittance <= 1.0, || {
            format!("transmittance must lie in (0,1], got {}", self.transmittance)
        })?;
        ensure(self.excess_noise.is_finite() && self.excess_noise >= 0.0, || {
            format!("excess noise must be >= 0, got {}", self.excess_noise)
        })
    }
}

/// Security analysis used to bound Eve's information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Linear-channel-assuming analysis with trusted detector noise.
    Lca,
    /// Semidefinite-programming bound against general collective attacks.
    Sdp,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lca => "LCA",
            Method::Sdp => "SDP",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Asymptotic key-rate evaluation for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkrReport {
    pub method: Method,
    pub distance_km: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
    pub beta: f64,
    pub r_sym: f64,
    /// Bits per symbol.
    pub i_ab: f64,
    /// Bits per symbol.
    pub s_be: f64,
    /// Alice-Bob correlation used for the Holevo bound (Z4 or Z*).
    pub correlation: f64,
    pub skr_bps: f64,
    pub threshold_epsilon: Option<f64>,
}

impl SkrReport {
    pub fn new(
        method: Method,
        params: &ProtocolParams,
        channel: &ChannelScenario,
        i_ab: f64,
        s_be: f64,
        correlation: f64,
    ) -> Self {
        Self {
            method,
            distance_km: channel.distance_km,
            transmittance: channel.transmittance,
            excess_noise: channel.excess_noise,
            beta: params.beta(),
            r_sym: params.r_sym(),
            i_ab,
            s_be,
            correlation,
            skr_bps: secret_key_rate(params.r_sym(), params.beta(), i_ab, s_be),
            threshold_epsilon: None,
        }
    }

    /// Key fraction in bits per symbol before clamping.
    pub fn key_fraction(&self) -> f64 {
        self.beta * self.i_ab - self.s_be
    }
}

/// `R = R_sym·max(0, β·I_AB − S_BE)`.
pub fn secret_key_rate(r_sym: f64, beta: f64, i_ab: f64, s_be: f64) -> f64 {
    r_sym * (beta * i_ab - s_be).max(0.0)
}

/// One of the three experimental operating points (5, 10 and 25 km).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub distance_km: f64,
    /// Mean measured excess noise (SNU).
    pub excess_noise: f64,
    /// Rate-adaptive reconciliation efficiency used for the key rate.
    pub beta_adaptive: f64,
    /// Threshold efficiency of the mother code.
    pub beta_threshold: f64,
    pub code_rate: f64,
    pub snr: f64,
    pub skr_lca_mbps: f64,
    pub skr_sdp_mbps: f64,
    pub threshold_lca: f64,
    pub threshold_sdp: f64,
}

pub const REFERENCE_MODULATION_VARIANCE: f64 = 0.456;
pub const REFERENCE_ETA: f64 = 0.45;
pub const REFERENCE_V_EL: f64 = 0.297;
pub const REFERENCE_SYMBOL_RATE: f64 = 5e9;

pub const REFERENCE_POINTS: [ReferencePoint; 3] = [
    ReferencePoint {
        distance_km: 5.0,
        excess_noise: 0.0072,
        beta_adaptive: 0.9546,
        beta_threshold: 0.9647,
        code_rate: 0.07,
        snr: 0.119,
        skr_lca_mbps: 190.54,
        skr_sdp_mbps: 233.87,
        threshold_lca: 0.0563,
        threshold_sdp: 0.0176,
    },
    ReferencePoint {
        distance_km: 10.0,
        excess_noise: 0.0073,
        beta_adaptive: 0.95,
        beta_threshold: 0.9694,
        code_rate: 0.06,
        snr: 0.094,
        skr_lca_mbps: 133.6,
        skr_sdp_mbps: 137.76,
        threshold_lca: 0.0497,
        threshold_sdp: 0.0141,
    },
    ReferencePoint {
        distance_km: 25.0,
        excess_noise: 0.0075,
        beta_adaptive: 0.951,
        beta_threshold: 0.9746,
        code_rate: 0.03,
        snr: 0.047,
        skr_lca_mbps: 52.48,
        skr_sdp_mbps: 21.53,
        threshold_lca: 0.0371,
        threshold_sdp: 0.0092,
    },
];

impl ReferencePoint {
    /// Trusted-detector parameters with the adaptive efficiency of this point.
    pub fn params(&self) -> ProtocolParams {
        ProtocolParams::from_modulation_variance(
            REFERENCE_MODULATION_VARIANCE,
            REFERENCE_ETA,
            REFERENCE_V_EL,
            self.beta_adaptive,
            REFERENCE_SYMBOL_RATE,
        )
        .expect("reference parameters are valid")
    }

    pub fn channel(&self) -> ChannelScenario {
        ChannelScenario::from_distance(
            self.distance_km,
            DEFAULT_ATTENUATION_DB_PER_KM,
            REFERENCE_INSERTION_LOSS_DB,
            self.excess_noise,
        )
        .expect("reference channel is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulation_variance_round_trip() {
        let p = ProtocolParams::from_modulation_variance(0.456, 0.45, 0.297, 0.95, 5e9).unwrap();
        assert!((p.v_a() - 2.0 * p.alpha() * p.alpha()).abs() < 1e-15);
        let q = ProtocolParams::from_alpha(p.alpha(), 0.45, 0.297, 0.95, 5e9).unwrap();
        assert!((q.v_a() - 0.456).abs() < 1e-14);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(ProtocolParams::from_alpha(0.5, 0.0, 0.1, 0.9, 1e9).is_err());
        assert!(ProtocolParams::from_alpha(0.5, 1.2, 0.1, 0.9, 1e9).is_err());
        assert!(ProtocolParams::from_alpha(0.5, 0.5, -0.1, 0.9, 1e9).is_err());
        assert!(ProtocolParams::from_alpha(0.5, 0.5, 0.1, 1.1, 1e9).is_err());
        assert!(ProtocolParams::from_alpha(f64::NAN, 0.5, 0.1, 0.9, 1e9).is_err());
        assert!(ChannelScenario::from_transmittance(0.0, 0.01).is_err());
        assert!(ChannelScenario::from_distance(-1.0, 0.2, 0.0, 0.01).is_err());
    }

    #[test]
    fn transmittance_from_distance() {
        let c = ChannelScenario::from_distance(10.0, 0.2, 0.0, 0.01).unwrap();
        assert!((c.transmittance - 10f64.powf(-0.2)).abs() < 1e-15);
        let c = ChannelScenario::from_distance(25.0, 0.2, 0.3, 0.01).unwrap();
        assert!((c.total_loss_db() - 5.3).abs() < 1e-12);
    }

    #[test]
    fn rate_is_clamped_at_zero() {
        assert_eq!(secret_key_rate(5e9, 0.95, 0.01, 0.02), 0.0);
        assert!((secret_key_rate(1.0, 0.5, 0.4, 0.1) - 0.1).abs() < 1e-15);
    }
}
