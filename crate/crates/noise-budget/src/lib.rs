//! Excess-noise budget of the transceiver, in shot-noise units referred to
//! the channel input.

use serde::{Deserialize, Serialize};

use ratecalc_lca::error::{ensure, Result};
use ratecalc_lca::params::{ChannelScenario, ProtocolParams};

pub const PLANCK: f64 = 6.626_070_15e-34;

/// Converts a relative intensity noise in dBc/Hz to a linear 1/Hz value.
pub fn rin_from_dbc_per_hz(dbc: f64) -> f64 {
    10f64.powf(dbc / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    /// Signal-laser RIN (1/Hz).
    pub rin_quan: f64,
    /// LO-laser RIN (1/Hz).
    pub rin_lo: f64,
    /// Electronic bandwidth (Hz).
    pub bandwidth_b: f64,
    /// DAC full-scale voltage (V).
    pub v_dac: f64,
    /// DAC LSB voltage (V).
    pub delta_v_dac: f64,
    /// Modulator extinction ratio (dB).
    pub d_db: f64,
    /// Pilot (or subcarrier) amplitude squared (SNU) that leaks through the
    /// modulator and the isolation.
    pub a_r_sq: f64,
    /// Pilot-to-signal isolation ratio (linear).
    pub r_e: f64,
    /// Noise-equivalent power (W/√Hz).
    pub nep: f64,
    /// LO power (W).
    pub p_lo: f64,
    /// Optical frequency (Hz).
    pub f_opt: f64,
    /// Pulse duration (s).
    pub tau: f64,
    /// Transimpedance gain (V/A).
    pub g: f64,
    /// Photodiode responsivity (A/W).
    pub rho: f64,
    /// ADC full range (V).
    pub r_u: f64,
    pub n_bits: u32,
    /// Laser linewidths (Hz).
    pub linewidth_a: f64,
    pub linewidth_b: f64,
    /// Low-frequency detector noise (SNU), supplied directly.
    pub epsilon_lf: f64,
    /// Quantum variance used in the LO-RIN term. `None` means
    /// `V_A·T + 1 + ε_other`.
    #[serde(default)]
    pub v_rin_q: Option<f64>,
}

impl HardwareProfile {
    /// Every noise source switched off (infinite extinction and isolation,
    /// ideal converters).
    pub fn noiseless() -> Self {
        Self {
            rin_quan: 0.0,
            rin_lo: 0.0,
            bandwidth_b: 1e10,
            v_dac: 1.0,
            delta_v_dac: 0.0,
            d_db: f64::INFINITY,
            a_r_sq: 0.0,
            r_e: f64::INFINITY,
            nep: 0.0,
            p_lo: 10e-3,
            f_opt: 193.4e12,
            tau: 0.2e-9,
            g: 5000.0,
            rho: 0.8,
            r_u: 0.0,
            n_bits: 16,
            linewidth_a: 0.0,
            linewidth_b: 0.0,
            epsilon_lf: 0.0,
            v_rin_q: None,
        }
    }

    /// Pilot and quantum signal generated on separate optical paths and
    /// isolated in frequency and polarization: the modulator and leakage
    /// terms vanish. Remaining values are representative component data.
    pub fn separate_path() -> Self {
        Self {
            rin_quan: rin_from_dbc_per_hz(-100.0),
            rin_lo: rin_from_dbc_per_hz(-100.0),
            bandwidth_b: 10e9,
            v_dac: 1.0,
            delta_v_dac: 1.0 / 256.0,
            d_db: 30.0,
            a_r_sq: 0.0,
            r_e: f64::INFINITY,
            nep: 20e-12,
            p_lo: 10e-3,
            f_opt: 193.4e12,
            tau: 0.2e-9,
            g: 5000.0,
            rho: 0.8,
            r_u: 1.0,
            n_bits: 8,
            linewidth_a: 100.0,
            linewidth_b: 100.0,
            epsilon_lf: 0.0,
            v_rin_q: None,
        }
    }

    /// Single-path scheme with an RF-subcarrier pilot sharing the modulator
    /// and detector with the quantum signal.
    pub fn rf_subcarrier() -> Self {
        Self { a_r_sq: 1000.0, r_e: 1e3, ..Self::separate_path() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "separate-path" => Some(Self::separate_path()),
            "rf-subcarrier" => Some(Self::rf_subcarrier()),
            "noiseless" => Some(Self::noiseless()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rin_quan", self.rin_quan),
            ("rin_lo", self.rin_lo),
            ("bandwidth_b", self.bandwidth_b),
            ("v_dac", self.v_dac),
            ("delta_v_dac", self.delta_v_dac),
            ("d_db", self.d_db),
            ("a_r_sq", self.a_r_sq),
            ("r_e", self.r_e),
            ("nep", self.nep),
            ("p_lo", self.p_lo),
            ("f_opt", self.f_opt),
            ("tau", self.tau),
            ("g", self.g),
            ("rho", self.rho),
            ("r_u", self.r_u),
            ("linewidth_a", self.linewidth_a),
            ("linewidth_b", self.linewidth_b),
            ("epsilon_lf", self.epsilon_lf),
        ];
        for (name, v) in fields {
            ensure(!v.is_nan() && v >= 0.0, || format!("hardware field {name} must be >= 0, got {v}"))?;
        }
        ensure((1..=16).contains(&self.n_bits), || format!("n_bits must be in 1..=16, got {}", self.n_bits))?;
        for (name, v) in [("v_dac", self.v_dac), ("p_lo", self.p_lo), ("f_opt", self.f_opt), ("g", self.g), ("rho", self.rho)] {
            ensure(v > 0.0 && v.is_finite(), || format!("hardware field {name} must be positive and finite"))?;
        }
        if let Some(v) = self.v_rin_q {
            ensure(v >= 0.0, || format!("v_rin_q must be >= 0, got {v}"))?;
        }
        Ok(())
    }
}

/// `T·V_A·√(RIN_quan·B) + ¼·RIN_LO·B·V_RIN(q̂)`.
pub fn epsilon_rin(hw: &HardwareProfile, t: f64, v_a: f64, v_rin_q: f64) -> f64 {
    t * v_a * (hw.rin_quan * hw.bandwidth_b).sqrt() + 0.25 * hw.rin_lo * hw.bandwidth_b * v_rin_q
}

/// Upper bound `T·V_A·[π·δV/V + (π²/2)(δV/V)²]²`.
pub fn epsilon_dac(hw: &HardwareProfile, t: f64, v_a: f64) -> f64 {
    let r = hw.delta_v_dac / hw.v_dac;
    let pi = std::f64::consts::PI;
    t * v_a * (pi * r + 0.5 * pi * pi * r * r).powi(2)
}

/// `|a_R|²·10^(−d/10)`.
pub fn epsilon_mod(hw: &HardwareProfile) -> f64 {
    if hw.a_r_sq == 0.0 {
        return 0.0;
    }
    hw.a_r_sq * 10f64.powf(-hw.d_db / 10.0)
}

/// `2|a_R|²/R_e`.
pub fn epsilon_leak(hw: &HardwareProfile) -> f64 {
    if hw.a_r_sq == 0.0 {
        return 0.0;
    }
    2.0 * hw.a_r_sq / hw.r_e
}

/// `2·NEP²/(h·f)·B·τ/P_LO + ε_LF`.
pub fn epsilon_det(hw: &HardwareProfile) -> f64 {
    2.0 * hw.nep * hw.nep / (PLANCK * hw.f_opt) * hw.bandwidth_b * hw.tau / hw.p_lo + hw.epsilon_lf
}

/// `2·τ/(h·f·g²·ρ²·P_LO·η·T)·(1/12)·R_U²/2^{2n}`.
pub fn epsilon_adc(hw: &HardwareProfile, t: f64, eta: f64) -> f64 {
    let lsb_var = hw.r_u * hw.r_u / 4f64.powi(hw.n_bits as i32) / 12.0;
    2.0 * hw.tau / (PLANCK * hw.f_opt * hw.g * hw.g * hw.rho * hw.rho * hw.p_lo * eta * t) * lsb_var
}

/// `2π·V_A·(Δν_A + Δν_B)/R_sym`.
pub fn epsilon_phase_fast(hw: &HardwareProfile, v_a: f64, r_sym: f64) -> f64 {
    2.0 * std::f64::consts::PI * v_a * (hw.linewidth_a + hw.linewidth_b) / r_sym
}

/// Fast laser-phase term plus a slow-drift term measured elsewhere.
pub fn epsilon_phase(hw: &HardwareProfile, v_a: f64, r_sym: f64, slow_term: f64) -> f64 {
    epsilon_phase_fast(hw, v_a, r_sym) + slow_term
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseBudget {
    pub rin: f64,
    pub dac: f64,
    pub modulation: f64,
    pub leak: f64,
    pub det: f64,
    pub adc: f64,
    pub phase_fast: f64,
    pub phase_slow: f64,
    pub total: f64,
    /// Quantum variance used in the LO-RIN term.
    pub v_rin_q: f64,
}

/// One line of the exported table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub term: &'static str,
    pub formula: &'static str,
    pub inputs: String,
    pub snu: f64,
}

impl NoiseBudget {
    pub fn terms(&self) -> [(&'static str, f64); 8] {
        [
            ("rin", self.rin),
            ("dac", self.dac),
            ("mod", self.modulation),
            ("leak", self.leak),
            ("det", self.det),
            ("adc", self.adc),
            ("phase_fast", self.phase_fast),
            ("phase_slow", self.phase_slow),
        ]
    }

    pub fn sum_of_terms(&self) -> f64 {
        self.terms().iter().map(|(_, v)| v).sum()
    }

    pub fn rows(&self, hw: &HardwareProfile, channel: &ChannelScenario, params: &ProtocolParams) -> Vec<BudgetRow> {
        let t = channel.transmittance;
        let row = |term, formula, inputs: String, snu| BudgetRow { term, formula, inputs, snu };
        vec![
            row(
                "rin",
                "T*V_A*sqrt(RIN_quan*B) + RIN_LO*B*V_RIN/4",
                format!("T={t} V_A={} RIN_quan={} RIN_LO={} B={} V_RIN={}", params.v_a(), hw.rin_quan, hw.rin_lo, hw.bandwidth_b, self.v_rin_q),
                self.rin,
            ),
            row("dac", "T*V_A*(pi*dV/V + pi^2/2*(dV/V)^2)^2", format!("T={t} V_A={} dV={} V={}", params.v_a(), hw.delta_v_dac, hw.v_dac), self.dac),
            row("mod", "|a_R|^2*10^(-d/10)", format!("a_R^2={} d_dB={}", hw.a_r_sq, hw.d_db), self.modulation),
            row("leak", "2*|a_R|^2/R_e", format!("a_R^2={} R_e={}", hw.a_r_sq, hw.r_e), self.leak),
            row(
                "det",
                "2*NEP^2/(h*f)*B*tau/P_LO + eps_LF",
                format!("NEP={} f={} B={} tau={} P_LO={} eps_LF={}", hw.nep, hw.f_opt, hw.bandwidth_b, hw.tau, hw.p_lo, hw.epsilon_lf),
                self.det,
            ),
            row(
                "adc",
                "2*tau/(h*f*g^2*rho^2*P_LO*eta*T)*R_U^2/(12*2^(2n))",
                format!("tau={} g={} rho={} P_LO={} eta={} T={t} R_U={} n={}", hw.tau, hw.g, hw.rho, hw.p_lo, params.eta(), hw.r_u, hw.n_bits),
                self.adc,
            ),
            row(
                "phase_fast",
                "2*pi*V_A*(dnu_A + dnu_B)/R_sym",
                format!("V_A={} dnu_A={} dnu_B={} R_sym={}", params.v_a(), hw.linewidth_a, hw.linewidth_b, params.r_sym()),
                self.phase_fast,
            ),
            row("phase_slow", "measured", String::new(), self.phase_slow),
            row("total", "sum", String::new(), self.total),
        ]
    }

    pub fn to_csv(&self, hw: &HardwareProfile, channel: &ChannelScenario, params: &ProtocolParams) -> String {
        let mut out = String::from("term,formula,inputs,snu\n");
        for r in self.rows(hw, channel, params) {
            out.push_str(&format!("{},\"{}\",\"{}\",{:e}\n", r.term, r.formula, r.inputs, r.snu));
        }
        out
    }
}

/// Evaluates every term and sums them. `phase_slow` comes from the DSP
/// chain (or 0 when not measured).
pub fn total_budget(
    hw: &HardwareProfile,
    channel: &ChannelScenario,
    params: &ProtocolParams,
    phase_slow: f64,
) -> Result<NoiseBudget> {
    hw.validate()?;
    channel.validate()?;
    ensure(phase_slow >= 0.0, || format!("slow phase term must be >= 0, got {phase_slow}"))?;
    let t = channel.transmittance;
    let v_a = params.v_a();
    let dac = epsilon_dac(hw, t, v_a);
    let modulation = epsilon_mod(hw);
    let leak = epsilon_leak(hw);
    let det = epsilon_det(hw);
    let adc = epsilon_adc(hw, t, params.eta());
    let phase_fast = epsilon_phase_fast(hw, v_a, params.r_sym());
    let others = dac + modulation + leak + det + adc + phase_fast + phase_slow;
    let v_rin_q = hw.v_rin_q.unwrap_or(v_a * t + 1.0 + others);
    let rin = epsilon_rin(hw, t, v_a, v_rin_q);
    let mut b = NoiseBudget { rin, dac, modulation, leak, det, adc, phase_fast, phase_slow, total: 0.0, v_rin_q };
    b.total = b.sum_of_terms();
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hw() -> HardwareProfile {
        HardwareProfile::separate_path()
    }

    #[test]
    fn rin_terms_match_direct_evaluation() {
        let mut h = hw();
        h.rin_lo = 0.0;
        assert!((epsilon_rin(&h, 0.631, 0.456, 1.0) - 0.287_736).abs() < 1e-12);
        let mut h = hw();
        h.rin_quan = 0.0;
        assert!((epsilon_rin(&h, 0.631, 0.456, 1.0) - 0.25).abs() < 1e-12);
        // doubling B: √2 on the first term, 2 on the second
        let mut h2 = hw();
        h2.bandwidth_b *= 2.0;
        let first = |h: &HardwareProfile| epsilon_rin(&HardwareProfile { rin_lo: 0.0, ..h.clone() }, 0.631, 0.456, 1.0);
        assert!((first(&h2) / first(&hw()) - 2f64.sqrt()).abs() < 1e-12);
        assert!((epsilon_rin(&HardwareProfile { rin_quan: 0.0, ..h2 }, 0.631, 0.456, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(epsilon_rin(&HardwareProfile { rin_quan: 0.0, rin_lo: 0.0, ..hw() }, 0.6, 0.4, 1.2), 0.0);
    }

    #[test]
    fn dac_term() {
        assert!((epsilon_dac(&hw(), 0.631, 0.456) - 4.386_592_859_984e-5).abs() < 1e-15);
        assert_eq!(epsilon_dac(&HardwareProfile { delta_v_dac: 0.0, ..hw() }, 0.631, 0.456), 0.0);
        assert!((epsilon_dac(&hw(), 0.4, 0.456) * 2.0 - epsilon_dac(&hw(), 0.8, 0.456)).abs() < 1e-18);
    }

    #[test]
    fn modulation_and_leakage_terms() {
        let h = HardwareProfile::rf_subcarrier();
        assert!((epsilon_mod(&h) - 1.0).abs() < 1e-12);
        assert!((epsilon_leak(&h) - 2.0).abs() < 1e-12);
        let sep = HardwareProfile::separate_path();
        assert_eq!(epsilon_mod(&sep), 0.0);
        assert_eq!(epsilon_leak(&sep), 0.0);
        assert_eq!(epsilon_mod(&HardwareProfile { d_db: f64::INFINITY, ..h.clone() }), 0.0);
        assert_eq!(epsilon_leak(&HardwareProfile { r_e: f64::INFINITY, ..h }), 0.0);
    }

    #[test]
    fn detection_term() {
        assert!((epsilon_det(&hw()) - 1.248_554_440_241_697_5).abs() < 1e-12);
        let half = epsilon_det(&HardwareProfile { p_lo: 5e-3, ..hw() });
        assert!((half - 2.0 * epsilon_det(&hw())).abs() < 1e-12);
        assert_eq!(epsilon_det(&HardwareProfile { nep: 0.0, ..hw() }), 0.0);
    }

    #[test]
    fn adc_term() {
        assert!((epsilon_adc(&hw(), 0.631, 0.45) - 0.087_362_380_575_621_37).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for n in 1..=16 {
            let v = epsilon_adc(&HardwareProfile { n_bits: n, ..hw() }, 0.631, 0.45);
            assert!(v < prev);
            if n > 1 {
                assert!((prev / v - 4.0).abs() < 1e-9);
            }
            prev = v;
        }
    }

    #[test]
    fn phase_fast_term() {
        assert!((epsilon_phase_fast(&hw(), 0.456, 5e9) - 1.146_053_000_029_557e-7).abs() < 1e-20);
        assert_eq!(epsilon_phase_fast(&HardwareProfile { linewidth_a: 0.0, linewidth_b: 0.0, ..hw() }, 0.456, 5e9), 0.0);
        assert!((epsilon_phase(&hw(), 0.456, 5e9, 1e-3) - 1e-3 - 1.146_053_000_029_557e-7).abs() < 1e-18);
    }

    #[test]
    fn noiseless_profile_has_zero_budget() {
        let params = ProtocolParams::from_modulation_variance(0.456, 0.45, 0.297, 0.95, 5e9).unwrap();
        let ch = ChannelScenario::from_transmittance(0.5, 0.0).unwrap();
        let b = total_budget(&HardwareProfile::noiseless(), &ch, &params, 0.0).unwrap();
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        assert!(HardwareProfile { n_bits: 0, ..hw() }.validate().is_err());
        assert!(HardwareProfile { nep: -1.0, ..hw() }.validate().is_err());
        assert!(HardwareProfile { p_lo: 0.0, ..hw() }.validate().is_err());
        assert!(HardwareProfile::preset("separate-path").unwrap().validate().is_ok());
        assert!(HardwareProfile::preset("nope").is_none());
    }

    #[test]
    fn csv_has_header_and_one_row_per_term() {
        let params = ProtocolParams::from_modulation_variance(0.456, 0.45, 0.297, 0.95, 5e9).unwrap();
        let ch = ChannelScenario::from_transmittance(0.5, 0.0).unwrap();
        let h = hw();
        let b = total_budget(&h, &ch, &params, 0.0).unwrap();
        assert_eq!(b.to_csv(&h, &ch, &params).lines().count(), 10);
    }
}
