//! Scenario files: TOML (or JSON) with a schema version, every section
//! optional and filled from the reference desk setup.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dsp_chain::chain::DspConfig;
use noise_budget::HardwareProfile;
use phys_sim::sim::SimConfig;
use postproc::extract::ExtractConfig;
use ratecalc_lca::params::{
    ChannelScenario, Method, ProtocolParams, REFERENCE_ETA, REFERENCE_INSERTION_LOSS_DB, REFERENCE_MODULATION_VARIANCE,
    REFERENCE_POINTS, REFERENCE_SYMBOL_RATE, REFERENCE_V_EL, DEFAULT_ATTENUATION_DB_PER_KM,
};
use ratecalc_lca::threshold::ThresholdOptions;
use ratecalc_sdp::SdpOptions;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default = "default_points")]
    pub points: Vec<PointSection>,
    #[serde(default)]
    pub hardware: HardwareSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub dsp: DspConfig,
    #[serde(default)]
    pub postproc: PostprocSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_name() -> String {
    "reference".into()
}
fn default_methods() -> Vec<Method> {
    vec![Method::Lca, Method::Sdp]
}
fn default_seed() -> u64 {
    1
}
fn default_points() -> Vec<PointSection> {
    REFERENCE_POINTS
        .iter()
        .map(|p| PointSection { distance_km: p.distance_km, excess_noise: p.excess_noise, beta: Some(p.beta_adaptive) })
        .collect()
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: default_name(),
            methods: default_methods(),
            seed: default_seed(),
            protocol: ProtocolSection::default(),
            channel: ChannelSection::default(),
            points: default_points(),
            hardware: HardwareSection::default(),
            solver: SolverSection::default(),
            sim: SimSection::default(),
            dsp: DspConfig::default(),
            postproc: PostprocSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub modulation_variance: f64,
    pub eta: f64,
    pub v_el: f64,
    pub symbol_rate: f64,
    /// Reconciliation efficiency for points that do not set their own.
    pub beta: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            modulation_variance: REFERENCE_MODULATION_VARIANCE,
            eta: REFERENCE_ETA,
            v_el: REFERENCE_V_EL,
            symbol_rate: REFERENCE_SYMBOL_RATE,
            beta: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub attenuation_db_per_km: f64,
    pub insertion_loss_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM, insertion_loss_db: REFERENCE_INSERTION_LOSS_DB }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub distance_km: f64,
    pub excess_noise: f64,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareSection {
    /// `separate-path`, `rf-subcarrier` or `noiseless`; ignored when
    /// `profile` is given.
    pub preset: String,
    pub profile: Option<HardwareProfile>,
}

impl Default for HardwareSection {
    fn default() -> Self {
        Self { preset: "separate-path".into(), profile: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub sdp_cutoff: usize,
    pub sdp_tol: f64,
    pub sdp_max_iter: usize,
    pub threshold_tol_bits: f64,
    pub threshold_max_epsilon: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SdpOptions::default();
        let t = ThresholdOptions::default();
        Self {
            sdp_cutoff: s.cutoff,
            sdp_tol: s.tol,
            sdp_max_iter: s.max_iter,
            threshold_tol_bits: t.tol_bits,
            threshold_max_epsilon: t.max_epsilon,
        }
    }
}

/// Simulator settings. Transmittance, excess noise, modulation and
/// detector parameters come from the selected point and the protocol
/// section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub distance_km: f64,
    pub blocks: usize,
    pub n_symbols: usize,
    pub adc_bits: Option<u32>,
    pub linewidth_a_hz: f64,
    pub linewidth_b_hz: f64,
    pub drift_linewidth_hz: f64,
    pub isolation_db: f64,
    pub pilot_amplitude: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            distance_km: 10.0,
            blocks: 30,
            n_symbols: s.n_symbols,
            adc_bits: s.adc_bits,
            linewidth_a_hz: s.channel.linewidth_a_hz,
            linewidth_b_hz: s.channel.linewidth_b_hz,
            drift_linewidth_hz: s.channel.drift_linewidth_hz,
            isolation_db: s.channel.isolation_db,
            pilot_amplitude: s.pilot_amplitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Symbols recovered by the DSP chain from simulated frames.
    Dsp,
    /// Gaussian `y = x + n` at a fixed per-dimension SNR.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocSection {
    pub distance_km: f64,
    pub source: DataSource,
    /// Simulated blocks feeding the DSP source.
    pub blocks: usize,
    /// Per-dimension SNR of the Gaussian source.
    pub gaussian_snr: f64,
    /// Frames drawn from the Gaussian source.
    pub gaussian_frames: usize,
    pub extract: ExtractConfig,
}

impl Default for PostprocSection {
    fn default() -> Self {
        Self {
            distance_km: 10.0,
            source: DataSource::Dsp,
            blocks: 4,
            gaussian_snr: 0.047,
            gaussian_frames: 4,
            extract: ExtractConfig { target_beta: 0.7, ..ExtractConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `start:stop:step` in km.
    pub distance: String,
    /// Excess noise applied at every sweep distance.
    pub excess_noise: f64,
    pub beta: f64,
    pub with_thresholds: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { distance: "0:50:5".into(), excess_noise: 0.0073, beta: 0.95, with_thresholds: false }
    }
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Config(format!("range `{s}` is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let (a, b, h) = (v[0], v[1], v[2]);
    if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(CliError::Config(format!("range `{s}` needs step > 0 and stop >= start")));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(CliError::Config(format!("range `{s}` has more than 100000 points")));
    }
    Ok((0..=n).map(|i| a + h * i as f64).collect())
}

/// Where a point's reconciliation efficiency came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSource {
    Point,
    ProtocolDefault,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let s: Scenario = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.points.is_empty() {
            return Err(CliError::Config("scenario needs at least one [[points]] entry".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            self.params_for(p).map_err(|e| CliError::Config(format!("points[{i}]: {e}")))?;
            self.channel_for(p).map_err(|e| CliError::Config(format!("points[{i}]: {e}")))?;
        }
        self.hardware_profile()?;
        self.point_at(self.sim.distance_km, "sim.distance_km")?;
        self.point_at(self.postproc.distance_km, "postproc.distance_km")?;
        if self.sim.blocks == 0 || self.postproc.blocks == 0 || self.postproc.gaussian_frames == 0 {
            return Err(CliError::Config("block and frame counts must be >= 1".into()));
        }
        parse_range(&self.sweep.distance)?;
        self.dsp.validate().map_err(|e| CliError::Config(format!("dsp: {e}")))?;
        Ok(())
    }

    /// Canonical JSON of the parsed scenario, hashed with SHA-256.
    pub fn digest(&self) -> String {
        let canon = serde_json::to_vec(self).expect("scenario is plain data");
        Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario is plain data")
    }

    pub fn beta_for(&self, p: &PointSection) -> (f64, BetaSource) {
        match p.beta {
            Some(b) => (b, BetaSource::Point),
            None => (self.protocol.beta, BetaSource::ProtocolDefault),
        }
    }

    pub fn params_for(&self, p: &PointSection) -> Result<ProtocolParams> {
        let pr = &self.protocol;
        Ok(ProtocolParams::from_modulation_variance(pr.modulation_variance, pr.eta, pr.v_el, self.beta_for(p).0, pr.symbol_rate)?)
    }

    pub fn channel_for(&self, p: &PointSection) -> Result<ChannelScenario> {
        Ok(ChannelScenario::from_distance(
            p.distance_km,
            self.channel.attenuation_db_per_km,
            self.channel.insertion_loss_db,
            p.excess_noise,
        )?)
    }

    pub fn point_at(&self, distance_km: f64, field: &str) -> Result<&PointSection> {
        self.points
            .iter()
            .find(|p| (p.distance_km - distance_km).abs() < 1e-9)
            .ok_or_else(|| CliError::Config(format!("{field} = {distance_km} km does not match any [[points]] entry")))
    }

    pub fn hardware_profile(&self) -> Result<HardwareProfile> {
        let hw = match &self.hardware.profile {
            Some(p) => p.clone(),
            None => HardwareProfile::preset(&self.hardware.preset).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown hardware preset `{}` (separate-path, rf-subcarrier, noiseless)",
                    self.hardware.preset
                ))
            })?,
        };
        hw.validate().map_err(|e| CliError::Config(format!("hardware: {e}")))?;
        Ok(hw)
    }

    pub fn sdp_options(&self) -> SdpOptions {
        SdpOptions {
            cutoff: self.solver.sdp_cutoff,
            tol: self.solver.sdp_tol,
            max_iter: self.solver.sdp_max_iter,
            ..SdpOptions::default()
        }
    }

    pub fn threshold_options(&self) -> ThresholdOptions {
        ThresholdOptions {
            tol_bits: self.solver.threshold_tol_bits,
            max_epsilon: self.solver.threshold_max_epsilon,
            ..ThresholdOptions::default()
        }
    }

    /// Simulator configuration for the point at `distance_km`.
    pub fn sim_config(&self, distance_km: f64, field: &str) -> Result<SimConfig> {
        let p = self.point_at(distance_km, field)?;
        let params = self.params_for(p)?;
        let ch = self.channel_for(p)?;
        let s = &self.sim;
        let mut c = SimConfig {
            r_sym: self.protocol.symbol_rate,
            adc_bits: s.adc_bits,
            n_symbols: s.n_symbols,
            seed: self.seed,
            alpha: params.alpha(),
            eta: params.eta(),
            v_el: params.v_el(),
            pilot_amplitude: s.pilot_amplitude,
            ..SimConfig::default()
        };
        c.channel.transmittance = ch.transmittance;
        c.channel.excess_noise = ch.excess_noise;
        c.channel.linewidth_a_hz = s.linewidth_a_hz;
        c.channel.linewidth_b_hz = s.linewidth_b_hz;
        c.channel.drift_linewidth_hz = s.drift_linewidth_hz;
        c.channel.isolation_db = s.isolation_db;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_reference_defaults() {
        let s = Scenario::from_toml("schema_version = 1").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.points.len(), 3);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = Scenario::default();
        assert_eq!(a.digest(), Scenario::default().digest());
        let b = Scenario { seed: 2, ..Scenario::default() };
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn json_round_trip() {
        let a = Scenario::default();
        let b: Scenario = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn actionable_errors() {
        let e = Scenario::from_toml("schema_version = 2").unwrap_err();
        assert!(e.to_string().contains("schema_version"), "{e}");
        let e = Scenario::from_toml("schema_version = 1\n[protocol]\netaa = 0.5").unwrap_err();
        assert!(e.to_string().contains("etaa"), "{e}");
        let e = Scenario::from_toml("schema_version = 1\n[hardware]\npreset = \"x\"").unwrap_err();
        assert!(e.to_string().contains("preset"), "{e}");
        let e = Scenario::from_toml("schema_version = 1\n[sim]\ndistance_km = 7").unwrap_err();
        assert!(e.to_string().contains("sim.distance_km"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:10:5").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_range("1:1:1").unwrap(), vec![1.0]);
        assert!(parse_range("0:10").is_err());
        assert!(parse_range("0:10:0").is_err());
        assert!(parse_range("5:1:1").is_err());
    }

    #[test]
    fn sim_config_follows_the_point() {
        let s = Scenario::default();
        let c = s.sim_config(10.0, "sim.distance_km").unwrap();
        assert!((c.channel.transmittance - 10f64.powf(-0.23)).abs() < 1e-12);
        assert_eq!(c.channel.excess_noise, 0.0073);
        assert!((2.0 * c.alpha * c.alpha - 0.456).abs() < 1e-12);
    }
}
