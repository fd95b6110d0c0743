//! Sampled-waveform model of the transmitter, fiber channel and the two
//! heterodyne receivers (quantum and pilot polarization).
//!
//! All amplitudes are in shot-noise units. A quantum symbol has
//! quadratures `±α`; after matched filtering, white noise of per-sample
//! variance `σ²` added to a real IF record appears with variance `σ²` per
//! quadrature on the symbols.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::filters::{convolve_same, rrc_taps};
use crate::constellation::{symbol_bits, symbol_point};

/// Per-block RNG purposes; each gets its own ChaCha stream.
#[derive(Clone, Copy)]
enum Stream {
    Symbols = 0,
    LaserPhase = 1,
    Drift = 2,
    QuantumNoise = 3,
    PilotNoise = 4,
    Offsets = 5,
}

pub fn block_rng(seed: u64, block: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(block.wrapping_mul(16).wrapping_add(stream));
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub transmittance: f64,
    /// Excess noise injected at the channel input (SNU).
    pub excess_noise: f64,
    pub linewidth_a_hz: f64,
    pub linewidth_b_hz: f64,
    /// Equivalent linewidth of the slow random-walk drift between the
    /// quantum and pilot paths.
    pub drift_linewidth_hz: f64,
    /// Peak of an optional sinusoidal slow drift (rad) and its frequency.
    pub drift_sine_amplitude: f64,
    pub drift_sine_hz: f64,
    /// Static quantum-vs-pilot phase offset; drawn uniformly when `None`.
    pub phase_offset: Option<f64>,
    /// Polarization isolation between pilot and quantum receivers (dB).
    pub isolation_db: f64,
    pub delay_symbols: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            transmittance: 10f64.powf(-0.23),
            excess_noise: 0.0073,
            linewidth_a_hz: 100.0,
            linewidth_b_hz: 100.0,
            drift_linewidth_hz: 10.0,
            drift_sine_amplitude: 0.0,
            drift_sine_hz: 0.0,
            phase_offset: None,
            isolation_db: 30.0,
            delay_symbols: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub r_sym: f64,
    pub f_shift: f64,
    /// Frequency difference between the two free-running lasers; the pilot
    /// beats here and the quantum band at `f_beat − f_shift`.
    pub f_beat: f64,
    pub rolloff: f64,
    pub sample_rate: f64,
    /// `None` disables quantization.
    pub adc_bits: Option<u32>,
    pub n_symbols: usize,
    pub seed: u64,
    /// Quadrature amplitude of the quantum symbols (`V_A = 2α²`).
    pub alpha: f64,
    pub eta: f64,
    pub v_el: f64,
    /// Transmitted pilot amplitude (√SNU).
    pub pilot_amplitude: f64,
    pub rrc_span_symbols: usize,
    pub channel: ChannelConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            r_sym: 5e9,
            f_shift: 3.5e9,
            f_beat: 7.505e9,
            rolloff: 0.3,
            sample_rate: 40e9,
            adc_bits: Some(8),
            n_symbols: 100_000,
            seed: 1,
            alpha: 0.228f64.sqrt(),
            eta: 0.45,
            v_el: 0.297,
            pilot_amplitude: 30.0,
            rrc_span_symbols: 24,
            channel: ChannelConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn samples_per_symbol(&self) -> Result<usize> {
        let r = self.sample_rate / self.r_sym;
        if !(r >= 2.0) || (r - r.round()).abs() > 1e-9 {
            return Err(SimError::InvalidParameter(format!(
                "sample rate must be an integer multiple (>= 2) of the symbol rate, ratio {r}"
            )));
        }
        Ok(r.round() as usize)
    }

    /// `Δf_q = R_sym·(1 + a_ro)`.
    pub fn quantum_bandwidth(&self) -> f64 {
        self.r_sym * (1.0 + self.rolloff)
    }

    pub fn quantum_center(&self) -> f64 {
        self.f_beat - self.f_shift
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos("r_sym", self.r_sym)?;
        pos("sample_rate", self.sample_rate)?;
        pos("f_beat", self.f_beat)?;
        pos("eta", self.eta)?;
        self.samples_per_symbol()?;
        if self.n_symbols == 0 {
            return Err(SimError::InvalidParameter("n_symbols must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rolloff) || self.eta > 1.0 || self.v_el < 0.0 || self.alpha < 0.0 {
            return Err(SimError::InvalidParameter("rolloff/eta must be in [0,1], v_el and alpha >= 0".into()));
        }
        let c = &self.channel;
        if !(c.transmittance > 0.0 && c.transmittance <= 1.0) {
            return Err(SimError::InvalidParameter(format!("transmittance must be in (0, 1], got {}", c.transmittance)));
        }
        for (n, v) in [
            ("excess_noise", c.excess_noise),
            ("linewidth_a_hz", c.linewidth_a_hz),
            ("linewidth_b_hz", c.linewidth_b_hz),
            ("drift_linewidth_hz", c.drift_linewidth_hz),
            ("isolation_db", c.isolation_db),
            ("pilot_amplitude", self.pilot_amplitude),
        ] {
            if !(v >= 0.0) {
                return Err(SimError::InvalidParameter(format!("{n} must be >= 0, got {v}")));
            }
        }
        if c.delay_symbols >= self.n_symbols {
            return Err(SimError::InvalidParameter("delay must be shorter than the block".into()));
        }
        if let Some(b) = self.adc_bits {
            if !(1..=16).contains(&b) {
                return Err(SimError::InvalidParameter(format!("adc_bits must be in 1..=16, got {b}")));
            }
        }
        let highest = self.f_beat + self.quantum_bandwidth() / 2.0;
        if self.sample_rate < 2.0 * highest || self.quantum_center() - self.quantum_bandwidth() / 2.0 <= 0.0 {
            return Err(SimError::Aliasing { sample_rate: self.sample_rate, highest });
        }
        Ok(())
    }
}

/// Ground truth retained for verification of the receiver chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub symbols: Vec<u8>,
    /// Laser phase difference `φ_AB` per sample (shared by both receivers).
    pub laser_phase: Vec<f64>,
    /// Slow quantum-vs-pilot phase per sample, including the static offset.
    pub drift_phase: Vec<f64>,
    pub f_beat: f64,
    pub delay_symbols: usize,
    pub samples_per_symbol: usize,
}

/// Complex envelopes in Alice's pilot-carrier frame.
#[derive(Debug, Clone)]
pub struct TxWaveform {
    /// RRC-shaped symbols shifted to `−f_shift`.
    pub quantum: Vec<Complex64>,
    pub pilot: Vec<Complex64>,
}

/// Fields arriving at the two receivers, noise-free; `noise_variance` is
/// the per-quadrature channel-output noise `1 + T·ε/2` drawn at detection.
#[derive(Debug, Clone)]
pub struct RxField {
    pub quantum: Vec<Complex64>,
    pub pilot: Vec<Complex64>,
    pub noise_variance: f64,
}

/// One digitized receiver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqFrame {
    pub label: String,
    pub sample_rate: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub adc_bits: Option<u32>,
    pub full_scale: Option<f64>,
    /// Quantization step; its `Δ²/12` is calibrated into the trusted
    /// detector noise.
    pub adc_step: Option<f64>,
    pub clip_fraction: f64,
    pub warnings: Vec<String>,
}

impl IqFrame {
    pub fn quantization_variance(&self) -> f64 {
        self.adc_step.map_or(0.0, |d| d * d / 12.0)
    }
}

#[derive(Debug, Clone)]
pub struct FramePair {
    pub quantum: IqFrame,
    pub pilot: IqFrame,
    pub truth: GroundTruth,
}

/// Uniform i.i.d. constellation indices and their bit pairs.
pub fn generate_qpsk_symbols(seed: u64, block: u64, n: usize) -> (Vec<u8>, Vec<u8>) {
    let mut rng = block_rng(seed, block, Stream::Symbols as u64);
    let symbols: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4u8)).collect();
    let bits = symbols.iter().flat_map(|&k| symbol_bits(k)).collect();
    (symbols, bits)
}

pub fn synthesize_tx_waveform(symbols: &[u8], cfg: &SimConfig) -> Result<TxWaveform> {
    cfg.validate()?;
    let sps = cfg.samples_per_symbol()?;
    let n = symbols.len() * sps;
    let mut impulses = vec![Complex64::new(0.0, 0.0); n];
    for (k, &s) in symbols.iter().enumerate() {
        impulses[k * sps] = symbol_point(s, cfg.alpha);
    }
    let taps = rrc_taps(sps, cfg.rolloff, cfg.rrc_span_symbols)?;
    let shaped = convolve_same(&impulses, &taps);
    let r = cfg.f_shift / cfg.sample_rate;
    let quantum = shaped
        .iter()
        .enumerate()
        .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (r * i as f64).fract()))
        .collect();
    let pilot = vec![Complex64::new(cfg.pilot_amplitude, 0.0); n];
    Ok(TxWaveform { quantum, pilot })
}

/// Wiener phase with per-sample increment variance `2π·linewidth/fs`.
fn wiener(rng: &mut ChaCha20Rng, n: usize, linewidth: f64, fs: f64) -> Vec<f64> {
    let sd = (2.0 * PI * linewidth / fs).sqrt();
    let mut phase = 0.0;
    (0..n)
        .map(|_| {
            let v = phase;
            if sd > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                phase += sd * z;
            }
            v
        })
        .collect()
}

/// Loss, laser phase noise, slow drift, delay and polarization leakage.
pub fn apply_channel(tx: &TxWaveform, cfg: &SimConfig, block: u64) -> Result<(RxField, GroundTruth)> {
    cfg.validate()?;
    let c = &cfg.channel;
    let sps = cfg.samples_per_symbol()?;
    let n = tx.quantum.len();
    let fs = cfg.sample_rate;
    let laser_phase = wiener(&mut block_rng(cfg.seed, block, Stream::LaserPhase as u64), n, c.linewidth_a_hz + c.linewidth_b_hz, fs);
    let offset = match c.phase_offset {
        Some(v) => v,
        None => block_rng(cfg.seed, block, Stream::Offsets as u64).gen_range(-PI..PI),
    };
    let walk = wiener(&mut block_rng(cfg.seed, block, Stream::Drift as u64), n, c.drift_linewidth_hz, fs);
    let drift_phase: Vec<f64> = walk
        .iter()
        .enumerate()
        .map(|(i, w)| offset + w + c.drift_sine_amplitude * (2.0 * PI * c.drift_sine_hz * i as f64 / fs).sin())
        .collect();

    let delay = c.delay_symbols * sps;
    let gain = c.transmittance.sqrt();
    let leak = 10f64.powf(-c.isolation_db / 20.0);
    let mut quantum = vec![Complex64::new(0.0, 0.0); n];
    let mut pilot = vec![Complex64::new(0.0, 0.0); n];
    for i in delay..n {
        let src = i - delay;
        let p = tx.pilot[src] * gain * Complex64::from_polar(1.0, laser_phase[i]);
        let q = tx.quantum[src] * gain * Complex64::from_polar(1.0, laser_phase[i] + drift_phase[i]);
        quantum[i] = q + p * leak;
        pilot[i] = p + q * leak;
    }
    let truth = GroundTruth {
        symbols: Vec::new(),
        laser_phase,
        drift_phase,
        f_beat: cfg.f_beat,
        delay_symbols: c.delay_symbols,
        samples_per_symbol: sps,
    };
    Ok((RxField { quantum, pilot, noise_variance: 1.0 + c.transmittance * c.excess_noise / 2.0 }, truth))
}

/// Mid-rise uniform quantizer with full scale at the `1 − 5·10⁻⁵` quantile
/// of `|x|`. Returns (full scale, step, clipped fraction).
pub fn quantize(x: &mut [f64], bits: u32) -> (f64, f64, f64) {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let idx = ((mags.len() as f64) * (1.0 - 5e-5)).floor() as usize;
    let idx = idx.min(mags.len() - 1);
    let (_, &mut fs, _) = mags.select_nth_unstable_by(idx, f64::total_cmp);
    let full_scale = if fs > 0.0 { fs } else { 1.0 };
    let levels = 1i64 << bits;
    let step = 2.0 * full_scale / levels as f64;
    let mut clipped = 0usize;
    for v in x.iter_mut() {
        let code = (*v / step).floor() as i64;
        let lo = -(levels / 2);
        let hi = levels / 2 - 1;
        if code < lo || code > hi {
            clipped += 1;
        }
        *v = (code.clamp(lo, hi) as f64 + 0.5) * step;
    }
    (full_scale, step, clipped as f64 / x.len() as f64)
}

fn detect_one(
    field: &[Complex64],
    if_freq: f64,
    noise_variance: f64,
    cfg: &SimConfig,
    rng: &mut ChaCha20Rng,
    label: &str,
) -> IqFrame {
    let r = if_freq / cfg.sample_rate;
    let se = cfg.eta.sqrt();
    // η·(channel noise) + (1 − η) vacuum + electronic noise
    let sd = (cfg.eta * noise_variance + 1.0 - cfg.eta + cfg.v_el).sqrt();
    let mut samples: Vec<f64> = field
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let carrier = Complex64::from_polar(1.0, 2.0 * PI * (r * i as f64).fract());
            let z: f64 = rng.sample(StandardNormal);
            2f64.sqrt() * (c * carrier).re * se + sd * z
        })
        .collect();
    let mut frame = IqFrame {
        label: label.to_string(),
        sample_rate: cfg.sample_rate,
        samples: Vec::new(),
        adc_bits: cfg.adc_bits,
        full_scale: None,
        adc_step: None,
        clip_fraction: 0.0,
        warnings: Vec::new(),
    };
    if let Some(bits) = cfg.adc_bits {
        let (full, step, clip) = quantize(&mut samples, bits);
        frame.full_scale = Some(full);
        frame.adc_step = Some(step);
        frame.clip_fraction = clip;
        if clip > 1e-3 {
            frame.warnings.push(format!("{label}: ADC clip fraction {clip:.2e} exceeds 1e-3"));
        }
    }
    frame.samples = samples;
    frame
}

/// Beats both fields against the LO (pilot at `f_beat`, quantum at
/// `f_beat − f_shift`), adds shot, excess and electronic noise, and
/// digitizes.
pub fn heterodyne_detect_and_quantize(rx: &RxField, cfg: &SimConfig, block: u64) -> Result<(IqFrame, IqFrame)> {
    cfg.validate()?;
    let q = detect_one(
        &rx.quantum,
        cfg.f_beat,
        rx.noise_variance,
        cfg,
        &mut block_rng(cfg.seed, block, Stream::QuantumNoise as u64),
        "quantum",
    );
    let p = detect_one(&rx.pilot, cfg.f_beat, 1.0, cfg, &mut block_rng(cfg.seed, block, Stream::PilotNoise as u64), "pilot");
    Ok((q, p))
}

/// Full transmitter → channel → receiver run for one block.
pub fn simulate_block(cfg: &SimConfig, block: u64) -> Result<FramePair> {
    cfg.validate()?;
    let (symbols, _) = generate_qpsk_symbols(cfg.seed, block, cfg.n_symbols);
    let tx = synthesize_tx_waveform(&symbols, cfg)?;
    let (rx, mut truth) = apply_channel(&tx, cfg, block)?;
    truth.symbols = symbols;
    let (quantum, pilot) = heterodyne_detect_and_quantize(&rx, cfg, block)?;
    Ok(FramePair { quantum, pilot, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig { n_symbols: 4000, ..Default::default() }
    }

    #[test]
    fn symbols_are_deterministic_and_balanced() {
        let (a, bits) = generate_qpsk_symbols(7, 0, 40_000);
        let (b, _) = generate_qpsk_symbols(7, 0, 40_000);
        assert_eq!(a, b);
        assert_eq!(bits.len(), 80_000);
        let n = a.len() as f64;
        let sd = (n * 0.25 * 0.75).sqrt();
        for k in 0..4u8 {
            let c = a.iter().filter(|&&s| s == k).count() as f64;
            assert!((c - n / 4.0).abs() < 4.0 * sd, "symbol {k}: {c}");
        }
        let (c, _) = generate_qpsk_symbols(7, 1, 40_000);
        assert_ne!(a, c);
        let (one, bits) = generate_qpsk_symbols(3, 0, 1);
        assert_eq!((one.len(), bits.len()), (1, 2));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small();
        c.sample_rate = 12e9;
        assert!(matches!(c.validate(), Err(SimError::Aliasing { .. }) | Err(SimError::InvalidParameter(_))));
        let mut c = small();
        c.sample_rate = 20e9;
        assert!(matches!(c.validate(), Err(SimError::Aliasing { .. })));
        let mut c = small();
        c.channel.transmittance = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_amplitude_gives_zero_quantum_waveform() {
        let cfg = SimConfig { alpha: 0.0, ..small() };
        let (s, _) = generate_qpsk_symbols(1, 0, cfg.n_symbols);
        let tx = synthesize_tx_waveform(&s, &cfg).unwrap();
        assert!(tx.quantum.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn identity_channel_only_adds_shot_noise() {
        let mut cfg = small();
        cfg.channel = ChannelConfig {
            transmittance: 1.0,
            excess_noise: 0.0,
            linewidth_a_hz: 0.0,
            linewidth_b_hz: 0.0,
            drift_linewidth_hz: 0.0,
            phase_offset: Some(0.0),
            isolation_db: f64::INFINITY,
            ..Default::default()
        };
        let (s, _) = generate_qpsk_symbols(1, 0, cfg.n_symbols);
        let tx = synthesize_tx_waveform(&s, &cfg).unwrap();
        let (rx, _) = apply_channel(&tx, &cfg, 0).unwrap();
        assert_eq!(rx.noise_variance, 1.0);
        for (a, b) in rx.quantum.iter().zip(&tx.quantum) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn wiener_increment_variance_matches_linewidth() {
        let fs = 40e9;
        let lw = 1e6;
        let p = wiener(&mut block_rng(5, 0, 1), 1_000_000, lw, fs);
        let inc: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
        let var = inc.iter().map(|v| v * v).sum::<f64>() / inc.len() as f64;
        let expected = 2.0 * PI * lw / fs;
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn unquantized_noise_variance_matches_model() {
        let mut cfg = small();
        cfg.n_symbols = 40_000;
        cfg.alpha = 0.0;
        cfg.pilot_amplitude = 0.0;
        cfg.adc_bits = None;
        cfg.v_el = 0.0;
        let f = simulate_block(&cfg, 0).unwrap();
        let x = &f.quantum.samples;
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let c = &cfg.channel;
        let expected = cfg.eta * (1.0 + c.transmittance * c.excess_noise / 2.0) + 1.0 - cfg.eta;
        assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
    }

    #[test]
    fn quantizer_clips_rarely_and_is_mid_rise() {
        let mut rng = block_rng(9, 0, 0);
        let mut x: Vec<f64> = (0..200_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (full, step, clip) = quantize(&mut x, 8);
        assert!(clip < 1e-4);
        assert!((step - 2.0 * full / 256.0).abs() < 1e-15);
        for v in &x {
            let k = v / step - 0.5;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_gives_identical_frames() {
        let cfg = small();
        let a = simulate_block(&cfg, 3).unwrap();
        let b = simulate_block(&cfg, 3).unwrap();
        assert_eq!(a.quantum.samples, b.quantum.samples);
        assert_eq!(a.pilot.samples, b.pilot.samples);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.quantum.samples.len(), cfg.n_symbols * 8);
    }
}
