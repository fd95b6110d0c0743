//! Receiver DSP: pilot frequency search, band selection and down-conversion,
//! matched filtering, pilot-shared fast phase recovery, symbol
//! synchronization, LMS slow phase recovery and channel estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use phys_sim::filters::{
    convolve_same, downconvert, find_peak, lowpass_taps, moving_average_centered, rrc_taps, welch_psd, SpectralPeak,
};
use phys_sim::sim::{FramePair, IqFrame};

use crate::error::{DspError, Result};
use crate::keymap::{decide_symbol, map_raw_key, symbol_point};

/// Smallest block accepted by the estimator.
pub const MIN_ESTIMATION_BLOCK: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Training {
    GroundTruth,
    DecisionDirected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    pub r_sym: f64,
    pub f_shift: f64,
    pub lms_taps: usize,
    pub lms_step: f64,
    pub rrc_rolloff: f64,
    pub rrc_span_symbols: usize,
    /// One-sided cutoff of the pilot low-pass.
    pub pilot_lowpass_hz: f64,
    pub pilot_lowpass_taps: usize,
    /// Width of the quantum band-pass; `None` uses `R_sym·(1 + a_ro)`.
    pub quantum_bandwidth_hz: Option<f64>,
    /// Extra one-sided width of the band-pass beyond `Δf_q/2`.
    pub quantum_guard_hz: f64,
    pub quantum_filter_taps: usize,
    pub psd_len: usize,
    pub min_pilot_prominence_db: f64,
    /// Pilot magnitude below this fraction of its median counts as lost.
    pub dropout_fraction: f64,
    pub dropout_run: usize,
    /// Centered averaging window (symbols) applied to the LMS main tap.
    pub phase_smoothing: usize,
    pub block_size: usize,
    pub training: Training,
    /// Treat `η` and `v_el` as calibrated (trusted) when estimating `ε`.
    pub trusted_detector: bool,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            r_sym: 5e9,
            f_shift: 3.5e9,
            lms_taps: 51,
            lms_step: 1e-3,
            rrc_rolloff: 0.3,
            rrc_span_symbols: 24,
            pilot_lowpass_hz: 100e6,
            pilot_lowpass_taps: 4001,
            quantum_bandwidth_hz: None,
            quantum_guard_hz: 110e6,
            quantum_filter_taps: 1025,
            psd_len: 1 << 16,
            min_pilot_prominence_db: 20.0,
            dropout_fraction: 0.1,
            dropout_run: 1000,
            phase_smoothing: 16_384,
            block_size: 100_000,
            training: Training::GroundTruth,
            trusted_detector: true,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DspError::InvalidParameter(m));
        if self.lms_taps % 2 == 0 {
            return bad(format!("lms_taps must be odd, got {}", self.lms_taps));
        }
        if !(self.lms_step > 0.0 && self.lms_step < 0.1) {
            return bad(format!("lms_step must lie in (0, 0.1), got {}", self.lms_step));
        }
        if !(self.r_sym > 0.0 && self.pilot_lowpass_hz > 0.0 && self.f_shift > 0.0) {
            return bad("r_sym, f_shift and pilot_lowpass_hz must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.rrc_rolloff) {
            return bad(format!("rrc_rolloff must lie in [0, 1], got {}", self.rrc_rolloff));
        }
        if self.phase_smoothing == 0 || self.block_size == 0 || !self.psd_len.is_power_of_two() {
            return bad("phase_smoothing and block_size must be >= 1, psd_len a power of two".into());
        }
        Ok(())
    }

    pub fn quantum_bandwidth(&self) -> f64 {
        self.quantum_bandwidth_hz.unwrap_or(self.r_sym * (1.0 + self.rrc_rolloff))
    }

    fn samples_per_symbol(&self, sample_rate: f64) -> Result<usize> {
        let r = sample_rate / self.r_sym;
        if (r - r.round()).abs() > 1e-9 || r < 2.0 {
            return Err(DspError::InvalidParameter(format!("sample rate / symbol rate = {r} is not an integer >= 2")));
        }
        Ok(r.round() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandKind {
    Quantum,
    Pilot,
}

/// Strongest tone of the pilot record.
pub fn estimate_pilot_frequency(frame: &IqFrame, cfg: &DspConfig) -> Result<SpectralPeak> {
    let nfft = cfg.psd_len.min(frame.samples.len().next_power_of_two() / 2).max(64);
    let psd = welch_psd(&frame.samples, nfft)?;
    let peak = find_peak(&psd, frame.sample_rate, 0.0, frame.sample_rate / 2.0)?;
    if !(peak.prominence_db >= cfg.min_pilot_prominence_db) {
        return Err(DspError::NoPilot { prominence_db: peak.prominence_db });
    }
    Ok(peak)
}

/// Complex baseband at the original sample rate. The quantum path is
/// band-pass filtered and then RRC matched filtered; the pilot path gets
/// the narrow low-pass. All filters are centered, so no group delay
/// remains.
pub fn downconvert_and_filter(
    frame: &IqFrame,
    f_center: f64,
    kind: BandKind,
    cfg: &DspConfig,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let fs = frame.sample_rate;
    if !(f_center > 0.0 && f_center < fs / 2.0) {
        return Err(DspError::InvalidParameter(format!("center {f_center} Hz outside (0, {}) Hz", fs / 2.0)));
    }
    let bb = downconvert(&frame.samples, f_center, fs);
    match kind {
        BandKind::Pilot => {
            let h = lowpass_taps(cfg.pilot_lowpass_hz, fs, cfg.pilot_lowpass_taps)?;
            Ok(convolve_same(&bb, &h))
        }
        BandKind::Quantum => {
            let sps = cfg.samples_per_symbol(fs)?;
            let cutoff = (cfg.quantum_bandwidth() / 2.0 + cfg.quantum_guard_hz).min(fs / 2.0 * 0.999);
            let bp = lowpass_taps(cutoff, fs, cfg.quantum_filter_taps)?;
            let mf = rrc_taps(sps, cfg.rrc_rolloff, cfg.rrc_span_symbols)?;
            Ok(convolve_same(&convolve_same(&bb, &bp), &mf))
        }
    }
}

/// `z_q·e^{−i·arg z_p}` sample by sample.
pub fn fast_phase_recovery(quantum_bb: &[Complex64], pilot_bb: &[Complex64], cfg: &DspConfig) -> Result<Vec<Complex64>> {
    if quantum_bb.len() != pilot_bb.len() {
        return Err(DspError::InvalidParameter(format!(
            "quantum ({}) and pilot ({}) streams differ in length",
            quantum_bb.len(),
            pilot_bb.len()
        )));
    }
    let mut mags: Vec<f64> = pilot_bb.iter().map(|p| p.norm()).collect();
    let mid = mags.len() / 2;
    let median = if mags.is_empty() { 0.0 } else { *mags.select_nth_unstable_by(mid, f64::total_cmp).1 };
    let threshold = cfg.dropout_fraction * median;
    let mut run = 0usize;
    let mut longest = 0usize;
    for p in pilot_bb {
        if p.norm() <= threshold || !(median > 0.0) {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    if longest > cfg.dropout_run {
        return Err(DspError::PilotDropout { run: longest });
    }
    Ok(quantum_bb
        .iter()
        .zip(pilot_bb)
        .map(|(q, p)| {
            let n = p.norm();
            if n > 0.0 {
                q * p.conj() / n
            } else {
                *q
            }
        })
        .collect())
}

/// Timing found by correlating against the transmitted symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncInfo {
    pub sample_phase: usize,
    pub lag_symbols: usize,
    /// Parabolic refinement of the best sample phase, in samples; reported,
    /// not applied.
    pub fractional_timing: f64,
    /// Correlation peak over the mean off-peak magnitude.
    pub peak_to_mean: f64,
    /// Index of the first transmitted symbol kept.
    pub first_symbol: usize,
}

/// Symbols paired with the transmitted indices they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSymbols {
    pub z: Vec<Complex64>,
    pub truth: Vec<u8>,
    /// Sample index of each kept symbol in the received record.
    pub sample_index: Vec<usize>,
    pub sync: SyncInfo,
}

fn xcorr_magnitudes(y: &[Complex64], r: &[Complex64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let len = (y.len() + r.len()).next_power_of_two();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut a = vec![Complex64::new(0.0, 0.0); len];
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    a[..y.len()].copy_from_slice(y);
    b[..r.len()].copy_from_slice(r);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, w) in a.iter_mut().zip(&b) {
        *x *= w.conj();
    }
    inv.process(&mut a);
    // a[lag] = Σ_k y[k + lag]·r*[k] for non-negative lags
    a[..y.len()].iter().map(|v| v.norm()).collect()
}

/// Picks the sample phase and integer symbol lag that maximize the
/// correlation with the transmitted symbols, then discards the filter
/// edges.
pub fn symbol_synchronize(
    samples: &[Complex64],
    sps: usize,
    truth: &[u8],
    edge_symbols: usize,
) -> Result<AlignedSymbols> {
    if sps == 0 || truth.is_empty() || samples.len() < sps * truth.len() {
        return Err(DspError::InvalidParameter("record shorter than the transmitted block".into()));
    }
    let n = truth.len();
    let max_lag = n / 2;
    let reference: Vec<Complex64> = truth.iter().map(|&k| symbol_point(k, 1.0)).collect();
    let mut planner = FftPlanner::new();
    let mut peaks = Vec::with_capacity(sps);
    for phase in 0..sps {
        let y: Vec<Complex64> = (0..n).map(|k| samples[k * sps + phase]).collect();
        let c = xcorr_magnitudes(&y, &reference, &mut planner);
        let (lag, &peak) = c[..=max_lag].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
        let mean = (c[..=max_lag].iter().sum::<f64>() - peak) / max_lag.max(1) as f64;
        peaks.push((phase, lag, peak, mean));
    }
    let best = peaks.iter().cloned().max_by(|a, b| a.2.total_cmp(&b.2)).expect("sps >= 1");
    let (phase, lag, peak, mean) = best;
    let at = |p: isize| {
        let p = p.rem_euclid(sps as isize) as usize;
        peaks[p].2
    };
    let (l, c, r) = (at(phase as isize - 1), peak, at(phase as isize + 1));
    let denom = l - 2.0 * c + r;
    let fractional_timing = if denom.abs() > 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };

    let first = edge_symbols;
    let last = n.saturating_sub(lag + edge_symbols);
    if last <= first {
        return Err(DspError::InsufficientData(format!("{n} symbols leave nothing after lag {lag} and edges")));
    }
    let sample_index: Vec<usize> = (first..last).map(|k| (k + lag) * sps + phase).collect();
    Ok(AlignedSymbols {
        z: sample_index.iter().map(|&i| samples[i]).collect(),
        truth: truth[first..last].to_vec(),
        sample_index,
        sync: SyncInfo {
            sample_phase: phase,
            lag_symbols: lag,
            fractional_timing,
            peak_to_mean: peak / mean.max(f64::MIN_POSITIVE),
            first_symbol: first,
        },
    })
}

/// Output of the LMS stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredSymbols {
    /// Symbols rotated by the smoothed slow-phase estimate.
    pub z: Vec<Complex64>,
    pub truth: Vec<u8>,
    /// Slow phase removed from each symbol (rad).
    pub slow_phase: Vec<f64>,
    /// Full equalizer output; its tap noise makes it unsuitable for noise
    /// estimation.
    pub equalized: Vec<Complex64>,
    pub final_taps: Vec<Complex64>,
    /// Filled by [`run_chain`] when the true phase trajectory is known.
    pub residual_phase: Vec<f64>,
}

/// Complex LMS equalizer adapted against `reference` (or its own
/// decisions). The input is scaled to the reference power. The slow phase
/// is the argument of the main tap, averaged over `cfg.phase_smoothing`
/// symbols.
pub fn lms_slow_recovery(
    symbols: &[Complex64],
    reference: Option<&[Complex64]>,
    cfg: &DspConfig,
) -> Result<RecoveredSymbols> {
    cfg.validate()?;
    let n = symbols.len();
    let l = cfg.lms_taps;
    if n < l {
        return Err(DspError::InsufficientData(format!("{n} symbols for a {l}-tap equalizer")));
    }
    if let Some(r) = reference {
        if r.len() != n {
            return Err(DspError::InvalidParameter("reference length differs from symbols".into()));
        }
    }
    let power = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
    let p_in = power(symbols);
    if !(p_in > 0.0) {
        return Err(DspError::InsufficientData("input has zero power".into()));
    }
    let p_ref = match reference {
        Some(r) => power(r),
        None => {
            // decisions land on unit-modulus points scaled to the input
            p_in
        }
    };
    let g = (p_ref / p_in).sqrt();
    let dd_amplitude = (p_ref / 2.0).sqrt();
    let half = l / 2;
    let mut w = vec![Complex64::new(0.0, 0.0); l];
    w[half] = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let tap = |k: isize| if k >= 0 && (k as usize) < n { symbols[k as usize] * g } else { zero };

    let mut x = vec![zero; l];
    let mut adapt = |k: usize, w: &mut [Complex64]| -> Result<(Complex64, Complex64)> {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = tap(k as isize + half as isize - j as isize);
        }
        let y: Complex64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        let d = match reference {
            Some(r) => r[k],
            None => symbol_point(decide_symbol(y), dd_amplitude),
        };
        let e = d - y;
        for (wj, xj) in w.iter_mut().zip(&x) {
            *wj += cfg.lms_step * e * xj.conj();
        }
        if !w[half].re.is_finite() || !w[half].im.is_finite() {
            return Err(DspError::Divergence(format!("non-finite taps at symbol {k}")));
        }
        Ok((y, e))
    };

    // warm-up pass so the recorded trajectory starts from converged taps
    let settle = ((5.0 / (cfg.lms_step * p_ref)).ceil() as usize).min(n);
    for k in 0..settle {
        adapt(k, &mut w)?;
    }

    let mut main_tap = Vec::with_capacity(n);
    let mut equalized = Vec::with_capacity(n);
    let window = 1000usize;
    let mut err_acc = 0.0;
    let mut window_errs = Vec::new();
    for k in 0..n {
        let (y, e) = adapt(k, &mut w)?;
        main_tap.push(w[half]);
        equalized.push(y);
        err_acc += e.norm_sqr();
        if (k + 1) % window == 0 {
            window_errs.push(err_acc / window as f64);
            err_acc = 0.0;
        }
    }
    check_divergence(&window_errs, 0)?;

    let smoothed = moving_average_centered(&main_tap, cfg.phase_smoothing);
    let slow_phase: Vec<f64> = smoothed.iter().map(|w| -w.arg()).collect();
    let z = symbols.iter().zip(&slow_phase).map(|(s, p)| s * Complex64::from_polar(1.0, -p)).collect();
    Ok(RecoveredSymbols {
        z,
        truth: Vec::new(),
        slow_phase,
        equalized,
        final_taps: w,
        residual_phase: Vec::new(),
    })
}

/// Divergence: after convergence, ten consecutive windows of rising error
/// ending at least twice the starting level.
fn check_divergence(errs: &[f64], settle_windows: usize) -> Result<()> {
    const RUN: usize = 10;
    let tail = errs.get(settle_windows..).unwrap_or(&[]);
    for w in tail.windows(RUN + 1) {
        if w.windows(2).all(|p| p[1] > p[0]) && w[RUN] > 2.0 * w[0] {
            return Err(DspError::Divergence(format!("error rose from {:.3e} to {:.3e}", w[0], w[RUN])));
        }
    }
    Ok(())
}

/// Calibration inputs of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorCalibration {
    pub eta: f64,
    pub v_el: f64,
    /// ADC quantization noise per quadrature (`Δ²/12`), counted with the
    /// detector noise.
    pub quantization_variance: f64,
    pub trusted: bool,
}

/// Channel estimate with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub transmittance: f64,
    pub transmittance_se: f64,
    pub excess_noise: f64,
    pub excess_noise_se: f64,
    /// Residual variance per quadrature after removing the modulation.
    pub residual_variance: f64,
    pub n_symbols: usize,
    pub trusted: bool,
}

/// Covariance estimator: `t = Re Σ z s*/Σ|s|²`, `T = t²/η`,
/// `ε = 2(V_res − 1 − v_el − Δ²/12)/(η·T)` with `V_res` per quadrature.
/// In untrusted mode `η = 1` and all detector noise is charged to the
/// channel.
pub fn estimate_channel_params(
    z: &[Complex64],
    truth: &[u8],
    alpha: f64,
    cal: &DetectorCalibration,
) -> Result<ChannelEstimate> {
    let n = z.len();
    if n != truth.len() {
        return Err(DspError::InvalidParameter("symbol and truth lengths differ".into()));
    }
    if n < MIN_ESTIMATION_BLOCK {
        return Err(DspError::InsufficientData(format!("{n} symbols, need at least {MIN_ESTIMATION_BLOCK}")));
    }
    if !(alpha > 0.0) || !(cal.eta > 0.0 && cal.eta <= 1.0) || cal.v_el < 0.0 {
        return Err(DspError::InvalidParameter("alpha > 0, eta in (0, 1] and v_el >= 0 required".into()));
    }
    let s: Vec<Complex64> = truth.iter().map(|&k| symbol_point(k, alpha)).collect();
    let ss: f64 = s.iter().map(|v| v.norm_sqr()).sum();
    let t = z.iter().zip(&s).map(|(a, b)| (a * b.conj()).re).sum::<f64>() / ss;
    let var = z.iter().zip(&s).map(|(a, b)| (a - b * t).norm_sqr()).sum::<f64>() / (2.0 * n as f64 - 1.0);
    let t_se = (var / ss).sqrt();
    let var_se = var / (n as f64).sqrt();
    let (eta, noise) = if cal.trusted {
        (cal.eta, 1.0 + cal.v_el + cal.quantization_variance)
    } else {
        (1.0, 1.0)
    };
    let tr = t * t / eta;
    let tr_se = 2.0 * t.abs() * t_se / eta;
    if !(tr > 0.0) {
        return Err(DspError::InsufficientData("no correlation with the transmitted symbols".into()));
    }
    let eps = 2.0 * (var - noise) / (eta * tr);
    let eps_se = ((2.0 * var_se / (eta * tr)).powi(2) + (eps * tr_se / tr).powi(2)).sqrt();
    Ok(ChannelEstimate {
        transmittance: tr,
        transmittance_se: tr_se,
        excess_noise: eps,
        excess_noise_se: eps_se,
        residual_variance: var,
        n_symbols: n,
        trusted: cal.trusted,
    })
}

/// Everything produced for one block.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub pilot: SpectralPeak,
    pub sync: SyncInfo,
    pub recovered: RecoveredSymbols,
    pub estimate: ChannelEstimate,
    /// Raw key bits (two per symbol) and the matching transmitted bits.
    pub raw_key: Vec<Option<[u8; 2]>>,
    /// Variance of the residual phase (rad²) when ground truth is known.
    pub residual_phase_variance: Option<f64>,
    /// Residual phase variance of the pilot-only correction (rad²).
    pub fast_residual_variance: Option<f64>,
}

fn centered_variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Unwrapped residual with its mean removed.
fn residual_trace(raw: impl Iterator<Item = f64>) -> Vec<f64> {
    let wrapped: Vec<f64> = raw.map(wrap).collect();
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    for (i, &w) in wrapped.iter().enumerate() {
        if i > 0 {
            let d = w - wrapped[i - 1];
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(w + offset);
    }
    let m = out.iter().sum::<f64>() / out.len().max(1) as f64;
    out.iter_mut().for_each(|v| *v -= m);
    out
}

/// Runs the full receiver on one simulated block. `alpha` is Alice's
/// quadrature amplitude.
pub fn run_chain(pair: &FramePair, alpha: f64, cal: &DetectorCalibration, cfg: &DspConfig) -> Result<ChainOutput> {
    cfg.validate()?;
    let fs = pair.quantum.sample_rate;
    let sps = cfg.samples_per_symbol(fs)?;
    let pilot = estimate_pilot_frequency(&pair.pilot, cfg)?;
    let q_center = pilot.frequency - cfg.f_shift;
    let q_bb = downconvert_and_filter(&pair.quantum, q_center, BandKind::Quantum, cfg)?;
    let p_bb = downconvert_and_filter(&pair.pilot, pilot.frequency, BandKind::Pilot, cfg)?;
    let fast = fast_phase_recovery(&q_bb, &p_bb, cfg)?;
    let aligned = symbol_synchronize(&fast, sps, &pair.truth.symbols, cfg.rrc_span_symbols)?;
    let reference: Option<Vec<Complex64>> = match cfg.training {
        Training::GroundTruth => Some(aligned.truth.iter().map(|&k| symbol_point(k, alpha)).collect()),
        Training::DecisionDirected => None,
    };
    let mut recovered = lms_slow_recovery(&aligned.z, reference.as_deref(), cfg)?;
    recovered.truth = aligned.truth.clone();

    let truth = &pair.truth;
    let (mut residual_var, mut fast_var) = (None, None);
    if truth.laser_phase.len() == pair.pilot.samples.len() && truth.drift_phase.len() == truth.laser_phase.len() {
        let dw = 2.0 * PI * (truth.f_beat - pilot.frequency) / fs;
        let common = |i: usize| truth.laser_phase[i] + dw * i as f64 - p_bb[i].arg();
        let fast_trace = residual_trace(aligned.sample_index.iter().map(|&i| common(i)));
        recovered.residual_phase = residual_trace(
            aligned
                .sample_index
                .iter()
                .zip(&recovered.slow_phase)
                .map(|(&i, slow)| common(i) + truth.drift_phase[i] - slow),
        );
        fast_var = Some(centered_variance(&fast_trace));
        residual_var = Some(centered_variance(&recovered.residual_phase));
    }
    let estimate = estimate_channel_params(&recovered.z, &recovered.truth, alpha, cal)?;
    let raw_key = map_raw_key(&recovered.z);
    Ok(ChainOutput {
        pilot,
        sync: aligned.sync,
        recovered,
        estimate,
        raw_key,
        residual_phase_variance: residual_var,
        fast_residual_variance: fast_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use phys_sim::sim::block_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn qpsk(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = block_rng(seed, 0, 0);
        (0..n).map(|_| rng.gen_range(0..4u8)).collect()
    }

    #[test]
    fn config_invariants() {
        assert!(DspConfig::default().validate().is_ok());
        assert!(DspConfig { lms_taps: 50, ..Default::default() }.validate().is_err());
        assert!(DspConfig { lms_step: 0.1, ..Default::default() }.validate().is_err());
        assert!(DspConfig { lms_step: 0.0, ..Default::default() }.validate().is_err());
        assert!((DspConfig::default().quantum_bandwidth() - 6.5e9).abs() < 1.0);
    }

    #[test]
    fn lms_removes_static_rotation() {
        let cfg = DspConfig { phase_smoothing: 1, ..Default::default() };
        let truth = qpsk(20_000, 3);
        let a = 0.5f64.sqrt();
        let r: Vec<Complex64> = truth.iter().map(|&k| symbol_point(k, a)).collect();
        let rot = Complex64::from_polar(1.0, PI / 7.0);
        let y: Vec<Complex64> = r.iter().map(|v| v * rot).collect();
        let out = lms_slow_recovery(&y, Some(&r), &cfg).unwrap();
        let at = 10_000;
        assert!((out.slow_phase[at] - PI / 7.0).abs() < 1e-2, "{}", out.slow_phase[at]);
        assert!((out.final_taps[25].arg() + PI / 7.0).abs() < 1e-6);
    }

    #[test]
    fn lms_identity_taps_for_clean_input() {
        let cfg = DspConfig::default();
        let truth = qpsk(30_000, 4);
        let r: Vec<Complex64> = truth.iter().map(|&k| symbol_point(k, 0.4775)).collect();
        let out = lms_slow_recovery(&r, Some(&r), &cfg).unwrap();
        for (j, w) in out.final_taps.iter().enumerate() {
            let target = if j == 25 { 1.0 } else { 0.0 };
            assert!((w - target).norm() < 1e-3, "tap {j}: {w}");
        }
    }

    #[test]
    fn lms_tracks_slow_sinusoidal_drift() {
        // 1 kHz drift with 0.5 rad amplitude, realistic SNR
        let cfg = DspConfig::default();
        let n = 100_000;
        let truth = qpsk(n, 5);
        let alpha = 0.4775;
        let r: Vec<Complex64> = truth.iter().map(|&k| symbol_point(k, alpha)).collect();
        let mut rng = block_rng(5, 0, 3);
        let gain = 0.284f64.sqrt();
        let drift: Vec<f64> = (0..n).map(|k| 0.5 * (2.0 * PI * 1e3 * k as f64 / 5e9).sin() + 0.3).collect();
        let y: Vec<Complex64> = r
            .iter()
            .zip(&drift)
            .map(|(s, d)| {
                let nz = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 1.3f64.sqrt();
                s * gain * Complex64::from_polar(1.0, *d) + nz
            })
            .collect();
        let out = lms_slow_recovery(&y, Some(&r), &cfg).unwrap();
        let res: Vec<f64> = drift.iter().zip(&out.slow_phase).map(|(d, s)| d - s).skip(5000).collect();
        let var = res.iter().map(|v| v * v).sum::<f64>() / res.len() as f64;
        let eps_slow = 2.0 * alpha * alpha * var;
        assert!(eps_slow < 1e-3, "slow phase contribution {eps_slow}");
    }

    #[test]
    fn divergence_detector() {
        let rising: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.2).collect();
        assert!(check_divergence(&rising, 2).is_err());
        let flat = vec![1.0; 40];
        assert!(check_divergence(&flat, 2).is_ok());
    }

    #[test]
    fn sync_finds_inserted_lag() {
        let sps = 4;
        for &lag in &[0usize, 37, 1234] {
            let truth = qpsk(5000, lag as u64);
            let mut samples = vec![Complex64::new(0.0, 0.0); truth.len() * sps];
            for (k, &s) in truth.iter().enumerate() {
                if let Some(v) = samples.get_mut((k + lag) * sps + 1) {
                    *v = symbol_point(s, 1.0);
                }
            }
            let a = symbol_synchronize(&samples, sps, &truth, 12).unwrap();
            assert_eq!(a.sync.lag_symbols, lag);
            assert_eq!(a.sync.sample_phase, 1);
            assert_eq!(a.z.len(), truth.len() - lag - 24);
            for (z, &t) in a.z.iter().zip(&a.truth) {
                assert!((z - symbol_point(t, 1.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pilot_dropout_is_reported() {
        let cfg = DspConfig::default();
        let mut p = vec![Complex64::new(5.0, 0.0); 10_000];
        let q = p.clone();
        for v in &mut p[2000..3500] {
            *v = Complex64::new(0.0, 0.0);
        }
        assert!(matches!(fast_phase_recovery(&q, &p, &cfg), Err(DspError::PilotDropout { run: 1500 })));
        p[2500] = Complex64::new(5.0, 0.0);
        assert!(fast_phase_recovery(&q, &p, &cfg).is_ok());
    }

    #[test]
    fn fast_recovery_without_phase_noise_is_identity() {
        let cfg = DspConfig::default();
        let q: Vec<Complex64> = (0..100).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let p = vec![Complex64::new(2.0, 0.0); 100];
        assert_eq!(fast_phase_recovery(&q, &p, &cfg).unwrap(), q);
    }

    #[test]
    fn estimator_recovers_synthetic_channel() {
        let n = 400_000;
        let truth = qpsk(n, 8);
        let alpha = 0.4775;
        let (eta, v_el, t, eps): (f64, f64, f64, f64) = (0.45, 0.297, 0.631, 0.05);
        let sd = (eta * (1.0 + t * eps / 2.0) + 1.0 - eta + v_el).sqrt();
        let mut rng = block_rng(8, 0, 3);
        let z: Vec<Complex64> = truth
            .iter()
            .map(|&k| {
                symbol_point(k, alpha) * (eta * t).sqrt()
                    + Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * sd
            })
            .collect();
        let cal = DetectorCalibration { eta, v_el, quantization_variance: 0.0, trusted: true };
        let e = estimate_channel_params(&z, &truth, alpha, &cal).unwrap();
        assert!((e.transmittance - t).abs() < 3.0 * e.transmittance_se, "{e:?}");
        assert!((e.excess_noise - eps).abs() < 3.0 * e.excess_noise_se, "{e:?}");
        assert!(estimate_channel_params(&z[..9999], &truth[..9999], alpha, &cal).is_err());
    }
}
