//! FIR design, FFT convolution and spectral estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, SimError};

/// Root-raised-cosine taps at `sps` samples per symbol spanning `span`
/// symbols each side, scaled to unit energy so that a matched pair is a
/// unit-gain Nyquist pulse and white noise keeps its per-sample variance.
pub fn rrc_taps(sps: usize, rolloff: f64, span: usize) -> Result<Vec<f64>> {
    if sps == 0 || span == 0 || !(0.0..=1.0).contains(&rolloff) {
        return Err(SimError::InvalidParameter(format!("bad RRC design sps={sps} rolloff={rolloff} span={span}")));
    }
    let b = rolloff;
    let half = (sps * span) as i64;
    let mut h: Vec<f64> = (-half..=half)
        .map(|n| {
            let t = n as f64 / sps as f64;
            if n == 0 {
                1.0 - b + 4.0 * b / PI
            } else if b > 0.0 && ((4.0 * b * t).abs() - 1.0).abs() < 1e-12 {
                b / 2f64.sqrt() * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                ((PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos())
                    / (PI * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    let energy: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= energy);
    Ok(h)
}

/// Blackman-windowed sinc low-pass with unit DC gain. `len` is forced odd.
pub fn lowpass_taps(cutoff_hz: f64, sample_rate: f64, len: usize) -> Result<Vec<f64>> {
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0) || len < 3 {
        return Err(SimError::InvalidParameter(format!("bad low-pass design cutoff={cutoff_hz} fs={sample_rate} len={len}")));
    }
    let len = len | 1;
    let m = (len - 1) as f64 / 2.0;
    let fc = cutoff_hz / sample_rate;
    let mut h: Vec<f64> = (0..len)
        .map(|i| {
            let x = i as f64 - m;
            let sinc = if x == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * x).sin() / (PI * x) };
            let w = 0.42 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos()
                + 0.08 * (4.0 * PI * i as f64 / (len - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    Ok(h)
}

/// `y[n] = Σ_k h[k]·x[n + d − k]` with `d = (len(h) − 1)/2`: the output is
/// aligned with the input for symmetric odd-length filters. Overlap-save.
pub fn convolve_same(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    let len = x.len();
    let l = h.len();
    if len == 0 || l == 0 {
        return vec![Complex64::new(0.0, 0.0); len];
    }
    let d = (l - 1) / 2;
    let n = (4 * l).max(4096).next_power_of_two();
    let step = n - l + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut hf: Vec<Complex64> = (0..n).map(|i| Complex64::new(if i < l { h[i] } else { 0.0 }, 0.0)).collect();
    fwd.process(&mut hf);

    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    // full-convolution index m = n_out + d; cover m in [d, d + len)
    let mut start = d;
    while start < d + len {
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = start as i64 - (l as i64 - 1) + i as i64;
            *b = if idx >= 0 && (idx as usize) < len { x[idx as usize] } else { Complex64::new(0.0, 0.0) };
        }
        fwd.process(&mut buf);
        for (b, hv) in buf.iter_mut().zip(&hf) {
            *b *= hv;
        }
        inv.process(&mut buf);
        for j in 0..step {
            let m = start + j;
            if m >= d + len {
                break;
            }
            out[m - d] = buf[l - 1 + j] / n as f64;
        }
        start += step;
    }
    out
}

/// Direct-form reference for [`convolve_same`].
pub fn convolve_same_direct(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    let d = (h.len().max(1) - 1) / 2;
    (0..x.len())
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &hk) in h.iter().enumerate() {
                let idx = n as i64 + d as i64 - k as i64;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += x[idx as usize] * hk;
                }
            }
            acc
        })
        .collect()
}

/// Mixes a real record down by `freq`: `√2·x[n]·e^{−i2πf n/fs}`.
pub fn downconvert(x: &[f64], freq: f64, sample_rate: f64) -> Vec<Complex64> {
    let r = freq / sample_rate;
    x.iter()
        .enumerate()
        .map(|(n, &v)| {
            let cycles = (r * n as f64).fract();
            Complex64::from_polar(2f64.sqrt() * v, -2.0 * PI * cycles)
        })
        .collect()
}

/// Welch power spectrum of a real record: Hann-windowed segments of
/// `nfft` samples with 50% overlap. Returns `nfft/2 + 1` bins.
pub fn welch_psd(x: &[f64], nfft: usize) -> Result<Vec<f64>> {
    if nfft < 16 || !nfft.is_power_of_two() || x.len() < nfft {
        return Err(SimError::InvalidParameter(format!("welch needs power-of-two nfft <= {} (got {nfft})", x.len())));
    }
    let window: Vec<f64> = (0..nfft).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / nfft as f64).cos()).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let mut acc = vec![0.0; nfft / 2 + 1];
    let mut segments = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + nfft <= x.len() {
        for i in 0..nfft {
            buf[i] = Complex64::new(x[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += nfft / 2;
    }
    acc.iter_mut().for_each(|a| *a /= segments as f64);
    Ok(acc)
}

/// Spectral peak located by quadratic interpolation of log power around
/// the largest bin within `[lo_hz, hi_hz]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub bin: usize,
    /// Peak power over the median power of the searched band, in dB.
    pub prominence_db: f64,
}

pub fn find_peak(psd: &[f64], sample_rate: f64, lo_hz: f64, hi_hz: f64) -> Result<SpectralPeak> {
    let nfft = 2 * (psd.len() - 1);
    let df = sample_rate / nfft as f64;
    let lo = ((lo_hz / df).floor().max(1.0) as usize).min(psd.len() - 2);
    let hi = ((hi_hz / df).ceil() as usize).min(psd.len() - 2);
    if hi <= lo {
        return Err(SimError::InvalidParameter(format!("empty search band {lo_hz}..{hi_hz} Hz")));
    }
    let band = &psd[lo..=hi];
    let (off, &peak) = band.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty band");
    let k = lo + off;
    let mut sorted = band.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2].max(f64::MIN_POSITIVE);
    let prominence_db = 10.0 * (peak / median).log10();
    let (a, b, c) = (psd[k - 1].max(1e-300).ln(), peak.max(1e-300).ln(), psd[k + 1].max(1e-300).ln());
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Ok(SpectralPeak { frequency: (k as f64 + delta) * df, bin: k, prominence_db })
}

/// Centered moving average (window forced odd, shrinking at the edges).
pub fn moving_average_centered(x: &[Complex64], window: usize) -> Vec<Complex64> {
    let half = window / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for v in x {
        let last = *prefix.last().expect("seeded");
        prefix.push(last + v);
    }
    (0..x.len())
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(x.len());
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}
