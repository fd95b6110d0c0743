use std::f64::consts::PI;

use num_complex::Complex64;
use phys_sim::filters::welch_psd;
use phys_sim::sim::{apply_channel, generate_qpsk_symbols, simulate_block, synthesize_tx_waveform, IqFrame, SimConfig};

fn noiseless_frame(field: &[Complex64], cfg: &SimConfig, label: &str) -> IqFrame {
    let r = cfg.f_beat / cfg.sample_rate;
    IqFrame {
        label: label.into(),
        sample_rate: cfg.sample_rate,
        samples: field
            .iter()
            .enumerate()
            .map(|(i, c)| 2f64.sqrt() * (c * Complex64::from_polar(1.0, 2.0 * PI * (r * i as f64).fract())).re)
            .collect(),
        adc_bits: None,
        full_scale: None,
        adc_step: None,
        clip_fraction: 0.0,
        warnings: Vec::new(),
    }
}

#[test]
fn quantum_band_is_isolated_from_pilot_band() {
    let cfg = SimConfig { n_symbols: 20_000, ..Default::default() };
    let (symbols, _) = generate_qpsk_symbols(cfg.seed, 0, cfg.n_symbols);
    let tx = synthesize_tx_waveform(&symbols, &cfg).unwrap();
    // quantum envelope sits at −f_shift; the pilot band is ±100 MHz at DC
    let frame = noiseless_frame(&tx.quantum, &SimConfig { f_beat: 10e9, ..cfg.clone() }, "q");
    let nfft = 1 << 14;
    let psd = welch_psd(&frame.samples, nfft).unwrap();
    let df = cfg.sample_rate / nfft as f64;
    let power = |lo: f64, hi: f64| {
        psd.iter().enumerate().filter(|(k, _)| (lo..hi).contains(&(*k as f64 * df))).map(|(_, v)| v).sum::<f64>()
    };
    let quantum = power(10e9 - 3.5e9 - 3.25e9, 10e9 - 3.5e9 + 3.25e9);
    let pilot = power(10e9 - 100e6, 10e9 + 100e6);
    let ratio_db = 10.0 * (pilot / quantum).log10();
    assert!(ratio_db < -40.0, "cross-band power {ratio_db} dB");
}

#[test]
fn received_energy_scales_with_transmittance() {
    let mut cfg = SimConfig { n_symbols: 125_000, ..Default::default() };
    cfg.channel.linewidth_a_hz = 0.0;
    let (symbols, _) = generate_qpsk_symbols(cfg.seed, 0, cfg.n_symbols);
    let tx = synthesize_tx_waveform(&symbols, &cfg).unwrap();
    let power = |t: f64| {
        let mut c = cfg.clone();
        c.channel.transmittance = t;
        c.channel.isolation_db = f64::INFINITY;
        let (rx, _) = apply_channel(&tx, &c, 0).unwrap();
        rx.quantum.iter().map(|v| v.norm_sqr()).sum::<f64>() / rx.quantum.len() as f64
    };
    let p1 = power(1.0);
    assert!((p1 / (2.0 * cfg.alpha * cfg.alpha / 8.0) - 1.0).abs() < 0.02);
    for t in [0.5, 0.1] {
        assert!((power(t) / (t * p1) - 1.0).abs() < 0.02);
    }
}

#[test]
fn sixteen_bit_adc_adds_negligible_excess_noise() {
    let cfg = SimConfig { n_symbols: 20_000, adc_bits: Some(16), ..Default::default() };
    let pair = simulate_block(&cfg, 0).unwrap();
    let c = &cfg.channel;
    let eps_q = 2.0 * pair.quantum.quantization_variance() / (cfg.eta * c.transmittance);
    assert!(eps_q < 1e-4, "{eps_q}");
    assert!(pair.quantum.clip_fraction < 1e-4 && pair.quantum.warnings.is_empty());
}
