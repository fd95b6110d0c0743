//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines appear in ordinary `cargo test` output.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use harness_cli::commands::{cmd_budget, cmd_skr, postproc_run, simulate, skr_rows, thresholds};
use harness_cli::config::DataSource;
use harness_cli::Scenario;
use dsp_chain::keymap::quadrant_bits;
use noise_budget::{total_budget, HardwareProfile};
use phys_sim::constellation::{symbol_bits, symbol_point};
use phys_sim::sim::simulate_block;
use postproc::de::{beta_from_sigma, density_evolution_threshold, DeOptions};
use postproc::decoder::CheckRule;
use postproc::met::DESIGN_TABLE;
use postproc::privacy::{toeplitz_hash, toeplitz_hash_naive, toeplitz_seed};
use ratecalc_lca::entropy::{symmetric_two_mode, two_mode_symplectic_eigenvalues};
use ratecalc_lca::lca::{correlation_z4, holevo_bound_lca, skr_lca};
use ratecalc_lca::{ChannelScenario, Method, ProtocolParams};

const LCA_MBPS: [f64; 3] = [190.54, 133.6, 52.48];
const SDP_MBPS: [f64; 3] = [233.87, 137.76, 21.53];
const LCA_THRESHOLDS: [f64; 3] = [0.0563, 0.0497, 0.0371];
const SDP_THRESHOLDS: [f64; 3] = [0.0176, 0.0141, 0.0092];
const SIGMA_DE: [f64; 3] = [3.074, 3.341, 4.789];
const BETA_SIGMA: [f64; 3] = [0.9647, 0.9694, 0.9746];

struct Verdict {
    pass: bool,
    detail: String,
}

fn rel(got: f64, want: f64) -> f64 {
    got / want - 1.0
}

fn lca_rates() -> Verdict {
    let rows = skr_rows(&Scenario::default(), &[Method::Lca]).expect("lca rates");
    let mut pass = true;
    let mut detail = Vec::new();
    for (r, want) in rows.iter().zip(LCA_MBPS) {
        let e = rel(r.skr_mbps, want);
        pass &= e.abs() <= 0.10;
        detail.push(format!("{} km {:.2} Mbps ({:+.2}%)", r.report.distance_km, r.skr_mbps, 100.0 * e));
    }
    Verdict { pass, detail: detail.join(", ") }
}

fn sdp_rates() -> Verdict {
    let at = |cutoff: usize| {
        let mut s = Scenario::default();
        s.solver.sdp_cutoff = cutoff;
        skr_rows(&s, &[Method::Sdp]).expect("sdp rates")
    };
    let (c12, c16) = (at(12), at(16));
    let mut pass = true;
    let mut detail = Vec::new();
    for ((a, b), want) in c12.iter().zip(&c16).zip(SDP_MBPS) {
        let (e12, e16) = (rel(a.skr_mbps, want), rel(b.skr_mbps, want));
        let drift = rel(b.skr_mbps, a.skr_mbps);
        pass &= e12.abs() <= 0.15 && e16.abs() <= 0.15 && drift.abs() < 0.01;
        detail.push(format!(
            "{} km {:.2}/{:.2} Mbps at N_c 12/16 ({:+.2}%, drift {:+.4}%)",
            a.report.distance_km,
            a.skr_mbps,
            b.skr_mbps,
            100.0 * e12,
            100.0 * drift
        ));
    }
    Verdict { pass, detail: detail.join(", ") }
}

fn null_thresholds() -> Verdict {
    let body = thresholds(&Scenario::default(), &[Method::Lca, Method::Sdp]).expect("thresholds");
    let mut pass = true;
    let mut detail = Vec::new();
    for r in &body.rows {
        let i = [5.0, 10.0, 25.0].iter().position(|&d| d == r.distance_km).expect("reference distance");
        let (want, tol) = match r.threshold.method {
            Method::Lca => (LCA_THRESHOLDS[i], 0.10),
            Method::Sdp => (SDP_THRESHOLDS[i], 0.15),
        };
        let e = rel(r.threshold.epsilon, want);
        pass &= e.abs() <= tol;
        detail.push(format!("{} {} km {:.5} ({:+.1}%)", r.threshold.method, r.distance_km, r.threshold.epsilon, 100.0 * e));
    }
    Verdict { pass, detail: detail.join(", ") }
}

fn de_thresholds() -> Verdict {
    // β moves about 2 pp per 1% of σ, so the search needs a finer grid and
    // tolerance than the everyday defaults (11 bits lands 0.1 pp low).
    let opts = DeOptions { bits: 12, sigma_tol: 1e-4, ..DeOptions::default() };
    let found: Vec<(f64, f64)> = DESIGN_TABLE
        .par_iter()
        .map(|row| {
            let t = density_evolution_threshold(&row.distribution().expect("ensemble"), &opts).expect("density evolution");
            (t.sigma, beta_from_sigma(row.rate, t.sigma))
        })
        .collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, (sigma, beta)) in found.into_iter().enumerate() {
        let e = rel(sigma, SIGMA_DE[i]);
        let pp = 100.0 * (beta - BETA_SIGMA[i]);
        pass &= e.abs() <= 0.02 && pp.abs() <= 0.1;
        detail.push(format!("R {} σ {:.4} ({:+.2}%) β {:.2}% ({:+.3} pp)", DESIGN_TABLE[i].rate, sigma, 100.0 * e, 100.0 * beta, pp));
    }
    Verdict { pass, detail: format!("{} bits: {}", opts.bits, detail.join(", ")) }
}

fn closed_loop() -> Verdict {
    let mut s = Scenario::default();
    s.sim.distance_km = 10.0;
    s.sim.blocks = 30;
    s.sim.n_symbols = 100_000;
    s.sim.linewidth_a_hz = 100.0;
    s.sim.linewidth_b_hz = 100.0;
    let b = simulate(&s, &[Method::Lca], 30, None, true).expect("simulation campaign");
    let pc = b.phase_check.expect("phase check requested");
    let pass = b.within_3_sem && pc.consistent && (pc.predicted / 1.15e-7 - 1.0).abs() < 0.01;
    Verdict {
        pass,
        detail: format!(
            "ε̂ {:.5} ± {:.5} vs 0.0073 (z {:.2}); phase term {:.2e} measured vs {:.3e} predicted, resolution {:.1e}",
            b.mean_excess_noise, b.sem_excess_noise, b.z_score, pc.measured, pc.predicted, pc.resolution
        ),
    }
}

fn desk_postproc() -> Verdict {
    let mut s = Scenario::default();
    s.postproc.distance_km = 25.0;
    s.postproc.source = DataSource::Gaussian;
    s.postproc.gaussian_snr = 0.047;
    s.postproc.gaussian_frames = 8;
    let x = &mut s.postproc.extract;
    x.code_rate = 0.03;
    x.block_len = 100_000;
    x.target_beta = 0.93;
    x.rule = CheckRule::SumProduct;
    let (key, body) = postproc_run(&s).expect("post-processing");
    let r = &body.extract;
    let fer = r.fer.unwrap_or(1.0);
    let pass = body.achieved_beta >= 0.93 && fer <= 0.9 && r.frames_verified >= 1 && !key.is_empty();
    Verdict {
        pass,
        detail: format!(
            "n {} β {:.2}% FER {:.3} over {} frames, {} verified, key {} bits (full-scale target β {:.1}%)",
            r.block_len,
            100.0 * body.achieved_beta,
            fer,
            r.frames,
            r.frames_verified,
            key.len(),
            100.0 * body.table_beta
        ),
    }
}

fn symplectic_oracle(gamma: &[[f64; 4]; 4]) -> (f64, f64) {
    let g = DMatrix::from_fn(4, 4, |r, c| gamma[r][c]);
    let eig = SymmetricEigen::new(g);
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    let root = root.map(|x| Complex64::new(x, 0.0));
    let omega = [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0]];
    let i_omega = DMatrix::from_fn(4, 4, |r, c| Complex64::new(0.0, omega[r][c]));
    let mut ev: Vec<f64> = SymmetricEigen::new(&root * i_omega * &root).eigenvalues.iter().map(|x| x.abs()).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    (ev[0], ev[2])
}

fn properties() -> Verdict {
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };

    let a: f64 = 1e-3;
    let z_ok = (0..=90).all(|i| {
        let a = 0.1 + 0.01 * i as f64;
        let v = 1.0 + 2.0 * a * a;
        correlation_z4(a).unwrap() <= (v * v - 1.0).sqrt()
    });
    check("Z4 bound", z_ok);
    check("Z4 small-amplitude limit", (correlation_z4(a).unwrap() / (2.0 * a) - 1.0).abs() < 1e-4);

    let sym_ok = [(1.912, 1.4, 0.9), (3.0, 2.0, 1.5), (1.2, 1.05, 0.1), (1.456, 1.28, 0.87)].iter().all(|&(v, w, z)| {
        let g = symmetric_two_mode(v, w, z);
        let (x, y) = two_mode_symplectic_eigenvalues(&g).unwrap();
        let (ox, oy) = symplectic_oracle(&g);
        (x - ox).abs() < 1e-9 && (y - oy).abs() < 1e-9
    });
    check("symplectic oracle", sym_ok);

    let p = ProtocolParams::from_modulation_variance(0.456, 0.45, 0.297, 0.95, 5e9).unwrap();
    let mut mono = true;
    let mut s_be_ok = true;
    for d in [5.0, 10.0, 25.0] {
        let mut prev = f64::INFINITY;
        for i in 0..=60 {
            let c = ChannelScenario::from_distance(d, 0.2, 0.3, 0.001 * i as f64).unwrap();
            s_be_ok &= holevo_bound_lca(&p, &c).unwrap().s_be >= 0.0;
            let r = skr_lca(&p, &c).unwrap().skr_bps;
            mono &= r <= prev;
            prev = r;
        }
    }
    check("S_BE non-negative", s_be_ok);
    check("SKR monotone in ε", mono);

    let axis = [-2.0, -0.5, 0.0, 0.5, 2.0];
    let map_ok = axis.iter().all(|&x| {
        axis.iter().all(|&y| match quadrant_bits(x, y) {
            None => x == 0.0 && y == 0.0,
            Some(_) => !(x == 0.0 && y == 0.0),
        })
    }) && (0..4u8).all(|k| {
        let z = symbol_point(k, 0.5);
        quadrant_bits(z.re, z.im) == Some(symbol_bits(k))
    }) && {
        let images: std::collections::BTreeSet<[u8; 2]> = (0..4u8).map(symbol_bits).collect();
        images.len() == 4
    };
    check("raw-key mapping", map_ok);

    let toeplitz_ok = [(64, 17, 1u64), (1000, 333, 2), (4096, 1024, 3)].iter().all(|&(n, m, seed)| {
        let bits: Vec<u8> = toeplitz_seed(n, 1, seed ^ 0xabc)[..n].to_vec();
        let t = toeplitz_seed(n, m, seed);
        toeplitz_hash(&bits, &t, m).unwrap() == toeplitz_hash_naive(&bits, &t, m).unwrap()
    });
    check("Toeplitz FFT vs naive", toeplitz_ok);

    let mut s = Scenario::default();
    s.postproc.source = DataSource::Gaussian;
    s.postproc.gaussian_frames = 1;
    s.postproc.extract.block_len = 20_000;
    s.postproc.extract.target_beta = 0.8;
    let (k1, b1) = postproc_run(&s).unwrap();
    let (k2, b2) = postproc_run(&s).unwrap();
    let cfg = s.sim_config(10.0, "sim").unwrap();
    let (f1, f2) = (simulate_block(&cfg, 3).unwrap(), simulate_block(&cfg, 3).unwrap());
    let det = k1 == k2
        && b1.extract.key_digest == b2.extract.key_digest
        && b1.extract.key_digest.is_some()
        && cmd_budget(&s).unwrap().report_json == cmd_budget(&s).unwrap().report_json
        && cmd_skr(&s, &[Method::Lca]).unwrap().report_json == cmd_skr(&s, &[Method::Lca]).unwrap().report_json
        && f1.quantum == f2.quantum
        && f1.pilot == f2.pilot;
    check("deterministic reruns", det);

    let mut add = true;
    for hw in [HardwareProfile::separate_path(), HardwareProfile::rf_subcarrier(), HardwareProfile::noiseless()] {
        for d in [5.0, 10.0, 25.0] {
            let c = ChannelScenario::from_distance(d, 0.2, 0.3, 0.0).unwrap();
            let b = total_budget(&hw, &c, &p, 1e-5).unwrap();
            add &= (b.terms().iter().map(|(_, v)| v).sum::<f64>() - b.total).abs() <= 1e-15 * b.total.max(1.0);
        }
    }
    check("budget additivity", add);

    let pass = failed.is_empty();
    let detail = if pass { "all property checks hold".into() } else { format!("failed: {}", failed.join(", ")) };
    Verdict { pass, detail }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("LCA rate reproduction", lca_rates),
        ("SDP rate reproduction", sdp_rates),
        ("null-key thresholds", null_thresholds),
        ("density-evolution thresholds", de_thresholds),
        ("closed-loop noise estimation", closed_loop),
        ("desk-scale post-processing", desk_postproc),
        ("property suites", properties),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        if !v.pass {
            failures += 1;
        }
        println!(
            "[{}] {}. {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
