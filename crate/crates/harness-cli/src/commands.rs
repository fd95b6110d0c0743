//! The subcommands as library functions. Each returns an [`Output`] whose
//! report body depends only on the scenario (and hence its digest).

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use dsp_chain::chain::{run_chain, ChainOutput, ChannelEstimate, DetectorCalibration};
use dsp_chain::export::write_symbols_csv;
use dsp_chain::keymap::symbol_point;
use noise_budget::{total_budget, NoiseBudget};
use phys_sim::frame_io::{write_frame, write_ground_truth};
use phys_sim::sim::{simulate_block, SimConfig};
use postproc::code::build_met_ldpc;
use postproc::extract::{extract_with_code, ExtractReport, SecurityTerms};
use postproc::met::table_row;
use postproc::privacy::pack_bits;
use postproc::rate_adapt::rate_adapt_aligned;
use ratecalc_lca::lca::{holevo_bound_lca, mutual_information_lca};
use ratecalc_lca::params::{ChannelScenario, Method, ProtocolParams, SkrReport, REFERENCE_POINTS};
use ratecalc_lca::threshold::{optional_root, Threshold};
use ratecalc_sdp::{null_skr_threshold, skr};

use crate::config::{parse_range, DataSource, PointSection, Scenario};
use crate::error::{CliError, Result};
use crate::report::{csv, gnuplot_script, mean_and_sem, GnuplotSeries, Output};

fn check_methods(methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(CliError::Config("empty method list: choose lca, sdp or both".into()));
    }
    Ok(())
}

fn reference_for(p: &PointSection) -> Option<&'static ratecalc_lca::params::ReferencePoint> {
    REFERENCE_POINTS
        .iter()
        .find(|r| (r.distance_km - p.distance_km).abs() < 1e-9 && (r.excess_noise - p.excess_noise).abs() < 1e-12)
}

fn fmt(x: f64) -> String {
    format!("{x:.6e}")
}

// ---------------------------------------------------------------- skr

#[derive(Debug, Clone, Serialize)]
pub struct SkrRow {
    #[serde(flatten)]
    pub report: SkrReport,
    pub skr_mbps: f64,
    /// Reference rate for this point and method, when it is a reference point.
    pub reference_mbps: Option<f64>,
}

pub fn skr_rows(s: &Scenario, methods: &[Method]) -> Result<Vec<SkrRow>> {
    check_methods(methods)?;
    let jobs: Vec<(&PointSection, Method)> = s.points.iter().flat_map(|p| methods.iter().map(move |&m| (p, m))).collect();
    let sdp = s.sdp_options();
    jobs.par_iter()
        .map(|&(p, m)| {
            let report = skr(m, &s.params_for(p)?, &s.channel_for(p)?, &sdp)?;
            let reference_mbps = reference_for(p).map(|r| match m {
                Method::Lca => r.skr_lca_mbps,
                Method::Sdp => r.skr_sdp_mbps,
            });
            Ok(SkrRow { skr_mbps: report.skr_bps / 1e6, report, reference_mbps })
        })
        .collect()
}

pub fn cmd_skr(s: &Scenario, methods: &[Method]) -> Result<Output> {
    let rows = skr_rows(s, methods)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.report.distance_km.to_string(),
                r.report.method.to_string(),
                fmt(r.report.transmittance),
                r.report.excess_noise.to_string(),
                r.report.beta.to_string(),
                fmt(r.report.i_ab),
                fmt(r.report.s_be),
                format!("{:.4}", r.skr_mbps),
                r.reference_mbps.map(|v| v.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let text = csv(&["distance_km", "method", "transmittance", "excess_noise", "beta", "i_ab", "s_be", "skr_mbps", "reference_mbps"], &table);
    let mut summary = String::from("distance  method  SKR (Mbps)  reference\n");
    for r in &rows {
        let _ = writeln!(
            summary,
            "{:>6.1} km  {:<6}  {:>10.3}  {}",
            r.report.distance_km,
            r.report.method,
            r.skr_mbps,
            r.reference_mbps.map(|v| format!("{v}")).unwrap_or_else(|| "-".into())
        );
    }
    Ok(Output::new("skr", s, &rows).file("skr.csv", text).summary(summary))
}

// -------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub distance_km: f64,
    pub method: Method,
    pub skr_mbps: f64,
    pub threshold_epsilon: Option<f64>,
}

pub fn sweep_rows(s: &Scenario, methods: &[Method], grid: &[f64]) -> Result<Vec<SweepRow>> {
    check_methods(methods)?;
    let pr = &s.protocol;
    let params = ProtocolParams::from_modulation_variance(pr.modulation_variance, pr.eta, pr.v_el, s.sweep.beta, pr.symbol_rate)?;
    let (sdp, topts) = (s.sdp_options(), s.threshold_options());
    let jobs: Vec<(f64, Method)> = grid.iter().flat_map(|&d| methods.iter().map(move |&m| (d, m))).collect();
    jobs.par_iter()
        .map(|&(d, m)| {
            let ch = ChannelScenario::from_distance(d, s.channel.attenuation_db_per_km, s.channel.insertion_loss_db, s.sweep.excess_noise)?;
            let r = skr(m, &params, &ch, &sdp)?;
            let threshold_epsilon =
                if s.sweep.with_thresholds { optional_root(null_skr_threshold(&params, &ch, m, &topts, &sdp))? } else { None };
            Ok(SweepRow { distance_km: d, method: m, skr_mbps: r.skr_bps / 1e6, threshold_epsilon })
        })
        .collect()
}

pub fn cmd_sweep(s: &Scenario, methods: &[Method], range: Option<&str>) -> Result<Output> {
    let grid = parse_range(range.unwrap_or(&s.sweep.distance))?;
    let rows = sweep_rows(s, methods, &grid)?;
    // wide table: one SKR (and threshold) column per method
    let mut header = vec!["distance_km".to_string()];
    for m in methods {
        header.push(format!("skr_{}_mbps", m.as_str().to_lowercase()));
        if s.sweep.with_thresholds {
            header.push(format!("threshold_{}", m.as_str().to_lowercase()));
        }
    }
    let table: Vec<Vec<String>> = rows
        .chunks(methods.len())
        .map(|c| {
            let mut line = vec![c[0].distance_km.to_string()];
            for r in c {
                line.push(fmt(r.skr_mbps));
                if s.sweep.with_thresholds {
                    line.push(r.threshold_epsilon.map(fmt).unwrap_or_default());
                }
            }
            line
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let step = if s.sweep.with_thresholds { 2 } else { 1 };
    let series: Vec<GnuplotSeries> =
        methods.iter().enumerate().map(|(i, m)| GnuplotSeries { column: 2 + i * step, title: m.to_string() }).collect();
    let gp = gnuplot_script("sweep.csv", "sweep.png", "distance (km)", "SKR (Mbps)", true, &series, &[]);
    let summary = format!("{} distances x {} methods written\n", grid.len(), methods.len());
    Ok(Output::new("sweep", s, &rows).file("sweep.csv", csv(&h, &table)).file("sweep.gp", gp).summary(summary))
}

// ------------------------------------------------------------- budget

#[derive(Debug, Clone, Serialize)]
pub struct BudgetEntry {
    pub distance_km: f64,
    pub configured_excess_noise: f64,
    pub budget: NoiseBudget,
    /// Reference SDP null-key threshold at a reference point, and whether
    /// the budget stays below it.
    pub sdp_threshold_reference: Option<f64>,
    pub clears_sdp_threshold: Option<bool>,
}

pub fn cmd_budget(s: &Scenario) -> Result<Output> {
    let hw = s.hardware_profile()?;
    let mut entries = Vec::new();
    let mut out_files = Vec::new();
    let mut summary = String::new();
    for p in &s.points {
        let (params, ch) = (s.params_for(p)?, s.channel_for(p)?);
        let b = total_budget(&hw, &ch, &params, 0.0)?;
        let rows: Vec<Vec<String>> = b
            .rows(&hw, &ch, &params)
            .into_iter()
            .filter(|r| r.term != "total")
            .map(|r| vec![r.term.to_string(), r.formula.to_string(), r.inputs, fmt(r.snu)])
            .collect();
        out_files.push((format!("budget_{}km.csv", p.distance_km), csv(&["term", "formula", "inputs", "snu"], &rows)));
        let gate = reference_for(p).map(|r| r.threshold_sdp);
        let clears = gate.map(|g| b.total <= g);
        let _ = write!(summary, "{:>6.1} km: total {:.4e} SNU (configured ε {})", p.distance_km, b.total, p.excess_noise);
        if let (Some(g), Some(c)) = (gate, clears) {
            let _ = write!(summary, ", SDP threshold {g}: {}", if c { "cleared" } else { "NOT cleared" });
        }
        summary.push('\n');
        for (name, v) in b.terms() {
            let _ = writeln!(summary, "    {name:<11} {v:.4e}");
        }
        entries.push(BudgetEntry {
            distance_km: p.distance_km,
            configured_excess_noise: p.excess_noise,
            budget: b,
            sdp_threshold_reference: gate,
            clears_sdp_threshold: clears,
        });
    }
    let mut o = Output::new("budget", s, &entries).summary(summary);
    for (n, c) in out_files {
        o = o.file(n, c);
    }
    Ok(o)
}

// ----------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct BlockRow {
    pub block: u64,
    pub estimate: ChannelEstimate,
    /// Residual phase variance after both recovery stages (rad²).
    pub residual_phase_variance: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseCheck {
    /// Predicted fast laser-phase excess noise `2π·V_A·(Δν_A + Δν_B)/R_sym`.
    pub predicted: f64,
    /// `mean(ε̂) − mean(ε̂ with ideal lasers)` over the same blocks.
    pub measured: f64,
    /// Standard error of the campaign mean, the resolution at this size.
    pub resolution: f64,
    /// Standard error of the paired per-block differences.
    pub paired_sem: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateBody {
    pub distance_km: f64,
    pub n_symbols: usize,
    pub injected_excess_noise: f64,
    pub injected_transmittance: f64,
    pub mean_excess_noise: f64,
    pub sem_excess_noise: f64,
    pub mean_transmittance: f64,
    pub sem_transmittance: f64,
    /// `(mean − injected)/SEM`.
    pub z_score: f64,
    pub within_3_sem: bool,
    pub thresholds: Vec<Threshold>,
    pub phase_check: Option<PhaseCheck>,
    pub blocks: Vec<BlockRow>,
}

fn calibration(cfg: &SimConfig, out_q_var: f64) -> DetectorCalibration {
    DetectorCalibration { eta: cfg.eta, v_el: cfg.v_el, quantization_variance: out_q_var, trusted: true }
}

fn run_block(s: &Scenario, cfg: &SimConfig, block: u64, dump: Option<&Path>) -> Result<ChainOutput> {
    let pair = simulate_block(cfg, block)?;
    let out = run_chain(&pair, cfg.alpha, &calibration(cfg, pair.quantum.quantization_variance()), &s.dsp)?;
    if let Some(dir) = dump {
        let stem = format!("block{block:04}");
        let truth = write_ground_truth(dir, &format!("{stem}_truth"), &pair.truth)?;
        let c = serde_json::to_value(cfg).expect("plain data");
        write_frame(dir, &format!("{stem}_quantum"), &pair.quantum, c.clone(), Some(&truth))?;
        write_frame(dir, &format!("{stem}_pilot"), &pair.pilot, c, Some(&truth))?;
        write_symbols_csv(&dir.join(format!("{stem}_symbols.csv")), &out)?;
    }
    Ok(out)
}

/// Excess-noise campaign over `blocks` blocks. With `phase_check` the same
/// blocks are rerun with ideal lasers to isolate the laser-phase term.
pub fn simulate(s: &Scenario, methods: &[Method], blocks: usize, dump: Option<&Path>, phase_check: bool) -> Result<SimulateBody> {
    let cfg = s.sim_config(s.sim.distance_km, "sim.distance_km")?;
    let rows: Vec<BlockRow> = (0..blocks as u64)
        .into_par_iter()
        .map(|b| {
            let out = run_block(s, &cfg, b, dump)?;
            Ok(BlockRow { block: b, estimate: out.estimate, residual_phase_variance: out.residual_phase_variance })
        })
        .collect::<Result<_>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.estimate.excess_noise).collect();
    let tr: Vec<f64> = rows.iter().map(|r| r.estimate.transmittance).collect();
    let (me, se) = mean_and_sem(&eps);
    let (mt, st) = mean_and_sem(&tr);
    let injected = cfg.channel.excess_noise;
    let z = (me - injected) / se;

    let p = s.point_at(s.sim.distance_km, "sim.distance_km")?;
    let (params, ch) = (s.params_for(p)?, s.channel_for(p)?);
    let (sdp, topts) = (s.sdp_options(), s.threshold_options());
    let thresholds = methods
        .par_iter()
        .map(|&m| Ok(null_skr_threshold(&params, &ch, m, &topts, &sdp)?))
        .collect::<Result<Vec<_>>>()?;

    let phase = if phase_check {
        let mut ideal = cfg.clone();
        ideal.channel.linewidth_a_hz = 0.0;
        ideal.channel.linewidth_b_hz = 0.0;
        let eps0: Vec<f64> = (0..blocks as u64)
            .into_par_iter()
            .map(|b| Ok(run_block(s, &ideal, b, None)?.estimate.excess_noise))
            .collect::<Result<_>>()?;
        let diffs: Vec<f64> = eps.iter().zip(&eps0).map(|(a, b)| a - b).collect();
        let (md, sd) = mean_and_sem(&diffs);
        let v_a = 2.0 * cfg.alpha * cfg.alpha;
        let predicted =
            2.0 * std::f64::consts::PI * v_a * (cfg.channel.linewidth_a_hz + cfg.channel.linewidth_b_hz) / cfg.r_sym;
        Some(PhaseCheck { predicted, measured: md, resolution: se, paired_sem: sd, consistent: (md - predicted).abs() < 3.0 * se })
    } else {
        None
    };

    Ok(SimulateBody {
        distance_km: s.sim.distance_km,
        n_symbols: cfg.n_symbols,
        injected_excess_noise: injected,
        injected_transmittance: cfg.channel.transmittance,
        mean_excess_noise: me,
        sem_excess_noise: se,
        mean_transmittance: mt,
        sem_transmittance: st,
        z_score: z,
        within_3_sem: z.abs() <= 3.0,
        thresholds,
        phase_check: phase,
        blocks: rows,
    })
}

pub fn cmd_simulate(s: &Scenario, methods: &[Method], blocks: Option<usize>, dump: Option<&Path>) -> Result<Output> {
    let blocks = blocks.unwrap_or(s.sim.blocks);
    if blocks == 0 {
        return Err(CliError::Config("--blocks must be >= 1".into()));
    }
    let body = simulate(s, methods, blocks, dump, false)?;
    let table: Vec<Vec<String>> = body
        .blocks
        .iter()
        .map(|r| {
            vec![
                r.block.to_string(),
                fmt(r.estimate.excess_noise),
                fmt(r.estimate.excess_noise_se),
                fmt(r.estimate.transmittance),
                fmt(r.estimate.transmittance_se),
                r.residual_phase_variance.map(fmt).unwrap_or_default(),
            ]
        })
        .collect();
    let data = csv(
        &["block", "excess_noise", "excess_noise_se", "transmittance", "transmittance_se", "residual_phase_var"],
        &table,
    );
    let mut lines = vec![(body.injected_excess_noise, "injected".to_string())];
    lines.extend(body.thresholds.iter().map(|t| (t.epsilon, format!("null-SKR threshold {}", t.method))));
    let gp = gnuplot_script(
        "excess_noise.csv",
        "excess_noise.png",
        "block",
        "excess noise (SNU)",
        false,
        &[GnuplotSeries { column: 2, title: "estimate".into() }],
        &lines,
    );
    let mut summary = format!(
        "{} blocks at {} km: mean ε̂ = {:.5} ± {:.5} (SEM), injected {} (z = {:.2}, {})\n",
        body.blocks.len(),
        body.distance_km,
        body.mean_excess_noise,
        body.sem_excess_noise,
        body.injected_excess_noise,
        body.z_score,
        if body.within_3_sem { "within 3 SEM" } else { "OUTSIDE 3 SEM" }
    );
    for t in &body.thresholds {
        let _ = writeln!(summary, "null-SKR threshold {}: {:.5}", t.method, t.epsilon);
    }
    Ok(Output::new("simulate", s, &body)
        .file("excess_noise.csv", data)
        .file("excess_noise.gp", gp)
        .summary(summary))
}

// ----------------------------------------------------------- postproc

#[derive(Debug, Clone, Serialize)]
pub struct PostprocBody {
    pub distance_km: f64,
    pub source: DataSource,
    /// Channel seen by the security terms (estimated for DSP data).
    pub transmittance: f64,
    pub excess_noise: f64,
    /// Tabulated efficiency for this code rate, the full-scale target.
    pub table_beta: f64,
    pub achieved_beta: f64,
    pub corrupted_frames: Vec<usize>,
    pub corrupted_frames_discarded: bool,
    pub extract: ExtractReport,
}

/// Correlated real data `(alice, bob)` and the channel for the security
/// terms.
fn postproc_data(s: &Scenario, per_frame: usize) -> Result<(Vec<f64>, Vec<f64>, ChannelScenario)> {
    let pp = &s.postproc;
    let p = s.point_at(pp.distance_km, "postproc.distance_km")?;
    match pp.source {
        DataSource::Gaussian => {
            let n = pp.gaussian_frames * per_frame;
            let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
            let sd = (1.0 / pp.gaussian_snr).sqrt();
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let a: f64 = StandardNormal.sample(&mut rng);
                let e: f64 = StandardNormal.sample(&mut rng);
                x.push(a);
                y.push(a + sd * e);
            }
            Ok((x, y, s.channel_for(p)?))
        }
        DataSource::Dsp => {
            let cfg = s.sim_config(pp.distance_km, "postproc.distance_km")?;
            let outs: Vec<ChainOutput> =
                (0..pp.blocks as u64).into_par_iter().map(|b| run_block(s, &cfg, b, None)).collect::<Result<_>>()?;
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for o in &outs {
                for (z, &k) in o.recovered.z.iter().zip(&o.recovered.truth) {
                    let a = symbol_point(k, cfg.alpha);
                    x.extend([a.re, a.im]);
                    y.extend([z.re, z.im]);
                }
            }
            let t: Vec<f64> = outs.iter().map(|o| o.estimate.transmittance).collect();
            let e: Vec<f64> = outs.iter().map(|o| o.estimate.excess_noise).collect();
            let (t, e) = (mean_and_sem(&t).0, mean_and_sem(&e).0);
            Ok((x, y, ChannelScenario::from_transmittance(t.min(1.0), e.max(0.0))?))
        }
    }
}

pub fn postproc_run(s: &Scenario) -> Result<(Vec<u8>, PostprocBody)> {
    let pp = &s.postproc;
    let mut cfg = pp.extract.clone();
    if pp.source == DataSource::Gaussian && cfg.snr.is_none() {
        cfg.snr = Some(pp.gaussian_snr);
    }
    let row = table_row(cfg.code_rate)?;
    let code = build_met_ldpc(&row.distribution()?, cfg.block_len, cfg.code_seed)?;
    let per_frame = match pp.source {
        DataSource::Gaussian => {
            let pat = rate_adapt_aligned(&code, cfg.target_beta, pp.gaussian_snr, cfg.adapt_class, cfg.seed ^ 0x5eed, cfg.dimension)?;
            code.n - pat.punctured.len() - pat.shortened.len()
        }
        DataSource::Dsp => 0,
    };
    let (x, y, ch) = postproc_data(s, per_frame)?;
    let p = s.point_at(pp.distance_km, "postproc.distance_km")?;
    let params = s.params_for(p)?;
    let terms = SecurityTerms {
        mutual_information: mutual_information_lca(&params, &ch)?,
        holevo_bound: holevo_bound_lca(&params, &ch)?.s_be,
    };
    let (key, report) = extract_with_code(&code, &x, &y, terms, &cfg)?;
    let corrupted: Vec<usize> = cfg.corrupt_frames.iter().copied().filter(|&f| f < report.frames).collect();
    let discarded = corrupted.iter().all(|&f| !report.frame_outcomes[f].verified);
    let body = PostprocBody {
        distance_km: pp.distance_km,
        source: pp.source,
        transmittance: ch.transmittance,
        excess_noise: ch.excess_noise,
        table_beta: row.beta_adaptive,
        achieved_beta: report.beta,
        corrupted_frames: corrupted,
        corrupted_frames_discarded: discarded,
        extract: report,
    };
    Ok((key, body))
}

pub fn cmd_postproc(s: &Scenario) -> Result<Output> {
    let (key, body) = postproc_run(s)?;
    let r = &body.extract;
    let mut summary = format!(
        "{} frames of n = {} (punctured {}, shortened {}), SNR {:.4}\n\
         β achieved {:.2}% (target {:.2}%, tabulated {:.2}%), FER {}\n\
         secret fraction {:.3e} bits/use, final key {} bits",
        r.frames,
        r.block_len,
        r.punctured,
        r.shortened,
        r.snr,
        100.0 * body.achieved_beta,
        100.0 * r.target_beta,
        100.0 * body.table_beta,
        r.fer.map_or_else(|| "n/a (not decoded)".to_string(), |f| format!("{f:.3}")),
        r.secret_fraction,
        r.final_len
    );
    if let Some(d) = &r.key_digest {
        let _ = write!(summary, " (sha256 {d})");
    }
    summary.push('\n');
    if let Some(a) = &r.aborted {
        let _ = writeln!(summary, "aborted: {a}");
    }
    for &f in &body.corrupted_frames {
        let o = &r.frame_outcomes[f];
        let _ = writeln!(
            summary,
            "frame {f}: corrupted syndrome, verification {}, block {}",
            if o.verified { "passed" } else { "failed" },
            if o.verified { "kept" } else { "discarded" }
        );
    }
    let frames: Vec<Vec<String>> = r
        .frame_outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            vec![
                i.to_string(),
                o.converged.to_string(),
                o.verified.to_string(),
                o.iterations.to_string(),
                o.unsatisfied_checks.to_string(),
            ]
        })
        .collect();
    let mut o = Output::new("postproc", s, &body)
        .file("frames.csv", csv(&["frame", "converged", "verified", "iterations", "unsatisfied_checks"], &frames))
        .summary(summary);
    if !key.is_empty() {
        o = o.file("key.bin", pack_bits(&key));
    }
    Ok(o)
}

// --------------------------------------------------------- thresholds

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub distance_km: f64,
    #[serde(flatten)]
    pub threshold: Threshold,
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdsBody {
    pub rows: Vec<ThresholdRow>,
    /// SDP threshold below the LCA one at every distance where both ran.
    pub sdp_below_lca: Option<bool>,
}

pub fn thresholds(s: &Scenario, methods: &[Method]) -> Result<ThresholdsBody> {
    check_methods(methods)?;
    let (sdp, topts) = (s.sdp_options(), s.threshold_options());
    let jobs: Vec<(&PointSection, Method)> = s.points.iter().flat_map(|p| methods.iter().map(move |&m| (p, m))).collect();
    let rows: Vec<ThresholdRow> = jobs
        .par_iter()
        .map(|&(p, m)| {
            let t = null_skr_threshold(&s.params_for(p)?, &s.channel_for(p)?, m, &topts, &sdp)?;
            let reference = reference_for(p).map(|r| match m {
                Method::Lca => r.threshold_lca,
                Method::Sdp => r.threshold_sdp,
            });
            Ok(ThresholdRow { distance_km: p.distance_km, threshold: t, reference })
        })
        .collect::<Result<_>>()?;
    let sdp_below_lca = if methods.contains(&Method::Lca) && methods.contains(&Method::Sdp) {
        let get = |d: f64, m: Method| rows.iter().find(|r| r.distance_km == d && r.threshold.method == m).map(|r| r.threshold.epsilon);
        Some(s.points.iter().all(|p| get(p.distance_km, Method::Sdp) < get(p.distance_km, Method::Lca)))
    } else {
        None
    };
    Ok(ThresholdsBody { rows, sdp_below_lca })
}

pub fn cmd_thresholds(s: &Scenario, methods: &[Method]) -> Result<Output> {
    let body = thresholds(s, methods)?;
    let table: Vec<Vec<String>> = body
        .rows
        .iter()
        .map(|r| {
            vec![
                r.distance_km.to_string(),
                r.threshold.method.to_string(),
                fmt(r.threshold.epsilon),
                r.reference.map(|v| v.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let mut summary = String::from("distance  method  ε_max     reference\n");
    for r in &body.rows {
        let _ = writeln!(
            summary,
            "{:>6.1} km  {:<6}  {:.5}  {}",
            r.distance_km,
            r.threshold.method,
            r.threshold.epsilon,
            r.reference.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
        );
    }
    if let Some(b) = body.sdp_below_lca {
        let _ = writeln!(summary, "SDP below LCA at every distance: {b}");
    }
    Ok(Output::new("thresholds", s, &body)
        .file("thresholds.csv", csv(&["distance_km", "method", "epsilon", "reference"], &table))
        .summary(summary))
}
