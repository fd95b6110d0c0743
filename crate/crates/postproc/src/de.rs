//! Quantized density evolution for multi-edge-type ensembles on the
//! binary-input AWGN channel (all-zero word, BPSK `+1`).
//!
//! Message densities live on the grid `kΔ, k = −H..=H` with saturation at
//! the ends. Variable nodes convolve densities (FFT); check nodes combine
//! pairs through a lookup of the quantized `2 atanh(tanh(a/2)tanh(b/2))`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{PostprocError, Result};
use crate::met::MetDegreeDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeOptions {
    /// Message resolution: `2^bits` grid levels.
    pub bits: u32,
    /// Saturation magnitude of the LLR grid.
    pub max_llr: f64,
    pub max_iters: usize,
    /// Posterior bit-error probability that counts as convergence.
    pub target_error: f64,
    /// Relative precision of the threshold search.
    pub sigma_tol: f64,
}

impl Default for DeOptions {
    fn default() -> Self {
        Self { bits: 11, max_llr: 30.0, max_iters: 500, target_error: 1e-6, sigma_tol: 5e-4 }
    }
}

/// Per-class fractions of nodes that are punctured (never transmitted) or
/// shortened (known to the decoder).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassAdaptation {
    pub punctured: f64,
    pub shortened: f64,
}

/// Result of one density-evolution run at fixed `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeRun {
    pub sigma: f64,
    pub converged: bool,
    pub iterations: usize,
    pub error_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeThreshold {
    pub sigma: f64,
    /// `R/(½ log2(1 + 1/σ²))`.
    pub beta: f64,
    /// Largest probed `σ` that failed.
    pub sigma_fail: f64,
    pub probes: usize,
}

/// Density on the saturated grid, split by sign: `pos[k]` is the mass at
/// `+kΔ` (including zero), `neg[k]` the mass at `−kΔ` (`neg[0]` unused).
#[derive(Debug, Clone, PartialEq)]
struct Density {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl Density {
    fn zeros(h: usize) -> Self {
        Self { pos: vec![0.0; h + 1], neg: vec![0.0; h + 1] }
    }

    fn delta_zero(h: usize) -> Self {
        let mut d = Self::zeros(h);
        d.pos[0] = 1.0;
        d
    }

    fn h(&self) -> usize {
        self.pos.len() - 1
    }

    /// Linear layout `index = k + H` for `k = −H..=H`.
    fn to_linear(&self) -> Vec<f64> {
        let h = self.h();
        let mut v = vec![0.0; 2 * h + 1];
        for k in 0..=h {
            v[h + k] += self.pos[k];
            if k > 0 {
                v[h - k] += self.neg[k];
            }
        }
        v
    }

    fn from_linear(v: &[f64], h: usize) -> Self {
        let mut d = Self::zeros(h);
        for (i, &p) in v.iter().enumerate() {
            let k = i as i64 - h as i64;
            let p = p.max(0.0);
            if k >= 0 {
                d.pos[k as usize] += p;
            } else {
                d.neg[(-k) as usize] += p;
            }
        }
        d
    }

    /// `P(L < 0) + ½P(L = 0)`.
    fn error_probability(&self) -> f64 {
        self.neg[1..].iter().sum::<f64>() + 0.5 * self.pos[0]
    }

    fn normalize(&mut self) {
        let s: f64 = self.pos.iter().sum::<f64>() + self.neg[1..].iter().sum::<f64>();
        if s > 0.0 {
            self.pos.iter_mut().for_each(|x| *x /= s);
            self.neg.iter_mut().for_each(|x| *x /= s);
        }
    }
}

struct Engine {
    h: usize,
    step: f64,
    fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `table[k][l − k]` for `l ≥ k`: quantized `|a ⊞ b|` in grid units.
    table: Vec<Vec<u32>>,
    /// First `l` from which the result equals `k` for all larger `l`.
    settle: Vec<usize>,
}

impl Engine {
    fn new(opts: &DeOptions) -> Result<Self> {
        if !(4..=14).contains(&opts.bits) || !(opts.max_llr > 1.0) {
            return Err(PostprocError::InvalidParameter("DE grid needs 4..=14 bits and max_llr > 1".into()));
        }
        let h = (1usize << opts.bits) / 2;
        let step = opts.max_llr / h as f64;
        let fft_len = (4 * h + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut table = Vec::with_capacity(h + 1);
        let mut settle = Vec::with_capacity(h + 1);
        for k in 0..=h {
            let tk = (k as f64 * step / 2.0).tanh();
            let mut row = Vec::new();
            let mut l = k;
            loop {
                let tl = (l as f64 * step / 2.0).tanh();
                let z = 2.0 * (tk * tl).min(1.0 - 1e-16).atanh();
                let q = ((z / step).round() as usize).min(k);
                if q == k || l == h {
                    if q == k {
                        settle.push(l);
                    } else {
                        row.push(q as u32);
                        settle.push(h + 1);
                    }
                    break;
                }
                row.push(q as u32);
                l += 1;
            }
            table.push(row);
        }
        Ok(Self { h, step, fft_len, fwd: planner.plan_fft_forward(fft_len), inv: planner.plan_fft_inverse(fft_len), table, settle })
    }

    fn adapted_channel(&self, sigma: f64, observed: bool, adapt: ClassAdaptation) -> Density {
        let mut d = if observed { self.channel(sigma, true) } else { Density::delta_zero(self.h) };
        let keep = 1.0 - adapt.punctured - adapt.shortened;
        d.pos.iter_mut().for_each(|x| *x *= keep);
        d.neg.iter_mut().for_each(|x| *x *= keep);
        d.pos[0] += adapt.punctured;
        d.pos[self.h] += adapt.shortened;
        d
    }

    fn channel(&self, sigma: f64, observed: bool) -> Density {
        if !observed {
            return Density::delta_zero(self.h);
        }
        let mean = 2.0 / (sigma * sigma);
        let sd = 2.0 / sigma;
        let cdf = |x: f64| 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2));
        let h = self.h as i64;
        let v: Vec<f64> = (-h..=h)
            .map(|k| {
                let lo = if k == -h { f64::NEG_INFINITY } else { (k as f64 - 0.5) * self.step };
                let hi = if k == h { f64::INFINITY } else { (k as f64 + 0.5) * self.step };
                (cdf(hi) - cdf(lo)).max(0.0)
            })
            .collect();
        let mut d = Density::from_linear(&v, self.h);
        d.normalize();
        d
    }

    fn spectrum(&self, d: &Density) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (i, p) in d.to_linear().into_iter().enumerate() {
            buf[i].re = p;
        }
        self.fwd.process(&mut buf);
        buf
    }

    /// Sum of two LLRs, saturated.
    fn convolve(&self, a: &Density, b: &Density) -> Density {
        let sa = self.spectrum(a);
        let mut sb = self.spectrum(b);
        for (x, y) in sb.iter_mut().zip(&sa) {
            *x *= y;
        }
        self.inv.process(&mut sb);
        let scale = 1.0 / self.fft_len as f64;
        let h = self.h;
        let mut v = vec![0.0; 2 * h + 1];
        // linear index i of the sum corresponds to value (i − 2H)Δ
        for (i, c) in sb.iter().take(4 * h + 1).enumerate() {
            let k = (i as i64 - 2 * h as i64).clamp(-(h as i64), h as i64);
            v[(k + h as i64) as usize] += c.re * scale;
        }
        let mut d = Density::from_linear(&v, h);
        d.normalize();
        d
    }

    fn convolve_power(&self, a: &Density, mut k: u32, acc: Option<Density>) -> Option<Density> {
        let mut result = acc;
        let mut base = a.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => self.convolve(&r, &base),
                });
            }
            k >>= 1;
            if k > 0 {
                base = self.convolve(&base, &base);
            }
        }
        result
    }

    /// Check-node combination of two densities.
    fn boxplus(&self, a: &Density, b: &Density) -> Density {
        let h = self.h;
        let mut out = Density::zeros(h);
        let suffix = |v: &[f64]| {
            let mut s = vec![0.0; v.len() + 1];
            for i in (0..v.len()).rev() {
                s[i] = s[i + 1] + v[i];
            }
            s
        };
        let (ap, an, bp, bn) = (suffix(&a.pos), suffix(&a.neg), suffix(&b.pos), suffix(&b.neg));
        let add = |out: &mut Density, q: usize, same: f64, diff: f64| {
            out.pos[q] += same;
            if q == 0 {
                out.pos[0] += diff;
            } else {
                out.neg[q] += diff;
            }
        };
        for k in 0..=h {
            let (akp, akn, bkp, bkn) = (a.pos[k], a.neg[k], b.pos[k], b.neg[k]);
            if akp + akn + bkp + bkn == 0.0 {
                continue;
            }
            let row = &self.table[k];
            // explicit region l in [k, settle)
            for (off, &q) in row.iter().enumerate() {
                let l = k + off;
                let q = q as usize;
                if off == 0 {
                    add(&mut out, q, akp * bkp + akn * bkn, akp * bkn + akn * bkp);
                } else {
                    let same = akp * b.pos[l] + akn * b.neg[l] + a.pos[l] * bkp + a.neg[l] * bkn;
                    let diff = akp * b.neg[l] + akn * b.pos[l] + a.pos[l] * bkn + a.neg[l] * bkp;
                    add(&mut out, q, same, diff);
                }
            }
            let s = self.settle[k];
            if s <= h {
                // every l ≥ s maps to k
                let from = if s == k { k + 1 } else { s };
                if s == k {
                    add(&mut out, k, akp * bkp + akn * bkn, akp * bkn + akn * bkp);
                }
                if from <= h {
                    let same = akp * bp[from] + akn * bn[from] + ap[from] * bkp + an[from] * bkn;
                    let diff = akp * bn[from] + akn * bp[from] + ap[from] * bkn + an[from] * bkp;
                    add(&mut out, k, same, diff);
                }
            }
        }
        out.normalize();
        out
    }

    fn boxplus_power(&self, a: &Density, mut k: u32, acc: Option<Density>) -> Option<Density> {
        let mut result = acc;
        let mut base = a.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => self.boxplus(&r, &base),
                });
            }
            k >>= 1;
            if k > 0 {
                base = self.boxplus(&base, &base);
            }
        }
        result
    }
}

/// Complementary error function (Numerical Recipes `erfcc`, relative
/// error below 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Runs density evolution at noise level `sigma`.
pub fn run_density_evolution(dist: &MetDegreeDistribution, sigma: f64, opts: &DeOptions) -> Result<DeRun> {
    let engine = Engine::new(opts)?;
    evolve(&engine, dist, &[], sigma, opts)
}

fn evolve(
    e: &Engine,
    dist: &MetDegreeDistribution,
    adapt: &[ClassAdaptation],
    sigma: f64,
    opts: &DeOptions,
) -> Result<DeRun> {
    dist.validate()?;
    if !adapt.is_empty() && adapt.len() != dist.variables.len() {
        return Err(PostprocError::InvalidParameter("one adaptation entry per variable class".into()));
    }
    if adapt.iter().any(|a| !(a.punctured >= 0.0 && a.shortened >= 0.0 && a.punctured + a.shortened <= 1.0)) {
        return Err(PostprocError::InvalidParameter("adaptation fractions must lie in [0, 1]".into()));
    }
    if !(sigma > 0.0) {
        return Err(PostprocError::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let types = dist.edge_types();
    let edge_frac = dist.edge_fractions();
    let channels: Vec<Density> = dist
        .variables
        .iter()
        .enumerate()
        .map(|(k, v)| e.adapted_channel(sigma, v.observed, adapt.get(k).copied().unwrap_or_default()))
        .collect();
    let node_total: f64 = dist.variables.iter().map(|v| v.fraction).sum();
    // check-to-variable messages start uninformative
    let mut c2v: Vec<Density> = vec![Density::delta_zero(e.h); types];
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=opts.max_iters {
        // variable side
        let mut v2c: Vec<Density> = vec![Density::zeros(e.h); types];
        let mut pe = 0.0;
        for (cls, ch) in dist.variables.iter().zip(&channels) {
            let mut base = Some(ch.clone());
            for (t, &d) in cls.degrees.iter().enumerate() {
                if d > 1 {
                    base = e.convolve_power(&c2v[t], d - 1, base);
                }
            }
            let base = base.expect("channel density present");
            for (t, &d) in cls.degrees.iter().enumerate() {
                if d == 0 {
                    continue;
                }
                let mut out = Some(base.clone());
                for (j, &dj) in cls.degrees.iter().enumerate() {
                    if j != t && dj > 0 {
                        out = Some(e.convolve(out.as_ref().expect("set"), &c2v[j]));
                    }
                }
                let out = out.expect("set");
                if t == cls.degrees.iter().position(|&x| x > 0).expect("has edges") {
                    let post = e.convolve(&out, &c2v[t]);
                    pe += cls.fraction / node_total * post.error_probability();
                }
                let w = cls.fraction * d as f64 / edge_frac[t];
                for k in 0..=e.h {
                    v2c[t].pos[k] += w * out.pos[k];
                    v2c[t].neg[k] += w * out.neg[k];
                }
            }
        }
        if pe < opts.target_error {
            return Ok(DeRun { sigma, converged: true, iterations: it, error_probability: pe });
        }
        history.push(pe);
        if history.len() > 60 {
            let old = history[history.len() - 61];
            if pe > old * (1.0 - 1e-7) {
                return Ok(DeRun { sigma, converged: false, iterations: it, error_probability: pe });
            }
        }
        // check side
        let check_frac: Vec<f64> = (0..types)
            .map(|t| dist.checks.iter().map(|c| c.fraction * c.degrees[t] as f64).sum())
            .collect();
        let mut next: Vec<Density> = vec![Density::zeros(e.h); types];
        for cls in &dist.checks {
            for (t, &d) in cls.degrees.iter().enumerate() {
                if d == 0 {
                    continue;
                }
                let mut acc = None;
                for (j, &dj) in cls.degrees.iter().enumerate() {
                    let k = if j == t { dj - 1 } else { dj };
                    if k > 0 {
                        acc = e.boxplus_power(&v2c[j], k, acc);
                    }
                }
                // a degree-one check says nothing
                let out = acc.unwrap_or_else(|| Density::delta_zero(e.h));
                let w = cls.fraction * d as f64 / check_frac[t];
                for k in 0..=e.h {
                    next[t].pos[k] += w * out.pos[k];
                    next[t].neg[k] += w * out.neg[k];
                }
            }
        }
        c2v = next;
    }
    let pe = *history.last().unwrap_or(&1.0);
    Ok(DeRun { sigma, converged: false, iterations: opts.max_iters, error_probability: pe })
}

/// `R/C(1/σ²)` with `C(s) = ½ log2(1 + s)`.
pub fn beta_from_sigma(rate: f64, sigma: f64) -> f64 {
    rate / (0.5 * (1.0 + 1.0 / (sigma * sigma)).log2())
}

/// Largest `σ` at which density evolution converges, by bisection starting
/// from the AWGN Shannon limit of the design rate.
pub fn density_evolution_threshold(dist: &MetDegreeDistribution, opts: &DeOptions) -> Result<DeThreshold> {
    adapted_threshold(dist, &[], opts)
}

/// Threshold of the ensemble with part of each class punctured or
/// shortened; `β` is quoted for the resulting effective rate.
pub fn adapted_threshold(
    dist: &MetDegreeDistribution,
    adapt: &[ClassAdaptation],
    opts: &DeOptions,
) -> Result<DeThreshold> {
    let engine = Engine::new(opts)?;
    let rate = effective_ensemble_rate(dist, adapt);
    if !(rate > 0.0 && rate < 1.0) {
        return Err(PostprocError::InvalidParameter(format!("effective rate {rate} outside (0, 1)")));
    }
    let shannon = 1.0 / (2f64.powf(2.0 * rate) - 1.0).sqrt();
    let mut probes = 0;
    let mut hi = shannon;
    let mut lo = 0.8 * shannon;
    loop {
        probes += 1;
        if evolve(&engine, dist, adapt, lo, opts)?.converged {
            break;
        }
        hi = lo;
        lo *= 0.8;
        if lo < 1e-3 * shannon {
            return Err(PostprocError::DensityEvolution(format!("{} does not converge at any probed sigma", dist.name)));
        }
    }
    while (hi - lo) / lo > opts.sigma_tol {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        if evolve(&engine, dist, adapt, mid, opts)?.converged {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DeThreshold { sigma: lo, beta: beta_from_sigma(rate, lo), sigma_fail: hi, probes })
}

/// `(n − m − s)/(n − p − s)` per unit block length, counting originally
/// unobserved classes as punctured.
pub fn effective_ensemble_rate(dist: &MetDegreeDistribution, adapt: &[ClassAdaptation]) -> f64 {
    let (mut p, mut s) = (0.0, 0.0);
    for (k, v) in dist.variables.iter().enumerate() {
        let a = adapt.get(k).copied().unwrap_or_default();
        if v.observed {
            p += v.fraction * a.punctured;
        } else {
            p += v.fraction * (1.0 - a.shortened);
        }
        s += v.fraction * a.shortened;
    }
    (dist.design_rate() - s) / (1.0 - p - s)
}
