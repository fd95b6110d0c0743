//! Sparse parity-check matrices built from a multi-edge-type ensemble.
//!
//! Construction is a lightweight progressive edge growth: multi-edge
//! variable nodes are connected one edge at a time to a free socket of the
//! right edge type, preferring checks that close no 4-cycle. Degree-one
//! variable nodes cannot lie on a cycle and fill the remaining sockets at
//! random.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{PostprocError, Result};
use crate::met::MetDegreeDistribution;

/// Random candidate sockets examined per edge before relaxing the
/// 4-cycle condition.
const CANDIDATES_PER_EDGE: usize = 64;
const CONSTRUCTION_ATTEMPTS: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    pub name: String,
    pub seed: u64,
    pub n: usize,
    /// Compressed rows: `cols[row_ptr[c]..row_ptr[c + 1]]` are the variables
    /// of check `c`.
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    /// Edge type (1-based) of each entry of `cols`.
    pub edge_type: Vec<u8>,
    /// Ensemble class of each variable node.
    pub var_class: Vec<u16>,
    /// Ensemble class of each check node.
    pub check_class: Vec<u16>,
    pub punctured: Vec<u32>,
    pub shortened: Vec<u32>,
}

/// Realized node counts per `(class, degree vector)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeHistogram {
    pub variables: Vec<(Vec<u32>, usize)>,
    pub checks: Vec<(Vec<u32>, usize)>,
}

impl LdpcCode {
    pub fn m(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn edges(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, c: usize) -> &[u32] {
        &self.cols[self.row_ptr[c]..self.row_ptr[c + 1]]
    }

    /// `(n − m)/n` of the mother code.
    pub fn rate(&self) -> f64 {
        (self.n - self.m()) as f64 / self.n as f64
    }

    /// Information over transmitted bits once puncturing and shortening are
    /// applied: `(n − m − s)/(n − p − s)`.
    pub fn effective_rate(&self) -> f64 {
        let (p, s) = (self.punctured.len(), self.shortened.len());
        (self.n - self.m() - s) as f64 / (self.n - p - s) as f64
    }

    /// `H·x` over GF(2).
    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        (0..self.m()).map(|c| self.row(c).iter().fold(0u8, |a, &v| a ^ (bits[v as usize] & 1))).collect()
    }

    pub fn degree_histogram(&self) -> DegreeHistogram {
        let types = self.edge_type.iter().copied().max().unwrap_or(0) as usize;
        let mut var_deg = vec![vec![0u32; types]; self.n];
        let mut chk_deg = vec![vec![0u32; types]; self.m()];
        for c in 0..self.m() {
            for e in self.row_ptr[c]..self.row_ptr[c + 1] {
                let t = self.edge_type[e] as usize - 1;
                var_deg[self.cols[e] as usize][t] += 1;
                chk_deg[c][t] += 1;
            }
        }
        let tally = |v: Vec<Vec<u32>>| {
            let mut m: std::collections::BTreeMap<Vec<u32>, usize> = Default::default();
            for d in v {
                *m.entry(d).or_default() += 1;
            }
            m.into_iter().collect::<Vec<_>>()
        };
        DegreeHistogram { variables: tally(var_deg), checks: tally(chk_deg) }
    }

    /// Number of variable pairs sharing two or more checks.
    pub fn four_cycles(&self) -> usize {
        let cols_of = self.var_adjacency();
        let mut seen = vec![usize::MAX; self.n];
        let mut count = 0;
        for (v, checks) in cols_of.iter().enumerate() {
            for &c in checks {
                for &w in self.row(c as usize) {
                    let w = w as usize;
                    if w <= v {
                        continue;
                    }
                    if seen[w] == v {
                        count += 1;
                    } else {
                        seen[w] = v;
                    }
                }
            }
        }
        count
    }

    /// Checks adjacent to each variable.
    pub fn var_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n];
        for c in 0..self.m() {
            for &v in self.row(c) {
                adj[v as usize].push(c as u32);
            }
        }
        adj
    }

    /// Coordinate-list text: header lines start with `#`, then one
    /// `row col type` line per entry and `P idx` / `S idx` lines for the
    /// adaptation pattern.
    pub fn to_coo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ldpc-coo 1");
        let _ = writeln!(s, "# ensemble {}", self.name);
        let _ = writeln!(s, "# seed {}", self.seed);
        let _ = writeln!(s, "# size {} {} {}", self.n, self.m(), self.edges());
        let _ = writeln!(s, "# var_class {}", join(&self.var_class));
        let _ = writeln!(s, "# check_class {}", join(&self.check_class));
        for c in 0..self.m() {
            for e in self.row_ptr[c]..self.row_ptr[c + 1] {
                let _ = writeln!(s, "{c} {} {}", self.cols[e], self.edge_type[e]);
            }
        }
        for p in &self.punctured {
            let _ = writeln!(s, "P {p}");
        }
        for p in &self.shortened {
            let _ = writeln!(s, "S {p}");
        }
        s
    }

    pub fn from_coo(text: &str) -> Result<Self> {
        let fmt = |m: &str| PostprocError::Format(m.to_string());
        let mut name = String::new();
        let mut seed = 0;
        let mut size: Option<(usize, usize, usize)> = None;
        let mut var_class = Vec::new();
        let mut check_class = Vec::new();
        let mut entries: Vec<(usize, u32, u8)> = Vec::new();
        let (mut punctured, mut shortened) = (Vec::new(), Vec::new());
        let num = |t: Option<&str>| -> Result<usize> {
            t.ok_or_else(|| fmt("truncated line"))?.parse().map_err(|_| fmt("bad integer"))
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(h) = line.strip_prefix('#') {
                let mut it = h.split_whitespace();
                match it.next() {
                    Some("ensemble") => name = it.collect::<Vec<_>>().join(" "),
                    Some("seed") => seed = num(it.next())? as u64,
                    Some("size") => size = Some((num(it.next())?, num(it.next())?, num(it.next())?)),
                    Some("var_class") => var_class = split_list(it.next())?,
                    Some("check_class") => check_class = split_list(it.next())?,
                    _ => {}
                }
                continue;
            }
            let mut it = line.split_whitespace();
            match it.next() {
                Some("P") => punctured.push(num(it.next())? as u32),
                Some("S") => shortened.push(num(it.next())? as u32),
                Some(r) => {
                    let r: usize = r.parse().map_err(|_| fmt("bad row"))?;
                    entries.push((r, num(it.next())? as u32, num(it.next())? as u8));
                }
                None => {}
            }
        }
        let (n, m, nnz) = size.ok_or_else(|| fmt("missing size header"))?;
        if entries.len() != nnz || var_class.len() != n || check_class.len() != m {
            return Err(fmt("entry or class counts disagree with the header"));
        }
        if entries.iter().any(|&(r, c, _)| r >= m || c as usize >= n)
            || punctured.iter().chain(&shortened).any(|&v| v as usize >= n)
        {
            return Err(fmt("index out of range"));
        }
        entries.sort_by_key(|e| e.0);
        let mut row_ptr = vec![0; m + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..m {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            name,
            seed,
            n,
            row_ptr,
            cols: entries.iter().map(|e| e.1).collect(),
            edge_type: entries.iter().map(|e| e.2).collect(),
            var_class,
            check_class,
            punctured,
            shortened,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_coo())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_coo(&fs::read_to_string(path)?)
    }
}

fn join(v: &[u16]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn split_list(s: Option<&str>) -> Result<Vec<u16>> {
    match s {
        None => Ok(Vec::new()),
        Some(s) => s
            .split(',')
            .map(|x| x.parse().map_err(|_| PostprocError::Format("bad class list".into())))
            .collect(),
    }
}

/// Builds a code of length `n` from the ensemble. Retries with derived
/// seeds if a variable node cannot be placed without a repeated edge.
/// Adds or removes single sockets on distinct checks so each pool matches
/// the variable-side socket count.
fn absorb_mismatch(pools: &mut [Vec<u32>], want: &[usize], rng: &mut ChaCha20Rng) -> Result<()> {
    for (t, pool) in pools.iter_mut().enumerate() {
        let have = pool.len();
        if have == want[t] {
            continue;
        }
        let mut distinct: Vec<u32> = pool.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.shuffle(rng);
        let diff = have.abs_diff(want[t]);
        if diff > distinct.len() {
            return Err(PostprocError::Construction(format!(
                "edge type {}: {have} check sockets cannot absorb {} variable sockets",
                t + 1,
                want[t]
            )));
        }
        if have < want[t] {
            pool.extend_from_slice(&distinct[..diff]);
        } else {
            for c in &distinct[..diff] {
                let i = pool.iter().position(|x| x == c).expect("present");
                pool.swap_remove(i);
            }
        }
    }
    Ok(())
}

pub fn build_met_ldpc(dist: &MetDegreeDistribution, n: usize, seed: u64) -> Result<LdpcCode> {
    dist.validate()?;
    if n < 2 {
        return Err(PostprocError::InvalidParameter(format!("block length {n} too small")));
    }
    let mut last = None;
    for attempt in 0..CONSTRUCTION_ATTEMPTS {
        match try_build(dist, n, seed, attempt) {
            Ok(c) => return Ok(c),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn try_build(dist: &MetDegreeDistribution, n: usize, seed: u64, attempt: u64) -> Result<LdpcCode> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    let (var_counts, chk_counts) = dist.node_counts(n);
    let types = dist.edge_types();
    let var_class: Vec<u16> =
        var_counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat(k as u16).take(c)).collect();
    let check_class: Vec<u16> =
        chk_counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat(k as u16).take(c)).collect();
    let m = check_class.len();

    // free sockets per edge type, as check indices with multiplicity
    let mut pools: Vec<Vec<u32>> = vec![Vec::new(); types];
    for (c, &k) in check_class.iter().enumerate() {
        for (t, &d) in dist.checks[k as usize].degrees.iter().enumerate() {
            pools[t].extend(std::iter::repeat(c as u32).take(d as usize));
        }
    }
    absorb_mismatch(&mut pools, &dist.sockets_var(&var_counts), &mut rng)?;
    let mut check_vars: Vec<Vec<(u32, u8)>> = vec![Vec::new(); m];
    let mut stamp = vec![u32::MAX; n];

    let total_degree = |v: usize| dist.variables[var_class[v] as usize].degrees.iter().sum::<u32>();
    let mut multi: Vec<usize> = (0..n).filter(|&v| total_degree(v) > 1).collect();
    multi.shuffle(&mut rng);
    multi.sort_by_key(|&v| total_degree(v));

    for &v in &multi {
        let degrees = &dist.variables[var_class[v] as usize].degrees;
        let mut mine: Vec<u32> = Vec::new();
        let mut sockets: Vec<u8> =
            degrees.iter().enumerate().flat_map(|(t, &d)| std::iter::repeat(t as u8).take(d as usize)).collect();
        sockets.shuffle(&mut rng);
        for t in sockets {
            let pool = &mut pools[t as usize];
            if pool.is_empty() {
                return Err(PostprocError::Construction(format!("edge type {} ran out of sockets", t + 1)));
            }
            let clean = |c: u32, mine: &[u32], cv: &[Vec<(u32, u8)>]| {
                !mine.contains(&c) && cv[c as usize].iter().all(|&(w, _)| stamp[w as usize] != v as u32)
            };
            let mut pick = None;
            for _ in 0..CANDIDATES_PER_EDGE.min(pool.len() * 2) {
                let i = rng.gen_range(0..pool.len());
                if clean(pool[i], &mine, &check_vars) {
                    pick = Some(i);
                    break;
                }
            }
            if pick.is_none() {
                pick = pool.iter().position(|c| !mine.contains(c));
            }
            let i = pick.ok_or_else(|| {
                PostprocError::Construction(format!("variable {v} cannot avoid a repeated edge of type {}", t + 1))
            })?;
            let c = pool.swap_remove(i);
            for &(w, _) in &check_vars[c as usize] {
                stamp[w as usize] = v as u32;
            }
            check_vars[c as usize].push((v as u32, t + 1));
            mine.push(c);
        }
    }

    // degree-one variables take the leftovers
    for v in (0..n).filter(|&v| total_degree(v) == 1) {
        let t = dist.variables[var_class[v] as usize].degrees.iter().position(|&d| d == 1).expect("one socket");
        let pool = &mut pools[t];
        if pool.is_empty() {
            return Err(PostprocError::Construction(format!("edge type {} ran out of sockets", t + 1)));
        }
        let i = rng.gen_range(0..pool.len());
        let c = pool.swap_remove(i);
        check_vars[c as usize].push((v as u32, t as u8 + 1));
    }
    if pools.iter().any(|p| !p.is_empty()) {
        return Err(PostprocError::Construction("unfilled check sockets".into()));
    }

    let mut row_ptr = Vec::with_capacity(m + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut edge_type = Vec::new();
    for row in &mut check_vars {
        row.sort_unstable();
        for &(v, t) in row.iter() {
            cols.push(v);
            edge_type.push(t);
        }
        row_ptr.push(cols.len());
    }
    Ok(LdpcCode {
        name: dist.name.clone(),
        seed,
        n,
        row_ptr,
        cols,
        edge_type,
        var_class,
        check_class,
        punctured: Vec::new(),
        shortened: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::met::DESIGN_TABLE;

    #[test]
    fn rate_003_code_has_exact_rate_and_histogram() {
        let row = &DESIGN_TABLE[2];
        let d = row.distribution().unwrap();
        let code = build_met_ldpc(&d, 100_000, 7).unwrap();
        assert_eq!(code.m(), 97_000);
        assert!((code.rate() - 0.03).abs() < 1e-12);
        let (vc, cc) = d.node_counts(100_000);
        let h = code.degree_histogram();
        for (cls, &count) in d.variables.iter().zip(&vc) {
            let got = h.variables.iter().find(|(deg, _)| deg == &cls.degrees).map_or(0, |x| x.1);
            assert_eq!(got, count, "{:?}", cls.degrees);
        }
        for (cls, &count) in d.checks.iter().zip(&cc) {
            let got = h.checks.iter().find(|(deg, _)| deg == &cls.degrees).map_or(0, |x| x.1);
            assert_eq!(got, count, "{:?}", cls.degrees);
        }
        assert_eq!(code.four_cycles(), 0);
    }

    #[test]
    fn construction_is_deterministic_per_seed() {
        let d = DESIGN_TABLE[0].distribution().unwrap();
        let a = build_met_ldpc(&d, 2000, 3).unwrap();
        let b = build_met_ldpc(&d, 2000, 3).unwrap();
        let c = build_met_ldpc(&d, 2000, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.cols, c.cols);
    }

    #[test]
    fn coo_round_trip() {
        let d = DESIGN_TABLE[1].distribution().unwrap();
        let mut code = build_met_ldpc(&d, 1000, 1).unwrap();
        code.punctured = vec![3, 9];
        code.shortened = vec![17];
        let back = LdpcCode::from_coo(&code.to_coo()).unwrap();
        assert_eq!(back, code);
        assert!(LdpcCode::from_coo("# size 2 1 1\n0 5 1\n").is_err());
    }

    #[test]
    fn zero_word_satisfies_all_checks() {
        let d = DESIGN_TABLE[0].distribution().unwrap();
        let code = build_met_ldpc(&d, 1000, 2).unwrap();
        assert!(code.syndrome(&vec![0; 1000]).iter().all(|&s| s == 0));
        let mut x = vec![0u8; 1000];
        x[code.row(0)[0] as usize] = 1;
        assert_eq!(code.syndrome(&x)[0], 1);
    }
}
