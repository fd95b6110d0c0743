//! Multi-edge-type degree distributions.
//!
//! Notation: `ν(r, x) = Σ ν_{b,d} r^b x^d` and `u(x) = Σ u_d x^d`, with
//! coefficients normalized to the block length. `r_1` marks a node observed
//! through the channel, `r_0` a punctured one, and `x_j^k` gives `k` sockets
//! of edge type `j`. For example `0.0408r_1x_1^2x_2^{28}` is 4.08% of the
//! variable nodes, observed, each with two type-1 and 28 type-2 edges;
//! `0.1992x_2^2x_3` is 19.92% (of `n`) check nodes with two type-2 edges
//! and one type-3 edge.

use serde::{Deserialize, Serialize};

use crate::error::{PostprocError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableClass {
    pub fraction: f64,
    pub observed: bool,
    /// Sockets per edge type (index 0 is type 1).
    pub degrees: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckClass {
    pub fraction: f64,
    pub degrees: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetDegreeDistribution {
    pub name: String,
    pub variables: Vec<VariableClass>,
    pub checks: Vec<CheckClass>,
}

/// One row of the reference design table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub rate: f64,
    pub variable_poly: &'static str,
    pub check_poly: &'static str,
    pub sigma_de: f64,
    pub beta_sigma: f64,
    pub snr: f64,
    pub beta_adaptive: f64,
    pub distance_km: f64,
}

pub const DESIGN_TABLE: [TableRow; 3] = [
    TableRow {
        rate: 0.07,
        variable_poly: "v = 0.0408r_1x_1^2x_2^{28} + 0.048r_1x_1^3x_2^{29} + 0.9112r_1x_3",
        check_poly: "u = 0.0188x_1^{12} + 0.1992x_2^2x_3 + 0.712x_2^3x_3",
        sigma_de: 3.074,
        beta_sigma: 0.9647,
        snr: 0.119,
        beta_adaptive: 0.9546,
        distance_km: 5.0,
    },
    TableRow {
        rate: 0.06,
        variable_poly: "v = 0.0522r_1x_1^2x_2^{37} + 0.0291r_1x_1^3x_2^{21} + 0.9187r_1x_3",
        check_poly: "u = 0.0213x_1^9 + 0.2136x_2^2x_3 + 0.7051x_2^3x_3",
        sigma_de: 3.341,
        beta_sigma: 0.9694,
        snr: 0.094,
        beta_adaptive: 0.95,
        distance_km: 10.0,
    },
    TableRow {
        rate: 0.03,
        variable_poly: "v = 0.0249r_1x_1^2x_2^{50} + 0.0219r_1x_1^3x_2^{50} + 0.9532r_1x_3",
        check_poly: "u = 0.0105x_1^5 + 0.0063x_1^{10} + 0.5196x_2^2x_3 + 0.4336x_2^3x_3",
        sigma_de: 4.789,
        beta_sigma: 0.9746,
        snr: 0.047,
        beta_adaptive: 0.951,
        distance_km: 25.0,
    },
];

/// Table row for a design rate (0.07, 0.06 or 0.03).
pub fn table_row(rate: f64) -> Result<&'static TableRow> {
    DESIGN_TABLE
        .iter()
        .find(|r| (r.rate - rate).abs() < 1e-9)
        .ok_or_else(|| PostprocError::InvalidParameter(format!("no tabulated ensemble of rate {rate}")))
}

impl TableRow {
    pub fn distribution(&self) -> Result<MetDegreeDistribution> {
        MetDegreeDistribution::parse(&format!("rate-{}", self.rate), self.variable_poly, self.check_poly)
    }
}

/// `(coefficient, r-index, [(edge type, exponent)])` of one monomial.
type Monomial = (f64, Option<u32>, Vec<(usize, u32)>);

fn parse_monomial(term: &str) -> Result<Monomial> {
    let s: String = term.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
    let coeff_end = s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len());
    let coeff = if coeff_end == 0 {
        1.0
    } else {
        s[..coeff_end].parse::<f64>().map_err(|_| PostprocError::Parse(format!("bad coefficient in '{term}'")))?
    };
    let mut rest = &s[coeff_end..];
    let mut r = None;
    let mut factors: Vec<(usize, u32)> = Vec::new();
    let read_index = |t: &str| -> Result<(u32, usize)> {
        let t2 = t.strip_prefix('_').unwrap_or(t);
        let skip = t.len() - t2.len();
        let (t3, braced) = match t2.strip_prefix('{') {
            Some(x) => (x, 1),
            None => (t2, 0),
        };
        let digits: String = t3.chars().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            return Err(PostprocError::Parse(format!("missing index in '{term}'")));
        }
        let mut used = skip + braced + digits.len();
        if braced == 1 {
            if !t3[digits.len()..].starts_with('}') {
                return Err(PostprocError::Parse(format!("unclosed brace in '{term}'")));
            }
            used += 1;
        }
        Ok((digits.parse().expect("digits"), used))
    };
    while !rest.is_empty() {
        let head = rest.chars().next().expect("non-empty");
        let (idx, used) = read_index(&rest[1..])?;
        rest = &rest[1 + used..];
        let mut exp = 1;
        if let Some(after) = rest.strip_prefix('^') {
            let (e, used) = read_index(after)?;
            exp = e;
            rest = &after[used..];
        }
        match head {
            'r' => {
                if r.is_some() || exp != 1 {
                    return Err(PostprocError::Parse(format!("repeated or raised r in '{term}'")));
                }
                r = Some(idx);
            }
            'x' => {
                if idx == 0 {
                    return Err(PostprocError::Parse(format!("edge types start at 1 in '{term}'")));
                }
                factors.push((idx as usize, exp));
            }
            _ => return Err(PostprocError::Parse(format!("unexpected '{head}' in '{term}'"))),
        }
    }
    Ok((coeff, r, factors))
}

fn parse_poly(text: &str, expect: char) -> Result<Vec<Monomial>> {
    let body = match text.split_once('=') {
        Some((lhs, rhs)) => {
            let l = lhs.trim();
            if !l.starts_with(expect) {
                return Err(PostprocError::Parse(format!("expected '{expect} = ...', got '{l} = ...'")));
            }
            rhs
        }
        None => text,
    };
    let terms: Vec<Monomial> = body
        .split('+')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_monomial)
        .collect::<Result<_>>()?;
    if terms.is_empty() {
        return Err(PostprocError::Parse("empty polynomial".into()));
    }
    Ok(terms)
}

fn degree_vector(factors: &[(usize, u32)], n_types: usize) -> Vec<u32> {
    let mut d = vec![0; n_types];
    for &(t, e) in factors {
        d[t - 1] += e;
    }
    d
}

impl MetDegreeDistribution {
    /// Parses the variable and check polynomials and validates the result.
    pub fn parse(name: &str, variable_poly: &str, check_poly: &str) -> Result<Self> {
        let v = parse_poly(variable_poly, 'v')?;
        let u = parse_poly(check_poly, 'u')?;
        let n_types = v.iter().chain(&u).flat_map(|m| m.2.iter().map(|f| f.0)).max().unwrap_or(0);
        let variables = v
            .iter()
            .map(|(c, r, f)| {
                let observed = match r {
                    None | Some(1) => true,
                    Some(0) => false,
                    Some(k) => return Err(PostprocError::Parse(format!("channel index r_{k} not supported"))),
                };
                Ok(VariableClass { fraction: *c, observed, degrees: degree_vector(f, n_types) })
            })
            .collect::<Result<_>>()?;
        let checks = u
            .iter()
            .map(|(c, r, f)| {
                if r.is_some() {
                    return Err(PostprocError::Parse("check polynomial cannot carry r".into()));
                }
                Ok(CheckClass { fraction: *c, degrees: degree_vector(f, n_types) })
            })
            .collect::<Result<_>>()?;
        let d = Self { name: name.to_string(), variables, checks };
        d.validate()?;
        Ok(d)
    }

    pub fn edge_types(&self) -> usize {
        self.variables.first().map_or(0, |v| v.degrees.len())
    }

    /// Edges per block-length unit for each type, from the variable side.
    pub fn edge_fractions(&self) -> Vec<f64> {
        (0..self.edge_types())
            .map(|t| self.variables.iter().map(|v| v.fraction * v.degrees[t] as f64).sum())
            .collect()
    }

    fn check_edge_fractions(&self) -> Vec<f64> {
        (0..self.edge_types())
            .map(|t| self.checks.iter().map(|c| c.fraction * c.degrees[t] as f64).sum())
            .collect()
    }

    /// `Σν − Σu`, the design rate relative to the block length.
    pub fn design_rate(&self) -> f64 {
        self.variables.iter().map(|v| v.fraction).sum::<f64>() - self.checks.iter().map(|c| c.fraction).sum::<f64>()
    }

    /// Rate relative to the transmitted (observed) nodes.
    pub fn transmitted_rate(&self) -> f64 {
        let observed: f64 = self.variables.iter().filter(|v| v.observed).map(|v| v.fraction).sum();
        self.design_rate() / observed
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PostprocError::Ensemble(m));
        if self.variables.is_empty() || self.checks.is_empty() {
            return bad("empty node set".into());
        }
        let t = self.edge_types();
        if self.variables.iter().any(|v| v.degrees.len() != t) || self.checks.iter().any(|c| c.degrees.len() != t) {
            return bad("inconsistent number of edge types".into());
        }
        if self.variables.iter().any(|v| !(v.fraction >= 0.0)) || self.checks.iter().any(|c| !(c.fraction >= 0.0)) {
            return bad("negative coefficient".into());
        }
        if self.variables.iter().any(|v| v.degrees.iter().all(|&d| d == 0)) {
            return bad("variable class without edges".into());
        }
        let total: f64 = self.variables.iter().map(|v| v.fraction).sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("variable fractions sum to {total}"));
        }
        for (k, (a, b)) in self.edge_fractions().iter().zip(self.check_edge_fractions()).enumerate() {
            if (a - b).abs() > 1e-6 * a.max(1.0) {
                return bad(format!("edge type {} unbalanced: {a} variable vs {b} check sockets", k + 1));
            }
        }
        if !(self.design_rate() > 0.0) {
            return bad(format!("non-positive design rate {}", self.design_rate()));
        }
        Ok(())
    }

    /// Node counts per class at block length `n`: exact variable total,
    /// check classes rebalanced so sockets match per type where integer
    /// rounding allows. Returns `(variable counts, check counts)`; any
    /// leftover mismatch is small and absorbed during construction.
    pub fn node_counts(&self, n: usize) -> (Vec<usize>, Vec<usize>) {
        let vars = apportion(&self.variables.iter().map(|v| v.fraction).collect::<Vec<_>>(), n);
        let target_checks = (self.checks.iter().map(|c| c.fraction).sum::<f64>() * n as f64).round() as usize;
        let mut checks = apportion(
            &self.checks.iter().map(|c| c.fraction).collect::<Vec<_>>(),
            target_checks,
        );
        let var_sockets = self.sockets_var(&vars);
        for _ in 0..10 * self.checks.len() {
            if self.sockets_chk(&checks) == var_sockets || !self.rebalance(&var_sockets, &mut checks) {
                break;
            }
        }
        (vars, checks)
    }

    pub(crate) fn sockets_var(&self, counts: &[usize]) -> Vec<usize> {
        (0..self.edge_types())
            .map(|t| self.variables.iter().zip(counts).map(|(v, &c)| v.degrees[t] as usize * c).sum())
            .collect()
    }

    pub(crate) fn sockets_chk(&self, counts: &[usize]) -> Vec<usize> {
        (0..self.edge_types())
            .map(|t| self.checks.iter().zip(counts).map(|(v, &c)| v.degrees[t] as usize * c).sum())
            .collect()
    }

    /// Greedy single-node moves that reduce the total socket mismatch,
    /// including adding or removing one check node.
    fn rebalance(&self, target: &[usize], checks: &mut [usize]) -> bool {
        let mismatch = |c: &[usize]| -> i64 {
            self.sockets_chk(c).iter().zip(target).map(|(&a, &b)| (a as i64 - b as i64).abs()).sum()
        };
        let current = mismatch(checks);
        let mut best: Option<(i64, Vec<usize>)> = None;
        let k = checks.len();
        let mut consider = |cand: Vec<usize>| {
            let m = mismatch(&cand);
            if m < current && best.as_ref().map_or(true, |b| m < b.0) {
                best = Some((m, cand));
            }
        };
        for i in 0..k {
            let mut c = checks.to_vec();
            c[i] += 1;
            consider(c.clone());
            if checks[i] > 0 {
                let mut c = checks.to_vec();
                c[i] -= 1;
                consider(c);
            }
            for j in 0..k {
                if i != j && checks[j] > 0 {
                    let mut c = checks.to_vec();
                    c[i] += 1;
                    c[j] -= 1;
                    consider(c);
                }
            }
        }
        match best {
            Some((_, c)) => {
                checks.copy_from_slice(&c);
                true
            }
            None => false,
        }
    }
}

/// Largest-remainder rounding of `fractions·total` to integers summing to
/// `round(Σ fractions · total)`.
fn apportion(fractions: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| f / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_ensembles_parse_and_balance() {
        for row in &DESIGN_TABLE {
            let d = row.distribution().unwrap();
            assert_eq!(d.edge_types(), 3);
            assert!((d.design_rate() - row.rate).abs() < 1e-9, "{}", d.design_rate());
            assert!(d.variables.iter().all(|v| v.observed));
        }
        let d = DESIGN_TABLE[0].distribution().unwrap();
        assert_eq!(d.variables[0].degrees, vec![2, 28, 0]);
        assert_eq!(d.variables[2].degrees, vec![0, 0, 1]);
        assert_eq!(d.checks[0].degrees, vec![12, 0, 0]);
        assert_eq!(d.checks[2].degrees, vec![0, 3, 1]);
        let e = d.edge_fractions();
        assert!((e[0] - 0.2256).abs() < 1e-12 && (e[1] - 2.5344).abs() < 1e-12 && (e[2] - 0.9112).abs() < 1e-12);
    }

    #[test]
    fn alternative_spellings_parse_identically() {
        let a = MetDegreeDistribution::parse("a", "v = 0.5r_1x_1^{2} + 0.5x_2", "u = 0.25x_1^4 + 0.25x_2^2").unwrap();
        let b = MetDegreeDistribution::parse("a", "0.5 r1 x1^2 + 0.5 r_1 x2", "0.25x1^4+0.25*x_2^2").unwrap();
        assert_eq!(a, b);
        assert!((a.design_rate() - 0.5).abs() < 1e-12);
        let p = MetDegreeDistribution::parse("p", "v = 0.5r_0x_1^{2} + 0.5r_1x_1^2", "u = 0.5x_1^4").unwrap();
        assert!(!p.variables[0].observed);
        assert!((p.transmitted_rate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_or_unbalanced_input_is_rejected() {
        assert!(MetDegreeDistribution::parse("x", "v = 1.0r_1y_1^2", "u = 0.5x_1^4").is_err());
        assert!(MetDegreeDistribution::parse("x", "v = 1.0r_1x_1^{2", "u = 0.5x_1^4").is_err());
        assert!(matches!(
            MetDegreeDistribution::parse("x", "v = 1.0r_1x_1^3", "u = 0.5x_1^4"),
            Err(PostprocError::Ensemble(_))
        ));
        assert!(MetDegreeDistribution::parse("x", "v = 0.9r_1x_1^2", "u = 0.45x_1^4").is_err());
    }

    #[test]
    fn node_counts_balance_sockets() {
        for row in &DESIGN_TABLE {
            let d = row.distribution().unwrap();
            for &n in &[1000usize, 12_345, 100_000] {
                let (v, c) = d.node_counts(n);
                assert_eq!(v.iter().sum::<usize>(), n);
                for (a, b) in d.sockets_var(&v).iter().zip(d.sockets_chk(&c)) {
                    assert!(a.abs_diff(b) <= 12, "{a} vs {b}");
                }
                for (cls, &k) in d.variables.iter().zip(&v) {
                    assert!((k as f64 / n as f64 - cls.fraction).abs() < 0.01);
                }
            }
        }
    }
}
