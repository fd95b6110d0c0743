//! First-order solver for block-diagonal complex Hermitian SDPs
//!
//! ```text
//! minimize   Re tr(C X)
//! subject to Re tr(A_i X) = b_i,   X = diag(X_1, …, X_p) ⪰ 0
//! ```
//!
//! The method is the alternating-direction augmented Lagrangian scheme on
//! the dual (`max bᵀy  s.t.  C − A*(y) = S ⪰ 0`): a closed-form `y` update,
//! a PSD projection for `S`, and a multiplier step for `X`. Constraints are
//! orthonormalised up front, which makes `AA* = I` and exposes redundant or
//! inconsistent rows before iterating.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

use crate::fock::CMatrix;
use ratecalc_lca::error::{Error, Result};

/// A linear equality `Re tr(A X) = rhs` over the block variable.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    /// One Hermitian matrix per block.
    pub blocks: Vec<CMatrix>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct BlockSdp {
    pub block_sizes: Vec<usize>,
    pub objective: Vec<CMatrix>,
    pub constraints: Vec<Constraint>,
    /// Known value of `tr X` implied by the constraints, used to turn an
    /// approximate dual point into a certified lower bound.
    pub trace_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_penalty: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 100_000, initial_penalty: 1.0 }
    }
}

/// Iterate state that can seed a solve of a problem with the same matrices
/// and different right-hand sides.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub x: Vec<CMatrix>,
    pub s: Vec<CMatrix>,
    pub y: Vec<f64>,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub x: Vec<CMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `bᵀy + min(0, λ_min(C − A*y))·tr X`, valid for every feasible X.
    pub lower_bound: Option<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Most negative eigenvalue of the returned X (zero by construction,
    /// kept as a certificate).
    pub min_eigenvalue: f64,
    pub warm: WarmStart,
}

struct Orthonormal {
    rows: Vec<Vec<CMatrix>>,
    rhs: Vec<f64>,
}

fn inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u.conj() * v).re).sum::<f64>())
        .sum()
}

fn norm(a: &[CMatrix]) -> f64 {
    inner(a, a).sqrt()
}

fn axpy(y: &mut [CMatrix], alpha: f64, x: &[CMatrix]) {
    for (yb, xb) in y.iter_mut().zip(x) {
        *yb += xb * Complex64::new(alpha, 0.0);
    }
}

fn orthonormalize(constraints: &[Constraint]) -> Result<Orthonormal> {
    let mut rows: Vec<Vec<CMatrix>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for c in constraints {
        let scale = norm(&c.blocks);
        if scale == 0.0 {
            if c.rhs.abs() > 1e-10 {
                return Err(Error::Infeasible(format!("constraint '{}' is 0 = {}", c.label, c.rhs)));
            }
            continue;
        }
        let mut v = c.blocks.clone();
        let mut b = c.rhs;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for (q, qb) in rows.iter().zip(&rhs) {
                let proj = inner(q, &v);
                axpy(&mut v, -proj, q);
                b -= proj * qb;
            }
        }
        let n = norm(&v);
        if n < 1e-9 * scale {
            if b.abs() > 1e-8 * (1.0 + c.rhs.abs()) {
                return Err(Error::Infeasible(format!(
                    "constraint '{}' is dependent on earlier rows but inconsistent (residual {b:e})",
                    c.label
                )));
            }
            continue;
        }
        for blk in v.iter_mut() {
            *blk /= Complex64::new(n, 0.0);
        }
        rows.push(v);
        rhs.push(b / n);
    }
    Ok(Orthonormal { rows, rhs })
}

impl BlockSdp {
    fn check_shapes(&self) -> Result<()> {
        let ok = |m: &[CMatrix]| {
            m.len() == self.block_sizes.len()
                && m.iter().zip(&self.block_sizes).all(|(b, &s)| b.nrows() == s && b.ncols() == s)
        };
        if !ok(&self.objective) || !self.constraints.iter().all(|c| ok(&c.blocks)) {
            return Err(Error::InvalidParameter("SDP block shapes are inconsistent".into()));
        }
        Ok(())
    }

    fn apply_adjoint(rows: &[Vec<CMatrix>], y: &[f64], sizes: &[usize]) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = sizes.iter().map(|&s| CMatrix::zeros(s, s)).collect();
        for (row, &yi) in rows.iter().zip(y) {
            axpy(&mut out, yi, row);
        }
        out
    }

    pub fn solve(&self, options: &SolverOptions, warm: Option<&WarmStart>) -> Result<SolverOutcome> {
        self.check_shapes()?;
        if !(options.tol > 0.0) || options.max_iter == 0 {
            return Err(Error::InvalidParameter("solver tolerance and iteration cap must be positive".into()));
        }
        let ortho = orthonormalize(&self.constraints)?;
        let m = ortho.rows.len();
        let sizes = &self.block_sizes;
        let c = &self.objective;
        let b = &ortho.rhs;
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c_norm = norm(c);
        let a_op = |mat: &[CMatrix]| -> Vec<f64> { ortho.rows.iter().map(|r| inner(r, mat)).collect() };

        // The iteration is a fixed-point map on V = S − μX: X and S are the
        // negative and positive parts of V, so one eigendecomposition per
        // block recovers both.
        let mut mu = options.initial_penalty;
        let mut v: Vec<CMatrix> = match warm {
            Some(w) if w.y.len() == m && w.x.len() == sizes.len() => {
                mu = w.penalty;
                w.s.iter().zip(&w.x).map(|(s, x)| s - x * Complex64::new(mu, 0.0)).collect()
            }
            _ => sizes.iter().map(|&s| CMatrix::zeros(s, s)).collect(),
        };

        let mut accel = Anderson::new(ANDERSON_MEMORY);
        // (v, F(v), ‖F(v) − v‖) of the last plain step, kept for the safeguard
        let mut fallback: Option<(Vec<CMatrix>, f64)> = None;
        let mut iterations = 0;
        let mut state;
        loop {
            iterations += 1;
            state = step(&v, mu, c, b, &ortho.rows, sizes, &a_op);
            let res = state.fixed_point_residual;
            if let Some((f_prev, res_prev)) = fallback.take() {
                if res > ANDERSON_SAFEGUARD * res_prev {
                    // extrapolated point was worse: fall back to the plain step
                    accel.reset();
                    v = f_prev;
                    continue;
                }
            }
            state.residuals(b, b_norm, c, c_norm, &a_op);
            if std::env::var_os("SDP_TRACE").is_some() && iterations % 200 == 0 {
                eprintln!(
                    "{iterations} mu={mu:.3e} pinf={:.2e} dinf={:.2e} gap={:.2e} p={:.9} d={:.9}",
                    state.pinf, state.dinf, state.gap, state.pobj, state.dobj
                );
            }
            if state.pinf < options.tol && state.dinf < options.tol && state.gap < options.tol {
                break;
            }
            if iterations >= options.max_iter {
                return Err(Error::NotConverged { iterations, residual: state.pinf.max(state.dinf).max(state.gap) });
            }
            if iterations % PENALTY_INTERVAL == 0 {
                let new_mu = if state.pinf > PENALTY_RATIO * state.dinf {
                    (mu * PENALTY_STEP).min(1e6)
                } else if state.dinf > PENALTY_RATIO * state.pinf {
                    (mu / PENALTY_STEP).max(1e-6)
                } else {
                    mu
                };
                if new_mu != mu {
                    mu = new_mu;
                    accel.reset();
                    v = state.s.iter().zip(&state.x).map(|(s, x)| s - x * Complex64::new(mu, 0.0)).collect();
                    continue;
                }
            }
            let next = accel.extrapolate(&v, &state.f);
            match next {
                Some(vacc) => {
                    fallback = Some((state.f.clone(), res));
                    v = vacc;
                }
                None => v = state.f.clone(),
            }
        }

        // certified lower bound from the dual point
        let aty = Self::apply_adjoint(&ortho.rows, &state.y, sizes);
        let mut min_slack = f64::INFINITY;
        let mut min_x = f64::INFINITY;
        for blk in 0..sizes.len() {
            let slack = &c[blk] - &aty[blk];
            let ev = SymmetricEigen::new(slack).eigenvalues;
            min_slack = ev.iter().cloned().fold(min_slack, f64::min);
            let ev = SymmetricEigen::new(state.x[blk].clone()).eigenvalues;
            min_x = ev.iter().cloned().fold(min_x, f64::min);
        }
        let lower_bound = self.trace_bound.map(|t| state.dobj + min_slack.min(0.0) * t);

        Ok(SolverOutcome {
            primal_objective: state.pobj,
            dual_objective: state.dobj,
            lower_bound,
            primal_residual: state.pinf,
            dual_residual: state.dinf,
            gap: state.gap,
            iterations,
            min_eigenvalue: min_x,
            warm: WarmStart { x: state.x.clone(), s: state.s, y: state.y, penalty: mu },
            x: state.x,
        })
    }
}

const ANDERSON_MEMORY: usize = 8;
const ANDERSON_SAFEGUARD: f64 = 2.0;
const PENALTY_INTERVAL: usize = 50;
const PENALTY_RATIO: f64 = 5.0;
const PENALTY_STEP: f64 = 2.0;

struct StepState {
    x: Vec<CMatrix>,
    s: Vec<CMatrix>,
    y: Vec<f64>,
    /// Image of the map, `C − A*y − μX`.
    f: Vec<CMatrix>,
    fixed_point_residual: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn step(
    v: &[CMatrix],
    mu: f64,
    c: &[CMatrix],
    b: &[f64],
    rows: &[Vec<CMatrix>],
    sizes: &[usize],
    a_op: &dyn Fn(&[CMatrix]) -> Vec<f64>,
) -> StepState {
    let mut x = Vec::with_capacity(v.len());
    let mut s = Vec::with_capacity(v.len());
    for (blk, &size) in v.iter().zip(sizes) {
        let eig = SymmetricEigen::new(blk.clone());
        let q = &eig.eigenvectors;
        let mut pos = CMatrix::zeros(size, size);
        let mut neg = CMatrix::zeros(size, size);
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            let col = q.column(k);
            let outer = &col * col.adjoint();
            if lam > 0.0 {
                pos += outer * Complex64::new(lam, 0.0);
            } else {
                neg += outer * Complex64::new(-lam / mu, 0.0);
            }
        }
        s.push(pos);
        x.push(neg);
    }
    // y = μ(b − A X) + A(C − S)
    let ax = a_op(&x);
    let mut c_minus_s = c.to_vec();
    axpy(&mut c_minus_s, -1.0, &s);
    let acs = a_op(&c_minus_s);
    let y: Vec<f64> = (0..b.len()).map(|i| mu * (b[i] - ax[i]) + acs[i]).collect();
    let aty = BlockSdp::apply_adjoint(rows, &y, sizes);
    let f: Vec<CMatrix> = (0..sizes.len())
        .map(|blk| &c[blk] - &aty[blk] - &x[blk] * Complex64::new(mu, 0.0))
        .collect();
    let mut diff = f.clone();
    axpy(&mut diff, -1.0, v);
    let fixed_point_residual = norm(&diff);
    StepState { x, s, y, f, fixed_point_residual, pinf: 0.0, dinf: 0.0, gap: 0.0, pobj: 0.0, dobj: 0.0 }
}

impl StepState {
    fn residuals(&mut self, b: &[f64], b_norm: f64, c: &[CMatrix], c_norm: f64, a_op: &dyn Fn(&[CMatrix]) -> Vec<f64>) {
        let ax = a_op(&self.x);
        self.pinf = ax.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() / (1.0 + b_norm);
        // C − A*y − S equals F(v) − v
        self.dinf = self.fixed_point_residual / (1.0 + c_norm);
        self.pobj = inner(c, &self.x);
        self.dobj = self.y.iter().zip(b).map(|(u, v)| u * v).sum();
        self.gap = (self.pobj - self.dobj).abs() / (1.0 + self.pobj.abs() + self.dobj.abs());
    }
}

/// Type-II Anderson acceleration over the flattened real coordinates of
/// the block variable.
struct Anderson {
    memory: usize,
    prev: Option<(Vec<f64>, Vec<f64>)>, // (g, f) of the previous point
    dg: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
}

fn flatten(m: &[CMatrix]) -> Vec<f64> {
    let mut out = Vec::new();
    for blk in m {
        for z in blk.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

fn unflatten(v: &[f64], like: &[CMatrix]) -> Vec<CMatrix> {
    let mut it = v.chunks_exact(2);
    like.iter()
        .map(|blk| {
            let mut out = CMatrix::zeros(blk.nrows(), blk.ncols());
            for z in out.iter_mut() {
                let p = it.next().expect("length matches");
                *z = Complex64::new(p[0], p[1]);
            }
            // re-symmetrise against round-off in the extrapolation
            (&out + out.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect()
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self { memory, prev: None, dg: Vec::new(), df: Vec::new() }
    }

    fn reset(&mut self) {
        self.prev = None;
        self.dg.clear();
        self.df.clear();
    }

    /// Returns the extrapolated next iterate, or `None` to take the plain
    /// step `F(v)`.
    fn extrapolate(&mut self, v: &[CMatrix], f: &[CMatrix]) -> Option<Vec<CMatrix>> {
        let fv = flatten(f);
        let g: Vec<f64> = fv.iter().zip(flatten(v)).map(|(a, b)| a - b).collect();
        if let Some((g_prev, f_prev)) = self.prev.take() {
            self.dg.push(g.iter().zip(&g_prev).map(|(a, b)| a - b).collect());
            self.df.push(fv.iter().zip(&f_prev).map(|(a, b)| a - b).collect());
            if self.dg.len() > self.memory {
                self.dg.remove(0);
                self.df.remove(0);
            }
        }
        self.prev = Some((g.clone(), fv.clone()));
        let k = self.dg.len();
        if k == 0 {
            return None;
        }
        // γ = argmin ‖g − ΔG γ‖ via regularised normal equations
        let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
        let mut rhs = nalgebra::DVector::<f64>::zeros(k);
        for i in 0..k {
            for j in 0..=i {
                let d: f64 = self.dg[i].iter().zip(&self.dg[j]).map(|(a, b)| a * b).sum();
                gram[(i, j)] = d;
                gram[(j, i)] = d;
            }
            rhs[i] = self.dg[i].iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        let scale = (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        if !(scale > 0.0) {
            return None;
        }
        for i in 0..k {
            gram[(i, i)] += 1e-10 * scale;
        }
        let gamma = gram.cholesky()?.solve(&rhs);
        if gamma.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let mut out = fv;
        for (i, col) in self.df.iter().enumerate() {
            for (o, d) in out.iter_mut().zip(col) {
                *o -= gamma[i] * d;
            }
        }
        Some(unflatten(&out, f))
    }
}
