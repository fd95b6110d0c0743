//! Von Neumann entropy of thermal modes and symplectic spectra of two-mode
//! Gaussian covariance matrices.

use crate::error::{Error, Result};

/// Eigenvalues below `1 - SYMPLECTIC_TOL` signal unphysical inputs.
pub const SYMPLECTIC_TOL: f64 = 1e-9;

const SERIES_CUTOFF: f64 = 1e-8;

/// `G(x) = (x+1)·log2(x+1) − x·log2(x)`, the entropy of a thermal state with
/// mean photon number `x`. `G(0) = 0`; tiny negative round-off is treated as 0.
pub fn g_entropy(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    let nats = if x < SERIES_CUTOFF {
        // (x+1)ln(1+x) = x + x²/2 - ..., so G ≈ x(1 - ln x) + x²/2
        x * (1.0 - x.ln()) + 0.5 * x * x
    } else {
        (x + 1.0) * x.ln_1p() - x * x.ln()
    };
    nats / std::f64::consts::LN_2
}

/// Entropy contribution `G((ν−1)/2)` of one symplectic eigenvalue.
pub fn g_of_eigenvalue(nu: f64) -> f64 {
    g_entropy((nu - 1.0) / 2.0)
}

/// Roots `sqrt(½(a ± sqrt(a² − 4b)))` of the biquadratic that gives the two
/// symplectic eigenvalues of a two-mode state with invariants `a` (Δ) and
/// `b` (det Γ). Returned largest first.
pub fn symplectic_pair(a: f64, b: f64) -> Result<(f64, f64)> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NumericDomain(format!("non-finite invariants a={a}, b={b}")));
    }
    let disc = a * a - 4.0 * b;
    let root = if disc < 0.0 {
        if disc < -1e-9 * a * a.max(1.0) {
            return Err(Error::NumericDomain(format!("negative discriminant {disc:e}")));
        }
        0.0
    } else {
        disc.sqrt()
    };
    let hi = 0.5 * (a + root);
    let lo = 0.5 * (a - root);
    if lo < 0.0 {
        return Err(Error::NumericDomain(format!("negative squared eigenvalue {lo:e}")));
    }
    Ok((hi.sqrt(), lo.sqrt()))
}

/// Checks `ν ≥ 1 − SYMPLECTIC_TOL` and clamps into `[1, ∞)`.
pub fn check_physical(nu: f64, label: &str) -> Result<f64> {
    check_physical_tol(nu, label, SYMPLECTIC_TOL)
}

/// [`check_physical`] with an explicit tolerance. Roots of the biquadratic
/// lose about half their digits when the two eigenvalues coincide, so
/// closed-form callers near a pure state need a looser bound.
pub fn check_physical_tol(nu: f64, label: &str, tol: f64) -> Result<f64> {
    if !nu.is_finite() || nu < 1.0 - tol {
        return Err(Error::NumericDomain(format!("symplectic eigenvalue {label} = {nu} below 1")));
    }
    Ok(nu.max(1.0))
}

/// Symplectic eigenvalues of a 4×4 two-mode covariance matrix in
/// `(q_A, p_A, q_B, p_B)` ordering, from the invariants
/// `Δ = det A + det B + 2 det C` and `det Γ`.
pub fn two_mode_symplectic_eigenvalues(gamma: &[[f64; 4]; 4]) -> Result<(f64, f64)> {
    let det2 = |r: usize, c: usize| gamma[r][c] * gamma[r + 1][c + 1] - gamma[r][c + 1] * gamma[r + 1][c];
    let delta = det2(0, 0) + det2(2, 2) + 2.0 * det2(0, 2);
    symplectic_pair(delta, det4(gamma))
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut a = *m;
    let mut det = 1.0;
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

/// Covariance matrix `[[v·I, z·σz], [z·σz, w·I]]`.
pub fn symmetric_two_mode(v: f64, w: f64, z: f64) -> [[f64; 4]; 4] {
    [
        [v, 0.0, z, 0.0],
        [0.0, v, 0.0, -z],
        [z, 0.0, w, 0.0],
        [0.0, -z, 0.0, w],
    ]
}
