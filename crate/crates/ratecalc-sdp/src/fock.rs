//! Ladder operators, quadratures and coherent states on a truncated Fock
//! space `span{|0⟩, …, |N_c⟩}`.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use ratecalc_lca::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const MIN_CUTOFF: usize = 4;

/// Largest truncated-norm deficit tolerated for a coherent state.
pub const NORM_DEFICIT_TOL: f64 = 1e-8;

/// Ladder and quadrature operators of one mode, `q = a + a†`,
/// `p = −i(a − a†)`, so that `[q, p] = 2i` (shot-noise units).
#[derive(Debug, Clone)]
pub struct FockOperators {
    pub cutoff: usize,
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub q: CMatrix,
    pub p: CMatrix,
    pub number: CMatrix,
}

impl FockOperators {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < MIN_CUTOFF {
            return Err(Error::InvalidParameter(format!("Fock cutoff must be >= {MIN_CUTOFF}, got {cutoff}")));
        }
        let dim = cutoff + 1;
        let a = CMatrix::from_fn(dim, dim, |r, c| {
            if c == r + 1 {
                Complex64::new((c as f64).sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let a_dag = a.adjoint();
        let q = &a + &a_dag;
        let p = (&a - &a_dag) * Complex64::new(0.0, -1.0);
        let number = CMatrix::from_diagonal(&CVector::from_fn(dim, |n, _| Complex64::new(n as f64, 0.0)));
        Ok(Self { cutoff, a, a_dag, q, p, number })
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim(), self.dim())
    }

    /// Quadrature along angle `θ`: `e^{−iθ}a + e^{iθ}a†`. Its mean on the
    /// coherent state `|r·e^{iθ}⟩` is `2r`.
    pub fn rotated_quadrature(&self, theta: f64) -> CMatrix {
        let ph = Complex64::from_polar(1.0, -theta);
        &self.a * ph + &self.a_dag * ph.conj()
    }
}

/// Phase of the k-th constellation point, `(2k+1)π/4`.
pub fn constellation_phase(k: usize) -> f64 {
    (2 * k + 1) as f64 * FRAC_PI_4
}

/// Complex amplitude `α·e^{i(2k+1)π/4}` of the k-th coherent state.
pub fn coherent_amplitude(alpha: f64, k: usize) -> Complex64 {
    Complex64::from_polar(alpha, constellation_phase(k))
}

/// `|ψ_k⟩ = e^{−α²/2} Σ_n e^{i(2k+1)nπ/4} α^n/√n! |n⟩`, truncated at `cutoff`.
pub fn coherent_state_fock(alpha: f64, k: usize, cutoff: usize) -> Result<CVector> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    if k > 3 {
        return Err(Error::InvalidParameter(format!("state index must be in 0..4, got {k}")));
    }
    let dim = cutoff + 1;
    let mut v = CVector::zeros(dim);
    let mut mag = (-alpha * alpha / 2.0).exp(); // e^{-α²/2} α^n/√n!
    let theta = constellation_phase(k);
    for n in 0..dim {
        if n > 0 {
            mag *= alpha / (n as f64).sqrt();
        }
        v[n] = Complex64::from_polar(mag, theta * n as f64);
    }
    let deficit = 1.0 - v.norm_squared();
    if deficit > NORM_DEFICIT_TOL {
        return Err(Error::CutoffTooSmall { cutoff, deficit });
    }
    Ok(v)
}

/// Smallest cutoff with a negligible truncated tail for amplitude `alpha`
/// (`N_c ≥ α² + 8α + 10`).
pub fn recommended_cutoff(alpha: f64) -> usize {
    (alpha * alpha + 8.0 * alpha + 10.0).ceil() as usize
}

/// `⟨β|γ⟩ = exp(−(|β|² + |γ|²)/2 + β*γ)`.
pub fn coherent_overlap(beta: Complex64, gamma: Complex64) -> Complex64 {
    (-(beta.norm_sqr() + gamma.norm_sqr()) / 2.0 + beta.conj() * gamma).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_entries() {
        let ops = FockOperators::new(4).unwrap();
        assert!((ops.a[(0, 1)].re - 1.0).abs() < 1e-15);
        assert!((ops.a[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(ops.a[(1, 0)], Complex64::new(0.0, 0.0));
        assert!(FockOperators::new(3).is_err());
    }

    #[test]
    fn quadratures_are_hermitian() {
        let ops = FockOperators::new(8).unwrap();
        for r in 0..9 {
            for c in 0..9 {
                assert_eq!(ops.q[(r, c)].im, 0.0);
                assert_eq!(ops.q[(r, c)], ops.q[(c, r)]);
                assert_eq!(ops.p[(r, c)].re, 0.0);
                assert_eq!(ops.p[(r, c)], -ops.p[(c, r)]);
            }
        }
    }

    #[test]
    fn canonical_commutator_below_cutoff() {
        let ops = FockOperators::new(10).unwrap();
        let comm = &ops.q * &ops.p - &ops.p * &ops.q;
        for r in 0..10 {
            for c in 0..10 {
                let expected = if r == c { Complex64::new(0.0, 2.0) } else { Complex64::new(0.0, 0.0) };
                assert!((comm[(r, c)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_and_ground_coefficient() {
        let v = coherent_state_fock(0.0, 2, 6).unwrap();
        assert_eq!(v[0], Complex64::new(1.0, 0.0));
        assert!(v.iter().skip(1).all(|c| c.norm() == 0.0));
        for k in 0..4 {
            let s = coherent_state_fock(0.7, k, 30).unwrap();
            assert!((s[0] - Complex64::new((-0.49f64 / 2.0).exp(), 0.0)).norm() < 1e-15);
            assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_deficit_is_reported() {
        assert!(matches!(coherent_state_fock(2.0, 0, 4), Err(Error::CutoffTooSmall { .. })));
        let n = recommended_cutoff(2.0);
        assert!(coherent_state_fock(2.0, 0, n).is_ok());
    }

    #[test]
    fn gram_entry_matches_closed_form() {
        // closed form evaluated to 50 digits
        let expected = Complex64::new(0.775_514_912_692_343_3, 0.179_951_478_646_019_74);
        let s0 = coherent_state_fock(0.4775, 0, 30).unwrap();
        let s1 = coherent_state_fock(0.4775, 1, 30).unwrap();
        let overlap = s0.dotc(&s1);
        assert!((overlap - expected).norm() < 1e-12, "{overlap}");
        let closed = coherent_overlap(coherent_amplitude(0.4775, 0), coherent_amplitude(0.4775, 1));
        assert!((closed - expected).norm() < 1e-14);
    }

    #[test]
    fn rotated_quadrature_mean() {
        let ops = FockOperators::new(30).unwrap();
        for k in 0..4 {
            let s = coherent_state_fock(0.6, k, 30).unwrap();
            let m = s.dotc(&(ops.rotated_quadrature(constellation_phase(k)) * &s));
            assert!((m.re - 1.2).abs() < 1e-10 && m.im.abs() < 1e-12);
        }
    }
}
