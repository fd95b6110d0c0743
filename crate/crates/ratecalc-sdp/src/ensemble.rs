//! The four coherent states and their phase-symmetric decomposition.
//!
//! Writing `n = 4j + m`, the states decompose on the orthonormal vectors
//! `|φ_m⟩ = ξ_m^{−1/2} Σ_j (−1)^j α^{4j+m}/√(4j+m)! |4j+m⟩` as
//! `|α_k⟩ = Σ_m e^{imθ_k} √λ_m |φ_m⟩` with `θ_k = (2k+1)π/4` and
//! `λ_m = e^{−α²} ξ_m`. The `(−1)^j` sign is what makes this hold for the
//! π/4-rotated constellation. Alice's register states are the orthonormal
//! `|ψ_k⟩ = ½ Σ_m e^{−imθ_k} |φ_m⟩`, so that `½ Σ_k |ψ_k⟩|α_k⟩ =
//! Σ_m √λ_m |φ_m⟩|φ_m⟩`.

use num_complex::Complex64;

use crate::fock::{coherent_amplitude, coherent_overlap, coherent_state_fock, constellation_phase, CMatrix, CVector, FockOperators};
use ratecalc_lca::error::{Error, Result};
use ratecalc_lca::lca::xi_weights;

/// Largest deviation from unit norm accepted for a truncated state.
pub const STATE_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FourStateEnsemble {
    pub alpha: f64,
    pub cutoff: usize,
    /// Truncated coherent states `|α_k⟩`.
    pub states: [CVector; 4],
    /// Truncated phase-symmetric basis `|φ_m⟩`.
    pub basis: [CVector; 4],
    /// `ξ_m` without the `e^{−α²}` factor.
    pub xi: [f64; 4],
    /// `λ_m = e^{−α²} ξ_m`.
    pub weights: [f64; 4],
    /// `gram[(l, k)] = ⟨α_l|α_k⟩`, closed form.
    pub gram: CMatrix,
}

impl FourStateEnsemble {
    pub fn new(alpha: f64, cutoff: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        let states = [0, 1, 2, 3].map(|k| coherent_state_fock(alpha, k, cutoff));
        let states = collect4(states)?;
        for s in &states {
            let deficit = (1.0 - s.norm()).abs();
            if deficit > STATE_NORM_TOL {
                return Err(Error::CutoffTooSmall { cutoff, deficit });
            }
        }
        let xi = xi_weights(alpha)?;
        let scale = (-alpha * alpha).exp();
        let weights = xi.map(|x| x * scale);
        if weights.iter().any(|&w| !(w >= f64::MIN_POSITIVE)) {
            return Err(Error::Degenerate(format!("state weights underflow at alpha = {alpha:e}")));
        }

        let dim = cutoff + 1;
        let basis = [0usize, 1, 2, 3].map(|m| {
            let mut v = CVector::zeros(dim);
            let mut mag = 1.0 / xi[m].sqrt(); // α^n/√n!/√ξ_m
            for n in 0..dim {
                if n > 0 {
                    mag *= alpha / (n as f64).sqrt();
                }
                if n % 4 == m {
                    let sign = if (n / 4) % 2 == 0 { 1.0 } else { -1.0 };
                    v[n] = Complex64::new(sign * mag, 0.0);
                }
            }
            v
        });

        let gram = CMatrix::from_fn(4, 4, |l, k| {
            coherent_overlap(coherent_amplitude(alpha, l), coherent_amplitude(alpha, k))
        });
        Ok(Self { alpha, cutoff, states, basis, xi, weights, gram })
    }

    /// `Σ_m e^{imθ_k} √λ_m |φ_m⟩`.
    pub fn reconstruct_state(&self, k: usize) -> CVector {
        let theta = constellation_phase(k);
        let mut v = CVector::zeros(self.cutoff + 1);
        for m in 0..4 {
            v += &self.basis[m] * Complex64::from_polar(self.weights[m].sqrt(), theta * m as f64);
        }
        v
    }

    /// Coordinates of Alice's orthonormal register state `|ψ_k⟩` in the
    /// `{|φ_m⟩}` basis.
    pub fn register_state(k: usize) -> [Complex64; 4] {
        let theta = constellation_phase(k);
        [0, 1, 2, 3].map(|m| Complex64::from_polar(0.5, -theta * m as f64))
    }

    /// Projector onto `span{|α_k⟩}` in the truncated Fock space, built by
    /// Gram–Schmidt over the four states.
    pub fn projector(&self) -> CMatrix {
        let dim = self.cutoff + 1;
        let mut ortho: Vec<CVector> = Vec::with_capacity(4);
        for s in &self.states {
            let mut v = s.clone();
            for _ in 0..2 {
                for e in &ortho {
                    let c = e.dotc(&v);
                    v -= e * c;
                }
            }
            let n = v.norm();
            if n > 1e-12 {
                ortho.push(v / Complex64::new(n, 0.0));
            }
        }
        let mut p = CMatrix::zeros(dim, dim);
        for e in &ortho {
            p += e * e.adjoint();
        }
        p
    }

    /// `Π a Π` expressed in the `{|φ_m⟩}` basis (a 4×4 matrix).
    pub fn projected_annihilation(&self, ops: &FockOperators) -> Result<CMatrix> {
        if ops.cutoff != self.cutoff {
            return Err(Error::InvalidParameter(format!(
                "operator cutoff {} differs from ensemble cutoff {}",
                ops.cutoff, self.cutoff
            )));
        }
        Ok(CMatrix::from_fn(4, 4, |r, c| self.basis[r].dotc(&(&ops.a * &self.basis[c]))))
    }

    /// Closed form of [`Self::projected_annihilation`]:
    /// `a|φ_m⟩ = s_m α √(ξ_{m−1}/ξ_m) |φ_{m−1}⟩` with `s_0 = −1`, else `+1`.
    pub fn projected_annihilation_exact(&self) -> CMatrix {
        let mut a = CMatrix::zeros(4, 4);
        for m in 0..4 {
            let prev = (m + 3) % 4;
            let sign = if m == 0 { -1.0 } else { 1.0 };
            a[(prev, m)] = Complex64::new(sign * self.alpha * (self.xi[prev] / self.xi[m]).sqrt(), 0.0);
        }
        a
    }
}

fn collect4(v: [Result<CVector>; 4]) -> Result<[CVector; 4]> {
    let [a, b, c, d] = v;
    Ok([a?, b?, c?, d?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_reproduces_coherent_states() {
        for &alpha in &[0.1, 0.4775, 1.0] {
            let ens = FourStateEnsemble::new(alpha, 40).unwrap();
            for k in 0..4 {
                let diff = (ens.reconstruct_state(k) - &ens.states[k]).norm();
                assert!(diff < 1e-10, "alpha {alpha} k {k}: {diff}");
            }
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let ens = FourStateEnsemble::new(0.4775, 20).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ip = ens.basis[i].dotc(&ens.basis[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn register_states_are_orthonormal() {
        for k in 0..4 {
            for l in 0..4 {
                let a = FourStateEnsemble::register_state(k);
                let b = FourStateEnsemble::register_state(l);
                let ip: Complex64 = (0..4).map(|m| a[m].conj() * b[m]).sum();
                let expected = if k == l { 1.0 } else { 0.0 };
                assert!((ip - Complex64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn projector_is_hermitian_idempotent_and_fixes_states() {
        let ens = FourStateEnsemble::new(0.5, 20).unwrap();
        let p = ens.projector();
        assert!((&p - p.adjoint()).norm() < 1e-10);
        assert!((&p * &p - &p).norm() < 1e-10);
        for k in 0..4 {
            assert!((&p * &ens.states[k] - &ens.states[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn projected_annihilation_matches_closed_form() {
        let ens = FourStateEnsemble::new(0.4775, 30).unwrap();
        let ops = FockOperators::new(30).unwrap();
        let numeric = ens.projected_annihilation(&ops).unwrap();
        assert!((numeric - ens.projected_annihilation_exact()).norm() < 1e-12);
    }

    #[test]
    fn gram_matrix_matches_truncated_states() {
        let ens = FourStateEnsemble::new(0.4775, 30).unwrap();
        for l in 0..4 {
            for k in 0..4 {
                let ip = ens.states[l].dotc(&ens.states[k]);
                assert!((ip - ens.gram[(l, k)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn small_cutoff_is_rejected() {
        assert!(matches!(FourStateEnsemble::new(1.5, 5), Err(Error::CutoffTooSmall { .. })));
    }
}
