//! Assembly of the correlation SDP on `C⁴ ⊗ Fock(N_c)`.
//!
//! Alice's side is the exact four-dimensional span of the signal states,
//! written in the `{|φ_m⟩}` basis; Bob's side is the truncated Fock space.
//! Joint index is `m·(N_c+1) + n`.
//!
//! The objective `ΠaΠ ⊗ b + h.c.`, Bob's photon-number constraint and the
//! displacement constraint all commute with the joint phase rotation
//! `e^{iπ(m − n)/2}`, so the optimum can be taken block diagonal in the
//! sectors `(m − n) mod 4`. [`build_problem`] can emit either the four
//! sector blocks or the full matrix.

use num_complex::Complex64;
use serde::Serialize;

use crate::ensemble::FourStateEnsemble;
use crate::fock::{constellation_phase, CMatrix, FockOperators};
use crate::solver::{BlockSdp, Constraint};
use ratecalc_lca::error::{Error, Result};

/// Dense (unblocked) problem data, also used for the JSON dump.
#[derive(Debug, Clone)]
pub struct CorrelationProblem {
    pub alpha: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
    pub cutoff: usize,
    pub nu: f64,
    pub objective: CMatrix,
    pub constraints: Vec<Constraint>,
    pub gram: CMatrix,
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `ν = 1 + 2Tα² + Tε`.
pub fn bob_variance(alpha: f64, transmittance: f64, excess_noise: f64) -> f64 {
    1.0 + 2.0 * transmittance * alpha * alpha + transmittance * excess_noise
}

/// Register operator `Σ_k |ψ_k⟩⟨ψ_k| e^{−iθ_k}` in the φ basis.
fn displacement_register() -> CMatrix {
    let mut out = CMatrix::zeros(4, 4);
    for k in 0..4 {
        let psi = FourStateEnsemble::register_state(k);
        let phase = Complex64::from_polar(1.0, -constellation_phase(k));
        for r in 0..4 {
            for col in 0..4 {
                out[(r, col)] += psi[r] * psi[col].conj() * phase;
            }
        }
    }
    out
}

impl CorrelationProblem {
    pub fn new(alpha: f64, transmittance: f64, excess_noise: f64, cutoff: usize) -> Result<Self> {
        if !(transmittance > 0.0 && transmittance <= 1.0) {
            return Err(Error::InvalidParameter(format!("transmittance must be in (0, 1], got {transmittance}")));
        }
        if !(excess_noise >= 0.0 && excess_noise.is_finite()) {
            return Err(Error::InvalidParameter(format!("excess noise must be >= 0, got {excess_noise}")));
        }
        let ens = FourStateEnsemble::new(alpha, cutoff)?;
        let ops = FockOperators::new(cutoff)?;
        let id4 = CMatrix::identity(4, 4);
        let id_b = ops.identity();

        let a_proj = ens.projected_annihilation_exact();
        let ab = kron(&a_proj, &ops.a);
        let objective = &ab + ab.adjoint();

        let nu = bob_variance(alpha, transmittance, excess_noise);
        let mut constraints = vec![Constraint {
            label: "bob-variance".into(),
            blocks: vec![kron(&id4, &(&id_b + &ops.number * c(2.0)))],
            rhs: nu,
        }];

        let d = kron(&displacement_register(), &ops.a);
        constraints.push(Constraint {
            label: "displacement".into(),
            blocks: vec![&d + d.adjoint()],
            rhs: 2.0 * transmittance.sqrt() * alpha,
        });

        // tr[(|ψ_l⟩⟨ψ_k| ⊗ I) X] = ¼⟨α_l|α_k⟩, split into Hermitian parts
        let psi: Vec<CMatrix> = (0..4)
            .map(|k| CMatrix::from_fn(4, 1, |r, _| FourStateEnsemble::register_state(k)[r]))
            .collect();
        for k in 0..4 {
            for l in k..4 {
                let target = ens.gram[(l, k)] * 0.25;
                let op = &psi[l] * psi[k].adjoint(); // tr(op·ρ) = ⟨ψ_k|ρ|ψ_l⟩
                if k == l {
                    constraints.push(Constraint {
                        label: format!("gram-{k}{l}"),
                        blocks: vec![kron(&op, &id_b)],
                        rhs: target.re,
                    });
                } else {
                    let re = &op + op.adjoint();
                    let im = (&op - op.adjoint()) * Complex64::new(0.0, 1.0);
                    constraints.push(Constraint {
                        label: format!("gram-{k}{l}-re"),
                        blocks: vec![kron(&re, &id_b)],
                        rhs: 2.0 * target.re,
                    });
                    // tr(i(op − op†)ρ) = i(z − z̄) = −2 Im z
                    constraints.push(Constraint {
                        label: format!("gram-{k}{l}-im"),
                        blocks: vec![kron(&im, &id_b)],
                        rhs: -2.0 * target.im,
                    });
                }
            }
        }

        Ok(Self {
            alpha,
            transmittance,
            excess_noise,
            cutoff,
            nu,
            objective,
            constraints,
            gram: ens.gram.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        4 * (self.cutoff + 1)
    }

    /// Joint indices belonging to each sector `(m − n) mod 4`.
    pub fn sectors(&self) -> [Vec<usize>; 4] {
        let nb = self.cutoff + 1;
        let mut out: [Vec<usize>; 4] = Default::default();
        for m in 0..4 {
            for n in 0..nb {
                out[(m + 4 - n % 4) % 4].push(m * nb + n);
            }
        }
        out
    }

    /// Largest entry of the objective or any constraint that couples two
    /// different sectors. Zero up to round-off for the symmetric operators;
    /// the off-diagonal Gram constraints live entirely off the sectors and
    /// have zero right-hand side.
    pub fn cross_sector_coupling(&self) -> f64 {
        let sectors = self.sectors();
        let mut label = vec![0usize; self.dim()];
        for (s, idx) in sectors.iter().enumerate() {
            for &i in idx {
                label[i] = s;
            }
        }
        let leak = |m: &CMatrix| {
            let mut worst: f64 = 0.0;
            for r in 0..m.nrows() {
                for col in 0..m.ncols() {
                    if label[r] != label[col] {
                        worst = worst.max(m[(r, col)].norm());
                    }
                }
            }
            worst
        };
        let mut worst = leak(&self.objective);
        for con in &self.constraints[..2] {
            worst = worst.max(leak(&con.blocks[0]));
        }
        worst
    }

    pub fn to_sdp(&self, blocked: bool) -> BlockSdp {
        if !blocked {
            return BlockSdp {
                block_sizes: vec![self.dim()],
                objective: vec![self.objective.clone()],
                constraints: self.constraints.clone(),
                trace_bound: Some(1.0),
            };
        }
        let sectors = self.sectors();
        let restrict = |m: &CMatrix| -> Vec<CMatrix> {
            sectors
                .iter()
                .map(|idx| CMatrix::from_fn(idx.len(), idx.len(), |r, col| m[(idx[r], idx[col])]))
                .collect()
        };
        BlockSdp {
            block_sizes: sectors.iter().map(Vec::len).collect(),
            objective: restrict(&self.objective),
            constraints: self
                .constraints
                .iter()
                .map(|con| Constraint { label: con.label.clone(), blocks: restrict(&con.blocks[0]), rhs: con.rhs })
                .collect(),
            trace_bound: Some(1.0),
        }
    }

    /// Serializable view with matrices as `[re, im]` pairs, row major.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dump<'a> {
            alpha: f64,
            transmittance: f64,
            excess_noise: f64,
            cutoff: usize,
            nu: f64,
            dimension: usize,
            index_order: &'a str,
            sense: &'a str,
            objective: Vec<Vec<[f64; 2]>>,
            constraints: Vec<DumpConstraint>,
            gram: Vec<Vec<[f64; 2]>>,
        }
        #[derive(Serialize)]
        struct DumpConstraint {
            label: String,
            rhs: f64,
            matrix: Vec<Vec<[f64; 2]>>,
        }
        let rows = |m: &CMatrix| -> Vec<Vec<[f64; 2]>> {
            (0..m.nrows()).map(|r| (0..m.ncols()).map(|col| [m[(r, col)].re, m[(r, col)].im]).collect()).collect()
        };
        let dump = Dump {
            alpha: self.alpha,
            transmittance: self.transmittance,
            excess_noise: self.excess_noise,
            cutoff: self.cutoff,
            nu: self.nu,
            dimension: self.dim(),
            index_order: "alice_phi_m * (cutoff + 1) + bob_fock_n",
            sense: "minimize Re tr(objective X) s.t. Re tr(matrix X) = rhs, X psd",
            objective: rows(&self.objective),
            constraints: self
                .constraints
                .iter()
                .map(|con| DumpConstraint { label: con.label.clone(), rhs: con.rhs, matrix: rows(&con.blocks[0]) })
                .collect(),
            gram: rows(&self.gram),
        };
        serde_json::to_value(dump).expect("problem dump is plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators_respect_sector_symmetry() {
        let p = CorrelationProblem::new(0.4775, 0.6, 0.01, 10).unwrap();
        assert!(p.cross_sector_coupling() < 1e-14);
        let sizes: usize = p.sectors().iter().map(Vec::len).sum();
        assert_eq!(sizes, p.dim());
    }

    #[test]
    fn constraint_matrices_are_hermitian() {
        let p = CorrelationProblem::new(0.4775, 0.6, 0.01, 8).unwrap();
        assert!((&p.objective - p.objective.adjoint()).norm() < 1e-14);
        for con in &p.constraints {
            let m = &con.blocks[0];
            assert!((m - m.adjoint()).norm() < 1e-14, "{}", con.label);
        }
    }

    #[test]
    fn gram_constraints_fix_register_state_to_phi_diagonal() {
        // the product state diag(λ) ⊗ |0⟩⟨0| satisfies every Gram row
        let alpha = 0.4775;
        let p = CorrelationProblem::new(alpha, 0.6, 0.01, 10).unwrap();
        let ens = FourStateEnsemble::new(alpha, 10).unwrap();
        let mut rho_b = CMatrix::zeros(11, 11);
        rho_b[(0, 0)] = c(1.0);
        let rho_a = CMatrix::from_fn(4, 4, |r, col| if r == col { c(ens.weights[r]) } else { c(0.0) });
        let x = kron(&rho_a, &rho_b);
        for con in p.constraints.iter().filter(|c| c.label.starts_with("gram")) {
            let v = (&con.blocks[0] * &x).trace().re;
            assert!((v - con.rhs).abs() < 1e-12, "{}: {v} vs {}", con.label, con.rhs);
        }
    }

    #[test]
    fn json_dump_has_every_constraint() {
        let p = CorrelationProblem::new(0.4775, 0.6, 0.01, 10).unwrap();
        let v = p.to_json();
        assert_eq!(v["constraints"].as_array().unwrap().len(), 2 + 16);
        assert_eq!(v["objective"].as_array().unwrap().len(), 44);
    }

    #[test]
    fn rejects_bad_channel() {
        assert!(CorrelationProblem::new(0.4775, 0.0, 0.01, 8).is_err());
        assert!(CorrelationProblem::new(0.4775, 0.5, -0.1, 8).is_err());
    }
}
