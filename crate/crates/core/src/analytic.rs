//! Closed-form information matrix for Gaussian envelopes.
//!
//! For Gaussian point-spread functions the density matrix of the collected
//! light lives in the span of the `N` source envelopes plus their
//! derivatives, and the information matrix reduces to linear algebra on the
//! `N x N` Gram blocks: a Sylvester-type solve against the overlap structure
//! plus an explicit diagonal. This route costs `O(N^6)` in the worst case
//! (one dense Cholesky of an `N^2 x N^2` matrix) but is exact up to rounding
//! — no basis truncation is involved.
//!
//! The price is conditioning: as sources approach each other the envelope
//! Gram matrix approaches singularity and the solve loses digits roughly as
//! the square of the inverse separation per source pair. Configurations whose
//! condition estimate exceeds [`crate::gram::GRAM_CONDITION_LIMIT`] are
//! rejected; the spectral route in [`crate::numeric`] covers that regime.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::gram::{build_gram_blocks, envelope_cholesky, GramBlocks};
use crate::model::{
    position_labels, FisherMatrix, MatrixKind, SourceConfiguration, ValidationMode,
};
use crate::scalar::Real;

/// Pre-factorised quantities for repeated closed-form evaluations on one
/// configuration: the Gram blocks, the envelope Cholesky factor and the
/// factorisation of the weighted overlap operator.
pub struct AnalyticWorkspace<T: Real> {
    config: SourceConfiguration<T>,
    gram: GramBlocks<T>,
    overlap_chol: Cholesky<T, Dyn>,
    /// `vec` of the bracket matrix of each source (length `N`, each `N^2`).
    brackets: Vec<DVector<T>>,
    /// Diagonal of the derivative Schur complement, `1 + alpha_i^2 - T_ii`.
    schur_diag: DVector<T>,
}

impl<T: Real> AnalyticWorkspace<T> {
    /// Validate the configuration, build the Gram blocks and factorise the
    /// weighted overlap operator.
    pub fn new(config: &SourceConfiguration<T>) -> Result<Self> {
        let config = config.validated(ValidationMode::Analytic)?;
        let gram = build_gram_blocks(&config)?;
        let n = config.len();
        let alphas = config.alphas();
        let weights = config.weights();

        let chol_aa = envelope_cholesky(&gram.upsilon_aa)?;
        let yinv = chol_aa.inverse();

        // G = Y_aa D_a Y_aa^{-1}, assembled via its transpose so the
        // triangular solves reuse the envelope factor.
        let g = chol_aa.solve(&gram.upsilon_ad).transpose();

        // Diagonal of T = G D_a Y_aa, all that survives of the derivative
        // Schur complement in the final formula.
        let mut schur_diag = DVector::zeros(n);
        for i in 0..n {
            let mut t_ii = T::zero();
            for k in 0..n {
                t_ii += g[(i, k)] * gram.upsilon_ad[(k, i)];
            }
            schur_diag[i] = T::one() + alphas[i] * alphas[i] - t_ii;
        }

        // Weighted overlap operator on N x N matrices, written out over
        // column-stacked coordinates: index (c*N + r) pairs column c with
        // row r. Symmetric positive definite whenever Y_aa is.
        let nn = n * n;
        let mut s = DMatrix::zeros(nn, nn);
        for c in 0..n {
            for r in 0..n {
                let row = c * n + r;
                for cc in 0..n {
                    for rr in 0..n {
                        let col = cc * n + rr;
                        let mut v = T::zero();
                        if r == rr {
                            v += yinv[(c, cc)] * weights[r];
                        }
                        if c == cc {
                            v += weights[c] * yinv[(r, rr)];
                        }
                        s[(row, col)] = v;
                    }
                }
            }
        }
        let overlap_chol = Cholesky::new(s).ok_or(Error::ConditioningFailure {
            condition: gram.condition_estimate.as_f64(),
        })?;

        // Bracket of source i: g_i e_i^T + e_i g_i^T - 2 a_i e_i e_i^T,
        // column-stacked.
        let mut brackets = Vec::with_capacity(n);
        for i in 0..n {
            let mut l = DVector::zeros(nn);
            for c in 0..n {
                for r in 0..n {
                    let mut v = T::zero();
                    if c == i {
                        v += g[(i, r)];
                    }
                    if r == i {
                        v += g[(i, c)];
                    }
                    if r == i && c == i {
                        v -= T::c(2.0) * alphas[i];
                    }
                    l[c * n + r] = v;
                }
            }
            brackets.push(l);
        }

        Ok(Self {
            config,
            gram,
            overlap_chol,
            brackets,
            schur_diag,
        })
    }

    /// The Gram blocks this workspace was built from (including the
    /// condition estimate).
    pub fn gram(&self) -> &GramBlocks<T> {
        &self.gram
    }

    /// The validated configuration.
    pub fn config(&self) -> &SourceConfiguration<T> {
        &self.config
    }

    /// Evaluate the information matrix.
    pub fn qfim(&self) -> FisherMatrix<T> {
        let n = self.config.len();
        let weights = self.config.weights();
        let solved: Vec<DVector<T>> = self
            .brackets
            .iter()
            .map(|l| self.overlap_chol.solve(l))
            .collect();

        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut v = T::c(2.0) * weights[i] * weights[j] * self.brackets[i].dot(&solved[j]);
                if i == j {
                    v += T::c(4.0) * weights[i] * self.schur_diag[i];
                }
                q[(i, j)] = v;
            }
        }
        FisherMatrix::from_lower(MatrixKind::Quantum, position_labels(n), q)
    }
}

/// Closed-form information matrix of a configuration with pairwise-distinct
/// sources and Gaussian envelopes.
pub fn analytic_qfim<T: Real>(config: &SourceConfiguration<T>) -> Result<FisherMatrix<T>> {
    Ok(AnalyticWorkspace::new(config)?.qfim())
}

/// The four blocks of the inverse of the full `2N x 2N` Grammian.
#[derive(Debug, Clone, PartialEq)]
pub struct GramInverseBlocks<T: Real> {
    pub aa: DMatrix<T>,
    pub ad: DMatrix<T>,
    pub da: DMatrix<T>,
    pub dd: DMatrix<T>,
}

impl<T: Real> GramInverseBlocks<T> {
    /// Assemble the full `2N x 2N` inverse.
    pub fn full(&self) -> DMatrix<T> {
        let n = self.aa.nrows();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.aa[(i, j)];
                m[(i, n + j)] = self.ad[(i, j)];
                m[(n + i, j)] = self.da[(i, j)];
                m[(n + i, n + j)] = self.dd[(i, j)];
            }
        }
        m
    }
}

/// Invert the full Grammian blockwise via the Schur complement of the
/// envelope block. Much better conditioned than inverting the `2N x 2N`
/// matrix directly, and each block has a meaning of its own.
pub fn blockwise_inverse<T: Real>(gram: &GramBlocks<T>) -> Result<GramInverseBlocks<T>> {
    let chol_aa = envelope_cholesky(&gram.upsilon_aa)?;
    let yinv = chol_aa.inverse();

    // z = Y_aa^{-1} Y_ad; Schur = Y_dd - Y_da z.
    let z = chol_aa.solve(&gram.upsilon_ad);
    let schur = &gram.upsilon_dd - gram.upsilon_ad.transpose() * &z;
    let schur_chol = Cholesky::new(schur).ok_or(Error::ConditioningFailure {
        condition: gram.condition_estimate.as_f64(),
    })?;
    let dd = schur_chol.inverse();

    let ad = -(&z * &dd);
    let da = ad.transpose();
    let aa = &yinv + &z * &dd * z.transpose();

    Ok(GramInverseBlocks { aa, ad, da, dd })
}

#[cfg(test)]
// Reference values keep every digit of the computation that produced them.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    /// Kronecker product laid out for column-stacked matrices: entry
    /// ((c*N + r), (c'*N + r')) is A[c,c'] B[r,r'].
    fn kron_colstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = b.nrows();
        let m = a.nrows();
        let mut k = DMatrix::zeros(m * n, m * n);
        for c in 0..m {
            for r in 0..n {
                for cc in 0..m {
                    for rr in 0..n {
                        k[(c * n + r, cc * n + rr)] = a[(c, cc)] * b[(r, rr)];
                    }
                }
            }
        }
        k
    }

    #[test]
    fn overlap_operator_matches_kronecker_reference() {
        let config = SourceConfiguration::new(&[-0.4, 0.3, 1.1], &[0.2, 0.5, 0.3]).unwrap();
        let ws = AnalyticWorkspace::new(&config).unwrap();
        let n = config.len();

        let chol = envelope_cholesky(&ws.gram.upsilon_aa).unwrap();
        let yinv = chol.inverse();
        let dw = DMatrix::from_diagonal(config.weights());
        let s_ref = kron_colstack(&yinv, &dw) + kron_colstack(&dw, &yinv);

        // Reconstruct the factorised operator and compare entrywise.
        let s = ws.overlap_chol.l() * ws.overlap_chol.l().transpose();
        assert_eq!(s.nrows(), n * n);
        assert_relative_eq!(s, s_ref, epsilon = 1e-12);
    }

    #[test]
    fn brackets_match_kronecker_reference() {
        let config = SourceConfiguration::new(&[-0.4, 0.3, 1.1], &[0.2, 0.5, 0.3]).unwrap();
        let ws = AnalyticWorkspace::new(&config).unwrap();
        let n = config.len();

        let chol = envelope_cholesky(&ws.gram.upsilon_aa).unwrap();
        let g = chol.solve(&ws.gram.upsilon_ad).transpose();
        for i in 0..n {
            // vec(u v^T) = v (x) u over column-stacked coordinates.
            let gi: DVector<f64> = g.row(i).transpose();
            let mut ei = DVector::zeros(n);
            ei[i] = 1.0;
            let mut l_ref = DVector::zeros(n * n);
            for c in 0..n {
                for r in 0..n {
                    l_ref[c * n + r] =
                        gi[r] * ei[c] + ei[r] * gi[c] - 2.0 * config.alphas()[i] * ei[r] * ei[c];
                }
            }
            assert_relative_eq!(ws.brackets[i], l_ref, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_source_information_is_four() {
        for a in [-1.5, 0.0, 0.3, 2.0] {
            let q = analytic_qfim(&SourceConfiguration::equal_weights(&[a]).unwrap()).unwrap();
            assert_eq!(q.dim(), 1);
            assert_relative_eq!(q.get(0, 0), 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_sources_at_unit_separation() {
        // For alphas (0, 1) with equal weights the matrix is
        // [[2 - 1/e, -1/e], [-1/e, 2 - 1/e]].
        let q = analytic_qfim(&SourceConfiguration::equal_weights(&[0.0, 1.0]).unwrap()).unwrap();
        let e1 = (-1.0f64).exp();
        assert_relative_eq!(q.get(0, 0), 2.0 - e1, epsilon = 1e-12);
        assert_relative_eq!(q.get(1, 1), 2.0 - e1, epsilon = 1e-12);
        assert_relative_eq!(q.get(0, 1), -e1, epsilon = 1e-12);
        assert_relative_eq!(q.get(1, 0), -e1, epsilon = 1e-12);
    }

    #[test]
    fn three_equispaced_sources_frozen_values() {
        // Half-unit spacing, equal weights; values pinned from a
        // high-precision evaluation of the same closed form.
        let q =
            analytic_qfim(&SourceConfiguration::equal_weights(&[0.5, 1.0, 1.5]).unwrap()).unwrap();
        assert_relative_eq!(q.get(0, 0), 1.0286961968590046, epsilon = 1e-12);
        assert_relative_eq!(q.get(1, 1), 0.4886496156575260, epsilon = 1e-12);
        assert_relative_eq!(q.get(2, 2), 1.0286961968590046, epsilon = 1e-12);
        assert_relative_eq!(q.get(0, 1), 0.0899847136925236, epsilon = 1e-12);
        assert_relative_eq!(q.get(1, 2), 0.0899847136925236, epsilon = 1e-12);
        assert_relative_eq!(q.get(0, 2), -0.2050410469150284, epsilon = 1e-12);

        let eig = q.entries().clone().symmetric_eigen();
        let mut eigs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [0.4457915632613502, 0.8665132023401520, 1.2337372437740330];
        for (got, want) in eigs.iter().zip(expected) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn translation_leaves_information_unchanged() {
        let base = SourceConfiguration::new(&[0.1, 0.6, 1.4], &[0.2, 0.3, 0.5]).unwrap();
        let q0 = analytic_qfim(&base).unwrap();
        let q1 = analytic_qfim(&base.shifted(-0.7)).unwrap();
        assert_relative_eq!(q0.entries(), q1.entries(), epsilon = 1e-10);
    }

    #[test]
    fn reflection_reverses_parameter_order() {
        let config = SourceConfiguration::new(&[0.1, 0.6, 1.4], &[0.2, 0.3, 0.5]).unwrap();
        let q = analytic_qfim(&config).unwrap();

        let ralphas: Vec<f64> = config.alphas().iter().rev().map(|a| -a).collect();
        let rweights: Vec<f64> = config.weights().iter().rev().copied().collect();
        let reflected = SourceConfiguration::new(&ralphas, &rweights).unwrap();
        let qr = analytic_qfim(&reflected).unwrap();

        let n = config.len();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(q.get(i, j), qr.get(n - 1 - i, n - 1 - j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn equispaced_equal_weights_matrix_is_persymmetric() {
        let q = analytic_qfim(&SourceConfiguration::equal_weights(&[0.2, 0.5, 0.8, 1.1]).unwrap())
            .unwrap();
        let n = q.dim();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(q.get(i, j), q.get(n - 1 - j, n - 1 - i), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn blockwise_inverse_single_source() {
        let gram = build_gram_blocks(&SourceConfiguration::equal_weights(&[0.8]).unwrap()).unwrap();
        let inv = blockwise_inverse(&gram).unwrap();
        // The derivative Schur complement of a single source is exactly 1.
        assert_relative_eq!(inv.dd[(0, 0)], 1.0, epsilon = 1e-13);
        assert_relative_eq!(inv.ad[(0, 0)], -0.8, epsilon = 1e-13);
        assert_relative_eq!(inv.aa[(0, 0)], 1.0 + 0.64, epsilon = 1e-13);
    }

    #[test]
    fn blockwise_inverse_inverts_full_grammian() {
        let config = SourceConfiguration::equal_weights(&[-0.9, 0.05, 0.8, 1.7]).unwrap();
        let gram = build_gram_blocks(&config).unwrap();
        let inv = blockwise_inverse(&gram).unwrap();
        let product = gram.full_grammian() * inv.full();
        let identity = DMatrix::<f64>::identity(8, 8);
        assert_relative_eq!(product, identity, epsilon = 1e-9);
    }

    #[test]
    fn coincident_sources_are_rejected() {
        let config = SourceConfiguration::equal_weights(&[0.3, 0.3]).unwrap();
        assert!(matches!(
            analytic_qfim(&config),
            Err(Error::CoincidentSources { .. })
        ));
    }

    #[test]
    fn tight_cluster_is_rejected_by_conditioning() {
        let config = SourceConfiguration::equal_weights(&[0.0, 1e-9]).unwrap();
        assert!(matches!(
            analytic_qfim(&config),
            Err(Error::ConditioningFailure { .. })
        ));
    }

    #[test]
    fn close_pair_stays_positive_semidefinite() {
        let q = analytic_qfim(&SourceConfiguration::equal_weights(&[0.0, 0.05]).unwrap()).unwrap();
        let eig = q.entries().clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        for &l in eig.eigenvalues.iter() {
            assert!(l > -1e-9 * max, "eigenvalue {l} too negative");
        }
    }

    #[test]
    fn single_precision_agrees_with_double() {
        let q64 = analytic_qfim(&SourceConfiguration::<f64>::equal_weights(&[0.0, 1.0]).unwrap())
            .unwrap();
        let q32 = analytic_qfim(&SourceConfiguration::<f32>::equal_weights(&[0.0, 1.0]).unwrap())
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(q32.get(i, j) as f64, q64.get(i, j), epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn workspace_reuse_matches_fresh_evaluation() {
        let config = SourceConfiguration::equal_weights(&[0.0, 0.4, 1.0]).unwrap();
        let ws = AnalyticWorkspace::new(&config).unwrap();
        let q1 = ws.qfim();
        let q2 = ws.qfim();
        assert_eq!(q1.entries(), q2.entries());
        assert_eq!(q1.entries(), analytic_qfim(&config).unwrap().entries());
        assert!(ws.gram().condition_estimate > 1.0);
        assert_eq!(ws.config().len(), 3);
        let _ = dvector![0.0];
    }
}
