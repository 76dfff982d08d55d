//! Two-level reduction of the imaging state for deeply sub-width scenes.
//!
//! When every source sits well inside one PSF width of the origin, the photon
//! state is almost entirely supported on the first two Hermite–Gauss modes.
//! Keeping moments of the source distribution to second order gives a 2×2
//! state whose Fisher information factorises through a 2×2 core matrix, so the
//! resulting N×N matrix has rank at most two regardless of the number of
//! sources. This module builds that reduced state, the factorised information
//! matrix, and the closed-form eigenvalues of the core.

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::model::{position_labels, FisherMatrix, MatrixKind, SourceConfiguration};
use crate::scalar::Real;

/// Denominators smaller than this indicate an effectively pure two-level
/// state, where the factorised information matrix is undefined.
pub const QUBIT_DEGENERACY_LIMIT: f64 = 1e-12;

/// First and second weighted moments of the source positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitMoments<T: Real> {
    /// Mean position `Σ w_i α_i`.
    pub c1: T,
    /// Mean squared position `Σ w_i α_i²`.
    pub c2: T,
}

/// The symmetric 2×2 core of the factorised information matrix, together
/// with the shared denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitCore<T: Real> {
    pub m11: T,
    pub m12: T,
    pub m22: T,
    /// Denominator `𝒜 = (C₂ − 1)C₂ + C₁²`; equals minus the determinant of
    /// the two-level state, so it vanishes exactly in the pure limit.
    pub a_denom: T,
}

/// Computes the first two weighted moments of the source positions.
pub fn moments<T: Real>(config: &SourceConfiguration<T>) -> QubitMoments<T> {
    let mut c1 = T::zero();
    let mut c2 = T::zero();
    for (&a, &w) in config.alphas().iter().zip(config.weights().iter()) {
        c1 += w * a;
        c2 += w * a * a;
    }
    QubitMoments { c1, c2 }
}

impl<T: Real> QubitMoments<T> {
    /// Variance of the source distribution, `c2 − c1²`. Nonnegative for any
    /// valid configuration, and zero exactly when all sources coincide.
    pub fn variance(&self) -> T {
        self.c2 - self.c1 * self.c1
    }
}

/// The two-level state in the span of the first two Hermite–Gauss modes,
/// correct to second order in the positions.
pub fn qubit_state<T: Real>(moments: &QubitMoments<T>) -> Matrix2<T> {
    Matrix2::new(T::one() - moments.c2, moments.c1, moments.c1, moments.c2)
}

impl<T: Real> QubitCore<T> {
    /// Assembles the core matrix and its denominator from the moments.
    pub fn from_moments(moments: &QubitMoments<T>) -> Self {
        let QubitMoments { c1, c2 } = *moments;
        let two = T::c(2.0);
        QubitCore {
            m11: (c2 - T::one()) * c2,
            m12: c1 * (T::one() - two * c2),
            m22: T::c(4.0) * c1 * c1 - T::one(),
            a_denom: (c2 - T::one()) * c2 + c1 * c1,
        }
    }
}

/// Closed-form eigenvalues of the 2×2 core, ordered `|μ1| ≤ |μ2|`.
///
/// For any genuinely mixed configuration both eigenvalues are nonzero, which
/// is what pins the rank of the factorised information matrix at exactly two.
pub fn eigen_core<T: Real>(core: &QubitCore<T>) -> (T, T) {
    let half = T::c(0.5);
    let mean = (core.m11 + core.m22) * half;
    let gap = (core.m11 - core.m22) * half;
    let radius = (gap * gap + core.m12 * core.m12).sqrt();
    let lo = mean - radius;
    let hi = mean + radius;
    if lo.abs() <= hi.abs() {
        (lo, hi)
    } else {
        (hi, lo)
    }
}

/// Fisher information matrix of the two-level reduced state.
///
/// The output factorises as `(1/𝒜) · V ℳ Vᵀ` with `V = [𝟏 | α]`, so its rank
/// is at most two however many sources the configuration holds. Fails with
/// [`Error::DegenerateQubitState`] when the state is effectively pure
/// (`|𝒜| ≤ 1e-12`), which happens when the sources all coincide; the full
/// information matrix routes cover that regime instead.
pub fn qubit_qfim<T: Real>(config: &SourceConfiguration<T>) -> Result<FisherMatrix<T>> {
    let m = moments(config);
    let core = QubitCore::from_moments(&m);
    if core.a_denom.abs() <= T::c(QUBIT_DEGENERACY_LIMIT) {
        return Err(Error::DegenerateQubitState {
            denom: core.a_denom.as_f64(),
        });
    }
    let n = config.len();
    let alphas = config.alphas();
    let inv_a = T::one() / core.a_denom;
    // Row i of V ℳ is (m11 + α_i m12, m12 + α_i m22); contract with row j of V.
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        let row1 = core.m11 + alphas[i] * core.m12;
        let row2 = core.m12 + alphas[i] * core.m22;
        for j in 0..=i {
            entries[(i, j)] = (row1 + row2 * alphas[j]) * inv_a;
        }
    }
    Ok(FisherMatrix::from_lower(
        MatrixKind::Quantum,
        position_labels(n),
        entries,
    ))
}

#[cfg(test)]
// Reference values keep every digit of the computation that produced them.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::analytic::analytic_qfim;
    use crate::eigen::{descending_eigenvalues, symmetric_eigendecomposition};
    use crate::model::{PsfModel, ValidationMode};
    use crate::numeric::build_truncated_state;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DVector;

    fn equispaced(x: f64, n: usize) -> SourceConfiguration<f64> {
        let alphas: Vec<f64> = (1..=n).map(|k| k as f64 * x).collect();
        SourceConfiguration::equal_weights(&alphas).unwrap()
    }

    #[test]
    fn moments_match_direct_sums() {
        let x = 0.25;
        let m = moments(&equispaced(x, 3));
        assert_relative_eq!(m.c1, 2.0 * x, max_relative = 1e-15);
        assert_relative_eq!(m.c2, 14.0 * x * x / 3.0, max_relative = 1e-15);

        let single = SourceConfiguration::new(&[0.7], &[1.0]).unwrap();
        let ms = moments(&single);
        assert_relative_eq!(ms.c1, 0.7, max_relative = 1e-15);
        assert_relative_eq!(ms.c2, 0.49, max_relative = 1e-15);

        let pair = SourceConfiguration::equal_weights(&[-0.4, 0.4]).unwrap();
        let mp = moments(&pair);
        assert_abs_diff_eq!(mp.c1, 0.0, epsilon = 1e-16);
        assert_relative_eq!(mp.c2, 0.16, max_relative = 1e-15);
    }

    #[test]
    fn variance_is_nonnegative() {
        for config in [
            equispaced(0.3, 4),
            SourceConfiguration::new(&[-1.0, 0.2, 0.9], &[0.5, 0.3, 0.2]).unwrap(),
            SourceConfiguration::new(&[0.5, 0.5], &[0.6, 0.4]).unwrap(),
        ] {
            let m = moments(&config);
            assert!(m.variance() >= -1e-16, "variance {}", m.variance());
        }
        // Coincident sources achieve equality.
        let m = moments(&SourceConfiguration::new(&[0.5, 0.5], &[0.6, 0.4]).unwrap());
        assert_abs_diff_eq!(m.variance(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn state_matches_moment_entries() {
        let rho = qubit_state(&QubitMoments { c1: 0.1, c2: 0.02 });
        assert_relative_eq!(rho[(0, 0)], 0.98, max_relative = 1e-15);
        assert_relative_eq!(rho[(0, 1)], 0.1, max_relative = 1e-15);
        assert_relative_eq!(rho[(1, 0)], 0.1, max_relative = 1e-15);
        assert_relative_eq!(rho[(1, 1)], 0.02, max_relative = 1e-15);

        let vacuum = qubit_state(&QubitMoments { c1: 0.0, c2: 0.0 });
        assert_eq!(vacuum, Matrix2::new(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn state_determinant_is_minus_denominator() {
        for config in [equispaced(0.1, 3), equispaced(0.02, 5)] {
            let m = moments(&config);
            let core = QubitCore::from_moments(&m);
            let det = qubit_state(&m).determinant();
            assert_relative_eq!(det, -core.a_denom, max_relative = 1e-12);
        }
    }

    #[test]
    fn core_eigenvalues_match_hand_diagonalisation() {
        // c1 = 0, c2 = 1/2 makes the core diagonal: entries -1/4 and -1.
        let core = QubitCore::from_moments(&QubitMoments { c1: 0.0, c2: 0.5 });
        let (mu1, mu2) = eigen_core(&core);
        assert_relative_eq!(mu1, -0.25, max_relative = 1e-15);
        assert_relative_eq!(mu2, -1.0, max_relative = 1e-15);
    }

    #[test]
    fn core_eigenvalues_match_generic_solver() {
        for config in [equispaced(0.07, 3), equispaced(0.3, 2), equispaced(0.01, 6)] {
            let core = QubitCore::from_moments(&moments(&config));
            let (mu1, mu2) = eigen_core(&core);
            let dense = DMatrix::from_row_slice(2, 2, &[core.m11, core.m12, core.m12, core.m22]);
            let (vals, _) = symmetric_eigendecomposition(&dense);
            let mut direct = [vals[0], vals[1]];
            direct.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
            assert_relative_eq!(mu1, direct[0], max_relative = 1e-12);
            assert_relative_eq!(mu2, direct[1], max_relative = 1e-12);
            assert!(mu1.abs() <= mu2.abs());
            assert!(mu1 != 0.0 && mu2 != 0.0);
        }
    }

    #[test]
    fn information_matrix_matches_frozen_small_scene() {
        // Three equispaced sources deep inside the PSF width.
        let config = equispaced(1e-3, 3);
        let q = qubit_qfim(&config).unwrap();
        let expected = [
            [
                2.50008100264608624e0,
                1.00003600117603852e0,
                -5.00009000294009187e-1,
            ],
            [
                1.00003600117603852e0,
                1.00001600052268413e0,
                9.99995999869329633e-1,
            ],
            [
                -5.00009000294009187e-1,
                9.99995999869329633e-1,
                2.50000100003266779e0,
            ],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(q.entries()[(i, j)], expected[i][j], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rank_is_at_most_two() {
        for n in [3usize, 5, 8] {
            let config = equispaced(0.05, n);
            let q = qubit_qfim(&config).unwrap();
            let eigs = descending_eigenvalues(q.entries());
            let scale = eigs[0].abs().max(1e-300);
            for &lambda in &eigs[2..] {
                assert!(
                    lambda.abs() <= 1e-10 * scale,
                    "eigenvalue {lambda:e} breaks the rank-2 bound for n = {n}"
                );
            }
            // The two leading eigenvalues are genuinely nonzero.
            assert!(eigs[1] > 1e-10 * scale);
        }
    }

    /// Largest principal angle between the column spaces of two orthonormal
    /// bases, via the singular values of their cross-Gram matrix.
    fn max_principal_angle(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> f64 {
        let cross = u1.transpose() * u2;
        let svd = cross.svd(false, false);
        let min_sigma = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .clamp(-1.0, 1.0);
        min_sigma.acos()
    }

    fn orthonormal_columns(columns: &[DVector<f64>]) -> DMatrix<f64> {
        let n = columns[0].len();
        let mut m = DMatrix::zeros(n, columns.len());
        for (j, col) in columns.iter().enumerate() {
            m.set_column(j, col);
        }
        let qr = m.qr();
        qr.q()
    }

    #[test]
    fn range_aligns_with_dominant_eigenspace_of_full_matrix() {
        let x = 1e-3;
        let config = equispaced(x, 3);
        let full = analytic_qfim(&config).unwrap();
        let (vals, vecs) = symmetric_eigendecomposition(full.entries());
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
        let dominant = orthonormal_columns(&[
            vecs.column(order[0]).into_owned(),
            vecs.column(order[1]).into_owned(),
        ]);
        // The reduced matrix's range is spanned by the all-ones and position
        // vectors by construction.
        let range = orthonormal_columns(&[
            DVector::from_element(3, 1.0),
            DVector::from_iterator(3, config.alphas().iter().cloned()),
        ]);
        let angle = max_principal_angle(&dominant, &range);
        assert!(
            angle < 1e-2,
            "principal angle {angle:e} between reduced range and dominant eigenspace"
        );
    }

    #[test]
    fn coincident_sources_are_degenerate() {
        let config = SourceConfiguration::new(&[0.0], &[1.0]).unwrap();
        match qubit_qfim(&config) {
            Err(Error::DegenerateQubitState { denom }) => {
                assert_abs_diff_eq!(denom, 0.0, epsilon = 1e-15)
            }
            other => panic!("expected degenerate-state error, got {other:?}"),
        }
    }

    #[test]
    fn state_matches_truncated_density_block_to_third_order() {
        let psf = PsfModel::default();
        let mut previous: Option<f64> = None;
        for &x in &[0.1, 0.05, 0.025] {
            let config = equispaced(x, 3);
            config.validated(ValidationMode::Numeric).unwrap();
            let state = build_truncated_state(&config, &psf, 16).unwrap();
            let rho = qubit_state(&moments(&config));
            let mut deviation = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    deviation = deviation.max((state.rho()[(i, j)] - rho[(i, j)]).abs());
                }
            }
            if let Some(prev) = previous {
                assert!(
                    deviation * 7.0 <= prev,
                    "third-order deviation shrank only {:.2}x at x = {x}",
                    prev / deviation
                );
            }
            previous = Some(deviation);
        }
    }

    #[test]
    fn single_precision_reduction_is_consistent() {
        let config = SourceConfiguration::<f32>::equal_weights(&[0.05, 0.10, 0.15]).unwrap();
        let q = qubit_qfim(&config).unwrap();
        let eigs = descending_eigenvalues(q.entries());
        assert!(eigs[2].abs() <= 1e-5 * eigs[0]);
        let reference =
            qubit_qfim(&SourceConfiguration::<f64>::equal_weights(&[0.05, 0.10, 0.15]).unwrap())
                .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    q.entries()[(i, j)] as f64,
                    reference.entries()[(i, j)],
                    max_relative = 1e-4
                );
            }
        }
    }
}
