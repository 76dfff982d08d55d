//! Spectral analysis of Fisher information matrices.
//!
//! Localisation information matrices collapse in rank as the scene shrinks,
//! and their eigenvalues follow power laws in the scene size. This module
//! extracts that structure: descending eigenvalue reports with a numerical
//! rank, least-squares scaling exponents across a size sweep, congruence
//! transforms into other parameterisations, and the Cramér–Rao covariance
//! bound restricted to the estimable subspace.

use nalgebra::DMatrix;

use crate::eigen::symmetric_eigendecomposition;
use crate::error::{Error, Result};
use crate::model::{FisherMatrix, MatrixKind, PhotonBudget};
use crate::scalar::Real;

/// Default relative threshold separating "non-zero" eigenvalues from the
/// collapsing ones when counting rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-3;

/// Default relative threshold for the retained eigen-subspace of the
/// Cramér–Rao pseudo-inverse.
pub const DEFAULT_CRB_TOLERANCE: f64 = 1e-10;

/// Eigenvalues below this are too deep in the underflow regime for a
/// meaningful log-domain fit.
pub const DEGENERATE_EIGENVALUE_FLOOR: f64 = 1e-250;

/// Minimum number of sweep points a scaling fit needs.
pub const MIN_FIT_POINTS: usize = 5;

/// Transforms with a determinant magnitude below this draw a warning:
/// the congruence is formally valid but numerically near-singular.
pub const TRANSFORM_DETERMINANT_WARNING: f64 = 1e-12;

/// Descending eigenvalues of a Fisher matrix with its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport<T: Real> {
    eigenvalues: Vec<T>,
    rank: usize,
    rel_tol: T,
    matrix_kind: MatrixKind,
}

impl<T: Real> SpectralReport<T> {
    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Count of eigenvalues above `rel_tol` times the largest one.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rel_tol(&self) -> T {
        self.rel_tol
    }

    pub fn matrix_kind(&self) -> MatrixKind {
        self.matrix_kind
    }
}

/// Eigendecomposes the symmetrised matrix and counts how many eigenvalues
/// stand above `rel_tol` relative to the largest. The largest eigenvalue is
/// floored away from zero so an identically zero matrix reports rank 0
/// rather than dividing by nothing.
pub fn eigen_report<T: Real>(f: &FisherMatrix<T>, rel_tol: T) -> SpectralReport<T> {
    let entries = f.entries();
    let symmetrized = (entries + entries.transpose()) * T::c(0.5);
    let (values, _) = symmetric_eigendecomposition(&symmetrized);
    let mut eigenvalues: Vec<T> = values.iter().cloned().collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    let scale = eigenvalues
        .first()
        .map(|&top| top.max(T::c(1e-300)))
        .unwrap_or_else(|| T::c(1e-300));
    let rank = eigenvalues.iter().filter(|&&v| v > rel_tol * scale).count();
    SpectralReport {
        eigenvalues,
        rank,
        rel_tol,
        matrix_kind: f.kind(),
    }
}

/// Least-squares scaling record for one eigenvalue branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueFit<T: Real> {
    /// 1-based index of the eigenvalue in descending order.
    pub index: usize,
    /// Fitted exponent of the power law (slope in log10–log10 coordinates).
    pub slope: T,
    /// Fitted log10 prefactor.
    pub intercept: T,
    /// Standard error of the slope.
    pub stderr: T,
}

/// Power-law fits for every eigenvalue branch over a window of scene sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit<T: Real> {
    fits: Vec<EigenvalueFit<T>>,
    window: (T, T),
    points_used: usize,
}

impl<T: Real> ScalingFit<T> {
    pub fn fits(&self) -> &[EigenvalueFit<T>] {
        &self.fits
    }

    /// The inclusive size window the fit ran over.
    pub fn window(&self) -> (T, T) {
        self.window
    }

    pub fn points_used(&self) -> usize {
        self.points_used
    }
}

/// Fits `log10(eigenvalue)` against `log10(size)` for each eigenvalue branch
/// of a sweep, by ordinary least squares over `window` (inclusive). When no
/// window is given, the smallest decade of sizes present is used, which is
/// where the power laws are asymptotically clean. `branches` limits the fit
/// to the leading eigenvalue branches; deep branches sit at the roundoff
/// floor in regimes where the leading ones are still clean, and capping the
/// count keeps them from poisoning an otherwise valid fit.
///
/// Fails with [`Error::InsufficientSweep`] when fewer than
/// [`MIN_FIT_POINTS`] sweep points fall inside the window, and with
/// [`Error::DegenerateFit`] when an eigenvalue inside the window lies below
/// [`DEGENERATE_EIGENVALUE_FLOOR`] (or is nonpositive), since its logarithm
/// would be meaningless.
pub fn fit_scaling<T: Real>(
    sweep: &[(T, SpectralReport<T>)],
    window: Option<(T, T)>,
    branches: Option<usize>,
) -> Result<ScalingFit<T>> {
    if sweep.is_empty() {
        return Err(Error::InsufficientSweep {
            needed: MIN_FIT_POINTS,
            got: 0,
        });
    }
    let mut smallest = T::c(f64::INFINITY);
    for &(l, _) in sweep {
        if !l.is_finite() || l <= T::zero() {
            return Err(Error::NonFiniteInput);
        }
        smallest = smallest.min(l);
    }
    let window = window.unwrap_or((smallest, T::c(10.0) * smallest));
    // A relative margin keeps sizes that land on the window edge after
    // roundoff in log-spaced sweeps.
    let margin = T::one() + T::c(1e-9);
    let selected: Vec<&(T, SpectralReport<T>)> = sweep
        .iter()
        .filter(|(l, _)| *l * margin >= window.0 && *l <= window.1 * margin)
        .collect();
    if selected.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSweep {
            needed: MIN_FIT_POINTS,
            got: selected.len(),
        });
    }
    let available = selected
        .iter()
        .map(|(_, report)| report.eigenvalues().len())
        .min()
        .expect("selection is nonempty");
    let branches = branches.map_or(available, |b| b.min(available));
    let floor = T::c(DEGENERATE_EIGENVALUE_FLOOR);
    let n = T::c(selected.len() as f64);
    let mut fits = Vec::with_capacity(branches);
    for branch in 0..branches {
        let mut xs = Vec::with_capacity(selected.len());
        let mut ys = Vec::with_capacity(selected.len());
        for (l, report) in &selected {
            let lambda = report.eigenvalues()[branch];
            if lambda < floor {
                return Err(Error::DegenerateFit { index: branch + 1 });
            }
            xs.push(l.log10());
            ys.push(lambda.log10());
        }
        let x_mean = xs.iter().fold(T::zero(), |acc, &x| acc + x) / n;
        let y_mean = ys.iter().fold(T::zero(), |acc, &y| acc + y) / n;
        let mut sxx = T::zero();
        let mut sxy = T::zero();
        for (&x, &y) in xs.iter().zip(ys.iter()) {
            sxx += (x - x_mean) * (x - x_mean);
            sxy += (x - x_mean) * (y - y_mean);
        }
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        let mut ssr = T::zero();
        for (&x, &y) in xs.iter().zip(ys.iter()) {
            let r = y - (intercept + slope * x);
            ssr += r * r;
        }
        let dof = T::c((selected.len() - 2) as f64);
        let stderr = (ssr / dof / sxx).sqrt();
        fits.push(EigenvalueFit {
            index: branch + 1,
            slope,
            intercept,
            stderr,
        });
    }
    Ok(ScalingFit {
        fits,
        window,
        points_used: selected.len(),
    })
}

/// Congruence transform of a Fisher matrix into new parameters: `B F Bᵀ`,
/// where row μ of `b` holds the derivatives of the old parameters with
/// respect to the new parameter μ. The result is explicitly symmetrised.
///
/// A transform whose determinant underflows to zero is rejected with
/// [`Error::SingularTransform`]; a merely ill-conditioned one (determinant
/// magnitude below [`TRANSFORM_DETERMINANT_WARNING`]) draws a warning.
pub fn reparameterize<T: Real>(f: &FisherMatrix<T>, b: &DMatrix<T>) -> Result<FisherMatrix<T>> {
    let n = f.dim();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::LengthMismatch {
            positions: n,
            weights: b.nrows(),
        });
    }
    let det = b.clone().lu().determinant();
    if det == T::zero() {
        return Err(Error::SingularTransform);
    }
    if det.abs() < T::c(TRANSFORM_DETERMINANT_WARNING) {
        log::warn!(
            "reparameterization determinant {:e} is close to singular",
            det.as_f64()
        );
    }
    let transformed = b * f.entries() * b.transpose();
    let symmetrized = (&transformed + transformed.transpose()) * T::c(0.5);
    let labels = (1..=n).map(|i| format!("theta_{i}")).collect();
    Ok(FisherMatrix::from_entries(f.kind(), labels, symmetrized))
}

/// Cramér–Rao covariance bound restricted to the estimable subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbBound<T: Real> {
    matrix: DMatrix<T>,
    support_dim: usize,
}

impl<T: Real> CrbBound<T> {
    /// The bound matrix: pseudo-inverse of the information matrix on its
    /// support, scaled by the reciprocal expected photon number.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// Dimension of the retained eigen-subspace. Directions outside it
    /// carry no information, so their variances are unbounded rather than
    /// described by this matrix.
    pub fn support_dim(&self) -> usize {
        self.support_dim
    }
}

/// Inverts the Fisher matrix on the eigen-subspace above `rel_tol` times the
/// largest eigenvalue and scales by `1/(M·ε)` for `M` detection windows with
/// photon probability `ε`. Eigenvalues outside the support are excluded
/// instead of amplified, which is what makes the bound meaningful for the
/// rank-collapsed matrices of shrinking scenes.
pub fn crb_bound<T: Real>(
    f: &FisherMatrix<T>,
    budget: &PhotonBudget<T>,
    rel_tol: T,
) -> CrbBound<T> {
    let entries = f.entries();
    let symmetrized = (entries + entries.transpose()) * T::c(0.5);
    let (values, vectors) = symmetric_eigendecomposition(&symmetrized);
    let top = values
        .iter()
        .cloned()
        .fold(T::c(1e-300), |acc, v| acc.max(v));
    let threshold = rel_tol * top;
    let scale = T::one() / budget.expected_photons();
    let n = entries.nrows();
    let mut matrix = DMatrix::zeros(n, n);
    let mut support_dim = 0;
    for k in 0..values.len() {
        if values[k] > threshold {
            support_dim += 1;
            let v = vectors.column(k);
            let coefficient = scale / values[k];
            for i in 0..n {
                for j in 0..n {
                    matrix[(i, j)] += coefficient * v[i] * v[j];
                }
            }
        }
    }
    CrbBound {
        matrix,
        support_dim,
    }
}
