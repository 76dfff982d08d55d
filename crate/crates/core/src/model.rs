//! Core domain types: source configurations, point-spread functions, photon
//! budgets and the Fisher matrices every computation produces.
//!
//! Positions are always expressed in units of the point-spread-function width,
//! i.e. `alpha = x / (2 sigma)` for a source at physical offset `x`. All
//! routines downstream of [`SourceConfiguration`] work in these units.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How strict validation has to be for the computation that follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// The closed-form route inverts the envelope Gram matrix, so sources
    /// must be pairwise distinct.
    Analytic,
    /// The spectral route tolerates coincident sources (they simply merge
    /// their weights), so only basic sanity is enforced.
    Numeric,
}

/// Minimal pairwise gap below which two sources count as coincident for the
/// closed-form route.
pub const COINCIDENCE_GAP: f64 = 1e-12;

/// `N` incoherent point sources: dimensionless positions and normalised
/// relative intensities.
///
/// Construction normalises the weights to unit sum and rejects empty,
/// mismatched, non-finite or non-positive input, so a value of this type is
/// always safe to hand to the computations.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfiguration<T: Real> {
    alphas: DVector<T>,
    weights: DVector<T>,
}

impl<T: Real> SourceConfiguration<T> {
    /// Build a configuration from positions and weights.
    ///
    /// Weights are renormalised to unit sum; a deviation larger than `1e-12`
    /// is logged as a warning because it usually indicates a configuration
    /// mistake rather than rounding.
    pub fn new(alphas: &[T], weights: &[T]) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::EmptyConfig);
        }
        if alphas.len() != weights.len() {
            return Err(Error::LengthMismatch {
                positions: alphas.len(),
                weights: weights.len(),
            });
        }
        for &a in alphas {
            if !a.as_f64().is_finite() {
                return Err(Error::NonFiniteInput);
            }
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.as_f64().is_finite() {
                return Err(Error::NonFiniteInput);
            }
            if w <= T::zero() {
                return Err(Error::NonpositiveWeight {
                    index,
                    value: w.as_f64(),
                });
            }
        }
        let mut weights = DVector::from_column_slice(weights);
        let total: T = weights.iter().copied().fold(T::zero(), |s, w| s + w);
        if (total - T::one()).abs() > T::c(1e-12) {
            log::warn!(
                "weights sum to {} instead of 1; renormalising",
                total.as_f64()
            );
        }
        weights /= total;
        Ok(Self {
            alphas: DVector::from_column_slice(alphas),
            weights,
        })
    }

    /// Equal-weight configuration at the given positions.
    pub fn equal_weights(alphas: &[T]) -> Result<Self> {
        let w = vec![T::one(); alphas.len()];
        Self::new(alphas, &w)
    }

    /// Number of sources.
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    /// True when the configuration holds no sources (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Dimensionless source positions.
    pub fn alphas(&self) -> &DVector<T> {
        &self.alphas
    }

    /// Normalised weights (unit sum).
    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    /// Intensity-weighted centroid of the positions.
    pub fn centroid(&self) -> T {
        self.alphas.dot(&self.weights)
    }

    /// Largest pairwise extent `max(alpha) - min(alpha)`.
    pub fn extent(&self) -> T {
        let mut lo = self.alphas[0];
        let mut hi = self.alphas[0];
        for &a in self.alphas.iter() {
            if a < lo {
                lo = a;
            }
            if a > hi {
                hi = a;
            }
        }
        hi - lo
    }

    /// Largest absolute position.
    pub fn max_abs_alpha(&self) -> T {
        self.alphas
            .iter()
            .fold(T::zero(), |m, &a| if a.abs() > m { a.abs() } else { m })
    }

    /// Re-check the invariants for the given mode.
    ///
    /// In [`ValidationMode::Analytic`] any pair closer than
    /// [`COINCIDENCE_GAP`] is rejected, because the closed form needs the
    /// envelope Gram matrix to be invertible. The numeric mode accepts every
    /// configuration this type can hold.
    pub fn validated(&self, mode: ValidationMode) -> Result<Self> {
        if mode == ValidationMode::Analytic {
            let n = self.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    let gap = (self.alphas[i] - self.alphas[j]).abs();
                    if gap.as_f64() < COINCIDENCE_GAP {
                        return Err(Error::CoincidentSources {
                            i,
                            j,
                            separation: gap.as_f64(),
                        });
                    }
                }
            }
        }
        Ok(self.clone())
    }

    /// Copy with every position scaled by `factor`; weights are unchanged.
    /// Used by separation sweeps where the pattern is fixed and only its
    /// scale varies.
    pub fn scaled_positions(&self, factor: T) -> Self {
        Self {
            alphas: &self.alphas * factor,
            weights: self.weights.clone(),
        }
    }

    /// Copy with `shift` added to every position.
    pub fn shifted(&self, shift: T) -> Self {
        Self {
            alphas: self.alphas.map(|a| a + shift),
            weights: self.weights.clone(),
        }
    }
}

/// Shape of the imaging point-spread function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsfKind {
    /// Gaussian amplitude envelope; the default model with closed-form
    /// overlaps.
    Gaussian,
    /// Hard-aperture `sinc` amplitude envelope.
    Sinc,
}

/// Point-spread function: a shape plus its physical width.
///
/// The width only matters when converting physical offsets to the
/// dimensionless positions of [`SourceConfiguration`]; all internal formulas
/// use the dimensionless form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfModel<T: Real> {
    pub kind: PsfKind,
    pub sigma: T,
}

impl<T: Real> PsfModel<T> {
    /// Gaussian model of the given width.
    pub fn gaussian(sigma: T) -> Result<Self> {
        Self::checked(PsfKind::Gaussian, sigma)
    }

    /// Sinc model of the given width.
    pub fn sinc(sigma: T) -> Result<Self> {
        Self::checked(PsfKind::Sinc, sigma)
    }

    fn checked(kind: PsfKind, sigma: T) -> Result<Self> {
        if !sigma.as_f64().is_finite() {
            return Err(Error::NonFiniteInput);
        }
        if sigma <= T::zero() {
            return Err(Error::NonpositiveWidth {
                value: sigma.as_f64(),
            });
        }
        Ok(Self { kind, sigma })
    }
}

impl<T: Real> Default for PsfModel<T> {
    fn default() -> Self {
        Self {
            kind: PsfKind::Gaussian,
            sigma: T::one(),
        }
    }
}

/// Photon budget of an experiment: `windows` coherence windows, each holding a
/// photon with probability `photon_probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonBudget<T: Real> {
    windows: u64,
    photon_probability: T,
}

impl<T: Real> PhotonBudget<T> {
    /// Validated budget; the probability must lie in `(0, 1]`.
    pub fn new(windows: u64, photon_probability: T) -> Result<Self> {
        if !photon_probability.as_f64().is_finite() {
            return Err(Error::NonFiniteInput);
        }
        if windows == 0 || photon_probability <= T::zero() || photon_probability > T::one() {
            return Err(Error::InvalidDetection {
                reason: format!(
                    "photon budget needs windows >= 1 and probability in (0, 1], got {} and {}",
                    windows,
                    photon_probability.as_f64()
                ),
            });
        }
        Ok(Self {
            windows,
            photon_probability,
        })
    }

    /// Number of coherence windows.
    pub fn windows(&self) -> u64 {
        self.windows
    }

    /// Per-window photon probability.
    pub fn photon_probability(&self) -> T {
        self.photon_probability
    }

    /// Expected number of detected photons, `windows * probability`.
    pub fn expected_photons(&self) -> T {
        T::c(self.windows as f64) * self.photon_probability
    }
}

/// Whether a matrix bounds quantum measurements or describes one particular
/// classical detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Quantum,
    Classical,
}

/// A symmetric Fisher information matrix together with the names of the
/// parameters it refers to.
///
/// Entries are exactly symmetric: constructors fill the upper triangle by
/// mirroring the lower one, so spectral routines never see asymmetry noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix<T: Real> {
    kind: MatrixKind,
    labels: Vec<String>,
    entries: DMatrix<T>,
}

impl<T: Real> FisherMatrix<T> {
    /// Build from a matrix whose lower triangle (including the diagonal) is
    /// authoritative; the strict upper triangle is overwritten by the mirror.
    pub fn from_lower(kind: MatrixKind, labels: Vec<String>, mut entries: DMatrix<T>) -> Self {
        let n = entries.nrows();
        assert_eq!(n, entries.ncols(), "Fisher matrix must be square");
        assert_eq!(n, labels.len(), "one label per parameter");
        for i in 0..n {
            for j in (i + 1)..n {
                entries[(i, j)] = entries[(j, i)];
            }
        }
        Self {
            kind,
            labels,
            entries,
        }
    }

    /// Build from a matrix that is already exactly symmetric (for example
    /// the output of an explicit symmetrisation). The lower triangle is
    /// mirrored all the same, so near-symmetric input is tolerated.
    pub fn from_entries(kind: MatrixKind, labels: Vec<String>, entries: DMatrix<T>) -> Self {
        Self::from_lower(kind, labels, entries)
    }

    /// Matrix dimension (number of parameters).
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Quantum bound or classical detection.
    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// Parameter names, aligned with rows/columns.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The symmetric matrix itself.
    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    /// Single entry accessor.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }

    /// Same matrix scaled by a positive constant (e.g. per-photon to
    /// per-experiment).
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            kind: self.kind,
            labels: self.labels.clone(),
            entries: &self.entries * factor,
        }
    }

    /// Largest absolute entry; zero matrices report zero.
    pub fn max_abs_entry(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }
}

/// Default position labels `alpha_1 ... alpha_N`.
pub fn position_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("alpha_{i}")).collect()
}

/// Relative deviation between two matrices of identical shape:
/// `max|a - b| / max|b|`. This is the convergence and comparison metric used
/// throughout the crate; the reference matrix is the second argument.
pub fn relative_deviation<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    let mut diff = T::zero();
    let mut scale = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let d = (*x - *y).abs();
        if d > diff {
            diff = d;
        }
        let m = y.abs();
        if m > scale {
            scale = m;
        }
    }
    if scale == T::zero() {
        if diff == T::zero() {
            T::zero()
        } else {
            T::c(f64::INFINITY)
        }
    } else {
        diff / scale
    }
}
