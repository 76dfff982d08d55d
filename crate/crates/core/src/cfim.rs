//! Classical Fisher information for mode-sorting and intensity detection.
//!
//! Two measurement families are covered. Mode sorting (SPADE) projects the
//! image-plane field onto a finite ladder of Hermite–Gauss modes plus a
//! complement bucket, giving a discrete outcome distribution. Direct imaging
//! records the intensity profile on the image plane, treated here as a
//! continuum measurement evaluated by composite quadrature, with an optional
//! pixel-binned variant. Both produce classical Fisher information matrices
//! in the same scaled position units as the quantum routes, so the
//! data-processing inequality (quantum minus classical is positive
//! semidefinite) can be checked directly.

use nalgebra::{DMatrix, DVector};

use crate::bessel::spherical_bessel_sequence;
use crate::error::{Error, Result};
use crate::model::{
    position_labels, relative_deviation, FisherMatrix, MatrixKind, PsfKind, PsfModel,
    SourceConfiguration,
};
use crate::scalar::Real;

/// Outcomes with probability below this are dropped from discrete Fisher
/// sums; their information content vanishes in the limit but evaluates as
/// 0/0 in floating point.
pub const OUTCOME_PROBABILITY_FLOOR: f64 = 1e-15;

/// Continuum intensities below this floor have their integrand zeroed to
/// avoid dividing by a value that underflowed.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Relative change allowed between a quadrature grid and its point-doubled
/// refinement before the result is rejected as unconverged. Widened to
/// `sqrt(eps)` for scalar types whose accumulation noise exceeds it.
pub const QUADRATURE_RELATIVE_TOLERANCE: f64 = 1e-6;

/// Default number of Hermite–Gauss modes resolved by the mode sorter.
pub const DEFAULT_SPADE_MODES: usize = 20;

/// Default quadrature point count for the continuum intensity integral.
pub const DEFAULT_QUADRATURE_POINTS: usize = 2001;

/// Default half-width of the integration window, in PSF widths past the
/// outermost source.
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;

/// Minimum acceptable quadrature point count.
pub const MIN_QUADRATURE_POINTS: usize = 201;

/// Minimum acceptable integration half-width, in PSF widths.
pub const MIN_HALF_WIDTH: f64 = 5.0;

/// Which measurement the classical Fisher information describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionKind {
    /// Projection onto a finite Hermite–Gauss mode ladder plus a bucket.
    Spade,
    /// Continuum intensity measurement on the image plane.
    DirectImaging,
}

/// Detection system description: mode count and basis origin for the mode
/// sorter, grid resolution and window half-width for direct imaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel<T: Real> {
    kind: DetectionKind,
    spade_modes: usize,
    spade_center: T,
    quadrature_points: usize,
    half_width: T,
}

impl<T: Real> DetectionModel<T> {
    /// Mode sorter with the given ladder length, centered at the origin.
    pub fn spade(modes: usize) -> Result<Self> {
        Self::spade_centered(modes, T::zero())
    }

    /// Mode sorter whose ground mode peaks at `center` (in scaled position
    /// units); pointing it at the intensity centroid maximises the
    /// information in the low modes.
    pub fn spade_centered(modes: usize, center: T) -> Result<Self> {
        if modes < 1 {
            return Err(Error::InvalidDetection {
                reason: "mode sorter needs at least one resolved mode".into(),
            });
        }
        if !center.is_finite() {
            return Err(Error::InvalidDetection {
                reason: "mode-basis center must be finite".into(),
            });
        }
        Ok(DetectionModel {
            kind: DetectionKind::Spade,
            spade_modes: modes,
            spade_center: center,
            quadrature_points: DEFAULT_QUADRATURE_POINTS,
            half_width: T::c(DEFAULT_HALF_WIDTH),
        })
    }

    /// Continuum intensity detection integrated on `points` grid nodes over
    /// a window extending `half_width` PSF widths past the outermost source.
    /// Even point counts are rounded up to keep the composite rule valid.
    pub fn direct_imaging(points: usize, half_width: T) -> Result<Self> {
        if points < MIN_QUADRATURE_POINTS {
            return Err(Error::InvalidDetection {
                reason: format!(
                    "direct imaging needs at least {MIN_QUADRATURE_POINTS} quadrature points, got {points}"
                ),
            });
        }
        if !half_width.is_finite() || half_width < T::c(MIN_HALF_WIDTH) {
            return Err(Error::InvalidDetection {
                reason: format!(
                    "integration half-width must be at least {MIN_HALF_WIDTH} PSF widths"
                ),
            });
        }
        Ok(DetectionModel {
            kind: DetectionKind::DirectImaging,
            spade_modes: DEFAULT_SPADE_MODES,
            spade_center: T::zero(),
            quadrature_points: points | 1,
            half_width,
        })
    }

    /// Direct imaging with the default grid and window.
    pub fn direct_imaging_default() -> Self {
        Self::direct_imaging(DEFAULT_QUADRATURE_POINTS, T::c(DEFAULT_HALF_WIDTH))
            .expect("defaults satisfy the validation bounds")
    }

    pub fn kind(&self) -> DetectionKind {
        self.kind
    }

    pub fn spade_modes(&self) -> usize {
        self.spade_modes
    }

    pub fn spade_center(&self) -> T {
        self.spade_center
    }

    pub fn quadrature_points(&self) -> usize {
        self.quadrature_points
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    fn require(&self, kind: DetectionKind, operation: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidDetection {
                reason: format!("{operation} requires a {kind:?} detection model"),
            })
        }
    }
}

/// Outcome probabilities and their derivatives with respect to each source
/// position. Rows index outcomes (the last row is the complement bucket for
/// discrete detections), columns of `dprobs` index parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityModel<T: Real> {
    probs: DVector<T>,
    dprobs: DMatrix<T>,
}

impl<T: Real> ProbabilityModel<T> {
    pub fn probs(&self) -> &DVector<T> {
        &self.probs
    }

    pub fn dprobs(&self) -> &DMatrix<T> {
        &self.dprobs
    }

    pub fn outcomes(&self) -> usize {
        self.probs.len()
    }

    pub fn parameters(&self) -> usize {
        self.dprobs.ncols()
    }

    /// Discrete Fisher information matrix of this outcome distribution,
    /// skipping outcomes below [`OUTCOME_PROBABILITY_FLOOR`].
    fn fisher_matrix(&self, kind: MatrixKind) -> FisherMatrix<T> {
        let n = self.parameters();
        let floor = T::c(OUTCOME_PROBABILITY_FLOOR);
        let mut entries = DMatrix::zeros(n, n);
        for z in 0..self.outcomes() {
            let p = self.probs[z];
            if p < floor {
                continue;
            }
            for i in 0..n {
                let di = self.dprobs[(z, i)];
                for j in 0..=i {
                    entries[(i, j)] += di * self.dprobs[(z, j)] / p;
                }
            }
        }
        FisherMatrix::from_lower(kind, position_labels(n), entries)
    }
}

/// Outcome distribution of the mode sorter: the photon lands in resolved
/// mode `q` with probability `Σ_i w_i e^{−β_i²} β_i^{2q}/q!` (where `β_i`
/// is the source position relative to the basis center), and the remaining
/// mass goes to the complement bucket.
pub fn spade_probabilities<T: Real>(
    config: &SourceConfiguration<T>,
    model: &DetectionModel<T>,
) -> Result<ProbabilityModel<T>> {
    model.require(DetectionKind::Spade, "mode-sorter probabilities")?;
    let n = config.len();
    let modes = model.spade_modes;
    let mut probs = DVector::zeros(modes + 2);
    let mut dprobs = DMatrix::zeros(modes + 2, n);
    for (i, (&alpha, &w)) in config
        .alphas()
        .iter()
        .zip(config.weights().iter())
        .enumerate()
    {
        let beta = alpha - model.spade_center;
        let beta2 = beta * beta;
        let envelope = w * (-beta2).exp();
        let two = T::c(2.0);
        // occupation = envelope · β^{2q}/q! and ladder = envelope · β^{2q−1}/q!,
        // both by recurrence; the ladder never divides by β, so β = 0 is exact.
        let mut occupation = envelope;
        let mut ladder = envelope * beta;
        probs[0] += occupation;
        dprobs[(0, i)] += -two * beta * envelope;
        for q in 1..=modes {
            let qt = T::c(q as f64);
            occupation *= beta2 / qt;
            if q > 1 {
                ladder *= beta2 / qt;
            }
            probs[q] += occupation;
            dprobs[(q, i)] += ladder * (two * qt - two * beta2);
        }
    }
    // Complement bucket: remaining probability mass and balancing derivative.
    let resolved: T = probs.rows(0, modes + 1).sum();
    probs[modes + 1] = (T::one() - resolved).max(T::zero());
    for i in 0..n {
        let column_sum: T = dprobs.view((0, i), (modes + 1, 1)).sum();
        dprobs[(modes + 1, i)] = -column_sum;
    }
    Ok(ProbabilityModel { probs, dprobs })
}

/// Classical Fisher information matrix of the mode sorter.
pub fn spade_cfim<T: Real>(
    config: &SourceConfiguration<T>,
    model: &DetectionModel<T>,
) -> Result<FisherMatrix<T>> {
    let probabilities = spade_probabilities(config, model)?;
    Ok(probabilities.fisher_matrix(MatrixKind::Classical))
}

/// Normalised intensity of the PSF at displacement `v` (in PSF widths), and
/// the derivative of that intensity with respect to the source position.
fn intensity_and_slope<T: Real>(kind: PsfKind, v: T) -> (T, T) {
    match kind {
        PsfKind::Gaussian => {
            let norm = T::one() / (T::two_pi()).sqrt();
            let f = norm * (-v * v * T::c(0.5)).exp();
            // d/dα of f(u − 2α) is +2 v f(v) for the Gaussian intensity.
            (f, T::c(2.0) * v * f)
        }
        PsfKind::Sinc => {
            let z = T::pi() * v;
            let (j, jp) = spherical_bessel_sequence(1, z);
            let amplitude = j[0];
            let slope = jp[0];
            let f = amplitude * amplitude;
            (f, -T::c(4.0) * T::pi() * amplitude * slope)
        }
    }
}

/// Integration window in PSF widths: the span of the sources and their
/// centroid, padded by the model's half-width on both sides. Padding past
/// the outermost source (rather than the centroid alone) keeps the window
/// honest for well-separated scenes.
fn integration_window<T: Real>(
    config: &SourceConfiguration<T>,
    model: &DetectionModel<T>,
) -> (T, T) {
    let two = T::c(2.0);
    let centroid = two * config.centroid();
    let mut lo = centroid;
    let mut hi = centroid;
    for &alpha in config.alphas().iter() {
        lo = lo.min(two * alpha);
        hi = hi.max(two * alpha);
    }
    (lo - model.half_width, hi + model.half_width)
}

/// Composite Simpson weights for an odd number of nodes with spacing `h`.
fn simpson_weights<T: Real>(points: usize, h: T) -> DVector<T> {
    let third = h / T::c(3.0);
    let mut w = DVector::from_element(points, T::c(2.0) * third);
    for k in (1..points - 1).step_by(2) {
        w[k] = T::c(4.0) * third;
    }
    w[0] = third;
    w[points - 1] = third;
    w
}

/// Continuum Fisher matrix on a fixed grid.
fn continuum_cfim_on_grid<T: Real>(
    config: &SourceConfiguration<T>,
    psf: &PsfModel<T>,
    lo: T,
    hi: T,
    points: usize,
) -> DMatrix<T> {
    let n = config.len();
    let h = (hi - lo) / T::c((points - 1) as f64);
    let weights = simpson_weights(points, h);
    let floor = T::c(DENSITY_FLOOR);
    let two = T::c(2.0);
    let mut entries = DMatrix::zeros(n, n);
    let mut dp = vec![T::zero(); n];
    for k in 0..points {
        let u = lo + h * T::c(k as f64);
        let mut p = T::zero();
        for (i, (&alpha, &w)) in config
            .alphas()
            .iter()
            .zip(config.weights().iter())
            .enumerate()
        {
            let (f, slope) = intensity_and_slope(psf.kind, u - two * alpha);
            p += w * f;
            dp[i] = w * slope;
        }
        if p < floor {
            continue;
        }
        let quad_w = weights[k];
        for i in 0..n {
            let scaled = quad_w * dp[i] / p;
            for j in 0..=i {
                entries[(i, j)] += scaled * dp[j];
            }
        }
    }
    entries
}

/// Classical Fisher information matrix of ideal (continuum) intensity
/// detection, in scaled position units.
///
/// The integral runs over the window described by the model, on the model's
/// grid and once more on a point-doubled grid; if the two differ by more
/// than [`QUADRATURE_RELATIVE_TOLERANCE`] relative, the result is rejected
/// with [`Error::QuadratureNonConvergence`], otherwise the finer grid wins.
pub fn direct_imaging_cfim<T: Real>(
    config: &SourceConfiguration<T>,
    psf: &PsfModel<T>,
    model: &DetectionModel<T>,
) -> Result<FisherMatrix<T>> {
    model.require(DetectionKind::DirectImaging, "direct imaging")?;
    let (lo, hi) = integration_window(config, model);
    let coarse = continuum_cfim_on_grid(config, psf, lo, hi, model.quadrature_points);
    let fine = continuum_cfim_on_grid(config, psf, lo, hi, 2 * model.quadrature_points - 1);
    let tolerance = T::c(QUADRATURE_RELATIVE_TOLERANCE).max(T::default_epsilon().sqrt());
    let change = relative_deviation(&coarse, &fine);
    if change > tolerance {
        return Err(Error::QuadratureNonConvergence {
            max_change: change.as_f64(),
        });
    }
    Ok(FisherMatrix::from_lower(
        MatrixKind::Classical,
        position_labels(config.len()),
        fine,
    ))
}

/// Number of Simpson nodes used inside each pixel of the binned variant.
const PIXEL_NODES: usize = 65;

/// Classical Fisher information of intensity detection with finite pixels.
///
/// The window is partitioned into pixels of the given width (in PSF
/// widths); each pixel's probability and derivatives are integrated
/// separately and the discrete Fisher sum runs over pixels plus the
/// out-of-window complement. As the width shrinks this approaches the
/// continuum matrix from below.
pub fn direct_imaging_pixel_cfim<T: Real>(
    config: &SourceConfiguration<T>,
    psf: &PsfModel<T>,
    model: &DetectionModel<T>,
    pixel_width: T,
) -> Result<FisherMatrix<T>> {
    model.require(DetectionKind::DirectImaging, "pixel-binned direct imaging")?;
    if !pixel_width.is_finite() || pixel_width <= T::zero() {
        return Err(Error::InvalidDetection {
            reason: "pixel width must be positive and finite".into(),
        });
    }
    let (lo, hi) = integration_window(config, model);
    let span = hi - lo;
    let bins = (span / pixel_width).as_f64().ceil() as usize;
    if bins > 1_000_000 {
        return Err(Error::InvalidDetection {
            reason: format!(
                "pixel width {} produces over a million bins",
                pixel_width.as_f64()
            ),
        });
    }
    let n = config.len();
    let two = T::c(2.0);
    let mut probs = DVector::zeros(bins + 1);
    let mut dprobs = DMatrix::zeros(bins + 1, n);
    for b in 0..bins {
        let left = lo + pixel_width * T::c(b as f64);
        let right = (left + pixel_width).min(hi);
        let h = (right - left) / T::c((PIXEL_NODES - 1) as f64);
        let weights = simpson_weights(PIXEL_NODES, h);
        for k in 0..PIXEL_NODES {
            let u = left + h * T::c(k as f64);
            let quad_w = weights[k];
            for (i, (&alpha, &w)) in config
                .alphas()
                .iter()
                .zip(config.weights().iter())
                .enumerate()
            {
                let (f, slope) = intensity_and_slope(psf.kind, u - two * alpha);
                probs[b] += quad_w * w * f;
                dprobs[(b, i)] += quad_w * w * slope;
            }
        }
    }
    // Out-of-window complement carries whatever mass the window misses.
    let captured: T = probs.rows(0, bins).sum();
    probs[bins] = (T::one() - captured).max(T::zero());
    for i in 0..n {
        let column_sum: T = dprobs.view((0, i), (bins, 1)).sum();
        dprobs[(bins, i)] = -column_sum;
    }
    let probabilities = ProbabilityModel { probs, dprobs };
    Ok(probabilities.fisher_matrix(MatrixKind::Classical))
}

#[cfg(test)]
// Reference values keep every digit of the computation that produced them.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::analytic::analytic_qfim;
    use crate::eigen::descending_eigenvalues;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn equal_weights(alphas: &[f64]) -> SourceConfiguration<f64> {
        SourceConfiguration::equal_weights(alphas).unwrap()
    }

    #[test]
    fn ground_state_projection_is_exact() {
        let config = equal_weights(&[0.0]);
        let model = DetectionModel::spade(20).unwrap();
        let p = spade_probabilities(&config, &model).unwrap();
        assert_eq!(p.probs()[0], 1.0);
        for q in 1..p.outcomes() {
            assert_eq!(p.probs()[q], 0.0);
        }
        // All derivatives vanish except the q = 1 gain and q = 0 loss, which
        // are zero at β = 0 as well.
        for z in 0..p.outcomes() {
            assert_eq!(p.dprobs()[(z, 0)], 0.0);
        }
    }

    #[test]
    fn mode_occupation_is_poissonian() {
        let config = equal_weights(&[0.5]);
        let model = DetectionModel::spade(20).unwrap();
        let p = spade_probabilities(&config, &model).unwrap();
        let lambda = 0.25f64;
        let mut factorial = 1.0;
        for q in 0..=5 {
            if q > 0 {
                factorial *= q as f64;
            }
            let expected = (-lambda).exp() * lambda.powi(q) / factorial;
            assert_relative_eq!(p.probs()[q as usize], expected, max_relative = 1e-14);
        }
        let total: f64 = p.probs().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let alphas = [0.15, 0.4];
        let weights = [0.45, 0.55];
        let model = DetectionModel::spade(20).unwrap();
        let config = SourceConfiguration::new(&alphas, &weights).unwrap();
        let base = spade_probabilities(&config, &model).unwrap();
        let h = 1e-5;
        for j in 0..2 {
            let mut plus = alphas;
            plus[j] += h;
            let mut minus = alphas;
            minus[j] -= h;
            let p_plus =
                spade_probabilities(&SourceConfiguration::new(&plus, &weights).unwrap(), &model)
                    .unwrap();
            let p_minus =
                spade_probabilities(&SourceConfiguration::new(&minus, &weights).unwrap(), &model)
                    .unwrap();
            for z in 0..base.outcomes() {
                let fd = (p_plus.probs()[z] - p_minus.probs()[z]) / (2.0 * h);
                assert_abs_diff_eq!(base.dprobs()[(z, j)], fd, epsilon = 1e-7);
            }
            let column: f64 = base.dprobs().column(j).sum();
            assert_abs_diff_eq!(column, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn mode_sorter_matrix_matches_reference_values() {
        // Independently computed with 40-digit arithmetic.
        let config = equal_weights(&[0.1, 0.2, 0.3]);
        let model = DetectionModel::spade(20).unwrap();
        let c = spade_cfim(&config, &model).unwrap();
        let expected = [
            [
                0.10293915011577632,
                0.195665663712723624,
                0.269236848151716074,
            ],
            [
                0.195665663712723624,
                0.381636656841127407,
                0.548663401033691829,
            ],
            [
                0.269236848151716074,
                0.548663401033691829,
                0.847733901435882334,
            ],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(c.entries()[(i, j)], expected[i][j], max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn single_source_information_saturates_at_four() {
        // The Poisson variance identity makes the mode-sorter information
        // exactly 4 for one source at any offset the ladder resolves. The
        // outcome floor drops far-tail modes whose per-outcome information
        // is amplified by (2q/β)², which caps the observable saturation
        // near 1e-10 rather than machine precision.
        let model = DetectionModel::spade(20).unwrap();
        for &alpha in &[0.05, 0.5, 1.0, 1.5] {
            let c = spade_cfim(&equal_weights(&[alpha]), &model).unwrap();
            assert_relative_eq!(c.entries()[(0, 0)], 4.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn symmetric_pair_is_rank_one() {
        let model = DetectionModel::spade(20).unwrap();
        for &x in &[0.05, 0.3] {
            let c = spade_cfim(&equal_weights(&[-x, x]), &model).unwrap();
            let e = c.entries();
            assert_relative_eq!(e[(0, 0)], e[(1, 1)], max_relative = 1e-12);
            assert_relative_eq!(e[(0, 1)], -e[(0, 0)], max_relative = 1e-12);
            let eigs = descending_eigenvalues(e);
            assert!(eigs[1].abs() <= 1e-12 * eigs[0]);
        }
    }

    fn nine_sources(x: f64) -> SourceConfiguration<f64> {
        let alphas: Vec<f64> = (1..=9).map(|i| (i as f64 - 5.0) * x).collect();
        equal_weights(&alphas)
    }

    #[test]
    fn nine_source_mode_sorting_tends_to_rank_one() {
        let model = DetectionModel::spade(20).unwrap();
        let ratio = |x: f64| {
            let c = spade_cfim(&nine_sources(x), &model).unwrap();
            let eigs = descending_eigenvalues(c.entries());
            eigs[1] / eigs[0]
        };
        let wide = ratio(0.1);
        let tight = ratio(0.01);
        assert!(tight < 1e-2, "second/first eigenvalue ratio {tight:e}");
        assert!(
            tight < wide / 10.0,
            "ratio fell only from {wide:e} to {tight:e}"
        );
    }

    #[test]
    fn exchanging_equal_sources_permutes_the_matrix() {
        let model = DetectionModel::spade(20).unwrap();
        let forward = spade_cfim(&equal_weights(&[0.12, 0.37]), &model).unwrap();
        let swapped = spade_cfim(&equal_weights(&[0.37, 0.12]), &model).unwrap();
        assert_eq!(forward.entries()[(0, 0)], swapped.entries()[(1, 1)]);
        assert_eq!(forward.entries()[(1, 1)], swapped.entries()[(0, 0)]);
        assert_eq!(forward.entries()[(0, 1)], swapped.entries()[(1, 0)]);
    }

    #[test]
    fn single_gaussian_source_reaches_the_quantum_limit() {
        let config = equal_weights(&[0.0]);
        let psf = PsfModel::default();
        let model = DetectionModel::direct_imaging_default();
        let c = direct_imaging_cfim(&config, &psf, &model).unwrap();
        assert_relative_eq!(c.entries()[(0, 0)], 4.0, max_relative = 1e-8);
    }

    #[test]
    fn two_source_intensity_matrix_matches_reference_values() {
        // Independently computed with adaptive 30-digit quadrature on the
        // full line; the ±8-width window leaves only ~1e-15 outside.
        let config = SourceConfiguration::new(&[0.1, 0.35], &[0.4, 0.6]).unwrap();
        let psf = PsfModel::default();
        let model = DetectionModel::direct_imaging_default();
        let c = direct_imaging_cfim(&config, &psf, &model).unwrap();
        let expected = [
            [0.705668385830937592, 0.801473395324836501],
            [0.801473395324836501, 1.46505033863099333],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(c.entries()[(i, j)], expected[i][j], max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn well_separated_sources_decouple() {
        let config = SourceConfiguration::new(&[-5.0, 5.0], &[0.3, 0.7]).unwrap();
        let psf = PsfModel::default();
        let model = DetectionModel::direct_imaging(4001, 8.0).unwrap();
        let c = direct_imaging_cfim(&config, &psf, &model).unwrap();
        assert_abs_diff_eq!(c.entries()[(0, 0)], 1.2, epsilon = 1e-4);
        assert_abs_diff_eq!(c.entries()[(1, 1)], 2.8, epsilon = 1e-4);
        assert_abs_diff_eq!(c.entries()[(0, 1)], 0.0, epsilon = 1e-4);
    }

    #[test]
    fn nine_source_imaging_tends_to_rank_one() {
        let psf = PsfModel::default();
        let model = DetectionModel::direct_imaging_default();
        let ratio = |x: f64| {
            let c = direct_imaging_cfim(&nine_sources(x), &psf, &model).unwrap();
            let eigs = descending_eigenvalues(c.entries());
            eigs[1] / eigs[0]
        };
        let wide = ratio(0.1);
        let tight = ratio(0.01);
        assert!(tight < 1e-2, "second/first eigenvalue ratio {tight:e}");
        assert!(
            tight < wide / 10.0,
            "ratio fell only from {wide:e} to {tight:e}"
        );
    }

    #[test]
    fn unresolved_grid_is_rejected() {
        // 201 nodes across a 250-width window leave ~4 samples per PSF,
        // far too coarse for the composite rule to stabilise.
        let config = equal_weights(&[-60.0, 60.0]);
        let psf = PsfModel::default();
        let model = DetectionModel::direct_imaging(201, 5.0).unwrap();
        match direct_imaging_cfim(&config, &psf, &model) {
            Err(Error::QuadratureNonConvergence { max_change }) => {
                assert!(max_change > QUADRATURE_RELATIVE_TOLERANCE)
            }
            other => panic!("expected a quadrature convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn windowed_sinc_information_matches_reference_value() {
        let config = equal_weights(&[0.0]);
        let psf = PsfModel::sinc(1.0).unwrap();
        let model = DetectionModel::direct_imaging_default();
        let c = direct_imaging_cfim(&config, &psf, &model).unwrap();
        // The sinc intensity's information density decays like 1/u², so the
        // ±8-width window holds 50.638… of the full-line 16π²/3 ≈ 52.64.
        assert_relative_eq!(
            c.entries()[(0, 0)],
            50.6384153764200816,
            max_relative = 1e-7
        );
    }

    #[test]
    fn quantum_bound_dominates_both_detections() {
        let config = SourceConfiguration::new(&[0.1, 0.25, 0.45], &[0.5, 0.3, 0.2]).unwrap();
        let psf = PsfModel::default();
        let q = analytic_qfim(&config).unwrap();
        let spade = spade_cfim(&config, &DetectionModel::spade(20).unwrap()).unwrap();
        let di =
            direct_imaging_cfim(&config, &psf, &DetectionModel::direct_imaging_default()).unwrap();
        let top = descending_eigenvalues(q.entries())[0];
        for c in [spade, di] {
            let gap = q.entries() - c.entries();
            let eigs = descending_eigenvalues(&gap);
            let min = eigs[eigs.len() - 1];
            assert!(
                min >= -1e-8 * top,
                "classical matrix exceeds the quantum bound by {min:e}"
            );
        }
    }

    #[test]
    fn pixel_binning_approaches_the_continuum() {
        let config = equal_weights(&[0.2]);
        let psf = PsfModel::default();
        let model = DetectionModel::direct_imaging_default();
        let mut previous_error = f64::INFINITY;
        for &width in &[0.5, 0.1, 0.02] {
            let c = direct_imaging_pixel_cfim(&config, &psf, &model, width).unwrap();
            let value = c.entries()[(0, 0)];
            assert!(
                value <= 4.0 + 1e-9,
                "binned information {value} above continuum"
            );
            let error = 4.0 - value;
            assert!(
                error < previous_error,
                "binning error grew from {previous_error:e} to {error:e} at width {width}"
            );
            previous_error = error;
        }
        assert!(previous_error < 1e-3);
    }

    #[test]
    fn single_precision_detection_is_consistent() {
        let config = SourceConfiguration::<f32>::equal_weights(&[0.3]).unwrap();
        let model = DetectionModel::<f32>::spade(20).unwrap();
        let c = spade_cfim(&config, &model).unwrap();
        assert_relative_eq!(c.entries()[(0, 0)], 4.0f32, max_relative = 1e-3);

        let psf = PsfModel::<f32>::default();
        let di = DetectionModel::<f32>::direct_imaging_default();
        let cd = direct_imaging_cfim(&config, &psf, &di).unwrap();
        assert_relative_eq!(cd.entries()[(0, 0)], 4.0f32, max_relative = 1e-2);
    }

    #[test]
    fn detection_model_validation_rejects_bad_inputs() {
        assert!(matches!(
            DetectionModel::<f64>::spade(0),
            Err(Error::InvalidDetection { .. })
        ));
        assert!(matches!(
            DetectionModel::<f64>::direct_imaging(100, 8.0),
            Err(Error::InvalidDetection { .. })
        ));
        assert!(matches!(
            DetectionModel::<f64>::direct_imaging(2001, 2.0),
            Err(Error::InvalidDetection { .. })
        ));
        // Even point counts are promoted to the next odd value.
        let model = DetectionModel::<f64>::direct_imaging(300, 8.0).unwrap();
        assert_eq!(model.quadrature_points(), 301);
        // Kind mismatch is caught rather than silently misinterpreted.
        let config = equal_weights(&[0.1]);
        assert!(matches!(
            spade_cfim(&config, &model),
            Err(Error::InvalidDetection { .. })
        ));
    }
}
