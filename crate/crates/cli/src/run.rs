//! Sweep evaluation: scenes to matrices to spectral rows.
//!
//! Sweep points are independent, so they are evaluated in parallel; results
//! are collected back in grid order, which keeps output files byte-identical
//! no matter how the scheduler interleaved the work. When several points
//! fail, the error of the earliest grid point is reported, for the same
//! reason.

use locfim::{
    converged_qfim, direct_imaging_cfim, direct_imaging_pixel_cfim, eigen_report, fit_scaling,
    moments, qubit_qfim, spade_cfim, AnalyticWorkspace, Detection64, Fisher64, Psf64, QubitCore,
    Report64,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Computation, DetectionSpec, RunConfig, ScenePattern};
use crate::Failure;

/// Gram condition number above which the closed form is flagged as running
/// out of headroom (it errors out entirely three decades later).
const GRAM_CONDITION_WARNING: f64 = 1e12;
/// Truncation defect above which a spectral-route result is flagged.
const TRUNCATION_DEFECT_WARNING: f64 = 1e-8;
/// Two-level reduction denominators below this are flagged as close to the
/// degenerate regime.
const QUBIT_DENOMINATOR_WARNING: f64 = 1e-9;

/// Everything computed at one sweep point.
pub struct PointRow {
    /// Sweep value the scene was scaled by.
    pub x: f64,
    /// Scene size: distance between the outermost sources.
    pub size: f64,
    pub matrix: Fisher64,
    /// Spectral report, when eigenvalue output is enabled.
    pub report: Option<Report64>,
    pub diagnostics: PointDiagnostics,
}

/// Numerical health indicators of one computed matrix, carried into the
/// JSON payload and the metadata sidecar.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PointDiagnostics {
    pub x: f64,
    pub size: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gram_condition: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubit_denominator: Option<f64>,
    /// Set when the computation sailed close to its documented limits; the
    /// thresholds are fixed in this module.
    pub warning: bool,
}

/// Result of a log-log scaling fit across the sweep, for the sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub window: (f64, f64),
    pub points_used: usize,
    pub branches: Vec<BranchFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchFit {
    pub eigenvalue: usize,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Evaluate one computation at one concrete scale.
pub fn evaluate_point(
    config: &RunConfig,
    pattern: &ScenePattern,
    psf: &Psf64,
    computation: Computation,
    x: f64,
) -> Result<PointRow, Failure> {
    let scene = pattern.at_scale(x)?;
    let size = scene.extent();
    let mut diagnostics = PointDiagnostics {
        x,
        size,
        ..PointDiagnostics::default()
    };
    let matrix = match computation {
        Computation::QfimAnalytic => {
            let workspace = AnalyticWorkspace::new(&scene)?;
            let condition = workspace.gram().condition_estimate;
            diagnostics.gram_condition = Some(condition);
            diagnostics.warning = condition > GRAM_CONDITION_WARNING;
            workspace.qfim()
        }
        Computation::QfimNumeric => {
            let converged = converged_qfim(&scene, psf)?;
            diagnostics.basis_dim = Some(converged.dim);
            diagnostics.truncation_defect = Some(converged.truncation_defect);
            diagnostics.warning = converged.truncation_defect > TRUNCATION_DEFECT_WARNING;
            converged.matrix
        }
        Computation::Qubit => {
            let denominator = QubitCore::from_moments(&moments(&scene)).a_denom;
            diagnostics.qubit_denominator = Some(denominator);
            diagnostics.warning = denominator.abs() < QUBIT_DENOMINATOR_WARNING;
            qubit_qfim(&scene)?
        }
        Computation::CfimSpade => {
            let detection = spade_detection(&config.detection, &scene)?;
            spade_cfim(&scene, &detection)?
        }
        Computation::CfimDirect => {
            let detection = Detection64::direct_imaging(
                config.detection.quadrature_points,
                config.detection.half_width,
            )?;
            match config.detection.pixel_width {
                None => direct_imaging_cfim(&scene, psf, &detection)?,
                Some(width) => direct_imaging_pixel_cfim(&scene, psf, &detection, width)?,
            }
        }
    };
    let report = if config.analysis.eigen || config.analysis.rank {
        Some(eigen_report(&matrix, config.analysis.rel_tol))
    } else {
        None
    };
    Ok(PointRow {
        x,
        size,
        matrix,
        report,
        diagnostics,
    })
}

fn spade_detection(
    spec: &DetectionSpec,
    scene: &locfim::SourceConfig64,
) -> Result<Detection64, Failure> {
    let center = if spec.center_on_centroid {
        scene.centroid()
    } else {
        spec.spade_center.unwrap_or(0.0)
    };
    Ok(Detection64::spade_centered(spec.spade_modes, center)?)
}

/// Evaluate one computation across the whole grid, in parallel, preserving
/// grid order.
pub fn evaluate_sweep(
    config: &RunConfig,
    pattern: &ScenePattern,
    psf: &Psf64,
    computation: Computation,
    grid: &[f64],
) -> Result<Vec<PointRow>, Failure> {
    let results: Vec<Result<PointRow, Failure>> = grid
        .par_iter()
        .map(|&x| evaluate_point(config, pattern, psf, computation, x))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for result in results {
        rows.push(result?);
    }
    Ok(rows)
}

/// Fit scaling slopes over the sweep. Eigenvalue branches that have sunk to
/// the roundoff floor are dropped from the tail (with a warning) rather
/// than aborting the run: the leading branches are still meaningful.
pub fn fit_sweep(rows: &[PointRow]) -> Result<FitSummary, Failure> {
    let sweep: Vec<(f64, Report64)> = rows
        .iter()
        .map(|row| {
            let report = row.report.clone().expect("fit requires eigen reports");
            (row.size, report)
        })
        .collect();
    let mut branches = sweep
        .iter()
        .map(|(_, report)| report.eigenvalues().len())
        .min()
        .unwrap_or(0);
    loop {
        match fit_scaling(&sweep, None, Some(branches)) {
            Ok(fit) => {
                let full = sweep[0].1.eigenvalues().len();
                if branches < full {
                    log::warn!(
                        "scaling fit limited to {branches} of {full} eigenvalue branches; the rest underflow in the fit window"
                    );
                }
                return Ok(FitSummary {
                    window: fit.window(),
                    points_used: fit.points_used(),
                    branches: fit
                        .fits()
                        .iter()
                        .map(|f| BranchFit {
                            eigenvalue: f.index,
                            slope: f.slope,
                            intercept: f.intercept,
                            stderr: f.stderr,
                        })
                        .collect(),
                });
            }
            Err(locfim::Error::DegenerateFit { index }) if index > 1 => {
                branches = index - 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}
