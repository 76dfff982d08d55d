//! Run configuration schema and its resolution into library types.
//!
//! Configurations are JSON with a strict schema: unknown keys are rejected
//! so that a typo in a field name cannot silently fall back to a default.
//! Everything the library needs (scene pattern, point-spread function,
//! detection layout) is resolved here, ahead of any numerics, so that bad
//! input fails with exit code 2 before a single matrix is built.

use locfim::cfim::{DEFAULT_HALF_WIDTH, DEFAULT_QUADRATURE_POINTS, DEFAULT_SPADE_MODES};
use locfim::spectra::DEFAULT_RANK_TOLERANCE;
use locfim::{Budget64, Psf64, SourceConfig64};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// One experiment: a scene, a computation (or two, for side-by-side runs),
/// an optional sweep of the scene scale, and output selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sources: SourcesSpec,
    #[serde(default)]
    pub psf: PsfSpec,
    pub computation: Computation,
    /// Second computation slot for the `compare` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub versus: Option<Computation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub detection: DetectionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// Scene description: positions spelled out one by one, or generated from a
/// count and a spacing pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourcesSpec {
    Explicit(Vec<SourceEntry>),
    Generator(GeneratorSpec),
}

/// One explicit source. Positions are given either directly in scaled units
/// (`alpha`) or as a physical displacement (`chi`), which is converted as
/// `alpha = chi / (2 sigma)` using the point-spread-function width.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    pub weight: f64,
}

/// Generated scene: `count` equal-weight sources on a spacing pattern. The
/// pattern is multiplied by the sweep parameter, so a generator plus a sweep
/// describes a family of scenes that shrink or grow together.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub count: usize,
    #[serde(default)]
    pub spacing: SpacingSpec,
    /// Shift the pattern so it straddles the origin: equispaced patterns
    /// become `i - ceil(count / 2)`, explicit offsets have their mean
    /// removed.
    #[serde(default)]
    pub centered: bool,
}

/// Spacing pattern of a generated scene.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpacingSpec {
    /// Offsets `1, 2, ..., count`.
    #[default]
    Equispaced,
    /// Explicit offsets, one per source.
    Offsets(Vec<f64>),
}

/// Point-spread function selection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsfSpec {
    #[serde(default)]
    pub kind: PsfKindSpec,
    /// Width used only to convert physical `chi` positions; the matrices
    /// themselves are computed in dimensionless units.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

impl Default for PsfSpec {
    fn default() -> Self {
        Self {
            kind: PsfKindSpec::Gaussian,
            sigma: default_sigma(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsfKindSpec {
    #[default]
    Gaussian,
    Sinc,
}

/// What to compute at each scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Computation {
    QfimAnalytic,
    QfimNumeric,
    Qubit,
    CfimSpade,
    CfimDirect,
}

impl Computation {
    pub fn label(self) -> &'static str {
        match self {
            Computation::QfimAnalytic => "qfim_analytic",
            Computation::QfimNumeric => "qfim_numeric",
            Computation::Qubit => "qubit",
            Computation::CfimSpade => "cfim_spade",
            Computation::CfimDirect => "cfim_direct",
        }
    }

    /// Computations built on the Gaussian mode algebra reject other
    /// envelopes up front rather than silently ignoring the mismatch.
    fn requires_gaussian(self) -> bool {
        matches!(
            self,
            Computation::QfimAnalytic | Computation::Qubit | Computation::CfimSpade
        )
    }
}

/// Sweep of the scene scale factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Name of the swept parameter; only the scale factor `x` exists.
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default)]
    pub log_scale: bool,
}

impl SweepSpec {
    /// The sweep grid, ascending.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                if self.log_scale {
                    self.from * (self.to / self.from).powf(t)
                } else {
                    self.from + (self.to - self.from) * t
                }
            })
            .collect()
    }
}

/// Which analyses run on the computed matrices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Emit eigenvalue rows rather than raw matrix elements.
    #[serde(default = "default_true")]
    pub eigen: bool,
    /// Fit log-log scaling slopes across the sweep (sidecar output).
    #[serde(default)]
    pub fit: bool,
    /// Report the numerical rank alongside the eigenvalues.
    #[serde(default = "default_true")]
    pub rank: bool,
    /// Compute the covariance bound of a single scene (needs a budget).
    #[serde(default)]
    pub crb: bool,
    /// Relative eigenvalue threshold for rank decisions.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            eigen: true,
            fit: false,
            rank: true,
            crb: false,
            rel_tol: default_rel_tol(),
        }
    }
}

/// Detection-system layout for the classical computations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSpec {
    #[serde(default = "default_modes")]
    pub spade_modes: usize,
    /// Mode-sorter alignment point in scaled units (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spade_center: Option<f64>,
    /// Align the mode sorter on the scene centroid instead.
    #[serde(default)]
    pub center_on_centroid: bool,
    #[serde(default = "default_points")]
    pub quadrature_points: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Finite detector pixels of this width; omitted means a continuum
    /// detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_width: Option<f64>,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        Self {
            spade_modes: default_modes(),
            spade_center: None,
            center_on_centroid: false,
            quadrature_points: default_points(),
            half_width: default_half_width(),
            pixel_width: None,
        }
    }
}

/// Photon budget for covariance bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub windows: u64,
    pub photon_probability: f64,
}

/// Output selection; command-line flags override both fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

fn default_sigma() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_rel_tol() -> f64 {
    DEFAULT_RANK_TOLERANCE
}

fn default_modes() -> usize {
    DEFAULT_SPADE_MODES
}

fn default_points() -> usize {
    DEFAULT_QUADRATURE_POINTS
}

fn default_half_width() -> f64 {
    DEFAULT_HALF_WIDTH
}

/// Scene pattern after generator expansion and unit conversion; multiplied
/// by the sweep value to obtain a concrete configuration.
#[derive(Debug, Clone)]
pub struct ScenePattern {
    alphas: Vec<f64>,
    weights: Vec<f64>,
}

impl ScenePattern {
    /// Concrete configuration at scale `x` (1 for single-scene runs).
    pub fn at_scale(&self, x: f64) -> Result<SourceConfig64, Failure> {
        let scaled: Vec<f64> = self.alphas.iter().map(|a| a * x).collect();
        Ok(SourceConfig64::new(&scaled, &self.weights)?)
    }
}

/// Expand the sources block into a scene pattern.
pub fn resolve_pattern(config: &RunConfig) -> Result<ScenePattern, Failure> {
    match &config.sources {
        SourcesSpec::Explicit(entries) => {
            if entries.is_empty() {
                return Err(Failure::Config("sources.explicit is empty".into()));
            }
            let mut alphas = Vec::with_capacity(entries.len());
            let mut weights = Vec::with_capacity(entries.len());
            for (index, entry) in entries.iter().enumerate() {
                let alpha = match (entry.alpha, entry.chi) {
                    (Some(a), None) => a,
                    (None, Some(chi)) => chi / (2.0 * config.psf.sigma),
                    _ => {
                        return Err(Failure::Config(format!(
                            "source {} must set exactly one of alpha and chi",
                            index + 1
                        )))
                    }
                };
                alphas.push(alpha);
                weights.push(entry.weight);
            }
            Ok(ScenePattern { alphas, weights })
        }
        SourcesSpec::Generator(generator) => {
            if generator.count == 0 {
                return Err(Failure::Config("generator.count must be at least 1".into()));
            }
            let mut alphas: Vec<f64> = match &generator.spacing {
                SpacingSpec::Equispaced => (1..=generator.count).map(|i| i as f64).collect(),
                SpacingSpec::Offsets(offsets) => {
                    if offsets.len() != generator.count {
                        return Err(Failure::Config(format!(
                            "generator.count is {} but {} offsets were given",
                            generator.count,
                            offsets.len()
                        )));
                    }
                    offsets.clone()
                }
            };
            if generator.centered {
                let shift = match &generator.spacing {
                    SpacingSpec::Equispaced => (generator.count as f64 / 2.0).ceil(),
                    SpacingSpec::Offsets(_) => alphas.iter().sum::<f64>() / generator.count as f64,
                };
                for a in &mut alphas {
                    *a -= shift;
                }
            }
            let weights = vec![1.0 / generator.count as f64; generator.count];
            Ok(ScenePattern { alphas, weights })
        }
    }
}

/// Build the validated point-spread function.
pub fn resolve_psf(config: &RunConfig) -> Result<Psf64, Failure> {
    let psf = match config.psf.kind {
        PsfKindSpec::Gaussian => Psf64::gaussian(config.psf.sigma),
        PsfKindSpec::Sinc => Psf64::sinc(config.psf.sigma),
    };
    Ok(psf?)
}

/// Build the validated photon budget, when one is configured.
pub fn resolve_budget(config: &RunConfig) -> Result<Option<Budget64>, Failure> {
    match &config.budget {
        None => Ok(None),
        Some(spec) => Ok(Some(Budget64::new(spec.windows, spec.photon_probability)?)),
    }
}

/// Cross-field checks that serde cannot express. `comparing` says whether
/// the config arrived through the compare subcommand.
pub fn validate(config: &RunConfig, comparing: bool) -> Result<(), Failure> {
    if comparing && config.versus.is_none() {
        return Err(Failure::Config(
            "compare needs a second computation in the versus field".into(),
        ));
    }
    if !comparing && config.versus.is_some() {
        return Err(Failure::Config(
            "the versus field belongs to the compare subcommand".into(),
        ));
    }
    if comparing && config.sweep.is_none() {
        return Err(Failure::Config("compare needs a sweep".into()));
    }
    if let Some(sweep) = &config.sweep {
        if sweep.parameter != "x" {
            return Err(Failure::Config(format!(
                "unknown sweep parameter {:?}; only the scale factor x can be swept",
                sweep.parameter
            )));
        }
        if sweep.points < 2 {
            return Err(Failure::Config("sweep.points must be at least 2".into()));
        }
        if !sweep.from.is_finite() || !sweep.to.is_finite() || sweep.from >= sweep.to {
            return Err(Failure::Config(
                "sweep bounds must be finite with from < to".into(),
            ));
        }
        if sweep.log_scale && sweep.from <= 0.0 {
            return Err(Failure::Config(
                "log-scale sweeps need a strictly positive lower bound".into(),
            ));
        }
    }
    let mut computations = vec![config.computation];
    computations.extend(config.versus);
    for computation in &computations {
        if computation.requires_gaussian() && config.psf.kind != PsfKindSpec::Gaussian {
            return Err(Failure::Config(format!(
                "{} is defined for the gaussian point-spread function only",
                computation.label()
            )));
        }
    }
    if config.analysis.fit {
        if comparing {
            return Err(Failure::Config(
                "scaling fits apply to single-computation runs; fit each side separately".into(),
            ));
        }
        if config.sweep.is_none() || !config.analysis.eigen {
            return Err(Failure::Config(
                "analysis.fit needs a sweep with analysis.eigen enabled".into(),
            ));
        }
    }
    if comparing && !config.analysis.eigen {
        return Err(Failure::Config(
            "compare output is eigenvalue-based; analysis.eigen cannot be disabled".into(),
        ));
    }
    if config.analysis.crb {
        if config.budget.is_none() {
            return Err(Failure::Config("analysis.crb needs a photon budget".into()));
        }
        if config.sweep.is_some() {
            return Err(Failure::Config(
                "analysis.crb describes a single scene; remove the sweep".into(),
            ));
        }
    }
    if !(config.analysis.rel_tol.is_finite() && config.analysis.rel_tol > 0.0) {
        return Err(Failure::Config(
            "analysis.rel_tol must be strictly positive".into(),
        ));
    }
    if config.detection.pixel_width.is_some() && !computations.contains(&Computation::CfimDirect) {
        log::warn!("detection.pixel_width is set but no direct-imaging computation runs");
    }
    Ok(())
}
