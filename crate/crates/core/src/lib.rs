//! Fisher information for localisation of weak incoherent point sources.
//!
//! A scene of `N` point emitters, too dim for multi-photon events and too
//! close for classical resolution, is imaged through a diffraction-limited
//! system. Every detected photon carries a state determined by the source
//! positions, and the information any measurement can extract about those
//! positions is governed by Fisher information matrices:
//!
//! - the quantum matrix bounds every conceivable measurement, computed
//!   either in closed form from Gram matrices of displaced PSF modes
//!   ([`analytic`]) or by truncated mode-space decomposition ([`numeric`]);
//! - classical matrices describe concrete detectors — Hermite–Gauss mode
//!   sorting and direct intensity imaging ([`cfim`]);
//! - a two-level reduction explains the rank-two collapse of deeply
//!   sub-width scenes in closed form ([`qubit`]);
//! - spectral reports, power-law fits, reparameterisations, and Cramér–Rao
//!   bounds turn the matrices into resolution statements ([`spectra`]).
//!
//! Positions are expressed in scaled units `α = χ/(2σ)` for physical
//! position `χ` and PSF width `σ`, which makes every matrix dimensionless;
//! [`spectra::crb_bound`] reintroduces the photon budget.
//!
//! All numerical routines are generic over the scalar type through the
//! [`Real`] trait (`f64` for production, `f32` exercised in tests); the
//! `*64` aliases below pin the common concrete choices.
//!
//! # Example
//!
//! ```
//! use locfim::{analytic_qfim, SourceConfig64};
//!
//! // Three equispaced sources, a third of a PSF width apart.
//! let config = SourceConfig64::equal_weights(&[0.3, 0.6, 0.9]).unwrap();
//! let q = analytic_qfim(&config).unwrap();
//! assert_eq!(q.dim(), 3);
//! ```
#![forbid(unsafe_code)]

pub mod analytic;
pub mod bessel;
pub mod cfim;
pub mod eigen;
pub mod error;
pub mod gram;
pub mod model;
pub mod numeric;
pub mod qubit;
pub mod scalar;
pub mod spectra;

pub use analytic::{analytic_qfim, AnalyticWorkspace};
pub use cfim::{
    direct_imaging_cfim, direct_imaging_pixel_cfim, spade_cfim, spade_probabilities, DetectionKind,
    DetectionModel, ProbabilityModel,
};
pub use error::{Error, Result};
pub use model::{
    position_labels, relative_deviation, FisherMatrix, MatrixKind, PhotonBudget, PsfKind, PsfModel,
    SourceConfiguration, ValidationMode,
};
pub use numeric::{
    build_truncated_state, converged_qfim, numeric_qfim, sld_matrices, weak_commutativity_residual,
    ConvergedQfim, ModeBasis, TruncatedState,
};
pub use qubit::{eigen_core, moments, qubit_qfim, qubit_state, QubitCore, QubitMoments};
pub use scalar::Real;
pub use spectra::{
    crb_bound, eigen_report, fit_scaling, reparameterize, CrbBound, EigenvalueFit, ScalingFit,
    SpectralReport,
};

/// Source configuration over `f64`.
pub type SourceConfig64 = model::SourceConfiguration<f64>;
/// PSF description over `f64`.
pub type Psf64 = model::PsfModel<f64>;
/// Photon budget over `f64`.
pub type Budget64 = model::PhotonBudget<f64>;
/// Fisher matrix over `f64`.
pub type Fisher64 = model::FisherMatrix<f64>;
/// Detection model over `f64`.
pub type Detection64 = cfim::DetectionModel<f64>;
/// Truncated mode-space state over `f64`.
pub type TruncatedState64 = numeric::TruncatedState<f64>;
/// Spectral report over `f64`.
pub type Report64 = spectra::SpectralReport<f64>;
