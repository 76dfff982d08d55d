//! Gram matrices of the source envelopes and their derivatives.
//!
//! For Gaussian envelopes every inner product is known in closed form, and the
//! whole geometry of the estimation problem is captured by a `2N x 2N`
//! Grammian over the non-orthogonal family "envelope of source i" plus
//! "derivative of envelope of source i". The closed-form information matrix
//! and the block inversion helpers consume the blocks assembled here.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::SourceConfiguration;
use crate::scalar::Real;

/// Largest 1-norm condition number of the envelope Gram matrix for which the
/// closed-form route is trusted. Beyond this, roughly no significant digits
/// survive the inversion in double precision.
pub const GRAM_CONDITION_LIMIT: f64 = 1e15;

/// Overlap of two unit-intensity Gaussian envelopes centred at `ai` and `aj`,
/// `exp(-(ai - aj)^2 / 2)` in width units.
pub fn coherent_overlap<T: Real>(ai: T, aj: T) -> T {
    let d = ai - aj;
    (-d * d * T::c(0.5)).exp()
}

/// The Gram blocks of a source configuration.
///
/// Block `aa` holds envelope-envelope overlaps, `ad` envelope-derivative
/// overlaps and `dd` derivative-derivative overlaps (the derivative family is
/// the raising-operator image of the envelopes). `d_alpha` and `d_w` are the
/// diagonals of position and weight used when assembling them.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlocks<T: Real> {
    pub upsilon_aa: DMatrix<T>,
    pub upsilon_ad: DMatrix<T>,
    pub upsilon_dd: DMatrix<T>,
    pub d_alpha: DVector<T>,
    pub d_w: DVector<T>,
    /// 1-norm condition number of `upsilon_aa`.
    pub condition_estimate: T,
}

impl<T: Real> GramBlocks<T> {
    /// Number of sources.
    pub fn len(&self) -> usize {
        self.d_alpha.len()
    }

    /// True when there are no sources (cannot happen for built blocks).
    pub fn is_empty(&self) -> bool {
        self.d_alpha.is_empty()
    }

    /// Transposed envelope-derivative block.
    pub fn upsilon_da(&self) -> DMatrix<T> {
        self.upsilon_ad.transpose()
    }

    /// Assemble the full `2N x 2N` Grammian
    /// `[[aa, ad], [ad^T, dd]]`. It is positive definite for distinct
    /// sources; mostly useful for cross-checks.
    pub fn full_grammian(&self) -> DMatrix<T> {
        let n = self.len();
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.upsilon_aa[(i, j)];
                g[(i, n + j)] = self.upsilon_ad[(i, j)];
                g[(n + i, j)] = self.upsilon_ad[(j, i)];
                g[(n + i, n + j)] = self.upsilon_dd[(i, j)];
            }
        }
        g
    }
}

/// Cholesky factorisation of the envelope block, shared by the closed-form
/// routines. Fails with [`Error::ConditioningFailure`] when the block is not
/// numerically positive definite.
pub(crate) fn envelope_cholesky<T: Real>(upsilon_aa: &DMatrix<T>) -> Result<Cholesky<T, Dyn>> {
    Cholesky::new(upsilon_aa.clone()).ok_or(Error::ConditioningFailure {
        condition: f64::INFINITY,
    })
}

fn one_norm<T: Real>(m: &DMatrix<T>) -> T {
    let mut best = T::zero();
    for j in 0..m.ncols() {
        let s = m.column(j).iter().fold(T::zero(), |acc, v| acc + v.abs());
        if s > best {
            best = s;
        }
    }
    best
}

/// Build all Gram blocks for a configuration with pairwise-distinct sources.
///
/// The returned condition estimate is exact (the explicit inverse of the, at
/// most handful-sized, envelope block is affordable); configurations whose
/// estimate exceeds [`GRAM_CONDITION_LIMIT`] are rejected because the
/// closed-form information matrix would carry no correct digits.
pub fn build_gram_blocks<T: Real>(config: &SourceConfiguration<T>) -> Result<GramBlocks<T>> {
    let n = config.len();
    let alphas = config.alphas();

    let mut aa = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            aa[(i, j)] = coherent_overlap(alphas[i], alphas[j]);
        }
    }

    let chol = envelope_cholesky(&aa)?;
    let inv = chol.inverse();
    let condition = one_norm(&aa) * one_norm(&inv);
    if condition.as_f64() > GRAM_CONDITION_LIMIT {
        return Err(Error::ConditioningFailure {
            condition: condition.as_f64(),
        });
    }

    // ad: row i scaled by alpha_i; dd: alpha_i alpha_j overlap + overlap.
    let mut ad = DMatrix::zeros(n, n);
    let mut dd = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            ad[(i, j)] = alphas[i] * aa[(i, j)];
            dd[(i, j)] = (alphas[i] * alphas[j] + T::one()) * aa[(i, j)];
        }
    }

    Ok(GramBlocks {
        upsilon_aa: aa,
        upsilon_ad: ad,
        upsilon_dd: dd,
        d_alpha: alphas.clone(),
        d_w: config.weights().clone(),
        condition_estimate: condition,
    })
}
