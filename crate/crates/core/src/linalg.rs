//! Singular values and the effective-rank functional.
//!
//! The effective rank of a matrix is the exponential of the Shannon entropy of
//! its singular values normalized to sum to one. It is a continuous stand-in for
//! rank: `erank(I_n) = n`, any rank-one matrix gives 1, and scaling the matrix
//! by a nonzero constant leaves it unchanged.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one count as zero.
pub const ZERO_SV_TOLERANCE: f64 = 1e-12;

/// Relative spread below which the kept singular values count as equal.
pub const FLAT_SPECTRUM_TOLERANCE: f64 = 1e-13;

/// Complex channel matrix, rows = transmit elements (antennas or waveguides),
/// columns = users.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(pub DMatrix<Complex64>);

impl ChannelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self(DMatrix::from_row_iterator(rows, cols, data.iter().map(|&v| Complex64::new(v, 0.0))))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// New matrix made of the given rows, in order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self(DMatrix::from_fn(rows.len(), self.cols(), |r, c| self.0[(rows[r], c)]))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Singular values in descending order; `min(M, N)` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum(pub Vec<f64>);

impl SingularSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Normalized spectrum with the near-zero tail clamped to exact zeros.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let top = self.0.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let cut = top * ZERO_SV_TOLERANCE;
        let kept: Vec<f64> = self.0.iter().map(|&s| if s < cut { 0.0 } else { s }).collect();
        let total: f64 = kept.iter().sum();
        Ok(kept.into_iter().map(|s| s / total).collect())
    }

    pub fn effective_rank(&self) -> Result<f64> {
        let p = self.normalized()?;
        // A flat spectrum has erank equal to its support size; the entropy
        // route loses the last ulp there.
        let support: Vec<f64> = p.iter().copied().filter(|&q| q > 0.0).collect();
        let (lo, hi) = support.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &q| (lo.min(q), hi.max(q)));
        if hi - lo <= FLAT_SPECTRUM_TOLERANCE * hi {
            return Ok(support.len() as f64);
        }
        let entropy: f64 = p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.ln()).sum();
        Ok(entropy.exp())
    }
}

pub fn singular_values(h: &ChannelMatrix) -> Result<SingularSpectrum> {
    if !h.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut values = h.0.singular_values().as_slice().to_vec();
    values.sort_by(|a, b| b.total_cmp(a));
    // Round-off can leave tiny negatives in principle; singular values are >= 0.
    for v in &mut values {
        *v = v.max(0.0);
    }
    Ok(SingularSpectrum(values))
}

/// `exp(-sum p_i ln p_i)` over normalized singular values `p_i`.
pub fn effective_rank(h: &ChannelMatrix) -> Result<f64> {
    singular_values(h)?.effective_rank()
}
