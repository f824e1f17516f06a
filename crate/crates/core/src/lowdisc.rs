//! Low-discrepancy nodes (radical inverse, Halton), exact one-dimensional star
//! discrepancy and the Koksma-Hlawka error bound.

use thiserror::Error;

/// Bases for the Halton coordinates, one prime per dimension.
pub const HALTON_PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LowDiscError {
    #[error("Halton dimension {0} is outside 1..=8")]
    Dimension(usize),
    #[error("node index {index} precedes the sequence start {start}")]
    IndexBeforeStart { index: u64, start: u64 },
    #[error("point {value} at position {position} is outside [0, 1)")]
    PointOutOfRange { position: usize, value: f64 },
    #[error("point set is empty")]
    Empty,
    #[error("radical inverse needs k >= 1 and base >= 2 (got k = {k}, base = {base})")]
    InvalidRadical { k: u64, base: u64 },
}

/// Digit reversal of `k` in base `b`: `Σ a_j b^j ↦ Σ a_j b^(-j-1)`.
pub fn radical_inverse(k: u64, base: u64) -> Result<f64, LowDiscError> {
    if k == 0 || base < 2 {
        return Err(LowDiscError::InvalidRadical { k, base });
    }
    Ok(radical_inverse_unchecked(k, base))
}

#[inline]
fn radical_inverse_unchecked(mut k: u64, base: u64) -> f64 {
    // Accumulate digits as an integer numerator over base^m while it fits,
    // which keeps the base-2 values exact.
    let inv = 1.0 / base as f64;
    let mut numerator: u64 = 0;
    let mut denominator: u64 = 1;
    let mut tail = 0.0;
    let mut scale = 1.0;
    while k > 0 {
        let digit = k % base;
        k /= base;
        match denominator.checked_mul(base) {
            Some(d) if scale == 1.0 => {
                numerator = numerator * base + digit;
                denominator = d;
            }
            _ => {
                scale *= inv;
                tail += digit as f64 * scale;
            }
        }
    }
    // 64-digit base-2 indices would otherwise round up to exactly 1
    ((numerator as f64 + tail) / denominator as f64).min(1.0 - f64::EPSILON / 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HaltonSequence {
    bases: Vec<u64>,
    start_index: u64,
}

impl HaltonSequence {
    pub fn new(dim: usize) -> Result<Self, LowDiscError> {
        if dim == 0 || dim > HALTON_PRIMES.len() {
            return Err(LowDiscError::Dimension(dim));
        }
        Ok(Self {
            bases: HALTON_PRIMES[..dim].to_vec(),
            start_index: 1,
        })
    }

    /// One-dimensional base-2 sequence.
    pub fn van_der_corput() -> Self {
        Self::new(1).expect("dimension 1 is valid")
    }

    pub fn with_start(mut self, start_index: u64) -> Self {
        self.start_index = start_index.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[u64] {
        &self.bases
    }

    pub fn start_index(&self) -> u64 {
        self.start_index
    }

    /// Writes node `k` into `out[..dim]`.
    pub fn fill_point(&self, k: u64, out: &mut [f64]) -> Result<(), LowDiscError> {
        if k < self.start_index {
            return Err(LowDiscError::IndexBeforeStart {
                index: k,
                start: self.start_index,
            });
        }
        for (x, &b) in out.iter_mut().zip(&self.bases) {
            *x = radical_inverse_unchecked(k, b);
        }
        Ok(())
    }

    pub fn point(&self, k: u64) -> Result<Vec<f64>, LowDiscError> {
        let mut p = vec![0.0; self.dim()];
        self.fill_point(k, &mut p)?;
        Ok(p)
    }

    /// The first `n` nodes starting at `start_index`.
    pub fn nodes(&self, n: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        (self.start_index..self.start_index + n as u64).map(|k| {
            self.point(k).expect("indices start at start_index")
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscrepancyReport {
    pub n: usize,
    pub d_star: f64,
    /// The universal bounds `1/(2n) <= D* <= 1` hold for the computed value.
    pub bound_holds: bool,
}

/// Exact star discrepancy of a one-dimensional point set:
/// `1/(2n) + max_i |x_(i) - (2i - 1)/(2n)|` over the sorted points.
pub fn star_discrepancy_1d(points: &[f64]) -> Result<DiscrepancyReport, LowDiscError> {
    if points.is_empty() {
        return Err(LowDiscError::Empty);
    }
    if let Some((position, &value)) = points
        .iter()
        .enumerate()
        .find(|(_, x)| !(0.0..1.0).contains(*x))
    {
        return Err(LowDiscError::PointOutOfRange { position, value });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let two_n = 2.0 * n as f64;
    let worst = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - (2 * i + 1) as f64 / two_n).abs())
        .fold(0.0, f64::max);
    let d_star = 1.0 / two_n + worst;
    Ok(DiscrepancyReport {
        n,
        d_star,
        bound_holds: d_star >= 1.0 / two_n && d_star <= 1.0,
    })
}

/// `V(f) · D*`, the certified bound on the quasi-Monte Carlo integration error.
pub fn koksma_hlawka_bound(variation: f64, d_star: f64) -> f64 {
    variation * d_star
}
