//! Monte Carlo, shift and quasi-Monte Carlo estimators over a common
//! consumption-model abstraction.
//!
//! Monte Carlo lays independent samples end to end on the tape: sample `k`
//! starts one past the last cell read by sample `k - 1`. The shift evaluates
//! sample `k` on the tape shifted by `k` (cursor start `1 + k`), so
//! consecutive samples share every cell but the first, together with whatever
//! the model cached in those cells.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::lowdisc::HaltonSequence;
use crate::tape::{Tape, TapeCursor, TapeError};

/// Largest dimension accepted by [`FunctionModel`] and [`permuted`].
pub const MAX_FIXED_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error("non-finite state component at step {step}: {state:?}")]
    NonFinite { step: u64, state: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("sample {index} failed: {source}")]
    Sample { index: u64, source: ModelError },
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error("function expects dimension {expected}, node sequence has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("iterated-logarithm band needs n >= 3 (got {0})")]
    UndefinedBand(u64),
    #[error("batch means need batch size >= 2 and at least two batches (len {len}, batch {batch})")]
    StreamTooShort { len: usize, batch: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Shift,
    Qmc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Shift => "shift",
            Method::Qmc => "qmc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome flags of one evaluation; the cell count is read off the cursor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Evaluation {
    /// The model hit a safety cap (censored chain, truncated tree).
    pub truncated: bool,
}

/// A functional `F(U_1, U_2, ...)` reading a finite, possibly random, prefix
/// of the tape through a cursor and writing one value per payoff.
pub trait ConsumptionModel {
    fn payoff_names(&self) -> Vec<String>;

    /// `Some(d)` when every evaluation reads exactly `d` cells.
    fn fixed_dimension(&self) -> Option<usize> {
        None
    }

    /// Must be deterministic in the cell values read.
    fn evaluate(&self, cursor: &mut TapeCursor<'_>, payoff: &mut [f64]) -> Result<Evaluation, ModelError>;
}

/// Welford one-pass mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance, defined for two or more inputs.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }

    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }

    pub fn std_error(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PayoffEstimate {
    pub name: String,
    pub mean: f64,
    /// Absent for quasi-Monte Carlo and for fewer than two samples. For the
    /// shift this is the batch-means standard error, since its samples are
    /// correlated.
    pub stderr: Option<f64>,
    /// Batch-means estimate of the asymptotic variance coefficient; compare
    /// with `variance` to see whether correlation helps or hurts the method.
    pub batch_variance: Option<f64>,
    pub variance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EstimatorReport {
    pub method: Method,
    pub params: Vec<(String, String)>,
    /// Tape seed; absent for quasi-Monte Carlo.
    pub seed: Option<u64>,
    pub n_samples: u64,
    pub estimates: Vec<PayoffEstimate>,
    pub stats: Vec<RunningStats>,
    /// Newly materialized tape cells during the run.
    pub rng_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub truncated_count: u64,
    pub elapsed: Duration,
}

impl EstimatorReport {
    pub fn calls_per_sample(&self) -> f64 {
        self.rng_calls as f64 / self.n_samples as f64
    }

    pub fn cache_hit_rate(&self) -> Option<f64> {
        let total = self.cache_hits + self.cache_misses;
        (total > 0).then(|| self.cache_hits as f64 / total as f64)
    }

    pub fn estimate(&self, name: &str) -> Option<&PayoffEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.estimate(name).map(|e| e.mean)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.estimate(name).and_then(|e| e.stderr)
    }

    /// Iterated-logarithm half-width for payoff `name`.
    pub fn lil_band(&self, name: &str) -> Option<f64> {
        let i = self.estimates.iter().position(|e| e.name == name)?;
        lil_band(self.stats.get(i)?).ok()
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.params.push((key.into(), value.to_string()));
        self
    }
}

/// Monte Carlo: independent samples on disjoint tape segments.
pub fn mc_estimate<M: ConsumptionModel + ?Sized>(
    model: &M,
    n: u64,
    tape: &mut Tape,
) -> Result<EstimatorReport, EstimateError> {
    run_on_tape(Method::Mc, model, n, tape, None, |_, _| {})
}

/// Shift: sample `k` is the model evaluated on the tape shifted by `k`.
pub fn shift_estimate<M: ConsumptionModel + ?Sized>(
    model: &M,
    n: u64,
    tape: &mut Tape,
) -> Result<EstimatorReport, EstimateError> {
    run_on_tape(Method::Shift, model, n, tape, None, |_, _| {})
}

/// Runs a tape-driven estimator, calling `observe(k, payoff)` after each sample.
///
/// `batch_size` sets the batch length of the batch-means variance (default
/// `⌈√n⌉`).
pub fn run_on_tape<M, O>(
    method: Method,
    model: &M,
    n: u64,
    tape: &mut Tape,
    batch_size: Option<usize>,
    mut observe: O,
) -> Result<EstimatorReport, EstimateError>
where
    M: ConsumptionModel + ?Sized,
    O: FnMut(u64, &[f64]),
{
    assert!(method != Method::Qmc, "quasi-Monte Carlo does not read a tape");
    if n == 0 {
        return Err(EstimateError::NoSamples);
    }
    let names = model.payoff_names();
    let mut payoff = vec![0.0; names.len()];
    let mut stats = vec![RunningStats::new(); names.len()];
    let batch = batch_size.unwrap_or_else(|| default_batch_size(n as usize));
    let mut batches = vec![BatchMeans::new(batch); names.len()];
    let before = tape.stats();
    let base = tape.window_start();
    let mut next_start = base;
    let mut truncated_count = 0;
    let clock = Instant::now();

    for k in 0..n {
        let start = match method {
            Method::Shift => base + k,
            _ => next_start,
        };
        let mut cursor = tape.cursor(start)?;
        let eval = model
            .evaluate(&mut cursor, &mut payoff)
            .map_err(|source| EstimateError::Sample { index: k, source })?;
        let consumed = cursor.consumed();
        if eval.truncated {
            truncated_count += 1;
        }
        for ((s, b), &x) in stats.iter_mut().zip(&mut batches).zip(&payoff) {
            s.push(x);
            b.push(x);
        }
        observe(k, &payoff);
        match method {
            Method::Shift => tape.advance_window(start + 1)?,
            _ => {
                next_start = start + consumed;
                tape.advance_window(next_start)?;
            }
        }
    }

    let elapsed = clock.elapsed();
    let after = tape.stats();
    Ok(EstimatorReport {
        method,
        params: Vec::new(),
        seed: Some(tape.seed()),
        n_samples: n,
        estimates: names
            .into_iter()
            .zip(stats.iter().zip(&batches))
            .map(|(name, (s, b))| {
                let batch_variance = b.variance();
                let stderr = match method {
                    Method::Shift => batch_variance
                        .map(|v| (v / n as f64).sqrt())
                        .or_else(|| s.std_error()),
                    _ => s.std_error(),
                };
                PayoffEstimate {
                    name,
                    mean: s.mean(),
                    stderr,
                    batch_variance,
                    variance: s.variance(),
                }
            })
            .collect(),
        stats,
        rng_calls: after.cells_generated - before.cells_generated,
        cache_hits: after.memo_hits - before.memo_hits,
        cache_misses: after.memo_misses - before.memo_misses,
        truncated_count,
        elapsed,
    })
}

/// Deterministic average `(1/n) Σ f(ξ_k)` over the first `n` nodes of `seq`.
pub fn qmc_estimate<F>(
    f: F,
    dim: usize,
    n: u64,
    seq: &HaltonSequence,
) -> Result<EstimatorReport, EstimateError>
where
    F: Fn(&[f64]) -> f64,
{
    if n == 0 {
        return Err(EstimateError::NoSamples);
    }
    if seq.dim() != dim {
        return Err(EstimateError::DimensionMismatch {
            expected: dim,
            found: seq.dim(),
        });
    }
    let clock = Instant::now();
    let mut point = vec![0.0; dim];
    let mut sum = 0.0;
    let mut stats = RunningStats::new();
    for k in seq.start_index()..seq.start_index() + n {
        seq.fill_point(k, &mut point).expect("k >= start_index");
        let y = f(&point);
        sum += y;
        stats.push(y);
    }
    Ok(EstimatorReport {
        method: Method::Qmc,
        params: Vec::new(),
        seed: None,
        n_samples: n,
        estimates: vec![PayoffEstimate {
            name: "value".to_string(),
            mean: sum / n as f64,
            stderr: None,
            batch_variance: None,
            variance: stats.variance(),
        }],
        stats: vec![stats],
        rng_calls: 0,
        cache_hits: 0,
        cache_misses: 0,
        truncated_count: 0,
        elapsed: clock.elapsed(),
    })
}

/// `σ̂ · sqrt(2 n ln ln n) / n` for the inputs accumulated in `stats`.
pub fn lil_band(stats: &RunningStats) -> Result<f64, EstimateError> {
    let n = stats.count();
    if n < 3 {
        return Err(EstimateError::UndefinedBand(n));
    }
    Ok(lil_half_width(stats.std_dev().unwrap_or(0.0), n))
}

/// The iterated-logarithm envelope of an empirical mean, for a given σ and n >= 3.
pub fn lil_half_width(sigma: f64, n: u64) -> f64 {
    let n = n as f64;
    sigma * (2.0 * n * n.ln().ln()).sqrt() / n
}

/// `b ×` the sample variance of consecutive batch means.
///
/// For a correlated stream of per-step payoffs this estimates the
/// asymptotic variance coefficient of the running mean. `batch_size`
/// defaults to `⌈√len⌉`; a trailing partial batch is ignored.
pub fn batch_means_variance(values: &[f64], batch_size: Option<usize>) -> Result<f64, EstimateError> {
    let len = values.len();
    let b = batch_size.unwrap_or_else(|| default_batch_size(len));
    if b < 2 || len < 2 * b {
        return Err(EstimateError::StreamTooShort { len, batch: b });
    }
    let means: RunningStats = values
        .chunks_exact(b)
        .map(|c| c.iter().sum::<f64>() / b as f64)
        .collect();
    Ok(b as f64 * means.variance().unwrap_or(0.0))
}

pub fn default_batch_size(len: usize) -> usize {
    (len as f64).sqrt().ceil() as usize
}

/// Online form of [`batch_means_variance`] with a fixed batch length.
#[derive(Clone, Debug)]
pub struct BatchMeans {
    batch: usize,
    filled: usize,
    sum: f64,
    means: RunningStats,
}

impl BatchMeans {
    pub fn new(batch: usize) -> Self {
        Self {
            batch,
            filled: 0,
            sum: 0.0,
            means: RunningStats::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.filled += 1;
        if self.filled == self.batch {
            self.means.push(self.sum / self.batch as f64);
            self.sum = 0.0;
            self.filled = 0;
        }
    }

    /// `None` until two full batches of length >= 2 have been seen.
    pub fn variance(&self) -> Option<f64> {
        if self.batch < 2 {
            return None;
        }
        self.means.variance().map(|v| self.batch as f64 * v)
    }
}

/// A bijection σ on `{1..d}`, stored 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinatePermutation {
    sigma: Vec<usize>,
}

impl CoordinatePermutation {
    pub fn new(sigma: Vec<usize>) -> Result<Self, EstimateError> {
        let d = sigma.len();
        if d == 0 {
            return Err(EstimateError::InvalidPermutation("empty".into()));
        }
        let mut sorted = sigma.clone();
        sorted.sort_unstable();
        if sorted.iter().copied().ne(1..=d) {
            return Err(EstimateError::InvalidPermutation(format!(
                "{sigma:?} is not a permutation of 1..={d}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            sigma: (1..=d).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sigma
    }

    /// All `d!` permutations in lexicographic order.
    pub fn all(d: usize) -> Vec<Self> {
        fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<CoordinatePermutation>) {
            if prefix.len() == used.len() {
                out.push(CoordinatePermutation {
                    sigma: prefix.clone(),
                });
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    prefix.push(i + 1);
                    extend(prefix, used, out);
                    prefix.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        extend(&mut Vec::with_capacity(d), &mut vec![false; d], &mut out);
        out
    }
}

impl std::str::FromStr for CoordinatePermutation {
    type Err = EstimateError;

    /// Parses comma-separated 1-based indices, e.g. `3,1,2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let sigma = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| EstimateError::InvalidPermutation(format!("bad index {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(sigma)
    }
}

impl std::fmt::Display for CoordinatePermutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.sigma.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// `f_σ(x_1..x_d) = f(x_σ(1), .., x_σ(d))`.
pub fn permuted<F>(f: F, sigma: &CoordinatePermutation) -> impl Fn(&[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert!(sigma.dim() <= MAX_FIXED_DIM);
    let sigma = sigma.sigma.clone();
    move |x: &[f64]| {
        let mut y = [0.0; MAX_FIXED_DIM];
        for (slot, &s) in y.iter_mut().zip(&sigma) {
            *slot = x[s - 1];
        }
        f(&y[..sigma.len()])
    }
}

/// A function on `[0,1]^d` read off `d` consecutive cells.
pub struct FunctionModel<F> {
    name: String,
    dim: usize,
    f: F,
}

impl<F> FunctionModel<F>
where
    F: Fn(&[f64]) -> f64,
{
    pub fn new(name: impl Into<String>, dim: usize, f: F) -> Self {
        assert!(dim <= MAX_FIXED_DIM, "dimension {dim} exceeds {MAX_FIXED_DIM}");
        Self {
            name: name.into(),
            dim,
            f,
        }
    }
}

impl<F> ConsumptionModel for FunctionModel<F>
where
    F: Fn(&[f64]) -> f64,
{
    fn payoff_names(&self) -> Vec<String> {
        vec![self.name.clone()]
    }

    fn fixed_dimension(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn evaluate(&self, cursor: &mut TapeCursor<'_>, payoff: &mut [f64]) -> Result<Evaluation, ModelError> {
        let mut x = [0.0; MAX_FIXED_DIM];
        for slot in &mut x[..self.dim] {
            *slot = cursor.next_uniform()?;
        }
        payoff[0] = (self.f)(&x[..self.dim]);
        Ok(Evaluation::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);

    impl ConsumptionModel for Constant {
        fn payoff_names(&self) -> Vec<String> {
            vec!["c".into()]
        }
        fn evaluate(&self, cursor: &mut TapeCursor<'_>, payoff: &mut [f64]) -> Result<Evaluation, ModelError> {
            cursor.next_uniform()?;
            payoff[0] = self.0;
            Ok(Evaluation::default())
        }
    }

    /// Reads a geometric number of cells: keeps reading while u < 0.7.
    struct Geometric;

    impl ConsumptionModel for Geometric {
        fn payoff_names(&self) -> Vec<String> {
            vec!["len".into(), "last".into()]
        }
        fn evaluate(&self, cursor: &mut TapeCursor<'_>, payoff: &mut [f64]) -> Result<Evaluation, ModelError> {
            let mut u = cursor.next_uniform()?;
            while u < 0.7 {
                u = cursor.next_uniform()?;
            }
            payoff[0] = cursor.consumed() as f64;
            payoff[1] = u;
            Ok(Evaluation::default())
        }
    }

    fn identity() -> FunctionModel<impl Fn(&[f64]) -> f64> {
        FunctionModel::new("u", 1, |x: &[f64]| x[0])
    }

    #[test]
    fn running_stats_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 8.0];
        let s: RunningStats = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.variance().unwrap() - var).abs() < 1e-12);
        assert_eq!(RunningStats::new().variance(), None);
    }

    #[test]
    fn constant_model_both_methods() {
        for method in [Method::Mc, Method::Shift] {
            let r = run_on_tape(method, &Constant(0.5), 1000, &mut Tape::new(1), None, |_, _| {}).unwrap();
            assert_eq!(r.mean("c"), Some(0.5));
            assert_eq!(r.stderr("c"), Some(0.0));
            assert_eq!(r.rng_calls, 1000);
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert_eq!(
            mc_estimate(&Constant(1.0), 0, &mut Tape::new(1)).unwrap_err(),
            EstimateError::NoSamples
        );
    }

    #[test]
    fn identity_mean_near_half() {
        let r = mc_estimate(&identity(), 500_000, &mut Tape::new(42)).unwrap();
        let se = r.stderr("u").unwrap();
        assert!((r.mean("u").unwrap() - 0.5).abs() < 3.0 * se);

        let r = shift_estimate(&identity(), 500_000, &mut Tape::new(42)).unwrap();
        assert!((r.mean("u").unwrap() - 0.5).abs() < 3.0 * r.stderr("u").unwrap());
        assert_eq!(r.rng_calls, 500_000);
    }

    #[test]
    fn shift_reuses_cells_mc_does_not() {
        let mut consumed_total = 0u64;
        let mc = run_on_tape(Method::Mc, &Geometric, 20_000, &mut Tape::new(5), None, |_, p| {
            consumed_total += p[0] as u64;
        })
        .unwrap();
        assert_eq!(mc.rng_calls, consumed_total);

        let mut shift_total = 0u64;
        let sh = run_on_tape(Method::Shift, &Geometric, 20_000, &mut Tape::new(5), None, |_, p| {
            shift_total += p[0] as u64;
        })
        .unwrap();
        assert!(sh.rng_calls < shift_total / 2);
        // the high-water mark outruns the start by at most one run length
        assert!(sh.rng_calls < 20_000 + 100);
    }

    #[test]
    fn mc_segments_are_disjoint_and_contiguous() {
        // sample k records the index of its first cell via the tape value
        let mut tape = Tape::new(77);
        let reference: Vec<f64> = crate::rng::Uniforms::new(77).take(10_000).collect();
        let mut cursor_index = 0usize;
        let mut lens = Vec::new();
        run_on_tape(Method::Mc, &Geometric, 500, &mut tape, None, |_, p| lens.push(p[0] as usize)).unwrap();
        for len in lens {
            cursor_index += len;
            // segments end exactly on a cell >= 0.7
            assert!(reference[cursor_index - 1] >= 0.7);
        }
    }

    #[test]
    fn determinism() {
        for method in [Method::Mc, Method::Shift] {
            let a = run_on_tape(method, &Geometric, 5000, &mut Tape::new(9), None, |_, _| {}).unwrap();
            let b = run_on_tape(method, &Geometric, 5000, &mut Tape::new(9), None, |_, _| {}).unwrap();
            assert_eq!(a.estimates, b.estimates);
            assert_eq!(a.rng_calls, b.rng_calls);
            assert_eq!(a.stats, b.stats);
        }
    }

    #[test]
    fn model_errors_carry_sample_index() {
        struct FailsAt(u64);
        impl ConsumptionModel for FailsAt {
            fn payoff_names(&self) -> Vec<String> {
                vec!["x".into()]
            }
            fn evaluate(&self, cursor: &mut TapeCursor<'_>, _: &mut [f64]) -> Result<Evaluation, ModelError> {
                if cursor.start() == self.0 {
                    return Err(ModelError::NonFinite { step: 0, state: vec![f64::NAN] });
                }
                cursor.next_uniform()?;
                Ok(Evaluation::default())
            }
        }
        let err = shift_estimate(&FailsAt(4), 10, &mut Tape::new(1)).unwrap_err();
        assert!(matches!(err, EstimateError::Sample { index: 3, .. }));
    }

    #[test]
    fn qmc_examples() {
        let seq = HaltonSequence::new(1).unwrap();
        let r = qmc_estimate(|_| 0.25, 1, 77, &seq).unwrap();
        assert_eq!(r.mean("value"), Some(0.25));
        assert_eq!(r.stderr("value"), None);
        assert_eq!(r.rng_calls, 0);

        let r = qmc_estimate(|x| x[0], 1, 1024, &seq).unwrap();
        assert!((r.mean("value").unwrap() - 0.5).abs() <= 1.0 / 1024.0);

        let h2 = HaltonSequence::new(2).unwrap();
        let r = qmc_estimate(|x| x[0] * x[1], 2, 4096, &h2).unwrap();
        // frozen from an exact rational Halton average
        assert!((r.mean("value").unwrap() - 0.249_624_997_954_273_37).abs() < 1e-14);
        assert!((r.mean("value").unwrap() - 0.25).abs() < 1e-3);

        assert_eq!(
            qmc_estimate(|x| x[0], 3, 10, &h2).unwrap_err(),
            EstimateError::DimensionMismatch { expected: 3, found: 2 }
        );
    }

    #[test]
    fn lil_band_examples() {
        let constant: RunningStats = std::iter::repeat_n(2.0, 50).collect();
        assert_eq!(lil_band(&constant).unwrap(), 0.0);
        assert_eq!(lil_half_width(1.0, 16), 0.357_033_163_819_943_04);
        assert!((lil_half_width(3.0, 16) - 3.0 * lil_half_width(1.0, 16)).abs() < 1e-15);
        let two: RunningStats = [1.0, 2.0].into_iter().collect();
        assert_eq!(lil_band(&two), Err(EstimateError::UndefinedBand(2)));
    }

    #[test]
    fn lil_band_shrinks() {
        let small = mc_estimate(&identity(), 1_000, &mut Tape::new(3)).unwrap();
        let big = mc_estimate(&identity(), 1_000_000, &mut Tape::new(3)).unwrap();
        assert!(big.lil_band("u").unwrap() < small.lil_band("u").unwrap());
    }

    #[test]
    fn batch_means_examples() {
        assert_eq!(batch_means_variance(&[3.0; 100], Some(10)).unwrap(), 0.0);
        let alternating: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(batch_means_variance(&alternating, Some(2)).unwrap(), 0.0);
        assert!(batch_means_variance(&[1.0; 10], Some(6)).is_err());
        assert!(batch_means_variance(&[1.0; 10], Some(1)).is_err());
        // default batch ⌈√len⌉
        assert!(batch_means_variance(&[1.0; 3], None).is_err());
        assert_eq!(batch_means_variance(&[1.0; 16], None).unwrap(), 0.0);
    }

    #[test]
    fn batch_means_of_independent_uniforms() {
        let mut trace = Vec::new();
        run_on_tape(Method::Mc, &identity(), 100_000, &mut Tape::new(42), None, |_, p| trace.push(p[0])).unwrap();
        let proxy = batch_means_variance(&trace, Some(100)).unwrap();
        assert!((proxy - 1.0 / 12.0).abs() < 0.2 / 12.0, "{proxy}");
    }

    #[test]
    fn online_batch_means_matches_slice_form() {
        let mut trace = Vec::new();
        let r = run_on_tape(Method::Shift, &Geometric, 10_007, &mut Tape::new(2), Some(50), |_, p| {
            trace.push(p[0])
        })
        .unwrap();
        let direct = batch_means_variance(&trace, Some(50)).unwrap();
        let online = r.estimates[0].batch_variance.unwrap();
        assert!((direct - online).abs() <= 1e-9 * direct.abs());
        assert_eq!(
            r.estimates[0].stderr.unwrap(),
            (online / 10_007.0).sqrt()
        );
    }

    #[test]
    fn permutations() {
        let id = CoordinatePermutation::identity(3);
        let f = |x: &[f64]| x[0] + 10.0 * x[1] + 100.0 * x[2];
        let g = permuted(f, &id);
        assert_eq!(g(&[1.0, 2.0, 3.0]), 321.0);

        let swap = CoordinatePermutation::new(vec![2, 1]).unwrap();
        let first = permuted(|x: &[f64]| x[0], &swap);
        assert_eq!(first(&[0.1, 0.9]), 0.9);

        let p: CoordinatePermutation = "3,1,2".parse().unwrap();
        assert_eq!(p.to_string(), "3,1,2");
        assert!("1,1,2".parse::<CoordinatePermutation>().is_err());
        assert!("0,1".parse::<CoordinatePermutation>().is_err());
        assert!("a".parse::<CoordinatePermutation>().is_err());
        assert!(CoordinatePermutation::new(vec![]).is_err());

        let all = CoordinatePermutation::all(3);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], id);
        let h = permuted(f, &p);
        assert_eq!(h(&[1.0, 2.0, 3.0]), 3.0 + 10.0 + 200.0);
    }

    #[test]
    fn permuted_linear_shift_converges() {
        let linear = |x: &[f64]| x[0] + 2.0 * x[1] + 3.0 * x[2];
        for sigma in CoordinatePermutation::all(3) {
            let model = FunctionModel::new("f", 3, permuted(linear, &sigma));
            let r = shift_estimate(&model, 200_000, &mut Tape::new(42)).unwrap();
            let band = r.lil_band("f").unwrap();
            assert!((r.mean("f").unwrap() - 3.0).abs() <= 4.0 * band, "{sigma}");
        }
    }
}
