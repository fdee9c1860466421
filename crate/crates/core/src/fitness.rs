//! Distance of a reduced array from the balancedness constraints of an
//! `OA(N′, k, s, t)`.
//!
//! For every `t`-column subset (lexicographic order) and every tuple `v`, the
//! deviation is `count(v) - λ′`. The fitness is the Minkowski `q`-norm of the
//! concatenation of all these deviations, so it is zero exactly when the
//! reduced array is an orthogonal array of index `λ′`. Lower is better.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::RemovalMask;
use crate::oa::{self, column_subsets, OaError, OrthogonalArray};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitnessError {
    #[error(transparent)]
    Oa(#[from] OaError),
    #[error("target index {target} must satisfy 1 <= λ′ and λ′ * {tuples} < {n_rows}")]
    TargetIndex { target: usize, tuples: usize, n_rows: usize },
    #[error("mask weight {weight} leaves index {implied}, not the requested {target}")]
    IndexMismatch { weight: usize, implied: usize, target: usize },
    #[error("Minkowski exponent must be a finite real >= 1, got {0}")]
    Exponent(f64),
}

/// How per-subset deviations are combined into a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One norm over the concatenation of all blocks.
    #[default]
    Global,
    /// Sum of one norm per column subset.
    PerBlockSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessConfig {
    pub exponent: f64,
    pub aggregation: Aggregation,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig { exponent: 2.0, aggregation: Aggregation::Global }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<(), FitnessError> {
        if !self.exponent.is_finite() || self.exponent < 1.0 {
            return Err(FitnessError::Exponent(self.exponent));
        }
        Ok(())
    }
}

/// Non-negative fitness; zero iff the reduced array is an orthogonal array.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FitnessValue(pub f64);

impl FitnessValue {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_optimal(self) -> bool {
        self.0 == 0.0
    }
}

/// Per column subset and tuple, `count - λ′`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviationVector {
    pub target_index: usize,
    pub column_subsets: Vec<Vec<usize>>,
    /// `s^t` entries per column subset, blocks concatenated in subset order.
    pub entries: Vec<i64>,
}

impl DeviationVector {
    pub fn block_len(&self) -> usize {
        self.entries.len() / self.column_subsets.len().max(1)
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[i64]> {
        self.entries.chunks_exact(self.block_len().max(1))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }
}

/// `(Σ |e|^q)^(1/q)`.
pub fn minkowski_norm(entries: &[i64], exponent: f64) -> f64 {
    if exponent == 2.0 {
        let sum: i64 = entries.iter().map(|e| e * e).sum();
        (sum as f64).sqrt()
    } else if exponent == 1.0 {
        entries.iter().map(|e| e.abs()).sum::<i64>() as f64
    } else {
        let sum: f64 = entries.iter().map(|&e| (e.abs() as f64).powf(exponent)).sum();
        sum.powf(exponent.recip())
    }
}

fn aggregate(entries: &[i64], block_len: usize, config: &FitnessConfig) -> f64 {
    match config.aggregation {
        Aggregation::Global => minkowski_norm(entries, config.exponent),
        Aggregation::PerBlockSum => entries.chunks_exact(block_len).map(|b| minkowski_norm(b, config.exponent)).sum(),
    }
}

fn check_target(arr: &OrthogonalArray, target_index: usize) -> Result<(), FitnessError> {
    let tuples = arr.tuples();
    let n_rows = arr.n_rows();
    if target_index == 0 || target_index.saturating_mul(tuples) >= n_rows {
        return Err(FitnessError::TargetIndex { target: target_index, tuples, n_rows });
    }
    Ok(())
}

pub fn deviation_vector(
    arr: &OrthogonalArray,
    mask: &RemovalMask,
    target_index: usize,
) -> Result<DeviationVector, FitnessError> {
    check_target(arr, target_index)?;
    let implied = oa::target_index_for(arr, mask)?;
    if implied != target_index {
        return Err(FitnessError::IndexMismatch { weight: mask.weight(), implied, target: target_index });
    }
    let reduced = oa::remove_rows_unchecked(arr, mask);
    let subsets = column_subsets(arr.n_cols(), arr.strength());
    let mut entries = Vec::with_capacity(subsets.len() * arr.tuples());
    for cols in &subsets {
        let table = oa::tuple_counts(&reduced, cols)?;
        entries.extend(table.counts.iter().map(|&c| c as i64 - target_index as i64));
    }
    Ok(DeviationVector { target_index, column_subsets: subsets, entries })
}

/// Global Minkowski fitness with exponent `exponent`.
pub fn minkowski_fitness(
    arr: &OrthogonalArray,
    mask: &RemovalMask,
    target_index: usize,
    exponent: f64,
) -> Result<FitnessValue, FitnessError> {
    minkowski_fitness_with(arr, mask, target_index, &FitnessConfig { exponent, aggregation: Aggregation::Global })
}

pub fn minkowski_fitness_with(
    arr: &OrthogonalArray,
    mask: &RemovalMask,
    target_index: usize,
    config: &FitnessConfig,
) -> Result<FitnessValue, FitnessError> {
    config.validate()?;
    let dev = deviation_vector(arr, mask, target_index)?;
    Ok(FitnessValue(aggregate(&dev.entries, dev.block_len(), config)))
}

/// Evaluates many masks against one array. Tuple codes of every row under
/// every column subset are tabulated once; each evaluation then recounts
/// the kept rows from scratch.
#[derive(Debug, Clone)]
pub struct FitnessEvaluator {
    n_rows: usize,
    n_subsets: usize,
    tuples: usize,
    target_index: usize,
    config: FitnessConfig,
    // codes[row * n_subsets + subset]
    codes: Vec<u32>,
    // tuple counts of the unreduced array, n_subsets * tuples
    full_counts: Vec<i64>,
}

impl FitnessEvaluator {
    pub fn new(arr: &OrthogonalArray, target_index: usize, config: FitnessConfig) -> Result<Self, FitnessError> {
        config.validate()?;
        check_target(arr, target_index)?;
        let tuples = arr.tuples();
        let n_rows = arr.n_rows();
        if !(n_rows - target_index * tuples).is_multiple_of(tuples) {
            return Err(FitnessError::Oa(OaError::IndexNotIntegral { n_rows, tuples }));
        }
        let subsets = column_subsets(arr.n_cols(), arr.strength());
        let n_subsets = subsets.len();
        let mut codes = Vec::with_capacity(n_rows * n_subsets);
        let mut full_counts = vec![0i64; n_subsets * tuples];
        for r in 0..n_rows {
            for (j, cols) in subsets.iter().enumerate() {
                let code = arr.tuple_code(r, cols);
                codes.push(code as u32);
                full_counts[j * tuples + code] += 1;
            }
        }
        Ok(FitnessEvaluator { n_rows, n_subsets, tuples, target_index, config, codes, full_counts })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    /// Number of rows a valid mask removes, `N - λ′ s^t`.
    pub fn removal_count(&self) -> usize {
        self.n_rows - self.target_index * self.tuples
    }

    pub fn config(&self) -> &FitnessConfig {
        &self.config
    }

    /// Fitness of `mask`, which must have length `N` and the weight returned
    /// by [`removal_count`](Self::removal_count).
    pub fn evaluate(&self, mask: &RemovalMask) -> f64 {
        debug_assert_eq!(mask.len(), self.n_rows);
        debug_assert_eq!(mask.weight(), self.removal_count());
        self.evaluate_removed(mask.bits().iter().enumerate().filter_map(|(i, &b)| b.then_some(i)))
    }

    /// Fitness after removing the rows at `removed` (distinct, in range).
    pub fn evaluate_removed<I: IntoIterator<Item = usize>>(&self, removed: I) -> f64 {
        let mut dev = self.full_counts.clone();
        for r in removed {
            let codes = &self.codes[r * self.n_subsets..(r + 1) * self.n_subsets];
            for (j, &code) in codes.iter().enumerate() {
                dev[j * self.tuples + code as usize] -= 1;
            }
        }
        let target = self.target_index as i64;
        dev.iter_mut().for_each(|d| *d -= target);
        aggregate(&dev, self.tuples, &self.config)
    }

    /// Checked variant of [`evaluate`](Self::evaluate).
    pub fn try_evaluate(&self, mask: &RemovalMask) -> Result<f64, FitnessError> {
        if mask.len() != self.n_rows {
            return Err(OaError::MaskLength { mask: mask.len(), rows: self.n_rows }.into());
        }
        if mask.weight() != self.removal_count() {
            let weight = mask.weight();
            return Err(FitnessError::IndexMismatch {
                weight,
                implied: self.n_rows.saturating_sub(weight) / self.tuples,
                target: self.target_index,
            });
        }
        Ok(self.evaluate(mask))
    }
}
