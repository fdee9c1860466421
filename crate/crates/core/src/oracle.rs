//! Exhaustive search over every removal mask of the required weight.
//!
//! Masks are enumerated as `p`-combinations of row positions in
//! colexicographic order. The combination space is cut into a fixed number
//! of contiguous rank ranges which are evaluated in parallel and merged in
//! rank order, so the report does not depend on the number of threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::RunReport;
use crate::fitness::{minkowski_fitness_with, FitnessConfig, FitnessError, FitnessEvaluator};
use crate::mask::RemovalMask;
use crate::oa::{is_orthogonal_array, remove_rows, OaParams, OrthogonalArray};

pub const DEFAULT_ENUMERATION_CAP: u64 = 100_000_000;
pub const DEFAULT_LISTING_CAP: usize = 10_000;
const CHUNKS: u64 = 256;
const HISTOGRAM_SCALE: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("C({n}, {p}) ≈ {estimate:.3e} masks exceeds the enumeration cap of {cap}")]
    TooLarge { n: usize, p: usize, estimate: f64, cap: u64 },
    #[error(transparent)]
    Fitness(#[from] FitnessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub enumeration_cap: u64,
    /// Optimal masks listed in the report; the total count is always exact.
    pub listing_cap: usize,
    pub fitness: FitnessConfig,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            listing_cap: DEFAULT_LISTING_CAP,
            fitness: FitnessConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Fitness rounded to six decimals.
    pub fitness: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance: OaParams,
    pub target_index: usize,
    pub removal_count: usize,
    pub masks_enumerated: u64,
    pub min_fitness: f64,
    pub optimal_count: u64,
    /// First optima in colexicographic order, at most `listing_cap` of them.
    pub optimal_masks: Vec<RemovalMask>,
    pub optimal_masks_truncated: bool,
    pub fitness_histogram: Vec<HistogramBin>,
}

/// `C(n, k)`, or `None` on `u64` overflow.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// `C(n, k)` as a float, usable far beyond `u64`.
pub fn binomial_estimate(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum::<f64>().exp()
}

/// The `rank`-th `k`-combination of `0..n` in colexicographic order.
pub fn colex_unrank(mut rank: u64, k: usize, n: usize) -> Vec<usize> {
    let mut combo = vec![0usize; k];
    let mut hi = n;
    for slot in (0..k).rev() {
        // largest c < hi with C(c, slot + 1) <= rank
        let mut c = hi - 1;
        while binomial(c as u64, slot as u64 + 1).unwrap_or(u64::MAX) > rank {
            c -= 1;
        }
        rank -= binomial(c as u64, slot as u64 + 1).unwrap_or(0);
        combo[slot] = c;
        hi = c;
    }
    combo
}

/// Advances `combo` to its colex successor within `0..n`; false when it was
/// the last one.
pub fn colex_next(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in 0..k {
        let limit = if i + 1 < k { combo[i + 1] } else { n };
        if combo[i] + 1 < limit {
            combo[i] += 1;
            for (j, c) in combo.iter_mut().enumerate().take(i) {
                *c = j;
            }
            return true;
        }
    }
    false
}

struct Partial {
    min: f64,
    count: u64,
    listed: Vec<Vec<usize>>,
    histogram: BTreeMap<i64, u64>,
}

impl Partial {
    fn empty() -> Self {
        Partial { min: f64::INFINITY, count: 0, listed: Vec::new(), histogram: BTreeMap::new() }
    }

    fn merge(mut self, other: Partial, listing_cap: usize) -> Partial {
        for (k, v) in other.histogram {
            *self.histogram.entry(k).or_insert(0) += v;
        }
        if other.min < self.min {
            self.min = other.min;
            self.count = other.count;
            self.listed = other.listed;
        } else if other.min == self.min {
            self.count += other.count;
            let room = listing_cap.saturating_sub(self.listed.len());
            self.listed.extend(other.listed.into_iter().take(room));
        }
        self
    }
}

fn histogram_key(f: f64) -> i64 {
    (f * HISTOGRAM_SCALE).round() as i64
}

/// Enumerates all `C(N, p)` masks with `p = N - λ′ s^t` and reports the
/// exact optimum set and the fitness spectrum.
pub fn exhaustive_search(
    arr: &OrthogonalArray,
    target_index: usize,
    options: &OracleOptions,
) -> Result<OracleReport, OracleError> {
    let evaluator = FitnessEvaluator::new(arr, target_index, options.fitness)?;
    let instance = arr.params().map_err(FitnessError::from)?;
    let n = arr.n_rows();
    let p = evaluator.removal_count();
    let total = match binomial(n as u64, p as u64) {
        Some(t) if t <= options.enumeration_cap => t,
        _ => {
            return Err(OracleError::TooLarge {
                n,
                p,
                estimate: binomial_estimate(n as u64, p as u64),
                cap: options.enumeration_cap,
            })
        }
    };

    let chunks = CHUNKS.min(total);
    let bounds: Vec<(u64, u64)> = (0..chunks).map(|c| (total * c / chunks, total * (c + 1) / chunks)).collect();
    let cap = options.listing_cap;
    let merged = bounds
        .par_iter()
        .map(|&(start, end)| {
            let mut part = Partial::empty();
            let mut combo = colex_unrank(start, p, n);
            for rank in start..end {
                let f = evaluator.evaluate_removed(combo.iter().copied());
                *part.histogram.entry(histogram_key(f)).or_insert(0) += 1;
                if f < part.min {
                    part.min = f;
                    part.count = 0;
                    part.listed.clear();
                }
                if f == part.min {
                    part.count += 1;
                    if part.listed.len() < cap {
                        part.listed.push(combo.clone());
                    }
                }
                if rank + 1 < end {
                    colex_next(&mut combo, n);
                }
            }
            part
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Partial::empty(), |acc, part| acc.merge(part, cap));

    Ok(OracleReport {
        instance,
        target_index,
        removal_count: p,
        masks_enumerated: total,
        min_fitness: merged.min,
        optimal_count: merged.count,
        optimal_masks_truncated: merged.count > merged.listed.len() as u64,
        optimal_masks: merged.listed.iter().map(|c| RemovalMask::from_ones(n, c)).collect(),
        fitness_histogram: merged
            .histogram
            .into_iter()
            .map(|(k, count)| HistogramBin { fitness: k as f64 / HISTOGRAM_SCALE, count })
            .collect(),
    })
}

/// Recomputes the fitness of a GA report's best mask through the direct
/// remove-and-count route and checks it against the claimed value. A claimed
/// success must also leave an orthogonal array.
pub fn verify_ga_result(
    arr: &OrthogonalArray,
    target_index: usize,
    report: &RunReport,
    fitness: &FitnessConfig,
) -> bool {
    let Ok(value) = minkowski_fitness_with(arr, &report.best_mask, target_index, fitness) else {
        return false;
    };
    if value.value() != report.best_fitness || report.success != (report.best_fitness == 0.0) {
        return false;
    }
    if report.success {
        return remove_rows(arr, &report.best_mask).is_ok_and(|b| is_orthogonal_array(&b));
    }
    true
}
