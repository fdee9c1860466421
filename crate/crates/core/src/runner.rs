//! Batch experiments: benchmark instance generation, repeated GA runs with
//! derived seeds, optional oracle cross-checks, aggregation and reports.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{run_ga, GaConfig, GaError, RunReport};
use crate::oa::{parity_check_array, replicate_and_shuffle, OaError, OrthogonalArray};
use crate::oracle::{exhaustive_search, verify_ga_result, OracleError, OracleOptions, OracleReport};

/// Bumped whenever the JSON layout of [`BatchSummary`] changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Oa(#[from] OaError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Ga,
    Oracle,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub strength: usize,
    pub start_index: usize,
    pub target_index: usize,
    pub runs: usize,
    pub ga: GaConfig,
    pub instance_seed: u64,
    pub mode: Mode,
    #[serde(default)]
    pub fresh_instance_per_run: bool,
    #[serde(default)]
    pub oracle: OracleOptions,
    /// Set when the instance was loaded from a file instead of generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_file: Option<String>,
}

impl ExperimentSpec {
    /// A generated-instance experiment with default GA parameters and 30 runs.
    pub fn new(strength: usize, start_index: usize, target_index: usize) -> Self {
        ExperimentSpec {
            strength,
            start_index,
            target_index,
            runs: 30,
            ga: GaConfig::default(),
            instance_seed: 0,
            mode: Mode::Ga,
            fresh_instance_per_run: false,
            oracle: OracleOptions::default(),
            instance_file: None,
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: String| Err(RunnerError::Spec(m));
        if self.strength == 0 {
            return bad("strength must be at least 1".into());
        }
        if self.target_index == 0 || self.target_index >= self.start_index {
            return bad(format!("target index {} must satisfy 1 <= λ′ < λ = {}", self.target_index, self.start_index));
        }
        if self.mode != Mode::Oracle {
            if self.runs == 0 {
                return bad("at least one run is required".into());
            }
            self.ga.validate()?;
        }
        if self.fresh_instance_per_run && self.instance_file.is_some() {
            return bad("fresh instances cannot be combined with an instance file".into());
        }
        Ok(())
    }
}

/// i-th output of a SplitMix64 stream seeded with `base`. Per-run seeds use
/// this so that adding runs never changes the seeds of earlier ones.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The parity-check array of order `t`, repeated `λ` times and shuffled.
pub fn build_instance(spec: &ExperimentSpec) -> Result<OrthogonalArray, RunnerError> {
    generate_instance(spec.strength, spec.start_index, spec.instance_seed)
}

fn generate_instance(strength: usize, index: usize, seed: u64) -> Result<OrthogonalArray, RunnerError> {
    Ok(replicate_and_shuffle(&parity_check_array(strength)?, index, seed)?)
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    pub success_count: usize,
    /// Lower median of the per-run best fitness values.
    pub median_best_fitness: Option<f64>,
    pub median_convention: String,
    pub best_fitness_distribution: Vec<f64>,
    /// Distinct non-zero best fitness values, ascending.
    pub nonzero_best_values: Vec<f64>,
    pub per_run: Vec<RunReport>,
    /// Runs whose reported fitness was confirmed by independent recomputation.
    pub verified_runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_refusal: Option<String>,
    pub wall_time_secs: f64,
}

impl BatchSummary {
    /// Equality on everything except the wall-clock time.
    pub fn same_results(&self, other: &BatchSummary) -> bool {
        self.clone().without_wall_time() == other.clone().without_wall_time()
    }

    pub fn without_wall_time(mut self) -> Self {
        self.wall_time_secs = 0.0;
        self
    }

    /// `(successes/runs, median)` as in a results table cell.
    pub fn cell(&self) -> String {
        match self.median_best_fitness {
            Some(m) => format!("({}/{}, {:.2})", self.success_count, self.per_run.len(), m),
            None => "(oracle only)".to_string(),
        }
    }
}

/// Runs the experiment on a freshly generated instance.
pub fn run_batch(spec: &ExperimentSpec) -> Result<BatchSummary, RunnerError> {
    spec.validate()?;
    let instance = build_instance(spec)?;
    run_batch_on(spec, &instance)
}

/// Runs the experiment on `instance`. Unless `fresh_instance_per_run` is
/// set, every run searches the same instance.
pub fn run_batch_on(spec: &ExperimentSpec, instance: &OrthogonalArray) -> Result<BatchSummary, RunnerError> {
    spec.validate()?;
    let started = Instant::now();

    let (oracle, oracle_refusal) = match spec.mode {
        Mode::Ga => (None, None),
        Mode::Oracle => (Some(exhaustive_search(instance, spec.target_index, &spec.oracle)?), None),
        Mode::Both => match exhaustive_search(instance, spec.target_index, &spec.oracle) {
            Ok(r) => (Some(r), None),
            Err(e @ OracleError::TooLarge { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        },
    };

    let runs = if spec.mode == Mode::Oracle { 0 } else { spec.runs };
    let fitness = spec.ga.fitness_config();
    let outcomes: Vec<(RunReport, bool)> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let fresh;
            let arr = if spec.fresh_instance_per_run {
                fresh = generate_instance(spec.strength, spec.start_index, derive_seed(spec.instance_seed, run))?;
                &fresh
            } else {
                instance
            };
            let config = GaConfig { seed: derive_seed(spec.ga.seed, run), ..spec.ga.clone() };
            let report = run_ga(arr, spec.target_index, &config)?;
            let verified = verify_ga_result(arr, spec.target_index, &report, &fitness);
            Ok((report, verified))
        })
        .collect::<Result<_, RunnerError>>()?;

    let verified_runs = outcomes.iter().filter(|(_, v)| *v).count();
    let per_run: Vec<RunReport> = outcomes.into_iter().map(|(r, _)| r).collect();
    let distribution: Vec<f64> = per_run.iter().map(|r| r.best_fitness).collect();
    let mut nonzero: Vec<f64> = distribution.iter().copied().filter(|&f| f != 0.0).collect();
    nonzero.sort_by(f64::total_cmp);
    nonzero.dedup();

    Ok(BatchSummary {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        success_count: per_run.iter().filter(|r| r.best_fitness == 0.0).count(),
        median_best_fitness: lower_median(&distribution),
        median_convention: "lower".to_string(),
        best_fitness_distribution: distribution,
        nonzero_best_values: nonzero,
        per_run,
        verified_runs,
        oracle,
        oracle_refusal,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// The six `(λ, λ′)` cells with `λ ∈ {2, 3, 4}` and `1 <= λ′ < λ` at
/// strength 4, each derived from `template`.
pub fn table1_specs(template: &ExperimentSpec) -> Vec<ExperimentSpec> {
    let mut out = Vec::new();
    for start in 2..=4 {
        for target in 1..start {
            out.push(ExperimentSpec {
                strength: 4,
                start_index: start,
                target_index: target,
                instance_file: None,
                ..template.clone()
            });
        }
    }
    out
}

/// Several batch summaries written as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub cells: Vec<BatchSummary>,
}

#[derive(Debug, Serialize)]
struct CsvRow {
    lambda: usize,
    lambda_prime: usize,
    run: String,
    seed: Option<u64>,
    best_fitness: Option<f64>,
    success: String,
    evaluations_used: usize,
}

/// One row per run and a trailing `summary` row per batch, whose
/// `best_fitness` is the median and whose `success` is the success count.
pub fn to_csv(summaries: &[BatchSummary]) -> Result<String, RunnerError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summaries {
        let (lambda, lambda_prime) = (s.spec.start_index, s.spec.target_index);
        for (i, r) in s.per_run.iter().enumerate() {
            w.serialize(CsvRow {
                lambda,
                lambda_prime,
                run: i.to_string(),
                seed: Some(r.seed),
                best_fitness: Some(r.best_fitness),
                success: r.success.to_string(),
                evaluations_used: r.evaluations_used,
            })?;
        }
        w.serialize(CsvRow {
            lambda,
            lambda_prime,
            run: "summary".to_string(),
            seed: None,
            best_fitness: s.median_best_fitness,
            success: s.success_count.to_string(),
            evaluations_used: s.per_run.iter().map(|r| r.evaluations_used).sum(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| RunnerError::Io { path: PathBuf::from("<csv>"), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json(summaries: &[BatchSummary]) -> Result<String, RunnerError> {
    let mut text = match summaries {
        [single] => serde_json::to_string_pretty(single)?,
        many => serde_json::to_string_pretty(&ReportBundle { schema_version: SCHEMA_VERSION, cells: many.to_vec() })?,
    };
    text.push('\n');
    Ok(text)
}

pub fn render(summaries: &[BatchSummary], format: ReportFormat) -> Result<String, RunnerError> {
    match format {
        ReportFormat::Json => to_json(summaries),
        ReportFormat::Csv => to_csv(summaries),
    }
}

/// Writes the rendered report to `path`.
pub fn emit_report(summaries: &[BatchSummary], format: ReportFormat, path: &Path) -> Result<(), RunnerError> {
    let text = render(summaries, format)?;
    fs::write(path, text).map_err(|source| RunnerError::Io { path: path.to_path_buf(), source })
}

pub fn load_instance(path: &Path) -> Result<OrthogonalArray, RunnerError> {
    let text = fs::read_to_string(path).map_err(|source| RunnerError::Io { path: path.to_path_buf(), source })?;
    Ok(crate::oa::parse(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oa::is_orthogonal_array;

    fn quick(strength: usize, start: usize, target: usize) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(strength, start, target);
        spec.runs = 4;
        spec.ga.population_size = 30;
        spec.ga.evaluation_budget = 600;
        spec.ga.seed = 9;
        spec
    }

    #[test]
    fn instances_for_each_grid_row() {
        for (start, rows) in [(2, 32), (3, 48), (4, 64)] {
            let arr = build_instance(&ExperimentSpec::new(4, start, 1)).unwrap();
            assert_eq!(arr.n_rows(), rows);
            assert_eq!(arr.n_cols(), 5);
            assert_eq!(arr.params().unwrap().index, start);
            assert!(is_orthogonal_array(&arr));
        }
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let seeds: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut uniq = seeds.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 100);
        // first output of SplitMix64 seeded with 0
        assert_eq!(derive_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn lower_median_convention() {
        assert_eq!(lower_median(&[]), None);
        assert_eq!(lower_median(&[3.0]), Some(3.0));
        assert_eq!(lower_median(&[7.0, 0.0]), Some(0.0));
        assert_eq!(lower_median(&[7.0, 0.0, 7.0, 0.0]), Some(0.0));
        assert_eq!(lower_median(&[7.0, 0.0, 7.0]), Some(7.0));
    }

    #[test]
    fn spec_validation() {
        assert!(ExperimentSpec::new(4, 2, 2).validate().is_err());
        assert!(ExperimentSpec::new(4, 2, 0).validate().is_err());
        assert!(ExperimentSpec::new(0, 2, 1).validate().is_err());
        let mut s = ExperimentSpec::new(4, 2, 1);
        s.runs = 0;
        assert!(s.validate().is_err());
        s.mode = Mode::Oracle;
        assert!(s.validate().is_ok());
        assert!(ExperimentSpec::new(4, 2, 1).validate().is_ok());
    }

    #[test]
    fn batch_aggregates() {
        let s = run_batch(&quick(4, 3, 2)).unwrap();
        assert_eq!(s.per_run.len(), 4);
        assert_eq!(s.verified_runs, 4);
        assert_eq!(s.success_count, s.per_run.iter().filter(|r| r.success).count());
        assert_eq!(s.best_fitness_distribution.len(), 4);
        assert_eq!(s.median_best_fitness, lower_median(&s.best_fitness_distribution));
        let seeds: Vec<u64> = s.per_run.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, (0..4).map(|i| derive_seed(9, i)).collect::<Vec<_>>());
    }

    #[test]
    fn adding_runs_keeps_earlier_ones() {
        let mut spec = quick(4, 2, 1);
        let a = run_batch(&spec).unwrap();
        spec.runs = 6;
        let b = run_batch(&spec).unwrap();
        assert_eq!(a.per_run[..], b.per_run[..4]);
    }

    #[test]
    fn degenerate_batch() {
        let mut spec = quick(4, 2, 1);
        spec.runs = 1;
        spec.ga.evaluation_budget = spec.ga.population_size;
        let s = run_batch(&spec).unwrap();
        assert_eq!(s.per_run.len(), 1);
        assert_eq!(s.median_best_fitness, Some(s.per_run[0].best_fitness));
        assert_eq!(s.best_fitness_distribution, vec![s.per_run[0].best_fitness]);
    }

    #[test]
    fn both_mode_attaches_oracle_or_refusal() {
        let mut small = quick(3, 2, 1);
        small.mode = Mode::Both;
        let s = run_batch(&small).unwrap();
        let oracle = s.oracle.as_ref().unwrap();
        assert_eq!(oracle.masks_enumerated, 12_870);
        assert!(s.per_run.iter().all(|r| r.best_fitness >= oracle.min_fitness));

        let mut big = quick(4, 4, 2);
        big.mode = Mode::Both;
        let s = run_batch(&big).unwrap();
        assert!(s.oracle.is_none());
        assert!(s.oracle_refusal.unwrap().contains("exceeds"));

        big.mode = Mode::Oracle;
        assert!(matches!(run_batch(&big), Err(RunnerError::Oracle(_))));
    }

    #[test]
    fn fresh_instances_change_the_problem() {
        let mut spec = quick(4, 2, 1);
        spec.fresh_instance_per_run = true;
        let s = run_batch(&spec).unwrap();
        assert_eq!(s.verified_runs, 4);
        spec.instance_file = Some("x".into());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_csv_rows() {
        let s = run_batch(&quick(4, 2, 1)).unwrap();
        let back: BatchSummary = serde_json::from_str(&to_json(std::slice::from_ref(&s)).unwrap()).unwrap();
        assert_eq!(back, s);
        let csv = to_csv(std::slice::from_ref(&s)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lambda,lambda_prime,run,seed,best_fitness,success,evaluations_used");
        assert_eq!(lines.len(), 1 + 4 + 1);
        assert!(lines[5].starts_with("2,1,summary,,"));
    }

    #[test]
    fn table1_grid_has_six_cells() {
        let cells = table1_specs(&ExperimentSpec::new(4, 2, 1));
        let pairs: Vec<(usize, usize)> = cells.iter().map(|c| (c.start_index, c.target_index)).collect();
        assert_eq!(pairs, vec![(2, 1), (3, 1), (3, 2), (4, 1), (4, 2), (4, 3)]);
        assert!(cells.iter().all(|c| c.strength == 4 && c.validate().is_ok()));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = load_instance(Path::new("/nonexistent/oa.txt")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/oa.txt"));
    }
}
