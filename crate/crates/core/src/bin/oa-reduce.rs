use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use oa_reduce::evolve::{CrossoverVariant, GaConfig};
use oa_reduce::fitness::Aggregation;
use oa_reduce::runner::{
    self, load_instance, run_batch, run_batch_on, table1_specs, BatchSummary, ExperimentSpec, Mode, ReportFormat,
    RunnerError,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CrossoverArg {
    MapOfOnes,
    Counter,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Ga,
    Oracle,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregationArg {
    Global,
    PerBlock,
}

/// Search for rows whose removal turns an orthogonal array into a smaller one.
#[derive(Debug, Parser)]
#[command(name = "oa-reduce", version)]
struct Cli {
    /// Strength t of the generated parity-check instance.
    #[arg(short = 't', long, default_value_t = 4)]
    strength: usize,
    /// Index λ of the starting array.
    #[arg(long = "lambda", default_value_t = 2)]
    lambda: usize,
    /// Index λ′ of the array to derive.
    #[arg(long = "lambda-prime", default_value_t = 1)]
    lambda_prime: usize,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    #[arg(long = "pop-size", default_value_t = 500)]
    pop_size: usize,
    #[arg(long, default_value_t = 3)]
    tournament: usize,
    #[arg(long = "mutation-prob", default_value_t = 0.2)]
    mutation_prob: f64,
    /// Fitness evaluations per run.
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, value_enum, default_value_t = CrossoverArg::MapOfOnes)]
    crossover: CrossoverArg,
    /// Minkowski exponent of the fitness.
    #[arg(long, default_value_t = 2.0)]
    exponent: f64,
    #[arg(long, value_enum, default_value_t = AggregationArg::Global)]
    aggregation: AggregationArg,
    /// Base seed; per-run seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "instance-seed", default_value_t = 0)]
    instance_seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Ga)]
    mode: ModeArg,
    #[arg(long = "fresh-instance-per-run")]
    fresh_instance_per_run: bool,
    #[arg(long = "replace-only-if-better")]
    replace_only_if_better: bool,
    /// Keep searching after a zero-fitness mask is found.
    #[arg(long = "no-early-stop")]
    no_early_stop: bool,
    /// Record best-so-far fitness improvements in each run report.
    #[arg(long)]
    trace: bool,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Load the starting array from a file in the `N k s t` text format.
    #[arg(long = "instance-file")]
    instance_file: Option<PathBuf>,
    /// Run all six strength-4 cells with λ in 2..=4 and λ′ < λ.
    #[arg(long)]
    table1: bool,
}

impl Cli {
    fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            strength: self.strength,
            start_index: self.lambda,
            target_index: self.lambda_prime,
            runs: self.runs,
            ga: GaConfig {
                population_size: self.pop_size,
                tournament_size: self.tournament,
                mutation_probability: self.mutation_prob,
                evaluation_budget: self.budget,
                crossover: match self.crossover {
                    CrossoverArg::MapOfOnes => CrossoverVariant::MapOfOnes,
                    CrossoverArg::Counter => CrossoverVariant::CounterBased,
                },
                seed: self.seed,
                minkowski_exponent: self.exponent,
                aggregation: match self.aggregation {
                    AggregationArg::Global => Aggregation::Global,
                    AggregationArg::PerBlock => Aggregation::PerBlockSum,
                },
                replace_only_if_better: self.replace_only_if_better,
                early_stop: !self.no_early_stop,
                record_trace: self.trace,
            },
            instance_seed: self.instance_seed,
            mode: match self.mode {
                ModeArg::Ga => Mode::Ga,
                ModeArg::Oracle => Mode::Oracle,
                ModeArg::Both => Mode::Both,
            },
            fresh_instance_per_run: self.fresh_instance_per_run,
            oracle: Default::default(),
            instance_file: None,
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<BatchSummary>, RunnerError> {
    let spec = cli.spec();
    if cli.table1 {
        if cli.instance_file.is_some() {
            return Err(RunnerError::Spec("--table1 generates its own instances".into()));
        }
        return table1_specs(&spec).iter().map(run_batch).collect();
    }
    let Some(path) = &cli.instance_file else {
        return Ok(vec![run_batch(&spec)?]);
    };
    let arr = load_instance(path)?;
    let index = arr.params()?.index;
    let spec = ExperimentSpec {
        strength: arr.strength(),
        start_index: index,
        instance_file: Some(path.display().to_string()),
        ..spec
    };
    Ok(vec![run_batch_on(&spec, &arr)?])
}

fn print_summary(s: &BatchSummary) {
    let spec = &s.spec;
    eprint!("t={} λ={} λ′={}: ", spec.strength, spec.start_index, spec.target_index);
    if !s.per_run.is_empty() {
        eprint!("{}  verified {}/{}", s.cell(), s.verified_runs, s.per_run.len());
        if !s.nonzero_best_values.is_empty() {
            let vals: Vec<String> = s.nonzero_best_values.iter().map(|v| format!("{v:.4}")).collect();
            eprint!("  non-zero bests [{}]", vals.join(", "));
        }
    }
    if let Some(o) = &s.oracle {
        eprint!("  oracle: {} masks, min {:.4}, {} optima", o.masks_enumerated, o.min_fitness, o.optimal_count);
    }
    if let Some(r) = &s.oracle_refusal {
        eprint!("  oracle skipped: {r}");
    }
    eprintln!("  [{:.1}s]", s.wall_time_secs);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let summaries = match run(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    summaries.iter().for_each(print_summary);
    let format = match cli.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let result = match &cli.out {
        Some(path) => runner::emit_report(&summaries, format, path),
        None => runner::render(&summaries, format).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
