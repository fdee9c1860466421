//! Steady-state genetic algorithm over constant-weight removal masks.
//!
//! Every operator preserves the Hamming weight of its input, so each
//! individual always removes exactly `p` rows:
//!
//! * [`random_balanced_mask`] draws a uniform weight-`p` mask,
//! * [`map_of_ones_crossover`] recombines the parents' sorted one-positions,
//! * [`counter_based_crossover`] copies loci left to right and fills the
//!   tail once either the ones or the zeros quota is met,
//! * [`swap_mutation`] exchanges one set and one unset position.
//!
//! A step draws a tournament, mates its two best members and lets the child
//! replace the tournament's worst.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{Aggregation, FitnessConfig, FitnessError, FitnessEvaluator};
use crate::mask::RemovalMask;
use crate::oa::OrthogonalArray;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OperatorError {
    #[error("weight {weight} must lie strictly between 0 and the length {len}")]
    WeightOutOfRange { len: usize, weight: usize },
    #[error("parents differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("parents differ in weight ({0} vs {1})")]
    WeightMismatch(usize, usize),
    #[error("swap mutation needs at least one 0 and one 1")]
    NothingToSwap,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    Config(String),
    #[error("the GA only handles binary arrays, got alphabet size {0}")]
    NonBinary(usize),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverVariant {
    #[default]
    MapOfOnes,
    CounterBased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    /// Probability that a child receives one swap mutation.
    pub mutation_probability: f64,
    /// Fitness evaluations allowed per run, initial population included.
    pub evaluation_budget: usize,
    pub crossover: CrossoverVariant,
    pub seed: u64,
    pub minkowski_exponent: f64,
    pub aggregation: Aggregation,
    /// Only let the child in when it beats the member it would replace.
    pub replace_only_if_better: bool,
    /// Stop as soon as a zero-fitness mask is evaluated.
    pub early_stop: bool,
    pub record_trace: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 500,
            tournament_size: 3,
            mutation_probability: 0.2,
            evaluation_budget: 100_000,
            crossover: CrossoverVariant::MapOfOnes,
            seed: 0,
            minkowski_exponent: 2.0,
            aggregation: Aggregation::Global,
            replace_only_if_better: false,
            early_stop: true,
            record_trace: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |m: String| Err(GaError::Config(m));
        if self.population_size < 2 {
            return bad(format!("population size must be at least 2, got {}", self.population_size));
        }
        if self.tournament_size < 2 || self.tournament_size > self.population_size {
            return bad(format!(
                "tournament size must lie in 2..={}, got {}",
                self.population_size, self.tournament_size
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return bad(format!("mutation probability {} is outside [0, 1]", self.mutation_probability));
        }
        if self.evaluation_budget < self.population_size {
            return bad(format!(
                "evaluation budget {} cannot cover the initial population of {}",
                self.evaluation_budget, self.population_size
            ));
        }
        self.fitness_config().validate()?;
        Ok(())
    }

    pub fn fitness_config(&self) -> FitnessConfig {
        FitnessConfig { exponent: self.minkowski_exponent, aggregation: self.aggregation }
    }
}

/// Uniformly random mask of length `len` with exactly `weight` ones.
pub fn random_balanced_mask<R: Rng + ?Sized>(
    len: usize,
    weight: usize,
    rng: &mut R,
) -> Result<RemovalMask, OperatorError> {
    if weight == 0 || weight >= len {
        return Err(OperatorError::WeightOutOfRange { len, weight });
    }
    let ones = index::sample(rng, len, weight).into_vec();
    Ok(RemovalMask::from_ones(len, &ones))
}

fn check_parents(a: &RemovalMask, b: &RemovalMask) -> Result<usize, OperatorError> {
    if a.len() != b.len() {
        return Err(OperatorError::LengthMismatch(a.len(), b.len()));
    }
    let (wa, wb) = (a.weight(), b.weight());
    if wa != wb {
        return Err(OperatorError::WeightMismatch(wa, wb));
    }
    Ok(wa)
}

/// Balanced crossover on the parents' maps of ones.
///
/// Slot `i` of the child map takes slot `i` of a randomly chosen parent, or
/// of the other parent if that position is already taken. Slots where both
/// candidates are taken are filled at the end by drawing without replacement
/// from the unused one-positions of either parent.
pub fn map_of_ones_crossover<R: Rng + ?Sized>(
    a: &RemovalMask,
    b: &RemovalMask,
    rng: &mut R,
) -> Result<RemovalMask, OperatorError> {
    check_parents(a, b)?;
    let (map_a, map_b) = (a.ones(), b.ones());
    let mut taken = vec![false; a.len()];
    let mut deferred = 0usize;
    for (&pa, &pb) in map_a.iter().zip(&map_b) {
        let (first, second) = if rng.gen::<bool>() { (pa, pb) } else { (pb, pa) };
        if !taken[first] {
            taken[first] = true;
        } else if !taken[second] {
            taken[second] = true;
        } else {
            deferred += 1;
        }
    }
    // Sorted maps never collide on both candidates, so this is only a guard.
    if deferred > 0 {
        let mut spare: Vec<usize> = map_a.iter().chain(&map_b).copied().filter(|&p| !taken[p]).collect();
        spare.sort_unstable();
        spare.dedup();
        for &p in spare.choose_multiple(rng, deferred) {
            taken[p] = true;
        }
    }
    Ok(RemovalMask::from_bits(taken))
}

/// Balanced crossover with ones/zeros counters: each locus copies the bit of
/// a randomly chosen parent until one quota is met, then the remaining loci
/// get the complementary value.
pub fn counter_based_crossover<R: Rng + ?Sized>(
    a: &RemovalMask,
    b: &RemovalMask,
    rng: &mut R,
) -> Result<RemovalMask, OperatorError> {
    counter_based_with(a, b, || rng.gen::<bool>())
}

/// `pick_a` is consulted once per copied locus and selects parent `a` when
/// it returns true.
pub(crate) fn counter_based_with(
    a: &RemovalMask,
    b: &RemovalMask,
    mut pick_a: impl FnMut() -> bool,
) -> Result<RemovalMask, OperatorError> {
    let weight = check_parents(a, b)?;
    let len = a.len();
    let (mut ones, mut zeros) = (0usize, 0usize);
    let mut bits = Vec::with_capacity(len);
    for i in 0..len {
        let bit = if ones == weight {
            false
        } else if zeros == len - weight {
            true
        } else if pick_a() {
            a.get(i)
        } else {
            b.get(i)
        };
        if bit {
            ones += 1;
        } else {
            zeros += 1;
        }
        bits.push(bit);
    }
    Ok(RemovalMask::from_bits(bits))
}

/// Swaps a uniformly chosen one-position with a uniformly chosen
/// zero-position.
pub fn swap_mutation<R: Rng + ?Sized>(mask: &RemovalMask, rng: &mut R) -> Result<RemovalMask, OperatorError> {
    let (ones, zeros) = (mask.ones(), mask.zeros());
    let (Some(&i), Some(&j)) = (ones.choose(rng), zeros.choose(rng)) else {
        return Err(OperatorError::NothingToSwap);
    };
    let mut out = mask.clone();
    out.swap(i, j);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub mask: RemovalMask,
    pub fitness: f64,
}

/// What happened during one steady-state step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub tournament: Vec<usize>,
    pub parents: (usize, usize),
    pub child: Individual,
    pub mutated: bool,
    /// Population slot overwritten by the child, if any.
    pub replaced: Option<usize>,
}

/// One steady-state step: draw `tournament_size` distinct members, mate the
/// two fittest, optionally mutate the child, evaluate it once and overwrite
/// the tournament's worst member. Equal fitness values are ordered by a
/// uniform random tie-break.
pub fn steady_state_step<R, F>(
    population: &mut [Individual],
    config: &GaConfig,
    rng: &mut R,
    mut evaluate: F,
) -> Result<StepOutcome, GaError>
where
    R: Rng + ?Sized,
    F: FnMut(&RemovalMask) -> f64,
{
    let size = config.tournament_size;
    if size < 2 || size > population.len() {
        return Err(GaError::Config(format!(
            "tournament of {size} cannot be drawn from a population of {}",
            population.len()
        )));
    }
    let mut tournament = index::sample(rng, population.len(), size).into_vec();
    tournament.shuffle(rng);
    // stable sort keeps the shuffled order among ties
    tournament.sort_by(|&i, &j| population[i].fitness.total_cmp(&population[j].fitness));
    let (pa, pb, worst) = (tournament[0], tournament[1], tournament[size - 1]);

    let (a, b) = (&population[pa].mask, &population[pb].mask);
    let mut child = match config.crossover {
        CrossoverVariant::MapOfOnes => map_of_ones_crossover(a, b, rng)?,
        CrossoverVariant::CounterBased => counter_based_crossover(a, b, rng)?,
    };
    let mutated = rng.gen_bool(config.mutation_probability);
    if mutated {
        child = swap_mutation(&child, rng)?;
    }
    let fitness = evaluate(&child);
    let child = Individual { mask: child, fitness };
    let replaced = (!config.replace_only_if_better || fitness < population[worst].fitness).then(|| {
        population[worst] = child.clone();
        worst
    });
    Ok(StepOutcome { tournament, parents: (pa, pb), child, mutated, replaced })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 1-based evaluation count at which the best fitness improved.
    pub evaluation: usize,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub best_fitness: f64,
    pub best_mask: RemovalMask,
    pub success: bool,
    pub evaluations_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness_trace: Option<Vec<TracePoint>>,
}

struct BestTracker {
    best: Option<Individual>,
    trace: Option<Vec<TracePoint>>,
}

impl BestTracker {
    fn offer(&mut self, ind: &Individual, evaluation: usize) {
        if self.best.as_ref().is_some_and(|b| b.fitness <= ind.fitness) {
            return;
        }
        self.best = Some(ind.clone());
        if let Some(trace) = &mut self.trace {
            trace.push(TracePoint { evaluation, best_fitness: ind.fitness });
        }
    }
}

/// Runs the GA on `arr` looking for `N - λ′ s^t` rows whose removal leaves an
/// orthogonal array of index `target_index`. Deterministic in `config.seed`.
pub fn run_ga(arr: &OrthogonalArray, target_index: usize, config: &GaConfig) -> Result<RunReport, GaError> {
    config.validate()?;
    if arr.alphabet() != 2 {
        return Err(GaError::NonBinary(arr.alphabet()));
    }
    let evaluator = FitnessEvaluator::new(arr, target_index, config.fitness_config())?;
    let n = evaluator.n_rows();
    let p = evaluator.removal_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut tracker = BestTracker { best: None, trace: config.record_trace.then(Vec::new) };
    let mut evaluations = 0usize;
    let mut done = false;

    let mut population = Vec::with_capacity(config.population_size);
    while population.len() < config.population_size {
        let mask = random_balanced_mask(n, p, &mut rng)?;
        let fitness = evaluator.evaluate(&mask);
        evaluations += 1;
        let ind = Individual { mask, fitness };
        tracker.offer(&ind, evaluations);
        population.push(ind);
        if config.early_stop && fitness == 0.0 {
            done = true;
            break;
        }
    }

    while !done && evaluations < config.evaluation_budget {
        let outcome = steady_state_step(&mut population, config, &mut rng, |m| evaluator.evaluate(m))?;
        evaluations += 1;
        tracker.offer(&outcome.child, evaluations);
        done = config.early_stop && outcome.child.fitness == 0.0;
    }

    let best = tracker.best.expect("population is never empty");
    Ok(RunReport {
        seed: config.seed,
        best_fitness: best.fitness,
        best_mask: best.mask,
        success: best.fitness == 0.0,
        evaluations_used: evaluations,
        fitness_trace: tracker.trace,
    })
}
