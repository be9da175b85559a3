//! NSGA-II over the calibration genome.
//!
//! All randomness comes from one `ChaCha8Rng` stream seeded with
//! [`EvolutionConfig::seed`] and consumed in a fixed order (initial sampling, then per
//! generation: tournament, crossover, mutation). Objective evaluation may run on the
//! rayon pool; it never touches the generator and results are gathered in submission
//! order, so runs are reproducible regardless of thread count.

mod archive;
mod engine;
pub mod operators;
mod sorting;

use rayon::prelude::*;

pub use archive::{ArchiveEntry, ParetoArchive};
pub use engine::{evolve, EvolutionResult, GenerationLog, GenerationRecord, HypervolumeTracker};
pub use operators::{polynomial_mutation, random_genome, sbx_crossover};
pub use sorting::{crowding_distance, dominates, non_dominated_sort, rank_and_crowd};

use crate::error::{Error, Result};
use crate::objectives::ObjectiveVector;
use crate::problem::{CalibrationBounds, CalibrationVector, NUM_VARIABLES};

/// A bounded bi-objective minimization problem over calibration genomes.
pub trait Problem: Sync {
    fn bounds(&self) -> &CalibrationBounds;

    fn evaluate(&self, genome: &CalibrationVector) -> Result<ObjectiveVector>;

    /// Evaluations must not overlap (e.g. when they are being timed).
    fn serial_only(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub sbx_probability: f64,
    pub sbx_eta: f64,
    /// Per-gene crossover probability once a pair is selected for crossover.
    pub sbx_variable_probability: f64,
    pub pm_eta: f64,
    pub pm_probability: f64,
    pub seed: u64,
    pub eliminate_duplicates: bool,
    pub parallel_evaluation: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 100,
            sbx_probability: 0.9,
            sbx_eta: 15.0,
            sbx_variable_probability: 0.5,
            pm_eta: 20.0,
            pm_probability: 1.0 / NUM_VARIABLES as f64,
            seed: 0,
            eliminate_duplicates: true,
            parallel_evaluation: true,
        }
    }
}

impl EvolutionConfig {
    /// Population 1000 for 200 generations.
    pub fn paper_scale() -> Self {
        Self {
            population_size: 1000,
            generations: 200,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// About a quarter of this configuration's evaluation budget, spent on a third of
    /// the population for correspondingly more generations. Used by the
    /// epsilon-constraint runs.
    pub fn quarter_budget(&self) -> Self {
        let third = (self.population_size / 3).max(4);
        let pop = third + third % 2;
        let generations = (self.evaluation_budget() / 4 / pop).saturating_sub(1);
        Self {
            population_size: pop,
            generations,
            ..self.clone()
        }
    }

    pub fn evaluation_budget(&self) -> usize {
        self.population_size * (self.generations + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || self.population_size % 2 != 0 {
            return Err(Error::invalid(format!(
                "population size must be even and >= 4, got {}",
                self.population_size
            )));
        }
        for (name, p) in [
            ("sbx_probability", self.sbx_probability),
            ("sbx_variable_probability", self.sbx_variable_probability),
            ("pm_probability", self.pm_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0,1], got {p}")));
            }
        }
        if !(self.sbx_eta > 0.0 && self.pm_eta > 0.0) {
            return Err(Error::invalid("distribution indices must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub genome: CalibrationVector,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

/// Evaluates genomes in order, on the rayon pool when allowed.
pub fn evaluate_all<P: Problem>(
    problem: &P,
    genomes: &[CalibrationVector],
    parallel: bool,
) -> Result<Vec<ObjectiveVector>> {
    let eval = |g: &CalibrationVector| -> Result<ObjectiveVector> {
        let wrap = |e: Error| Error::Evaluation {
            genome: g.0,
            source: Box::new(e),
        };
        let o = problem.evaluate(g).map_err(wrap)?;
        if !o.is_valid() {
            return Err(wrap(Error::invalid(format!("objective vector {o:?} is not finite and non-negative"))));
        }
        Ok(o)
    };
    if parallel && !problem.serial_only() {
        genomes.par_iter().map(eval).collect()
    } else {
        genomes.iter().map(eval).collect()
    }
}

/// Bit pattern of a genome, for exact duplicate detection.
pub(crate) fn genome_key(g: &CalibrationVector) -> [u64; NUM_VARIABLES] {
    g.0.map(f64::to_bits)
}
