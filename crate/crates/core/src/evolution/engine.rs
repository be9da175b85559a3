use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::operators::{polynomial_mutation, random_genome, sbx_crossover};
use super::sorting::{non_dominated_sort, rank_and_crowd};
use super::{evaluate_all, genome_key, EvolutionConfig, Individual, ParetoArchive, Problem};
use crate::error::Result;
use crate::objectives::ObjectiveVector;
use crate::problem::CalibrationVector;

/// Give up refilling the offspring pool after this many pool-sizes of attempts.
const MAX_REFILL_ROUNDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub evaluations: usize,
    pub best_chamfer: f64,
    pub mean_chamfer: f64,
    pub best_comp: f64,
    pub archive_size: usize,
    pub archive_hypervolume: f64,
}

pub type GenerationLog = Vec<GenerationRecord>;

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub population: Vec<Individual>,
    pub archive: ParetoArchive,
    pub log: GenerationLog,
}

/// Running componentwise maximum over every evaluation; the hypervolume reference is
/// that maximum scaled by 1.1.
#[derive(Debug, Clone, Copy)]
pub struct HypervolumeTracker {
    max: [f64; 2],
}

impl Default for HypervolumeTracker {
    fn default() -> Self {
        Self { max: [0.0, 0.0] }
    }
}

impl HypervolumeTracker {
    pub fn observe(&mut self, o: &ObjectiveVector) {
        self.max[0] = self.max[0].max(o.chamfer);
        self.max[1] = self.max[1].max(o.comp_cost);
    }

    pub fn reference(&self) -> ObjectiveVector {
        ObjectiveVector::new(self.max[0] * 1.1, self.max[1] * 1.1)
    }
}

/// Runs NSGA-II and returns the final population, the external archive of every
/// non-dominated evaluation, and one log record per generation (generation 0 is the
/// initial population).
pub fn evolve<P: Problem>(problem: &P, cfg: &EvolutionConfig) -> Result<EvolutionResult> {
    cfg.validate()?;
    let bounds = *problem.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut archive = ParetoArchive::new();
    let mut tracker = HypervolumeTracker::default();
    let mut log = GenerationLog::new();

    let genomes: Vec<CalibrationVector> = (0..cfg.population_size)
        .map(|_| random_genome(&bounds, &mut rng))
        .collect();
    let objectives = evaluate_all(problem, &genomes, cfg.parallel_evaluation)?;
    let mut evaluations = genomes.len();
    for (g, o) in genomes.iter().zip(&objectives) {
        tracker.observe(o);
        archive.insert(*g, *o);
    }
    let mut population = assign(genomes, objectives);
    log.push(record(0, evaluations, &population, &archive, &tracker)?);

    for generation in 1..=cfg.generations {
        let offspring = make_offspring(&population, cfg, &bounds, &mut rng);
        let off_obj = evaluate_all(problem, &offspring, cfg.parallel_evaluation)?;
        evaluations += offspring.len();
        for (g, o) in offspring.iter().zip(&off_obj) {
            tracker.observe(o);
            archive.insert(*g, *o);
        }

        let mut genomes: Vec<CalibrationVector> = population.iter().map(|i| i.genome).collect();
        let mut objectives: Vec<ObjectiveVector> = population.iter().map(|i| i.objectives).collect();
        genomes.extend(offspring);
        objectives.extend(off_obj);
        let survivors = environmental_selection(&objectives, cfg.population_size);
        population = assign(
            survivors.iter().map(|&i| genomes[i]).collect(),
            survivors.iter().map(|&i| objectives[i]).collect(),
        );
        log.push(record(generation, evaluations, &population, &archive, &tracker)?);
        log::debug!(
            "generation {generation}: best chamfer {:.4}, archive {}",
            log.last().map(|r| r.best_chamfer).unwrap_or(f64::NAN),
            archive.len()
        );
    }

    Ok(EvolutionResult {
        population,
        archive,
        log,
    })
}

fn assign(genomes: Vec<CalibrationVector>, objectives: Vec<ObjectiveVector>) -> Vec<Individual> {
    let (_, rank, crowding) = rank_and_crowd(&objectives);
    genomes
        .into_iter()
        .zip(objectives)
        .enumerate()
        .map(|(i, (genome, objectives))| Individual {
            genome,
            objectives,
            rank: rank[i],
            crowding: crowding[i],
        })
        .collect()
}

/// Indices of the `size` survivors: whole fronts first, then the most crowded-apart
/// members of the splitting front (ties by lower index).
fn environmental_selection(objectives: &[ObjectiveVector], size: usize) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(size);
    for front in non_dominated_sort(objectives) {
        if chosen.len() + front.len() <= size {
            chosen.extend(front);
            if chosen.len() == size {
                break;
            }
            continue;
        }
        let objs: Vec<ObjectiveVector> = front.iter().map(|&i| objectives[i]).collect();
        let dist = super::crowding_distance(&objs);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(front[a].cmp(&front[b])));
        let missing = size - chosen.len();
        chosen.extend(order.into_iter().take(missing).map(|k| front[k]));
        break;
    }
    chosen
}

/// Binary tournament on (rank, crowding), ties to the lower index.
fn tournament<R: Rng>(pop: &[Individual], rng: &mut R) -> usize {
    let i = rng.random_range(0..pop.len());
    let j = rng.random_range(0..pop.len());
    let (a, b) = (&pop[i], &pop[j]);
    let a_wins = match a.rank.cmp(&b.rank) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => match a.crowding.total_cmp(&b.crowding) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => i <= j,
        },
    };
    if a_wins {
        i
    } else {
        j
    }
}

fn make_offspring<R: Rng>(
    pop: &[Individual],
    cfg: &EvolutionConfig,
    bounds: &crate::problem::CalibrationBounds,
    rng: &mut R,
) -> Vec<CalibrationVector> {
    let target = cfg.population_size;
    let mut seen: HashSet<_> = pop.iter().map(|i| genome_key(&i.genome)).collect();
    let mut out = Vec::with_capacity(target);
    let mut attempts = 0;
    while out.len() < target && attempts < MAX_REFILL_ROUNDS * target {
        let p1 = tournament(pop, rng);
        let p2 = tournament(pop, rng);
        let (c1, c2) = sbx_crossover(&pop[p1].genome, &pop[p2].genome, bounds, cfg, rng);
        for child in [c1, c2] {
            let child = polynomial_mutation(&child, bounds, cfg, rng);
            attempts += 1;
            if out.len() >= target {
                break;
            }
            if cfg.eliminate_duplicates && !seen.insert(genome_key(&child)) {
                continue;
            }
            out.push(child);
        }
    }
    out
}

fn record(
    generation: usize,
    evaluations: usize,
    pop: &[Individual],
    archive: &ParetoArchive,
    tracker: &HypervolumeTracker,
) -> Result<GenerationRecord> {
    let best_chamfer = pop.iter().map(|i| i.objectives.chamfer).fold(f64::INFINITY, f64::min);
    let mean_chamfer = pop.iter().map(|i| i.objectives.chamfer).sum::<f64>() / pop.len() as f64;
    let best_comp = pop.iter().map(|i| i.objectives.comp_cost).fold(f64::INFINITY, f64::min);
    Ok(GenerationRecord {
        generation,
        evaluations,
        best_chamfer,
        mean_chamfer,
        best_comp,
        archive_size: archive.len(),
        archive_hypervolume: archive.hypervolume(tracker.reference())?,
    })
}
