//! Single-objective references for the bi-objective search: plain Chamfer
//! minimization and the epsilon-constraint sweep over evaluation cost.
//!
//! Both run an elitist genetic algorithm built from the same sampling, tournament, SBX
//! and polynomial-mutation operators as the NSGA-II engine. Unconstrained runs keep the
//! best `population_size` of parents and offspring; epsilon runs use restricted
//! tournament replacement.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::operators::{polynomial_mutation, random_genome, sbx_crossover};
use crate::evolution::{evaluate_all, EvolutionConfig, Problem};
use crate::objectives::ObjectiveVector;
use crate::problem::{CalibrationBounds, CalibrationProblem, CalibrationVector};

use crate::evolution::genome_key;

const MAX_REFILL_ROUNDS: usize = 20;
/// Members sampled when looking for the one an offspring competes against.
pub const REPLACEMENT_WINDOW: usize = 10;

/// How offspring enter the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Survival {
    /// Parents and offspring pooled, best `population_size` kept.
    Truncation,
    /// Each offspring competes with the closest of `window` randomly drawn members and
    /// replaces it only when better.
    Replacement { window: usize },
}

/// Feasible-first ordering key: constraint violation, then objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Fitness {
    violation: f64,
    value: f64,
}

impl Fitness {
    fn cmp(&self, other: &Self) -> Ordering {
        self.violation
            .total_cmp(&other.violation)
            .then(self.value.total_cmp(&other.value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarRun {
    pub best: CalibrationVector,
    pub best_objectives: ObjectiveVector,
    pub feasible: bool,
    /// Best feasible chamfer after each generation (index 0 is the initial population);
    /// `inf` while nothing is feasible.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// GA minimizing chamfer subject to `comp_cost <= max_cost` (when given). Both survival
/// schemes are elitist, so the best member never gets worse. Infeasible individuals
/// rank behind every feasible one, ordered by violation. `seeds` replace the first
/// members of the random initial population.
pub fn minimize_chamfer<P: Problem>(
    problem: &P,
    cfg: &EvolutionConfig,
    max_cost: Option<f64>,
    survival: Survival,
    seeds: &[CalibrationVector],
) -> Result<ScalarRun> {
    cfg.validate()?;
    let bounds = *problem.bounds();
    let fitness = |o: &ObjectiveVector| Fitness {
        violation: max_cost.map_or(0.0, |eps| (o.comp_cost - eps).max(0.0)),
        value: o.chamfer,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut genomes: Vec<CalibrationVector> = (0..cfg.population_size)
        .map(|_| random_genome(&bounds, &mut rng))
        .collect();
    for (slot, seed) in genomes.iter_mut().zip(seeds) {
        if !bounds.contains(seed) {
            return Err(Error::invalid(format!("seed genome {:?} outside bounds", seed.0)));
        }
        *slot = *seed;
    }
    let objectives = evaluate_all(problem, &genomes, cfg.parallel_evaluation)?;
    let mut evaluations = genomes.len();
    let mut pop: Vec<(CalibrationVector, ObjectiveVector, Fitness)> = genomes
        .into_iter()
        .zip(objectives)
        .map(|(g, o)| (g, o, fitness(&o)))
        .collect();
    sort_population(&mut pop);
    let mut trace = vec![trace_value(&pop[0].2)];

    for _ in 0..cfg.generations {
        let mut seen: HashSet<_> = pop.iter().map(|p| genome_key(&p.0)).collect();
        let mut offspring = Vec::with_capacity(cfg.population_size);
        let mut attempts = 0;
        while offspring.len() < cfg.population_size && attempts < MAX_REFILL_ROUNDS * cfg.population_size {
            let a = tournament(&pop, &mut rng);
            let b = tournament(&pop, &mut rng);
            let (c1, c2) = sbx_crossover(&pop[a].0, &pop[b].0, &bounds, cfg, &mut rng);
            for child in [c1, c2] {
                let child = polynomial_mutation(&child, &bounds, cfg, &mut rng);
                attempts += 1;
                if offspring.len() >= cfg.population_size {
                    break;
                }
                if cfg.eliminate_duplicates && !seen.insert(genome_key(&child)) {
                    continue;
                }
                offspring.push(child);
            }
        }
        let off_obj = evaluate_all(problem, &offspring, cfg.parallel_evaluation)?;
        evaluations += offspring.len();
        match survival {
            Survival::Truncation => {
                pop.extend(offspring.into_iter().zip(off_obj).map(|(g, o)| (g, o, fitness(&o))));
                sort_population(&mut pop);
                pop.truncate(cfg.population_size);
            }
            Survival::Replacement { window } => {
                for (g, o) in offspring.into_iter().zip(off_obj) {
                    let f = fitness(&o);
                    let j = nearest_in_window(&pop, &g, &bounds, window, &mut rng);
                    if f.cmp(&pop[j].2) == Ordering::Less {
                        pop[j] = (g, o, f);
                    }
                }
                sort_population(&mut pop);
            }
        }
        trace.push(trace_value(&pop[0].2));
    }

    let (best, best_objectives, f) = pop[0];
    Ok(ScalarRun {
        best,
        best_objectives,
        feasible: f.violation == 0.0,
        trace,
        evaluations,
    })
}

fn trace_value(f: &Fitness) -> f64 {
    if f.violation == 0.0 {
        f.value
    } else {
        f64::INFINITY
    }
}

/// Index of the member closest to `g` (range-normalized Euclidean distance) among
/// `window` uniformly drawn candidates.
fn nearest_in_window<R: Rng>(
    pop: &[(CalibrationVector, ObjectiveVector, Fitness)],
    g: &CalibrationVector,
    bounds: &CalibrationBounds,
    window: usize,
    rng: &mut R,
) -> usize {
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let mut best = (f64::INFINITY, 0);
    for _ in 0..window.max(1) {
        let j = rng.random_range(0..pop.len());
        let d: f64 = (0..g.0.len())
            .map(|k| ((g.0[k] - pop[j].0 .0[k]) / (hi[k] - lo[k])).powi(2))
            .sum();
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

/// Stable sort, so earlier members win ties.
fn sort_population(pop: &mut [(CalibrationVector, ObjectiveVector, Fitness)]) {
    pop.sort_by(|a, b| a.2.cmp(&b.2));
}

/// Population is sorted, so the lower index is never worse.
fn tournament<R: Rng>(pop: &[(CalibrationVector, ObjectiveVector, Fitness)], rng: &mut R) -> usize {
    let i = rng.random_range(0..pop.len());
    let j = rng.random_range(0..pop.len());
    i.min(j)
}

/// Minimizes the problem's chamfer objective with the point count pinned to `n_max`.
pub fn single_objective_minimize(problem: &CalibrationProblem, cfg: &EvolutionConfig) -> Result<ScalarRun> {
    let pinned = problem.with_bounds(problem.bounds().with_full_count())?;
    minimize_chamfer(&pinned, cfg, None, Survival::Truncation, &[])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonResult {
    pub epsilon: f64,
    pub feasible: bool,
    /// Best solution found; the least-violating one when `feasible` is false.
    pub solution: CalibrationVector,
    pub achieved: ObjectiveVector,
}

/// Runs one constrained GA per bound (restricted tournament replacement with
/// [`REPLACEMENT_WINDOW`]), loosest first. Each run after the first is
/// seeded with the previous best, its sample count scaled down to fit the tighter
/// bound. A final pass in ascending order lets a bound adopt the result of a tighter
/// one when that is better, since it is feasible there too; chamfer is therefore
/// non-increasing in epsilon. Results come back in input order.
pub fn epsilon_constraint_sweep<P: Problem>(
    problem: &P,
    epsilons: &[f64],
    cfg: &EvolutionConfig,
) -> Result<Vec<EpsilonResult>> {
    if let Some(e) = epsilons.iter().find(|e| !e.is_finite()) {
        return Err(Error::invalid(format!("epsilon {e} is not finite")));
    }
    let bounds = *problem.bounds();
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|&a, &b| epsilons[b].total_cmp(&epsilons[a]).then(a.cmp(&b)));
    let mut results: Vec<Option<EpsilonResult>> = vec![None; epsilons.len()];
    let mut warm: Option<(CalibrationVector, ObjectiveVector)> = None;
    for &idx in &order {
        let eps = epsilons[idx];
        let seeds: Vec<CalibrationVector> = warm
            .iter()
            .map(|(g, o)| shrink_to_budget(g, o.comp_cost, eps, &bounds))
            .collect();
        let survival = Survival::Replacement {
            window: REPLACEMENT_WINDOW,
        };
        let run = minimize_chamfer(problem, cfg, Some(eps), survival, &seeds)?;
        if run.feasible {
            warm = Some((run.best, run.best_objectives));
        }
        log::info!(
            "epsilon {eps:.4}: feasible={} chamfer={:.4} cost={:.4}",
            run.feasible,
            run.best_objectives.chamfer,
            run.best_objectives.comp_cost
        );
        results[idx] = Some(EpsilonResult {
            epsilon: eps,
            feasible: run.feasible,
            solution: run.best,
            achieved: run.best_objectives,
        });
    }
    let mut results: Vec<EpsilonResult> = results.into_iter().map(|r| r.expect("every epsilon processed")).collect();
    let mut carried: Option<(CalibrationVector, ObjectiveVector)> = None;
    for &idx in order.iter().rev() {
        let r = &mut results[idx];
        match carried {
            Some((g, o)) if !r.feasible || o.chamfer < r.achieved.chamfer => {
                r.feasible = true;
                r.solution = g;
                r.achieved = o;
            }
            _ => {}
        }
        if r.feasible {
            carried = Some((r.solution, r.achieved));
        }
    }
    Ok(results)
}

/// Scales the sample count by `eps / cost` when `cost` exceeds `eps`.
fn shrink_to_budget(g: &CalibrationVector, cost: f64, eps: f64, bounds: &CalibrationBounds) -> CalibrationVector {
    let mut out = *g;
    if cost > eps && cost > 0.0 {
        out.0[6] = (g.0[6] * eps / cost).floor().clamp(bounds.n_min as f64, bounds.n_max as f64);
    }
    out
}
