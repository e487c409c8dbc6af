//! Genetic search over capacity-constrained UE-to-BS assignments.
//!
//! A chromosome is a length-`K` vector of BS indices. Every offspring goes
//! through [`repair`] before evaluation, so each fitness value belongs to a
//! feasible network state. The same machinery solves the per-slot sum-rate
//! problem (with [`UtilityEvaluator`] as objective) and the load-balancing
//! baseline (with an additive rate table).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::association::{feasible, ActivationVector};
use crate::rate::{full_interference_table, slot_throughputs, SlotContext, UtilityEvaluator};
use crate::rng::{self, StreamTag};
use crate::{Error, Result};

/// Largest `J^K` the exhaustive oracle accepts by default.
pub const DEFAULT_ENUMERATION_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Stop after this many generations without improvement of the incumbent.
    pub stall_generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means `1 / K`.
    pub mutation_rate_per_gene: Option<f64>,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 80,
            max_generations: 200,
            stall_generations: 30,
            crossover_rate: 0.9,
            mutation_rate_per_gene: None,
            tournament_size: 3,
            elite_count: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::invalid("population_size must be at least 2"));
        }
        if self.max_generations == 0 || self.stall_generations == 0 || self.tournament_size == 0 {
            return Err(Error::invalid(
                "max_generations, stall_generations and tournament_size must be positive",
            ));
        }
        if self.elite_count >= self.population_size {
            return Err(Error::invalid("elite_count must be below population_size"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::invalid("crossover_rate must lie in [0, 1]"));
        }
        if let Some(m) = self.mutation_rate_per_gene {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::invalid("mutation_rate_per_gene must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Same settings with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Feasibility data of an assignment problem.
#[derive(Debug, Clone, Copy)]
pub struct AssignmentProblem<'a> {
    pub streams: &'a [usize],
    pub capacities: &'a [usize],
    /// `K x J` per-link scores used by repair to rank moves.
    pub repair_scores: &'a [Vec<f64>],
}

impl<'a> AssignmentProblem<'a> {
    /// Validates dimensions and that every user can be placed.
    pub fn new(
        streams: &'a [usize],
        capacities: &'a [usize],
        repair_scores: &'a [Vec<f64>],
    ) -> Result<Self> {
        if capacities.is_empty() {
            return Err(Error::invalid("at least one BS required"));
        }
        if repair_scores.len() != streams.len()
            || repair_scores.iter().any(|r| r.len() != capacities.len())
        {
            return Err(Error::invalid("repair score table must be K x J"));
        }
        if streams.contains(&0) {
            return Err(Error::invalid("every user needs at least one stream"));
        }
        let demand: usize = streams.iter().sum();
        let capacity: usize = capacities.iter().sum();
        if demand > capacity {
            return Err(Error::InfeasibleCapacity {
                demand,
                capacity,
                shortfall: demand - capacity,
            });
        }
        Ok(Self {
            streams,
            capacities,
            repair_scores,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.streams.len()
    }

    pub fn num_bss(&self) -> usize {
        self.capacities.len()
    }

    /// `J^K` as a float (it overflows integers quickly).
    pub fn search_space_size(&self) -> f64 {
        (self.num_bss() as f64).powi(self.num_ues() as i32)
    }

    fn stream_loads(&self, chromosome: &[usize]) -> Vec<usize> {
        let mut load = vec![0usize; self.num_bss()];
        for (k, &b) in chromosome.iter().enumerate() {
            load[b] += self.streams[k];
        }
        load
    }

    pub fn is_feasible(&self, chromosome: &[usize]) -> bool {
        self.stream_loads(chromosome)
            .iter()
            .zip(self.capacities)
            .all(|(l, c)| l <= c)
    }
}

/// Quantity maximized over assignments.
pub trait Objective {
    fn evaluate(&self, chromosome: &[usize]) -> Result<f64>;
}

impl Objective for UtilityEvaluator {
    fn evaluate(&self, chromosome: &[usize]) -> Result<f64> {
        self.utility_full(chromosome)
    }
}

/// `sum_k table[k][chromosome[k]]`.
#[derive(Debug, Clone, Copy)]
pub struct AdditiveObjective<'a> {
    table: &'a [Vec<f64>],
}

impl<'a> AdditiveObjective<'a> {
    pub fn new(table: &'a [Vec<f64>]) -> Self {
        Self { table }
    }
}

impl Objective for AdditiveObjective<'_> {
    fn evaluate(&self, chromosome: &[usize]) -> Result<f64> {
        Ok(chromosome
            .iter()
            .enumerate()
            .map(|(k, &b)| self.table[k][b])
            .sum())
    }
}

/// Makes `chromosome` feasible by moving users off overloaded BSs.
///
/// While some BS is overloaded (lowest index first), the attached user whose
/// move costs the least score (current score minus score at its best BS with
/// spare room) moves there. Ties go to the lowest UE index, then the lowest
/// BS index. Each user moves at most once.
pub fn repair(chromosome: &[usize], problem: &AssignmentProblem<'_>) -> Result<Vec<usize>> {
    let mut genes = chromosome.to_vec();
    if genes.len() != problem.num_ues() || genes.iter().any(|&b| b >= problem.num_bss()) {
        return Err(Error::invalid(
            "chromosome does not match the problem dimensions",
        ));
    }
    let mut load = problem.stream_loads(&genes);
    for _ in 0..=problem.num_ues() {
        let Some(over) = (0..problem.num_bss()).find(|&j| load[j] > problem.capacities[j]) else {
            return Ok(genes);
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for k in (0..genes.len()).filter(|&k| genes[k] == over) {
            let need = problem.streams[k];
            let scores = &problem.repair_scores[k];
            let mut target: Option<usize> = None;
            for j in (0..problem.num_bss()).filter(|&j| j != over) {
                if load[j] + need > problem.capacities[j] {
                    continue;
                }
                if target.is_none_or(|t| scores[j] > scores[t]) {
                    target = Some(j);
                }
            }
            if let Some(j) = target {
                let loss = scores[over] - scores[j];
                if best.is_none_or(|(b, _, _)| loss < b) {
                    best = Some((loss, k, j));
                }
            }
        }
        let (_, k, j) = best.ok_or_else(|| {
            Error::internal(format!("BS {over} is overloaded and no user can be moved"))
        })?;
        load[over] -= problem.streams[k];
        load[j] += problem.streams[k];
        genes[k] = j;
    }
    Err(Error::internal("repair did not terminate within K moves"))
}

/// Best assignment found by [`evolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub best: Vec<usize>,
    pub best_value: f64,
    pub generations_run: usize,
    /// Incumbent value after initialization and after every generation.
    pub trace: Vec<f64>,
    /// Number of distinct chromosomes evaluated.
    pub evaluations: usize,
}

struct Population {
    members: Vec<Vec<usize>>,
    fitness: Vec<f64>,
}

struct Memo<'o, O: Objective + ?Sized> {
    objective: &'o O,
    seen: HashMap<Vec<usize>, f64>,
}

impl<O: Objective + ?Sized> Memo<'_, O> {
    fn eval(&mut self, c: &[usize]) -> Result<f64> {
        if let Some(&v) = self.seen.get(c) {
            return Ok(v);
        }
        let v = self.objective.evaluate(c)?;
        if !v.is_finite() {
            return Err(Error::internal("objective returned a non-finite value"));
        }
        self.seen.insert(c.to_vec(), v);
        Ok(v)
    }
}

/// Greedy random fill: users in random order, each on a uniformly chosen BS
/// that still has room for its streams.
fn random_feasible<R: Rng>(problem: &AssignmentProblem<'_>, rng: &mut R) -> Result<Vec<usize>> {
    let (k_total, j_total) = (problem.num_ues(), problem.num_bss());
    let mut order: Vec<usize> = (0..k_total).collect();
    order.shuffle(rng);
    let mut load = vec![0usize; j_total];
    let mut genes = vec![0usize; k_total];
    for k in order {
        let open: Vec<usize> = (0..j_total)
            .filter(|&j| load[j] + problem.streams[k] <= problem.capacities[j])
            .collect();
        let b = if open.is_empty() {
            rng.random_range(0..j_total)
        } else {
            open[rng.random_range(0..open.len())]
        };
        load[b] += problem.streams[k];
        genes[k] = b;
    }
    repair(&genes, problem)
}

fn tournament<R: Rng>(pop: &Population, size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..pop.members.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.members.len());
        if pop.fitness[c] > pop.fitness[best] || (pop.fitness[c] == pop.fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Indices sorted by fitness (descending), ties by chromosome order.
fn ranking(pop: &Population) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.members.len()).collect();
    idx.sort_by(|&a, &b| {
        pop.fitness[b]
            .partial_cmp(&pop.fitness[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| pop.members[a].cmp(&pop.members[b]))
    });
    idx
}

/// Runs the genetic algorithm and returns the feasible incumbent.
pub fn evolve<O: Objective + ?Sized>(
    problem: &AssignmentProblem<'_>,
    objective: &O,
    cfg: &GaConfig,
) -> Result<Evolution> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, StreamTag::Genetic, &[]);
    let k_total = problem.num_ues();
    let j_total = problem.num_bss();
    let mutation = cfg
        .mutation_rate_per_gene
        .unwrap_or(1.0 / k_total.max(1) as f64);
    let mut memo = Memo {
        objective,
        seen: HashMap::new(),
    };

    let mut members = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        members.push(random_feasible(problem, &mut rng)?);
    }
    let fitness = members
        .iter()
        .map(|c| memo.eval(c))
        .collect::<Result<Vec<_>>>()?;
    let mut pop = Population { members, fitness };

    let lead = ranking(&pop)[0];
    let mut best = pop.members[lead].clone();
    let mut best_value = pop.fitness[lead];
    let mut trace = vec![best_value];
    let mut stall = 0;
    let mut generations_run = 0;

    while generations_run < cfg.max_generations && stall < cfg.stall_generations {
        let order = ranking(&pop);
        let mut next: Vec<Vec<usize>> = order[..cfg.elite_count]
            .iter()
            .map(|&i| pop.members[i].clone())
            .collect();
        while next.len() < cfg.population_size {
            let a = tournament(&pop, cfg.tournament_size, &mut rng);
            let b = tournament(&pop, cfg.tournament_size, &mut rng);
            let mut child = if rng.random::<f64>() < cfg.crossover_rate {
                pop.members[a]
                    .iter()
                    .zip(&pop.members[b])
                    .map(|(&x, &y)| if rng.random::<bool>() { x } else { y })
                    .collect()
            } else {
                pop.members[a].clone()
            };
            for gene in child.iter_mut() {
                if rng.random::<f64>() < mutation {
                    *gene = rng.random_range(0..j_total);
                }
            }
            next.push(repair(&child, problem)?);
        }
        let fitness = next
            .iter()
            .map(|c| memo.eval(c))
            .collect::<Result<Vec<_>>>()?;
        pop = Population {
            members: next,
            fitness,
        };
        generations_run += 1;

        let lead = ranking(&pop)[0];
        if pop.fitness[lead] > best_value {
            best_value = pop.fitness[lead];
            best = pop.members[lead].clone();
            stall = 0;
        } else {
            stall += 1;
        }
        trace.push(best_value);
    }

    Ok(Evolution {
        best,
        best_value,
        generations_run,
        trace,
        evaluations: memo.seen.len(),
    })
}

/// Exhaustive search over all `J^K` assignments in lexicographic order.
/// Returns the best value and the lexicographically smallest maximizer.
pub fn enumerate<O: Objective + ?Sized>(
    problem: &AssignmentProblem<'_>,
    objective: &O,
    cap: f64,
) -> Result<(f64, Vec<usize>)> {
    let size = problem.search_space_size();
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let (k_total, j_total) = (problem.num_ues(), problem.num_bss());
    let mut genes = vec![0usize; k_total];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        if problem.is_feasible(&genes) {
            let v = objective.evaluate(&genes)?;
            let better = match &best {
                None => true,
                Some((b, _)) => v > b + 1e-12 * b.abs().max(1.0),
            };
            if better {
                best = Some((v, genes.clone()));
            }
        }
        // Odometer increment, last gene fastest.
        let mut pos = k_total;
        loop {
            if pos == 0 {
                return best.ok_or_else(|| Error::internal("no feasible assignment exists"));
            }
            pos -= 1;
            genes[pos] += 1;
            if genes[pos] < j_total {
                break;
            }
            genes[pos] = 0;
        }
    }
}

/// Outcome of the per-slot sum-rate search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best_activation: ActivationVector,
    pub best_utility: f64,
    pub generations_run: usize,
    pub utility_trace: Vec<f64>,
    pub evaluations: usize,
}

/// Everything needed to search one slot: the fast utility evaluator and the
/// full-interference table that guides repair.
pub struct SlotProblem<'a> {
    pub ctx: &'a SlotContext,
    pub streams: Vec<usize>,
    pub capacities: Vec<usize>,
    pub evaluator: UtilityEvaluator,
    pub fi_table: Vec<Vec<f64>>,
}

impl<'a> SlotProblem<'a> {
    pub fn new(ctx: &'a SlotContext, streams: &[usize], capacities: &[usize]) -> Result<Self> {
        if capacities.len() != ctx.num_bss() || streams.len() != ctx.num_ues() {
            return Err(Error::invalid("streams / capacities do not match the slot"));
        }
        let fi_table = full_interference_table(ctx, streams)?;
        AssignmentProblem::new(streams, capacities, &fi_table)?;
        Ok(Self {
            ctx,
            streams: streams.to_vec(),
            capacities: capacities.to_vec(),
            evaluator: UtilityEvaluator::new(ctx, streams)?,
            fi_table,
        })
    }

    pub fn assignment_problem(&self) -> AssignmentProblem<'_> {
        AssignmentProblem {
            streams: &self.streams,
            capacities: &self.capacities,
            repair_scores: &self.fi_table,
        }
    }

    pub fn solve(&self, cfg: &GaConfig, slot_index: usize) -> Result<GaResult> {
        let evo = evolve(&self.assignment_problem(), &self.evaluator, cfg)?;
        let best_activation = ActivationVector::full(&evo.best, slot_index);
        debug_assert!(feasible(&best_activation, &self.streams, &self.capacities)?.feasible);
        Ok(GaResult {
            best_activation,
            best_utility: evo.best_value,
            generations_run: evo.generations_run,
            utility_trace: evo.trace,
            evaluations: evo.evaluations,
        })
    }

    pub fn brute_force(&self, cap: f64, slot_index: usize) -> Result<(f64, ActivationVector)> {
        let (v, best) = enumerate(&self.assignment_problem(), &self.evaluator, cap)?;
        Ok((v, ActivationVector::full(&best, slot_index)))
    }
}

/// Per-slot sum-rate maximization with the genetic algorithm.
pub fn solve_slot(
    ctx: &SlotContext,
    streams: &[usize],
    capacities: &[usize],
    cfg: &GaConfig,
) -> Result<GaResult> {
    SlotProblem::new(ctx, streams, capacities)?.solve(cfg, 0)
}

/// Exhaustive optimum of the per-slot problem.
pub fn brute_force_oracle(
    ctx: &SlotContext,
    streams: &[usize],
    capacities: &[usize],
    cap: f64,
) -> Result<(f64, ActivationVector)> {
    SlotProblem::new(ctx, streams, capacities)?.brute_force(cap, 0)
}

/// Independent recomputation of a result's utility through the direct rate path.
pub fn recompute_utility(ctx: &SlotContext, result: &GaResult, streams: &[usize]) -> Result<f64> {
    Ok(slot_throughputs(&result.best_activation, ctx, streams)?.utility)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(k: usize, j: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|a| (0..j).map(|b| ((a * 7 + b * 3) % 5) as f64).collect())
            .collect()
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = GaConfig {
            elite_count: 80,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            crossover_rate: 1.5,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn repair_leaves_feasible_input_alone() {
        let s = scores(4, 2);
        let p = AssignmentProblem::new(&[1; 4], &[2, 2], &s).unwrap();
        assert_eq!(repair(&[0, 1, 0, 1], &p).unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn repair_moves_exactly_the_overflow() {
        let s = scores(8, 4);
        let p = AssignmentProblem::new(&[2; 8], &[4; 4], &s).unwrap();
        let fixed = repair(&[0; 8], &p).unwrap();
        assert!(p.is_feasible(&fixed));
        assert_eq!(fixed.iter().filter(|&&b| b != 0).count(), 6);
    }

    #[test]
    fn repair_moves_cheapest_user() {
        // User 1 loses only 0.5 by moving, user 0 loses 4.
        let s = vec![vec![5.0, 1.0], vec![4.0, 3.5]];
        let p = AssignmentProblem::new(&[1, 1], &[1, 1], &s).unwrap();
        assert_eq!(repair(&[0, 0], &p).unwrap(), vec![0, 1]);
    }

    #[test]
    fn infeasible_capacity_is_rejected() {
        let s = scores(3, 1);
        assert!(matches!(
            AssignmentProblem::new(&[2; 3], &[4], &s),
            Err(Error::InfeasibleCapacity { shortfall: 2, .. })
        ));
    }

    #[test]
    fn enumeration_honours_cap() {
        let s = scores(8, 4);
        let p = AssignmentProblem::new(&[2; 8], &[4; 4], &s).unwrap();
        assert!(matches!(
            enumerate(&p, &AdditiveObjective::new(&s), 1000.0),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn enumeration_breaks_ties_lexicographically() {
        let s = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let p = AssignmentProblem::new(&[1, 1], &[1, 1], &s).unwrap();
        let (v, best) = enumerate(&p, &AdditiveObjective::new(&s), 1e6).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(best, vec![0, 1]);
    }

    #[test]
    fn evolve_is_deterministic_and_monotone() {
        let s = scores(8, 4);
        let p = AssignmentProblem::new(&[2; 8], &[4; 4], &s).unwrap();
        let obj = AdditiveObjective::new(&s);
        let cfg = GaConfig::default().with_seed(17);
        let a = evolve(&p, &obj, &cfg).unwrap();
        let b = evolve(&p, &obj, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(p.is_feasible(&a.best));
        let (opt, _) = enumerate(&p, &obj, 1e6).unwrap();
        assert!(a.best_value <= opt + 1e-9);
    }

    #[test]
    fn single_bs_is_found_in_generation_zero() {
        let s = scores(2, 1);
        let p = AssignmentProblem::new(&[2; 2], &[4], &s).unwrap();
        let e = evolve(&p, &AdditiveObjective::new(&s), &GaConfig::default()).unwrap();
        assert_eq!(e.best, vec![0, 0]);
        assert!(e.trace.iter().all(|&v| v == e.trace[0]));
        assert_eq!(e.evaluations, 1);
    }
}
