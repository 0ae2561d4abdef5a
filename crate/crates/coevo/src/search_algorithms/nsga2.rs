//! NSGA-II with the non-geometric crossover variant.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::architecture::Genome;
use crate::error::{Error, Result};
use crate::moea_core::{crowding_distance, nondominated_filter, nondominated_sort, ApsMember};

use super::{
    finalize_members, nongeometric_crossover, uniform_crossover, GenerationStats, MoeaConfig,
    MoeaOutcome, ObjectiveEvaluator,
};

fn evaluate_batch(
    genomes: &[Genome],
    evaluator: &dyn ObjectiveEvaluator,
) -> Result<Vec<Vec<f64>>> {
    genomes
        .par_iter()
        .map(|g| {
            let objs = evaluator
                .evaluate(g)
                .map_err(|e| Error::RunFailure(format!("evaluating genome {}: {e}", g.to_hex())))?;
            if objs.len() != evaluator.objective_count() {
                return Err(Error::RunFailure(format!(
                    "evaluator returned {} objectives, declared {}",
                    objs.len(),
                    evaluator.objective_count()
                )));
            }
            Ok(objs)
        })
        .collect()
}

/// Binary tournament on (rank asc, crowding desc), final tie by genome
/// order for determinism.
fn tournament<R: Rng>(
    pop: &[Genome],
    rank: &[usize],
    crowding: &[f64],
    rng: &mut R,
) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if rank[a] != rank[b] {
        return if rank[a] < rank[b] { a } else { b };
    }
    if crowding[a] != crowding[b] {
        return if crowding[a] > crowding[b] { a } else { b };
    }
    if pop[a] <= pop[b] {
        a
    } else {
        b
    }
}

/// Run NSGA-II for `cfg.iterations` generations over `genome_len`-bit
/// genomes. Deterministic given `cfg.seed`; consumes exactly
/// `population_size * (iterations + 1)` evaluator calls.
pub fn nsga2_run(
    cfg: &MoeaConfig,
    genome_len: usize,
    evaluator: &dyn ObjectiveEvaluator,
) -> Result<MoeaOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.population_size;

    let mut pop: Vec<Genome> = (0..n)
        .map(|_| Genome::new((0..genome_len).map(|_| rng.gen::<bool>()).collect()))
        .collect();
    let mut objs = evaluate_batch(&pop, evaluator)?;
    let mut evaluations = n;

    let mut fronts = nondominated_sort(&objs);
    let (mut rank, mut crowding) = rank_and_crowding(&objs, &fronts);
    let mut log = vec![GenerationStats::from_points(0, &objs)];

    for gen in 1..=cfg.iterations {
        let mut offspring = Vec::with_capacity(n + 1);
        while offspring.len() < n {
            let pa = tournament(&pop, &rank, &crowding, &mut rng);
            let pb = tournament(&pop, &rank, &crowding, &mut rng);
            let (mut c1, mut c2) = if rng.gen::<f64>() < cfg.crossover_rate {
                if rng.gen::<f64>() < cfg.nongeometric_probability {
                    nongeometric_crossover(&pop[pa], &pop[pb], cfg.bitflip_probability, &mut rng)?
                } else {
                    uniform_crossover(&pop[pa], &pop[pb], &mut rng)?
                }
            } else {
                (pop[pa].clone(), pop[pb].clone())
            };
            c1 = crate::architecture::mutate(&c1, cfg.mutation_rate, &mut rng);
            c2 = crate::architecture::mutate(&c2, cfg.mutation_rate, &mut rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        offspring.truncate(n);

        let offspring_objs = evaluate_batch(&offspring, evaluator)?;
        evaluations += offspring.len();

        let mut combined = pop;
        combined.extend(offspring);
        let mut combined_objs = objs;
        combined_objs.extend(offspring_objs);

        let combined_fronts = nondominated_sort(&combined_objs);
        let mut selected: Vec<usize> = Vec::with_capacity(n);
        for front in &combined_fronts {
            if selected.len() + front.len() <= n {
                selected.extend(front);
            } else {
                let front_pts: Vec<Vec<f64>> =
                    front.iter().map(|&i| combined_objs[i].clone()).collect();
                let cd = crowding_distance(&front_pts);
                let mut order: Vec<usize> = (0..front.len()).collect();
                order.sort_by(|&a, &b| {
                    cd[b]
                        .partial_cmp(&cd[a])
                        .unwrap()
                        .then_with(|| combined[front[a]].cmp(&combined[front[b]]))
                });
                for &w in order.iter().take(n - selected.len()) {
                    selected.push(front[w]);
                }
                break;
            }
        }

        pop = selected.iter().map(|&i| combined[i].clone()).collect();
        objs = selected.iter().map(|&i| combined_objs[i].clone()).collect();
        fronts = nondominated_sort(&objs);
        let rc = rank_and_crowding(&objs, &fronts);
        rank = rc.0;
        crowding = rc.1;
        log.push(GenerationStats::from_points(gen, &objs));
    }

    let first = nondominated_filter(&objs);
    let members = finalize_members(
        first
            .into_iter()
            .map(|i| ApsMember { genome: pop[i].clone(), objectives: objs[i].clone() })
            .collect(),
    );
    Ok(MoeaOutcome { members, log, evaluations })
}

fn rank_and_crowding(objs: &[Vec<f64>], fronts: &[Vec<usize>]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0usize; objs.len()];
    let mut crowding = vec![0.0f64; objs.len()];
    for (r, front) in fronts.iter().enumerate() {
        let pts: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        let cd = crowding_distance(&pts);
        for (w, &i) in front.iter().enumerate() {
            rank[i] = r;
            crowding[i] = cd[w];
        }
    }
    (rank, crowding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea_core::dominates;
    use crate::search_algorithms::test_support::OnesZeros;
    use std::sync::atomic::Ordering;

    fn toy_cfg(pop: usize, iters: usize, seed: u64) -> MoeaConfig {
        MoeaConfig {
            population_size: pop,
            iterations: iters,
            seed,
            ..MoeaConfig::nsga2_defaults(86)
        }
    }

    #[test]
    fn result_is_mutually_nondominated() {
        let eval = OnesZeros::new();
        let out = nsga2_run(&toy_cfg(4, 1, 7), 86, &eval).unwrap();
        for a in &out.members {
            for b in &out.members {
                assert!(!dominates(&a.objectives, &b.objectives));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = nsga2_run(&toy_cfg(8, 10, 42), 86, &OnesZeros::new()).unwrap();
        let b = nsga2_run(&toy_cfg(8, 10, 42), 86, &OnesZeros::new()).unwrap();
        assert_eq!(a.members, b.members);
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn budget_is_exact() {
        let eval = OnesZeros::new();
        let out = nsga2_run(&toy_cfg(10, 7, 1), 86, &eval).unwrap();
        assert_eq!(out.evaluations, 10 * 8);
        assert_eq!(eval.calls.load(Ordering::Relaxed), 10 * 8);
    }

    #[test]
    fn elitism_best_objectives_never_worsen() {
        let out = nsga2_run(&toy_cfg(16, 30, 3), 86, &OnesZeros::new()).unwrap();
        for w in out.log.windows(2) {
            for k in 0..2 {
                assert!(w[1].best[k] <= w[0].best[k] + 1e-12);
            }
        }
    }

    #[test]
    fn ones_zeros_front_spreads() {
        // every genome is Pareto-optimal for (ones/n, zeros/n); the front
        // should cover many distinct trade-offs
        let out = nsga2_run(&toy_cfg(50, 300, 9), 86, &OnesZeros::new()).unwrap();
        let mut counts: Vec<i64> = out
            .members
            .iter()
            .map(|m| (m.objectives[0] * 86.0).round() as i64)
            .collect();
        counts.sort_unstable();
        counts.dedup();
        assert!(counts.len() >= 10, "only {} distinct trade-offs", counts.len());
    }

    #[test]
    fn evaluator_failure_identifies_genome() {
        struct Failing;
        impl ObjectiveEvaluator for Failing {
            fn objective_count(&self) -> usize {
                2
            }
            fn evaluate(&self, _: &Genome) -> Result<Vec<f64>> {
                Err(Error::Value("boom".into()))
            }
        }
        let err = nsga2_run(&toy_cfg(4, 1, 0), 86, &Failing).unwrap_err();
        assert!(err.to_string().contains("genome"));
    }
}
