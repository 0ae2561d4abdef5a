//! External-archive-guided decomposition MOEA (EAGD).
//!
//! Decomposes the problem into `population_size` Tchebycheff subproblems on
//! a Das-Dennis weight lattice with neighborhood mating. A bounded external
//! archive keeps the non-dominated solutions seen so far (capacity twice
//! the population, pruned by crowding distance); every `learning_generations`
//! generations each subproblem may adopt the archive member that best fits
//! its scalarization.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::architecture::Genome;
use crate::error::{Error, Result};
use crate::moea_core::{
    crowding_distance, das_dennis_weights, dominates, tchebycheff, ApsMember,
};

use super::{
    finalize_members, uniform_crossover, GenerationStats, MoeaConfig, MoeaOutcome,
    ObjectiveEvaluator,
};

/// Smallest Das-Dennis lattice with at least `count` vectors, truncated to
/// exactly `count` in generation order.
fn weight_lattice(m: usize, count: usize) -> Vec<Vec<f64>> {
    let mut h = 1;
    loop {
        let w = das_dennis_weights(m, h);
        if w.len() >= count {
            return w.into_iter().take(count).collect();
        }
        h += 1;
    }
}

fn neighborhoods(weights: &[Vec<f64>], size: usize) -> Vec<Vec<usize>> {
    weights
        .iter()
        .map(|w| {
            let mut order: Vec<usize> = (0..weights.len()).collect();
            order.sort_by(|&a, &b| {
                let da: f64 = w.iter().zip(&weights[a]).map(|(x, y)| (x - y).powi(2)).sum();
                let db: f64 = w.iter().zip(&weights[b]).map(|(x, y)| (x - y).powi(2)).sum();
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            order.truncate(size);
            order
        })
        .collect()
}

struct Archive {
    members: Vec<ApsMember>,
    capacity: usize,
}

impl Archive {
    fn new(capacity: usize) -> Self {
        Archive { members: Vec::new(), capacity }
    }

    fn insert(&mut self, genome: &Genome, objectives: &[f64]) {
        if self.members.iter().any(|m| {
            dominates(&m.objectives, objectives)
                || m.genome == *genome
                || m.objectives == objectives
        }) {
            return;
        }
        self.members.retain(|m| !dominates(objectives, &m.objectives));
        self.members.push(ApsMember {
            genome: genome.clone(),
            objectives: objectives.to_vec(),
        });
        while self.members.len() > self.capacity {
            let pts: Vec<Vec<f64>> =
                self.members.iter().map(|m| m.objectives.clone()).collect();
            let cd = crowding_distance(&pts);
            let victim = (0..self.members.len())
                .min_by(|&a, &b| {
                    cd[a]
                        .partial_cmp(&cd[b])
                        .unwrap()
                        .then_with(|| self.members[a].genome.cmp(&self.members[b].genome))
                })
                .unwrap();
            self.members.remove(victim);
        }
    }
}

/// Run EAGD for `cfg.iterations` generations. Deterministic given
/// `cfg.seed`; consumes `population_size * (iterations + 1)` evaluator
/// calls.
pub fn eagd_run(
    cfg: &MoeaConfig,
    genome_len: usize,
    evaluator: &dyn ObjectiveEvaluator,
) -> Result<MoeaOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.population_size;
    let m = evaluator.objective_count();

    let weights = weight_lattice(m, n);
    let t = ((cfg.neighborhood_fraction * n as f64).ceil() as usize).max(2).min(n);
    let hood = neighborhoods(&weights, t);

    let eval = |g: &Genome| -> Result<Vec<f64>> {
        let objs = evaluator
            .evaluate(g)
            .map_err(|e| Error::RunFailure(format!("evaluating genome {}: {e}", g.to_hex())))?;
        if objs.len() != m {
            return Err(Error::RunFailure(format!(
                "evaluator returned {} objectives, declared {m}",
                objs.len()
            )));
        }
        Ok(objs)
    };

    let mut pop: Vec<Genome> = (0..n)
        .map(|_| Genome::new((0..genome_len).map(|_| rng.gen::<bool>()).collect()))
        .collect();
    let mut objs: Vec<Vec<f64>> = pop.iter().map(&eval).collect::<Result<_>>()?;
    let mut evaluations = n;

    let mut ideal = vec![f64::INFINITY; m];
    for o in &objs {
        for k in 0..m {
            ideal[k] = ideal[k].min(o[k]);
        }
    }
    let mut archive = Archive::new(2 * n);
    for i in 0..n {
        archive.insert(&pop[i], &objs[i]);
    }
    let mut log = vec![GenerationStats::from_points(0, &objs)];

    for gen in 1..=cfg.iterations {
        for i in 0..n {
            let pa = hood[i][rng.gen_range(0..hood[i].len())];
            let pb = hood[i][rng.gen_range(0..hood[i].len())];
            let mut child = if rng.gen::<f64>() < cfg.crossover_rate {
                uniform_crossover(&pop[pa], &pop[pb], &mut rng)?.0
            } else {
                pop[pa].clone()
            };
            child = crate::architecture::mutate(&child, cfg.mutation_rate, &mut rng);
            let child_objs = eval(&child)?;
            evaluations += 1;
            for k in 0..m {
                ideal[k] = ideal[k].min(child_objs[k]);
            }
            for &j in &hood[i] {
                if tchebycheff(&child_objs, &weights[j], &ideal)
                    < tchebycheff(&objs[j], &weights[j], &ideal)
                {
                    pop[j] = child.clone();
                    objs[j] = child_objs.clone();
                }
            }
            archive.insert(&child, &child_objs);
        }

        if gen % cfg.learning_generations == 0 {
            for i in 0..n {
                let current = tchebycheff(&objs[i], &weights[i], &ideal);
                if let Some(best) = archive.members.iter().min_by(|a, b| {
                    tchebycheff(&a.objectives, &weights[i], &ideal)
                        .partial_cmp(&tchebycheff(&b.objectives, &weights[i], &ideal))
                        .unwrap()
                        .then_with(|| a.genome.cmp(&b.genome))
                }) {
                    if tchebycheff(&best.objectives, &weights[i], &ideal) < current {
                        pop[i] = best.genome.clone();
                        objs[i] = best.objectives.clone();
                    }
                }
            }
        }
        log.push(GenerationStats::from_points(gen, &objs));
    }

    let members = finalize_members(archive.members);
    Ok(MoeaOutcome { members, log, evaluations })
}
