//! MOEA drivers: NSGA-II with non-geometric crossover and an
//! external-archive-guided decomposition algorithm (EAGD), both working on
//! architecture genomes against a pluggable objective evaluator.

mod eagd;
mod nsga2;

pub use eagd::eagd_run;
pub use nsga2::nsga2_run;

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::architecture::Genome;
use crate::error::{Error, Result};
use crate::moea_core::ApsMember;

/// Parameters shared by both MOEAs. The non-geometric crossover probability
/// applies only to NSGA-II; learning generations and neighborhood fraction
/// only to EAGD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoeaConfig {
    pub population_size: usize,
    /// Generations after initialization.
    pub iterations: usize,
    pub crossover_rate: f64,
    pub nongeometric_probability: f64,
    pub bitflip_probability: f64,
    pub mutation_rate: f64,
    pub learning_generations: usize,
    pub neighborhood_fraction: f64,
    pub seed: u64,
}

impl MoeaConfig {
    /// Published NSGA-II settings; probabilities given per genome bit.
    pub fn nsga2_defaults(genome_len: usize) -> Self {
        let per_bit = 1.0 / genome_len as f64;
        MoeaConfig {
            population_size: 50,
            iterations: 300,
            crossover_rate: 0.9,
            nongeometric_probability: 0.8,
            bitflip_probability: per_bit,
            mutation_rate: per_bit,
            learning_generations: 8,
            neighborhood_fraction: 0.10,
            seed: 0,
        }
    }

    /// Published EAGD settings.
    pub fn eagd_defaults(genome_len: usize) -> Self {
        let per_bit = 1.0 / genome_len as f64;
        MoeaConfig {
            population_size: 50,
            iterations: 300,
            crossover_rate: 1.0,
            nongeometric_probability: 0.0,
            bitflip_probability: per_bit,
            mutation_rate: per_bit,
            learning_generations: 8,
            neighborhood_fraction: 0.10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 1 {
            return Err(Error::Value("population_size must be >= 1".into()));
        }
        if self.learning_generations < 1 {
            return Err(Error::Value("learning_generations must be >= 1".into()));
        }
        for (name, p) in [
            ("crossover_rate", self.crossover_rate),
            ("nongeometric_probability", self.nongeometric_probability),
            ("bitflip_probability", self.bitflip_probability),
            ("mutation_rate", self.mutation_rate),
            ("neighborhood_fraction", self.neighborhood_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Value(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Maps a genome to an objective vector to minimize. Must be deterministic:
/// the same genome evaluated twice within one run yields the same vector.
pub trait ObjectiveEvaluator: Sync {
    fn objective_count(&self) -> usize;
    fn evaluate(&self, genome: &Genome) -> Result<Vec<f64>>;
}

/// Uniform crossover: each bit of child 1 comes from either parent with
/// probability 1/2; child 2 takes the complement choice.
pub fn uniform_crossover<R: Rng>(p1: &Genome, p2: &Genome, rng: &mut R) -> Result<(Genome, Genome)> {
    if p1.len() != p2.len() {
        return Err(Error::Encoding(format!(
            "crossover parents differ in length: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p1.len());
    for i in 0..p1.len() {
        if rng.gen::<bool>() {
            c1.push(p1.bit(i));
            c2.push(p2.bit(i));
        } else {
            c1.push(p2.bit(i));
            c2.push(p1.bit(i));
        }
    }
    Ok((Genome::new(c1), Genome::new(c2)))
}

/// Non-geometric crossover: uniform exchange where the parents disagree;
/// where they agree, each child's bit is flipped away from both parents
/// independently with `bitflip_probability`. Children may therefore fall
/// outside the Hamming segment between the parents.
pub fn nongeometric_crossover<R: Rng>(
    p1: &Genome,
    p2: &Genome,
    bitflip_probability: f64,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    if p1.len() != p2.len() {
        return Err(Error::Encoding(format!(
            "crossover parents differ in length: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p1.len());
    for i in 0..p1.len() {
        let (a, b) = (p1.bit(i), p2.bit(i));
        if a != b {
            if rng.gen::<bool>() {
                c1.push(a);
                c2.push(b);
            } else {
                c1.push(b);
                c2.push(a);
            }
        } else {
            c1.push(if rng.gen::<f64>() < bitflip_probability { !a } else { a });
            c2.push(if rng.gen::<f64>() < bitflip_probability { !a } else { a });
        }
    }
    Ok((Genome::new(c1), Genome::new(c2)))
}

/// Per-generation progress record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: Vec<f64>,
    pub mean: Vec<f64>,
}

impl GenerationStats {
    pub fn from_points(generation: usize, points: &[Vec<f64>]) -> Self {
        let m = points[0].len();
        let mut best = vec![f64::INFINITY; m];
        let mut mean = vec![0.0; m];
        for p in points {
            for k in 0..m {
                best[k] = best[k].min(p[k]);
                mean[k] += p[k] / points.len() as f64;
            }
        }
        GenerationStats { generation, best, mean }
    }
}

/// Result of one MOEA run: the approximate Pareto set (deduplicated,
/// sorted by genome for stable artifacts), the per-generation log, and the
/// number of evaluator calls consumed.
#[derive(Debug, Clone)]
pub struct MoeaOutcome {
    pub members: Vec<ApsMember>,
    pub log: Vec<GenerationStats>,
    pub evaluations: usize,
}

/// Deduplicate by genome and order deterministically.
pub(crate) fn finalize_members(mut members: Vec<ApsMember>) -> Vec<ApsMember> {
    members.sort_by(|a, b| a.genome.cmp(&b.genome));
    members.dedup_by(|a, b| a.genome == b.genome);
    members
}

/// Write the generation log as CSV: generation, best_k..., mean_k...
pub fn write_run_log(log: &[GenerationStats], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let m = log.first().map(|g| g.best.len()).unwrap_or(0);
    let mut header = vec!["generation".to_string()];
    for k in 0..m {
        header.push(format!("best_{k}"));
    }
    for k in 0..m {
        header.push(format!("mean_{k}"));
    }
    writeln!(file, "{}", header.join(","))?;
    for g in log {
        let mut row = vec![g.generation.to_string()];
        row.extend(g.best.iter().map(|v| format!("{v}")));
        row.extend(g.mean.iter().map(|v| format!("{v}")));
        writeln!(file, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Bi-objective toy problem: minimize (ones/n, zeros/n). The Pareto
    /// front is every genome (any bit pattern satisfies ones+zeros = n),
    /// spread across n+1 distinct trade-offs.
    pub struct OnesZeros {
        pub calls: AtomicUsize,
    }

    impl OnesZeros {
        pub fn new() -> Self {
            OnesZeros { calls: AtomicUsize::new(0) }
        }
    }

    impl ObjectiveEvaluator for OnesZeros {
        fn objective_count(&self) -> usize {
            2
        }
        fn evaluate(&self, genome: &Genome) -> Result<Vec<f64>> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let n = genome.len() as f64;
            let ones = genome.bits().iter().filter(|&&b| b).count() as f64;
            Ok(vec![ones / n, (n - ones) / n])
        }
    }

    /// Three-objective variant used for arity checks: leading ones, trailing
    /// zeros, and normalized ones count.
    pub struct TriToy;

    impl ObjectiveEvaluator for TriToy {
        fn objective_count(&self) -> usize {
            3
        }
        fn evaluate(&self, genome: &Genome) -> Result<Vec<f64>> {
            let n = genome.len() as f64;
            let ones = genome.bits().iter().filter(|&&b| b).count() as f64;
            let leading = genome.bits().iter().take_while(|&&b| b).count() as f64;
            let trailing = genome.bits().iter().rev().take_while(|&&b| !b).count() as f64;
            Ok(vec![1.0 - leading / n, 1.0 - trailing / n, ones / n])
        }
    }
}
