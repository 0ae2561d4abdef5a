//! Multi-objective primitives: Pareto dominance, non-dominated sorting,
//! crowding distance, decomposition weights, scalarization, hypervolume and
//! union-Pareto estimation. Everything is minimization-oriented.

mod hypervolume;

pub use hypervolume::{hypervolume, hypervolume_monte_carlo};

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::architecture::{ComplexityMode, Genome};
use crate::error::{Error, Result};

/// `a` dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    assert_eq!(a.len(), b.len(), "objective vectors differ in length");
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Partition points into successive non-dominated fronts (fast
/// non-dominated sort). Front 0 is the maximal non-dominated set.
pub fn nondominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Indices of the non-dominated subset of `points`.
pub fn nondominated_filter(points: &[Vec<f64>]) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    nondominated_sort(points).remove(0)
}

/// NSGA-II crowding distance over one front. Boundary points per objective
/// get infinity; interior points accumulate normalized neighbor gaps.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    if n == 0 {
        return Vec::new();
    }
    let m = front[0].len();
    let mut dist = vec![0.0; n];
    for obj in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        // stable sort: ties keep index order
        order.sort_by(|&a, &b| front[a][obj].partial_cmp(&front[b][obj]).unwrap());
        let lo = front[order[0]][obj];
        let hi = front[order[n - 1]][obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            if dist[order[w]].is_finite() {
                dist[order[w]] += (front[order[w + 1]][obj] - front[order[w - 1]][obj]) / range;
            }
        }
    }
    dist
}

/// Das-Dennis simplex-lattice weight vectors: all non-negative vectors with
/// components in multiples of 1/H summing to 1. Count = C(H+m-1, m-1).
pub fn das_dennis_weights(m: usize, h: usize) -> Vec<Vec<f64>> {
    assert!(m >= 2 && h >= 1);
    let mut out = Vec::new();
    let mut current = vec![0usize; m];
    fn recurse(m: usize, left: usize, idx: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx == m - 1 {
            current[idx] = left;
            out.push(current.clone());
            return;
        }
        for v in 0..=left {
            current[idx] = v;
            recurse(m, left - v, idx + 1, current, out);
        }
    }
    let mut raw = Vec::new();
    recurse(m, h, 0, &mut current, &mut raw);
    for counts in raw {
        out.push(counts.iter().map(|&c| c as f64 / h as f64).collect());
    }
    out
}

/// Weighted Tchebycheff scalarization; zero weights are floored at 1e-6.
pub fn tchebycheff(objs: &[f64], weight: &[f64], ideal: &[f64]) -> f64 {
    assert_eq!(objs.len(), weight.len());
    assert_eq!(objs.len(), ideal.len());
    objs.iter()
        .zip(weight)
        .zip(ideal)
        .map(|((&f, &w), &z)| w.max(1e-6) * (f - z).abs())
        .fold(0.0, f64::max)
}

/// One member of an approximate Pareto set.
#[derive(Debug, Clone, PartialEq)]
pub struct ApsMember {
    pub genome: Genome,
    pub objectives: Vec<f64>,
}

/// Mutually non-dominated architectures from one MOEA run.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxParetoSet {
    pub scenario_id: String,
    pub run_id: usize,
    pub seed: u64,
    pub complexity_mode: ComplexityMode,
    pub members: Vec<ApsMember>,
}

impl ApproxParetoSet {
    pub fn objective_count(&self) -> usize {
        self.members.first().map(|m| m.objectives.len()).unwrap_or(0)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| m.objectives.clone()).collect()
    }
}

/// Line-delimited JSON record for one APS member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApsRecord {
    pub scenario: String,
    pub run: usize,
    pub seed: u64,
    pub genome_hex: String,
    pub objectives: Vec<f64>,
    pub complexity_mode: ComplexityMode,
}

/// Write an APS as line-delimited JSON, one record per member.
pub fn write_aps(aps: &ApproxParetoSet, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for member in &aps.members {
        let record = ApsRecord {
            scenario: aps.scenario_id.clone(),
            run: aps.run_id,
            seed: aps.seed,
            genome_hex: member.genome.to_hex(),
            objectives: member.objectives.clone(),
            complexity_mode: aps.complexity_mode,
        };
        serde_json::to_writer(&mut file, &record)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Read an APS file written by `write_aps`.
pub fn read_aps(path: &Path, genome_len: usize) -> Result<ApproxParetoSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    let reader = BufReader::new(file);
    let mut members = Vec::new();
    let mut header: Option<(String, usize, u64, ComplexityMode)> = None;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ApsRecord = serde_json::from_str(&line)?;
        let genome = Genome::from_hex(&record.genome_hex, genome_len)?;
        match &header {
            None => {
                header = Some((
                    record.scenario.clone(),
                    record.run,
                    record.seed,
                    record.complexity_mode,
                ))
            }
            Some((s, r, seed, mode)) => {
                if *s != record.scenario
                    || *r != record.run
                    || *seed != record.seed
                    || *mode != record.complexity_mode
                {
                    return Err(Error::Format(format!(
                        "inconsistent APS records in {}",
                        path.display()
                    )));
                }
            }
        }
        members.push(ApsMember { genome, objectives: record.objectives });
    }
    let (scenario_id, run_id, seed, complexity_mode) = header.ok_or_else(|| {
        Error::EmptyData(format!("APS file {} has no records", path.display()))
    })?;
    Ok(ApproxParetoSet { scenario_id, run_id, seed, complexity_mode, members })
}

/// Estimate the true Pareto set as the non-dominated subset of the union of
/// all APS members. Duplicate genomes are removed first.
pub fn estimate_true_pareto(all_aps: &[ApproxParetoSet]) -> Result<Vec<ApsMember>> {
    if all_aps.is_empty() {
        return Err(Error::EmptyData("need at least one APS".into()));
    }
    let mut union: Vec<ApsMember> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for aps in all_aps {
        for m in &aps.members {
            if seen.insert(m.genome.clone()) {
                union.push(m.clone());
            }
        }
    }
    let points: Vec<Vec<f64>> = union.iter().map(|m| m.objectives.clone()).collect();
    let keep = nondominated_filter(&points);
    Ok(keep.into_iter().map(|i| union[i].clone()).collect())
}

/// Componentwise minimum and maximum of a point set.
pub fn ideal_nadir(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = points[0].len();
    let mut ideal = vec![f64::INFINITY; m];
    let mut nadir = vec![f64::NEG_INFINITY; m];
    for p in points {
        for k in 0..m {
            ideal[k] = ideal[k].min(p[k]);
            nadir[k] = nadir[k].max(p[k]);
        }
    }
    (ideal, nadir)
}

/// Normalize points into the unit box defined by an ideal/nadir pair.
/// Degenerate ranges are replaced by 1.
pub fn normalize_points(points: &[Vec<f64>], ideal: &[f64], nadir: &[f64]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let range = nadir[k] - ideal[k];
                    let range = if range > 0.0 { range } else { 1.0 };
                    (v - ideal[k]) / range
                })
                .collect()
        })
        .collect()
}

/// Default margin above the normalized nadir for the reference point.
pub const DEFAULT_REF_MARGIN: f64 = 0.1;

/// Hypervolume indicator: HV of the APS divided by HV of the estimated
/// true Pareto set, both in Γ*-normalized space with the reference point
/// at (1 + margin, ...).
pub fn hv_indicator(
    aps_points: &[Vec<f64>],
    gamma_star_points: &[Vec<f64>],
    ref_margin: f64,
) -> Result<f64> {
    if gamma_star_points.is_empty() {
        return Err(Error::EmptyData("estimated Pareto set is empty".into()));
    }
    let (ideal, nadir) = ideal_nadir(gamma_star_points);
    let m = ideal.len();
    let reference = vec![1.0 + ref_margin; m];
    let gamma_norm = normalize_points(gamma_star_points, &ideal, &nadir);
    let aps_norm = normalize_points(aps_points, &ideal, &nadir);
    let hv_gamma = hypervolume(&gamma_norm, &reference);
    if hv_gamma <= 0.0 {
        return Err(Error::DegenerateData(
            "estimated Pareto set has zero hypervolume".into(),
        ));
    }
    Ok(hypervolume(&aps_norm, &reference) / hv_gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dominance_definition() {
        assert!(dominates(&[0.2, 0.3], &[0.4, 0.3]));
        assert!(!dominates(&[0.2, 0.3], &[0.2, 0.3]));
        assert!(!dominates(&[0.1, 0.9], &[0.9, 0.1]));
        assert!(!dominates(&[0.9, 0.1], &[0.1, 0.9]));
    }

    #[test]
    fn sort_singleton() {
        let fronts = nondominated_sort(&[vec![1.0, 1.0]]);
        assert_eq!(fronts, vec![vec![0]]);
    }

    #[test]
    fn sort_simple_case() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let fronts = nondominated_sort(&pts);
        assert_eq!(fronts, vec![vec![0, 1], vec![2]]);
    }

    /// Brute-force front assignment by repeated pairwise filtering.
    fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| {
                    !remaining
                        .iter()
                        .any(|&j| j != i && dominates(&points[j], &points[i]))
                })
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn sort_matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
                .collect();
            assert_eq!(nondominated_sort(&pts), brute_force_fronts(&pts));
        }
    }

    #[test]
    fn crowding_boundary_and_middle() {
        let two = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(crowding_distance(&two).iter().all(|d| d.is_infinite()));

        let three = vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]];
        let d = crowding_distance(&three);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        // middle point: sum over objectives of (next - prev) / range = 1 + 1
        assert!((d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn crowding_identical_points_have_zero_interior() {
        let pts = vec![vec![0.3, 0.3]; 4];
        let d = crowding_distance(&pts);
        // boundaries by index order get infinity, the rest zero
        assert!(d.iter().filter(|v| v.is_infinite()).count() == 2);
        assert!(d.iter().filter(|v| **v == 0.0).count() == 2);
    }

    #[test]
    fn das_dennis_m2() {
        let w = das_dennis_weights(2, 4);
        assert_eq!(w.len(), 5);
        assert!(w.contains(&vec![0.5, 0.5]));
        assert!(w.contains(&vec![0.0, 1.0]));
        assert!(w.contains(&vec![1.0, 0.0]));
    }

    #[test]
    fn das_dennis_counts() {
        assert_eq!(das_dennis_weights(3, 2).len(), 6);
        let w = das_dennis_weights(3, 12);
        assert_eq!(w.len(), 91); // C(14, 2)
        for v in &w {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn binomial(n: usize, k: usize) -> usize {
        let mut r = 1usize;
        for i in 0..k {
            r = r * (n - i) / (i + 1);
        }
        r
    }

    #[test]
    fn das_dennis_count_formula() {
        for m in 2..=4 {
            for h in 1..=20 {
                assert_eq!(
                    das_dennis_weights(m, h).len(),
                    binomial(h + m - 1, m - 1),
                    "m={m} h={h}"
                );
            }
        }
    }

    #[test]
    fn tchebycheff_cases() {
        assert_eq!(tchebycheff(&[0.4, 0.2], &[0.3, 0.7], &[0.4, 0.2]), 0.0);
        let v = tchebycheff(&[0.3, 9.0], &[1.0, 0.0], &[0.0, 0.0]);
        assert!((v - 0.3).abs() < 1e-12);
        let v = tchebycheff(&[0.2, 0.6], &[0.5, 0.5], &[0.0, 0.0]);
        assert!((v - 0.3).abs() < 1e-12);
    }

    fn member(bits: u8, objs: Vec<f64>) -> ApsMember {
        let mut b = vec![false; 86];
        for i in 0..8 {
            b[i] = bits & (1 << i) != 0;
        }
        ApsMember { genome: Genome::new(b), objectives: objs }
    }

    fn aps(id: &str, members: Vec<ApsMember>) -> ApproxParetoSet {
        ApproxParetoSet {
            scenario_id: id.into(),
            run_id: 0,
            seed: 0,
            complexity_mode: ComplexityMode::Literal,
            members,
        }
    }

    #[test]
    fn gamma_star_idempotent_on_single_aps() {
        let a = aps("a", vec![member(1, vec![0.0, 1.0]), member(2, vec![1.0, 0.0])]);
        let g = estimate_true_pareto(&[a.clone()]).unwrap();
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn gamma_star_absorbs_dominated_aps() {
        let a = aps("a", vec![member(1, vec![0.1, 0.1])]);
        let b = aps("b", vec![member(2, vec![0.5, 0.5]), member(3, vec![0.2, 0.9])]);
        let g = estimate_true_pareto(&[a, b]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].objectives, vec![0.1, 0.1]);
    }

    #[test]
    fn gamma_star_matches_brute_force_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let sets: Vec<ApproxParetoSet> = (0..4)
            .map(|s| {
                let members = (0..40)
                    .map(|i| member((s * 40 + i) as u8, vec![rng.gen(), rng.gen(), rng.gen()]))
                    .collect();
                aps(&format!("s{s}"), members)
            })
            .collect();
        let g = estimate_true_pareto(&sets).unwrap();
        let all: Vec<Vec<f64>> = sets
            .iter()
            .flat_map(|a| a.members.iter().map(|m| m.objectives.clone()))
            .collect();
        let keep = nondominated_filter(&all);
        let mut expected: Vec<Vec<f64>> = keep.iter().map(|&i| all[i].clone()).collect();
        let mut got: Vec<Vec<f64>> = g.iter().map(|m| m.objectives.clone()).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, expected);
    }

    #[test]
    fn hv_indicator_identity_and_monotonicity() {
        let gamma = vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.9, 0.1]];
        let r = hv_indicator(&gamma, &gamma, DEFAULT_REF_MARGIN).unwrap();
        assert!((r - 1.0).abs() < 1e-12);

        let worse = vec![vec![0.9, 0.9]];
        let r2 = hv_indicator(&worse, &gamma, DEFAULT_REF_MARGIN).unwrap();
        assert!(r2 < 1.0 && r2 > 0.0);
    }

    #[test]
    fn hv_indicator_worst_corner_closed_form() {
        let gamma = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0]];
        // gamma contains the ideal corner, so HV(gamma) = 1.1^2 in
        // normalized space; the worst corner (1,1) contributes 0.1^2
        let corner = vec![vec![1.0, 1.0]];
        let r = hv_indicator(&corner, &gamma, 0.1).unwrap();
        assert!((r - 0.01 / 1.21).abs() < 1e-12);
    }

    #[test]
    fn aps_file_roundtrip() {
        let a = aps("LS+EAGD", vec![member(5, vec![0.3, 0.2, 0.1]), member(9, vec![0.1, 0.5, 0.2])]);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_aps(&a, f.path()).unwrap();
        let back = read_aps(f.path(), 86).unwrap();
        assert_eq!(back, a);
    }
}
