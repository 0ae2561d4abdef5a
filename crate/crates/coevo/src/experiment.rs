//! Binding layer: datasets + learning environments + architectures +
//! training + MOEAs = search scenarios. Runs scenarios, persists their
//! approximate Pareto sets, selects an architecture a posteriori and
//! evaluates it on the sequestered hold-out partition.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architecture::{decode, ComplexityMode, DecodedArchitecture, Genome, GenomeLayout};
use crate::error::{Error, Result};
use crate::market_data::{
    apply_standardization, compute_features, fit_standardization, segment_timeline,
    synth_regime_series, DatasetSplit, DateRange, FeatureDataset, IndicatorRegistry,
    RegimeParams, TimelineSpec,
};
use crate::moea_core::{
    ideal_nadir, nondominated_filter, normalize_points, write_aps, ApproxParetoSet, ApsMember,
};
use crate::neural_model::{
    evaluate_on_samples, init_weights, project_features, train_on_samples, EvalReport,
    TrainConfig,
};
use crate::search_algorithms::{
    eagd_run, nsga2_run, write_run_log, MoeaConfig, MoeaOutcome, ObjectiveEvaluator,
};

/// How the pre-crisis data participates in architecture search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentKind {
    /// Train weights on pre-crisis plus crisis data; two objectives.
    Full,
    /// Train weights on crisis data only; pre-crisis data becomes a third
    /// test criterion.
    Split,
}

impl EnvironmentKind {
    pub fn objective_count(self) -> usize {
        match self {
            EnvironmentKind::Full => 2,
            EnvironmentKind::Split => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnvironmentKind::Full => "LF",
            EnvironmentKind::Split => "LS",
        }
    }
}

/// Which MOEA drives the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoeaKind {
    Nsga2,
    Eagd,
}

impl MoeaKind {
    pub fn label(self) -> &'static str {
        match self {
            MoeaKind::Nsga2 => "NSGA2",
            MoeaKind::Eagd => "EAGD",
        }
    }
}

/// One search scenario: a (timeline, environment, MOEA) combination with
/// its budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub timeline_id: String,
    pub environment: EnvironmentKind,
    pub moea: MoeaKind,
    pub n_runs: usize,
    pub moea_cfg: MoeaConfig,
    pub train_cfg: TrainConfig,
    pub layout: GenomeLayout,
    pub complexity_mode: ComplexityMode,
}

impl ScenarioSpec {
    pub fn id(&self) -> String {
        format!("{}+{}", self.environment.label(), self.moea.label())
    }
}

/// The four scenarios of one timeline: {full, split} x {NSGA-II, EAGD}.
pub fn enumerate_scenarios(
    timeline_id: &str,
    n_runs: usize,
    base: &MoeaConfig,
    train_cfg: &TrainConfig,
    layout: &GenomeLayout,
    complexity_mode: ComplexityMode,
) -> Vec<ScenarioSpec> {
    let mut specs = Vec::with_capacity(4);
    for environment in [EnvironmentKind::Full, EnvironmentKind::Split] {
        for moea in [MoeaKind::Nsga2, MoeaKind::Eagd] {
            let moea_cfg = match moea {
                MoeaKind::Nsga2 => MoeaConfig {
                    population_size: base.population_size,
                    iterations: base.iterations,
                    seed: base.seed,
                    ..MoeaConfig::nsga2_defaults(layout.genome_len())
                },
                MoeaKind::Eagd => MoeaConfig {
                    population_size: base.population_size,
                    iterations: base.iterations,
                    seed: base.seed,
                    ..MoeaConfig::eagd_defaults(layout.genome_len())
                },
            };
            specs.push(ScenarioSpec {
                timeline_id: timeline_id.to_string(),
                environment,
                moea,
                n_runs,
                moea_cfg,
                train_cfg: *train_cfg,
                layout: *layout,
                complexity_mode,
            });
        }
    }
    specs
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Objective evaluator bound to one environment and dataset split.
///
/// Training is deterministic per genome: the training seed is derived from
/// the evaluator seed and the genome hash, so a genome's objective vector
/// is stable within a run and dominance is well-defined. Evaluations are
/// memoized.
pub struct EnvEvaluator {
    environment: EnvironmentKind,
    layout: GenomeLayout,
    complexity_mode: ComplexityMode,
    train_cfg: TrainConfig,
    eval_seed: u64,
    train_std: FeatureDataset,
    test_std: FeatureDataset,
    /// Standardized pre-crisis data; only consulted in the split
    /// environment.
    pre_std: Option<FeatureDataset>,
    cache: Mutex<HashMap<Genome, Vec<f64>>>,
}

/// Build the evaluator for an environment over a timeline split. The
/// hold-out partition is never touched here.
pub fn make_evaluator(
    environment: EnvironmentKind,
    split: &DatasetSplit,
    layout: &GenomeLayout,
    complexity_mode: ComplexityMode,
    train_cfg: &TrainConfig,
    eval_seed: u64,
) -> Result<EnvEvaluator> {
    let train = match environment {
        EnvironmentKind::Full => split.pre_crisis.union(&split.crisis_train)?,
        EnvironmentKind::Split => split.crisis_train.clone(),
    };
    if !train.has_both_classes() {
        return Err(Error::Environment(format!(
            "{} training partition lacks one movement class",
            environment.label()
        )));
    }
    let params = fit_standardization(&train)?;
    let train_std = apply_standardization(&params, &train);
    let test_std = apply_standardization(&params, &split.crisis_test);
    let pre_std = match environment {
        EnvironmentKind::Full => None,
        EnvironmentKind::Split => Some(apply_standardization(&params, &split.pre_crisis)),
    };
    Ok(EnvEvaluator {
        environment,
        layout: *layout,
        complexity_mode,
        train_cfg: *train_cfg,
        eval_seed,
        train_std,
        test_std,
        pre_std,
        cache: Mutex::new(HashMap::new()),
    })
}

impl EnvEvaluator {
    pub fn train_len(&self) -> usize {
        self.train_std.len()
    }

    fn compute(&self, genome: &Genome) -> Result<Vec<f64>> {
        let arch = decode(genome, &self.layout)?;
        let train_seed = splitmix64(self.eval_seed ^ genome.fnv_hash());
        let cfg = TrainConfig { seed: train_seed, ..self.train_cfg };
        let weights0 = init_weights(&arch, train_seed);
        let (xs, ys) = project_features(&self.train_std, &arch.selected_features);
        let weights = train_on_samples(&weights0, &xs, &ys, &cfg)?;

        let (txs, tys) = project_features(&self.test_std, &arch.selected_features);
        let e_test = evaluate_on_samples(&weights, &txs, &tys)?.balanced_error;
        let c = arch.complexity(self.complexity_mode);
        let mut objs = vec![e_test, c];
        if let Some(pre) = &self.pre_std {
            let (pxs, pys) = project_features(pre, &arch.selected_features);
            objs.push(evaluate_on_samples(&weights, &pxs, &pys)?.balanced_error);
        }
        Ok(objs)
    }
}

impl ObjectiveEvaluator for EnvEvaluator {
    fn objective_count(&self) -> usize {
        self.environment.objective_count()
    }

    fn evaluate(&self, genome: &Genome) -> Result<Vec<f64>> {
        if let Some(hit) = self.cache.lock().unwrap().get(genome) {
            return Ok(hit.clone());
        }
        let objs = self.compute(genome)?;
        self.cache.lock().unwrap().insert(genome.clone(), objs.clone());
        Ok(objs)
    }
}

/// Outcome of all runs of one scenario.
#[derive(Debug)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub aps_per_run: Vec<ApproxParetoSet>,
    pub evaluations_per_run: Vec<usize>,
    /// (run index, diagnostic) for runs that aborted.
    pub failures: Vec<(usize, String)>,
    pub aps_paths: Vec<PathBuf>,
}

/// Execute all runs of a scenario with seeds `base + 0 .. base + n_runs-1`.
/// Per-run APS and generation-log files are written under `out_dir` when
/// given. Individual run failures are recorded and the scenario continues.
pub fn run_scenario(
    spec: &ScenarioSpec,
    split: &DatasetSplit,
    out_dir: Option<&Path>,
) -> Result<ScenarioResult> {
    spec.moea_cfg.validate()?;
    let scenario_id = spec.id();
    let outcomes: Vec<(usize, Result<(MoeaOutcome, u64)>)> = (0..spec.n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = spec.moea_cfg.seed + run as u64;
            let run_result = (|| {
                let evaluator = make_evaluator(
                    spec.environment,
                    split,
                    &spec.layout,
                    spec.complexity_mode,
                    &spec.train_cfg,
                    seed,
                )?;
                let cfg = MoeaConfig { seed, ..spec.moea_cfg };
                let outcome = match spec.moea {
                    MoeaKind::Nsga2 => nsga2_run(&cfg, spec.layout.genome_len(), &evaluator)?,
                    MoeaKind::Eagd => eagd_run(&cfg, spec.layout.genome_len(), &evaluator)?,
                };
                Ok((outcome, seed))
            })();
            (run, run_result)
        })
        .collect();

    let mut result = ScenarioResult {
        spec: spec.clone(),
        aps_per_run: Vec::new(),
        evaluations_per_run: Vec::new(),
        failures: Vec::new(),
        aps_paths: Vec::new(),
    };
    for (run, outcome) in outcomes {
        match outcome {
            Err(e) => result.failures.push((run, e.to_string())),
            Ok((outcome, seed)) => {
                let aps = ApproxParetoSet {
                    scenario_id: scenario_id.clone(),
                    run_id: run,
                    seed,
                    complexity_mode: spec.complexity_mode,
                    members: outcome.members,
                };
                if let Some(dir) = out_dir {
                    let aps_path = dir.join(format!("{scenario_id}_run{run}.aps.jsonl"));
                    write_aps(&aps, &aps_path)?;
                    write_run_log(&outcome.log, &dir.join(format!("{scenario_id}_run{run}.log.csv")))?;
                    result.aps_paths.push(aps_path);
                }
                result.aps_per_run.push(aps);
                result.evaluations_per_run.push(outcome.evaluations);
            }
        }
    }
    Ok(result)
}

/// A-posteriori selection: over the candidates' non-dominated subset in
/// objective space normalized to the unit box, pick the knee point — the
/// member closest (Euclidean) to the ideal corner. Ties go to lower
/// complexity, then lexicographic genome.
pub fn posteriori_select(
    candidates: &[ApsMember],
    layout: &GenomeLayout,
    complexity_mode: ComplexityMode,
) -> Result<(ApsMember, DecodedArchitecture)> {
    if candidates.is_empty() {
        return Err(Error::EmptyData("cannot select from an empty candidate set".into()));
    }
    let points: Vec<Vec<f64>> = candidates.iter().map(|m| m.objectives.clone()).collect();
    let front = nondominated_filter(&points);
    let front_pts: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
    let (ideal, nadir) = ideal_nadir(&front_pts);
    let normalized = normalize_points(&front_pts, &ideal, &nadir);

    let mut best: Option<(usize, f64, f64)> = None;
    for (w, &i) in front.iter().enumerate() {
        let dist = normalized[w].iter().map(|v| v * v).sum::<f64>().sqrt();
        let arch = decode(&candidates[i].genome, layout)?;
        let complexity = arch.complexity(complexity_mode);
        let replace = match &best {
            None => true,
            Some((bi, bd, bc)) => {
                if (dist - bd).abs() > 1e-12 {
                    dist < *bd
                } else if (complexity - bc).abs() > 1e-12 {
                    complexity < *bc
                } else {
                    candidates[i].genome < candidates[*bi].genome
                }
            }
        };
        if replace {
            best = Some((i, dist, complexity));
        }
    }
    let (i, _, _) = best.unwrap();
    let member = candidates[i].clone();
    let arch = decode(&member.genome, layout)?;
    Ok((member, arch))
}

/// Mean and standard deviation of a metric over hold-out cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MetricSummary { mean, sd: var.sqrt() }
}

/// Aggregated hold-out performance over independent training cycles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutSummary {
    pub cycles: usize,
    pub overall_accuracy: MetricSummary,
    pub balanced_accuracy: MetricSummary,
    pub mcc: MetricSummary,
    pub reports: Vec<EvalReport>,
}

/// Train `cycles` times with distinct seeds on the environment's training
/// data and evaluate each model on the hold-out partition.
pub fn holdout_evaluate(
    arch: &DecodedArchitecture,
    split: &DatasetSplit,
    environment: EnvironmentKind,
    train_cfg: &TrainConfig,
    cycles: usize,
    base_seed: u64,
) -> Result<HoldoutSummary> {
    if cycles == 0 {
        return Err(Error::Value("need at least one hold-out cycle".into()));
    }
    let train = match environment {
        EnvironmentKind::Full => split.pre_crisis.union(&split.crisis_train)?,
        EnvironmentKind::Split => split.crisis_train.clone(),
    };
    let params = fit_standardization(&train)?;
    let train_std = apply_standardization(&params, &train);
    let hold_std = apply_standardization(&params, split.hold_out.access());
    let (xs, ys) = project_features(&train_std, &arch.selected_features);
    let (hxs, hys) = project_features(&hold_std, &arch.selected_features);

    let reports: Vec<EvalReport> = (0..cycles)
        .into_par_iter()
        .map(|c| {
            let seed = splitmix64(base_seed.wrapping_add(c as u64));
            let cfg = TrainConfig { seed, ..*train_cfg };
            let weights = train_on_samples(&init_weights(arch, seed), &xs, &ys, &cfg)?;
            evaluate_on_samples(&weights, &hxs, &hys)
        })
        .collect::<Result<_>>()?;

    Ok(HoldoutSummary {
        cycles,
        overall_accuracy: summarize(&reports.iter().map(|r| r.overall_accuracy).collect::<Vec<_>>()),
        balanced_accuracy: summarize(&reports.iter().map(|r| r.balanced_accuracy).collect::<Vec<_>>()),
        mcc: summarize(&reports.iter().map(|r| r.mcc).collect::<Vec<_>>()),
        reports,
    })
}

/// Re-scores genomes on criteria common to both environments — balanced
/// error on the hold-out partition plus complexity — so that full- and
/// split-environment Pareto sets become comparable. Weights are retrained
/// deterministically on the genome's own environment's training data.
pub struct HoldoutScorer {
    full: EnvEvaluator,
    split_env: EnvEvaluator,
    hold_full: (Vec<Vec<f64>>, Vec<u8>),
    hold_split: (Vec<Vec<f64>>, Vec<u8>),
    cache: Mutex<HashMap<(Genome, EnvironmentKind), Vec<f64>>>,
}

impl HoldoutScorer {
    pub fn new(
        split: &DatasetSplit,
        layout: &GenomeLayout,
        complexity_mode: ComplexityMode,
        train_cfg: &TrainConfig,
        eval_seed: u64,
    ) -> Result<HoldoutScorer> {
        let full = make_evaluator(
            EnvironmentKind::Full,
            split,
            layout,
            complexity_mode,
            train_cfg,
            eval_seed,
        )?;
        let split_env = make_evaluator(
            EnvironmentKind::Split,
            split,
            layout,
            complexity_mode,
            train_cfg,
            eval_seed,
        )?;
        // standardize the hold-out with each environment's own parameters
        let full_train = split.pre_crisis.union(&split.crisis_train)?;
        let full_params = fit_standardization(&full_train)?;
        let split_params = fit_standardization(&split.crisis_train)?;
        let hold = split.hold_out.access();
        let hold_full_ds = apply_standardization(&full_params, hold);
        let hold_split_ds = apply_standardization(&split_params, hold);
        let all: Vec<usize> = (0..layout.n_features).collect();
        Ok(HoldoutScorer {
            full,
            split_env,
            hold_full: project_features(&hold_full_ds, &all),
            hold_split: project_features(&hold_split_ds, &all),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// (balanced error on hold-out, complexity) for a genome searched under
    /// `environment`.
    pub fn score(&self, genome: &Genome, environment: EnvironmentKind) -> Result<Vec<f64>> {
        if let Some(hit) = self.cache.lock().unwrap().get(&(genome.clone(), environment)) {
            return Ok(hit.clone());
        }
        let evaluator = match environment {
            EnvironmentKind::Full => &self.full,
            EnvironmentKind::Split => &self.split_env,
        };
        let arch = decode(genome, &evaluator.layout)?;
        let train_seed = splitmix64(evaluator.eval_seed ^ genome.fnv_hash());
        let cfg = TrainConfig { seed: train_seed, ..evaluator.train_cfg };
        let (xs, ys) = project_features(&evaluator.train_std, &arch.selected_features);
        let weights = train_on_samples(&init_weights(&arch, train_seed), &xs, &ys, &cfg)?;

        let (hxs_all, hys) = match environment {
            EnvironmentKind::Full => &self.hold_full,
            EnvironmentKind::Split => &self.hold_split,
        };
        let hxs: Vec<Vec<f64>> = hxs_all
            .iter()
            .map(|row| arch.selected_features.iter().map(|&i| row[i]).collect())
            .collect();
        let e_hold = evaluate_on_samples(&weights, &hxs, hys)?.balanced_error;
        let objs = vec![e_hold, arch.complexity(evaluator.complexity_mode)];
        self.cache
            .lock()
            .unwrap()
            .insert((genome.clone(), environment), objs.clone());
        Ok(objs)
    }
}

/// Regime pair for the synthetic benchmark: positive drift with positive
/// return autocorrelation before the boundary, the reverse after it. The
/// autocorrelation flip is what makes pre-boundary patterns misleading
/// post-boundary.
pub fn benchmark_regimes() -> (RegimeParams, RegimeParams) {
    (
        RegimeParams { drift: 0.0008, volatility: 0.012, autocorr: 0.5 },
        RegimeParams { drift: -0.0008, volatility: 0.02, autocorr: -0.5 },
    )
}

/// Generate a synthetic regime-shift series and segment it into the four
/// partitions: the pre-boundary span is the pre-crisis partition and the
/// post-boundary span is split into train/test/hold-out.
pub fn synthetic_split(
    pre: RegimeParams,
    post: RegimeParams,
    pre_len: usize,
    cr_len: usize,
    test_len: usize,
    hold_len: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    let registry = IndicatorRegistry::standard();
    let warmup = registry.max_lookback();
    if pre_len <= warmup + 10 {
        return Err(Error::InsufficientData(format!(
            "pre-boundary span {pre_len} leaves too few rows after the {warmup}-day warm-up"
        )));
    }
    let series = synth_regime_series(pre, post, pre_len, cr_len + test_len + hold_len, seed);
    let dataset = compute_features(&series, &registry)?;
    let day = |i: usize| series.bars()[i].date;
    let spec = TimelineSpec {
        id: format!("synthetic-{seed}"),
        pre_crisis: DateRange { start: day(0), end: day(pre_len - 1) },
        crisis_train: DateRange { start: day(pre_len), end: day(pre_len + cr_len - 1) },
        crisis_test: DateRange {
            start: day(pre_len + cr_len),
            end: day(pre_len + cr_len + test_len - 1),
        },
        hold_out: DateRange {
            start: day(pre_len + cr_len + test_len),
            end: day(pre_len + cr_len + test_len + hold_len - 1),
        },
    };
    segment_timeline(&dataset, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea_core::dominates;

    fn desk_layout() -> GenomeLayout {
        GenomeLayout { max_layer_size: 16, ..GenomeLayout::default() }
    }

    fn desk_train_cfg() -> TrainConfig {
        TrainConfig {
            max_epochs: 8,
            batch_size: 16,
            learning_rate: 0.05,
            seed: 0,
            patience: 3,
        }
    }

    fn desk_split(seed: u64) -> DatasetSplit {
        let (pre, post) = benchmark_regimes();
        synthetic_split(pre, post, 150, 90, 60, 45, seed).unwrap()
    }

    fn random_genome(seed: u64) -> Genome {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Genome::new((0..86).map(|_| rng.gen::<bool>()).collect())
    }

    #[test]
    fn objective_arity_matches_environment() {
        let split = desk_split(1);
        let layout = desk_layout();
        let cfg = desk_train_cfg();
        let full =
            make_evaluator(EnvironmentKind::Full, &split, &layout, ComplexityMode::Literal, &cfg, 7)
                .unwrap();
        let sp = make_evaluator(
            EnvironmentKind::Split,
            &split,
            &layout,
            ComplexityMode::Literal,
            &cfg,
            7,
        )
        .unwrap();
        let g = random_genome(3);
        assert_eq!(full.evaluate(&g).unwrap().len(), 2);
        assert_eq!(sp.evaluate(&g).unwrap().len(), 3);
        assert_eq!(full.objective_count(), 2);
        assert_eq!(sp.objective_count(), 3);
    }

    #[test]
    fn training_set_sizes_per_environment() {
        let split = desk_split(2);
        let layout = desk_layout();
        let cfg = desk_train_cfg();
        let full =
            make_evaluator(EnvironmentKind::Full, &split, &layout, ComplexityMode::Literal, &cfg, 1)
                .unwrap();
        let sp = make_evaluator(
            EnvironmentKind::Split,
            &split,
            &layout,
            ComplexityMode::Literal,
            &cfg,
            1,
        )
        .unwrap();
        assert_eq!(full.train_len(), split.pre_crisis.len() + split.crisis_train.len());
        assert_eq!(sp.train_len(), split.crisis_train.len());
    }

    #[test]
    fn evaluation_is_deterministic_and_cached() {
        let split = desk_split(3);
        let ev = make_evaluator(
            EnvironmentKind::Full,
            &split,
            &desk_layout(),
            ComplexityMode::Literal,
            &desk_train_cfg(),
            5,
        )
        .unwrap();
        let g = random_genome(9);
        let a = ev.evaluate(&g).unwrap();
        let b = ev.evaluate(&g).unwrap();
        assert_eq!(a, b);

        // a fresh evaluator with the same seed reproduces the vector
        let ev2 = make_evaluator(
            EnvironmentKind::Full,
            &split,
            &desk_layout(),
            ComplexityMode::Literal,
            &desk_train_cfg(),
            5,
        )
        .unwrap();
        assert_eq!(ev2.evaluate(&g).unwrap(), a);
    }

    #[test]
    fn complexity_objective_round_trips() {
        let split = desk_split(4);
        let layout = desk_layout();
        let ev = make_evaluator(
            EnvironmentKind::Split,
            &split,
            &layout,
            ComplexityMode::Literal,
            &desk_train_cfg(),
            2,
        )
        .unwrap();
        let g = random_genome(17);
        let objs = ev.evaluate(&g).unwrap();
        let arch = decode(&g, &layout).unwrap();
        assert_eq!(objs[1], arch.complexity(ComplexityMode::Literal));
    }

    #[test]
    fn signalless_data_scores_near_chance() {
        // no drift, no autocorrelation: features carry no information about
        // tomorrow's direction, so balanced test error sits near 0.5
        let flat = RegimeParams { drift: 0.0, volatility: 0.012, autocorr: 0.0 };
        let mut errors = Vec::new();
        for seed in 0..20 {
            let split = synthetic_split(flat, flat, 150, 90, 60, 45, 100 + seed).unwrap();
            let ev = make_evaluator(
                EnvironmentKind::Full,
                &split,
                &desk_layout(),
                ComplexityMode::Literal,
                &desk_train_cfg(),
                seed,
            )
            .unwrap();
            errors.push(ev.evaluate(&random_genome(seed)).unwrap()[0]);
        }
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        assert!((mean - 0.5).abs() < 0.05, "mean balanced error {mean}");
    }

    fn toy_spec(environment: EnvironmentKind, moea: MoeaKind, seed: u64) -> ScenarioSpec {
        let layout = desk_layout();
        ScenarioSpec {
            timeline_id: "toy".into(),
            environment,
            moea,
            n_runs: 2,
            moea_cfg: MoeaConfig {
                population_size: 8,
                iterations: 3,
                seed,
                ..MoeaConfig::nsga2_defaults(layout.genome_len())
            },
            train_cfg: desk_train_cfg(),
            layout,
            complexity_mode: ComplexityMode::Literal,
        }
    }

    #[test]
    fn run_scenario_writes_aps_files_and_respects_holdout() {
        let split = desk_split(5);
        let dir = tempfile::tempdir().unwrap();
        let spec = toy_spec(EnvironmentKind::Full, MoeaKind::Nsga2, 11);
        let result = run_scenario(&spec, &split, Some(dir.path())).unwrap();
        assert_eq!(result.aps_per_run.len(), 2);
        assert!(result.failures.is_empty());
        assert_eq!(result.aps_paths.len(), 2);
        for p in &result.aps_paths {
            assert!(p.exists());
        }
        assert_eq!(split.hold_out.read_count(), 0);

        // members are mutually non-dominated
        for aps in &result.aps_per_run {
            for a in &aps.members {
                for b in &aps.members {
                    assert!(!dominates(&a.objectives, &b.objectives));
                }
            }
        }
        // budget: pop * (iterations + 1)
        for &e in &result.evaluations_per_run {
            assert_eq!(e, 8 * 4);
        }
    }

    #[test]
    fn rerun_is_byte_identical() {
        let split = desk_split(6);
        let spec = toy_spec(EnvironmentKind::Split, MoeaKind::Eagd, 13);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let r1 = run_scenario(&spec, &split, Some(d1.path())).unwrap();
        let r2 = run_scenario(&spec, &split, Some(d2.path())).unwrap();
        for (p1, p2) in r1.aps_paths.iter().zip(&r2.aps_paths) {
            let b1 = std::fs::read(p1).unwrap();
            let b2 = std::fs::read(p2).unwrap();
            assert!(!b1.is_empty());
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn scenario_enumeration_is_table_shaped() {
        let layout = desk_layout();
        let specs = enumerate_scenarios(
            "t",
            5,
            &MoeaConfig::nsga2_defaults(layout.genome_len()),
            &desk_train_cfg(),
            &layout,
            ComplexityMode::Literal,
        );
        let ids: Vec<String> = specs.iter().map(|s| s.id()).collect();
        assert_eq!(ids, vec!["LF+NSGA2", "LF+EAGD", "LS+NSGA2", "LS+EAGD"]);
    }

    fn member(seed: u64, objectives: Vec<f64>) -> ApsMember {
        ApsMember { genome: random_genome(seed), objectives }
    }

    #[test]
    fn select_singleton() {
        let layout = desk_layout();
        let m = member(1, vec![0.4, 0.6]);
        let (chosen, _) = posteriori_select(&[m.clone()], &layout, ComplexityMode::Literal).unwrap();
        assert_eq!(chosen, m);
    }

    #[test]
    fn select_knee_point() {
        let layout = desk_layout();
        let candidates = vec![
            member(1, vec![0.0, 1.0]),
            member(2, vec![0.3, 0.3]),
            member(3, vec![1.0, 0.0]),
        ];
        let (chosen, _) =
            posteriori_select(&candidates, &layout, ComplexityMode::Literal).unwrap();
        assert_eq!(chosen.objectives, vec![0.3, 0.3]);
    }

    #[test]
    fn select_tie_breaks_on_complexity() {
        let layout = desk_layout();
        // symmetric points equidistant from the ideal corner
        let mut lean_bits = vec![false; 86];
        lean_bits[0] = true; // 1 feature, layers repaired to minimum
        let lean = Genome::new(lean_bits);
        let mut heavy_bits = vec![true; 86];
        heavy_bits[85] = true;
        let heavy = Genome::new(heavy_bits);
        let lean_c = decode(&lean, &layout).unwrap().complexity(ComplexityMode::Literal);
        let heavy_c = decode(&heavy, &layout).unwrap().complexity(ComplexityMode::Literal);
        assert!(lean_c < heavy_c);
        let candidates = vec![
            ApsMember { genome: heavy.clone(), objectives: vec![0.2, 0.8] },
            ApsMember { genome: lean.clone(), objectives: vec![0.8, 0.2] },
        ];
        let (chosen, _) =
            posteriori_select(&candidates, &layout, ComplexityMode::Literal).unwrap();
        assert_eq!(chosen.genome, lean);
    }

    #[test]
    fn holdout_single_cycle_matches_aggregate() {
        let split = desk_split(7);
        let layout = desk_layout();
        let arch = decode(&random_genome(21), &layout).unwrap();
        let s = holdout_evaluate(
            &arch,
            &split,
            EnvironmentKind::Full,
            &desk_train_cfg(),
            1,
            99,
        )
        .unwrap();
        assert_eq!(s.cycles, 1);
        assert_eq!(s.overall_accuracy.mean, s.reports[0].overall_accuracy);
        assert_eq!(s.overall_accuracy.sd, 0.0);
        assert!(split.hold_out.read_count() > 0);

        // deterministic
        let s2 = holdout_evaluate(
            &arch,
            &split,
            EnvironmentKind::Full,
            &desk_train_cfg(),
            1,
            99,
        )
        .unwrap();
        assert_eq!(s.overall_accuracy.mean, s2.overall_accuracy.mean);
    }

    #[test]
    fn holdout_scorer_emits_common_criteria() {
        let split = desk_split(8);
        let layout = desk_layout();
        let scorer = HoldoutScorer::new(
            &split,
            &layout,
            ComplexityMode::Literal,
            &desk_train_cfg(),
            4,
        )
        .unwrap();
        let g = random_genome(31);
        let f = scorer.score(&g, EnvironmentKind::Full).unwrap();
        let s = scorer.score(&g, EnvironmentKind::Split).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(s.len(), 2);
        // the complexity coordinate is environment-independent
        assert_eq!(f[1], s[1]);
        // repeatable
        assert_eq!(scorer.score(&g, EnvironmentKind::Full).unwrap(), f);
    }
}
