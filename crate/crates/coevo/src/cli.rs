//! Command-line pipeline: ingest -> features -> search -> evaluate ->
//! report, plus a selftest running the oracle suites.
//!
//! Configuration is a JSON file; `--set key.path=value` overrides
//! individual entries. Every artifact directory gets a manifest embedding
//! the fully resolved configuration and seeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::architecture::{decode, random_genome, ComplexityMode, GenomeLayout};
use crate::error::{Error, Result};
use crate::market_data::{
    compute_features, load_ohlcv, segment_timeline, synth_date, synth_regime_series, write_ohlcv,
    DatasetSplit, DateRange, FeatureDataset, IndicatorRegistry, OhlcvSeries, RegimeParams,
    TimelineSpec,
};
use crate::moea_core::{
    hv_indicator, hypervolume, hypervolume_monte_carlo, nondominated_filter, nondominated_sort,
    read_aps, ApproxParetoSet, ApsMember, DEFAULT_REF_MARGIN,
};
use crate::neural_model::{batch_gradient, batch_loss, init_weights, TrainConfig};
use crate::search_algorithms::MoeaConfig;
use crate::stats_report::{
    build_report, emit_report, friedman_permutation_p, friedman_test, hommel_apv, median_front,
    HvMatrix, SelectionSummary,
};
use crate::experiment::{
    enumerate_scenarios, holdout_evaluate, posteriori_select, run_scenario, EnvironmentKind,
    HoldoutScorer, ScenarioSpec,
};

/// Synthetic regime-shift data settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub pre: RegimeParams,
    pub post: RegimeParams,
    pub pre_len: usize,
    pub cr_len: usize,
    pub test_len: usize,
    pub hold_len: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let (pre, post) = crate::experiment::benchmark_regimes();
        SyntheticConfig { pre, post, pre_len: 320, cr_len: 240, test_len: 120, hold_len: 120 }
    }
}

/// Search budgets; defaults follow the published setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub runs: usize,
    /// Scenario ids to run; empty means all four.
    pub scenarios: Vec<String>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { population_size: 50, iterations: 300, runs: 40, scenarios: Vec::new() }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// "2008", "covid", or "synthetic".
    pub timeline: String,
    pub complexity_mode: ComplexityMode,
    pub layout: GenomeLayout,
    pub synthetic: SyntheticConfig,
    pub search: SearchConfig,
    pub train: TrainConfig,
    pub holdout_cycles: usize,
    pub alpha: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            timeline: "synthetic".into(),
            complexity_mode: ComplexityMode::Literal,
            layout: GenomeLayout::default(),
            synthetic: SyntheticConfig::default(),
            search: SearchConfig::default(),
            train: TrainConfig::default(),
            holdout_cycles: 50,
            alpha: 0.05,
        }
    }
}

impl Config {
    fn timeline_spec(&self) -> Result<TimelineSpec> {
        match self.timeline.as_str() {
            "2008" => Ok(TimelineSpec::timeline_2008()),
            "covid" => Ok(TimelineSpec::timeline_covid()),
            "synthetic" => {
                let s = &self.synthetic;
                let b0 = s.pre_len;
                let b1 = b0 + s.cr_len;
                let b2 = b1 + s.test_len;
                let b3 = b2 + s.hold_len;
                Ok(TimelineSpec {
                    id: "synthetic".into(),
                    pre_crisis: DateRange { start: synth_date(0), end: synth_date(b0 - 1) },
                    crisis_train: DateRange { start: synth_date(b0), end: synth_date(b1 - 1) },
                    crisis_test: DateRange { start: synth_date(b1), end: synth_date(b2 - 1) },
                    hold_out: DateRange { start: synth_date(b2), end: synth_date(b3 - 1) },
                })
            }
            other => Err(Error::Usage(format!(
                "unknown timeline '{other}' (expected 2008, covid, or synthetic)"
            ))),
        }
    }
}

/// Recursively overlay `patch` onto `base`; objects merge, everything
/// else replaces.
fn deep_merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                deep_merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn set_path<'a>(
    value: &mut serde_json::Value,
    parts: &[&'a str],
    leaf: serde_json::Value,
) -> std::result::Result<(), &'a str> {
    let map = value.as_object_mut().ok_or(parts[0])?;
    if parts.len() == 1 {
        map.insert(parts[0].to_string(), leaf);
        Ok(())
    } else {
        let next = map
            .entry(parts[0].to_string())
            .or_insert_with(|| serde_json::json!({}));
        set_path(next, &parts[1..], leaf)
    }
}

/// Parse a config file and apply dotted-key overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
    let mut value = serde_json::to_value(Config::default())?;
    let file_value: serde_json::Value = match path {
        None => serde_json::json!({}),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::File {
                path: p.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Usage(format!("config {}: {e}", p.display())))?
        }
    };
    deep_merge(&mut value, file_value);
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override '{item}' is not key=value")))?;
        let parsed: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        set_path(&mut value, &parts, parsed)
            .map_err(|part| Error::Usage(format!("override '{key}': '{part}' is not an object")))?;
    }
    let mut cfg: Config = serde_json::from_value(value)
        .map_err(|e| Error::Usage(format!("invalid configuration: {e}")))?;
    if let Ok(seed) = std::env::var("COEVO_SEED") {
        cfg.seed = seed
            .parse()
            .map_err(|e| Error::Usage(format!("COEVO_SEED '{seed}': {e}")))?;
    }
    Ok(cfg)
}

#[derive(Debug, Parser)]
#[command(name = "coevo", version, about = "Co-evolutionary neural architecture search for index movement forecasting", disable_help_subcommand = true)]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted-key configuration override, e.g. --set search.runs=5.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Cap the run worker pool.
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Load (or synthesize) an OHLCV series and freeze the timeline.
    Ingest {
        /// Raw OHLCV CSV; omit with --synthetic.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Generate a synthetic regime-shift series instead.
        #[arg(long)]
        synthetic: bool,
    },
    /// Compute the technical-indicator feature matrix.
    Features {
        /// OHLCV CSV (default: <out>/ohlcv.csv from ingest).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run the search scenarios and persist approximate Pareto sets.
    Search {
        /// Restrict to one scenario id, e.g. LS+EAGD.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        pop: Option<usize>,
        /// Desk-scale budgets: pop 16, 30 iterations, 5 runs, small nets.
        #[arg(long)]
        desk: bool,
    },
    /// A-posteriori selection and hold-out evaluation per scenario.
    Evaluate {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Cross-scenario statistics, median fronts, and selection report.
    Report {
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Run the built-in oracle suites.
    Selftest,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.parallel {
        // ignore failure if a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load_config(cli.config.as_deref(), &cli.set)?;
    std::fs::create_dir_all(&cli.out)?;
    match cli.cmd {
        Cmd::Ingest { input, synthetic } => cmd_ingest(&cfg, &cli.out, input.as_deref(), synthetic),
        Cmd::Features { input } => cmd_features(&cfg, &cli.out, input.as_deref()),
        Cmd::Search { scenario, runs, iterations, pop, desk } => {
            let mut cfg = cfg;
            if desk {
                apply_desk_scale(&mut cfg);
            }
            if let Some(r) = runs {
                cfg.search.runs = r;
            }
            if let Some(i) = iterations {
                cfg.search.iterations = i;
            }
            if let Some(p) = pop {
                cfg.search.population_size = p;
            }
            if let Some(s) = scenario {
                cfg.search.scenarios = vec![s];
            }
            cmd_search(&cfg, &cli.out)
        }
        Cmd::Evaluate { scenario, cycles } => {
            let mut cfg = cfg;
            if let Some(c) = cycles {
                cfg.holdout_cycles = c;
            }
            cmd_evaluate(&cfg, &cli.out, scenario.as_deref())
        }
        Cmd::Report { cycles } => {
            let mut cfg = cfg;
            if let Some(c) = cycles {
                cfg.holdout_cycles = c;
            }
            cmd_report(&cfg, &cli.out)
        }
        Cmd::Selftest => cmd_selftest(),
    }
}

/// Desk-scale budgets so the full pipeline runs in minutes on a laptop.
pub fn apply_desk_scale(cfg: &mut Config) {
    cfg.search.population_size = 16;
    cfg.search.iterations = 30;
    cfg.search.runs = 5;
    cfg.layout.max_layer_size = 16;
    cfg.train.max_epochs = 12;
    cfg.train.learning_rate = 0.1;
    cfg.train.patience = 4;
    cfg.holdout_cycles = 10;
    cfg.synthetic.pre_len = 150;
    cfg.synthetic.cr_len = 90;
    cfg.synthetic.test_len = 60;
    cfg.synthetic.hold_len = 45;
}

fn write_manifest<S: Serialize>(path: &Path, manifest: &S) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, manifest)?;
    Ok(())
}

#[derive(Serialize)]
struct IngestManifest<'a> {
    config: &'a Config,
    timeline: &'a TimelineSpec,
    bars: usize,
    partition_bar_counts: BTreeMap<String, usize>,
}

fn cmd_ingest(cfg: &Config, out: &Path, input: Option<&Path>, synthetic: bool) -> Result<()> {
    let series: OhlcvSeries = match (input, synthetic) {
        (Some(_), true) => {
            return Err(Error::Usage("--input and --synthetic are mutually exclusive".into()))
        }
        (None, false) => {
            return Err(Error::Usage("ingest needs --input <CSV> or --synthetic".into()))
        }
        (Some(path), false) => load_ohlcv(path)?,
        (None, true) => {
            let s = &cfg.synthetic;
            synth_regime_series(
                s.pre,
                s.post,
                s.pre_len,
                s.cr_len + s.test_len + s.hold_len,
                cfg.seed,
            )
        }
    };
    let timeline = cfg.timeline_spec()?;
    let mut counts = BTreeMap::new();
    for (name, range) in [
        ("pre_crisis", &timeline.pre_crisis),
        ("crisis_train", &timeline.crisis_train),
        ("crisis_test", &timeline.crisis_test),
        ("hold_out", &timeline.hold_out),
    ] {
        let c = series.bars().iter().filter(|b| range.contains(b.date)).count();
        if c == 0 {
            return Err(Error::Coverage(format!(
                "partition {name} has no bars in {} .. {}",
                range.start, range.end
            )));
        }
        counts.insert(name.to_string(), c);
    }
    write_ohlcv(&series, &out.join("ohlcv.csv"))?;
    write_manifest(
        &out.join("ingest_manifest.json"),
        &IngestManifest {
            config: cfg,
            timeline: &timeline,
            bars: series.len(),
            partition_bar_counts: counts,
        },
    )?;
    write_manifest(&out.join("timeline.json"), &timeline)?;
    println!("ingested {} bars across 4 partitions", series.len());
    Ok(())
}

#[derive(Serialize)]
struct FeaturesManifest<'a> {
    config: &'a Config,
    n_features: usize,
    rows: usize,
    warmup_dropped: usize,
}

fn cmd_features(cfg: &Config, out: &Path, input: Option<&Path>) -> Result<()> {
    let default_input = out.join("ohlcv.csv");
    let input = input.unwrap_or(&default_input);
    let series = load_ohlcv(input)?;
    let registry = IndicatorRegistry::standard();
    let dataset = compute_features(&series, &registry)?;
    dataset.write_csv(&out.join("features.csv"))?;
    write_manifest(
        &out.join("features_manifest.json"),
        &FeaturesManifest {
            config: cfg,
            n_features: dataset.n_features(),
            rows: dataset.len(),
            warmup_dropped: series.len() - dataset.len(),
        },
    )?;
    println!("computed {} features over {} rows", dataset.n_features(), dataset.len());
    Ok(())
}

fn load_split(out: &Path) -> Result<DatasetSplit> {
    let timeline_path = out.join("timeline.json");
    let text = std::fs::read_to_string(&timeline_path).map_err(|e| Error::File {
        path: timeline_path.clone(),
        source: e,
    })?;
    let timeline: TimelineSpec = serde_json::from_str(&text)?;
    let dataset = FeatureDataset::read_csv(&out.join("features.csv"))?;
    segment_timeline(&dataset, &timeline)
}

fn scenario_list(cfg: &Config, timeline_id: &str) -> Result<Vec<ScenarioSpec>> {
    let base = MoeaConfig {
        population_size: cfg.search.population_size,
        iterations: cfg.search.iterations,
        seed: cfg.seed,
        ..MoeaConfig::nsga2_defaults(cfg.layout.genome_len())
    };
    let all = enumerate_scenarios(
        timeline_id,
        cfg.search.runs,
        &base,
        &cfg.train,
        &cfg.layout,
        cfg.complexity_mode,
    );
    if cfg.search.scenarios.is_empty() {
        return Ok(all);
    }
    let mut picked = Vec::new();
    for want in &cfg.search.scenarios {
        match all.iter().find(|s| &s.id() == want) {
            Some(s) => picked.push(s.clone()),
            None => {
                return Err(Error::Usage(format!(
                    "unknown scenario '{want}' (expected one of {})",
                    all.iter().map(|s| s.id()).collect::<Vec<_>>().join(", ")
                )))
            }
        }
    }
    Ok(picked)
}

#[derive(Serialize)]
struct ScenarioManifestEntry {
    id: String,
    environment: EnvironmentKind,
    objective_count: usize,
    moea: String,
    n_runs: usize,
    seeds: Vec<u64>,
    moea_cfg: MoeaConfig,
    evaluations_per_run: Vec<usize>,
    failures: Vec<(usize, String)>,
    aps_files: Vec<String>,
}

#[derive(Serialize)]
struct SearchManifest<'a> {
    config: &'a Config,
    timeline_id: String,
    scenarios: Vec<ScenarioManifestEntry>,
    wall_clock_secs: f64,
}

fn cmd_search(cfg: &Config, out: &Path) -> Result<()> {
    // scenario ids do not depend on the timeline; reject typos before
    // touching any data
    scenario_list(cfg, "pending")?;
    let split = load_split(out)?;
    let specs = scenario_list(cfg, &split.timeline_id)?;
    let started = Instant::now();
    let mut entries = Vec::new();
    let mut any_failure = false;
    for spec in &specs {
        let result = run_scenario(spec, &split, Some(out))?;
        any_failure |= !result.failures.is_empty();
        for (run, msg) in &result.failures {
            eprintln!("{} run {run} failed: {msg}", spec.id());
        }
        entries.push(ScenarioManifestEntry {
            id: spec.id(),
            environment: spec.environment,
            objective_count: spec.environment.objective_count(),
            moea: spec.moea.label().to_string(),
            n_runs: spec.n_runs,
            seeds: (0..spec.n_runs as u64).map(|r| spec.moea_cfg.seed + r).collect(),
            moea_cfg: spec.moea_cfg,
            evaluations_per_run: result.evaluations_per_run,
            failures: result.failures,
            aps_files: result
                .aps_paths
                .iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect(),
        });
        println!("{}: {} runs done", spec.id(), spec.n_runs);
    }
    write_manifest(
        &out.join("search_manifest.json"),
        &SearchManifest {
            config: cfg,
            timeline_id: split.timeline_id.clone(),
            scenarios: entries,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )?;
    if any_failure {
        return Err(Error::RunFailure("one or more scenario runs failed".into()));
    }
    Ok(())
}

fn environment_of(scenario_id: &str) -> Result<EnvironmentKind> {
    if scenario_id.starts_with("LF") {
        Ok(EnvironmentKind::Full)
    } else if scenario_id.starts_with("LS") {
        Ok(EnvironmentKind::Split)
    } else {
        Err(Error::Format(format!("cannot infer environment from scenario id '{scenario_id}'")))
    }
}

/// Scenario id -> runs, ordered by run index.
fn discover_aps(out: &Path, genome_len: usize) -> Result<BTreeMap<String, Vec<ApproxParetoSet>>> {
    let mut groups: BTreeMap<String, Vec<ApproxParetoSet>> = BTreeMap::new();
    for entry in std::fs::read_dir(out)? {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if !name.ends_with(".aps.jsonl") {
            continue;
        }
        let aps = read_aps(&path, genome_len)?;
        groups.entry(aps.scenario_id.clone()).or_default().push(aps);
    }
    for runs in groups.values_mut() {
        runs.sort_by_key(|a| a.run_id);
    }
    if groups.is_empty() {
        return Err(Error::EmptyData(format!(
            "no APS artifacts in {} — run `search` first",
            out.display()
        )));
    }
    Ok(groups)
}

#[derive(Serialize)]
struct EvaluationEntry {
    scenario: String,
    genome_hex: String,
    objectives: Vec<f64>,
    n_features: usize,
    complexity: f64,
    holdout: crate::experiment::HoldoutSummary,
}

#[derive(Serialize)]
struct EvaluationManifest<'a> {
    config: &'a Config,
    selections: Vec<EvaluationEntry>,
}

fn cmd_evaluate(cfg: &Config, out: &Path, scenario: Option<&str>) -> Result<()> {
    let split = load_split(out)?;
    let groups = discover_aps(out, cfg.layout.genome_len())?;
    let mut selections = Vec::new();
    for (id, runs) in &groups {
        if let Some(want) = scenario {
            if id != want {
                continue;
            }
        }
        let union: Vec<ApsMember> =
            runs.iter().flat_map(|a| a.members.iter().cloned()).collect();
        let (member, arch) = posteriori_select(&union, &cfg.layout, cfg.complexity_mode)?;
        let holdout = holdout_evaluate(
            &arch,
            &split,
            environment_of(id)?,
            &cfg.train,
            cfg.holdout_cycles,
            cfg.seed,
        )?;
        println!(
            "{id}: selected {} features, holdout accuracy {:.4} ± {:.4}",
            arch.n_selected(),
            holdout.overall_accuracy.mean,
            holdout.overall_accuracy.sd
        );
        selections.push(EvaluationEntry {
            scenario: id.clone(),
            genome_hex: member.genome.to_hex(),
            objectives: member.objectives.clone(),
            n_features: arch.n_selected(),
            complexity: arch.complexity(cfg.complexity_mode),
            holdout,
        });
    }
    if selections.is_empty() {
        return Err(Error::EmptyData(match scenario {
            Some(s) => format!("no APS artifacts for scenario '{s}'"),
            None => "no APS artifacts found".into(),
        }));
    }
    write_manifest(
        &out.join("evaluation.json"),
        &EvaluationManifest { config: cfg, selections },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ReportManifest<'a> {
    config: &'a Config,
    scenario_ids: Vec<String>,
    hv_matrix: Vec<Vec<f64>>,
    friedman_statistic: f64,
    friedman_p: f64,
    control: String,
}

fn cmd_report(cfg: &Config, out: &Path) -> Result<()> {
    let split = load_split(out)?;
    let groups = discover_aps(out, cfg.layout.genome_len())?;
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "need ≥ 2 scenarios' APS artifacts for a comparison report".into(),
        ));
    }
    let n_runs = groups.values().next().unwrap().len();
    for (id, runs) in &groups {
        if runs.len() != n_runs {
            return Err(Error::Specification(format!(
                "scenario {id} has {} runs, expected {n_runs}",
                runs.len()
            )));
        }
    }

    // re-score every APS member on the environment-independent criteria
    // (hold-out balanced error, complexity) so scenarios are comparable
    let scorer = HoldoutScorer::new(
        &split,
        &cfg.layout,
        cfg.complexity_mode,
        &cfg.train,
        cfg.seed,
    )?;
    let mut comparison: BTreeMap<String, Vec<ApproxParetoSet>> = BTreeMap::new();
    for (id, runs) in &groups {
        let env = environment_of(id)?;
        let mut rescored_runs = Vec::with_capacity(runs.len());
        for aps in runs {
            let members = aps
                .members
                .iter()
                .map(|m| {
                    Ok(ApsMember {
                        genome: m.genome.clone(),
                        objectives: scorer.score(&m.genome, env)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let points: Vec<Vec<f64>> = members.iter().map(|m| m.objectives.clone()).collect();
            let keep = nondominated_filter(&points);
            rescored_runs.push(ApproxParetoSet {
                members: keep.into_iter().map(|i| members[i].clone()).collect(),
                ..aps.clone()
            });
        }
        comparison.insert(id.clone(), rescored_runs);
    }

    // estimated true Pareto set = non-dominated union over everything
    let union: Vec<Vec<f64>> = comparison
        .values()
        .flatten()
        .flat_map(|a| a.members.iter().map(|m| m.objectives.clone()))
        .collect();
    let gamma: Vec<Vec<f64>> =
        nondominated_filter(&union).into_iter().map(|i| union[i].clone()).collect();

    let scenario_ids: Vec<String> = comparison.keys().cloned().collect();
    let mut rows = vec![Vec::with_capacity(scenario_ids.len()); n_runs];
    for id in &scenario_ids {
        for (run, aps) in comparison[id].iter().enumerate() {
            let points: Vec<Vec<f64>> =
                aps.members.iter().map(|m| m.objectives.clone()).collect();
            rows[run].push(hv_indicator(&points, &gamma, DEFAULT_REF_MARGIN)?);
        }
    }
    let matrix = HvMatrix::new(scenario_ids.clone(), rows.clone())?;
    let report = build_report(&matrix, cfg.alpha)?;

    let mut fronts = Vec::new();
    for (j, id) in scenario_ids.iter().enumerate() {
        let hv: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        fronts.push((id.as_str(), median_front(&comparison[id], &hv)?));
    }

    // a-posteriori selection from the control scenario's union, evaluated
    // on the hold-out partition
    let control = report
        .scenarios
        .iter()
        .find(|s| s.is_control)
        .map(|s| s.scenario.clone())
        .unwrap();
    let union_members: Vec<ApsMember> = groups[&control]
        .iter()
        .flat_map(|a| a.members.iter().cloned())
        .collect();
    let (member, arch) = posteriori_select(&union_members, &cfg.layout, cfg.complexity_mode)?;
    let holdout = holdout_evaluate(
        &arch,
        &split,
        environment_of(&control)?,
        &cfg.train,
        cfg.holdout_cycles,
        cfg.seed,
    )?;
    let selection = SelectionSummary::from_parts(
        &control,
        &member.genome.to_hex(),
        &arch,
        arch.complexity(cfg.complexity_mode),
        holdout,
    );

    emit_report(&report, &fronts, Some(&selection), out)?;
    write_manifest(
        &out.join("report_manifest.json"),
        &ReportManifest {
            config: cfg,
            scenario_ids,
            hv_matrix: rows,
            friedman_statistic: report.friedman.statistic,
            friedman_p: report.friedman.p_value,
            control: control.clone(),
        },
    )?;
    println!(
        "report written; control {control}, Friedman p = {:.3e}",
        report.friedman.p_value
    );
    Ok(())
}

/// Oracle suites exercised by `selftest`; each returns a diagnostic on
/// failure. The `COEVO_SELFTEST_PERTURB` environment variable injects a
/// hypervolume perturbation to prove the suite is sensitive.
fn selftest_hypervolume() -> std::result::Result<(), String> {
    let perturb: f64 = std::env::var("COEVO_SELFTEST_PERTURB")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..30 {
        let m = 2 + trial % 2;
        let points: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let reference = vec![1.1; m];
        let lower = vec![0.0; m];
        let exact = hypervolume(&points, &reference) + perturb;
        let (est, se) = hypervolume_monte_carlo(&points, &reference, &lower, 100_000, &mut rng);
        if (exact - est).abs() > 4.0 * se.max(2e-3) {
            return Err(format!(
                "trial {trial}: exact {exact:.5} vs Monte-Carlo {est:.5} ± {se:.5}"
            ));
        }
    }
    Ok(())
}

fn selftest_dominance() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let points: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let fronts = nondominated_sort(&points);
        // brute force: repeatedly strip the non-dominated subset
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut expected = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| {
                    !remaining.iter().any(|&j| {
                        j != i && crate::moea_core::dominates(&points[j], &points[i])
                    })
                })
                .collect();
            remaining.retain(|i| !front.contains(i));
            expected.push(front);
        }
        if fronts != expected {
            return Err(format!("trial {trial}: sorted fronts disagree with brute force"));
        }
    }
    Ok(())
}

fn selftest_gradient() -> std::result::Result<(), String> {
    let layout = GenomeLayout { n_features: 6, n_layers: 2, size_bits: 3, max_layer_size: 6 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..5 {
        let genome = random_genome(&layout, &mut rng);
        let arch = decode(&genome, &layout).map_err(|e| e.to_string())?;
        let weights = init_weights(&arch, 100 + trial);
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..arch.n_selected()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let ys: Vec<u8> = (0..12).map(|i| (i % 2) as u8).collect();
        let cw = (1.0, 1.0);
        let (_, grad) = batch_gradient(&weights, &xs, &ys, cw);
        let h = 1e-6;
        for l in 0..weights.layers.len() {
            for w in 0..weights.layers[l].weights.len() {
                let mut plus = weights.clone();
                plus.layers[l].weights[w] += h;
                let mut minus = weights.clone();
                minus.layers[l].weights[w] -= h;
                let fd =
                    (batch_loss(&plus, &xs, &ys, cw) - batch_loss(&minus, &xs, &ys, cw)) / (2.0 * h);
                let g = grad.layers[l].weights[w];
                let denom = g.abs().max(fd.abs()).max(1e-6);
                if (g - fd).abs() / denom > 1e-4 {
                    return Err(format!(
                        "trial {trial} layer {l} weight {w}: backprop {g:.8} vs finite diff {fd:.8}"
                    ));
                }
            }
        }
    }
    Ok(())
}

fn selftest_statistics() -> std::result::Result<(), String> {
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|i| vec![0.9 + 0.001 * i as f64, 0.5, 0.1 + 0.002 * i as f64])
        .collect();
    let m = HvMatrix::new(vec!["a".into(), "b".into(), "c".into()], rows)
        .map_err(|e| e.to_string())?;
    let chi2_p = friedman_test(&m).map_err(|e| e.to_string())?.p_value;
    let perm_p = friedman_permutation_p(&m, 10_000, 3).map_err(|e| e.to_string())?;
    if (chi2_p - perm_p).abs() > 0.01 {
        return Err(format!("Friedman chi2 p {chi2_p:.4} vs permutation {perm_p:.4}"));
    }
    let apv = hommel_apv(&[0.011, 0.02, 0.04]).map_err(|e| e.to_string())?;
    let expected = [0.03, 0.04, 0.04];
    for (a, e) in apv.iter().zip(expected) {
        if (a - e).abs() > 1e-10 {
            return Err(format!("Hommel APVs {apv:?} differ from {expected:?}"));
        }
    }
    Ok(())
}

fn cmd_selftest() -> Result<()> {
    let suites: [(&str, fn() -> std::result::Result<(), String>); 4] = [
        ("hypervolume vs Monte-Carlo", selftest_hypervolume),
        ("dominance vs brute force", selftest_dominance),
        ("gradient vs finite differences", selftest_gradient),
        ("Friedman vs permutation + Hommel", selftest_statistics),
    ];
    let mut failed = 0;
    for (name, suite) in suites {
        match suite() {
            Ok(()) => println!("selftest {name}: pass"),
            Err(msg) => {
                println!("selftest {name}: FAIL ({msg})");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(Error::RunFailure(format!("{failed} selftest suite(s) failed")));
    }
    Ok(())
}
