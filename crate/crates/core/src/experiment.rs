//! Multi-seed experiment runs, suites, and file outputs.
//!
//! A run directory holds `config.json`, `metrics.csv` (one row per seed,
//! then `mean` and `std`), `run.json`, `trace_<model>_<seed>.csv`,
//! `params_<model>_<seed>.json`, and the plot data of the first seed:
//! `scatter_<model>.csv` plus `landscape_<model>.csv` for models with an
//! energy or discriminator network.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ModelKind, TrainConfig};
use crate::datasets::{DatasetSplits, SyntheticTask, TaskKind, TestPoint};
use crate::energy::InfonceMode;
use crate::error::{Error, Result};
use crate::mdn::NoiseModel;
use crate::metrics::{
    aggregate, avg_modes_captured, ik_success_rates, kl_divergence_hist, scalar_targets, total_mode_coverage,
    wasserstein_hist, Aggregate, MetricsReport, DEFAULT_BINS, DEFAULT_EPSILON, DEFAULT_SAMPLES,
    DEFAULT_SUCCESS_TOLERANCE, KL_DELTA, METRIC_COLUMNS,
};
use crate::model::{train_model, TrainedModel};
use crate::rng::{SeededRng, Stream};
use crate::serialize::ParamsFile;
use crate::trainer::LossTrace;

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const LANDSCAPE_RESOLUTION: usize = 100;
/// Environment variable capping the number of concurrently executing runs.
pub const THREADS_ENV: &str = "MMBC_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub samples_per_condition: usize,
    pub epsilon: f64,
    pub bins: usize,
    pub success_tolerance: f64,
    /// Test conditions; the task default when absent.
    pub grid_size: Option<usize>,
    pub landscape_resolution: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples_per_condition: DEFAULT_SAMPLES,
            epsilon: DEFAULT_EPSILON,
            bins: DEFAULT_BINS,
            success_tolerance: DEFAULT_SUCCESS_TOLERANCE,
            grid_size: None,
            landscape_resolution: LANDSCAPE_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub model: ModelKind,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

impl ExperimentConfig {
    pub fn preset(task: TaskKind, model: ModelKind) -> Self {
        Self {
            task,
            model,
            seeds: DEFAULT_SEEDS.to_vec(),
            out: None,
            train: TrainConfig::preset(task, model),
            eval: EvalConfig::default(),
        }
    }

    /// Builds a config from a (possibly partial) JSON document. Missing
    /// fields take the preset values of its `task` and `model`.
    pub fn from_value(doc: &Value) -> Result<Self> {
        let field = |key: &str| -> Result<Option<String>> {
            match doc.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(other) => Err(Error::Config(format!("`{key}` must be a string, got {other}"))),
            }
        };
        let task: TaskKind = field("task")?.as_deref().unwrap_or("hyperbola").parse()?;
        let model: ModelKind = field("model")?.as_deref().unwrap_or("ebgan_mdn").parse()?;
        let mut value = serde_json::to_value(Self::preset(task, model))?;
        merge(&mut value, doc);
        let mut config: Self =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))?;
        config.train.task = task;
        config.train.model = model;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(&serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.eval.samples_per_condition == 0 || self.eval.bins == 0 {
            return Err(Error::Config("samples per condition and bin count must be positive".into()));
        }
        if self.train.task != self.task || self.train.model != self.model {
            return Err(Error::Config("train section disagrees with task/model".into()));
        }
        self.train.validate()
    }

    pub fn synthetic_task(&self) -> SyntheticTask {
        SyntheticTask::new(self.task)
    }

    pub fn grid_size(&self) -> usize {
        self.eval.grid_size.unwrap_or_else(|| self.synthetic_task().default_grid_size())
    }

    pub fn data(&self, seed: u64) -> Result<DatasetSplits> {
        let task = self.synthetic_task();
        DatasetSplits::with_sizes(
            task,
            seed,
            task.default_train_size(),
            crate::datasets::DEFAULT_VALIDATION_SIZE,
            self.grid_size(),
        )
    }
}

/// Draws `samples_per_condition` actions per test point and scores them.
pub fn evaluate(
    model: &TrainedModel,
    task: &SyntheticTask,
    test: &[TestPoint],
    eval: &EvalConfig,
    seed: u64,
) -> Result<(MetricsReport, Vec<Vec<Vec<f64>>>)> {
    let mut rng = SeededRng::stream(seed, Stream::Eval);
    let samples = test
        .iter()
        .map(|p| model.sample_actions(&p.condition, eval.samples_per_condition, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut report = MetricsReport::default();
    match task.kind {
        TaskKind::Hyperbola | TaskKind::Lines => {
            let modes: Vec<Vec<Vec<f64>>> = test.iter().map(|p| p.modes.clone()).collect();
            report.tmc_percent = Some(total_mode_coverage(&samples, &modes, eval.epsilon)?);
            report.amc = Some(avg_modes_captured(&samples, &modes, eval.epsilon)?);
            let truth = scalar_targets(&modes.concat())?;
            let generated = scalar_targets(&samples.concat())?;
            report.kl = Some(kl_divergence_hist(&truth, &generated, eval.bins, KL_DELTA)?);
            report.wasserstein = Some(wasserstein_hist(&truth, &generated, eval.bins)?);
        }
        TaskKind::Ik2link => {
            let targets: Vec<Vec<f64>> = test.iter().map(|p| p.condition.clone()).collect();
            let (best, mean) = ik_success_rates(&samples, &targets, eval.success_tolerance)?;
            report.success_best = Some(best);
            report.success_mean = Some(mean);
        }
    }
    Ok((report, samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// Everything produced by one seed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub metrics: MetricsReport,
    pub trace: LossTrace,
    pub model: TrainedModel,
    pub samples: Vec<Vec<Vec<f64>>>,
    pub test: Vec<TestPoint>,
}

pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let data = config.data(seed)?;
    let (model, trace) = train_model(&config.train, &data, seed)?;
    let (metrics, samples) = evaluate(&model, &data.task, &data.test, &config.eval, seed)?;
    log::info!(
        "{} / {} seed {seed}: {}",
        config.task.name(),
        config.model.name(),
        metrics.to_json()?
    );
    Ok(SeedOutcome {
        seed,
        metrics,
        trace,
        model,
        samples,
        test: data.test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub per_seed: Vec<SeedMetrics>,
    pub aggregate: Aggregate,
    pub wall_clock_seconds: f64,
    pub trace_files: Vec<PathBuf>,
    pub traces: Vec<LossTrace>,
}

impl RunRecord {
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.per_seed.iter().map(|s| s.metrics).collect()
    }

    /// Values of one metric across seeds, in seed order.
    pub fn metric(&self, pick: impl Fn(&MetricsReport) -> Option<f64>) -> Vec<f64> {
        self.per_seed.iter().filter_map(|s| pick(&s.metrics)).collect()
    }

    /// Per-seed rows followed by `mean` and `std` rows.
    pub fn metrics_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("run").chain(METRIC_COLUMNS))?;
        for s in &self.per_seed {
            w.write_record(std::iter::once(s.seed.to_string()).chain(s.metrics.csv_cells()))?;
        }
        w.write_record(std::iter::once("mean".to_string()).chain(self.aggregate.mean.csv_cells()))?;
        w.write_record(std::iter::once("std".to_string()).chain(self.aggregate.std.csv_cells()))?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn thread_count(default: usize) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or(default)
        .max(1)
}

fn in_pool<R: Send>(default_threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(default_threads))
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_seeds(config: &ExperimentConfig) -> Result<Vec<SeedOutcome>> {
    config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<Vec<_>>>()
}

fn record_from(config: &ExperimentConfig, outcomes: &[SeedOutcome], started: Instant) -> RunRecord {
    let per_seed: Vec<SeedMetrics> = outcomes
        .iter()
        .map(|o| SeedMetrics {
            seed: o.seed,
            metrics: o.metrics,
        })
        .collect();
    let reports: Vec<MetricsReport> = per_seed.iter().map(|s| s.metrics).collect();
    RunRecord {
        config: config.clone(),
        aggregate: aggregate(&reports),
        per_seed,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        trace_files: Vec::new(),
        traces: outcomes.iter().map(|o| o.trace.clone()).collect(),
    }
}

/// Trains and evaluates every seed of `config`; writes the run directory when `config.out` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let outcomes = in_pool(config.seeds.len(), || run_seeds(config))??;
    let mut record = record_from(config, &outcomes, started);
    if let Some(dir) = &config.out {
        write_run_dir(dir, &mut record, &outcomes)?;
    }
    Ok(record)
}

fn write_run_dir(dir: &Path, record: &mut RunRecord, outcomes: &[SeedOutcome]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let config = &record.config;
    let model = config.model.name();
    std::fs::write(dir.join("config.json"), config.to_json_pretty()?)?;
    std::fs::write(dir.join("metrics.csv"), record.metrics_csv()?)?;
    for o in outcomes {
        let trace_path = dir.join(format!("trace_{model}_{}.csv", o.seed));
        o.trace.save_csv(&trace_path)?;
        record.trace_files.push(trace_path);
        ParamsFile::new(config.task, o.seed, o.model.clone(), o.trace.clone())
            .save(&dir.join(format!("params_{model}_{}.json", o.seed)))?;
    }
    if let Some(first) = outcomes.first() {
        write_plot_files(dir, config, &first.model, &first.test, &first.samples)?;
    }
    std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(record)?)?;
    Ok(())
}

/// Rows of test conditions with kind `mode` (true modes) or `sample` (drawn actions).
pub fn write_scatter_csv<W: Write>(test: &[TestPoint], samples: &[Vec<Vec<f64>>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = test.first() {
        let dx = first.modes.first().map(Vec::len).unwrap_or(0);
        let header: Vec<String> = (0..first.condition.len())
            .map(|i| format!("c_{i}"))
            .chain(std::iter::once("kind".to_string()))
            .chain((0..dx).map(|i| format!("x_{i}")))
            .collect();
        w.write_record(&header)?;
    }
    for (p, xs) in test.iter().zip(samples) {
        let rows = p.modes.iter().map(|m| ("mode", m)).chain(xs.iter().map(|x| ("sample", x)));
        for (kind, x) in rows {
            let rec: Vec<String> = p
                .condition
                .iter()
                .map(f64::to_string)
                .chain(std::iter::once(kind.to_string()))
                .chain(x.iter().map(f64::to_string))
                .collect();
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_plot_files(
    dir: &Path,
    config: &ExperimentConfig,
    model: &TrainedModel,
    test: &[TestPoint],
    samples: &[Vec<Vec<f64>>],
) -> Result<Vec<PathBuf>> {
    let name = config.model.name();
    let mut written = Vec::new();
    let scatter = dir.join(format!("scatter_{name}.csv"));
    write_scatter_csv(test, samples, std::fs::File::create(&scatter)?)?;
    written.push(scatter);
    if let Some(l) = model.landscape(&config.synthetic_task(), config.eval.landscape_resolution)? {
        let path = dir.join(format!("landscape_{name}.csv"));
        l.save_csv(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// Re-creates the plot files of a finished run directory from its saved
/// config and first-seed parameters.
pub fn export_plot_data(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let config = ExperimentConfig::load(&run_dir.join("config.json"))?;
    let seed = config.seeds[0];
    let params = ParamsFile::load(&run_dir.join(format!("params_{}_{seed}.json", config.model.name())))?;
    if params.model.kind() != config.model || params.task != config.task {
        return Err(Error::Format("parameter file does not match the run config".into()));
    }
    let data = config.data(seed)?;
    let (_, samples) = evaluate(&params.model, &data.task, &data.test, &config.eval, seed)?;
    let mut written = write_plot_files(run_dir, &config, &params.model, &data.test, &samples)?;
    let trace = run_dir.join(format!("trace_{}_{seed}.csv", config.model.name()));
    params.trace.save_csv(&trace)?;
    written.push(trace);
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Bench1Hyperbola,
    Bench1Lines,
    NoiseAblation,
    GeneratorConfigAblation,
    Ik2link,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Bench1Hyperbola,
        Suite::Bench1Lines,
        Suite::NoiseAblation,
        Suite::GeneratorConfigAblation,
        Suite::Ik2link,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bench1Hyperbola => "bench1_hyperbola",
            Suite::Bench1Lines => "bench1_lines",
            Suite::NoiseAblation => "noise_ablation",
            Suite::GeneratorConfigAblation => "generator_config_ablation",
            Suite::Ik2link => "ik2link",
        }
    }

    /// Metric columns shown in the suite table.
    pub fn columns(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Suite::Ik2link => &[("success_best", "Success (best)"), ("success_mean", "Success (mean)")],
            _ => &[("tmc_percent", "TMC (%)"), ("amc", "AMC"), ("kl", "KL"), ("wasserstein", "W")],
        }
    }

    /// Labelled configurations of every table row.
    pub fn cells(self, seeds: &[u64]) -> Vec<(String, ExperimentConfig)> {
        let with_seeds = |mut c: ExperimentConfig| {
            c.seeds = seeds.to_vec();
            c
        };
        let models = |task: TaskKind| -> Vec<(String, ExperimentConfig)> {
            ModelKind::ALL
                .iter()
                .map(|&m| (m.display_name().to_string(), with_seeds(ExperimentConfig::preset(task, m))))
                .collect()
        };
        match self {
            Suite::Bench1Hyperbola => models(TaskKind::Hyperbola),
            Suite::Bench1Lines => models(TaskKind::Lines),
            Suite::Ik2link => models(TaskKind::Ik2link),
            Suite::NoiseAblation => NoiseModel::ABLATION
                .iter()
                .map(|&noise| {
                    let mut c = with_seeds(ExperimentConfig::preset(TaskKind::Hyperbola, ModelKind::EbganMdn));
                    c.train.noise = noise;
                    (noise_label(noise), c)
                })
                .collect(),
            Suite::GeneratorConfigAblation => InfonceMode::ALL
                .iter()
                .map(|&mode| {
                    let mut c = with_seeds(ExperimentConfig::preset(TaskKind::Hyperbola, ModelKind::EbganMdn));
                    c.train.infonce_mode = mode;
                    (infonce_label(mode).to_string(), c)
                })
                .collect(),
        }
    }
}

pub fn noise_label(noise: NoiseModel) -> String {
    match noise {
        NoiseModel::Diagonal => "Diagonal".into(),
        NoiseModel::Isotropic => "Isotropic".into(),
        NoiseModel::IsotropicAcrossClusters => "Isotropic across clusters".into(),
        NoiseModel::Fixed(level) => format!("Fixed {level:e}"),
        NoiseModel::LaplaceDiagonal => "Laplace diagonal".into(),
    }
}

pub fn infonce_label(mode: InfonceMode) -> &'static str {
    match mode {
        InfonceMode::NoGenerator => "No generator",
        InfonceMode::StandardInclusion => "Standard inclusion",
        InfonceMode::EqualRatio => "Equal ratio",
        InfonceMode::DynamicScaling => "Dynamic scaling",
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub label: String,
    pub record: RunRecord,
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn metric_by_name(r: &MetricsReport, name: &str) -> Option<f64> {
    METRIC_COLUMNS
        .iter()
        .position(|c| *c == name)
        .and_then(|i| r.values()[i])
}

/// Runs every cell of `suite`. With `out`, each cell gets its own run
/// directory and the suite writes `table.csv` and `table.txt`.
pub fn run_suite(suite: Suite, out: Option<&Path>, seeds: &[u64]) -> Result<Vec<SuiteRow>> {
    let cells: Vec<(String, ExperimentConfig)> = suite
        .cells(seeds)
        .into_iter()
        .map(|(label, mut c)| {
            c.out = out.map(|d| d.join(slug(&label)));
            (label, c)
        })
        .collect();
    let rows = in_pool(cells.len(), || {
        cells
            .par_iter()
            .map(|(label, c)| {
                let started = Instant::now();
                let outcomes = run_seeds(c)?;
                let mut record = record_from(c, &outcomes, started);
                if let Some(dir) = &c.out {
                    write_run_dir(dir, &mut record, &outcomes)?;
                }
                Ok(SuiteRow {
                    label: label.clone(),
                    record,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.csv"), suite_table_csv(suite, &rows)?)?;
        std::fs::write(dir.join("table.txt"), suite_table_text(suite, &rows))?;
    }
    Ok(rows)
}

/// `row,<metric>_mean,<metric>_std,...` with one line per suite row.
pub fn suite_table_csv(suite: Suite, rows: &[SuiteRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row".to_string()];
    for (key, _) in suite.columns() {
        header.push(format!("{key}_mean"));
        header.push(format!("{key}_std"));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.label.clone()];
        for (key, _) in suite.columns() {
            let cell = |r: &MetricsReport| metric_by_name(r, key).map(|v| v.to_string()).unwrap_or_default();
            rec.push(cell(&row.record.aggregate.mean));
            rec.push(cell(&row.record.aggregate.std));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Aligned plain-text table with `mean ± std` cells.
pub fn suite_table_text(suite: Suite, rows: &[SuiteRow]) -> String {
    let mut table: Vec<Vec<String>> = Vec::with_capacity(rows.len() + 1);
    table.push(
        std::iter::once("Model".to_string())
            .chain(suite.columns().iter().map(|(_, h)| h.to_string()))
            .collect(),
    );
    for row in rows {
        let mut line = vec![row.label.clone()];
        for (key, _) in suite.columns() {
            let (m, s) = (
                metric_by_name(&row.record.aggregate.mean, key),
                metric_by_name(&row.record.aggregate.std, key),
            );
            line.push(match (m, s) {
                (Some(m), Some(s)) if *key == "tmc_percent" => format!("{m:.2} ± {s:.2}"),
                (Some(m), Some(s)) => format!("{m:.3} ± {s:.3}"),
                _ => "-".to_string(),
            });
        }
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in table.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-|-"));
            out.push('\n');
        }
    }
    out
}
