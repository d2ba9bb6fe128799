//! Prequential (test-then-train) evaluation, rolling curves, grid search
//! and the detector x batch size x strategy experiment matrix.

use std::collections::VecDeque;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{self, ControllerConfig, EventKind, SelectionStrategy};
use crate::detect::DetectorConfig;
use crate::error::{Error, Result};
use crate::preprocess::{bin_target, fit_target_bins, BinBoundaries, BinMode, EncoderConfig};
use crate::stream::{open_csv_stream, ClassLabel, FeatureSchema, LabeledInstance, Record, Target};
use crate::synth::{self, SynthConfig};

pub const DEFAULT_WARMUP: usize = 2_000;
pub const DEFAULT_WINDOW: usize = 1_000;
pub const DEFAULT_BATCH_SIZE: usize = 500;
pub const BENCHMARK_BATCH_SIZES: [usize; 4] = [500, 1_000, 2_000, 5_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub detector: Option<DetectorConfig>,
    /// Defaults to Last when a detector is set; must be `None` otherwise.
    pub strategy: Option<SelectionStrategy>,
    pub batch_size: usize,
    pub incremental: bool,
    pub warmup: usize,
    /// Trailing window of the rolling accuracy.
    pub window: usize,
    pub mini_batch: usize,
    pub encoder: EncoderConfig,
    /// Binning of numeric (hours) targets, fitted on the warm-up labels.
    pub bins: BinMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            detector: None,
            strategy: None,
            batch_size: DEFAULT_BATCH_SIZE,
            incremental: false,
            warmup: DEFAULT_WARMUP,
            window: DEFAULT_WINDOW,
            mini_batch: adapt::DEFAULT_MINI_BATCH,
            encoder: EncoderConfig::default(),
            bins: BinMode::Tertile,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.detector.is_none() && self.strategy.is_some() {
            return Err(Error::Config(
                "a selection strategy needs a drift detector".into(),
            ));
        }
        if self.window == 0 {
            return Err(Error::Config("rolling window must be at least 1".into()));
        }
        if self.warmup == 0 {
            return Err(Error::Config("warm-up needs at least one instance".into()));
        }
        self.controller_config().validate()
    }

    pub fn effective_strategy(&self) -> Option<SelectionStrategy> {
        self.detector
            .as_ref()
            .map(|_| self.strategy.unwrap_or(SelectionStrategy::Last))
    }

    pub fn controller_config(&self) -> ControllerConfig {
        let mut c = ControllerConfig::new(
            self.detector,
            self.effective_strategy().unwrap_or(SelectionStrategy::Last),
            self.batch_size,
            self.incremental,
        );
        c.mini_batch = self.mini_batch;
        c
    }

    pub fn detector_name(&self) -> &'static str {
        self.detector.as_ref().map_or("none", |d| d.name())
    }
}

/// One scored prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrequentialRecord {
    pub index: u64,
    pub predicted: ClassLabel,
    pub actual: ClassLabel,
    pub correct: bool,
    pub rolling_accuracy: f64,
    pub drift: bool,
    pub retrain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub index: u64,
    pub event: EventKind,
    pub strategy: Option<SelectionStrategy>,
    pub batch_size: usize,
    pub detector: String,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub detector: String,
    pub strategy: Option<SelectionStrategy>,
    /// `None` when no detector (and hence no retraining) is configured.
    pub batch_size: Option<usize>,
    pub incremental: bool,
    pub overall_accuracy: f64,
    pub n_predictions: u64,
    pub n_drifts: u64,
    pub n_retrains: u64,
    /// Relative gain over a baseline, when one was supplied.
    pub performance_increase: Option<f64>,
    /// `confusion[actual][predicted]`; reported, never used for ranking.
    pub confusion: Vec<Vec<u64>>,
}

impl ExperimentSummary {
    pub fn with_baseline(mut self, baseline_accuracy: f64) -> Self {
        self.performance_increase = Some(performance_increase(self.overall_accuracy, baseline_accuracy));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<PrequentialRecord>,
    pub events: Vec<EventRow>,
    pub summary: ExperimentSummary,
    /// Target bins fitted on the warm-up labels, for hours targets.
    pub bins: Option<BinBoundaries>,
}

/// `(accuracy - baseline) / baseline`.
pub fn performance_increase(accuracy: f64, baseline: f64) -> f64 {
    (accuracy - baseline) / baseline
}

/// `out[i] = mean(series[max(0, i + 1 - window) ..= i])`.
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Config("rolling window must be at least 1".into()));
    }
    let Some(&anchor) = series.first() else {
        return Ok(Vec::new());
    };
    // Deviations from the first value keep constant series exact.
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(series.len());
    for (i, &x) in series.iter().enumerate() {
        sum += x - anchor;
        if i >= window {
            sum -= series[i - window] - anchor;
        }
        let n = (i + 1).min(window) as f64;
        out.push(anchor + sum / n);
    }
    Ok(out)
}

/// Resolves record targets to class labels. Hours targets are binned with
/// bins fitted on the first `warmup` labeled records.
fn resolve_labels(
    records: &[Record],
    warmup: usize,
    mode: &BinMode,
) -> Result<(Vec<Option<ClassLabel>>, Option<BinBoundaries>)> {
    let hours: Vec<f64> = records
        .iter()
        .filter_map(|r| match r.target {
            Some(Target::Hours(h)) => Some(h),
            _ => None,
        })
        .take(warmup)
        .collect();
    let bins = if hours.is_empty() {
        None
    } else {
        Some(fit_target_bins(&hours, mode)?)
    };
    let labels = records
        .iter()
        .map(|r| match r.target {
            None => Ok(None),
            Some(Target::Class(l)) => Ok(Some(l)),
            Some(Target::Hours(h)) => bin_target(h, bins.as_ref().expect("bins fitted")).map(Some),
        })
        .collect::<Result<_>>()?;
    Ok((labels, bins))
}

/// Runs the prequential loop over `records`: the first `warmup` labeled
/// records train the encoder and the initial model, every later labeled
/// record is predicted, scored and then learned from. Unlabeled records are
/// skipped.
pub fn run_experiment(
    records: &[Record],
    schema: &FeatureSchema,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    config.validate()?;
    let (labels, bins) = resolve_labels(records, config.warmup, &config.bins)?;
    let labeled: Vec<usize> = (0..records.len()).filter(|&i| labels[i].is_some()).collect();
    if labeled.len() < config.warmup {
        return Err(Error::Degenerate(format!(
            "warm-up needs {} labeled instances, stream has {}",
            config.warmup,
            labeled.len()
        )));
    }
    let warm: Vec<LabeledInstance> = labeled[..config.warmup]
        .iter()
        .map(|&i| LabeledInstance {
            instance: records[i].instance.clone(),
            label: labels[i].expect("labeled"),
        })
        .collect();
    let controller =
        adapt::warmup(&warm, config.warmup, schema, &config.encoder, config.controller_config())?;
    drop(warm);
    let mut controller = if config.detector.is_none() && !config.incremental {
        controller.make_static()
    } else {
        controller
    };

    let n_classes = labels[labeled[0]].expect("labeled").n_classes() as usize;
    let rest = &labeled[config.warmup..];
    let mut out = Vec::with_capacity(rest.len());
    let mut window: VecDeque<bool> = VecDeque::with_capacity(config.window);
    let mut hits_in_window = 0u64;
    let mut hits = 0u64;
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    let (mut n_drifts, mut n_retrains) = (0, 0);
    for &i in rest {
        let actual = labels[i].expect("labeled");
        let step = controller.step_instance(&records[i].instance, actual)?;
        let correct = step.prediction == actual;
        if window.len() == config.window && window.pop_front() == Some(true) {
            hits_in_window -= 1;
        }
        window.push_back(correct);
        hits_in_window += correct as u64;
        hits += correct as u64;
        n_drifts += step.drift as u64;
        n_retrains += step.retrained as u64;
        confusion[actual.id() as usize][step.prediction.id() as usize] += 1;
        out.push(PrequentialRecord {
            index: records[i].instance.index,
            predicted: step.prediction,
            actual,
            correct,
            rolling_accuracy: hits_in_window as f64 / window.len() as f64,
            drift: step.drift,
            retrain: step.retrained,
        });
    }

    let strategy = config.effective_strategy();
    let detector = config.detector_name().to_string();
    let events = controller
        .take_events()
        .into_iter()
        .map(|e| EventRow {
            index: e.index,
            event: e.kind,
            strategy,
            batch_size: config.batch_size,
            detector: detector.clone(),
            statistic: e.statistic,
        })
        .collect();
    let n = out.len() as u64;
    Ok(ExperimentResult {
        summary: ExperimentSummary {
            detector,
            strategy,
            batch_size: config.detector.map(|_| config.batch_size),
            incremental: config.incremental,
            overall_accuracy: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
            n_predictions: n,
            n_drifts,
            n_retrains,
            performance_increase: None,
            confusion,
        },
        records: out,
        events,
        bins,
    })
}

/// A stream that can be read from the start more than once.
pub trait ReplayableSource: Sync {
    fn schema(&self) -> &FeatureSchema;

    /// Reads the whole stream from its first record.
    fn replay(&self) -> Result<Vec<Record>>;
}

pub struct CsvSource {
    pub path: PathBuf,
    pub schema: FeatureSchema,
}

impl ReplayableSource for CsvSource {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn replay(&self) -> Result<Vec<Record>> {
        open_csv_stream(&self.path, &self.schema)?.collect()
    }
}

pub struct SynthSource {
    pub config: SynthConfig,
    schema: FeatureSchema,
}

impl SynthSource {
    pub fn new(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        Ok(SynthSource {
            schema: config.schema(),
            config,
        })
    }
}

impl ReplayableSource for SynthSource {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn replay(&self) -> Result<Vec<Record>> {
        Ok(synth::Generator::new(self.config.clone())?
            .map(|(li, _)| Record::from(li))
            .collect())
    }
}

pub struct MemorySource {
    pub schema: FeatureSchema,
    pub records: Vec<Record>,
}

impl ReplayableSource for MemorySource {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn replay(&self) -> Result<Vec<Record>> {
        Ok(self.records.clone())
    }
}

/// Wraps records that can be consumed once; a second replay fails.
pub struct OneShotSource {
    schema: FeatureSchema,
    records: Mutex<Option<Vec<Record>>>,
}

impl OneShotSource {
    pub fn new(schema: FeatureSchema, records: Vec<Record>) -> Self {
        OneShotSource {
            schema,
            records: Mutex::new(Some(records)),
        }
    }
}

impl ReplayableSource for OneShotSource {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn replay(&self) -> Result<Vec<Record>> {
        self.records
            .lock()
            .expect("not poisoned")
            .take()
            .ok_or_else(|| Error::State("stream is not replayable: already consumed".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub detector: DetectorConfig,
    pub summary: ExperimentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Position of the best row in `table`.
    pub best: usize,
    pub table: Vec<GridRow>,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.table[self.best]
    }
}

/// Runs `base` once per detector setting on `prefix` and keeps the most
/// accurate one; ties go to the earliest grid point.
pub fn grid_search(
    prefix: &[Record],
    schema: &FeatureSchema,
    grid: &[DetectorConfig],
    base: &ExperimentConfig,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Config("parameter grid is empty".into()));
    }
    let mut table = Vec::with_capacity(grid.len());
    let mut best = 0;
    for (i, d) in grid.iter().enumerate() {
        let config = ExperimentConfig {
            detector: Some(*d),
            ..base.clone()
        };
        let summary = run_experiment(prefix, schema, &config)?.summary;
        if summary.overall_accuracy > table.get(best).map_or(f64::NEG_INFINITY, |r: &GridRow| r.summary.overall_accuracy) {
            best = i;
        }
        table.push(GridRow { detector: *d, summary });
    }
    Ok(GridResult { best, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub detector: DetectorConfig,
    pub batch_size: usize,
    pub strategy: SelectionStrategy,
    pub summary: ExperimentSummary,
}

/// Runs every detector x batch size x strategy cell as an independent
/// experiment on `workers` threads. Each cell replays the source itself.
/// Cells come back in grid order (detector, then batch size, then strategy)
/// regardless of scheduling.
pub fn experiment_matrix(
    source: &dyn ReplayableSource,
    detectors: &[DetectorConfig],
    batch_sizes: &[usize],
    strategies: &[SelectionStrategy],
    base: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<MatrixCell>> {
    if detectors.is_empty() || batch_sizes.is_empty() || strategies.is_empty() {
        return Err(Error::Config("experiment matrix has an empty axis".into()));
    }
    let mut keys = Vec::new();
    for (d, det) in detectors.iter().enumerate() {
        for (b, &batch) in batch_sizes.iter().enumerate() {
            for (s, &strategy) in strategies.iter().enumerate() {
                keys.push(((d, b, s), *det, batch, strategy));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let schema = source.schema();
    let mut cells = pool.install(|| {
        keys.par_iter()
            .map(|&(key, detector, batch_size, strategy)| {
                let records = source.replay()?;
                let config = ExperimentConfig {
                    detector: Some(detector),
                    strategy: Some(strategy),
                    batch_size,
                    ..base.clone()
                };
                let summary = run_experiment(&records, schema, &config)?.summary;
                Ok((key, MatrixCell {
                    detector,
                    batch_size,
                    strategy,
                    summary,
                }))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    cells.sort_by_key(|(key, _)| *key);
    Ok(cells.into_iter().map(|(_, c)| c).collect())
}

/// The four reference runs: static, incremental only, detection only and
/// detection plus incremental updates. Gains are relative to the static run.
pub fn baselines(
    records: &[Record],
    schema: &FeatureSchema,
    detector: DetectorConfig,
    base: &ExperimentConfig,
) -> Result<Vec<ExperimentSummary>> {
    let variants = [(None, false), (None, true), (Some(detector), false), (Some(detector), true)];
    let mut rows = Vec::with_capacity(4);
    for (det, incremental) in variants {
        let config = ExperimentConfig {
            detector: det,
            strategy: det.map(|_| base.strategy.unwrap_or(SelectionStrategy::Last)),
            incremental,
            ..base.clone()
        };
        rows.push(run_experiment(records, schema, &config)?.summary);
    }
    let static_acc = rows[0].overall_accuracy;
    Ok(rows.into_iter().map(|r| r.with_baseline(static_acc)).collect())
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_records(path: impl AsRef<Path>, records: &[PrequentialRecord]) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["index", "predicted", "actual", "correct", "rolling_accuracy", "drift", "retrain"],
        records.iter().map(|r| {
            [
                r.index.to_string(),
                r.predicted.id().to_string(),
                r.actual.id().to_string(),
                (r.correct as u8).to_string(),
                fmt6(r.rolling_accuracy),
                (r.drift as u8).to_string(),
                (r.retrain as u8).to_string(),
            ]
        }),
    )
}

pub fn write_curves(path: impl AsRef<Path>, records: &[PrequentialRecord]) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["index", "rolling_accuracy"],
        records
            .iter()
            .map(|r| [r.index.to_string(), fmt6(r.rolling_accuracy)]),
    )
}

pub fn write_events(path: impl AsRef<Path>, events: &[EventRow]) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["index", "event", "strategy", "batch_size", "detector", "statistic"],
        events.iter().map(|e| {
            [
                e.index.to_string(),
                e.event.as_str().to_string(),
                e.strategy.map_or("none".into(), |s| s.to_string()),
                e.batch_size.to_string(),
                e.detector.clone(),
                fmt6(e.statistic),
            ]
        }),
    )
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "detector",
    "batch_size",
    "strategy",
    "incremental",
    "accuracy",
    "n_drifts",
    "n_retrains",
    "n_predictions",
    "performance_increase",
];

fn summary_row(s: &ExperimentSummary) -> [String; 9] {
    [
        s.detector.clone(),
        s.batch_size.map_or(String::new(), |b| b.to_string()),
        s.strategy.map_or("none".into(), |s| s.to_string()),
        (s.incremental as u8).to_string(),
        fmt6(s.overall_accuracy),
        s.n_drifts.to_string(),
        s.n_retrains.to_string(),
        s.n_predictions.to_string(),
        s.performance_increase.map_or(String::new(), fmt6),
    ]
}

pub fn write_summary<'a>(
    path: impl AsRef<Path>,
    rows: impl IntoIterator<Item = &'a ExperimentSummary>,
) -> Result<()> {
    write_rows(path.as_ref(), &SUMMARY_HEADER, rows.into_iter().map(summary_row))
}

pub fn write_confusion(path: impl AsRef<Path>, summary: &ExperimentSummary) -> Result<()> {
    let k = summary.confusion.len();
    let header: Vec<String> = std::iter::once("actual".to_string())
        .chain((0..k).map(|p| format!("predicted_{p}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path.as_ref(),
        &header,
        summary.confusion.iter().enumerate().map(|(a, row)| {
            std::iter::once(a.to_string())
                .chain(row.iter().map(u64::to_string))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn write_rolling(path: impl AsRef<Path>, indices: &[u64], values: &[f64]) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["index", "rolling_mean"],
        indices
            .iter()
            .zip(values)
            .map(|(i, v)| [i.to_string(), fmt6(*v)]),
    )
}
