//! Command-line front end: `run`, `generate`, `gridsearch`, `matrix` and
//! `inspect`. Exit codes: 0 success, 2 configuration or usage error, 3 data
//! error.

pub mod args;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

use driftstream::adapt::SelectionStrategy;
use driftstream::detect::DetectorConfig;
use driftstream::eval::{
    self, CsvSource, ExperimentConfig, ExperimentSummary, ReplayableSource, SynthSource,
};
use driftstream::preprocess::{BinMode, EncoderConfig};
use driftstream::stream::{Feature, FeatureKind, FeatureSchema, Record, TargetKind};
use driftstream::synth::{self, DriftKind, SynthConfig};

use args::{
    Cli, Command, DetectorArg, DetectorArgs, DriftKindArg, EvalArgs, GenerateArgs, GridArgs,
    InspectArgs, MatrixArgs, RunArgs, SourceArgs, SynthProfile, TargetArg,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] driftstream::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::find_config_flag(&args) {
        Some(path) => {
            let path = PathBuf::from(path);
            let pairs = fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))
                .and_then(|text| config::parse_config(&text, &path));
            match pairs {
                Ok(pairs) => config::merge(args, &pairs),
                Err(e) => {
                    eprintln!("error: {e}");
                    return e.exit_code();
                }
            }
        }
        None => args,
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(cli, a),
        Command::Generate(a) => cmd_generate(cli, a),
        Command::Gridsearch(a) => cmd_gridsearch(cli, a),
        Command::Matrix(a) => cmd_matrix(cli, a),
        Command::Inspect(a) => cmd_inspect(cli, a),
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Usage(format!("output directory {} is not writable: {e}", dir.display()))
    })
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(driftstream::Error::from)? + "\n";
    fs::write(&path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_resolved(cli: &Cli, command: &str, body: serde_json::Value) -> Result<()> {
    prepare_out(&cli.out)?;
    write_json(
        &cli.out,
        "resolved-config.json",
        &json!({
            "command": command,
            "seed": cli.seed,
            "out": cli.out,
            "settings": body,
        }),
    )
}

fn parse_bins(spec: &str) -> Result<BinMode> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("tertile") {
        return Ok(BinMode::Tertile);
    }
    let Some(days) = spec.strip_prefix("days:") else {
        return usage(format!("unknown bins `{spec}` (expected tertile or days:E1,E2,...)"));
    };
    let edges = days
        .split(',')
        .map(|d| d.trim().parse::<u32>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("bad day edge in `{spec}`: {e}")))?;
    Ok(BinMode::FixedDays(edges))
}

fn parse_prefixes(items: &[String]) -> Result<BTreeMap<String, usize>> {
    items
        .iter()
        .map(|item| {
            let (name, len) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--truncate expects feature=length, got `{item}`")))?;
            let len = len
                .trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("bad prefix length in `{item}`: {e}")))?;
            Ok((name.trim().to_string(), len))
        })
        .collect()
}

fn parse_strategy(s: &str) -> Result<SelectionStrategy> {
    Ok(s.parse::<SelectionStrategy>()?)
}

/// Resolved stream source: schema, encoder defaults and a replayable reader.
struct Source {
    source: Box<dyn ReplayableSource>,
    encoder: EncoderConfig,
    bins: BinMode,
    describe: serde_json::Value,
}

fn synth_config(profile: SynthProfile, seed: u64) -> SynthConfig {
    match profile {
        SynthProfile::PaperLike => SynthConfig::paper_like(seed),
    }
}

fn resolve_source(cli: &Cli, a: &SourceArgs) -> Result<Source> {
    let bins = parse_bins(&a.bins)?;
    let mut encoder = EncoderConfig {
        exclude: a.exclude.clone(),
        boxcox: a.boxcox.clone(),
        prefix: parse_prefixes(&a.truncate)?,
    };
    match (&a.input, a.synth) {
        (Some(_), Some(_)) => usage("give either --input or --synth, not both"),
        (None, None) => usage("no stream given: use --input FILE or --synth paper-like"),
        (None, Some(profile)) => {
            let cfg = synth_config(profile, cli.seed);
            let defaults = cfg.encoder_config();
            if encoder.exclude.is_empty() {
                encoder.exclude = defaults.exclude;
            }
            if encoder.boxcox.is_empty() {
                encoder.boxcox = defaults.boxcox;
            }
            let describe = json!({ "synth": "paper-like", "generator": cfg });
            Ok(Source {
                source: Box::new(SynthSource::new(cfg)?),
                encoder,
                bins,
                describe,
            })
        }
        (Some(path), None) => {
            if a.categorical.is_empty() && a.numeric.is_empty() {
                return usage("--input needs --categorical and/or --numeric feature columns");
            }
            let features: Vec<Feature> = a
                .categorical
                .iter()
                .map(Feature::categorical)
                .chain(a.numeric.iter().map(Feature::numeric))
                .collect();
            let target = match a.target {
                TargetArg::Class => TargetKind::Class { n_classes: a.classes },
                TargetArg::Hours => TargetKind::Hours,
            };
            let schema = FeatureSchema::new(features, a.label.clone(), target)
                .map_err(|e| CliError::Usage(e.to_string()))?
                .with_index_origin(a.index_origin);
            let describe = json!({
                "input": path,
                "categorical": a.categorical,
                "numeric": a.numeric,
                "label": a.label,
                "target": format!("{:?}", a.target).to_lowercase(),
                "classes": a.classes,
                "index_origin": a.index_origin,
            });
            Ok(Source {
                source: Box::new(CsvSource {
                    path: path.clone(),
                    schema,
                }),
                encoder,
                bins,
                describe,
            })
        }
    }
}

fn detector_config(kind: DetectorArg, p: &DetectorArgs) -> Option<DetectorConfig> {
    match kind {
        DetectorArg::None => None,
        DetectorArg::PageHinkley => Some(DetectorConfig::PageHinkley {
            delta: p.ph_delta,
            lambda: p.lambda,
            burn_in: p.burn_in,
        }),
        DetectorArg::Adwin => Some(DetectorConfig::adwin(p.delta)),
    }
}

fn base_config(src: &Source, eval: &EvalArgs) -> ExperimentConfig {
    ExperimentConfig {
        warmup: eval.warmup,
        window: eval.window,
        mini_batch: eval.mini_batch,
        encoder: src.encoder.clone(),
        bins: src.bins.clone(),
        ..Default::default()
    }
}

fn report(cli: &Cli, line: String) {
    if !cli.quiet {
        println!("{line}");
    }
}

fn summary_line(s: &ExperimentSummary) -> String {
    format!(
        "detector={} strategy={} batch_size={} incremental={} accuracy={:.6} predictions={} drifts={} retrains={}",
        s.detector,
        s.strategy.map_or("none".to_string(), |x| x.to_string()),
        s.batch_size.map_or("-".to_string(), |b| b.to_string()),
        s.incremental,
        s.overall_accuracy,
        s.n_predictions,
        s.n_drifts,
        s.n_retrains
    )
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> Result<()> {
    let src = resolve_source(cli, &a.source)?;
    let config = ExperimentConfig {
        detector: detector_config(a.detector, &a.params),
        strategy: a.strategy.as_deref().map(parse_strategy).transpose()?,
        batch_size: a.batch_size,
        incremental: a.incremental,
        ..base_config(&src, &a.eval)
    };
    config.validate()?;
    write_resolved(cli, "run", json!({ "source": src.describe, "experiment": config }))?;
    let records = src.source.replay()?;
    let result = eval::run_experiment(&records, src.source.schema(), &config)?;
    let out = &cli.out;
    eval::write_records(out.join("records.csv"), &result.records)?;
    eval::write_summary(out.join("summary.csv"), [&result.summary])?;
    eval::write_events(out.join("events.csv"), &result.events)?;
    eval::write_curves(out.join("curves.csv"), &result.records)?;
    eval::write_confusion(out.join("confusion.csv"), &result.summary)?;
    report(cli, summary_line(&result.summary));
    Ok(())
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let mut cfg = synth_config(a.profile, cli.seed);
    if let Some(n) = a.n {
        cfg.n_instances = n;
    }
    if let Some(v) = a.n_categorical {
        cfg.n_categorical = v;
    }
    if let Some(v) = a.n_numeric {
        cfg.n_numeric = v;
    }
    if let Some(v) = a.n_classes {
        cfg.n_classes = v;
    }
    if a.no_hidden {
        cfg.hidden_context = false;
    }
    if let Some(d) = cfg.drift.first_mut() {
        if let Some(at) = a.drift_at {
            d.position = at;
        }
        if let Some(kind) = a.drift_kind {
            d.kind = match kind {
                DriftKindArg::Sudden => DriftKind::Sudden,
                DriftKindArg::Gradual => DriftKind::Gradual,
                DriftKindArg::Recurring => DriftKind::Recurring,
                DriftKindArg::None => DriftKind::None,
            };
        }
        if let Some(w) = a.drift_width {
            d.width = w;
        }
        if let Some(m) = a.magnitude {
            d.magnitude = m;
        }
    }
    cfg.validate()?;
    write_resolved(cli, "generate", json!({ "generator": cfg }))?;
    let schema = cfg.schema();
    let (instances, concepts) = synth::generate(cfg)?;
    let records: Vec<Record> = instances.into_iter().map(Record::from).collect();
    synth::write_csv(&schema, &records, cli.out.join("stream.csv"))?;
    synth::write_concepts(&concepts, 0, cli.out.join("concepts.csv"))?;
    report(
        cli,
        format!("wrote {} instances to {}", records.len(), cli.out.join("stream.csv").display()),
    );
    Ok(())
}

fn parse_grid(list: &str, flag: &str) -> Result<Vec<f64>> {
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad --{flag} value `{s}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return usage(format!("--{flag} grid is empty"));
    }
    Ok(values)
}

fn cmd_gridsearch(cli: &Cli, a: &GridArgs) -> Result<()> {
    let src = resolve_source(cli, &a.source)?;
    let (param, grid): (&str, Vec<DetectorConfig>) = match a.detector {
        DetectorArg::None => return usage("grid search needs --detector page-hinkley or adwin"),
        DetectorArg::PageHinkley => (
            "lambda",
            parse_grid(a.lambda.as_deref().unwrap_or("0.6"), "lambda")?
                .into_iter()
                .map(|lambda| DetectorConfig::PageHinkley {
                    delta: a.ph_delta,
                    lambda,
                    burn_in: a.burn_in,
                })
                .collect(),
        ),
        DetectorArg::Adwin => (
            "delta",
            parse_grid(a.delta.as_deref().unwrap_or("0.001"), "delta")?
                .into_iter()
                .map(DetectorConfig::adwin)
                .collect(),
        ),
    };
    let base = ExperimentConfig {
        strategy: a.strategy.as_deref().map(parse_strategy).transpose()?,
        batch_size: a.batch_size,
        incremental: a.incremental,
        ..base_config(&src, &a.eval)
    };
    for d in &grid {
        ExperimentConfig {
            detector: Some(*d),
            ..base.clone()
        }
        .validate()?;
    }
    write_resolved(
        cli,
        "gridsearch",
        json!({ "source": src.describe, "prefix": a.prefix, "grid": grid, "experiment": base }),
    )?;
    let mut records = src.source.replay()?;
    records.truncate(a.prefix);
    let result = eval::grid_search(&records, src.source.schema(), &grid, &base)?;

    let path = cli.out.join("grid.csv");
    let mut w = String::from("detector,parameter,value,accuracy,n_drifts,n_retrains,n_predictions\n");
    for row in &result.table {
        let s = &row.summary;
        w.push_str(&format!(
            "{},{},{},{:.6},{},{},{}\n",
            row.detector.name(),
            param,
            row.detector.key_param(),
            s.overall_accuracy,
            s.n_drifts,
            s.n_retrains,
            s.n_predictions
        ));
    }
    fs::write(&path, w).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    let best = result.best_row();
    write_json(
        &cli.out,
        "best.json",
        &json!({
            "detector": best.detector,
            "parameter": param,
            "value": best.detector.key_param(),
            "accuracy": best.summary.overall_accuracy,
            "prefix": records.len(),
        }),
    )?;
    report(
        cli,
        format!(
            "best {}={} accuracy={:.6} ({} grid points)",
            param,
            best.detector.key_param(),
            best.summary.overall_accuracy,
            result.table.len()
        ),
    );
    Ok(())
}

fn cmd_matrix(cli: &Cli, a: &MatrixArgs) -> Result<()> {
    let src = resolve_source(cli, &a.source)?;
    let detectors = a
        .detectors
        .iter()
        .map(|&d| {
            detector_config(d, &a.params)
                .ok_or_else(|| CliError::Usage("matrix detectors must be page-hinkley or adwin".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let strategies = a
        .strategies
        .iter()
        .map(|s| parse_strategy(s))
        .collect::<Result<Vec<_>>>()?;
    if detectors.is_empty() || strategies.is_empty() || a.batch_sizes.is_empty() {
        return usage("matrix axes must be non-empty");
    }
    let workers = a.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    if workers == 0 {
        return usage("--workers must be at least 1");
    }
    let base = ExperimentConfig {
        incremental: !a.no_incremental,
        ..base_config(&src, &a.eval)
    };
    for &batch_size in &a.batch_sizes {
        ExperimentConfig {
            detector: Some(detectors[0]),
            batch_size,
            ..base.clone()
        }
        .validate()?;
    }
    write_resolved(
        cli,
        "matrix",
        json!({
            "source": src.describe,
            "detectors": detectors,
            "batch_sizes": a.batch_sizes,
            "strategies": strategies,
            "experiment": base,
        }),
    )?;
    let records = src.source.replay()?;
    let baseline_base = ExperimentConfig {
        batch_size: a.batch_sizes[0],
        strategy: Some(SelectionStrategy::Last),
        ..base.clone()
    };
    let rows = eval::baselines(&records, src.source.schema(), detectors[0], &baseline_base)?;
    drop(records);
    let static_acc = rows[0].overall_accuracy;
    let cells = eval::experiment_matrix(
        src.source.as_ref(),
        &detectors,
        &a.batch_sizes,
        &strategies,
        &base,
        workers,
    )?;
    let summaries: Vec<ExperimentSummary> = rows
        .into_iter()
        .chain(cells.into_iter().map(|c| c.summary.with_baseline(static_acc)))
        .collect();
    eval::write_summary(cli.out.join("summary.csv"), &summaries)?;
    for s in &summaries {
        report(cli, summary_line(s));
    }
    Ok(())
}

fn cmd_inspect(cli: &Cli, a: &InspectArgs) -> Result<()> {
    if a.window == 0 {
        return usage("--window must be at least 1");
    }
    let src = resolve_source(cli, &a.source)?;
    let schema = src.source.schema();
    let pos = schema
        .position(&a.feature)
        .ok_or_else(|| CliError::Usage(format!("unknown feature `{}`", a.feature)))?;
    if schema.features()[pos].kind != FeatureKind::Numeric {
        return usage(format!("feature `{}` is not numeric", a.feature));
    }
    write_resolved(
        cli,
        "inspect",
        json!({ "source": src.describe, "feature": a.feature, "window": a.window }),
    )?;
    let records = src.source.replay()?;
    let values: Vec<f64> = records
        .iter()
        .map(|r| r.instance.values[pos].as_num().expect("numeric column"))
        .collect();
    let indices: Vec<u64> = records.iter().map(|r| r.instance.index).collect();
    let rolled = eval::rolling_mean(&values, a.window)?;
    eval::write_rolling(cli.out.join("rolling.csv"), &indices, &rolled)?;
    report(
        cli,
        format!("wrote {} rolling means of `{}`", rolled.len(), a.feature),
    );
    Ok(())
}
