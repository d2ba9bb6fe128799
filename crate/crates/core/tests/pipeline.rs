//! End-to-end runs over generated streams: CSV round trip, prequential
//! bookkeeping and the qualitative effect of drift handling.

use driftstream::adapt::SelectionStrategy;
use driftstream::detect::DetectorConfig;
use driftstream::eval::{
    baselines, rolling_mean, run_experiment, CsvSource, ExperimentConfig, ReplayableSource,
};
use driftstream::stream::{Record, Value};
use driftstream::synth::{generate, write_csv, DriftSpec, SynthConfig, HIDDEN_FEATURE};

fn small(seed: u64, drift: Vec<DriftSpec>) -> SynthConfig {
    SynthConfig {
        n_instances: 12_000,
        drift,
        ..SynthConfig::paper_like(seed)
    }
}

fn records(cfg: &SynthConfig) -> Vec<Record> {
    generate(cfg.clone()).unwrap().0.into_iter().map(Record::from).collect()
}

fn config(cfg: &SynthConfig) -> ExperimentConfig {
    ExperimentConfig {
        encoder: cfg.encoder_config(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn hidden_context_steps_at_the_drift() {
    let cfg = SynthConfig::paper_like(42);
    let recs = records(&cfg);
    let pos = cfg.schema().position(HIDDEN_FEATURE).unwrap();
    let series: Vec<f64> = recs
        .iter()
        .map(|r| match &r.instance.values[pos] {
            Value::Num(v) => *v,
            Value::Cat(_) => unreachable!(),
        })
        .collect();
    let rolled = rolling_mean(&series, 1_000).unwrap();
    let drift = 35_000;
    // Plateaus at the generator's two levels, away from the transition.
    let low = rolled[drift - 1_001];
    let high = rolled[drift + 1_000];
    assert!((low - 0.3).abs() < 0.02, "low plateau {low}");
    assert!((high - 0.66).abs() < 0.02, "high plateau {high}");
    // The step itself lies within one window after the drift index.
    let mid = (low + high) / 2.0;
    let crossing = rolled.iter().position(|&v| v > mid).unwrap();
    assert!(crossing.abs_diff(drift) <= 1_000, "crossing at {crossing}");
}

#[test]
fn csv_replay_matches_memory_run() {
    let cfg = small(3, vec![DriftSpec::sudden(6_000, 0.9)]);
    let in_memory = records(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.csv");
    write_csv(&cfg.schema(), &in_memory, &path).unwrap();
    let source = CsvSource {
        path,
        schema: cfg.schema(),
    };
    let from_file = source.replay().unwrap();
    assert_eq!(from_file, in_memory);

    let exp = ExperimentConfig {
        detector: Some(DetectorConfig::adwin(0.001)),
        incremental: true,
        ..config(&cfg)
    };
    let a = run_experiment(&from_file, &cfg.schema(), &exp).unwrap();
    let b = run_experiment(&in_memory, &cfg.schema(), &exp).unwrap();
    assert_eq!(a, b);
}

#[test]
fn prediction_count_excludes_warmup() {
    let cfg = small(4, vec![]);
    let recs = records(&cfg);
    let exp = config(&cfg);
    let r = run_experiment(&recs, &cfg.schema(), &exp).unwrap();
    assert_eq!(r.summary.n_predictions as usize, recs.len() - exp.warmup);
    assert_eq!(r.records.len(), recs.len() - exp.warmup);
    assert_eq!(r.records[0].index, exp.warmup as u64);
    let confusion_total: u64 = r.summary.confusion.iter().flatten().sum();
    assert_eq!(confusion_total, r.summary.n_predictions);
}

#[test]
fn without_drift_updates_change_little() {
    let cfg = small(5, vec![]);
    let recs = records(&cfg);
    let fixed = run_experiment(&recs, &cfg.schema(), &config(&cfg)).unwrap();
    let incr = run_experiment(
        &recs,
        &cfg.schema(),
        &ExperimentConfig {
            incremental: true,
            ..config(&cfg)
        },
    )
    .unwrap();
    let gap = (fixed.summary.overall_accuracy - incr.summary.overall_accuracy).abs();
    assert!(gap < 0.05, "static vs incremental gap {gap}");
}

#[test]
fn drift_handling_beats_static_model() {
    let cfg = small(6, vec![DriftSpec::sudden(5_000, 0.9)]);
    let recs = records(&cfg);
    let rows = baselines(&recs, &cfg.schema(), DetectorConfig::page_hinkley(0.6), &config(&cfg)).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].performance_increase, Some(0.0));
    assert!(rows[3].overall_accuracy > rows[0].overall_accuracy + 0.05);
    assert!(rows[3].n_retrains > 0);
    assert_eq!(rows[3].strategy, Some(SelectionStrategy::Last));
}

#[test]
fn reruns_are_identical() {
    let cfg = small(8, vec![DriftSpec::gradual(4_000, 2_000, 0.8)]);
    let exp = ExperimentConfig {
        detector: Some(DetectorConfig::page_hinkley(0.6)),
        strategy: Some(SelectionStrategy::Mixed),
        batch_size: 1_000,
        incremental: true,
        ..config(&cfg)
    };
    let a = run_experiment(&records(&cfg), &cfg.schema(), &exp).unwrap();
    let b = run_experiment(&records(&cfg), &cfg.schema(), &exp).unwrap();
    assert_eq!(a, b);
}
