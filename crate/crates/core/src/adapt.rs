//! The retraining controller.
//!
//! Per labeled instance the controller predicts first, then feeds the 0/1
//! error to the detector, applies incremental mini-batch updates, and
//! buffers the example. On an alarm the active [`SelectionStrategy`] decides
//! which window of buffered examples the replacement model is fitted on.
//!
//! Let `t` be the index of the first instance after the one that raised the
//! alarm and `B` the batch size:
//!
//! | strategy | retraining set            | new model predicts from |
//! |----------|---------------------------|-------------------------|
//! | Last     | `[t - B, t)`              | `t`                     |
//! | Mixed    | `[t - ⌈B/2⌉, t + ⌊B/2⌋)`  | `t + ⌊B/2⌋`             |
//! | Next     | `[t, t + B)`              | `t + B`                 |
//!
//! During Mixed/Next collection the old model keeps predicting, the detector
//! is not fed and incremental updates pause. The detector is reset after
//! every retraining.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detect::{ChangeDetector, Detector, DetectorConfig};
use crate::error::{Error, Result};
use crate::nb::{NaiveBayesModel, NbConfig, TrainingExample};
use crate::preprocess::{EncodedInstance, EncoderConfig, EncoderState};
use crate::stream::{ClassLabel, FeatureSchema, Instance, LabeledInstance};

pub const DEFAULT_MINI_BATCH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Last,
    Mixed,
    Next,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 3] = [Self::Last, Self::Mixed, Self::Next];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Last => "last",
            Self::Mixed => "mixed",
            Self::Next => "next",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "last" => Ok(Self::Last),
            "mixed" => Ok(Self::Mixed),
            "next" => Ok(Self::Next),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected last, mixed or next)"
            ))),
        }
    }
}

/// Ring buffer of the most recent `capacity` training examples, oldest
/// first. Evicted slots are reused, so steady-state pushes do not allocate.
#[derive(Debug, Clone)]
pub struct RetrainBuffer {
    capacity: usize,
    items: VecDeque<TrainingExample>,
}

impl RetrainBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(RetrainBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, ex: &TrainingExample) {
        if self.items.len() == self.capacity {
            let mut slot = self.items.pop_front().expect("capacity is positive");
            slot.clone_from(ex);
            self.items.push_back(slot);
        } else {
            self.items.push_back(ex.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrainingExample> {
        self.items.iter()
    }

    /// Contents as one slice in stream order.
    pub fn as_slice(&mut self) -> &[TrainingExample] {
        self.items.make_contiguous()
    }

    /// Stream indices covered, as a half-open range.
    pub fn span(&self) -> Option<(u64, u64)> {
        Some((self.items.front()?.index, self.items.back()?.index + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Stable,
    CollectingNext { remaining: usize },
    CollectingMixed { remaining: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// `None` disables detection and retraining.
    pub detector: Option<DetectorConfig>,
    pub strategy: SelectionStrategy,
    pub batch_size: usize,
    pub incremental: bool,
    pub mini_batch: usize,
    /// Share of a Mixed batch taken from before the alarm (rounded up).
    pub mixed_pre_share: f64,
}

impl ControllerConfig {
    pub fn new(
        detector: Option<DetectorConfig>,
        strategy: SelectionStrategy,
        batch_size: usize,
        incremental: bool,
    ) -> Self {
        ControllerConfig {
            detector,
            strategy,
            batch_size,
            incremental,
            mini_batch: DEFAULT_MINI_BATCH,
            mixed_pre_share: 0.5,
        }
    }

    /// No detector, no updates.
    pub fn static_model() -> Self {
        Self::new(None, SelectionStrategy::Last, 1, false)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.incremental && self.mini_batch == 0 {
            return Err(Error::Config("mini-batch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mixed_pre_share) {
            return Err(Error::Config("mixed pre-alarm share must lie in [0, 1]".into()));
        }
        if let Some(d) = &self.detector {
            d.build()?;
        }
        Ok(())
    }

    /// `(pre, post)` alarm-relative sizes of a Mixed retraining set.
    pub fn mixed_split(&self) -> (usize, usize) {
        let pre = ((self.batch_size as f64 * self.mixed_pre_share).ceil() as usize).min(self.batch_size);
        (pre, self.batch_size - pre)
    }

    /// Instances collected after the alarm before retraining.
    pub fn retrain_delay(&self) -> usize {
        match self.strategy {
            SelectionStrategy::Last => 0,
            SelectionStrategy::Mixed => self.mixed_split().1,
            SelectionStrategy::Next => self.batch_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Drift,
    RetrainStart,
    RetrainDone,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Drift => "drift",
            EventKind::RetrainStart => "retrain_start",
            EventKind::RetrainDone => "retrain_done",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Stream index of the instance whose step emitted the event.
    pub index: u64,
    pub kind: EventKind,
    /// Detector statistic at the alarm; 0 for retrain events.
    pub statistic: f64,
}

/// One completed retraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainPlan {
    pub strategy: SelectionStrategy,
    /// First index after the alarming instance.
    pub alarm_index: u64,
    /// Half-open index range of the retraining set.
    pub start: u64,
    pub end: u64,
    pub n_examples: usize,
    /// Index of the instance whose step performed the retraining.
    pub done_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub prediction: ClassLabel,
    pub drift: bool,
    pub retrained: bool,
}

/// Per-stream controller state. Single-threaded; independent controllers
/// share nothing and can run in parallel.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    encoder: EncoderState,
    nb_config: NbConfig,
    model: NaiveBayesModel,
    detector: Option<Detector>,
    mode: Mode,
    buffer: RetrainBuffer,
    mini_batch: Vec<TrainingExample>,
    mini_len: usize,
    alarm_index: u64,
    scores: Vec<f64>,
    scratch: Option<TrainingExample>,
    frozen: bool,
    events: Vec<Event>,
    plans: Vec<RetrainPlan>,
}

/// Fits the encoder and the first model on the first `n_warmup` instances.
/// The retraining buffer starts with the last `min(B, n_warmup)` of them.
pub fn warmup(
    instances: &[LabeledInstance],
    n_warmup: usize,
    schema: &FeatureSchema,
    encoder_config: &EncoderConfig,
    config: ControllerConfig,
) -> Result<Controller> {
    if n_warmup == 0 {
        return Err(Error::Config("warm-up needs at least one instance".into()));
    }
    if instances.len() < n_warmup {
        return Err(Error::Degenerate(format!(
            "warm-up needs {n_warmup} labeled instances, stream has {}",
            instances.len()
        )));
    }
    config.validate()?;
    let warm = &instances[..n_warmup];
    let encoder = EncoderState::fit(schema, encoder_config, warm.iter().map(|li| &li.instance))?;
    let examples = warm
        .iter()
        .map(|li| {
            Ok(TrainingExample {
                index: li.instance.index,
                x: encoder.encode(&li.instance)?,
                label: li.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Controller::from_examples(encoder, &examples, config)
}

impl Controller {
    /// Builds a controller from an already fitted encoder and the encoded
    /// warm-up examples.
    pub fn from_examples(
        encoder: EncoderState,
        warmup: &[TrainingExample],
        config: ControllerConfig,
    ) -> Result<Self> {
        config.validate()?;
        let first = warmup
            .first()
            .ok_or_else(|| Error::Degenerate("empty warm-up".into()))?;
        let nb_config = NbConfig::new(
            first.label.n_classes(),
            encoder.cardinalities(),
            encoder.n_numeric(),
        );
        let model = NaiveBayesModel::fit(nb_config.clone(), warmup)?;
        let mut buffer = RetrainBuffer::new(config.batch_size)?;
        let keep = warmup.len().min(config.batch_size);
        for ex in &warmup[warmup.len() - keep..] {
            buffer.push(ex);
        }
        Ok(Controller {
            detector: config.detector.as_ref().map(|d| d.build()).transpose()?,
            scores: Vec::with_capacity(nb_config.n_classes as usize),
            mini_batch: Vec::with_capacity(config.mini_batch),
            mini_len: 0,
            nb_config,
            model,
            mode: Mode::Stable,
            buffer,
            alarm_index: 0,
            scratch: None,
            frozen: false,
            events: Vec::new(),
            plans: Vec::new(),
            encoder,
            config,
        })
    }

    /// Freezes the model: detection and incremental updates are switched off.
    pub fn make_static(mut self) -> Self {
        self.detector = None;
        self.config.detector = None;
        self.config.incremental = false;
        self.mode = Mode::Stable;
        self.mini_len = 0;
        self.frozen = true;
        self
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn encoder(&self) -> &EncoderState {
        &self.encoder
    }

    pub fn model(&self) -> &NaiveBayesModel {
        &self.model
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_static(&self) -> bool {
        self.frozen
    }

    pub fn buffer(&self) -> &RetrainBuffer {
        &self.buffer
    }

    pub fn detector(&self) -> Option<&Detector> {
        self.detector.as_ref()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    pub fn plans(&self) -> &[RetrainPlan] {
        &self.plans
    }

    /// Encodes a raw labeled instance and steps on it.
    pub fn step_labeled(&mut self, li: &LabeledInstance) -> Result<StepOutcome> {
        self.step_instance(&li.instance, li.label)
    }

    /// Encodes `instance` into a reused scratch example and steps on it.
    pub fn step_instance(&mut self, instance: &Instance, label: ClassLabel) -> Result<StepOutcome> {
        let mut ex = self.scratch.take().unwrap_or_else(|| TrainingExample {
            index: 0,
            x: EncodedInstance {
                cats: Vec::new(),
                nums: Vec::new(),
            },
            label,
        });
        ex.index = instance.index;
        ex.label = label;
        let out = self
            .encoder
            .encode_into(instance, &mut ex.x)
            .and_then(|_| self.step(&ex));
        self.scratch = Some(ex);
        out
    }

    /// Test, then train, then adapt.
    pub fn step(&mut self, ex: &TrainingExample) -> Result<StepOutcome> {
        if ex.label.n_classes() != self.nb_config.n_classes {
            return Err(Error::Domain(format!(
                "label set of size {} does not match the model's {}",
                ex.label.n_classes(),
                self.nb_config.n_classes
            )));
        }
        let prediction = self.model.predict_into(&ex.x, &mut self.scores);
        let mut out = StepOutcome {
            prediction,
            drift: false,
            retrained: false,
        };
        if self.frozen {
            return Ok(out);
        }

        let mut alarm = None;
        if self.mode == Mode::Stable {
            if let Some(det) = self.detector.as_mut() {
                let err = if prediction == ex.label { 0.0 } else { 1.0 };
                if det.observe(err)?.is_drift() {
                    alarm = Some(det.statistic());
                }
            }
            if self.config.incremental {
                if self.mini_len < self.mini_batch.len() {
                    self.mini_batch[self.mini_len].clone_from(ex);
                } else {
                    self.mini_batch.push(ex.clone());
                }
                self.mini_len += 1;
                if self.mini_len == self.config.mini_batch {
                    self.model.update(&self.mini_batch[..self.mini_len])?;
                    self.mini_len = 0;
                }
            }
        }

        self.buffer.push(ex);

        if let Some(statistic) = alarm {
            out.drift = true;
            self.mini_len = 0;
            self.alarm_index = ex.index + 1;
            self.events.push(Event {
                index: ex.index,
                kind: EventKind::Drift,
                statistic,
            });
            self.events.push(Event {
                index: ex.index,
                kind: EventKind::RetrainStart,
                statistic: 0.0,
            });
            let remaining = self.config.retrain_delay();
            if remaining == 0 {
                self.retrain(ex.index)?;
                out.retrained = true;
            } else {
                self.mode = match self.config.strategy {
                    SelectionStrategy::Next => Mode::CollectingNext { remaining },
                    _ => Mode::CollectingMixed { remaining },
                };
            }
            return Ok(out);
        }

        match &mut self.mode {
            Mode::Stable => {}
            Mode::CollectingNext { remaining } | Mode::CollectingMixed { remaining } => {
                *remaining -= 1;
                if *remaining == 0 {
                    self.retrain(ex.index)?;
                    out.retrained = true;
                }
            }
        }
        Ok(out)
    }

    fn retrain(&mut self, done_at: u64) -> Result<()> {
        let (start, end) = self.buffer.span().expect("buffer holds the current example");
        let set = self.buffer.as_slice();
        self.model = NaiveBayesModel::fit(self.nb_config.clone(), set)?;
        self.plans.push(RetrainPlan {
            strategy: self.config.strategy,
            alarm_index: self.alarm_index,
            start,
            end,
            n_examples: set.len(),
            done_at,
        });
        if let Some(det) = self.detector.as_mut() {
            det.reset();
        }
        self.mode = Mode::Stable;
        self.mini_len = 0;
        self.events.push(Event {
            index: done_at,
            kind: EventKind::RetrainDone,
            statistic: 0.0,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{Feature, TargetKind, Value};
    use proptest::prelude::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![Feature::categorical("a"), Feature::numeric("x")],
            "y",
            TargetKind::Class { n_classes: 2 },
        )
        .unwrap()
    }

    /// Features are drawn from class `look`, the label is `label`.
    fn li_as(index: u64, look: u16, label: u16) -> LabeledInstance {
        LabeledInstance {
            instance: Instance {
                index,
                values: vec![
                    Value::Cat(if look == 0 { "p" } else { "q" }.into()),
                    Value::Num(look as f64 + (index % 7) as f64 * 0.01),
                ],
            },
            label: ClassLabel::new(label, 2).unwrap(),
        }
    }

    fn li(index: u64, label: u16) -> LabeledInstance {
        li_as(index, label, label)
    }

    /// Label flips at `flip`; the detector sees every error.
    fn flip_stream(n: u64, flip: u64) -> Vec<LabeledInstance> {
        (0..n)
            .map(|i| {
                let base = (i % 2) as u16;
                li_as(i, base, if i < flip { base } else { 1 - base })
            })
            .collect()
    }

    fn sensitive_ph() -> DetectorConfig {
        DetectorConfig::PageHinkley {
            delta: 0.005,
            lambda: 5.0,
            burn_in: 5,
        }
    }

    #[test]
    fn strategy_parse_and_display() {
        for s in SelectionStrategy::ALL {
            assert_eq!(s.to_string().parse::<SelectionStrategy>().unwrap(), s);
        }
        assert_eq!(" Next ".parse::<SelectionStrategy>().unwrap(), SelectionStrategy::Next);
        assert!("first".parse::<SelectionStrategy>().is_err());
    }

    #[test]
    fn buffer_evicts_oldest_and_reuses() {
        let data = flip_stream(10, 100);
        let enc = EncoderState::fit(&schema(), &EncoderConfig::default(), data.iter().map(|l| &l.instance)).unwrap();
        let mut buf = RetrainBuffer::new(3).unwrap();
        for l in &data {
            buf.push(&TrainingExample {
                index: l.instance.index,
                x: enc.encode(&l.instance).unwrap(),
                label: l.label,
            });
            assert!(buf.len() <= 3);
        }
        assert_eq!(buf.span(), Some((7, 10)));
        let idx: Vec<u64> = buf.iter().map(|e| e.index).collect();
        assert_eq!(idx, vec![7, 8, 9]);
        assert!(RetrainBuffer::new(0).is_err());
    }

    #[test]
    fn warmup_errors_and_clamp() {
        let data = flip_stream(100, 1000);
        let cfg = ControllerConfig::new(None, SelectionStrategy::Last, 500, false);
        assert!(warmup(&data, 0, &schema(), &EncoderConfig::default(), cfg.clone()).is_err());
        assert!(warmup(&data, 101, &schema(), &EncoderConfig::default(), cfg.clone()).is_err());
        let c = warmup(&data, 100, &schema(), &EncoderConfig::default(), cfg).unwrap();
        assert_eq!(c.buffer().len(), 100);
        assert_eq!(c.buffer().span(), Some((0, 100)));
        let small = ControllerConfig::new(None, SelectionStrategy::Last, 30, false);
        let c = warmup(&data, 100, &schema(), &EncoderConfig::default(), small).unwrap();
        assert_eq!(c.buffer().span(), Some((70, 100)));
    }

    #[test]
    fn mixed_split_rounds_pre_up() {
        let mut cfg = ControllerConfig::new(None, SelectionStrategy::Mixed, 501, false);
        assert_eq!(cfg.mixed_split(), (251, 250));
        assert_eq!(cfg.retrain_delay(), 250);
        cfg.batch_size = 500;
        assert_eq!(cfg.mixed_split(), (250, 250));
        cfg.mixed_pre_share = 1.0;
        assert_eq!(cfg.mixed_split(), (500, 0));
    }

    fn run_to_first_retrain(strategy: SelectionStrategy, b: usize) -> (Controller, Vec<(u64, StepOutcome)>) {
        let data = flip_stream(6000, 3000);
        let cfg = ControllerConfig::new(Some(sensitive_ph()), strategy, b, false);
        let mut c = warmup(&data, 1000, &schema(), &EncoderConfig::default(), cfg).unwrap();
        let mut outs = Vec::new();
        for l in &data[1000..] {
            let o = c.step_labeled(l).unwrap();
            outs.push((l.instance.index, o));
            if o.retrained {
                break;
            }
        }
        (c, outs)
    }

    #[test]
    fn scripted_window_algebra() {
        let b = 500;
        for strategy in SelectionStrategy::ALL {
            let (c, outs) = run_to_first_retrain(strategy, b);
            let alarm = outs.iter().find(|(_, o)| o.drift).expect("flip is detected").0;
            let done = outs.iter().find(|(_, o)| o.retrained).unwrap().0;
            let plan = c.plans()[0];
            let t = alarm + 1;
            assert_eq!(plan.alarm_index, t);
            assert_eq!(plan.done_at, done);
            assert_eq!(plan.n_examples, b);
            match strategy {
                SelectionStrategy::Last => {
                    assert_eq!((plan.start, plan.end), (t - 500, t));
                    assert_eq!(done, alarm);
                }
                SelectionStrategy::Mixed => {
                    assert_eq!((plan.start, plan.end), (t - 250, t + 250));
                    assert_eq!(done, alarm + 250);
                }
                SelectionStrategy::Next => {
                    assert_eq!((plan.start, plan.end), (t, t + 500));
                    assert_eq!(done, alarm + 500);
                }
            }
            // no second alarm while collecting
            assert_eq!(outs.iter().filter(|(_, o)| o.drift).count(), 1);
            let kinds: Vec<EventKind> = c.events().iter().map(|e| e.kind).collect();
            assert_eq!(kinds, [EventKind::Drift, EventKind::RetrainStart, EventKind::RetrainDone]);
        }
    }

    #[test]
    fn retrained_model_learns_new_concept() {
        let (mut c, _) = run_to_first_retrain(SelectionStrategy::Next, 50);
        let probe = flip_stream(6000, 3000);
        let correct = probe[5000..5100]
            .iter()
            .filter(|l| c.step_labeled(l).unwrap().prediction == l.label)
            .count();
        assert_eq!(correct, 100);
    }

    #[test]
    fn early_drift_uses_what_is_buffered() {
        let data = flip_stream(400, 30);
        let cfg = ControllerConfig::new(Some(sensitive_ph()), SelectionStrategy::Last, 5000, false);
        let mut c = warmup(&data, 20, &schema(), &EncoderConfig::default(), cfg).unwrap();
        for l in &data[20..] {
            if c.step_labeled(l).unwrap().retrained {
                break;
            }
        }
        let plan = c.plans()[0];
        assert_eq!(plan.start, 0);
        assert_eq!(plan.n_examples as u64, plan.end);
    }

    #[test]
    fn stream_end_mid_collection_keeps_old_model() {
        let data = flip_stream(3300, 3000);
        let cfg = ControllerConfig::new(Some(sensitive_ph()), SelectionStrategy::Next, 5000, false);
        let mut c = warmup(&data, 1000, &schema(), &EncoderConfig::default(), cfg).unwrap();
        let before = c.model().clone();
        let mut drifted = false;
        for l in &data[1000..] {
            let o = c.step_labeled(l).unwrap();
            drifted |= o.drift;
            assert!(!o.retrained);
        }
        assert!(drifted);
        assert!(matches!(c.mode(), Mode::CollectingNext { .. }));
        assert_eq!(c.model(), &before);
        assert!(c.plans().is_empty());
    }

    #[test]
    fn static_never_changes() {
        let data = flip_stream(4000, 2000);
        let cfg = ControllerConfig::new(Some(sensitive_ph()), SelectionStrategy::Last, 100, true);
        let c = warmup(&data, 1000, &schema(), &EncoderConfig::default(), cfg).unwrap();
        let mut c = c.make_static();
        let before = c.model().clone();
        for l in &data[1000..] {
            let o = c.step_labeled(l).unwrap();
            assert!(!o.drift && !o.retrained);
        }
        assert_eq!(c.model(), &before);
        assert!(c.events().is_empty());
    }

    #[test]
    fn incremental_updates_every_mini_batch() {
        let data = flip_stream(1100, 5000);
        let cfg = ControllerConfig::new(None, SelectionStrategy::Last, 100, true);
        let mut c = warmup(&data, 1000, &schema(), &EncoderConfig::default(), cfg).unwrap();
        for (i, l) in data[1000..].iter().enumerate() {
            c.step_labeled(l).unwrap();
            assert_eq!(c.model().n_trained(), 1000 + ((i as u64 + 1) / 10) * 10);
        }
    }

    #[test]
    fn wrong_label_set_rejected() {
        let data = flip_stream(50, 5000);
        let cfg = ControllerConfig::new(None, SelectionStrategy::Last, 10, false);
        let mut c = warmup(&data, 50, &schema(), &EncoderConfig::default(), cfg).unwrap();
        let mut bad = li(50, 0);
        bad.label = ClassLabel::new(0, 3).unwrap();
        assert!(c.step_labeled(&bad).is_err());
    }

    /// Stream that alarms exactly where asked: every prediction is wrong on
    /// scripted indices, so a low-threshold detector fires there.
    fn alarm_stream(n: u64, at: u64) -> Vec<LabeledInstance> {
        flip_stream(n, at)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn window_contracts(
            drift in 5_500u64..9_000,
            b in prop::sample::select(vec![500usize, 1000, 2000, 5000]),
            strategy in prop::sample::select(SelectionStrategy::ALL.to_vec()),
        ) {
            let data = alarm_stream(drift + 5_200, drift);
            let cfg = ControllerConfig::new(Some(sensitive_ph()), strategy, b, false);
            let mut c = warmup(&data, 5_000, &schema(), &EncoderConfig::default(), cfg).unwrap();
            let mut alarm = None;
            let mut done = None;
            for l in &data[5_000..] {
                let o = c.step_labeled(l).unwrap();
                if o.drift && alarm.is_none() { alarm = Some(l.instance.index); }
                if o.retrained { done = Some(l.instance.index); break; }
            }
            let alarm = alarm.unwrap();
            let done = done.unwrap();
            let p = c.plans()[0];
            let t = alarm + 1;
            let b64 = b as u64;
            match strategy {
                SelectionStrategy::Last => {
                    prop_assert!(p.end <= t);
                    prop_assert_eq!(p.start, t - b64);
                    prop_assert_eq!(done - alarm, 0);
                }
                SelectionStrategy::Next => {
                    prop_assert!(p.start >= t);
                    prop_assert_eq!(p.end, t + b64);
                    prop_assert_eq!(done - alarm, b64);
                }
                SelectionStrategy::Mixed => {
                    prop_assert_eq!(t - p.start, b64.div_ceil(2));
                    prop_assert_eq!(p.end - t, b64 / 2);
                    prop_assert_eq!(done - alarm, b64 / 2);
                }
            }
            prop_assert_eq!(p.end - p.start, b64);
        }

        #[test]
        fn replay_is_identical(flip in 1_200u64..2_000, strategy in prop::sample::select(SelectionStrategy::ALL.to_vec())) {
            let data = flip_stream(3_000, flip);
            let run = || {
                let cfg = ControllerConfig::new(Some(sensitive_ph()), strategy, 200, true);
                let mut c = warmup(&data, 1_000, &schema(), &EncoderConfig::default(), cfg).unwrap();
                let outs: Vec<StepOutcome> = data[1_000..].iter().map(|l| c.step_labeled(l).unwrap()).collect();
                (outs, c.events().to_vec())
            };
            prop_assert_eq!(run(), run());
        }
    }
}
