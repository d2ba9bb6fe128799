//! Labeled synthetic streams with controllable concept drift.
//!
//! A *concept* is a generative naive-Bayes model: class priors, one
//! category table per (categorical feature, class), and one log-normal
//! location per (numeric feature, class). Numeric features are emitted as
//! `exp(NUMERIC_LOG_OFFSET + mean + N(0, 1))`, which makes them skewed like
//! order values. A drift with magnitude `m` moves to
//! `(1 - m) * current + m * fresh` where `fresh` is an independently drawn
//! concept, so Bayes-optimal rates stay computable from [`Concept`] tables.
//!
//! # Random source
//!
//! All draws come from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`; independent sub-streams are selected with
//! `set_stream`:
//!
//! | stream        | use                                  |
//! |---------------|--------------------------------------|
//! | 1             | gradual-drift coin flips             |
//! | 2             | class labels                         |
//! | 3             | hidden-context noise                 |
//! | 16 + f        | feature `f` (schema order)           |
//! | 1024 + c      | construction of the `c`-th fresh concept |
//!
//! Categories are drawn by inverse-CDF on one `f64` uniform; Gaussians use
//! `rand_distr::StandardNormal`; category tables are Dirichlet draws via
//! `rand_distr::Gamma`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::EncoderConfig;
use crate::stream::{
    ClassLabel, Feature, FeatureSchema, Instance, LabeledInstance, Record, Target, TargetKind,
    Value,
};

pub const NUMERIC_LOG_OFFSET: f64 = 6.0;
pub const HIDDEN_FEATURE: &str = "automation";
pub const LABEL_COLUMN: &str = "label";
const HIDDEN_BASE_LEVEL: f64 = 0.3;
const HIDDEN_STEP: f64 = 0.4;
const HIDDEN_NOISE_SD: f64 = 0.1;

const STREAM_MIX: u64 = 1;
const STREAM_LABEL: u64 = 2;
const STREAM_HIDDEN: u64 = 3;
const STREAM_FEATURE_BASE: u64 = 16;
const STREAM_CONCEPT_BASE: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Sudden,
    Gradual,
    /// Returns to the concept that was active before the current one.
    Recurring,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub position: u64,
    /// Instances over which a gradual drift interpolates; 0 otherwise.
    pub width: u64,
    pub magnitude: f64,
}

impl DriftSpec {
    pub fn sudden(position: u64, magnitude: f64) -> Self {
        DriftSpec {
            kind: DriftKind::Sudden,
            position,
            width: 0,
            magnitude,
        }
    }

    pub fn gradual(position: u64, width: u64, magnitude: f64) -> Self {
        DriftSpec {
            kind: DriftKind::Gradual,
            position,
            width,
            magnitude,
        }
    }

    pub fn recurring(position: u64) -> Self {
        DriftSpec {
            kind: DriftKind::Recurring,
            position,
            width: 0,
            magnitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_instances: u64,
    pub n_categorical: usize,
    pub n_numeric: usize,
    pub n_classes: u16,
    pub categories_per_feature: u32,
    /// Dirichlet concentration of the category tables; smaller is more
    /// informative.
    pub concentration: f64,
    /// Standard deviation of the per-class numeric locations.
    pub numeric_separation: f64,
    pub drift: Vec<DriftSpec>,
    pub hidden_context: bool,
    pub seed: u64,
}

impl SynthConfig {
    /// The default benchmark profile: 70,774 instances, three classes, one
    /// sudden drift of magnitude 0.9 at index 35,000, hidden context on.
    pub fn paper_like(seed: u64) -> Self {
        SynthConfig {
            n_instances: 70_774,
            n_categorical: 4,
            n_numeric: 1,
            n_classes: 3,
            categories_per_feature: 4,
            concentration: 0.7,
            numeric_separation: 0.5,
            drift: vec![DriftSpec::sudden(35_000, 0.9)],
            hidden_context: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_instances == 0 {
            return bad("n_instances must be positive".into());
        }
        if self.n_classes < 2 {
            return bad("at least two classes are required".into());
        }
        if self.n_categorical + self.n_numeric == 0 {
            return bad("at least one predictive feature is required".into());
        }
        if self.n_categorical > 0 && self.categories_per_feature < 2 {
            return bad("categorical features need at least two categories".into());
        }
        if !(self.concentration > 0.0) || !(self.numeric_separation >= 0.0) {
            return bad("concentration must be > 0 and separation >= 0".into());
        }
        for d in &self.drift {
            if d.position >= self.n_instances {
                return bad(format!(
                    "drift position {} is not below n_instances {}",
                    d.position, self.n_instances
                ));
            }
            if !(0.0..=1.0).contains(&d.magnitude) {
                return bad(format!("drift magnitude {} is outside [0, 1]", d.magnitude));
            }
            if d.kind == DriftKind::Sudden && d.width != 0 {
                return bad("sudden drift must have width 0".into());
            }
            if d.kind == DriftKind::Gradual && d.width == 0 {
                return bad("gradual drift needs a positive width".into());
            }
        }
        Ok(())
    }

    /// Full schema of the generated stream, hidden context included.
    pub fn schema(&self) -> FeatureSchema {
        let mut features: Vec<Feature> = (0..self.n_categorical)
            .map(|i| Feature::categorical(format!("cat{i}")))
            .chain((0..self.n_numeric).map(|i| Feature::numeric(format!("num{i}"))))
            .collect();
        if self.hidden_context {
            features.push(Feature::numeric(HIDDEN_FEATURE));
        }
        FeatureSchema::new(
            features,
            LABEL_COLUMN,
            TargetKind::Class {
                n_classes: self.n_classes,
            },
        )
        .expect("generated names are unique")
    }

    /// Predictive encoding: hidden context excluded, numerics Box-Cox'd.
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            exclude: if self.hidden_context {
                vec![HIDDEN_FEATURE.to_string()]
            } else {
                Vec::new()
            },
            boxcox: (0..self.n_numeric).map(|i| format!("num{i}")).collect(),
            prefix: Default::default(),
        }
    }
}

/// Generative tables of one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub priors: Vec<f64>,
    /// `[feature][class][category]` probabilities.
    pub cat_tables: Vec<Vec<Vec<f64>>>,
    /// `[feature][class]` log-scale locations (unit variance).
    pub num_means: Vec<Vec<f64>>,
    /// Mean of the hidden-context feature under this concept.
    pub hidden_level: f64,
}

impl Concept {
    fn draw(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let k = config.n_classes as usize;
        let c = config.categories_per_feature as usize;
        let gamma = Gamma::new(config.concentration, 1.0).expect("positive shape");
        let cat_tables = (0..config.n_categorical)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        let raw: Vec<f64> = (0..c).map(|_| gamma.sample(rng).max(1e-300)).collect();
                        let z: f64 = raw.iter().sum();
                        raw.into_iter().map(|g| g / z).collect()
                    })
                    .collect()
            })
            .collect();
        let num_means = (0..config.n_numeric)
            .map(|_| {
                (0..k)
                    .map(|_| config.numeric_separation * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Concept {
            priors: vec![1.0 / k as f64; k],
            cat_tables,
            num_means,
            hidden_level: HIDDEN_BASE_LEVEL,
        }
    }

    fn lerp(&self, other: &Concept, m: f64) -> Concept {
        let mix = |a: f64, b: f64| (1.0 - m) * a + m * b;
        let target = if self.hidden_level < 0.5 {
            HIDDEN_BASE_LEVEL + HIDDEN_STEP
        } else {
            HIDDEN_BASE_LEVEL
        };
        Concept {
            priors: self.priors.iter().zip(&other.priors).map(|(&a, &b)| mix(a, b)).collect(),
            cat_tables: self
                .cat_tables
                .iter()
                .zip(&other.cat_tables)
                .map(|(fa, fb)| {
                    fa.iter()
                        .zip(fb)
                        .map(|(ca, cb)| ca.iter().zip(cb).map(|(&a, &b)| mix(a, b)).collect())
                        .collect()
                })
                .collect(),
            num_means: self
                .num_means
                .iter()
                .zip(&other.num_means)
                .map(|(fa, fb)| fa.iter().zip(fb).map(|(&a, &b)| mix(a, b)).collect())
                .collect(),
            hidden_level: mix(self.hidden_level, target),
        }
    }
}

fn sub_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// One segment of the concept schedule.
#[derive(Debug, Clone, Copy)]
struct Phase {
    start: u64,
    width: u64,
    from: usize,
    to: usize,
}

/// Deterministic drifting stream. Yields each instance with the id of the
/// concept it was drawn from.
pub struct Generator {
    config: SynthConfig,
    concepts: Vec<Concept>,
    phases: Vec<Phase>,
    next: u64,
    phase: usize,
    mix_rng: ChaCha8Rng,
    label_rng: ChaCha8Rng,
    hidden_rng: ChaCha8Rng,
    feature_rngs: Vec<ChaCha8Rng>,
}

impl Generator {
    pub fn new(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let fresh = |n: u64| Concept::draw(&config, &mut sub_stream(config.seed, STREAM_CONCEPT_BASE + n));
        let mut concepts = vec![fresh(0)];
        let mut history = vec![0usize];
        let mut phases = vec![Phase {
            start: 0,
            width: 0,
            from: 0,
            to: 0,
        }];
        let mut drifts = config.drift.clone();
        drifts.sort_by_key(|d| d.position);
        let mut n_fresh = 1;
        for d in drifts.iter().filter(|d| d.kind != DriftKind::None) {
            let current = *history.last().expect("non-empty");
            let next = match d.kind {
                DriftKind::Recurring if history.len() >= 2 => history[history.len() - 2],
                _ => {
                    let target = fresh(n_fresh);
                    n_fresh += 1;
                    concepts.push(concepts[current].lerp(&target, d.magnitude));
                    concepts.len() - 1
                }
            };
            history.push(next);
            phases.push(Phase {
                start: d.position,
                width: if d.kind == DriftKind::Gradual { d.width } else { 0 },
                from: current,
                to: next,
            });
        }
        let n_features = config.n_categorical + config.n_numeric;
        Ok(Generator {
            feature_rngs: (0..n_features as u64)
                .map(|f| sub_stream(config.seed, STREAM_FEATURE_BASE + f))
                .collect(),
            mix_rng: sub_stream(config.seed, STREAM_MIX),
            label_rng: sub_stream(config.seed, STREAM_LABEL),
            hidden_rng: sub_stream(config.seed, STREAM_HIDDEN),
            config,
            concepts,
            phases,
            next: 0,
            phase: 0,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    pub fn schema(&self) -> FeatureSchema {
        self.config.schema()
    }

    /// All concepts, indexed by concept id.
    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    fn concept_at(&mut self, index: u64) -> usize {
        while self.phase + 1 < self.phases.len() && self.phases[self.phase + 1].start <= index {
            self.phase += 1;
        }
        let p = self.phases[self.phase];
        let u: f64 = self.mix_rng.random();
        if p.width == 0 || index >= p.start + p.width {
            p.to
        } else {
            let offset = (index - p.start) as f64;
            if u < offset / p.width as f64 {
                p.to
            } else {
                p.from
            }
        }
    }
}

impl Iterator for Generator {
    type Item = (LabeledInstance, u32);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.config.n_instances {
            return None;
        }
        let index = self.next;
        self.next += 1;
        let cid = self.concept_at(index);
        let concept = &self.concepts[cid];
        let u: f64 = self.label_rng.random();
        let class = draw_categorical(&concept.priors, u);
        let mut values = Vec::with_capacity(self.feature_rngs.len() + 1);
        for (f, table) in concept.cat_tables.iter().enumerate() {
            let u: f64 = self.feature_rngs[f].random();
            values.push(Value::Cat(format!("c{}", draw_categorical(&table[class], u))));
        }
        for (j, means) in concept.num_means.iter().enumerate() {
            let rng = &mut self.feature_rngs[self.config.n_categorical + j];
            let z: f64 = rng.sample(StandardNormal);
            values.push(Value::Num((NUMERIC_LOG_OFFSET + means[class] + z).exp()));
        }
        if self.config.hidden_context {
            let z: f64 = self.hidden_rng.sample(StandardNormal);
            let level = (concept.hidden_level + HIDDEN_NOISE_SD * z).clamp(0.0, 1.0);
            values.push(Value::Num(level));
        }
        let label = ClassLabel::new(class as u16, self.config.n_classes).expect("class in range");
        Some((
            LabeledInstance {
                instance: Instance { index, values },
                label,
            },
            cid as u32,
        ))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.config.n_instances - self.next) as usize;
        (left, Some(left))
    }
}

/// Generates the whole stream: instances and per-index concept ids.
pub fn generate(config: SynthConfig) -> Result<(Vec<LabeledInstance>, Vec<u32>)> {
    Ok(Generator::new(config)?.unzip())
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Cat(s) => s.clone(),
        Value::Num(x) => x.to_string(),
    }
}

/// Writes records as CSV under `schema` (feature columns, then the label
/// column). Floats use the shortest representation that parses back to the
/// same value, so files round-trip through [`crate::stream::open_csv_stream`].
pub fn write_csv<'a, I>(schema: &FeatureSchema, records: I, path: impl AsRef<Path>) -> Result<()>
where
    I: IntoIterator<Item = &'a Record>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let header: Vec<&str> = schema
        .features()
        .iter()
        .map(|f| f.name.as_str())
        .chain(std::iter::once(schema.label_column()))
        .collect();
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in records {
        schema.validate(&r.instance)?;
        row.clear();
        row.extend(r.instance.values.iter().map(format_value));
        row.push(match r.target {
            Some(Target::Class(l)) => l.id().to_string(),
            Some(Target::Hours(h)) => h.to_string(),
            None => String::new(),
        });
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes the `(index, concept_id)` sidecar.
pub fn write_concepts(concepts: &[u32], origin: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "index,concept_id").map_err(io)?;
    for (i, c) in concepts.iter().enumerate() {
        writeln!(w, "{},{}", origin + i as u64, c).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}
