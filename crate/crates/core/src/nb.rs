//! Incremental multi-class naive Bayes over category indices and
//! (transformed) numeric features.
//!
//! Categorical likelihoods are Laplace-smoothed multinomials per feature;
//! numeric likelihoods are Gaussians whose moments come from Welford
//! accumulators. Everything is scored in log space. Because all state is
//! counts and append-only accumulators, `update(fit(a), b)` equals
//! `fit(a ++ b)` exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::EncodedInstance;
use crate::stream::ClassLabel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Streaming mean and variance (Welford). Sequential pushes of the same
/// values always produce bit-identical state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Sample variance, `None` below two observations.
    pub fn sample_variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }

    /// Sample variance floored at `floor`; `floor` itself below two observations.
    pub fn floored_variance(&self, floor: f64) -> f64 {
        self.sample_variance().map_or(floor, |v| v.max(floor))
    }
}

/// One encoded training example with its stream position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub index: u64,
    pub x: EncodedInstance,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbConfig {
    pub n_classes: u16,
    /// Category count of each categorical feature, unseen index included.
    pub cardinalities: Vec<u32>,
    pub n_numeric: usize,
    pub smoothing_alpha: f64,
    pub var_floor: f64,
}

impl NbConfig {
    pub fn new(n_classes: u16, cardinalities: Vec<u32>, n_numeric: usize) -> Self {
        NbConfig {
            n_classes,
            cardinalities,
            n_numeric,
            smoothing_alpha: 1.0,
            var_floor: 1e-9,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_classes < 1 {
            return Err(Error::Config("naive Bayes needs at least one class".into()));
        }
        if !(self.smoothing_alpha > 0.0) || !(self.var_floor > 0.0) {
            return Err(Error::Config("smoothing alpha and variance floor must be positive".into()));
        }
        if self.cardinalities.contains(&0) {
            return Err(Error::Config("categorical features need at least one category".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    version: u32,
    config: NbConfig,
    class_counts: Vec<u64>,
    /// Per categorical feature, a `n_classes x cardinality` table.
    cat_counts: Vec<Vec<u64>>,
    /// Per numeric feature, one accumulator per class.
    gauss: Vec<Vec<Welford>>,
    /// Per numeric feature, all classes pooled.
    pooled: Vec<Welford>,
}

impl NaiveBayesModel {
    pub fn new(config: NbConfig) -> Result<Self> {
        config.validate()?;
        let k = config.n_classes as usize;
        Ok(NaiveBayesModel {
            version: MODEL_FORMAT_VERSION,
            class_counts: vec![0; k],
            cat_counts: config
                .cardinalities
                .iter()
                .map(|&c| vec![0; k * c as usize])
                .collect(),
            gauss: vec![vec![Welford::default(); k]; config.n_numeric],
            pooled: vec![Welford::default(); config.n_numeric],
            config,
        })
    }

    /// Trains a fresh model on `examples`.
    pub fn fit(config: NbConfig, examples: &[TrainingExample]) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Degenerate("cannot fit naive Bayes on an empty list".into()));
        }
        let mut model = Self::new(config)?;
        model.update(examples)?;
        Ok(model)
    }

    /// Adds `batch` to the counts and accumulators. The batch is validated
    /// up front; on error the model is unchanged.
    pub fn update(&mut self, batch: &[TrainingExample]) -> Result<()> {
        for ex in batch {
            self.check(ex)?;
        }
        for ex in batch {
            self.learn_one(ex);
        }
        Ok(())
    }

    fn check(&self, ex: &TrainingExample) -> Result<()> {
        if ex.label.id() >= self.config.n_classes {
            return Err(Error::Domain(format!(
                "label {} out of range for {} classes (index {})",
                ex.label.id(),
                self.config.n_classes,
                ex.index
            )));
        }
        if ex.x.cats.len() != self.config.cardinalities.len()
            || ex.x.nums.len() != self.config.n_numeric
        {
            return Err(Error::Schema(format!(
                "encoded instance {} does not match the model layout",
                ex.index
            )));
        }
        for (&c, &card) in ex.x.cats.iter().zip(&self.config.cardinalities) {
            if c >= card {
                return Err(Error::Domain(format!(
                    "category index {c} out of range {card} (index {})",
                    ex.index
                )));
            }
        }
        if ex.x.nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite feature at index {}", ex.index)));
        }
        Ok(())
    }

    fn learn_one(&mut self, ex: &TrainingExample) {
        let class = ex.label.id() as usize;
        self.class_counts[class] += 1;
        for ((table, &card), &c) in self
            .cat_counts
            .iter_mut()
            .zip(&self.config.cardinalities)
            .zip(&ex.x.cats)
        {
            table[class * card as usize + c as usize] += 1;
        }
        for ((per_class, pooled), &v) in self.gauss.iter_mut().zip(&mut self.pooled).zip(&ex.x.nums) {
            per_class[class].push(v);
            pooled.push(v);
        }
    }

    pub fn config(&self) -> &NbConfig {
        &self.config
    }

    pub fn n_trained(&self) -> u64 {
        self.class_counts.iter().sum()
    }

    pub fn class_counts(&self) -> &[u64] {
        &self.class_counts
    }

    pub fn category_count(&self, feature: usize, class: u16, category: u32) -> u64 {
        let card = self.config.cardinalities[feature] as usize;
        self.cat_counts[feature][class as usize * card + category as usize]
    }

    pub fn gaussian(&self, feature: usize, class: u16) -> Welford {
        self.gauss[feature][class as usize]
    }

    /// Writes one log-score per class into `scores` and returns the argmax.
    ///
    /// Classes without training data keep their smoothed prior but are only
    /// predicted when no class has data. Ties go to the lowest class id.
    pub fn predict_into(&self, x: &EncodedInstance, scores: &mut Vec<f64>) -> ClassLabel {
        let k = self.config.n_classes as usize;
        let alpha = self.config.smoothing_alpha;
        let floor = self.config.var_floor;
        let total = self.n_trained() as f64;
        scores.clear();
        for class in 0..k {
            let n_c = self.class_counts[class] as f64;
            let mut s = ((n_c + alpha) / (total + alpha * k as f64)).ln();
            for ((table, &card), &c) in self
                .cat_counts
                .iter()
                .zip(&self.config.cardinalities)
                .zip(&x.cats)
            {
                let c = c.min(card - 1) as usize;
                let count = table[class * card as usize + c] as f64;
                s += ((count + alpha) / (n_c + alpha * card as f64)).ln();
            }
            for ((per_class, pooled), &v) in self.gauss.iter().zip(&self.pooled).zip(&x.nums) {
                let acc = if n_c > 0.0 { &per_class[class] } else { pooled };
                s += gaussian_log_density(v, acc.mean, acc.floored_variance(floor));
            }
            scores.push(s);
        }
        let any_trained = self.class_counts.iter().any(|&n| n > 0);
        let mut best = None::<usize>;
        for class in 0..k {
            if any_trained && self.class_counts[class] == 0 {
                continue;
            }
            match best {
                Some(b) if scores[class] <= scores[b] => {}
                _ => best = Some(class),
            }
        }
        ClassLabel::new(best.unwrap_or(0) as u16, self.config.n_classes)
            .expect("argmax is within the label set")
    }

    pub fn predict(&self, x: &EncodedInstance) -> (ClassLabel, Vec<f64>) {
        let mut scores = Vec::with_capacity(self.config.n_classes as usize);
        let label = self.predict_into(x, &mut scores);
        (label, scores)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: NaiveBayesModel = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                model.version
            )));
        }
        model.config.validate()?;
        Ok(model)
    }
}

#[inline]
fn gaussian_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

/// Normalized posterior from log-scores (max-subtracted before exponentiation).
pub fn posterior(log_scores: &[f64]) -> Vec<f64> {
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}
