//! Feature pipeline: categorical prefix truncation, category indexing,
//! Box-Cox power transform of skewed numerics, and target binning.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ClassLabel, FeatureKind, FeatureSchema, Instance, Value};

/// Smallest positive value a shifted Box-Cox input is moved to.
pub const BOXCOX_EPS: f64 = 1e-6;
const BOXCOX_LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
const BOXCOX_TOL: f64 = 1e-4;
const BOXCOX_MIN_SAMPLES: usize = 10;
const LAMBDA_ZERO: f64 = 1e-8;

pub const ENCODER_FORMAT_VERSION: u32 = 1;

/// Keeps the first `prefix_len` characters of a category.
pub fn truncate_category(value: &str, prefix_len: usize) -> &str {
    match value.char_indices().nth(prefix_len) {
        Some((byte, _)) => &value[..byte],
        None => value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxParams {
    pub lambda: f64,
    pub shift: f64,
}

/// Box-Cox with the given parameters, computed as `expm1(λ ln x) / λ`
/// (equal to `(x^λ - 1) / λ`) and `ln x` when `|λ| <= 1e-8`.
pub fn apply_boxcox(x: f64, params: BoxCoxParams) -> Result<f64> {
    let z = x + params.shift;
    if !(z > 0.0) {
        return Err(Error::Domain(format!(
            "Box-Cox input {x} + shift {} is not positive",
            params.shift
        )));
    }
    Ok(boxcox_unchecked(z.ln(), params.lambda))
}

#[inline]
fn boxcox_unchecked(ln_z: f64, lambda: f64) -> f64 {
    if lambda.abs() > LAMBDA_ZERO {
        (lambda * ln_z).exp_m1() / lambda
    } else {
        ln_z
    }
}

/// Inverse of [`apply_boxcox`]. Returns NaN where the transformed value lies
/// outside the transform's range.
pub fn inverse_boxcox(y: f64, params: BoxCoxParams) -> f64 {
    let z = if params.lambda.abs() > LAMBDA_ZERO {
        ((params.lambda * y).ln_1p() / params.lambda).exp()
    } else {
        y.exp()
    };
    z - params.shift
}

/// Profile log-likelihood of the Box-Cox model at `lambda`, up to a constant.
/// `ln_values` are the logs of the (shifted) inputs.
fn boxcox_llf(ln_values: &[f64], sum_ln: f64, lambda: f64) -> f64 {
    let n = ln_values.len() as f64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &lz) in ln_values.iter().enumerate() {
        let y = boxcox_unchecked(lz, lambda);
        let d = y - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (y - mean);
    }
    let var = m2 / n;
    -0.5 * n * var.ln() + (lambda - 1.0) * sum_ln
}

/// Fits the Box-Cox exponent by maximum likelihood over `[-5, 5]`
/// (golden-section search, tolerance 1e-4).
pub fn fit_boxcox(values: &[f64]) -> Result<BoxCoxParams> {
    if values.len() < BOXCOX_MIN_SAMPLES {
        return Err(Error::Degenerate(format!(
            "Box-Cox needs at least {BOXCOX_MIN_SAMPLES} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Box-Cox input contains non-finite values".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(Error::Degenerate("Box-Cox input values are all equal".into()));
    }
    let shift = (BOXCOX_EPS - min).max(0.0);
    let ln_values: Vec<f64> = values.iter().map(|&v| (v + shift).ln()).collect();
    let sum_ln: f64 = ln_values.iter().sum();
    let objective = |lambda: f64| boxcox_llf(&ln_values, sum_ln, lambda);
    let lambda = golden_section_max(objective, BOXCOX_LAMBDA_RANGE, BOXCOX_TOL);
    Ok(BoxCoxParams { lambda, shift })
}

fn golden_section_max(f: impl Fn(f64) -> f64, (mut a, mut b): (f64, f64), tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// How target hours are cut into classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMode {
    /// Three classes split at the empirical 1/3 and 2/3 quantiles.
    Tertile,
    /// Upper edges in whole days; a day is `floor(hours / 24)`.
    FixedDays(Vec<u32>),
}

impl BinMode {
    /// Day edges of the short / medium / large throughput classes
    /// (0-6, 7-39, over 39 days).
    pub fn throughput_days() -> Self {
        BinMode::FixedDays(vec![6, 39])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinBoundaries {
    /// Ascending upper edges, in units of `hours / unit_divisor`.
    pub upper_edges: Vec<f64>,
    /// 24 for day-based edges, 1 for edges in hours.
    pub unit_divisor: f64,
}

impl BinBoundaries {
    pub fn n_classes(&self) -> u16 {
        self.upper_edges.len() as u16 + 1
    }

    fn day_based(&self) -> bool {
        self.unit_divisor != 1.0
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_target_bins(throughput_hours: &[f64], mode: &BinMode) -> Result<BinBoundaries> {
    let bins = match mode {
        BinMode::Tertile => {
            if throughput_hours.len() < 3 {
                return Err(Error::Degenerate(format!(
                    "tertile binning needs at least 3 values, got {}",
                    throughput_hours.len()
                )));
            }
            let mut sorted = throughput_hours.to_vec();
            if sorted.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("non-finite target value".into()));
            }
            sorted.sort_by(f64::total_cmp);
            BinBoundaries {
                upper_edges: vec![
                    quantile_sorted(&sorted, 1.0 / 3.0),
                    quantile_sorted(&sorted, 2.0 / 3.0),
                ],
                unit_divisor: 1.0,
            }
        }
        BinMode::FixedDays(edges) => BinBoundaries {
            upper_edges: edges.iter().map(|&d| d as f64).collect(),
            unit_divisor: 24.0,
        },
    };
    if bins.upper_edges.is_empty() {
        return Err(Error::Config("at least one bin edge is required".into()));
    }
    if bins.upper_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Degenerate(format!(
            "bin edges are not strictly ascending: {:?}",
            bins.upper_edges
        )));
    }
    Ok(bins)
}

/// Maps a throughput time to its class: the number of edges strictly below
/// the value (whole days for day-based edges).
pub fn bin_target(hours: f64, bins: &BinBoundaries) -> Result<ClassLabel> {
    if !(hours >= 0.0) || !hours.is_finite() {
        return Err(Error::Domain(format!("throughput time {hours} is not a non-negative number")));
    }
    let v = if bins.day_based() {
        (hours / bins.unit_divisor).floor()
    } else {
        hours
    };
    let id = bins.upper_edges.iter().filter(|&&e| e < v).count() as u16;
    ClassLabel::new(id, bins.n_classes())
}

/// Which features the encoder uses and how.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Schema features not fed to the model (e.g. hidden-context columns).
    pub exclude: Vec<String>,
    /// Numeric features that get a Box-Cox transform fitted on warm-up data.
    pub boxcox: Vec<String>,
    /// Categorical features truncated to a prefix before indexing.
    pub prefix: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Slot {
    Skip {
        name: String,
    },
    Cat {
        name: String,
        prefix: Option<usize>,
        categories: Vec<String>,
        #[serde(skip)]
        lookup: HashMap<String, u32>,
    },
    Num {
        name: String,
        boxcox: Option<BoxCoxParams>,
    },
}

/// A categorical feature as category indices plus numeric features after
/// their transforms, both in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedInstance {
    pub cats: Vec<u32>,
    pub nums: Vec<f64>,
}

/// Accumulates category maps and Box-Cox samples up to the freeze point.
#[derive(Debug, Clone)]
pub struct EncoderBuilder {
    slots: Vec<Slot>,
    /// Raw values of the Box-Cox features, keyed by schema position.
    samples: BTreeMap<usize, Vec<f64>>,
}

impl EncoderBuilder {
    pub fn new(schema: &FeatureSchema, config: &EncoderConfig) -> Result<Self> {
        for name in config
            .exclude
            .iter()
            .chain(&config.boxcox)
            .chain(config.prefix.keys())
        {
            if schema.position(name).is_none() {
                return Err(Error::Config(format!("unknown feature `{name}` in encoder config")));
            }
        }
        let mut slots = Vec::with_capacity(schema.features().len());
        let mut samples = BTreeMap::new();
        for (pos, f) in schema.features().iter().enumerate() {
            if config.exclude.contains(&f.name) {
                slots.push(Slot::Skip { name: f.name.clone() });
                continue;
            }
            let wants_boxcox = config.boxcox.contains(&f.name);
            let slot = match f.kind {
                FeatureKind::Categorical => {
                    if wants_boxcox {
                        return Err(Error::Config(format!(
                            "Box-Cox requested for categorical feature `{}`",
                            f.name
                        )));
                    }
                    Slot::Cat {
                        name: f.name.clone(),
                        prefix: config.prefix.get(&f.name).copied(),
                        categories: Vec::new(),
                        lookup: HashMap::new(),
                    }
                }
                FeatureKind::Numeric => {
                    if config.prefix.contains_key(&f.name) {
                        return Err(Error::Config(format!(
                            "prefix truncation requested for numeric feature `{}`",
                            f.name
                        )));
                    }
                    if wants_boxcox {
                        samples.insert(pos, Vec::new());
                    }
                    Slot::Num {
                        name: f.name.clone(),
                        boxcox: None,
                    }
                }
            };
            slots.push(slot);
        }
        Ok(EncoderBuilder { slots, samples })
    }

    pub fn observe(&mut self, instance: &Instance) -> Result<()> {
        if instance.values.len() != self.slots.len() {
            return Err(Error::Schema(format!(
                "instance {} has {} values, encoder expects {}",
                instance.index,
                instance.values.len(),
                self.slots.len()
            )));
        }
        for (pos, (slot, value)) in self.slots.iter_mut().zip(&instance.values).enumerate() {
            match (slot, value) {
                (Slot::Skip { .. }, _) => {}
                (
                    Slot::Cat {
                        prefix,
                        categories,
                        lookup,
                        ..
                    },
                    Value::Cat(raw),
                ) => {
                    let key = match prefix {
                        Some(n) => truncate_category(raw, *n),
                        None => raw.as_str(),
                    };
                    if !lookup.contains_key(key) {
                        lookup.insert(key.to_string(), categories.len() as u32);
                        categories.push(key.to_string());
                    }
                }
                (Slot::Num { .. }, Value::Num(x)) => {
                    if let Some(s) = self.samples.get_mut(&pos) {
                        s.push(*x);
                    }
                }
                (slot, _) => {
                    return Err(Error::Schema(format!(
                        "value kind mismatch for `{}` at index {}",
                        slot.name(),
                        instance.index
                    )))
                }
            }
        }
        Ok(())
    }

    /// Fits the Box-Cox transforms and freezes the category maps.
    pub fn freeze(mut self) -> Result<EncoderState> {
        for (pos, values) in std::mem::take(&mut self.samples) {
            if let Slot::Num { boxcox, name } = &mut self.slots[pos] {
                *boxcox = Some(fit_boxcox(&values).map_err(|e| match e {
                    Error::Degenerate(m) => Error::Degenerate(format!("feature `{name}`: {m}")),
                    other => other,
                })?);
            }
        }
        Ok(EncoderState {
            version: ENCODER_FORMAT_VERSION,
            slots: self.slots,
            bins: None,
        })
    }
}

impl Slot {
    fn name(&self) -> &str {
        match self {
            Slot::Skip { name } | Slot::Cat { name, .. } | Slot::Num { name, .. } => name,
        }
    }
}

/// Frozen encoder: category maps never change, unseen categories share the
/// reserved index `categories.len()`. Immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    version: u32,
    slots: Vec<Slot>,
    bins: Option<BinBoundaries>,
}

impl EncoderState {
    /// Builds a frozen encoder from warm-up instances.
    pub fn fit<'a>(
        schema: &FeatureSchema,
        config: &EncoderConfig,
        instances: impl IntoIterator<Item = &'a Instance>,
    ) -> Result<Self> {
        let mut builder = EncoderBuilder::new(schema, config)?;
        for inst in instances {
            builder.observe(inst)?;
        }
        builder.freeze()
    }

    pub fn is_frozen(&self) -> bool {
        true
    }

    pub fn with_bins(mut self, bins: BinBoundaries) -> Self {
        self.bins = Some(bins);
        self
    }

    pub fn bins(&self) -> Option<&BinBoundaries> {
        self.bins.as_ref()
    }

    /// Category cardinality of each categorical slot, including the unseen index.
    pub fn cardinalities(&self) -> Vec<u32> {
        self.slots
            .iter()
            .filter_map(|s| match s {
                Slot::Cat { categories, .. } => Some(categories.len() as u32 + 1),
                _ => None,
            })
            .collect()
    }

    pub fn n_numeric(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| matches!(s, Slot::Num { .. }))
            .count()
    }

    pub fn boxcox_params(&self, feature: &str) -> Option<BoxCoxParams> {
        self.slots.iter().find_map(|s| match s {
            Slot::Num { name, boxcox } if name == feature => *boxcox,
            _ => None,
        })
    }

    pub fn category_index(&self, feature: &str, value: &str) -> Option<u32> {
        self.slots.iter().find_map(|s| match s {
            Slot::Cat {
                name,
                prefix,
                categories,
                lookup,
            } if name == feature => {
                let key = prefix.map_or(value, |n| truncate_category(value, n));
                Some(lookup.get(key).copied().unwrap_or(categories.len() as u32))
            }
            _ => None,
        })
    }

    pub fn encode(&self, instance: &Instance) -> Result<EncodedInstance> {
        let mut out = EncodedInstance {
            cats: Vec::with_capacity(self.slots.len()),
            nums: Vec::new(),
        };
        self.encode_into(instance, &mut out)?;
        Ok(out)
    }

    /// Encodes into `out`, reusing its allocations.
    pub fn encode_into(&self, instance: &Instance, out: &mut EncodedInstance) -> Result<()> {
        if instance.values.len() != self.slots.len() {
            return Err(Error::Schema(format!(
                "instance {} has {} values, encoder expects {}",
                instance.index,
                instance.values.len(),
                self.slots.len()
            )));
        }
        out.cats.clear();
        out.nums.clear();
        for (slot, value) in self.slots.iter().zip(&instance.values) {
            match (slot, value) {
                (Slot::Skip { .. }, _) => {}
                (
                    Slot::Cat {
                        prefix,
                        categories,
                        lookup,
                        ..
                    },
                    Value::Cat(raw),
                ) => {
                    let key = prefix.map_or(raw.as_str(), |n| truncate_category(raw, n));
                    out.cats
                        .push(lookup.get(key).copied().unwrap_or(categories.len() as u32));
                }
                (Slot::Num { boxcox, .. }, Value::Num(x)) => {
                    out.nums.push(match boxcox {
                        Some(p) => apply_boxcox(*x, *p)?,
                        None => *x,
                    });
                }
                (slot, _) => {
                    return Err(Error::Schema(format!(
                        "value kind mismatch for `{}` at index {}",
                        slot.name(),
                        instance.index
                    )))
                }
            }
        }
        Ok(())
    }

    /// One-hot export view: one block per categorical slot (width =
    /// cardinality including the unseen slot), then the numeric values.
    pub fn one_hot(&self, encoded: &EncodedInstance) -> Vec<f64> {
        let cards = self.cardinalities();
        let width: u32 = cards.iter().sum();
        let mut out = vec![0.0; width as usize];
        let mut offset = 0usize;
        for (&idx, &card) in encoded.cats.iter().zip(&cards) {
            out[offset + idx as usize] = 1.0;
            offset += card as usize;
        }
        out.extend_from_slice(&encoded.nums);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut state: EncoderState = serde_json::from_str(text)?;
        if state.version != ENCODER_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported encoder format version {}",
                state.version
            )));
        }
        for slot in &mut state.slots {
            if let Slot::Cat {
                categories, lookup, ..
            } = slot
            {
                *lookup = categories
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i as u32))
                    .collect();
            }
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{Feature, TargetKind};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn truncation() {
        assert_eq!(truncate_category("10234567", 4), "1023");
        assert_eq!(truncate_category("ab", 4), "ab");
        assert_eq!(truncate_category("", 4), "");
        assert_eq!(truncate_category("äöüßx", 4), "äöüß");
    }

    #[test]
    fn boxcox_formula() {
        let p = |lambda| BoxCoxParams { lambda, shift: 0.0 };
        assert_abs_diff_eq!(apply_boxcox(4.0, p(0.5)).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(apply_boxcox(std::f64::consts::E, p(0.0)).unwrap(), 1.0, epsilon = 1e-12);
        for lambda in [-3.0, -0.5, 0.0, 0.7, 2.0] {
            assert_eq!(apply_boxcox(1.0, p(lambda)).unwrap(), 0.0);
        }
        assert!(matches!(apply_boxcox(0.0, p(1.0)), Err(Error::Domain(_))));
        assert!(matches!(
            apply_boxcox(-2.0, BoxCoxParams { lambda: 1.0, shift: 1.0 }),
            Err(Error::Domain(_))
        ));
    }

    /// Independent likelihood scan on a fine grid, written against the
    /// textbook `(x^λ - 1)/λ` form.
    fn grid_scan_lambda(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let sum_ln: f64 = values.iter().map(|v| v.ln()).sum();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in -500..=500 {
            let lambda = k as f64 / 100.0;
            let ys: Vec<f64> = values
                .iter()
                .map(|&x| if lambda == 0.0 { x.ln() } else { (x.powf(lambda) - 1.0) / lambda })
                .collect();
            let mean = ys.iter().sum::<f64>() / n;
            let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
            let llf = -0.5 * n * var.ln() + (lambda - 1.0) * sum_ln;
            if llf > best.0 {
                best = (llf, lambda);
            }
        }
        best.1
    }

    proptest::proptest! {
        /// Relative round-trip error of the inverse over the full parameter
        /// box. Near `x^λ ≈ 0` the transformed value sits next to `-1/λ` and
        /// the inverse loses most digits, so large |λ| breaks the bound.
        #[test]
        fn boxcox_roundtrip(lambda in -5.0f64..=5.0, log_x in -3.0f64..=6.0) {
            let x = 10f64.powf(log_x);
            let p = BoxCoxParams { lambda, shift: 0.0 };
            let back = inverse_boxcox(apply_boxcox(x, p).unwrap(), p);
            proptest::prop_assert!(((back - x) / x).abs() <= 1e-9, "lambda {} x {} back {}", lambda, x, back);
        }
    }

    #[test]
    fn lambda_recovery_lognormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..10_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal).exp())
            .collect();
        let fitted = fit_boxcox(&values).unwrap();
        assert_eq!(fitted.shift, 0.0);
        assert!(fitted.lambda.abs() < 0.1, "lambda {}", fitted.lambda);
        assert!((fitted.lambda - grid_scan_lambda(&values)).abs() < 0.011);
    }

    #[test]
    fn lambda_recovery_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let values: Vec<f64> = (0..10_000)
            .map(|_| 100.0 + 5.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fitted = fit_boxcox(&values).unwrap();
        assert!((fitted.lambda - 1.0).abs() < 0.3, "lambda {}", fitted.lambda);
        assert!((fitted.lambda - grid_scan_lambda(&values)).abs() < 0.011);
    }

    #[test]
    fn boxcox_shift_and_degenerate() {
        let mut values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(fit_boxcox(&values).unwrap().shift, BOXCOX_EPS);
        values.iter_mut().for_each(|v| *v = 3.0);
        assert!(matches!(fit_boxcox(&values), Err(Error::Degenerate(_))));
        assert!(matches!(fit_boxcox(&[1.0, 2.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fixed_day_bins() {
        let bins = fit_target_bins(&[], &BinMode::throughput_days()).unwrap();
        assert_eq!(bins.upper_edges, vec![6.0, 39.0]);
        assert_eq!(bins.unit_divisor, 24.0);
        let class = |h| bin_target(h, &bins).unwrap().id();
        assert_eq!(class(100.0), 0);
        assert_eq!(class(167.9), 0);
        assert_eq!(class(168.0), 1);
        assert_eq!(class(936.0), 1);
        assert_eq!(class(959.0), 1);
        assert_eq!(class(960.0), 2);
        assert!(matches!(bin_target(-1.0, &bins), Err(Error::Domain(_))));
    }

    /// Quantile by the "position (n-1)p" rule, computed directly.
    fn oracle_quantile(values: &[f64], p: f64) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let pos = p * (v.len() as f64 - 1.0);
        let below = pos as usize;
        let frac = pos - below as f64;
        if below + 1 < v.len() {
            v[below] * (1.0 - frac) + v[below + 1] * frac
        } else {
            v[below]
        }
    }

    #[test]
    fn tertile_bins() {
        let values: Vec<f64> = (1..=9).map(f64::from).collect();
        let bins = fit_target_bins(&values, &BinMode::Tertile).unwrap();
        assert_abs_diff_eq!(bins.upper_edges[0], 11.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bins.upper_edges[1], 19.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bins.upper_edges[0], oracle_quantile(&values, 1.0 / 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(bins.upper_edges[1], oracle_quantile(&values, 2.0 / 3.0), epsilon = 1e-12);

        assert!(fit_target_bins(&[5.0, 5.0, 5.0], &BinMode::Tertile).is_err());
        assert!(fit_target_bins(&[1.0, 2.0], &BinMode::Tertile).is_err());
    }

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                Feature::categorical("material"),
                Feature::numeric("value"),
                Feature::numeric("automation"),
            ],
            "label",
            TargetKind::Class { n_classes: 3 },
        )
        .unwrap()
    }

    fn inst(index: u64, cat: &str, v: f64) -> Instance {
        Instance {
            index,
            values: vec![Value::Cat(cat.into()), Value::Num(v), Value::Num(0.5)],
        }
    }

    #[test]
    fn encoder_maps_and_unseen() {
        let config = EncoderConfig {
            exclude: vec!["automation".into()],
            ..Default::default()
        };
        let warm = [inst(0, "A", 1.0), inst(1, "B", 2.0), inst(2, "A", 3.0)];
        let enc = EncoderState::fit(&schema(), &config, &warm).unwrap();
        assert!(enc.is_frozen());
        assert_eq!(enc.cardinalities(), vec![3]);
        assert_eq!(enc.encode(&inst(3, "B", 4.0)).unwrap().cats, vec![1]);
        let unseen = enc.encode(&inst(4, "C", 4.0)).unwrap();
        assert_eq!(unseen.cats, vec![2]);
        assert_eq!(unseen.nums, vec![4.0]);
        assert_eq!(enc.one_hot(&unseen), vec![0.0, 0.0, 1.0, 4.0]);
        // frozen: encoding new categories never grows the map
        assert_eq!(enc.cardinalities(), vec![3]);
    }

    #[test]
    fn encoder_boxcox_and_prefix() {
        let mut prefix = BTreeMap::new();
        prefix.insert("material".to_string(), 4);
        let config = EncoderConfig {
            exclude: vec!["automation".into()],
            boxcox: vec!["value".into()],
            prefix,
        };
        let warm: Vec<Instance> = (0..50)
            .map(|i| inst(i, &format!("1023{i:04}"), (i as f64 / 7.0).exp()))
            .collect();
        let enc = EncoderState::fit(&schema(), &config, &warm).unwrap();
        assert_eq!(enc.cardinalities(), vec![2]);
        assert_eq!(enc.category_index("material", "10239999"), Some(0));
        let p = enc.boxcox_params("value").unwrap();
        let e = enc.encode(&inst(60, "9999", 4.0)).unwrap();
        assert_eq!(e.cats, vec![1]);
        assert_abs_diff_eq!(e.nums[0], apply_boxcox(4.0, p).unwrap(), epsilon = 0.0);

        let json = enc.to_json().unwrap();
        let back = EncoderState::from_json(&json).unwrap();
        assert_eq!(back.encode(&inst(61, "10235555", 2.0)).unwrap(), enc.encode(&inst(61, "10235555", 2.0)).unwrap());
        assert!(EncoderState::from_json(&json.replace("\"version\": 1", "\"version\": 9")).is_err());
    }

    #[test]
    fn encoder_config_errors() {
        let bad = EncoderConfig {
            boxcox: vec!["material".into()],
            ..Default::default()
        };
        assert!(EncoderBuilder::new(&schema(), &bad).is_err());
        let unknown = EncoderConfig {
            exclude: vec!["nope".into()],
            ..Default::default()
        };
        assert!(EncoderBuilder::new(&schema(), &unknown).is_err());
    }
}
