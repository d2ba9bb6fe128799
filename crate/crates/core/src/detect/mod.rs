//! Change detectors over the per-instance 0/1 prediction-error stream.

mod adwin;
mod page_hinkley;

pub use adwin::{Adwin, Bucket};
pub use page_hinkley::PageHinkley;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSignal {
    NoChange,
    Drift,
}

impl DriftSignal {
    pub fn is_drift(self) -> bool {
        self == DriftSignal::Drift
    }
}

/// A sequential change detector fed one observation in `[0, 1]` at a time.
pub trait ChangeDetector {
    fn observe(&mut self, x: f64) -> Result<DriftSignal>;

    /// Clears all statistics, keeping the parameters.
    fn reset(&mut self);

    /// The detector's test statistic after the last observation.
    fn statistic(&self) -> f64;
}

pub(crate) fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("detector input {x} is outside [0, 1]")))
    }
}

/// Detector selection and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorConfig {
    PageHinkley {
        delta: f64,
        lambda: f64,
        burn_in: u64,
    },
    Adwin {
        delta: f64,
        max_buckets: usize,
        check_period: u64,
    },
}

impl DetectorConfig {
    pub fn page_hinkley(lambda: f64) -> Self {
        DetectorConfig::PageHinkley {
            delta: PageHinkley::DEFAULT_DELTA,
            lambda,
            burn_in: PageHinkley::DEFAULT_BURN_IN,
        }
    }

    pub fn adwin(delta: f64) -> Self {
        DetectorConfig::Adwin {
            delta,
            max_buckets: Adwin::DEFAULT_MAX_BUCKETS,
            check_period: Adwin::DEFAULT_CHECK_PERIOD,
        }
    }

    /// Short name used in output files.
    pub fn name(&self) -> &'static str {
        match self {
            DetectorConfig::PageHinkley { .. } => "page_hinkley",
            DetectorConfig::Adwin { .. } => "adwin",
        }
    }

    /// The parameter that the grid search varies: λ for Page-Hinkley,
    /// δ for ADWIN.
    pub fn key_param(&self) -> f64 {
        match *self {
            DetectorConfig::PageHinkley { lambda, .. } => lambda,
            DetectorConfig::Adwin { delta, .. } => delta,
        }
    }

    pub fn build(&self) -> Result<Detector> {
        Ok(match *self {
            DetectorConfig::PageHinkley {
                delta,
                lambda,
                burn_in,
            } => Detector::PageHinkley(PageHinkley::new(delta, lambda, burn_in)?),
            DetectorConfig::Adwin {
                delta,
                max_buckets,
                check_period,
            } => Detector::Adwin(Adwin::with_params(delta, max_buckets, check_period)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Detector {
    PageHinkley(PageHinkley),
    Adwin(Adwin),
}

impl ChangeDetector for Detector {
    fn observe(&mut self, x: f64) -> Result<DriftSignal> {
        match self {
            Detector::PageHinkley(d) => d.observe(x),
            Detector::Adwin(d) => d.observe(x),
        }
    }

    fn reset(&mut self) {
        match self {
            Detector::PageHinkley(d) => d.reset(),
            Detector::Adwin(d) => d.reset(),
        }
    }

    fn statistic(&self) -> f64 {
        match self {
            Detector::PageHinkley(d) => d.statistic(),
            Detector::Adwin(d) => d.statistic(),
        }
    }
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Detector::PageHinkley(_) => "page_hinkley",
            Detector::Adwin(_) => "adwin",
        }
    }
}
