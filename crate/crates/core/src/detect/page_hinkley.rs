use super::{check_unit, ChangeDetector, DriftSignal};
use crate::error::{Error, Result};

/// One-sided Page-Hinkley test for an increase in the mean of the
/// monitored variable.
///
/// Per observation: the running mean is updated, then
/// `m_t = m_{t-1} + (x - mean - delta)` and `m_min = min(m_min, m_t)`.
/// An alarm is raised when `t > burn_in` and `m_t - m_min > lambda`. The
/// caller resets the detector after acting on an alarm.
#[derive(Debug, Clone, PartialEq)]
pub struct PageHinkley {
    delta: f64,
    lambda: f64,
    burn_in: u64,
    t: u64,
    running_mean: f64,
    m_t: f64,
    m_min: f64,
}

impl PageHinkley {
    pub const DEFAULT_DELTA: f64 = 0.005;
    pub const DEFAULT_BURN_IN: u64 = 30;

    pub fn new(delta: f64, lambda: f64, burn_in: u64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("Page-Hinkley delta must be >= 0, got {delta}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("Page-Hinkley lambda must be > 0, got {lambda}")));
        }
        Ok(PageHinkley {
            delta,
            lambda,
            burn_in,
            t: 0,
            running_mean: 0.0,
            m_t: 0.0,
            m_min: f64::INFINITY,
        })
    }

    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_DELTA, lambda, Self::DEFAULT_BURN_IN)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    pub fn n_observed(&self) -> u64 {
        self.t
    }

    pub fn running_mean(&self) -> f64 {
        self.running_mean
    }

    pub fn cumulative(&self) -> f64 {
        self.m_t
    }

    pub fn minimum(&self) -> f64 {
        self.m_min
    }
}

impl ChangeDetector for PageHinkley {
    fn observe(&mut self, x: f64) -> Result<DriftSignal> {
        check_unit(x)?;
        self.t += 1;
        self.running_mean += (x - self.running_mean) / self.t as f64;
        self.m_t += x - self.running_mean - self.delta;
        self.m_min = self.m_min.min(self.m_t);
        if self.t > self.burn_in && self.m_t - self.m_min > self.lambda {
            Ok(DriftSignal::Drift)
        } else {
            Ok(DriftSignal::NoChange)
        }
    }

    fn reset(&mut self) {
        self.t = 0;
        self.running_mean = 0.0;
        self.m_t = 0.0;
        self.m_min = f64::INFINITY;
    }

    /// `m_t - m_min`, zero before the first observation.
    fn statistic(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.m_t - self.m_min
        }
    }
}
