use std::collections::VecDeque;

use super::{check_unit, ChangeDetector, DriftSignal};
use crate::error::{Error, Result};

/// A run of `count` consecutive observations summarized by their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub sum: f64,
    pub count: u64,
}

/// Adaptive windowing over an exponential histogram.
///
/// Row `i` holds buckets of `2^i` observations, newest at the back. When a
/// row reaches `max_buckets + 1` buckets its two oldest are merged into the
/// next row. Every `check_period` observations each bucket boundary splits
/// the window into an older part `W0` and a newer part `W1`; the older part
/// is dropped when
///
/// ```text
/// |mean(W0) - mean(W1)| >= sqrt(ln(4 * width / delta) / (2 m)),
/// m = 1 / (1/|W0| + 1/|W1|)
/// ```
///
/// and the scan repeats on what is left.
#[derive(Debug, Clone)]
pub struct Adwin {
    delta: f64,
    max_buckets: usize,
    check_period: u64,
    rows: Vec<VecDeque<Bucket>>,
    width: u64,
    total: f64,
    since_check: u64,
    last_cut_gap: f64,
}

impl Adwin {
    pub const DEFAULT_MAX_BUCKETS: usize = 5;
    pub const DEFAULT_CHECK_PERIOD: u64 = 32;

    pub fn new(delta: f64) -> Result<Self> {
        Self::with_params(delta, Self::DEFAULT_MAX_BUCKETS, Self::DEFAULT_CHECK_PERIOD)
    }

    pub fn with_params(delta: f64, max_buckets: usize, check_period: u64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("ADWIN delta must be in (0, 1), got {delta}")));
        }
        if max_buckets < 2 {
            return Err(Error::Config("ADWIN needs at least 2 buckets per row".into()));
        }
        if check_period == 0 {
            return Err(Error::Config("ADWIN check period must be positive".into()));
        }
        Ok(Adwin {
            delta,
            max_buckets,
            check_period,
            rows: Vec::new(),
            width: 0,
            total: 0.0,
            since_check: 0,
            last_cut_gap: 0.0,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    /// Buckets from oldest to newest.
    pub fn buckets(&self) -> impl Iterator<Item = &Bucket> + '_ {
        self.rows.iter().rev().flat_map(|row| row.iter())
    }

    pub fn row_lengths(&self) -> Vec<usize> {
        self.rows.iter().map(VecDeque::len).collect()
    }

    fn insert(&mut self, x: f64) {
        if self.rows.is_empty() {
            self.rows.push(VecDeque::with_capacity(self.max_buckets + 1));
        }
        self.rows[0].push_back(Bucket { sum: x, count: 1 });
        self.width += 1;
        self.total += x;
        let mut row = 0;
        while self.rows[row].len() > self.max_buckets {
            let a = self.rows[row].pop_front().expect("row is full");
            let b = self.rows[row].pop_front().expect("row is full");
            if row + 1 == self.rows.len() {
                self.rows.push(VecDeque::with_capacity(self.max_buckets + 1));
            }
            self.rows[row + 1].push_back(Bucket {
                sum: a.sum + b.sum,
                count: a.count + b.count,
            });
            row += 1;
        }
    }

    fn drop_oldest(&mut self, n_buckets: usize) {
        for _ in 0..n_buckets {
            while self.rows.last().is_some_and(VecDeque::is_empty) {
                self.rows.pop();
            }
            let Some(row) = self.rows.last_mut() else { return };
            let b = row.pop_front().expect("non-empty row");
            self.width -= b.count;
            self.total -= b.sum;
        }
        while self.rows.last().is_some_and(VecDeque::is_empty) {
            self.rows.pop();
        }
        if self.width == 0 {
            self.total = 0.0;
        }
    }

    fn cut_threshold(&self, n0: u64, n1: u64) -> f64 {
        let m = 1.0 / (1.0 / n0 as f64 + 1.0 / n1 as f64);
        ((4.0 * self.width as f64 / self.delta).ln() / (2.0 * m)).sqrt()
    }

    /// First significant split, oldest to newest: the number of buckets in
    /// `W0`, its size, and the mean gap.
    fn find_cut(&self) -> Option<(usize, u64, f64)> {
        let mut n0 = 0u64;
        let mut s0 = 0.0;
        let n_buckets: usize = self.rows.iter().map(VecDeque::len).sum();
        for (i, b) in self.buckets().enumerate() {
            if i + 1 == n_buckets {
                break;
            }
            n0 += b.count;
            s0 += b.sum;
            let n1 = self.width - n0;
            let gap = (s0 / n0 as f64 - (self.total - s0) / n1 as f64).abs();
            if gap >= self.cut_threshold(n0, n1) {
                return Some((i + 1, n0, gap));
            }
        }
        None
    }

    /// Size of the older sub-window of the first significant split of the
    /// current window, without dropping anything.
    pub fn first_significant_cut(&self) -> Option<u64> {
        self.find_cut().map(|(_, n0, _)| n0)
    }
}

impl ChangeDetector for Adwin {
    fn observe(&mut self, x: f64) -> Result<DriftSignal> {
        check_unit(x)?;
        self.insert(x);
        self.since_check += 1;
        if self.since_check < self.check_period {
            return Ok(DriftSignal::NoChange);
        }
        self.since_check = 0;
        let mut drift = false;
        while let Some((n, _, gap)) = self.find_cut() {
            self.drop_oldest(n);
            self.last_cut_gap = gap;
            drift = true;
        }
        Ok(if drift {
            DriftSignal::Drift
        } else {
            DriftSignal::NoChange
        })
    }

    fn reset(&mut self) {
        self.rows.clear();
        self.width = 0;
        self.total = 0.0;
        self.since_check = 0;
        self.last_cut_gap = 0.0;
    }

    /// Mean gap of the last cut that triggered a drop.
    fn statistic(&self) -> f64 {
        self.last_cut_gap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_state() {
        let a = Adwin::new(0.001).unwrap();
        assert_eq!(a.width(), 0);
        assert_eq!(a.total(), 0.0);
        assert_eq!(a.buckets().count(), 0);
    }

    #[test]
    fn bucket_rows_stay_bounded() {
        let mut a = Adwin::with_params(0.001, 5, 1_000_000).unwrap();
        for i in 0..10_000u64 {
            a.observe((i % 3 == 0) as u8 as f64).unwrap();
            assert!(a.row_lengths().iter().all(|&n| n <= 5));
        }
        assert_eq!(a.width(), 10_000);
        let counts: Vec<u64> = a.buckets().map(|b| b.count).collect();
        // oldest first, so bucket sizes never grow toward the newest end
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        assert!(counts.iter().all(|c| c.is_power_of_two()));
    }

    /// The cut rule evaluated directly on the raw sequence at the given
    /// split positions.
    fn brute_force_cut(values: &[f64], boundaries: &[usize], delta: f64) -> Option<usize> {
        let n = values.len() as f64;
        for &b in boundaries {
            let (w0, w1) = values.split_at(b);
            let m0 = w0.iter().sum::<f64>() / w0.len() as f64;
            let m1 = w1.iter().sum::<f64>() / w1.len() as f64;
            let m = 1.0 / (1.0 / w0.len() as f64 + 1.0 / w1.len() as f64);
            let eps = ((4.0 * n / delta).ln() / (2.0 * m)).sqrt();
            if (m0 - m1).abs() >= eps {
                return Some(b);
            }
        }
        None
    }

    #[test]
    fn cut_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n_old, n_new, p_old, p_new) in [(200, 40, 0.0, 1.0), (900, 300, 0.2, 0.6), (500, 500, 0.5, 0.5)] {
            let values: Vec<f64> = (0..n_old + n_new)
                .map(|i| {
                    let p = if i < n_old { p_old } else { p_new };
                    if rng.random_bool(p) { 1.0 } else { 0.0 }
                })
                .collect();
            let mut a = Adwin::with_params(0.001, 5, u64::MAX).unwrap();
            for &v in &values {
                a.observe(v).unwrap();
            }
            let boundaries: Vec<usize> = a
                .buckets()
                .scan(0usize, |acc, b| {
                    *acc += b.count as usize;
                    Some(*acc)
                })
                .filter(|&b| b < values.len())
                .collect();
            let expected = brute_force_cut(&values, &boundaries, 0.001);
            assert_eq!(a.first_significant_cut().map(|n| n as usize), expected);
            if p_old == p_new {
                assert_eq!(expected, None);
            } else {
                assert!(expected.is_some());
            }
        }
    }

    #[test]
    fn step_zero_to_one() {
        let mut a = Adwin::new(0.001).unwrap();
        for _ in 0..1000 {
            assert!(!a.observe(0.0).unwrap().is_drift());
        }
        let mut detected = None;
        for k in 0..1000 {
            if a.observe(1.0).unwrap().is_drift() {
                detected = Some(k);
                break;
            }
        }
        let k = detected.expect("drift detected");
        assert!(k < 150, "detected after {k}");
        assert!(a.mean() > 0.9, "post-drop mean {}", a.mean());
    }

    #[test]
    fn stationary_no_detection() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut a = Adwin::new(0.001).unwrap();
        for _ in 0..50_000 {
            let x = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            assert!(!a.observe(x).unwrap().is_drift());
        }
        assert_eq!(a.width(), 50_000);
    }

    #[test]
    fn reset_keeps_delta_and_replays() {
        let mut a = Adwin::new(0.001).unwrap();
        let stream: Vec<f64> = (0..3000).map(|i| if i < 1500 { 0.0 } else { 1.0 }).collect();
        let first = stream.iter().position(|&x| a.observe(x).unwrap().is_drift());
        a.reset();
        assert_eq!(a.delta(), 0.001);
        assert_eq!(a.width(), 0);
        let mut fresh = Adwin::new(0.001).unwrap();
        let replay = |d: &mut Adwin| stream.iter().position(|&x| d.observe(x).unwrap().is_drift());
        assert_eq!(replay(&mut a), replay(&mut fresh));
        assert!(first.is_some());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Adwin::new(0.0).is_err());
        assert!(Adwin::new(1.0).is_err());
        let mut a = Adwin::new(0.01).unwrap();
        assert!(a.observe(2.0).is_err());
    }

    proptest! {
        #[test]
        fn compression_preserves_totals(bits in proptest::collection::vec(any::<bool>(), 1..3000)) {
            let mut a = Adwin::with_params(0.001, 5, u64::MAX).unwrap();
            let mut ones = 0u64;
            for (i, &b) in bits.iter().enumerate() {
                a.observe(b as u8 as f64).unwrap();
                ones += b as u64;
                let width: u64 = a.buckets().map(|b| b.count).sum();
                let total: f64 = a.buckets().map(|b| b.sum).sum();
                prop_assert_eq!(width, i as u64 + 1);
                prop_assert_eq!(a.width(), width);
                prop_assert_eq!(total, ones as f64);
                prop_assert_eq!(a.total(), total);
            }
        }

        #[test]
        fn drops_only_oldest(
            p0 in 0.0f64..1.0,
            p1 in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = Adwin::new(0.01).unwrap();
            let mut since_drop = 0u64;
            let mut seen = Vec::new();
            for i in 0..4000 {
                let p = if i < 2000 { p0 } else { p1 };
                let x = if rng.random_bool(p) { 1.0 } else { 0.0 };
                seen.push(x);
                let drift = a.observe(x).unwrap().is_drift();
                since_drop += 1;
                prop_assert!(a.width() <= since_drop);
                // the window is always the most recent `width` values
                let w = a.width() as usize;
                let tail: f64 = seen[seen.len() - w..].iter().sum();
                prop_assert_eq!(tail, a.total());
                if drift {
                    since_drop = a.width();
                }
            }
        }
    }
}
