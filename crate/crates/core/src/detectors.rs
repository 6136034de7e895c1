//! Sequential stopping rules.
//!
//! The core object is a zero-clipped cumulative evidence test: the statistic
//! accumulates per-sample evidence, clips at zero, and alarms the first time
//! it reaches a threshold. Fed log-likelihood ratios it is the recursive
//! CUSUM; fed outlier evidence from a GEM baseline it is the ODIT detector.
//!
//! Two batch formulations of the same stopping rule are provided for
//! cross-checking: the classic maximum suffix sum and the discrepancy
//! statistic (maximum sum over any contiguous window). The two statistics
//! differ below their maxima but first cross any threshold at the same time,
//! and the recursion equals the suffix-sum statistic clipped at zero.

use crate::{Error, Result};

/// Zero-clipped cumulative evidence detector.
///
/// One logical updater per state: replaying a recorded evidence sequence
/// reproduces identical states bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialDetector {
    statistic: f64,
    t: u64,
    threshold: f64,
    stopped_at: Option<u64>,
}

impl SequentialDetector {
    /// `threshold` must be positive and finite, so the initial statistic of 0
    /// can never alarm on its own.
    pub fn new(threshold: f64) -> Result<Self> {
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(Error::invalid(
                "threshold",
                format!("must be positive and finite, got {threshold}"),
            ));
        }
        Ok(Self {
            statistic: 0.0,
            t: 0,
            threshold,
            stopped_at: None,
        })
    }

    /// Folds in the evidence for the next sample and reports whether the
    /// alarm fired at this step. Updating a stopped detector is an error;
    /// callers must `reset` first.
    pub fn update(&mut self, evidence: f64) -> Result<bool> {
        if let Some(t) = self.stopped_at {
            return Err(Error::AlreadyStopped(t));
        }
        if !evidence.is_finite() {
            return Err(Error::NonFinite {
                context: format!("evidence at t={}", self.t + 1),
            });
        }
        self.t += 1;
        self.statistic = (self.statistic + evidence).max(0.0);
        let alarm = self.statistic >= self.threshold;
        if alarm {
            self.stopped_at = Some(self.t);
        }
        Ok(alarm)
    }

    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    /// Samples consumed so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// The stopping time, set exactly at the first update whose statistic
    /// reached the threshold.
    pub fn stopped_at(&self) -> Option<u64> {
        self.stopped_at
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped_at.is_some()
    }

    pub fn reset(&mut self) {
        self.statistic = 0.0;
        self.t = 0;
        self.stopped_at = None;
    }
}

/// The zero-clipped running statistic for a whole evidence sequence.
pub fn zero_clipped_path(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc = (acc + v).max(0.0);
            acc
        })
        .collect()
}

/// Batch CUSUM statistic: the maximum over all suffixes ending at the last
/// sample of the suffix sum.
pub fn cusum_batch_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("batch statistic needs at least one value"));
    }
    let mut run = 0.0;
    let mut best = f64::NEG_INFINITY;
    for v in values.iter().rev() {
        run += v;
        if run > best {
            best = run;
        }
    }
    Ok(best)
}

/// Incremental discrepancy: maximum sum over any nonempty contiguous window,
/// maintained in O(1) per sample via the running prefix sum and its minimum.
#[derive(Debug, Clone)]
pub struct DiscrepancyTracker {
    prefix: f64,
    min_prefix: f64,
    best: f64,
    n: u64,
}

impl Default for DiscrepancyTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl DiscrepancyTracker {
    pub fn new() -> Self {
        Self {
            prefix: 0.0,
            min_prefix: 0.0,
            best: f64::NEG_INFINITY,
            n: 0,
        }
    }

    /// Pushes the next value and returns the updated discrepancy.
    pub fn push(&mut self, value: f64) -> f64 {
        self.prefix += value;
        let candidate = self.prefix - self.min_prefix;
        if candidate > self.best {
            self.best = candidate;
        }
        if self.prefix < self.min_prefix {
            self.min_prefix = self.prefix;
        }
        self.n += 1;
        self.best
    }

    /// The discrepancy of everything pushed so far; `None` while empty.
    pub fn value(&self) -> Option<f64> {
        (self.n > 0).then_some(self.best)
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Discrepancy of a sequence: maximum sum over all nonempty contiguous
/// windows. Equals the difference between the running sum's maximum and the
/// minimum preceding it.
pub fn discrepancy(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("discrepancy needs at least one value"));
    }
    let mut tracker = DiscrepancyTracker::new();
    let mut last = f64::NEG_INFINITY;
    for v in values {
        last = tracker.push(*v);
    }
    Ok(last)
}

/// Which statistic drives the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingStatistic {
    /// Maximum suffix sum, recomputed per prefix.
    BatchCusum,
    /// Maximum window sum, tracked incrementally.
    Discrepancy,
    /// Zero-clipped recursion.
    Recursive,
}

/// First 1-based prefix length at which the chosen statistic reaches
/// `threshold`, or `None` if it never does.
pub fn stopping_time(
    statistic: StoppingStatistic,
    values: &[f64],
    threshold: f64,
) -> Result<Option<usize>> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::invalid(
            "threshold",
            format!("must be positive and finite, got {threshold}"),
        ));
    }
    match statistic {
        StoppingStatistic::BatchCusum => {
            for t in 1..=values.len() {
                if cusum_batch_statistic(&values[..t])? >= threshold {
                    return Ok(Some(t));
                }
            }
            Ok(None)
        }
        StoppingStatistic::Discrepancy => {
            let mut tracker = DiscrepancyTracker::new();
            for (i, v) in values.iter().enumerate() {
                if tracker.push(*v) >= threshold {
                    return Ok(Some(i + 1));
                }
            }
            Ok(None)
        }
        StoppingStatistic::Recursive => {
            let mut acc = 0.0;
            for (i, v) in values.iter().enumerate() {
                acc = (acc + v).max(0.0);
                if acc >= threshold {
                    return Ok(Some(i + 1));
                }
            }
            Ok(None)
        }
    }
}
