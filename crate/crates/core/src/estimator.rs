//! Per-model sliding-window estimation of cloud execution duration, with a
//! one-directional threshold update and a cooling-period reset that recovers
//! from estimates inflated past the point where no task is ever sent again.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{DurMs, ModelId, ProfileTable, TimeMs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    /// Sliding window capacity (samples).
    pub window: usize,
    /// Minimum upward drift of the window mean before the estimate moves.
    pub epsilon_ms: DurMs,
    /// How long tasks may be skipped for expected deadline misses before the
    /// estimate resets to its static default.
    pub cooling_ms: DurMs,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            window: 10,
            epsilon_ms: 10,
            cooling_ms: 10_000,
        }
    }
}

/// Working estimate of one model's cloud duration.
#[derive(Debug, Clone)]
pub struct CloudEstimator {
    buffer: VecDeque<DurMs>,
    current_estimate: DurMs,
    static_default: DurMs,
    params: EstimatorParams,
    /// Set at the first skip after the most recent dispatch or observation;
    /// cleared by either. While set, the cooling clock is running.
    cooling_since: Option<TimeMs>,
    last_cloud_attempt_ts: TimeMs,
}

impl CloudEstimator {
    pub fn new(static_default: DurMs, params: EstimatorParams) -> Self {
        CloudEstimator {
            buffer: VecDeque::with_capacity(params.window),
            current_estimate: static_default,
            static_default,
            params,
            cooling_since: None,
            last_cloud_attempt_ts: 0,
        }
    }

    pub fn current_estimate(&self) -> DurMs {
        self.current_estimate
    }

    pub fn static_default(&self) -> DurMs {
        self.static_default
    }

    /// Record an observed end-to-end cloud duration. The estimate only moves
    /// up, and only when the window mean exceeds it by more than epsilon.
    pub fn observe(&mut self, actual_cloud_ms: DurMs, now: TimeMs) {
        debug_assert!(actual_cloud_ms > 0);
        if self.buffer.len() == self.params.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(actual_cloud_ms);
        let mean = self.buffer.iter().sum::<i64>() as f64 / self.buffer.len() as f64;
        if mean - self.current_estimate as f64 > self.params.epsilon_ms as f64 {
            self.current_estimate = mean.round() as DurMs;
        }
        self.last_cloud_attempt_ts = now;
        self.cooling_since = None;
    }

    /// Record that a task of this model was sent to the cloud.
    pub fn record_dispatch(&mut self, now: TimeMs) {
        self.last_cloud_attempt_ts = now;
        self.cooling_since = None;
    }

    /// Record that a task was skipped for the cloud because the current
    /// estimate predicted a deadline miss. Starts the cooling clock if it is
    /// not already running.
    pub fn record_skip(&mut self, now: TimeMs) {
        self.cooling_since.get_or_insert(now);
    }

    /// Reset the estimate to the static default once tasks have been skipped
    /// continuously for at least the cooling period. Returns whether the
    /// reset fired.
    pub fn maybe_reset(&mut self, now: TimeMs) -> bool {
        match self.cooling_since {
            Some(since) if now - since >= self.params.cooling_ms => {
                self.current_estimate = self.static_default;
                self.buffer.clear();
                self.cooling_since = None;
                true
            }
            _ => false,
        }
    }
}

/// One estimator per model. Policies without adaptation keep this disabled
/// and always read the static defaults.
#[derive(Debug, Clone)]
pub struct CloudEstimates {
    estimators: Option<Vec<CloudEstimator>>,
}

impl CloudEstimates {
    pub fn new(profiles: &ProfileTable, params: Option<EstimatorParams>) -> Self {
        CloudEstimates {
            estimators: params.map(|p| {
                profiles
                    .iter()
                    .map(|(_, profile)| CloudEstimator::new(profile.cloud_ms, p))
                    .collect()
            }),
        }
    }

    pub fn adaptive(&self) -> bool {
        self.estimators.is_some()
    }

    /// Current expected cloud duration for `model`, applying a pending
    /// cooling reset first.
    pub fn current(&mut self, profiles: &ProfileTable, model: ModelId, now: TimeMs) -> DurMs {
        match &mut self.estimators {
            Some(es) => {
                let e = &mut es[model.idx()];
                e.maybe_reset(now);
                e.current_estimate()
            }
            None => profiles.get(model).cloud_ms,
        }
    }

    /// Read-only view without triggering resets (for JIT checks inside a
    /// single event where `current` already ran).
    pub fn peek(&self, profiles: &ProfileTable, model: ModelId) -> DurMs {
        match &self.estimators {
            Some(es) => es[model.idx()].current_estimate(),
            None => profiles.get(model).cloud_ms,
        }
    }

    pub fn observe(&mut self, model: ModelId, actual_cloud_ms: DurMs, now: TimeMs) {
        if let Some(es) = &mut self.estimators {
            es[model.idx()].observe(actual_cloud_ms, now);
        }
    }

    pub fn record_dispatch(&mut self, model: ModelId, now: TimeMs) {
        if let Some(es) = &mut self.estimators {
            es[model.idx()].record_dispatch(now);
        }
    }

    pub fn record_skip(&mut self, model: ModelId, now: TimeMs) {
        if let Some(es) = &mut self.estimators {
            es[model.idx()].record_skip(now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimator() -> CloudEstimator {
        CloudEstimator::new(398, EstimatorParams::default())
    }

    #[test]
    fn estimate_unchanged_when_mean_equals_estimate() {
        let mut e = estimator();
        for i in 0..10 {
            e.observe(398, i * 100);
        }
        assert_eq!(e.current_estimate(), 398);
    }

    #[test]
    fn estimate_jumps_when_mean_exceeds_threshold() {
        let mut e = estimator();
        for i in 0..10 {
            e.observe(798, i * 100);
        }
        assert_eq!(e.current_estimate(), 798);
    }

    #[test]
    fn estimate_holds_within_epsilon() {
        let mut e = estimator();
        // Window mean 405: drift of 7 is within epsilon = 10.
        for i in 0..10 {
            e.observe(405, i * 100);
        }
        assert_eq!(e.current_estimate(), 398);
    }

    #[test]
    fn estimate_moves_on_first_sample_past_threshold() {
        let mut e = estimator();
        e.observe(798, 0);
        // Single-sample mean 798 exceeds 398 + 10.
        assert_eq!(e.current_estimate(), 798);
    }

    #[test]
    fn cooling_reset_after_continuous_skips() {
        let mut e = estimator();
        for i in 0..10 {
            e.observe(60_000, i);
        }
        assert_eq!(e.current_estimate(), 60_000);
        e.record_skip(1_000);
        assert!(!e.maybe_reset(6_000), "5 s of skips is below the period");
        assert!(e.maybe_reset(11_000), "10 s of skips resets");
        assert_eq!(e.current_estimate(), 398);
    }

    #[test]
    fn dispatch_restarts_cooling_clock() {
        let mut e = estimator();
        e.record_skip(0);
        e.record_dispatch(9_000);
        assert!(!e.maybe_reset(10_000));
        e.record_skip(10_000);
        assert!(e.maybe_reset(20_000));
    }

    #[test]
    fn reset_is_idempotent_at_default() {
        let mut e = estimator();
        e.record_skip(0);
        assert!(e.maybe_reset(10_000), "reset fires even at the default");
        assert_eq!(e.current_estimate(), 398);
        assert!(!e.maybe_reset(20_000), "clock cleared until the next skip");
    }

    #[test]
    fn estimate_never_decreases_except_via_reset() {
        let mut e = estimator();
        for i in 0..10 {
            e.observe(800, i);
        }
        assert_eq!(e.current_estimate(), 800);
        for i in 10..30 {
            e.observe(100, i);
        }
        assert_eq!(e.current_estimate(), 800, "downward drift is ignored");
    }

    #[test]
    fn post_reset_window_fully_determines_estimate() {
        let mut e = estimator();
        for i in 0..10 {
            e.observe(2_000, i);
        }
        e.record_skip(100);
        assert!(e.maybe_reset(20_000));
        // Ten fresh samples: no stale 2000s contribute to the mean.
        for i in 0..10 {
            e.observe(500, 20_000 + i);
        }
        assert_eq!(e.current_estimate(), 500);
    }
}
