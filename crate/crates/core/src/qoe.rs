//! Per-model tumbling-window completion-rate tracking. The monitor reports
//! when a model falls behind its required rate so the scheduler can greedily
//! reschedule that model's pending edge tasks to the cloud, and it accrues the
//! per-window bonus whenever a closed window met the rate.

use serde::{Deserialize, Serialize};

use crate::model::{qoe_window_utility, ModelId, ProfileTable, TimeMs, Utility, WindowState};

/// One closed window, for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowRecord {
    pub model: ModelId,
    pub window_start: TimeMs,
    pub window_end: TimeMs,
    pub total_count: u64,
    pub success_count: u64,
    pub rate: f64,
    pub accrued_qoe: Utility,
}

/// Result of recording one finalized task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QoeUpdate {
    /// The model's incremental completion rate fell below its required rate;
    /// the caller should scan the edge queue for rescheduling candidates.
    pub lagging: bool,
}

#[derive(Debug, Clone)]
pub struct QoeMonitor {
    windows: Vec<Option<WindowState>>,
    pub total_qoe: Utility,
    pub records: Vec<WindowRecord>,
}

impl QoeMonitor {
    /// Open the first window (starting at time 0) for every QoE-enabled
    /// model.
    pub fn new(profiles: &ProfileTable) -> Self {
        let windows = profiles
            .iter()
            .map(|(id, p)| p.qoe_window_ms.map(|w| WindowState::new(id, 0, w)))
            .collect();
        QoeMonitor {
            windows,
            total_qoe: 0,
            records: Vec::new(),
        }
    }

    pub fn enabled_for(&self, model: ModelId) -> bool {
        self.windows[model.idx()].is_some()
    }

    pub fn window_end(&self, model: ModelId) -> Option<TimeMs> {
        self.windows[model.idx()].as_ref().map(|w| w.window_end)
    }

    pub fn window(&self, model: ModelId) -> Option<&WindowState> {
        self.windows[model.idx()].as_ref()
    }

    /// Close the model's current window: accrue the bonus if the rate was
    /// met, record it, and tumble to the next window.
    fn close_and_tumble(&mut self, profiles: &ProfileTable, model: ModelId) -> Utility {
        let profile = profiles.get(model);
        let w = self.windows[model.idx()]
            .as_mut()
            .expect("close_and_tumble only called for QoE-enabled models");
        let accrued = qoe_window_utility(w, profile);
        w.accrued_qoe += accrued;
        self.total_qoe += accrued;
        self.records.push(WindowRecord {
            model,
            window_start: w.window_start,
            window_end: w.window_end,
            total_count: w.total_count,
            success_count: w.success_count,
            rate: w.incremental_rate(),
            accrued_qoe: accrued,
        });
        let width = profile.qoe_window_ms.expect("qoe enabled");
        w.window_start = w.window_end;
        w.window_end += width;
        w.total_count = 0;
        w.success_count = 0;
        accrued
    }

    /// Record a task finalization (completion or drop) at `ts`. A timestamp
    /// exactly on the window boundary belongs to the closing window; anything
    /// later tumbles the window first.
    pub fn on_task_finalized(
        &mut self,
        profiles: &ProfileTable,
        model: ModelId,
        ts: TimeMs,
        deadline_met: bool,
    ) -> QoeUpdate {
        if self.windows[model.idx()].is_none() {
            return QoeUpdate { lagging: false };
        }
        while self.windows[model.idx()].as_ref().unwrap().window_end < ts {
            self.close_and_tumble(profiles, model);
        }
        let profile = profiles.get(model);
        let rate_required = profile.qoe_rate.expect("qoe enabled");
        let w = self.windows[model.idx()].as_mut().unwrap();
        w.total_count += 1;
        if deadline_met {
            w.success_count += 1;
        }
        let lagging = w.incremental_rate() < rate_required;
        if self.windows[model.idx()].as_ref().unwrap().window_end == ts {
            self.close_and_tumble(profiles, model);
        }
        QoeUpdate { lagging }
    }

    /// Window-boundary timer: close every window of `model` that ends at or
    /// before `ts`, then return the next boundary to schedule.
    pub fn on_timer(&mut self, profiles: &ProfileTable, model: ModelId, ts: TimeMs) -> Option<TimeMs> {
        self.windows[model.idx()].as_ref()?;
        while self.windows[model.idx()].as_ref().unwrap().window_end <= ts {
            self.close_and_tumble(profiles, model);
        }
        self.window_end(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::wl1;

    #[test]
    fn boundary_rate_is_not_lagging() {
        let t = wl1(0.9, 20_000);
        let dev = t.id_of("DEV").unwrap();
        let mut m = QoeMonitor::new(&t);
        for _ in 0..9 {
            assert!(!m.on_task_finalized(&t, dev, 100, true).lagging);
        }
        // 9/10 == 0.9 exactly: not lagging.
        assert!(!m.on_task_finalized(&t, dev, 200, false).lagging);
        // 9/11 < 0.9: lagging.
        assert!(m.on_task_finalized(&t, dev, 300, false).lagging);
    }

    #[test]
    fn window_close_accrues_bonus_when_rate_met() {
        let t = wl1(0.9, 20_000);
        let dev = t.id_of("DEV").unwrap();
        let mut m = QoeMonitor::new(&t);
        for i in 0..55 {
            m.on_task_finalized(&t, dev, 100 + i, true);
        }
        for i in 0..5 {
            m.on_task_finalized(&t, dev, 200 + i, false);
        }
        assert_eq!(m.on_timer(&t, dev, 20_000), Some(40_000));
        assert_eq!(m.total_qoe, 420, "55/60 meets 0.9");
        let rec = &m.records[0];
        assert_eq!(rec.total_count, 60);
        assert_eq!(rec.success_count, 55);
        assert_eq!(rec.window_start, 0);
        assert_eq!(rec.window_end, 20_000);
    }

    #[test]
    fn empty_window_closes_with_zero() {
        let t = wl1(0.9, 20_000);
        let hv = t.id_of("HV").unwrap();
        let mut m = QoeMonitor::new(&t);
        m.on_timer(&t, hv, 20_000);
        assert_eq!(m.total_qoe, 0);
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.records[0].total_count, 0);
    }

    #[test]
    fn strict_rate_misses_by_one() {
        let t = wl1(1.0, 20_000);
        let dev = t.id_of("DEV").unwrap();
        let mut m = QoeMonitor::new(&t);
        for _ in 0..59 {
            m.on_task_finalized(&t, dev, 50, true);
        }
        m.on_task_finalized(&t, dev, 60, false);
        m.on_timer(&t, dev, 20_000);
        assert_eq!(m.total_qoe, 0, "59/60 < 1.0");
    }

    #[test]
    fn finalization_on_boundary_belongs_to_closing_window() {
        let t = wl1(0.9, 20_000);
        let dev = t.id_of("DEV").unwrap();
        let mut m = QoeMonitor::new(&t);
        m.on_task_finalized(&t, dev, 20_000, true);
        // The boundary completion closed the window itself.
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.records[0].total_count, 1);
        assert_eq!(m.records[0].accrued_qoe, 420);
        assert_eq!(m.window_end(dev), Some(40_000));
        // A later timer for the already-closed boundary is a no-op.
        assert_eq!(m.on_timer(&t, dev, 20_000), Some(40_000));
        assert_eq!(m.records.len(), 1);
    }

    #[test]
    fn late_finalization_tumbles_windows_first() {
        let t = wl1(0.9, 20_000);
        let dev = t.id_of("DEV").unwrap();
        let mut m = QoeMonitor::new(&t);
        m.on_task_finalized(&t, dev, 45_000, true);
        // Windows (0, 20k] and (20k, 40k] closed empty; the task landed in
        // (40k, 60k].
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.window(dev).unwrap().total_count, 1);
        assert_eq!(m.window(dev).unwrap().window_start, 40_000);
    }

    #[test]
    fn disabled_model_is_ignored() {
        let t = crate::model::table1();
        let hv = t.id_of("HV").unwrap();
        let mut m = QoeMonitor::new(&t);
        assert!(!m.enabled_for(hv));
        let upd = m.on_task_finalized(&t, hv, 100, false);
        assert!(!upd.lagging);
        assert_eq!(m.on_timer(&t, hv, 20_000), None);
    }

    #[test]
    fn windows_tumble_gaplessly() {
        let t = wl1(0.9, 20_000);
        let dev = t.id_of("DEV").unwrap();
        let mut m = QoeMonitor::new(&t);
        for k in 0..5 {
            m.on_task_finalized(&t, dev, k * 20_000 + 10, true);
        }
        for w in m.records.windows(2) {
            assert_eq!(w[0].window_end, w[1].window_start, "no gaps, no overlap");
        }
    }
}
