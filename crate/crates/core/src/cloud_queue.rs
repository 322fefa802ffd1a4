//! Trigger-time-ordered queue for cloud-bound tasks: admission checks,
//! deferred dispatch, just-in-time drops and work-stealing candidate
//! selection.

use serde::{Deserialize, Serialize};

use crate::edge_queue::EdgeQueue;
use crate::model::{steal_rank, DurMs, ModelId, ProfileTable, Task, TimeMs};

/// How the cloud scheduler admits and releases tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CloudAdmission {
    /// Accept deadline-feasible tasks with non-negative cloud utility and
    /// dispatch immediately (FIFO behavior).
    ImmediateNonNegative,
    /// Accept deadline-feasible tasks regardless of utility sign, dispatch
    /// immediately.
    ImmediateAnySign,
    /// Defer dispatch to a trigger time so the edge can steal; park
    /// negative-utility tasks until the latest viable edge start.
    Deferred,
}

#[derive(Debug, Clone)]
pub struct CloudEntry {
    pub task: Task,
    pub trigger_ts: TimeMs,
    pub negative_utility: bool,
    seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmitOutcome {
    Accepted {
        trigger_ts: TimeMs,
        negative_utility: bool,
    },
    /// The task cannot meet its deadline on the cloud (or, for a
    /// negative-utility task, can no longer be started on the edge in time).
    RejectedInfeasible,
    /// Policy refuses negative cloud utility outright.
    RejectedNegativeUtility,
}

/// What to do with an entry whose trigger time has passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DueAction {
    Dispatch,
    /// Dropped at the last moment. `expected_miss` marks drops caused by the
    /// current duration estimate predicting a deadline miss (these feed the
    /// adaptive estimator's skip clock); a negative-utility task expiring
    /// unstolen does not.
    JitDrop { expected_miss: bool },
}

/// Cloud-bound task queue ordered by trigger time (FIFO among equal
/// triggers). Single-writer via the simulation event loop.
#[derive(Debug, Clone)]
pub struct CloudQueue {
    entries: Vec<CloudEntry>,
    admission: CloudAdmission,
    safety_margin_ms: DurMs,
    next_seq: u64,
}

impl CloudQueue {
    pub fn new(admission: CloudAdmission, safety_margin_ms: DurMs) -> Self {
        CloudQueue {
            entries: Vec::new(),
            admission,
            safety_margin_ms,
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CloudEntry> {
        self.entries.iter()
    }

    fn push(&mut self, task: Task, trigger_ts: TimeMs, negative_utility: bool) {
        let pos = self.entries.partition_point(|e| e.trigger_ts <= trigger_ts);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.insert(
            pos,
            CloudEntry {
                task,
                trigger_ts,
                negative_utility,
                seq,
            },
        );
    }

    /// Admission test at `now` with the current expected cloud duration for
    /// the task's model. Accepted tasks are enqueued.
    pub fn admit(
        &mut self,
        profiles: &ProfileTable,
        task: Task,
        now: TimeMs,
        expected_cloud_ms: DurMs,
    ) -> AdmitOutcome {
        let profile = profiles.get(task.model);
        let deadline = task.deadline_abs();
        let negative = profile.cloud_utility() < 0;

        match self.admission {
            CloudAdmission::ImmediateNonNegative | CloudAdmission::ImmediateAnySign => {
                if negative && self.admission == CloudAdmission::ImmediateNonNegative {
                    return AdmitOutcome::RejectedNegativeUtility;
                }
                if now + expected_cloud_ms > deadline {
                    return AdmitOutcome::RejectedInfeasible;
                }
                self.push(task, now, false);
                AdmitOutcome::Accepted {
                    trigger_ts: now,
                    negative_utility: false,
                }
            }
            CloudAdmission::Deferred => {
                if negative {
                    // Latest instant the task could still start on the edge;
                    // being stolen is its only path to execution.
                    let trigger = deadline - profile.edge_ms;
                    if trigger < now {
                        return AdmitOutcome::RejectedInfeasible;
                    }
                    self.push(task, trigger, true);
                    AdmitOutcome::Accepted {
                        trigger_ts: trigger,
                        negative_utility: true,
                    }
                } else {
                    if now + expected_cloud_ms > deadline {
                        return AdmitOutcome::RejectedInfeasible;
                    }
                    let trigger = (deadline - expected_cloud_ms - self.safety_margin_ms).max(now);
                    self.push(task, trigger, false);
                    AdmitOutcome::Accepted {
                        trigger_ts: trigger,
                        negative_utility: false,
                    }
                }
            }
        }
    }

    pub fn peek_next_trigger(&self) -> Option<TimeMs> {
        self.entries.first().map(|e| e.trigger_ts)
    }

    /// Release every entry whose trigger has passed. Negative-utility entries
    /// expire (they only existed to be stolen); others re-verify the deadline
    /// against the current duration estimate and either dispatch or drop.
    ///
    /// `dispatch_capacity` bounds how many Dispatch actions may be emitted
    /// (the executor pool's free slots); processing stops at the first
    /// dispatchable entry that finds no slot, preserving trigger order.
    pub fn pop_due(
        &mut self,
        now: TimeMs,
        current_estimate: &dyn Fn(ModelId) -> DurMs,
        mut dispatch_capacity: usize,
    ) -> Vec<(Task, DueAction)> {
        let mut out = Vec::new();
        while let Some(head) = self.entries.first() {
            if head.trigger_ts > now {
                break;
            }
            if head.negative_utility {
                let e = self.entries.remove(0);
                out.push((e.task, DueAction::JitDrop {
                    expected_miss: false,
                }));
                continue;
            }
            let expected = current_estimate(head.task.model);
            if now + expected > head.task.deadline_abs() {
                let e = self.entries.remove(0);
                out.push((e.task, DueAction::JitDrop {
                    expected_miss: true,
                }));
                continue;
            }
            if dispatch_capacity == 0 {
                break;
            }
            dispatch_capacity -= 1;
            let e = self.entries.remove(0);
            out.push((e.task, DueAction::Dispatch));
        }
        out
    }

    /// Pick the best steal candidate fitting `slack`: it must finish on the
    /// edge within its deadline if started now and must not push any
    /// currently-feasible edge task past its own deadline. Negative cloud
    /// utility wins outright; ties go to higher utility-per-ms rank, then to
    /// the earlier trigger.
    pub fn select_steal(
        &mut self,
        profiles: &ProfileTable,
        slack: DurMs,
        now: TimeMs,
        edge: &EdgeQueue,
        edge_busy_until: TimeMs,
    ) -> Option<Task> {
        let mut best: Option<(usize, bool, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let p = profiles.get(e.task.model);
            if p.edge_ms > slack {
                continue;
            }
            if now + p.edge_ms > e.task.deadline_abs() {
                continue;
            }
            if !edge.tolerates_extra_delay(profiles, now, edge_busy_until, p.edge_ms) {
                continue;
            }
            let rank = steal_rank(p);
            let better = match &best {
                None => true,
                Some((_, best_neg, best_rank)) => {
                    (e.negative_utility, rank) > (*best_neg, *best_rank)
                }
            };
            if better {
                best = Some((i, e.negative_utility, rank));
            }
        }
        best.map(|(i, _, _)| {
            let mut entry = self.entries.remove(i);
            entry.task.stolen = true;
            entry.task
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::table1;

    fn task(profiles: &ProfileTable, id: u64, name: &str, arrival: TimeMs) -> Task {
        let model = profiles.id_of(name).unwrap();
        Task::new(id, model, arrival, 38_000, 0, 0, profiles.get(model))
    }

    #[test]
    fn deferred_admit_computes_trigger_with_margin() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        let hv = task(&t, 1, "HV", 0);
        let got = q.admit(&t, hv, 0, 398);
        assert_eq!(
            got,
            AdmitOutcome::Accepted {
                trigger_ts: 202,
                negative_utility: false
            }
        );
    }

    #[test]
    fn deferred_admit_parks_negative_utility_until_latest_edge_start() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        let bp = task(&t, 1, "BP", 0);
        let got = q.admit(&t, bp, 0, 542);
        assert_eq!(
            got,
            AdmitOutcome::Accepted {
                trigger_ts: 656,
                negative_utility: true
            }
        );
    }

    #[test]
    fn immediate_non_negative_rejects_negative_utility() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::ImmediateNonNegative, 50);
        let bp = task(&t, 1, "BP", 0);
        assert_eq!(q.admit(&t, bp, 0, 542), AdmitOutcome::RejectedNegativeUtility);
        assert!(q.is_empty());
    }

    #[test]
    fn immediate_any_sign_accepts_negative_utility() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::ImmediateAnySign, 50);
        let bp = task(&t, 1, "BP", 0);
        assert_eq!(
            q.admit(&t, bp, 0, 542),
            AdmitOutcome::Accepted {
                trigger_ts: 0,
                negative_utility: false
            }
        );
    }

    #[test]
    fn admit_rejects_deadline_infeasible() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        let hv = task(&t, 1, "HV", 0);
        // 300 + 398 > 650
        assert_eq!(q.admit(&t, hv, 300, 398), AdmitOutcome::RejectedInfeasible);
    }

    #[test]
    fn pop_due_dispatches_and_drops() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        q.admit(&t, task(&t, 1, "HV", 0), 0, 398); // trigger 202
        q.admit(&t, task(&t, 2, "BP", 0), 0, 542); // negative, trigger 656

        assert!(q.pop_due(100, &|_| 398, usize::MAX).is_empty());

        let due = q.pop_due(202, &|_| 398, usize::MAX);
        assert_eq!(due.len(), 1);
        assert_eq!(due[0].0.task_id, 1);
        assert_eq!(due[0].1, DueAction::Dispatch);

        // The unstolen negative-utility task expires at its trigger.
        let due = q.pop_due(656, &|_| 542, usize::MAX);
        assert_eq!(due.len(), 1);
        assert_eq!(due[0].0.task_id, 2);
        assert_eq!(due[0].1, DueAction::JitDrop { expected_miss: false });
        assert!(q.is_empty());
    }

    #[test]
    fn pop_due_jit_drops_when_estimate_inflated() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        q.admit(&t, task(&t, 1, "HV", 0), 0, 398); // trigger 202, deadline 650
        let due = q.pop_due(202, &|_| 600, usize::MAX);
        assert_eq!(due[0].1, DueAction::JitDrop { expected_miss: true });
    }

    #[test]
    fn pop_due_respects_dispatch_capacity() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::ImmediateNonNegative, 50);
        q.admit(&t, task(&t, 1, "HV", 0), 0, 398);
        q.admit(&t, task(&t, 2, "HV", 0), 0, 398);
        let due = q.pop_due(0, &|_| 398, 1);
        assert_eq!(due.len(), 1);
        assert_eq!(q.len(), 1, "second task waits for a free slot");
    }

    #[test]
    fn select_steal_prefers_negative_utility() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        q.admit(&t, task(&t, 1, "HV", 0), 0, 398);
        q.admit(&t, task(&t, 2, "BP", 0), 0, 542);
        let edge = EdgeQueue::new();
        let got = q.select_steal(&t, 300, 0, &edge, 0).unwrap();
        assert_eq!(got.task_id, 2, "negative-utility BP outranks HV");
        assert!(got.stolen);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn select_steal_orders_by_rank_among_positives() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        q.admit(&t, task(&t, 1, "HV", 0), 0, 398); // rank 24/174
        q.admit(&t, task(&t, 2, "DEO", 0), 0, 832); // rank 204/739
        let edge = EdgeQueue::new();
        let got = q.select_steal(&t, 800, 0, &edge, 0).unwrap();
        assert_eq!(got.task_id, 2, "higher utility gain per ms wins");
    }

    #[test]
    fn select_steal_skips_tasks_exceeding_slack_or_deadline() {
        let t = table1();
        let mut q = CloudQueue::new(CloudAdmission::Deferred, 50);
        q.admit(&t, task(&t, 1, "DEO", 0), 0, 832); // edge_ms 739
        let edge = EdgeQueue::new();
        assert!(q.select_steal(&t, 100, 0, &edge, 0).is_none(), "slack too small");
        // Enough slack but the deadline has nearly passed.
        assert!(q.select_steal(&t, 800, 900_000, &edge, 0).is_none());
        assert_eq!(q.len(), 1);
    }
}
