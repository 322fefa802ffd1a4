//! Priority queue for edge-bound tasks with pluggable ordering (EDF and the
//! baseline orders), feasibility scanning, and the migration decision taken on
//! insertion.

use serde::{Deserialize, Serialize};

use crate::model::{migration_score, DurMs, ModelId, ProfileTable, Task, TimeMs, Utility};

/// Priority key used by the edge queue. Lower sorts first; ties are FIFO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeOrder {
    /// Earliest absolute deadline first.
    Edf,
    /// Shortest expected edge duration first.
    ShortestJob,
    /// Highest edge utility per unit execution time first.
    HighestUtilityRate,
    /// Expected edge duration ascending (kept distinct so a baseline can use
    /// it without implying shortest-job semantics elsewhere).
    ExecTimeAsc,
}

impl EdgeOrder {
    /// Priority key for `task` under this ordering.
    pub fn key(self, profiles: &ProfileTable, task: &Task) -> i64 {
        let p = profiles.get(task.model);
        match self {
            EdgeOrder::Edf => task.sched_deadline_abs(),
            EdgeOrder::ShortestJob | EdgeOrder::ExecTimeAsc => p.edge_ms,
            // Descending utility-per-time, scaled to keep integer ordering.
            EdgeOrder::HighestUtilityRate => -(p.edge_utility() * 1_000_000 / p.edge_ms),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EdgeEntry {
    pub task: Task,
    pub key: i64,
    seq: u64,
}

/// What `insert_with_migration` decided for a candidate task.
#[derive(Debug)]
pub enum InsertionDecision {
    /// Candidate inserted; no queued task was displaced.
    InsertEdge,
    /// Candidate inserted; these previously queued tasks must move to the
    /// cloud (removed atomically with the insertion).
    InsertEdgeAndMigrate(Vec<Task>),
    /// Queue unchanged; the candidate goes to the cloud instead.
    RedirectCloud,
}

/// Ordered queue of pending edge tasks. Single-writer: only the simulation
/// event loop mutates it.
#[derive(Debug, Clone, Default)]
pub struct EdgeQueue {
    entries: Vec<EdgeEntry>,
    next_seq: u64,
}

impl EdgeQueue {
    pub fn new() -> Self {
        EdgeQueue::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EdgeEntry> {
        self.entries.iter()
    }

    /// Position a task with `key` would occupy (FIFO among equal keys).
    fn insertion_point(&self, key: i64) -> usize {
        self.entries.partition_point(|e| e.key <= key)
    }

    pub fn insert(&mut self, task: Task, key: i64) {
        let pos = self.insertion_point(key);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.insert(pos, EdgeEntry { task, key, seq });
    }

    pub fn peek_head(&self) -> Option<&EdgeEntry> {
        self.entries.first()
    }

    /// Remove and return the highest-priority task.
    pub fn pop_head(&mut self) -> Option<Task> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.remove(0).task)
        }
    }

    /// Expected execution time of all entries ahead of a hypothetical task
    /// with priority `key`.
    fn work_ahead_of(&self, profiles: &ProfileTable, key: i64) -> DurMs {
        self.entries[..self.insertion_point(key)]
            .iter()
            .map(|e| profiles.get(e.task.model).edge_ms)
            .sum()
    }

    /// Whether a candidate would meet its own deadline given the tasks ahead
    /// of its priority position plus the remainder of the in-flight task.
    pub fn feasibility_check(
        &self,
        profiles: &ProfileTable,
        candidate: &Task,
        key: i64,
        now: TimeMs,
        busy_until: TimeMs,
    ) -> bool {
        let start = now.max(busy_until);
        let ahead = self.work_ahead_of(profiles, key);
        start + ahead + profiles.get(candidate.model).edge_ms <= candidate.sched_deadline_abs()
    }

    /// Completion times of every queued entry under the current schedule, with
    /// an optional extra busy period of `extra` at the front and an optional
    /// hypothetical insertion of `(key, edge_ms)`.
    fn completion_ok(
        &self,
        profiles: &ProfileTable,
        now: TimeMs,
        busy_until: TimeMs,
        extra: DurMs,
        hypo: Option<(i64, DurMs)>,
    ) -> Vec<bool> {
        let start = now.max(busy_until) + extra;
        let pos = hypo.map(|(key, _)| self.insertion_point(key));
        let mut clock = start;
        let mut ok = Vec::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            if Some(i) == pos {
                clock += hypo.unwrap().1;
            }
            clock += profiles.get(e.task.model).edge_ms;
            ok.push(clock <= e.task.sched_deadline_abs());
        }
        ok
    }

    /// Whether every entry that currently meets its deadline still would if
    /// the edge first spent `extra` ms on other work. Used by the
    /// work-stealing eligibility check.
    pub fn tolerates_extra_delay(
        &self,
        profiles: &ProfileTable,
        now: TimeMs,
        busy_until: TimeMs,
        extra: DurMs,
    ) -> bool {
        let before = self.completion_ok(profiles, now, busy_until, 0, None);
        let after = self.completion_ok(profiles, now, busy_until, extra, None);
        before.iter().zip(&after).all(|(b, a)| !b || *a)
    }

    /// Insert `candidate` (which already passed its own feasibility check),
    /// migrating out lower-priority tasks when the score comparison favors the
    /// candidate. `cloud_feasible` is the cloud-admission deadline test for a
    /// displaced task, evaluated at `now`.
    pub fn insert_with_migration(
        &mut self,
        profiles: &ProfileTable,
        candidate: Task,
        key: i64,
        now: TimeMs,
        busy_until: TimeMs,
        cloud_feasible: &dyn Fn(&Task) -> bool,
    ) -> InsertionDecision {
        let cand_profile = profiles.get(candidate.model);
        let before = self.completion_ok(profiles, now, busy_until, 0, None);
        let after = self.completion_ok(
            profiles,
            now,
            busy_until,
            0,
            Some((key, cand_profile.edge_ms)),
        );
        let displaced: Vec<usize> = (0..self.entries.len())
            .filter(|&i| before[i] && !after[i])
            .collect();

        if displaced.is_empty() {
            self.insert(candidate, key);
            return InsertionDecision::InsertEdge;
        }

        let displaced_score: Utility = displaced
            .iter()
            .map(|&i| {
                let t = &self.entries[i].task;
                migration_score(profiles.get(t.model), cloud_feasible(t))
            })
            .sum();
        let candidate_score = migration_score(cand_profile, cloud_feasible(&candidate));

        if displaced_score < candidate_score {
            let mut out = Vec::with_capacity(displaced.len());
            for &i in displaced.iter().rev() {
                out.push(self.entries.remove(i).task);
            }
            out.reverse();
            self.insert(candidate, key);
            InsertionDecision::InsertEdgeAndMigrate(out)
        } else {
            InsertionDecision::RedirectCloud
        }
    }

    /// Remove, in head-to-tail scan order, every queued task of `model`
    /// accepted by `pred`. Remaining order is untouched.
    pub fn remove_tasks_of_model(
        &mut self,
        model: ModelId,
        mut pred: impl FnMut(&Task) -> bool,
    ) -> Vec<Task> {
        let mut removed = Vec::new();
        let mut i = 0;
        while i < self.entries.len() {
            if self.entries[i].task.model == model && pred(&self.entries[i].task) {
                removed.push(self.entries.remove(i).task);
            } else {
                i += 1;
            }
        }
        removed
    }

    #[cfg(test)]
    fn is_sorted(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| (w[0].key, w[0].seq) < (w[1].key, w[1].seq))
    }
}
