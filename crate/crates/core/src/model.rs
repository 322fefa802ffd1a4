//! Domain types shared by every scheduling policy: per-model profiles, tasks,
//! task outcomes, QoE window counters, and the pure utility/scoring formulas.
//!
//! All clock values are virtual-time milliseconds and all utilities are exact
//! 64-bit integers, so golden-value tests compare with zero tolerance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Virtual timestamp in milliseconds.
pub type TimeMs = i64;
/// Duration in milliseconds.
pub type DurMs = i64;
/// Utility in normalized benefit units.
pub type Utility = i64;

/// Index of a model inside a [`ProfileTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelId(pub u16);

impl ModelId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Static per-model parameters: benefit, deadline, expected durations,
/// normalized per-execution costs and optional QoE window settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    #[serde(skip)]
    pub name: String,
    pub benefit: Utility,
    pub deadline_ms: DurMs,
    pub edge_ms: DurMs,
    /// Expected cloud duration from static benchmarking; never mutated.
    /// The adaptive estimator keeps its own working copy.
    pub cloud_ms: DurMs,
    pub edge_cost: Utility,
    pub cloud_cost: Utility,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qoe_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qoe_window_ms: Option<DurMs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qoe_bonus: Option<Utility>,
}

impl ModelProfile {
    /// Utility of a successful edge execution.
    pub fn edge_utility(&self) -> Utility {
        self.benefit - self.edge_cost
    }

    /// Utility of a successful cloud execution.
    pub fn cloud_utility(&self) -> Utility {
        self.benefit - self.cloud_cost
    }

    pub fn qoe_enabled(&self) -> bool {
        self.qoe_rate.is_some()
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidProfile {
                model: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.deadline_ms <= 0 {
            return bad("deadline_ms must be > 0");
        }
        if self.edge_ms <= 0 {
            return bad("edge_ms must be > 0");
        }
        if self.cloud_ms <= 0 {
            return bad("cloud_ms must be > 0");
        }
        if self.edge_cost < 0 || self.cloud_cost < 0 {
            return bad("costs must be >= 0");
        }
        match (self.qoe_rate, self.qoe_window_ms, self.qoe_bonus) {
            (None, None, None) => {}
            (Some(rate), Some(window), Some(_)) => {
                if !(rate > 0.0 && rate <= 1.0) {
                    return bad("qoe_rate must be in (0, 1]");
                }
                if window <= 0 {
                    return bad("qoe_window_ms must be > 0");
                }
            }
            _ => return bad("qoe_rate, qoe_window_ms and qoe_bonus must be set together"),
        }
        Ok(())
    }
}

/// Where (and whether) a task ran, relative to its deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Disposition {
    EdgeOnTime,
    EdgeMissed,
    CloudOnTime,
    CloudMissed,
    Dropped,
}

impl Disposition {
    pub fn on_time(self) -> bool {
        matches!(self, Disposition::EdgeOnTime | Disposition::CloudOnTime)
    }

    pub fn on_edge(self) -> bool {
        matches!(self, Disposition::EdgeOnTime | Disposition::EdgeMissed)
    }

    pub fn on_cloud(self) -> bool {
        matches!(self, Disposition::CloudOnTime | Disposition::CloudMissed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Disposition::EdgeOnTime => "edge_on_time",
            Disposition::EdgeMissed => "edge_missed",
            Disposition::CloudOnTime => "cloud_on_time",
            Disposition::CloudMissed => "cloud_missed",
            Disposition::Dropped => "dropped",
        }
    }
}

/// Per-task QoS utility: benefit minus the resource's normalized cost when the
/// deadline is met, the bare cost when missed, zero when dropped.
pub fn qos_utility(profile: &ModelProfile, disposition: Disposition) -> Utility {
    match disposition {
        Disposition::EdgeOnTime => profile.benefit - profile.edge_cost,
        Disposition::EdgeMissed => -profile.edge_cost,
        Disposition::CloudOnTime => profile.benefit - profile.cloud_cost,
        Disposition::CloudMissed => -profile.cloud_cost,
        Disposition::Dropped => 0,
    }
}

/// Migration score of a task: the edge-over-cloud utility advantage when the
/// cloud is a viable fallback, otherwise the full edge utility (losing the
/// task entirely forfeits it).
pub fn migration_score(profile: &ModelProfile, cloud_feasible: bool) -> Utility {
    let edge = profile.edge_utility();
    let cloud = profile.cloud_utility();
    if cloud_feasible && cloud > 0 {
        edge - cloud
    } else {
        edge
    }
}

/// Work-stealing rank: utility gained per millisecond of edge execution by
/// running this task on the edge instead of the cloud. Candidates with a
/// negative cloud utility are ordered ahead of any rank (they are lost
/// entirely if not stolen).
pub fn steal_rank(profile: &ModelProfile) -> f64 {
    (profile.edge_utility() - profile.cloud_utility()) as f64 / profile.edge_ms as f64
}

/// One inference request: a model applied to one video segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: u64,
    pub model: ModelId,
    pub arrival_ts: TimeMs,
    pub payload_bytes: u64,
    pub drone_id: u16,
    pub edge_id: u16,
    /// Deadline duration, fixed at creation from the profile.
    pub deadline_ms: DurMs,
    /// Deadline used for queue ordering and feasibility only. Equal to
    /// `deadline_ms` unless a policy explicitly buffers it; utility and
    /// on-time accounting always use the original deadline.
    pub sched_deadline_ms: DurMs,
    pub stolen: bool,
    pub gems_rescheduled: bool,
}

impl Task {
    pub fn new(
        task_id: u64,
        model: ModelId,
        arrival_ts: TimeMs,
        payload_bytes: u64,
        drone_id: u16,
        edge_id: u16,
        profile: &ModelProfile,
    ) -> Self {
        Task {
            task_id,
            model,
            arrival_ts,
            payload_bytes,
            drone_id,
            edge_id,
            deadline_ms: profile.deadline_ms,
            sched_deadline_ms: profile.deadline_ms,
            stolen: false,
            gems_rescheduled: false,
        }
    }

    /// Absolute deadline: segment creation time plus the model deadline.
    pub fn deadline_abs(&self) -> TimeMs {
        self.arrival_ts + self.deadline_ms
    }

    /// Absolute scheduling deadline (may be buffered, never used for utility).
    pub fn sched_deadline_abs(&self) -> TimeMs {
        self.arrival_ts + self.sched_deadline_ms
    }
}

/// Final record for one task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: u64,
    pub model: ModelId,
    pub drone_id: u16,
    pub edge_id: u16,
    pub arrival_ts: TimeMs,
    pub disposition: Disposition,
    pub start_ts: Option<TimeMs>,
    pub finish_ts: Option<TimeMs>,
    pub actual_duration_ms: Option<DurMs>,
    pub qos_utility: Utility,
    pub stolen: bool,
    pub gems_rescheduled: bool,
}

/// Per-model tumbling-window counters for the QoE monitor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowState {
    pub model: ModelId,
    pub window_start: TimeMs,
    pub window_end: TimeMs,
    /// Tasks of this model finalized within the window.
    pub total_count: u64,
    /// Subset that met their deadline.
    pub success_count: u64,
    /// QoE utility accrued across closed windows of this model.
    pub accrued_qoe: Utility,
}

impl WindowState {
    pub fn new(model: ModelId, window_start: TimeMs, window_ms: DurMs) -> Self {
        WindowState {
            model,
            window_start,
            window_end: window_start + window_ms,
            total_count: 0,
            success_count: 0,
            accrued_qoe: 0,
        }
    }

    /// Completion rate observed so far; defined as 0 for an empty window so
    /// that an empty-so-far window never looks like it is lagging.
    pub fn incremental_rate(&self) -> f64 {
        if self.total_count == 0 {
            0.0
        } else {
            self.success_count as f64 / self.total_count as f64
        }
    }
}

/// Window bonus: the full per-window bonus when the completion-rate threshold
/// was met by at least one task, zero otherwise.
pub fn qoe_window_utility(window: &WindowState, profile: &ModelProfile) -> Utility {
    let (Some(rate), Some(bonus)) = (profile.qoe_rate, profile.qoe_bonus) else {
        return 0;
    };
    if window.total_count > 0 && window.incremental_rate() >= rate {
        bonus
    } else {
        0
    }
}

/// The registered model set for one experiment, indexed by [`ModelId`].
#[derive(Debug, Clone)]
pub struct ProfileTable {
    profiles: Vec<ModelProfile>,
    by_name: HashMap<String, ModelId>,
}

impl ProfileTable {
    pub fn new(profiles: Vec<ModelProfile>) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, p) in profiles.iter().enumerate() {
            p.validate()?;
            if by_name.insert(p.name.clone(), ModelId(i as u16)).is_some() {
                return Err(Error::InvalidProfile {
                    model: p.name.clone(),
                    reason: "duplicate model id".to_string(),
                });
            }
        }
        Ok(ProfileTable { profiles, by_name })
    }

    pub fn get(&self, id: ModelId) -> &ModelProfile {
        &self.profiles[id.idx()]
    }

    pub fn id_of(&self, name: &str) -> Result<ModelId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn name(&self, id: ModelId) -> &str {
        &self.profiles[id.idx()].name
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ModelId> + '_ {
        (0..self.profiles.len()).map(|i| ModelId(i as u16))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModelId, &ModelProfile)> {
        self.profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (ModelId(i as u16), p))
    }

    /// Smallest expected edge duration across registered models; gates the
    /// work-stealing scan.
    pub fn min_edge_ms(&self) -> DurMs {
        self.profiles
            .iter()
            .map(|p| p.edge_ms)
            .min()
            .unwrap_or(DurMs::MAX)
    }

    /// Parse a profile document: a JSON object mapping model ids to their
    /// parameter records.
    pub fn from_json_str(s: &str) -> Result<Self> {
        use std::collections::BTreeMap;
        let doc: BTreeMap<String, ModelProfile> =
            serde_json::from_str(s).map_err(|e| Error::Parse {
                what: "profile table".to_string(),
                source: e,
            })?;
        let profiles = doc
            .into_iter()
            .map(|(name, mut p)| {
                p.name = name;
                p
            })
            .collect();
        ProfileTable::new(profiles)
    }

    pub fn to_json_string(&self) -> String {
        use std::collections::BTreeMap;
        let doc: BTreeMap<&str, &ModelProfile> = self
            .profiles
            .iter()
            .map(|p| (p.name.as_str(), p))
            .collect();
        serde_json::to_string_pretty(&doc).expect("profile table serializes")
    }
}

fn profile(
    name: &str,
    benefit: Utility,
    deadline_ms: DurMs,
    edge_ms: DurMs,
    cloud_ms: DurMs,
    edge_cost: Utility,
    cloud_cost: Utility,
) -> ModelProfile {
    ModelProfile {
        name: name.to_string(),
        benefit,
        deadline_ms,
        edge_ms,
        cloud_ms,
        edge_cost,
        cloud_cost,
        qoe_rate: None,
        qoe_window_ms: None,
        qoe_bonus: None,
    }
}

/// The six production models benchmarked on the Jetson-Nano-class edge.
///
/// Costs are the published normalized per-execution totals. MD's cloud cost is
/// stored as 25, the value consistent with its published cloud utility of 50;
/// the raw cost column (15) disagrees with that utility and the utility column
/// is authoritative here.
pub fn table1() -> ProfileTable {
    ProfileTable::new(vec![
        profile("HV", 125, 650, 174, 398, 1, 25),
        profile("DEV", 100, 750, 172, 429, 1, 26),
        profile("MD", 75, 850, 142, 589, 1, 25),
        profile("BP", 40, 900, 244, 542, 2, 43),
        profile("CD", 175, 1000, 563, 878, 4, 152),
        profile("DEO", 250, 950, 739, 832, 6, 210),
    ])
    .expect("builtin table is valid")
}

fn qoe_profile(
    name: &str,
    benefit: Utility,
    deadline_ms: DurMs,
    edge_ms: DurMs,
    cloud_ms: DurMs,
    edge_cost: Utility,
    cloud_cost: Utility,
    qoe_rate: f64,
    qoe_window_ms: DurMs,
    qoe_bonus: Utility,
) -> ModelProfile {
    ModelProfile {
        name: name.to_string(),
        benefit,
        deadline_ms,
        edge_ms,
        cloud_ms,
        edge_cost,
        cloud_cost,
        qoe_rate: Some(qoe_rate),
        qoe_window_ms: Some(qoe_window_ms),
        qoe_bonus: Some(qoe_bonus),
    }
}

/// First QoE workload: four models with sleep-calibrated durations. Benefits
/// and costs carry over from [`table1`]; deadlines, durations and window
/// bonuses are specific to this workload.
pub fn wl1(qoe_rate: f64, qoe_window_ms: DurMs) -> ProfileTable {
    ProfileTable::new(vec![
        qoe_profile("HV", 125, 400, 100, 200, 1, 25, qoe_rate, qoe_window_ms, 360),
        qoe_profile("DEV", 100, 600, 300, 400, 1, 26, qoe_rate, qoe_window_ms, 420),
        qoe_profile("MD", 75, 1000, 200, 300, 1, 25, qoe_rate, qoe_window_ms, 480),
        qoe_profile("CD", 175, 800, 650, 750, 4, 152, qoe_rate, qoe_window_ms, 600),
    ])
    .expect("builtin table is valid")
}

/// Second QoE workload; MD and CD swap tightness relative to WL1.
pub fn wl2(qoe_rate: f64, qoe_window_ms: DurMs) -> ProfileTable {
    ProfileTable::new(vec![
        qoe_profile("HV", 125, 400, 100, 200, 1, 25, qoe_rate, qoe_window_ms, 360),
        qoe_profile("DEV", 100, 600, 300, 400, 1, 26, qoe_rate, qoe_window_ms, 420),
        qoe_profile("MD", 75, 800, 200, 300, 1, 25, qoe_rate, qoe_window_ms, 480),
        qoe_profile("CD", 175, 1000, 750, 950, 4, 152, qoe_rate, qoe_window_ms, 600),
    ])
    .expect("builtin table is valid")
}
