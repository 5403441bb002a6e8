//! Wire types: the session snapshot, event envelopes and request bodies.

use partnr::experiment::{ExperimentConfig, SeedMetrics};
use partnr::sim::{Role, SceneState};
use partnr::threshold::FlagCounts;
use partnr::{Pixel, Verdict};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherMode {
    #[default]
    Human,
    /// In-process scripted expert and correction oracle.
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Created, waiting for a client before the offline phase starts.
    Waiting,
    /// Collecting offline demonstrations and training on them.
    Preparing,
    Running,
    AwaitingPick,
    AwaitingPlace,
    CorrectionWindow,
    Finished,
    Failed,
}

impl Status {
    pub fn is_active(self) -> bool {
        !matches!(self, Status::Finished | Status::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximumView {
    pub u: usize,
    pub v: usize,
    pub value: f64,
    /// Value on the rescaled heatmap.
    pub normalized: f64,
    /// `None` for the global maximum, whose persistence is unbounded.
    pub persistence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleView {
    pub width: usize,
    pub height: usize,
    /// Row-major, rescaled so the minimum is 0 and the maximum 1.
    pub heatmap: Vec<f64>,
    pub maxima: Vec<MaximumView>,
    pub p_hat: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub u: usize,
    pub v: usize,
    pub value: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    /// Answer with this id; it is the snapshot version that opened the query.
    pub id: u64,
    pub role: Role,
    pub candidates: Vec<CandidateView>,
    /// Executed pick a place query is conditioned on.
    pub condition: Option<Pixel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionWindow {
    pub id: u64,
    pub role: Role,
    pub executed: Pixel,
    pub condition: Option<Pixel>,
    /// Zero when the scripted oracle answers immediately.
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastAction {
    pub t: u64,
    pub role: Role,
    pub pixel: Pixel,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleTelemetry {
    pub threshold: f64,
    pub sensitivity_est: f64,
    pub specificity_est: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningTelemetry {
    pub flags: FlagCounts,
    pub pick: Option<RoleTelemetry>,
    pub place: Option<RoleTelemetry>,
    pub steps: u64,
    pub successes: usize,
    pub success_rate: Option<f64>,
    pub interactive_demos: usize,
    pub interactive_target: usize,
    pub dataset_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneImage {
    pub width: usize,
    pub height: usize,
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub version: u64,
    pub status: Status,
    pub teacher: TeacherMode,
    pub seed: u64,
    pub t: u64,
    pub episode: u64,
    pub command: Option<String>,
    pub image: Option<SceneImage>,
    pub scene: Option<SceneState>,
    pub pick: Option<RoleView>,
    pub place: Option<RoleView>,
    pub pending_query: Option<PendingQuery>,
    pub correction_window: Option<CorrectionWindow>,
    pub last_action: Option<LastAction>,
    pub telemetry: RunningTelemetry,
    /// Evaluation of the final model, once finished.
    pub metrics: Option<SeedMetrics>,
    pub error: Option<String>,
}

impl SessionSnapshot {
    pub fn role(&self, role: Role) -> Option<&RoleView> {
        match role {
            Role::Pick => self.pick.as_ref(),
            Role::Place => self.place.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Preparing,
    StepStarted,
    Gated,
    QueryPending,
    QueryResolved,
    ActionExecuted,
    CorrectionWindowOpen,
    CorrectionWindowClosed,
    Retrained,
    StepFinished,
    StepAborted,
    EpisodeDone,
    SessionFinished,
    SessionFailed,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Preparing => "preparing",
            EventKind::StepStarted => "step_started",
            EventKind::Gated => "gated",
            EventKind::QueryPending => "query_pending",
            EventKind::QueryResolved => "query_resolved",
            EventKind::ActionExecuted => "action_executed",
            EventKind::CorrectionWindowOpen => "correction_window_open",
            EventKind::CorrectionWindowClosed => "correction_window_closed",
            EventKind::Retrained => "retrained",
            EventKind::StepFinished => "step_finished",
            EventKind::StepAborted => "step_aborted",
            EventKind::EpisodeDone => "episode_done",
            EventKind::SessionFinished => "session_finished",
            EventKind::SessionFailed => "session_failed",
        }
    }
}

/// One pushed event. Every snapshot version has exactly one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub version: u64,
    pub kind: EventKind,
    pub t: u64,
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub config: ExperimentConfig,
    /// Defaults to the first configured seed.
    pub seed: Option<u64>,
    pub teacher: TeacherMode,
    /// How long an autonomous act stays open for correction; 5000 for a
    /// human teacher.
    pub correction_window_ms: Option<u64>,
    /// Unanswered queries abort the step after this long; the step is then
    /// replayed. Defaults to 300000 for a human teacher.
    pub query_timeout_ms: Option<u64>,
    /// Start without waiting for an event-stream client. Defaults to true
    /// for the scripted teacher.
    pub autostart: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemonstrationPost {
    pub query_id: u64,
    pub role: Role,
    /// `[u, v]`.
    pub pixel: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionPost {
    pub window_id: u64,
    pub role: Role,
    /// `null` confirms the executed action.
    pub pixel: Option<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: bool,
    pub id: u64,
}
