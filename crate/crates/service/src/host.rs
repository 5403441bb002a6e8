//! The session loop thread and the state it shares with request handlers.
//!
//! The loop owns the [`Session`] and is the only writer of the snapshot.
//! Handlers read snapshots and hand answers to the loop through a queue;
//! the inbox records which query or correction window may be answered, so
//! each one is resolved at most once.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;
use partnr::dataset::Dataset;
use partnr::experiment::{finish_session, scripted_teacher, start_session, wants_step, ExperimentConfig};
use partnr::session::{Session, SessionEvent};
use partnr::sim::{render, Role};
use partnr::teacher::{CorrectionContext, QueryContext, ScriptedTeacher, Teacher, TeacherError};
use partnr::telemetry::{write_csv, TelemetryRow};
use partnr::threshold::FlagCounts;
use partnr::{Error, Pixel};
use serde_json::json;
use tokio::sync::broadcast;

use crate::snapshot::*;

const HUMAN_CORRECTION_WINDOW_MS: u64 = 5_000;
const HUMAN_QUERY_TIMEOUT_MS: u64 = 300_000;
const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Awaiting {
    Query { id: u64, role: Role },
    Correction { id: u64, role: Role },
}

#[derive(Debug)]
struct Answer {
    id: u64,
    pixel: Option<Pixel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmitError {
    /// Nothing with that id and role is waiting for an answer.
    NotPending(String),
    Invalid(String),
}

#[derive(Default)]
struct Results {
    telemetry: Vec<TelemetryRow>,
    dataset: Dataset,
}

pub struct SessionHost {
    id: String,
    config: ExperimentConfig,
    seed: u64,
    mode: TeacherMode,
    correction_window: Duration,
    query_timeout: Duration,
    snapshot: RwLock<Arc<SessionSnapshot>>,
    log: Mutex<Vec<EventEnvelope>>,
    events: broadcast::Sender<EventEnvelope>,
    inbox: Mutex<Option<Awaiting>>,
    answers: mpsc::Sender<Answer>,
    started: (Mutex<bool>, Condvar),
    stop: AtomicBool,
    results: Mutex<Results>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl SessionHost {
    /// Validates the request and starts the loop thread.
    pub fn spawn(id: String, request: CreateSession) -> Result<Arc<Self>, Error> {
        let config = request.config;
        config.validate()?;
        if !config.split.is_interactive() {
            return Err(invalid("a session needs a split with an interactive share"));
        }
        let seed = request.seed.unwrap_or(config.seeds[0]);
        let human = request.teacher == TeacherMode::Human;
        let window_ms = request.correction_window_ms.unwrap_or(if human { HUMAN_CORRECTION_WINDOW_MS } else { 0 });
        let query_ms = request.query_timeout_ms.unwrap_or(HUMAN_QUERY_TIMEOUT_MS);
        let snapshot = SessionSnapshot {
            session_id: id.clone(),
            version: 0,
            status: Status::Waiting,
            teacher: request.teacher,
            seed,
            t: 0,
            episode: 0,
            command: None,
            image: None,
            scene: None,
            pick: None,
            place: None,
            pending_query: None,
            correction_window: None,
            last_action: None,
            telemetry: RunningTelemetry {
                flags: FlagCounts::default(),
                pick: None,
                place: None,
                steps: 0,
                successes: 0,
                success_rate: None,
                interactive_demos: 0,
                interactive_target: config.interactive_demos(),
                dataset_size: 0,
            },
            metrics: None,
            error: None,
        };
        let (tx, rx) = mpsc::channel();
        let host = Arc::new(SessionHost {
            id,
            seed,
            mode: request.teacher,
            correction_window: Duration::from_millis(window_ms),
            query_timeout: Duration::from_millis(query_ms),
            config,
            snapshot: RwLock::new(Arc::new(snapshot)),
            log: Mutex::new(Vec::new()),
            events: broadcast::channel(1024).0,
            inbox: Mutex::new(None),
            answers: tx,
            started: (Mutex::new(request.autostart.unwrap_or(!human)), Condvar::new()),
            stop: AtomicBool::new(false),
            results: Mutex::new(Results::default()),
        });
        let worker = host.clone();
        thread::Builder::new().name(format!("session-{}", host.id)).spawn(move || worker.run(rx)).map_err(Error::Io)?;
        Ok(host)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn image_size(&self) -> usize {
        self.config.image_size
    }

    pub fn snapshot(&self) -> Arc<SessionSnapshot> {
        self.snapshot.read().unwrap().clone()
    }

    /// Lets a session that waits for a client begin.
    pub fn start(&self) {
        let (lock, cv) = &self.started;
        *lock.lock().unwrap() = true;
        cv.notify_all();
    }

    /// Ends the loop at the next opportunity; a pending answer wait fails.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
        self.started.1.notify_all();
    }

    /// Events after `since` plus a receiver for the ones still to come.
    /// Subscribing first means nothing falls between the two.
    pub fn subscribe(&self, since: u64) -> (Vec<EventEnvelope>, broadcast::Receiver<EventEnvelope>) {
        let rx = self.events.subscribe();
        (self.events_since(since), rx)
    }

    pub fn events_since(&self, since: u64) -> Vec<EventEnvelope> {
        let log = self.log.lock().unwrap();
        let start = log.partition_point(|e| e.version <= since);
        log[start..].to_vec()
    }

    pub fn telemetry_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_csv(&self.results.lock().unwrap().telemetry, &mut out).expect("writing to memory");
        out
    }

    pub fn dataset_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.results.lock().unwrap().dataset.write_jsonl(&mut out).expect("writing to memory");
        out
    }

    fn pixel(&self, [u, v]: [i64; 2]) -> Result<Pixel, SubmitError> {
        let n = self.config.image_size as i64;
        if !(0..n).contains(&u) || !(0..n).contains(&v) {
            return Err(SubmitError::Invalid(format!("pixel ({u}, {v}) is outside the {n}x{n} image")));
        }
        Ok(Pixel::new(u as usize, v as usize))
    }

    fn resolve(&self, expected: Awaiting, pixel: Option<Pixel>) -> Result<Ack, SubmitError> {
        let mut inbox = self.inbox.lock().unwrap();
        if *inbox != Some(expected) {
            let what = match expected {
                Awaiting::Query { id, role } => format!("no pending {} query {id}", role.as_str()),
                Awaiting::Correction { id, role } => format!("no open {} correction window {id}", role.as_str()),
            };
            return Err(SubmitError::NotPending(what));
        }
        let id = match expected {
            Awaiting::Query { id, .. } | Awaiting::Correction { id, .. } => id,
        };
        *inbox = None;
        // Sent under the inbox lock, so a loop that finds the inbox empty
        // after its deadline knows the answer is already queued.
        self.answers
            .send(Answer { id, pixel })
            .map_err(|_| SubmitError::NotPending("session loop has ended".into()))?;
        Ok(Ack { accepted: true, id })
    }

    pub fn submit_demonstration(&self, post: &DemonstrationPost) -> Result<Ack, SubmitError> {
        let pixel = self.pixel(post.pixel)?;
        self.resolve(Awaiting::Query { id: post.query_id, role: post.role }, Some(pixel))
    }

    pub fn submit_correction(&self, post: &CorrectionPost) -> Result<Ack, SubmitError> {
        let pixel = post.pixel.map(|p| self.pixel(p)).transpose()?;
        self.resolve(Awaiting::Correction { id: post.window_id, role: post.role }, pixel)
    }

    fn publish(&self, kind: EventKind, t: u64, data: serde_json::Value, f: impl FnOnce(&mut SessionSnapshot)) -> u64 {
        let mut guard = self.snapshot.write().unwrap();
        let mut next = SessionSnapshot::clone(&guard);
        next.version += 1;
        f(&mut next);
        let envelope = EventEnvelope { version: next.version, kind, t, data };
        *guard = Arc::new(next);
        self.log.lock().unwrap().push(envelope.clone());
        let _ = self.events.send(envelope.clone());
        envelope.version
    }

    fn fail(&self, t: u64, message: String) {
        self.publish(EventKind::SessionFailed, t, json!({ "error": message }), |s| {
            s.status = Status::Failed;
            s.pending_query = None;
            s.correction_window = None;
            s.error = Some(message.clone());
        });
    }

    fn wait_for_start(&self) -> bool {
        let (lock, cv) = &self.started;
        let mut started = lock.lock().unwrap();
        while !*started && !self.stop.load(Ordering::SeqCst) {
            started = cv.wait(started).unwrap();
        }
        *started
    }

    fn run(self: Arc<Self>, answers: mpsc::Receiver<Answer>) {
        if !self.wait_for_start() {
            self.fail(0, "session stopped before it started".into());
            return;
        }
        self.publish(EventKind::Preparing, 0, json!({ "seed": self.seed }), |s| s.status = Status::Preparing);
        let mut session = match start_session::<f64>(&self.config, self.seed) {
            Ok(s) => s,
            Err(e) => return self.fail(0, e.to_string()),
        };
        self.results.lock().unwrap().dataset = session.dataset().clone();
        let mut teacher = LoopTeacher {
            host: &self,
            answers,
            scripted: (self.mode == TeacherMode::Scripted).then(|| scripted_teacher(&self.config, self.seed)),
        };
        while wants_step(&self.config, &session) {
            if self.stop.load(Ordering::SeqCst) {
                return self.fail(session.t(), "session stopped".into());
            }
            let records = session.records().len();
            match session.run_step_observed(&mut teacher, &mut |ev| self.on_event(ev)) {
                Ok(_) => {
                    let mut results = self.results.lock().unwrap();
                    let seed = self.seed;
                    results
                        .telemetry
                        .extend(session.records()[records..].iter().map(|r| TelemetryRow::from_record(seed, r)));
                    results.dataset = session.dataset().clone();
                }
                Err(Error::Teacher(e @ (TeacherError::Timeout | TeacherError::Disconnected))) => {
                    self.abort_step(&session, &e);
                }
                Err(e) => return self.fail(session.t(), e.to_string()),
            }
        }
        let t = session.t();
        match finish_session(&self.config, self.seed, session) {
            Ok(run) => {
                self.results.lock().unwrap().dataset = run.dataset;
                let metrics = run.metrics;
                self.publish(EventKind::SessionFinished, t, json!({ "metrics": &metrics }), |s| {
                    s.status = Status::Finished;
                    s.metrics = Some(metrics.clone());
                });
            }
            Err(e) => self.fail(t, e.to_string()),
        }
    }

    fn abort_step(&self, session: &Session<f64>, e: &TeacherError) {
        *self.inbox.lock().unwrap() = None;
        self.publish(EventKind::StepAborted, session.t(), json!({ "reason": e.to_string() }), |s| {
            s.status = Status::Running;
            s.pending_query = None;
            s.correction_window = None;
            s.pick = None;
            s.place = None;
            s.last_action = None;
        });
    }

    fn on_event(&self, ev: &SessionEvent<'_, f64>) {
        match *ev {
            SessionEvent::StepStarted { t, episode, scene, command } => {
                let img = render(scene);
                let png = img.to_png().map(|b| base64::engine::general_purpose::STANDARD.encode(b)).unwrap_or_default();
                let data = json!({ "episode": episode, "command": command.text() });
                self.publish(EventKind::StepStarted, t, data, |s| {
                    s.status = Status::Running;
                    s.t = t;
                    s.episode = episode;
                    s.command = Some(command.text());
                    s.image = Some(SceneImage { width: img.width(), height: img.height(), png_base64: png });
                    s.scene = Some(scene.clone());
                    s.pick = None;
                    s.place = None;
                    s.last_action = None;
                });
            }
            SessionEvent::Gated { t, role, heatmap, maxima, decision } => {
                let normalized = rescale(heatmap.values());
                let view = RoleView {
                    width: heatmap.width(),
                    height: heatmap.height(),
                    maxima: maxima
                        .iter()
                        .map(|m| MaximumView {
                            u: m.pixel.u,
                            v: m.pixel.v,
                            value: m.value,
                            normalized: normalized[heatmap.index(m.pixel)],
                            persistence: m.persistence.is_finite().then_some(m.persistence),
                        })
                        .collect(),
                    heatmap: normalized,
                    p_hat: decision.p_hat,
                    threshold: decision.threshold,
                    verdict: decision.verdict,
                };
                let data = json!({
                    "role": role,
                    "p_hat": decision.p_hat,
                    "threshold": decision.threshold,
                    "verdict": decision.verdict,
                    "maxima": maxima.len(),
                });
                self.publish(EventKind::Gated, t, data, |s| match role {
                    Role::Pick => s.pick = Some(view),
                    Role::Place => s.place = Some(view),
                });
            }
            SessionEvent::ActionExecuted { t, role, pixel, verdict } => {
                let data = json!({ "role": role, "pixel": pixel, "verdict": verdict });
                self.publish(EventKind::ActionExecuted, t, data, |s| {
                    s.last_action = Some(LastAction { t, role, pixel, verdict });
                });
            }
            SessionEvent::Retrained { t, role, epochs } => {
                self.publish(EventKind::Retrained, t, json!({ "role": role, "epochs": epochs }), |_| {});
            }
            SessionEvent::StepFinished { outcome } => {
                let data = json!({
                    "success": outcome.result.place_success,
                    "demos_added": outcome.demos_added,
                    "flags": [outcome.pick.flag, outcome.place.flag],
                });
                self.publish(EventKind::StepFinished, outcome.t, data, |s| {
                    let tel = &mut s.telemetry;
                    for r in [&outcome.pick, &outcome.place] {
                        tel.flags.add(r.flag);
                        let view = RoleTelemetry {
                            threshold: r.threshold_after,
                            sensitivity_est: r.sensitivity_est,
                            specificity_est: r.specificity_est,
                        };
                        match r.role {
                            Role::Pick => tel.pick = Some(view),
                            Role::Place => tel.place = Some(view),
                        }
                    }
                    tel.steps = outcome.t + 1;
                    tel.successes += outcome.result.place_success as usize;
                    tel.success_rate = Some(tel.successes as f64 / tel.steps as f64);
                    tel.interactive_demos += outcome.demos_added;
                });
            }
            SessionEvent::EpisodeDone { episode, commands, successes } => {
                let t = self.snapshot().t;
                let data = json!({ "episode": episode, "commands": commands, "successes": successes });
                self.publish(EventKind::EpisodeDone, t, data, |_| {});
            }
        }
    }
}

fn rescale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    values.iter().map(|v| if range > 0.0 { (v - lo) / range } else { 1.0 }).collect()
}

/// Answers come from the in-process oracle or, for a human, from the inbox.
struct LoopTeacher<'a> {
    host: &'a SessionHost,
    answers: mpsc::Receiver<Answer>,
    scripted: Option<ScriptedTeacher>,
}

impl LoopTeacher<'_> {
    /// `Ok(None)` when the deadline passed without an answer.
    fn wait(&self, id: u64, timeout: Duration) -> Result<Option<Option<Pixel>>, TeacherError> {
        let deadline = Instant::now() + timeout;
        loop {
            if self.host.stop.load(Ordering::SeqCst) {
                return Err(TeacherError::Disconnected);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            match self.answers.recv_timeout(left.min(POLL)) {
                Ok(a) if a.id == id => return Ok(Some(a.pixel)),
                Ok(_) => {}
                Err(RecvTimeoutError::Timeout) if left.is_zero() => {
                    let mut inbox = self.host.inbox.lock().unwrap();
                    if inbox.is_some() {
                        *inbox = None;
                        return Ok(None);
                    }
                    drop(inbox);
                    while let Ok(a) = self.answers.recv() {
                        if a.id == id {
                            return Ok(Some(a.pixel));
                        }
                    }
                    return Err(TeacherError::Disconnected);
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return Err(TeacherError::Disconnected),
            }
        }
    }
}

impl Teacher<f64> for LoopTeacher<'_> {
    fn query(&mut self, ctx: &QueryContext<'_, f64>) -> Result<Pixel, TeacherError> {
        let role = ctx.role;
        let candidates: Vec<CandidateView> = ctx
            .candidates
            .iter()
            .map(|c| CandidateView { u: c.pixel.u, v: c.pixel.v, value: c.value, normalized: c.normalized })
            .collect();
        let human = self.scripted.is_none();
        let data = json!({ "role": role, "candidates": &candidates, "condition": ctx.condition });
        let id = self.host.publish(EventKind::QueryPending, ctx.t, data, |s| {
            s.status = if role == Role::Pick { Status::AwaitingPick } else { Status::AwaitingPlace };
            s.pending_query = Some(PendingQuery { id: s.version, role, candidates, condition: ctx.condition });
            if human {
                *self.host.inbox.lock().unwrap() = Some(Awaiting::Query { id: s.version, role });
            }
        });
        let pixel = match &mut self.scripted {
            Some(oracle) => oracle.query(ctx)?,
            None => self.wait(id, self.host.query_timeout)?.flatten().ok_or(TeacherError::Timeout)?,
        };
        self.host.publish(EventKind::QueryResolved, ctx.t, json!({ "role": role, "id": id, "pixel": pixel }), |s| {
            s.status = Status::Running;
            s.pending_query = None;
        });
        Ok(pixel)
    }

    fn observe_correction(&mut self, ctx: &CorrectionContext<'_>) -> Result<Option<Pixel>, TeacherError> {
        let role = ctx.role;
        let human = self.scripted.is_none();
        let timeout_ms = if !human { 0 } else { self.host.correction_window.as_millis() as u64 };
        let data = json!({ "role": role, "executed": ctx.executed, "timeout_ms": timeout_ms });
        let id = self.host.publish(EventKind::CorrectionWindowOpen, ctx.t, data, |s| {
            s.status = Status::CorrectionWindow;
            s.correction_window = Some(CorrectionWindow {
                id: s.version,
                role,
                executed: ctx.executed,
                condition: ctx.condition,
                timeout_ms,
            });
            if human {
                *self.host.inbox.lock().unwrap() = Some(Awaiting::Correction { id: s.version, role });
            }
        });
        let correction = match &mut self.scripted {
            Some(oracle) => <ScriptedTeacher as Teacher<f64>>::observe_correction(oracle, ctx)?,
            None => self.wait(id, self.host.correction_window)?.flatten(),
        };
        let data = json!({ "role": role, "id": id, "correction": correction });
        self.host.publish(EventKind::CorrectionWindowClosed, ctx.t, data, |s| {
            s.status = Status::Running;
            s.correction_window = None;
        });
        Ok(correction)
    }
}
