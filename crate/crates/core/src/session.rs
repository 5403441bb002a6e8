//! The interactive loop: gate each role, ask or act, keep the books, retrain.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{decide, GateDecision, Verdict, DEFAULT_CANDIDATE_FLOOR};
use crate::dataset::{Dataset, Demonstration, Phase, TrainingSet};
use crate::error::{Error, Result};
use crate::heatmap::{Heatmap, Pixel};
use crate::policy::{FeatureMap, ValueModel};
use crate::rng::{substream, substream_seed, Rng};
use crate::scalar::Scalar;
use crate::sim::{Action, ColorMode, Command, Observation, Role, Scenario, SceneState, StepResult, DEFAULT_IMAGE_SIZE};
use crate::teacher::{CorrectionContext, QueryContext, Teacher};
use crate::threshold::{Flag, FlagCounts, ThresholdConfig, ThresholdController};
use crate::topology::{persistent_maxima_with_floor, LocalMaximum, PersistenceFloor};

/// When a queried teacher pixel counts as agreeing with the model's best guess.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpMatch {
    /// Same box (pick) or same bowl (place); pixel equality off objects.
    #[default]
    Footprint,
    Pixel,
}

/// Relative weights of the episode start scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioMix {
    pub normal: f64,
    pub failure_a: f64,
    pub failure_b: f64,
}

impl Default for ScenarioMix {
    fn default() -> Self {
        ScenarioMix { normal: 1.0, failure_a: 0.0, failure_b: 0.0 }
    }
}

impl ScenarioMix {
    pub fn only(scenario: Scenario) -> Self {
        let mut mix = ScenarioMix { normal: 0.0, failure_a: 0.0, failure_b: 0.0 };
        match scenario {
            Scenario::Normal => mix.normal = 1.0,
            Scenario::FailureA => mix.failure_a = 1.0,
            Scenario::FailureB => mix.failure_b = 1.0,
        }
        mix
    }

    fn weights(&self) -> [(Scenario, f64); 3] {
        [(Scenario::Normal, self.normal), (Scenario::FailureA, self.failure_a), (Scenario::FailureB, self.failure_b)]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights();
        if w.iter().any(|(_, x)| !x.is_finite() || *x < 0.0) || w.iter().all(|(_, x)| *x == 0.0) {
            return Err(Error::config("scenario_mix weights must be non-negative with a positive sum"));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> Scenario {
        let w = self.weights();
        let total: f64 = w.iter().map(|(_, x)| x).sum();
        let mut r = rng.random::<f64>() * total;
        for (s, x) in w {
            if r < x {
                return s;
            }
            r -= x;
        }
        w.iter().rev().find(|(_, x)| *x > 0.0).map_or(Scenario::Normal, |(s, _)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    pub image_size: usize,
    pub mode: ColorMode,
    pub scenario_mix: ScenarioMix,
    pub commands_per_episode: usize,
    pub pick_threshold: ThresholdConfig,
    pub place_threshold: ThresholdConfig,
    pub persistence_floor: PersistenceFloor,
    pub candidate_floor: f64,
    pub fp_match: FpMatch,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            seed: 0,
            image_size: DEFAULT_IMAGE_SIZE,
            mode: ColorMode::Seen,
            scenario_mix: ScenarioMix::default(),
            commands_per_episode: 3,
            pick_threshold: ThresholdConfig::default(),
            place_threshold: ThresholdConfig::default(),
            persistence_floor: PersistenceFloor::default(),
            candidate_floor: DEFAULT_CANDIDATE_FLOOR,
            fp_match: FpMatch::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 32 {
            return Err(Error::config("image_size must be at least 32"));
        }
        if self.commands_per_episode == 0 {
            return Err(Error::config("commands_per_episode must be positive"));
        }
        if !(0.0..1.0).contains(&self.candidate_floor) {
            return Err(Error::config("candidate_floor must lie in [0, 1)"));
        }
        self.scenario_mix.validate()?;
        self.pick_threshold.validate()?;
        self.place_threshold.validate()
    }

    pub fn threshold(&self, role: Role) -> &ThresholdConfig {
        match role {
            Role::Pick => &self.pick_threshold,
            Role::Place => &self.place_threshold,
        }
    }
}

/// One gated decision for one role.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub t: u64,
    pub episode: u64,
    pub role: Role,
    pub command: Command,
    /// Failure state of the scene when the step began, if any.
    pub failure_state: Option<Scenario>,
    pub maxima: Vec<LocalMaximum<f64>>,
    pub p_hat: f64,
    pub threshold_before: f64,
    pub threshold_after: f64,
    pub verdict: Verdict,
    pub a_max: Pixel,
    /// Pixel that was executed.
    pub action: Pixel,
    /// Teacher's answer to a query, or its correction.
    pub teacher_pixel: Option<Pixel>,
    pub flag: Flag,
    pub sensitivity_est: f64,
    pub specificity_est: Option<f64>,
    /// Whether the command of this step succeeded.
    pub success: bool,
    pub retrained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub t: u64,
    pub pick: DecisionRecord,
    pub place: DecisionRecord,
    pub result: StepResult,
    /// Interactive demonstrations aggregated by this step.
    pub demos_added: usize,
    pub episode_done: bool,
}

/// Loop events, in the order they happen.
#[derive(Debug)]
pub enum SessionEvent<'a, T> {
    StepStarted { t: u64, episode: u64, scene: &'a SceneState, command: Command },
    Gated { t: u64, role: Role, heatmap: &'a Heatmap<T>, maxima: &'a [LocalMaximum<T>], decision: &'a GateDecision<T> },
    ActionExecuted { t: u64, role: Role, pixel: Pixel, verdict: Verdict },
    Retrained { t: u64, role: Role, epochs: usize },
    StepFinished { outcome: &'a StepOutcome },
    EpisodeDone { episode: u64, commands: usize, successes: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Episode {
    index: u64,
    scene: SceneState,
    command: Command,
    commands_done: usize,
    successes: usize,
}

#[derive(Clone)]
struct Checkpoint<T> {
    model: ValueModel<T>,
    controllers: [ThresholdController<T>; 2],
    episode: Episode,
    t: u64,
    dataset_len: usize,
    examples_len: usize,
    records_len: usize,
    epochs_used: usize,
    epoch_allowance: Option<usize>,
    counts: FlagCounts,
    successes: usize,
    command_rng: Rng,
    scenario_rng: Rng,
    train_rng: Rng,
}

/// A live PARTNR session: model, aggregated data, per-role thresholds and
/// the scene being worked on.
pub struct Session<T> {
    config: SessionConfig,
    model: ValueModel<T>,
    dataset: Dataset,
    training: TrainingSet<T>,
    controllers: [ThresholdController<T>; 2],
    episode: Episode,
    t: u64,
    records: Vec<DecisionRecord>,
    epochs_used: usize,
    epoch_allowance: Option<usize>,
    counts: FlagCounts,
    successes: usize,
    command_rng: Rng,
    scenario_rng: Rng,
    train_rng: Rng,
}

fn agrees(scene: &SceneState, role: Role, a: Pixel, b: Pixel, rule: FpMatch) -> bool {
    if a == b {
        return true;
    }
    if rule == FpMatch::Pixel {
        return false;
    }
    let on = |p| match role {
        Role::Pick => scene.box_at(p),
        Role::Place => scene.bowl_at(p),
    };
    matches!((on(a), on(b)), (Some(x), Some(y)) if x == y)
}

impl<T: Scalar> Session<T> {
    /// Starts a session from a (typically offline-trained) model and the
    /// data it was trained on.
    pub fn new(config: SessionConfig, model: ValueModel<T>, dataset: Dataset) -> Result<Self> {
        config.validate()?;
        let controllers =
            [ThresholdController::new(config.pick_threshold)?, ThresholdController::new(config.place_threshold)?];
        let mut scenario_rng = substream(config.seed, "session-scenario", 0);
        let episode = Self::start_episode(&config, 0, &mut scenario_rng)?;
        Ok(Session {
            training: TrainingSet::from_dataset(&dataset),
            command_rng: substream(config.seed, "session-command", 0),
            train_rng: substream(config.seed, "session-train", 0),
            scenario_rng,
            config,
            model,
            dataset,
            controllers,
            episode,
            t: 0,
            records: Vec::new(),
            epochs_used: 0,
            epoch_allowance: None,
            counts: FlagCounts::default(),
            successes: 0,
        })
    }

    fn start_episode(config: &SessionConfig, index: u64, rng: &mut Rng) -> Result<Episode> {
        let scenario = config.scenario_mix.sample(rng);
        let seed = substream_seed(config.seed, "session-scene", index);
        let (scene, command) = SceneState::reset(config.image_size, seed, config.mode, scenario)?;
        Ok(Episode { index, scene, command, commands_done: 0, successes: 0 })
    }

    /// Caps the total epochs retraining may spend; `None` is unlimited.
    pub fn set_epoch_allowance(&mut self, epochs: Option<usize>) {
        self.epoch_allowance = epochs;
    }

    pub fn epoch_allowance(&self) -> Option<usize> {
        self.epoch_allowance
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn model(&self) -> &ValueModel<T> {
        &self.model
    }

    pub fn into_parts(self) -> (ValueModel<T>, Dataset, Vec<DecisionRecord>) {
        (self.model, self.dataset, self.records)
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn episode_index(&self) -> u64 {
        self.episode.index
    }

    pub fn scene(&self) -> &SceneState {
        &self.episode.scene
    }

    pub fn command(&self) -> Command {
        self.episode.command
    }

    pub fn threshold(&self, role: Role) -> T {
        self.controllers[role.index()].threshold()
    }

    pub fn controller(&self, role: Role) -> &ThresholdController<T> {
        &self.controllers[role.index()]
    }

    pub fn flag_counts(&self) -> FlagCounts {
        self.counts
    }

    /// Interactive demonstrations aggregated so far.
    pub fn interactive_demos(&self) -> usize {
        self.counts.tp + self.counts.fp + self.counts.fn_
    }

    pub fn epochs_used(&self) -> usize {
        self.epochs_used
    }

    /// Commands executed and how many succeeded.
    pub fn success_tally(&self) -> (u64, usize) {
        (self.t, self.successes)
    }

    /// Trains on everything aggregated so far, charging the epoch allowance.
    pub fn train_all(&mut self, epochs: usize) -> Result<usize> {
        let epochs = self.epoch_allowance.map_or(epochs, |left| epochs.min(left));
        if epochs == 0 || self.training.examples().is_empty() {
            return Ok(0);
        }
        self.model.train(self.training.examples(), epochs, &mut self.train_rng)?;
        self.epochs_used += epochs;
        if let Some(left) = &mut self.epoch_allowance {
            *left -= epochs;
        }
        Ok(epochs)
    }

    fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            model: self.model.clone(),
            controllers: self.controllers.clone(),
            episode: self.episode.clone(),
            t: self.t,
            dataset_len: self.dataset.len(),
            examples_len: self.training.examples().len(),
            records_len: self.records.len(),
            epochs_used: self.epochs_used,
            epoch_allowance: self.epoch_allowance,
            counts: self.counts,
            successes: self.successes,
            command_rng: self.command_rng.clone(),
            scenario_rng: self.scenario_rng.clone(),
            train_rng: self.train_rng.clone(),
        }
    }

    fn restore(&mut self, c: Checkpoint<T>) {
        self.model = c.model;
        self.controllers = c.controllers;
        self.episode = c.episode;
        self.t = c.t;
        self.dataset.truncate(c.dataset_len);
        self.training.truncate(c.examples_len);
        self.records.truncate(c.records_len);
        self.epochs_used = c.epochs_used;
        self.epoch_allowance = c.epoch_allowance;
        self.counts = c.counts;
        self.successes = c.successes;
        self.command_rng = c.command_rng;
        self.scenario_rng = c.scenario_rng;
        self.train_rng = c.train_rng;
    }

    pub fn run_step(&mut self, teacher: &mut dyn Teacher<T>) -> Result<StepOutcome> {
        self.run_step_observed(teacher, &mut |_| {})
    }

    /// Pick then place, each gated; then executes the action. On any error
    /// the session is rolled back to where the step began, so it can be
    /// replayed.
    pub fn run_step_observed(
        &mut self,
        teacher: &mut dyn Teacher<T>,
        observer: &mut dyn FnMut(&SessionEvent<'_, T>),
    ) -> Result<StepOutcome> {
        let saved = self.checkpoint();
        let result = self.step_inner(teacher, observer);
        if result.is_err() {
            self.restore(saved);
        }
        result
    }

    fn step_inner(
        &mut self,
        teacher: &mut dyn Teacher<T>,
        observer: &mut dyn FnMut(&SessionEvent<'_, T>),
    ) -> Result<StepOutcome> {
        let t = self.t;
        let command = self.episode.command;
        observer(&SessionEvent::StepStarted { t, episode: self.episode.index, scene: &self.episode.scene, command });
        let observation = Observation::of(&self.episode.scene, command);
        let features = Arc::new(FeatureMap::compute(&observation.image));
        self.training.insert_features(observation.image.clone(), features.clone());
        let failure_state = self.episode.scene.failure_state(&command);

        let pick = self.decide_role(teacher, observer, &observation, &features, Role::Pick, None, failure_state)?;
        let place = self.decide_role(
            teacher,
            observer,
            &observation,
            &features,
            Role::Place,
            Some(pick.0.action),
            failure_state,
        )?;
        let (mut pick, pick_demos) = pick;
        let (mut place, place_demos) = place;

        let action = Action { pick: pick.action, place: place.action };
        let result = self.episode.scene.step(&command, action)?;
        pick.success = result.place_success;
        place.success = result.place_success;
        self.records.push(pick.clone());
        self.records.push(place.clone());
        self.t += 1;
        self.successes += result.place_success as usize;
        self.episode.commands_done += 1;
        self.episode.successes += result.place_success as usize;

        let episode_done = self.episode.commands_done >= self.config.commands_per_episode;
        let outcome = StepOutcome { t, pick, place, result, demos_added: pick_demos + place_demos, episode_done };
        observer(&SessionEvent::StepFinished { outcome: &outcome });
        if episode_done {
            observer(&SessionEvent::EpisodeDone {
                episode: self.episode.index,
                commands: self.episode.commands_done,
                successes: self.episode.successes,
            });
            self.episode = Self::start_episode(&self.config, self.episode.index + 1, &mut self.scenario_rng)?;
        } else {
            self.episode.command =
                self.episode.scene.next_command(Some((command, result.place_success)), &mut self.command_rng);
        }
        Ok(outcome)
    }

    #[allow(clippy::too_many_arguments)]
    fn decide_role(
        &mut self,
        teacher: &mut dyn Teacher<T>,
        observer: &mut dyn FnMut(&SessionEvent<'_, T>),
        observation: &Observation,
        features: &FeatureMap<T>,
        role: Role,
        condition: Option<Pixel>,
        failure_state: Option<Scenario>,
    ) -> Result<(DecisionRecord, usize)> {
        let t = self.t;
        let scene = &self.episode.scene;
        let command = observation.command;
        let color = match role {
            Role::Pick => command.pick,
            Role::Place => command.place,
        };
        let heatmap = self.model.predict(features, role, color, condition)?;
        let maxima = persistent_maxima_with_floor(&heatmap, self.config.persistence_floor)?;
        let threshold_before = self.controllers[role.index()].threshold();
        let decision = decide(&maxima, threshold_before, T::of(self.config.candidate_floor))?;
        observer(&SessionEvent::Gated { t, role, heatmap: &heatmap, maxima: &maxima, decision: &decision });
        let a_max = maxima[0].pixel;

        let (action, teacher_pixel, flag) = match decision.verdict {
            Verdict::Ambiguous => {
                let ctx = QueryContext { t, role, scene, observation, candidates: &decision.candidates, condition };
                let a = teacher.query(&ctx)?;
                if !scene.in_bounds(a) {
                    return Err(Error::invalid(format!("teacher pixel {a} out of bounds")));
                }
                let flag = if agrees(scene, role, a, a_max, self.config.fp_match) { Flag::FP } else { Flag::TP };
                observer(&SessionEvent::ActionExecuted { t, role, pixel: a, verdict: decision.verdict });
                (a, Some(a), flag)
            }
            Verdict::Confident => {
                observer(&SessionEvent::ActionExecuted { t, role, pixel: a_max, verdict: decision.verdict });
                let ctx = CorrectionContext { t, role, scene, observation, executed: a_max, condition };
                match teacher.observe_correction(&ctx)? {
                    Some(c) if !scene.in_bounds(c) => {
                        return Err(Error::invalid(format!("correction pixel {c} out of bounds")))
                    }
                    Some(c) => (a_max, Some(c), Flag::FN),
                    None => (a_max, None, Flag::TN),
                }
            }
        };

        let mut demos = 0;
        if let Some(label) = teacher_pixel {
            let demo = match role {
                Role::Pick => Demonstration {
                    observation: observation.clone(),
                    pick: Some(label),
                    place: None,
                    condition: None,
                    phase: Phase::Interactive,
                },
                Role::Place => Demonstration {
                    observation: observation.clone(),
                    pick: None,
                    place: Some(label),
                    condition,
                    phase: Phase::Interactive,
                },
            };
            self.training.push(&demo);
            self.dataset.push(demo)?;
            demos = 1;
        }
        self.counts.add(flag);
        let controller = &mut self.controllers[role.index()];
        let threshold_after = controller.observe(t, flag)?;
        let (sensitivity_est, specificity_est) = (controller.sensitivity(), controller.specificity());

        let mut retrained = false;
        if demos > 0 {
            let epochs = self.train_all(self.model.config().retrain_epochs)?;
            if epochs > 0 {
                retrained = true;
                observer(&SessionEvent::Retrained { t, role, epochs });
            }
        }

        let record = DecisionRecord {
            t,
            episode: self.episode.index,
            role,
            command,
            failure_state,
            maxima: maxima
                .iter()
                .map(|m| LocalMaximum { pixel: m.pixel, value: m.value.as_f64(), persistence: m.persistence.as_f64() })
                .collect(),
            p_hat: decision.p_hat.as_f64(),
            threshold_before: threshold_before.as_f64(),
            threshold_after: threshold_after.as_f64(),
            verdict: decision.verdict,
            a_max,
            action,
            teacher_pixel,
            flag,
            sensitivity_est,
            specificity_est,
            success: false,
            retrained,
        };
        Ok((record, demos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::TrainConfig;
    use crate::teacher::{ScriptedTeacher, TeacherError};

    fn session(seed: u64) -> Session<f64> {
        let cfg = SessionConfig { seed, ..SessionConfig::default() };
        Session::new(cfg, ValueModel::new(TrainConfig::default()), Dataset::new()).unwrap()
    }

    #[test]
    fn untrained_model_acts_and_gets_corrected() {
        let mut s = session(3);
        let mut teacher = ScriptedTeacher::new(0.0, substream(3, "teacher", 0));
        let out = s.run_step(&mut teacher).unwrap();
        assert_eq!(out.pick.verdict, Verdict::Confident);
        assert_eq!(out.pick.p_hat, 1.0);
        assert_eq!(out.pick.flag, Flag::FN);
        assert!(out.pick.retrained);
        assert_eq!(s.dataset().entries()[0].phase, Phase::Interactive);
        assert_eq!(s.interactive_demos(), out.demos_added);
        assert_eq!(s.records().len(), 2);
    }

    #[test]
    fn ambiguous_queries_and_flags() {
        let cfg = SessionConfig {
            seed: 5,
            pick_threshold: ThresholdConfig { p0: 0.95, ..ThresholdConfig::default() },
            place_threshold: ThresholdConfig { p0: 0.95, ..ThresholdConfig::default() },
            ..SessionConfig::default()
        };
        let mut s = Session::<f64>::new(cfg, ValueModel::new(TrainConfig::default()), Dataset::new()).unwrap();
        let mut teacher = ScriptedTeacher::new(0.0, substream(5, "teacher", 0));
        for _ in 0..10 {
            let out = s.run_step(&mut teacher).unwrap();
            for r in [&out.pick, &out.place] {
                let queried = matches!(r.flag, Flag::TP | Flag::FP);
                assert_eq!(queried, r.verdict == Verdict::Ambiguous);
            }
        }
        let c = s.flag_counts();
        assert_eq!(c.total(), 20);
        assert_eq!(s.dataset().len(), c.tp + c.fp + c.fn_);
    }

    struct Failing(ScriptedTeacher, usize);

    impl Teacher<f64> for Failing {
        fn query(&mut self, ctx: &QueryContext<'_, f64>) -> Result<Pixel, TeacherError> {
            self.0.query(ctx)
        }
        fn observe_correction(&mut self, ctx: &CorrectionContext<'_>) -> Result<Option<Pixel>, TeacherError> {
            if self.1 == 0 {
                return Err(TeacherError::Timeout);
            }
            self.1 -= 1;
            <ScriptedTeacher as Teacher<f64>>::observe_correction(&mut self.0, ctx)
        }
    }

    #[test]
    fn aborted_step_rolls_back_and_replays() {
        let mut a = session(9);
        let mut b = session(9);
        let mut ta = ScriptedTeacher::new(0.0, substream(9, "teacher", 0));
        let mut tb = Failing(ScriptedTeacher::new(0.0, substream(9, "teacher", 0)), 1);
        // Pick succeeds, place times out: nothing of the step may survive.
        let err = b.run_step(&mut tb).unwrap_err();
        assert!(matches!(err, Error::Teacher(TeacherError::Timeout)));
        assert_eq!(b.t(), 0);
        assert!(b.dataset().is_empty());
        assert_eq!(b.model(), a.model());
        assert_eq!(b.flag_counts(), FlagCounts::default());
        tb.1 = usize::MAX;
        // The failing teacher already consumed noise-free draws only.
        let ra = a.run_step(&mut ta).unwrap();
        let rb = b.run_step(&mut tb).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn events_follow_loop_order() {
        let mut s = session(2);
        let mut teacher = ScriptedTeacher::new(0.0, substream(2, "teacher", 0));
        let mut names = Vec::new();
        s.run_step_observed(&mut teacher, &mut |e| {
            names.push(match e {
                SessionEvent::StepStarted { .. } => "step_started",
                SessionEvent::Gated { .. } => "gated",
                SessionEvent::ActionExecuted { .. } => "action_executed",
                SessionEvent::Retrained { .. } => "retrained",
                SessionEvent::StepFinished { .. } => "step_finished",
                SessionEvent::EpisodeDone { .. } => "episode_done",
            })
        })
        .unwrap();
        assert_eq!(names[0], "step_started");
        assert_eq!(names[1], "gated");
        assert_eq!(names[2], "action_executed");
        assert_eq!(*names.last().unwrap(), "step_finished");
    }

    #[test]
    fn episodes_roll_over() {
        let mut s = session(4);
        let mut teacher = ScriptedTeacher::new(0.0, substream(4, "teacher", 0));
        let done: Vec<bool> = (0..6).map(|_| s.run_step(&mut teacher).unwrap().episode_done).collect();
        assert_eq!(done, [false, false, true, false, false, true]);
        assert_eq!(s.episode_index(), 2);
    }

    #[test]
    fn epoch_allowance_is_charged() {
        let mut s = session(6);
        s.set_epoch_allowance(Some(1));
        let mut teacher = ScriptedTeacher::new(0.0, substream(6, "teacher", 0));
        for _ in 0..3 {
            s.run_step(&mut teacher).unwrap();
        }
        assert_eq!(s.epochs_used(), 1);
        assert_eq!(s.epoch_allowance(), Some(0));
    }

    #[test]
    fn scenario_mix_sampling() {
        let mut rng = substream(0, "mix", 0);
        let only_b = ScenarioMix::only(Scenario::FailureB);
        assert!((0..50).all(|_| only_b.sample(&mut rng) == Scenario::FailureB));
        assert!(ScenarioMix { normal: 0.0, failure_a: 0.0, failure_b: 0.0 }.validate().is_err());
    }
}
