//! Offline collection, interactive learning and frozen evaluation for a
//! list of seeds, with equal demonstration and epoch budgets across splits.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{ambiguity_measure, gate, Verdict, DEFAULT_CANDIDATE_FLOOR};
use crate::dataset::{Dataset, Demonstration, Phase, TrainingSet};
use crate::error::{Error, Result};
use crate::policy::{FeatureMap, TrainConfig, ValueModel};
use crate::rng::{substream, substream_seed};
use crate::scalar::Scalar;
use crate::session::{FpMatch, ScenarioMix, Session, SessionConfig};
use crate::sim::{
    scripted_expert, Action, ColorMode, Command, Observation, Role, Scenario, SceneState, DEFAULT_IMAGE_SIZE,
};
use crate::teacher::ScriptedTeacher;
use crate::telemetry::TelemetryRow;
use crate::threshold::{FlagCounts, ThresholdConfig};
use crate::topology::{argmax_pixel, persistent_maxima_with_floor, PersistenceFloor};

/// Shares of the demonstration budget collected offline and interactively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub offline: f64,
    pub interactive: f64,
}

impl Default for Split {
    fn default() -> Self {
        Split { offline: 0.5, interactive: 0.5 }
    }
}

impl Split {
    pub const BASELINE: Split = Split { offline: 1.0, interactive: 0.0 };

    pub fn validate(&self) -> Result<()> {
        let share = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !share(self.offline) || !share(self.interactive) {
            return Err(Error::config("split shares must lie in [0, 1]"));
        }
        let total = self.offline + self.interactive;
        if total <= 0.0 || total > 1.0 + 1e-9 {
            return Err(Error::config(format!("split offline + interactive must be in (0, 1], got {total}")));
        }
        Ok(())
    }

    pub fn is_interactive(&self) -> bool {
        self.interactive > 0.0
    }

    /// "100% off", "50% off + 50% int", ...
    pub fn label(&self) -> String {
        let pct = |x: f64| (x * 100.0).round() as i64;
        match (self.offline > 0.0, self.interactive > 0.0) {
            (true, true) => format!("{}% off + {}% int", pct(self.offline), pct(self.interactive)),
            (true, false) => format!("{}% off", pct(self.offline)),
            _ => format!("{}% int", pct(self.interactive)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub image_size: usize,
    /// Colors of the interactive and evaluation scenes; offline
    /// demonstrations always use seen colors.
    pub mode: ColorMode,
    /// Episode start scenarios during interactive learning.
    pub scenario_mix: ScenarioMix,
    pub demo_budget: usize,
    pub split: Split,
    /// Standard deviation of expert and teacher pixel noise.
    pub noise_sigma: f64,
    pub pick_threshold: ThresholdConfig,
    pub place_threshold: ThresholdConfig,
    pub persistence_floor: PersistenceFloor,
    pub candidate_floor: f64,
    pub fp_match: FpMatch,
    pub training: TrainConfig,
    /// Total training epochs for every split. Defaults to the offline
    /// epochs plus one retraining per demo of a half-interactive budget.
    pub total_epochs: Option<usize>,
    pub commands_per_episode: usize,
    /// Step cap for the interactive phase; defaults to 20 per budgeted demo.
    pub max_interactive_steps: Option<usize>,
    pub n_eval_episodes: usize,
    pub eval_commands_per_episode: usize,
    pub eval_scenario_mix: ScenarioMix,
    /// Count how often the frozen gate would have asked during evaluation.
    pub gated_eval: bool,
    /// Run seeds on separate threads.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0, 1, 2],
            image_size: DEFAULT_IMAGE_SIZE,
            mode: ColorMode::Seen,
            scenario_mix: ScenarioMix::default(),
            demo_budget: 500,
            split: Split::default(),
            noise_sigma: 0.0,
            pick_threshold: ThresholdConfig::default(),
            place_threshold: ThresholdConfig::default(),
            persistence_floor: PersistenceFloor::default(),
            candidate_floor: DEFAULT_CANDIDATE_FLOOR,
            fp_match: FpMatch::default(),
            training: TrainConfig::default(),
            total_epochs: None,
            commands_per_episode: 3,
            max_interactive_steps: None,
            n_eval_episodes: 100,
            eval_commands_per_episode: 3,
            eval_scenario_mix: ScenarioMix::default(),
            gated_eval: false,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if self.demo_budget == 0 {
            return Err(Error::config("demo_budget must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma must be a non-negative number"));
        }
        if self.n_eval_episodes == 0 || self.eval_commands_per_episode == 0 {
            return Err(Error::config("evaluation needs at least one episode and one command"));
        }
        let t = &self.training;
        if !(t.learning_rate.is_finite() && t.learning_rate > 0.0 && t.l2.is_finite() && t.l2 >= 0.0) {
            return Err(Error::config("training.learning_rate must be positive and training.l2 non-negative"));
        }
        if t.batch_size == Some(0) {
            return Err(Error::config("training.batch_size must be positive"));
        }
        self.split.validate()?;
        self.eval_scenario_mix.validate()?;
        self.session_config(0).validate()
    }

    pub fn session_config(&self, seed: u64) -> SessionConfig {
        SessionConfig {
            seed: substream_seed(seed, "session", 0),
            image_size: self.image_size,
            mode: self.mode,
            scenario_mix: self.scenario_mix,
            commands_per_episode: self.commands_per_episode,
            pick_threshold: self.pick_threshold,
            place_threshold: self.place_threshold,
            persistence_floor: self.persistence_floor,
            candidate_floor: self.candidate_floor,
            fp_match: self.fp_match,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            image_size: self.image_size,
            mode: self.mode,
            episodes: self.n_eval_episodes,
            commands_per_episode: self.eval_commands_per_episode,
            scenario_mix: self.eval_scenario_mix,
        }
    }

    pub fn offline_demos(&self) -> usize {
        (self.demo_budget as f64 * self.split.offline).round() as usize
    }

    pub fn interactive_demos(&self) -> usize {
        (self.demo_budget as f64 * self.split.interactive).round() as usize
    }

    pub fn epoch_budget(&self) -> usize {
        self.total_epochs.unwrap_or(self.training.epochs + self.training.retrain_epochs * self.demo_budget / 2)
    }

    pub fn algorithm(&self) -> &'static str {
        if self.split.is_interactive() {
            "PARTNR"
        } else {
            "Baseline"
        }
    }
}

/// Expert demonstrations from seen-color episodes, one per command.
/// Failed (noisy) commands are re-issued like anywhere else.
pub fn collect_offline(
    seed: u64,
    n: usize,
    image_size: usize,
    noise_sigma: f64,
    commands_per_episode: usize,
) -> Result<Dataset> {
    let mut dataset = Dataset::new();
    let mut noise = substream(seed, "expert-noise", 0);
    let mut commands = substream(seed, "offline-command", 0);
    let mut episode = 0;
    while dataset.len() < n {
        let scene_seed = substream_seed(seed, "offline-scene", episode);
        let (mut scene, mut command) = SceneState::reset(image_size, scene_seed, ColorMode::Seen, Scenario::Normal)?;
        for _ in 0..commands_per_episode.max(1) {
            if dataset.len() == n {
                break;
            }
            let action = scripted_expert(&scene, &command, noise_sigma, &mut noise)?;
            let observation = Observation::of(&scene, command);
            dataset.push(Demonstration::full(observation, action.pick, action.place, Phase::Offline))?;
            let result = scene.step(&command, action)?;
            command = scene.next_command(Some((command, result.place_success)), &mut commands);
        }
        episode += 1;
    }
    Ok(dataset)
}

/// Fresh model trained on a dataset; an empty dataset leaves it untrained.
pub fn train_model<T: Scalar>(
    dataset: &Dataset,
    config: TrainConfig,
    epochs: usize,
    seed: u64,
) -> Result<ValueModel<T>> {
    let mut model = ValueModel::new(config);
    if !dataset.is_empty() && epochs > 0 {
        let set = TrainingSet::from_dataset(dataset);
        model.train(set.examples(), epochs, &mut substream(seed, "offline-train", 0))?;
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub image_size: usize,
    pub mode: ColorMode,
    pub episodes: usize,
    pub commands_per_episode: usize,
    pub scenario_mix: ScenarioMix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub commands: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Decisions the frozen gate would have sent to a teacher.
    pub ambiguous_decisions: Option<usize>,
}

/// Anything that turns a scene and command into an action.
pub trait ActionPolicy {
    fn act(&mut self, scene: &SceneState, command: &Command) -> Result<Action>;
}

/// The scripted expert without noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpertPolicy;

impl ActionPolicy for ExpertPolicy {
    fn act(&mut self, scene: &SceneState, command: &Command) -> Result<Action> {
        scripted_expert(scene, command, 0.0, &mut substream(0, "unused", 0))
    }
}

/// Argmax of the pick map, then argmax of the place map conditioned on it.
#[derive(Debug)]
pub struct GreedyPolicy<'a, T> {
    model: &'a ValueModel<T>,
    gate: Option<(T, T, PersistenceFloor)>,
    ambiguous: usize,
}

impl<'a, T: Scalar> GreedyPolicy<'a, T> {
    pub fn new(model: &'a ValueModel<T>) -> Self {
        GreedyPolicy { model, gate: None, ambiguous: 0 }
    }

    /// Also counts decisions the gate would mark ambiguous at fixed thresholds.
    pub fn with_gate(model: &'a ValueModel<T>, pick: T, place: T, floor: PersistenceFloor) -> Self {
        GreedyPolicy { model, gate: Some((pick, place, floor)), ambiguous: 0 }
    }

    pub fn ambiguous(&self) -> usize {
        self.ambiguous
    }
}

impl<T: Scalar> ActionPolicy for GreedyPolicy<'_, T> {
    fn act(&mut self, scene: &SceneState, command: &Command) -> Result<Action> {
        let obs = Observation::of(scene, *command);
        let features = FeatureMap::compute(&obs.image);
        let q_pick = self.model.predict(&features, Role::Pick, command.pick, None)?;
        let pick = argmax_pixel(&q_pick);
        let q_place = self.model.predict(&features, Role::Place, command.place, Some(pick))?;
        let place = argmax_pixel(&q_place);
        if let Some((thr_pick, thr_place, floor)) = self.gate {
            for (q, thr) in [(&q_pick, thr_pick), (&q_place, thr_place)] {
                let p_hat = ambiguity_measure(&persistent_maxima_with_floor(q, floor)?)?;
                if gate(p_hat, thr) == Verdict::Ambiguous {
                    self.ambiguous += 1;
                }
            }
        }
        Ok(Action { pick, place })
    }
}

/// Success rate in percent of `policy` over seeded episodes. Scenes depend
/// only on `seed` and `settings`, so policies are compared on equal terms.
pub fn evaluate_policy(policy: &mut dyn ActionPolicy, settings: &EvalSettings, seed: u64) -> Result<EvalResult> {
    let mut result = EvalResult::default();
    let mut commands = substream(seed, "eval-command", 0);
    for e in 0..settings.episodes as u64 {
        let scenario = settings.scenario_mix.sample(&mut substream(seed, "eval-scenario", e));
        let scene_seed = substream_seed(seed, "eval-scene", e);
        let (mut scene, mut command) = SceneState::reset(settings.image_size, scene_seed, settings.mode, scenario)?;
        for _ in 0..settings.commands_per_episode {
            let action = policy.act(&scene, &command)?;
            let step = scene.step(&command, action)?;
            result.commands += 1;
            result.successes += step.place_success as usize;
            command = scene.next_command(Some((command, step.place_success)), &mut commands);
        }
    }
    result.success_rate = 100.0 * result.successes as f64 / result.commands.max(1) as f64;
    Ok(result)
}

/// Frozen greedy evaluation of a model.
pub fn evaluate<T: Scalar>(model: &ValueModel<T>, settings: &EvalSettings, seed: u64) -> Result<EvalResult> {
    evaluate_policy(&mut GreedyPolicy::new(model), settings, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub success_rate: f64,
    pub eval_commands: usize,
    pub eval_successes: usize,
    pub offline_demos: usize,
    pub interactive_demos: usize,
    pub interactive_steps: u64,
    pub interactive_successes: usize,
    pub flags: FlagCounts,
    /// Interactive demonstrations given while the scene was in a failure state.
    pub failure_state_demos: usize,
    pub epochs_used: usize,
    pub final_pick_threshold: Option<f64>,
    pub final_place_threshold: Option<f64>,
    pub eval_ambiguous_decisions: Option<usize>,
}

/// Metrics file contents for one configuration over all its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub schema: String,
    pub algorithm: String,
    pub split: String,
    pub mode: ColorMode,
    pub demo_budget: usize,
    pub noise_sigma: f64,
    pub epoch_budget: usize,
    pub mean_success_rate: f64,
    pub std_success_rate: f64,
    pub seeds: Vec<SeedMetrics>,
}

pub const METRICS_SCHEMA: &str = "partnr-metrics/1";

pub struct SeedRun<T> {
    pub metrics: SeedMetrics,
    pub telemetry: Vec<TelemetryRow>,
    pub model: ValueModel<T>,
    pub dataset: Dataset,
}

pub struct ExperimentOutput<T> {
    pub metrics: ExperimentMetrics,
    pub telemetry: Vec<TelemetryRow>,
    pub runs: Vec<SeedRun<T>>,
}

/// Offline phase of one seed: expert demonstrations and the model trained
/// on them, plus the epochs that cost.
fn offline_phase<T: Scalar>(config: &ExperimentConfig, seed: u64) -> Result<(ValueModel<T>, Dataset, usize)> {
    config.validate()?;
    let offline = collect_offline(
        seed,
        config.offline_demos(),
        config.image_size,
        config.noise_sigma,
        config.commands_per_episode,
    )?;
    let budget = config.epoch_budget();
    let epochs = match (offline.is_empty(), config.split.is_interactive()) {
        (true, _) => 0,
        (false, true) => config.training.epochs.min(budget),
        (false, false) => budget,
    };
    let model = train_model::<T>(&offline, config.training, epochs, seed)?;
    Ok((model, offline, epochs))
}

/// Interactive session for one seed, after its offline phase, with the
/// remaining epoch budget as retraining allowance.
pub fn start_session<T: Scalar>(config: &ExperimentConfig, seed: u64) -> Result<Session<T>> {
    if !config.split.is_interactive() {
        return Err(Error::config("split has no interactive share"));
    }
    let (model, offline, epochs) = offline_phase::<T>(config, seed)?;
    let mut session = Session::new(config.session_config(seed), model, offline)?;
    session.set_epoch_allowance(Some(config.epoch_budget() - epochs));
    Ok(session)
}

/// The teacher the experiment uses for `seed`.
pub fn scripted_teacher(config: &ExperimentConfig, seed: u64) -> ScriptedTeacher {
    ScriptedTeacher::new(config.noise_sigma, substream(seed, "teacher-noise", 0))
}

/// True while another step fits in the interactive budget. A step adds at
/// most two demonstrations, so at most one budgeted demo stays unused.
pub fn wants_step<T: Scalar>(config: &ExperimentConfig, session: &Session<T>) -> bool {
    let max_steps = config.max_interactive_steps.unwrap_or(20 * config.interactive_demos() + 100) as u64;
    session.interactive_demos() + 2 <= config.interactive_demos() && session.t() < max_steps
}

/// Spends the unused epochs on all aggregated data, then evaluates.
pub fn finish_session<T: Scalar>(config: &ExperimentConfig, seed: u64, mut session: Session<T>) -> Result<SeedRun<T>> {
    let rest = session.epoch_allowance().unwrap_or(0);
    session.train_all(rest)?;
    let mut metrics = SeedMetrics {
        seed,
        success_rate: 0.0,
        eval_commands: 0,
        eval_successes: 0,
        offline_demos: session.dataset().len() - session.interactive_demos(),
        interactive_demos: session.interactive_demos(),
        interactive_steps: session.t(),
        interactive_successes: session.success_tally().1,
        flags: session.flag_counts(),
        failure_state_demos: 0,
        epochs_used: config.epoch_budget() - session.epoch_allowance().unwrap_or(0),
        final_pick_threshold: Some(session.threshold(Role::Pick).as_f64()),
        final_place_threshold: Some(session.threshold(Role::Place).as_f64()),
        eval_ambiguous_decisions: None,
    };
    let thresholds = (session.threshold(Role::Pick), session.threshold(Role::Place));
    let (model, dataset, records) = session.into_parts();
    metrics.failure_state_demos =
        records.iter().filter(|r| r.failure_state.is_some() && r.teacher_pixel.is_some()).count();
    let telemetry = records.iter().map(|r| TelemetryRow::from_record(seed, r)).collect();
    evaluate_into(config, seed, &model, Some(thresholds), &mut metrics)?;
    Ok(SeedRun { metrics, telemetry, model, dataset })
}

fn evaluate_into<T: Scalar>(
    config: &ExperimentConfig,
    seed: u64,
    model: &ValueModel<T>,
    thresholds: Option<(T, T)>,
    metrics: &mut SeedMetrics,
) -> Result<()> {
    let settings = config.eval_settings();
    let eval = if config.gated_eval {
        let (p, q) = thresholds.unwrap_or((T::of(config.pick_threshold.p0), T::of(config.place_threshold.p0)));
        let mut policy = GreedyPolicy::with_gate(model, p, q, config.persistence_floor);
        let mut r = evaluate_policy(&mut policy, &settings, seed)?;
        r.ambiguous_decisions = Some(policy.ambiguous());
        r
    } else {
        evaluate(model, &settings, seed)?
    };
    metrics.success_rate = eval.success_rate;
    metrics.eval_commands = eval.commands;
    metrics.eval_successes = eval.successes;
    metrics.eval_ambiguous_decisions = eval.ambiguous_decisions;
    Ok(())
}

/// One seed: offline phase, interactive phase (if the split has one), then
/// evaluation of the frozen model.
pub fn run_seed<T: Scalar>(config: &ExperimentConfig, seed: u64) -> Result<SeedRun<T>> {
    if config.split.is_interactive() {
        let mut session = start_session::<T>(config, seed)?;
        let mut teacher = scripted_teacher(config, seed);
        while wants_step(config, &session) {
            session.run_step(&mut teacher)?;
        }
        return finish_session(config, seed, session);
    }
    let (model, dataset, epochs) = offline_phase::<T>(config, seed)?;
    let mut metrics = SeedMetrics {
        seed,
        success_rate: 0.0,
        eval_commands: 0,
        eval_successes: 0,
        offline_demos: dataset.len(),
        interactive_demos: 0,
        interactive_steps: 0,
        interactive_successes: 0,
        flags: FlagCounts::default(),
        failure_state_demos: 0,
        epochs_used: epochs,
        final_pick_threshold: None,
        final_place_threshold: None,
        eval_ambiguous_decisions: None,
    };
    evaluate_into(config, seed, &model, None, &mut metrics)?;
    Ok(SeedRun { metrics, telemetry: Vec::new(), model, dataset })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn run_experiment<T: Scalar>(config: &ExperimentConfig) -> Result<ExperimentOutput<T>> {
    config.validate()?;
    let runs: Vec<SeedRun<T>> = if config.parallel && config.seeds.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                config.seeds.iter().map(|&seed| scope.spawn(move || run_seed::<T>(config, seed))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::invalid("seed worker panicked"))))
                .collect::<Result<_>>()
        })?
    } else {
        config.seeds.iter().map(|&seed| run_seed(config, seed)).collect::<Result<_>>()?
    };
    let rates: Vec<f64> = runs.iter().map(|r| r.metrics.success_rate).collect();
    let (mean, std) = mean_std(&rates);
    let metrics = ExperimentMetrics {
        schema: METRICS_SCHEMA.to_string(),
        algorithm: config.algorithm().to_string(),
        split: config.split.label(),
        mode: config.mode,
        demo_budget: config.demo_budget,
        noise_sigma: config.noise_sigma,
        epoch_budget: config.epoch_budget(),
        mean_success_rate: mean,
        std_success_rate: std,
        seeds: runs.iter().map(|r| r.metrics.clone()).collect(),
    };
    let telemetry = runs.iter().flat_map(|r| r.telemetry.iter().cloned()).collect();
    Ok(ExperimentOutput { metrics, telemetry, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            seeds: vec![1],
            demo_budget: 40,
            n_eval_episodes: 5,
            training: TrainConfig { epochs: 20, ..TrainConfig::default() },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn split_labels_and_validation() {
        assert_eq!(Split::BASELINE.label(), "100% off");
        assert_eq!(Split::default().label(), "50% off + 50% int");
        assert_eq!(Split { offline: 0.5, interactive: 0.3 }.label(), "50% off + 30% int");
        assert!(Split { offline: 0.8, interactive: 0.8 }.validate().is_err());
        assert!(Split { offline: 0.0, interactive: 0.0 }.validate().is_err());
        assert!(Split { offline: -0.1, interactive: 0.5 }.validate().is_err());
    }

    #[test]
    fn offline_collection_is_expert_successful() {
        let d = collect_offline(3, 30, 64, 0.0, 3).unwrap();
        assert_eq!(d.len(), 30);
        assert!(d.entries().iter().all(|e| e.phase == Phase::Offline && e.pick.is_some()));
        assert_eq!(d, collect_offline(3, 30, 64, 0.0, 3).unwrap());
    }

    #[test]
    fn expert_policy_is_perfect() {
        let settings = ExperimentConfig::default().eval_settings();
        let r = evaluate_policy(&mut ExpertPolicy, &settings, 7).unwrap();
        assert_eq!(r.success_rate, 100.0);
        assert_eq!(r.commands, 300);
        let recovery =
            EvalSettings { scenario_mix: ScenarioMix { normal: 0.0, failure_a: 1.0, failure_b: 1.0 }, ..settings };
        assert_eq!(evaluate_policy(&mut ExpertPolicy, &recovery, 7).unwrap().success_rate, 100.0);
    }

    #[test]
    fn epoch_budgets_match_across_splits() {
        let partnr = small();
        let baseline = ExperimentConfig { split: Split::BASELINE, ..small() };
        let a = run_seed::<f64>(&partnr, 1).unwrap().metrics;
        let b = run_seed::<f64>(&baseline, 1).unwrap().metrics;
        assert_eq!(a.epochs_used, partnr.epoch_budget());
        assert_eq!(b.epochs_used, baseline.epoch_budget());
        assert_eq!(b.offline_demos, 40);
        assert_eq!(a.offline_demos, 20);
        assert!(a.interactive_demos <= 20 && a.interactive_demos >= 19);
        assert_eq!(a.interactive_demos, a.flags.tp + a.flags.fp + a.flags.fn_);
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = ExperimentConfig { seeds: vec![1, 2], ..small() };
        let a = run_experiment::<f64>(&cfg).unwrap();
        let b = run_experiment::<f64>(&ExperimentConfig { parallel: false, ..cfg }).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.telemetry, b.telemetry);
    }

    #[test]
    fn invalid_split_is_a_config_error() {
        let cfg = ExperimentConfig { split: Split { offline: 0.9, interactive: 0.9 }, ..small() };
        assert!(matches!(run_experiment::<f64>(&cfg), Err(Error::Config(_))));
    }
}
