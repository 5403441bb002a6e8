//! Demonstration sources for the interactive loop.

use thiserror::Error;

use crate::ambiguity::Candidate;
use crate::heatmap::Pixel;
use crate::rng::Rng;
use crate::sim::{correction_oracle, expert_pixel, Command, Observation, Role, SceneState};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TeacherError {
    #[error("teacher did not answer in time")]
    Timeout,
    #[error("teacher disconnected")]
    Disconnected,
    #[error("{0}")]
    Invalid(String),
}

/// What the teacher gets to see when asked for a demonstration.
#[derive(Debug)]
pub struct QueryContext<'a, T> {
    pub t: u64,
    pub role: Role,
    pub scene: &'a SceneState,
    pub observation: &'a Observation,
    pub candidates: &'a [Candidate<T>],
    /// Executed pick a place query is conditioned on.
    pub condition: Option<Pixel>,
}

/// Context after an autonomous act, when the teacher may correct it.
#[derive(Debug)]
pub struct CorrectionContext<'a> {
    pub t: u64,
    pub role: Role,
    pub scene: &'a SceneState,
    pub observation: &'a Observation,
    pub executed: Pixel,
    pub condition: Option<Pixel>,
}

pub trait Teacher<T> {
    fn query(&mut self, ctx: &QueryContext<'_, T>) -> Result<Pixel, TeacherError>;

    /// `Some(pixel)` when the teacher corrects the executed action.
    fn observe_correction(&mut self, ctx: &CorrectionContext<'_>) -> Result<Option<Pixel>, TeacherError>;
}

/// Scripted expert for queries, success-predicate oracle for corrections.
#[derive(Debug, Clone)]
pub struct ScriptedTeacher {
    noise_sigma: f64,
    rng: Rng,
}

impl ScriptedTeacher {
    pub fn new(noise_sigma: f64, rng: Rng) -> Self {
        ScriptedTeacher { noise_sigma, rng }
    }
}

fn command_of(obs: &Observation) -> &Command {
    &obs.command
}

impl<T> Teacher<T> for ScriptedTeacher {
    fn query(&mut self, ctx: &QueryContext<'_, T>) -> Result<Pixel, TeacherError> {
        expert_pixel(ctx.scene, command_of(ctx.observation), ctx.role, self.noise_sigma, &mut self.rng)
            .map_err(|e| TeacherError::Invalid(e.to_string()))
    }

    fn observe_correction(&mut self, ctx: &CorrectionContext<'_>) -> Result<Option<Pixel>, TeacherError> {
        correction_oracle(
            ctx.scene,
            command_of(ctx.observation),
            ctx.executed,
            ctx.role,
            self.noise_sigma,
            &mut self.rng,
        )
        .map_err(|e| TeacherError::Invalid(e.to_string()))
    }
}
