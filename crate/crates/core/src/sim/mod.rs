//! Deterministic desk-scale table-top pick-and-place world.

mod color;
mod command;
mod expert;
mod image;
mod scene;

use std::sync::Arc;

pub use self::color::{Color, ColorMode, BACKGROUND};
pub use self::command::Command;
pub use self::expert::{correction_oracle, expert_pixel, necessity_oracle, scripted_expert, Role};
pub use self::image::{render, Image, InlineImage};
pub use self::scene::{
    Action, ObjectKind, ObjectSpec, Rect, Scenario, SceneState, StepResult, BOWL_HOLE, BOWL_SIZE, BOX_SIZE,
    DEFAULT_IMAGE_SIZE,
};

/// What the policy sees: the rendered top view and the command.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: Arc<Image>,
    pub command: Command,
}

impl Observation {
    pub fn of(scene: &SceneState, command: Command) -> Self {
        Observation { image: Arc::new(render(scene)), command }
    }
}
