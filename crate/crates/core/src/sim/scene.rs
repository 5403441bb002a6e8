//! Scene state, reset and action execution.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::Pixel;
use crate::rng::Rng;
use crate::sim::{Color, ColorMode, Command};

pub const BOX_SIZE: usize = 6;
pub const BOWL_SIZE: usize = 10;
pub const BOWL_HOLE: usize = 6;
pub const DEFAULT_IMAGE_SIZE: usize = 64;
/// Minimum free pixels between footprints at reset.
const GAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Box,
    Bowl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Normal,
    /// The commanded box already sits in a non-target bowl.
    FailureA,
    /// Another box already sits in the target bowl.
    FailureB,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Normal, Scenario::FailureA, Scenario::FailureB];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Normal => "normal",
            Scenario::FailureA => "failure_a",
            Scenario::FailureB => "failure_b",
        }
    }
}

/// Axis-aligned square `[lo, lo + size)` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub u0: usize,
    pub v0: usize,
    pub size: usize,
}

impl Rect {
    fn centered(center: Pixel, size: usize) -> Rect {
        Rect { u0: center.u - size / 2, v0: center.v - size / 2, size }
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.u >= self.u0 && p.u < self.u0 + self.size && p.v >= self.v0 && p.v < self.v0 + self.size
    }

    fn separated(&self, other: &Rect, gap: usize) -> bool {
        self.u0 + self.size + gap <= other.u0
            || other.u0 + other.size + gap <= self.u0
            || self.v0 + self.size + gap <= other.v0
            || other.v0 + other.size + gap <= self.v0
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (self.v0..self.v0 + self.size).flat_map(move |v| (self.u0..self.u0 + self.size).map(move |u| Pixel::new(u, v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    pub color: Color,
    pub center: Pixel,
}

impl ObjectSpec {
    pub fn half_extent(kind: ObjectKind) -> usize {
        match kind {
            ObjectKind::Box => BOX_SIZE / 2,
            ObjectKind::Bowl => BOWL_SIZE / 2,
        }
    }

    /// Outer square: the filled box, or the bowl ring plus its hole.
    pub fn bounds(&self) -> Rect {
        match self.kind {
            ObjectKind::Box => Rect::centered(self.center, BOX_SIZE),
            ObjectKind::Bowl => Rect::centered(self.center, BOWL_SIZE),
        }
    }

    pub fn hole(&self) -> Option<Rect> {
        (self.kind == ObjectKind::Bowl).then(|| Rect::centered(self.center, BOWL_HOLE))
    }

    /// Pixels the object paints (the bowl's hole is not painted).
    pub fn paints(&self, p: Pixel) -> bool {
        self.bounds().contains(p) && !self.hole().is_some_and(|h| h.contains(p))
    }

    /// Footprint used for success and conditioning: for a bowl, ring or hole.
    pub fn footprint_contains(&self, p: Pixel) -> bool {
        self.bounds().contains(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub pick: Pixel,
    pub place: Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub pick_valid: bool,
    pub place_success: bool,
}

/// Table-top scene. Bowls never move; a moved box is redrawn on top.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneState {
    pub width: usize,
    pub height: usize,
    /// Draw order: bowls first, boxes later; later boxes are on top.
    pub objects: Vec<ObjectSpec>,
    pub rng_seed: u64,
    pub step_count: u64,
}

impl SceneState {
    pub fn empty(width: usize, height: usize) -> Self {
        SceneState { width, height, objects: Vec::new(), rng_seed: 0, step_count: 0 }
    }

    /// Three boxes and three bowls at random non-overlapping positions plus
    /// the first command. Pure function of its arguments.
    pub fn reset(size: usize, seed: u64, mode: ColorMode, scenario: Scenario) -> Result<(SceneState, Command)> {
        if size < 32 {
            return Err(Error::invalid(format!("image size {size} is too small for six objects")));
        }
        let mut rng = Rng::seed_from_u64(seed);
        let palette = mode.palette();
        let mut box_colors = palette.clone();
        box_colors.shuffle(&mut rng);
        let mut bowl_colors = palette;
        bowl_colors.shuffle(&mut rng);

        let mut scene = SceneState::empty(size, size);
        scene.rng_seed = seed;
        let kinds = [ObjectKind::Bowl; 3].into_iter().chain([ObjectKind::Box; 3]);
        let colors = bowl_colors[..3].iter().chain(&box_colors[..3]);
        for (kind, &color) in kinds.zip(colors) {
            let center = scene.free_position(kind, &mut rng)?;
            scene.objects.push(ObjectSpec { kind, color, center });
        }

        let command = scene.fresh_command(&mut rng);
        match scenario {
            Scenario::Normal => {}
            Scenario::FailureA => {
                let others: Vec<usize> = scene.bowls().filter(|&i| scene.objects[i].color != command.place).collect();
                let bowl = *others.choose(&mut rng).expect("three bowls");
                let target = scene.find(ObjectKind::Box, command.pick).expect("commanded box");
                scene.move_box(target, scene.objects[bowl].center);
            }
            Scenario::FailureB => {
                let others: Vec<usize> = scene.boxes().filter(|&i| scene.objects[i].color != command.pick).collect();
                let intruder = *others.choose(&mut rng).expect("three boxes");
                let bowl = scene.find(ObjectKind::Bowl, command.place).expect("commanded bowl");
                scene.move_box(intruder, scene.objects[bowl].center);
            }
        }
        Ok((scene, command))
    }

    fn free_position(&self, kind: ObjectKind, rng: &mut Rng) -> Result<Pixel> {
        let half = ObjectSpec::half_extent(kind);
        for _ in 0..10_000 {
            let center =
                Pixel::new(rng.random_range(half..=self.width - half), rng.random_range(half..=self.height - half));
            let rect = ObjectSpec { kind, color: Color::Red, center }.bounds();
            if self.objects.iter().all(|o| o.bounds().separated(&rect, GAP)) {
                return Ok(center);
            }
        }
        Err(Error::invalid("could not place objects without overlap"))
    }

    pub fn boxes(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices(ObjectKind::Box)
    }

    pub fn bowls(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices(ObjectKind::Bowl)
    }

    fn indices(&self, kind: ObjectKind) -> impl Iterator<Item = usize> + '_ {
        self.objects.iter().enumerate().filter(move |(_, o)| o.kind == kind).map(|(i, _)| i)
    }

    pub fn find(&self, kind: ObjectKind, color: Color) -> Option<usize> {
        self.objects.iter().position(|o| o.kind == kind && o.color == color)
    }

    pub fn object(&self, i: usize) -> &ObjectSpec {
        &self.objects[i]
    }

    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.u < self.width && p.v < self.height
    }

    /// Topmost box whose footprint covers `p`.
    pub fn box_at(&self, p: Pixel) -> Option<usize> {
        self.boxes().filter(|&i| self.objects[i].footprint_contains(p)).last()
    }

    pub fn bowl_at(&self, p: Pixel) -> Option<usize> {
        self.bowls().find(|&i| self.objects[i].footprint_contains(p))
    }

    /// Bowl whose footprint holds the box's center.
    pub fn bowl_holding(&self, box_index: usize) -> Option<usize> {
        self.bowl_at(self.objects[box_index].center)
    }

    pub fn bowl_occupants(&self, bowl: usize) -> Vec<usize> {
        self.boxes().filter(|&b| self.bowl_holding(b) == Some(bowl)).collect()
    }

    /// Whether `command` is being issued from a state only reachable by a
    /// mistake.
    pub fn failure_state(&self, command: &Command) -> Option<Scenario> {
        let target_box = self.find(ObjectKind::Box, command.pick)?;
        let target_bowl = self.find(ObjectKind::Bowl, command.place)?;
        match self.bowl_holding(target_box) {
            Some(b) if b != target_bowl => return Some(Scenario::FailureA),
            _ => {}
        }
        let intruders = self.bowl_occupants(target_bowl).into_iter().any(|b| b != target_box);
        intruders.then_some(Scenario::FailureB)
    }

    fn move_box(&mut self, index: usize, to: Pixel) {
        let half = BOX_SIZE / 2;
        let mut obj = self.objects.remove(index);
        obj.center = Pixel::new(to.u.clamp(half, self.width - half), to.v.clamp(half, self.height - half));
        self.objects.push(obj);
    }

    /// Executes a pick-and-place. An invalid pick leaves the scene as is.
    pub fn step(&mut self, command: &Command, action: Action) -> Result<StepResult> {
        if !self.in_bounds(action.pick) || !self.in_bounds(action.place) {
            return Err(Error::invalid(format!(
                "action {} -> {} outside {}x{} image",
                action.pick, action.place, self.width, self.height
            )));
        }
        self.step_count += 1;
        let Some(picked) = self.box_at(action.pick) else {
            return Ok(StepResult { pick_valid: false, place_success: false });
        };
        let right_box = self.objects[picked].color == command.pick;
        let in_target = self
            .find(ObjectKind::Bowl, command.place)
            .is_some_and(|b| self.objects[b].footprint_contains(action.place));
        self.move_box(picked, action.place);
        Ok(StepResult { pick_valid: true, place_success: right_box && in_target })
    }

    /// True when the box is topmost at its own center, so picking there
    /// takes it.
    pub fn graspable(&self, box_index: usize) -> bool {
        self.box_at(self.objects[box_index].center) == Some(box_index)
    }

    /// Samples a command over graspable boxes not yet in a bowl and empty
    /// bowls, falling back to any graspable box and bowl whose goal is not
    /// already met.
    pub fn fresh_command(&self, rng: &mut Rng) -> Command {
        let graspable: Vec<usize> = self.boxes().filter(|&b| self.graspable(b)).collect();
        let free_boxes: Vec<usize> = graspable.iter().copied().filter(|&b| self.bowl_holding(b).is_none()).collect();
        let empty_bowls: Vec<usize> = self.bowls().filter(|&b| self.bowl_occupants(b).is_empty()).collect();
        let (boxes, bowls) = if free_boxes.is_empty() || empty_bowls.is_empty() {
            (graspable, self.bowls().collect::<Vec<_>>())
        } else {
            (free_boxes, empty_bowls)
        };
        let pairs: Vec<(usize, usize)> = boxes
            .iter()
            .flat_map(|&x| bowls.iter().map(move |&y| (x, y)))
            .filter(|&(x, y)| self.bowl_holding(x) != Some(y))
            .collect();
        let &(b, w) = pairs.choose(rng).unwrap_or(&(boxes[0], bowls[0]));
        Command::new(self.objects[b].color, self.objects[w].color)
    }

    /// A failed command is issued again while its box can still be picked;
    /// otherwise a fresh one is sampled.
    pub fn next_command(&self, previous: Option<(Command, bool)>, rng: &mut Rng) -> Command {
        match previous {
            Some((command, false)) if self.find(ObjectKind::Box, command.pick).is_some_and(|b| self.graspable(b)) => {
                command
            }
            _ => self.fresh_command(rng),
        }
    }
}
