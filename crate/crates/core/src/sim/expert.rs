//! Scripted expert and the oracles that stand in for the teacher's judgment.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::heatmap::Pixel;
use crate::rng::Rng;
use crate::sim::{Action, Command, ObjectKind, SceneState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Pick,
    Place,
}

impl Role {
    pub const BOTH: [Role; 2] = [Role::Pick, Role::Place];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Pick => "pick",
            Role::Place => "place",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

fn commanded_centers(scene: &SceneState, command: &Command) -> Result<(Pixel, Pixel)> {
    let b = scene
        .find(ObjectKind::Box, command.pick)
        .ok_or_else(|| Error::invalid(format!("no {} box in scene", command.pick)))?;
    let w = scene
        .find(ObjectKind::Bowl, command.place)
        .ok_or_else(|| Error::invalid(format!("no {} bowl in scene", command.place)))?;
    Ok((scene.object(b).center, scene.object(w).center))
}

fn perturb(p: Pixel, sigma: f64, scene: &SceneState, rng: &mut Rng) -> Pixel {
    if sigma <= 0.0 {
        return p;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut axis = |x: usize, len: usize| {
        let moved = (x as f64 + normal.sample(rng)).round();
        moved.clamp(0.0, (len - 1) as f64) as usize
    };
    let u = axis(p.u, scene.width);
    let v = axis(p.v, scene.height);
    Pixel::new(u, v)
}

/// Commanded box center and commanded bowl center, each perturbed by
/// isotropic Gaussian noise of `noise_sigma` pixels.
pub fn scripted_expert(scene: &SceneState, command: &Command, noise_sigma: f64, rng: &mut Rng) -> Result<Action> {
    let (pick, place) = commanded_centers(scene, command)?;
    let pick = perturb(pick, noise_sigma, scene, rng);
    let place = perturb(place, noise_sigma, scene, rng);
    Ok(Action { pick, place })
}

/// Expert pixel for a single role.
pub fn expert_pixel(
    scene: &SceneState,
    command: &Command,
    role: Role,
    noise_sigma: f64,
    rng: &mut Rng,
) -> Result<Pixel> {
    let (pick, place) = commanded_centers(scene, command)?;
    let target = match role {
        Role::Pick => pick,
        Role::Place => place,
    };
    Ok(perturb(target, noise_sigma, scene, rng))
}

/// True when executing `proposed` for `role` would not satisfy the command,
/// i.e. a human would have had to step in.
pub fn necessity_oracle(scene: &SceneState, command: &Command, proposed: Pixel, role: Role) -> bool {
    if !scene.in_bounds(proposed) {
        return true;
    }
    match role {
        Role::Pick => scene.box_at(proposed).map_or(true, |b| scene.object(b).color != command.pick),
        Role::Place => {
            scene.find(ObjectKind::Bowl, command.place).map_or(true, |w| !scene.object(w).footprint_contains(proposed))
        }
    }
}

/// Expert pixel when the executed pixel needed correcting, else `None`.
pub fn correction_oracle(
    scene: &SceneState,
    command: &Command,
    executed: Pixel,
    role: Role,
    noise_sigma: f64,
    rng: &mut Rng,
) -> Result<Option<Pixel>> {
    if necessity_oracle(scene, command, executed, role) {
        expert_pixel(scene, command, role, noise_sigma, rng).map(Some)
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::sim::{ColorMode, Scenario};

    #[test]
    fn clean_expert_hits_centers_and_succeeds() {
        for scenario in [Scenario::Normal, Scenario::FailureA, Scenario::FailureB] {
            for seed in 0..100 {
                let (mut s, c) = SceneState::reset(64, seed, ColorMode::Seen, scenario).unwrap();
                let mut rng = substream(seed, "noise", 0);
                let a = scripted_expert(&s, &c, 0.0, &mut rng).unwrap();
                let b = s.find(ObjectKind::Box, c.pick).unwrap();
                assert_eq!(a.pick, s.object(b).center);
                assert!(!necessity_oracle(&s, &c, a.pick, Role::Pick));
                assert!(!necessity_oracle(&s, &c, a.place, Role::Place));
                assert!(s.step(&c, a).unwrap().place_success, "seed {seed} {scenario:?}");
            }
        }
    }

    #[test]
    fn noisy_expert_is_reproducible() {
        let (s, c) = SceneState::reset(64, 1, ColorMode::Seen, Scenario::Normal).unwrap();
        let a = scripted_expert(&s, &c, 3.0, &mut substream(7, "noise", 0)).unwrap();
        let b = scripted_expert(&s, &c, 3.0, &mut substream(7, "noise", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracles() {
        let (s, c) = SceneState::reset(64, 2, ColorMode::Seen, Scenario::Normal).unwrap();
        let target = s.object(s.find(ObjectKind::Box, c.pick).unwrap()).center;
        let wrong = s.boxes().find(|&b| s.object(b).color != c.pick).unwrap();
        let wrong = s.object(wrong).center;
        let bowl = s.object(s.find(ObjectKind::Bowl, c.place).unwrap()).center;

        assert!(!necessity_oracle(&s, &c, target, Role::Pick));
        assert!(necessity_oracle(&s, &c, wrong, Role::Pick));
        let ring = Pixel::new(bowl.u - 5, bowl.v);
        assert!(!necessity_oracle(&s, &c, ring, Role::Place));

        let mut rng = substream(0, "noise", 0);
        assert_eq!(correction_oracle(&s, &c, wrong, Role::Pick, 0.0, &mut rng).unwrap(), Some(target));
        assert_eq!(correction_oracle(&s, &c, bowl, Role::Place, 0.0, &mut rng).unwrap(), None);
        let bg = Pixel::new(0, 0);
        if s.box_at(bg).is_none() {
            assert_eq!(correction_oracle(&s, &c, bg, Role::Pick, 0.0, &mut rng).unwrap(), Some(target));
        }
    }

    #[test]
    fn absent_color_is_an_error() {
        let (s, _) = SceneState::reset(64, 2, ColorMode::Seen, Scenario::Normal).unwrap();
        let missing = crate::sim::Color::ALL.into_iter().find(|&c| s.find(ObjectKind::Box, c).is_none()).unwrap();
        let c = Command::new(missing, missing);
        assert!(scripted_expert(&s, &c, 0.0, &mut substream(0, "n", 0)).is_err());
    }
}
