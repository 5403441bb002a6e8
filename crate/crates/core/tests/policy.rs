use std::sync::Arc;

use partnr::experiment::{collect_offline, evaluate, train_model, EvalSettings};
use partnr::policy::{FeatureMap, TrainConfig, ValueModel};
use partnr::session::ScenarioMix;
use partnr::sim::{render, Color, ColorMode, Command, ObjectKind, ObjectSpec, Role, SceneState};
use partnr::topology::{persistent_maxima_with_floor, PersistenceFloor};
use partnr::{argmax_pixel, Pixel};

fn trained() -> ValueModel<f64> {
    let data = collect_offline(11, 60, 64, 0.0, 3).unwrap();
    train_model(&data, TrainConfig::default(), 50, 11).unwrap()
}

fn scene(objects: &[(ObjectKind, Color, (usize, usize))]) -> SceneState {
    let mut s = SceneState::empty(64, 64);
    for &(kind, color, (u, v)) in objects {
        s.objects.push(ObjectSpec { kind, color, center: Pixel::new(u, v) });
    }
    s
}

#[test]
fn trained_model_picks_the_commanded_box() {
    let model = trained();
    let s = scene(&[
        (ObjectKind::Bowl, Color::Yellow, (12, 12)),
        (ObjectKind::Bowl, Color::Blue, (50, 12)),
        (ObjectKind::Bowl, Color::Gray, (30, 50)),
        (ObjectKind::Box, Color::Red, (20, 34)),
        (ObjectKind::Box, Color::Cyan, (44, 34)),
        (ObjectKind::Box, Color::Brown, (54, 54)),
    ]);
    let fm = FeatureMap::compute(&render(&s));
    let h = model.predict(&fm, Role::Pick, Color::Red, None).unwrap();
    let red = s.find(ObjectKind::Box, Color::Red).unwrap();
    assert!(s.object(red).footprint_contains(argmax_pixel(&h)));
    let h = model.predict(&fm, Role::Place, Color::Blue, Some(Pixel::new(20, 34))).unwrap();
    let blue = s.find(ObjectKind::Bowl, Color::Blue).unwrap();
    assert!(s.object(blue).footprint_contains(argmax_pixel(&h)));
}

#[test]
fn similar_unseen_color_forms_a_second_peak() {
    let model = trained();
    let s = scene(&[
        (ObjectKind::Bowl, Color::Yellow, (12, 12)),
        (ObjectKind::Bowl, Color::Blue, (50, 12)),
        (ObjectKind::Bowl, Color::Gray, (30, 50)),
        (ObjectKind::Box, Color::Red, (20, 34)),
        (ObjectKind::Box, Color::Orange, (44, 34)),
        (ObjectKind::Box, Color::Cyan, (54, 54)),
    ]);
    let fm = Arc::new(FeatureMap::compute(&render(&s)));
    let h = model.predict(&fm, Role::Pick, Color::Red, None).unwrap();
    let maxima = persistent_maxima_with_floor(&h, PersistenceFloor::default()).unwrap();
    assert!(maxima.len() >= 2, "{maxima:?}");
    let orange = s.find(ObjectKind::Box, Color::Orange).unwrap();
    assert!(maxima.iter().any(|m| s.object(orange).footprint_contains(m.pixel)));
}

#[test]
fn zero_weight_model_matches_fixed_argmax_policy() {
    let settings = EvalSettings {
        image_size: 64,
        mode: ColorMode::Seen,
        episodes: 20,
        commands_per_episode: 3,
        scenario_mix: ScenarioMix::default(),
    };
    let model = ValueModel::<f64>::new(TrainConfig::default());
    // A constant map's canonical argmax is pixel (0, 0) for both roles.
    struct Corner;
    impl partnr::experiment::ActionPolicy for Corner {
        fn act(&mut self, _: &SceneState, _: &Command) -> partnr::Result<partnr::sim::Action> {
            Ok(partnr::sim::Action { pick: Pixel::new(0, 0), place: Pixel::new(0, 0) })
        }
    }
    let a = evaluate(&model, &settings, 5).unwrap();
    let b = partnr::experiment::evaluate_policy(&mut Corner, &settings, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, evaluate(&model, &settings, 5).unwrap());
}

#[test]
fn noisy_demonstrations_have_the_configured_spread() {
    let data = collect_offline(2, 1000, 64, 3.0, 3).unwrap();
    let mut du = Vec::new();
    let mut dv = Vec::new();
    for d in data.entries() {
        let pick = d.pick.unwrap();
        let cmd = d.observation.command;
        let img = &d.observation.image;
        // Center of the fully visible commanded box, from its pixels.
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
        for v in 0..64 {
            for u in 0..64 {
                if img.rgb(Pixel::new(u, v)) == cmd.pick.rgb() {
                    su += u as f64;
                    sv += v as f64;
                    n += 1.0;
                }
            }
        }
        if n != 36.0 {
            continue;
        }
        du.push(pick.u as f64 - (su / n + 0.5));
        dv.push(pick.v as f64 - (sv / n + 0.5));
    }
    let sd = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
    };
    assert!(du.len() > 500);
    assert!((sd(&du) - 3.0).abs() < 0.5, "{}", sd(&du));
    assert!((sd(&dv) - 3.0).abs() < 0.5, "{}", sd(&dv));
}
