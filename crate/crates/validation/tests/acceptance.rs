//! One test per acceptance criterion.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use partnr::experiment::{run_experiment, ExperimentConfig, ExperimentOutput, Split};
use partnr::policy::{Example, FeatureMap, TrainConfig, ValueModel};
use partnr::report::{write_run, RunManifest};
use partnr::rng::substream;
use partnr::session::ScenarioMix;
use partnr::sim::{Color, ColorMode, Image, Role, BACKGROUND};
use partnr::telemetry::{audit, read_csv, write_csv};
use partnr::threshold::{update_threshold, Flag, ThresholdConfig, ThresholdController};
use partnr::{ambiguity_measure, persistent_maxima, Heatmap, LocalMaximum, Pixel};
use partnr_validation::check;
use rand::seq::SliceRandom;
use rand::Rng as _;

fn brute_force_maxima(h: &Heatmap<f64>) -> Vec<Pixel> {
    let (w, ht) = (h.width() as isize, h.height() as isize);
    let mut out = Vec::new();
    for v in 0..ht {
        for u in 0..w {
            let x = h.get(Pixel::new(u as usize, v as usize));
            let mut strict = true;
            for dv in -1..=1 {
                for du in -1..=1 {
                    let (nu, nv) = (u + du, v + dv);
                    if (du, dv) != (0, 0) && nu >= 0 && nv >= 0 && nu < w && nv < ht {
                        strict &= h.get(Pixel::new(nu as usize, nv as usize)) < x;
                    }
                }
            }
            if strict {
                out.push(Pixel::new(u as usize, v as usize));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn a1_persistence_oracle_equivalence() {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut peaks = 0;
    for seed in 0..200 {
        let mut rng = substream(seed, "a1", 0);
        let mut values: Vec<f64> = (0..32 * 32).map(|i| i as f64).collect();
        values.shuffle(&mut rng);
        let values: Vec<f64> = values.into_iter().map(|x| x * 0.01 + rng.random::<f64>() * 1e-3).collect();
        let h = Heatmap::new(32, 32, values).unwrap();
        let mut got: Vec<Pixel> = persistent_maxima(&h, 0.0).unwrap().iter().map(|m| m.pixel).collect();
        got.sort();
        let want = brute_force_maxima(&h);
        peaks += want.len();
        mismatches += (got != want) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        "A1",
        mismatches == 0 && secs < 5.0,
        format!("200 maps, {peaks} maxima, {mismatches} mismatching maps, {secs:.2}s"),
    );
}

fn maxima(values: &[f64]) -> Vec<LocalMaximum<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &value)| LocalMaximum { pixel: Pixel::new(i, 0), value, persistence: 1.0 })
        .collect()
}

#[test]
fn a2_ambiguity_analytics() {
    let single = ambiguity_measure(&maxima(&[3.7])).unwrap();
    let equal_err = (1..=20)
        .map(|m| (ambiguity_measure(&maxima(&vec![0.42; m])).unwrap() - 1.0 / m as f64).abs())
        .fold(0.0, f64::max);
    let mut rng = substream(0, "a2", 0);
    let mut shift_err: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..12);
        let xs: Vec<f64> = (0..k).map(|_| rng.random_range(-20.0..20.0)).collect();
        let c = rng.random_range(-1e3..1e3);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let d = ambiguity_measure(&maxima(&xs)).unwrap() - ambiguity_measure(&maxima(&shifted)).unwrap();
        shift_err = shift_err.max(d.abs());
    }
    check(
        "A2",
        single == 1.0 && equal_err <= 1e-12 && shift_err <= 1e-9,
        format!("single p_hat = {single}, equal-maxima error {equal_err:.1e}, shift error {shift_err:.1e}"),
    );
}

/// Decision stream with a fixed p_hat distribution: the model's best guess
/// is the true best action with probability p_hat, and help is necessary
/// exactly when it is not.
fn closed_loop(seed: u64, steps: u64) -> Vec<f64> {
    let mut rng = substream(seed, "a3-stream", 0);
    let mut c = ThresholdController::<f64>::new(ThresholdConfig::default()).unwrap();
    (0..steps)
        .map(|t| {
            let p_hat: f64 = rng.random_range(1.0 / 3.0..1.0);
            let necessary = rng.random::<f64>() >= p_hat;
            let flag = match (p_hat <= c.threshold(), necessary) {
                (true, true) => Flag::TP,
                (true, false) => Flag::FP,
                (false, true) => Flag::FN,
                (false, false) => Flag::TN,
            };
            c.observe(t, flag).unwrap();
            c.sensitivity()
        })
        .collect()
}

/// First step by `settle` from which the estimate stays in band for `hold`
/// consecutive decisions.
fn settles(s: &[f64], target: f64, tol: f64, settle: usize, hold: usize) -> Option<usize> {
    let ok: Vec<bool> = s.iter().map(|x| (x - target).abs() <= tol).collect();
    (0..=settle).find(|&t0| t0 + hold <= ok.len() && ok[t0..t0 + hold].iter().all(|&b| b))
}

#[test]
fn a3_threshold_controller() {
    let start = Instant::now();
    let d = ThresholdConfig::default();
    let defaults = d.p0 == 0.5 && d.s_des == 0.9 && d.window == 50 && d.rate == 0.005;
    let mut rng = substream(0, "a3", 0);
    let mut rule_err: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.random_range(d.p_min..d.p_max);
        let s = rng.random_range(0.0..1.0);
        let want = (p + d.rate * (d.s_des - s)).clamp(d.p_min, d.p_max);
        rule_err = rule_err.max((update_threshold(p, s, &d) - want).abs());
    }
    let direction = update_threshold(0.5, 0.8, &d) > 0.5 && update_threshold(0.5, 1.0, &d) < 0.5;
    let loops: Vec<Option<usize>> =
        (0..3).map(|seed| settles(&closed_loop(seed, 700), d.s_des, 0.05, 500, 200)).collect();
    let longest: Vec<usize> = (0..3)
        .map(|seed| {
            let s = closed_loop(seed, 700);
            let mut best = 0;
            let mut run = 0;
            for x in s {
                run = if (x - d.s_des).abs() <= 0.05 { run + 1 } else { 0 };
                best = best.max(run);
            }
            best
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let pass = defaults && rule_err <= 1e-12 && direction && loops.iter().all(Option::is_some) && secs < 10.0;
    check(
        "A3",
        pass,
        format!(
            "defaults {defaults}, rule error {rule_err:.1e}, direction {direction}, \
             settled at {loops:?}, longest in-band runs {longest:?} of 200 needed, {secs:.2}s"
        ),
    );
}

fn toy_image(seed: u64) -> Image {
    let mut rng = substream(seed, "a4-image", 0);
    let palette = [BACKGROUND, Color::Red.rgb(), Color::Blue.rgb(), Color::Orange.rgb(), Color::White.rgb()];
    Image::from_raw(8, 8, (0..64).map(|_| palette[rng.random_range(0..palette.len())]).collect()).unwrap()
}

#[test]
fn a4_gradient_check() {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mut rng = substream(i, "a4", 0);
        let features = Arc::new(FeatureMap::<f64>::compute(&toy_image(i)));
        let color = Color::ALL[rng.random_range(0..Color::ALL.len())];
        let target = Pixel::new(rng.random_range(0..8), rng.random_range(0..8));
        let ex = if i % 2 == 0 {
            Example::pick(features, color, target)
        } else {
            let condition = Pixel::new(rng.random_range(0..8), rng.random_range(0..8));
            Example::place(features, color, condition, target)
        };
        let mut model = ValueModel::<f64>::new(TrainConfig::default());
        for w in model.weights_mut(ex.role, color) {
            *w = rng.random_range(-1.5..1.5);
        }
        let (_, analytic) = model.example_loss_and_gradient(&ex);
        let h = 1e-5;
        let numeric: Vec<f64> = (0..model.feature_dim())
            .map(|k| {
                let w0 = model.weights(ex.role, color)[k];
                model.weights_mut(ex.role, color)[k] = w0 + h;
                let up = model.example_loss_and_gradient(&ex).0;
                model.weights_mut(ex.role, color)[k] = w0 - h;
                let down = model.example_loss_and_gradient(&ex).0;
                model.weights_mut(ex.role, color)[k] = w0;
                (up - down) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12));
    }
    let _ = Role::Pick;
    check("A4", worst < 1e-4, format!("20 pairs at 8x8, worst relative error {worst:.2e}"));
}

fn table_config(mode: ColorMode, budget: usize, noise: f64, split: Split) -> ExperimentConfig {
    ExperimentConfig { mode, demo_budget: budget, noise_sigma: noise, split, ..ExperimentConfig::default() }
}

fn run(cfg: &ExperimentConfig) -> (ExperimentOutput<f64>, f64) {
    let start = Instant::now();
    let out = run_experiment::<f64>(cfg).unwrap();
    (out, start.elapsed().as_secs_f64())
}

fn seen_500_partnr() -> &'static (ExperimentOutput<f64>, f64) {
    static RUN: OnceLock<(ExperimentOutput<f64>, f64)> = OnceLock::new();
    RUN.get_or_init(|| run(&table_config(ColorMode::Seen, 500, 0.0, Split::default())))
}

fn rates(out: &ExperimentOutput<f64>) -> Vec<f64> {
    out.metrics.seeds.iter().map(|s| (s.success_rate * 10.0).round() / 10.0).collect()
}

#[test]
fn a5_table_seen_colors() {
    let (base, tb) = run(&table_config(ColorMode::Seen, 500, 0.0, Split::BASELINE));
    let (partnr, tp) = seen_500_partnr();
    let (b, p) = (base.metrics.mean_success_rate, partnr.metrics.mean_success_rate);
    let equal_epochs =
        base.metrics.seeds.iter().chain(&partnr.metrics.seeds).all(|s| s.epochs_used == base.metrics.epoch_budget);
    let secs = tb + tp;
    check(
        "A5",
        p >= b && equal_epochs && secs < 600.0,
        format!(
            "seen, 500 demos: PARTNR {p:.1} {:?} vs baseline {b:.1} {:?}, equal epochs {equal_epochs}, {secs:.0}s",
            rates(partnr),
            rates(&base)
        ),
    );
}

#[test]
fn a6_table_unseen_colors() {
    let (base, tb) = run(&table_config(ColorMode::Unseen, 1000, 0.0, Split::BASELINE));
    let (partnr, tp) = run(&table_config(ColorMode::Unseen, 1000, 0.0, Split::default()));
    let (b, p) = (base.metrics.mean_success_rate, partnr.metrics.mean_success_rate);
    let secs = tb + tp;
    check(
        "A6",
        p >= b + 10.0 && secs < 900.0,
        format!(
            "unseen, 1000 demos: PARTNR {p:.1} {:?} vs baseline {b:.1} {:?}, {secs:.0}s",
            rates(&partnr),
            rates(&base)
        ),
    );
}

#[test]
fn a7_recovery_from_failure_states() {
    let recovery = |split| ExperimentConfig {
        split,
        scenario_mix: ScenarioMix { normal: 0.5, failure_a: 0.25, failure_b: 0.25 },
        n_eval_episodes: 30,
        eval_commands_per_episode: 1,
        eval_scenario_mix: ScenarioMix { normal: 0.0, failure_a: 1.0, failure_b: 1.0 },
        ..ExperimentConfig::default()
    };
    let (base, _) = run(&recovery(Split::BASELINE));
    let (partnr, _) = run(&recovery(Split::default()));
    let failure_demos: Vec<usize> = partnr.metrics.seeds.iter().map(|s| s.failure_state_demos).collect();
    let (b, p) = (base.metrics.mean_success_rate, partnr.metrics.mean_success_rate);
    check(
        "A7",
        failure_demos.iter().all(|&n| n >= 10) && p > b,
        format!(
            "30 failure_a/failure_b scenes: PARTNR {p:.1} {:?} vs baseline {b:.1} {:?}, failure-state demos {failure_demos:?}",
            rates(&partnr),
            rates(&base)
        ),
    );
}

#[test]
fn a8_noisy_demonstrations() {
    let (base, _) = run(&table_config(ColorMode::Seen, 1000, 3.0, Split::BASELINE));
    let (partnr, _) = run(&table_config(ColorMode::Seen, 1000, 3.0, Split::default()));
    let (b, p) = (base.metrics.mean_success_rate, partnr.metrics.mean_success_rate);
    check(
        "A8",
        p >= b,
        format!("noise sigma 3, 1000 demos: PARTNR {p:.1} {:?} vs baseline {b:.1} {:?}", rates(&partnr), rates(&base)),
    );
}

#[test]
fn a9_determinism() {
    let cfg =
        ExperimentConfig { seeds: vec![4, 5], demo_budget: 120, n_eval_episodes: 20, ..ExperimentConfig::default() };
    let manifest = RunManifest::new(cfg.clone());
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        write_run(dir.path(), &manifest, &run_experiment::<f64>(&cfg).unwrap()).unwrap();
    }
    let same = ["metrics.json", "telemetry.csv", "report.md", "manifest.json"]
        .iter()
        .all(|f| std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap());
    let rows = std::fs::read_to_string(dirs[0].path().join("telemetry.csv")).unwrap().lines().count() - 1;
    check("A9", same && rows > 0, format!("two executions, {rows} telemetry rows, byte-identical outputs {same}"));
}

#[test]
fn a10_flag_bookkeeping() {
    let (partnr, _) = seen_500_partnr();
    let mut csv = Vec::new();
    write_csv(&partnr.telemetry, &mut csv).unwrap();
    let rep = audit(&read_csv(csv.as_slice()).unwrap());
    let demos: usize = partnr.metrics.seeds.iter().map(|s| s.interactive_demos).sum();
    let aggregated: usize = partnr
        .runs
        .iter()
        .map(|r| r.dataset.entries().iter().filter(|e| e.phase == partnr::dataset::Phase::Interactive).count())
        .sum();
    let steps: u64 = partnr.metrics.seeds.iter().map(|s| s.interactive_steps).sum();
    let pass =
        rep.passed && rep.decisions as u64 == 2 * steps && demos == rep.tp + rep.fp + rep.fn_ && aggregated == demos;
    check(
        "A10",
        pass,
        format!(
            "{} decisions over {steps} steps, TP {} TN {} FP {} FN {}, interactive demos {demos}, \
             dataset entries {aggregated}, violations {}",
            rep.decisions,
            rep.tp,
            rep.tn,
            rep.fp,
            rep.fn_,
            rep.violations.len()
        ),
    );
}
