//! Linear language-conditioned value maps and their training.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::{FeatureMap, FEATURE_DIM, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::heatmap::{Heatmap, Pixel};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::sim::{Color, Observation, Role};

const HEADS: usize = 2 * Color::ALL.len();

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    /// Epochs of the offline training call.
    pub epochs: usize,
    /// Epochs of each retraining call during interactive learning.
    pub retrain_epochs: usize,
    /// Mini-batch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.5, l2: 1e-4, epochs: 50, retrain_epochs: 1, batch_size: None }
    }
}

/// Which pixels of an example's heatmap are suppressed by place conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pixels: Vec<usize>,
    /// `(row, masked pixel count)` pairs.
    per_row: Vec<(usize, u32)>,
}

impl Mask {
    pub fn new<T: Scalar>(features: &FeatureMap<T>, mut pixels: Vec<usize>) -> Self {
        pixels.sort_unstable();
        pixels.dedup();
        let mut per_row: BTreeMap<usize, u32> = BTreeMap::new();
        for &i in &pixels {
            *per_row.entry(features.row_of(i)).or_default() += 1;
        }
        Mask { pixels, per_row: per_row.into_iter().collect() }
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    fn contains(&self, pixel_index: usize) -> bool {
        self.pixels.binary_search(&pixel_index).is_ok()
    }
}

/// Place heatmaps are conditioned on the pick by suppressing the object
/// under the pick pixel.
pub fn place_mask<T: Scalar>(features: &FeatureMap<T>, pick: Pixel) -> Mask {
    Mask::new(features, features.footprint(pick))
}

/// One supervised target for one head.
#[derive(Debug, Clone)]
pub struct Example<T> {
    pub features: Arc<FeatureMap<T>>,
    pub role: Role,
    pub color: Color,
    pub target: Pixel,
    pub mask: Option<Arc<Mask>>,
}

impl<T: Scalar> Example<T> {
    pub fn pick(features: Arc<FeatureMap<T>>, color: Color, target: Pixel) -> Self {
        Example { features, role: Role::Pick, color, target, mask: None }
    }

    pub fn place(features: Arc<FeatureMap<T>>, color: Color, condition: Pixel, target: Pixel) -> Self {
        let mask = Arc::new(place_mask(&features, condition));
        Example { features, role: Role::Place, color, target, mask: Some(mask) }
    }
}

/// Per-(role, color) linear scoring of pixel features.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel<T> {
    weights: Vec<T>,
    bias: [T; 2],
    config: TrainConfig,
}

fn head(role: Role, color: Color) -> usize {
    role.index() * Color::ALL.len() + color.index()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for k in 0..FEATURE_DIM {
        s += a[k] * b[k];
    }
    s
}

impl<T: Scalar> ValueModel<T> {
    /// All weights zero: every heatmap is constant.
    pub fn new(config: TrainConfig) -> Self {
        ValueModel { weights: vec![T::zero(); HEADS * FEATURE_DIM], bias: [T::zero(); 2], config }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: TrainConfig) {
        self.config = config;
    }

    pub fn feature_dim(&self) -> usize {
        FEATURE_DIM
    }

    pub fn weights(&self, role: Role, color: Color) -> &[T] {
        let h = head(role, color);
        &self.weights[h * FEATURE_DIM..(h + 1) * FEATURE_DIM]
    }

    pub fn weights_mut(&mut self, role: Role, color: Color) -> &mut [T] {
        let h = head(role, color);
        &mut self.weights[h * FEATURE_DIM..(h + 1) * FEATURE_DIM]
    }

    pub fn bias(&self, role: Role) -> T {
        self.bias[role.index()]
    }

    fn row_scores(&self, features: &FeatureMap<T>, role: Role, color: Color) -> Vec<T> {
        let w = self.weights(role, color);
        let b = self.bias(role);
        (0..features.num_rows()).map(|r| dot(w, features.row(r)) + b).collect()
    }

    /// Q over every pixel. Place maps need the pick they are conditioned on.
    pub fn predict(
        &self,
        features: &FeatureMap<T>,
        role: Role,
        color: Color,
        condition: Option<Pixel>,
    ) -> Result<Heatmap<T>> {
        let mask = match (role, condition) {
            (Role::Pick, _) => None,
            (Role::Place, Some(pick)) => {
                if !features.contains(pick) {
                    return Err(Error::invalid(format!("conditioning pick {pick} out of bounds")));
                }
                Some(features.footprint(pick))
            }
            (Role::Place, None) => return Err(Error::invalid("place heatmap needs the pick it is conditioned on")),
        };
        let scores = self.row_scores(features, role, color);
        let n = features.width() * features.height();
        let mut values: Vec<T> = (0..n).map(|i| scores[features.row_of(i)]).collect();
        if let Some(mask) = mask {
            let floor = scores.iter().copied().fold(T::infinity(), T::min);
            for i in mask {
                values[i] = floor;
            }
        }
        Heatmap::new(features.width(), features.height(), values)
    }

    pub fn predict_heatmap(
        &self,
        obs: &Observation,
        role: Role,
        color: Color,
        condition: Option<Pixel>,
    ) -> Result<Heatmap<T>> {
        self.predict(&FeatureMap::compute(&obs.image), role, color, condition)
    }

    /// Cross-entropy between the softmax over the example's (masked)
    /// heatmap and a one-hot target; accumulates its gradient into `grad`.
    fn accumulate(&self, ex: &Example<T>, grad: &mut [T]) -> T {
        let fm = &*ex.features;
        let scores = self.row_scores(fm, ex.role, ex.color);
        let mut counts: Vec<T> = (0..fm.num_rows()).map(|r| T::of(fm.count(r) as f64)).collect();
        let (mut masked, mut argmin) = (T::zero(), 0);
        if let Some(mask) = &ex.mask {
            for &(r, c) in &mask.per_row {
                counts[r] -= T::of(c as f64);
                masked += T::of(c as f64);
            }
            for (r, &s) in scores.iter().enumerate() {
                if s < scores[argmin] {
                    argmin = r;
                }
            }
        }
        let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
        let mut z = masked * exps[argmin];
        for r in 0..exps.len() {
            z += counts[r] * exps[r];
        }
        let target_index = ex.target.v * fm.width() + ex.target.u;
        let target_row = match &ex.mask {
            Some(mask) if mask.contains(target_index) => argmin,
            _ => fm.row_of(target_index),
        };
        let loss = z.ln() + max - scores[target_row];

        let mut weight = counts;
        weight[argmin] += masked;
        for r in 0..exps.len() {
            let p = weight[r] * exps[r] / z;
            if p == T::zero() {
                continue;
            }
            let f = fm.row(r);
            for k in 0..FEATURE_DIM {
                grad[k] += p * f[k];
            }
        }
        let f = fm.row(target_row);
        for k in 0..FEATURE_DIM {
            grad[k] -= f[k];
        }
        loss
    }

    /// Loss and weight gradient of a single example, without regularization.
    pub fn example_loss_and_gradient(&self, ex: &Example<T>) -> (T, Vec<T>) {
        let mut grad = vec![T::zero(); FEATURE_DIM];
        let loss = self.accumulate(ex, &mut grad);
        (loss, grad)
    }

    /// Sum over heads of mean example loss plus the L2 penalty.
    pub fn objective(&self, examples: &[Example<T>]) -> T {
        let mut loss = [T::zero(); HEADS];
        let mut n = [0usize; HEADS];
        let mut scratch = vec![T::zero(); FEATURE_DIM];
        for ex in examples {
            let h = head(ex.role, ex.color);
            loss[h] += self.accumulate(ex, &mut scratch);
            n[h] += 1;
        }
        let l2 = T::of(self.config.l2);
        (0..HEADS)
            .filter(|&h| n[h] > 0)
            .map(|h| {
                let w = &self.weights[h * FEATURE_DIM..(h + 1) * FEATURE_DIM];
                loss[h] / T::of(n[h] as f64) + T::of(0.5) * l2 * dot(w, w)
            })
            .sum()
    }

    fn gradient_step(&mut self, batch: &[&Example<T>]) {
        let mut grad = [T::zero(); HEADS * FEATURE_DIM];
        let mut n = [0usize; HEADS];
        for ex in batch {
            let h = head(ex.role, ex.color);
            self.accumulate(ex, &mut grad[h * FEATURE_DIM..(h + 1) * FEATURE_DIM]);
            n[h] += 1;
        }
        let lr = T::of(self.config.learning_rate);
        let l2 = T::of(self.config.l2);
        for h in (0..HEADS).filter(|&h| n[h] > 0) {
            let scale = T::one() / T::of(n[h] as f64);
            for k in h * FEATURE_DIM..(h + 1) * FEATURE_DIM {
                let g = grad[k] * scale + l2 * self.weights[k];
                self.weights[k] -= lr * g;
            }
        }
    }

    /// Gradient descent on `examples` for `epochs` passes. Full-batch unless
    /// a batch size is configured, in which case `rng` shuffles each epoch.
    pub fn train(&mut self, examples: &[Example<T>], epochs: usize, rng: &mut Rng) -> Result<()> {
        if examples.is_empty() {
            return Err(Error::invalid("cannot train on an empty dataset"));
        }
        let mut order: Vec<&Example<T>> = examples.iter().collect();
        for _ in 0..epochs {
            match self.config.batch_size {
                None => self.gradient_step(&order),
                Some(size) => {
                    order.shuffle(rng);
                    for batch in order.chunks(size.max(1)) {
                        self.gradient_step(batch);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        let table = |role: Role| {
            Color::ALL
                .iter()
                .map(|&c| (c.token().to_string(), self.weights(role, c).iter().map(|w| w.as_f64()).collect()))
                .collect()
        };
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            vocabulary: Color::ALL.iter().map(|c| c.token().to_string()).collect(),
            feature_dim: FEATURE_DIM,
            features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            pick: table(Role::Pick),
            place: table(Role::Place),
            bias: [self.bias[0].as_f64(), self.bias[1].as_f64()],
            training: self.config,
        }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        if ckpt.feature_dim != FEATURE_DIM {
            return Err(Error::Schema(format!(
                "checkpoint has {} features, this build uses {FEATURE_DIM}",
                ckpt.feature_dim
            )));
        }
        let mut model = ValueModel::new(ckpt.training);
        for (role, table) in [(Role::Pick, &ckpt.pick), (Role::Place, &ckpt.place)] {
            for (token, w) in table {
                let color: Color = token.parse()?;
                if w.len() != FEATURE_DIM || w.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Schema(format!("bad weight vector for {role:?}/{token}")));
                }
                for (dst, &src) in model.weights_mut(role, color).iter_mut().zip(w) {
                    *dst = T::of(src);
                }
            }
        }
        model.bias = ckpt.bias.map(T::of);
        Ok(model)
    }
}

pub const CHECKPOINT_FORMAT: &str = "partnr-value-model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model: vocabulary, feature layout and all weight vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub vocabulary: Vec<String>,
    pub feature_dim: usize,
    pub features: Vec<String>,
    pub pick: BTreeMap<String, Vec<f64>>,
    pub place: BTreeMap<String, Vec<f64>>,
    pub bias: [f64; 2],
    pub training: TrainConfig,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::sim::{ColorMode, Command, Image, Scenario, SceneState, BACKGROUND};
    use rand::Rng as _;

    fn toy_image(seed: u64) -> Image {
        let mut rng = substream(seed, "toy", 0);
        let palette = [BACKGROUND, Color::Red.rgb(), Color::Blue.rgb(), Color::Orange.rgb()];
        let data = (0..64).map(|_| palette[rng.random_range(0..palette.len())]).collect();
        Image::from_raw(8, 8, data).unwrap()
    }

    fn random_model(seed: u64) -> ValueModel<f64> {
        let mut rng = substream(seed, "weights", 0);
        let mut m = ValueModel::new(TrainConfig::default());
        for w in m.weights.iter_mut() {
            *w = rng.random_range(-2.0..2.0);
        }
        m
    }

    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / norm(a).max(norm(b)).max(1e-12)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..10 {
            let fm = Arc::new(FeatureMap::<f64>::compute(&toy_image(seed)));
            let mut model = random_model(seed);
            let examples = [
                Example::pick(fm.clone(), Color::Red, Pixel::new(3, 4)),
                Example::place(fm.clone(), Color::Blue, Pixel::new(1, 1), Pixel::new(6, 2)),
            ];
            for ex in &examples {
                let (_, analytic) = model.example_loss_and_gradient(ex);
                let h = 1e-6;
                let numeric: Vec<f64> = (0..FEATURE_DIM)
                    .map(|k| {
                        let w0 = model.weights(ex.role, ex.color)[k];
                        model.weights_mut(ex.role, ex.color)[k] = w0 + h;
                        let up = model.example_loss_and_gradient(ex).0;
                        model.weights_mut(ex.role, ex.color)[k] = w0 - h;
                        let down = model.example_loss_and_gradient(ex).0;
                        model.weights_mut(ex.role, ex.color)[k] = w0;
                        (up - down) / (2.0 * h)
                    })
                    .collect();
                assert!(relative_error(&analytic, &numeric) < 1e-4, "seed {seed}");
            }
        }
    }

    #[test]
    fn zero_weights_give_constant_heatmap() {
        let (s, c) = SceneState::reset(64, 1, ColorMode::Seen, Scenario::Normal).unwrap();
        let obs = Observation::of(&s, c);
        let h = ValueModel::<f64>::new(TrainConfig::default()).predict_heatmap(&obs, Role::Pick, c.pick, None).unwrap();
        assert_eq!(h.min(), h.max());
    }

    #[test]
    fn place_conditioning_suppresses_picked_object() {
        for seed in 0..10 {
            let (s, c) = SceneState::reset(64, seed, ColorMode::Seen, Scenario::Normal).unwrap();
            let fm = FeatureMap::<f64>::compute(&crate::sim::render(&s));
            let model = random_model(seed);
            let b = s.find(crate::sim::ObjectKind::Box, c.pick).unwrap();
            let pick = s.object(b).center;
            let h = model.predict(&fm, Role::Place, c.place, Some(pick)).unwrap();
            let footprint = fm.footprint(pick);
            assert!(footprint.len() >= 36);
            let off_min = (0..h.values().len())
                .filter(|i| footprint.binary_search(i).is_err())
                .map(|i| h.values()[i])
                .fold(f64::INFINITY, f64::min);
            for &i in &footprint {
                assert_eq!(h.values()[i], h.min());
                assert!(h.values()[i] <= off_min);
            }
        }
        let fm = FeatureMap::<f64>::compute(&toy_image(0));
        let m = ValueModel::<f64>::new(TrainConfig::default());
        assert!(m.predict(&fm, Role::Place, Color::Red, None).is_err());
        assert!(m.predict(&fm, Role::Place, Color::Red, Some(Pixel::new(8, 0))).is_err());
    }

    #[test]
    fn single_example_is_overfit() {
        let (s, c) = SceneState::reset(64, 2, ColorMode::Seen, Scenario::Normal).unwrap();
        let fm = Arc::new(FeatureMap::<f64>::compute(&crate::sim::render(&s)));
        let target = s.object(s.find(crate::sim::ObjectKind::Box, c.pick).unwrap()).center;
        let ex = [Example::pick(fm.clone(), c.pick, target)];
        let mut m = ValueModel::new(TrainConfig::default());
        m.train(&ex, 200, &mut substream(0, "t", 0)).unwrap();
        let h = m.predict(&fm, Role::Pick, c.pick, None).unwrap();
        assert_eq!(h.get(target), h.max());
        let p = h.normalize();
        let best = p.iter().copied().fold(0.0, f64::max);
        assert_eq!(p[h.index(target)], best);
    }

    fn demo_examples(n: u64) -> Vec<Example<f64>> {
        let mut out = Vec::new();
        for seed in 0..n {
            let (s, c) = SceneState::reset(64, seed, ColorMode::Seen, Scenario::Normal).unwrap();
            let fm = Arc::new(FeatureMap::compute(&crate::sim::render(&s)));
            let pick = s.object(s.find(crate::sim::ObjectKind::Box, c.pick).unwrap()).center;
            let place = s.object(s.find(crate::sim::ObjectKind::Bowl, c.place).unwrap()).center;
            out.push(Example::pick(fm.clone(), c.pick, pick));
            out.push(Example::place(fm, c.place, pick, place));
        }
        out
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let ex = demo_examples(20);
        let mut m = ValueModel::<f64>::new(TrainConfig::default());
        let mut rng = substream(0, "t", 0);
        let mut prev = m.objective(&ex);
        for _ in 0..50 {
            m.train(&ex, 1, &mut rng).unwrap();
            let now = m.objective(&ex);
            assert!(now <= prev + 1e-12, "{now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ex = demo_examples(8);
        for batch_size in [None, Some(3)] {
            let cfg = TrainConfig { batch_size, ..TrainConfig::default() };
            let run = || {
                let mut m = ValueModel::<f64>::new(cfg);
                m.train(&ex, 10, &mut substream(4, "t", 0)).unwrap();
                m
            };
            let (a, b) = (run(), run());
            assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let mut m = ValueModel::<f64>::new(TrainConfig::default());
        m.train(&ex, 0, &mut substream(0, "t", 0)).unwrap();
        assert_eq!(m, ValueModel::new(TrainConfig::default()));
        assert!(m.train(&[], 1, &mut substream(0, "t", 0)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = random_model(5);
        let ckpt = m.to_checkpoint();
        let json = serde_json::to_string(&ckpt).unwrap();
        let back: ModelCheckpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(ValueModel::<f64>::from_checkpoint(&back).unwrap(), m);
        let mut bad = ckpt.clone();
        bad.version = 99;
        assert!(matches!(ValueModel::<f64>::from_checkpoint(&bad), Err(Error::Schema(_))));
        let mut bad = ckpt;
        bad.pick.insert("mauve".into(), vec![0.0; FEATURE_DIM]);
        assert!(ValueModel::<f64>::from_checkpoint(&bad).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let (s, c) = SceneState::reset(64, 3, ColorMode::Seen, Scenario::Normal).unwrap();
        let fm = Arc::new(FeatureMap::<f32>::compute(&crate::sim::render(&s)));
        let target = s.object(s.find(crate::sim::ObjectKind::Box, c.pick).unwrap()).center;
        let mut m = ValueModel::<f32>::new(TrainConfig::default());
        m.train(&[Example::pick(fm.clone(), c.pick, target)], 100, &mut substream(0, "t", 0)).unwrap();
        let h = m.predict(&fm, Role::Pick, c.pick, None).unwrap();
        assert_eq!(h.get(target), h.max());
        let _ = Command::new(c.pick, c.place);
    }
}
