//! Aggregated demonstrations and their newline-delimited JSON form.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::Pixel;
use crate::policy::{Example, FeatureMap};
use crate::scalar::Scalar;
use crate::sim::{Command, Image, InlineImage, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Offline,
    Interactive,
}

/// One observation with the pixels a teacher showed for it.
///
/// Expert demonstrations carry both pick and place; an interactive query or
/// correction carries only the role it answered. A place label remembers
/// the pick it was conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub observation: Observation,
    pub pick: Option<Pixel>,
    pub place: Option<Pixel>,
    pub condition: Option<Pixel>,
    pub phase: Phase,
}

impl Demonstration {
    pub fn full(observation: Observation, pick: Pixel, place: Pixel, phase: Phase) -> Self {
        Demonstration { observation, pick: Some(pick), place: Some(place), condition: Some(pick), phase }
    }

    fn validate(&self) -> Result<()> {
        let img = &self.observation.image;
        let inside = |p: &Pixel| p.u < img.width() && p.v < img.height();
        if self.pick.is_none() && self.place.is_none() {
            return Err(Error::invalid("demonstration has neither pick nor place"));
        }
        if self.place.is_some() && self.condition.is_none() {
            return Err(Error::invalid("place label without the pick it is conditioned on"));
        }
        if ![self.pick, self.place, self.condition].iter().flatten().all(inside) {
            return Err(Error::invalid("demonstration pixel out of bounds"));
        }
        Ok(())
    }
}

/// Append-only list of demonstrations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    entries: Vec<Demonstration>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, demo: Demonstration) -> Result<()> {
        demo.validate()?;
        self.entries.push(demo);
        Ok(())
    }

    pub fn entries(&self) -> &[Demonstration] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for d in &self.entries {
            let record = DemoRecord {
                image: InlineImage::from(&*d.observation.image),
                command: d.observation.command,
                pick: d.pick,
                place: d.place,
                condition: d.condition,
                phase: d.phase,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut dataset = Dataset::new();
        let mut images: HashMap<String, Arc<Image>> = HashMap::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DemoRecord =
                serde_json::from_str(&line).map_err(|e| Error::Schema(format!("line {}: {e}", n + 1)))?;
            let image = match images.get(&record.image.rgb_base64) {
                Some(img) => img.clone(),
                None => {
                    let img = Arc::new(Image::try_from(&record.image)?);
                    images.insert(record.image.rgb_base64.clone(), img.clone());
                    img
                }
            };
            dataset.push(Demonstration {
                observation: Observation { image, command: record.command },
                pick: record.pick,
                place: record.place,
                condition: record.condition,
                phase: record.phase,
            })?;
        }
        Ok(dataset)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DemoRecord {
    image: InlineImage,
    command: Command,
    pick: Option<Pixel>,
    place: Option<Pixel>,
    condition: Option<Pixel>,
    phase: Phase,
}

/// Training examples derived from a dataset, with features computed once
/// per distinct image.
#[derive(Debug, Clone)]
pub struct TrainingSet<T> {
    examples: Vec<Example<T>>,
    cache: HashMap<Arc<Image>, Arc<FeatureMap<T>>>,
}

impl<T: Scalar> Default for TrainingSet<T> {
    fn default() -> Self {
        TrainingSet { examples: Vec::new(), cache: HashMap::new() }
    }
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut set = Self::new();
        for d in dataset.entries() {
            set.push(d);
        }
        set
    }

    pub fn features(&mut self, image: &Arc<Image>) -> Arc<FeatureMap<T>> {
        self.cache.entry(image.clone()).or_insert_with(|| Arc::new(FeatureMap::compute(image))).clone()
    }

    /// Pre-computed features for an image, so the cache is shared with the
    /// caller's own prediction.
    pub fn insert_features(&mut self, image: Arc<Image>, features: Arc<FeatureMap<T>>) {
        self.cache.entry(image).or_insert(features);
    }

    /// Adds the examples of one demonstration; returns how many.
    pub fn push(&mut self, d: &Demonstration) -> usize {
        let features = self.features(&d.observation.image);
        let cmd = d.observation.command;
        let before = self.examples.len();
        if let Some(pick) = d.pick {
            self.examples.push(Example::pick(features.clone(), cmd.pick, pick));
        }
        if let (Some(place), Some(condition)) = (d.place, d.condition) {
            self.examples.push(Example::place(features, cmd.place, condition, place));
        }
        self.examples.len() - before
    }

    pub fn examples(&self) -> &[Example<T>] {
        &self.examples
    }

    pub(crate) fn truncate(&mut self, len: usize) {
        self.examples.truncate(len);
    }
}
