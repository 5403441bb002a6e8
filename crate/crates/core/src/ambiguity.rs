//! Ambiguity measure over detected maxima and the query gate.

use serde::ser::{Serialize, SerializeStruct, Serializer};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::heatmap::Pixel;
use crate::scalar::{softmax, Scalar};
use crate::topology::LocalMaximum;

/// Default floor on normalized value for presenting a maximum as a candidate.
pub const DEFAULT_CANDIDATE_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, Deserialize)]
pub enum Verdict {
    Ambiguous,
    Confident,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ambiguous => "Ambiguous",
            Verdict::Confident => "Confident",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<T> {
    pub pixel: Pixel,
    pub value: T,
    pub normalized: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateDecision<T> {
    pub p_hat: T,
    pub threshold: T,
    pub verdict: Verdict,
    pub candidates: Vec<Candidate<T>>,
}

impl<T: Scalar> Serialize for Candidate<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Candidate", 4)?;
        s.serialize_field("u", &self.pixel.u)?;
        s.serialize_field("v", &self.pixel.v)?;
        s.serialize_field("value", &self.value.as_f64())?;
        s.serialize_field("normalized", &self.normalized.as_f64())?;
        s.end()
    }
}

impl<T: Scalar> Serialize for GateDecision<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("GateDecision", 4)?;
        s.serialize_field("p_hat", &self.p_hat.as_f64())?;
        s.serialize_field("threshold", &self.threshold.as_f64())?;
        s.serialize_field("verdict", &self.verdict)?;
        s.serialize_field("candidates", &self.candidates)?;
        s.end()
    }
}

fn normalized_values<T: Scalar>(maxima: &[LocalMaximum<T>]) -> Result<Vec<T>> {
    if maxima.is_empty() {
        return Err(Error::invalid("ambiguity measure needs at least one maximum"));
    }
    let raw: Vec<T> = maxima.iter().map(|m| m.value).collect();
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("maxima values must be finite"));
    }
    Ok(softmax(&raw))
}

/// Largest softmax-normalized value among the maxima; in `[1/k, 1]`.
pub fn ambiguity_measure<T: Scalar>(maxima: &[LocalMaximum<T>]) -> Result<T> {
    Ok(normalized_values(maxima)?.into_iter().reduce(T::max).expect("non-empty"))
}

/// Ambiguous iff `p_hat <= threshold`.
pub fn gate<T: Scalar>(p_hat: T, threshold: T) -> Verdict {
    if p_hat <= threshold {
        Verdict::Ambiguous
    } else {
        Verdict::Confident
    }
}

/// Maxima whose normalized value exceeds `floor`, highest first. The top
/// maximum is always kept.
pub fn candidate_set<T: Scalar>(maxima: &[LocalMaximum<T>], floor: T) -> Result<Vec<Candidate<T>>> {
    let normalized = normalized_values(maxima)?;
    let mut candidates: Vec<Candidate<T>> = maxima
        .iter()
        .zip(&normalized)
        .map(|(m, &n)| Candidate { pixel: m.pixel, value: m.value, normalized: n })
        .collect();
    // Stable: equal values keep the maxima's own tie order.
    candidates.sort_by(|a, b| b.normalized.partial_cmp(&a.normalized).expect("finite"));
    let top = candidates[0];
    candidates.retain(|c| c.normalized > floor);
    if candidates.is_empty() {
        candidates.push(top);
    }
    Ok(candidates)
}

/// Measure, gate and candidate filtering in one pass.
pub fn decide<T: Scalar>(maxima: &[LocalMaximum<T>], threshold: T, candidate_floor: T) -> Result<GateDecision<T>> {
    let p_hat = ambiguity_measure(maxima)?;
    Ok(GateDecision {
        p_hat,
        threshold,
        verdict: gate(p_hat, threshold),
        candidates: candidate_set(maxima, candidate_floor)?,
    })
}
