//! Dense action-value maps over image pixels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{softmax, Scalar};

/// Pixel coordinate: `u` is the column, `v` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Pixel {
    pub u: usize,
    pub v: usize,
}

impl Pixel {
    pub const fn new(u: usize, v: usize) -> Self {
        Pixel { u, v }
    }
}

impl From<[usize; 2]> for Pixel {
    fn from([u, v]: [usize; 2]) -> Self {
        Pixel { u, v }
    }
}

impl From<Pixel> for [usize; 2] {
    fn from(p: Pixel) -> Self {
        [p.u, p.v]
    }
}

impl std::fmt::Display for Pixel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// H×W scalar field, stored row-major by `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> Heatmap<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("heatmap must be at least 1x1"));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "heatmap {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite heatmap value at ({}, {})", i % width, i / width)));
        }
        Ok(Heatmap { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(Pixel) -> T) -> Result<Self> {
        let values = (0..width * height).map(|i| f(Pixel::new(i % width, i / width))).collect();
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, p: Pixel) -> T {
        self.values[self.index(p)]
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.u < self.width && p.v < self.height
    }

    pub fn index(&self, p: Pixel) -> usize {
        debug_assert!(self.contains(p));
        p.v * self.width + p.u
    }

    pub fn pixel(&self, index: usize) -> Pixel {
        Pixel::new(index % self.width, index / self.width)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Softmax over all pixels (temperature 1).
    pub fn normalize(&self) -> Vec<T> {
        softmax(&self.values)
    }
}
