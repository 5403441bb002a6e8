//! Significant local maxima of a heatmap via 0-dimensional persistence.
//!
//! Pixels are swept from the highest value down (superlevel-set filtration)
//! and tracked with a union-find over the 8-connected grid. A pixel with no
//! already-swept neighbour births a component; when a pixel joins several
//! components, all but the one with the oldest peak die at that level
//! (elder rule). A peak's persistence is its birth value minus that death
//! level; the component holding the global maximum never dies.
//!
//! Ties are broken by the total order `(value desc, v asc, u asc)`, so a
//! flat plateau has a single canonical representative: its first pixel in
//! row-major order.

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::heatmap::{Heatmap, Pixel};
use crate::scalar::Scalar;

/// Default persistence cutoff relative to the heatmap's value range.
pub const DEFAULT_RELATIVE_PERSISTENCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMaximum<T> {
    pub pixel: Pixel,
    /// Raw heatmap value at `pixel`.
    pub value: T,
    /// Birth minus death level; `+inf` for the global maximum.
    pub persistence: T,
}

impl<T: Scalar> Serialize for LocalMaximum<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("LocalMaximum", 4)?;
        s.serialize_field("u", &self.pixel.u)?;
        s.serialize_field("v", &self.pixel.v)?;
        s.serialize_field("value", &self.value.as_f64())?;
        if self.persistence.is_infinite() {
            s.serialize_field("persistence", "inf")?;
        } else {
            s.serialize_field("persistence", &self.persistence.as_f64())?;
        }
        s.end()
    }
}

/// How the persistence cutoff is chosen for a given heatmap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersistenceFloor {
    /// Fraction of `max - min` of the heatmap being analysed.
    Relative(f64),
    Absolute(f64),
}

impl Default for PersistenceFloor {
    fn default() -> Self {
        PersistenceFloor::Relative(DEFAULT_RELATIVE_PERSISTENCE)
    }
}

impl PersistenceFloor {
    pub fn resolve<T: Scalar>(self, h: &Heatmap<T>) -> T {
        match self {
            PersistenceFloor::Relative(f) => T::of(f) * (h.max() - h.min()),
            PersistenceFloor::Absolute(x) => T::of(x),
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// All peaks with persistence `>= persistence_min`, ordered by value
/// descending with ties by `(v, u)` ascending. The global maximum is always
/// first.
///
/// A component that dies at exactly its own birth level is part of a
/// plateau reached through a later pixel and is not reported as a peak.
pub fn persistent_maxima<T: Scalar>(h: &Heatmap<T>, persistence_min: T) -> Result<Vec<LocalMaximum<T>>> {
    if !(persistence_min >= T::zero()) {
        return Err(Error::invalid("persistence_min must be >= 0"));
    }
    let (w, hgt) = (h.width(), h.height());
    let values = h.values();
    let n = values.len();

    let mut order: Vec<usize> = (0..n).collect();
    // Stable on index, so equal values keep row-major order.
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite values"));

    // rank[i] = position of pixel i in the sweep; usize::MAX = not yet swept.
    let mut rank = vec![usize::MAX; n];
    let mut uf = UnionFind::new(n);
    // Peak pixel of each root.
    let peak: Vec<usize> = (0..n).collect();
    let mut death: Vec<Option<T>> = vec![None; n];
    let mut births: Vec<usize> = Vec::new();
    let mut roots: Vec<usize> = Vec::with_capacity(8);

    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
        let (u, v) = ((i % w) as isize, (i / w) as isize);
        roots.clear();
        for (du, dv) in NEIGHBOURS {
            let (nu, nv) = (u + du, v + dv);
            if nu < 0 || nv < 0 || nu >= w as isize || nv >= hgt as isize {
                continue;
            }
            let j = nv as usize * w + nu as usize;
            if rank[j] == usize::MAX {
                continue;
            }
            let root = uf.find(j);
            if !roots.contains(&root) {
                roots.push(root);
            }
        }
        if roots.is_empty() {
            births.push(i);
            continue;
        }
        // Oldest peak = smallest sweep rank.
        let survivor = *roots.iter().min_by_key(|&&root| rank[peak[root]]).expect("non-empty");
        for &root in &roots {
            if root != survivor {
                death[peak[root]] = Some(values[peak[root]] - values[i]);
                uf.parent[root] = survivor;
            }
        }
        uf.parent[i] = survivor;
    }

    let mut maxima: Vec<LocalMaximum<T>> = births
        .into_iter()
        .filter_map(|i| {
            let persistence = death[i].unwrap_or_else(T::infinity);
            let keep = persistence.is_infinite() || (persistence > T::zero() && persistence >= persistence_min);
            keep.then(|| LocalMaximum { pixel: h.pixel(i), value: values[i], persistence })
        })
        .collect();
    // Births are already in sweep order, which is the required output order.
    debug_assert!(maxima.windows(2).all(|m| m[0].value >= m[1].value));
    maxima.shrink_to_fit();
    Ok(maxima)
}

/// Maxima above the floor resolved against `h`.
pub fn persistent_maxima_with_floor<T: Scalar>(
    h: &Heatmap<T>,
    floor: PersistenceFloor,
) -> Result<Vec<LocalMaximum<T>>> {
    persistent_maxima(h, floor.resolve(h))
}

/// First pixel holding the maximal value, scanning row-major.
pub fn argmax_pixel<T: Scalar>(h: &Heatmap<T>) -> Pixel {
    let mut best = 0;
    for (i, &x) in h.values().iter().enumerate() {
        if x > h.values()[best] {
            best = i;
        }
    }
    h.pixel(best)
}
