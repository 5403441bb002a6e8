//! Hand-crafted per-pixel features computed from the image alone.
//!
//! Layout of a feature vector:
//!
//! | index | meaning                                                    |
//! |-------|------------------------------------------------------------|
//! | 0..3  | mean RGB over the 5×5 patch (edge-clamped)                 |
//! | 3     | box-likeness: patch fraction on filled regions             |
//! | 4     | bowl-likeness: patch fraction inside ring regions          |
//! | 5..8  | region RGB: color of the region the pixel belongs to       |
//! | 8     | constant 1                                                 |
//!
//! Regions come from 4-connected components of identical non-background
//! color. A component covering at least [`FILL_RATIO`] of its bounding box
//! is *filled* (a box); otherwise it is a *ring* whose region is its whole
//! bounding box, hole included (a bowl). The region color lets a pixel in
//! an empty bowl's hole know which bowl it is in, which the 5×5 patch
//! alone cannot see.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::heatmap::Pixel;
use crate::scalar::Scalar;
use crate::sim::{Image, Observation, BACKGROUND};

pub const FEATURE_DIM: usize = 9;
pub const PATCH_RADIUS: usize = 2;
pub const FILL_RATIO: f64 = 0.85;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] =
    ["patch_r", "patch_g", "patch_b", "box_likeness", "bowl_likeness", "region_r", "region_g", "region_b", "bias"];

/// Per-pixel region labels of an image.
#[derive(Debug, Clone)]
pub struct ImageAnalysis {
    width: usize,
    height: usize,
    filled: Vec<bool>,
    ring_region: Vec<bool>,
    region_rgb: Vec<[u8; 3]>,
    /// 8-connected non-background component id; 0 for background.
    object: Vec<u32>,
}

fn components(img: &Image, connected: impl Fn(&[u8; 3], &[u8; 3]) -> bool, diagonal: bool) -> (Vec<u32>, u32) {
    let (w, h) = (img.width(), img.height());
    let raw = img.raw();
    let mut label = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if label[start] != 0 || raw[start] == BACKGROUND {
            continue;
        }
        next += 1;
        label[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            for dv in -1isize..=1 {
                for du in -1isize..=1 {
                    if (du == 0 && dv == 0) || (!diagonal && du != 0 && dv != 0) {
                        continue;
                    }
                    let (nu, nv) = (u + du, v + dv);
                    if nu < 0 || nv < 0 || nu >= w as isize || nv >= h as isize {
                        continue;
                    }
                    let j = nv as usize * w + nu as usize;
                    if label[j] == 0 && raw[j] != BACKGROUND && connected(&raw[i], &raw[j]) {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
    }
    (label, next)
}

impl ImageAnalysis {
    pub fn new(img: &Image) -> Self {
        let (w, h) = (img.width(), img.height());
        let raw = img.raw();
        let (label, n) = components(img, |a, b| a == b, false);

        // Per component: pixel count, bounding box, color.
        let mut count = vec![0usize; n as usize + 1];
        let mut bbox = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n as usize + 1];
        let mut color = vec![BACKGROUND; n as usize + 1];
        for (i, &l) in label.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let (u, v) = (i % w, i / w);
            let b = &mut bbox[l as usize];
            *b = (b.0.min(u), b.1.min(v), b.2.max(u), b.3.max(v));
            count[l as usize] += 1;
            color[l as usize] = raw[i];
        }
        let is_filled: Vec<bool> = (0..=n as usize)
            .map(|l| {
                let (u0, v0, u1, v1) = bbox[l];
                l != 0 && count[l] as f64 >= FILL_RATIO * ((u1 - u0 + 1) * (v1 - v0 + 1)) as f64
            })
            .collect();

        let filled: Vec<bool> = label.iter().map(|&l| is_filled[l as usize]).collect();
        let mut ring_region = vec![false; w * h];
        let mut ring_color: Vec<Option<[u8; 3]>> = vec![None; w * h];
        for l in 1..=n as usize {
            if is_filled[l] {
                continue;
            }
            let (u0, v0, u1, v1) = bbox[l];
            for v in v0..=v1 {
                for u in u0..=u1 {
                    let i = v * w + u;
                    ring_region[i] = true;
                    ring_color[i].get_or_insert(color[l]);
                }
            }
        }
        let region_rgb = (0..w * h).map(|i| if filled[i] { raw[i] } else { ring_color[i].unwrap_or(raw[i]) }).collect();
        let (object, _) = components(img, |_, _| true, true);
        ImageAnalysis { width: w, height: h, filled, ring_region, region_rgb, object }
    }

    fn features_at<T: Scalar>(&self, img: &Image, p: Pixel, out: &mut [T]) {
        let r = PATCH_RADIUS as isize;
        let (mut rgb, mut boxes, mut rings) = ([0u32; 3], 0u32, 0u32);
        for dv in -r..=r {
            for du in -r..=r {
                let u = (p.u as isize + du).clamp(0, self.width as isize - 1) as usize;
                let v = (p.v as isize + dv).clamp(0, self.height as isize - 1) as usize;
                let i = v * self.width + u;
                let c = img.raw()[i];
                for k in 0..3 {
                    rgb[k] += c[k] as u32;
                }
                boxes += self.filled[i] as u32;
                rings += self.ring_region[i] as u32;
            }
        }
        let n = ((2 * r + 1) * (2 * r + 1)) as f64;
        let region = self.region_rgb[p.v * self.width + p.u];
        for k in 0..3 {
            out[k] = T::of(rgb[k] as f64 / (255.0 * n));
            out[5 + k] = T::of(region[k] as f64 / 255.0);
        }
        out[3] = T::of(boxes as f64 / n);
        out[4] = T::of(rings as f64 / n);
        out[8] = T::one();
    }
}

/// Feature vector of one pixel.
pub fn pixel_features<T: Scalar>(obs: &Observation, p: Pixel) -> Result<Vec<T>> {
    let img = &obs.image;
    if p.u >= img.width() || p.v >= img.height() {
        return Err(Error::invalid(format!("pixel {p} outside {}x{} image", img.width(), img.height())));
    }
    let mut out = vec![T::zero(); FEATURE_DIM];
    ImageAnalysis::new(img).features_at(img, p, &mut out);
    Ok(out)
}

/// Features of every pixel, stored as distinct rows plus multiplicities.
///
/// Most of a table-top image is plain background, so the number of
/// distinct feature vectors is a small fraction of the pixel count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    width: usize,
    height: usize,
    rows: Vec<T>,
    counts: Vec<u32>,
    pixel_row: Vec<u32>,
    object: Vec<u32>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn compute(img: &Image) -> Self {
        let analysis = ImageAnalysis::new(img);
        let (w, h) = (img.width(), img.height());
        let mut rows: Vec<T> = Vec::new();
        let mut counts: Vec<u32> = Vec::new();
        let mut pixel_row = Vec::with_capacity(w * h);
        let mut seen: HashMap<[u64; FEATURE_DIM], u32> = HashMap::new();
        let mut buf = [T::zero(); FEATURE_DIM];
        for i in 0..w * h {
            analysis.features_at(img, Pixel::new(i % w, i / w), &mut buf);
            let key = buf.map(|x| x.as_f64().to_bits());
            let row = *seen.entry(key).or_insert_with(|| {
                rows.extend_from_slice(&buf);
                counts.push(0);
                counts.len() as u32 - 1
            });
            counts[row as usize] += 1;
            pixel_row.push(row);
        }
        FeatureMap { width: w, height: h, rows, counts, pixel_row, object: analysis.object }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_rows(&self) -> usize {
        self.counts.len()
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.rows[r * FEATURE_DIM..(r + 1) * FEATURE_DIM]
    }

    pub fn count(&self, r: usize) -> u32 {
        self.counts[r]
    }

    pub fn row_of(&self, pixel_index: usize) -> usize {
        self.pixel_row[pixel_index] as usize
    }

    pub fn at(&self, p: Pixel) -> &[T] {
        self.row(self.row_of(p.v * self.width + p.u))
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.u < self.width && p.v < self.height
    }

    /// Pixel indices of the non-background object under `p`; empty on
    /// background.
    pub fn footprint(&self, p: Pixel) -> Vec<usize> {
        let label = self.object[p.v * self.width + p.u];
        if label == 0 {
            return Vec::new();
        }
        (0..self.object.len()).filter(|&i| self.object[i] == label).collect()
    }
}
