use std::io::Cursor;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::Pixel;
use crate::sim::color::BACKGROUND;
use crate::sim::SceneState;

/// Top-view RGB image; channels are 8-bit and read back in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl Image {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Image { width, height, data: vec![rgb; width * height] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::invalid(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Image { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn raw(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn rgb(&self, p: Pixel) -> [u8; 3] {
        self.data[p.v * self.width + p.u]
    }

    /// Channels scaled to `[0, 1]`.
    pub fn channels(&self, p: Pixel) -> [f32; 3] {
        self.rgb(p).map(|c| c as f32 / 255.0)
    }

    pub fn set(&mut self, p: Pixel, rgb: [u8; 3]) {
        self.data[p.v * self.width + p.u] = rgb;
    }

    pub fn to_base64(&self) -> String {
        let bytes: Vec<u8> = self.data.iter().flatten().copied().collect();
        base64::engine::general_purpose::STANDARD.encode(bytes)
    }

    pub fn from_base64(width: usize, height: usize, encoded: &str) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(encoded)
            .map_err(|e| Error::invalid(format!("bad base64 image: {e}")))?;
        if bytes.len() != width * height * 3 {
            return Err(Error::invalid("decoded image has the wrong size"));
        }
        let data = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Image::from_raw(width, height, data)
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let bytes: Vec<u8> = self.data.iter().flatten().copied().collect();
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes).expect("buffer size matches");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(out.into_inner())
    }
}

/// Inline serialized form used by dataset files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InlineImage {
    pub width: usize,
    pub height: usize,
    pub rgb_base64: String,
}

impl From<&Image> for InlineImage {
    fn from(img: &Image) -> Self {
        InlineImage { width: img.width, height: img.height, rgb_base64: img.to_base64() }
    }
}

impl TryFrom<&InlineImage> for Image {
    type Error = Error;

    fn try_from(i: &InlineImage) -> Result<Self> {
        Image::from_base64(i.width, i.height, &i.rgb_base64)
    }
}

/// Mid-gray table, bowl rings, then boxes in scene order.
pub fn render(scene: &SceneState) -> Image {
    let mut img = Image::filled(scene.width, scene.height, BACKGROUND);
    for obj in &scene.objects {
        let rgb = obj.color.rgb();
        for p in obj.bounds().pixels() {
            if obj.paints(p) {
                img.set(p, rgb);
            }
        }
    }
    img
}
