use std::collections::HashMap;

use ab_glyph::{point, Font, GlyphId, PxScale};

use super::font::Typeface;
use super::Rgba;

/// An RGBA8 pixel buffer, row-major, top-left origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 4]>,
}

impl Canvas {
    pub fn filled(width: u32, height: u32, color: Rgba) -> Self {
        Canvas {
            width,
            height,
            pixels: vec![color.0; (width as usize) * (height as usize)],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 4] {
        self.pixels[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, px: [u8; 4]) {
        let w = self.width as usize;
        self.pixels[(y as usize) * w + x as usize] = px;
    }

    /// Size of the raw RGBA8 buffer in bytes.
    pub fn raw_len(&self) -> usize {
        self.pixels.len() * 4
    }

    pub fn is_opaque(&self) -> bool {
        self.pixels.iter().all(|p| p[3] == 255)
    }

    /// Mean absolute per-channel difference, in 0..=255 units.
    pub fn mean_abs_diff(&self, other: &Canvas) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        if self.pixels.is_empty() {
            return 0.0;
        }
        let total: u64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| u64::from(x.abs_diff(*y)))
                    .sum::<u64>()
            })
            .sum();
        total as f64 / (self.pixels.len() as f64 * 4.0)
    }
}

/// Ink coverage in [0, 1] per pixel; resolved to colors in one pass so every
/// output pixel lies on the background→text color ramp.
#[derive(Clone, Debug)]
pub(crate) struct Coverage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl Coverage {
    pub fn new(width: u32, height: u32) -> Self {
        Coverage {
            width,
            height,
            data: vec![0.0; (width as usize) * (height as usize)],
        }
    }

    fn add(&mut self, x: i64, y: i64, c: f32) {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            return;
        }
        let idx = (y as usize) * (self.width as usize) + x as usize;
        let v = &mut self.data[idx];
        *v = (*v + c).min(1.0);
    }

    /// Fills `[x0, x1) × [y0, y1)` with full coverage, clipped to bounds.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64) {
        for y in y0.max(0)..y1.min(i64::from(self.height)) {
            for x in x0.max(0)..x1.min(i64::from(self.width)) {
                self.add(x, y, 1.0);
            }
        }
    }

    pub fn resolve(&self, text: Rgba, background: Rgba) -> Canvas {
        Canvas {
            width: self.width,
            height: self.height,
            pixels: self.data.iter().map(|&c| background.lerp(text, c)).collect(),
        }
    }
}

struct GlyphBitmap {
    left: i64,
    top: i64,
    width: u32,
    data: Vec<f32>,
}

/// Per-call rasterization cache keyed by glyph and quarter-pixel phase.
pub(crate) struct GlyphPainter<'a> {
    typeface: &'a Typeface,
    scale: PxScale,
    cache: HashMap<(GlyphId, u8), Option<GlyphBitmap>>,
}

impl<'a> GlyphPainter<'a> {
    pub fn new(typeface: &'a Typeface, scale: PxScale) -> Self {
        GlyphPainter {
            typeface,
            scale,
            cache: HashMap::new(),
        }
    }

    /// Draws `text` with its pen starting at `x = 0` and the baseline at `baseline_y`.
    /// Whitespace advances the pen without drawing.
    pub fn draw_line(&mut self, cov: &mut Coverage, text: &str, baseline_y: i64) {
        let font = self.typeface.font();
        let mut pen = 0.0f32;
        for ch in text.chars() {
            let id = font.glyph_id(ch);
            let advance = self.typeface.advance_for(self.scale, ch);
            if !ch.is_whitespace() {
                let snapped = (pen * 4.0).round() / 4.0;
                let whole = snapped.floor();
                let phase = ((snapped - whole) * 4.0).round() as u8;
                let scale = self.scale;
                let bitmap = self
                    .cache
                    .entry((id, phase))
                    .or_insert_with(|| rasterize_glyph(font, id, scale, f32::from(phase) / 4.0));
                if let Some(bm) = bitmap {
                    let ox = whole as i64 + bm.left;
                    let oy = baseline_y + bm.top;
                    for (i, &c) in bm.data.iter().enumerate() {
                        if c > 0.0 {
                            let gx = (i as u32 % bm.width) as i64;
                            let gy = (i as u32 / bm.width) as i64;
                            cov.add(ox + gx, oy + gy, c);
                        }
                    }
                }
            }
            pen += advance;
        }
    }
}

fn rasterize_glyph(
    font: &ab_glyph::FontArc,
    id: GlyphId,
    scale: PxScale,
    phase: f32,
) -> Option<GlyphBitmap> {
    let glyph = id.with_scale_and_position(scale, point(phase, 0.0));
    let outlined = font.outline_glyph(glyph)?;
    let bounds = outlined.px_bounds();
    let width = bounds.width() as u32;
    let height = bounds.height() as u32;
    if width == 0 || height == 0 {
        return None;
    }
    let mut data = vec![0.0f32; (width * height) as usize];
    outlined.draw(|x, y, c| {
        if x < width && y < height {
            data[(y * width + x) as usize] = c.clamp(0.0, 1.0);
        }
    });
    Some(GlyphBitmap {
        left: bounds.min.x as i64,
        top: bounds.min.y as i64,
        width,
        data,
    })
}
