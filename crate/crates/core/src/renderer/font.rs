use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use ab_glyph::{Font, FontArc, PxScale};

use super::RenderError;

static BUNDLED_FONT: &[u8] = include_bytes!("../../assets/DejaVuSans.ttf");

/// Family name of the font shipped with the crate.
pub const BUNDLED_FAMILY: &str = "DejaVu Sans";

/// A loaded font plus the handful of metrics layout and rasterization need.
#[derive(Clone)]
pub struct Typeface {
    font: FontArc,
    family: String,
}

impl fmt::Debug for Typeface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Typeface").field("family", &self.family).finish()
    }
}

/// Vertical placement of text within one line box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineMetrics {
    pub line_height: u32,
    /// Offset from the top of a line box to its baseline, in whole pixels.
    pub baseline: i64,
}

impl Typeface {
    pub fn bundled() -> Self {
        static CELL: OnceLock<Typeface> = OnceLock::new();
        CELL.get_or_init(|| Typeface {
            font: FontArc::try_from_slice(BUNDLED_FONT).expect("bundled font parses"),
            family: BUNDLED_FAMILY.to_string(),
        })
        .clone()
    }

    pub fn from_bytes(bytes: Vec<u8>, family: impl Into<String>) -> Result<Self, RenderError> {
        let font = FontArc::try_from_vec(bytes)
            .map_err(|e| RenderError::Font(e.to_string()))?;
        Ok(Typeface {
            font,
            family: family.into(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, RenderError> {
        let bytes = std::fs::read(path)
            .map_err(|e| RenderError::Font(format!("{}: {e}", path.display())))?;
        let family = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_bytes(bytes, family)
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub(crate) fn font(&self) -> &FontArc {
        &self.font
    }

    /// Scale at which one em equals `font_size` pixels.
    pub fn scale(&self, font_size: f32) -> PxScale {
        let upem = self.font.units_per_em().unwrap_or(1000.0);
        PxScale::from(font_size * self.font.height_unscaled() / upem)
    }

    pub fn has_glyph(&self, ch: char) -> bool {
        self.font.glyph_id(ch).0 != 0
    }

    pub fn advance_for(&self, scale: PxScale, ch: char) -> f32 {
        let factor = scale.x / self.font.height_unscaled();
        self.font.h_advance_unscaled(self.font.glyph_id(ch)) * factor
    }

    /// Sum of advances, accumulated left to right.
    pub fn measure(&self, scale: PxScale, text: &str) -> f32 {
        text.chars().fold(0.0, |acc, ch| acc + self.advance_for(scale, ch))
    }

    pub fn line_metrics(&self, font_size: f32, line_spacing: f32) -> LineMetrics {
        let scale = self.scale(font_size);
        let factor = scale.y / self.font.height_unscaled();
        let ascent = self.font.ascent_unscaled() * factor;
        let descent = self.font.descent_unscaled() * factor;
        let line_height = (font_size * line_spacing).ceil().max(1.0) as u32;
        let half_leading = (line_height as f32 - (ascent - descent)) / 2.0;
        LineMetrics {
            line_height,
            baseline: (half_leading + ascent).round() as i64,
        }
    }
}
