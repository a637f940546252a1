//! Text-to-image rendering under fixed resolution and file-size budgets.
//!
//! Text is wrapped greedily to the target width, split into segments no
//! taller than `max_height`, and encoded as PNG (static) or looping GIF
//! (animated). Segments that encode over `max_file_bytes` are palette
//! reduced first and split by lines second.

mod blur;
mod encode;
mod font;
mod layout;
mod raster;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use encode::{
    decode_gif, decode_png, encode_gif, encode_png, encode_png_indexed, DecodedAnimation,
    FRAME_DELAY_CS,
};
pub use font::{LineMetrics, Typeface, BUNDLED_FAMILY};
pub use layout::{assign_segments, lines_per_segment, wrap_lines, LineEnd, PlannedLine, RenderPlan};
pub use raster::Canvas;

use raster::{Coverage, GlyphPainter};

pub const DEFAULT_MAX_WIDTH: u32 = 299;
pub const DEFAULT_MAX_HEIGHT: u32 = 524;
pub const DEFAULT_MAX_FILE_BYTES: usize = 200 * 1024;
pub const DEFAULT_BLUR_MAX_RADIUS: f32 = 8.0;
pub const BLUR_FRAME_COUNT: usize = 10;
pub const HISTORY_FRAME_COUNT: usize = 20;
/// Share of `target_width` taken by the longest bar in a chart.
pub const BAR_FILL: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("invalid render spec: {0}")]
    InvalidSpec(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("font: {0}")]
    Font(String),
    #[error("encoding failed: {0}")]
    Encode(String),
    #[error("a single line encodes to {actual} bytes, over the {limit}-byte budget")]
    BudgetExceeded { limit: usize, actual: usize },
}

/// Straight-alpha RGBA color; serialized as `#rrggbb` or `#rrggbbaa`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rgba(pub [u8; 4]);

impl Rgba {
    pub const BLACK: Rgba = Rgba([0, 0, 0, 255]);
    pub const WHITE: Rgba = Rgba([255, 255, 255, 255]);
    pub const TRANSPARENT: Rgba = Rgba([0, 0, 0, 0]);

    /// Per-channel linear interpolation toward `to`, `t` in [0, 1].
    pub fn lerp(self, to: Rgba, t: f32) -> [u8; 4] {
        let mut out = [0u8; 4];
        for c in 0..4 {
            let a = f32::from(self.0[c]);
            let b = f32::from(to.0[c]);
            out[c] = (a + (b - a) * t).round().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

impl fmt::Display for Rgba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b, a] = self.0;
        if a == 255 {
            write!(f, "#{r:02x}{g:02x}{b:02x}")
        } else {
            write!(f, "#{r:02x}{g:02x}{b:02x}{a:02x}")
        }
    }
}

impl FromStr for Rgba {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if !(hex.len() == 6 || hex.len() == 8) || !hex.is_ascii() {
            return Err(format!("expected #rrggbb or #rrggbbaa, got {s:?}"));
        }
        let byte = |i: usize| {
            u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("bad hex color {s:?}"))
        };
        let alpha = if hex.len() == 8 { byte(6)? } else { 255 };
        Ok(Rgba([byte(0)?, byte(2)?, byte(4)?, alpha]))
    }
}

impl TryFrom<String> for Rgba {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Rgba> for String {
    fn from(c: Rgba) -> String {
        c.to_string()
    }
}

/// Typography and budget parameters for one piece of content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSpec {
    pub font_family: String,
    pub font_size: f32,
    pub text_color: Rgba,
    pub background_color: Rgba,
    pub target_width: u32,
    pub max_width: u32,
    pub max_height: u32,
    pub max_file_bytes: usize,
    pub line_spacing: f32,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            font_family: BUNDLED_FAMILY.to_string(),
            font_size: 14.0,
            text_color: Rgba::BLACK,
            background_color: Rgba::WHITE,
            target_width: DEFAULT_MAX_WIDTH,
            max_width: DEFAULT_MAX_WIDTH,
            max_height: DEFAULT_MAX_HEIGHT,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            line_spacing: 1.2,
        }
    }
}

impl RenderSpec {
    pub fn line_height(&self) -> u32 {
        (self.font_size * self.line_spacing).ceil().max(1.0) as u32
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let fail = |m: &str| Err(RenderError::InvalidSpec(m.to_string()));
        if !(self.font_size.is_finite() && self.font_size > 0.0) {
            return fail("font_size must be positive");
        }
        if !(self.line_spacing.is_finite() && self.line_spacing >= 1.0) {
            return fail("line_spacing must be at least 1.0");
        }
        if self.target_width == 0 || self.max_width == 0 || self.max_height == 0 {
            return fail("dimensions must be positive");
        }
        if self.target_width > self.max_width {
            return fail("target_width exceeds max_width");
        }
        if self.max_width > u32::from(u16::MAX) || self.max_height > u32::from(u16::MAX) {
            return fail("dimensions exceed 65535");
        }
        if self.max_file_bytes == 0 {
            return fail("max_file_bytes must be positive");
        }
        if self.line_height() > self.max_height {
            return fail("one line is taller than max_height");
        }
        Ok(())
    }
}

/// Static PNG or animated GIF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageFormat {
    StaticRaster,
    Animated,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::StaticRaster => "png",
            ImageFormat::Animated => "gif",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ImageFormat::StaticRaster => "image/png",
            ImageFormat::Animated => "image/gif",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext {
            "png" => Some(ImageFormat::StaticRaster),
            "gif" => Some(ImageFormat::Animated),
            _ => None,
        }
    }
}

/// One encoded image segment, not yet bound to a content or revision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedImage {
    pub segment_index: usize,
    pub format: ImageFormat,
    pub width: u32,
    pub height: u32,
    pub payload: Vec<u8>,
}

impl RenderedImage {
    pub fn byte_length(&self) -> usize {
        self.payload.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticRender {
    pub images: Vec<RenderedImage>,
    /// Characters drawn with the font's replacement glyph.
    pub missing_glyphs: Vec<char>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NotificationKind {
    Expired,
    Deleted,
}

impl NotificationKind {
    pub fn message(self) -> &'static str {
        match self {
            NotificationKind::Expired => "This content has expired.",
            NotificationKind::Deleted => "This content was removed by the sender.",
        }
    }
}

struct Encoded {
    width: u32,
    height: u32,
    payload: Vec<u8>,
}

type Lines = Vec<String>;

/// Row ranges that cut `rows` into at most `parts` nearly equal pieces.
fn even_cuts(rows: usize, parts: usize) -> Vec<(usize, usize)> {
    let parts = parts.clamp(1, rows.max(1));
    (0..parts)
        .map(|i| (i * rows / parts, (i + 1) * rows / parts))
        .filter(|(a, b)| a < b)
        .collect()
}

fn split_lines(lines: Lines, parts: usize) -> Result<Vec<Lines>, Lines> {
    if lines.len() < 2 {
        return Err(lines);
    }
    Ok(even_cuts(lines.len(), parts)
        .into_iter()
        .map(|(a, b)| lines[a..b].to_vec())
        .collect())
}

/// Encodes `unit`, splitting it until every piece fits `limit` bytes. An
/// oversized unit is cut into as many pieces as its overshoot suggests, so
/// most rows are encoded at most twice.
fn fit_budget<T>(
    unit: T,
    limit: usize,
    encode: &dyn Fn(&T) -> Result<Encoded, RenderError>,
    split: &dyn Fn(T, usize) -> Result<Vec<T>, T>,
    out: &mut Vec<Encoded>,
) -> Result<(), RenderError> {
    let encoded = encode(&unit)?;
    let size = encoded.payload.len();
    if size <= limit {
        out.push(encoded);
        return Ok(());
    }
    let parts = ((size as f64 / limit as f64) * 1.2).ceil().max(2.0) as usize;
    match split(unit, parts) {
        Ok(pieces) => {
            for piece in pieces {
                fit_budget(piece, limit, encode, split, out)?;
            }
            Ok(())
        }
        Err(_) => Err(RenderError::BudgetExceeded { limit, actual: size }),
    }
}

fn into_images(encoded: Vec<Encoded>, format: ImageFormat) -> Vec<RenderedImage> {
    encoded
        .into_iter()
        .enumerate()
        .map(|(segment_index, e)| RenderedImage {
            segment_index,
            format,
            width: e.width,
            height: e.height,
            payload: e.payload,
        })
        .collect()
}

/// Static PNG encoding with the palette fallback.
fn encode_static_canvas(canvas: &Canvas, limit: usize) -> Result<Vec<u8>, RenderError> {
    let png = encode_png(canvas)?;
    if png.len() <= limit {
        return Ok(png);
    }
    let indexed = encode_png_indexed(canvas, 256)?;
    Ok(if indexed.len() < png.len() { indexed } else { png })
}

fn encode_animation_frames(frames: &[Canvas], limit: usize) -> Result<Vec<u8>, RenderError> {
    let full = encode_gif(frames, FRAME_DELAY_CS, 256)?;
    if full.len() <= limit {
        return Ok(full);
    }
    encode_gif(frames, FRAME_DELAY_CS, 32)
}

/// Renders text, histories, notifications and charts with one typeface.
#[derive(Clone, Debug)]
pub struct Renderer {
    typeface: Typeface,
    blur_max_radius: f32,
}

impl Default for Renderer {
    fn default() -> Self {
        Renderer::new(Typeface::bundled())
    }
}

impl Renderer {
    pub fn new(typeface: Typeface) -> Self {
        Renderer {
            typeface,
            blur_max_radius: DEFAULT_BLUR_MAX_RADIUS,
        }
    }

    pub fn with_blur_max_radius(mut self, radius: f32) -> Self {
        self.blur_max_radius = radius.max(0.0);
        self
    }

    pub fn blur_max_radius(&self) -> f32 {
        self.blur_max_radius
    }

    pub fn typeface(&self) -> &Typeface {
        &self.typeface
    }

    /// Width of `line` as laid out, ignoring trailing whitespace.
    pub fn visible_width(&self, line: &str, spec: &RenderSpec) -> f32 {
        let scale = self.typeface.scale(spec.font_size);
        self.typeface.measure(scale, line.trim_end())
    }

    pub fn plan_layout(&self, text: &str, spec: &RenderSpec) -> Result<RenderPlan, RenderError> {
        spec.validate()?;
        let scale = self.typeface.scale(spec.font_size);
        let wrapped = wrap_lines(text, spec.target_width as f32, |c| {
            self.typeface.advance_for(scale, c)
        });
        Ok(assign_segments(wrapped, spec.line_height(), spec.max_height))
    }

    /// Rasterizes lines top to bottom into a `target_width`-wide canvas, at
    /// least one line tall.
    pub fn rasterize_lines<S: AsRef<str>>(&self, lines: &[S], spec: &RenderSpec) -> Canvas {
        self.coverage_for(lines, spec, lines.len().max(1))
            .resolve(spec.text_color, spec.background_color)
    }

    fn coverage_for<S: AsRef<str>>(&self, lines: &[S], spec: &RenderSpec, rows: usize) -> Coverage {
        let metrics = self.typeface.line_metrics(spec.font_size, spec.line_spacing);
        let mut cov = Coverage::new(spec.target_width, metrics.line_height * rows as u32);
        let mut painter = GlyphPainter::new(&self.typeface, self.typeface.scale(spec.font_size));
        for (i, line) in lines.iter().enumerate() {
            let top = i as i64 * i64::from(metrics.line_height);
            painter.draw_line(&mut cov, line.as_ref(), top + metrics.baseline);
        }
        cov
    }

    fn missing_glyphs(&self, text: &str) -> Vec<char> {
        let mut missing: Vec<char> = text
            .chars()
            .filter(|c| !c.is_whitespace() && !self.typeface.has_glyph(*c))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        missing
    }

    fn planned_units(&self, text: &str, spec: &RenderSpec) -> Result<Vec<Lines>, RenderError> {
        let plan = self.plan_layout(text, spec)?;
        Ok(plan
            .segments()
            .into_iter()
            .map(|seg| seg.into_iter().map(str::to_owned).collect())
            .collect())
    }

    pub fn render_static(&self, text: &str, spec: &RenderSpec) -> Result<StaticRender, RenderError> {
        let units = self.planned_units(text, spec)?;
        let limit = spec.max_file_bytes;
        let encode = |lines: &Lines| {
            let canvas = self.rasterize_lines(lines, spec);
            Ok(Encoded {
                width: canvas.width,
                height: canvas.height,
                payload: encode_static_canvas(&canvas, limit)?,
            })
        };
        let mut out = Vec::new();
        for unit in units {
            fit_budget(unit, limit, &encode, &split_lines, &mut out)?;
        }
        Ok(StaticRender {
            images: into_images(out, ImageFormat::StaticRaster),
            missing_glyphs: self.missing_glyphs(text),
        })
    }

    /// Blur radius of frame `k` of a blur animation.
    pub fn blur_radius(&self, frame: usize, fraction_elapsed: f64) -> f32 {
        let steps = (BLUR_FRAME_COUNT - 1) as f64;
        ((frame as f64 / steps) * fraction_elapsed * f64::from(self.blur_max_radius)) as f32
    }

    /// One looping 10-frame animation per segment; frame `k` is the static
    /// render blurred by `k/9 · fraction_elapsed · blur_max_radius`.
    pub fn render_blur_animation(
        &self,
        text: &str,
        spec: &RenderSpec,
        fraction_elapsed: f64,
    ) -> Result<Vec<RenderedImage>, RenderError> {
        if !(0.0..=1.0).contains(&fraction_elapsed) {
            return Err(RenderError::InvalidInput(format!(
                "fraction_elapsed {fraction_elapsed} outside [0, 1]"
            )));
        }
        let units = self.planned_units(text, spec)?;
        let limit = spec.max_file_bytes;
        let encode = |lines: &Lines| {
            let base = self.rasterize_lines(lines, spec);
            let frames: Vec<Canvas> = (0..BLUR_FRAME_COUNT)
                .map(|k| gaussian_blur(&base, self.blur_radius(k, fraction_elapsed)))
                .collect();
            Ok(Encoded {
                width: base.width,
                height: base.height,
                payload: encode_animation_frames(&frames, limit)?,
            })
        };
        let mut out = Vec::new();
        for unit in units {
            fit_budget(unit, limit, &encode, &split_lines, &mut out)?;
        }
        Ok(into_images(out, ImageFormat::Animated))
    }

    /// Two-second loop per segment: the previous revision struck through
    /// left to right over frames 0–9, then the latest revision over 10–19.
    /// A single revision yields 20 copies of its static render.
    pub fn render_history_animation<S: AsRef<str>>(
        &self,
        revisions: &[S],
        spec: &RenderSpec,
    ) -> Result<Vec<RenderedImage>, RenderError> {
        let latest = revisions
            .last()
            .ok_or_else(|| RenderError::InvalidSpec("revision list is empty".into()))?;
        let latest_units = self.planned_units(latest.as_ref(), spec)?;
        let previous_units = match revisions.len() {
            1 => None,
            n => Some(self.planned_units(revisions[n - 2].as_ref(), spec)?),
        };
        let limit = spec.max_file_bytes;
        let mut out = Vec::new();

        match previous_units {
            None => {
                let encode = |lines: &Lines| {
                    let canvas = self.rasterize_lines(lines, spec);
                    let frames = vec![canvas.clone(); HISTORY_FRAME_COUNT];
                    Ok(Encoded {
                        width: canvas.width,
                        height: canvas.height,
                        payload: encode_animation_frames(&frames, limit)?,
                    })
                };
                for unit in latest_units {
                    fit_budget(unit, limit, &encode, &split_lines, &mut out)?;
                }
            }
            Some(previous) => {
                let count = previous.len().max(latest_units.len());
                let mut prev_iter = previous.into_iter();
                let mut next_iter = latest_units.into_iter();
                let encode = |pair: &(Lines, Lines)| {
                    let frames = self.history_frames(&pair.0, &pair.1, spec);
                    Ok(Encoded {
                        width: frames[0].width,
                        height: frames[0].height,
                        payload: encode_animation_frames(&frames, limit)?,
                    })
                };
                let split = |(old, new): (Lines, Lines), parts: usize| {
                    let longest = old.len().max(new.len());
                    if longest < 2 {
                        return Err((old, new));
                    }
                    let slice = |v: &Lines, a: usize, b: usize| {
                        v[a.min(v.len())..b.min(v.len())].to_vec()
                    };
                    Ok(even_cuts(longest, parts)
                        .into_iter()
                        .map(|(a, b)| (slice(&old, a, b), slice(&new, a, b)))
                        .collect())
                };
                for _ in 0..count {
                    let pair = (
                        prev_iter.next().unwrap_or_default(),
                        next_iter.next().unwrap_or_default(),
                    );
                    fit_budget(pair, limit, &encode, &split, &mut out)?;
                }
            }
        }
        Ok(into_images(out, ImageFormat::Animated))
    }

    fn history_frames(&self, old: &[String], new: &[String], spec: &RenderSpec) -> Vec<Canvas> {
        let rows = old.len().max(new.len()).max(1);
        let metrics = self.typeface.line_metrics(spec.font_size, spec.line_spacing);
        let old_cov = self.coverage_for(old, spec, rows);
        let thickness = (spec.font_size / 12.0).round().max(1.0) as i64;
        let strike_offset = metrics.baseline - (spec.font_size * 0.3).round() as i64;
        let widths: Vec<f32> = old.iter().map(|l| self.visible_width(l, spec)).collect();

        let steps = (HISTORY_FRAME_COUNT / 2) as f32;
        let mut frames = Vec::with_capacity(HISTORY_FRAME_COUNT);
        for k in 0..HISTORY_FRAME_COUNT / 2 {
            let mut cov = old_cov.clone();
            let progress = (k + 1) as f32 / steps;
            for (i, width) in widths.iter().enumerate() {
                let y = i as i64 * i64::from(metrics.line_height) + strike_offset - thickness / 2;
                let x_end = (width * progress).round() as i64;
                cov.fill_rect(0, y, x_end, y + thickness);
            }
            frames.push(cov.resolve(spec.text_color, spec.background_color));
        }
        let latest = self
            .coverage_for(new, spec, rows)
            .resolve(spec.text_color, spec.background_color);
        frames.extend(std::iter::repeat_n(latest, HISTORY_FRAME_COUNT / 2));
        frames
    }

    pub fn render_notification(
        &self,
        kind: NotificationKind,
        spec: &RenderSpec,
        format: ImageFormat,
    ) -> Result<RenderedImage, RenderError> {
        match format {
            ImageFormat::StaticRaster => {
                let mut rendered = self.render_static(kind.message(), spec)?;
                if rendered.images.len() != 1 {
                    return Err(RenderError::InvalidSpec(
                        "notification does not fit one image".into(),
                    ));
                }
                Ok(rendered.images.remove(0))
            }
            ImageFormat::Animated => {
                let plan = self.plan_layout(kind.message(), spec)?;
                if plan.segment_count != 1 {
                    return Err(RenderError::InvalidSpec(
                        "notification does not fit one image".into(),
                    ));
                }
                let canvas = self.rasterize_lines(&plan.segment(0), spec);
                let payload = encode_gif(std::slice::from_ref(&canvas), 0, 256)?;
                if payload.len() > spec.max_file_bytes {
                    return Err(RenderError::BudgetExceeded {
                        limit: spec.max_file_bytes,
                        actual: payload.len(),
                    });
                }
                Ok(RenderedImage {
                    segment_index: 0,
                    format,
                    width: canvas.width,
                    height: canvas.height,
                    payload,
                })
            }
        }
    }

    /// Pixel length of each bar in a chart of `values`.
    pub fn bar_lengths(values: &[f64], target_width: u32) -> Vec<u32> {
        let max = values.iter().copied().fold(0.0f64, f64::max);
        values
            .iter()
            .map(|&v| {
                if max > 0.0 {
                    (v / max * BAR_FILL * f64::from(target_width)).round() as u32
                } else {
                    0
                }
            })
            .collect()
    }

    /// Horizontal bar chart: each entry is a label line followed by a bar
    /// line; the largest value spans `0.9 · target_width`.
    pub fn render_bar_chart<S: AsRef<str>>(
        &self,
        values: &[f64],
        labels: &[S],
        spec: &RenderSpec,
    ) -> Result<RenderedImage, RenderError> {
        spec.validate()?;
        if values.is_empty() || values.len() != labels.len() {
            return Err(RenderError::InvalidInput(
                "values and labels must be non-empty and of equal length".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RenderError::InvalidInput(
                "values must be finite and non-negative".into(),
            ));
        }
        let metrics = self.typeface.line_metrics(spec.font_size, spec.line_spacing);
        let line_height = metrics.line_height;
        let rows = values.len() * 2;
        if (rows as u64) * u64::from(line_height) > u64::from(spec.max_height) {
            return Err(RenderError::InvalidInput(format!(
                "{} bars do not fit within {} px",
                values.len(),
                spec.max_height
            )));
        }
        let label_lines: Vec<&str> = labels
            .iter()
            .flat_map(|l| [l.as_ref().lines().next().unwrap_or(""), ""])
            .collect();
        let mut cov = self.coverage_for(&label_lines, spec, rows);
        let bar_thickness = ((line_height as f32) * 0.6).round().max(1.0) as i64;
        let inset = (i64::from(line_height) - bar_thickness) / 2;
        for (i, len) in Self::bar_lengths(values, spec.target_width).into_iter().enumerate() {
            let top = (2 * i + 1) as i64 * i64::from(line_height) + inset;
            cov.fill_rect(0, top, i64::from(len), top + bar_thickness);
        }
        let canvas = cov.resolve(spec.text_color, spec.background_color);
        let payload = encode_static_canvas(&canvas, spec.max_file_bytes)?;
        if payload.len() > spec.max_file_bytes {
            return Err(RenderError::BudgetExceeded {
                limit: spec.max_file_bytes,
                actual: payload.len(),
            });
        }
        Ok(RenderedImage {
            segment_index: 0,
            format: ImageFormat::StaticRaster,
            width: canvas.width,
            height: canvas.height,
            payload,
        })
    }

    /// Downscales an arbitrary raster to fit `max_width × max_height` and
    /// encodes it as PNG within `max_file_bytes`, shrinking further if needed.
    pub fn fit_raster(&self, image: &Canvas, spec: &RenderSpec) -> Result<RenderedImage, RenderError> {
        spec.validate()?;
        if image.width == 0 || image.height == 0 {
            return Err(RenderError::InvalidInput("empty raster".into()));
        }
        let fit = f64::min(
            f64::from(spec.max_width) / f64::from(image.width),
            f64::from(spec.max_height) / f64::from(image.height),
        )
        .min(1.0);
        let mut factor = fit;
        loop {
            let w = ((f64::from(image.width) * factor).floor() as u32).max(1);
            let h = ((f64::from(image.height) * factor).floor() as u32).max(1);
            let scaled = if (w, h) == (image.width, image.height) {
                image.clone()
            } else {
                downscale(image, w, h)
            };
            let payload = encode_static_canvas(&scaled, spec.max_file_bytes)?;
            if payload.len() <= spec.max_file_bytes {
                return Ok(RenderedImage {
                    segment_index: 0,
                    format: ImageFormat::StaticRaster,
                    width: w,
                    height: h,
                    payload,
                });
            }
            if w == 1 && h == 1 {
                return Err(RenderError::BudgetExceeded {
                    limit: spec.max_file_bytes,
                    actual: payload.len(),
                });
            }
            factor *= 0.8;
        }
    }
}

/// Area-averaging downscale.
fn downscale(src: &Canvas, width: u32, height: u32) -> Canvas {
    let sx = f64::from(src.width) / f64::from(width);
    let sy = f64::from(src.height) / f64::from(height);
    let mut out = Canvas::filled(width, height, Rgba::TRANSPARENT);
    for y in 0..height {
        let y0 = (f64::from(y) * sy).floor() as u32;
        let y1 = ((f64::from(y + 1) * sy).ceil() as u32).min(src.height).max(y0 + 1);
        for x in 0..width {
            let x0 = (f64::from(x) * sx).floor() as u32;
            let x1 = ((f64::from(x + 1) * sx).ceil() as u32).min(src.width).max(x0 + 1);
            let mut acc = [0u64; 4];
            for yy in y0..y1 {
                for xx in x0..x1 {
                    let p = src.get(xx, yy);
                    for c in 0..4 {
                        acc[c] += u64::from(p[c]);
                    }
                }
            }
            let n = u64::from((y1 - y0) * (x1 - x0));
            out.set(x, y, acc.map(|v| ((v + n / 2) / n) as u8));
        }
    }
    out
}
