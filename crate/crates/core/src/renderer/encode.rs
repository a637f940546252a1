use std::borrow::Cow;
use std::collections::HashMap;
use std::io::Cursor;

use color_quant::NeuQuant;
use gif::{DisposalMethod, Repeat};

use super::raster::Canvas;
use super::RenderError;

/// Frame delay of every animation frame, in GIF centiseconds (100 ms).
pub const FRAME_DELAY_CS: u16 = 10;

const TRANSPARENT_KEY: [u8; 4] = [0, 0, 0, 0];

fn encode_err(e: impl std::fmt::Display) -> RenderError {
    RenderError::Encode(e.to_string())
}

/// Lossless truecolor PNG. RGB when fully opaque, RGBA otherwise.
pub fn encode_png(canvas: &Canvas) -> Result<Vec<u8>, RenderError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, canvas.width, canvas.height);
        enc.set_depth(png::BitDepth::Eight);
        let data: Vec<u8> = if canvas.is_opaque() {
            enc.set_color(png::ColorType::Rgb);
            canvas.pixels.iter().flat_map(|p| [p[0], p[1], p[2]]).collect()
        } else {
            enc.set_color(png::ColorType::Rgba);
            canvas.pixels.iter().flatten().copied().collect()
        };
        let mut writer = enc.write_header().map_err(encode_err)?;
        writer.write_image_data(&data).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
    }
    Ok(out)
}

/// Palette-reduced PNG with at most `max_colors` entries (exact when the
/// image already has that few colors).
pub fn encode_png_indexed(canvas: &Canvas, max_colors: usize) -> Result<Vec<u8>, RenderError> {
    let palette = Palette::build(&canvas.pixels, max_colors);
    let indices = palette.index_all(&canvas.pixels);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, canvas.width, canvas.height);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        let rgb: Vec<u8> = palette.colors.iter().flat_map(|c| [c[0], c[1], c[2]]).collect();
        enc.set_palette(rgb);
        if palette.colors.iter().any(|c| c[3] != 255) {
            let trns: Vec<u8> = palette.colors.iter().map(|c| c[3]).collect();
            enc.set_trns(trns);
        }
        let mut writer = enc.write_header().map_err(encode_err)?;
        writer.write_image_data(&indices).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<Canvas, RenderError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(encode_err)?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| encode_err("png too large"))?];
    let info = reader.next_frame(&mut buf).map_err(encode_err)?;
    let data = &buf[..info.buffer_size()];
    let pixels = match info.color_type {
        png::ColorType::Rgba => data.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect(),
        png::ColorType::Rgb => data.chunks_exact(3).map(|c| [c[0], c[1], c[2], 255]).collect(),
        png::ColorType::GrayscaleAlpha => data.chunks_exact(2).map(|c| [c[0], c[0], c[0], c[1]]).collect(),
        png::ColorType::Grayscale => data.iter().map(|&g| [g, g, g, 255]).collect(),
        png::ColorType::Indexed => return Err(encode_err("unexpanded indexed png")),
    };
    Ok(Canvas {
        width: info.width,
        height: info.height,
        pixels,
    })
}

pub(crate) struct Palette {
    colors: Vec<[u8; 4]>,
    exact: Option<HashMap<[u8; 4], u8>>,
    quant: Option<NeuQuant>,
}

impl Palette {
    pub fn build(pixels: &[[u8; 4]], max_colors: usize) -> Self {
        let max_colors = max_colors.clamp(2, 256);
        let mut seen: HashMap<[u8; 4], u8> = HashMap::new();
        let mut colors = Vec::new();
        let mut last = None;
        for p in pixels {
            // Backgrounds are long runs of one color; skip the map for them.
            if last == Some(p) {
                continue;
            }
            last = Some(p);
            if !seen.contains_key(p) {
                if colors.len() == max_colors {
                    return Self::quantized(pixels, max_colors);
                }
                seen.insert(*p, colors.len() as u8);
                colors.push(*p);
            }
        }
        Palette {
            colors,
            exact: Some(seen),
            quant: None,
        }
    }

    fn quantized(pixels: &[[u8; 4]], max_colors: usize) -> Self {
        let flat: Vec<u8> = pixels.iter().flatten().copied().collect();
        let nq = NeuQuant::new(10, max_colors, &flat);
        let colors = nq
            .color_map_rgba()
            .chunks_exact(4)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect();
        Palette {
            colors,
            exact: None,
            quant: Some(nq),
        }
    }

    pub fn index_of(&self, p: &[u8; 4]) -> u8 {
        match (&self.exact, &self.quant) {
            (Some(map), _) => map[p],
            (None, Some(nq)) => nq.index_of(p) as u8,
            (None, None) => 0,
        }
    }

    /// Maps a run of pixels, memoizing quantizer lookups.
    pub fn index_all(&self, pixels: &[[u8; 4]]) -> Vec<u8> {
        let mut memo: HashMap<[u8; 4], u8> = HashMap::new();
        let mut last: Option<([u8; 4], u8)> = None;
        pixels
            .iter()
            .map(|p| match last {
                Some((c, i)) if c == *p => i,
                _ => {
                    let i = match &self.exact {
                        Some(map) => map[p],
                        None => *memo.entry(*p).or_insert_with(|| self.index_of(p)),
                    };
                    last = Some((*p, i));
                    i
                }
            })
            .collect()
    }

    fn position(&self, color: &[u8; 4]) -> Option<u8> {
        self.colors.iter().position(|c| c == color).map(|i| i as u8)
    }
}

/// GIF89a animation that loops forever. Pixels with alpha < 128 become
/// transparent; everything else is treated as opaque.
pub fn encode_gif(frames: &[Canvas], delay_cs: u16, max_colors: usize) -> Result<Vec<u8>, RenderError> {
    let first = frames
        .first()
        .ok_or_else(|| RenderError::InvalidInput("animation needs at least one frame".into()))?;
    let (width, height) = (first.width, first.height);
    let w16 = u16::try_from(width).map_err(encode_err)?;
    let h16 = u16::try_from(height).map_err(encode_err)?;
    if frames.iter().any(|f| (f.width, f.height) != (width, height)) {
        return Err(RenderError::InvalidInput("frames differ in size".into()));
    }

    let flattened: Vec<Vec<[u8; 4]>> = frames
        .iter()
        .map(|f| {
            f.pixels
                .iter()
                .map(|p| if p[3] < 128 { TRANSPARENT_KEY } else { [p[0], p[1], p[2], 255] })
                .collect()
        })
        .collect();
    let all: Vec<[u8; 4]> = flattened.iter().flatten().copied().collect();
    let palette = Palette::build(&all, max_colors);
    let transparent = palette.position(&TRANSPARENT_KEY).filter(|_| palette.exact.is_some());
    let mut table: Vec<u8> = palette.colors.iter().flat_map(|c| [c[0], c[1], c[2]]).collect();
    // GIF color tables hold a power-of-two number of entries.
    let entries = (table.len() / 3).max(2).next_power_of_two();
    table.resize(entries * 3, 0);

    let indexed: Vec<Vec<u8>> = flattened.iter().map(|f| palette.index_all(f)).collect();

    let mut out = Vec::new();
    {
        let mut enc = gif::Encoder::new(&mut out, w16, h16, &table).map_err(encode_err)?;
        enc.set_repeat(Repeat::Infinite).map_err(encode_err)?;
        let mut previous: Option<&Vec<u8>> = None;
        for cur in &indexed {
            // Delta frames are only sound when no pixel is transparent.
            let rect = match previous {
                Some(prev) if transparent.is_none() => changed_rect(prev, cur, width, height),
                _ => Some((0, 0, width, height)),
            };
            let (x, y, w, h) = rect.unwrap_or((0, 0, 1, 1));
            let mut buffer = Vec::with_capacity((w * h) as usize);
            for row in y..y + h {
                let start = (row * width + x) as usize;
                buffer.extend_from_slice(&cur[start..start + w as usize]);
            }
            let frame = gif::Frame {
                delay: delay_cs,
                dispose: DisposalMethod::Keep,
                transparent,
                left: x as u16,
                top: y as u16,
                width: w as u16,
                height: h as u16,
                buffer: Cow::Owned(buffer),
                ..gif::Frame::default()
            };
            enc.write_frame(&frame).map_err(encode_err)?;
            previous = Some(cur);
        }
    }
    Ok(out)
}

/// Bounding box `(x, y, w, h)` of pixels that differ, or `None` if identical.
fn changed_rect(prev: &[u8], cur: &[u8], width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for y in 0..height {
        for x in 0..width {
            let i = (y * width + x) as usize;
            if prev[i] != cur[i] {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (x0 != u32::MAX).then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// A GIF decoded into fully composited frames.
#[derive(Clone, Debug)]
pub struct DecodedAnimation {
    pub width: u32,
    pub height: u32,
    pub frames: Vec<Canvas>,
    pub delays_cs: Vec<u16>,
    pub loops_forever: bool,
}

impl DecodedAnimation {
    pub fn total_duration_ms(&self) -> u64 {
        self.delays_cs.iter().map(|&d| u64::from(d) * 10).sum()
    }
}

pub fn decode_gif(bytes: &[u8]) -> Result<DecodedAnimation, RenderError> {
    let mut opts = gif::DecodeOptions::new();
    opts.set_color_output(gif::ColorOutput::RGBA);
    let mut decoder = opts.read_info(Cursor::new(bytes)).map_err(encode_err)?;
    let width = u32::from(decoder.width());
    let height = u32::from(decoder.height());
    let mut screen = Canvas {
        width,
        height,
        pixels: vec![TRANSPARENT_KEY; (width * height) as usize],
    };
    let mut frames = Vec::new();
    let mut delays_cs = Vec::new();
    while let Some(frame) = decoder.read_next_frame().map_err(encode_err)? {
        let fw = u32::from(frame.width);
        for (i, px) in frame.buffer.chunks_exact(4).enumerate() {
            let x = u32::from(frame.left) + i as u32 % fw;
            let y = u32::from(frame.top) + i as u32 / fw;
            if x < width && y < height && px[3] != 0 {
                screen.set(x, y, [px[0], px[1], px[2], px[3]]);
            }
        }
        frames.push(screen.clone());
        delays_cs.push(frame.delay);
        if frame.dispose == DisposalMethod::Background {
            let bg = Canvas::filled(width, height, super::Rgba(TRANSPARENT_KEY));
            screen = bg;
        }
    }
    Ok(DecodedAnimation {
        width,
        height,
        frames,
        delays_cs,
        loops_forever: decoder.repeat() == Repeat::Infinite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renderer::Rgba;

    fn checker(w: u32, h: u32) -> Canvas {
        let mut c = Canvas::filled(w, h, Rgba::WHITE);
        for y in 0..h {
            for x in 0..w {
                if (x + y) % 2 == 0 {
                    c.set(x, y, [10, 20, 30, 255]);
                }
            }
        }
        c
    }

    #[test]
    fn png_roundtrip_is_lossless() {
        let c = checker(7, 5);
        assert_eq!(decode_png(&encode_png(&c).unwrap()).unwrap(), c);
        assert_eq!(decode_png(&encode_png_indexed(&c, 256).unwrap()).unwrap(), c);
    }

    #[test]
    fn gif_roundtrip_with_identical_and_changed_frames() {
        let a = checker(6, 4);
        let mut b = a.clone();
        b.set(3, 2, [200, 0, 0, 255]);
        let bytes = encode_gif(&[a.clone(), a.clone(), b.clone()], FRAME_DELAY_CS, 256).unwrap();
        let decoded = decode_gif(&bytes).unwrap();
        assert_eq!(decoded.frames, vec![a.clone(), a, b]);
        assert_eq!(decoded.delays_cs, vec![10, 10, 10]);
        assert!(decoded.loops_forever);
    }

    #[test]
    fn gif_transparency_survives() {
        let mut c = Canvas::filled(3, 3, Rgba([0, 0, 0, 0]));
        c.set(1, 1, [255, 0, 0, 255]);
        let decoded = decode_gif(&encode_gif(&[c.clone(), c.clone()], 10, 256).unwrap()).unwrap();
        assert_eq!(decoded.frames[1].get(1, 1), [255, 0, 0, 255]);
        assert_eq!(decoded.frames[1].get(0, 0)[3], 0);
    }

    #[test]
    fn palette_falls_back_to_quantization() {
        let mut c = Canvas::filled(32, 32, Rgba::WHITE);
        for (i, p) in c.pixels.iter_mut().enumerate() {
            *p = [(i % 256) as u8, (i / 4 % 256) as u8, 7, 255];
        }
        let bytes = encode_png_indexed(&c, 16).unwrap();
        let back = decode_png(&bytes).unwrap();
        assert_eq!((back.width, back.height), (32, 32));
    }

    #[test]
    fn changed_rect_bounds_differences() {
        let prev = vec![0u8; 12];
        let mut cur = prev.clone();
        cur[5] = 1;
        cur[10] = 1;
        assert_eq!(changed_rect(&prev, &cur, 4, 3), Some((1, 1, 2, 2)));
        assert_eq!(changed_rect(&prev, &prev, 4, 3), None);
    }
}
