use latebind_core::renderer::{
    decode_gif, decode_png, gaussian_kernel, Canvas, ImageFormat, LineEnd, NotificationKind,
    RenderSpec, Renderer, Typeface, BLUR_FRAME_COUNT, HISTORY_FRAME_COUNT,
};
use proptest::prelude::*;

fn renderer() -> Renderer {
    Renderer::default()
}

/// Word-level greedy wrap written independently of the library: lines are
/// built from whitespace-separated words and measured from scratch each time.
fn oracle_line_count(text: &str, width: f32, typeface: &Typeface, font_size: f32) -> usize {
    let scale = typeface.scale(font_size);
    let measure = |s: &str| s.chars().map(|c| typeface.advance_for(scale, c)).sum::<f32>();
    let mut lines = 1;
    let mut current = String::new();
    for word in text.split(' ') {
        let candidate = if current.is_empty() {
            word.to_string()
        } else {
            format!("{current} {word}")
        };
        if measure(&candidate) <= width + 1e-3 || current.is_empty() {
            current = candidate;
        } else {
            lines += 1;
            current = word.to_string();
        }
    }
    lines
}

#[test]
fn hundred_char_sentence_is_one_segment() {
    let text = "Meet me at the north entrance at 7:45 tomorrow; bring the signed lease and both spare keys, please!!";
    assert_eq!(text.chars().count(), 100);
    let spec = RenderSpec::default();
    let r = renderer();
    let expected_lines = oracle_line_count(text, spec.target_width as f32, r.typeface(), spec.font_size);
    assert!(expected_lines as u32 * spec.line_height() <= 524);

    let plan = r.plan_layout(text, &spec).unwrap();
    assert_eq!(plan.segment_count, 1);
    assert_eq!(plan.lines.len(), expected_lines);
    let rendered = r.render_static(text, &spec).unwrap();
    assert_eq!(rendered.images.len(), 1);
    assert_eq!(rendered.images[0].height, expected_lines as u32 * spec.line_height());
}

#[test]
fn four_hundred_lines_segment_count() {
    let spec = RenderSpec::default();
    // 14 px · 1.2 = 16.8 → 17 px per line; ⌊524 / 17⌋ = 30 lines per segment.
    let line_height = (14.0f32 * 1.2).ceil() as usize;
    let per_segment = 524 / line_height;
    assert_eq!((line_height, per_segment), (17, 30));
    let text = (0..400).map(|i| format!("row {i}")).collect::<Vec<_>>().join("\n");
    let plan = renderer().plan_layout(&text, &spec).unwrap();
    assert_eq!(plan.lines.len(), 400);
    assert_eq!(plan.segment_count, 400usize.div_ceil(per_segment));
    assert_eq!(plan.segment_count, 14);
}

#[test]
fn every_line_fits_target_width() {
    let spec = RenderSpec { target_width: 120, max_width: 120, ..Default::default() };
    let text = "supercalifragilisticexpialidocious is long; tiny words follow it around and around";
    let r = renderer();
    let plan = r.plan_layout(text, &spec).unwrap();
    for line in &plan.lines {
        assert!(r.visible_width(&line.text, &spec) <= 120.0 + 1e-3, "{:?}", line.text);
    }
    assert!(plan.lines.iter().any(|l| l.end == LineEnd::Wrap && !l.text.ends_with(' ')));
    assert_eq!(plan.reconstruct(), text);
}

#[test]
fn static_render_is_deterministic() {
    let spec = RenderSpec::default();
    let text = "Determinism check · ünïcødé, 数字, emoji 🙂 and tabs\tinside.";
    let a = renderer().render_static(text, &spec).unwrap();
    let b = renderer().render_static(text, &spec).unwrap();
    assert_eq!(a, b);
}

/// Direct 2-D convolution with the same Gaussian definition (σ = radius,
/// taps over ±⌈3σ⌉, edge clamp), computed without separability.
fn oracle_blur(src: &Canvas, radius: f32) -> Canvas {
    if radius <= 0.0 {
        return src.clone();
    }
    let half = (3.0 * radius).ceil() as i64;
    let mut weights = Vec::new();
    let mut total = 0.0f64;
    for dy in -half..=half {
        for dx in -half..=half {
            let w = (-((dx * dx + dy * dy) as f64) / (2.0 * f64::from(radius).powi(2))).exp();
            weights.push((dx, dy, w));
            total += w;
        }
    }
    let (w, h) = (src.width as i64, src.height as i64);
    let mut out = src.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 4];
            for &(dx, dy, wt) in &weights {
                let sx = (x + dx).clamp(0, w - 1) as u32;
                let sy = (y + dy).clamp(0, h - 1) as u32;
                let p = src.get(sx, sy);
                for c in 0..4 {
                    acc[c] += wt / total * f64::from(p[c]);
                }
            }
            out.set(x as u32, y as u32, acc.map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    out
}

#[test]
fn oracle_kernel_matches_library_kernel_shape() {
    let k = gaussian_kernel(8.0);
    assert_eq!(k.len(), 2 * 24 + 1);
}

#[test]
fn blur_zero_fraction_is_static_render() {
    let spec = RenderSpec::default();
    let r = renderer();
    let text = "Self-destructing secret";
    let static_px = decode_png(&r.render_static(text, &spec).unwrap().images[0].payload).unwrap();
    let anim = r.render_blur_animation(text, &spec, 0.0).unwrap();
    assert_eq!(anim.len(), 1);
    let decoded = decode_gif(&anim[0].payload).unwrap();
    assert_eq!(decoded.frames.len(), BLUR_FRAME_COUNT);
    for f in &decoded.frames {
        assert_eq!(f, &static_px);
    }
}

#[test]
fn blur_full_fraction_matches_oracle() {
    let spec = RenderSpec::default();
    let r = renderer();
    let text = "Blur me";
    let static_px = decode_png(&r.render_static(text, &spec).unwrap().images[0].payload).unwrap();
    let anim = r.render_blur_animation(text, &spec, 1.0).unwrap();
    let decoded = decode_gif(&anim[0].payload).unwrap();
    let expected = oracle_blur(&static_px, 8.0);
    let err = decoded.frames[9].mean_abs_diff(&expected);
    assert!(err <= 2.0, "mean abs error {err}");
    let mid = oracle_blur(&static_px, 4.0 / 9.0 * 8.0 * 1.0);
    assert!(decoded.frames[4].mean_abs_diff(&mid) <= 2.0);
}

/// Sum of absolute differences between horizontally and vertically adjacent
/// pixels. Convolution with a non-negative normalized kernel never raises it.
fn total_variation(c: &Canvas) -> f64 {
    let mut tv = 0.0;
    for y in 0..c.height {
        for x in 0..c.width {
            let p = c.get(x, y);
            if x + 1 < c.width {
                let q = c.get(x + 1, y);
                tv += (0..3).map(|i| f64::from(p[i].abs_diff(q[i]))).sum::<f64>();
            }
            if y + 1 < c.height {
                let q = c.get(x, y + 1);
                tv += (0..3).map(|i| f64::from(p[i].abs_diff(q[i]))).sum::<f64>();
            }
        }
    }
    tv
}

#[test]
fn blur_is_monotone_in_fraction() {
    let spec = RenderSpec::default();
    let r = renderer();
    let text = "Fading words";
    let mut last_radius = [0.0f32; BLUR_FRAME_COUNT];
    let mut last_tv = [f64::INFINITY; BLUR_FRAME_COUNT];
    for step in 0..=5 {
        let fraction = f64::from(step) / 5.0;
        let anim = r.render_blur_animation(text, &spec, fraction).unwrap();
        let decoded = decode_gif(&anim[0].payload).unwrap();
        let mut frame_tv = f64::INFINITY;
        for k in 0..BLUR_FRAME_COUNT {
            let radius = r.blur_radius(k, fraction);
            assert!(radius >= last_radius[k]);
            last_radius[k] = radius;
            let tv = total_variation(&decoded.frames[k]);
            // 1% slack absorbs 8-bit rounding.
            assert!(tv <= last_tv[k] * 1.01, "frame {k} fraction {fraction}");
            assert!(tv <= frame_tv * 1.01, "frame {k} sharper than frame {}", k.max(1) - 1);
            last_tv[k] = tv;
            frame_tv = tv;
        }
    }
}

#[test]
fn single_revision_history_repeats_static() {
    let spec = RenderSpec::default();
    let r = renderer();
    let static_px = decode_png(&r.render_static("hello", &spec).unwrap().images[0].payload).unwrap();
    let anim = r.render_history_animation(&["hello"], &spec).unwrap();
    let decoded = decode_gif(&anim[0].payload).unwrap();
    assert_eq!(decoded.frames.len(), HISTORY_FRAME_COUNT);
    assert!(decoded.frames.iter().all(|f| f == &static_px));
    assert_eq!(decoded.total_duration_ms(), 2000);
}

#[test]
fn two_revision_history_strikes_then_shows_latest() {
    let spec = RenderSpec::default();
    let r = renderer();
    let old_px = decode_png(&r.render_static("Hi Jhon", &spec).unwrap().images[0].payload).unwrap();
    let new_px = decode_png(&r.render_static("Hi John", &spec).unwrap().images[0].payload).unwrap();
    let anim = r.render_history_animation(&["Hi Jhon", "Hi John"], &spec).unwrap();
    let d = decode_gif(&anim[0].payload).unwrap();
    assert_eq!(d.frames.len(), 20);
    assert!(d.delays_cs.iter().all(|&c| c == 10));
    assert!(d.loops_forever);
    assert_eq!(d.frames[19], new_px);
    assert_eq!(d.frames[10], new_px);

    // Dark pixels added over the old text grow left to right, reaching the
    // full visible width by frame 9.
    let width = r.visible_width("Hi Jhon", &spec).round() as u32;
    let struck_extent = |f: &Canvas| {
        (0..f.width)
            .filter(|&x| (0..f.height).any(|y| f.get(x, y) != old_px.get(x, y)))
            .max()
            .map_or(0, |x| x + 1)
    };
    let extents: Vec<u32> = (0..10).map(|k| struck_extent(&d.frames[k])).collect();
    assert!(extents.windows(2).all(|w| w[0] <= w[1]), "{extents:?}");
    assert!(extents[0] > 0 && extents[0] <= width / 10 + 1);
    assert!(extents[9].abs_diff(width) <= 1, "{} vs {width}", extents[9]);
}

#[test]
fn bar_chart_lengths_measured_in_pixels() {
    let spec = RenderSpec::default();
    let r = renderer();
    let bar_row_extent = |img: &Canvas, row: u32| {
        let lh = spec.line_height();
        let y = (2 * row + 1) * lh + lh / 2;
        (0..img.width).filter(|&x| img.get(x, y)[0] < 128).count() as f64
    };

    let one = decode_png(&r.render_bar_chart(&[10.0], &["Mon"], &spec).unwrap().payload).unwrap();
    let expected = (0.9 * 299.0f64).round();
    assert!((bar_row_extent(&one, 0) - expected).abs() <= 1.0);

    let two = decode_png(&r.render_bar_chart(&[5.0, 10.0], &["a", "b"], &spec).unwrap().payload).unwrap();
    let (a, b) = (bar_row_extent(&two, 0), bar_row_extent(&two, 1));
    assert!((a - 0.5 * b).abs() <= 1.0, "a={a} b={b}");

    let zero = r.render_bar_chart(&[0.0, 0.0], &["x", "y"], &spec).unwrap();
    assert!(zero.width <= 299 && zero.height <= 524);
    let z = decode_png(&zero.payload).unwrap();
    assert_eq!(bar_row_extent(&z, 0), 0.0);
    // labels still drawn
    assert!(z.pixels.iter().any(|p| p[0] < 128));
}

#[test]
fn notifications_fit_budget() {
    let spec = RenderSpec::default();
    for kind in [NotificationKind::Expired, NotificationKind::Deleted] {
        for format in [ImageFormat::StaticRaster, ImageFormat::Animated] {
            let img = renderer().render_notification(kind, &spec, format).unwrap();
            assert!(img.width <= 299 && img.height <= 524 && img.byte_length() <= 204_800);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_is_lossless(text in "\\PC{0,400}|[a-z \n]{0,400}") {
        let plan = renderer().plan_layout(&text, &RenderSpec::default()).unwrap();
        prop_assert_eq!(plan.reconstruct(), text);
        prop_assert!(plan.segment_count >= 1);
        let per = plan.lines.iter().filter(|l| l.segment_index == 0).count();
        prop_assert!(per as u32 * plan.line_height <= 524);
    }

    #[test]
    fn layout_is_lossless_for_arbitrary_strings(text in any::<String>()) {
        let plan = renderer().plan_layout(&text, &RenderSpec::default()).unwrap();
        prop_assert_eq!(plan.reconstruct(), text);
    }

    #[test]
    fn static_assets_respect_budget(text in "\\PC{0,600}") {
        let out = renderer().render_static(&text, &RenderSpec::default()).unwrap();
        for img in &out.images {
            prop_assert!(img.width <= 299 && img.height <= 524 && img.byte_length() <= 204_800);
        }
    }
}
