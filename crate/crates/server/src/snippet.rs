//! HTML snippets that reference late-bound images.

use latebind_core::{BoundContent, ContentId, ImageFormat};
use url::Url;

#[derive(Clone, Debug)]
pub struct SnippetOptions {
    /// Off by default: stale backup text in `alt` contradicts the live image.
    pub include_alt: bool,
    pub alt_text: Option<String>,
    pub base_url: Url,
}

impl SnippetOptions {
    pub fn new(base_url: Url) -> Self {
        SnippetOptions {
            include_alt: false,
            alt_text: None,
            base_url,
        }
    }
}

pub fn image_url(base_url: &Url, id: &ContentId, segment: usize, format: ImageFormat) -> String {
    format!(
        "{}/i/{}/{}.{}",
        base_url.as_str().trim_end_matches('/'),
        id,
        segment,
        format.extension()
    )
}

/// URLs of every segment the snippet references, in reading order.
pub fn image_urls(content: &BoundContent, base_url: &Url) -> Vec<String> {
    (0..segment_count(content))
        .map(|i| image_url(base_url, &content.content_id, i, content.format))
        .collect()
}

fn segment_count(content: &BoundContent) -> usize {
    content
        .latest()
        .map_or(0, |r| r.assets.len())
        .max(content.segment_span)
}

pub fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// One `<img>` per segment, joined by `<br>`, sized to the latest assets.
pub fn generate_snippet(content: &BoundContent, options: &SnippetOptions) -> String {
    let assets = content.latest().map(|r| r.assets.as_slice()).unwrap_or_default();
    let alt = match (&options.alt_text, options.include_alt) {
        (Some(text), true) => format!(" alt=\"{}\"", escape_attr(text)),
        (None, true) => " alt=\"\"".to_string(),
        _ => String::new(),
    };
    image_urls(content, &options.base_url)
        .into_iter()
        .enumerate()
        .map(|(i, src)| {
            let size = assets
                .iter()
                .find(|a| a.segment_index == i)
                .map(|a| format!(" width=\"{}\" height=\"{}\"", a.width, a.height))
                .unwrap_or_default();
            format!("<img src=\"{}\"{size}{alt} style=\"display:block;border:0\">", escape_attr(&src))
        })
        .collect::<Vec<_>>()
        .join("<br>\n")
}
