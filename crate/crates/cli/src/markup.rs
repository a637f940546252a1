//! Marker regions in email HTML, and splicing snippets into text.

use std::ops::Range;

/// Byte ranges of the inner text of every `<!--name-->…<!--/name-->` region,
/// in document order. An opening marker without a close is ignored.
pub fn marked_regions(html: &str, name: &str) -> Vec<Range<usize>> {
    let open = format!("<!--{name}-->");
    let close = format!("<!--/{name}-->");
    let mut regions = Vec::new();
    let mut at = 0;
    while let Some(o) = html[at..].find(&open) {
        let start = at + o + open.len();
        let Some(c) = html[start..].find(&close) else {
            break;
        };
        regions.push(start..start + c);
        at = start + c + close.len();
    }
    regions
}

/// Replaces each range (sorted, non-overlapping) with the matching replacement.
pub fn splice(text: &str, ranges: &[Range<usize>], replacements: &[String]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    for (r, rep) in ranges.iter().zip(replacements) {
        out.push_str(&text[at..r.start]);
        out.push_str(rep);
        at = r.end;
    }
    out.push_str(&text[at..]);
    out
}

/// Visible text of an HTML fragment: tags dropped, line breaks kept,
/// common entities decoded, runs of spaces collapsed.
pub fn visible_text(fragment: &str) -> String {
    let mut raw = String::new();
    let mut rest = fragment;
    while let Some(lt) = rest.find('<') {
        raw.push_str(&rest[..lt]);
        let Some(gt) = rest[lt..].find('>') else {
            rest = "";
            break;
        };
        let tag = rest[lt + 1..lt + gt].trim().to_ascii_lowercase();
        let name = tag.trim_start_matches('/').split(|c: char| c.is_whitespace() || c == '/').next().unwrap_or("");
        if matches!(name, "br" | "p" | "div" | "li" | "tr") && (name == "br" || tag.starts_with('/')) {
            raw.push('\n');
        }
        rest = &rest[lt + gt + 1..];
    }
    raw.push_str(rest);
    let decoded = raw
        .replace("&nbsp;", " ")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&");
    decoded
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
        .trim_matches('\n')
        .to_string()
}
