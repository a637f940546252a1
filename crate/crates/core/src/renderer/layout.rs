use serde::{Deserialize, Serialize};

/// How a planned line ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineEnd {
    /// Soft wrap inserted by the layout.
    Wrap,
    /// A `'\n'` from the source text.
    Newline,
    /// End of input.
    End,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedLine {
    pub segment_index: usize,
    /// Line content, including trailing whitespace at a soft wrap.
    pub text: String,
    pub end: LineEnd,
}

/// Deterministic record of how text was broken into lines and image segments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderPlan {
    pub lines: Vec<PlannedLine>,
    pub segment_count: usize,
    pub line_height: u32,
}

impl RenderPlan {
    /// Re-joins lines, restoring newlines, yielding the original text.
    pub fn reconstruct(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line.text);
            if line.end == LineEnd::Newline {
                out.push('\n');
            }
        }
        out
    }

    pub fn segment(&self, index: usize) -> Vec<&str> {
        self.lines
            .iter()
            .filter(|l| l.segment_index == index)
            .map(|l| l.text.as_str())
            .collect()
    }

    pub fn segments(&self) -> Vec<Vec<&str>> {
        (0..self.segment_count).map(|i| self.segment(i)).collect()
    }
}

/// Splits `s` into (word, trailing whitespace) pairs. Leading whitespace
/// appears as a pair with an empty word.
fn tokens(s: &str) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    let mut rest = s;
    while !rest.is_empty() {
        let word_end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let after = &rest[word_end..];
        let ws_len = after
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(after.len());
        out.push((&rest[..word_end], &after[..ws_len]));
        rest = &after[ws_len..];
    }
    out
}

/// Greedy line wrap. Breaks only at whitespace unless a single word is
/// wider than `max_width`, which is broken between characters. Trailing
/// whitespace never forces a break and is not counted toward the fit.
pub fn wrap_lines(
    text: &str,
    max_width: f32,
    advance: impl Fn(char) -> f32,
) -> Vec<(String, LineEnd)> {
    let measure = |s: &str| s.chars().fold(0.0f32, |acc, c| acc + advance(c));
    let paragraphs: Vec<&str> = text.split('\n').collect();
    let last = paragraphs.len() - 1;
    let mut out = Vec::new();

    for (pi, para) in paragraphs.into_iter().enumerate() {
        let mut line = String::new();
        let mut pen = 0.0f32;
        for (word, ws) in tokens(para) {
            let word_width = measure(word);
            if !line.is_empty() && pen + word_width > max_width {
                out.push((std::mem::take(&mut line), LineEnd::Wrap));
                pen = 0.0;
            }
            if line.is_empty() && word_width > max_width {
                for ch in word.chars() {
                    let a = advance(ch);
                    if !line.is_empty() && pen + a > max_width {
                        out.push((std::mem::take(&mut line), LineEnd::Wrap));
                        pen = 0.0;
                    }
                    line.push(ch);
                    pen += a;
                }
            } else {
                line.push_str(word);
                pen += word_width;
            }
            line.push_str(ws);
            pen += measure(ws);
        }
        let end = if pi == last { LineEnd::End } else { LineEnd::Newline };
        out.push((line, end));
    }
    out
}

/// Assigns wrapped lines to segments, filling each greedily up to `max_height`.
pub fn assign_segments(
    wrapped: Vec<(String, LineEnd)>,
    line_height: u32,
    max_height: u32,
) -> RenderPlan {
    let per_segment = lines_per_segment(line_height, max_height);
    let lines: Vec<PlannedLine> = wrapped
        .into_iter()
        .enumerate()
        .map(|(i, (text, end))| PlannedLine {
            segment_index: i / per_segment,
            text,
            end,
        })
        .collect();
    let segment_count = lines.last().map_or(1, |l| l.segment_index + 1);
    RenderPlan {
        lines,
        segment_count,
        line_height,
    }
}

pub fn lines_per_segment(line_height: u32, max_height: u32) -> usize {
    ((max_height / line_height.max(1)) as usize).max(1)
}
