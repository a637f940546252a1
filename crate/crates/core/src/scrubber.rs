//! Sensitive-span detection for automatic binding.
//!
//! Offsets are Unicode scalar value indices, end exclusive. When candidates
//! overlap, the longest wins, then the leftmost.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    CreditCard,
    Ssn,
    EmailAddress,
    Phone,
    CustomRegex,
}

impl Category {
    pub const BUILT_IN: [Category; 4] = [
        Category::CreditCard,
        Category::Ssn,
        Category::EmailAddress,
        Category::Phone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::CreditCard => "credit-card",
            Category::Ssn => "ssn",
            Category::EmailAddress => "email-address",
            Category::Phone => "phone",
            Category::CustomRegex => "custom-regex",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveSpan {
    pub start: usize,
    pub end: usize,
    pub category: Category,
    pub matched_text: String,
}

/// Which categories to look for. Custom patterns report as [`Category::CustomRegex`].
#[derive(Clone, Debug, Default)]
pub struct DetectOptions {
    pub categories: Vec<Category>,
    pub custom: Vec<Regex>,
}

impl DetectOptions {
    pub fn all_built_in() -> Self {
        DetectOptions {
            categories: Category::BUILT_IN.to_vec(),
            custom: Vec::new(),
        }
    }

    fn wants(&self, c: Category) -> bool {
        self.categories.contains(&c)
    }
}

/// Luhn mod-10 checksum over ASCII digits; non-digits are ignored.
pub fn luhn_valid(number: &str) -> bool {
    let digits: Vec<u32> = number.chars().filter_map(|c| c.to_digit(10)).collect();
    if digits.is_empty() {
        return false;
    }
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &d)| {
            if i % 2 == 1 {
                let doubled = d * 2;
                if doubled > 9 {
                    doubled - 9
                } else {
                    doubled
                }
            } else {
                d
            }
        })
        .sum();
    sum % 10 == 0
}

static DIGIT_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[0-9]+").unwrap());
static SSN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([0-9]{3})-([0-9]{2})-([0-9]{4})").unwrap());
static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}").unwrap()
});
static PHONE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\+1[ .-]?)?(?:\([2-9][0-9]{2}\) ?|[2-9][0-9]{2}[ .-])[2-9][0-9]{2}[ .-][0-9]{4}")
        .unwrap()
});

/// Byte-range candidate before overlap resolution.
#[derive(Clone, Debug)]
struct Candidate {
    start: usize,
    end: usize,
    chars: usize,
    category: Category,
}

fn byte_before(text: &str, i: usize) -> Option<u8> {
    i.checked_sub(1).map(|j| text.as_bytes()[j])
}

fn byte_at(text: &str, i: usize) -> Option<u8> {
    text.as_bytes().get(i).copied()
}

/// Card numbers: runs of digit groups joined by single spaces or dashes.
/// Every contiguous sub-run of whole groups with 13–19 digits passing Luhn
/// is a candidate, so a digit is never split off from its group.
fn card_candidates(text: &str, out: &mut Vec<Candidate>) {
    let groups: Vec<(usize, usize)> = DIGIT_RUN.find_iter(text).map(|m| (m.start(), m.end())).collect();
    let mut chain_start = 0;
    for i in 0..=groups.len() {
        let joined = i > 0
            && i < groups.len()
            && groups[i].0 == groups[i - 1].1 + 1
            && matches!(text.as_bytes()[groups[i - 1].1], b' ' | b'-');
        if i == groups.len() || (i > 0 && !joined) {
            chain(text, &groups[chain_start..i], out);
            chain_start = i;
        }
    }
}

fn chain(text: &str, groups: &[(usize, usize)], out: &mut Vec<Candidate>) {
    for a in 0..groups.len() {
        let mut digits = 0;
        for b in a..groups.len() {
            digits += groups[b].1 - groups[b].0;
            if digits > 19 {
                break;
            }
            if digits >= 13 {
                let (start, end) = (groups[a].0, groups[b].1);
                let slice = &text[start..end];
                if luhn_valid(slice) {
                    out.push(Candidate {
                        start,
                        end,
                        chars: slice.chars().count(),
                        category: Category::CreditCard,
                    });
                }
            }
        }
    }
}

fn ssn_candidates(text: &str, out: &mut Vec<Candidate>) {
    let isolated = |b: Option<u8>| !matches!(b, Some(b'0'..=b'9' | b'-'));
    for caps in SSN.captures_iter(text) {
        let m = caps.get(0).unwrap();
        if !isolated(byte_before(text, m.start())) || !isolated(byte_at(text, m.end())) {
            continue;
        }
        let area = &caps[1];
        if area == "000" || area == "666" || area.starts_with('9') || &caps[2] == "00" || &caps[3] == "0000" {
            continue;
        }
        out.push(Candidate {
            start: m.start(),
            end: m.end(),
            chars: m.len(),
            category: Category::Ssn,
        });
    }
}

fn regex_candidates(text: &str, re: &Regex, category: Category, out: &mut Vec<Candidate>) {
    for m in re.find_iter(text) {
        if m.is_empty() {
            continue;
        }
        out.push(Candidate {
            start: m.start(),
            end: m.end(),
            chars: m.as_str().chars().count(),
            category,
        });
    }
}

fn phone_candidates(text: &str, out: &mut Vec<Candidate>) {
    let digit = |b: Option<u8>| b.is_some_and(|b| b.is_ascii_digit());
    for m in PHONE.find_iter(text) {
        if digit(byte_before(text, m.start())) || digit(byte_at(text, m.end())) {
            continue;
        }
        out.push(Candidate {
            start: m.start(),
            end: m.end(),
            chars: m.as_str().chars().count(),
            category: Category::Phone,
        });
    }
}

pub fn detect(text: &str, options: &DetectOptions) -> Vec<SensitiveSpan> {
    let mut candidates = Vec::new();
    if options.wants(Category::CreditCard) {
        card_candidates(text, &mut candidates);
    }
    if options.wants(Category::Ssn) {
        ssn_candidates(text, &mut candidates);
    }
    if options.wants(Category::EmailAddress) {
        regex_candidates(text, &EMAIL, Category::EmailAddress, &mut candidates);
    }
    if options.wants(Category::Phone) {
        phone_candidates(text, &mut candidates);
    }
    for re in &options.custom {
        regex_candidates(text, re, Category::CustomRegex, &mut candidates);
    }

    candidates.sort_by(|a, b| b.chars.cmp(&a.chars).then(a.start.cmp(&b.start)));
    let mut chosen: Vec<Candidate> = Vec::new();
    for c in candidates {
        if chosen.iter().all(|k| c.end <= k.start || c.start >= k.end) {
            chosen.push(c);
        }
    }
    chosen.sort_by_key(|c| c.start);

    let char_index = CharIndex::new(text);
    chosen
        .into_iter()
        .map(|c| SensitiveSpan {
            start: char_index.of(c.start),
            end: char_index.of(c.end),
            category: c.category,
            matched_text: text[c.start..c.end].to_string(),
        })
        .collect()
}

/// Byte offset → scalar-value index.
struct CharIndex(Vec<usize>);

impl CharIndex {
    fn new(text: &str) -> Self {
        CharIndex(text.char_indices().map(|(i, _)| i).collect())
    }

    fn of(&self, byte: usize) -> usize {
        self.0.partition_point(|&b| b < byte)
    }
}

/// Replaces each span with `⟨category⟩`. Spans are applied in start order;
/// any that overlap an earlier one or fall outside the text are skipped.
pub fn redact_preview(text: &str, spans: &[SensitiveSpan]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut ordered: Vec<&SensitiveSpan> = spans.iter().collect();
    ordered.sort_by_key(|s| (s.start, s.end));
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in ordered {
        if span.start < cursor || span.start >= span.end || span.end > chars.len() {
            continue;
        }
        out.extend(&chars[cursor..span.start]);
        out.push('⟨');
        out.push_str(span.category.name());
        out.push('⟩');
        cursor = span.end;
    }
    out.extend(&chars[cursor..]);
    out
}
