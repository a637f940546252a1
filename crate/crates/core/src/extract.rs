//! A minimal path language over JSON documents and a `{value}` template.
//!
//! Paths are dotted keys with bracketed indices, e.g. `report.kwh[0]` or
//! `$.items[2]["display name"]`. Templates substitute the extracted value for
//! every `{value}`; `{{` and `}}` are literal braces.

use std::fmt;
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("path syntax error at {position}: {message}")]
    PathSyntax { position: usize, message: String },
    #[error("template syntax error at {position}: {message}")]
    TemplateSyntax { position: usize, message: String },
    #[error("nothing at path {0}")]
    Missing(String),
    #[error("value at {path} is not {expected}")]
    WrongType { path: String, expected: &'static str },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathSegment {
    Key(String),
    Index(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JsonPath {
    source: String,
    segments: Vec<PathSegment>,
}

impl JsonPath {
    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn get<'a>(&self, doc: &'a Value) -> Option<&'a Value> {
        self.segments.iter().try_fold(doc, |v, seg| match seg {
            PathSegment::Key(k) => v.as_object()?.get(k),
            PathSegment::Index(i) => v.as_array()?.get(*i),
        })
    }

    pub fn extract<'a>(&self, doc: &'a Value) -> Result<&'a Value, ExtractError> {
        self.get(doc).ok_or_else(|| ExtractError::Missing(self.source.clone()))
    }
}

impl fmt::Display for JsonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for JsonPath {
    type Err = ExtractError;

    fn from_str(src: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = src.chars().collect();
        let err = |position: usize, message: &str| ExtractError::PathSyntax {
            position,
            message: message.to_string(),
        };
        let mut segments = Vec::new();
        let mut i = 0;
        if chars.first() == Some(&'$') {
            i = 1;
            if chars.get(1) == Some(&'.') {
                i = 2;
                if chars.len() == 2 {
                    return Err(err(2, "expected a key after '.'"));
                }
            }
        }
        let mut expect_key = i == 0 || chars.get(i - 1) == Some(&'.');
        while i < chars.len() {
            match chars[i] {
                '[' => {
                    i += 1;
                    if chars.get(i) == Some(&'"') {
                        i += 1;
                        let mut key = String::new();
                        loop {
                            match chars.get(i) {
                                None => return Err(err(i, "unterminated string")),
                                Some('\\') => {
                                    let c = chars.get(i + 1).ok_or_else(|| err(i, "dangling escape"))?;
                                    key.push(*c);
                                    i += 2;
                                }
                                Some('"') => {
                                    i += 1;
                                    break;
                                }
                                Some(c) => {
                                    key.push(*c);
                                    i += 1;
                                }
                            }
                        }
                        segments.push(PathSegment::Key(key));
                    } else {
                        let start = i;
                        while chars.get(i).is_some_and(char::is_ascii_digit) {
                            i += 1;
                        }
                        if start == i {
                            return Err(err(i, "expected an index or a quoted key"));
                        }
                        let digits: String = chars[start..i].iter().collect();
                        let index = digits.parse().map_err(|_| err(start, "index too large"))?;
                        segments.push(PathSegment::Index(index));
                    }
                    if chars.get(i) != Some(&']') {
                        return Err(err(i, "expected ']'"));
                    }
                    i += 1;
                    expect_key = false;
                }
                '.' => {
                    if expect_key {
                        return Err(err(i, "empty key"));
                    }
                    i += 1;
                    expect_key = true;
                    if i == chars.len() {
                        return Err(err(i, "trailing '.'"));
                    }
                }
                ']' => return Err(err(i, "unexpected ']'")),
                _ => {
                    if !expect_key {
                        return Err(err(i, "expected '.' or '['"));
                    }
                    let start = i;
                    while i < chars.len() && !matches!(chars[i], '.' | '[' | ']') {
                        i += 1;
                    }
                    segments.push(PathSegment::Key(chars[start..i].iter().collect()));
                    expect_key = false;
                }
            }
        }
        if segments.is_empty() && !src.is_empty() && src != "$" {
            return Err(err(0, "empty path"));
        }
        Ok(JsonPath {
            source: src.to_string(),
            segments,
        })
    }
}

/// Text form of an extracted value: strings verbatim, everything else as compact JSON.
pub fn format_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Part {
    Literal(String),
    Value,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    parts: Vec<Part>,
}

impl Template {
    pub fn render(&self, value: &Value) -> String {
        let text = format_value(value);
        self.parts
            .iter()
            .map(|p| match p {
                Part::Literal(s) => s.as_str(),
                Part::Value => text.as_str(),
            })
            .collect()
    }
}

impl FromStr for Template {
    type Err = ExtractError;

    fn from_str(src: &str) -> Result<Self, Self::Err> {
        const PLACEHOLDER: &str = "{value}";
        let mut parts = Vec::new();
        let mut literal = String::new();
        let mut rest = src;
        let mut offset = 0;
        while let Some(c) = rest.chars().next() {
            let step = if rest.starts_with("{{") {
                literal.push('{');
                2
            } else if rest.starts_with("}}") {
                literal.push('}');
                2
            } else if rest.starts_with(PLACEHOLDER) {
                if !literal.is_empty() {
                    parts.push(Part::Literal(std::mem::take(&mut literal)));
                }
                parts.push(Part::Value);
                PLACEHOLDER.len()
            } else if c == '{' || c == '}' {
                return Err(ExtractError::TemplateSyntax {
                    position: offset,
                    message: format!("unexpected '{c}' (only {PLACEHOLDER} is supported; use {{{{ or }}}} for braces)"),
                });
            } else {
                literal.push(c);
                c.len_utf8()
            };
            rest = &rest[step..];
            offset += step;
        }
        if !literal.is_empty() {
            parts.push(Part::Literal(literal));
        }
        Ok(Template { parts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn path(s: &str) -> JsonPath {
        s.parse().unwrap()
    }

    #[test]
    fn dotted_and_indexed_paths() {
        let doc = json!({"report": {"kwh": [23, 19]}, "a b": {"c.d": true}});
        assert_eq!(path("report.kwh[0]").get(&doc), Some(&json!(23)));
        assert_eq!(path("$.report.kwh[1]").get(&doc), Some(&json!(19)));
        assert_eq!(path(r#"["a b"]["c.d"]"#).get(&doc), Some(&json!(true)));
        assert_eq!(path("$").get(&doc), Some(&doc));
        assert_eq!(path("").get(&doc), Some(&doc));
        assert_eq!(path("report.kwh[2]").get(&doc), None);
        assert_eq!(path("report.missing").get(&doc), None);
        assert_eq!(path("report[0]").get(&doc), None);
    }

    #[test]
    fn top_level_array_index() {
        assert_eq!(path("[1]").get(&json!(["x", "y"])), Some(&json!("y")));
    }

    #[test]
    fn path_syntax_errors() {
        for bad in ["a..b", "a.", ".a", "a[", "a[x]", "a[1", "a]b", r#"a["x"#, "a[0]b", "$."] {
            assert!(
                matches!(bad.parse::<JsonPath>(), Err(ExtractError::PathSyntax { .. })),
                "{bad:?} should not parse"
            );
        }
    }

    #[test]
    fn quoted_key_escapes() {
        let doc = json!({"q\"k": 1});
        assert_eq!(path(r#"["q\"k"]"#).get(&doc), Some(&json!(1)));
    }

    #[test]
    fn missing_reports_the_path() {
        let err = path("a.b").extract(&json!({})).unwrap_err();
        assert_eq!(err, ExtractError::Missing("a.b".into()));
    }

    #[test]
    fn template_substitution() {
        let t: Template = "This week: {value} kWh".parse().unwrap();
        assert_eq!(t.render(&json!(23)), "This week: 23 kWh");
        assert_eq!(t.render(&json!("ok")), "This week: ok kWh");
        let t: Template = "{{{value}}} and {value}".parse().unwrap();
        assert_eq!(t.render(&json!(1.5)), "{1.5} and 1.5");
        let t: Template = "no placeholder".parse().unwrap();
        assert_eq!(t.render(&json!(1)), "no placeholder");
    }

    #[test]
    fn template_rejects_unknown_placeholders() {
        assert!("{other}".parse::<Template>().is_err());
        assert!("dangling {".parse::<Template>().is_err());
        assert!("é }".parse::<Template>().is_err());
    }

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(&json!(null)), "null");
        assert_eq!(format_value(&json!([1, 2])), "[1,2]");
        assert_eq!(format_value(&json!("s")), "s");
    }
}
