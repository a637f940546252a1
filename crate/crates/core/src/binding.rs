//! Data-source bindings for dashboards and web references.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::Timestamp;
use crate::extract::{format_value, ExtractError, JsonPath, Template};
use crate::store::{random_base32, ContentId};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BindingId(String);

impl BindingId {
    pub fn generate() -> Self {
        BindingId(random_base32(10))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BindingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BindingSource {
    /// Fetch JSON, extract one value, substitute it into a text template.
    HttpJson {
        url: String,
        path: String,
        template: String,
    },
    /// Fetch JSON, extract parallel arrays of numbers and labels, draw a bar chart.
    HttpChart {
        url: String,
        values_path: String,
        labels_path: String,
    },
    /// Ask a named snapshot provider for a raster of `url`, optionally cropped.
    Snapshot {
        provider: String,
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        crop: Option<CropRect>,
    },
}

/// What a JSON source resolved to.
#[derive(Clone, Debug, PartialEq)]
pub enum Extracted {
    Text(String),
    Chart { values: Vec<f64>, labels: Vec<String> },
}

impl BindingSource {
    pub fn url(&self) -> &str {
        match self {
            BindingSource::HttpJson { url, .. }
            | BindingSource::HttpChart { url, .. }
            | BindingSource::Snapshot { url, .. } => url,
        }
    }

    /// Checks that paths and templates parse.
    pub fn validate(&self) -> Result<(), ExtractError> {
        match self {
            BindingSource::HttpJson { path, template, .. } => {
                path.parse::<JsonPath>()?;
                template.parse::<Template>()?;
            }
            BindingSource::HttpChart {
                values_path,
                labels_path,
                ..
            } => {
                values_path.parse::<JsonPath>()?;
                labels_path.parse::<JsonPath>()?;
            }
            BindingSource::Snapshot { .. } => {}
        }
        Ok(())
    }

    /// Resolves a fetched JSON document. Snapshot sources have nothing to extract.
    pub fn extract(&self, doc: &Value) -> Result<Extracted, ExtractError> {
        match self {
            BindingSource::HttpJson { path, template, .. } => {
                let path: JsonPath = path.parse()?;
                let template: Template = template.parse()?;
                Ok(Extracted::Text(template.render(path.extract(doc)?)))
            }
            BindingSource::HttpChart {
                values_path,
                labels_path,
                ..
            } => {
                let vp: JsonPath = values_path.parse()?;
                let lp: JsonPath = labels_path.parse()?;
                let wrong = |path: &JsonPath, expected| ExtractError::WrongType {
                    path: path.to_string(),
                    expected,
                };
                let values = vp
                    .extract(doc)?
                    .as_array()
                    .ok_or_else(|| wrong(&vp, "an array"))?
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| wrong(&vp, "an array of numbers")))
                    .collect::<Result<Vec<_>, _>>()?;
                let labels = lp
                    .extract(doc)?
                    .as_array()
                    .ok_or_else(|| wrong(&lp, "an array"))?
                    .iter()
                    .map(format_value)
                    .collect();
                Ok(Extracted::Chart { values, labels })
            }
            BindingSource::Snapshot { .. } => Err(ExtractError::WrongType {
                path: String::new(),
                expected: "a JSON source",
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataBinding {
    pub binding_id: BindingId,
    pub content_id: ContentId,
    pub source: BindingSource,
    #[serde(with = "humantime_serde")]
    pub refresh_interval: Duration,
    #[serde(default)]
    pub last_refreshed_at: Option<Timestamp>,
    #[serde(default)]
    pub last_error: Option<String>,
}

impl DataBinding {
    pub fn new(content_id: ContentId, source: BindingSource, refresh_interval: Duration) -> Self {
        DataBinding {
            binding_id: BindingId::generate(),
            content_id,
            source,
            refresh_interval,
            last_refreshed_at: None,
            last_error: None,
        }
    }

    pub fn validate(&self, interval_floor: Duration) -> Result<(), String> {
        if self.refresh_interval < interval_floor {
            return Err(format!(
                "refresh interval {} is below the {} floor",
                humantime_serde::re::humantime::format_duration(self.refresh_interval),
                humantime_serde::re::humantime::format_duration(interval_floor)
            ));
        }
        self.source.validate().map_err(|e| e.to_string())
    }
}
