use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use latebind_core::renderer::DEFAULT_BLUR_MAX_RADIUS;
use latebind_core::store::DEFAULT_REVISION_CAP;
use url::Url;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_KT_INTERVAL: Duration = Duration::from_secs(3 * 60 * 60);
pub const DEFAULT_REFRESH_FLOOR: Duration = Duration::from_secs(60);

#[derive(Debug, thiserror::Error)]
#[error("invalid base URL {input:?}: {reason}")]
pub struct BaseUrlError {
    input: String,
    reason: String,
}

/// Parses the public base URL snippets point at. Must be absolute http(s)
/// without query or fragment; a trailing slash is dropped.
pub fn parse_base_url(input: &str) -> Result<Url, BaseUrlError> {
    let fail = |reason: &str| BaseUrlError {
        input: input.to_string(),
        reason: reason.to_string(),
    };
    let url = Url::parse(input).map_err(|e| fail(&e.to_string()))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(fail("scheme must be http or https"));
    }
    if url.host_str().is_none_or(str::is_empty) {
        return Err(fail("missing host"));
    }
    if url.query().is_some() || url.fragment().is_some() {
        return Err(fail("query and fragment are not allowed"));
    }
    let mut url = url;
    let trimmed = url.path().trim_end_matches('/').to_string();
    url.set_path(&trimmed);
    Ok(url)
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub base_url: Url,
    pub data_dir: PathBuf,
    /// Replaces the bundled DejaVu Sans when set.
    pub font_path: Option<PathBuf>,
    pub blur_max_radius: f32,
    pub kt_interval: Duration,
    pub revision_cap: usize,
    pub refresh_floor: Duration,
    /// Longest the scheduler sleeps between checks.
    pub scheduler_poll: Duration,
    /// Enables the local-file snapshot provider, confined to this directory.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        let bind: SocketAddr = DEFAULT_BIND.parse().expect("valid default address");
        ServerConfig {
            bind,
            base_url: parse_base_url(&format!("http://{bind}")).expect("valid default URL"),
            data_dir: PathBuf::from("latebind-data"),
            font_path: None,
            blur_max_radius: DEFAULT_BLUR_MAX_RADIUS,
            kt_interval: DEFAULT_KT_INTERVAL,
            revision_cap: DEFAULT_REVISION_CAP,
            refresh_floor: DEFAULT_REFRESH_FLOOR,
            scheduler_poll: Duration::from_secs(1),
            snapshot_dir: None,
        }
    }
}
