//! Outbound fetching for bindings: JSON endpoints and snapshot providers.

use std::collections::HashMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::pin::Pin;
use std::sync::Arc;
use std::time::Duration;

use image::RgbaImage;
use latebind_core::renderer::Canvas;
use latebind_core::CropRect;
use serde_json::Value;

pub const FETCH_TIMEOUT: Duration = Duration::from_secs(10);
pub const USER_AGENT: &str = concat!("latebind/", env!("CARGO_PKG_VERSION"));
/// Largest response body accepted from any source.
pub const MAX_SOURCE_BYTES: usize = 16 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("network: {0}")]
    Network(String),
    #[error("decode: {0}")]
    Decode(String),
    #[error("provider: {0}")]
    Provider(String),
}

pub type BoxFuture<'a, T> = Pin<Box<dyn Future<Output = T> + Send + 'a>>;

/// Produces a raster of a source URL.
pub trait SnapshotProvider: Send + Sync {
    fn name(&self) -> &str;
    fn capture<'a>(&'a self, url: &'a str) -> BoxFuture<'a, Result<RgbaImage, SourceError>>;
}

async fn get_bytes(client: &reqwest::Client, url: &str) -> Result<Vec<u8>, SourceError> {
    let net = |e: reqwest::Error| SourceError::Network(e.without_url().to_string());
    let mut resp = client.get(url).send().await.map_err(net)?;
    if !resp.status().is_success() {
        return Err(SourceError::Network(format!("HTTP {}", resp.status())));
    }
    let mut body = Vec::new();
    while let Some(chunk) = resp.chunk().await.map_err(net)? {
        body.extend_from_slice(&chunk);
        if body.len() > MAX_SOURCE_BYTES {
            return Err(SourceError::Network("response too large".into()));
        }
    }
    Ok(body)
}

/// Treats the source URL as an image and downloads it.
pub struct RemoteImageProvider {
    client: reqwest::Client,
}

impl SnapshotProvider for RemoteImageProvider {
    fn name(&self) -> &str {
        "remote-image"
    }

    fn capture<'a>(&'a self, url: &'a str) -> BoxFuture<'a, Result<RgbaImage, SourceError>> {
        Box::pin(async move {
            let bytes = get_bytes(&self.client, url).await?;
            image::load_from_memory(&bytes)
                .map(|i| i.to_rgba8())
                .map_err(|e| SourceError::Decode(e.to_string()))
        })
    }
}

/// Reads image files under one directory. `url` is a `file://` URL or a
/// path relative to the root.
pub struct LocalFileProvider {
    root: PathBuf,
}

impl LocalFileProvider {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        LocalFileProvider { root: root.into() }
    }

    fn resolve(&self, url: &str) -> Result<PathBuf, SourceError> {
        let denied = || SourceError::Provider(format!("{url} is outside the snapshot directory"));
        let raw = match url::Url::parse(url) {
            Ok(u) if u.scheme() == "file" => u
                .to_file_path()
                .map_err(|_| SourceError::Provider(format!("bad file URL {url}")))?,
            _ => self.root.join(url),
        };
        let root = self
            .root
            .canonicalize()
            .map_err(|e| SourceError::Provider(e.to_string()))?;
        let path = raw
            .canonicalize()
            .map_err(|e| SourceError::Provider(format!("{}: {e}", raw.display())))?;
        if !path.starts_with(&root) {
            return Err(denied());
        }
        Ok(path)
    }
}

impl SnapshotProvider for LocalFileProvider {
    fn name(&self) -> &str {
        "local-file"
    }

    fn capture<'a>(&'a self, url: &'a str) -> BoxFuture<'a, Result<RgbaImage, SourceError>> {
        Box::pin(async move {
            let path = self.resolve(url)?;
            let read = move |p: &Path| image::open(p).map(|i| i.to_rgba8());
            tokio::task::spawn_blocking(move || read(&path))
                .await
                .map_err(|e| SourceError::Provider(e.to_string()))?
                .map_err(|e| SourceError::Decode(e.to_string()))
        })
    }
}

/// Everything the refresh engine pulls data from.
pub struct Sources {
    client: reqwest::Client,
    providers: HashMap<String, Arc<dyn SnapshotProvider>>,
}

impl Sources {
    pub fn new(snapshot_dir: Option<PathBuf>) -> Self {
        let client = reqwest::Client::builder()
            .timeout(FETCH_TIMEOUT)
            .user_agent(USER_AGENT)
            .build()
            .expect("HTTP client configuration is static");
        let mut sources = Sources {
            client: client.clone(),
            providers: HashMap::new(),
        };
        sources.register(Arc::new(RemoteImageProvider { client }));
        if let Some(dir) = snapshot_dir {
            sources.register(Arc::new(LocalFileProvider::new(dir)));
        }
        sources
    }

    pub fn register(&mut self, provider: Arc<dyn SnapshotProvider>) {
        self.providers.insert(provider.name().to_string(), provider);
    }

    pub fn has_provider(&self, name: &str) -> bool {
        self.providers.contains_key(name)
    }

    pub async fn fetch_json(&self, url: &str) -> Result<Value, SourceError> {
        let bytes = get_bytes(&self.client, url).await?;
        serde_json::from_slice(&bytes).map_err(|e| SourceError::Decode(e.to_string()))
    }

    pub async fn snapshot(
        &self,
        provider: &str,
        url: &str,
        crop: Option<CropRect>,
    ) -> Result<Canvas, SourceError> {
        let p = self
            .providers
            .get(provider)
            .ok_or_else(|| SourceError::Provider(format!("unknown provider {provider:?}")))?;
        let img = p.capture(url).await?;
        crop_to_canvas(&img, crop)
    }
}

/// Crops `img` to `rect` (or keeps it whole) and converts it to a canvas.
pub fn crop_to_canvas(img: &RgbaImage, rect: Option<CropRect>) -> Result<Canvas, SourceError> {
    let rect = rect.unwrap_or(CropRect {
        x: 0,
        y: 0,
        width: img.width(),
        height: img.height(),
    });
    let fits = rect.width > 0
        && rect.height > 0
        && u64::from(rect.x) + u64::from(rect.width) <= u64::from(img.width())
        && u64::from(rect.y) + u64::from(rect.height) <= u64::from(img.height());
    if !fits {
        return Err(SourceError::Provider(format!(
            "crop {}x{}+{}+{} is outside the {}x{} snapshot",
            rect.width,
            rect.height,
            rect.x,
            rect.y,
            img.width(),
            img.height()
        )));
    }
    let view = image::imageops::crop_imm(img, rect.x, rect.y, rect.width, rect.height).to_image();
    Ok(Canvas {
        width: view.width(),
        height: view.height(),
        pixels: view.pixels().map(|p| p.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_checks_bounds() {
        let img = RgbaImage::from_fn(10, 6, |x, y| image::Rgba([x as u8, y as u8, 0, 255]));
        let c = crop_to_canvas(&img, Some(CropRect { x: 2, y: 1, width: 3, height: 4 })).unwrap();
        assert_eq!((c.width, c.height), (3, 4));
        assert_eq!(c.get(0, 0), [2, 1, 0, 255]);
        assert!(crop_to_canvas(&img, Some(CropRect { x: 8, y: 0, width: 3, height: 1 })).is_err());
        assert_eq!(crop_to_canvas(&img, None).unwrap().pixels.len(), 60);
    }

    #[test]
    fn local_provider_stays_in_root() {
        let dir = tempfile::tempdir().unwrap();
        let inner = dir.path().join("shots");
        std::fs::create_dir(&inner).unwrap();
        std::fs::write(dir.path().join("secret.png"), b"x").unwrap();
        std::fs::write(inner.join("a.png"), b"x").unwrap();
        let p = LocalFileProvider::new(&inner);
        assert!(p.resolve("a.png").is_ok());
        assert!(p.resolve("../secret.png").is_err());
        let url = url::Url::from_file_path(dir.path().join("secret.png")).unwrap();
        assert!(p.resolve(url.as_str()).is_err());
    }
}
