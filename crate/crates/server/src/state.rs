use std::fs;
use std::ops::Deref;
use std::sync::Arc;

use latebind_core::renderer::Typeface;
use latebind_core::{Clock, Renderer, Store, StoreError, Timestamp, TokenAuthority};
use tokio::sync::Notify;

use crate::config::ServerConfig;
use crate::sources::Sources;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("data directory {path}: {source}")]
    DataDir {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("font: {0}")]
    Font(#[from] latebind_core::RenderError),
}

pub struct Inner {
    pub config: ServerConfig,
    pub store: Store,
    pub renderer: Renderer,
    pub authority: TokenAuthority,
    pub clock: Arc<dyn Clock>,
    pub sources: Sources,
    /// Pokes the scheduler when bindings change.
    pub wake: Notify,
}

/// Cheaply cloneable handle shared by request handlers and the scheduler.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl Deref for AppState {
    type Target = Inner;

    fn deref(&self) -> &Inner {
        &self.0
    }
}

impl AppState {
    pub fn new(config: ServerConfig, clock: Arc<dyn Clock>) -> Result<Self, StartupError> {
        let sources = Sources::new(config.snapshot_dir.clone());
        Self::with_sources(config, clock, sources)
    }

    pub fn with_sources(
        config: ServerConfig,
        clock: Arc<dyn Clock>,
        sources: Sources,
    ) -> Result<Self, StartupError> {
        fs::create_dir_all(&config.data_dir).map_err(|source| StartupError::DataDir {
            path: config.data_dir.clone(),
            source,
        })?;
        let store = Store::open_with_cap(&config.data_dir, config.revision_cap)?;
        let typeface = match &config.font_path {
            Some(path) => Typeface::from_file(path)?,
            None => Typeface::bundled(),
        };
        let renderer = Renderer::new(typeface).with_blur_max_radius(config.blur_max_radius);
        let authority = TokenAuthority::new(store.salt());
        Ok(AppState(Arc::new(Inner {
            config,
            store,
            renderer,
            authority,
            clock,
            sources,
            wake: Notify::new(),
        })))
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }
}
