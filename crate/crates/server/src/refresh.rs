//! Single refresh steps: pull a binding's source, re-render, commit on change.

use std::fmt;

use latebind_core::{
    evaluate, fraction_elapsed, BindingId, BindingSource, ContentId, ContentKind, ContentStatus,
    Extracted, NotificationKind, RenderSpec, RenderedImage, StoreError,
};
use latebind_core::store::ContentTxn;
use serde::Serialize;

use crate::sources::SourceError;
use crate::state::AppState;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "message", rename_all = "kebab-case")]
pub enum RefreshFailure {
    Network(String),
    Extract(String),
    Render(String),
    Provider(String),
    NotLive(ContentStatus),
}

impl fmt::Display for RefreshFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefreshFailure::Network(m) => write!(f, "network: {m}"),
            RefreshFailure::Extract(m) => write!(f, "extract: {m}"),
            RefreshFailure::Render(m) => write!(f, "render: {m}"),
            RefreshFailure::Provider(m) => write!(f, "provider: {m}"),
            RefreshFailure::NotLive(s) => write!(f, "content is {s}"),
        }
    }
}

impl From<SourceError> for RefreshFailure {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::Network(m) => RefreshFailure::Network(m),
            SourceError::Decode(m) => RefreshFailure::Extract(m),
            SourceError::Provider(m) => RefreshFailure::Provider(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum RefreshOutcome {
    Updated { revision: u64 },
    Unchanged,
    Failed { reason: RefreshFailure },
}

/// A source resolved into the images of a candidate revision.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// Rendered text, used for change detection. `None` for snapshots.
    pub source: Option<String>,
    pub images: Vec<RenderedImage>,
}

fn chart_summary(values: &[f64], labels: &[String]) -> String {
    labels
        .iter()
        .zip(values)
        .map(|(l, v)| format!("{l}: {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, RefreshFailure> + Send + 'static,
) -> Result<T, RefreshFailure> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| RefreshFailure::Render(e.to_string()))?
}

/// Fetches `source` and renders what it currently says.
pub async fn resolve(
    state: &AppState,
    source: &BindingSource,
    spec: &RenderSpec,
) -> Result<Resolved, RefreshFailure> {
    let spec = spec.clone();
    let render_err = |e: latebind_core::RenderError| RefreshFailure::Render(e.to_string());
    match source {
        BindingSource::HttpJson { url, .. } | BindingSource::HttpChart { url, .. } => {
            let doc = state.sources.fetch_json(url).await?;
            let extracted = source
                .extract(&doc)
                .map_err(|e| RefreshFailure::Extract(e.to_string()))?;
            let st = state.clone();
            blocking(move || match extracted {
                Extracted::Text(text) => {
                    let images = st.renderer.render_static(&text, &spec).map_err(render_err)?.images;
                    Ok(Resolved {
                        source: Some(text),
                        images,
                    })
                }
                Extracted::Chart { values, labels } => {
                    let image = st
                        .renderer
                        .render_bar_chart(&values, &labels, &spec)
                        .map_err(render_err)?;
                    Ok(Resolved {
                        source: Some(chart_summary(&values, &labels)),
                        images: vec![image],
                    })
                }
            })
            .await
        }
        BindingSource::Snapshot { provider, url, crop } => {
            let canvas = state.sources.snapshot(provider, url, *crop).await?;
            let st = state.clone();
            blocking(move || {
                let image = st.renderer.fit_raster(&canvas, &spec).map_err(render_err)?;
                Ok(Resolved {
                    source: None,
                    images: vec![image],
                })
            })
            .await
        }
    }
}

fn same_as_latest(txn: &ContentTxn<'_>, images: &[RenderedImage]) -> Result<bool, StoreError> {
    let Some(latest) = txn.content().latest() else {
        return Ok(false);
    };
    if latest.notification.is_some() || latest.assets.len() != images.len() {
        return Ok(false);
    }
    for img in images {
        if txn.latest_asset(img.segment_index)?.payload != img.payload {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Commits `resolved` unless the content already shows it.
pub fn commit_if_changed(
    state: &AppState,
    content_id: &ContentId,
    resolved: Resolved,
) -> Result<RefreshOutcome, StoreError> {
    let now = state.now();
    state.store.with_content_mut(content_id, |txn| {
        let status = txn.content().status;
        if status != ContentStatus::Live {
            return Ok(RefreshOutcome::Failed {
                reason: RefreshFailure::NotLive(status),
            });
        }
        let unchanged = match &resolved.source {
            Some(text) => txn.content().latest_source() == Some(text.as_str()),
            None => same_as_latest(txn, &resolved.images)?,
        };
        if unchanged {
            return Ok(RefreshOutcome::Unchanged);
        }
        let revision = txn.put_revision(resolved.source, resolved.images, now)?;
        Ok(RefreshOutcome::Updated { revision })
    })
}

/// Pulls one binding's source and commits a revision if the output changed.
/// Source failures are recorded on the binding; the content keeps serving
/// its last good revision.
pub async fn refresh_once(state: &AppState, binding_id: &BindingId) -> Result<RefreshOutcome, StoreError> {
    let binding = state.store.binding(binding_id).ok_or(StoreError::NotFound)?;
    let (status, spec) = state
        .store
        .with_content(&binding.content_id, |c| Ok((c.status, c.spec.clone())))?;
    if status != ContentStatus::Live {
        return Ok(RefreshOutcome::Failed {
            reason: RefreshFailure::NotLive(status),
        });
    }
    let now = state.now();
    let outcome = match resolve(state, &binding.source, &spec).await {
        Err(reason) => RefreshOutcome::Failed { reason },
        Ok(resolved) => {
            let st = state.clone();
            let id = binding.content_id.clone();
            tokio::task::spawn_blocking(move || commit_if_changed(&st, &id, resolved))
                .await
                .map_err(|e| StoreError::Io(std::io::Error::other(e)))??
        }
    };
    let last_error = match &outcome {
        RefreshOutcome::Failed { reason } => {
            log::warn!("binding {binding_id}: {reason}");
            Some(reason.to_string())
        }
        _ => None,
    };
    match state.store.update_binding(binding_id, |b| {
        b.last_refreshed_at = Some(now);
        b.last_error = last_error;
    }) {
        Ok(_) | Err(StoreError::NotFound) => Ok(outcome),
        Err(e) => Err(e),
    }
}

/// Re-renders a kinetic self-destruct animation for the current
/// `fraction_elapsed`, expiring the content if a deadline has passed.
pub fn regenerate_blur(state: &AppState, content_id: &ContentId) -> Result<RefreshOutcome, StoreError> {
    let now = state.now();
    state.store.with_content_mut(content_id, |txn| {
        let c = txn.content();
        if c.status != ContentStatus::Live || !c.kt_enabled || c.kind != ContentKind::SelfDestruct {
            return Ok(RefreshOutcome::Unchanged);
        }
        if evaluate(&c.policy, &c.view_state, now).is_expired() {
            txn.replace_with_notification(&state.renderer, NotificationKind::Expired, now)?;
            let revision = txn.content().revision_count;
            return Ok(RefreshOutcome::Updated { revision });
        }
        let Some(text) = c.latest_source().map(str::to_string) else {
            return Ok(RefreshOutcome::Unchanged);
        };
        let fraction = fraction_elapsed(&c.policy, &c.view_state, c.created_at, now);
        let images = state.renderer.render_blur_animation(&text, &c.spec, fraction)?;
        if same_as_latest(txn, &images)? {
            return Ok(RefreshOutcome::Unchanged);
        }
        let revision = txn.put_revision(Some(text), images, now)?;
        Ok(RefreshOutcome::Updated { revision })
    })
}

/// Expires live content whose time-based deadline has passed. Returns true
/// if this call expired it.
pub fn expire_if_due(state: &AppState, content_id: &ContentId) -> Result<bool, StoreError> {
    let now = state.now();
    state.store.with_content_mut(content_id, |txn| {
        let c = txn.content();
        if c.status == ContentStatus::Live && evaluate(&c.policy, &c.view_state, now).is_expired() {
            txn.replace_with_notification(&state.renderer, NotificationKind::Expired, now)
        } else {
            Ok(false)
        }
    })
}
