//! Self-destruct policies and view accounting.
//!
//! A policy expires content when ANY of its set conditions holds. Views are
//! counted per tokenless image download; a fetch carrying the owner's edit
//! token is a sender preview and leaves the state untouched.

use std::num::NonZeroU64;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::authz::{TokenAuthority, TokenCheck};
use crate::clock::{add_duration, Timestamp};
use crate::renderer::{NotificationKind, Renderer};
use crate::store::{BoundContent, ContentId, ContentKind, ContentStatus, ImageAsset, Store, StoreError};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecyclePolicy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absolute_expiry: Option<Timestamp>,
    #[serde(default, with = "humantime_serde", skip_serializing_if = "Option::is_none")]
    pub after_first_view: Option<Duration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_views: Option<NonZeroU64>,
}

impl LifecyclePolicy {
    pub fn never_expires(&self) -> bool {
        self.absolute_expiry.is_none() && self.after_first_view.is_none() && self.max_views.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewState {
    pub view_count: u64,
    pub first_viewed_at: Option<Timestamp>,
    pub last_viewed_at: Option<Timestamp>,
}

impl ViewState {
    pub fn record(&mut self, now: Timestamp) {
        self.view_count += 1;
        self.first_viewed_at.get_or_insert(now);
        // Clock skew must not break last ≥ first.
        let floor = self.first_viewed_at.unwrap_or(now);
        self.last_viewed_at = Some(now.max(floor));
    }

    pub fn is_consistent(&self) -> bool {
        let first_ok = self.first_viewed_at.is_some() == (self.view_count >= 1);
        let order_ok = match (self.first_viewed_at, self.last_viewed_at) {
            (Some(f), Some(l)) => l >= f,
            (None, None) => true,
            _ => false,
        };
        first_ok && order_ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpiryReason {
    AbsoluteExpiry,
    AfterFirstView,
    ViewLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum PolicyVerdict {
    Active,
    Expired(ExpiryReason),
}

impl PolicyVerdict {
    pub fn is_expired(self) -> bool {
        matches!(self, PolicyVerdict::Expired(_))
    }
}

/// Expired iff any set condition holds; the reported reason is the first
/// satisfied one in declaration order. Deadlines are inclusive.
pub fn evaluate(policy: &LifecyclePolicy, state: &ViewState, now: Timestamp) -> PolicyVerdict {
    if policy.absolute_expiry.is_some_and(|at| now >= at) {
        return PolicyVerdict::Expired(ExpiryReason::AbsoluteExpiry);
    }
    if let (Some(first), Some(after)) = (state.first_viewed_at, policy.after_first_view) {
        if now >= add_duration(first, after) {
            return PolicyVerdict::Expired(ExpiryReason::AfterFirstView);
        }
    }
    if policy.max_views.is_some_and(|max| state.view_count >= max.get()) {
        return PolicyVerdict::Expired(ExpiryReason::ViewLimit);
    }
    PolicyVerdict::Active
}

/// Progress toward expiry in [0, 1], the largest across set conditions.
/// Relative deadlines count from the first view, absolute ones from creation.
pub fn fraction_elapsed(
    policy: &LifecyclePolicy,
    state: &ViewState,
    created_at: Timestamp,
    now: Timestamp,
) -> f64 {
    let ratio = |elapsed_ms: i64, total_ms: i64| {
        if total_ms <= 0 {
            1.0
        } else {
            (elapsed_ms as f64 / total_ms as f64).clamp(0.0, 1.0)
        }
    };
    let mut fraction: f64 = 0.0;
    if let (Some(after), Some(first)) = (policy.after_first_view, state.first_viewed_at) {
        let total = i64::try_from(after.as_millis()).unwrap_or(i64::MAX);
        fraction = fraction.max(ratio((now - first).num_milliseconds(), total));
    }
    if let Some(at) = policy.absolute_expiry {
        fraction = fraction.max(ratio(
            (now - created_at).num_milliseconds(),
            (at - created_at).num_milliseconds(),
        ));
    }
    if let Some(max) = policy.max_views {
        fraction = fraction.max((state.view_count as f64 / max.get() as f64).min(1.0));
    }
    fraction
}

/// Outcome of one recorded image fetch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewOutcome {
    pub state: ViewState,
    /// True exactly once per continuous-edit content: on its first recipient view.
    pub revocation: bool,
    pub owner_preview: bool,
}

fn apply_view(
    content: &mut BoundContent,
    authority: &TokenAuthority,
    presented: Option<&str>,
    now: Timestamp,
) -> ViewOutcome {
    let owner = presented
        .map(|t| authority.check(content, t))
        .is_some_and(|c| matches!(c, TokenCheck::Authorized | TokenCheck::Revoked));
    if owner {
        return ViewOutcome {
            state: content.view_state.clone(),
            revocation: false,
            owner_preview: true,
        };
    }
    content.view_state.record(now);
    let revocation = content.kind == ContentKind::ContinuousEdit && TokenAuthority::revoke_in(content);
    ViewOutcome {
        state: content.view_state.clone(),
        revocation,
        owner_preview: false,
    }
}

/// Counts one fetch of `content_id` atomically.
pub fn record_view(
    store: &Store,
    authority: &TokenAuthority,
    content_id: &ContentId,
    presented: Option<&str>,
    now: Timestamp,
) -> Result<ViewOutcome, StoreError> {
    store.with_content_mut(content_id, |txn| {
        let outcome = apply_view(txn.content_mut(), authority, presented, now);
        txn.persist()?;
        Ok(outcome)
    })
}

/// Replaces every segment with a notification and purges the original.
/// Idempotent: content that is no longer live is returned unchanged.
pub fn expire_content(
    store: &Store,
    renderer: &Renderer,
    content_id: &ContentId,
    kind: NotificationKind,
    now: Timestamp,
) -> Result<BoundContent, StoreError> {
    store.with_content_mut(content_id, |txn| {
        txn.replace_with_notification(renderer, kind, now)?;
        Ok(txn.content().clone())
    })
}

/// Result of serving one image request.
#[derive(Clone, Debug)]
pub struct ServedImage {
    pub asset: ImageAsset,
    pub view: Option<ViewOutcome>,
    /// Set when this request triggered expiry.
    pub expired_now: Option<ExpiryReason>,
}

/// The image-fetch path as one linearizable step: the policy is evaluated
/// against the state before this fetch (so `max_views = 1` still shows the
/// content once); if expired, the content is replaced and the notification
/// served; otherwise the view is counted and the latest asset returned.
pub fn serve_image(
    store: &Store,
    renderer: &Renderer,
    authority: &TokenAuthority,
    content_id: &ContentId,
    segment_index: usize,
    presented: Option<&str>,
    now: Timestamp,
) -> Result<ServedImage, StoreError> {
    store.with_content_mut(content_id, |txn| {
        let mut expired_now = None;
        let mut view = None;
        if txn.content().status == ContentStatus::Live {
            let verdict = evaluate(&txn.content().policy, &txn.content().view_state, now);
            if let PolicyVerdict::Expired(reason) = verdict {
                txn.replace_with_notification(renderer, NotificationKind::Expired, now)?;
                expired_now = Some(reason);
            } else {
                // A request for a segment that does not exist is not a view.
                let exists = txn
                    .content()
                    .latest()
                    .is_some_and(|r| r.assets.iter().any(|a| a.segment_index == segment_index));
                if !exists {
                    return Err(StoreError::NotFound);
                }
                view = Some(apply_view(txn.content_mut(), authority, presented, now));
                txn.persist()?;
            }
        }
        let asset = txn.latest_asset(segment_index)?;
        Ok(ServedImage {
            asset,
            view,
            expired_now,
        })
    })
}
