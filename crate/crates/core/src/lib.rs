//! Core building blocks for late-bound email content: text rendering under
//! image budgets, self-destruct policies, edit tokens, file-backed storage,
//! data-source extraction and sensitive-span detection.

pub mod authz;
pub mod binding;
pub mod clock;
pub mod extract;
pub mod lifecycle;
pub mod renderer;
pub mod scrubber;
pub mod store;

pub use authz::{EditToken, TokenAuthority, TokenCheck, TokenStatus};
pub use binding::{BindingId, BindingSource, CropRect, DataBinding, Extracted};
pub use clock::{Clock, ManualClock, SystemClock, Timestamp};
pub use lifecycle::{
    evaluate, expire_content, fraction_elapsed, record_view, serve_image, ExpiryReason,
    LifecyclePolicy, PolicyVerdict, ServedImage, ViewOutcome, ViewState,
};
pub use renderer::{
    ImageFormat, NotificationKind, RenderError, RenderPlan, RenderSpec, RenderedImage, Renderer,
    Rgba, StaticRender,
};
pub use scrubber::{detect, redact_preview, Category, DetectOptions, SensitiveSpan};
pub use store::{
    AssetKey, AssetRef, BoundContent, ContentId, ContentKind, ContentStatus, ImageAsset,
    NewContent, Revision, Store, StoreError,
};
