//! HTTP routes: image delivery and the JSON management API.

use std::sync::OnceLock;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use latebind_core::renderer::{encode_png, Canvas};
use latebind_core::{
    detect, evaluate, expire_content, redact_preview, serve_image, BindingId, BindingSource,
    BoundContent, Category, ContentId, ContentKind, ContentStatus, DataBinding, DetectOptions,
    ImageFormat, LifecyclePolicy, NewContent, NotificationKind, RenderError, RenderSpec, Rgba,
    StoreError, TokenAuthority, TokenCheck,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::refresh::{resolve, RefreshFailure};
use crate::snippet::{generate_snippet, image_urls, SnippetOptions};
use crate::state::AppState;

/// Sent verbatim on every image response so no cache keeps an old revision.
pub const CACHE_CONTROL: &str = "no-cache, no-store, max-age=0";
/// Text shown until a binding's first successful refresh.
pub const PENDING_TEXT: &str = "Loading…";
pub const TOKEN_COOKIE: &str = "lb_token";

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/i/{content_id}/{file}", get(image))
        .route("/api/contents", post(create_content))
        .route(
            "/api/contents/{content_id}",
            get(content_status).patch(update_content).delete(delete_content),
        )
        .route("/api/contents/{content_id}/snippet", get(content_snippet))
        .route("/api/bindings", post(create_binding))
        .route("/api/bindings/{binding_id}", get(get_binding).delete(delete_binding))
        .route("/api/scrub", post(scrub))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "invalid-token", "missing or invalid edit token")
    }

    fn recipient_opened() -> Self {
        Self::new(
            StatusCode::FORBIDDEN,
            "recipient-opened",
            "the recipient has opened this content; editing is closed",
        )
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        log::error!("internal error: {e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error")
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound => Self::new(StatusCode::NOT_FOUND, "not-found", "no such content"),
            StoreError::Gone(status) => {
                Self::new(StatusCode::GONE, "content-expired", format!("content is {status}"))
            }
            StoreError::Conflict(m) => Self::new(StatusCode::CONFLICT, "conflict", m),
            StoreError::Invalid(m) => Self::bad_request(m),
            StoreError::Render(e) => e.into(),
            e => Self::internal(e),
        }
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::InvalidSpec(_) | RenderError::InvalidInput(_) | RenderError::BudgetExceeded { .. } => {
                Self::new(StatusCode::BAD_REQUEST, "render", e.to_string())
            }
            e => Self::internal(e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.code, "message": self.message }));
        (self.status, body).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs store and render work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn parse_content_id(raw: &str) -> ApiResult<ContentId> {
    raw.parse().map_err(|_| StoreError::NotFound.into())
}

/// Token from `Authorization: Bearer …`, else from the `lb_token` cookie.
pub fn presented_token(headers: &HeaderMap) -> Option<String> {
    if let Some(v) = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        if let Some(t) = v.strip_prefix("Bearer ").map(str::trim) {
            return Some(t.to_string());
        }
    }
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .find(|(k, _)| *k == TOKEN_COOKIE)
        .map(|(_, v)| v.to_string())
}

fn check_token(authority: &TokenAuthority, content: &BoundContent, presented: Option<&str>) -> TokenCheck {
    presented.map_or(TokenCheck::Invalid, |t| authority.check(content, t))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

fn transparent_pixel() -> &'static [u8] {
    static PIXEL: OnceLock<Vec<u8>> = OnceLock::new();
    PIXEL.get_or_init(|| {
        encode_png(&Canvas::filled(1, 1, Rgba([0, 0, 0, 0]))).expect("1x1 PNG always encodes")
    })
}

fn image_response(status: StatusCode, format: ImageFormat, payload: Vec<u8>) -> Response {
    let mut resp = Response::new(Body::from(payload));
    *resp.status_mut() = status;
    let h = resp.headers_mut();
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static(CACHE_CONTROL));
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(format.content_type()));
    resp
}

fn image_not_found() -> Response {
    image_response(StatusCode::NOT_FOUND, ImageFormat::StaticRaster, transparent_pixel().to_vec())
}

async fn image(
    State(state): State<AppState>,
    Path((content_id, file)): Path<(String, String)>,
    headers: HeaderMap,
) -> Response {
    let parsed = file.rsplit_once('.').and_then(|(seg, ext)| {
        let seg = seg.parse::<usize>().ok().filter(|_| seg.bytes().all(|b| b.is_ascii_digit()))?;
        Some((seg, ImageFormat::from_extension(ext)?))
    });
    let (Ok(id), Some((segment, format))) = (content_id.parse::<ContentId>(), parsed) else {
        return image_not_found();
    };
    let token = presented_token(&headers);
    let result = blocking(move || {
        let stored = state.store.with_content(&id, |c| Ok(c.format))?;
        if stored != format {
            return Err(StoreError::NotFound.into());
        }
        let now = state.now();
        let served = serve_image(
            &state.store,
            &state.renderer,
            &state.authority,
            &id,
            segment,
            token.as_deref(),
            now,
        )?;
        Ok(served.asset)
    })
    .await;
    match result {
        Ok(asset) => image_response(StatusCode::OK, asset.format, asset.payload),
        Err(e) if e.status == StatusCode::NOT_FOUND => image_not_found(),
        Err(e) => {
            let mut resp = e.into_response();
            resp.headers_mut()
                .insert(header::CACHE_CONTROL, HeaderValue::from_static(CACHE_CONTROL));
            resp
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnippetRequest {
    #[serde(default)]
    include_alt: bool,
    #[serde(default)]
    alt_text: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingRequest {
    source: BindingSource,
    #[serde(with = "humantime_serde")]
    refresh_interval: Duration,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateContentRequest {
    kind: ContentKind,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    binding: Option<BindingRequest>,
    #[serde(default)]
    spec: RenderSpec,
    #[serde(default)]
    policy: LifecyclePolicy,
    #[serde(default)]
    kt_enabled: bool,
    #[serde(default)]
    snippet: SnippetRequest,
}

#[derive(Debug, Serialize)]
struct CreatedContent {
    content_id: ContentId,
    edit_token: String,
    image_urls: Vec<String>,
    html_snippet: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    binding_id: Option<BindingId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    binding_error: Option<String>,
}

fn snippet_options(state: &AppState, req: SnippetRequest) -> SnippetOptions {
    SnippetOptions {
        include_alt: req.include_alt,
        alt_text: req.alt_text,
        base_url: state.config.base_url.clone(),
    }
}

fn check_spec(state: &AppState, spec: &RenderSpec) -> ApiResult<()> {
    spec.validate()?;
    let family = state.renderer.typeface().family();
    if spec.font_family != family {
        return Err(ApiError::bad_request(format!(
            "font_family {:?} is not available; this server renders with {family:?}",
            spec.font_family
        )));
    }
    Ok(())
}

fn check_binding(state: &AppState, kind: ContentKind, binding: &BindingRequest) -> ApiResult<()> {
    if !kind.is_bindable() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not-bindable",
            format!("{kind} content cannot take a data binding"),
        ));
    }
    let floor = state.config.refresh_floor;
    if binding.refresh_interval < floor {
        return Err(ApiError::bad_request(format!(
            "refresh_interval must be at least {}",
            humantime_serde::re::humantime::format_duration(floor)
        )));
    }
    binding
        .source
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    if let BindingSource::Snapshot { provider, .. } = &binding.source {
        if !state.sources.has_provider(provider) {
            return Err(ApiError::bad_request(format!("unknown snapshot provider {provider:?}")));
        }
        if kind != ContentKind::WebReference {
            return Err(ApiError::bad_request("snapshot sources need web-reference content"));
        }
    } else if kind != ContentKind::Dashboard {
        return Err(ApiError::bad_request("JSON sources need dashboard content"));
    }
    Ok(())
}

/// Renders the first revision of text content, honoring kinetic typography.
fn render_text(
    state: &AppState,
    kind: ContentKind,
    kt: bool,
    history: &[&str],
    spec: &RenderSpec,
    fraction: f64,
) -> ApiResult<Vec<latebind_core::RenderedImage>> {
    let text = history.last().copied().unwrap_or_default();
    Ok(match (kt, kind) {
        (true, ContentKind::SelfDestruct) => state.renderer.render_blur_animation(text, spec, fraction)?,
        (true, ContentKind::ContinuousEdit) => state.renderer.render_history_animation(history, spec)?,
        _ => state.renderer.render_static(text, spec)?.images,
    })
}

async fn create_content(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateContentRequest = parse_json(&body)?;
    check_spec(&state, &req.spec)?;
    if req.kt_enabled && !matches!(req.kind, ContentKind::SelfDestruct | ContentKind::ContinuousEdit) {
        return Err(ApiError::bad_request(
            "kinetic typography applies to self-destruct and continuous-edit content",
        ));
    }
    let (source, images, binding_error) = match (&req.text, &req.binding) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give either text or binding, not both")),
        (None, None) => return Err(ApiError::bad_request("text or binding is required")),
        (Some(text), None) => {
            if req.kind.is_bindable() && req.kind == ContentKind::WebReference {
                return Err(ApiError::bad_request("web-reference content needs a snapshot binding"));
            }
            let st = state.clone();
            let (text, kind, kt, spec) = (text.clone(), req.kind, req.kt_enabled, req.spec.clone());
            let images = blocking(move || render_text(&st, kind, kt, &[text.as_str()], &spec, 0.0)).await?;
            (req.text.clone(), images, None)
        }
        (None, Some(binding)) => {
            check_binding(&state, req.kind, binding)?;
            match resolve(&state, &binding.source, &req.spec).await {
                Ok(resolved) => (resolved.source, resolved.images, None),
                Err(failure) => {
                    if let RefreshFailure::Render(_) = failure {
                        return Err(ApiError::bad_request(failure.to_string()));
                    }
                    let st = state.clone();
                    let spec = req.spec.clone();
                    let images =
                        blocking(move || Ok(st.renderer.render_static(PENDING_TEXT, &spec)?.images)).await?;
                    (None, images, Some(failure.to_string()))
                }
            }
        }
    };

    let (edit_token, token_record) = state.authority.generate(state.now());
    let new = NewContent {
        kind: req.kind,
        spec: req.spec,
        policy: req.policy,
        kt_enabled: req.kt_enabled,
        source,
        images,
        token: Some(token_record),
    };
    let st = state.clone();
    let binding_req = req.binding;
    let options = snippet_options(&state, req.snippet);
    let created = blocking(move || {
        let now = st.now();
        let id = st.store.create(new, now)?;
        let mut binding_id = None;
        if let Some(b) = binding_req {
            let mut binding = DataBinding::new(id.clone(), b.source, b.refresh_interval);
            if binding_error.is_none() {
                binding.last_refreshed_at = Some(now);
            }
            binding.last_error = binding_error.clone();
            binding_id = Some(binding.binding_id.clone());
            st.store.put_binding(binding)?;
        }
        let content = st.store.get(&id)?;
        Ok(CreatedContent {
            image_urls: image_urls(&content, &options.base_url),
            html_snippet: generate_snippet(&content, &options),
            content_id: id,
            edit_token,
            binding_id,
            binding_error,
        })
    })
    .await?;
    state.wake.notify_one();
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

#[derive(Debug, Serialize)]
pub struct BindingView {
    binding_id: BindingId,
    source: BindingSource,
    #[serde(with = "humantime_serde")]
    refresh_interval: Duration,
    last_refreshed_at: Option<latebind_core::Timestamp>,
    last_error: Option<String>,
}

impl From<DataBinding> for BindingView {
    fn from(b: DataBinding) -> Self {
        BindingView {
            binding_id: b.binding_id,
            source: b.source,
            refresh_interval: b.refresh_interval,
            last_refreshed_at: b.last_refreshed_at,
            last_error: b.last_error,
        }
    }
}

fn status_document(state: &AppState, content: &BoundContent) -> Value {
    let now = state.now();
    let verdict = match content.status {
        ContentStatus::Live => serde_json::to_value(evaluate(&content.policy, &content.view_state, now))
            .unwrap_or(Value::Null),
        status => json!({ "status": status.to_string() }),
    };
    let source = match content.status {
        ContentStatus::Live => content.latest_source().map(str::to_string),
        _ => None,
    };
    let bindings: Vec<BindingView> = state
        .store
        .bindings_for(&content.content_id)
        .into_iter()
        .map(Into::into)
        .collect();
    json!({
        "content_id": content.content_id,
        "kind": content.kind,
        "status": content.status,
        "format": content.format.extension(),
        "kt_enabled": content.kt_enabled,
        "policy": content.policy,
        "view_count": content.view_state.view_count,
        "first_viewed_at": content.view_state.first_viewed_at,
        "last_viewed_at": content.view_state.last_viewed_at,
        "revision_count": content.revision_count,
        "verdict": verdict,
        "token_status": content.token.as_ref().map(|t| t.status),
        "created_at": content.created_at,
        "image_urls": image_urls(content, &state.config.base_url),
        "source": source,
        "bindings": bindings,
    })
}

/// Loads content for an owner request. Revoked-but-matching tokens still
/// identify the owner for read-only access.
fn owner_view(state: &AppState, id: &ContentId, token: Option<&str>) -> ApiResult<(BoundContent, TokenCheck)> {
    let content = state.store.get(id)?;
    match check_token(&state.authority, &content, token) {
        TokenCheck::Invalid => Err(ApiError::unauthorized()),
        check => Ok((content, check)),
    }
}

async fn content_status(
    State(state): State<AppState>,
    Path(content_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let id = parse_content_id(&content_id)?;
    let token = presented_token(&headers);
    blocking(move || {
        let (content, _) = owner_view(&state, &id, token.as_deref())?;
        Ok(Json(status_document(&state, &content)))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
struct SnippetQuery {
    #[serde(default)]
    include_alt: bool,
    #[serde(default)]
    alt_text: Option<String>,
}

async fn content_snippet(
    State(state): State<AppState>,
    Path(content_id): Path<String>,
    Query(q): Query<SnippetQuery>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let id = parse_content_id(&content_id)?;
    let token = presented_token(&headers);
    blocking(move || {
        let (content, _) = owner_view(&state, &id, token.as_deref())?;
        let options = snippet_options(
            &state,
            SnippetRequest {
                include_alt: q.include_alt,
                alt_text: q.alt_text,
            },
        );
        Ok(Json(json!({
            "image_urls": image_urls(&content, &options.base_url),
            "html_snippet": generate_snippet(&content, &options),
        })))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpdateRequest {
    #[serde(alias = "new_text")]
    text: String,
}

async fn update_content(
    State(state): State<AppState>,
    Path(content_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let id = parse_content_id(&content_id)?;
    let req: UpdateRequest = parse_json(&body)?;
    let token = presented_token(&headers);
    blocking(move || {
        let now = state.now();
        // Authorization, rendering and commit happen under the content's
        // write lock so a concurrent first view cannot slip in between.
        let revision = state.store.with_content_mut(&id, |txn| {
            let c = txn.content();
            let check = check_token(&state.authority, c, token.as_deref());
            if check == TokenCheck::Invalid {
                return Err(ApiError::unauthorized());
            }
            if c.status != ContentStatus::Live {
                return Err(StoreError::Gone(c.status).into());
            }
            if check == TokenCheck::Revoked {
                return Err(ApiError::recipient_opened());
            }
            let mut history = c.source_history();
            history.push(&req.text);
            let fraction =
                latebind_core::fraction_elapsed(&c.policy, &c.view_state, c.created_at, now);
            let images = render_text(&state, c.kind, c.kt_enabled, &history, &c.spec, fraction)?;
            Ok(txn.put_revision(Some(req.text.clone()), images, now)?)
        })?;
        let content = state.store.get(&id)?;
        let mut doc = status_document(&state, &content);
        doc["revision"] = json!(revision);
        Ok(Json(doc))
    })
    .await
}

async fn delete_content(
    State(state): State<AppState>,
    Path(content_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let id = parse_content_id(&content_id)?;
    let token = presented_token(&headers);
    let doc = blocking(move || {
        let (content, check) = owner_view(&state, &id, token.as_deref())?;
        // A revoked sender may still destroy self-destruct content.
        if check == TokenCheck::Revoked && content.kind != ContentKind::SelfDestruct {
            return Err(ApiError::recipient_opened());
        }
        let now = state.now();
        let content = expire_content(&state.store, &state.renderer, &id, NotificationKind::Deleted, now)?;
        for b in state.store.bindings_for(&id) {
            state.store.remove_binding(&b.binding_id)?;
        }
        Ok(status_document(&state, &content))
    })
    .await?;
    Ok(Json(doc))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBindingRequest {
    content_id: String,
    source: BindingSource,
    #[serde(with = "humantime_serde")]
    refresh_interval: Duration,
}

async fn create_binding(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: CreateBindingRequest = parse_json(&body)?;
    let id = parse_content_id(&req.content_id)?;
    let token = presented_token(&headers);
    let binding = BindingRequest {
        source: req.source,
        refresh_interval: req.refresh_interval,
    };
    let st = state.clone();
    let view = blocking(move || {
        let (content, check) = owner_view(&st, &id, token.as_deref())?;
        if check != TokenCheck::Authorized {
            return Err(ApiError::recipient_opened());
        }
        if content.status != ContentStatus::Live {
            return Err(StoreError::Gone(content.status).into());
        }
        check_binding(&st, content.kind, &binding)?;
        // One binding drives a content; a new registration replaces the old.
        for old in st.store.bindings_for(&id) {
            st.store.remove_binding(&old.binding_id)?;
        }
        let binding = DataBinding::new(id, binding.source, binding.refresh_interval);
        st.store.put_binding(binding.clone())?;
        Ok(BindingView::from(binding))
    })
    .await?;
    state.wake.notify_one();
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

fn binding_owner(state: &AppState, raw: &str, token: Option<&str>) -> ApiResult<DataBinding> {
    let binding = state
        .store
        .bindings()
        .into_iter()
        .find(|b| b.binding_id.as_str() == raw)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such binding"))?;
    owner_view(state, &binding.content_id, token)?;
    Ok(binding)
}

async fn get_binding(
    State(state): State<AppState>,
    Path(binding_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<BindingView>> {
    let token = presented_token(&headers);
    blocking(move || Ok(Json(binding_owner(&state, &binding_id, token.as_deref())?.into()))).await
}

async fn delete_binding(
    State(state): State<AppState>,
    Path(binding_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let token = presented_token(&headers);
    blocking(move || {
        let binding = binding_owner(&state, &binding_id, token.as_deref())?;
        state.store.remove_binding(&binding.binding_id)?;
        Ok(Json(json!({ "removed": binding.binding_id })))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScrubRequest {
    text: String,
    #[serde(default)]
    categories: Option<Vec<Category>>,
    #[serde(default)]
    custom: Vec<String>,
}

/// Longest custom pattern accepted, to bound compile cost.
const MAX_CUSTOM_PATTERN: usize = 1024;

async fn scrub(body: Bytes) -> ApiResult<Json<Value>> {
    let req: ScrubRequest = parse_json(&body)?;
    let mut options = DetectOptions::all_built_in();
    if let Some(categories) = req.categories {
        options.categories = categories;
    }
    for pattern in &req.custom {
        if pattern.len() > MAX_CUSTOM_PATTERN {
            return Err(ApiError::bad_request("custom pattern too long"));
        }
        let re = regex::Regex::new(pattern)
            .map_err(|e| ApiError::bad_request(format!("custom pattern: {e}")))?;
        options.custom.push(re);
    }
    if !options.custom.is_empty() && !options.categories.contains(&Category::CustomRegex) {
        options.categories.push(Category::CustomRegex);
    }
    let spans = detect(&req.text, &options);
    let preview = redact_preview(&req.text, &spans);
    Ok(Json(json!({ "spans": spans, "preview": preview })))
}
