mod common;

use std::fs;

use common::TestServer;
use latebind_core::renderer::{decode_gif, decode_png, ImageFormat};
use latebind_core::{NotificationKind, RenderSpec, Renderer};
use serde_json::{json, Value};

fn notification(kind: NotificationKind, format: ImageFormat) -> Vec<u8> {
    Renderer::default()
        .render_notification(kind, &RenderSpec::default(), format)
        .unwrap()
        .payload
}

fn static_png(text: &str) -> Vec<Vec<u8>> {
    Renderer::default()
        .render_static(text, &RenderSpec::default())
        .unwrap()
        .images
        .into_iter()
        .map(|i| i.payload)
        .collect()
}

fn field<'a>(v: &'a Value, k: &str) -> &'a str {
    v[k].as_str().unwrap_or_else(|| panic!("missing {k} in {v}"))
}

#[tokio::test]
async fn health_endpoint() {
    let srv = TestServer::start().await;
    let (code, body) = srv.fetch(&srv.url("/health"), None).await;
    assert_eq!(code, 200);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["status"], "ok");
}

#[tokio::test]
async fn minimal_static_content() {
    let srv = TestServer::start().await;
    let (code, made) = srv.create(json!({"kind": "static", "text": "Hello there"})).await;
    assert_eq!(code, 201);
    let urls = made["image_urls"].as_array().unwrap();
    assert_eq!(urls.len(), 1);
    let snippet = field(&made, "html_snippet");
    assert_eq!(snippet.matches("<img ").count(), 1);
    assert!(!snippet.contains("alt="));
    let (code, bytes) = srv.fetch(urls[0].as_str().unwrap(), None).await;
    assert_eq!(code, 200);
    let img = decode_png(&bytes).unwrap();
    assert!(snippet.contains(&format!("width=\"{}\" height=\"{}\"", img.width, img.height)));
    assert_eq!(bytes, static_png("Hello there")[0]);
}

#[tokio::test]
async fn alt_text_only_on_request() {
    let srv = TestServer::start().await;
    let (_, made) = srv
        .create(json!({"kind": "static", "text": "x",
                       "snippet": {"include_alt": true, "alt_text": "a \"quoted\" <b>"}}))
        .await;
    assert!(field(&made, "html_snippet").contains("alt=\"a &quot;quoted&quot; &lt;b&gt;\""));
    let (_, made) = srv
        .create(json!({"kind": "static", "text": "x", "snippet": {"alt_text": "ignored"}}))
        .await;
    assert!(!field(&made, "html_snippet").contains("alt="));
}

#[tokio::test]
async fn oversized_text_stacks_segments_in_order() {
    let srv = TestServer::start().await;
    let text = (0..100).map(|i| format!("line {i}")).collect::<Vec<_>>().join("\n");
    let (_, made) = srv.create(json!({"kind": "static", "text": text})).await;
    let urls: Vec<&str> = made["image_urls"].as_array().unwrap().iter().map(|u| u.as_str().unwrap()).collect();
    assert_eq!(urls.len(), 4);
    let snippet = field(&made, "html_snippet");
    let positions: Vec<usize> = urls.iter().map(|u| snippet.find(u).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(snippet.matches("<br>").count(), 3);
    let expected = static_png(&text);
    for (i, u) in urls.iter().enumerate() {
        assert!(u.ends_with(&format!("/{i}.png")));
        assert_eq!(srv.fetch(u, None).await.1, expected[i]);
    }
}

#[tokio::test]
async fn policy_is_stored_and_echoed() {
    let srv = TestServer::start().await;
    let (_, made) = srv
        .create(json!({"kind": "self-destruct", "text": "secret", "policy": {"after_first_view": "3d", "max_views": 4}}))
        .await;
    let (code, doc) = srv.status_doc(field(&made, "content_id"), field(&made, "edit_token")).await;
    assert_eq!(code, 200);
    let policy: latebind_core::LifecyclePolicy = serde_json::from_value(doc["policy"].clone()).unwrap();
    assert_eq!(policy.after_first_view, Some(std::time::Duration::from_secs(3 * 86_400)));
    assert_eq!(policy.max_views.map(|n| n.get()), Some(4));
    assert_eq!(doc["view_count"], 0);
    assert_eq!(doc["kind"], "self-destruct");
    assert_eq!(doc["verdict"]["status"], "active");
}

#[tokio::test]
async fn malformed_requests_are_rejected() {
    let srv = TestServer::start().await;
    let post = |body: &'static str| {
        srv.client
            .post(srv.url("/api/contents"))
            .header("content-type", "application/json")
            .body(body)
            .send()
    };
    for body in [
        "{",
        r#"{"kind": "static"}"#,
        r#"{"kind": "nonsense", "text": "x"}"#,
        r#"{"kind": "static", "text": "x", "surprise": 1}"#,
        r#"{"kind": "static", "text": "x", "kt_enabled": true}"#,
        r#"{"kind": "static", "text": "x", "spec": {"font_size": -1}}"#,
        r#"{"kind": "static", "text": "x", "spec": {"font_family": "Comic Sans"}}"#,
        r#"{"kind": "dashboard", "text": "x", "binding": {"source": {"type": "http-json", "url": "http://127.0.0.1:1/", "path": "a", "template": "{value}"}, "refresh_interval": "1m"}}"#,
    ] {
        let resp = post(body).await.unwrap();
        assert_eq!(resp.status(), 400, "{body}");
        let err: Value = resp.json().await.unwrap();
        assert!(err["error"].is_string());
    }
}

#[tokio::test]
async fn edits_follow_token_rules() {
    let srv = TestServer::start().await;
    let (_, made) = srv.create(json!({"kind": "continuous-edit", "text": "Hi Jhon"})).await;
    let (id, token) = (field(&made, "content_id"), field(&made, "edit_token"));
    let url = made["image_urls"][0].as_str().unwrap();

    assert_eq!(srv.patch(id, "garbage", "x").await.0, 401);
    let resp = srv
        .client
        .patch(srv.url(&format!("/api/contents/{id}")))
        .json(&json!({"text": "x"}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 401);

    let (code, doc) = srv.patch(id, token, "Hi John").await;
    assert_eq!(code, 200);
    assert_eq!(doc["revision"], 2);
    assert_eq!(srv.fetch(url, Some(token)).await.1, static_png("Hi John")[0]);

    // Owner previews never revoke; the recipient's first fetch does.
    assert_eq!(srv.status_doc(id, token).await.1["token_status"], "active");
    assert_eq!(srv.fetch(url, None).await.1, static_png("Hi John")[0]);
    let (code, body) = srv.patch(id, token, "too late").await;
    assert_eq!(code, 403);
    assert_eq!(body["error"], "recipient-opened");
    // The revoked owner can still read status but not delete CE content.
    let (code, doc) = srv.status_doc(id, token).await;
    assert_eq!((code.as_u16(), doc["token_status"].as_str()), (200, Some("revoked")));
    let resp = srv
        .client
        .delete(srv.url(&format!("/api/contents/{id}")))
        .bearer_auth(token)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 403);
}

#[tokio::test]
async fn kinetic_history_shows_previous_then_latest() {
    let srv = TestServer::start().await;
    let (_, made) = srv
        .create(json!({"kind": "continuous-edit", "text": "Hi Jhon", "kt_enabled": true}))
        .await;
    let (id, token) = (field(&made, "content_id"), field(&made, "edit_token"));
    let url = made["image_urls"][0].as_str().unwrap();
    assert!(url.ends_with(".gif"));
    srv.patch(id, token, "Hi John").await;
    let (_, bytes) = srv.fetch(url, Some(token)).await;
    let anim = decode_gif(&bytes).unwrap();
    assert_eq!(anim.frames.len(), 20);
    assert_eq!(anim.frames[19], decode_png(&static_png("Hi John")[0]).unwrap());
    assert_ne!(anim.frames[0], anim.frames[19]);
}

#[tokio::test]
async fn owner_fetches_do_not_count() {
    let srv = TestServer::start().await;
    let (_, made) = srv.create(json!({"kind": "static", "text": "views"})).await;
    let (id, token) = (field(&made, "content_id"), field(&made, "edit_token"));
    let url = made["image_urls"][0].as_str().unwrap();
    for _ in 0..3 {
        srv.fetch(url, None).await;
    }
    srv.fetch(url, Some(token)).await;
    let resp = srv
        .client
        .get(url)
        .header("cookie", format!("lb_token={token}"))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    let bad_segment = url.replace("/0.png", "/3.png");
    assert_eq!(srv.fetch(&bad_segment, None).await.0, 404);
    assert_eq!(srv.status_doc(id, token).await.1["view_count"], 3);
}

#[tokio::test]
async fn unknown_and_mismatched_images_get_placeholder() {
    let srv = TestServer::start().await;
    let (_, made) = srv.create(json!({"kind": "static", "text": "png only"})).await;
    let url = made["image_urls"][0].as_str().unwrap();
    for bad in [
        url.replace(".png", ".gif"),
        url.replace(".png", ".jpg"),
        url.replace("/0.png", "/-1.png"),
        url.replace("/0.png", "/+0.png"),
        srv.url("/i/short/0.png"),
        srv.url("/i/aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa/0.png"),
    ] {
        let (code, body) = srv.fetch(&bad, None).await;
        assert_eq!(code, 404, "{bad}");
        let px = decode_png(&body).unwrap();
        assert_eq!((px.width, px.height, px.get(0, 0)[3]), (1, 1, 0));
    }
    let (code, _) = srv.status_doc("aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa", "x").await;
    assert_eq!(code, 404);
}

#[tokio::test]
async fn delete_replaces_with_removed_notice() {
    let srv = TestServer::start().await;
    let (_, made) = srv.create(json!({"kind": "static", "text": "gone soon"})).await;
    let (id, token) = (field(&made, "content_id"), field(&made, "edit_token"));
    let url = made["image_urls"][0].as_str().unwrap();
    let del = |t: Option<&str>| {
        let mut req = srv.client.delete(srv.url(&format!("/api/contents/{id}")));
        if let Some(t) = t {
            req = req.bearer_auth(t);
        }
        req.send()
    };
    assert_eq!(del(None).await.unwrap().status(), 401);
    assert_eq!(del(Some(token)).await.unwrap().status(), 200);
    assert_eq!(del(Some(token)).await.unwrap().status(), 200);
    let (code, bytes) = srv.fetch(url, None).await;
    assert_eq!(code, 200);
    assert_eq!(bytes, notification(NotificationKind::Deleted, ImageFormat::StaticRaster));
    assert_eq!(srv.patch(id, token, "revive").await.0, 410);
}

#[tokio::test]
async fn revoked_sender_may_destroy_self_destruct_content() {
    let srv = TestServer::start().await;
    let (_, made) = srv
        .create(json!({"kind": "self-destruct", "text": "bye", "policy": {"max_views": 5}}))
        .await;
    let (id, token) = (field(&made, "content_id"), field(&made, "edit_token"));
    srv.fetch(made["image_urls"][0].as_str().unwrap(), None).await;
    // Self-destruct tokens are not revoked by views; deletion works either way.
    let resp = srv
        .client
        .delete(srv.url(&format!("/api/contents/{id}")))
        .bearer_auth(token)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.json::<Value>().await.unwrap()["status"], "deleted");
}

#[tokio::test]
async fn expired_content_leaks_nothing() {
    let srv = TestServer::start().await;
    let secret = "Vault code 73-19-88 for Rosalind";
    let (_, made) = srv
        .create(json!({"kind": "self-destruct", "text": secret, "policy": {"max_views": 1}}))
        .await;
    let (id, token) = (field(&made, "content_id"), field(&made, "edit_token"));
    let url = made["image_urls"][0].as_str().unwrap();
    let (_, original) = srv.fetch(url, None).await;
    let (_, second) = srv.fetch(url, None).await;
    assert_eq!(second, notification(NotificationKind::Expired, ImageFormat::StaticRaster));

    let (_, doc) = srv.status_doc(id, token).await;
    assert_eq!(doc["status"], "expired");
    assert!(doc["source"].is_null());
    assert_eq!(srv.patch(id, token, "again").await.0, 410);

    // Nothing on disk still holds the text or the original image.
    for entry in walk(&srv.data_dir) {
        let bytes = fs::read(&entry).unwrap();
        assert!(!contains(&bytes, secret.as_bytes()), "{} holds the secret", entry.display());
        assert_ne!(bytes, original, "{} holds the original image", entry.display());
    }
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

#[tokio::test]
async fn scrub_endpoint_reports_spans() {
    let srv = TestServer::start().await;
    let resp = srv
        .client
        .post(srv.url("/api/scrub"))
        .json(&json!({"text": "Card: 4111 1111 1111 1111 thanks, call 412-555-0101"}))
        .send()
        .await
        .unwrap();
    let body: Value = resp.json().await.unwrap();
    let spans = body["spans"].as_array().unwrap();
    assert_eq!(spans.len(), 2);
    assert_eq!(spans[0]["category"], "credit-card");
    assert_eq!((spans[0]["start"].as_u64(), spans[0]["end"].as_u64()), (Some(6), Some(25)));
    assert_eq!(spans[1]["category"], "phone");
    assert_eq!(body["preview"], "Card: ⟨credit-card⟩ thanks, call ⟨phone⟩");

    let resp = srv
        .client
        .post(srv.url("/api/scrub"))
        .json(&json!({"text": "ticket ZX-4411 open", "categories": [], "custom": ["ZX-\\d+"]}))
        .send()
        .await
        .unwrap();
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["spans"][0]["matched_text"], "ZX-4411");
    let resp = srv
        .client
        .post(srv.url("/api/scrub"))
        .json(&json!({"text": "x", "custom": ["("]}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 400);
}

#[tokio::test]
async fn snippet_endpoint_regenerates_markup() {
    let srv = TestServer::start().await;
    let (_, made) = srv.create(json!({"kind": "static", "text": "again"})).await;
    let (id, token) = (field(&made, "content_id"), field(&made, "edit_token"));
    let resp = srv
        .client
        .get(srv.url(&format!("/api/contents/{id}/snippet?include_alt=true&alt_text=hi")))
        .bearer_auth(token)
        .send()
        .await
        .unwrap();
    let body: Value = resp.json().await.unwrap();
    assert!(field(&body, "html_snippet").contains("alt=\"hi\""));
    assert_eq!(body["image_urls"], made["image_urls"]);
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let clock = latebind_core::ManualClock::at_epoch_millis(1_700_000_000_000);
    let srv = TestServer::start_in(dir.path().to_path_buf(), clock.clone(), |c| c).await;
    let (_, made) = srv.create(json!({"kind": "continuous-edit", "text": "v1"})).await;
    let (id, token) = (field(&made, "content_id").to_string(), field(&made, "edit_token").to_string());
    srv.patch(&id, &token, "v2").await;
    srv.stop();
    let srv = TestServer::start_in(dir.path().to_path_buf(), clock, |c| c).await;
    let url = srv.url(&format!("/i/{id}/0.png"));
    assert_eq!(srv.fetch(&url, Some(&token)).await.1, static_png("v2")[0]);
    assert_eq!(srv.status_doc(&id, &token).await.1["revision_count"], 2);
}
