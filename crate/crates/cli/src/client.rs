//! Blocking calls to the management API.

use std::fmt;
use std::process::ExitCode;

use reqwest::blocking::{Client, RequestBuilder};
use reqwest::StatusCode;
use serde_json::Value;

/// Stable exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const DENIED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NO_MARKER: u8 = 3;
    pub const EXPIRED: u8 = 4;
    pub const FAILED: u8 = 5;
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub struct Api {
    base: String,
    token: Option<String>,
    http: Client,
}

impl Api {
    pub fn new(base: &str, token: Option<String>) -> Result<Self, CliError> {
        let url = latebind_server::parse_base_url(base).map_err(|e| CliError::new(exit::USAGE, e.to_string()))?;
        Ok(Api {
            base: url.as_str().trim_end_matches('/').to_string(),
            token,
            http: Client::new(),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn send(&self, req: RequestBuilder) -> Result<Value, CliError> {
        let req = match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        };
        let resp = req
            .send()
            .map_err(|e| CliError::new(exit::FAILED, format!("request failed: {e}")))?;
        let status = resp.status();
        let body: Value = resp.json().unwrap_or(Value::Null);
        log::debug!("{status} {body}");
        if status.is_success() {
            return Ok(body);
        }
        let error = body["error"].as_str().unwrap_or("error");
        let message = body["message"].as_str().unwrap_or("");
        let code = match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => exit::DENIED,
            StatusCode::GONE => exit::EXPIRED,
            StatusCode::BAD_REQUEST => exit::USAGE,
            _ => exit::FAILED,
        };
        Err(CliError::new(code, format!("{error}: {message}")))
    }

    pub fn create(&self, body: &Value) -> Result<Value, CliError> {
        self.send(self.http.post(self.url("/api/contents")).json(body))
    }

    pub fn edit(&self, id: &str, text: &str) -> Result<Value, CliError> {
        let body = serde_json::json!({ "text": text });
        self.send(self.http.patch(self.url(&format!("/api/contents/{id}"))).json(&body))
    }

    pub fn status(&self, id: &str) -> Result<Value, CliError> {
        self.send(self.http.get(self.url(&format!("/api/contents/{id}"))))
    }

    pub fn destroy(&self, id: &str) -> Result<Value, CliError> {
        self.send(self.http.delete(self.url(&format!("/api/contents/{id}"))))
    }

    pub fn scrub(&self, text: &str) -> Result<Value, CliError> {
        let body = serde_json::json!({ "text": text });
        self.send(self.http.post(self.url("/api/scrub")).json(&body))
    }
}
