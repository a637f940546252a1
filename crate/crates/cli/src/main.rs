//! `latebind`: run the server, or create and manage contents through its API.

mod client;
mod markup;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latebind_core::SystemClock;
use latebind_server::{parse_base_url, AppState, ServerConfig};
use serde_json::{json, Value};

use client::{exit, Api, CliError};

#[derive(Parser)]
#[command(name = "latebind", version, about = "Late-bound email content")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Remote {
    /// Base URL of a running server.
    #[arg(long, env = "LATEBIND_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
}

#[derive(Args)]
struct Owned {
    content_id: String,
    #[arg(long, env = "LATEBIND_TOKEN", hide_env_values = true)]
    token: String,
    #[command(flatten)]
    remote: Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Static,
    SelfDestruct,
    ContinuousEdit,
}

impl Kind {
    fn api_name(self) -> &'static str {
        match self {
            Kind::Static => "static",
            Kind::SelfDestruct => "self-destruct",
            Kind::ContinuousEdit => "continuous-edit",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service and refresh scheduler until interrupted.
    Serve {
        #[arg(long, default_value = latebind_server::config::DEFAULT_BIND)]
        bind: SocketAddr,
        #[arg(long, default_value = "latebind-data")]
        data: PathBuf,
        /// Public URL embedded in snippets. Defaults to the bound address.
        #[arg(long)]
        base_url: Option<String>,
        /// TTF font replacing the bundled one.
        #[arg(long)]
        font: Option<PathBuf>,
        /// Directory served by the local-file snapshot provider.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
    /// Create content from text or from marked regions of an HTML file.
    Bind(BindArgs),
    /// Replace the text of a content.
    Edit {
        #[command(flatten)]
        owned: Owned,
        #[arg(long)]
        text: String,
    },
    /// Print the status document of a content.
    Status(Owned),
    /// Delete a content; recipients see a removal notice.
    Destroy(Owned),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["text", "html"]))]
struct BindArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, conflicts_with = "html")]
    text: Option<String>,
    /// Email HTML; each `<!--NAME-->…<!--/NAME-->` region is replaced.
    #[arg(long)]
    html: Option<PathBuf>,
    /// Marker name for `--html`.
    #[arg(long, default_value = "lb", requires = "html")]
    select: String,
    /// Where the rewritten HTML goes. Defaults to `<name>.latebind.<ext>` beside the input.
    #[arg(long, requires = "html")]
    out: Option<PathBuf>,
    /// For example `3d` or `12h`.
    #[arg(long)]
    expire_after_first_view: Option<String>,
    #[arg(long)]
    max_views: Option<u64>,
    /// Kinetic typography.
    #[arg(long)]
    kt: bool,
    /// Bind each detected sensitive span separately and leave the rest as is.
    #[arg(long)]
    auto_scrub: bool,
    #[command(flatten)]
    remote: Remote,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve {
            bind,
            data,
            base_url,
            font,
            snapshot_dir,
        } => serve(bind, data, base_url, font, snapshot_dir),
        Command::Bind(args) => bind(args),
        Command::Edit { owned, text } => owner_api(&owned).and_then(|api| api.edit(&owned.content_id, &text)).map(print_json),
        Command::Status(owned) => owner_api(&owned).and_then(|api| api.status(&owned.content_id)).map(print_json),
        Command::Destroy(owned) => owner_api(&owned).and_then(|api| api.destroy(&owned.content_id)).map(print_json),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("latebind: {e}");
            e.exit_code()
        }
    }
}

fn print_json(v: Value) {
    println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
}

fn owner_api(owned: &Owned) -> Result<Api, CliError> {
    Api::new(&owned.remote.url, Some(owned.token.clone()))
}

fn serve(
    bind: SocketAddr,
    data: PathBuf,
    base_url: Option<String>,
    font: Option<PathBuf>,
    snapshot_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let explicit = base_url
        .map(|u| parse_base_url(&u).map_err(|e| CliError::new(exit::USAGE, e.to_string())))
        .transpose()?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new(exit::FAILED, e.to_string()))?;
    runtime.block_on(async move {
        let failed = |e: &dyn std::fmt::Display| CliError::new(exit::FAILED, e.to_string());
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| failed(&e))?;
        let addr = listener.local_addr().map_err(|e| failed(&e))?;
        let base_url = match explicit {
            Some(u) => u,
            None => parse_base_url(&format!("http://{addr}")).map_err(|e| failed(&e))?,
        };
        let config = ServerConfig {
            bind: addr,
            base_url,
            data_dir: data,
            font_path: font,
            snapshot_dir,
            ..ServerConfig::default()
        };
        let state = AppState::new(config.clone(), Arc::new(SystemClock)).map_err(|e| failed(&e))?;
        println!("listening on http://{addr}");
        println!("base url: {}", config.base_url);
        println!("data dir: {}", config.data_dir.display());
        if let Some(dir) = &config.snapshot_dir {
            println!("snapshot dir: {}", dir.display());
        }
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        };
        latebind_server::serve(listener, state, shutdown).await.map_err(|e| failed(&e))
    })
}

fn create_body(args: &BindArgs, text: &str) -> Value {
    let mut policy = serde_json::Map::new();
    if let Some(d) = &args.expire_after_first_view {
        policy.insert("after_first_view".into(), json!(d));
    }
    if let Some(n) = args.max_views {
        policy.insert("max_views".into(), json!(n));
    }
    json!({
        "kind": args.kind.api_name(),
        "text": text,
        "policy": policy,
        "kt_enabled": args.kt,
    })
}

/// Creates one content and returns its snippet, reporting id and token.
fn create_one(api: &Api, args: &BindArgs, text: &str) -> Result<String, CliError> {
    let made = api.create(&create_body(args, text))?;
    let field = |k: &str| made[k].as_str().unwrap_or_default().to_string();
    println!("content_id: {}", field("content_id"));
    println!("edit_token: {}", field("edit_token"));
    Ok(field("html_snippet"))
}

/// Binds every sensitive span of `text` and returns it with spans swapped
/// for snippets.
fn scrub_and_bind(api: &Api, args: &BindArgs, text: &str) -> Result<String, CliError> {
    let found = api.scrub(text)?;
    let spans = found["spans"].as_array().cloned().unwrap_or_default();
    let mut ranges = Vec::new();
    let mut snippets = Vec::new();
    for span in &spans {
        let (Some(start), Some(end)) = (span["start"].as_u64(), span["end"].as_u64()) else {
            return Err(CliError::new(exit::FAILED, format!("malformed span {span}")));
        };
        let range = start as usize..end as usize;
        let Some(matched) = text.get(range.clone()) else {
            return Err(CliError::new(exit::FAILED, format!("span {start}..{end} out of range")));
        };
        log::info!("binding {} span at {start}..{end}", span["category"].as_str().unwrap_or("?"));
        snippets.push(create_one(api, args, matched)?);
        ranges.push(range);
    }
    if ranges.is_empty() {
        log::warn!("no sensitive spans found");
    }
    Ok(markup::splice(text, &ranges, &snippets))
}

fn bind(args: BindArgs) -> Result<(), CliError> {
    let api = Api::new(&args.remote.url, None)?;
    if let Some(text) = &args.text {
        let out = if args.auto_scrub {
            scrub_and_bind(&api, &args, text)?
        } else {
            create_one(&api, &args, text)?
        };
        println!("{out}");
        return Ok(());
    }
    let Some(path) = &args.html else {
        return Err(CliError::new(exit::USAGE, "one of --text or --html is required"));
    };
    let html = fs::read_to_string(path).map_err(|e| CliError::new(exit::USAGE, format!("{}: {e}", path.display())))?;
    let regions = markup::marked_regions(&html, &args.select);
    if regions.is_empty() {
        return Err(CliError::new(
            exit::NO_MARKER,
            format!("no <!--{0}-->…<!--/{0}--> region in {1}", args.select, path.display()),
        ));
    }
    let mut replacements = Vec::new();
    for r in &regions {
        let inner = &html[r.clone()];
        replacements.push(if args.auto_scrub {
            scrub_and_bind(&api, &args, inner)?
        } else {
            create_one(&api, &args, &markup::visible_text(inner))?
        });
    }
    let out = args.out.clone().unwrap_or_else(|| rewritten_path(path));
    fs::write(&out, markup::splice(&html, &regions, &replacements))
        .map_err(|e| CliError::new(exit::FAILED, format!("{}: {e}", out.display())))?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn rewritten_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("mail");
    let name = match input.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.latebind.{ext}"),
        None => format!("{stem}.latebind"),
    };
    input.with_file_name(name)
}
