//! File-backed persistence for bound content, revisions, assets and bindings.
//!
//! On-disk layout under the data directory:
//!
//! ```text
//! deployment.salt            32 random bytes, hex; salts edit-token digests
//! contents/<content_id>.json metadata, revisions, view state, token digest
//! assets/<content_id>/<sha256>.<png|gif>
//! bindings/<binding_id>.json
//! ```
//!
//! Every file is written to a temporary name and renamed into place. Asset
//! files are written before the metadata that references them, so a reader
//! (or a restarted process) only ever sees fully committed revisions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::authz::{EditToken, SALT_LEN};
use crate::binding::{BindingId, DataBinding};
use crate::clock::Timestamp;
use crate::lifecycle::{LifecyclePolicy, ViewState};
use crate::renderer::{ImageFormat, NotificationKind, RenderError, RenderSpec, RenderedImage, Renderer};

pub const DEFAULT_REVISION_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found")]
    NotFound,
    #[error("content is {0}")]
    Gone(ContentStatus),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

const BASE32: &[u8; 32] = b"abcdefghijklmnopqrstuvwxyz234567";

/// RFC 4648 base32, lowercase, unpadded.
pub(crate) fn base32_lower(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len().div_ceil(5) * 8);
    let mut buffer = 0u32;
    let mut bits = 0;
    for &b in bytes {
        buffer = (buffer << 8) | u32::from(b);
        bits += 8;
        while bits >= 5 {
            bits -= 5;
            out.push(BASE32[((buffer >> bits) & 31) as usize] as char);
        }
    }
    if bits > 0 {
        out.push(BASE32[((buffer << (5 - bits)) & 31) as usize] as char);
    }
    out
}

pub(crate) fn random_base32(n_bytes: usize) -> String {
    let mut raw = vec![0u8; n_bytes];
    OsRng.fill_bytes(&mut raw);
    base32_lower(&raw)
}

/// 160-bit random identifier, base32 lowercase (32 characters).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ContentId(String);

impl ContentId {
    pub const LEN: usize = 32;

    pub fn generate() -> Self {
        ContentId(random_base32(20))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ContentId {
    type Err = StoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == Self::LEN && s.bytes().all(|b| BASE32.contains(&b)) {
            Ok(ContentId(s.to_string()))
        } else {
            Err(StoreError::NotFound)
        }
    }
}

impl TryFrom<String> for ContentId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse().map_err(|_| format!("malformed content id {s:?}"))
    }
}

impl From<ContentId> for String {
    fn from(id: ContentId) -> String {
        id.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentKind {
    Static,
    SelfDestruct,
    ContinuousEdit,
    Dashboard,
    WebReference,
}

impl ContentKind {
    pub fn is_bindable(self) -> bool {
        matches!(self, ContentKind::Dashboard | ContentKind::WebReference)
    }
}

impl FromStr for ContentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown content kind {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentStatus {
    Live,
    Expired,
    Deleted,
}

impl fmt::Display for ContentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentKind::Static => "static",
            ContentKind::SelfDestruct => "self-destruct",
            ContentKind::ContinuousEdit => "continuous-edit",
            ContentKind::Dashboard => "dashboard",
            ContentKind::WebReference => "web-reference",
        })
    }
}

impl fmt::Display for ContentStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentStatus::Live => "live",
            ContentStatus::Expired => "expired",
            ContentStatus::Deleted => "deleted",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRef {
    pub segment_index: usize,
    pub format: ImageFormat,
    pub width: u32,
    pub height: u32,
    pub byte_length: usize,
    /// Hex SHA-256 of the payload; names the asset file.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub revision: u64,
    /// Source text, or the rendered binding text. `None` once purged or for
    /// snapshot revisions.
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notification: Option<NotificationKind>,
    pub assets: Vec<AssetRef>,
    pub created_at: Timestamp,
}

/// One unit of late-bound content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundContent {
    pub content_id: ContentId,
    pub kind: ContentKind,
    pub spec: RenderSpec,
    pub policy: LifecyclePolicy,
    pub view_state: ViewState,
    /// The most recent revisions, oldest first, capped by the store's retention.
    pub revisions: Vec<Revision>,
    pub kt_enabled: bool,
    pub status: ContentStatus,
    pub format: ImageFormat,
    pub created_at: Timestamp,
    pub token: Option<EditToken>,
    /// Number of segments the original snippet references.
    pub segment_span: usize,
    /// Total revisions ever committed, including pruned ones.
    pub revision_count: u64,
}

impl BoundContent {
    pub fn latest(&self) -> Option<&Revision> {
        self.revisions.last()
    }

    pub fn latest_source(&self) -> Option<&str> {
        self.latest().and_then(|r| r.source.as_deref())
    }

    /// Source texts of retained revisions, oldest first.
    pub fn source_history(&self) -> Vec<&str> {
        self.revisions.iter().filter_map(|r| r.source.as_deref()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssetKey {
    pub content_id: ContentId,
    pub segment_index: usize,
    pub revision: u64,
}

/// One stored image segment at a specific revision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageAsset {
    pub key: AssetKey,
    pub format: ImageFormat,
    pub width: u32,
    pub height: u32,
    pub byte_length: usize,
    pub payload: Vec<u8>,
    pub created_at: Timestamp,
}

/// Everything needed to create content with its first revision.
#[derive(Clone, Debug)]
pub struct NewContent {
    pub kind: ContentKind,
    pub spec: RenderSpec,
    pub policy: LifecyclePolicy,
    pub kt_enabled: bool,
    pub source: Option<String>,
    pub images: Vec<RenderedImage>,
    pub token: Option<EditToken>,
}

type Slot = Arc<RwLock<BoundContent>>;

pub struct Store {
    root: PathBuf,
    revision_cap: usize,
    salt: [u8; SALT_LEN],
    contents: RwLock<HashMap<ContentId, Slot>>,
    bindings: Mutex<HashMap<BindingId, DataBinding>>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("root", &self.root)
            .field("revision_cap", &self.revision_cap)
            .finish_non_exhaustive()
    }
}

fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to `path` via a synced temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file"),
        random_base32(5)
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn validate_images(images: &[RenderedImage], format: ImageFormat) -> Result<(), StoreError> {
    if images.is_empty() {
        return Err(StoreError::Invalid("a revision needs at least one image".into()));
    }
    for (i, img) in images.iter().enumerate() {
        if img.segment_index != i {
            return Err(StoreError::Invalid("segment indices must be 0..n in order".into()));
        }
        if img.format != format {
            return Err(StoreError::Invalid(format!(
                "expected {} segments, got {}",
                format.extension(),
                img.format.extension()
            )));
        }
    }
    Ok(())
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        Self::open_with_cap(root, DEFAULT_REVISION_CAP)
    }

    pub fn open_with_cap(root: impl Into<PathBuf>, revision_cap: usize) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["contents", "assets", "bindings"] {
            fs::create_dir_all(root.join(sub))?;
        }
        let salt = Self::load_or_create_salt(&root)?;

        let mut contents = HashMap::new();
        for entry in fs::read_dir(root.join("contents"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                let _ = fs::remove_file(&path);
                continue;
            }
            let content: BoundContent = read_json(&path)?;
            contents.insert(content.content_id.clone(), Arc::new(RwLock::new(content)));
        }
        let mut bindings = HashMap::new();
        for entry in fs::read_dir(root.join("bindings"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                let _ = fs::remove_file(&path);
                continue;
            }
            let binding: DataBinding = read_json(&path)?;
            bindings.insert(binding.binding_id.clone(), binding);
        }

        let store = Store {
            root,
            revision_cap: revision_cap.max(1),
            salt,
            contents: RwLock::new(contents),
            bindings: Mutex::new(bindings),
        };
        store.sweep_orphans()?;
        Ok(store)
    }

    fn load_or_create_salt(root: &Path) -> Result<[u8; SALT_LEN], StoreError> {
        let path = root.join("deployment.salt");
        let corrupt = |m: &str| StoreError::Corrupt {
            path: path.clone(),
            message: m.to_string(),
        };
        match fs::read_to_string(&path) {
            Ok(hex) => {
                let hex = hex.trim();
                if hex.len() != SALT_LEN * 2 {
                    return Err(corrupt("wrong length"));
                }
                let mut salt = [0u8; SALT_LEN];
                for (i, b) in salt.iter_mut().enumerate() {
                    *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                        .map_err(|_| corrupt("not hex"))?;
                }
                Ok(salt)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                let mut salt = [0u8; SALT_LEN];
                OsRng.fill_bytes(&mut salt);
                let hex: String = salt.iter().map(|b| format!("{b:02x}")).collect();
                write_atomic(&path, hex.as_bytes())?;
                Ok(salt)
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn salt(&self) -> [u8; SALT_LEN] {
        self.salt
    }

    pub fn revision_cap(&self) -> usize {
        self.revision_cap
    }

    fn content_path(&self, id: &ContentId) -> PathBuf {
        self.root.join("contents").join(format!("{id}.json"))
    }

    fn asset_dir(&self, id: &ContentId) -> PathBuf {
        self.root.join("assets").join(id.as_str())
    }

    fn asset_path(&self, id: &ContentId, asset: &AssetRef) -> PathBuf {
        self.asset_dir(id)
            .join(format!("{}.{}", asset.digest, asset.format.extension()))
    }

    fn slot(&self, id: &ContentId) -> Result<Slot, StoreError> {
        self.contents.read().get(id).cloned().ok_or(StoreError::NotFound)
    }

    fn write_assets(&self, id: &ContentId, images: &[RenderedImage]) -> Result<Vec<AssetRef>, StoreError> {
        let dir = self.asset_dir(id);
        fs::create_dir_all(&dir)?;
        let mut refs = Vec::with_capacity(images.len());
        for img in images {
            let asset = AssetRef {
                segment_index: img.segment_index,
                format: img.format,
                width: img.width,
                height: img.height,
                byte_length: img.payload.len(),
                digest: digest_hex(&img.payload),
            };
            let path = self.asset_path(id, &asset);
            if !path.exists() {
                write_atomic(&path, &img.payload)?;
            }
            refs.push(asset);
        }
        Ok(refs)
    }

    fn persist(&self, content: &BoundContent) -> Result<(), StoreError> {
        let json = serde_json::to_vec_pretty(content).map_err(io::Error::other)?;
        write_atomic(&self.content_path(&content.content_id), &json)?;
        Ok(())
    }

    /// Drops asset directories of unknown contents and unreferenced files,
    /// left behind by a crash between asset and metadata writes.
    fn sweep_orphans(&self) -> Result<(), StoreError> {
        let contents = self.contents.read();
        for entry in fs::read_dir(self.root.join("assets"))? {
            let entry = entry?;
            let known = entry
                .file_name()
                .to_str()
                .and_then(|n| n.parse::<ContentId>().ok())
                .is_some_and(|id| contents.contains_key(&id));
            if !known {
                let path = entry.path();
                if path.is_dir() {
                    fs::remove_dir_all(path)?;
                } else {
                    fs::remove_file(path)?;
                }
            }
        }
        for slot in contents.values() {
            self.collect_garbage(&slot.read())?;
        }
        Ok(())
    }

    /// Removes asset files no retained revision references.
    fn collect_garbage(&self, content: &BoundContent) -> Result<(), StoreError> {
        let live: BTreeSet<String> = content
            .revisions
            .iter()
            .flat_map(|r| &r.assets)
            .map(|a| format!("{}.{}", a.digest, a.format.extension()))
            .collect();
        let dir = self.asset_dir(&content.content_id);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !live.contains(&name) {
                fs::remove_file(entry.path())?;
            }
        }
        Ok(())
    }

    /// Creates content with its first revision (ordinal 1).
    pub fn create(&self, new: NewContent, now: Timestamp) -> Result<ContentId, StoreError> {
        new.spec.validate()?;
        let format = new
            .images
            .first()
            .map(|i| i.format)
            .ok_or_else(|| StoreError::Invalid("a revision needs at least one image".into()))?;
        validate_images(&new.images, format)?;

        let content_id = ContentId::generate();
        let assets = self.write_assets(&content_id, &new.images)?;
        let content = BoundContent {
            content_id: content_id.clone(),
            kind: new.kind,
            spec: new.spec,
            policy: new.policy,
            view_state: ViewState::default(),
            revisions: vec![Revision {
                revision: 1,
                source: new.source,
                notification: None,
                assets,
                created_at: now,
            }],
            kt_enabled: new.kt_enabled,
            status: ContentStatus::Live,
            format,
            created_at: now,
            token: new.token,
            segment_span: new.images.len(),
            revision_count: 1,
        };
        self.persist(&content)?;
        self.contents
            .write()
            .insert(content_id.clone(), Arc::new(RwLock::new(content)));
        Ok(content_id)
    }

    pub fn get(&self, id: &ContentId) -> Result<BoundContent, StoreError> {
        self.with_content(id, |c| Ok(c.clone()))
    }

    pub fn content_ids(&self) -> Vec<ContentId> {
        let mut ids: Vec<ContentId> = self.contents.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Runs `f` under the content's shared lock.
    pub fn with_content<T>(
        &self,
        id: &ContentId,
        f: impl FnOnce(&BoundContent) -> Result<T, StoreError>,
    ) -> Result<T, StoreError> {
        let slot = self.slot(id)?;
        let guard = slot.read();
        f(&guard)
    }

    /// Runs `f` under the content's exclusive lock. Changes made through the
    /// transaction are persisted by its own methods; direct mutations through
    /// [`ContentTxn::content_mut`] need an explicit [`ContentTxn::persist`].
    pub fn with_content_mut<T, E: From<StoreError>>(
        &self,
        id: &ContentId,
        f: impl FnOnce(&mut ContentTxn<'_>) -> Result<T, E>,
    ) -> Result<T, E> {
        let slot = self.slot(id)?;
        let mut guard = slot.write();
        let mut txn = ContentTxn {
            store: self,
            content: &mut guard,
        };
        f(&mut txn)
    }

    pub fn put_revision(
        &self,
        id: &ContentId,
        source: Option<String>,
        images: Vec<RenderedImage>,
        now: Timestamp,
    ) -> Result<u64, StoreError> {
        self.with_content_mut(id, |txn| txn.put_revision(source, images, now))
    }

    pub fn get_latest_asset(&self, id: &ContentId, segment_index: usize) -> Result<ImageAsset, StoreError> {
        self.with_content(id, |c| self.read_latest(c, segment_index))
    }

    pub fn purge_source(&self, id: &ContentId) -> Result<(), StoreError> {
        self.with_content_mut(id, |txn| txn.purge_source())
    }

    fn read_latest(&self, content: &BoundContent, segment_index: usize) -> Result<ImageAsset, StoreError> {
        let revision = content.latest().ok_or(StoreError::NotFound)?;
        let asset = revision
            .assets
            .iter()
            .find(|a| a.segment_index == segment_index)
            .ok_or(StoreError::NotFound)?;
        let payload = fs::read(self.asset_path(&content.content_id, asset))?;
        Ok(ImageAsset {
            key: AssetKey {
                content_id: content.content_id.clone(),
                segment_index,
                revision: revision.revision,
            },
            format: asset.format,
            width: asset.width,
            height: asset.height,
            byte_length: payload.len(),
            payload,
            created_at: revision.created_at,
        })
    }

    pub fn put_binding(&self, binding: DataBinding) -> Result<(), StoreError> {
        let json = serde_json::to_vec_pretty(&binding).map_err(io::Error::other)?;
        let mut bindings = self.bindings.lock();
        write_atomic(
            &self.root.join("bindings").join(format!("{}.json", binding.binding_id)),
            &json,
        )?;
        bindings.insert(binding.binding_id.clone(), binding);
        Ok(())
    }

    pub fn remove_binding(&self, id: &BindingId) -> Result<(), StoreError> {
        let mut bindings = self.bindings.lock();
        if bindings.remove(id).is_some() {
            let path = self.root.join("bindings").join(format!("{id}.json"));
            match fs::remove_file(path) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            }
        }
        Ok(())
    }

    /// Mutates a registered binding in place; `NotFound` if it was removed
    /// or replaced in the meantime.
    pub fn update_binding(
        &self,
        id: &BindingId,
        f: impl FnOnce(&mut DataBinding),
    ) -> Result<DataBinding, StoreError> {
        let mut bindings = self.bindings.lock();
        let mut updated = bindings.get(id).cloned().ok_or(StoreError::NotFound)?;
        f(&mut updated);
        let json = serde_json::to_vec_pretty(&updated).map_err(io::Error::other)?;
        write_atomic(&self.root.join("bindings").join(format!("{id}.json")), &json)?;
        bindings.insert(id.clone(), updated.clone());
        Ok(updated)
    }

    pub fn binding(&self, id: &BindingId) -> Option<DataBinding> {
        self.bindings.lock().get(id).cloned()
    }

    pub fn bindings(&self) -> Vec<DataBinding> {
        let mut all: Vec<DataBinding> = self.bindings.lock().values().cloned().collect();
        all.sort_by(|a, b| a.binding_id.cmp(&b.binding_id));
        all
    }

    pub fn bindings_for(&self, content_id: &ContentId) -> Vec<DataBinding> {
        self.bindings()
            .into_iter()
            .filter(|b| &b.content_id == content_id)
            .collect()
    }
}

/// Exclusive access to one content for the duration of a closure.
pub struct ContentTxn<'a> {
    store: &'a Store,
    content: &'a mut BoundContent,
}

impl ContentTxn<'_> {
    pub fn content(&self) -> &BoundContent {
        self.content
    }

    pub fn content_mut(&mut self) -> &mut BoundContent {
        self.content
    }

    pub fn persist(&self) -> Result<(), StoreError> {
        self.store.persist(self.content)
    }

    pub fn latest_asset(&self, segment_index: usize) -> Result<ImageAsset, StoreError> {
        self.store.read_latest(self.content, segment_index)
    }

    fn append(&mut self, revision: Revision) -> u64 {
        let ordinal = revision.revision;
        self.content.revisions.push(revision);
        self.content.revision_count = ordinal;
        let cap = self.store.revision_cap;
        let excess = self.content.revisions.len().saturating_sub(cap);
        self.content.revisions.drain(..excess);
        ordinal
    }

    /// Appends a revision. Assets hit disk before the metadata that points at them.
    pub fn put_revision(
        &mut self,
        source: Option<String>,
        images: Vec<RenderedImage>,
        now: Timestamp,
    ) -> Result<u64, StoreError> {
        if self.content.status != ContentStatus::Live {
            return Err(StoreError::Gone(self.content.status));
        }
        validate_images(&images, self.content.format)?;
        let assets = self.store.write_assets(&self.content.content_id, &images)?;
        let ordinal = self.append(Revision {
            revision: self.content.revision_count + 1,
            source,
            notification: None,
            assets,
            created_at: now,
        });
        self.persist()?;
        self.store.collect_garbage(self.content)?;
        Ok(ordinal)
    }

    /// Drops every non-notification revision with its source and assets.
    /// View state, timestamps and counters are kept.
    pub fn purge_source(&mut self) -> Result<(), StoreError> {
        if self.content.status == ContentStatus::Live {
            return Err(StoreError::Conflict("live content cannot be purged".into()));
        }
        let before = self.content.revisions.len();
        self.content.revisions.retain(|r| r.notification.is_some());
        for r in &mut self.content.revisions {
            r.source = None;
        }
        if self.content.revisions.len() != before {
            self.persist()?;
        }
        self.store.collect_garbage(self.content)
    }

    /// Replaces all segments with a notification and purges everything else.
    /// Returns false when the content was already not live.
    pub fn replace_with_notification(
        &mut self,
        renderer: &Renderer,
        kind: NotificationKind,
        now: Timestamp,
    ) -> Result<bool, StoreError> {
        if self.content.status != ContentStatus::Live {
            return Ok(false);
        }
        let image = renderer.render_notification(kind, &self.content.spec, self.content.format)?;
        let span = self
            .content
            .latest()
            .map_or(1, |r| r.assets.len())
            .max(self.content.segment_span)
            .max(1);
        let images: Vec<RenderedImage> = (0..span)
            .map(|segment_index| RenderedImage {
                segment_index,
                ..image.clone()
            })
            .collect();
        let assets = self.store.write_assets(&self.content.content_id, &images)?;
        self.append(Revision {
            revision: self.content.revision_count + 1,
            source: None,
            notification: Some(kind),
            assets,
            created_at: now,
        });
        self.content.status = match kind {
            NotificationKind::Expired => ContentStatus::Expired,
            NotificationKind::Deleted => ContentStatus::Deleted,
        };
        self.purge_source()?;
        self.persist()?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base32_known_vectors() {
        assert_eq!(base32_lower(b""), "");
        assert_eq!(base32_lower(b"f"), "my");
        assert_eq!(base32_lower(b"foobar"), "mzxw6ytboi");
    }

    #[test]
    fn content_ids_are_well_formed() {
        let id = ContentId::generate();
        assert_eq!(id.as_str().len(), ContentId::LEN);
        assert_eq!(id.as_str().parse::<ContentId>().unwrap(), id);
        assert!("UPPERCASE".parse::<ContentId>().is_err());
        assert!("../../etc/passwd".parse::<ContentId>().is_err());
        assert_ne!(ContentId::generate(), ContentId::generate());
    }

    #[test]
    fn kinds_parse_from_kebab_case() {
        assert_eq!("self-destruct".parse::<ContentKind>().unwrap(), ContentKind::SelfDestruct);
        assert!("selfdestruct".parse::<ContentKind>().is_err());
    }
}
