//! Per-session image registry plus the memory the navigator keeps alongside
//! it. A session owns every image the user uploaded or a tool produced.

use super::memory::{Clock, DialogueHistory, LogKind, ReferenceLog, TickClock};
use super::naming::{format_filename, parse_filename, ImageId, ImageRole, NamingError};
use crate::raster::{
    self, ChangeMask, Crop, CropRegion, LabelMask, RasterError,
};
use image::RgbImage;
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("not a valid PNG image: {0}")]
    BadImage(String),
    #[error("current image is {cur_w}x{cur_h} but its previous image is {pre_w}x{pre_h}")]
    DimensionMismatch {
        pre_w: u32,
        pre_h: u32,
        cur_w: u32,
        cur_h: u32,
    },
    #[error("unknown image '{0}'")]
    UnknownImage(String),
    #[error("unknown parent image '{0}'")]
    UnknownParent(String),
    #[error("image '{0}' cannot be cropped (only previous/current images can)")]
    NotCroppable(String),
    #[error("pair {0} already has a {1} image")]
    PairRoleTaken(String, String),
    #[error("derived image is {0}x{1} but its parent is {2}x{3}")]
    DerivedSize(u32, u32, u32, u32),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Naming(#[from] NamingError),
    #[error("session io: {0}")]
    Io(#[from] std::io::Error),
    #[error("session state: {0}")]
    State(#[from] serde_json::Error),
}

pub type SessionResult<T> = Result<T, SessionError>;

/// The two temporal roles an uploaded image can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temporal {
    Pre,
    Cur,
}

impl Temporal {
    pub fn role(self) -> ImageRole {
        match self {
            Temporal::Pre => ImageRole::Pre,
            Temporal::Cur => ImageRole::Cur,
        }
    }
}

impl std::str::FromStr for Temporal {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pre" | "previous" => Ok(Temporal::Pre),
            "cur" | "current" => Ok(Temporal::Cur),
            other => Err(format!("unknown role '{other}' (expected pre or cur)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub self_id: ImageId,
    pub link_id: ImageId,
    pub role: ImageRole,
    pub filename: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_region: Option<CropRegion>,
}

impl ImageRecord {
    /// One-line rendering used in the prompt's image section.
    pub fn describe(&self) -> String {
        let relation = match &self.role {
            ImageRole::Pre | ImageRole::Cur => format!("pair {}", self.link_id),
            _ => format!("parent {}", self.link_id),
        };
        let mut s = format!(
            "{} ({}, {}x{}, {})",
            self.filename, self.role, self.width, self.height, relation
        );
        if let Some(r) = &self.crop_region {
            s.pop();
            s.push_str(&format!(", region x={} y={} w={} h={})", r.x, r.y, r.w, r.h));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImagePayload {
    Rgb(RgbImage),
    Labels(LabelMask),
    Change(ChangeMask),
}

impl ImagePayload {
    pub fn dimensions(&self) -> (u32, u32) {
        match self {
            ImagePayload::Rgb(i) => i.dimensions(),
            ImagePayload::Labels(m) => (m.width(), m.height()),
            ImagePayload::Change(m) => (m.width(), m.height()),
        }
    }

    pub fn kind(&self) -> PayloadKind {
        match self {
            ImagePayload::Rgb(_) => PayloadKind::Rgb,
            ImagePayload::Labels(_) => PayloadKind::Labels,
            ImagePayload::Change(_) => PayloadKind::Change,
        }
    }

    pub fn crop(&self, region: &CropRegion) -> raster::Result<ImagePayload> {
        Ok(match self {
            ImagePayload::Rgb(i) => ImagePayload::Rgb(Crop::crop(i, region)?),
            ImagePayload::Labels(m) => ImagePayload::Labels(m.crop(region)?),
            ImagePayload::Change(m) => ImagePayload::Change(m.crop(region)?),
        })
    }

    pub fn to_png(&self) -> raster::Result<Vec<u8>> {
        match self {
            ImagePayload::Rgb(i) => raster::encode_rgb(i),
            ImagePayload::Labels(m) => raster::encode_label_mask(m),
            ImagePayload::Change(m) => raster::encode_change_mask(m),
        }
    }

    pub fn from_png(kind: PayloadKind, bytes: &[u8]) -> raster::Result<ImagePayload> {
        Ok(match kind {
            PayloadKind::Rgb => ImagePayload::Rgb(raster::decode_rgb(bytes)?),
            PayloadKind::Labels => ImagePayload::Labels(raster::decode_label_mask(bytes)?),
            PayloadKind::Change => ImagePayload::Change(raster::decode_change_mask(bytes)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Rgb,
    Labels,
    Change,
}

#[derive(Debug, Clone)]
pub struct StoredImage {
    pub record: ImageRecord,
    pub payload: ImagePayload,
}

/// Where a record sits relative to its previous/current root image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootView {
    pub root: ImageRecord,
    /// Window of the root covered by the record (full extent for roots and
    /// their derivatives).
    pub region: CropRegion,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

pub struct Session {
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
    used_ids: HashSet<ImageId>,
    images: IndexMap<ImageId, StoredImage>,
    log: ReferenceLog,
    history: DialogueHistory,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("seed", &self.seed)
            .field("images", &self.images.len())
            .field("log", &self.log.len())
            .field("history", &self.history.len())
            .finish()
    }
}

impl Session {
    /// A session whose ids and timestamps are fully determined by `seed`.
    pub fn deterministic(seed: u64) -> Self {
        Self::with_clock(seed, Arc::new(TickClock::default()))
    }

    pub fn with_clock(seed: u64, clock: Arc<dyn Clock>) -> Self {
        Self {
            seed,
            draws: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            used_ids: HashSet::new(),
            images: IndexMap::new(),
            log: ReferenceLog::default(),
            history: DialogueHistory::default(),
            clock,
        }
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    /// Draws a fresh 6-hex id not yet used in this session.
    pub fn mint_id(&mut self) -> ImageId {
        loop {
            let v: u32 = self.rng.random();
            self.draws += 1;
            let id = ImageId::from_u32(v);
            if self.used_ids.insert(id.clone()) {
                return id;
            }
        }
    }

    fn reserve(&mut self, id: &ImageId) {
        self.used_ids.insert(id.clone());
    }

    pub fn log(&self) -> &ReferenceLog {
        &self.log
    }

    pub fn history(&self) -> &DialogueHistory {
        &self.history
    }

    pub fn history_view(&self, round: usize) -> DialogueHistory {
        self.history.view(round)
    }

    pub(crate) fn push_turn(&mut self, query: &str, answer: &str) {
        self.history.push(query, answer);
    }

    pub fn record_log(&mut self, kind: LogKind, payload: impl Into<String>) {
        let ts = self.clock.now_ms();
        self.log.append(ts, kind, payload);
    }

    pub fn records(&self) -> impl Iterator<Item = &ImageRecord> {
        self.images.values().map(|s| &s.record)
    }

    pub fn image_count(&self) -> usize {
        self.images.len()
    }

    pub fn get(&self, id: &str) -> Option<&StoredImage> {
        let id = ImageId::parse(id).ok()?;
        self.images.get(&id)
    }

    pub fn by_filename(&self, filename: &str) -> Option<&StoredImage> {
        let (id, _, _) = parse_filename(filename).ok()?;
        self.images
            .get(&id)
            .filter(|s| s.record.filename == filename)
    }

    /// Resolves a tool-argument image reference: a self id, a filename
    /// (with or without `.png`, optionally prefixed by a directory), or a
    /// role token such as `pre`, `crpcur` or `landuse` naming the most
    /// recently registered image with that token.
    pub fn resolve(&self, reference: &str) -> SessionResult<&StoredImage> {
        let r = reference.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`');
        let base = r.rsplit('/').next().unwrap_or(r);
        if let Some(s) = self.get(base) {
            return Ok(s);
        }
        let with_ext = if base.ends_with(".png") {
            base.to_string()
        } else {
            format!("{base}.png")
        };
        if let Some(s) = self.by_filename(&with_ext) {
            return Ok(s);
        }
        let token = base.to_ascii_lowercase();
        let token = match token.as_str() {
            "previous" => "pre",
            "current" => "cur",
            t => t,
        };
        self.images
            .values()
            .rev()
            .find(|s| s.record.role.token() == token)
            .ok_or_else(|| SessionError::UnknownImage(reference.to_string()))
    }

    fn insert(&mut self, record: ImageRecord, payload: ImagePayload) -> ImageRecord {
        self.record_log(
            LogKind::ImageRegistered,
            format!("{} ({})", record.filename, record.role),
        );
        self.images.insert(
            record.self_id.clone(),
            StoredImage {
                record: record.clone(),
                payload,
            },
        );
        record
    }

    /// Registers an uploaded previous/current PNG.
    pub fn register_image(
        &mut self,
        bytes: &[u8],
        role: Temporal,
        pair_id: Option<&str>,
    ) -> SessionResult<ImageRecord> {
        let rgb = raster::decode_rgb(bytes).map_err(|e| SessionError::BadImage(e.to_string()))?;
        self.register_rgb(rgb, role, pair_id)
    }

    pub fn register_rgb(
        &mut self,
        rgb: RgbImage,
        role: Temporal,
        pair_id: Option<&str>,
    ) -> SessionResult<ImageRecord> {
        let (width, height) = rgb.dimensions();
        if width == 0 || height == 0 {
            return Err(SessionError::BadImage("empty image".into()));
        }
        let pair = match pair_id {
            Some(p) => ImageId::parse(p.trim())?,
            None => match role {
                Temporal::Cur => self
                    .unpaired_pre()
                    .unwrap_or_else(|| self.mint_id()),
                Temporal::Pre => self.mint_id(),
            },
        };
        self.reserve(&pair);

        let partner_role = match role {
            Temporal::Pre => ImageRole::Cur,
            Temporal::Cur => ImageRole::Pre,
        };
        for s in self.images.values() {
            if s.record.link_id != pair {
                continue;
            }
            if s.record.role == role.role() {
                return Err(SessionError::PairRoleTaken(
                    pair.to_string(),
                    role.role().to_string(),
                ));
            }
            if s.record.role == partner_role && (s.record.width, s.record.height) != (width, height)
            {
                let (pre, cur) = match role {
                    Temporal::Cur => ((s.record.width, s.record.height), (width, height)),
                    Temporal::Pre => ((width, height), (s.record.width, s.record.height)),
                };
                return Err(SessionError::DimensionMismatch {
                    pre_w: pre.0,
                    pre_h: pre.1,
                    cur_w: cur.0,
                    cur_h: cur.1,
                });
            }
        }

        let self_id = self.mint_id();
        let role = role.role();
        let record = ImageRecord {
            filename: format_filename(&self_id, &pair, &role),
            self_id,
            link_id: pair,
            role,
            width,
            height,
            crop_region: None,
        };
        Ok(self.insert(record, ImagePayload::Rgb(rgb)))
    }

    /// Pair id of the latest previous image that has no current partner.
    fn unpaired_pre(&self) -> Option<ImageId> {
        self.images
            .values()
            .rev()
            .filter(|s| s.record.role == ImageRole::Pre)
            .map(|s| s.record.link_id.clone())
            .find(|pair| {
                !self
                    .images
                    .values()
                    .any(|o| o.record.role == ImageRole::Cur && &o.record.link_id == pair)
            })
    }

    pub fn crop_and_register(
        &mut self,
        parent_id: &str,
        region: CropRegion,
    ) -> SessionResult<ImageRecord> {
        let parent = self
            .get(parent_id)
            .ok_or_else(|| SessionError::UnknownParent(parent_id.to_string()))?;
        let role = parent
            .record
            .role
            .crop_of()
            .ok_or_else(|| SessionError::NotCroppable(parent_id.to_string()))?;
        let payload = parent.payload.crop(&region)?;
        let link_id = parent.record.self_id.clone();
        let self_id = self.mint_id();
        let record = ImageRecord {
            filename: format_filename(&self_id, &link_id, &role),
            self_id,
            link_id,
            role,
            width: region.w,
            height: region.h,
            crop_region: Some(region),
        };
        Ok(self.insert(record, payload))
    }

    /// Registers a tool product derived from `parent_id`; it must cover the
    /// same pixel grid as its parent.
    pub fn register_derived(
        &mut self,
        parent_id: &str,
        tag: &str,
        payload: ImagePayload,
    ) -> SessionResult<ImageRecord> {
        let parent = self
            .get(parent_id)
            .ok_or_else(|| SessionError::UnknownParent(parent_id.to_string()))?;
        let (pw, ph) = (parent.record.width, parent.record.height);
        let (w, h) = payload.dimensions();
        if (w, h) != (pw, ph) {
            return Err(SessionError::DerivedSize(w, h, pw, ph));
        }
        let role = ImageRole::derived(tag)?;
        let link_id = parent.record.self_id.clone();
        let self_id = self.mint_id();
        let record = ImageRecord {
            filename: format_filename(&self_id, &link_id, &role),
            self_id,
            link_id,
            role,
            width: w,
            height: h,
            crop_region: None,
        };
        Ok(self.insert(record, payload))
    }

    /// Records from `id` up to its root, following link ids.
    pub fn lineage(&self, id: &str) -> SessionResult<Vec<&ImageRecord>> {
        let mut out = Vec::new();
        let mut cur = self
            .get(id)
            .ok_or_else(|| SessionError::UnknownImage(id.to_string()))?;
        loop {
            out.push(&cur.record);
            if cur.record.role.is_root() {
                return Ok(out);
            }
            if out.len() > self.images.len() {
                return Err(SessionError::UnknownParent(cur.record.link_id.to_string()));
            }
            cur = self
                .images
                .get(&cur.record.link_id)
                .ok_or_else(|| SessionError::UnknownParent(cur.record.link_id.to_string()))?;
        }
    }

    pub fn root_view(&self, id: &str) -> SessionResult<RootView> {
        let chain = self.lineage(id)?;
        let root = (*chain.last().expect("lineage is never empty")).clone();
        let region = chain
            .iter()
            .find_map(|r| r.crop_region)
            .unwrap_or_else(|| CropRegion::full(root.width, root.height));
        Ok(RootView { root, region })
    }

    /// Counterpart image of the other date covering the same area: for a
    /// previous image its current partner, for a crop the crop of the partner
    /// with the same region.
    pub fn partner_of(&self, id: &str) -> Option<&StoredImage> {
        let me = self.get(id)?;
        let want = match me.record.role {
            ImageRole::Pre => ImageRole::Cur,
            ImageRole::Cur => ImageRole::Pre,
            ImageRole::CropPre => ImageRole::CropCur,
            ImageRole::CropCur => ImageRole::CropPre,
            ImageRole::Derived(_) => return None,
        };
        if me.record.role.is_root() {
            return self
                .images
                .values()
                .find(|s| s.record.role == want && s.record.link_id == me.record.link_id);
        }
        let parent = self.images.get(&me.record.link_id)?;
        let other_root = self.partner_of(parent.record.self_id.as_str())?;
        self.images.values().rev().find(|s| {
            s.record.role == want
                && s.record.link_id == other_root.record.self_id
                && s.record.crop_region == me.record.crop_region
        })
    }

    pub fn png_bytes(&self, id: &str) -> SessionResult<Vec<u8>> {
        let s = self
            .get(id)
            .ok_or_else(|| SessionError::UnknownImage(id.to_string()))?;
        Ok(s.payload.to_png()?)
    }

    /// Writes `session.json` and `images/<filename>` under `dir`.
    pub fn export(&self, dir: &Path) -> SessionResult<()> {
        let images_dir = dir.join("images");
        fs::create_dir_all(&images_dir)?;
        let mut images = Vec::with_capacity(self.images.len());
        for s in self.images.values() {
            fs::write(images_dir.join(&s.record.filename), s.payload.to_png()?)?;
            images.push(SavedImage {
                record: s.record.clone(),
                kind: s.payload.kind(),
            });
        }
        let state = SavedSession {
            version: SESSION_FORMAT_VERSION,
            seed: self.seed,
            draws: self.draws,
            images,
            log: self.log.clone(),
            history: self.history.clone(),
        };
        let tmp = dir.join("session.json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&state)?)?;
        fs::rename(tmp, dir.join("session.json"))?;
        Ok(())
    }

    pub fn import(dir: &Path, clock: Arc<dyn Clock>) -> SessionResult<Self> {
        let state: SavedSession = serde_json::from_slice(&fs::read(dir.join("session.json"))?)?;
        let mut session = Session::with_clock(state.seed, clock);
        for _ in 0..state.draws {
            let _: u32 = session.rng.random();
        }
        session.draws = state.draws;
        for saved in state.images {
            let bytes = fs::read(dir.join("images").join(&saved.record.filename))?;
            let payload = ImagePayload::from_png(saved.kind, &bytes)?;
            session.reserve(&saved.record.self_id);
            session.reserve(&saved.record.link_id);
            session
                .images
                .insert(saved.record.self_id.clone(), StoredImage {
                    record: saved.record,
                    payload,
                });
        }
        session.log = state.log;
        session.history = state.history;
        Ok(session)
    }
}

pub const SESSION_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SavedImage {
    record: ImageRecord,
    kind: PayloadKind,
}

#[derive(Serialize, Deserialize)]
struct SavedSession {
    version: u32,
    seed: u64,
    draws: u64,
    images: Vec<SavedImage>,
    log: ReferenceLog,
    history: DialogueHistory,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::LandCover;

    fn rgb(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| image::Rgb([x as u8, y as u8, (x ^ y) as u8]))
    }

    #[test]
    fn minted_ids_are_hex_and_unique() {
        let mut s = Session::deterministic(1);
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let id = s.mint_id();
            assert_eq!(id.as_str().len(), 6);
            assert!(id.as_str().bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
            assert!(seen.insert(id));
        }
    }

    #[test]
    fn pair_registration_names() {
        let mut s = Session::deterministic(2);
        let pre = s.register_rgb(rgb(8, 8), Temporal::Pre, Some("5092de")).unwrap();
        let cur = s.register_rgb(rgb(8, 8), Temporal::Cur, Some("5092de")).unwrap();
        assert!(pre.filename.ends_with("_5092de_pre.png"));
        assert!(cur.filename.ends_with("_5092de_cur.png"));
        assert_eq!(s.get(pre.self_id.as_str()).unwrap().record, pre);
        assert_eq!(s.by_filename(&cur.filename).unwrap().record, cur);
        assert_eq!(s.resolve("pre").unwrap().record, pre);
        assert_eq!(s.resolve(&cur.filename).unwrap().record, cur);
        assert_eq!(
            s.resolve(&format!("image/{}", pre.filename.trim_end_matches(".png")))
                .unwrap()
                .record,
            pre
        );
        assert_eq!(s.partner_of(pre.self_id.as_str()).unwrap().record, cur);
    }

    #[test]
    fn cur_without_pair_joins_latest_pre() {
        let mut s = Session::deterministic(3);
        let pre = s.register_rgb(rgb(4, 4), Temporal::Pre, None).unwrap();
        let cur = s.register_rgb(rgb(4, 4), Temporal::Cur, None).unwrap();
        assert_eq!(pre.link_id, cur.link_id);
    }

    #[test]
    fn mismatched_cur_is_rejected() {
        let mut s = Session::deterministic(4);
        s.register_rgb(rgb(8, 8), Temporal::Pre, Some("abcdef")).unwrap();
        let err = s
            .register_rgb(rgb(8, 6), Temporal::Cur, Some("abcdef"))
            .unwrap_err();
        assert!(matches!(err, SessionError::DimensionMismatch { .. }));
        let dup = s
            .register_rgb(rgb(8, 8), Temporal::Pre, Some("abcdef"))
            .unwrap_err();
        assert!(matches!(dup, SessionError::PairRoleTaken(..)));
        assert!(matches!(
            s.register_image(b"not a png", Temporal::Pre, None),
            Err(SessionError::BadImage(_))
        ));
    }

    #[test]
    fn crops_and_derivatives() {
        let mut s = Session::deterministic(5);
        let pre = s.register_rgb(rgb(8, 8), Temporal::Pre, None).unwrap();
        let cur = s.register_rgb(rgb(8, 8), Temporal::Cur, None).unwrap();
        let cp = s
            .crop_and_register(pre.self_id.as_str(), CropRegion::new(2, 2, 4, 4))
            .unwrap();
        let cc = s
            .crop_and_register(cur.self_id.as_str(), CropRegion::new(2, 2, 4, 4))
            .unwrap();
        assert!(cp.filename.ends_with("_crppre.png"));
        assert!(cc.filename.ends_with("_crpcur.png"));
        assert_eq!(cp.link_id, pre.self_id);
        assert_eq!(s.partner_of(cp.self_id.as_str()).unwrap().record, cc);

        let full = s
            .crop_and_register(pre.self_id.as_str(), CropRegion::full(8, 8))
            .unwrap();
        assert_eq!(
            s.get(full.self_id.as_str()).unwrap().payload,
            s.get(pre.self_id.as_str()).unwrap().payload
        );

        assert!(matches!(
            s.crop_and_register(cp.self_id.as_str(), CropRegion::new(0, 0, 1, 1)),
            Err(SessionError::NotCroppable(_))
        ));
        assert!(matches!(
            s.crop_and_register("ffffff", CropRegion::new(0, 0, 1, 1)),
            Err(SessionError::UnknownParent(_))
        ));
        assert!(matches!(
            s.crop_and_register(pre.self_id.as_str(), CropRegion::new(6, 6, 4, 4)),
            Err(SessionError::Raster(RasterError::OutOfBounds { .. }))
        ));

        let seg = s
            .register_derived(
                cp.self_id.as_str(),
                "landuse",
                ImagePayload::Labels(LabelMask::filled(4, 4, LandCover::Road)),
            )
            .unwrap();
        assert!(seg.filename.ends_with(&format!("_{}_landuse.png", cp.self_id)));
        let view = s.root_view(seg.self_id.as_str()).unwrap();
        assert_eq!(view.root, pre);
        assert_eq!(view.region, CropRegion::new(2, 2, 4, 4));
        assert_eq!(s.lineage(seg.self_id.as_str()).unwrap().len(), 3);
        assert!(matches!(
            s.register_derived(
                pre.self_id.as_str(),
                "landuse",
                ImagePayload::Labels(LabelMask::filled(4, 4, LandCover::Road))
            ),
            Err(SessionError::DerivedSize(..))
        ));
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Session::deterministic(6);
        let pre = s.register_rgb(rgb(5, 5), Temporal::Pre, None).unwrap();
        s.register_derived(
            pre.self_id.as_str(),
            "change",
            ImagePayload::Change(ChangeMask::from_fn(5, 5, |x, _| x > 2)),
        )
        .unwrap();
        s.push_turn("q", "a");
        s.export(dir.path()).unwrap();

        let mut back = Session::import(dir.path(), Arc::new(TickClock::default())).unwrap();
        assert_eq!(back.records().cloned().collect::<Vec<_>>(), s.records().cloned().collect::<Vec<_>>());
        assert_eq!(back.history(), s.history());
        assert_eq!(back.log(), s.log());
        for r in s.records() {
            assert_eq!(
                back.get(r.self_id.as_str()).unwrap().payload,
                s.get(r.self_id.as_str()).unwrap().payload
            );
        }
        assert_eq!(back.mint_id(), s.mint_id());
    }
}
