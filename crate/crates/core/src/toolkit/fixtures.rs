//! Fixture-backed stand-ins for the deep-learning tools.
//!
//! Layout: `<root>/<tool>/<key>.<png|txt|json>`. For an image the keys tried
//! are, in order:
//!
//! * its self id (`be9519`);
//! * for previous/current images, `<pair>_<pre|cur>` (`5092de_pre`);
//! * for crops, `<pair>_<pre|cur>_crop_<x>_<y>_<w>_<h>` and then the root
//!   image's fixture cropped to the region (masks and detections only).
//!
//! Change detection works on a pair and uses `<pre id>_<cur id>`, then
//! `<pair>` (or `<pair>_crop_<x>_<y>_<w>_<h>` plus the cropped fallback).
//!
//! A directory that holds fixtures for a single pair may drop the ids and
//! use `pre`, `cur` and `pair` as keys; these are tried last.

use super::{ToolError, ToolResult};
use crate::navigator::session::{ImageRecord, Session};
use crate::raster::{self, ChangeMask, Crop, CropRegion, DetectionSet, LabelMask};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Labels(LabelMask),
    Change(ChangeMask),
    Caption(String),
    Detections(DetectionSet),
    ClassLabel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FixtureKind {
    Labels,
    Change,
    Caption,
    Detections,
    ClassLabel,
}

impl FixtureKind {
    fn for_tool(tool: &str) -> Option<Self> {
        Some(match tool {
            "semantic_segmentation" => FixtureKind::Labels,
            "binary_change_detection" => FixtureKind::Change,
            "image_captioning" => FixtureKind::Caption,
            "scene_classification" => FixtureKind::ClassLabel,
            "object_detection" | "object_counting" => FixtureKind::Detections,
            _ => return None,
        })
    }

    fn ext(self) -> &'static str {
        match self {
            FixtureKind::Labels | FixtureKind::Change => "png",
            FixtureKind::Caption | FixtureKind::ClassLabel => "txt",
            FixtureKind::Detections => "json",
        }
    }
}

/// Keys to try, then (key, region) fallbacks to crop from.
struct KeyPlan {
    exact: Vec<String>,
    fallback: Vec<(String, CropRegion)>,
}

fn crop_suffix(r: &CropRegion) -> String {
    format!("crop_{}_{}_{}_{}", r.x, r.y, r.w, r.h)
}

#[derive(Debug, Clone)]
pub struct FixtureStore {
    root: PathBuf,
}

impl FixtureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, tool: &str, key: &str, ext: &str) -> PathBuf {
        self.root.join(tool).join(format!("{key}.{ext}"))
    }

    fn image_plan(&self, session: &Session, rec: &ImageRecord) -> ToolResult<KeyPlan> {
        let mut exact = vec![rec.self_id.to_string()];
        let mut fallback = Vec::new();
        if rec.role.is_root() || rec.role.is_crop() {
            let view = session.root_view(rec.self_id.as_str())?;
            let token = view.root.role.to_string();
            let root_key = format!("{}_{token}", view.root.link_id);
            if rec.role.is_crop() {
                let suffix = crop_suffix(&view.region);
                exact.push(format!("{root_key}_{suffix}"));
                exact.push(format!("{token}_{suffix}"));
                fallback.push((root_key, view.region));
                fallback.push((token, view.region));
            } else {
                exact.push(root_key);
                exact.push(token);
            }
        }
        Ok(KeyPlan { exact, fallback })
    }

    fn pair_plan(
        &self,
        session: &Session,
        pre: &ImageRecord,
        cur: &ImageRecord,
    ) -> ToolResult<KeyPlan> {
        let mut exact = vec![format!("{}_{}", pre.self_id, cur.self_id)];
        let mut fallback = Vec::new();
        let pv = session.root_view(pre.self_id.as_str())?;
        let cv = session.root_view(cur.self_id.as_str())?;
        if pv.root.link_id == cv.root.link_id && pv.region == cv.region {
            let pair = pv.root.link_id.to_string();
            if pre.role.is_crop() {
                let suffix = crop_suffix(&pv.region);
                exact.push(format!("{pair}_{suffix}"));
                exact.push(format!("pair_{suffix}"));
                fallback.push((pair, pv.region));
                fallback.push(("pair".to_string(), pv.region));
            } else {
                exact.push(pair);
                exact.push("pair".to_string());
            }
        }
        Ok(KeyPlan { exact, fallback })
    }

    /// Stored artifact for `tool` applied to image `image_ref`.
    pub fn stub_lookup(&self, session: &Session, image_ref: &str, tool: &str) -> ToolResult<Artifact> {
        let rec = session.resolve(image_ref)?.record.clone();
        let plan = self.image_plan(session, &rec)?;
        self.load_planned(tool, &plan, &rec.self_id.to_string())
    }

    /// Stored change map for a previous/current pair.
    pub fn pair_lookup(
        &self,
        session: &Session,
        pre: &ImageRecord,
        cur: &ImageRecord,
    ) -> ToolResult<ChangeMask> {
        let tool = "binary_change_detection";
        let plan = self.pair_plan(session, pre, cur)?;
        match self.load_planned(tool, &plan, &format!("{}+{}", pre.self_id, cur.self_id))? {
            Artifact::Change(m) => Ok(m),
            _ => unreachable!("change detection fixtures decode to change masks"),
        }
    }

    fn load_planned(&self, tool: &str, plan: &KeyPlan, label: &str) -> ToolResult<Artifact> {
        let kind = FixtureKind::for_tool(tool).ok_or_else(|| ToolError::FixtureMissing {
            tool: tool.to_string(),
            key: label.to_string(),
        })?;
        for key in &plan.exact {
            if let Some(a) = self.load(tool, key, kind)? {
                return Ok(a);
            }
        }
        for (key, region) in &plan.fallback {
            if let Some(a) = self.load(tool, key, kind)? {
                let cropped = match a {
                    Artifact::Labels(m) => Some(Artifact::Labels(m.crop(region)?)),
                    Artifact::Change(m) => Some(Artifact::Change(m.crop(region)?)),
                    Artifact::Detections(d) => Some(Artifact::Detections(d.crop(region))),
                    Artifact::Caption(_) | Artifact::ClassLabel(_) => None,
                };
                if let Some(a) = cropped {
                    return Ok(a);
                }
            }
        }
        Err(ToolError::FixtureMissing {
            tool: tool.to_string(),
            key: label.to_string(),
        })
    }

    fn load(&self, tool: &str, key: &str, kind: FixtureKind) -> ToolResult<Option<Artifact>> {
        let mut path = self.path(tool, key, kind.ext());
        if !path.exists() && tool == "object_counting" {
            // counting shares the detector's outputs unless it has its own
            path = self.path("object_detection", key, kind.ext());
        }
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(bad(&path, e)),
        };
        let artifact = match kind {
            FixtureKind::Labels => {
                Artifact::Labels(raster::decode_label_mask(&bytes).map_err(|e| bad(&path, e))?)
            }
            FixtureKind::Change => {
                Artifact::Change(raster::decode_change_mask(&bytes).map_err(|e| bad(&path, e))?)
            }
            FixtureKind::Caption => Artifact::Caption(text(&path, bytes)?),
            FixtureKind::ClassLabel => Artifact::ClassLabel(text(&path, bytes)?),
            FixtureKind::Detections => {
                let set: DetectionSet = match serde_json::from_slice(&bytes) {
                    Ok(set) => set,
                    Err(_) => DetectionSet::new(
                        serde_json::from_slice(&bytes).map_err(|e| bad(&path, e))?,
                    ),
                };
                Artifact::Detections(set)
            }
        };
        Ok(Some(artifact))
    }
}

fn bad(path: &Path, e: impl std::fmt::Display) -> ToolError {
    ToolError::BadFixture {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn text(path: &Path, bytes: Vec<u8>) -> ToolResult<String> {
    let s = String::from_utf8(bytes).map_err(|e| bad(path, e))?;
    Ok(s.trim().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navigator::session::Temporal;
    use crate::raster::{Detection, LandCover};
    use image::RgbImage;

    fn setup() -> (tempfile::TempDir, FixtureStore, Session, ImageRecord, ImageRecord) {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let mut s = Session::deterministic(9);
        let pre = s
            .register_rgb(RgbImage::new(8, 8), Temporal::Pre, Some("5092de"))
            .unwrap();
        let cur = s
            .register_rgb(RgbImage::new(8, 8), Temporal::Cur, Some("5092de"))
            .unwrap();
        (dir, store, s, pre, cur)
    }

    fn write(store: &FixtureStore, tool: &str, key: &str, ext: &str, bytes: &[u8]) {
        let p = store.path(tool, key, ext);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, bytes).unwrap();
    }

    #[test]
    fn change_fixture_is_deterministic() {
        let (_d, store, s, pre, cur) = setup();
        let mask = ChangeMask::from_fn(8, 8, |x, y| x > y);
        write(&store, "binary_change_detection", "5092de", "png", &raster::encode_change_mask(&mask).unwrap());
        let a = store.pair_lookup(&s, &pre, &cur).unwrap();
        let b = store.pair_lookup(&s, &pre, &cur).unwrap();
        assert_eq!(a, mask);
        assert_eq!(raster::encode_change_mask(&a).unwrap(), raster::encode_change_mask(&b).unwrap());
    }

    #[test]
    fn caption_and_missing() {
        let (_d, store, s, pre, _) = setup();
        write(&store, "image_captioning", "5092de_pre", "txt", b"a farm by a river\n");
        assert_eq!(
            store.stub_lookup(&s, pre.self_id.as_str(), "image_captioning").unwrap(),
            Artifact::Caption("a farm by a river".into())
        );
        assert!(matches!(
            store.stub_lookup(&s, "cur", "image_captioning"),
            Err(ToolError::FixtureMissing { .. })
        ));
    }

    #[test]
    fn crops_fall_back_to_cropped_root_fixture() {
        let (_d, store, mut s, pre, _) = setup();
        let labels = LabelMask::from_fn(8, 8, |x, _| {
            if x < 4 { LandCover::Water } else { LandCover::Forest }
        });
        write(&store, "semantic_segmentation", "5092de_pre", "png", &raster::encode_label_mask(&labels).unwrap());
        let dets = vec![Detection {
            class_name: "ship".into(),
            bbox: CropRegion::new(0, 0, 2, 2),
            score: 0.9,
        }];
        write(&store, "object_detection", "5092de_pre", "json", &serde_json::to_vec(&dets).unwrap());

        let crop = s
            .crop_and_register(pre.self_id.as_str(), CropRegion::new(4, 0, 4, 4))
            .unwrap();
        match store.stub_lookup(&s, crop.self_id.as_str(), "semantic_segmentation").unwrap() {
            Artifact::Labels(m) => assert_eq!(m, LabelMask::filled(4, 4, LandCover::Forest)),
            other => panic!("{other:?}"),
        }
        match store.stub_lookup(&s, crop.self_id.as_str(), "object_counting").unwrap() {
            Artifact::Detections(d) => assert!(d.entries.is_empty()),
            other => panic!("{other:?}"),
        }
        match store.stub_lookup(&s, "pre", "object_counting").unwrap() {
            Artifact::Detections(d) => assert_eq!(d.entries.len(), 1),
            other => panic!("{other:?}"),
        }
    }
}
