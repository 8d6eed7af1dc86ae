//! Deterministic raster types and the pixel, object and class arithmetic the
//! agent's answers are built on.
//!
//! Everything in here is pure: masks are immutable after construction and
//! every operation returns a fresh value.

mod components;
mod io;
mod metrics;
mod ops;

pub use components::{count_components, label_components};
pub use io::{
    decode_change_mask, decode_label_mask, decode_rgb, encode_change_mask, encode_label_mask,
    encode_rgb, LABEL_PALETTE,
};
pub use metrics::{segmentation_metrics, ConfusionMatrix, SegScores};
pub use ops::{
    changed_fraction, class_size_delta, class_transition_matrix, count_class_pixels,
    count_objects, dominant_class, normalize_object_class, whether_change, ObjectSource,
    PercentChange, SizeDelta,
    TransitionMatrix, DEFAULT_MIN_SCORE,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const NUM_CLASSES: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("region {region} exceeds {width}x{height} parent")]
    OutOfBounds {
        region: CropRegion,
        width: u32,
        height: u32,
    },
    #[error("invalid class index {0} (expected 0..7)")]
    BadClass(usize),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("class filter is not allowed when counting mask components")]
    BadFilter,
    #[error("raster buffer holds {actual} cells, expected {expected}")]
    BadLength { expected: usize, actual: usize },
    #[error("label value {0} is not a valid class")]
    BadLabel(u8),
    #[error("detection score {0} outside [0,1]")]
    BadScore(f64),
    #[error("empty raster")]
    Empty,
    #[error("png: {0}")]
    Png(String),
}

pub type Result<T> = std::result::Result<T, RasterError>;

/// The seven land-cover classes, in label-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum LandCover {
    Background = 0,
    Water = 1,
    Barren = 2,
    Road = 3,
    Building = 4,
    Forest = 5,
    Farmland = 6,
}

impl LandCover {
    pub const ALL: [LandCover; NUM_CLASSES] = [
        LandCover::Background,
        LandCover::Water,
        LandCover::Barren,
        LandCover::Road,
        LandCover::Building,
        LandCover::Forest,
        LandCover::Farmland,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or(RasterError::BadClass(index))
    }

    pub fn name(self) -> &'static str {
        match self {
            LandCover::Background => "background",
            LandCover::Water => "water",
            LandCover::Barren => "barren",
            LandCover::Road => "road",
            LandCover::Building => "building",
            LandCover::Forest => "forest",
            LandCover::Farmland => "farmland",
        }
    }

    /// Resolves a free-text class name, accepting plurals and the usual
    /// synonyms ("water bodies", "agricultural", "roads", ...).
    pub fn from_name(name: &str) -> Option<Self> {
        let norm = name
            .trim()
            .to_ascii_lowercase()
            .replace(['_', '-'], " ");
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        let hit = match norm.as_str() {
            "background" | "other" | "unlabeled" | "unlabelled" => LandCover::Background,
            "water" | "water body" | "water bodies" | "waterbody" | "river" | "rivers"
            | "lake" | "lakes" | "sea" | "pond" | "ponds" => LandCover::Water,
            "barren" | "barren land" | "bare" | "bare land" | "bare soil" => LandCover::Barren,
            "road" | "roads" | "street" | "streets" | "highway" => LandCover::Road,
            "building" | "buildings" | "built up" | "house" | "houses" => LandCover::Building,
            "forest" | "forests" | "tree" | "trees" | "woodland" | "vegetation" => {
                LandCover::Forest
            }
            "farmland" | "farmlands" | "farm" | "farms" | "agriculture" | "agricultural"
            | "agricultural land" | "cropland" | "crops" => LandCover::Farmland,
            _ => return None,
        };
        Some(hit)
    }
}

impl fmt::Display for LandCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis-aligned pixel window inside a parent raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRegion {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl CropRegion {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        let fits = self.w > 0
            && self.h > 0
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height);
        if fits {
            Ok(())
        } else {
            Err(RasterError::OutOfBounds {
                region: *self,
                width,
                height,
            })
        }
    }

    /// Maps a region expressed relative to `self` into the parent's frame.
    pub fn compose(&self, inner: &CropRegion) -> CropRegion {
        CropRegion::new(self.x + inner.x, self.y + inner.y, inner.w, inner.h)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }
}

impl fmt::Display for CropRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.x, self.y, self.w, self.h)
    }
}

/// Rasters that can be windowed with [`CropRegion`].
pub trait Crop: Sized {
    fn dimensions(&self) -> (u32, u32);
    fn crop(&self, region: &CropRegion) -> Result<Self>;
}

fn crop_cells<T: Copy>(cells: &[T], width: u32, region: &CropRegion) -> Vec<T> {
    let mut out = Vec::with_capacity(region.area() as usize);
    for row in region.y..region.y + region.h {
        let start = (row * width + region.x) as usize;
        out.extend_from_slice(&cells[start..start + region.w as usize]);
    }
    out
}

/// Per-pixel land-cover classes, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(RasterError::BadLength {
                expected,
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(RasterError::BadLabel(bad));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: u32, height: u32, class: LandCover) -> Self {
        Self {
            width,
            height,
            labels: vec![class as u8; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> LandCover) -> Self {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> u64 {
        self.labels.len() as u64
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> LandCover {
        LandCover::ALL[self.labels[(y * self.width + x) as usize] as usize]
    }

    pub fn class_names() -> [&'static str; NUM_CLASSES] {
        LandCover::ALL.map(LandCover::name)
    }

    pub fn same_size(&self, other: &LabelMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Pixels whose class differs between the two masks.
    pub fn difference(&self, other: &LabelMask) -> Result<ChangeMask> {
        self.same_size(other)?;
        let changed = self
            .labels
            .iter()
            .zip(&other.labels)
            .map(|(a, b)| a != b)
            .collect();
        ChangeMask::new(self.width, self.height, changed)
    }
}

impl Crop for LabelMask {
    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn crop(&self, region: &CropRegion) -> Result<Self> {
        region.check_within(self.width, self.height)?;
        Ok(Self {
            width: region.w,
            height: region.h,
            labels: crop_cells(&self.labels, self.width, region),
        })
    }
}

/// Binary change raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChangeMask {
    width: u32,
    height: u32,
    changed: Vec<bool>,
}

impl ChangeMask {
    pub fn new(width: u32, height: u32, changed: Vec<bool>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if changed.len() != expected {
            return Err(RasterError::BadLength {
                expected,
                actual: changed.len(),
            });
        }
        Ok(Self {
            width,
            height,
            changed,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            changed: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut changed = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                changed.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            changed,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> u64 {
        self.changed.len() as u64
    }

    pub fn cells(&self) -> &[bool] {
        &self.changed
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.changed[(y * self.width + x) as usize]
    }

    pub fn changed_count(&self) -> u64 {
        self.changed.iter().filter(|&&c| c).count() as u64
    }
}

impl Crop for ChangeMask {
    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn crop(&self, region: &CropRegion) -> Result<Self> {
        region.check_within(self.width, self.height)?;
        Ok(Self {
            width: region.w,
            height: region.h,
            changed: crop_cells(&self.changed, self.width, region),
        })
    }
}

impl Crop for image::RgbImage {
    fn dimensions(&self) -> (u32, u32) {
        image::RgbImage::dimensions(self)
    }

    fn crop(&self, region: &CropRegion) -> Result<Self> {
        let (w, h) = image::RgbImage::dimensions(self);
        region.check_within(w, h)?;
        Ok(image::imageops::crop_imm(self, region.x, region.y, region.w, region.h).to_image())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_name: String,
    #[serde(rename = "box")]
    pub bbox: CropRegion,
    pub score: f64,
}

/// Detector output for one image.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    pub entries: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(entries: Vec<Detection>) -> Self {
        Self { entries }
    }

    /// Checks score ranges and that every box lies inside a `width`x`height` image.
    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        for det in &self.entries {
            if !(0.0..=1.0).contains(&det.score) {
                return Err(RasterError::BadScore(det.score));
            }
            det.bbox.check_within(width, height)?;
        }
        Ok(())
    }

    /// Detections whose box centre falls inside `region`, clipped and
    /// translated into the region's frame.
    pub fn crop(&self, region: &CropRegion) -> DetectionSet {
        let entries = self
            .entries
            .iter()
            .filter_map(|det| {
                let b = det.bbox;
                let cx2 = 2 * u64::from(b.x) + u64::from(b.w);
                let cy2 = 2 * u64::from(b.y) + u64::from(b.h);
                let inside = cx2 >= 2 * u64::from(region.x)
                    && cx2 < 2 * u64::from(region.x + region.w)
                    && cy2 >= 2 * u64::from(region.y)
                    && cy2 < 2 * u64::from(region.y + region.h);
                if !inside {
                    return None;
                }
                let x0 = b.x.max(region.x);
                let y0 = b.y.max(region.y);
                let x1 = (b.x + b.w).min(region.x + region.w);
                let y1 = (b.y + b.h).min(region.y + region.h);
                Some(Detection {
                    class_name: det.class_name.clone(),
                    bbox: CropRegion::new(x0 - region.x, y0 - region.y, x1 - x0, y1 - y0),
                    score: det.score,
                })
            })
            .collect();
        DetectionSet { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid4() -> LabelMask {
        LabelMask::new(4, 4, (0..16).map(|i| (i % 7) as u8).collect()).unwrap()
    }

    #[test]
    fn full_extent_crop_is_identity() {
        let m = grid4();
        assert_eq!(m.crop(&CropRegion::full(4, 4)).unwrap(), m);
        let c = ChangeMask::from_fn(5, 3, |x, y| (x + y) % 2 == 0);
        assert_eq!(c.crop(&CropRegion::full(5, 3)).unwrap(), c);
    }

    #[test]
    fn central_block_matches_index_arithmetic() {
        let m = grid4();
        let out = m.crop(&CropRegion::new(1, 1, 2, 2)).unwrap();
        assert_eq!((out.width(), out.height()), (2, 2));
        for j in 0..2 {
            for i in 0..2 {
                let src = ((1 + j) * 4 + (1 + i)) as usize;
                assert_eq!(out.labels()[(j * 2 + i) as usize], (src % 7) as u8);
            }
        }
    }

    #[test]
    fn crop_past_edge_is_out_of_bounds() {
        let err = grid4().crop(&CropRegion::new(3, 3, 2, 2)).unwrap_err();
        assert!(matches!(err, RasterError::OutOfBounds { .. }));
        let zero = grid4().crop(&CropRegion::new(0, 0, 0, 2)).unwrap_err();
        assert!(matches!(zero, RasterError::OutOfBounds { .. }));
    }

    #[test]
    fn rgb_crop_copies_pixels() {
        let img = image::RgbImage::from_fn(6, 4, |x, y| image::Rgb([x as u8, y as u8, 7]));
        let out = Crop::crop(&img, &CropRegion::new(2, 1, 3, 2)).unwrap();
        assert_eq!(out.get_pixel(0, 0).0, [2, 1, 7]);
        assert_eq!(out.get_pixel(2, 1).0, [4, 2, 7]);
    }

    #[test]
    fn label_validation() {
        assert!(matches!(
            LabelMask::new(2, 2, vec![0, 1, 2]),
            Err(RasterError::BadLength { .. })
        ));
        assert!(matches!(
            LabelMask::new(1, 1, vec![7]),
            Err(RasterError::BadLabel(7))
        ));
    }

    #[test]
    fn class_synonyms() {
        assert_eq!(LandCover::from_name("Water Bodies"), Some(LandCover::Water));
        assert_eq!(LandCover::from_name(" buildings "), Some(LandCover::Building));
        assert_eq!(LandCover::from_name("agricultural"), Some(LandCover::Farmland));
        assert_eq!(LandCover::from_name("ships"), None);
        assert_eq!(
            LabelMask::class_names(),
            ["background", "water", "barren", "road", "building", "forest", "farmland"]
        );
    }

    #[test]
    fn detection_crop_keeps_centred_boxes() {
        let set = DetectionSet::new(vec![
            Detection {
                class_name: "plane".into(),
                bbox: CropRegion::new(2, 2, 4, 4),
                score: 0.9,
            },
            Detection {
                class_name: "plane".into(),
                bbox: CropRegion::new(10, 10, 2, 2),
                score: 0.9,
            },
        ]);
        let out = set.crop(&CropRegion::new(0, 0, 5, 5));
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.entries[0].bbox, CropRegion::new(2, 2, 3, 3));
    }
}
