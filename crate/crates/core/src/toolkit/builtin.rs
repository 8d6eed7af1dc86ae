//! The eight standard tools: six model-backed ones served from fixtures and
//! two basic calculations computed natively.

use super::fixtures::{Artifact, FixtureStore};
use super::{Backing, ToolArgs, ToolError, ToolHandler, ToolOutput, ToolResult, ToolSpec};
use crate::navigator::naming::ImageRole;
use crate::navigator::session::{ImagePayload, ImageRecord, Session, StoredImage};
use crate::raster::{
    self, count_class_pixels, count_objects, changed_fraction, dominant_class, ChangeMask,
    ObjectSource, DEFAULT_MIN_SCORE, NUM_CLASSES,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardTool {
    BinaryChangeDetection,
    ImageCaptioning,
    SceneClassification,
    SemanticSegmentation,
    ObjectDetection,
    ObjectCounting,
    PixelCounting,
    WhetherChange,
}

impl StandardTool {
    pub const ALL: [StandardTool; 8] = [
        StandardTool::BinaryChangeDetection,
        StandardTool::ImageCaptioning,
        StandardTool::SceneClassification,
        StandardTool::SemanticSegmentation,
        StandardTool::ObjectDetection,
        StandardTool::ObjectCounting,
        StandardTool::PixelCounting,
        StandardTool::WhetherChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StandardTool::BinaryChangeDetection => "binary_change_detection",
            StandardTool::ImageCaptioning => "image_captioning",
            StandardTool::SceneClassification => "scene_classification",
            StandardTool::SemanticSegmentation => "semantic_segmentation",
            StandardTool::ObjectDetection => "object_detection",
            StandardTool::ObjectCounting => "object_counting",
            StandardTool::PixelCounting => "pixel_counting",
            StandardTool::WhetherChange => "whether_change",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    fn backing(self) -> Backing {
        match self {
            StandardTool::PixelCounting | StandardTool::WhetherChange => Backing::Native,
            _ => Backing::Stub,
        }
    }

    fn description(self) -> &'static str {
        match self {
            StandardTool::BinaryChangeDetection => {
                "useful when you need to find where anything changed between the previous and the \
                 current image. Input: pre=<previous image file>, cur=<current image file>; a \
                 single image also works and is compared with its partner from the other date. \
                 Output: the file name of a binary change map and the number of changed pixels."
            }
            StandardTool::ImageCaptioning => {
                "useful when you want a short text description of what an image shows. \
                 Input: image=<image file>."
            }
            StandardTool::SceneClassification => {
                "useful when you need the overall scene category of an image (e.g. farmland, \
                 residential, industrial, harbor). Input: image=<image file>."
            }
            StandardTool::SemanticSegmentation => {
                "useful when you need the land-cover class of every pixel (background, water, \
                 barren, road, building, forest, farmland). Input: image=<image file>. Output: \
                 the file name of a land-use map, its dominant class and per-class pixel counts."
            }
            StandardTool::ObjectDetection => {
                "useful when you need to locate objects such as ships, planes, storage tanks, \
                 harbors or vehicles in an image. Input: image=<image file>, optionally \
                 class=<object name>. Output: the number of detections per object class."
            }
            StandardTool::ObjectCounting => {
                "useful when you need the number of objects of one kind in an image. Input: \
                 image=<image file>, class=<object name>. Given a change map and no class, it \
                 counts the separate changed regions instead."
            }
            StandardTool::PixelCounting => {
                "useful when you need the exact number of pixels of a land-cover class in a \
                 land-use map, or of changed pixels in a change map. Input: image=<land-use or \
                 change map file>, class=<class name> (leave out class for change maps)."
            }
            StandardTool::WhetherChange => {
                "useful when you need to decide whether there is any change at all. Input: \
                 image=<change map file>, optionally threshold=<fraction>; or pre=<file>, \
                 cur=<file> to compare two images directly."
            }
        }
    }

    fn arg_grammar(self) -> &'static str {
        match self {
            StandardTool::BinaryChangeDetection => "pre=<image>, cur=<image> | image=<image>",
            StandardTool::ImageCaptioning
            | StandardTool::SceneClassification
            | StandardTool::SemanticSegmentation => "image=<image>",
            StandardTool::ObjectDetection => "image=<image>[, class=<object>]",
            StandardTool::ObjectCounting => "image=<image>[, class=<object>]",
            StandardTool::PixelCounting => "image=<landuse|change map>[, class=<land cover>]",
            StandardTool::WhetherChange => {
                "image=<change map>[, threshold=<fraction>] | pre=<image>, cur=<image>"
            }
        }
    }

    pub fn spec(self) -> ToolSpec {
        ToolSpec {
            name: self.name().to_string(),
            description: self.description().to_string(),
            arg_grammar: self.arg_grammar().to_string(),
            backing: self.backing(),
        }
    }

    pub fn handler(self, fixtures: Option<Arc<FixtureStore>>) -> StandardHandler {
        StandardHandler {
            tool: self,
            fixtures,
            min_score: DEFAULT_MIN_SCORE,
            min_fraction: 0.0,
        }
    }
}

pub fn standard_specs() -> Vec<ToolSpec> {
    StandardTool::ALL.iter().map(|t| t.spec()).collect()
}

pub struct StandardHandler {
    tool: StandardTool,
    fixtures: Option<Arc<FixtureStore>>,
    min_score: f64,
    min_fraction: f64,
}

impl StandardHandler {
    pub fn with_min_score(mut self, min_score: f64) -> Self {
        self.min_score = min_score;
        self
    }

    pub fn with_min_fraction(mut self, min_fraction: f64) -> Self {
        self.min_fraction = min_fraction;
        self
    }

    fn store(&self, key: &str) -> ToolResult<&FixtureStore> {
        self.fixtures
            .as_deref()
            .ok_or_else(|| ToolError::FixtureMissing {
                tool: self.tool.name().to_string(),
                key: format!("{key} (no fixture directory configured)"),
            })
    }

    fn stub(&self, session: &Session, image: &str) -> ToolResult<Artifact> {
        self.store(image)?
            .stub_lookup(session, image, self.tool.name())
    }
}

impl ToolHandler for StandardHandler {
    fn run(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
        match self.tool {
            StandardTool::BinaryChangeDetection => self.change_detection(session, args),
            StandardTool::ImageCaptioning => {
                let rec = session.resolve(args.image()?)?.record.clone();
                match self.stub(session, rec.self_id.as_str())? {
                    Artifact::Caption(text) => Ok(text_output(format!(
                        "caption: {text}\nimage: {}",
                        rec.filename
                    ))),
                    other => Err(unexpected(other)),
                }
            }
            StandardTool::SceneClassification => {
                let rec = session.resolve(args.image()?)?.record.clone();
                match self.stub(session, rec.self_id.as_str())? {
                    Artifact::ClassLabel(label) => Ok(text_output(format!(
                        "scene class: {label}\nimage: {}",
                        rec.filename
                    ))),
                    other => Err(unexpected(other)),
                }
            }
            StandardTool::SemanticSegmentation => self.segmentation(session, args),
            StandardTool::ObjectDetection => self.detection(session, args),
            StandardTool::ObjectCounting => self.counting(session, args),
            StandardTool::PixelCounting => pixel_counting(session, args),
            StandardTool::WhetherChange => self.whether_change(session, args),
        }
    }
}

fn text_output(observation: String) -> ToolOutput {
    ToolOutput {
        observation,
        produced_images: Vec::new(),
    }
}

fn unexpected(a: Artifact) -> ToolError {
    ToolError::BadInput(format!("fixture has the wrong type: {a:?}"))
}

fn is_pre_side(role: &ImageRole) -> bool {
    matches!(role, ImageRole::Pre | ImageRole::CropPre)
}

impl StandardHandler {
    /// Resolves the previous/current pair from `pre=`/`cur=`, two positional
    /// images, or a single image and its partner.
    fn resolve_pair(&self, session: &Session, args: &ToolArgs) -> ToolResult<(ImageRecord, ImageRecord)> {
        let pre = args.get_any(&["pre", "previous", "image1", "before"]);
        let cur = args.get_any(&["cur", "current", "image2", "after"]);
        let (a, b) = match (pre, cur) {
            (Some(p), Some(c)) => (
                session.resolve(p)?.record.clone(),
                session.resolve(c)?.record.clone(),
            ),
            _ => {
                let first = pre
                    .or(cur)
                    .or_else(|| args.get_any(&["image", "img"]))
                    .or_else(|| args.positional(0))
                    .ok_or_else(|| ToolError::BadInput("missing pre=<image>, cur=<image>".into()))?;
                let a = session.resolve(first)?.record.clone();
                let b = match args.positional(1) {
                    Some(second) if pre.is_none() && cur.is_none() => {
                        session.resolve(second)?.record.clone()
                    }
                    _ => session
                        .partner_of(a.self_id.as_str())
                        .ok_or_else(|| {
                            ToolError::BadInput(format!(
                                "{} has no partner image from the other date",
                                a.filename
                            ))
                        })?
                        .record
                        .clone(),
                };
                (a, b)
            }
        };
        match (is_pre_side(&a.role), is_pre_side(&b.role)) {
            (true, false) => Ok((a, b)),
            (false, true) => Ok((b, a)),
            _ => Err(ToolError::BadInput(format!(
                "need one previous and one current image, got {} and {}",
                a.filename, b.filename
            ))),
        }
    }

    fn change_detection(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
        let (pre, cur) = self.resolve_pair(session, args)?;
        let mask = self
            .store(&format!("{}+{}", pre.self_id, cur.self_id))?
            .pair_lookup(session, &pre, &cur)?;
        let total = mask.pixel_count();
        let changed = mask.changed_count();
        let fraction = changed_fraction(&mask);
        let rec = session.register_derived(pre.self_id.as_str(), "change", ImagePayload::Change(mask))?;
        Ok(ToolOutput {
            observation: format!(
                "Change map saved as {f}\nimage: {f}\nchanged pixels: {changed} of {total} ({:.2}%)",
                fraction * 100.0,
                f = rec.filename,
            ),
            produced_images: vec![rec.self_id.to_string()],
        })
    }

    fn segmentation(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
        let input = session.resolve(args.image()?)?.record.clone();
        let labels = match self.stub(session, input.self_id.as_str())? {
            Artifact::Labels(m) => m,
            other => return Err(unexpected(other)),
        };
        let dominant = dominant_class(&labels)?;
        let mut counts = String::new();
        for class in 0..NUM_CLASSES {
            let n = count_class_pixels(&labels, class)?;
            if n > 0 {
                if !counts.is_empty() {
                    counts.push_str(", ");
                }
                let _ = write!(counts, "{}={n}", raster::LandCover::ALL[class]);
            }
        }
        let rec = session.register_derived(input.self_id.as_str(), "landuse", ImagePayload::Labels(labels))?;
        Ok(ToolOutput {
            observation: format!(
                "Land-use map saved as {f}\nimage: {f}\ndominant class: {dominant}\nclass pixels: {counts}",
                f = rec.filename,
            ),
            produced_images: vec![rec.self_id.to_string()],
        })
    }

    fn detections(&self, session: &Session, args: &ToolArgs) -> ToolResult<raster::DetectionSet> {
        let rec = session.resolve(args.image()?)?.record.clone();
        match self.stub(session, rec.self_id.as_str())? {
            Artifact::Detections(d) => Ok(d),
            other => Err(unexpected(other)),
        }
    }

    fn detection(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
        let set = self.detections(session, args)?;
        let filter = args.get_any(&["class", "object", "category"]);
        let mut per_class: BTreeMap<String, u64> = BTreeMap::new();
        for det in &set.entries {
            if det.score < self.min_score {
                continue;
            }
            let name = raster::normalize_object_class(&det.class_name);
            if filter.is_some_and(|f| raster::normalize_object_class(f) != name) {
                continue;
            }
            *per_class.entry(name).or_default() += 1;
        }
        let total: u64 = per_class.values().sum();
        let mut obs = format!("detections: {total}");
        for (class, n) in per_class {
            let _ = write!(obs, "\n{class}: {n}");
        }
        Ok(text_output(obs))
    }

    fn counting(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
        let class = args.get_any(&["class", "object", "category"]);
        let stored = session.resolve(args.image()?)?;
        if let ImagePayload::Change(mask) = &stored.payload {
            let n = count_objects(ObjectSource::Mask(mask), class, self.min_score)?;
            return Ok(text_output(format!("changed regions: {n}")));
        }
        let set = self.detections(session, args)?;
        let n = count_objects(ObjectSource::Detections(&set), class, self.min_score)?;
        let label = class
            .map(|c| c.trim().to_ascii_lowercase())
            .unwrap_or_else(|| "object".to_string());
        Ok(text_output(format!("{label} count: {n}")))
    }

    fn whether_change(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
        let threshold = args
            .number(&["threshold", "min_fraction"])?
            .unwrap_or(self.min_fraction);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ToolError::BadInput(format!("threshold {threshold} outside [0,1]")));
        }
        let mask = if args.get_any(&["pre", "cur", "previous", "current"]).is_some()
            || args.positionals().len() == 2
        {
            let (pre, cur) = self.resolve_pair(session, args)?;
            let a = session.get(pre.self_id.as_str()).expect("resolved");
            let b = session.get(cur.self_id.as_str()).expect("resolved");
            direct_difference(a, b)?
        } else {
            match &session.resolve(args.image()?)?.payload {
                ImagePayload::Change(m) => m.clone(),
                _ => {
                    return Err(ToolError::BadInput(
                        "whether_change needs a change map (run binary_change_detection first) or pre=<image>, cur=<image>".into(),
                    ))
                }
            }
        };
        let fraction = changed_fraction(&mask);
        let yes = raster::whether_change(&mask, threshold);
        Ok(text_output(format!(
            "whether change: {}\nchanged fraction: {fraction:.4}",
            if yes { "yes" } else { "no" }
        )))
    }
}

/// Per-pixel inequality of two same-size rasters of the same kind.
fn direct_difference(a: &StoredImage, b: &StoredImage) -> ToolResult<ChangeMask> {
    match (&a.payload, &b.payload) {
        (ImagePayload::Rgb(x), ImagePayload::Rgb(y)) => {
            if x.dimensions() != y.dimensions() {
                let (w1, h1) = x.dimensions();
                let (w2, h2) = y.dimensions();
                return Err(raster::RasterError::DimensionMismatch(w1, h1, w2, h2).into());
            }
            let changed = x.pixels().zip(y.pixels()).map(|(p, q)| p != q).collect();
            Ok(ChangeMask::new(x.width(), x.height(), changed)?)
        }
        (ImagePayload::Labels(x), ImagePayload::Labels(y)) => Ok(x.difference(y)?),
        _ => Err(ToolError::BadInput(format!(
            "cannot compare {} with {}",
            a.record.filename, b.record.filename
        ))),
    }
}

fn pixel_counting(session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
    let stored = session.resolve(args.image()?)?;
    let class = args.land_cover();
    match &stored.payload {
        ImagePayload::Labels(mask) => {
            let class = class?.ok_or_else(|| {
                ToolError::BadInput("pixel_counting on a land-use map needs class=<class name>".into())
            })?;
            let n = count_class_pixels(mask, class.index())?;
            let pct = n as f64 / mask.pixel_count() as f64 * 100.0;
            Ok(text_output(format!("{class} pixels: {n} ({pct:.1}%)")))
        }
        ImagePayload::Change(mask) => {
            if args.get_any(&["class", "category", "label"]).is_some_and(|c| {
                !matches!(c.to_ascii_lowercase().as_str(), "change" | "changed")
            }) {
                return Err(ToolError::BadInput(
                    "a change map has no land-cover classes; leave out class".into(),
                ));
            }
            let n = mask.changed_count();
            let pct = changed_fraction(mask) * 100.0;
            Ok(text_output(format!("changed pixels: {n} ({pct:.1}%)")))
        }
        ImagePayload::Rgb(_) => Err(ToolError::BadInput(format!(
            "{} is a photo; run semantic_segmentation or binary_change_detection first and count on its output",
            stored.record.filename
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navigator::session::Temporal;
    use crate::raster::{LabelMask, LandCover};
    use crate::toolkit::Toolkit;
    use image::RgbImage;

    #[test]
    fn pixel_counting_on_uniform_water() {
        let kit = Toolkit::standard(None);
        let mut s = Session::deterministic(1);
        let pre = s
            .register_rgb(RgbImage::new(100, 100), Temporal::Pre, None)
            .unwrap();
        let seg = s
            .register_derived(
                pre.self_id.as_str(),
                "landuse",
                ImagePayload::Labels(LabelMask::filled(100, 100, LandCover::Water)),
            )
            .unwrap();
        let input = format!("image={}_{}_landuse, class=water", seg.self_id, seg.link_id);
        let inv = kit.invoke(&mut s, "pixel_counting", &input).unwrap();
        assert_eq!(inv.observation, "water pixels: 10000 (100.0%)");
        let by_alias = kit.invoke(&mut s, "pixel_counting", "image=landuse, class=building").unwrap();
        assert_eq!(by_alias.observation, "building pixels: 0 (0.0%)");
        assert!(matches!(
            kit.invoke(&mut s, "pixel_counting", "image=pre, class=water"),
            Err(ToolError::BadInput(_))
        ));
        assert!(matches!(
            kit.invoke(&mut s, "pixel_counting", "image=landuse"),
            Err(ToolError::BadInput(_))
        ));
    }

    #[test]
    fn whether_change_direct_and_on_map() {
        let kit = Toolkit::standard(None);
        let mut s = Session::deterministic(2);
        let a = RgbImage::new(10, 10);
        let mut b = a.clone();
        b.put_pixel(3, 3, image::Rgb([9, 9, 9]));
        let pre = s.register_rgb(a.clone(), Temporal::Pre, None).unwrap();
        s.register_rgb(b, Temporal::Cur, None).unwrap();
        let inv = kit.invoke(&mut s, "whether_change", "pre=pre, cur=cur").unwrap();
        assert!(inv.observation.starts_with("whether change: yes"));
        assert!(inv.observation.contains("changed fraction: 0.0100"));

        s.register_derived(
            pre.self_id.as_str(),
            "change",
            ImagePayload::Change(ChangeMask::from_fn(10, 10, |x, y| y == 0 && x < 5)),
        )
        .unwrap();
        let at = kit.invoke(&mut s, "whether_change", "image=change, threshold=0.05").unwrap();
        assert!(at.observation.starts_with("whether change: no"));
        let strict = kit.invoke(&mut s, "whether_change", "image=change").unwrap();
        assert!(strict.observation.starts_with("whether change: yes"));
        let counted = kit.invoke(&mut s, "object_counting", "image=change").unwrap();
        assert_eq!(counted.observation, "changed regions: 1");
    }

    #[test]
    fn stubs_without_fixture_dir_report_missing() {
        let kit = Toolkit::standard(None);
        let mut s = Session::deterministic(3);
        s.register_rgb(RgbImage::new(4, 4), Temporal::Pre, None).unwrap();
        assert!(matches!(
            kit.invoke(&mut s, "image_captioning", "image=pre"),
            Err(ToolError::FixtureMissing { .. })
        ));
    }
}
