//! Generator for the bundled evaluation corpus: twenty questions, two per
//! question-type cell, on constructed 32x32 label masks. Reference answers
//! are computed from the masks with the raster operations; stub-tool
//! fixtures and replay scripts are written alongside.
//!
//! Output layout:
//!
//! ```text
//! questions.jsonl   faults.jsonl
//! images/<id>_{pre,cur}.png
//! tools/<id>/<tool>/{pre,cur,pair}.<ext>
//! scripts/<id>.json
//! ```

use super::dataset::{
    write_dataset, AnswerSpec, ChecklistItem, CropSpec, CropTarget, Question, QuestionImages,
    QuestionType, Subtype,
};
use super::metrics::ErrorClass;
use crate::raster::{
    self, changed_fraction, class_size_delta, count_objects, dominant_class, Crop, CropRegion,
    Detection, DetectionSet, LabelMask, LandCover, ObjectSource, PercentChange,
    DEFAULT_MIN_SCORE, LABEL_PALETTE,
};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const SIZE: u32 = 32;
const BLOCK: u32 = 8;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Raster(#[from] raster::RasterError),
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub questions: Vec<Question>,
    pub faults: Vec<Question>,
    /// Error class each fault question is engineered to produce.
    pub expected_faults: Vec<(String, ErrorClass)>,
}

struct Case {
    question: Question,
    pre: LabelMask,
    cur: LabelMask,
    pre_dets: Option<DetectionSet>,
    cur_dets: Option<DetectionSet>,
    script: Vec<String>,
}

fn act(thought: &str, tool: &str, input: &str) -> String {
    format!("Thought: {thought}\nAction: {tool}\nAction Input: {input}")
}

fn fin(answer: &str) -> String {
    format!("Thought: I now know the final answer\nFinal Answer: {answer}")
}

const LAND: [LandCover; 6] = [
    LandCover::Water,
    LandCover::Barren,
    LandCover::Road,
    LandCover::Building,
    LandCover::Forest,
    LandCover::Farmland,
];

/// 4x4 grid of 8x8 blocks.
type Grid = [[LandCover; 4]; 4];

fn random_grid(rng: &mut ChaCha8Rng) -> Grid {
    let mut g = [[LandCover::Background; 4]; 4];
    for row in g.iter_mut() {
        for cell in row.iter_mut() {
            *cell = LAND[rng.random_range(0..LAND.len())];
        }
    }
    g
}

fn mask(grid: &Grid) -> LabelMask {
    LabelMask::from_fn(SIZE, SIZE, |x, y| grid[(y / BLOCK) as usize][(x / BLOCK) as usize])
}

fn boxes(class: &str, cells: &[(u32, u32)]) -> Vec<Detection> {
    cells
        .iter()
        .map(|&(x, y)| Detection {
            class_name: class.to_string(),
            bbox: CropRegion::new(x, y, 3, 3),
            score: 0.9,
        })
        .collect()
}

/// `n` boxes of `class` on distinct 4x4 cells, plus one low-confidence box.
fn scatter(rng: &mut ChaCha8Rng, class: &str, n: usize, taken: &mut Vec<(u32, u32)>) -> Vec<Detection> {
    let mut cells = Vec::new();
    while cells.len() < n {
        let c = (rng.random_range(0..8u32) * 4, rng.random_range(0..8u32) * 4);
        if !taken.contains(&c) {
            taken.push(c);
            cells.push(c);
        }
    }
    let mut out = boxes(class, &cells);
    out.push(Detection {
        class_name: class.to_string(),
        bbox: CropRegion::new(1, 1, 2, 2),
        score: 0.3,
    });
    out
}

fn count(set: &DetectionSet, class: &str) -> i64 {
    count_objects(ObjectSource::Detections(set), Some(class), DEFAULT_MIN_SCORE).expect("valid class") as i64
}

fn render(labels: &LabelMask, dets: Option<&DetectionSet>) -> RgbImage {
    let mut img = RgbImage::from_fn(labels.width(), labels.height(), |x, y| {
        Rgb(LABEL_PALETTE[labels.get(x, y).index()])
    });
    for d in dets.iter().flat_map(|s| s.entries.iter()).filter(|d| d.score >= DEFAULT_MIN_SCORE) {
        for y in d.bbox.y..d.bbox.y + d.bbox.h {
            for x in d.bbox.x..d.bbox.x + d.bbox.w {
                img.put_pixel(x, y, Rgb([24, 24, 24]));
            }
        }
    }
    img
}

fn question(id: &str, qtype: QuestionType, subtype: Option<Subtype>, text: &str) -> Question {
    Question {
        id: id.to_string(),
        qtype,
        subtype,
        text: text.to_string(),
        images: QuestionImages {
            pre: format!("images/{id}_pre.png"),
            cur: format!("images/{id}_cur.png"),
            crop: None,
        },
        required_tools: Vec::new(),
        reference: AnswerSpec::Boolean { value: true },
        fixtures: Some(format!("tools/{id}")),
    }
}

fn with_crop(mut q: Question, region: CropRegion, parent: CropTarget) -> Question {
    q.images.crop = Some(CropSpec { region, parent });
    q
}

fn tools(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn number(value: i64) -> ChecklistItem {
    ChecklistItem::Number {
        value: value as f64,
        tolerance: None,
    }
}

fn mentions(terms: &[&str]) -> ChecklistItem {
    ChecklistItem::Mentions {
        any: terms.iter().map(|s| s.to_string()).collect(),
    }
}

fn percent_change(pre: &LabelMask, cur: &LabelMask, class: LandCover) -> (u64, u64, f64) {
    let d = class_size_delta(pre, cur, class.index()).expect("same size");
    let p = match d.change {
        PercentChange::Percent(p) => p,
        other => panic!("constructed masks must give a finite change, got {other:?}"),
    };
    (d.pre_count, d.cur_count, p)
}

fn delta(pre: &LabelMask, cur: &LabelMask, class: LandCover) -> i64 {
    let d = class_size_delta(pre, cur, class.index()).expect("same size");
    d.cur_count as i64 - d.pre_count as i64
}

fn cases() -> Vec<Case> {
    use LandCover::*;
    use QuestionType as T;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0_ffee);
    let mut out = Vec::new();
    let plain = |q: Question, pre: LabelMask, cur: LabelMask, script: Vec<String>| Case {
        question: q,
        pre,
        cur,
        pre_dets: None,
        cur_dets: None,
        script,
    };

    // Whether: a changed pair, then an unchanged one.
    {
        let g = random_grid(&mut rng);
        let mut h = g;
        h[1][2] = if g[1][2] == Building { Road } else { Building };
        h[3][0] = if g[3][0] == Water { Barren } else { Water };
        let mut q = question("q01", T::Whether, None, "Is there a discernible difference between the images indicating changes?");
        q.required_tools = tools(&["whether_change"]);
        q.reference = AnswerSpec::Boolean { value: true };
        out.push(plain(q, mask(&g), mask(&h), vec![
            act("I should compare the two dates directly.", "whether_change", "pre=pre, cur=cur"),
            fin("Yes, there is a discernible change between the two images."),
        ]));

        let g = random_grid(&mut rng);
        let mut q = question("q02", T::Whether, None, "Has anything changed between the previous and the current image?");
        q.required_tools = tools(&["binary_change_detection", "whether_change"]);
        q.reference = AnswerSpec::Boolean { value: false };
        out.push(plain(q, mask(&g), mask(&g), vec![
            act("I need a change map first.", "binary_change_detection", "pre=pre, cur=cur"),
            act("Now decide from the change map.", "whether_change", "image=change"),
            fin("No, the change map contains no changed pixels."),
        ]));
    }

    // Size / Basic.
    for (id, text, as_count) in [
        ("q03", "Estimate the percentage of the changed area relative to the total image size.", false),
        ("q04", "How many pixels changed between the previous and current images?", true),
    ] {
        let g = random_grid(&mut rng);
        let mut h = g;
        for _ in 0..3 {
            let (r, c) = (rng.random_range(0..4), rng.random_range(0..4));
            h[r][c] = if g[r][c] == Forest { Farmland } else { Forest };
        }
        let (pre, cur) = (mask(&g), mask(&h));
        let diff = pre.difference(&cur).expect("same size");
        let mut q = question(id, T::Size, Some(Subtype::Basic), text);
        q.required_tools = tools(&["binary_change_detection", "pixel_counting"]);
        let answer = if as_count {
            let n = diff.changed_count();
            q.reference = AnswerSpec::Numeric { value: n as f64, tolerance: None };
            format!("{n} pixels changed between the two images.")
        } else {
            let p = changed_fraction(&diff) * 100.0;
            q.reference = AnswerSpec::Numeric { value: p, tolerance: None };
            format!("About {p:.2}% of the image area has changed.")
        };
        out.push(plain(q, pre, cur, vec![
            act("Detect the changed pixels first.", "binary_change_detection", "pre=pre, cur=cur"),
            act("Count the changed pixels.", "pixel_counting", "image=change"),
            fin(&answer),
        ]));
    }

    // Size / Certain Class.
    for (id, class, label) in [("q05", Water, "water bodies"), ("q06", Building, "buildings")] {
        let mut g = random_grid(&mut rng);
        g[0][0] = class;
        g[2][2] = class;
        let mut h = g;
        h[0][0] = Forest;
        h[1][3] = class;
        h[3][3] = class;
        let (pre, cur) = (mask(&g), mask(&h));
        let (a, b, p) = percent_change(&pre, &cur, class);
        let text = format!("What proportion of the {label} has increased or decreased in size, expressed as a percentage?");
        let mut q = question(id, T::Size, Some(Subtype::CertainClass), &text);
        q.required_tools = tools(&["semantic_segmentation", "pixel_counting", "semantic_segmentation", "pixel_counting"]);
        q.reference = AnswerSpec::Numeric { value: p, tolerance: None };
        let input = format!("image=landuse, class={}", class.name());
        out.push(plain(q, pre, cur, vec![
            act("Segment the previous image.", "semantic_segmentation", "image=pre"),
            act("Count the class in the previous land-use map.", "pixel_counting", &input),
            act("Segment the current image.", "semantic_segmentation", "image=cur"),
            act("Count the class in the current land-use map.", "pixel_counting", &input),
            fin(&format!("The {label} changed by {p:+.2}% (from {a} to {b} pixels).")),
        ]));
    }

    // Size / Local Area.
    for (id, region) in [("q07", CropRegion::new(8, 8, 16, 16)), ("q08", CropRegion::new(0, 16, 16, 16))] {
        let g = random_grid(&mut rng);
        let mut h = g;
        let (r, c) = ((region.y / BLOCK) as usize, (region.x / BLOCK) as usize);
        h[r][c] = if g[r][c] == Road { Building } else { Road };
        h[0][3] = if g[0][3] == Barren { Water } else { Barren };
        let (pre, cur) = (mask(&g), mask(&h));
        let local = pre.crop(&region).expect("in bounds").difference(&cur.crop(&region).expect("in bounds")).expect("same size");
        let p = changed_fraction(&local) * 100.0;
        let q = question(id, T::Size, Some(Subtype::LocalArea), "In the localized area I have cropped, what percentage of the area has undergone changes?");
        let mut q = with_crop(q, region, CropTarget::Both);
        q.required_tools = tools(&["binary_change_detection", "pixel_counting"]);
        q.reference = AnswerSpec::Numeric { value: p, tolerance: None };
        out.push(plain(q, pre, cur, vec![
            act("Detect changes between the two cropped images.", "binary_change_detection", "pre=crppre, cur=crpcur"),
            act("Count the changed pixels in the cropped change map.", "pixel_counting", "image=change"),
            fin(&format!("{p:.2}% of the cropped area has changed.")),
        ]));
    }

    // Size / Analysis.
    {
        let mut g = random_grid(&mut rng);
        g[0] = [Farmland, Farmland, Farmland, Road];
        g[1][0] = Building;
        let mut h = g;
        h[0] = [Building, Building, Farmland, Road];
        h[1][1] = Road;
        let (pre, cur) = (mask(&g), mask(&h));
        let (db, dr, df) = (delta(&pre, &cur, Building), delta(&pre, &cur, Road), delta(&pre, &cur, Farmland));
        let mut q = question("q09", T::Size, Some(Subtype::Analysis), "Compare the pixel changes in buildings and roads to farmland, and quantify the shift to assess urban sprawl.");
        q.required_tools = tools(&[
            "semantic_segmentation", "pixel_counting", "pixel_counting", "pixel_counting",
            "semantic_segmentation", "pixel_counting", "pixel_counting", "pixel_counting",
        ]);
        q.reference = AnswerSpec::Checklist { items: vec![number(db), number(dr), number(df), mentions(&["urban"])] };
        let mut script = Vec::new();
        for side in ["pre", "cur"] {
            script.push(act(&format!("Segment the {side} image."), "semantic_segmentation", &format!("image={side}")));
            for class in ["building", "road", "farmland"] {
                script.push(act(&format!("Count {class} pixels."), "pixel_counting", &format!("image=landuse, class={class}")));
            }
        }
        script.push(fin(&format!(
            "Building pixels changed by {db:+}, road pixels by {dr:+} and farmland pixels by {df:+}. Built-up land grew at the expense of farmland, which indicates urban sprawl."
        )));
        out.push(plain(q, pre, cur, script));

        let mut g = random_grid(&mut rng);
        g[3] = [Forest, Forest, Water, Water];
        let mut h = g;
        h[3] = [Forest, Water, Water, Water];
        h[2][0] = Forest;
        let (pre, cur) = (mask(&g), mask(&h));
        let (dw, dfo) = (delta(&pre, &cur, Water), delta(&pre, &cur, Forest));
        let mut q = question("q10", T::Size, Some(Subtype::Analysis), "Compare the pixel changes of water bodies and forest and summarise the ecological shift.");
        q.required_tools = tools(&[
            "semantic_segmentation", "pixel_counting", "pixel_counting",
            "semantic_segmentation", "pixel_counting", "pixel_counting",
        ]);
        q.reference = AnswerSpec::Checklist { items: vec![number(dw), number(dfo), mentions(&["water"]), mentions(&["forest"])] };
        let mut script = Vec::new();
        for side in ["pre", "cur"] {
            script.push(act(&format!("Segment the {side} image."), "semantic_segmentation", &format!("image={side}")));
            for class in ["water", "forest"] {
                script.push(act(&format!("Count {class} pixels."), "pixel_counting", &format!("image=landuse, class={class}")));
            }
        }
        script.push(fin(&format!("Water pixels changed by {dw:+} and forest pixels by {dfo:+}.")));
        out.push(plain(q, pre, cur, script));
    }

    // Number / Basic.
    for (id, class, plural, up) in [("q11", "ship", "ships", true), ("q12", "plane", "planes", false)] {
        let g = random_grid(&mut rng);
        let mut taken = Vec::new();
        let (n_pre, n_cur) = if up { (3, 6) } else { (5, 2) };
        let pre_d = DetectionSet::new(scatter(&mut rng, class, n_pre, &mut taken));
        let cur_d = DetectionSet::new(scatter(&mut rng, class, n_cur, &mut taken));
        let (a, b) = (count(&pre_d, class), count(&cur_d, class));
        let d = b - a;
        let text = format!("Between the previous and current images, has there been an increase or decrease in the number of {plural}?");
        let mut q = question(id, T::Number, Some(Subtype::Basic), &text);
        q.required_tools = tools(&["object_counting", "object_counting"]);
        let (word, forms) = if d > 0 { ("increased", ["increase", "increased"]) } else { ("decreased", ["decrease", "decreased"]) };
        q.reference = AnswerSpec::Checklist { items: vec![mentions(&forms), number(d.abs())] };
        out.push(Case {
            question: q,
            pre: mask(&g),
            cur: mask(&g),
            pre_dets: Some(pre_d),
            cur_dets: Some(cur_d),
            script: vec![
                act(&format!("Count {plural} in the previous image."), "object_counting", &format!("image=pre, class={class}")),
                act(&format!("Count {plural} in the current image."), "object_counting", &format!("image=cur, class={class}")),
                fin(&format!("The number of {plural} {word} by {} (from {a} to {b}).", d.abs())),
            ],
        });
    }

    // Number / Local Area.
    for (id, class, plural, region) in [
        ("q13", "plane", "planes", CropRegion::new(0, 0, 16, 16)),
        ("q14", "vehicle", "vehicles", CropRegion::new(16, 16, 16, 16)),
    ] {
        let g = random_grid(&mut rng);
        let inside = |x: u32, y: u32| x >= region.x && x < region.x + 16 && y >= region.y && y < region.y + 16;
        let cells: Vec<(u32, u32)> = (0..8u32).flat_map(|y| (0..8u32).map(move |x| (x * 4, y * 4))).collect();
        let ins: Vec<_> = cells.iter().copied().filter(|&(x, y)| inside(x, y)).collect();
        let outs: Vec<_> = cells.iter().copied().filter(|&(x, y)| !inside(x, y)).collect();
        let pre_d = DetectionSet::new([boxes(class, &ins[0..2]), boxes(class, &outs[0..3])].concat());
        let cur_d = DetectionSet::new([boxes(class, &ins[2..7]), boxes(class, &outs[3..4])].concat());
        let a = count(&pre_d.crop(&region), class);
        let b = count(&cur_d.crop(&region), class);
        let d = b - a;
        let text = format!("For the cropped area, can you calculate the change in the number of {plural} between the two images?");
        let q = question(id, T::Number, Some(Subtype::LocalArea), &text);
        let mut q = with_crop(q, region, CropTarget::Both);
        q.required_tools = tools(&["object_counting", "object_counting"]);
        q.reference = AnswerSpec::Numeric { value: d as f64, tolerance: None };
        out.push(Case {
            question: q,
            pre: mask(&g),
            cur: mask(&g),
            pre_dets: Some(pre_d),
            cur_dets: Some(cur_d),
            script: vec![
                act(&format!("Count {plural} in the cropped previous image."), "object_counting", &format!("image=crppre, class={class}")),
                act(&format!("Count {plural} in the cropped current image."), "object_counting", &format!("image=crpcur, class={class}")),
                fin(&format!("Within the cropped area the number of {plural} changed by {d:+} (from {a} to {b}).")),
            ],
        });
    }

    // Number / Comparison.
    {
        let g = random_grid(&mut rng);
        let mut taken = Vec::new();
        let pre_d = DetectionSet::new([scatter(&mut rng, "storage tank", 2, &mut taken), scatter(&mut rng, "harbor", 3, &mut taken)].concat());
        let cur_d = DetectionSet::new([scatter(&mut rng, "storage tank", 7, &mut taken), scatter(&mut rng, "harbor", 4, &mut taken)].concat());
        let (t0, t1) = (count(&pre_d, "storage tank"), count(&cur_d, "storage tank"));
        let (h0, h1) = (count(&pre_d, "harbor"), count(&cur_d, "harbor"));
        let (dt, dh) = (t1 - t0, h1 - h0);
        let mut q = question("q15", T::Number, Some(Subtype::Comparison), "Compare the change in the number of storage tanks to the change in the number of harbors between the previous and current images and determine which category experienced a greater change in number.");
        q.required_tools = tools(&["object_counting", "object_counting", "object_counting", "object_counting"]);
        q.reference = AnswerSpec::Checklist { items: vec![number(dt.abs()), number(dh.abs()), mentions(&["storage tank"])] };
        out.push(Case {
            question: q,
            pre: mask(&g),
            cur: mask(&g),
            pre_dets: Some(pre_d),
            cur_dets: Some(cur_d),
            script: vec![
                act("Count storage tanks before.", "object_counting", "image=pre, class=storage tank"),
                act("Count storage tanks now.", "object_counting", "image=cur, class=storage tank"),
                act("Count harbors before.", "object_counting", "image=pre, class=harbor"),
                act("Count harbors now.", "object_counting", "image=cur, class=harbor"),
                fin(&format!(
                    "Storage tanks changed by {} (from {t0} to {t1}) while harbors changed by {} (from {h0} to {h1}), so storage tanks experienced the greater change.",
                    dt.abs(), dh.abs()
                )),
            ],
        });

        let g = random_grid(&mut rng);
        let mut taken = Vec::new();
        let pre_d = DetectionSet::new([scatter(&mut rng, "vehicle", 6, &mut taken), scatter(&mut rng, "building", 4, &mut taken)].concat());
        let cur_d = DetectionSet::new([scatter(&mut rng, "vehicle", 2, &mut taken), scatter(&mut rng, "building", 5, &mut taken)].concat());
        let dv = count(&cur_d, "vehicle") - count(&pre_d, "vehicle");
        let db = count(&cur_d, "building") - count(&pre_d, "building");
        let mut q = question("q16", T::Number, Some(Subtype::Comparison), "Compare the change in the number of vehicles with the change in the number of buildings and determine which category changed more.");
        q.required_tools = tools(&["object_detection", "object_detection"]);
        q.reference = AnswerSpec::Checklist { items: vec![number(dv.abs()), number(db.abs()), mentions(&["vehicle"])] };
        out.push(Case {
            question: q,
            pre: mask(&g),
            cur: mask(&g),
            pre_dets: Some(pre_d),
            cur_dets: Some(cur_d),
            script: vec![
                act("Detect objects in the previous image.", "object_detection", "image=pre"),
                act("Detect objects in the current image.", "object_detection", "image=cur"),
                fin(&format!(
                    "Vehicles changed by {} while buildings changed by {}, so vehicles experienced the greater change.",
                    dv.abs(), db.abs()
                )),
            ],
        });
    }

    // Class / Whole Image.
    {
        let (pre, cur) = (LabelMask::filled(SIZE, SIZE, Farmland), LabelMask::filled(SIZE, SIZE, Building));
        let (a, b) = (dominant_class(&pre).expect("non-empty"), dominant_class(&cur).expect("non-empty"));
        let mut q = question("q17", T::Class, Some(Subtype::WholeImage), "What class covered the entire area of the previous image, and to what class does the entire area belong now?");
        q.required_tools = tools(&["scene_classification", "scene_classification"]);
        q.reference = AnswerSpec::Checklist {
            items: vec![ChecklistItem::BeforeClass { class: a.name().into() }, ChecklistItem::AfterClass { class: b.name().into() }],
        };
        out.push(plain(q, pre, cur, vec![
            act("Classify the previous scene.", "scene_classification", "image=pre"),
            act("Classify the current scene.", "scene_classification", "image=cur"),
            fin(&format!("The whole area was {a} in the previous image and is {b} now.")),
        ]));

        let (pre, cur) = (LabelMask::filled(SIZE, SIZE, Forest), LabelMask::filled(SIZE, SIZE, Barren));
        let (a, b) = (dominant_class(&pre).expect("non-empty"), dominant_class(&cur).expect("non-empty"));
        let mut q = question("q18", T::Class, Some(Subtype::WholeImage), "Which land-cover class occupied the whole previous image, and which class occupies it now?");
        q.required_tools = tools(&["semantic_segmentation", "semantic_segmentation"]);
        q.reference = AnswerSpec::Checklist {
            items: vec![ChecklistItem::BeforeClass { class: a.name().into() }, ChecklistItem::AfterClass { class: b.name().into() }],
        };
        out.push(plain(q, pre, cur, vec![
            act("Segment the previous image.", "semantic_segmentation", "image=pre"),
            act("Segment the current image.", "semantic_segmentation", "image=cur"),
            fin(&format!("The previous image was entirely {a}; the current image is entirely {b}.")),
        ]));
    }

    // Class / Local Area.
    {
        let region = CropRegion::new(16, 0, 16, 16);
        let mut g = random_grid(&mut rng);
        for row in g.iter_mut().take(2) {
            row[2] = Water;
            row[3] = Water;
        }
        let mut h = g;
        h[0][2] = Building;
        h[0][3] = Building;
        h[1][2] = Building;
        let (pre, cur) = (mask(&g), mask(&h));
        let before = dominant_class(&pre.crop(&region).expect("in bounds")).expect("non-empty");
        let q = question("q19", T::Class, Some(Subtype::LocalArea), "In the area I have cropped from the whole image, what was the class before the change occurred?");
        let mut q = with_crop(q, region, CropTarget::Pre);
        q.required_tools = tools(&["semantic_segmentation"]);
        q.reference = AnswerSpec::Categorical { accepted: vec![before.name().into()] };
        out.push(plain(q, pre, cur, vec![
            act("Segment the cropped previous image.", "semantic_segmentation", "image=crppre"),
            fin(&format!("Before the change the cropped area was {before}.")),
        ]));

        let region = CropRegion::new(0, 0, 16, 16);
        let mut g = random_grid(&mut rng);
        let mut h = g;
        for r in 0..2 {
            for c in 0..2 {
                g[r][c] = Forest;
                h[r][c] = Building;
            }
        }
        h[1][1] = Road;
        let (pre, cur) = (mask(&g), mask(&h));
        let a = dominant_class(&pre.crop(&region).expect("in bounds")).expect("non-empty");
        let b = dominant_class(&cur.crop(&region).expect("in bounds")).expect("non-empty");
        let q = question("q20", T::Class, Some(Subtype::LocalArea), "In the cropped area, what was the class before the change and what is it now?");
        let mut q = with_crop(q, region, CropTarget::Both);
        q.required_tools = tools(&["semantic_segmentation", "semantic_segmentation"]);
        q.reference = AnswerSpec::Checklist {
            items: vec![ChecklistItem::BeforeClass { class: a.name().into() }, ChecklistItem::AfterClass { class: b.name().into() }],
        };
        out.push(plain(q, pre, cur, vec![
            act("Segment the cropped previous image.", "semantic_segmentation", "image=crppre"),
            act("Segment the cropped current image.", "semantic_segmentation", "image=crpcur"),
            fin(&format!("The cropped area was {a} before and is {b} now.")),
        ]));
    }
    out
}

/// Wrong-answer scripts with a known tool-selection profile.
fn fault_cases(cases: &[Case]) -> Vec<(Question, Vec<String>, ErrorClass)> {
    let base = |id: &str| cases.iter().find(|c| c.question.id == id).expect("base question");
    let fault = |fid: &str, from: &str, script: Vec<String>, class| {
        let mut q = base(from).question.clone();
        q.id = fid.to_string();
        (q, script, class)
    };
    let q03_numeric = match &base("q03").question.reference {
        AnswerSpec::Numeric { value, .. } => *value,
        _ => unreachable!(),
    };
    let wrong = q03_numeric * 2.0 + 7.0;
    let mut loop_script = Vec::new();
    while loop_script.len() < crate::navigator::DEFAULT_MAX_STEPS {
        loop_script.push(act("Describe the image again.", "image_captioning", "image=pre"));
    }
    vec![
        fault("f01", "q01", vec![
            act("Compare the two dates directly.", "whether_change", "pre=pre, cur=cur"),
            fin("No, the images are identical."),
        ], ErrorClass::Misunderstood),
        fault("f02", "q03", vec![
            act("Detect the changed pixels first.", "binary_change_detection", "pre=pre, cur=cur"),
            act("Count the changed pixels.", "pixel_counting", "image=change"),
            fin(&format!("About {wrong:.2}% of the image area has changed.")),
        ], ErrorClass::Misunderstood),
        fault("f03", "q03", vec![
            act("Detect the changed pixels.", "binary_change_detection", "pre=pre, cur=cur"),
            fin(&format!("Roughly {wrong:.2}% changed.")),
        ], ErrorClass::InsufficientTools),
        fault("f04", "q05", vec![
            act("Segment the previous image.", "semantic_segmentation", "image=pre"),
            act("Count water.", "pixel_counting", "image=landuse, class=water"),
            fin("The water bodies shrank by 99.00%."),
        ], ErrorClass::InsufficientTools),
        fault("f05", "q01", vec![
            act("Compare the two dates directly.", "whether_change", "pre=pre, cur=cur"),
            act("Describe the previous image as well.", "image_captioning", "image=pre"),
            fin("No, nothing changed."),
        ], ErrorClass::IncorrectTools),
        fault("f06", "q17", vec![
            act("Classify the previous scene.", "scene_classification", "image=pre"),
            act("Classify the current scene.", "scene_classification", "image=cur"),
            act("Look for objects too.", "object_detection", "image=cur"),
            fin("The whole area was building in the previous image and is farmland now."),
        ], ErrorClass::IncorrectTools),
        fault("f07", "q11", vec![fin("I cannot tell from the images.")], ErrorClass::TooComplex),
        fault("f08", "q09", loop_script, ErrorClass::TooComplex),
    ]
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CorpusError> {
    fs::write(path, serde_json::to_vec_pretty(value).expect("serializable"))?;
    Ok(())
}

fn write_case(dir: &Path, case: &Case) -> Result<(), CorpusError> {
    let id = &case.question.id;
    fs::write(
        dir.join(format!("images/{id}_pre.png")),
        raster::encode_rgb(&render(&case.pre, case.pre_dets.as_ref()))?,
    )?;
    fs::write(
        dir.join(format!("images/{id}_cur.png")),
        raster::encode_rgb(&render(&case.cur, case.cur_dets.as_ref()))?,
    )?;
    let tools = dir.join("tools").join(id);
    for t in ["semantic_segmentation", "binary_change_detection", "scene_classification", "image_captioning", "object_detection"] {
        fs::create_dir_all(tools.join(t))?;
    }
    for (side, labels) in [("pre", &case.pre), ("cur", &case.cur)] {
        fs::write(tools.join(format!("semantic_segmentation/{side}.png")), raster::encode_label_mask(labels)?)?;
        let dominant = dominant_class(labels)?;
        fs::write(tools.join(format!("scene_classification/{side}.txt")), format!("{dominant}\n"))?;
        fs::write(
            tools.join(format!("image_captioning/{side}.txt")),
            format!("an aerial view dominated by {dominant}\n"),
        )?;
    }
    let diff = case.pre.difference(&case.cur)?;
    fs::write(tools.join("binary_change_detection/pair.png"), raster::encode_change_mask(&diff)?)?;
    for (side, dets) in [("pre", &case.pre_dets), ("cur", &case.cur_dets)] {
        let empty = DetectionSet::default();
        write_json(&tools.join(format!("object_detection/{side}.json")), dets.as_ref().unwrap_or(&empty))?;
    }
    write_json(&dir.join(format!("scripts/{id}.json")), &case.script)?;
    Ok(())
}

/// Builds the corpus in memory without touching the filesystem.
pub fn build() -> Corpus {
    let cases = cases();
    let faults = fault_cases(&cases);
    Corpus {
        questions: cases.iter().map(|c| c.question.clone()).collect(),
        expected_faults: faults.iter().map(|(q, _, c)| (q.id.clone(), *c)).collect(),
        faults: faults.into_iter().map(|(q, _, _)| q).collect(),
    }
}

/// Writes the corpus under `dir`.
pub fn write_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    for sub in ["images", "tools", "scripts"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let cases = cases();
    for case in &cases {
        write_case(dir, case)?;
    }
    let faults = fault_cases(&cases);
    for (q, script, _) in &faults {
        write_json(&dir.join(format!("scripts/{}.json", q.id)), script)?;
    }
    let questions: Vec<Question> = cases.iter().map(|c| c.question.clone()).collect();
    let fault_questions: Vec<Question> = faults.iter().map(|(q, _, _)| q.clone()).collect();
    write_dataset(&dir.join("questions.jsonl"), &questions)?;
    write_dataset(&dir.join("faults.jsonl"), &fault_questions)?;
    Ok(Corpus {
        questions,
        expected_faults: faults.iter().map(|(q, _, c)| (q.id.clone(), *c)).collect(),
        faults: fault_questions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::bucket_difficulty;
    use std::collections::BTreeSet;

    #[test]
    fn covers_every_cell_twice() {
        let c = build();
        assert_eq!(c.questions.len(), 20);
        for q in &c.questions {
            q.validate().unwrap();
        }
        let mut cells: Vec<(QuestionType, Option<Subtype>)> = Vec::new();
        for qt in QuestionType::ALL {
            if qt.subtypes().is_empty() {
                cells.push((qt, None));
            }
            cells.extend(qt.subtypes().iter().map(|s| (qt, Some(*s))));
        }
        assert_eq!(cells.len(), 10);
        for (qt, sub) in cells {
            let n = c.questions.iter().filter(|q| q.qtype == qt && q.subtype == sub).count();
            assert_eq!(n, 2, "{qt:?} {sub:?}");
        }
        let buckets: BTreeSet<_> = c.questions.iter().map(|q| bucket_difficulty(q.required_tools.len())).collect();
        assert_eq!(buckets.len(), 3);
    }

    #[test]
    fn scripts_use_exactly_the_required_tools() {
        for case in cases() {
            let used: Vec<String> = case
                .script
                .iter()
                .filter_map(|s| s.lines().find_map(|l| l.strip_prefix("Action: ")).map(str::to_string))
                .collect();
            let mut a = used.clone();
            let mut b = case.question.required_tools.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{}", case.question.id);
        }
    }
}
