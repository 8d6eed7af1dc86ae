//! Brute-force oracles and random case generators shared by the property and
//! acceptance suites. Nothing here calls the code under test to compute an
//! expected value.
#![allow(dead_code)]

use changescope_core::llm::ScriptedBackend;
use changescope_core::navigator::naming::{parse_filename, ImageRole};
use changescope_core::navigator::parser::parse_step;
use changescope_core::navigator::session::{ImagePayload, Session, Temporal};
use changescope_core::navigator::{run_query, AgentConfig, AgentStep, StepBody};
use changescope_core::raster::{
    class_transition_matrix, count_class_pixels, count_components, changed_fraction, CropRegion, LabelMask,
    LandCover, NUM_CLASSES,
};
use changescope_core::toolkit::Toolkit;
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labels drawn from a small palette so that masks have real regions rather
/// than salt-and-pepper noise.
pub fn random_mask(rng: &mut impl Rng, w: u32, h: u32) -> LabelMask {
    let k = rng.random_range(1..=NUM_CLASSES);
    let palette: Vec<u8> = (0..k).map(|_| rng.random_range(0..NUM_CLASSES as u8)).collect();
    let labels = (0..w * h).map(|_| palette[rng.random_range(0..k)]).collect();
    LabelMask::new(w, h, labels).unwrap()
}

pub fn random_pair(rng: &mut impl Rng) -> (LabelMask, LabelMask) {
    let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
    (random_mask(rng, w, h), random_mask(rng, w, h))
}

// ---- raster oracles ----

pub fn oracle_class_pixels(mask: &LabelMask, class: usize) -> u64 {
    let mut n = 0;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y).index() == class {
                n += 1;
            }
        }
    }
    n
}

/// Changed pixels as a grid of booleans, row-major.
pub fn oracle_changed(pre: &LabelMask, cur: &LabelMask) -> Vec<Vec<bool>> {
    (0..pre.height())
        .map(|y| (0..pre.width()).map(|x| pre.get(x, y) != cur.get(x, y)).collect())
        .collect()
}

pub fn oracle_transitions(pre: &LabelMask, cur: &LabelMask) -> [[u64; NUM_CLASSES]; NUM_CLASSES] {
    let mut m = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for y in 0..pre.height() {
        for x in 0..pre.width() {
            m[pre.get(x, y).index()][cur.get(x, y).index()] += 1;
        }
    }
    m
}

/// 4-connected flood fill with an explicit stack.
pub fn oracle_components(grid: &[Vec<bool>]) -> u64 {
    let h = grid.len();
    let w = grid.first().map_or(0, Vec::len);
    let mut seen = vec![vec![false; w]; h];
    let mut count = 0;
    for sy in 0..h {
        for sx in 0..w {
            if !grid[sy][sx] || seen[sy][sx] {
                continue;
            }
            count += 1;
            let mut stack = vec![(sx, sy)];
            seen[sy][sx] = true;
            while let Some((x, y)) = stack.pop() {
                let mut visit = |nx: usize, ny: usize| {
                    if grid[ny][nx] && !seen[ny][nx] {
                        seen[ny][nx] = true;
                        stack.push((nx, ny));
                    }
                };
                if x > 0 {
                    visit(x - 1, y);
                }
                if x + 1 < w {
                    visit(x + 1, y);
                }
                if y > 0 {
                    visit(x, y - 1);
                }
                if y + 1 < h {
                    visit(x, y + 1);
                }
            }
        }
    }
    count
}

/// Compares every raster operation on one pair against the oracles.
pub fn check_raster_pair(pre: &LabelMask, cur: &LabelMask) -> Result<(), String> {
    let size = format!("{}x{}", pre.width(), pre.height());
    for class in 0..NUM_CLASSES {
        for (name, m) in [("pre", pre), ("cur", cur)] {
            let got = count_class_pixels(m, class).unwrap();
            let want = oracle_class_pixels(m, class);
            if got != want {
                return Err(format!("{size} {name} class {class}: pixels {got} != {want}"));
            }
        }
    }
    let grid = oracle_changed(pre, cur);
    let changed: u64 = grid.iter().flatten().filter(|&&c| c).count() as u64;
    let diff = pre.difference(cur).unwrap();
    if diff.changed_count() != changed {
        return Err(format!("{size}: changed {} != {changed}", diff.changed_count()));
    }
    // same integer ratio computed on both sides
    let total = pre.width() as u64 * pre.height() as u64;
    if changed_fraction(&diff) != changed as f64 / total as f64 {
        return Err(format!("{size}: change fraction differs"));
    }
    let tm = class_transition_matrix(pre, cur).unwrap();
    if tm.counts != oracle_transitions(pre, cur) {
        return Err(format!("{size}: transition matrix differs"));
    }
    let (got, want) = (count_components(&diff), oracle_components(&grid));
    if got != want {
        return Err(format!("{size}: components {got} != {want}"));
    }
    Ok(())
}

// ---- tool-selection oracles ----

pub const TOOL_NAMES: [&str; 6] = [
    "semantic_segmentation",
    "pixel_counting",
    "object_counting",
    "binary_change_detection",
    "scene_classification",
    "whether_change",
];

pub fn random_tools(rng: &mut impl Rng, max: usize) -> Vec<String> {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| TOOL_NAMES[rng.random_range(0..TOOL_NAMES.len())].to_string()).collect()
}

/// Matched count by striking each used tool from a copy of the requirement.
pub fn oracle_matched(used: &[String], required: &[String]) -> usize {
    let mut pool: Vec<&String> = required.iter().collect();
    let mut hits = 0;
    for u in used {
        if let Some(i) = pool.iter().position(|r| *r == u) {
            pool.swap_remove(i);
            hits += 1;
        }
    }
    hits
}

fn is_sub_multiset(a: &[String], b: &[String]) -> bool {
    oracle_matched(a, b) == a.len()
}

/// Checks precision and recall of one pair against the oracle and the
/// subset/superset/equality identities.
pub fn check_pr(used: &[String], required: &[String]) -> Result<(), String> {
    use changescope_core::eval::{precision, recall};
    let hits = oracle_matched(used, required) as f64;
    let p = precision(used, required);
    let want_p = if used.is_empty() { 0.0 } else { hits / used.len() as f64 };
    if p != want_p || !(0.0..=1.0).contains(&p) {
        return Err(format!("{used:?} vs {required:?}: P {p} != {want_p}"));
    }
    if required.is_empty() {
        return match recall(used, required) {
            Err(_) => Ok(()),
            Ok(r) => Err(format!("recall over an empty requirement gave {r}")),
        };
    }
    let r = recall(used, required).unwrap();
    let want_r = hits / required.len() as f64;
    if r != want_r || !(0.0..=1.0).contains(&r) {
        return Err(format!("{used:?} vs {required:?}: R {r} != {want_r}"));
    }
    if !used.is_empty() && is_sub_multiset(used, required) && p != 1.0 {
        return Err(format!("{used:?} is inside {required:?} but P={p}"));
    }
    if is_sub_multiset(required, used) && r != 1.0 {
        return Err(format!("{used:?} covers {required:?} but R={r}"));
    }
    let mut a = used.to_vec();
    let mut b = required.to_vec();
    a.sort();
    b.sort();
    if a == b && (p != 1.0 || r != 1.0) {
        return Err(format!("{used:?} equals {required:?} but P={p} R={r}"));
    }
    Ok(())
}

/// A used list built to be a subset, superset or permutation of `required`.
pub fn shaped_pair(rng: &mut impl Rng) -> (Vec<String>, Vec<String>) {
    let mut required = random_tools(rng, 6);
    if required.is_empty() {
        required.push(TOOL_NAMES[0].to_string());
    }
    let mut used = required.clone();
    match rng.random_range(0..4) {
        0 => {
            let keep = rng.random_range(1..=used.len());
            used.truncate(keep);
        }
        1 => used.extend(random_tools(rng, 3)),
        2 => used.reverse(),
        _ => used = random_tools(rng, 6),
    }
    (used, required)
}

// ---- naming protocol ----

fn rgb(w: u32, h: u32, rng: &mut impl Rng) -> RgbImage {
    let shade: u8 = rng.random();
    RgbImage::from_pixel(w, h, image::Rgb([shade, shade / 2, 255 - shade]))
}

/// Runs one random sequence of register/crop/derive operations and checks
/// filenames, crop tokens and lineage after every step.
pub fn check_naming_sequence(seed: u64) -> Result<usize, String> {
    let mut rng = rng(seed);
    let mut session = Session::deterministic(seed);
    let steps = rng.random_range(2..12);
    for _ in 0..steps {
        let ids: Vec<String> = session.records().map(|r| r.self_id.to_string()).collect();
        let op = if ids.is_empty() { 0 } else { rng.random_range(0..3) };
        match op {
            0 => {
                let (w, h) = (rng.random_range(2..=24), rng.random_range(2..=24));
                let pre = session
                    .register_rgb(rgb(w, h, &mut rng), Temporal::Pre, None)
                    .map_err(|e| e.to_string())?;
                session
                    .register_rgb(rgb(w, h, &mut rng), Temporal::Cur, Some(pre.link_id.as_str()))
                    .map_err(|e| e.to_string())?;
            }
            1 => {
                let id = &ids[rng.random_range(0..ids.len())];
                let parent = session.get(id).unwrap().record.clone();
                let x = rng.random_range(0..parent.width);
                let y = rng.random_range(0..parent.height);
                let region = CropRegion::new(
                    x,
                    y,
                    rng.random_range(1..=parent.width - x),
                    rng.random_range(1..=parent.height - y),
                );
                match (session.crop_and_register(id, region), &parent.role) {
                    (Ok(rec), ImageRole::Pre) if rec.role.token() == "crppre" => {}
                    (Ok(rec), ImageRole::Cur) if rec.role.token() == "crpcur" => {}
                    (Err(_), role) if !role.is_root() => {}
                    (got, role) => return Err(format!("crop of {role}: {got:?}")),
                }
            }
            _ => {
                let id = &ids[rng.random_range(0..ids.len())];
                let parent = session.get(id).unwrap().record.clone();
                let tag = ["landuse", "change", "objects2", "scene"][rng.random_range(0..4)];
                let mask = LabelMask::filled(parent.width, parent.height, LandCover::ALL[rng.random_range(0..NUM_CLASSES)]);
                session
                    .register_derived(id, tag, ImagePayload::Labels(mask))
                    .map_err(|e| e.to_string())?;
            }
        }
        check_session_names(&session)?;
    }
    Ok(session.image_count())
}

fn check_session_names(session: &Session) -> Result<(), String> {
    let mut seen = HashSet::new();
    for rec in session.records() {
        let id = rec.self_id.as_str();
        if id.len() != 6 || !id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
            return Err(format!("bad id {id}"));
        }
        if !seen.insert(id.to_string()) {
            return Err(format!("duplicate id {id}"));
        }
        let (s, l, role) = parse_filename(&rec.filename).map_err(|e| e.to_string())?;
        if (s.as_str(), l.as_str(), &role) != (id, rec.link_id.as_str(), &rec.role) {
            return Err(format!("{} does not round-trip", rec.filename));
        }
        let expected = format!("{}_{}_{}.png", rec.self_id, rec.link_id, rec.role.token());
        if rec.filename != expected {
            return Err(format!("{} != {expected}", rec.filename));
        }
        let chain = session.lineage(id).map_err(|e| e.to_string())?;
        let mut on_chain = HashSet::new();
        for r in &chain {
            if !on_chain.insert(r.self_id.as_str()) {
                return Err(format!("cycle through {}", r.self_id));
            }
        }
        if !chain.last().unwrap().role.is_root() {
            return Err(format!("lineage of {id} does not end at a root"));
        }
    }
    Ok(())
}

// ---- parser golden files ----

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Step(AgentStep),
    Malformed(String),
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/parser")
}

pub fn golden_cases() -> Vec<(String, String, Expected)> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(golden_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&p).unwrap();
            let expected = serde_json::from_slice(&std::fs::read(p.with_extension("json")).unwrap()).unwrap();
            (name, text, expected)
        })
        .collect()
}

pub fn check_golden(toolkit: &Toolkit) -> Result<usize, String> {
    let cases = golden_cases();
    for (name, text, expected) in &cases {
        match (parse_step(text, toolkit), expected) {
            (Ok(got), Expected::Step(want)) if &got == want => {}
            (Err(e), Expected::Malformed(reason)) if e.reason == reason => {}
            (got, want) => return Err(format!("{name}: got {got:?}, expected {want:?}")),
        }
    }
    Ok(cases.len())
}

/// Runs the agent on a completion that carries a fabricated observation and
/// reports whether that text reached the trace.
pub fn fabricated_observation_leaks(marker: &str, tool: &str) -> Result<bool, String> {
    let mut session = Session::deterministic(1);
    let mut r = rng(2);
    let pre = session.register_rgb(rgb(8, 8, &mut r), Temporal::Pre, None).unwrap();
    session
        .register_rgb(rgb(8, 8, &mut r), Temporal::Cur, Some(pre.link_id.as_str()))
        .unwrap();
    let kit = Toolkit::standard(None);
    let mut backend = ScriptedBackend::new([
        format!("Thought: look\nAction: {tool}\nAction Input: image=pre\nObservation: {marker}\nThought: done\nFinal Answer: {marker}"),
        "Thought: I now know the final answer\nFinal Answer: done".to_string(),
    ]);
    let trace = run_query(&mut session, &kit, &mut backend, "What changed?", &AgentConfig::default())
        .map_err(|e| e.to_string())?;
    Ok(trace.steps.iter().any(|s| match &s.body {
        StepBody::Action { observation, .. } => observation.contains(marker),
        StepBody::Final { final_answer } => final_answer.contains(marker),
    }))
}

// ---- statistics oracles ----

/// Upper tail of chi-squared(1) by composite Simpson integration of the
/// density on (0, x], substituting t = u^2 to remove the singularity at 0.
pub fn chi2_1_sf(x: f64) -> f64 {
    // P(X <= x) = integral_0^sqrt(x) 2 * phi(u) du with phi the normal density
    let upper = x.sqrt();
    let n = 20_000;
    let h = upper / n as f64;
    let f = |u: f64| 2.0 * (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(upper);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - s * h / 3.0
}

// ---- segmentation oracles ----

pub fn mask4(rows: [[u8; 4]; 4]) -> LabelMask {
    LabelMask::new(4, 4, rows.iter().flatten().copied().collect()).unwrap()
}

/// Hand-computed 4x4 cases: (pred, gt, OA, mIoU, mean F1).
pub fn seg_cases() -> Vec<(&'static str, LabelMask, LabelMask, f64, f64, f64)> {
    let gt_a = mask4([[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 2, 2], [2, 2, 2, 2]]);
    let pred_a = mask4([[0, 0, 1, 1], [0, 1, 1, 1], [2, 2, 2, 2], [2, 2, 2, 0]]);
    // class 0: tp 3, fp 1, fn 1 -> IoU 3/5, F1 6/8
    // class 1: tp 4, fp 1, fn 0 -> IoU 4/5, F1 8/9
    // class 2: tp 7, fp 0, fn 1 -> IoU 7/8, F1 14/15
    let a = (
        "three classes, two errors",
        pred_a,
        gt_a,
        14.0 / 16.0,
        (3.0 / 5.0 + 4.0 / 5.0 + 7.0 / 8.0) / 3.0,
        (6.0 / 8.0 + 8.0 / 9.0 + 14.0 / 15.0) / 3.0,
    );
    let gt_b = mask4([[5; 4], [5; 4], [5; 4], [3, 3, 3, 3]]);
    let pred_b = mask4([[5; 4], [5; 4], [3, 3, 5, 5], [3, 3, 3, 3]]);
    // class 5: tp 10, fp 0, fn 2 -> IoU 10/12, F1 20/22
    // class 3: tp 4, fp 2, fn 0 -> IoU 4/6, F1 8/10
    let b = (
        "two classes, absent classes excluded",
        pred_b,
        gt_b,
        14.0 / 16.0,
        (10.0 / 12.0 + 4.0 / 6.0) / 2.0,
        (20.0 / 22.0 + 8.0 / 10.0) / 2.0,
    );
    let gt_c = mask4([[4; 4]; 4]);
    let pred_c = mask4([[6; 4]; 4]);
    // both present classes have IoU 0
    let c = ("fully wrong", pred_c, gt_c, 0.0, 0.0, 0.0);
    vec![a, b, c]
}
