use changescope_core::llm::{RecordingBackend, ScriptedBackend};
use changescope_core::navigator::session::{Session, Temporal};
use changescope_core::navigator::{run_query, AgentConfig};
use changescope_core::raster::{encode_label_mask, CropRegion, LabelMask, LandCover};
use changescope_core::toolkit::{FixtureStore, Toolkit};
use image::RgbImage;
use std::path::Path;

fn write_mask(root: &Path, key: &str, class: LandCover) {
    let dir = root.join("semantic_segmentation");
    std::fs::create_dir_all(&dir).unwrap();
    let mask = LabelMask::filled(8, 8, class);
    std::fs::write(dir.join(format!("{key}.png")), encode_label_mask(&mask).unwrap()).unwrap();
}

fn pair(seed: u64) -> Session {
    let mut s = Session::deterministic(seed);
    let pre = s.register_rgb(RgbImage::new(8, 8), Temporal::Pre, None).unwrap();
    s.register_rgb(RgbImage::new(8, 8), Temporal::Cur, Some(pre.link_id.as_str())).unwrap();
    s
}

fn segment_and_count(kit: &Toolkit, s: &mut Session, image: &str, class: &str) -> String {
    kit.invoke(s, "semantic_segmentation", &format!("image={image}")).unwrap();
    kit.invoke(s, "pixel_counting", &format!("image=landuse, class={class}")).unwrap().observation
}

#[test]
fn id_keys_take_precedence_over_generic_keys() {
    let dir = tempfile::tempdir().unwrap();
    write_mask(dir.path(), "pre", LandCover::Water);
    let kit = Toolkit::standard(Some(FixtureStore::new(dir.path())));

    let mut s = pair(11);
    assert!(segment_and_count(&kit, &mut s, "pre", "water").starts_with("water pixels: 64 "));

    let pre_id = s.resolve("pre").unwrap().record.self_id.to_string();
    write_mask(dir.path(), &pre_id, LandCover::Building);
    let mut s = pair(11);
    assert!(segment_and_count(&kit, &mut s, "pre", "building").starts_with("building pixels: 64 "));
    assert!(segment_and_count(&kit, &mut s, "pre", "water").starts_with("water pixels: 0 "));
}

#[test]
fn crops_fall_back_to_the_generic_root_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_mask(dir.path(), "pre", LandCover::Forest);
    let kit = Toolkit::standard(Some(FixtureStore::new(dir.path())));
    let mut s = pair(12);
    let pre = s.resolve("pre").unwrap().record.self_id.to_string();
    let crop = s.crop_and_register(&pre, CropRegion::new(2, 2, 4, 3)).unwrap();
    let out = segment_and_count(&kit, &mut s, crop.self_id.as_str(), "forest");
    assert!(out.starts_with("forest pixels: 12 "), "{out}");
}

#[test]
fn recorded_run_replays_to_the_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    write_mask(dir.path(), "pre", LandCover::Water);
    let kit = Toolkit::standard(Some(FixtureStore::new(dir.path())));
    let script = [
        "Thought: segment first\nAction: semantic_segmentation\nAction Input: image=pre",
        "Thought: count water\nAction: pixel_counting\nAction Input: image=landuse, class=water",
        "Thought: I now know the final answer\nFinal Answer: 64 water pixels.",
    ];
    let sink = dir.path().join("recorded.json");
    let mut rec = RecordingBackend::new(ScriptedBackend::new(script), &sink).unwrap();
    let first = run_query(&mut pair(5), &kit, &mut rec, "How much water?", &AgentConfig::default()).unwrap();
    assert_eq!(rec.calls().len(), 3);

    let mut replay = ScriptedBackend::from_file(&sink).unwrap();
    let second = run_query(&mut pair(5), &kit, &mut replay, "How much water?", &AgentConfig::default()).unwrap();
    assert_eq!(first.to_json(), second.to_json());
    assert_eq!(replay.remaining(), 0);
}
