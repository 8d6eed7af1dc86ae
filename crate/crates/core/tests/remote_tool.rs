mod mock;

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use changescope_core::navigator::session::{PayloadKind, Session, Temporal};
use changescope_core::raster::{decode_rgb, encode_label_mask, LabelMask, LandCover};
use changescope_core::toolkit::{RemoteProduct, RemoteRequest, RemoteResponse, ToolError, Toolkit};
use image::RgbImage;

/// Segments every image it receives into a left-water/right-building mask.
async fn segment(Json(req): Json<RemoteRequest>) -> Result<Json<RemoteResponse>, StatusCode> {
    if req.version != 1 || req.tool != "semantic_segmentation" {
        return Err(StatusCode::BAD_REQUEST);
    }
    let mut images = Vec::new();
    for img in &req.images {
        let rgb = decode_rgb(&B64.decode(&img.png_base64).unwrap()).map_err(|_| StatusCode::BAD_REQUEST)?;
        let w = rgb.width();
        let mask = LabelMask::from_fn(w, rgb.height(), |x, _| {
            if x < w / 2 { LandCover::Water } else { LandCover::Building }
        });
        images.push(RemoteProduct {
            parent_id: img.id.clone(),
            tag: "landuse".into(),
            kind: PayloadKind::Labels,
            png_base64: B64.encode(encode_label_mask(&mask).unwrap()),
        });
    }
    let names: Vec<&str> = req.images.iter().map(|i| i.filename.as_str()).collect();
    Ok(Json(RemoteResponse {
        observation: format!("segmented {} ({})", names.join(", "), req.input),
        images,
    }))
}

fn session() -> Session {
    let mut s = Session::deterministic(3);
    let pre = s.register_rgb(RgbImage::new(8, 6), Temporal::Pre, None).unwrap();
    s.register_rgb(RgbImage::new(8, 6), Temporal::Cur, Some(pre.link_id.as_str())).unwrap();
    s
}

#[test]
fn remote_products_become_derived_images() {
    let base = mock::spawn(Router::new().route("/segment", post(segment)));
    let mut kit = Toolkit::standard(None);
    kit.route_remote("semantic_segmentation", &format!("{base}/segment")).unwrap();
    let mut s = session();
    let pre = s.resolve("pre").unwrap().record.clone();

    let out = kit.invoke(&mut s, "semantic_segmentation", "image=pre").unwrap();
    assert!(out.observation.starts_with(&format!("segmented {} (image=pre)", pre.filename)), "{}", out.observation);
    assert_eq!(out.produced_images.len(), 1);
    let derived = s.get(&out.produced_images[0]).unwrap().record.clone();
    assert_eq!(derived.link_id, pre.self_id);
    assert_eq!(derived.role.token(), "landuse");
    assert!(out.observation.contains(&format!("image: {}", derived.filename)));

    // the product feeds the built-in arithmetic like any local mask
    let counted = kit.invoke(&mut s, "pixel_counting", &format!("image={}, class=water", derived.self_id)).unwrap();
    assert!(counted.observation.contains("24"), "{}", counted.observation);
}

#[test]
fn remote_failures_surface_as_tool_errors() {
    let base = mock::spawn(Router::new().route("/segment", post(segment)));
    let mut kit = Toolkit::standard(None);
    kit.route_remote("semantic_segmentation", &format!("{base}/missing")).unwrap();
    let mut s = session();
    assert!(matches!(kit.invoke(&mut s, "semantic_segmentation", "image=pre"), Err(ToolError::Remote(_))));
    assert_eq!(s.image_count(), 2);
    assert!(kit.route_remote("teleport", &base).is_err());
}
