//! PNG codecs for masks and RGB imagery.
//!
//! Label masks are written as 8-bit indexed PNGs carrying [`LABEL_PALETTE`];
//! change masks as 8-bit greyscale with 0 / 255.

use super::{ChangeMask, LabelMask, RasterError, Result, NUM_CLASSES};
use image::{ImageEncoder, RgbImage};
use std::io::Cursor;

/// RGB colour per class, in class-index order.
pub const LABEL_PALETTE: [[u8; 3]; NUM_CLASSES] = [
    [255, 255, 255], // background
    [0, 0, 255],     // water
    [159, 129, 183], // barren
    [255, 255, 0],   // road
    [255, 0, 0],     // building
    [0, 255, 0],     // forest
    [255, 195, 128], // farmland
];

fn png_err(e: impl std::fmt::Display) -> RasterError {
    RasterError::Png(e.to_string())
}

pub fn encode_label_mask(mask: &LabelMask) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, mask.width(), mask.height());
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(LABEL_PALETTE.concat());
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(mask.labels()).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Accepts indexed PNGs (palette indices are the labels), 8-bit greyscale
/// (grey values are the labels) and RGB(A) images painted with
/// [`LABEL_PALETTE`].
pub fn decode_label_mask(bytes: &[u8]) -> Result<LabelMask> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let (color, depth) = reader.output_color_type();
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| png_err("image too large"))?];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let (width, height) = (frame.width, frame.height);
    let pixels = width as usize * height as usize;

    match (color, depth) {
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Eight) => {
            let mut labels = Vec::with_capacity(pixels);
            for row in buf[..frame.buffer_size()].chunks(frame.line_size) {
                labels.extend_from_slice(&row[..width as usize]);
            }
            LabelMask::new(width, height, labels)
        }
        (png::ColorType::Rgb | png::ColorType::Rgba, png::BitDepth::Eight) => {
            let rgb = decode_rgb(bytes)?;
            let labels = rgb
                .pixels()
                .map(|p| {
                    LABEL_PALETTE
                        .iter()
                        .position(|c| *c == p.0)
                        .map(|i| i as u8)
                        .ok_or_else(|| png_err(format!("colour {:?} is not a class colour", p.0)))
                })
                .collect::<Result<Vec<_>>>()?;
            LabelMask::new(width, height, labels)
        }
        other => Err(png_err(format!("unsupported label mask format {other:?}"))),
    }
}

pub fn encode_change_mask(mask: &ChangeMask) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.cells().iter().map(|&c| if c { 255 } else { 0 }).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&data, mask.width(), mask.height(), image::ExtendedColorType::L8)
        .map_err(png_err)?;
    Ok(out)
}

/// Any non-zero luma counts as changed.
pub fn decode_change_mask(bytes: &[u8]) -> Result<ChangeMask> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(png_err)?
        .to_luma8();
    let (w, h) = img.dimensions();
    ChangeMask::new(w, h, img.pixels().map(|p| p.0[0] != 0).collect())
}

pub fn encode_rgb(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(png_err)?;
    Ok(out)
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage> {
    Ok(image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(png_err)?
        .to_rgb8())
}
