use crate::asset_library::ImageTexture;

/// Rendered frame; same layout as a texture (RGBA8, top-left origin).
pub type Image = ImageTexture;

/// Encodes as 8-bit RGBA, non-interlaced, with fixed compression and filter
/// settings so equal pixels always give equal bytes.
pub fn encode_png(image: &Image) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width, image.height);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        enc.set_filter(png::FilterType::Sub);
        enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
        let mut writer = enc.write_header().expect("writing to a Vec cannot fail");
        writer
            .write_image_data(&image.pixels)
            .expect("pixel buffer matches the header");
    }
    out
}
