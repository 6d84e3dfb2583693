//! 8-bit greyscale encoders for masks and images.

use ndarray::ArrayView2;

use crate::error::{CliError, Result};

/// Binary PGM (P5). Rows of the array become image rows.
pub fn encode_pgm(pixels: ArrayView2<'_, u8>) -> Vec<u8> {
    let (rows, cols) = pixels.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(pixels.iter().copied());
    out
}

pub fn encode_png(pixels: ArrayView2<'_, u8>) -> Result<Vec<u8>> {
    let (rows, cols) = pixels.dim();
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, cols as u32, rows as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let data: Vec<u8> = pixels.iter().copied().collect();
        let mut writer = encoder.write_header().map_err(CliError::invalid)?;
        writer.write_image_data(&data).map_err(CliError::invalid)?;
        writer.finish().map_err(CliError::invalid)?;
    }
    Ok(out)
}

/// Maps a `{0, 1}` mask to `{0, 255}`.
pub fn mask_pixels(mask: ArrayView2<'_, u8>) -> Result<ndarray::Array2<u8>> {
    if let Some(v) = mask.iter().find(|&&v| v > 1) {
        return Err(CliError::invalid(format!(
            "mask contains value {v}; expected only 0 and 1"
        )));
    }
    Ok(mask.mapv(|v| v * 255))
}

/// Min-max scales an image to `[0, 255]`. A constant image maps to zeros.
pub fn scaled_pixels(image: ArrayView2<'_, f32>) -> Result<ndarray::Array2<u8>> {
    if image.iter().any(|v| !v.is_finite()) {
        return Err(CliError::invalid("image contains non-finite values"));
    }
    let lo = image.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = image.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let range = f64::from(hi) - f64::from(lo);
    Ok(image.mapv(|v| {
        if range > 0.0 {
            ((f64::from(v) - f64::from(lo)) / range * 255.0).round() as u8
        } else {
            0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn pgm_header_and_payload() {
        let px = Array2::<u8>::zeros((32, 32));
        let bytes = encode_pgm(px.view());
        assert!(bytes.starts_with(b"P5\n32 32\n255\n"));
        assert_eq!(bytes.len(), 13 + 1024);
        assert!(bytes[13..].iter().all(|&b| b == 0));
    }

    #[test]
    fn pgm_width_comes_from_columns() {
        let px = Array2::<u8>::zeros((2, 5));
        assert!(encode_pgm(px.view()).starts_with(b"P5\n5 2\n255\n"));
    }

    #[test]
    fn png_signature() {
        let px = Array2::<u8>::from_elem((4, 3), 7);
        let bytes = encode_png(px.view()).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    }

    #[test]
    fn pixel_mapping() {
        let m = Array2::from_shape_vec((1, 3), vec![0u8, 1, 1]).unwrap();
        assert_eq!(mask_pixels(m.view()).unwrap().as_slice().unwrap(), &[0, 255, 255]);
        let bad = Array2::from_shape_vec((1, 2), vec![0u8, 3]).unwrap();
        assert!(mask_pixels(bad.view()).is_err());

        let img = Array2::from_shape_vec((1, 3), vec![-1.0f32, 0.0, 1.0]).unwrap();
        assert_eq!(scaled_pixels(img.view()).unwrap().as_slice().unwrap(), &[0, 128, 255]);
        let flat = Array2::from_elem((2, 2), 3.0f32);
        assert!(scaled_pixels(flat.view()).unwrap().iter().all(|&v| v == 0));
    }
}
