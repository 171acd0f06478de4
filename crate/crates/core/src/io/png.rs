//! Grayscale PNG input and rendered PNG output.

use std::f64::consts::PI;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageError, Luma};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};

fn image_error(e: ImageError) -> Error {
    match e {
        ImageError::IoError(io) => Error::Io(io),
        other => Error::Validation(format!("cannot decode image: {other}")),
    }
}

/// Loads a grayscale image scaled to [0, 1]: 8-bit by 1/255, 16-bit by 1/65535.
/// Colour images are converted to luma first.
pub fn read_gray(path: &Path) -> Result<RealField> {
    let img = image::open(path).map_err(image_error)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            img.to_luma16().pixels().map(|p| p.0[0] as f64 / 65535.0).collect()
        }
        other => other.to_luma8().pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
    };
    RealField::new(h, w, values)
}

/// Phase in [-pi, pi] mapped linearly onto 0..=255.
pub fn render_phase(field: &ComplexField) -> GrayImage {
    to_image(field.rows(), field.cols(), field.phase().data().iter().map(|p| (p + PI) / (2.0 * PI)))
}

/// Amplitude scaled by its maximum onto 0..=255.
pub fn render_amplitude(field: &ComplexField) -> GrayImage {
    let amp = field.amplitude();
    let max = amp.data().iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    to_image(field.rows(), field.cols(), amp.data().iter().map(|a| a * scale))
}

fn to_image(rows: usize, cols: usize, unit: impl Iterator<Item = f64>) -> GrayImage {
    let pixels: Vec<u8> = unit.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    GrayImage::from_raw(cols as u32, rows as u32, pixels).expect("buffer matches dimensions")
}

pub fn write(path: &Path, image: &GrayImage) -> Result<()> {
    image.save_with_format(path, image::ImageFormat::Png).map_err(image_error)
}

pub fn write_gray8(path: &Path, rows: usize, cols: usize, values: &[u8]) -> Result<()> {
    let img = GrayImage::from_raw(cols as u32, rows as u32, values.to_vec())
        .ok_or_else(|| Error::Dimension("pixel buffer does not match dimensions".into()))?;
    write(path, &img)
}

pub fn write_gray16(path: &Path, rows: usize, cols: usize, values: &[u16]) -> Result<()> {
    let img = image::ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(cols as u32, rows as u32, values.to_vec())
        .ok_or_else(|| Error::Dimension("pixel buffer does not match dimensions".into()))?;
    img.save_with_format(path, image::ImageFormat::Png).map_err(image_error)
}
