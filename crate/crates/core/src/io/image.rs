//! 8-bit RGB images as `H x W x 3` tensors with values `v / 255`.
//!
//! Entry `(row, col, channel)` holds the pixel at that row and column. PNG
//! and binary PPM (P6) are read; the output format follows the extension.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub fn load_image(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let reader = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        other => {
            return Err(Error::Image(format!(
                "{}: unsupported format {other:?}, expected PNG or PPM",
                path.display()
            )))
        }
    }
    let decoded = reader
        .decode()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let rgb = match decoded {
        DynamicImage::ImageRgb8(buf) => buf,
        other => {
            return Err(Error::Image(format!(
                "{}: expected 8-bit RGB, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let raw = rgb.as_raw();
    DenseTensor::from_fn(&[h, w, 3], |i| {
        raw[(i[0] * w + i[1]) * 3 + i[2]] as f64 / 255.0
    })
}

/// Interleaved 8-bit RGB bytes, clamping to `[0, 1]` before quantizing.
pub fn to_rgb8(t: &DenseTensor) -> Result<Vec<u8>> {
    let dims = t.dims();
    if dims.len() != 3 || dims[2] != 3 {
        return Err(Error::Image(format!(
            "expected an HxWx3 tensor, got {dims:?}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("image"));
    }
    let (h, w) = (dims[0], dims[1]);
    let mut out = vec![0u8; h * w * 3];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                let v = t.get(&[r, c, ch]).clamp(0.0, 1.0);
                out[(r * w + c) * 3 + ch] = (v * 255.0).round() as u8;
            }
        }
    }
    Ok(out)
}

/// Writes PNG, or P6 PPM when the extension is `ppm`/`pnm`.
pub fn save_image(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_rgb8(t)?;
    let (h, w) = (t.dims()[0], t.dims()[1]);
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("ppm" | "pnm") => {
            let mut f = fs::File::create(path)?;
            write!(f, "P6\n{w} {h}\n255\n")?;
            f.write_all(&bytes)?;
            Ok(())
        }
        Some("png") | None => image::save_buffer_with_format(
            path,
            &bytes,
            w as u32,
            h as u32,
            image::ExtendedColorType::Rgb8,
            ImageFormat::Png,
        )
        .map_err(|e| Error::Image(format!("{}: {e}", path.display()))),
        Some(other) => Err(Error::Image(format!(
            "unsupported output extension {other:?}"
        ))),
    }
}
