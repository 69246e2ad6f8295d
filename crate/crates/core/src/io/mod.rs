//! Image and observation-mask files.

mod image;
mod mask;

pub use self::image::{load_image, save_image, to_rgb8};
pub use self::mask::{generate_mask, MaskFile, MaskMode};
