//! Image file IO (P5 PGM natively, PNG through the `image` crate) and
//! checkpoint files.

use std::fs;
use std::path::Path;

use nastaliq_core::corpus::Alphabet;
use nastaliq_core::net::{model_from_bytes, model_to_bytes, verify_fingerprint, BlstmModel};
use nastaliq_core::raster::{decode_pgm, encode_pgm, GrayImage, RgbImage};

use crate::error::{CliError, Result};

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}

/// Load a grayscale page. PGM decodes natively; PNG reduces color inputs
/// to luma (0.299 R + 0.587 G + 0.114 B).
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    match extension(path).as_str() {
        "pgm" => {
            let bytes = fs::read(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            decode_pgm(&bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
        }
        "png" => {
            let img = image::open(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            Ok(load_rgb_dynamic(img)?.to_luma())
        }
        other => Err(CliError::data(format!(
            "{}: unsupported format .{other} (expected .pgm or .png)",
            path.display()
        ))),
    }
}

/// Load a 3-channel page for color-keyed preprocessing. P5 PGM carries a
/// single channel, so only PNG qualifies.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    match extension(path).as_str() {
        "png" => {
            let img = image::open(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            load_rgb_dynamic(img)
        }
        other => Err(CliError::data(format!(
            "{}: input not 3-channel (.{other})",
            path.display()
        ))),
    }
}

fn load_rgb_dynamic(img: image::DynamicImage) -> Result<RgbImage> {
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels: Vec<f64> = rgb.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
    RgbImage::new(h, w, pixels).map_err(|e| CliError::data(e.to_string()))
}

/// Write a P5 PGM, creating parent directories as needed.
pub fn save_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, encode_pgm(img))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn save_model(path: &Path, model: &BlstmModel) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, model_to_bytes(model))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Load a checkpoint and verify it belongs to `alphabet`.
pub fn load_model(path: &Path, alphabet: &Alphabet) -> Result<BlstmModel> {
    let bytes =
        fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let model =
        model_from_bytes(&bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    verify_fingerprint(&model, alphabet.fingerprint())?;
    Ok(model)
}
