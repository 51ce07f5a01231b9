//! Grayscale/binary raster primitives shared by preprocessing and
//! segmentation: storage, P5 PGM codecs, rotation, median filtering and
//! horizontal projections.
//!
//! Intensity convention: pixels are `f64` in `[0, 1]` with 0 = ink (black)
//! and 1 = background (white). Binary masks use 1 = ink so projections are
//! plain row sums.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Errors from raster construction and PGM decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RasterError {
    /// Width or height is zero.
    ZeroDimension,
    /// Pixel buffer length does not equal `height * width`.
    LengthMismatch { expected: usize, got: usize },
    /// An intensity fell outside `[0, 1]` (or outside `{0, 1}` for masks).
    IntensityOutOfRange,
    /// The byte stream is not a parseable 8-bit P5 PGM.
    MalformedPgm(String),
}

impl fmt::Display for RasterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RasterError::ZeroDimension => write!(f, "image has a zero dimension"),
            RasterError::LengthMismatch { expected, got } => {
                write!(f, "pixel buffer length {got} does not match {expected}")
            }
            RasterError::IntensityOutOfRange => write!(f, "intensity outside valid range"),
            RasterError::MalformedPgm(msg) => write!(f, "unreadable file: {msg}"),
        }
    }
}

/// A grayscale raster with row-major `[0, 1]` intensities (0 = ink).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::ZeroDimension);
        }
        if pixels.len() != height * width {
            return Err(RasterError::LengthMismatch {
                expected: height * width,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(RasterError::IntensityOutOfRange);
        }
        Ok(GrayImage {
            height,
            width,
            pixels,
        })
    }

    /// All-background (white) image.
    pub fn blank(height: usize, width: usize) -> Self {
        GrayImage {
            height: height.max(1),
            width: width.max(1),
            pixels: vec![1.0; height.max(1) * width.max(1)],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }
}

/// A binary ink mask; 1 = ink, 0 = background. Dimensions match the
/// `GrayImage` it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::ZeroDimension);
        }
        if pixels.len() != height * width {
            return Err(RasterError::LengthMismatch {
                expected: height * width,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(RasterError::IntensityOutOfRange);
        }
        Ok(BinaryImage {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Total number of ink pixels.
    pub fn ink_count(&self) -> u64 {
        self.pixels.iter().map(|&p| p as u64).sum()
    }
}

/// Per-row ink counts of a binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    values: Vec<u32>,
}

impl Projection {
    pub fn new(values: Vec<u32>) -> Self {
        Projection { values }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A 3-channel raster with `[0, 1]` per-channel intensities, used only as
/// input to color-keyed preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>, // r,g,b interleaved, row-major
}

impl RgbImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::ZeroDimension);
        }
        if pixels.len() != height * width * 3 {
            return Err(RasterError::LengthMismatch {
                expected: height * width * 3,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(RasterError::IntensityOutOfRange);
        }
        Ok(RgbImage {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Plain luma reduction (0.299 R + 0.587 G + 0.114 B).
    pub fn to_luma(&self) -> GrayImage {
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2])
            .collect();
        GrayImage {
            height: self.height,
            width: self.width,
            pixels,
        }
    }
}

/// Decode an 8-bit binary (P5) PGM byte stream. Intensities scale by 1/255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, RasterError> {
    let mut pos = 0usize;

    fn skip_ws_and_comments(bytes: &[u8], mut pos: usize) -> usize {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                return pos;
            }
        }
    }

    fn read_token(bytes: &[u8], pos: usize) -> Result<(usize, usize), RasterError> {
        let start = skip_ws_and_comments(bytes, pos);
        let mut end = start;
        while end < bytes.len() && !bytes[end].is_ascii_whitespace() {
            end += 1;
        }
        if start == end {
            return Err(RasterError::MalformedPgm(String::from("truncated header")));
        }
        Ok((start, end))
    }

    fn read_number(bytes: &[u8], pos: usize) -> Result<(usize, usize), RasterError> {
        let (start, end) = read_token(bytes, pos)?;
        let mut value = 0usize;
        for &b in &bytes[start..end] {
            if !b.is_ascii_digit() {
                return Err(RasterError::MalformedPgm(String::from(
                    "non-numeric header field",
                )));
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| RasterError::MalformedPgm(String::from("header overflow")))?;
        }
        Ok((value, end))
    }

    let (start, end) = read_token(bytes, pos)?;
    if &bytes[start..end] != b"P5" {
        return Err(RasterError::MalformedPgm(String::from(
            "unsupported format (expected P5 magic)",
        )));
    }
    pos = end;

    let (width, p) = read_number(bytes, pos)?;
    let (height, p) = read_number(bytes, p)?;
    let (maxval, p) = read_number(bytes, p)?;
    pos = p;

    if width == 0 || height == 0 {
        return Err(RasterError::ZeroDimension);
    }
    if maxval != 255 {
        return Err(RasterError::MalformedPgm(format!(
            "unsupported maxval {maxval} (expected 255)"
        )));
    }
    // Exactly one whitespace byte separates the header from raster data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(RasterError::MalformedPgm(String::from(
            "missing raster separator",
        )));
    }
    pos += 1;

    let need = width * height;
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(RasterError::MalformedPgm(format!(
            "raster truncated: need {need} bytes, have {}",
            data.len()
        )));
    }
    let pixels = data[..need].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(GrayImage {
        height,
        width,
        pixels,
    })
}

/// Encode as binary P5 PGM with `intensity = round(255 * value)`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(
        img.pixels
            .iter()
            .map(|&v| math::round(v * 255.0).clamp(0.0, 255.0) as u8),
    );
    out
}

/// Median filter with a `(2r+1) x (2r+1)` window and replicated borders.
pub fn median_filter(img: &GrayImage, radius: usize) -> GrayImage {
    let radius = radius.max(1);
    let (h, w) = (img.height as isize, img.width as isize);
    let r = radius as isize;
    let mut out = Vec::with_capacity(img.pixels.len());
    let mut window = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
    for row in 0..h {
        for col in 0..w {
            window.clear();
            for dr in -r..=r {
                let rr = (row + dr).clamp(0, h - 1) as usize;
                for dc in -r..=r {
                    let cc = (col + dc).clamp(0, w - 1) as usize;
                    window.push(img.get(rr, cc));
                }
            }
            window.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite intensities"));
            out.push(window[window.len() / 2]);
        }
    }
    GrayImage {
        height: img.height,
        width: img.width,
        pixels: out,
    }
}

/// Global Otsu threshold over a 256-bin histogram; pixels strictly below the
/// chosen cut become ink. Constant images yield an all-background mask.
pub fn binarize(img: &GrayImage) -> BinaryImage {
    let mut hist = [0u64; 256];
    for &p in &img.pixels {
        let bin = math::round(p * 255.0).clamp(0.0, 255.0) as usize;
        hist[bin] += 1;
    }
    let total = img.pixels.len() as f64;

    let lo = hist.iter().position(|&c| c > 0).unwrap_or(0);
    let hi = hist.iter().rposition(|&c| c > 0).unwrap_or(0);
    if lo == hi {
        // Degenerate histogram: no separable classes, everything background.
        return BinaryImage {
            height: img.height,
            width: img.width,
            pixels: vec![0; img.pixels.len()],
        };
    }

    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut best_t = lo;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    // Classes: ink = bins [0, t], background = bins (t, 255].
    for t in lo..hi {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best_var {
            best_var = between;
            best_t = t;
        }
    }

    let pixels = img
        .pixels
        .iter()
        .map(|&p| {
            let bin = math::round(p * 255.0).clamp(0.0, 255.0) as usize;
            u8::from(bin <= best_t)
        })
        .collect();
    BinaryImage {
        height: img.height,
        width: img.width,
        pixels,
    }
}

/// Per-row ink counts: `values[r] = sum_c pixels[r][c]`.
pub fn horizontal_projection(img: &BinaryImage) -> Projection {
    let values = (0..img.height)
        .map(|r| {
            img.pixels[r * img.width..(r + 1) * img.width]
                .iter()
                .map(|&p| p as u32)
                .sum()
        })
        .collect();
    Projection { values }
}

/// Rotate about the image center with bilinear interpolation; the canvas
/// keeps its dimensions and uncovered regions fill white. Corner content may
/// clip for large angles.
pub fn rotate(img: &GrayImage, theta_degrees: f64) -> GrayImage {
    if theta_degrees == 0.0 {
        return img.clone();
    }
    let theta = theta_degrees * core::f64::consts::PI / 180.0;
    let (sin_t, cos_t) = (math::sin(theta), math::cos(theta));
    let (h, w) = (img.height, img.width);
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(h * w);
    for row in 0..h {
        let dy = row as f64 - cy;
        for col in 0..w {
            let dx = col as f64 - cx;
            // Inverse map: sample the source at the un-rotated location.
            let sx = cx + dx * cos_t - dy * sin_t;
            let sy = cy + dx * sin_t + dy * cos_t;
            out.push(sample_bilinear(img, sy, sx));
        }
    }
    GrayImage {
        height: h,
        width: w,
        pixels: out,
    }
}

fn sample_bilinear(img: &GrayImage, y: f64, x: f64) -> f64 {
    let (h, w) = (img.height as f64, img.width as f64);
    if y < -1.0 || x < -1.0 || y > h || x > w {
        return 1.0;
    }
    let y0 = math::floor(y);
    let x0 = math::floor(x);
    let fy = y - y0;
    let fx = x - x0;
    let at = |yy: f64, xx: f64| -> f64 {
        if yy < 0.0 || xx < 0.0 || yy >= h || xx >= w {
            1.0 // white fill outside the source
        } else {
            img.get(yy as usize, xx as usize)
        }
    };
    let v00 = at(y0, x0);
    let v01 = at(y0, x0 + 1.0);
    let v10 = at(y0 + 1.0, x0);
    let v11 = at(y0 + 1.0, x0 + 1.0);
    let top = v00 * (1.0 - fx) + v01 * fx;
    let bot = v10 * (1.0 - fx) + v11 * fx;
    top * (1.0 - fy) + bot * fy
}

/// Population variance (divide by N) of a projection's values.
pub fn variance(p: &Projection) -> f64 {
    if p.values.is_empty() {
        return 0.0;
    }
    let n = p.values.len() as f64;
    let mean = p.values.iter().map(|&v| v as f64).sum::<f64>() / n;
    p.values
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n
}
