//! Page-level cleanup: color-keyed baseline/noise removal and projection-
//! variance skew detection and correction.
//!
//! Skew search rotates the grayscale page over a two-stage angle grid and
//! keeps the angle whose binarized horizontal projection has maximal
//! variance; level text concentrates ink into few rows, which maximizes
//! that variance.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::raster::{binarize, horizontal_projection, rotate, variance, GrayImage, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub enum PreprocessError {
    /// The page has no ink after binarization; skew is undefined.
    BlankImage,
    /// Rejected `SkewSearchConfig` (step ordering or range bounds).
    InvalidConfig(&'static str),
}

impl fmt::Display for PreprocessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessError::BlankImage => write!(f, "blank image: no ink to estimate skew from"),
            PreprocessError::InvalidConfig(msg) => write!(f, "invalid skew search config: {msg}"),
        }
    }
}

/// Which pen color counts as ink when stripping printed marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InkChannel {
    Red,
    Black,
}

/// Two-stage grid search parameters: a coarse pass over `±max_angle`, then a
/// fine pass of width `±coarse_step` around the coarse winner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewSearchConfig {
    pub max_angle: f64,
    pub coarse_step: f64,
    pub fine_step: f64,
}

impl Default for SkewSearchConfig {
    fn default() -> Self {
        SkewSearchConfig {
            max_angle: 15.0,
            coarse_step: 1.0,
            fine_step: 0.1,
        }
    }
}

impl SkewSearchConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.fine_step > 0.0) {
            return Err(PreprocessError::InvalidConfig("fine_step must be > 0"));
        }
        if self.fine_step > self.coarse_step {
            return Err(PreprocessError::InvalidConfig(
                "fine_step must be <= coarse_step",
            ));
        }
        if self.coarse_step > self.max_angle {
            return Err(PreprocessError::InvalidConfig(
                "coarse_step must be <= max_angle",
            ));
        }
        if self.max_angle > 45.0 {
            return Err(PreprocessError::InvalidConfig("max_angle must be <= 45"));
        }
        Ok(())
    }
}

/// Outcome of a skew search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewReport {
    /// Angle (degrees) whose rotation maximizes projection variance; rotating
    /// the page by this angle levels the text.
    pub angle: f64,
    pub best_variance: f64,
    pub evaluated_angles: usize,
}

/// Default channel-dominance tolerance for [`strip_color`], in `[0, 1]`
/// intensity units.
pub const DEFAULT_COLOR_TOLERANCE: f64 = 0.25;

/// Separate keyed ink from printed marks of the other color.
///
/// With `Red`, pixels whose red channel exceeds the mean of the other two by
/// more than `tolerance` are kept as ink (darkness grows with dominance, so a
/// pure red pixel maps to 0); everything else, including black noise and
/// printed baselines, becomes background. With `Black`, chromatic pixels are
/// removed and achromatic ones keep their luma.
pub fn strip_color(page: &RgbImage, ink_channel: InkChannel, tolerance: f64) -> GrayImage {
    let (h, w) = (page.height(), page.width());
    let mut out = Vec::with_capacity(h * w);
    for row in 0..h {
        for col in 0..w {
            let [r, g, b] = page.get(row, col);
            let value = match ink_channel {
                InkChannel::Red => {
                    let dominance = r - (g + b) / 2.0;
                    if dominance > tolerance {
                        (1.0 - dominance).clamp(0.0, 1.0)
                    } else {
                        1.0
                    }
                }
                InkChannel::Black => {
                    let max = r.max(g).max(b);
                    let chroma = max - (r + g + b - max) / 2.0;
                    if chroma > tolerance {
                        1.0
                    } else {
                        (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0)
                    }
                }
            };
            out.push(value);
        }
    }
    GrayImage::new(h, w, out).expect("dimensions preserved")
}

/// Variance of the binarized horizontal projection after rotating by `theta`.
fn objective(img: &GrayImage, theta: f64) -> f64 {
    variance(&horizontal_projection(&binarize(&rotate(img, theta))))
}

/// Candidate ordering: higher variance wins; exact ties prefer the smaller
/// absolute angle, then the negative one.
fn better(candidate: (f64, f64), incumbent: (f64, f64)) -> bool {
    let (theta_c, var_c) = candidate;
    let (theta_i, var_i) = incumbent;
    if var_c != var_i {
        return var_c > var_i;
    }
    let (abs_c, abs_i) = (math::abs(theta_c), math::abs(theta_i));
    if abs_c != abs_i {
        return abs_c < abs_i;
    }
    theta_c < theta_i
}

/// Grid of `center + k*step` for `k` in `-half..=half`, ascending.
fn grid(center: f64, step: f64, half: usize) -> impl Iterator<Item = f64> {
    (0..=2 * half).map(move |i| center + (i as f64 - half as f64) * step)
}

/// Detect page skew by two-stage variance maximization.
///
/// The coarse pass scans `±max_angle` at `coarse_step` (always including 0);
/// the fine pass scans `±coarse_step` around the coarse winner at
/// `fine_step`. Ties break toward the smallest |angle|, then negative.
pub fn detect_skew(img: &GrayImage, cfg: &SkewSearchConfig) -> Result<SkewReport, PreprocessError> {
    cfg.validate()?;
    if binarize(img).ink_count() == 0 {
        return Err(PreprocessError::BlankImage);
    }

    let mut evaluated = 0usize;
    let mut best: Option<(f64, f64)> = None;

    let coarse_half = math::floor(cfg.max_angle / cfg.coarse_step + 1e-9) as usize;
    for theta in grid(0.0, cfg.coarse_step, coarse_half) {
        let var = objective(img, theta);
        evaluated += 1;
        if best.map_or(true, |b| better((theta, var), b)) {
            best = Some((theta, var));
        }
    }
    let coarse_winner = best.expect("coarse grid is non-empty");

    let fine_half = math::round(cfg.coarse_step / cfg.fine_step) as usize;
    for theta in grid(coarse_winner.0, cfg.fine_step, fine_half) {
        if theta == coarse_winner.0 {
            continue; // already evaluated in the coarse pass
        }
        let var = objective(img, theta);
        evaluated += 1;
        if better((theta, var), best.expect("initialized")) {
            best = Some((theta, var));
        }
    }

    let (angle, best_variance) = best.expect("initialized");
    Ok(SkewReport {
        angle,
        best_variance,
        evaluated_angles: evaluated,
    })
}

/// Detect skew, then rotate the page by the detected angle.
pub fn deskew(
    img: &GrayImage,
    cfg: &SkewSearchConfig,
) -> Result<(GrayImage, SkewReport), PreprocessError> {
    let report = detect_skew(img, cfg)?;
    Ok((rotate(img, report.angle), report))
}
