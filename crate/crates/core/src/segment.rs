//! Text-line segmentation over the horizontal projection, x-height
//! normalization to 30 rows, and column-wise frame extraction.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::raster::{binarize, horizontal_projection, GrayImage};

/// Fixed x-height every line image is normalized to; each frame is one
/// 30-pixel column of the normalized line.
pub const LINE_HEIGHT: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmentError {
    /// Band rows fall outside the page.
    BandOutOfBounds {
        top: usize,
        height: usize,
        page_height: usize,
    },
}

impl fmt::Display for SegmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentError::BandOutOfBounds {
                top,
                height,
                page_height,
            } => write!(
                f,
                "band rows {top}..{} exceed page height {page_height}",
                top + height
            ),
        }
    }
}

/// One detected text-line band: rows `[top, top + height)` of the page.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineBand {
    pub top: usize,
    pub height: usize,
    pub ink_pixels: u64,
}

/// A line image normalized to exactly [`LINE_HEIGHT`] rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LineImage {
    image: GrayImage,
}

impl LineImage {
    /// Wrap an already-normalized image; `None` if the height is not
    /// [`LINE_HEIGHT`] (use [`normalize_height`] to produce one).
    pub fn from_normalized(image: GrayImage) -> Option<Self> {
        (image.height() == LINE_HEIGHT).then_some(LineImage { image })
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }
}

/// Frame traversal order over the line's columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameDirection {
    /// Matches the script's reading order; frame 0 is the rightmost column.
    #[default]
    RightToLeft,
    LeftToRight,
}

/// Ordered per-timestep feature vectors: one [`LINE_HEIGHT`]-component column
/// per frame, raw intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    data: Vec<f64>,
    frame_len: usize,
}

impl FrameSequence {
    pub fn from_flat(data: Vec<f64>, frame_len: usize) -> Option<Self> {
        (frame_len > 0 && data.len() % frame_len == 0).then_some(FrameSequence { data, frame_len })
    }

    /// Number of frames (timesteps).
    pub fn len(&self) -> usize {
        self.data.len() / self.frame_len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of each frame vector.
    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.frame_len..(t + 1) * self.frame_len]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len)
    }
}

/// Scan the binarized page's horizontal projection top to bottom; a band
/// opens where the projection exceeds `ink_threshold` and closes where it
/// falls back to or below it. Bands shorter than `min_line_height` are
/// discarded. `ink_threshold = 0` with `min_line_height = 1` is the strict
/// projection rule.
pub fn segment_lines(
    page: &GrayImage,
    ink_threshold: u32,
    min_line_height: usize,
) -> Vec<LineBand> {
    let projection = horizontal_projection(&binarize(page));
    bands_from_projection(projection.values(), ink_threshold, min_line_height)
}

/// Core band scan, exposed for callers that already hold a projection.
pub fn bands_from_projection(
    values: &[u32],
    ink_threshold: u32,
    min_line_height: usize,
) -> Vec<LineBand> {
    let mut bands = Vec::new();
    let mut row = 0usize;
    while row < values.len() {
        if values[row] > ink_threshold {
            let top = row;
            let mut ink: u64 = 0;
            while row < values.len() && values[row] > ink_threshold {
                ink += values[row] as u64;
                row += 1;
            }
            let height = row - top;
            if height >= min_line_height.max(1) {
                bands.push(LineBand {
                    top,
                    height,
                    ink_pixels: ink,
                });
            }
        } else {
            row += 1;
        }
    }
    bands
}

/// Copy rows `[top, top + height)` at full page width.
pub fn crop_band(page: &GrayImage, band: &LineBand) -> Result<GrayImage, SegmentError> {
    let end = band.top.checked_add(band.height);
    if band.height == 0 || end.map_or(true, |e| e > page.height()) {
        return Err(SegmentError::BandOutOfBounds {
            top: band.top,
            height: band.height,
            page_height: page.height(),
        });
    }
    let w = page.width();
    let mut pixels = Vec::with_capacity(band.height * w);
    for r in band.top..band.top + band.height {
        pixels.extend_from_slice(page.row(r));
    }
    Ok(GrayImage::new(band.height, w, pixels).expect("valid slice dimensions"))
}

/// Bilinear resample to exactly [`LINE_HEIGHT`] rows, scaling width by the
/// same factor (rounded to nearest, at least 1).
pub fn normalize_height(line: &GrayImage) -> LineImage {
    if line.height() == LINE_HEIGHT {
        return LineImage {
            image: line.clone(),
        };
    }
    let scale = LINE_HEIGHT as f64 / line.height() as f64;
    let new_w = (math::round(line.width() as f64 * scale) as usize).max(1);
    let image = resample_bilinear(line, LINE_HEIGHT, new_w);
    LineImage { image }
}

fn resample_bilinear(img: &GrayImage, out_h: usize, out_w: usize) -> GrayImage {
    let (h, w) = (img.height(), img.width());
    let row_scale = h as f64 / out_h as f64;
    let col_scale = w as f64 / out_w as f64;
    let mut pixels = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        // Center-aligned source coordinate for the output sample.
        let sy = ((r as f64 + 0.5) * row_scale - 0.5).clamp(0.0, h as f64 - 1.0);
        let y0 = math::floor(sy) as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for c in 0..out_w {
            let sx = ((c as f64 + 0.5) * col_scale - 0.5).clamp(0.0, w as f64 - 1.0);
            let x0 = math::floor(sx) as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
            let bot = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
            pixels.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(out_h, out_w, pixels).expect("valid resample dimensions")
}

/// One frame per pixel column (30x1 window, stride 1); frame `k` is column
/// `k` counted from the starting edge for the given direction. Values are
/// raw intensities.
pub fn extract_frames(line: &LineImage, direction: FrameDirection) -> FrameSequence {
    let img = line.image();
    let w = img.width();
    let mut data = Vec::with_capacity(w * LINE_HEIGHT);
    for k in 0..w {
        let col = match direction {
            FrameDirection::LeftToRight => k,
            FrameDirection::RightToLeft => w - 1 - k,
        };
        for row in 0..LINE_HEIGHT {
            data.push(img.get(row, col));
        }
    }
    FrameSequence {
        data,
        frame_len: LINE_HEIGHT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Page with ink-bearing rows given as (row, ink_pixel_count).
    fn page_with_rows(h: usize, w: usize, rows: &[(usize, usize)]) -> GrayImage {
        let mut px = vec![1.0; h * w];
        for &(r, count) in rows {
            for c in 0..count.min(w) {
                px[r * w + c] = 0.0;
            }
        }
        GrayImage::new(h, w, px).unwrap()
    }

    #[test]
    fn bands_from_hand_traced_projection() {
        // Ink rows 2-4 and 8-11.
        let page = page_with_rows(
            13,
            6,
            &[(2, 3), (3, 3), (4, 3), (8, 2), (9, 2), (10, 2), (11, 2)],
        );
        let bands = segment_lines(&page, 0, 1);
        assert_eq!(bands.len(), 2);
        assert_eq!((bands[0].top, bands[0].height), (2, 3));
        assert_eq!((bands[1].top, bands[1].height), (8, 4));
        assert_eq!(bands[0].ink_pixels, 9);
        assert_eq!(bands[1].ink_pixels, 8);
    }

    #[test]
    fn blank_page_yields_no_bands() {
        assert!(segment_lines(&GrayImage::blank(10, 10), 0, 1).is_empty());
    }

    #[test]
    fn speck_below_min_height_discarded() {
        let page = page_with_rows(12, 8, &[(5, 4)]);
        assert!(segment_lines(&page, 0, 5).is_empty());
        assert_eq!(segment_lines(&page, 0, 1).len(), 1);
    }

    #[test]
    fn threshold_generalization() {
        // Rows with 1 ink pixel are treated as background at tau=1.
        let page = page_with_rows(10, 8, &[(2, 1), (3, 4), (4, 4), (5, 1)]);
        let strict = segment_lines(&page, 0, 1);
        assert_eq!((strict[0].top, strict[0].height), (2, 4));
        let relaxed = segment_lines(&page, 1, 1);
        assert_eq!((relaxed[0].top, relaxed[0].height), (3, 2));
    }

    #[test]
    fn crop_band_slices_rows() {
        let page = page_with_rows(10, 4, &[(2, 2), (3, 1), (4, 4)]);
        let band = LineBand {
            top: 2,
            height: 3,
            ink_pixels: 7,
        };
        let crop = crop_band(&page, &band).unwrap();
        assert_eq!(crop.height(), 3);
        assert_eq!(crop.width(), 4);
        for r in 0..3 {
            assert_eq!(crop.row(r), page.row(r + 2));
        }
    }

    #[test]
    fn crop_whole_page_is_identity() {
        let page = page_with_rows(5, 3, &[(1, 2)]);
        let band = LineBand {
            top: 0,
            height: 5,
            ink_pixels: 2,
        };
        assert_eq!(crop_band(&page, &band).unwrap(), page);
    }

    #[test]
    fn crop_out_of_bounds_is_error() {
        let page = GrayImage::blank(10, 4);
        let band = LineBand {
            top: 8,
            height: 4,
            ink_pixels: 0,
        };
        assert!(matches!(
            crop_band(&page, &band),
            Err(SegmentError::BandOutOfBounds { .. })
        ));
    }

    #[test]
    fn normalize_height_scales_aspect() {
        let line = GrayImage::blank(60, 200);
        let norm = normalize_height(&line);
        assert_eq!(norm.image().height(), 30);
        assert_eq!(norm.width(), 100);

        let up = normalize_height(&GrayImage::blank(15, 10));
        assert_eq!(up.image().height(), 30);
        assert_eq!(up.width(), 20);
    }

    #[test]
    fn normalize_height_identity_at_30() {
        let mut px = vec![1.0; 30 * 7];
        px[3 * 7 + 2] = 0.25;
        let line = GrayImage::new(30, 7, px).unwrap();
        let norm = normalize_height(&line);
        assert_eq!(norm.image(), &line);
    }

    #[test]
    fn frames_one_per_column() {
        let line = normalize_height(&GrayImage::blank(30, 5));
        let frames = extract_frames(&line, FrameDirection::RightToLeft);
        assert_eq!(frames.len(), 5);
        assert_eq!(frames.frame_len(), LINE_HEIGHT);
        assert!(frames.frames().all(|f| f.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn direction_reversal_identity() {
        // Asymmetric content so order matters.
        let mut px = vec![1.0; 30 * 4];
        for r in 0..30 {
            px[r * 4] = 0.0;
            px[r * 4 + 2] = 0.5;
        }
        let line = LineImage::from_normalized(GrayImage::new(30, 4, px).unwrap()).unwrap();
        let rtl = extract_frames(&line, FrameDirection::RightToLeft);
        let ltr = extract_frames(&line, FrameDirection::LeftToRight);
        assert_eq!(rtl.len(), ltr.len());
        for t in 0..rtl.len() {
            assert_eq!(rtl.frame(t), ltr.frame(ltr.len() - 1 - t));
        }
    }

    #[test]
    fn retained_band_rows_partition_ink() {
        // Every ink pixel of a retained band lands in exactly one crop.
        let page = page_with_rows(20, 10, &[(2, 3), (3, 5), (7, 2), (8, 2), (9, 1), (15, 6)]);
        let bands = segment_lines(&page, 0, 1);
        let total_band_ink: u64 = bands.iter().map(|b| b.ink_pixels).sum();
        let mut cropped_ink = 0u64;
        for band in &bands {
            let crop = crop_band(&page, band).unwrap();
            cropped_ink += crate::raster::binarize(&crop).ink_count();
        }
        assert_eq!(cropped_ink, total_band_ink);
        // Bands are disjoint and sorted.
        for pair in bands.windows(2) {
            assert!(pair[0].top + pair[0].height <= pair[1].top);
        }
    }
}
