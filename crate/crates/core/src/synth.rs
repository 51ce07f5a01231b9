//! Deterministic synthetic script-like page generator. Token sequences are
//! rendered right-to-left as connected polyline glyphs with positional
//! variants, stacked into pages with controllable jitter, skew, and
//! salt-and-pepper noise. Recorded truths (tokens, bands, skew) make the
//! whole pipeline testable without any real scan data.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Alphabet;
use crate::raster::GrayImage;
use crate::segment::LineBand;

/// Glyph box height in pixels.
pub const GLYPH_HEIGHT: usize = 24;
/// Glyph box width in pixels.
pub const GLYPH_WIDTH: usize = 14;

const PAGE_MARGIN: usize = 16;
const LINE_GAP: usize = 10;
const GROUP_GAP: usize = 6;
/// Baseline connector rows within the glyph box.
const CONNECT_ROWS: core::ops::Range<usize> = 15..18;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthError {
    InvalidConfig(String),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::InvalidConfig(msg) => write!(f, "invalid synth config: {msg}"),
        }
    }
}

/// Positional shape a glyph takes inside a connected group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlyphPosition {
    Isolated,
    Initial,
    Medial,
    Final,
}

impl GlyphPosition {
    pub const ALL: [GlyphPosition; 4] = [
        GlyphPosition::Isolated,
        GlyphPosition::Initial,
        GlyphPosition::Medial,
        GlyphPosition::Final,
    ];

    pub fn suffix(&self) -> &'static str {
        match self {
            GlyphPosition::Isolated => "iso",
            GlyphPosition::Initial => "i",
            GlyphPosition::Medial => "m",
            GlyphPosition::Final => "f",
        }
    }
}

/// Whether a rendered glyph carries connector strokes toward its neighbors
/// (left = toward the following letter in right-to-left order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlyphFlags {
    pub connects_left: bool,
    pub connects_right: bool,
}

/// Generator knobs. `seed` drives everything; per-page streams are derived
/// so pages are independent of generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub glyph_classes: usize,
    pub lines_per_page: usize,
    /// Inclusive letter-count range per line.
    pub tokens_per_line: (usize, usize),
    /// Inclusive true-skew range in degrees.
    pub skew_degrees: (f64, f64),
    /// Salt-and-pepper density in [0, 0.2].
    pub noise_density: f64,
    /// Stroke endpoint jitter in pixels.
    pub stroke_jitter: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            glyph_classes: 8,
            lines_per_page: 8,
            tokens_per_line: (3, 6),
            skew_degrees: (0.0, 0.0),
            noise_density: 0.0,
            stroke_jitter: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.glyph_classes < 2 {
            return Err(SynthError::InvalidConfig(String::from(
                "glyph_classes must be >= 2",
            )));
        }
        if self.lines_per_page == 0 {
            return Err(SynthError::InvalidConfig(String::from(
                "lines_per_page must be >= 1",
            )));
        }
        if self.tokens_per_line.0 == 0 || self.tokens_per_line.0 > self.tokens_per_line.1 {
            return Err(SynthError::InvalidConfig(String::from(
                "tokens_per_line range is empty",
            )));
        }
        if self.skew_degrees.0 > self.skew_degrees.1 {
            return Err(SynthError::InvalidConfig(String::from(
                "skew range is empty",
            )));
        }
        if !(0.0..=0.2).contains(&self.noise_density) {
            return Err(SynthError::InvalidConfig(String::from(
                "noise density must be in [0, 0.2]",
            )));
        }
        if self.stroke_jitter < 0.0 {
            return Err(SynthError::InvalidConfig(String::from(
                "stroke_jitter must be >= 0",
            )));
        }
        Ok(())
    }

    /// Token name for (class, position), e.g. `g3_m`.
    pub fn token(&self, class: usize, position: GlyphPosition) -> String {
        format!("g{class}_{}", position.suffix())
    }

    /// The full closed alphabet this generator can emit.
    pub fn alphabet(&self) -> Alphabet {
        let mut lines = Vec::new();
        for c in 0..self.glyph_classes {
            for p in GlyphPosition::ALL {
                lines.push(self.token(c, p));
            }
        }
        let joined = lines.join(" ");
        Alphabet::from_transcriptions([joined.as_str()])
    }
}

/// One generated page with its recorded truths. `image` is the deliverable
/// (skewed and noised); `clean` is the pre-skew, pre-noise rendering the
/// true bands refer to.
#[derive(Debug, Clone)]
pub struct SynthPage {
    pub image: GrayImage,
    pub clean: GrayImage,
    /// Token sequences in reading order, one per line.
    pub lines: Vec<Vec<String>>,
    pub true_skew: f64,
    pub true_bands: Vec<LineBand>,
}

impl SynthPage {
    /// Crop line `i` out of the clean rendering by its true band.
    pub fn line_crop(&self, i: usize) -> Option<GrayImage> {
        let band = self.true_bands.get(i)?;
        crate::segment::crop_band(&self.clean, band).ok()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-page RNG stream derived from (seed, writer, page); stable no matter
/// how many pages are generated or in what order.
fn page_rng(seed: u64, writer: u16, page: u8) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64(((writer as u64) << 8) | page as u64));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Fixed per-class stroke table, independent of the corpus seed: three
/// polyline strokes plus an optional dot, all inside the glyph box. The
/// first stroke always spans rows 5..=17 so every glyph's ink rows are
/// vertically contiguous.
fn base_strokes(class: usize) -> Vec<((f64, f64), (f64, f64))> {
    let mut state = splitmix64(0x5EED_0000 ^ (class as u64).wrapping_mul(0x9E37_79B9));
    let mut next = || {
        state = splitmix64(state);
        state
    };
    let w = GLYPH_WIDTH as f64;
    let fx = |v: u64| 2.0 + (v % 997) as f64 / 997.0 * (w - 5.0);
    let fy = |v: u64, lo: f64, hi: f64| lo + (v % 997) as f64 / 997.0 * (hi - lo);

    let mut strokes = Vec::new();
    // Spanning stroke: rows 5 -> 17.
    strokes.push(((fx(next()), 5.0), (fx(next()), 17.0)));
    // Second stroke inside the span.
    strokes.push((
        (fx(next()), fy(next(), 5.0, 16.0)),
        (fx(next()), fy(next(), 6.0, 17.0)),
    ));
    // Optional short third stroke.
    if next() % 2 == 0 {
        let x = fx(next());
        let y = fy(next(), 6.0, 13.0);
        strokes.push(((x, y), ((x + 3.0).min(w - 2.0), y + 2.0)));
    }
    // Dot, kept inside the spanning rows.
    if next() % 3 != 0 {
        let x = fx(next());
        let y = fy(next(), 6.0, 14.0);
        strokes.push(((x, y), (x, y)));
    }
    strokes
}

fn stamp(canvas: &mut [f64], width: usize, height: usize, x: f64, y: f64) {
    let xi = x as isize;
    let yi = y as isize;
    for dy in 0..2isize {
        for dx in 0..2isize {
            let (cx, cy) = (xi + dx, yi + dy);
            if cx >= 0 && cy >= 0 && (cx as usize) < width && (cy as usize) < height {
                canvas[cy as usize * width + cx as usize] = 0.0;
            }
        }
    }
}

fn draw_segment(
    canvas: &mut [f64],
    width: usize,
    height: usize,
    from: (f64, f64),
    to: (f64, f64),
) {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    let steps = (libm::fabs(dx).max(libm::fabs(dy)) * 4.0) as usize + 1;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        stamp(canvas, width, height, from.0 + dx * t, from.1 + dy * t);
    }
}

/// Render one glyph deterministically. The positional variants reshape the
/// base strokes (compression, vertical shift, connector strokes, final
/// tail) so the four shapes of one class stay visually distinct. `seed`
/// only feeds jitter; at `jitter == 0` the bitmap is a pure function of
/// (class, position).
pub fn render_glyph(
    class: usize,
    position: GlyphPosition,
    jitter: f64,
    seed: u64,
) -> (GrayImage, GlyphFlags) {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let mut canvas = vec![1.0; GLYPH_HEIGHT * GLYPH_WIDTH];
    render_glyph_onto(
        &mut canvas,
        GLYPH_WIDTH,
        GLYPH_HEIGHT,
        0,
        0,
        class,
        position,
        jitter,
        &mut rng,
    );
    let flags = GlyphFlags {
        connects_left: matches!(position, GlyphPosition::Initial | GlyphPosition::Medial),
        connects_right: matches!(position, GlyphPosition::Final | GlyphPosition::Medial),
    };
    (
        GrayImage::new(GLYPH_HEIGHT, GLYPH_WIDTH, canvas).expect("glyph box dimensions"),
        flags,
    )
}

#[allow(clippy::too_many_arguments)]
fn render_glyph_onto(
    canvas: &mut [f64],
    canvas_w: usize,
    canvas_h: usize,
    origin_x: usize,
    origin_y: usize,
    class: usize,
    position: GlyphPosition,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) {
    let w = GLYPH_WIDTH as f64;
    // Horizontal compression and vertical shift per variant.
    let (scale, x_off, y_off) = match position {
        GlyphPosition::Isolated => (1.0, 0.0, 0.0),
        GlyphPosition::Initial => (0.72, w * 0.28, 0.0),
        GlyphPosition::Medial => (0.56, w * 0.22, -2.0),
        GlyphPosition::Final => (0.86, 0.0, 0.0),
    };
    let place = |p: (f64, f64), jx: f64, jy: f64| -> (f64, f64) {
        (
            origin_x as f64 + p.0 * scale + x_off + jx,
            origin_y as f64 + p.1 + y_off + jy,
        )
    };
    for stroke in base_strokes(class) {
        let (jx0, jy0, jx1, jy1) = if jitter > 0.0 {
            (
                rng.gen_range(-jitter..=jitter),
                rng.gen_range(-jitter..=jitter),
                rng.gen_range(-jitter..=jitter),
                rng.gen_range(-jitter..=jitter),
            )
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        draw_segment(
            canvas,
            canvas_w,
            canvas_h,
            place(stroke.0, jx0, jy0),
            place(stroke.1, jx1, jy1),
        );
    }
    // Connector strokes at the fixed baseline rows so adjacent boxes meet.
    let connect = |canvas: &mut [f64], x_from: f64, x_to: f64| {
        for row in CONNECT_ROWS {
            draw_segment(
                canvas,
                canvas_w,
                canvas_h,
                (origin_x as f64 + x_from, origin_y as f64 + row as f64),
                (origin_x as f64 + x_to, origin_y as f64 + row as f64),
            );
        }
    };
    match position {
        GlyphPosition::Initial => connect(canvas, 0.0, w * 0.35),
        GlyphPosition::Medial => {
            connect(canvas, 0.0, w * 0.30);
            connect(canvas, w * 0.70, w - 1.0);
        }
        GlyphPosition::Final => {
            connect(canvas, w * 0.65, w - 1.0);
            // Descender tail.
            draw_segment(
                canvas,
                canvas_w,
                canvas_h,
                (origin_x as f64 + w * 0.35, origin_y as f64 + 17.0),
                (origin_x as f64 + w * 0.12, origin_y as f64 + 21.0),
            );
        }
        _ => {}
    }
}

/// Letters of one line in reading order, with group structure resolved to
/// positional variants. Groups model the joiner/non-joiner property: a
/// break ends the connected run.
fn sample_line(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<(usize, GlyphPosition)> {
    let n = rng.gen_range(cfg.tokens_per_line.0..=cfg.tokens_per_line.1);
    let classes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..cfg.glyph_classes)).collect();
    let mut breaks = vec![false; n]; // break AFTER letter i
    for i in 0..n.saturating_sub(1) {
        breaks[i] = rng.gen_bool(0.35);
    }
    if n > 0 {
        breaks[n - 1] = true;
    }
    let mut letters = Vec::with_capacity(n);
    let mut start = 0usize;
    for i in 0..n {
        if breaks[i] {
            let group = &classes[start..=i];
            match group.len() {
                1 => letters.push((group[0], GlyphPosition::Isolated)),
                _ => {
                    letters.push((group[0], GlyphPosition::Initial));
                    for &c in &group[1..group.len() - 1] {
                        letters.push((c, GlyphPosition::Medial));
                    }
                    letters.push((group[group.len() - 1], GlyphPosition::Final));
                }
            }
            start = i + 1;
        }
    }
    letters
}

/// Generate one page for (writer, page_no). Lines are rendered right to
/// left, stacked with blank gaps, then the page is rotated by a sampled
/// true skew and noised. Deterministic per (cfg.seed, writer, page_no).
pub fn generate_page(cfg: &SynthConfig, writer: u16, page_no: u8) -> Result<SynthPage, SynthError> {
    cfg.validate()?;
    let mut rng = page_rng(cfg.seed, writer, page_no);

    let lines: Vec<Vec<(usize, GlyphPosition)>> = (0..cfg.lines_per_page)
        .map(|_| sample_line(cfg, &mut rng))
        .collect();

    // Page geometry from the widest line.
    let line_width = |letters: &[(usize, GlyphPosition)]| -> usize {
        let groups = letters
            .iter()
            .filter(|(_, p)| matches!(p, GlyphPosition::Isolated | GlyphPosition::Final))
            .count();
        letters.len() * GLYPH_WIDTH + groups.saturating_sub(1) * GROUP_GAP
    };
    let content_w = lines.iter().map(|l| line_width(l)).max().unwrap_or(GLYPH_WIDTH);
    let width = content_w + 2 * PAGE_MARGIN;
    let height = 2 * PAGE_MARGIN
        + cfg.lines_per_page * GLYPH_HEIGHT
        + (cfg.lines_per_page - 1) * LINE_GAP;

    let mut canvas = vec![1.0; height * width];
    let mut tokens: Vec<Vec<String>> = Vec::with_capacity(lines.len());
    let mut bands: Vec<LineBand> = Vec::with_capacity(lines.len());

    for (i, letters) in lines.iter().enumerate() {
        let box_top = PAGE_MARGIN + i * (GLYPH_HEIGHT + LINE_GAP);
        // Right-to-left placement: first letter at the right margin.
        let mut x = width - PAGE_MARGIN - GLYPH_WIDTH;
        for &(class, position) in letters {
            render_glyph_onto(
                &mut canvas,
                width,
                height,
                x,
                box_top,
                class,
                position,
                cfg.stroke_jitter,
                &mut rng,
            );
            let group_end = matches!(position, GlyphPosition::Isolated | GlyphPosition::Final);
            x = x.saturating_sub(GLYPH_WIDTH + if group_end { GROUP_GAP } else { 0 });
        }
        tokens.push(
            letters
                .iter()
                .map(|&(c, p)| cfg.token(c, p))
                .collect::<Vec<_>>(),
        );
        // True band: actual ink extent within this line's box rows.
        let lo = box_top.saturating_sub(2);
        let hi = (box_top + GLYPH_HEIGHT + 2).min(height);
        let mut first = None;
        let mut last = 0usize;
        let mut ink: u64 = 0;
        for r in lo..hi {
            let row_ink = canvas[r * width..(r + 1) * width]
                .iter()
                .filter(|&&v| v < 0.5)
                .count() as u64;
            if row_ink > 0 {
                if first.is_none() {
                    first = Some(r);
                }
                last = r;
                ink += row_ink;
            }
        }
        let top = first.expect("every line draws ink");
        bands.push(LineBand {
            top,
            height: last - top + 1,
            ink_pixels: ink,
        });
    }

    let clean = GrayImage::new(height, width, canvas).expect("page dimensions");

    let true_skew = if cfg.skew_degrees.0 == cfg.skew_degrees.1 {
        cfg.skew_degrees.0
    } else {
        rng.gen_range(cfg.skew_degrees.0..=cfg.skew_degrees.1)
    };
    let mut image = crate::raster::rotate(&clean, true_skew);

    if cfg.noise_density > 0.0 {
        let mut noisy = image.pixels().to_vec();
        for v in noisy.iter_mut() {
            let r: f64 = rng.gen();
            if r < cfg.noise_density / 2.0 {
                *v = 0.0;
            } else if r < cfg.noise_density {
                *v = 1.0;
            }
        }
        image = GrayImage::new(image.height(), image.width(), noisy).expect("same dimensions");
    }

    Ok(SynthPage {
        image,
        clean,
        lines: tokens,
        true_skew,
        true_bands: bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::segment_lines;

    #[test]
    fn glyph_rendering_is_deterministic() {
        let (a, _) = render_glyph(3, GlyphPosition::Medial, 0.8, 42);
        let (b, _) = render_glyph(3, GlyphPosition::Medial, 0.8, 42);
        assert_eq!(a, b);
        let (c, _) = render_glyph(3, GlyphPosition::Medial, 0.0, 1);
        let (d, _) = render_glyph(3, GlyphPosition::Medial, 0.0, 2);
        assert_eq!(c, d, "zero jitter ignores the seed");
    }

    #[test]
    fn glyphs_have_ink() {
        for class in 0..8 {
            for p in GlyphPosition::ALL {
                let (img, _) = render_glyph(class, p, 0.0, 0);
                let ink = img.pixels().iter().filter(|&&v| v < 0.5).count();
                assert!(ink > 0, "class {class} {p:?} is empty");
            }
        }
    }

    #[test]
    fn positional_variants_pairwise_distinct() {
        // At zero jitter the four variants of each class must differ in at
        // least 10% of the box pixels, pairwise.
        let area = (GLYPH_HEIGHT * GLYPH_WIDTH) as f64;
        for class in 0..8 {
            let shapes: Vec<GrayImage> = GlyphPosition::ALL
                .iter()
                .map(|&p| render_glyph(class, p, 0.0, 0).0)
                .collect();
            for i in 0..4 {
                for j in i + 1..4 {
                    let differing = shapes[i]
                        .pixels()
                        .iter()
                        .zip(shapes[j].pixels())
                        .filter(|(a, b)| (**a < 0.5) != (**b < 0.5))
                        .count();
                    let frac = differing as f64 / area;
                    assert!(
                        frac >= 0.10,
                        "class {class} variants {i} vs {j}: only {:.1}% differ",
                        frac * 100.0
                    );
                }
            }
        }
    }

    #[test]
    fn connector_flags_follow_position() {
        let (_, iso) = render_glyph(0, GlyphPosition::Isolated, 0.0, 0);
        assert!(!iso.connects_left && !iso.connects_right);
        let (_, ini) = render_glyph(0, GlyphPosition::Initial, 0.0, 0);
        assert!(ini.connects_left && !ini.connects_right);
        let (_, med) = render_glyph(0, GlyphPosition::Medial, 0.0, 0);
        assert!(med.connects_left && med.connects_right);
        let (_, fin) = render_glyph(0, GlyphPosition::Final, 0.0, 0);
        assert!(!fin.connects_left && fin.connects_right);
    }

    #[test]
    fn pages_are_deterministic_per_seed() {
        let cfg = SynthConfig::default();
        let a = generate_page(&cfg, 1, 1).unwrap();
        let b = generate_page(&cfg, 1, 1).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.lines, b.lines);
        let c = generate_page(&cfg, 2, 1).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn clean_page_bands_match_segmentation_exactly() {
        let cfg = SynthConfig {
            stroke_jitter: 0.7,
            ..SynthConfig::default()
        };
        for writer in 1..=5u16 {
            let page = generate_page(&cfg, writer, 1).unwrap();
            assert_eq!(page.true_skew, 0.0);
            assert_eq!(page.image, page.clean);
            let found = segment_lines(&page.image, 0, 1);
            assert_eq!(found.len(), page.true_bands.len(), "writer {writer}");
            for (f, t) in found.iter().zip(&page.true_bands) {
                assert_eq!(f, t, "writer {writer}");
            }
        }
    }

    #[test]
    fn line_crops_match_bands() {
        let cfg = SynthConfig::default();
        let page = generate_page(&cfg, 3, 1).unwrap();
        for (i, band) in page.true_bands.iter().enumerate() {
            let crop = page.line_crop(i).unwrap();
            assert_eq!(crop.height(), band.height);
            assert_eq!(crop.width(), page.clean.width());
        }
        assert_eq!(page.lines.len(), cfg.lines_per_page);
    }

    #[test]
    fn shaping_produces_valid_token_structure() {
        let cfg = SynthConfig::default();
        let alphabet = cfg.alphabet();
        assert_eq!(alphabet.len(), 8 * 4 + 1);
        for writer in 1..=10u16 {
            let page = generate_page(&cfg, writer, 1).unwrap();
            for line in &page.lines {
                assert!(!line.is_empty());
                for (i, tok) in line.iter().enumerate() {
                    assert!(alphabet.index_of(tok).is_some(), "unknown {tok}");
                    // Initial/medial tokens must be followed by another
                    // letter of the same group (never line-final).
                    if tok.ends_with("_i") || tok.ends_with("_m") {
                        assert!(i + 1 < line.len(), "dangling joiner {tok}");
                    }
                }
            }
        }
    }

    #[test]
    fn skew_and_noise_are_applied() {
        let cfg = SynthConfig {
            skew_degrees: (3.0, 3.0),
            noise_density: 0.05,
            ..SynthConfig::default()
        };
        let page = generate_page(&cfg, 1, 1).unwrap();
        assert_eq!(page.true_skew, 3.0);
        assert_ne!(page.image, page.clean);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SynthConfig {
            glyph_classes: 1,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.glyph_classes = 4;
        cfg.noise_density = 0.5;
        assert!(cfg.validate().is_err());
        cfg.noise_density = 0.0;
        cfg.tokens_per_line = (5, 3);
        assert!(cfg.validate().is_err());
        assert!(SynthConfig::default().validate().is_ok());
    }
}
