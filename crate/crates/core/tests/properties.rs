//! Property tests for the raster, segmentation, corpus, and CTC invariants,
//! including a side-by-side oracle transcription of the projection-profile
//! line scan.

use proptest::prelude::*;

use nastaliq_core::corpus::{encode_transcription, Alphabet, SampleId};
use nastaliq_core::ctc::{collapse_trace, ctc_loss, edit_distance};
use nastaliq_core::net::PosteriorSequence;
use nastaliq_core::raster::{
    binarize, horizontal_projection, median_filter, rotate, variance, BinaryImage, GrayImage,
    Projection,
};
use nastaliq_core::segment::{bands_from_projection, crop_band, segment_lines, LineBand};

/// Direct transcription of the projection-scan pseudocode, 1-based loop
/// index and all, with the obviously-missing line-width reset and bounds
/// check restored. Emits 0-based (top, height) bands.
fn line_scan_oracle(hp: &[u32]) -> Vec<(usize, usize)> {
    let len = hp.len();
    let at = |j: usize| hp[j - 1]; // 1-based access
    let mut bands = Vec::new();
    let mut j = 1usize;
    while j <= len {
        if at(j) > 0 {
            let pt = j - 1;
            let mut lw = 0usize;
            while j <= len && at(j) > 0 {
                lw += 1;
                j += 1;
            }
            bands.push((pt, lw));
        }
        j += 1;
    }
    bands
}

fn gray_image(max_h: usize, max_w: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max_h, 1..=max_w).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0.0f64..=1.0, h * w)
            .prop_map(move |px| GrayImage::new(h, w, px).unwrap())
    })
}

fn binary_image(max_h: usize, max_w: usize) -> impl Strategy<Value = BinaryImage> {
    (1..=max_h, 1..=max_w).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0u8..=1, h * w)
            .prop_map(move |px| BinaryImage::new(h, w, px).unwrap())
    })
}

proptest! {
    #[test]
    fn projection_sum_equals_ink_count(mask in binary_image(12, 12)) {
        let p = horizontal_projection(&mask);
        let total: u64 = p.values().iter().map(|&v| v as u64).sum();
        prop_assert_eq!(total, mask.ink_count());
    }

    #[test]
    fn median_output_values_come_from_input(img in gray_image(8, 8), r in 1usize..=2) {
        let out = median_filter(&img, r);
        for &v in out.pixels() {
            prop_assert!(img.pixels().iter().any(|&p| p == v));
        }
    }

    #[test]
    fn median_idempotent_on_constant(h in 1usize..=6, w in 1usize..=6, v in 0.0f64..=1.0) {
        let img = GrayImage::new(h, w, vec![v; h * w]).unwrap();
        prop_assert_eq!(median_filter(&img, 1), img);
    }

    #[test]
    fn rotate_zero_is_exact_identity(img in gray_image(10, 10)) {
        prop_assert_eq!(rotate(&img, 0.0), img);
    }

    #[test]
    fn binarize_two_level_marks_lower_as_ink(
        h in 1usize..=8, w in 1usize..=8,
        lo in 0.0f64..=0.45, hi in 0.55f64..=1.0,
        mask in proptest::collection::vec(any::<bool>(), 64),
    ) {
        let px: Vec<f64> = (0..h * w).map(|i| if mask[i % mask.len()] { lo } else { hi }).collect();
        let has_both = px.iter().any(|&p| p == lo) && px.iter().any(|&p| p == hi);
        prop_assume!(has_both);
        let img = GrayImage::new(h, w, px.clone()).unwrap();
        let out = binarize(&img);
        for (i, &p) in px.iter().enumerate() {
            prop_assert_eq!(out.pixels()[i], u8::from(p == lo));
        }
    }

    #[test]
    fn variance_nonnegative_zero_iff_constant(values in proptest::collection::vec(0u32..50, 1..20)) {
        let v = variance(&Projection::new(values.clone()));
        prop_assert!(v >= 0.0);
        let constant = values.iter().all(|&x| x == values[0]);
        prop_assert_eq!(v == 0.0, constant);
    }

    #[test]
    fn band_scan_matches_pseudocode_oracle(hp in proptest::collection::vec(0u32..4, 0..40)) {
        let got: Vec<(usize, usize)> = bands_from_projection(&hp, 0, 1)
            .iter()
            .map(|b| (b.top, b.height))
            .collect();
        prop_assert_eq!(got, line_scan_oracle(&hp));
    }

    #[test]
    fn separated_lines_yield_one_band_each(
        heights in proptest::collection::vec(1usize..4, 1..6),
        gaps in proptest::collection::vec(1usize..4, 6),
    ) {
        // Stack k ink runs separated by >= 1 blank row.
        let mut hp: Vec<u32> = Vec::new();
        for (i, &h) in heights.iter().enumerate() {
            for _ in 0..h {
                hp.push(3);
            }
            hp.extend(std::iter::repeat(0).take(gaps[i % gaps.len()]));
        }
        let bands = bands_from_projection(&hp, 0, 1);
        prop_assert_eq!(bands.len(), heights.len());
        for (band, &h) in bands.iter().zip(&heights) {
            prop_assert_eq!(band.height, h);
        }
    }

    #[test]
    fn retained_bands_partition_their_rows(img in gray_image(16, 8)) {
        let bands = segment_lines(&img, 0, 1);
        let mask = binarize(&img);
        let proj = horizontal_projection(&mask);
        // Band rows hold all rows with ink; rows outside all bands have none.
        let mut covered = vec![false; img.height()];
        for b in &bands {
            let crop = crop_band(&img, b).unwrap();
            prop_assert_eq!(crop.height(), b.height);
            for r in b.top..b.top + b.height {
                covered[r] = true;
            }
        }
        for (r, &c) in covered.iter().enumerate() {
            prop_assert_eq!(c, proj.values()[r] > 0, "row {}", r);
        }
    }

    #[test]
    fn sample_id_round_trip(writer in 0u16..=999, page in 0u8..=99, line in 0u8..=99) {
        let id = SampleId::new(writer, page, line).unwrap();
        prop_assert_eq!(SampleId::parse(&id.to_string()).unwrap(), id);
    }

    #[test]
    fn transcription_encode_decode_round_trip(
        tokens in proptest::collection::vec("[a-d]_(iso|i|m|f)", 1..8),
    ) {
        let line = tokens.join(" ");
        let alphabet = Alphabet::from_transcriptions([line.as_str()]);
        let encoded = encode_transcription(&line, &alphabet).unwrap();
        let decoded = encoded.decode(&alphabet).unwrap();
        prop_assert_eq!(decoded, tokens.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn alphabet_invariant_to_record_order(
        mut lines in proptest::collection::vec("[a-e]_(i|m)( [a-e]_(i|m)){0,4}", 1..6),
    ) {
        let fwd = Alphabet::from_transcriptions(lines.iter().map(String::as_str));
        lines.reverse();
        let rev = Alphabet::from_transcriptions(lines.iter().map(String::as_str));
        prop_assert_eq!(fwd, rev);
    }

    #[test]
    fn ctc_probability_in_unit_interval(
        t in 1usize..6,
        raw in proptest::collection::vec(0.05f64..1.0, 6 * 3),
        len in 1usize..3,
    ) {
        let k = 3;
        let mut data = Vec::with_capacity(t * k);
        for row in raw.chunks(k).take(t) {
            let sum: f64 = row.iter().sum();
            data.extend(row.iter().map(|v| v / sum));
        }
        let post = PosteriorSequence::from_flat(data, k).unwrap();
        let target = nastaliq_core::corpus::LabelSequence::from_indices(
            (0..len).map(|i| 1 + i % (k - 1)).collect(),
        ).unwrap();
        if let Ok(loss) = ctc_loss(&post, &target) {
            prop_assert!(loss.neg_log_prob >= 0.0);
            let p = (-loss.neg_log_prob).exp();
            prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn collapse_never_emits_blanks(trace in proptest::collection::vec(0usize..4, 0..15)) {
        let labels = collapse_trace(&trace);
        prop_assert!(labels.indices().iter().all(|&i| i != 0));
        prop_assert!(labels.len() <= trace.len());
    }

    #[test]
    fn edit_distance_is_a_metric(
        a in proptest::collection::vec(1usize..4, 0..8),
        b in proptest::collection::vec(1usize..4, 0..8),
        c in proptest::collection::vec(1usize..4, 0..8),
    ) {
        prop_assert_eq!(edit_distance(&a, &a), 0);
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
    }
}

#[test]
fn oracle_reproduces_spec_hand_trace() {
    // Ink rows 2..=4 and 8..=11.
    let hp = [0, 0, 3, 3, 3, 0, 0, 0, 2, 2, 2, 2, 0];
    assert_eq!(line_scan_oracle(&hp), vec![(2, 3), (8, 4)]);
}

#[test]
fn band_scan_matches_oracle_on_real_pages() {
    use nastaliq_core::synth::{generate_page, SynthConfig};
    let cfg = SynthConfig::default();
    for writer in 1..=10u16 {
        let page = generate_page(&cfg, writer, 1).unwrap();
        let proj = horizontal_projection(&binarize(&page.image));
        let expected: Vec<LineBand> = line_scan_oracle(proj.values())
            .into_iter()
            .map(|(top, height)| {
                let ink: u64 = proj.values()[top..top + height]
                    .iter()
                    .map(|&v| v as u64)
                    .sum();
                LineBand {
                    top,
                    height,
                    ink_pixels: ink,
                }
            })
            .collect();
        assert_eq!(segment_lines(&page.image, 0, 1), expected);
    }
}
