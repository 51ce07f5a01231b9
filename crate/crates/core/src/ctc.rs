//! Connectionist Temporal Classification: log-space forward-backward loss
//! with exact pre-softmax gradients, greedy best-path decoding, and label
//! error metrics.
//!
//! The blank is class 0 throughout. All alpha/beta recursions run in log
//! space; products of hundreds of per-frame probabilities underflow f64
//! otherwise.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::LabelSequence;
use crate::math;
use crate::net::PosteriorSequence;

/// Index of the CTC blank class.
pub const BLANK: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CtcError {
    /// The target cannot be aligned: T frames cannot emit it.
    InfeasibleTarget { needed: usize, got: usize },
    /// Training targets must be non-empty.
    EmptyTarget,
    /// A target index is the blank or outside the alphabet.
    InvalidLabel { index: usize, classes: usize },
    /// No pairs to aggregate, or a pair with an empty reference.
    EmptyReference,
}

impl fmt::Display for CtcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CtcError::InfeasibleTarget { needed, got } => {
                write!(f, "infeasible target: needs >= {needed} frames, got {got}")
            }
            CtcError::EmptyTarget => write!(f, "empty target"),
            CtcError::InvalidLabel { index, classes } => {
                write!(f, "label index {index} invalid for {classes} classes")
            }
            CtcError::EmptyReference => write!(f, "empty reference set"),
        }
    }
}

/// Loss value and its exact gradient with respect to pre-softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcLoss {
    pub neg_log_prob: f64,
    /// `T x K`, row-major; each row sums to 0.
    pub logit_gradient: Vec<f64>,
}

/// Greedy decode output: collapsed labels plus the raw argmax trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub labels: LabelSequence,
    pub argmax_trace: Vec<usize>,
}

/// Minimum frame count able to emit `target`: its length plus one mandatory
/// separating blank per adjacent repeat.
pub fn min_frames(target: &LabelSequence) -> usize {
    let idx = target.indices();
    let repeats = idx.windows(2).filter(|w| w[0] == w[1]).count();
    idx.len() + repeats
}

/// Forward-backward CTC loss over per-step posteriors.
///
/// Builds the blank-interleaved extended target (length `2|z|+1`), runs the
/// standard alpha/beta recursions in log space, and returns
/// `-log p(z|x)` with the exact logit gradient
/// `y_t(k) - (1/p) * sum_{s: z'_s = k} alpha_t(s) beta_t(s)`.
pub fn ctc_loss(
    posteriors: &PosteriorSequence,
    target: &LabelSequence,
) -> Result<CtcLoss, CtcError> {
    let t_total = posteriors.len();
    let k = posteriors.class_count();
    let labels = target.indices();
    if labels.is_empty() {
        return Err(CtcError::EmptyTarget);
    }
    for &l in labels {
        if l == BLANK || l >= k {
            return Err(CtcError::InvalidLabel {
                index: l,
                classes: k,
            });
        }
    }
    let needed = min_frames(target);
    if t_total < needed {
        return Err(CtcError::InfeasibleTarget {
            needed,
            got: t_total,
        });
    }

    // Extended target: blanks at even positions, labels at odd.
    let s_total = 2 * labels.len() + 1;
    let ext = |s: usize| -> usize {
        if s % 2 == 0 {
            BLANK
        } else {
            labels[s / 2]
        }
    };
    // Skip transition s-2 -> s allowed only between distinct non-blanks.
    let can_skip = |s: usize| -> bool { s % 2 == 1 && (s < 2 || ext(s) != ext(s - 2)) };

    let log_y = |t: usize, class: usize| -> f64 {
        let v = posteriors.row(t)[class];
        if v > 0.0 {
            math::ln(v)
        } else {
            f64::NEG_INFINITY
        }
    };

    // Alpha: inclusive of y_t at its own step.
    let mut alpha = vec![f64::NEG_INFINITY; t_total * s_total];
    alpha[0] = log_y(0, BLANK);
    if s_total > 1 {
        alpha[1] = log_y(0, ext(1));
    }
    for t in 1..t_total {
        let (prev, cur) = alpha.split_at_mut(t * s_total);
        let prev = &prev[(t - 1) * s_total..];
        let cur = &mut cur[..s_total];
        for s in 0..s_total {
            let mut acc = prev[s];
            if s >= 1 {
                acc = math::log_add(acc, prev[s - 1]);
            }
            if s >= 2 && can_skip(s) {
                acc = math::log_add(acc, prev[s - 2]);
            }
            cur[s] = acc + log_y(t, ext(s));
        }
    }

    let last = (t_total - 1) * s_total;
    let mut log_p = alpha[last + s_total - 1];
    if s_total > 1 {
        log_p = math::log_add(log_p, alpha[last + s_total - 2]);
    }

    // Beta: probability of completing from (t, s), excluding y_t at s.
    let mut beta = vec![f64::NEG_INFINITY; t_total * s_total];
    beta[last + s_total - 1] = 0.0;
    if s_total > 1 {
        beta[last + s_total - 2] = 0.0;
    }
    for t in (0..t_total - 1).rev() {
        let (cur_all, next_all) = beta.split_at_mut((t + 1) * s_total);
        let cur = &mut cur_all[t * s_total..];
        let next = &next_all[..s_total];
        for s in 0..s_total {
            let mut acc = next[s] + log_y(t + 1, ext(s));
            if s + 1 < s_total {
                acc = math::log_add(acc, next[s + 1] + log_y(t + 1, ext(s + 1)));
            }
            if s + 2 < s_total && can_skip(s + 2) {
                acc = math::log_add(acc, next[s + 2] + log_y(t + 1, ext(s + 2)));
            }
            cur[s] = acc;
        }
    }

    // Gradient w.r.t. logits: y_t(k) minus the posterior mass routed
    // through states labelled k.
    let mut logit_gradient = vec![0.0; t_total * k];
    for t in 0..t_total {
        let row = &mut logit_gradient[t * k..(t + 1) * k];
        row.copy_from_slice(posteriors.row(t));
        for s in 0..s_total {
            let g = alpha[t * s_total + s] + beta[t * s_total + s] - log_p;
            if g != f64::NEG_INFINITY {
                row[ext(s)] -= math::exp(g);
            }
        }
    }

    Ok(CtcLoss {
        neg_log_prob: -log_p,
        logit_gradient,
    })
}

/// Per-step argmax (ties to the lowest index), collapse repeats, drop blanks.
pub fn best_path_decode(posteriors: &PosteriorSequence) -> DecodeResult {
    let mut trace = Vec::with_capacity(posteriors.len());
    for row in posteriors.rows() {
        let mut best = 0usize;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        trace.push(best);
    }
    let labels = collapse_trace(&trace);
    DecodeResult {
        labels,
        argmax_trace: trace,
    }
}

/// Collapse an argmax trace: merge consecutive repeats, then remove blanks.
pub fn collapse_trace(trace: &[usize]) -> LabelSequence {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in trace {
        if Some(c) != prev && c != BLANK {
            out.push(c);
        }
        prev = Some(c);
    }
    LabelSequence::from_indices(out).expect("blanks removed by construction")
}

/// Unit-cost insert/delete/substitute edit distance.
pub fn edit_distance(a: &[usize], b: &[usize]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &av) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bv) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(av != bv);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Aggregate label error rate: total edit distance divided by total
/// reference length (not a mean of per-pair ratios).
pub fn label_error_rate(pairs: &[(LabelSequence, LabelSequence)]) -> Result<f64, CtcError> {
    if pairs.is_empty() {
        return Err(CtcError::EmptyReference);
    }
    let mut distance = 0usize;
    let mut reference = 0usize;
    for (decoded, target) in pairs {
        if target.is_empty() {
            return Err(CtcError::EmptyReference);
        }
        distance += edit_distance(decoded.indices(), target.indices());
        reference += target.len();
    }
    Ok(distance as f64 / reference as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn posteriors(rows: &[&[f64]]) -> PosteriorSequence {
        let k = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        PosteriorSequence::from_flat(flat, k).unwrap()
    }

    fn labels(idx: &[usize]) -> LabelSequence {
        LabelSequence::from_indices(idx.to_vec()).unwrap()
    }

    /// Brute-force oracle: sum P(pi) over all K^T paths whose collapse
    /// equals the target.
    fn brute_force_prob(post: &PosteriorSequence, target: &[usize]) -> f64 {
        let t_total = post.len();
        let k = post.class_count();
        let mut total = 0.0;
        let mut path = vec![0usize; t_total];
        loop {
            let mut p = 1.0;
            for (t, &c) in path.iter().enumerate() {
                p *= post.row(t)[c];
            }
            let collapsed = collapse_trace(&path);
            if collapsed.indices() == target {
                total += p;
            }
            // Odometer increment over K^T.
            let mut t = 0;
            loop {
                if t == t_total {
                    return total;
                }
                path[t] += 1;
                if path[t] < k {
                    break;
                }
                path[t] = 0;
                t += 1;
            }
        }
    }

    fn random_posteriors(rng: &mut ChaCha8Rng, t: usize, k: usize) -> PosteriorSequence {
        let mut data = Vec::with_capacity(t * k);
        for _ in 0..t {
            let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
            // Fix row sum to 1.0 within the constructor's tolerance.
            data.extend_from_slice(&row);
        }
        PosteriorSequence::from_flat(data, k).unwrap()
    }

    #[test]
    fn single_frame_forced_path() {
        let post = posteriors(&[&[0.3, 0.7]]);
        let loss = ctc_loss(&post, &labels(&[1])).unwrap();
        assert!((loss.neg_log_prob - (-libm::log(0.7))).abs() < 1e-12);
        assert!((loss.neg_log_prob - 0.35667494393873245).abs() < 1e-12);
    }

    #[test]
    fn two_frame_uniform_three_paths() {
        // Paths aa, a-, -a collapse to "a"; p = 3/4.
        let post = posteriors(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let loss = ctc_loss(&post, &labels(&[1])).unwrap();
        assert!((loss.neg_log_prob - (-libm::log(0.75))).abs() < 1e-12);
    }

    #[test]
    fn repeated_label_needs_separating_blank() {
        let post = posteriors(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert_eq!(
            ctc_loss(&post, &labels(&[1, 1])),
            Err(CtcError::InfeasibleTarget { needed: 3, got: 2 })
        );
    }

    #[test]
    fn invalid_labels_rejected() {
        let post = posteriors(&[&[0.5, 0.5]]);
        assert!(matches!(
            ctc_loss(&post, &LabelSequence::from_indices(vec![]).unwrap()),
            Err(CtcError::EmptyTarget)
        ));
        assert!(matches!(
            ctc_loss(&post, &labels(&[5])),
            Err(CtcError::InvalidLabel { .. })
        ));
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..60 {
            let t = rng.gen_range(1..=6);
            let k = rng.gen_range(2..=4);
            let len = rng.gen_range(1..=3.min(t));
            let target: Vec<usize> = (0..len).map(|_| rng.gen_range(1..k)).collect();
            let post = random_posteriors(&mut rng, t, k);
            let seq = labels(&target);
            let needed = min_frames(&seq);
            let res = ctc_loss(&post, &seq);
            let brute = brute_force_prob(&post, &target);
            if t < needed {
                assert!(res.is_err());
                assert_eq!(brute, 0.0);
            } else {
                let p = libm::exp(-res.unwrap().neg_log_prob);
                assert!(
                    (p - brute).abs() < 1e-10,
                    "T={t} K={k} target={target:?}: fb={p} brute={brute}"
                );
            }
        }
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = rng.gen_range(2..=7);
            let k = rng.gen_range(2..=5);
            let len = rng.gen_range(1..=2.min(t / 2).max(1));
            let target: Vec<usize> = (0..len).map(|_| rng.gen_range(1..k)).collect();
            let seq = labels(&target);
            let post = random_posteriors(&mut rng, t, k);
            if post.len() < min_frames(&seq) {
                continue;
            }
            let loss = ctc_loss(&post, &seq).unwrap();
            for row in loss.logit_gradient.chunks_exact(k) {
                let sum: f64 = row.iter().sum();
                assert!(sum.abs() < 1e-9, "row sum {sum}");
            }
        }
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        // Perturb raw logits, re-softmax, and re-evaluate the loss.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (t_total, k) = (5, 3);
        let logits: Vec<f64> = (0..t_total * k).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let target = labels(&[1, 2]);

        let to_post = |z: &[f64]| -> PosteriorSequence {
            let mut data = vec![0.0; z.len()];
            for (row_z, row_y) in z.chunks_exact(k).zip(data.chunks_exact_mut(k)) {
                let max = row_z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let mut sum = 0.0;
                for (y, &l) in row_y.iter_mut().zip(row_z) {
                    *y = libm::exp(l - max);
                    sum += *y;
                }
                for y in row_y.iter_mut() {
                    *y /= sum;
                }
            }
            PosteriorSequence::from_flat(data, k).unwrap()
        };

        let analytic = ctc_loss(&to_post(&logits), &target).unwrap().logit_gradient;
        let eps = 1e-6;
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus[i] += eps;
            let mut minus = logits.clone();
            minus[i] -= eps;
            let lp = ctc_loss(&to_post(&plus), &target).unwrap().neg_log_prob;
            let lm = ctc_loss(&to_post(&minus), &target).unwrap().neg_log_prob;
            let numeric = (lp - lm) / (2.0 * eps);
            assert!(
                (analytic[i] - numeric).abs() < 1e-6,
                "i={i}: analytic {} vs numeric {numeric}",
                analytic[i]
            );
        }
    }

    #[test]
    fn decode_collapse_rules() {
        // [a, a, blank, a] -> "aa"
        let post = posteriors(&[&[0.1, 0.9], &[0.2, 0.8], &[0.9, 0.1], &[0.4, 0.6]]);
        let res = best_path_decode(&post);
        assert_eq!(res.argmax_trace, vec![1, 1, 0, 1]);
        assert_eq!(res.labels.indices(), &[1, 1]);

        // all-blank -> empty
        let post = posteriors(&[&[0.9, 0.1], &[0.8, 0.2]]);
        assert!(best_path_decode(&post).labels.is_empty());

        // [blank, a, b, b] -> "ab"
        let post = posteriors(&[
            &[0.8, 0.1, 0.1],
            &[0.1, 0.8, 0.1],
            &[0.1, 0.1, 0.8],
            &[0.2, 0.1, 0.7],
        ]);
        assert_eq!(best_path_decode(&post).labels.indices(), &[1, 2]);
    }

    #[test]
    fn decode_tie_breaks_to_lowest_index() {
        let post = posteriors(&[&[0.5, 0.5]]);
        assert_eq!(best_path_decode(&post).argmax_trace, vec![0]);
        assert!(best_path_decode(&post).labels.is_empty());
    }

    #[test]
    fn single_step_recovery_iff_beats_blank() {
        let win = posteriors(&[&[0.4, 0.6]]);
        assert_eq!(best_path_decode(&win).labels.indices(), &[1]);
        let lose = posteriors(&[&[0.6, 0.4]]);
        assert!(best_path_decode(&lose).labels.is_empty());
    }

    #[test]
    fn edit_distance_kitten_sitting() {
        // Tokens mapped to integers: kitten vs sitting -> distance 3.
        let a = [10, 8, 19, 19, 4, 13];
        let b = [18, 8, 19, 19, 8, 13, 6];
        assert_eq!(edit_distance(&a, &b), 3);
        assert_eq!(edit_distance(&a, &a), 0);
        assert_eq!(edit_distance(&[], &b), 7);
        assert_eq!(edit_distance(&a, &[]), 6);
    }

    #[test]
    fn label_error_rate_aggregates() {
        let pairs = vec![
            (labels(&[10, 8, 19, 19, 4, 13]), labels(&[18, 8, 19, 19, 8, 13, 6])),
        ];
        assert!((label_error_rate(&pairs).unwrap() - 3.0 / 7.0).abs() < 1e-12);

        let identical = vec![(labels(&[1, 2]), labels(&[1, 2]))];
        assert_eq!(label_error_rate(&identical).unwrap(), 0.0);

        let degenerate = vec![(LabelSequence::default(), labels(&[1, 2, 3]))];
        assert_eq!(label_error_rate(&degenerate).unwrap(), 1.0);

        // Aggregate, not mean of ratios: (1 + 0) / (1 + 9).
        let mixed = vec![
            (labels(&[2]), labels(&[1])),
            (labels(&[1; 9]), labels(&[1; 9])),
        ];
        assert!((label_error_rate(&mixed).unwrap() - 0.1).abs() < 1e-12);

        assert_eq!(label_error_rate(&[]), Err(CtcError::EmptyReference));
        let empty_target = vec![(labels(&[1]), LabelSequence::default())];
        assert_eq!(label_error_rate(&empty_target), Err(CtcError::EmptyReference));
    }

    #[test]
    fn edit_distance_metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let gen = |rng: &mut ChaCha8Rng| -> Vec<usize> {
                let n = rng.gen_range(0..6);
                (0..n).map(|_| rng.gen_range(1..4)).collect()
            };
            let (a, b, c) = (gen(&mut rng), gen(&mut rng), gen(&mut rng));
            assert_eq!(edit_distance(&a, &a), 0);
            assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            assert!(
                edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c),
                "triangle violated for {a:?} {b:?} {c:?}"
            );
        }
    }
}
