//! Token-level text metrics. Sequences are compared with exact token
//! equality; no stemming or synonym tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

pub const BLEU_MAX_ORDER: usize = 4;
/// Substituted for a zero n-gram precision.
pub const BLEU_SMOOTHING: f64 = 1e-9;
/// Maximum number of candidates aggregated by [`open_ended_accuracy`].
pub const TOP_K: usize = 5;

const METEOR_ALPHA_RECALL_WEIGHT: f64 = 9.0;
const METEOR_PENALTY_GAMMA: f64 = 0.5;
const METEOR_PENALTY_BETA: i32 = 3;

/// Intersection over union of two label sets (duplicates ignored).
pub fn iou_accuracy<T: Ord + Copy>(predicted: &[T], truth: &[T]) -> f64 {
    let p: BTreeSet<T> = predicted.iter().copied().collect();
    let t: BTreeSet<T> = truth.iter().copied().collect();
    let union = p.union(&t).count();
    if p.is_empty() || union == 0 {
        return 0.0;
    }
    p.intersection(&t).count() as f64 / union as f64
}

fn ngram_counts<T: Ord + Copy>(seq: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut m = BTreeMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence BLEU: geometric mean of clipped n-gram precisions times the
/// brevity penalty. Orders above the candidate length are skipped so that a
/// short sequence still scores 1 against itself.
pub fn bleu<T: Ord + Copy>(candidate: &[T], reference: &[T], max_order: usize) -> f64 {
    assert!(max_order >= 1, "max_order must be at least 1");
    let c = candidate.len();
    if c == 0 {
        return 0.0;
    }
    let orders = max_order.min(c);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let matched: usize = cand
            .iter()
            .map(|(g, k)| (*k).min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if matched == 0 { BLEU_SMOOTHING } else { matched as f64 / total as f64 };
        log_sum += libm::log(p);
    }
    let r = reference.len();
    let bp = if c > r { 1.0 } else { libm::exp(1.0 - r as f64 / c as f64) };
    bp * libm::exp(log_sum / orders as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RougeVariant {
    Rouge1,
    RougeL,
}

fn f1(overlap: usize, cand_len: usize, ref_len: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_len as f64;
    let r = overlap as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE F1 of unigram overlap or of longest common subsequence.
pub fn rouge<T: Ord + Copy>(candidate: &[T], reference: &[T], variant: RougeVariant) -> f64 {
    let overlap = match variant {
        RougeVariant::Rouge1 => {
            let cc = ngram_counts(candidate, 1);
            let rc = ngram_counts(reference, 1);
            cc.iter().map(|(g, k)| (*k).min(rc.get(g).copied().unwrap_or(0))).sum()
        }
        RougeVariant::RougeL => lcs_len(candidate, reference),
    };
    f1(overlap, candidate.len(), reference.len())
}

/// METEOR with exact matching: each candidate token, left to right, aligns to
/// the leftmost unused equal reference token.
pub fn meteor<T: Ord + Copy>(candidate: &[T], reference: &[T]) -> f64 {
    let mut used = vec![false; reference.len()];
    let mut aligned: Vec<(usize, usize)> = Vec::new();
    for (i, x) in candidate.iter().enumerate() {
        if let Some(j) = (0..reference.len()).find(|&j| !used[j] && reference[j] == *x) {
            used[j] = true;
            aligned.push((i, j));
        }
    }
    let m = aligned.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + aligned
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = (1.0 + METEOR_ALPHA_RECALL_WEIGHT) * p * r / (r + METEOR_ALPHA_RECALL_WEIGHT * p);
    let penalty = METEOR_PENALTY_GAMMA * libm::pow(chunks as f64 / m as f64, METEOR_PENALTY_BETA as f64);
    f_mean * (1.0 - penalty)
}

/// Mean of BLEU, ROUGE (mean of ROUGE-1 and ROUGE-L) and METEOR.
pub fn open_ended_score<T: Ord + Copy>(candidate: &[T], reference: &[T]) -> f64 {
    let b = bleu(candidate, reference, BLEU_MAX_ORDER);
    let r = 0.5 * (rouge(candidate, reference, RougeVariant::Rouge1) + rouge(candidate, reference, RougeVariant::RougeL));
    let m = meteor(candidate, reference);
    (b + r + m) / 3.0
}

/// Uniform mean of [`open_ended_score`] over up to [`TOP_K`] candidates.
pub fn open_ended_accuracy<T: Ord + Copy, S: AsRef<[T]>>(candidates: &[S], reference: &[T]) -> f64 {
    let k = candidates.len().min(TOP_K);
    if k == 0 {
        return 0.0;
    }
    candidates[..k]
        .iter()
        .map(|c| open_ended_score(c.as_ref(), reference))
        .sum::<f64>()
        / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: u32 = 1;
    const B: u32 = 2;
    const C: u32 = 3;
    const D: u32 = 4;

    #[test]
    fn iou_examples() {
        assert_eq!(iou_accuracy(&[A, B], &[A, B]), 1.0);
        assert_eq!(iou_accuracy(&[A], &[A, B]), 0.5);
        assert!((iou_accuracy(&[A, B], &[B, C]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou_accuracy::<u32>(&[], &[A]), 0.0);
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(bleu(&[A, B, C, D, A], &[A, B, C, D, A], 4), 1.0);
        let e = bleu(&[A, B], &[A, B, C, D], 2);
        assert!((e - libm::exp(-1.0)).abs() < 1e-12);
        assert!(bleu(&[A, B], &[C, D], 4) < 1e-8);
        assert_eq!(bleu::<u32>(&[], &[A], 4), 0.0);
        assert_eq!(bleu(&[A], &[A], 4), 1.0);
    }

    #[test]
    fn rouge_examples() {
        assert!((rouge(&[A, B, C], &[A, B, D], RougeVariant::Rouge1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rouge(&[A, B, C], &[A, B, C], RougeVariant::RougeL), 1.0);
        assert_eq!(rouge(&[A, B], &[C, D], RougeVariant::Rouge1), 0.0);
        assert_eq!(rouge::<u32>(&[], &[], RougeVariant::RougeL), 0.0);
        assert_eq!(lcs_len(&[A, B, C, D], &[B, D, A, C]), 2);
    }

    #[test]
    fn meteor_examples() {
        assert_eq!(meteor(&[A, B, C, D], &[A, B, C, D]), 0.9921875);
        assert_eq!(meteor(&[A, B], &[C, D]), 0.0);
        assert_eq!(meteor(&[B, A], &[A, B]), 0.5);
    }

    #[test]
    fn open_ended_examples() {
        let s = [A, B, C, D];
        let id = open_ended_accuracy(&[&s[..]], &s);
        assert!((id - (1.0 + 1.0 + 0.9921875) / 3.0).abs() < 1e-12);
        assert!((id - 0.997396).abs() < 1e-6);
        assert!(open_ended_accuracy(&[&[C, C][..]], &[A, B]) < 1e-8);
        let s1 = open_ended_score(&[A, B], &s);
        let s2 = open_ended_score(&[B, A, D], &s);
        let both = open_ended_accuracy(&[&[A, B][..], &[B, A, D][..]], &s);
        assert!((both - 0.5 * (s1 + s2)).abs() < 1e-15);
    }
}
