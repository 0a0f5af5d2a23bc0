//! Sentence-level BLEU over lowercased word tokens.
//!
//! Uniform weights over 1- to 4-grams. Unigram precision is left
//! unsmoothed, so a pair without any shared word scores exactly 0; the
//! higher orders use add-one smoothing, `(matches + 1) / (total + 1)`,
//! which keeps short sentences from collapsing to 0.

use std::collections::HashMap;

use crate::text::tokens;

pub const DEFAULT_TAU: f64 = 0.5;
const MAX_ORDER: usize = 4;

/// Clipped n-gram matches and candidate n-gram totals per order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramCounts {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub candidate_len: usize,
    pub reference_len: usize,
}

fn ngrams(words: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if words.len() >= n {
        for w in words.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

pub fn ngram_counts(candidate: &str, reference: &str) -> NgramCounts {
    let c = tokens(candidate);
    let r = tokens(reference);
    let mut counts = NgramCounts {
        matches: [0; MAX_ORDER],
        totals: [0; MAX_ORDER],
        candidate_len: c.len(),
        reference_len: r.len(),
    };
    for n in 1..=MAX_ORDER {
        let cg = ngrams(&c, n);
        let rg = ngrams(&r, n);
        counts.totals[n - 1] = c.len().saturating_sub(n - 1);
        counts.matches[n - 1] = cg
            .iter()
            .map(|(g, k)| (*k).min(rg.get(g).copied().unwrap_or(0)))
            .sum();
    }
    counts
}

impl NgramCounts {
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.reference_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_sum = (self.matches[0] as f64 / self.totals[0] as f64).ln();
        for n in 1..MAX_ORDER {
            log_sum += ((self.matches[n] + 1) as f64 / (self.totals[n] + 1) as f64).ln();
        }
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        brevity * (log_sum / MAX_ORDER as f64).exp()
    }
}

pub fn sentence_bleu(candidate: &str, reference: &str) -> f64 {
    ngram_counts(candidate, reference).score()
}

/// `true` when BLEU strictly exceeds `tau`.
pub fn bleu_match(candidate: &str, reference: &str, tau: f64) -> bool {
    sentence_bleu(candidate, reference) > tau
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_scores_one() {
        let s = "Who founded Hewlett-Packard?";
        assert!((sentence_bleu(s, s) - 1.0).abs() < 1e-12);
        assert!(bleu_match(s, s, DEFAULT_TAU));
    }

    #[test]
    fn disjoint_scores_zero() {
        assert_eq!(sentence_bleu("alpha beta", "gamma delta"), 0.0);
        assert!(!bleu_match("alpha beta", "gamma delta", DEFAULT_TAU));
        assert_eq!(sentence_bleu("", "gamma"), 0.0);
    }

    #[test]
    fn hand_counted_pair() {
        let cand = "What exactly horsepower equal to in watts?";
        let refr = "What is one horsepower equal to in watts?";
        let c = ngram_counts(cand, refr);
        assert_eq!(c.matches, [6, 4, 3, 2]);
        assert_eq!(c.totals, [7, 6, 5, 4]);
        // p1 = 6/7, p2 = 5/7, p3 = 4/6, p4 = 3/5; brevity exp(1 - 8/7).
        let hand = (-1.0f64 / 7.0).exp() * (6.0 / 7.0 * 5.0 / 7.0 * 4.0 / 6.0 * 3.0 / 5.0f64).powf(0.25);
        assert!((sentence_bleu(cand, refr) - hand).abs() < 1e-12);
        assert!((hand - 0.61).abs() < 0.005);
        assert!(bleu_match(cand, refr, 0.5));
    }
}
