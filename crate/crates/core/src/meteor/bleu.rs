use std::collections::HashMap;

use crate::corpus::Corpus;
use crate::error::Result;

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with clipped n-gram precisions, uniform weights over
/// `1..=max_n` and the closest-reference-length brevity penalty. No smoothing:
/// any zero precision gives 0.
pub fn bleu_corpus<S: AsRef<str>>(
    candidates: &[Vec<S>],
    references: &[Vec<Vec<S>>],
    max_n: usize,
) -> f64 {
    assert_eq!(
        candidates.len(),
        references.len(),
        "one reference set per candidate"
    );
    if max_n == 0 {
        return 0.0;
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;

    for (cand, refs) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(cand.len()), r))
            .unwrap_or(0);
        for n in 1..=max_n {
            let cand_counts = ngram_counts(cand, n);
            let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
            for r in refs {
                for (gram, c) in ngram_counts(r, n) {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(c);
                }
            }
            for (gram, c) in &cand_counts {
                matched[n - 1] += (*c).min(max_ref.get(gram).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }

    if matched.iter().zip(&total).any(|(&m, &t)| m == 0 || t == 0) {
        return 0.0;
    }
    let log_precision: f64 = matched
        .iter()
        .zip(&total)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / max_n as f64;
    let brevity = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    brevity * log_precision.exp()
}

/// BLEU of `(filename, candidate)` pairs against the captions in `references`.
pub fn bleu_for_corpus(
    candidates: &[(String, Vec<String>)],
    references: &Corpus,
    max_n: usize,
) -> Result<f64> {
    let refs = references.references();
    let mut cands = Vec::with_capacity(candidates.len());
    let mut ref_sets = Vec::with_capacity(candidates.len());
    for (filename, tokens) in candidates {
        let r = super::lookup(&refs, filename)?;
        cands.push(tokens.clone());
        ref_sets.push(r.iter().map(|s| s.to_vec()).collect::<Vec<_>>());
    }
    Ok(bleu_corpus(&cands, &ref_sets, max_n))
}
