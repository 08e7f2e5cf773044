//! METEOR scoring with exact and Porter-stem matching stages (no synonymy
//! stage), plus a corpus BLEU comparator.
//!
//! Sentence score: `Fmean = 10PR / (R + 9P)`, `penalty = 0.5 (chunks/m)^3`,
//! `score = Fmean (1 - penalty)`.

mod align;
mod bleu;
mod porter;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use align::{
    align, count_chunks, count_crossings, Alignment, Match, Stage, BEAM_WIDTH, EXHAUSTIVE_MAX_LEN,
};
pub use bleu::{bleu_corpus, bleu_for_corpus};
pub use porter::porter_stem;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Label attached to every METEOR report produced by this crate.
pub const METEOR_VARIANT: &str = "METEOR (exact + Porter stem stages, without WordNet synonymy)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorScore {
    pub matched: usize,
    pub candidate_len: usize,
    pub reference_len: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

impl MeteorScore {
    /// Score from raw counts. All derived fields are zero when `matched == 0`.
    pub fn from_counts(
        matched: usize,
        candidate_len: usize,
        reference_len: usize,
        chunks: usize,
    ) -> Self {
        if matched == 0 {
            return MeteorScore {
                matched,
                candidate_len,
                reference_len,
                chunks: 0,
                precision: 0.0,
                recall: 0.0,
                fmean: 0.0,
                penalty: 0.0,
                score: 0.0,
            };
        }
        let m = matched as f64;
        let precision = m / candidate_len as f64;
        let recall = m / reference_len as f64;
        let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
        let penalty = 0.5 * (chunks as f64 / m).powi(3);
        MeteorScore {
            matched,
            candidate_len,
            reference_len,
            chunks,
            precision,
            recall,
            fmean,
            penalty,
            score: fmean * (1.0 - penalty),
        }
    }
}

pub fn meteor_pair<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> MeteorScore {
    let a = align(candidate, reference);
    MeteorScore::from_counts(
        a.matches.len(),
        candidate.len(),
        reference.len(),
        a.chunk_count,
    )
}

/// Best score over the references; ties keep the earliest reference.
pub fn meteor_sentence<S: AsRef<str>, R: AsRef<[S]>>(
    candidate: &[S],
    references: &[R],
) -> Result<MeteorScore> {
    let mut best: Option<MeteorScore> = None;
    for r in references {
        let s = meteor_pair(candidate, r.as_ref());
        if best.is_none_or(|b| s.score > b.score) {
            best = Some(s);
        }
    }
    best.ok_or_else(|| Error::Invalid("METEOR needs at least one reference".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub filename: String,
    pub score: MeteorScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeteor {
    /// Computed from summed matches, lengths and chunks over all segments.
    pub aggregate: MeteorScore,
    pub mean_sentence_score: f64,
    pub segments: Vec<SegmentScore>,
}

impl CorpusMeteor {
    pub fn from_segments(segments: Vec<SegmentScore>) -> Self {
        let (mut m, mut c, mut r, mut ch) = (0, 0, 0, 0);
        for s in &segments {
            m += s.score.matched;
            c += s.score.candidate_len;
            r += s.score.reference_len;
            ch += s.score.chunks;
        }
        let mean = if segments.is_empty() {
            0.0
        } else {
            segments.iter().map(|s| s.score.score).sum::<f64>() / segments.len() as f64
        };
        CorpusMeteor {
            aggregate: MeteorScore::from_counts(m, c, r, ch),
            mean_sentence_score: mean,
            segments,
        }
    }
}

fn reference_map(references: &Corpus) -> HashMap<&str, Vec<&[String]>> {
    references.references()
}

pub(crate) fn lookup<'a>(
    refs: &'a HashMap<&str, Vec<&'a [String]>>,
    filename: &str,
) -> Result<&'a Vec<&'a [String]>> {
    refs.get(filename)
        .filter(|r| !r.is_empty())
        .ok_or_else(|| Error::UnknownImage(filename.to_string()))
}

/// Score `(filename, candidate tokens)` pairs against the captions of the
/// matching images in `references`.
pub fn meteor_corpus(
    candidates: &[(String, Vec<String>)],
    references: &Corpus,
) -> Result<CorpusMeteor> {
    let refs = reference_map(references);
    for (filename, _) in candidates {
        lookup(&refs, filename)?;
    }
    let segments = candidates
        .par_iter()
        .map(|(filename, cand)| {
            let r = lookup(&refs, filename)?;
            Ok(SegmentScore {
                filename: filename.clone(),
                score: meteor_sentence(cand, r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorpusMeteor::from_segments(segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Caption, ImageEntry, Split};
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_twelve_tokens() {
        let s = words("many planes are parked next to a long building in an airport");
        let score = meteor_sentence(&s, std::slice::from_ref(&s)).unwrap();
        let expected = 1.0 - 0.5 / 12f64.powi(3);
        assert!((score.score - expected).abs() < 1e-12);
        assert!((score.score - 0.999711).abs() < 1e-6);
    }

    #[test]
    fn disjoint_scores_zero() {
        let s = meteor_sentence(&words("red roof"), &[words("blue lake")]).unwrap();
        assert_eq!(s.score, 0.0);
        assert_eq!(s.penalty, 0.0);
        let empty: Vec<String> = vec![];
        assert_eq!(meteor_sentence(&empty, &[words("a b")]).unwrap().score, 0.0);
    }

    #[test]
    fn no_references_is_an_error() {
        let refs: Vec<Vec<String>> = vec![];
        assert!(meteor_sentence(&words("a"), &refs).is_err());
    }

    #[test]
    fn max_over_references() {
        let cand = words("two boats in a harbor");
        let refs = vec![
            words("a river"),
            words("two boats in a harbor"),
            words("boats"),
            words("some trees"),
            words("a harbor with boats"),
        ];
        let best = meteor_sentence(&cand, &refs).unwrap();
        let direct = meteor_pair(&cand, &refs[1]);
        assert_eq!(best, direct);
    }

    #[test]
    fn worked_example_counts() {
        let s = meteor_pair(
            &words("many planes are parked"),
            &words("several planes parked here"),
        );
        assert_eq!((s.matched, s.chunks), (2, 2));
        // P = R = 1/2, Fmean = 1/2, penalty = 0.5
        assert!((s.fmean - 0.5).abs() < 1e-15);
        assert!((s.score - 0.25).abs() < 1e-15);
    }

    fn corpus(images: &[(&str, &[&str])]) -> Corpus {
        Corpus::new(
            images
                .iter()
                .map(|(name, caps)| ImageEntry {
                    filename: name.to_string(),
                    imgid: None,
                    split: Split::Val,
                    scene_class: None,
                    captions: caps
                        .iter()
                        .enumerate()
                        .map(|(i, c)| Caption::new(i as i64, *c))
                        .collect(),
                })
                .collect(),
            "original",
        )
    }

    #[test]
    fn corpus_single_segment_equals_sentence() {
        let refs = corpus(&[("a.jpg", &["a pond near trees", "trees and a pond"])]);
        let cand = vec![("a.jpg".to_string(), words("a pond with trees"))];
        let c = meteor_corpus(&cand, &refs).unwrap();
        let s = meteor_sentence(
            &cand[0].1,
            &[words("a pond near trees"), words("trees and a pond")],
        )
        .unwrap();
        assert_eq!(c.aggregate.score, s.score);
        assert_eq!(c.mean_sentence_score, s.score);
    }

    #[test]
    fn corpus_all_unmatched_is_zero() {
        let refs = corpus(&[("a.jpg", &["lake"]), ("b.jpg", &["road"])]);
        let cand = vec![
            ("a.jpg".to_string(), words("forest")),
            ("b.jpg".to_string(), words("beach")),
        ];
        let c = meteor_corpus(&cand, &refs).unwrap();
        assert_eq!(c.aggregate.score, 0.0);
        assert_eq!(c.mean_sentence_score, 0.0);
    }

    #[test]
    fn unknown_image_named_in_error() {
        let refs = corpus(&[("a.jpg", &["lake"])]);
        let cand = vec![("zzz.jpg".to_string(), words("lake"))];
        match meteor_corpus(&cand, &refs) {
            Err(Error::UnknownImage(name)) => assert_eq!(name, "zzz.jpg"),
            other => panic!("{other:?}"),
        }
    }

    const VOCAB: [&str; 12] = [
        "plane", "planes", "park", "parked", "parking", "road", "roads", "tree", "green", "a",
        "the", "near",
    ];

    fn sentence(max: usize) -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec((0..VOCAB.len()).prop_map(|i| VOCAB[i].to_string()), 0..=max)
    }

    proptest! {
        #[test]
        fn scores_stay_in_unit_interval(c in sentence(10), r in sentence(10)) {
            let s = meteor_pair(&c, &r);
            prop_assert!((0.0..=1.0).contains(&s.score));
            prop_assert_eq!(s.score == 0.0, s.matched == 0);
            if s.matched > 0 {
                prop_assert!(s.chunks >= 1 && s.chunks <= s.matched);
            }
        }

        #[test]
        fn adding_a_reference_never_lowers_score(c in sentence(8), refs in proptest::collection::vec(sentence(8), 1..4), extra in sentence(8)) {
            let before = meteor_sentence(&c, &refs).unwrap().score;
            let mut more = refs.clone();
            more.push(extra);
            prop_assert!(meteor_sentence(&c, &more).unwrap().score >= before);
        }

        #[test]
        fn permutation_penalty(perm in Just((0..10usize).collect::<Vec<_>>()).prop_shuffle(), n in 1usize..=10) {
            let reference: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let order: Vec<usize> = perm.into_iter().filter(|&i| i < n).collect();
            let candidate: Vec<String> = order.iter().map(|&i| reference[i].clone()).collect();
            let s = meteor_pair(&candidate, &reference);
            let mut k = 1;
            for w in order.windows(2) {
                if w[1] != w[0] + 1 { k += 1; }
            }
            prop_assert_eq!(s.chunks, k);
            let expected = 1.0 * (1.0 - 0.5 * (k as f64 / n as f64).powi(3));
            prop_assert!((s.score - expected).abs() < 1e-12);
        }

        #[test]
        fn aggregate_recomputable_from_segments(pairs in proptest::collection::vec((sentence(8), sentence(8)), 1..6)) {
            let images: Vec<(String, Vec<String>)> = pairs.iter().enumerate()
                .map(|(i, (_, r))| (format!("{i}.jpg"), r.clone())).collect();
            let refs = Corpus::new(images.iter().map(|(name, r)| ImageEntry {
                filename: name.clone(), imgid: None, split: Split::Val, scene_class: None,
                captions: vec![Caption { sentid: 0, raw: r.join(" "), tokens: r.clone() }],
            }).collect(), "x");
            let cands: Vec<(String, Vec<String>)> = pairs.iter().enumerate()
                .map(|(i, (c, _))| (format!("{i}.jpg"), c.clone())).collect();
            let cm = meteor_corpus(&cands, &refs).unwrap();
            let m: usize = cm.segments.iter().map(|s| s.score.matched).sum();
            let cl: usize = cm.segments.iter().map(|s| s.score.candidate_len).sum();
            let rl: usize = cm.segments.iter().map(|s| s.score.reference_len).sum();
            let ch: usize = cm.segments.iter().map(|s| s.score.chunks).sum();
            let expected = if m == 0 { 0.0 } else {
                let (p, r) = (m as f64 / cl as f64, m as f64 / rl as f64);
                10.0 * p * r / (r + 9.0 * p) * (1.0 - 0.5 * (ch as f64 / m as f64).powi(3))
            };
            prop_assert!((cm.aggregate.score - expected).abs() < 1e-12);
        }
    }
}
