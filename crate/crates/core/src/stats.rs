//! Corpus quality diagnostics: vocabulary diversity, one-time words,
//! misspelling ratios, duplicate captions and the word repetition histogram.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

const BUNDLED_WORDS: &str = include_str!("../data/english_words.txt");

/// Word list used by the misspelling check.
#[derive(Debug, Clone)]
pub struct Dictionary {
    words: HashSet<String>,
}

impl Dictionary {
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(Error::Invalid("dictionary is empty".into()));
        }
        Ok(Dictionary { words })
    }

    /// One word per line, UTF-8.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_words(text.lines())
    }

    /// The English word list shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_words(BUNDLED_WORDS.lines()).expect("bundled word list is non-empty")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    /// Tokens containing a digit are never counted as misspelled.
    pub fn is_misspelled(&self, token: &str) -> bool {
        !token.chars().any(|c| c.is_ascii_digit()) && !self.words.contains(token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_captions: usize,
    pub total_tokens: usize,
    pub unique_words: usize,
    pub one_time_words: usize,
    /// Out-of-dictionary token occurrences over all token occurrences.
    pub misspelled_token_ratio: f64,
    /// Captions containing at least one out-of-dictionary token.
    pub misspelled_caption_ratio: f64,
    /// Captions whose raw text equals an earlier caption of the same image.
    pub duplicate_caption_ratio: f64,
    /// Captions whose raw text equals an earlier caption anywhere in the corpus.
    pub corpus_duplicate_ratio: f64,
    /// occurrence count -> number of distinct words with that count
    pub repetition_histogram: BTreeMap<usize, usize>,
}

impl CorpusStats {
    /// Token occurrences belonging to words seen at least `min_count` times.
    pub fn mass_at_or_above(&self, min_count: usize) -> usize {
        self.repetition_histogram
            .range(min_count..)
            .map(|(count, words)| count * words)
            .sum()
    }

    pub fn max_occurrence(&self) -> usize {
        self.repetition_histogram
            .keys()
            .next_back()
            .copied()
            .unwrap_or(0)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_stats(corpus: &Corpus, dictionary: &Dictionary) -> CorpusStats {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut total_tokens = 0;
    let mut misspelled_tokens = 0;
    let mut misspelled_captions = 0;
    let mut image_dups = 0;
    let mut corpus_dups = 0;
    let mut seen_anywhere: HashSet<&str> = HashSet::new();

    for entry in &corpus.entries {
        let mut seen_here: HashSet<&str> = HashSet::new();
        for caption in &entry.captions {
            if !seen_here.insert(&caption.raw) {
                image_dups += 1;
            }
            if !seen_anywhere.insert(&caption.raw) {
                corpus_dups += 1;
            }
            let mut bad = 0;
            for token in &caption.tokens {
                *counts.entry(token).or_insert(0) += 1;
                if dictionary.is_misspelled(token) {
                    bad += 1;
                }
            }
            total_tokens += caption.tokens.len();
            misspelled_tokens += bad;
            if bad > 0 {
                misspelled_captions += 1;
            }
        }
    }

    let mut repetition_histogram = BTreeMap::new();
    for &n in counts.values() {
        *repetition_histogram.entry(n).or_insert(0) += 1;
    }
    let total_captions = corpus.total_captions();
    CorpusStats {
        total_captions,
        total_tokens,
        unique_words: counts.len(),
        one_time_words: repetition_histogram.get(&1).copied().unwrap_or(0),
        misspelled_token_ratio: ratio(misspelled_tokens, total_tokens),
        misspelled_caption_ratio: ratio(misspelled_captions, total_captions),
        duplicate_caption_ratio: ratio(image_dups, total_captions),
        corpus_duplicate_ratio: ratio(corpus_dups, total_captions),
        repetition_histogram,
    }
}

/// Two-column CSV `occurrence_count,num_words`, ascending by count.
pub fn write_histogram_csv<W: Write>(stats: &CorpusStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["occurrence_count", "num_words"])?;
    for (count, words) in &stats.repetition_histogram {
        w.write_record([count.to_string(), words.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<histogram output>", e))?;
    Ok(())
}

pub fn repetition_histogram_csv(stats: &CorpusStats) -> Vec<u8> {
    let mut buf = Vec::new();
    write_histogram_csv(stats, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Improved,
    Worsened,
    Unchanged,
    /// Changed, but the metric has no agreed polarity.
    Changed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Polarity {
    HigherIsBetter,
    LowerIsBetter,
    Neutral,
}

impl Polarity {
    fn direction(self, delta: f64) -> Direction {
        if delta == 0.0 {
            return Direction::Unchanged;
        }
        match self {
            Polarity::Neutral => Direction::Changed,
            Polarity::HigherIsBetter if delta > 0.0 => Direction::Improved,
            Polarity::LowerIsBetter if delta < 0.0 => Direction::Improved,
            _ => Direction::Worsened,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub left: f64,
    pub right: f64,
    pub delta: f64,
    pub direction: Direction,
}

impl MetricDelta {
    fn new(metric: &str, left: f64, right: f64, polarity: Polarity) -> Self {
        let delta = right - left;
        MetricDelta {
            metric: metric.to_string(),
            left,
            right,
            delta,
            direction: polarity.direction(delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsComparison {
    pub left: CorpusStats,
    pub right: CorpusStats,
    pub metrics: Vec<MetricDelta>,
}

impl StatsComparison {
    pub fn metric(&self, name: &str) -> Option<&MetricDelta> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

pub fn compare_stats(left: &CorpusStats, right: &CorpusStats) -> StatsComparison {
    use Polarity::*;
    let rows: [(&str, f64, f64, Polarity); 8] = [
        (
            "total_captions",
            left.total_captions as f64,
            right.total_captions as f64,
            Neutral,
        ),
        (
            "total_tokens",
            left.total_tokens as f64,
            right.total_tokens as f64,
            Neutral,
        ),
        (
            "unique_words",
            left.unique_words as f64,
            right.unique_words as f64,
            HigherIsBetter,
        ),
        (
            "one_time_words",
            left.one_time_words as f64,
            right.one_time_words as f64,
            Neutral,
        ),
        (
            "misspelled_token_ratio",
            left.misspelled_token_ratio,
            right.misspelled_token_ratio,
            LowerIsBetter,
        ),
        (
            "misspelled_caption_ratio",
            left.misspelled_caption_ratio,
            right.misspelled_caption_ratio,
            LowerIsBetter,
        ),
        (
            "duplicate_caption_ratio",
            left.duplicate_caption_ratio,
            right.duplicate_caption_ratio,
            LowerIsBetter,
        ),
        (
            "corpus_duplicate_ratio",
            left.corpus_duplicate_ratio,
            right.corpus_duplicate_ratio,
            LowerIsBetter,
        ),
    ];
    StatsComparison {
        left: left.clone(),
        right: right.clone(),
        metrics: rows
            .iter()
            .map(|&(name, l, r, p)| MetricDelta::new(name, l, r, p))
            .collect(),
    }
}
