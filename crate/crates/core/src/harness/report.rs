use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::stats::{CorpusStats, StatsComparison};

/// Tool identification and, unless the run is deterministic, a timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_unix_secs: Option<u64>,
}

impl RunMeta {
    pub fn new(deterministic: bool) -> Self {
        let generated_unix_secs = (!deterministic).then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        RunMeta {
            tool: "capforge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            generated_unix_secs,
        }
    }
}

impl Default for RunMeta {
    fn default() -> Self {
        RunMeta::new(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub meta: RunMeta,
    pub corpus: String,
    pub source_label: String,
    pub dictionary: String,
    pub dictionary_words: usize,
    pub warnings: Vec<String>,
    pub stats: CorpusStats,
}

impl StatsReport {
    pub fn render(&self) -> String {
        let s = &self.stats;
        let mut out = format!("corpus: {} ({})\n", self.corpus, self.source_label);
        for (k, v) in [
            ("total captions", s.total_captions.to_string()),
            ("total tokens", s.total_tokens.to_string()),
            ("unique words", s.unique_words.to_string()),
            ("one-time words", s.one_time_words.to_string()),
            ("misspelled tokens", pct(s.misspelled_token_ratio)),
            (
                "captions with misspellings",
                pct(s.misspelled_caption_ratio),
            ),
            (
                "duplicate captions (per image)",
                pct(s.duplicate_caption_ratio),
            ),
            ("duplicate captions (corpus)", pct(s.corpus_duplicate_ratio)),
            ("max word occurrence", s.max_occurrence().to_string()),
        ] {
            let _ = writeln!(out, "  {k:<32} {v}");
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out, "  warnings: {}", self.warnings.len());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusCounts {
    pub fresh: usize,
    pub cached: usize,
    pub failed_kept_original: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectReport {
    pub meta: RunMeta,
    pub input: String,
    pub output: String,
    pub prompt_sha256: String,
    pub config: serde_json::Value,
    pub counts: StatusCounts,
    pub stats: StatsComparison,
}

impl CorrectReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "corrected {} -> {}\n  fresh {}, cached {}, failed (kept original) {}\n",
            self.input,
            self.output,
            self.counts.fresh,
            self.counts.cached,
            self.counts.failed_kept_original
        );
        out.push_str(&render_comparison(&self.stats));
        out
    }
}

/// One row: a decoder configuration scored on one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub meteor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meteor_mean_sentence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<usize>,
}

/// Scores of one corpus variant. Everything except `label` and `rows` is
/// optional so hand-written reports can be compared too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default)]
    pub meta: RunMeta,
    pub label: String,
    pub rows: Vec<EvalRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_variant: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_curve: Vec<f64>,
    /// Statistics of the training corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<CorpusStats>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{}\n  {:<20} {:>8} {:>8} {:>8}\n",
            self.label, "model", "METEOR", "mean", "BLEU-4"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "  {:<20} {:>8.4} {:>8} {:>8}",
                r.model,
                r.meteor,
                r.meteor_mean_sentence
                    .map_or("-".into(), |v| format!("{v:.4}")),
                r.bleu4.map_or("-".into(), |v| format!("{v:.4}"))
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeteorRow {
    pub model: String,
    pub original: f64,
    pub corrected: f64,
    pub delta: f64,
}

/// Side-by-side comparison of an original and a corrected run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub meta: RunMeta,
    pub original_label: String,
    pub corrected_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsComparison>,
    pub meteor: Vec<MeteorRow>,
    pub config: serde_json::Value,
}

impl ExperimentReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(stats) = &self.stats {
            out.push_str(&render_comparison(stats));
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "  {:<20} {:>12} {:>12} {:>9}",
            "METEOR", self.original_label, self.corrected_label, "delta"
        );
        for r in &self.meteor {
            let _ = writeln!(
                out,
                "  {:<20} {:>12.4} {:>12.4} {:>+9.4}",
                r.model, r.original, r.corrected, r.delta
            );
        }
        out
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

pub fn render_comparison(c: &StatsComparison) -> String {
    let mut out = format!(
        "  {:<26} {:>12} {:>12} {:>12}  direction\n",
        "metric", "original", "corrected", "delta"
    );
    for m in &c.metrics {
        let ratio = m.metric.ends_with("_ratio");
        let fmt = |v: f64| if ratio { pct(v) } else { format!("{v:.0}") };
        let delta = if ratio {
            format!("{:+.2}pp", 100.0 * m.delta)
        } else {
            format!("{:+.0}", m.delta)
        };
        let _ = writeln!(
            out,
            "  {:<26} {:>12} {:>12} {:>12}  {:?}",
            m.metric,
            fmt(m.left),
            fmt(m.right),
            delta,
            m.direction
        );
    }
    out
}
