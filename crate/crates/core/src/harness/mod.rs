//! End-to-end subcommands: corpus statistics, caption correction, decoder
//! training and evaluation, and original-vs-corrected comparison.
//!
//! Every command returns a serializable report; with `deterministic` set the
//! report carries no timestamp, so equal inputs give byte-identical files.

mod report;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{
    render_comparison, CorrectReport, EvalReport, EvalRow, ExperimentReport, MeteorRow, RunMeta,
    StatsReport, StatusCounts,
};

use crate::captioner::{
    decode_all, encode_caption, train, AttentionExport, DecoderParams, Dims, FeatureGrid,
    FeatureSource, TrainConfig,
};
use crate::corpus::{build_vocab, parse_corpus, tokenize, write_corpus, Corpus, Split, Vocab};
use crate::error::{Error, Result};
use crate::llm::{
    write_records_csv, ChatTransport, CorrectionConfig, CorrectionStatus, Corrector, PromptTemplate,
};
use crate::meteor::{bleu_for_corpus, meteor_corpus, METEOR_VARIANT};
use crate::stats::{compare_stats, compute_stats, write_histogram_csv, Dictionary};

pub fn read_corpus(path: &Path) -> Result<(Corpus, Vec<String>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_corpus(&bytes)?;
    let warnings = parsed.warnings.iter().map(|w| w.to_string()).collect();
    Ok((parsed.corpus, warnings))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

pub fn prompt_sha256(template: &PromptTemplate) -> String {
    hex::encode(Sha256::digest(template.system_text.as_bytes()))
}

fn load_dictionary(path: Option<&Path>) -> Result<(Dictionary, String)> {
    match path {
        Some(p) => Ok((Dictionary::from_path(p)?, p.display().to_string())),
        None => Ok((Dictionary::bundled(), "bundled".to_string())),
    }
}

#[derive(Debug, Clone, Default)]
pub struct StatsArgs {
    pub corpus: PathBuf,
    pub dictionary: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub histogram_out: Option<PathBuf>,
    pub deterministic: bool,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<StatsReport> {
    let (corpus, warnings) = read_corpus(&args.corpus)?;
    let (dict, dict_label) = load_dictionary(args.dictionary.as_deref())?;
    let stats = compute_stats(&corpus, &dict);
    let report = StatsReport {
        meta: RunMeta::new(args.deterministic),
        corpus: args.corpus.display().to_string(),
        source_label: corpus.source_label.clone(),
        dictionary: dict_label,
        dictionary_words: dict.len(),
        warnings,
        stats,
    };
    if let Some(p) = &args.report_out {
        write_json(p, &report)?;
    }
    if let Some(p) = &args.histogram_out {
        write_histogram_csv(&report.stats, create(p)?)?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct CorrectArgs {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub records_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub template: PromptTemplate,
    pub config: CorrectionConfig,
    pub deterministic: bool,
}

pub fn cmd_correct(args: &CorrectArgs, transport: &dyn ChatTransport) -> Result<CorrectReport> {
    let (corpus, _) = read_corpus(&args.corpus)?;
    let (dict, _) = load_dictionary(args.dictionary.as_deref())?;
    let corrector = Corrector::new(args.template.clone(), args.config.clone(), transport)?;
    let (corrected, records) = corrector.correct_corpus(&corpus);

    write_corpus(&corrected, create(&args.out)?)?;
    if let Some(p) = &args.records_out {
        write_records_csv(&records, create(p)?)?;
    }
    let mut counts = StatusCounts::default();
    for r in &records {
        match r.status {
            CorrectionStatus::Fresh => counts.fresh += 1,
            CorrectionStatus::Cached => counts.cached += 1,
            CorrectionStatus::FailedKeptOriginal => counts.failed_kept_original += 1,
        }
    }
    let c = &args.config;
    let config = serde_json::json!({
        "prompt_mode": args.template.mode,
        "model_name": c.model_name,
        "temperature": c.temperature,
        "max_retries": c.max_retries,
        "concurrency": c.concurrency,
        "timeout_secs": c.timeout.as_secs_f64(),
        "endpoint_url": c.endpoint_url,
        "cache_dir": c.cache_dir,
    });
    let report = CorrectReport {
        meta: RunMeta::new(args.deterministic),
        input: args.corpus.display().to_string(),
        output: args.out.display().to_string(),
        prompt_sha256: prompt_sha256(&args.template),
        config,
        counts,
        stats: compare_stats(
            &compute_stats(&corpus, &dict),
            &compute_stats(&corrected, &dict),
        ),
    };
    if let Some(p) = &args.report_out {
        write_json(p, &report)?;
    }
    Ok(report)
}

/// Where feature grids come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    File {
        path: PathBuf,
    },
    Synthetic {
        seed: u64,
        locations: usize,
        channels: usize,
    },
}

impl FeatureSpec {
    pub fn open(&self) -> Result<FeatureSource> {
        match self {
            FeatureSpec::File { path } => FeatureSource::from_path(path),
            FeatureSpec::Synthetic {
                seed,
                locations,
                channels,
            } => {
                if *locations == 0 || *channels == 0 {
                    return Err(Error::Config(
                        "synthetic grids need positive locations and channels".into(),
                    ));
                }
                Ok(FeatureSource::Synthetic {
                    seed: *seed,
                    locations: *locations,
                    channels: *channels,
                })
            }
        }
    }
}

/// Trained decoder with everything needed to decode again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub vocab: Vocab,
    pub features: FeatureSpec,
    pub train: TrainConfig,
    pub params: DecoderParams,
}

#[derive(Debug, Clone)]
pub struct TrainEvalArgs {
    pub corpus: PathBuf,
    pub features: FeatureSpec,
    pub model_name: String,
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub min_count: usize,
    pub train: TrainConfig,
    pub train_split: Split,
    pub eval_split: Split,
    pub decode_max_len: usize,
    pub params_out: Option<PathBuf>,
    pub candidates_out: Option<PathBuf>,
    pub attention_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub deterministic: bool,
}

impl TrainEvalArgs {
    pub fn new(corpus: impl Into<PathBuf>, features: FeatureSpec) -> Self {
        TrainEvalArgs {
            corpus: corpus.into(),
            features,
            model_name: "attention-lstm".into(),
            embed: 64,
            hidden: 128,
            attention: 64,
            min_count: 1,
            train: TrainConfig::default(),
            train_split: Split::Train,
            eval_split: Split::Val,
            decode_max_len: 30,
            params_out: None,
            candidates_out: None,
            attention_out: None,
            report_out: None,
            deterministic: false,
        }
    }
}

fn split_grids(corpus: &Corpus, split: Split, source: &FeatureSource) -> Result<Vec<FeatureGrid>> {
    corpus
        .entries
        .iter()
        .filter(|e| e.split == split)
        .map(|e| source.grid(&e.filename))
        .collect()
}

/// Write `filename<TAB>caption` lines.
pub fn write_candidates_tsv(path: &Path, candidates: &[(String, Vec<String>)]) -> Result<()> {
    use std::io::Write;
    let mut w = create(path)?;
    for (f, toks) in candidates {
        writeln!(w, "{f}\t{}", toks.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parse `filename<TAB>caption` lines; the caption is tokenized.
pub fn read_candidates_tsv(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (f, cap) = line.split_once('\t').ok_or_else(|| {
            Error::Invalid(format!(
                "{}:{}: expected filename<TAB>caption",
                path.display(),
                i + 1
            ))
        })?;
        out.push((f.to_string(), tokenize(cap)));
    }
    Ok(out)
}

fn score(
    label: &str,
    model: &str,
    split: Split,
    candidates: &[(String, Vec<String>)],
    corpus: &Corpus,
) -> Result<EvalRow> {
    if candidates.is_empty() {
        return Err(Error::Invalid(format!(
            "no {split} images to evaluate in `{label}`"
        )));
    }
    let meteor = meteor_corpus(candidates, corpus)?;
    Ok(EvalRow {
        model: model.to_string(),
        meteor: meteor.aggregate.score,
        meteor_mean_sentence: Some(meteor.mean_sentence_score),
        bleu4: Some(bleu_for_corpus(candidates, corpus, 4)?),
        images: Some(candidates.len()),
    })
}

pub struct TrainEvalOutput {
    pub report: EvalReport,
    pub model: ModelFile,
    pub candidates: Vec<(String, Vec<String>)>,
}

/// Train on one split, decode another, score the decoded captions against
/// that split's references.
pub fn cmd_train_eval(args: &TrainEvalArgs) -> Result<TrainEvalOutput> {
    let (corpus, _) = read_corpus(&args.corpus)?;
    let source = args.features.open()?;
    let (locations, channels) = source.shape()?;

    let train_corpus = Corpus::new(
        corpus
            .entries
            .iter()
            .filter(|e| e.split == args.train_split)
            .cloned()
            .collect(),
        corpus.source_label.clone(),
    );
    if train_corpus.entries.is_empty() {
        return Err(Error::Invalid(format!(
            "no {} images in {}",
            args.train_split,
            args.corpus.display()
        )));
    }
    let vocab = build_vocab(&train_corpus, args.min_count);
    let mut data = Vec::new();
    for e in &train_corpus.entries {
        let grid = source.grid(&e.filename)?;
        for c in e.captions.iter().filter(|c| !c.tokens.is_empty()) {
            data.push((
                grid.clone(),
                encode_caption(&vocab, &c.tokens, args.train.max_len),
            ));
        }
    }
    let dims = Dims {
        vocab: vocab.len(),
        embed: args.embed,
        hidden: args.hidden,
        feature: channels,
        locations,
        attention: args.attention,
    };
    let outcome = train(&data, dims, &args.train)?;

    let grids = split_grids(&corpus, args.eval_split, &source)?;
    let decoded = decode_all(&grids, &outcome.params, &vocab, args.decode_max_len)?;
    let candidates: Vec<(String, Vec<String>)> = grids
        .iter()
        .zip(&decoded)
        .map(|(g, d)| (g.filename.clone(), d.tokens.clone()))
        .collect();
    let row = score(
        &corpus.source_label,
        &args.model_name,
        args.eval_split,
        &candidates,
        &corpus,
    )?;

    let config = serde_json::json!({
        "features": args.features,
        "dims": dims,
        "train": args.train,
        "min_count": args.min_count,
        "train_split": args.train_split,
        "eval_split": args.eval_split,
        "decode_max_len": args.decode_max_len,
        "training_pairs": data.len(),
        "captions_per_image": "all",
    });
    let report = EvalReport {
        meta: RunMeta::new(args.deterministic),
        label: corpus.source_label.clone(),
        rows: vec![row],
        corpus: Some(args.corpus.display().to_string()),
        split: Some(args.eval_split.to_string()),
        metric_variant: Some(METEOR_VARIANT.to_string()),
        loss_curve: outcome.loss_curve,
        stats: Some(compute_stats(&train_corpus, &Dictionary::bundled())),
        config,
    };
    let model = ModelFile {
        vocab,
        features: args.features.clone(),
        train: args.train.clone(),
        params: outcome.params,
    };
    if let Some(p) = &args.params_out {
        write_json(p, &model)?;
    }
    if let Some(p) = &args.candidates_out {
        write_candidates_tsv(p, &candidates)?;
    }
    if let Some(p) = &args.attention_out {
        let maps: Vec<AttentionExport> = grids
            .iter()
            .zip(&decoded)
            .map(|(g, d)| AttentionExport::new(&g.filename, g.locations, d))
            .collect();
        write_json(p, &maps)?;
    }
    if let Some(p) = &args.report_out {
        write_json(p, &report)?;
    }
    Ok(TrainEvalOutput {
        report,
        model,
        candidates,
    })
}

#[derive(Debug, Clone)]
pub enum EvalSource {
    /// Precomputed `filename<TAB>caption` lines.
    Candidates(PathBuf),
    /// Decode with a saved model; features default to the model's own spec.
    Model {
        path: PathBuf,
        features: Option<FeatureSpec>,
        max_len: usize,
    },
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub corpus: PathBuf,
    pub source: EvalSource,
    pub split: Split,
    pub model_name: String,
    pub report_out: Option<PathBuf>,
    pub deterministic: bool,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let (corpus, _) = read_corpus(&args.corpus)?;
    let candidates = match &args.source {
        EvalSource::Candidates(p) => read_candidates_tsv(p)?,
        EvalSource::Model {
            path,
            features,
            max_len,
        } => {
            let model: ModelFile = read_json(path)?;
            model.params.validate()?;
            let source = features.as_ref().unwrap_or(&model.features).open()?;
            let grids = split_grids(&corpus, args.split, &source)?;
            let decoded = decode_all(&grids, &model.params, &model.vocab, *max_len)?;
            grids
                .iter()
                .zip(decoded)
                .map(|(g, d)| (g.filename.clone(), d.tokens))
                .collect()
        }
    };
    let row = score(
        &corpus.source_label,
        &args.model_name,
        args.split,
        &candidates,
        &corpus,
    )?;
    let report = EvalReport {
        meta: RunMeta::new(args.deterministic),
        label: corpus.source_label.clone(),
        rows: vec![row],
        corpus: Some(args.corpus.display().to_string()),
        split: Some(args.split.to_string()),
        metric_variant: Some(METEOR_VARIANT.to_string()),
        loss_curve: Vec::new(),
        stats: None,
        config: serde_json::Value::Null,
    };
    if let Some(p) = &args.report_out {
        write_json(p, &report)?;
    }
    Ok(report)
}

/// Pair rows by model name; deltas are `corrected − original`.
pub fn cmd_compare(
    original: &EvalReport,
    corrected: &EvalReport,
    deterministic: bool,
) -> Result<ExperimentReport> {
    let right: HashMap<&str, &EvalRow> = corrected
        .rows
        .iter()
        .map(|r| (r.model.as_str(), r))
        .collect();
    if right.len() != corrected.rows.len() {
        return Err(Error::Invalid(format!(
            "duplicate model rows in `{}`",
            corrected.label
        )));
    }
    let mut seen = BTreeMap::new();
    let mut rows = Vec::with_capacity(original.rows.len());
    for l in &original.rows {
        if seen.insert(l.model.as_str(), ()).is_some() {
            return Err(Error::Invalid(format!(
                "duplicate model rows in `{}`",
                original.label
            )));
        }
        let r = right.get(l.model.as_str()).ok_or_else(|| {
            Error::Invalid(format!(
                "model `{}` missing from `{}`",
                l.model, corrected.label
            ))
        })?;
        rows.push(MeteorRow {
            model: l.model.clone(),
            original: l.meteor,
            corrected: r.meteor,
            delta: r.meteor - l.meteor,
        });
    }
    if rows.len() != right.len() {
        return Err(Error::Invalid(format!(
            "`{}` has models not present in `{}`",
            corrected.label, original.label
        )));
    }
    let stats = match (&original.stats, &corrected.stats) {
        (Some(a), Some(b)) => Some(compare_stats(a, b)),
        _ => None,
    };
    Ok(ExperimentReport {
        meta: RunMeta::new(deterministic),
        original_label: original.label.clone(),
        corrected_label: corrected.label.clone(),
        stats,
        meteor: rows,
        config: serde_json::json!({
            "original": original.config,
            "corrected": corrected.config,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, meteor: f64) -> EvalRow {
        EvalRow {
            model: model.into(),
            meteor,
            meteor_mean_sentence: None,
            bleu4: None,
            images: None,
        }
    }

    fn report(label: &str, rows: Vec<EvalRow>) -> EvalReport {
        serde_json::from_value(serde_json::json!({
            "label": label,
            "rows": rows,
        }))
        .unwrap()
    }

    #[test]
    fn compare_computes_deltas() {
        let a = report("original", vec![row("resnet", 0.6859), row("vgg", 0.5)]);
        let b = report("corrected", vec![row("vgg", 0.5), row("resnet", 0.7033)]);
        let e = cmd_compare(&a, &b, true).unwrap();
        assert!((e.meteor[0].delta - 0.0174).abs() < 1e-12);
        assert_eq!(e.meteor[1].delta, 0.0);
        assert!(e.meta.generated_unix_secs.is_none());
        assert!(e.render().contains("+0.0174"));
    }

    #[test]
    fn compare_rejects_mismatched_rows() {
        let a = report("original", vec![row("resnet", 0.6)]);
        let b = report("corrected", vec![row("vgg", 0.6)]);
        assert!(matches!(cmd_compare(&a, &b, true), Err(Error::Invalid(_))));
        let c = report("corrected", vec![row("resnet", 0.6), row("vgg", 0.6)]);
        assert!(matches!(cmd_compare(&a, &c, true), Err(Error::Invalid(_))));
    }

    #[test]
    fn nondeterministic_meta_has_timestamp() {
        assert!(RunMeta::new(false).generated_unix_secs.is_some());
    }
}
