use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::cache::{fingerprint, CacheEntry, ResponseCache};
use super::transport::{ChatTransport, TransportError};
use super::{PromptTemplate, DEFAULT_ENDPOINT, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::corpus::{tokenize, Caption, Corpus};
use crate::error::{Error, Result};

/// Replies with more than this many tokens per original token are rejected.
pub const MAX_LENGTH_RATIO: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout: Duration,
    pub cache_dir: Option<PathBuf>,
    pub endpoint_url: String,
    /// Maximum in-flight requests.
    pub concurrency: usize,
    /// First retry delay; doubles on every further retry.
    pub backoff_base: Duration,
    pub backoff_max: Duration,
    /// Minimum spacing between request starts across all workers.
    pub min_request_interval: Duration,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            model_name: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_retries: 3,
            timeout: Duration::from_secs(60),
            cache_dir: None,
            endpoint_url: DEFAULT_ENDPOINT.to_string(),
            concurrency: 4,
            backoff_base: Duration::from_millis(500),
            backoff_max: Duration::from_secs(30),
            min_request_interval: Duration::ZERO,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature must be a finite value >= 0, got {}",
                self.temperature
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(Error::Config("model name is empty".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry);
        self.backoff_base
            .saturating_mul(factor)
            .min(self.backoff_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionStatus {
    #[serde(rename = "fresh")]
    Fresh,
    #[serde(rename = "cached")]
    Cached,
    #[serde(rename = "failed-kept-original")]
    FailedKeptOriginal,
}

impl CorrectionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrectionStatus::Fresh => "fresh",
            CorrectionStatus::Cached => "cached",
            CorrectionStatus::FailedKeptOriginal => "failed-kept-original",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub filename: String,
    pub sentid: i64,
    pub original: String,
    pub corrected: String,
    pub status: CorrectionStatus,
    pub request_fingerprint: String,
    /// Transport calls made for this caption (0 on a cache hit).
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Empty,
    Length { reply_tokens: usize, limit: usize },
    EchoesPrompt,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::Empty => f.write_str("empty reply"),
            RejectReason::Length {
                reply_tokens,
                limit,
            } => {
                write!(f, "reply has {reply_tokens} tokens, limit {limit}")
            }
            RejectReason::EchoesPrompt => f.write_str("reply contains the system prompt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Accepted,
    Rejected(RejectReason),
}

/// Guard against degenerate replies. `system_text` is the prompt that must
/// not be echoed back.
pub fn validate_response(corrected: &str, original: &str, system_text: &str) -> Validation {
    let reply = corrected.trim();
    if reply.is_empty() {
        return Validation::Rejected(RejectReason::Empty);
    }
    let limit = MAX_LENGTH_RATIO * tokenize(original).len().max(1);
    let reply_tokens = tokenize(reply).len();
    if reply_tokens > limit {
        return Validation::Rejected(RejectReason::Length {
            reply_tokens,
            limit,
        });
    }
    if !system_text.is_empty() && reply.contains(system_text.trim()) {
        return Validation::Rejected(RejectReason::EchoesPrompt);
    }
    Validation::Accepted
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(interval: Duration) -> Self {
        RateLimiter {
            interval,
            next: Mutex::new(None),
        }
    }

    fn wait(&self) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

struct Outcome {
    corrected: String,
    status: CorrectionStatus,
    fingerprint: String,
    attempts: u32,
}

/// Shared state for a correction run: prompt, settings, transport and cache.
pub struct Corrector<'t> {
    template: PromptTemplate,
    config: CorrectionConfig,
    transport: &'t dyn ChatTransport,
    cache: Option<ResponseCache>,
    limiter: RateLimiter,
}

impl<'t> Corrector<'t> {
    pub fn new(
        template: PromptTemplate,
        config: CorrectionConfig,
        transport: &'t dyn ChatTransport,
    ) -> Result<Self> {
        config.validate()?;
        let cache = config
            .cache_dir
            .as_ref()
            .map(ResponseCache::open)
            .transpose()?;
        let limiter = RateLimiter::new(config.min_request_interval);
        Ok(Corrector {
            template,
            config,
            transport,
            cache,
            limiter,
        })
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    pub fn config(&self) -> &CorrectionConfig {
        &self.config
    }

    fn run(&self, raw: &str, sample: u32) -> Outcome {
        let fp = fingerprint(
            &self.template.system_text,
            raw,
            &self.config.model_name,
            self.config.temperature,
            sample,
        );
        let failed = |attempts| Outcome {
            corrected: raw.to_string(),
            status: CorrectionStatus::FailedKeptOriginal,
            fingerprint: fp.clone(),
            attempts,
        };
        if raw.trim().is_empty() {
            return failed(0);
        }
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&fp)) {
            return Outcome {
                corrected: hit.response,
                status: CorrectionStatus::Cached,
                fingerprint: fp,
                attempts: 0,
            };
        }

        let request = self
            .template
            .request(raw, &self.config.model_name, self.config.temperature);
        let mut attempts = 0;
        for retry in 0..=self.config.max_retries {
            if retry > 0 {
                std::thread::sleep(self.config.backoff(retry - 1));
            }
            self.limiter.wait();
            attempts += 1;
            let reply = self.transport.complete(&request, sample).and_then(|text| {
                let text = text.trim().to_string();
                match validate_response(&text, raw, &self.template.system_text) {
                    Validation::Accepted => Ok(text),
                    Validation::Rejected(why) => Err(TransportError::Rejected(why.to_string())),
                }
            });
            match reply {
                Ok(text) => {
                    if let Some(cache) = &self.cache {
                        let entry = CacheEntry {
                            fingerprint: fp.clone(),
                            model: self.config.model_name.clone(),
                            temperature: self.config.temperature,
                            sample,
                            system_text: self.template.system_text.clone(),
                            user_text: raw.to_string(),
                            response: text.clone(),
                        };
                        if let Err(e) = cache.put(&entry) {
                            log::warn!("could not write cache entry {fp}: {e}");
                        }
                    }
                    return Outcome {
                        corrected: text,
                        status: CorrectionStatus::Fresh,
                        fingerprint: fp,
                        attempts,
                    };
                }
                Err(e) => log::debug!("attempt {attempts} for `{raw}` failed: {e}"),
            }
        }
        log::warn!("keeping original caption after {attempts} failed attempts: `{raw}`");
        failed(attempts)
    }

    /// Correct one caption as the first sample of its text.
    pub fn correct_caption(&self, raw: &str) -> CorrectionRecord {
        self.correct_sample("", 0, raw, 0)
    }

    pub fn correct_sample(
        &self,
        filename: &str,
        sentid: i64,
        raw: &str,
        sample: u32,
    ) -> CorrectionRecord {
        let o = self.run(raw, sample);
        CorrectionRecord {
            filename: filename.to_string(),
            sentid,
            original: raw.to_string(),
            corrected: o.corrected,
            status: o.status,
            request_fingerprint: o.fingerprint,
            attempts: o.attempts,
        }
    }

    /// Rewrite every caption. The output keeps the corpus skeleton (filenames,
    /// splits, sentids, caption order); only caption text and tokens change.
    ///
    /// Identical caption texts are numbered in corpus order (sample 0, 1, ...)
    /// and each number is a separate request and cache entry, so repeated
    /// captions can receive distinct rewrites. All samples of one text are
    /// processed by a single worker in order; records come back in corpus
    /// order regardless of completion order.
    pub fn correct_corpus(&self, corpus: &Corpus) -> (Corpus, Vec<CorrectionRecord>) {
        struct Job<'c> {
            filename: &'c str,
            sentid: i64,
            raw: &'c str,
            sample: u32,
        }
        let mut jobs = Vec::with_capacity(corpus.total_captions());
        let mut seen: HashMap<&str, u32> = HashMap::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of: HashMap<&str, usize> = HashMap::new();
        for entry in &corpus.entries {
            for cap in &entry.captions {
                let n = seen.entry(cap.raw.as_str()).or_insert(0);
                let g = *group_of.entry(cap.raw.as_str()).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(jobs.len());
                jobs.push(Job {
                    filename: &entry.filename,
                    sentid: cap.sentid,
                    raw: &cap.raw,
                    sample: *n,
                });
                *n += 1;
            }
        }

        let results: Mutex<Vec<Option<CorrectionRecord>>> = Mutex::new(vec![None; jobs.len()]);
        let next_group = AtomicUsize::new(0);
        let workers = self.config.concurrency.min(groups.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let g = next_group.fetch_add(1, Ordering::SeqCst);
                    let Some(group) = groups.get(g) else { break };
                    for &j in group {
                        let job = &jobs[j];
                        let rec =
                            self.correct_sample(job.filename, job.sentid, job.raw, job.sample);
                        results.lock().expect("results poisoned")[j] = Some(rec);
                    }
                });
            }
        });
        let records: Vec<CorrectionRecord> = results
            .into_inner()
            .expect("results poisoned")
            .into_iter()
            .map(|r| r.expect("every job produces a record"))
            .collect();

        let mut out = corpus.clone();
        out.source_label = "corrected".to_string();
        let mut it = records.iter();
        for entry in &mut out.entries {
            for cap in &mut entry.captions {
                let rec = it.next().expect("one record per caption");
                *cap = Caption::new(cap.sentid, rec.corrected.clone());
            }
        }
        (out, records)
    }
}

pub fn correct_caption(
    raw: &str,
    template: &PromptTemplate,
    config: &CorrectionConfig,
    client: &dyn ChatTransport,
) -> Result<CorrectionRecord> {
    Ok(Corrector::new(template.clone(), config.clone(), client)?.correct_caption(raw))
}

pub fn correct_corpus(
    corpus: &Corpus,
    template: &PromptTemplate,
    config: &CorrectionConfig,
    client: &dyn ChatTransport,
) -> Result<(Corpus, Vec<CorrectionRecord>)> {
    Ok(Corrector::new(template.clone(), config.clone(), client)?.correct_corpus(corpus))
}

/// CSV with columns `filename,sentid,original,corrected,status`.
pub fn write_records_csv<W: Write>(records: &[CorrectionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["filename", "sentid", "original", "corrected", "status"])?;
    for r in records {
        w.write_record([
            r.filename.as_str(),
            &r.sentid.to_string(),
            &r.original,
            &r.corrected,
            r.status.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<records output>", e))?;
    Ok(())
}
