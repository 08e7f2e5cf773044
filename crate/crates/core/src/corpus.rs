//! Caption corpora in the RSICD interchange format.
//!
//! The document is a JSON object with an `images` array. Each image carries a
//! `filename`, a `split` and a `sentences` array of `{raw, sentid, tokens?}`
//! objects. Tokens found in the input are ignored and recomputed from `raw`,
//! so a parsed corpus always satisfies `tokens == tokenize(raw)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Number of captions per image in a conforming RSICD document.
pub const CAPTIONS_PER_IMAGE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!(
                "unknown split `{other}` (expected train, val or test)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caption {
    pub sentid: i64,
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Caption {
    pub fn new(sentid: i64, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Caption {
            sentid,
            raw,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageEntry {
    pub filename: String,
    pub imgid: Option<i64>,
    pub split: Split,
    pub scene_class: Option<String>,
    pub captions: Vec<Caption>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub entries: Vec<ImageEntry>,
    pub source_label: String,
}

impl Corpus {
    pub fn new(entries: Vec<ImageEntry>, source_label: impl Into<String>) -> Self {
        Corpus {
            entries,
            source_label: source_label.into(),
        }
    }

    pub fn total_captions(&self) -> usize {
        self.entries.iter().map(|e| e.captions.len()).sum()
    }

    pub fn captions(&self) -> impl Iterator<Item = &Caption> {
        self.entries.iter().flat_map(|e| e.captions.iter())
    }

    pub fn entry(&self, filename: &str) -> Option<&ImageEntry> {
        self.entries.iter().find(|e| e.filename == filename)
    }

    /// Reference token lists keyed by filename.
    pub fn references(&self) -> HashMap<&str, Vec<&[String]>> {
        self.entries
            .iter()
            .map(|e| {
                let refs = e.captions.iter().map(|c| c.tokens.as_slice()).collect();
                (e.filename.as_str(), refs)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    CaptionCount {
        image_index: usize,
        filename: String,
        count: usize,
    },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::CaptionCount {
                image_index,
                filename,
                count,
            } => write!(
                f,
                "image {image_index} ({filename}) has {count} captions, expected {CAPTIONS_PER_IMAGE}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub corpus: Corpus,
    pub warnings: Vec<ParseWarning>,
}

/// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation
/// from each piece and drop pieces that end up empty.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Parse an RSICD interchange document. `source_label` defaults to
/// `"original"` when the document does not carry one.
pub fn parse_corpus(input: &[u8]) -> Result<Parsed> {
    let doc: Value = serde_json::from_slice(input).map_err(|e| Error::Parse {
        offset: byte_offset(input, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let root = doc.as_object().ok_or_else(|| Error::Parse {
        offset: 0,
        message: "top-level value is not an object".into(),
    })?;
    let images = root
        .get("images")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse {
            offset: 0,
            message: "missing top-level `images` array".into(),
        })?;
    let source_label = root
        .get("source_label")
        .and_then(Value::as_str)
        .unwrap_or("original")
        .to_string();

    let mut entries = Vec::with_capacity(images.len());
    let mut warnings = Vec::new();
    let mut seen = HashSet::with_capacity(images.len());
    for (index, image) in images.iter().enumerate() {
        let entry = parse_image(index, image)?;
        if !seen.insert(entry.filename.clone()) {
            return Err(schema(
                index,
                format!("duplicate filename `{}`", entry.filename),
            ));
        }
        if entry.captions.len() != CAPTIONS_PER_IMAGE {
            let w = ParseWarning::CaptionCount {
                image_index: index,
                filename: entry.filename.clone(),
                count: entry.captions.len(),
            };
            log::warn!("{w}");
            warnings.push(w);
        }
        entries.push(entry);
    }
    Ok(Parsed {
        corpus: Corpus {
            entries,
            source_label,
        },
        warnings,
    })
}

fn schema(image_index: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        image_index,
        message: message.into(),
    }
}

fn parse_image(index: usize, image: &Value) -> Result<ImageEntry> {
    let obj = image
        .as_object()
        .ok_or_else(|| schema(index, "image entry is not an object"))?;
    let text_field = |name: &str| -> Result<String> {
        obj.get(name)
            .ok_or_else(|| schema(index, format!("missing field `{name}`")))?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| schema(index, format!("field `{name}` is not a string")))
    };
    let filename = text_field("filename")?;
    let split = text_field("split")?
        .parse::<Split>()
        .map_err(|m| schema(index, format!("field `split`: {m}")))?;
    let imgid = match obj.get("imgid") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_i64()
                .ok_or_else(|| schema(index, "field `imgid` is not an integer"))?,
        ),
    };
    let scene_class = match obj.get("scene_class") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| schema(index, "field `scene_class` is not a string"))?
                .to_string(),
        ),
    };
    let sentences = obj
        .get("sentences")
        .ok_or_else(|| schema(index, "missing field `sentences`"))?
        .as_array()
        .ok_or_else(|| schema(index, "field `sentences` is not an array"))?;

    let mut captions = Vec::with_capacity(sentences.len());
    let mut sentids = HashSet::with_capacity(sentences.len());
    for (s, sentence) in sentences.iter().enumerate() {
        let raw = sentence
            .get("raw")
            .ok_or_else(|| schema(index, format!("missing field `raw` in sentence {s}")))?
            .as_str()
            .ok_or_else(|| {
                schema(
                    index,
                    format!("field `raw` in sentence {s} is not a string"),
                )
            })?;
        let sentid = sentence
            .get("sentid")
            .ok_or_else(|| schema(index, format!("missing field `sentid` in sentence {s}")))?
            .as_i64()
            .ok_or_else(|| {
                schema(
                    index,
                    format!("field `sentid` in sentence {s} is not an integer"),
                )
            })?;
        if !sentids.insert(sentid) {
            return Err(schema(index, format!("duplicate sentid {sentid}")));
        }
        captions.push(Caption::new(sentid, raw));
    }
    Ok(ImageEntry {
        filename,
        imgid,
        split,
        scene_class,
        captions,
    })
}

/// serde_json reports 1-based lines and columns; turn them into a byte offset.
fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in input.split_inclusive(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(input.len());
        }
        offset += l.len();
    }
    input.len()
}

#[derive(Serialize)]
struct DocOut<'a> {
    images: Vec<ImageOut<'a>>,
    source_label: &'a str,
}

#[derive(Serialize)]
struct ImageOut<'a> {
    filename: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    imgid: Option<i64>,
    split: Split,
    #[serde(skip_serializing_if = "Option::is_none")]
    scene_class: Option<&'a str>,
    sentences: Vec<SentenceOut<'a>>,
}

#[derive(Serialize)]
struct SentenceOut<'a> {
    raw: &'a str,
    sentid: i64,
    tokens: &'a [String],
}

/// Serialize a corpus in the interchange format. Tokens are always emitted.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    let doc = DocOut {
        images: corpus
            .entries
            .iter()
            .map(|e| ImageOut {
                filename: &e.filename,
                imgid: e.imgid,
                split: e.split,
                scene_class: e.scene_class.as_deref(),
                sentences: e
                    .captions
                    .iter()
                    .map(|c| SentenceOut {
                        raw: &c.raw,
                        sentid: c.sentid,
                        tokens: &c.tokens,
                    })
                    .collect(),
            })
            .collect(),
        source_label: &corpus.source_label,
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")
        .map_err(|e| Error::io("<corpus output>", e))?;
    Ok(())
}

pub fn corpus_to_bytes(corpus: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub const PAD: &str = "<pad>";
pub const START: &str = "<start>";
pub const END: &str = "<end>";
pub const UNK: &str = "<unk>";

/// Dense token ids. The four special tokens always occupy ids 0..4.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
    min_count: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_count: usize,
    tokens: Vec<String>,
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            min_count: v.min_count,
            tokens: v.id_to_token,
        }
    }
}

impl TryFrom<VocabRepr> for Vocab {
    type Error = String;

    fn try_from(r: VocabRepr) -> std::result::Result<Self, Self::Error> {
        if r.tokens.len() < 4 || r.tokens[..4] != [PAD, START, END, UNK] {
            return Err("vocabulary must start with <pad>, <start>, <end>, <unk>".into());
        }
        let token_to_id: HashMap<_, _> = r
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if token_to_id.len() != r.tokens.len() {
            return Err("vocabulary contains duplicate tokens".into());
        }
        Ok(Vocab {
            id_to_token: r.tokens,
            token_to_id,
            min_count: r.min_count,
        })
    }
}

impl Vocab {
    pub const PAD_ID: usize = 0;
    pub const START_ID: usize = 1;
    pub const END_ID: usize = 2;
    pub const UNK_ID: usize = 3;

    /// Specials first, then tokens by descending frequency with lexicographic
    /// tie-break.
    pub fn from_counts(counts: &HashMap<String, usize>, min_count: usize) -> Vocab {
        let min_count = min_count.max(1);
        let mut kept: Vec<(&String, usize)> = counts
            .iter()
            .filter(|(_, &n)| n >= min_count)
            .map(|(t, &n)| (t, n))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let id_to_token: Vec<String> = [PAD, START, END, UNK]
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t.clone()))
            .collect();
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            id_to_token,
            token_to_id,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    /// Non-special tokens in id order.
    pub fn words(&self) -> &[String] {
        &self.id_to_token[4..]
    }

    /// `<start> tokens... <end>` as ids, unknown tokens mapped to `<unk>`.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        std::iter::once(Self::START_ID)
            .chain(tokens.iter().map(|t| self.id(t)))
            .chain(std::iter::once(Self::END_ID))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter_map(|&id| self.token(id))
            .map(str::to_string)
            .collect()
    }
}

pub fn token_counts(corpus: &Corpus) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for token in corpus.captions().flat_map(|c| c.tokens.iter()) {
        *counts.entry(token.clone()).or_insert(0) += 1;
    }
    counts
}

pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocab {
    Vocab::from_counts(&token_counts(corpus), min_count)
}

/// Entries per split, in corpus order.
pub fn split_counts(corpus: &Corpus) -> BTreeMap<Split, usize> {
    let mut out = BTreeMap::new();
    for e in &corpus.entries {
        *out.entry(e.split).or_insert(0) += 1;
    }
    out
}
