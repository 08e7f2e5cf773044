//! Caption corpus tooling: interchange-format parsing, quality diagnostics,
//! LLM-based caption correction, METEOR/BLEU scoring, and a soft-attention
//! LSTM caption decoder trained on precomputed feature grids.

pub mod captioner;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod llm;
pub mod meteor;
pub mod stats;

pub use captioner::{
    greedy_decode, init_decoder, train, DecodeResult, DecoderParams, Dims, FeatureGrid, TrainConfig,
};
pub use corpus::{
    build_vocab, parse_corpus, tokenize, write_corpus, Caption, Corpus, ImageEntry, Split, Vocab,
};
pub use error::{Error, Result};
pub use harness::{EvalReport, ExperimentReport, StatsReport};
pub use llm::{
    correct_corpus, CorrectionConfig, CorrectionRecord, CorrectionStatus, PromptTemplate,
};
pub use meteor::{meteor_corpus, meteor_sentence, CorpusMeteor, MeteorScore};
pub use stats::{compare_stats, compute_stats, CorpusStats, Dictionary, StatsComparison};
