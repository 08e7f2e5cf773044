#![allow(dead_code)]

pub mod alignment_oracle;
pub mod oracle;

use std::path::PathBuf;

use capforge_core::captioner::{synthetic_grid, Dims, FeatureGrid, TrainConfig};
use capforge_core::{build_vocab, parse_corpus, Corpus, Vocab};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> Corpus {
    let bytes = std::fs::read(fixture(name)).expect("fixture");
    parse_corpus(&bytes).expect("fixture parses").corpus
}

pub const GRAD_DIMS: Dims = Dims {
    vocab: 20,
    embed: 8,
    hidden: 10,
    feature: 6,
    locations: 4,
    attention: 5,
};

pub const SYNTH_SEED: u64 = 7;
pub const SYNTH_LOCATIONS: usize = 16;
pub const SYNTH_CHANNELS: usize = 8;

pub struct Synthetic {
    pub corpus: Corpus,
    pub vocab: Vocab,
    pub dims: Dims,
    pub data: Vec<(FeatureGrid, Vec<usize>)>,
}

/// 16 images with one distinct caption each and seeded synthetic grids.
pub fn synthetic_16() -> Synthetic {
    let corpus = load_fixture("synthetic_16.json");
    let vocab = build_vocab(&corpus, 1);
    let data = corpus
        .entries
        .iter()
        .map(|e| {
            let grid =
                synthetic_grid(&e.filename, SYNTH_SEED, SYNTH_LOCATIONS, SYNTH_CHANNELS).unwrap();
            (grid, vocab.encode(&e.captions[0].tokens))
        })
        .collect();
    let dims = Dims {
        vocab: vocab.len(),
        embed: 16,
        hidden: 32,
        feature: SYNTH_CHANNELS,
        locations: SYNTH_LOCATIONS,
        attention: 16,
    };
    Synthetic {
        corpus,
        vocab,
        dims,
        data,
    }
}

pub fn overfit_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.5,
        epochs: 500,
        batch_size: 1,
        clip_norm: 5.0,
        seed: 42,
        max_len: 30,
    }
}
