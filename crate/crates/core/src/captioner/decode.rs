use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureGrid;
use super::model::{attend_projected, init_state, logits, lstm_cell, project_features};
use super::params::DecoderParams;
use super::tensor::argmax;
use crate::corpus::Vocab;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub ids: Vec<usize>,
    pub tokens: Vec<String>,
    /// One weight vector over grid locations per emitted token.
    pub attention_maps: Vec<Vec<f64>>,
}

impl DecodeResult {
    pub fn caption(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Greedy decoding from `<start>` until `<end>` or `max_len` tokens.
/// `<end>` itself is not emitted.
pub fn greedy_decode(
    features: &FeatureGrid,
    params: &DecoderParams,
    vocab: &Vocab,
    max_len: usize,
) -> Result<DecodeResult> {
    if vocab.len() != params.dims.vocab {
        return Err(Error::Dims(format!(
            "vocabulary has {} tokens, decoder expects {}",
            vocab.len(),
            params.dims.vocab
        )));
    }
    if features.channels != params.dims.feature {
        return Err(Error::Dims(format!(
            "grid `{}` has {} channels, decoder expects {}",
            features.filename, features.channels, params.dims.feature
        )));
    }
    let mut out = DecodeResult {
        ids: Vec::new(),
        tokens: Vec::new(),
        attention_maps: Vec::new(),
    };
    let init = init_state(features, params);
    let proj = project_features(features, params);
    let (mut h, mut c) = (init.h0, init.c0);
    let mut token = Vocab::START_ID;
    while out.ids.len() < max_len {
        let att = attend_projected(features, &proj, &h, params);
        let cell = lstm_cell(params.embedding.row(token), &att.context, &h, &c, params);
        token = argmax(&logits(&cell.h, params));
        if token == Vocab::END_ID {
            break;
        }
        out.ids.push(token);
        out.tokens
            .push(vocab.token(token).unwrap_or(crate::corpus::UNK).to_string());
        out.attention_maps.push(att.alpha);
        h = cell.h;
        c = cell.c;
    }
    Ok(out)
}

/// Decode many grids in parallel; results in input order.
pub fn decode_all(
    grids: &[FeatureGrid],
    params: &DecoderParams,
    vocab: &Vocab,
    max_len: usize,
) -> Result<Vec<DecodeResult>> {
    grids
        .par_iter()
        .map(|g| greedy_decode(g, params, vocab, max_len))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionStep {
    pub token: String,
    pub weights: Vec<f64>,
}

/// Per-token attention weights of one decoded caption, for external rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionExport {
    pub filename: String,
    pub locations: usize,
    /// Side of the square grid when `locations` is a perfect square.
    pub grid_side: Option<usize>,
    pub steps: Vec<AttentionStep>,
}

impl AttentionExport {
    pub fn new(filename: &str, locations: usize, result: &DecodeResult) -> Self {
        let side = (locations as f64).sqrt().round() as usize;
        AttentionExport {
            filename: filename.to_string(),
            locations,
            grid_side: (side * side == locations).then_some(side),
            steps: result
                .tokens
                .iter()
                .zip(&result.attention_maps)
                .map(|(t, w)| AttentionStep {
                    token: t.clone(),
                    weights: w.clone(),
                })
                .collect(),
        }
    }
}
