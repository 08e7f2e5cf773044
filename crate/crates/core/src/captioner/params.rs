use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Mat;
use crate::error::{Error, Result};

pub const INIT_RANGE: f64 = 0.08;

/// Decoder sizes: vocabulary V, embedding m, hidden H, feature channels D,
/// feature locations L, attention width k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub feature: usize,
    pub locations: usize,
    pub attention: usize,
}

impl Dims {
    /// Default layer sizes for a given vocabulary and feature grid.
    pub fn with_defaults(vocab: usize, feature: usize, locations: usize) -> Self {
        Dims {
            vocab,
            embed: 64,
            hidden: 128,
            feature,
            locations,
            attention: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vocab", self.vocab),
            ("embed", self.embed),
            ("hidden", self.hidden),
            ("feature", self.feature),
            ("locations", self.locations),
            ("attention", self.attention),
        ] {
            if v == 0 {
                return Err(Error::Dims(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// All decoder weights. LSTM gate rows are stacked in the order
/// input, forget, output, cell candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub dims: Dims,
    /// V × m
    pub embedding: Mat,
    /// 4H × (m + D), applied to `[embedding ⊕ context]`
    pub lstm_wx: Mat,
    /// 4H × H
    pub lstm_wh: Mat,
    /// 4H
    pub lstm_b: Mat,
    /// k × D
    pub att_feat: Mat,
    /// k × H
    pub att_hidden: Mat,
    /// k
    pub att_score: Mat,
    /// H × D
    pub init_h_w: Mat,
    pub init_h_b: Mat,
    /// H × D
    pub init_c_w: Mat,
    pub init_c_b: Mat,
    /// V × H
    pub out_w: Mat,
    pub out_b: Mat,
}

pub const TENSOR_NAMES: [&str; 13] = [
    "embedding",
    "lstm_wx",
    "lstm_wh",
    "lstm_b",
    "att_feat",
    "att_hidden",
    "att_score",
    "init_h_w",
    "init_h_b",
    "init_c_w",
    "init_c_b",
    "out_w",
    "out_b",
];

impl DecoderParams {
    pub fn zeros(dims: Dims) -> Self {
        let Dims {
            vocab: v,
            embed: m,
            hidden: h,
            feature: d,
            attention: k,
            ..
        } = dims;
        DecoderParams {
            dims,
            embedding: Mat::zeros(v, m),
            lstm_wx: Mat::zeros(4 * h, m + d),
            lstm_wh: Mat::zeros(4 * h, h),
            lstm_b: Mat::vector(4 * h),
            att_feat: Mat::zeros(k, d),
            att_hidden: Mat::zeros(k, h),
            att_score: Mat::vector(k),
            init_h_w: Mat::zeros(h, d),
            init_h_b: Mat::vector(h),
            init_c_w: Mat::zeros(h, d),
            init_c_b: Mat::vector(h),
            out_w: Mat::zeros(v, h),
            out_b: Mat::vector(v),
        }
    }

    /// Tensors in `TENSOR_NAMES` order.
    pub fn tensors(&self) -> [&Mat; 13] {
        [
            &self.embedding,
            &self.lstm_wx,
            &self.lstm_wh,
            &self.lstm_b,
            &self.att_feat,
            &self.att_hidden,
            &self.att_score,
            &self.init_h_w,
            &self.init_h_b,
            &self.init_c_w,
            &self.init_c_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Mat; 13] {
        [
            &mut self.embedding,
            &mut self.lstm_wx,
            &mut self.lstm_wh,
            &mut self.lstm_b,
            &mut self.att_feat,
            &mut self.att_hidden,
            &mut self.att_score,
            &mut self.init_h_w,
            &mut self.init_h_b,
            &mut self.init_c_w,
            &mut self.init_c_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.sum_sq())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= a);
        }
    }

    /// `self += a · other`
    pub fn add_scaled(&mut self, a: f64, other: &DecoderParams) {
        for (t, o) in self.tensors_mut().into_iter().zip(other.tensors()) {
            super::tensor::axpy(a, &o.data, &mut t.data);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Check shapes against `dims` and finiteness, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let expected = DecoderParams::zeros(self.dims);
        for ((name, t), e) in TENSOR_NAMES
            .iter()
            .zip(self.tensors())
            .zip(expected.tensors())
        {
            if (t.rows, t.cols) != (e.rows, e.cols) || t.data.len() != e.data.len() {
                return Err(Error::Dims(format!(
                    "{name} is {}x{}, expected {}x{}",
                    t.rows, t.cols, e.rows, e.cols
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("decoder parameters"));
        }
        Ok(())
    }
}

/// Weights uniform in [−0.08, 0.08]; biases zero except the forget gate (1).
pub fn init_decoder(dims: Dims, seed: u64) -> Result<DecoderParams> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = DecoderParams::zeros(dims);
    for t in [
        &mut p.embedding,
        &mut p.lstm_wx,
        &mut p.lstm_wh,
        &mut p.att_feat,
        &mut p.att_hidden,
        &mut p.att_score,
        &mut p.init_h_w,
        &mut p.init_c_w,
        &mut p.out_w,
    ] {
        for x in &mut t.data {
            *x = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
    }
    let h = dims.hidden;
    p.lstm_b.data[h..2 * h].fill(1.0);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dims {
        Dims {
            vocab: 20,
            embed: 8,
            hidden: 10,
            feature: 6,
            locations: 4,
            attention: 5,
        }
    }

    #[test]
    fn deterministic_init() {
        let a = init_decoder(small(), 7).unwrap();
        let b = init_decoder(small(), 7).unwrap();
        assert_eq!(a, b);
        let c = init_decoder(small(), 8).unwrap();
        assert_ne!(a.embedding, c.embedding);
    }

    #[test]
    fn init_ranges_and_biases() {
        let p = init_decoder(small(), 1).unwrap();
        assert!(p.lstm_wx.data.iter().all(|x| x.abs() <= INIT_RANGE));
        assert!(p.lstm_wx.data.iter().any(|x| *x != 0.0));
        let h = 10;
        assert!(p.lstm_b.data[..h].iter().all(|&x| x == 0.0));
        assert!(p.lstm_b.data[h..2 * h].iter().all(|&x| x == 1.0));
        assert!(p.lstm_b.data[2 * h..].iter().all(|&x| x == 0.0));
        assert!(p.out_b.data.iter().all(|&x| x == 0.0));
        assert!(p.init_h_b.data.iter().all(|&x| x == 0.0));
        p.validate().unwrap();
        assert_eq!(
            p.num_params(),
            20 * 8 + 40 * 14 + 40 * 10 + 40 + 5 * 6 + 5 * 10 + 5 + 2 * (10 * 6 + 10) + 20 * 10 + 20
        );
    }

    #[test]
    fn zero_dims_rejected() {
        let dims = Dims {
            vocab: 0,
            ..small()
        };
        assert!(matches!(init_decoder(dims, 0), Err(Error::Dims(_))));
    }
}
