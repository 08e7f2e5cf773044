use super::features::FeatureGrid;
use super::params::DecoderParams;
use super::tensor::{axpy, dot, sigmoid, softmax, Mat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    /// Weight per location; sums to 1.
    pub alpha: Vec<f64>,
    /// Weighted sum of feature rows (length D).
    pub context: Vec<f64>,
}

fn check_grid(features: &FeatureGrid, params: &DecoderParams) -> Result<()> {
    let d = params.dims;
    if features.channels != d.feature || features.locations == 0 {
        return Err(Error::Dims(format!(
            "grid `{}` is {}x{}, decoder expects D = {}",
            features.filename, features.locations, features.channels, d.feature
        )));
    }
    if !features.values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("feature grid"));
    }
    Ok(())
}

fn check_vec(v: &[f64], len: usize, what: &'static str) -> Result<()> {
    if v.len() != len {
        return Err(Error::Dims(format!(
            "{what} has length {}, expected {len}",
            v.len()
        )));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// `W_a a_i` for every location: L × k.
pub(crate) fn project_features(features: &FeatureGrid, params: &DecoderParams) -> Mat {
    let k = params.dims.attention;
    let mut proj = Mat::zeros(features.locations, k);
    for i in 0..features.locations {
        params.att_feat.matvec_add(features.row(i), proj.row_mut(i));
    }
    proj
}

pub(crate) struct AttendState {
    /// tanh activations, L × k
    pub u: Mat,
    pub alpha: Vec<f64>,
    pub context: Vec<f64>,
}

pub(crate) fn attend_projected(
    features: &FeatureGrid,
    proj: &Mat,
    h_prev: &[f64],
    params: &DecoderParams,
) -> AttendState {
    let ph = params.att_hidden.matvec(h_prev);
    let mut u = proj.clone();
    let mut scores = Vec::with_capacity(features.locations);
    for i in 0..features.locations {
        let row = u.row_mut(i);
        for (x, p) in row.iter_mut().zip(&ph) {
            *x = (*x + p).tanh();
        }
        scores.push(dot(&params.att_score.data, row));
    }
    let alpha = softmax(&scores);
    let mut context = vec![0.0; features.channels];
    for (i, a) in alpha.iter().enumerate() {
        axpy(*a, features.row(i), &mut context);
    }
    AttendState { u, alpha, context }
}

/// Soft attention: `e_i = w · tanh(W_a a_i + W_h h)`, `alpha = softmax(e)`,
/// `context = Σ alpha_i a_i`.
pub fn attend(features: &FeatureGrid, h_prev: &[f64], params: &DecoderParams) -> Result<Attention> {
    check_grid(features, params)?;
    check_vec(h_prev, params.dims.hidden, "hidden state")?;
    let proj = project_features(features, params);
    let s = attend_projected(features, &proj, h_prev, params);
    Ok(Attention {
        alpha: s.alpha,
        context: s.context,
    })
}

pub(crate) struct Cell {
    /// `[x ⊕ z]`
    pub input: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn lstm_cell(
    x: &[f64],
    z: &[f64],
    h: &[f64],
    c: &[f64],
    params: &DecoderParams,
) -> Cell {
    let n = params.dims.hidden;
    let mut input = Vec::with_capacity(x.len() + z.len());
    input.extend_from_slice(x);
    input.extend_from_slice(z);
    let mut pre = params.lstm_b.data.clone();
    params.lstm_wx.matvec_add(&input, &mut pre);
    params.lstm_wh.matvec_add(h, &mut pre);
    let i: Vec<f64> = pre[..n].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = pre[n..2 * n].iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<f64> = pre[2 * n..3 * n].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = pre[3 * n..].iter().map(|v| v.tanh()).collect();
    let c_new: Vec<f64> = (0..n).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
    let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
    let h_new = (0..n).map(|j| o[j] * tanh_c[j]).collect();
    Cell {
        input,
        i,
        f,
        o,
        g,
        c: c_new,
        tanh_c,
        h: h_new,
    }
}

/// One LSTM step over `[x ⊕ z]` and `h`; returns `(h', c')`.
pub fn lstm_step(
    x: &[f64],
    z: &[f64],
    h: &[f64],
    c: &[f64],
    params: &DecoderParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = params.dims;
    check_vec(x, d.embed, "embedded token")?;
    check_vec(z, d.feature, "context vector")?;
    check_vec(h, d.hidden, "hidden state")?;
    check_vec(c, d.hidden, "cell state")?;
    let cell = lstm_cell(x, z, h, c, params);
    Ok((cell.h, cell.c))
}

pub(crate) struct InitState {
    pub mean: Vec<f64>,
    pub h0: Vec<f64>,
    pub c0: Vec<f64>,
}

pub(crate) fn init_state(features: &FeatureGrid, params: &DecoderParams) -> InitState {
    let mean = features.mean();
    let mut h0 = params.init_h_b.data.clone();
    params.init_h_w.matvec_add(&mean, &mut h0);
    h0.iter_mut().for_each(|v| *v = v.tanh());
    let mut c0 = params.init_c_b.data.clone();
    params.init_c_w.matvec_add(&mean, &mut c0);
    c0.iter_mut().for_each(|v| *v = v.tanh());
    InitState { mean, h0, c0 }
}

pub(crate) fn logits(h: &[f64], params: &DecoderParams) -> Vec<f64> {
    let mut out = params.out_b.data.clone();
    params.out_w.matvec_add(h, &mut out);
    out
}

struct Step {
    token: usize,
    target: usize,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    att: AttendState,
    cell: Cell,
    probs: Vec<f64>,
}

/// Intermediate values of a teacher-forced pass, consumed by [`backward`].
pub struct Tape<'a> {
    features: &'a FeatureGrid,
    init: InitState,
    steps: Vec<Step>,
    pub loss: f64,
}

impl Tape<'_> {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }
}

/// Teacher-forced pass over `gold` (`<start> w1 ... wn <end>` as ids).
/// The loss is the mean cross-entropy of predicting `gold[t + 1]` from
/// `gold[..=t]`.
pub fn forward_loss<'a>(
    features: &'a FeatureGrid,
    gold: &[usize],
    params: &DecoderParams,
) -> Result<(f64, Tape<'a>)> {
    check_grid(features, params)?;
    let v = params.dims.vocab;
    if let Some(&id) = gold.iter().find(|&&id| id >= v) {
        return Err(Error::TokenOutOfRange { id, vocab: v });
    }
    if gold.len() < 2 {
        return Err(Error::Invalid(
            "gold sequence needs at least two tokens".into(),
        ));
    }
    let init = init_state(features, params);
    let proj = project_features(features, params);
    let mut h = init.h0.clone();
    let mut c = init.c0.clone();
    let mut steps = Vec::with_capacity(gold.len() - 1);
    let mut total = 0.0;
    for w in gold.windows(2) {
        let (token, target) = (w[0], w[1]);
        let att = attend_projected(features, &proj, &h, params);
        let cell = lstm_cell(params.embedding.row(token), &att.context, &h, &c, params);
        let lg = logits(&cell.h, params);
        let max = lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lg.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - lg[target];
        let probs = softmax(&lg);
        let (h_next, c_next) = (cell.h.clone(), cell.c.clone());
        steps.push(Step {
            token,
            target,
            h_prev: std::mem::replace(&mut h, h_next),
            c_prev: std::mem::replace(&mut c, c_next),
            att,
            cell,
            probs,
        });
    }
    let loss = total / steps.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok((
        loss,
        Tape {
            features,
            init,
            steps,
            loss,
        },
    ))
}

/// Gradients of the tape's loss with respect to every parameter.
pub fn backward(tape: &Tape<'_>, params: &DecoderParams) -> DecoderParams {
    let mut grads = DecoderParams::zeros(params.dims);
    backward_into(tape, params, 1.0, &mut grads);
    grads
}

/// Accumulate `scale · ∂loss/∂θ` into `grads`.
pub fn backward_into(
    tape: &Tape<'_>,
    params: &DecoderParams,
    scale: f64,
    grads: &mut DecoderParams,
) {
    let dims = params.dims;
    let n = dims.hidden;
    let m = dims.embed;
    let k = dims.attention;
    let features = tape.features;
    let per_step = scale / tape.steps.len() as f64;

    let mut dh = vec![0.0; n];
    let mut dc = vec![0.0; n];
    for s in tape.steps.iter().rev() {
        let mut dlogits = s.probs.clone();
        dlogits[s.target] -= 1.0;
        dlogits.iter_mut().for_each(|v| *v *= per_step);
        grads.out_w.outer_add(&dlogits, &s.cell.h);
        axpy(1.0, &dlogits, &mut grads.out_b.data);
        params.out_w.matvec_t_add(&dlogits, &mut dh);

        let cell = &s.cell;
        let mut dpre = vec![0.0; 4 * n];
        for j in 0..n {
            let dcj = dc[j] + dh[j] * cell.o[j] * (1.0 - cell.tanh_c[j] * cell.tanh_c[j]);
            let d_o = dh[j] * cell.tanh_c[j];
            let d_i = dcj * cell.g[j];
            let d_g = dcj * cell.i[j];
            let d_f = dcj * s.c_prev[j];
            dpre[j] = d_i * cell.i[j] * (1.0 - cell.i[j]);
            dpre[n + j] = d_f * cell.f[j] * (1.0 - cell.f[j]);
            dpre[2 * n + j] = d_o * cell.o[j] * (1.0 - cell.o[j]);
            dpre[3 * n + j] = d_g * (1.0 - cell.g[j] * cell.g[j]);
            dc[j] = dcj * cell.f[j];
        }
        grads.lstm_wx.outer_add(&dpre, &cell.input);
        grads.lstm_wh.outer_add(&dpre, &s.h_prev);
        axpy(1.0, &dpre, &mut grads.lstm_b.data);
        let mut dinput = vec![0.0; cell.input.len()];
        params.lstm_wx.matvec_t_add(&dpre, &mut dinput);
        let mut dh_prev = vec![0.0; n];
        params.lstm_wh.matvec_t_add(&dpre, &mut dh_prev);
        axpy(1.0, &dinput[..m], grads.embedding.row_mut(s.token));

        let dz = &dinput[m..];
        let att = &s.att;
        let dalpha: Vec<f64> = (0..features.locations)
            .map(|i| dot(dz, features.row(i)))
            .collect();
        let mean_dalpha = dot(&att.alpha, &dalpha);
        let mut dph = vec![0.0; k];
        for (i, (&a, &da)) in att.alpha.iter().zip(&dalpha).enumerate() {
            let de = a * (da - mean_dalpha);
            if de == 0.0 {
                continue;
            }
            let u = att.u.row(i);
            axpy(de, u, &mut grads.att_score.data);
            let dpre_att: Vec<f64> = u
                .iter()
                .zip(&params.att_score.data)
                .map(|(ui, wi)| de * wi * (1.0 - ui * ui))
                .collect();
            grads.att_feat.outer_add(&dpre_att, features.row(i));
            axpy(1.0, &dpre_att, &mut dph);
        }
        grads.att_hidden.outer_add(&dph, &s.h_prev);
        params.att_hidden.matvec_t_add(&dph, &mut dh_prev);
        dh = dh_prev;
    }

    let init = &tape.init;
    let dpre_h: Vec<f64> = dh
        .iter()
        .zip(&init.h0)
        .map(|(d, h)| d * (1.0 - h * h))
        .collect();
    grads.init_h_w.outer_add(&dpre_h, &init.mean);
    axpy(1.0, &dpre_h, &mut grads.init_h_b.data);
    let dpre_c: Vec<f64> = dc
        .iter()
        .zip(&init.c0)
        .map(|(d, c)| d * (1.0 - c * c))
        .collect();
    grads.init_c_w.outer_add(&dpre_c, &init.mean);
    axpy(1.0, &dpre_c, &mut grads.init_c_b.data);
}
