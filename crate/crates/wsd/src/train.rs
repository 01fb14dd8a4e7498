//! Training: positive/negative example generation, MSE loss,
//! hand-derived backpropagation through time, RMSprop updates of all
//! weights including embeddings, dropout and word dropout, and the
//! finite-difference gradient checker.

use std::collections::HashMap;
use std::time::Instant;

use crate::corpus::{make_window, ContextWindow, DisambiguationInstance};
use crate::embeddings::{PAD_ID};
use crate::error::{Error, Result};
use crate::model::{
    forward, ArchMode, DropoutMasks, EncoderParams, EncoderTrace, ForwardTrace, LstmParams,
    NetworkParams, GATE_F, GATE_G, GATE_I, GATE_O,
};
use crate::numkit::{bernoulli_mask, Mat2, SeededRng, Vec1};

/// One (sense, window, target) triple. Target 1.0 marks the gold
/// sense, 0.0 an incorrect candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub sense_id: usize,
    pub window: ContextWindow,
    pub target: f64,
}

/// All knobs of a run. Defaults are the tuned values of the evaluated
/// configuration; RMSprop and loop constants are canonical defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub context_left: usize,
    pub context_right: usize,
    pub embedding_size: usize,
    pub hidden: usize,
    pub dropout_embed: f64,
    pub dropout_lstm_out: f64,
    pub dropout_fc: f64,
    pub word_dropout: f64,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            context_left: 15,
            context_right: 15,
            embedding_size: 100,
            hidden: 50,
            dropout_embed: 0.20,
            dropout_lstm_out: 0.50,
            dropout_fc: 0.50,
            word_dropout: 0.20,
            learning_rate: 1e-3,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 5,
            val_fraction: 0.05,
            seed: 42,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("dropout_embed", self.dropout_embed),
            ("dropout_lstm_out", self.dropout_lstm_out),
            ("dropout_fc", self.dropout_fc),
            ("word_dropout", self.word_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {p}")));
            }
        }
        for (name, c) in [
            ("context_left", self.context_left),
            ("context_right", self.context_right),
            ("embedding_size", self.embedding_size),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
        ] {
            if c == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One positive example per gold sense, one negative per remaining
/// candidate; all share the instance's window.
pub fn generate_examples(
    inst: &DisambiguationInstance,
    params: &NetworkParams,
    hp: &HyperParams,
) -> Result<Vec<TrainingExample>> {
    let lex = params
        .inventory
        .lexelt(&inst.lexelt)
        .ok_or_else(|| Error::Config(format!("lexelt {} not in inventory", inst.lexelt)))?;
    let window = make_window(inst, &params.vocab, hp.context_left, hp.context_right);
    let gold_ids: Vec<usize> = inst
        .gold
        .iter()
        .filter_map(|g| params.inventory.global_id(&inst.lexelt, g))
        .collect();
    let mut out = Vec::with_capacity(lex.global_ids.len() + gold_ids.len());
    for &gid in &gold_ids {
        out.push(TrainingExample { sense_id: gid, window: window.clone(), target: 1.0 });
    }
    for &gid in &lex.global_ids {
        if !gold_ids.contains(&gid) {
            out.push(TrainingExample { sense_id: gid, window: window.clone(), target: 0.0 });
        }
    }
    Ok(out)
}

pub fn mse_loss(y_hat: f64, target: f64) -> f64 {
    (y_hat - target) * (y_hat - target)
}

pub fn mse_grad(y_hat: f64, target: f64) -> f64 {
    2.0 * (y_hat - target)
}

/// Fresh inverted-dropout masks for one training forward pass.
pub fn make_masks(params: &NetworkParams, hp: &HyperParams, rng: &mut SeededRng) -> Result<DropoutMasks> {
    let d = params.dim();
    let h = params.hidden();
    let keep_e = 1.0 - hp.dropout_embed;
    let sense = bernoulli_mask(rng, d, keep_e)?;
    let mut words_left = Vec::with_capacity(params.variant.left_len);
    for _ in 0..params.variant.left_len {
        words_left.push(bernoulli_mask(rng, d, keep_e)?);
    }
    let mut words_right = Vec::with_capacity(params.variant.right_len);
    for _ in 0..params.variant.right_len {
        words_right.push(bernoulli_mask(rng, d, keep_e)?);
    }
    Ok(DropoutMasks {
        sense,
        words_left,
        words_right,
        merge: bernoulli_mask(rng, 2 * h, 1.0 - hp.dropout_lstm_out)?,
        fc: bernoulli_mask(rng, h, 1.0 - hp.dropout_fc)?,
    })
}

/// Replace each non-PAD window position by PAD with the given
/// probability.
pub fn apply_word_dropout(window: &ContextWindow, rate: f64, rng: &mut SeededRng) -> ContextWindow {
    let drop_side = |ids: &[usize], rng: &mut SeededRng| -> Vec<usize> {
        ids.iter()
            .map(|&id| {
                if id != PAD_ID && rng.next_f64() < rate {
                    PAD_ID
                } else {
                    id
                }
            })
            .collect()
    };
    ContextWindow {
        left_ids: drop_side(&window.left_ids, rng),
        right_ids: drop_side(&window.right_ids, rng),
    }
}

/// Permute non-PAD ids within each side (the shuffled-context
/// ablation).
pub fn shuffle_window(window: &ContextWindow, rng: &mut SeededRng) -> ContextWindow {
    let shuffle_side = |ids: &[usize], rng: &mut SeededRng| -> Vec<usize> {
        let mut out = ids.to_vec();
        let positions: Vec<usize> =
            (0..ids.len()).filter(|&k| ids[k] != PAD_ID).collect();
        let mut vals: Vec<usize> = positions.iter().map(|&k| ids[k]).collect();
        rng.shuffle(&mut vals);
        for (&k, &v) in positions.iter().zip(vals.iter()) {
            out[k] = v;
        }
        out
    };
    ContextWindow {
        left_ids: shuffle_side(&window.left_ids, rng),
        right_ids: shuffle_side(&window.right_ids, rng),
    }
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum EncoderGrads {
    Lstm { wx: Mat2, wh: Mat2, b: Vec1 },
    Dense { w: Mat2, b: Vec1 },
}

impl EncoderGrads {
    fn zeros_like(p: &EncoderParams) -> Self {
        match p {
            EncoderParams::Lstm(l) => EncoderGrads::Lstm {
                wx: Mat2::zeros(l.wx.rows, l.wx.cols),
                wh: Mat2::zeros(l.wh.rows, l.wh.cols),
                b: vec![0.0; l.b.len()],
            },
            EncoderParams::Dense { w, b } => EncoderGrads::Dense {
                w: Mat2::zeros(w.rows, w.cols),
                b: vec![0.0; b.len()],
            },
        }
    }

    fn add_scaled(&mut self, other: &EncoderGrads, s: f64) {
        match (self, other) {
            (
                EncoderGrads::Lstm { wx, wh, b },
                EncoderGrads::Lstm { wx: owx, wh: owh, b: ob },
            ) => {
                for (a, o) in wx.data.iter_mut().zip(owx.data.iter()) {
                    *a += s * o;
                }
                for (a, o) in wh.data.iter_mut().zip(owh.data.iter()) {
                    *a += s * o;
                }
                for (a, o) in b.iter_mut().zip(ob.iter()) {
                    *a += s * o;
                }
            }
            (EncoderGrads::Dense { w, b }, EncoderGrads::Dense { w: ow, b: ob }) => {
                for (a, o) in w.data.iter_mut().zip(ow.data.iter()) {
                    *a += s * o;
                }
                for (a, o) in b.iter_mut().zip(ob.iter()) {
                    *a += s * o;
                }
            }
            _ => panic!("encoder gradient kind mismatch"),
        }
    }
}

/// Gradients of the loss w.r.t. every trainable parameter. Embedding
/// gradients are sparse: only touched columns appear; the PAD word
/// column never does.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub sense_cols: HashMap<usize, Vec1>,
    pub word_cols: HashMap<usize, Vec1>,
    pub left: EncoderGrads,
    pub right: EncoderGrads,
    pub w_h: Mat2,
    pub b_h: Vec1,
    pub w_out: Vec1,
    pub b_out: f64,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            sense_cols: HashMap::new(),
            word_cols: HashMap::new(),
            left: EncoderGrads::zeros_like(&params.left),
            right: EncoderGrads::zeros_like(&params.right),
            w_h: Mat2::zeros(params.head.w_h.rows, params.head.w_h.cols),
            b_h: vec![0.0; params.head.b_h.len()],
            w_out: vec![0.0; params.head.w_out.len()],
            b_out: 0.0,
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, s: f64) {
        for (id, col) in &other.sense_cols {
            let e = self
                .sense_cols
                .entry(*id)
                .or_insert_with(|| vec![0.0; col.len()]);
            for (a, o) in e.iter_mut().zip(col.iter()) {
                *a += s * o;
            }
        }
        for (id, col) in &other.word_cols {
            let e = self
                .word_cols
                .entry(*id)
                .or_insert_with(|| vec![0.0; col.len()]);
            for (a, o) in e.iter_mut().zip(col.iter()) {
                *a += s * o;
            }
        }
        self.left.add_scaled(&other.left, s);
        self.right.add_scaled(&other.right, s);
        for (a, o) in self.w_h.data.iter_mut().zip(other.w_h.data.iter()) {
            *a += s * o;
        }
        for (a, o) in self.b_h.iter_mut().zip(other.b_h.iter()) {
            *a += s * o;
        }
        for (a, o) in self.w_out.iter_mut().zip(other.w_out.iter()) {
            *a += s * o;
        }
        self.b_out += s * other.b_out;
    }
}

/// Gradient of cosine(a, b) w.r.t. both vectors; zero at zero norm,
/// matching the forward definition cosine = 0 there.
fn cosine_backward(a: &[f64], b: &[f64], dcos: f64, da: &mut [f64], db: &mut [f64]) {
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return;
    }
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let c = dot / (na * nb);
    for k in 0..a.len() {
        da[k] += dcos * (b[k] / (na * nb) - c * a[k] / (na * na));
        db[k] += dcos * (a[k] / (na * nb) - c * b[k] / (nb * nb));
    }
}

/// BPTT over recorded LSTM steps. `d_final` is the loss gradient at
/// the last hidden state. Returns per-step input gradients in run
/// order.
fn lstm_backward(
    p: &LstmParams,
    steps: &[crate::model::LstmStepTrace],
    d_final: &[f64],
) -> (EncoderGrads, Vec1) {
    let h = p.hidden;
    let mut gwx = Mat2::zeros(4 * h, p.input_dim);
    let mut gwh = Mat2::zeros(4 * h, h);
    let mut gb = vec![0.0; 4 * h];
    let mut d_inputs = vec![0.0; steps.len()];
    let mut dh_next = d_final.to_vec();
    let mut dc_next = vec![0.0; h];

    for (t, st) in steps.iter().enumerate().rev() {
        let mut dz = vec![0.0; 4 * h];
        for u in 0..h {
            let tanh_c = st.c[u].tanh();
            let dh = dh_next[u];
            let do_ = dh * tanh_c;
            let dc = dc_next[u] + dh * st.o[u] * (1.0 - tanh_c * tanh_c);
            let di = dc * st.g[u];
            let dg = dc * st.i[u];
            let df = dc * st.c_prev[u];
            dc_next[u] = dc * st.f[u];
            dz[GATE_I * h + u] = di * st.i[u] * (1.0 - st.i[u]);
            dz[GATE_F * h + u] = df * st.f[u] * (1.0 - st.f[u]);
            dz[GATE_G * h + u] = dg * (1.0 - st.g[u] * st.g[u]);
            dz[GATE_O * h + u] = do_ * st.o[u] * (1.0 - st.o[u]);
        }
        let mut dh_prev = vec![0.0; h];
        let mut dx = 0.0;
        for k in 0..4 * h {
            let z = dz[k];
            *gwx.at_mut(k, 0) += z * st.x;
            gb[k] += z;
            dx += p.wx.at(k, 0) * z;
            for j in 0..h {
                *gwh.at_mut(k, j) += z * st.h_prev[j];
                dh_prev[j] += p.wh.at(k, j) * z;
            }
        }
        d_inputs[t] = dx;
        dh_next = dh_prev;
    }
    (EncoderGrads::Lstm { wx: gwx, wh: gwh, b: gb }, d_inputs)
}

fn dense_backward(w: &Mat2, pre: &[f64], input: &[f64], d_out: &[f64]) -> (EncoderGrads, Vec1) {
    let mut gw = Mat2::zeros(w.rows, w.cols);
    let mut gb = vec![0.0; w.rows];
    let mut d_in = vec![0.0; w.cols];
    for u in 0..w.rows {
        let dp = if pre[u] > 0.0 { d_out[u] } else { 0.0 };
        gb[u] = dp;
        for j in 0..w.cols {
            *gw.at_mut(u, j) += dp * input[j];
            d_in[j] += w.at(u, j) * dp;
        }
    }
    (EncoderGrads::Dense { w: gw, b: gb }, d_in)
}

fn traversal_is_forward(is_left: bool, mode: ArchMode) -> bool {
    let natural = is_left;
    match mode {
        ArchMode::ReversedDirections => !natural,
        _ => natural,
    }
}

/// Backward through one side's encoder; returns cosine-sequence
/// gradients in window-position order.
fn encoder_backward(
    enc: &EncoderParams,
    trace: &EncoderTrace,
    d_final: &[f64],
    is_left: bool,
    mode: ArchMode,
) -> Result<(EncoderGrads, Vec1)> {
    match (enc, trace) {
        (EncoderParams::Lstm(p), EncoderTrace::Lstm(steps)) => {
            let (g, d_run) = lstm_backward(p, steps, d_final);
            let d_window = if traversal_is_forward(is_left, mode) {
                d_run
            } else {
                d_run.into_iter().rev().collect()
            };
            Ok((g, d_window))
        }
        (EncoderParams::Dense { w, .. }, EncoderTrace::Dense { input, pre, .. }) => {
            let (g, d_in) = dense_backward(w, pre, input, d_final);
            Ok((g, d_in))
        }
        _ => Err(Error::State("encoder trace does not match parameters".into())),
    }
}

/// Exact gradients of the MSE loss w.r.t. every trainable parameter
/// for one example, replaying the dropout masks recorded at forward
/// time.
pub fn backward(
    params: &NetworkParams,
    trace: &ForwardTrace,
    target: f64,
    masks: Option<&DropoutMasks>,
) -> Result<Gradients> {
    let h = params.hidden();
    let d = params.dim();
    let mut g = Gradients::zeros_like(params);

    let d_yhat = mse_grad(trace.y_hat, target);
    let d_logit = d_yhat * trace.y_hat * (1.0 - trace.y_hat);

    // output layer
    for u in 0..h {
        g.w_out[u] = d_logit * trace.h_masked[u];
    }
    g.b_out = d_logit;
    let mut d_h_cl: Vec1 = params.head.w_out.iter().map(|&w| d_logit * w).collect();
    if let Some(m) = masks {
        for (v, mk) in d_h_cl.iter_mut().zip(m.fc.iter()) {
            *v *= mk;
        }
    }

    // hidden layer (ReLU)
    let mut d_enc_masked = vec![0.0; 2 * h];
    for u in 0..h {
        let dp = if trace.pre_h[u] > 0.0 { d_h_cl[u] } else { 0.0 };
        g.b_h[u] = dp;
        for j in 0..2 * h {
            *g.w_h.at_mut(u, j) = dp * trace.enc_masked[j];
            d_enc_masked[j] += params.head.w_h.at(u, j) * dp;
        }
    }
    let mut d_enc = d_enc_masked;
    if let Some(m) = masks {
        for (v, mk) in d_enc.iter_mut().zip(m.merge.iter()) {
            *v *= mk;
        }
    }

    // encoders
    let (gl, d_cos_left) = encoder_backward(
        &params.left,
        &trace.left_trace,
        &d_enc[..h],
        true,
        params.variant.mode,
    )?;
    let (gr, d_cos_right) = encoder_backward(
        &params.right,
        &trace.right_trace,
        &d_enc[h..],
        false,
        params.variant.mode,
    )?;
    g.left = gl;
    g.right = gr;

    // cosine layer into the embedding tables
    let mut d_sense_masked = vec![0.0; d];
    let side = |ids: &[usize], words: &[Vec1], d_cos: &[f64], word_masks: Option<&Vec<Vec1>>, g: &mut Gradients, d_sense_masked: &mut Vec1| {
        for (pos, &id) in ids.iter().enumerate() {
            if d_cos[pos] == 0.0 {
                continue;
            }
            let mut d_word_masked = vec![0.0; d];
            cosine_backward(
                &trace.sense_masked,
                &words[pos],
                d_cos[pos],
                d_sense_masked,
                &mut d_word_masked,
            );
            if id == PAD_ID {
                continue; // PAD column is frozen
            }
            let col = g.word_cols.entry(id).or_insert_with(|| vec![0.0; d]);
            match word_masks {
                Some(ms) => {
                    for k in 0..d {
                        col[k] += d_word_masked[k] * ms[pos][k];
                    }
                }
                None => {
                    for k in 0..d {
                        col[k] += d_word_masked[k];
                    }
                }
            }
        }
    };
    side(
        &trace.left_ids,
        &trace.words_left_masked,
        &d_cos_left,
        masks.map(|m| &m.words_left),
        &mut g,
        &mut d_sense_masked,
    );
    side(
        &trace.right_ids,
        &trace.words_right_masked,
        &d_cos_right,
        masks.map(|m| &m.words_right),
        &mut g,
        &mut d_sense_masked,
    );

    let mut d_sense = d_sense_masked;
    if let Some(m) = masks {
        for (v, mk) in d_sense.iter_mut().zip(m.sense.iter()) {
            *v *= mk;
        }
    }
    if d_sense.iter().any(|&v| v != 0.0) {
        g.sense_cols.insert(trace.sense_id, d_sense);
    }

    Ok(g)
}

// ---------------------------------------------------------------------------
// RMSprop
// ---------------------------------------------------------------------------

/// Per-parameter accumulators of squared gradients, mirroring the
/// network's shapes. Embedding accumulators update only for touched
/// columns.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub word_acc: Mat2,
    pub sense_acc: Mat2,
    pub left: EncoderGrads,
    pub right: EncoderGrads,
    pub w_h: Mat2,
    pub b_h: Vec1,
    pub w_out: Vec1,
    pub b_out: f64,
}

impl OptimizerState {
    pub fn new(params: &NetworkParams) -> Self {
        OptimizerState {
            word_acc: Mat2::zeros(params.word_table.matrix.rows, params.word_table.matrix.cols),
            sense_acc: Mat2::zeros(params.sense_table.matrix.rows, params.sense_table.matrix.cols),
            left: EncoderGrads::zeros_like(&params.left),
            right: EncoderGrads::zeros_like(&params.right),
            w_h: Mat2::zeros(params.head.w_h.rows, params.head.w_h.cols),
            b_h: vec![0.0; params.head.b_h.len()],
            w_out: vec![0.0; params.head.w_out.len()],
            b_out: 0.0,
        }
    }
}

fn rms_update(w: &mut f64, g: f64, acc: &mut f64, hp: &HyperParams) {
    *acc = hp.rms_decay * *acc + (1.0 - hp.rms_decay) * g * g;
    *w -= hp.learning_rate * g / (acc.sqrt() + hp.rms_epsilon);
}

fn rms_update_slice(w: &mut [f64], g: &[f64], acc: &mut [f64], hp: &HyperParams) {
    for ((wi, &gi), ai) in w.iter_mut().zip(g.iter()).zip(acc.iter_mut()) {
        rms_update(wi, gi, ai, hp);
    }
}

/// One RMSprop step: acc <- rho*acc + (1-rho)*g^2, then
/// w <- w - lr*g/(sqrt(acc)+eps).
pub fn rmsprop_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    hp: &HyperParams,
) {
    let d = params.dim();
    for (&id, col) in &grads.sense_cols {
        for k in 0..d {
            let acc = state.sense_acc.at_mut(k, id);
            let w = params.sense_table.matrix.at_mut(k, id);
            rms_update(w, col[k], acc, hp);
        }
    }
    for (&id, col) in &grads.word_cols {
        debug_assert_ne!(id, PAD_ID);
        for k in 0..d {
            let acc = state.word_acc.at_mut(k, id);
            let w = params.word_table.matrix.at_mut(k, id);
            rms_update(w, col[k], acc, hp);
        }
    }
    match (&mut params.left, &grads.left, &mut state.left) {
        (
            EncoderParams::Lstm(p),
            EncoderGrads::Lstm { wx, wh, b },
            EncoderGrads::Lstm { wx: awx, wh: awh, b: ab },
        ) => {
            rms_update_slice(&mut p.wx.data, &wx.data, &mut awx.data, hp);
            rms_update_slice(&mut p.wh.data, &wh.data, &mut awh.data, hp);
            rms_update_slice(&mut p.b, b, ab, hp);
        }
        (
            EncoderParams::Dense { w, b },
            EncoderGrads::Dense { w: gw, b: gb },
            EncoderGrads::Dense { w: aw, b: ab },
        ) => {
            rms_update_slice(&mut w.data, &gw.data, &mut aw.data, hp);
            rms_update_slice(b, gb, ab, hp);
        }
        _ => panic!("optimizer state kind mismatch"),
    }
    match (&mut params.right, &grads.right, &mut state.right) {
        (
            EncoderParams::Lstm(p),
            EncoderGrads::Lstm { wx, wh, b },
            EncoderGrads::Lstm { wx: awx, wh: awh, b: ab },
        ) => {
            rms_update_slice(&mut p.wx.data, &wx.data, &mut awx.data, hp);
            rms_update_slice(&mut p.wh.data, &wh.data, &mut awh.data, hp);
            rms_update_slice(&mut p.b, b, ab, hp);
        }
        (
            EncoderParams::Dense { w, b },
            EncoderGrads::Dense { w: gw, b: gb },
            EncoderGrads::Dense { w: aw, b: ab },
        ) => {
            rms_update_slice(&mut w.data, &gw.data, &mut aw.data, hp);
            rms_update_slice(b, gb, ab, hp);
        }
        _ => panic!("optimizer state kind mismatch"),
    }
    rms_update_slice(&mut params.head.w_h.data, &grads.w_h.data, &mut state.w_h.data, hp);
    rms_update_slice(&mut params.head.b_h, &grads.b_h, &mut state.b_h, hp);
    rms_update_slice(&mut params.head.w_out, &grads.w_out, &mut state.w_out, hp);
    rms_update(&mut params.head.b_out, grads.b_out, &mut state.b_out, hp);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_f: f64,
    pub elapsed_secs: u64,
}

/// Deterministic per-instance generator: run seed mixed with an FNV-1a
/// hash of the instance id. Makes shuffled-context permutations stable
/// across training and testing and safe to evaluate in parallel.
pub fn instance_rng(seed: u64, instance_id: &str) -> SeededRng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in instance_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    SeededRng::new(seed ^ h)
}

/// Window for an instance under the active variant (shuffled-context
/// permutes non-PAD ids with the per-instance rng derived from the run
/// seed).
pub fn window_for(params: &NetworkParams, inst: &DisambiguationInstance, seed: u64) -> ContextWindow {
    let w = make_window(
        inst,
        &params.vocab,
        params.variant.left_len,
        params.variant.right_len,
    );
    if params.variant.mode == ArchMode::ShuffledContext {
        let mut rng = instance_rng(seed, &inst.id);
        shuffle_window(&w, &mut rng)
    } else {
        w
    }
}

/// Argmax decoding accuracy against gold labels (match-any); used as
/// the validation F-measure (full coverage makes P = R = F).
pub fn decode_accuracy(
    params: &NetworkParams,
    instances: &[DisambiguationInstance],
    hp: &HyperParams,
) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for inst in instances {
        let lex = match params.inventory.lexelt(&inst.lexelt) {
            Some(l) => l,
            None => continue,
        };
        let window = window_for(params, inst, hp.seed);
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (k, &gid) in lex.global_ids.iter().enumerate() {
            let y = crate::model::score_sense(params, gid, &window)?;
            if y > best_score {
                best_score = y;
                best = k;
            }
        }
        let chosen = &lex.senses[best];
        if inst.gold.iter().any(|g| g == chosen) {
            correct += 1;
        }
    }
    Ok(correct as f64 / instances.len() as f64)
}

/// Epochs of shuffled minibatches over the generated examples. Keeps
/// the best-validation parameters; stops after `patience` epochs
/// without improvement or at `max_epochs`.
pub fn train(
    params: &mut NetworkParams,
    train_insts: &[DisambiguationInstance],
    val_insts: &[DisambiguationInstance],
    hp: &HyperParams,
    rng: &mut SeededRng,
) -> Result<Vec<EpochRecord>> {
    if train_insts.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    hp.validate()?;
    let start = Instant::now();
    let mut state = OptimizerState::new(params);
    let mut log = Vec::new();
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_params: Option<NetworkParams> = None;
    let mut since_improve = 0usize;

    let mut base_examples = Vec::new();
    for inst in train_insts {
        let mut exs = generate_examples(inst, params, hp)?;
        // shuffled-context permutation is fixed per instance and run
        if params.variant.mode == ArchMode::ShuffledContext {
            let mut irng = instance_rng(hp.seed, &inst.id);
            let shuffled = shuffle_window(&exs[0].window, &mut irng);
            for ex in exs.iter_mut() {
                ex.window = shuffled.clone();
            }
        }
        base_examples.extend(exs);
    }

    for epoch in 1..=hp.max_epochs {
        let mut order: Vec<usize> = (0..base_examples.len()).collect();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batch_grads = Gradients::zeros_like(params);
        let mut in_batch = 0usize;
        for (k, &ei) in order.iter().enumerate() {
            let ex = &base_examples[ei];
            let window = apply_word_dropout(&ex.window, hp.word_dropout, rng);
            let masks = make_masks(params, hp, rng)?;
            let trace = forward(params, ex.sense_id, &window, Some(&masks))?;
            loss_sum += mse_loss(trace.y_hat, ex.target);
            let g = backward(params, &trace, ex.target, Some(&masks))?;
            batch_grads.add_scaled(&g, 1.0);
            in_batch += 1;
            if in_batch == hp.batch_size || k + 1 == order.len() {
                let mut mean = Gradients::zeros_like(params);
                mean.add_scaled(&batch_grads, 1.0 / in_batch as f64);
                rmsprop_step(params, &mean, &mut state, hp);
                batch_grads = Gradients::zeros_like(params);
                in_batch = 0;
            }
        }
        let mean_loss = loss_sum / base_examples.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch}: loss {mean_loss}"
            )));
        }
        let val_f = decode_accuracy(params, val_insts, hp)?;
        log.push(EpochRecord {
            epoch,
            mean_loss,
            val_f,
            elapsed_secs: start.elapsed().as_secs(),
        });
        let metric = if val_insts.is_empty() { -mean_loss } else { val_f };
        if metric > best_metric {
            best_metric = metric;
            best_params = Some(params.clone());
            since_improve = 0;
        } else {
            since_improve += 1;
        }
        if since_improve >= hp.patience {
            break;
        }
    }
    if let Some(best) = best_params {
        *params = best;
    }
    Ok(log)
}

pub fn format_log(log: &[EpochRecord]) -> String {
    let mut s = String::new();
    for r in log {
        s.push_str(&format!(
            "{},{:.6},{:.4},{}\n",
            r.epoch, r.mean_loss, r.val_f, r.elapsed_secs
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub group: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for g in &self.groups {
            writeln!(
                f,
                "{:<12} max rel err {:.3e}  {}",
                g.group,
                g.max_rel_err,
                if g.pass { "ok" } else { "FAIL" }
            )?;
        }
        writeln!(f, "overall: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

const GRADCHECK_TOL: f64 = 1e-4;
const GRADCHECK_H: f64 = 1e-5;

fn group_names(params: &NetworkParams) -> Vec<&'static str> {
    let mut names = vec!["sense_table", "word_table"];
    match params.left {
        EncoderParams::Lstm(_) => names.extend(["left_wx", "left_wh", "left_b"]),
        EncoderParams::Dense { .. } => names.extend(["left_w", "left_b"]),
    }
    match params.right {
        EncoderParams::Lstm(_) => names.extend(["right_wx", "right_wh", "right_b"]),
        EncoderParams::Dense { .. } => names.extend(["right_w", "right_b"]),
    }
    names.extend(["w_h", "b_h", "w_out", "b_out"]);
    names
}

fn group_len(params: &NetworkParams, name: &str) -> usize {
    let d = params.dim();
    match name {
        "sense_table" => params.sense_table.matrix.data.len(),
        // PAD column excluded: it is frozen by contract
        "word_table" => d * (params.word_table.width() - 1),
        "left_wx" | "left_wh" | "left_b" | "left_w" => encoder_field_len(&params.left, name),
        "right_wx" | "right_wh" | "right_b" | "right_w" => encoder_field_len(&params.right, name),
        "left_b2" | "right_b2" => unreachable!(),
        "w_h" => params.head.w_h.data.len(),
        "b_h" => params.head.b_h.len(),
        "w_out" => params.head.w_out.len(),
        "b_out" => 1,
        _ => panic!("unknown group {name}"),
    }
}

fn encoder_field_len(enc: &EncoderParams, name: &str) -> usize {
    match (enc, name.rsplit('_').next().unwrap()) {
        (EncoderParams::Lstm(p), "wx") => p.wx.data.len(),
        (EncoderParams::Lstm(p), "wh") => p.wh.data.len(),
        (EncoderParams::Lstm(p), "b") => p.b.len(),
        (EncoderParams::Dense { w, .. }, "w") => w.data.len(),
        (EncoderParams::Dense { b, .. }, "b") => b.len(),
        _ => panic!("bad encoder field {name}"),
    }
}

/// Flat index into the word table skipping the PAD column.
fn word_index(params: &NetworkParams, i: usize) -> (usize, usize) {
    let v = params.word_table.width() - 1;
    (i / v, 1 + i % v)
}

fn get_param(params: &NetworkParams, name: &str, i: usize) -> f64 {
    match name {
        "sense_table" => params.sense_table.matrix.data[i],
        "word_table" => {
            let (r, c) = word_index(params, i);
            params.word_table.matrix.at(r, c)
        }
        "left_wx" | "left_wh" | "left_b" | "left_w" => encoder_get(&params.left, name, i),
        "right_wx" | "right_wh" | "right_b" | "right_w" => encoder_get(&params.right, name, i),
        "w_h" => params.head.w_h.data[i],
        "b_h" => params.head.b_h[i],
        "w_out" => params.head.w_out[i],
        "b_out" => params.head.b_out,
        _ => panic!("unknown group {name}"),
    }
}

fn encoder_get(enc: &EncoderParams, name: &str, i: usize) -> f64 {
    match (enc, name.rsplit('_').next().unwrap()) {
        (EncoderParams::Lstm(p), "wx") => p.wx.data[i],
        (EncoderParams::Lstm(p), "wh") => p.wh.data[i],
        (EncoderParams::Lstm(p), "b") => p.b[i],
        (EncoderParams::Dense { w, .. }, "w") => w.data[i],
        (EncoderParams::Dense { b, .. }, "b") => b[i],
        _ => panic!("bad encoder field {name}"),
    }
}

fn set_param(params: &mut NetworkParams, name: &str, i: usize, v: f64) {
    match name {
        "sense_table" => params.sense_table.matrix.data[i] = v,
        "word_table" => {
            let (r, c) = word_index(params, i);
            *params.word_table.matrix.at_mut(r, c) = v;
        }
        "left_wx" | "left_wh" | "left_b" | "left_w" => encoder_set(&mut params.left, name, i, v),
        "right_wx" | "right_wh" | "right_b" | "right_w" => {
            encoder_set(&mut params.right, name, i, v)
        }
        "w_h" => params.head.w_h.data[i] = v,
        "b_h" => params.head.b_h[i] = v,
        "w_out" => params.head.w_out[i] = v,
        "b_out" => params.head.b_out = v,
        _ => panic!("unknown group {name}"),
    }
}

fn encoder_set(enc: &mut EncoderParams, name: &str, i: usize, v: f64) {
    match (enc, name.rsplit('_').next().unwrap()) {
        (EncoderParams::Lstm(p), "wx") => p.wx.data[i] = v,
        (EncoderParams::Lstm(p), "wh") => p.wh.data[i] = v,
        (EncoderParams::Lstm(p), "b") => p.b[i] = v,
        (EncoderParams::Dense { w, .. }, "w") => w.data[i] = v,
        (EncoderParams::Dense { b, .. }, "b") => b[i] = v,
        _ => panic!("bad encoder field {name}"),
    }
}

fn flat_grad(params: &NetworkParams, grads: &Gradients, name: &str, i: usize) -> f64 {
    let d = params.dim();
    match name {
        "sense_table" => {
            let (r, c) = (i / params.sense_table.width(), i % params.sense_table.width());
            grads.sense_cols.get(&c).map_or(0.0, |col| col[r])
        }
        "word_table" => {
            let (r, c) = word_index(params, i);
            let _ = d;
            grads.word_cols.get(&c).map_or(0.0, |col| col[r])
        }
        "left_wx" | "left_wh" | "left_b" | "left_w" => encoder_grad(&grads.left, name, i),
        "right_wx" | "right_wh" | "right_b" | "right_w" => encoder_grad(&grads.right, name, i),
        "w_h" => grads.w_h.data[i],
        "b_h" => grads.b_h[i],
        "w_out" => grads.w_out[i],
        "b_out" => grads.b_out,
        _ => panic!("unknown group {name}"),
    }
}

fn encoder_grad(g: &EncoderGrads, name: &str, i: usize) -> f64 {
    match (g, name.rsplit('_').next().unwrap()) {
        (EncoderGrads::Lstm { wx, .. }, "wx") => wx.data[i],
        (EncoderGrads::Lstm { wh, .. }, "wh") => wh.data[i],
        (EncoderGrads::Lstm { b, .. }, "b") => b[i],
        (EncoderGrads::Dense { w, .. }, "w") => w.data[i],
        (EncoderGrads::Dense { b, .. }, "b") => b[i],
        _ => panic!("bad encoder field {name}"),
    }
}

/// Compare analytic gradients against central finite differences per
/// parameter group. The forward pass replays the given masks so the
/// checked function is exactly the one backward differentiates.
pub fn fd_check(
    params: &mut NetworkParams,
    sense_id: usize,
    window: &ContextWindow,
    target: f64,
    masks: &DropoutMasks,
    grads: &Gradients,
) -> Result<Vec<GroupReport>> {
    let loss_at = |p: &NetworkParams| -> Result<f64> {
        let t = forward(p, sense_id, window, Some(masks))?;
        Ok(mse_loss(t.y_hat, target))
    };
    // Central differences carry absolute rounding noise of about
    // eps * |loss| / h; differences below a few multiples of that are
    // cancellation artifacts, not disagreement.
    let noise_floor = 8.0 * f64::EPSILON * loss_at(params)?.abs().max(1.0) / GRADCHECK_H;
    let mut reports = Vec::new();
    for name in group_names(params) {
        let n = group_len(params, name);
        let mut max_rel = 0.0f64;
        for i in 0..n {
            let orig = get_param(params, name, i);
            set_param(params, name, i, orig + GRADCHECK_H);
            let lp = loss_at(params)?;
            set_param(params, name, i, orig - GRADCHECK_H);
            let lm = loss_at(params)?;
            set_param(params, name, i, orig);
            let numeric = (lp - lm) / (2.0 * GRADCHECK_H);
            let analytic = flat_grad(params, grads, name, i);
            let diff = (analytic - numeric).abs();
            let rel = if diff <= noise_floor {
                0.0
            } else {
                diff / analytic.abs().max(numeric.abs()).max(1e-8)
            };
            max_rel = max_rel.max(rel);
        }
        reports.push(GroupReport {
            group: name.to_string(),
            max_rel_err: max_rel,
            pass: max_rel < GRADCHECK_TOL,
        });
    }
    Ok(reports)
}

/// Build a random small network and example, run backward, and verify
/// every parameter group against central differences.
pub fn grad_check(hp: &HyperParams, seed: u64) -> Result<GradCheckReport> {
    grad_check_mode(hp, seed, ArchMode::Standard)
}

pub fn grad_check_mode(hp: &HyperParams, seed: u64, mode: ArchMode) -> Result<GradCheckReport> {
    use crate::embeddings::{init_random_word_table, init_sense_table, SenseInventory, Vocabulary};
    use crate::model::{init_network, ArchVariant};

    let mut rng = SeededRng::new(seed);
    let mut vocab = Vocabulary::new();
    for k in 0..10 {
        vocab.intern(&format!("w{k}"));
    }
    let mut inv = SenseInventory::new();
    for k in 0..3 {
        inv.add_sense("check.n", &format!("s{k}"));
    }
    let word_table = init_random_word_table(&vocab, hp.embedding_size, &mut rng);
    let sense_table = init_sense_table(&inv, hp.embedding_size, &mut rng)?;
    let variant = ArchVariant {
        mode,
        left_len: hp.context_left,
        right_len: hp.context_right,
    };
    let mut params = init_network(
        vocab,
        inv,
        word_table,
        sense_table,
        hp.hidden,
        variant,
        &mut rng,
    );

    // random window with one PAD position to exercise the zero-norm rule
    let mut left_ids: Vec<usize> = (0..hp.context_left).map(|_| 1 + rng.below(9)).collect();
    left_ids[0] = PAD_ID;
    let right_ids: Vec<usize> = (0..hp.context_right).map(|_| 1 + rng.below(9)).collect();
    let window = ContextWindow { left_ids, right_ids };
    let sense_id = rng.below(3);
    let target = 0.0;
    let masks = make_masks(&params, hp, &mut rng)?;

    // nudge ReLU pre-activations off the kink before differencing
    for _ in 0..4 {
        let trace = forward(&params, sense_id, &window, Some(&masks))?;
        let mut nudged = false;
        for (u, &p) in trace.pre_h.iter().enumerate() {
            if p.abs() < 1e-6 {
                params.head.b_h[u] += 1e-3;
                nudged = true;
            }
        }
        if !nudged {
            break;
        }
    }

    let trace = forward(&params, sense_id, &window, Some(&masks))?;
    let grads = backward(&params, &trace, target, Some(&masks))?;
    let groups = fd_check(&mut params, sense_id, &window, target, &masks, &grads)?;
    let pass = groups.iter().all(|g| g.pass);
    Ok(GradCheckReport { groups, pass })
}

/// Small hyperparameters for gradient checking (d=8, hidden=5, L=R=3).
pub fn gradcheck_hyperparams() -> HyperParams {
    HyperParams {
        context_left: 3,
        context_right: 3,
        embedding_size: 8,
        hidden: 5,
        ..HyperParams::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{init_random_word_table, init_sense_table, SenseInventory, Vocabulary};
    use crate::model::{init_network, score_sense, ArchVariant};

    fn tiny_net(seed: u64) -> (NetworkParams, HyperParams) {
        let hp = HyperParams {
            context_left: 3,
            context_right: 3,
            embedding_size: 6,
            hidden: 4,
            ..HyperParams::default()
        };
        let mut rng = SeededRng::new(seed);
        let mut vocab = Vocabulary::new();
        for k in 0..8 {
            vocab.intern(&format!("w{k}"));
        }
        let mut inv = SenseInventory::new();
        inv.add_sense("x.n", "s1");
        inv.add_sense("x.n", "s2");
        inv.add_sense("x.n", "s3");
        inv.add_sense("x.n", "s4");
        let wt = init_random_word_table(&vocab, 6, &mut rng);
        let st = init_sense_table(&inv, 6, &mut rng).unwrap();
        let variant = ArchVariant { mode: ArchMode::Standard, left_len: 3, right_len: 3 };
        let net = init_network(vocab, inv, wt, st, 4, variant, &mut rng);
        (net, hp)
    }

    fn instance(lexelt: &str, gold: &[&str]) -> DisambiguationInstance {
        DisambiguationInstance {
            id: format!("{lexelt}.1"),
            lexelt: lexelt.into(),
            gold: gold.iter().map(|s| s.to_string()).collect(),
            left_tokens: vec!["w1".into(), "w2".into()],
            right_tokens: vec!["w3".into()],
            target_tokens: vec!["x".into()],
        }
    }

    #[test]
    fn examples_one_gold_three_negatives() {
        let (net, hp) = tiny_net(1);
        let exs = generate_examples(&instance("x.n", &["s2"]), &net, &hp).unwrap();
        assert_eq!(exs.len(), 4);
        assert_eq!(exs.iter().filter(|e| e.target == 1.0).count(), 1);
        assert_eq!(exs.iter().filter(|e| e.target == 0.0).count(), 3);
        assert_eq!(exs[0].sense_id, net.inventory.global_id("x.n", "s2").unwrap());
        // all share the same window
        assert!(exs.iter().all(|e| e.window == exs[0].window));
    }

    #[test]
    fn examples_two_gold() {
        let (net, hp) = tiny_net(2);
        let exs = generate_examples(&instance("x.n", &["s1", "s4"]), &net, &hp).unwrap();
        assert_eq!(exs.iter().filter(|e| e.target == 1.0).count(), 2);
        assert_eq!(exs.iter().filter(|e| e.target == 0.0).count(), 2);
    }

    #[test]
    fn mse_values_and_gradient() {
        assert_eq!(mse_loss(0.5, 0.5), 0.0);
        assert!((mse_loss(0.9, 0.0) - 0.81).abs() < 1e-12);
        assert!((mse_grad(0.9, 0.0) - 1.8).abs() < 1e-12);
        // central difference on the loss itself
        let h = 1e-6;
        let fd = (mse_loss(0.9 + h, 0.0) - mse_loss(0.9 - h, 0.0)) / (2.0 * h);
        assert!((mse_grad(0.9, 0.0) - fd).abs() < 1e-8);
    }

    #[test]
    fn word_dropout_boundaries() {
        let w = ContextWindow { left_ids: vec![1, 2, 0], right_ids: vec![3, 0, 4] };
        let mut rng = SeededRng::new(3);
        assert_eq!(apply_word_dropout(&w, 0.0, &mut rng), w);
        let all = apply_word_dropout(&w, 1.0, &mut rng);
        assert!(all.left_ids.iter().chain(all.right_ids.iter()).all(|&id| id == PAD_ID));
    }

    #[test]
    fn word_dropout_rate_frequency() {
        let w = ContextWindow { left_ids: vec![1; 50_000], right_ids: vec![2; 50_000] };
        let mut rng = SeededRng::new(4);
        let dropped = apply_word_dropout(&w, 0.2, &mut rng);
        let pads = dropped
            .left_ids
            .iter()
            .chain(dropped.right_ids.iter())
            .filter(|&&id| id == PAD_ID)
            .count() as f64
            / 100_000.0;
        assert!(pads > 0.19 && pads < 0.21, "fraction {pads}");
    }

    #[test]
    fn word_dropout_never_touches_pad() {
        let w = ContextWindow { left_ids: vec![0, 0, 1], right_ids: vec![0, 0, 0] };
        let mut rng = SeededRng::new(5);
        for _ in 0..50 {
            let d = apply_word_dropout(&w, 0.5, &mut rng);
            assert_eq!(&d.left_ids[..2], &[0, 0]);
            assert_eq!(d.right_ids, vec![0; 3]);
        }
    }

    #[test]
    fn dropout_masks_preserve_expectation() {
        let (net, hp) = tiny_net(6);
        let mut rng = SeededRng::new(7);
        let v: Vec1 = (0..6).map(|_| rng.uniform(0.5, 1.5)).collect();
        let mut mean = vec![0.0; 6];
        let n = 10_000;
        for _ in 0..n {
            let m = make_masks(&net, &hp, &mut rng).unwrap();
            for k in 0..6 {
                mean[k] += v[k] * m.sense[k] / n as f64;
            }
        }
        for k in 0..6 {
            assert!((mean[k] - v[k]).abs() / v[k] < 0.03, "{} vs {}", mean[k], v[k]);
        }
    }

    #[test]
    fn no_dropout_masks_are_identity() {
        let (net, _) = tiny_net(8);
        let hp = HyperParams {
            dropout_embed: 0.0,
            dropout_lstm_out: 0.0,
            dropout_fc: 0.0,
            context_left: 3,
            context_right: 3,
            embedding_size: 6,
            hidden: 4,
            ..HyperParams::default()
        };
        let m = make_masks(&net, &hp, &mut SeededRng::new(9)).unwrap();
        assert!(m.sense.iter().all(|&x| x == 1.0));
        assert!(m.merge.iter().all(|&x| x == 1.0));
        assert!(m.fc.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn shuffle_window_keeps_pads_in_place() {
        let w = ContextWindow { left_ids: vec![0, 0, 5, 6, 7], right_ids: vec![8, 9, 0, 0, 0] };
        let mut rng = SeededRng::new(10);
        let s = shuffle_window(&w, &mut rng);
        assert_eq!(&s.left_ids[..2], &[0, 0]);
        assert_eq!(&s.right_ids[2..], &[0, 0, 0]);
        let mut orig: Vec<usize> = w.left_ids[2..].to_vec();
        let mut got: Vec<usize> = s.left_ids[2..].to_vec();
        orig.sort();
        got.sort();
        assert_eq!(orig, got);
    }

    #[test]
    fn backward_zero_loss_gives_zero_grads() {
        let (net, _) = tiny_net(11);
        let w = ContextWindow { left_ids: vec![1, 2, 3], right_ids: vec![4, 5, 6] };
        let trace = forward(&net, 0, &w, None).unwrap();
        // target equal to the prediction: dL/dy = 0 exactly
        let g = backward(&net, &trace, trace.y_hat, None).unwrap();
        assert!(g.w_h.data.iter().all(|&x| x == 0.0));
        assert!(g.b_out == 0.0);
        assert!(g.sense_cols.values().flatten().all(|&x| x == 0.0));
        match g.left {
            EncoderGrads::Lstm { wx, .. } => assert!(wx.data.iter().all(|&x| x == 0.0)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn backward_untouched_columns_have_no_grads() {
        let (net, _) = tiny_net(12);
        let w = ContextWindow { left_ids: vec![1, 1, 0], right_ids: vec![2, 0, 0] };
        let trace = forward(&net, 1, &w, None).unwrap();
        let g = backward(&net, &trace, 0.0, None).unwrap();
        // only words 1 and 2 and sense 1 touched; PAD never present
        let mut word_ids: Vec<usize> = g.word_cols.keys().cloned().collect();
        word_ids.sort();
        assert_eq!(word_ids, vec![1, 2]);
        assert!(g.sense_cols.contains_key(&1));
        assert_eq!(g.sense_cols.len(), 1);
    }

    #[test]
    fn rmsprop_zero_grad_leaves_params_decays_acc() {
        let (mut net, hp) = tiny_net(13);
        let mut state = OptimizerState::new(&net);
        state.b_h = vec![1.0; 4];
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        rmsprop_step(&mut net, &grads, &mut state, &hp);
        assert_eq!(net.head.b_h, before.head.b_h);
        assert_eq!(net.head.w_h, before.head.w_h);
        for &a in &state.b_h {
            assert!((a - hp.rms_decay).abs() < 1e-12);
        }
    }

    #[test]
    fn rmsprop_single_step_closed_form() {
        let (mut net, hp) = tiny_net(14);
        let mut state = OptimizerState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        let g = 0.37;
        grads.b_out = g;
        let w0 = net.head.b_out;
        rmsprop_step(&mut net, &grads, &mut state, &hp);
        let expected = w0
            - hp.learning_rate * g / (((1.0 - hp.rms_decay) * g * g).sqrt() + hp.rms_epsilon);
        assert!((net.head.b_out - expected).abs() < 1e-12);
    }

    #[test]
    fn rmsprop_accumulators_stay_nonnegative() {
        let (mut net, hp) = tiny_net(15);
        let mut state = OptimizerState::new(&net);
        let mut rng = SeededRng::new(16);
        for _ in 0..10_000 {
            let mut grads = Gradients::zeros_like(&net);
            grads.b_out = rng.uniform(-2.0, 2.0);
            for v in grads.b_h.iter_mut() {
                *v = rng.uniform(-2.0, 2.0);
            }
            rmsprop_step(&mut net, &grads, &mut state, &hp);
        }
        assert!(state.b_h.iter().all(|&a| a >= 0.0));
        assert!(state.b_out >= 0.0);
    }

    #[test]
    fn pad_word_column_stays_zero_through_training() {
        let (mut net, mut hp) = tiny_net(17);
        hp.max_epochs = 3;
        hp.patience = 10;
        hp.batch_size = 4;
        let insts: Vec<DisambiguationInstance> =
            (0..6).map(|_| instance("x.n", &["s1"])).collect();
        let mut rng = SeededRng::new(18);
        train(&mut net, &insts, &[], &hp, &mut rng).unwrap();
        let pad = net.word_table.lookup(PAD_ID).unwrap();
        assert!(pad.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let (mut net, mut hp) = tiny_net(19);
            hp.max_epochs = 2;
            hp.patience = 10;
            let insts: Vec<DisambiguationInstance> =
                (0..4).map(|_| instance("x.n", &["s2"])).collect();
            let mut rng = SeededRng::new(20);
            let log = train(&mut net, &insts, &[], &hp, &mut rng).unwrap();
            (net, log)
        };
        let (n1, l1) = run();
        let (n2, l2) = run();
        assert_eq!(n1, n2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn patience_zero_is_one_epoch() {
        let (mut net, mut hp) = tiny_net(21);
        hp.max_epochs = 50;
        hp.patience = 0;
        let insts: Vec<DisambiguationInstance> = (0..4).map(|_| instance("x.n", &["s1"])).collect();
        let mut rng = SeededRng::new(22);
        let log = train(&mut net, &insts, &[], &hp, &mut rng).unwrap();
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn training_reduces_score_gap() {
        // a few updates push the gold sense's score above a non-gold one
        let (mut net, mut hp) = tiny_net(23);
        hp.max_epochs = 30;
        hp.patience = 100;
        hp.word_dropout = 0.0;
        hp.dropout_embed = 0.0;
        hp.dropout_lstm_out = 0.0;
        hp.dropout_fc = 0.0;
        hp.learning_rate = 0.01;
        let insts: Vec<DisambiguationInstance> =
            (0..8).map(|_| instance("x.n", &["s1"])).collect();
        let mut rng = SeededRng::new(24);
        train(&mut net, &insts, &[], &hp, &mut rng).unwrap();
        let w = make_window(&insts[0], &net.vocab, 3, 3);
        let gold = net.inventory.global_id("x.n", "s1").unwrap();
        let other = net.inventory.global_id("x.n", "s3").unwrap();
        let yg = score_sense(&net, gold, &w).unwrap();
        let yo = score_sense(&net, other, &w).unwrap();
        assert!(yg > yo, "gold {yg} vs other {yo}");
    }

    #[test]
    fn grad_check_small_network_passes() {
        let report = grad_check(&gradcheck_hyperparams(), 12345).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn grad_check_fc_variant_passes() {
        let report =
            grad_check_mode(&gradcheck_hyperparams(), 54321, ArchMode::FcInsteadOfBlstm).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn grad_check_reversed_variant_passes() {
        let report =
            grad_check_mode(&gradcheck_hyperparams(), 999, ArchMode::ReversedDirections).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn fd_check_flags_corrupted_group() {
        let hp = gradcheck_hyperparams();
        let mut rng = SeededRng::new(31);
        let (mut params, sense_id, window, masks) = {
            let mut vocab = Vocabulary::new();
            for k in 0..6 {
                vocab.intern(&format!("w{k}"));
            }
            let mut inv = SenseInventory::new();
            inv.add_sense("c.n", "s0");
            inv.add_sense("c.n", "s1");
            let wt = init_random_word_table(&vocab, hp.embedding_size, &mut rng);
            let st = init_sense_table(&inv, hp.embedding_size, &mut rng).unwrap();
            let variant = ArchVariant { mode: ArchMode::Standard, left_len: 3, right_len: 3 };
            let p = init_network(vocab, inv, wt, st, hp.hidden, variant, &mut rng);
            let window = ContextWindow { left_ids: vec![1, 2, 3], right_ids: vec![4, 5, 1] };
            let masks = make_masks(&p, &hp, &mut rng).unwrap();
            (p, 0usize, window, masks)
        };
        let trace = forward(&params, sense_id, &window, Some(&masks)).unwrap();
        let mut grads = backward(&params, &trace, 0.0, Some(&masks)).unwrap();
        // corrupt one head gradient entry
        grads.b_h[0] += 0.5;
        let reports = fd_check(&mut params, sense_id, &window, 0.0, &masks, &grads).unwrap();
        let bh = reports.iter().find(|r| r.group == "b_h").unwrap();
        assert!(!bh.pass);
        for r in reports.iter().filter(|r| r.group != "b_h") {
            assert!(r.pass, "{} unexpectedly failed: {}", r.group, r.max_rel_err);
        }
    }
}
