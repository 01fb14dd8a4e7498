//! The forward computation: cosine sequence construction, the two
//! directional LSTMs, concatenation, ReLU hidden layer and sigmoid
//! scoring, plus the versioned binary model container.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::ContextWindow;
use crate::embeddings::{EmbeddingTable, SenseInventory, TableKind, Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::numkit::{cosine, matvec, relu, sigmoid, tanh_, Mat2, SeededRng, Vec1};

/// Gate block order inside the stacked 4H dimension.
pub const GATE_I: usize = 0;
pub const GATE_F: usize = 1;
pub const GATE_G: usize = 2;
pub const GATE_O: usize = 3;

/// Standard forget-gate LSTM parameters (no peepholes). Gate blocks are
/// stacked [input, forget, candidate, output] along the row dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub wx: Mat2,  // 4H x input_dim
    pub wh: Mat2,  // 4H x H
    pub b: Vec1,   // 4H
    pub hidden: usize,
    pub input_dim: usize,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input_dim: usize) -> Self {
        LstmParams {
            wx: Mat2::zeros(4 * hidden, input_dim),
            wh: Mat2::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
            hidden,
            input_dim,
        }
    }

    /// Glorot-uniform weights; forget-gate bias 1, other biases 0.
    pub fn init(hidden: usize, input_dim: usize, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(hidden, input_dim);
        let lim_x = (6.0 / (input_dim + hidden) as f64).sqrt();
        for v in p.wx.data.iter_mut() {
            *v = rng.uniform(-lim_x, lim_x);
        }
        let lim_h = (6.0 / (2 * hidden) as f64).sqrt();
        for v in p.wh.data.iter_mut() {
            *v = rng.uniform(-lim_h, lim_h);
        }
        for u in 0..hidden {
            p.b[GATE_F * hidden + u] = 1.0;
        }
        p
    }
}

/// ReLU hidden layer and sigmoid output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w_h: Mat2,   // fc x 2H
    pub b_h: Vec1,   // fc
    pub w_out: Vec1, // 1 x fc, stored flat
    pub b_out: f64,
}

impl HeadParams {
    pub fn zeros(fc: usize, enc: usize) -> Self {
        HeadParams {
            w_h: Mat2::zeros(fc, enc),
            b_h: vec![0.0; fc],
            w_out: vec![0.0; fc],
            b_out: 0.0,
        }
    }

    pub fn init(fc: usize, enc: usize, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(fc, enc);
        let lim_h = (6.0 / (enc + fc) as f64).sqrt();
        for v in p.w_h.data.iter_mut() {
            *v = rng.uniform(-lim_h, lim_h);
        }
        let lim_o = (6.0 / (fc + 1) as f64).sqrt();
        for v in p.w_out.iter_mut() {
            *v = rng.uniform(-lim_o, lim_o);
        }
        p
    }
}

/// One side of the context encoder: an LSTM in the standard network, or
/// a dense+ReLU layer under the fc-instead-of-blstm variant.
#[derive(Debug, Clone, PartialEq)]
pub enum EncoderParams {
    Lstm(LstmParams),
    Dense { w: Mat2, b: Vec1 },
}

impl EncoderParams {
    pub fn hidden(&self) -> usize {
        match self {
            EncoderParams::Lstm(p) => p.hidden,
            EncoderParams::Dense { w, .. } => w.rows,
        }
    }
}

/// Which architecture modification is active. Exactly one mode; the
/// context-size and embedding-source ablations live in the run config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchMode {
    Standard,
    /// Both LSTMs traverse inside-out instead of ending at the target.
    ReversedDirections,
    /// Non-PAD window ids are permuted with the run seed before use.
    ShuffledContext,
    /// Dense(side-length -> hidden) + ReLU replaces each LSTM.
    FcInsteadOfBlstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchVariant {
    pub mode: ArchMode,
    pub left_len: usize,
    pub right_len: usize,
}

/// All trainable weights plus the vocabulary and sense inventory they
/// are bound to. One network serves every lexelt.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub word_table: EmbeddingTable,
    pub sense_table: EmbeddingTable,
    pub left: EncoderParams,
    pub right: EncoderParams,
    pub head: HeadParams,
    pub variant: ArchVariant,
    pub vocab: Vocabulary,
    pub inventory: SenseInventory,
}

impl NetworkParams {
    pub fn dim(&self) -> usize {
        self.word_table.dim()
    }

    pub fn hidden(&self) -> usize {
        self.left.hidden()
    }
}

/// Fresh network with Glorot-initialized encoder/head weights and the
/// given (already initialized) embedding tables.
pub fn init_network(
    vocab: Vocabulary,
    inventory: SenseInventory,
    word_table: EmbeddingTable,
    sense_table: EmbeddingTable,
    hidden: usize,
    variant: ArchVariant,
    rng: &mut SeededRng,
) -> NetworkParams {
    let (left, right) = match variant.mode {
        ArchMode::FcInsteadOfBlstm => {
            let mut dense = |len: usize| {
                let lim = (6.0 / (len + hidden) as f64).sqrt();
                let mut w = Mat2::zeros(hidden, len);
                for v in w.data.iter_mut() {
                    *v = rng.uniform(-lim, lim);
                }
                EncoderParams::Dense { w, b: vec![0.0; hidden] }
            };
            (dense(variant.left_len), dense(variant.right_len))
        }
        _ => (
            EncoderParams::Lstm(LstmParams::init(hidden, 1, rng)),
            EncoderParams::Lstm(LstmParams::init(hidden, 1, rng)),
        ),
    };
    let head = HeadParams::init(hidden, 2 * hidden, rng);
    NetworkParams {
        word_table,
        sense_table,
        left,
        right,
        head,
        variant,
        vocab,
        inventory,
    }
}

/// Inverted-dropout masks for one training forward pass. All-ones when
/// a rate is zero; absent entirely at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub sense: Vec1,           // d
    pub words_left: Vec<Vec1>, // L x d
    pub words_right: Vec<Vec1>,
    pub merge: Vec1, // 2H
    pub fc: Vec1,    // fc
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct LstmStepTrace {
    pub x: f64,
    pub i: Vec1,
    pub f: Vec1,
    pub g: Vec1,
    pub o: Vec1,
    pub c_prev: Vec1,
    pub c: Vec1,
    pub h_prev: Vec1,
    pub h: Vec1,
}

#[derive(Debug, Clone)]
pub enum EncoderTrace {
    Lstm(Vec<LstmStepTrace>),
    Dense { input: Vec1, pre: Vec1, out: Vec1 },
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub sense_id: usize,
    pub sense_masked: Vec1,
    pub left_ids: Vec<usize>,
    pub right_ids: Vec<usize>,
    pub words_left_masked: Vec<Vec1>,
    pub words_right_masked: Vec<Vec1>,
    pub cos_left: Vec1,
    pub cos_right: Vec1,
    pub left_trace: EncoderTrace,
    pub right_trace: EncoderTrace,
    pub enc: Vec1,
    pub enc_masked: Vec1,
    pub pre_h: Vec1,
    pub h_cl: Vec1,
    pub h_masked: Vec1,
    pub logit: f64,
    pub y_hat: f64,
}

fn apply_mask(v: &[f64], mask: &[f64]) -> Vec1 {
    v.iter().zip(mask.iter()).map(|(a, m)| a * m).collect()
}

/// Cosine of the sense vector against each window position; PAD and
/// any other zero-norm column yield 0.
pub fn cosine_sequence(
    sense: &[f64],
    window: &ContextWindow,
    word_table: &EmbeddingTable,
) -> Result<(Vec1, Vec1)> {
    if sense.len() != word_table.dim() {
        return Err(Error::Shape(format!(
            "sense dim {} != word embedding dim {}",
            sense.len(),
            word_table.dim()
        )));
    }
    let side = |ids: &[usize]| -> Result<Vec1> {
        ids.iter()
            .map(|&id| cosine(sense, &word_table.lookup(id)?))
            .collect()
    };
    Ok((side(&window.left_ids)?, side(&window.right_ids)?))
}

/// One LSTM step: gates from the current input and previous hidden
/// state, then the cell and hidden updates.
pub fn lstm_step(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec1, Vec1) {
    let t = lstm_step_traced(p, x, h_prev, c_prev);
    (t.h, t.c)
}

pub fn lstm_step_traced(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStepTrace {
    let h = p.hidden;
    debug_assert_eq!(x.len(), p.input_dim);
    debug_assert_eq!(h_prev.len(), h);
    let zx = matvec(&p.wx, x).expect("lstm input dim");
    let zh = matvec(&p.wh, h_prev).expect("lstm hidden dim");
    let mut z = vec![0.0; 4 * h];
    for k in 0..4 * h {
        z[k] = zx[k] + zh[k] + p.b[k];
    }
    let gate = |g: usize| &z[g * h..(g + 1) * h];
    let i: Vec1 = gate(GATE_I).iter().map(|&v| sigmoid(v)).collect();
    let f: Vec1 = gate(GATE_F).iter().map(|&v| sigmoid(v)).collect();
    let g: Vec1 = gate(GATE_G).iter().map(|&v| tanh_(v)).collect();
    let o: Vec1 = gate(GATE_O).iter().map(|&v| sigmoid(v)).collect();
    let c: Vec1 = (0..h).map(|u| f[u] * c_prev[u] + i[u] * g[u]).collect();
    let h_out: Vec1 = (0..h).map(|u| o[u] * tanh_(c[u])).collect();
    LstmStepTrace {
        x: x[0],
        i,
        f,
        g,
        o,
        c_prev: c_prev.to_vec(),
        c,
        h_prev: h_prev.to_vec(),
        h: h_out,
    }
}

fn run_lstm(p: &LstmParams, inputs: &[f64]) -> EncoderTrace {
    let h0 = vec![0.0; p.hidden];
    let c0 = vec![0.0; p.hidden];
    let mut steps = Vec::with_capacity(inputs.len());
    let (mut h, mut c) = (h0, c0);
    for &x in inputs {
        let t = lstm_step_traced(p, &[x], &h, &c);
        h = t.h.clone();
        c = t.c.clone();
        steps.push(t);
    }
    EncoderTrace::Lstm(steps)
}

fn run_dense(w: &Mat2, b: &[f64], input: &[f64]) -> Result<EncoderTrace> {
    let mut pre = matvec(w, input)?;
    for (p, bi) in pre.iter_mut().zip(b.iter()) {
        *p += bi;
    }
    let out: Vec1 = pre.iter().map(|&v| relu(v)).collect();
    Ok(EncoderTrace::Dense { input: input.to_vec(), pre, out })
}

fn encoder_output(t: &EncoderTrace, hidden: usize) -> Vec1 {
    match t {
        EncoderTrace::Lstm(steps) => steps
            .last()
            .map(|s| s.h.clone())
            .unwrap_or_else(|| vec![0.0; hidden]),
        EncoderTrace::Dense { out, .. } => out.clone(),
    }
}

/// Run one side's encoder over its cosine sequence in the traversal
/// order dictated by the variant. Each LSTM ends adjacent to the
/// target; reversed-directions flips both traversals.
fn encode_side(
    enc: &EncoderParams,
    cosines: &[f64],
    is_left: bool,
    mode: ArchMode,
) -> Result<EncoderTrace> {
    match enc {
        EncoderParams::Lstm(p) => {
            // left side ends adjacent when read in index order
            // (left_ids run farthest..adjacent); right side must be
            // read back-to-front to end adjacent
            let natural_forward = is_left;
            let forward = match mode {
                ArchMode::ReversedDirections => !natural_forward,
                _ => natural_forward,
            };
            if forward {
                Ok(run_lstm(p, cosines))
            } else {
                let rev: Vec1 = cosines.iter().rev().cloned().collect();
                Ok(run_lstm(p, &rev))
            }
        }
        EncoderParams::Dense { w, b } => run_dense(w, b, cosines),
    }
}

/// Concatenated final hidden states of the two directional encoders.
pub fn blstm_encode(params: &NetworkParams, left_cos: &[f64], right_cos: &[f64]) -> Result<Vec1> {
    if left_cos.len() != params.variant.left_len || right_cos.len() != params.variant.right_len {
        return Err(Error::Shape(format!(
            "sequence lengths {}/{} do not match configured context {}/{}",
            left_cos.len(),
            right_cos.len(),
            params.variant.left_len,
            params.variant.right_len
        )));
    }
    let h = params.hidden();
    let lt = encode_side(&params.left, left_cos, true, params.variant.mode)?;
    let rt = encode_side(&params.right, right_cos, false, params.variant.mode)?;
    let mut enc = encoder_output(&lt, h);
    enc.extend(encoder_output(&rt, h));
    Ok(enc)
}

/// ReLU hidden layer followed by the sigmoid scoring unit.
pub fn head_forward(head: &HeadParams, enc: &[f64]) -> Result<(Vec1, f64)> {
    if enc.len() != head.w_h.cols {
        return Err(Error::Shape(format!(
            "encoder output {} != head input {}",
            enc.len(),
            head.w_h.cols
        )));
    }
    let mut pre = matvec(&head.w_h, enc)?;
    for (p, b) in pre.iter_mut().zip(head.b_h.iter()) {
        *p += b;
    }
    let h_cl: Vec1 = pre.iter().map(|&v| relu(v)).collect();
    let logit: f64 = h_cl.iter().zip(head.w_out.iter()).map(|(a, b)| a * b).sum::<f64>() + head.b_out;
    Ok((h_cl, sigmoid(logit)))
}

/// Full forward pass for one (sense, window) pair. Dropout masks are
/// applied only when supplied (training); the trace carries everything
/// backward needs.
pub fn forward(
    params: &NetworkParams,
    sense_id: usize,
    window: &ContextWindow,
    masks: Option<&DropoutMasks>,
) -> Result<ForwardTrace> {
    let d = params.dim();
    let sense_raw = params.sense_table.lookup(sense_id)?;
    let sense_masked = match masks {
        Some(m) => apply_mask(&sense_raw, &m.sense),
        None => sense_raw,
    };

    let side = |ids: &[usize], word_masks: Option<&Vec<Vec1>>| -> Result<(Vec<Vec1>, Vec1)> {
        let mut vecs = Vec::with_capacity(ids.len());
        let mut cosines = Vec::with_capacity(ids.len());
        for (pos, &id) in ids.iter().enumerate() {
            let raw = params.word_table.lookup(id)?;
            let masked = match word_masks {
                Some(ms) => apply_mask(&raw, &ms[pos]),
                None => raw,
            };
            cosines.push(cosine(&sense_masked, &masked)?);
            vecs.push(masked);
        }
        Ok((vecs, cosines))
    };
    let (words_left_masked, cos_left) =
        side(&window.left_ids, masks.map(|m| &m.words_left))?;
    let (words_right_masked, cos_right) =
        side(&window.right_ids, masks.map(|m| &m.words_right))?;

    if sense_masked.len() != d {
        return Err(Error::Shape("sense dimension".into()));
    }
    let h = params.hidden();
    let left_trace = encode_side(&params.left, &cos_left, true, params.variant.mode)?;
    let right_trace = encode_side(&params.right, &cos_right, false, params.variant.mode)?;
    let mut enc = encoder_output(&left_trace, h);
    enc.extend(encoder_output(&right_trace, h));

    let enc_masked = match masks {
        Some(m) => apply_mask(&enc, &m.merge),
        None => enc.clone(),
    };
    let head = &params.head;
    let mut pre_h = matvec(&head.w_h, &enc_masked)?;
    for (p, b) in pre_h.iter_mut().zip(head.b_h.iter()) {
        *p += b;
    }
    let h_cl: Vec1 = pre_h.iter().map(|&v| relu(v)).collect();
    let h_masked = match masks {
        Some(m) => apply_mask(&h_cl, &m.fc),
        None => h_cl.clone(),
    };
    let logit: f64 =
        h_masked.iter().zip(head.w_out.iter()).map(|(a, b)| a * b).sum::<f64>() + head.b_out;
    let y_hat = sigmoid(logit);

    Ok(ForwardTrace {
        sense_id,
        sense_masked,
        left_ids: window.left_ids.clone(),
        right_ids: window.right_ids.clone(),
        words_left_masked,
        words_right_masked,
        cos_left,
        cos_right,
        left_trace,
        right_trace,
        enc,
        enc_masked,
        pre_h,
        h_cl,
        h_masked,
        logit,
        y_hat,
    })
}

/// Inference-mode score for one candidate sense.
pub fn score_sense(params: &NetworkParams, sense_id: usize, window: &ContextWindow) -> Result<f64> {
    Ok(forward(params, sense_id, window, None)?.y_hat)
}

// ---------------------------------------------------------------------------
// Model file: magic "SBW1", version byte, variant byte, LE u32 header
// (d, |V|, sense count, hidden, L, R), vocab tokens, inventory records,
// weight blocks as row-major little-endian f32.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"SBW1";
const VERSION: u8 = 1;

fn write_u32(w: &mut impl Write, v: usize) -> Result<()> {
    w.write_all(&(v as u32).to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_f32s(w: &mut impl Write, data: &[f64]) -> Result<()> {
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("truncated model file".into())
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)?;
    if len > 1 << 24 {
        return Err(Error::Format(format!("unreasonable string length {len}")));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("invalid UTF-8 in model file".into()))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec1> {
    let mut buf = vec![0u8; 4 * n];
    read_exact(r, &mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn mode_byte(m: ArchMode) -> u8 {
    match m {
        ArchMode::Standard => 0,
        ArchMode::ReversedDirections => 1,
        ArchMode::ShuffledContext => 2,
        ArchMode::FcInsteadOfBlstm => 3,
    }
}

fn mode_from_byte(b: u8) -> Result<ArchMode> {
    Ok(match b {
        0 => ArchMode::Standard,
        1 => ArchMode::ReversedDirections,
        2 => ArchMode::ShuffledContext,
        3 => ArchMode::FcInsteadOfBlstm,
        _ => return Err(Error::Format(format!("unknown variant byte {b}"))),
    })
}

fn write_encoder(w: &mut impl Write, enc: &EncoderParams) -> Result<()> {
    match enc {
        EncoderParams::Lstm(p) => {
            write_f32s(w, &p.wx.data)?;
            write_f32s(w, &p.wh.data)?;
            write_f32s(w, &p.b)?;
        }
        EncoderParams::Dense { w: wm, b } => {
            write_f32s(w, &wm.data)?;
            write_f32s(w, b)?;
        }
    }
    Ok(())
}

fn read_encoder(
    r: &mut impl Read,
    mode: ArchMode,
    hidden: usize,
    side_len: usize,
) -> Result<EncoderParams> {
    match mode {
        ArchMode::FcInsteadOfBlstm => {
            let w = Mat2::from_vec(hidden, side_len, read_f32s(r, hidden * side_len)?)?;
            let b = read_f32s(r, hidden)?;
            Ok(EncoderParams::Dense { w, b })
        }
        _ => {
            let wx = Mat2::from_vec(4 * hidden, 1, read_f32s(r, 4 * hidden)?)?;
            let wh = Mat2::from_vec(4 * hidden, hidden, read_f32s(r, 4 * hidden * hidden)?)?;
            let b = read_f32s(r, 4 * hidden)?;
            Ok(EncoderParams::Lstm(LstmParams { wx, wh, b, hidden, input_dim: 1 }))
        }
    }
}

pub fn save_model(params: &NetworkParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, mode_byte(params.variant.mode)])?;
    write_u32(&mut w, params.dim())?;
    write_u32(&mut w, params.vocab.size())?;
    write_u32(&mut w, params.inventory.num_senses())?;
    write_u32(&mut w, params.hidden())?;
    write_u32(&mut w, params.variant.left_len)?;
    write_u32(&mut w, params.variant.right_len)?;
    for tok in params.vocab.tokens() {
        write_str(&mut w, tok)?;
    }
    write_u32(&mut w, params.inventory.num_lexelts())?;
    for lex in params.inventory.lexelts() {
        write_str(&mut w, &lex.name)?;
        write_u32(&mut w, lex.senses.len())?;
        for s in &lex.senses {
            write_str(&mut w, s)?;
        }
    }
    write_f32s(&mut w, &params.word_table.matrix.data)?;
    write_f32s(&mut w, &params.sense_table.matrix.data)?;
    write_encoder(&mut w, &params.left)?;
    write_encoder(&mut w, &params.right)?;
    write_f32s(&mut w, &params.head.w_h.data)?;
    write_f32s(&mut w, &params.head.b_h)?;
    write_f32s(&mut w, &params.head.w_out)?;
    write_f32s(&mut w, &[params.head.b_out])?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NetworkParams> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut vb = [0u8; 2];
    read_exact(&mut r, &mut vb)?;
    if vb[0] != VERSION {
        return Err(Error::Format(format!("unsupported format version {}", vb[0])));
    }
    let mode = mode_from_byte(vb[1])?;
    let d = read_u32(&mut r)?;
    let vocab_size = read_u32(&mut r)?;
    let n_senses = read_u32(&mut r)?;
    let hidden = read_u32(&mut r)?;
    let left_len = read_u32(&mut r)?;
    let right_len = read_u32(&mut r)?;

    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        tokens.push(read_str(&mut r)?);
    }
    let vocab = Vocabulary::from_tokens(tokens);

    let n_lexelts = read_u32(&mut r)?;
    let mut inventory = SenseInventory::new();
    for _ in 0..n_lexelts {
        let name = read_str(&mut r)?;
        let n = read_u32(&mut r)?;
        for _ in 0..n {
            let s = read_str(&mut r)?;
            inventory.add_sense(&name, &s);
        }
    }
    if inventory.num_senses() != n_senses {
        return Err(Error::Format(format!(
            "inventory sense count {} != header {}",
            inventory.num_senses(),
            n_senses
        )));
    }

    let word_matrix = Mat2::from_vec(d, vocab_size, read_f32s(&mut r, d * vocab_size)?)?;
    let sense_matrix = Mat2::from_vec(d, n_senses, read_f32s(&mut r, d * n_senses)?)?;
    let left = read_encoder(&mut r, mode, hidden, left_len)?;
    let right = read_encoder(&mut r, mode, hidden, right_len)?;
    let w_h = Mat2::from_vec(hidden, 2 * hidden, read_f32s(&mut r, hidden * 2 * hidden)?)?;
    let b_h = read_f32s(&mut r, hidden)?;
    let w_out = read_f32s(&mut r, hidden)?;
    let b_out = read_f32s(&mut r, 1)?[0];

    Ok(NetworkParams {
        word_table: EmbeddingTable { matrix: word_matrix, kind: TableKind::Word },
        sense_table: EmbeddingTable { matrix: sense_matrix, kind: TableKind::Sense },
        left,
        right,
        head: HeadParams { w_h, b_h, w_out, b_out },
        variant: ArchVariant { mode, left_len, right_len },
        vocab,
        inventory,
    })
}

/// All-PAD window of the given lengths (test helper and default).
pub fn empty_window(left_len: usize, right_len: usize) -> ContextWindow {
    ContextWindow { left_ids: vec![PAD_ID; left_len], right_ids: vec![PAD_ID; right_len] }
}
