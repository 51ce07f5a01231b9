//! From-scratch 1-D bidirectional LSTM: forward pass, exact backpropagation
//! through time, a shared softmax output layer, and the binary checkpoint
//! codec.
//!
//! Gate order everywhere (init, updates, checkpoints) is input, forget,
//! cell-candidate, output. The variant is the classic one with forget gates
//! and no peepholes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::segment::FrameSequence;

/// Checkpoint magic string.
pub const CHECKPOINT_MAGIC: &[u8; 6] = b"BLSTM1";
/// Checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

const GATES: usize = 4;
const GATE_INPUT: usize = 0;
const GATE_FORGET: usize = 1;
const GATE_CELL: usize = 2;
const GATE_OUTPUT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetError {
    /// Hidden size must be >= 1 and alphabet size >= 2.
    InvalidSize { hidden: usize, classes: usize },
    /// Frame width or gradient shape does not match the model.
    DimensionMismatch { expected: usize, got: usize },
    /// Truncated or malformed checkpoint bytes.
    Corrupt(String),
    /// Checkpoint written by a different format version.
    VersionMismatch { expected: u32, got: u32 },
    /// Checkpoint belongs to a different alphabet.
    FingerprintMismatch { expected: u64, got: u64 },
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::InvalidSize { hidden, classes } => {
                write!(f, "invalid model size: hidden={hidden}, classes={classes}")
            }
            NetError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            NetError::Corrupt(msg) => write!(f, "corrupt checkpoint: {msg}"),
            NetError::VersionMismatch { expected, got } => {
                write!(f, "checkpoint version {got} (supported: {expected})")
            }
            NetError::FingerprintMismatch { expected, got } => write!(
                f,
                "alphabet fingerprint mismatch: checkpoint {got:#018x}, current {expected:#018x}"
            ),
        }
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// y += M x
    fn matvec_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *out += acc;
        }
    }

    /// y += M^T x
    fn matvec_t_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (out, w) in y.iter_mut().zip(row) {
                *out += xr * w;
            }
        }
    }

    /// M += y (outer) x
    fn outer_add(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (out, v) in row.iter_mut().zip(x) {
                *out += yr * v;
            }
        }
    }
}

/// All trainable parameters of one LSTM direction: per-gate input weights
/// `W_g` (H x input), recurrent weights `R_g` (H x H), and biases `b_g` (H).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w: [Matrix; 4],
    pub r: [Matrix; 4],
    pub b: [Vec<f64>; 4],
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmLayerParams {
            input_size,
            hidden_size,
            w: core::array::from_fn(|_| Matrix::zeros(hidden_size, input_size)),
            r: core::array::from_fn(|_| Matrix::zeros(hidden_size, hidden_size)),
            b: core::array::from_fn(|_| vec![0.0; hidden_size]),
        }
    }

    /// Tensors in canonical (checkpoint) order: W_i..W_o, R_i..R_o, b_i..b_o.
    fn tensors(&self) -> [&Vec<f64>; 12] {
        [
            &self.w[0].data,
            &self.w[1].data,
            &self.w[2].data,
            &self.w[3].data,
            &self.r[0].data,
            &self.r[1].data,
            &self.r[2].data,
            &self.r[3].data,
            &self.b[0],
            &self.b[1],
            &self.b[2],
            &self.b[3],
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 12] {
        let [w0, w1, w2, w3] = &mut self.w;
        let [r0, r1, r2, r3] = &mut self.r;
        let [b0, b1, b2, b3] = &mut self.b;
        [
            &mut w0.data,
            &mut w1.data,
            &mut w2.data,
            &mut w3.data,
            &mut r0.data,
            &mut r1.data,
            &mut r2.data,
            &mut r3.data,
            b0,
            b1,
            b2,
            b3,
        ]
    }
}

/// Forward and backward LSTM layers plus the shared softmax output layer
/// mapping `concat(h_fwd, h_bwd)` to alphabet logits.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmModel {
    pub forward: LstmLayerParams,
    pub backward: LstmLayerParams,
    /// K x 2H.
    pub output_w: Matrix,
    /// K.
    pub output_b: Vec<f64>,
    /// Fingerprint of the alphabet this model was initialized against.
    pub alphabet_fingerprint: u64,
}

/// Parameter-shaped container for gradients and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmGradients {
    pub forward: LstmLayerParams,
    pub backward: LstmLayerParams,
    pub output_w: Matrix,
    pub output_b: Vec<f64>,
}

impl BlstmModel {
    pub fn input_size(&self) -> usize {
        self.forward.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size
    }

    /// Alphabet size including the blank.
    pub fn class_count(&self) -> usize {
        self.output_b.len()
    }

    /// All tensors in checkpoint order: forward layer, backward layer,
    /// output weights, output bias.
    fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut all: Vec<&Vec<f64>> = Vec::with_capacity(26);
        all.extend(self.forward.tensors());
        all.extend(self.backward.tensors());
        all.push(&self.output_w.data);
        all.push(&self.output_b);
        all
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut all: Vec<&mut Vec<f64>> = Vec::with_capacity(26);
        all.extend(self.forward.tensors_mut());
        all.extend(self.backward.tensors_mut());
        all.push(&mut self.output_w.data);
        all.push(&mut self.output_b);
        all
    }

    /// Momentum-SGD step: `v = momentum*v - lr*g; p += v`, componentwise,
    /// after clipping each gradient component to `[-clip, clip]`.
    pub fn apply_update(
        &mut self,
        velocity: &mut BlstmGradients,
        grads: &BlstmGradients,
        learning_rate: f64,
        momentum: f64,
        clip: f64,
    ) {
        for ((p, v), g) in self
            .tensors_mut()
            .into_iter()
            .zip(velocity.tensors_mut())
            .zip(grads.tensors())
        {
            for ((pv, vv), gv) in p.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                let clipped = gv.clamp(-clip, clip);
                *vv = momentum * *vv - learning_rate * clipped;
                *pv += *vv;
            }
        }
    }
}

impl BlstmGradients {
    pub fn zeros_like(model: &BlstmModel) -> Self {
        BlstmGradients {
            forward: LstmLayerParams::zeros(model.input_size(), model.hidden_size()),
            backward: LstmLayerParams::zeros(model.input_size(), model.hidden_size()),
            output_w: Matrix::zeros(model.output_w.rows, model.output_w.cols),
            output_b: vec![0.0; model.output_b.len()],
        }
    }

    fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut all: Vec<&Vec<f64>> = Vec::with_capacity(26);
        all.extend(self.forward.tensors());
        all.extend(self.backward.tensors());
        all.push(&self.output_w.data);
        all.push(&self.output_b);
        all
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut all: Vec<&mut Vec<f64>> = Vec::with_capacity(26);
        all.extend(self.forward.tensors_mut());
        all.extend(self.backward.tensors_mut());
        all.push(&mut self.output_w.data);
        all.push(&mut self.output_b);
        all
    }

    /// Accumulate another gradient of the same shape.
    pub fn add_assign(&mut self, other: &BlstmGradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (av, bv) in a.iter_mut().zip(b.iter()) {
                *av += bv;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Largest absolute component; used by tests and diagnostics.
    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .into_iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, &v| m.max(math::abs(v)))
    }
}

/// Uniform `[-0.1, 0.1]` weights drawn in checkpoint tensor order; biases
/// zero except forget-gate biases at 1.0. Deterministic per seed.
pub fn init_model(
    input_size: usize,
    hidden_size: usize,
    alphabet_size: usize,
    seed: u64,
) -> Result<BlstmModel, NetError> {
    if input_size == 0 || hidden_size == 0 || alphabet_size < 2 {
        return Err(NetError::InvalidSize {
            hidden: hidden_size,
            classes: alphabet_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = |rng: &mut ChaCha8Rng| {
        let mut p = LstmLayerParams::zeros(input_size, hidden_size);
        for g in 0..GATES {
            for v in p.w[g].data.iter_mut() {
                *v = rng.gen_range(-0.1..=0.1);
            }
        }
        for g in 0..GATES {
            for v in p.r[g].data.iter_mut() {
                *v = rng.gen_range(-0.1..=0.1);
            }
        }
        for v in p.b[GATE_FORGET].iter_mut() {
            *v = 1.0;
        }
        p
    };
    let forward = layer(&mut rng);
    let backward = layer(&mut rng);
    let mut output_w = Matrix::zeros(alphabet_size, 2 * hidden_size);
    for v in output_w.data.iter_mut() {
        *v = rng.gen_range(-0.1..=0.1);
    }
    Ok(BlstmModel {
        forward,
        backward,
        output_w,
        output_b: vec![0.0; alphabet_size],
        alphabet_fingerprint: 0,
    })
}

/// Per-step activations cached by a directional pass, rows in step order.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: usize,
    hidden_size: usize,
    /// Gate activations after their nonlinearities, each `steps x H`.
    gates: [Vec<f64>; 4],
    /// Cell states, `steps x H`.
    cell: Vec<f64>,
    /// Hidden states, `steps x H`.
    hidden: Vec<f64>,
}

impl LstmCache {
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Hidden state after step `s`.
    pub fn hidden_at(&self, s: usize) -> &[f64] {
        &self.hidden[s * self.hidden_size..(s + 1) * self.hidden_size]
    }

    pub fn hidden_states(&self) -> &[f64] {
        &self.hidden
    }

    fn row(buf: &[f64], h: usize, s: usize) -> &[f64] {
        &buf[s * h..(s + 1) * h]
    }
}

/// Which way a directional pass walks the frame sequence.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Walk {
    Natural,
    Reversed,
}

impl Walk {
    #[inline]
    fn frame_index(self, step: usize, total: usize) -> usize {
        match self {
            Walk::Natural => step,
            Walk::Reversed => total - 1 - step,
        }
    }
}

fn lstm_forward_walk(
    params: &LstmLayerParams,
    frames: &FrameSequence,
    walk: Walk,
) -> Result<LstmCache, NetError> {
    if frames.len() > 0 && frames.frame_len() != params.input_size {
        return Err(NetError::DimensionMismatch {
            expected: params.input_size,
            got: frames.frame_len(),
        });
    }
    let h = params.hidden_size;
    let t_total = frames.len();
    let mut cache = LstmCache {
        steps: t_total,
        hidden_size: h,
        gates: core::array::from_fn(|_| vec![0.0; t_total * h]),
        cell: vec![0.0; t_total * h],
        hidden: vec![0.0; t_total * h],
    };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut pre = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    for step in 0..t_total {
        let x = frames.frame(walk.frame_index(step, t_total));
        for g in 0..GATES {
            pre[g].copy_from_slice(&params.b[g]);
            params.w[g].matvec_add(x, &mut pre[g]);
            params.r[g].matvec_add(&h_prev, &mut pre[g]);
        }
        let row = step * h;
        for j in 0..h {
            let i_g = math::sigmoid(pre[GATE_INPUT][j]);
            let f_g = math::sigmoid(pre[GATE_FORGET][j]);
            let z_g = math::tanh(pre[GATE_CELL][j]);
            let o_g = math::sigmoid(pre[GATE_OUTPUT][j]);
            let c = f_g * c_prev[j] + i_g * z_g;
            let hv = o_g * math::tanh(c);
            cache.gates[GATE_INPUT][row + j] = i_g;
            cache.gates[GATE_FORGET][row + j] = f_g;
            cache.gates[GATE_CELL][row + j] = z_g;
            cache.gates[GATE_OUTPUT][row + j] = o_g;
            cache.cell[row + j] = c;
            cache.hidden[row + j] = hv;
        }
        h_prev.copy_from_slice(&cache.hidden[row..row + h]);
        c_prev.copy_from_slice(&cache.cell[row..row + h]);
    }
    Ok(cache)
}

/// Run one LSTM direction over the frames in their natural order, with
/// `h_0 = c_0 = 0`. The cache holds everything exact backprop needs.
pub fn lstm_forward(
    params: &LstmLayerParams,
    frames: &FrameSequence,
) -> Result<LstmCache, NetError> {
    lstm_forward_walk(params, frames, Walk::Natural)
}

/// Exact BPTT for one direction. `dh_steps` is the external gradient on
/// each step's hidden state, rows in step order.
fn lstm_backward_walk(
    params: &LstmLayerParams,
    frames: &FrameSequence,
    cache: &LstmCache,
    dh_steps: &[f64],
    walk: Walk,
    grads: &mut LstmLayerParams,
) {
    let h = params.hidden_size;
    let t_total = cache.steps;
    debug_assert_eq!(dh_steps.len(), t_total * h);
    let mut dh_next = vec![0.0; h]; // recurrent gradient flowing from step s+1
    let mut dc_next = vec![0.0; h];
    let mut dpre = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    for step in (0..t_total).rev() {
        let row = step * h;
        let x = frames.frame(walk.frame_index(step, t_total));
        let h_prev = if step == 0 {
            None
        } else {
            Some(LstmCache::row(&cache.hidden, h, step - 1))
        };
        let c_prev = if step == 0 {
            None
        } else {
            Some(LstmCache::row(&cache.cell, h, step - 1))
        };
        for j in 0..h {
            let i_g = cache.gates[GATE_INPUT][row + j];
            let f_g = cache.gates[GATE_FORGET][row + j];
            let z_g = cache.gates[GATE_CELL][row + j];
            let o_g = cache.gates[GATE_OUTPUT][row + j];
            let c = cache.cell[row + j];
            let tc = math::tanh(c);
            let dh = dh_steps[row + j] + dh_next[j];
            let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
            let cp = c_prev.map_or(0.0, |r| r[j]);
            dpre[GATE_OUTPUT][j] = dh * tc * o_g * (1.0 - o_g);
            dpre[GATE_FORGET][j] = dc * cp * f_g * (1.0 - f_g);
            dpre[GATE_INPUT][j] = dc * z_g * i_g * (1.0 - i_g);
            dpre[GATE_CELL][j] = dc * i_g * (1.0 - z_g * z_g);
            dc_next[j] = dc * f_g;
        }
        for v in dh_next.iter_mut() {
            *v = 0.0;
        }
        for g in 0..GATES {
            grads.w[g].outer_add(&dpre[g], x);
            if let Some(hp) = h_prev {
                grads.r[g].outer_add(&dpre[g], hp);
            }
            for (bv, dv) in grads.b[g].iter_mut().zip(&dpre[g]) {
                *bv += dv;
            }
            params.r[g].matvec_t_add(&dpre[g], &mut dh_next);
        }
    }
}

/// Per-step class posteriors, each row a softmax over the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSequence {
    classes: usize,
    data: Vec<f64>,
}

impl PosteriorSequence {
    /// Wrap raw rows; each must sum to 1 within 1e-9 with entries in [0, 1].
    pub fn from_flat(data: Vec<f64>, classes: usize) -> Option<Self> {
        if classes == 0 || data.len() % classes != 0 {
            return None;
        }
        for row in data.chunks_exact(classes) {
            let sum: f64 = row.iter().sum();
            if math::abs(sum - 1.0) > 1e-9 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return None;
            }
        }
        Some(PosteriorSequence { data, classes })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }
}

/// Caches from a bidirectional forward pass, consumed by [`blstm_backward`].
#[derive(Debug, Clone)]
pub struct BlstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
    /// Pre-softmax outputs, `T x K`; exposed for gradient checking.
    logits: Vec<f64>,
}

impl BlstmCache {
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

/// Bidirectional forward pass: the forward layer walks frames in order, the
/// backward layer in reverse; per step `t` the output layer sees
/// `concat(h_fwd[t], h_bwd[t])` and produces softmax posteriors.
pub fn blstm_forward(
    model: &BlstmModel,
    frames: &FrameSequence,
) -> Result<(PosteriorSequence, BlstmCache), NetError> {
    let fwd = lstm_forward_walk(&model.forward, frames, Walk::Natural)?;
    let bwd = lstm_forward_walk(&model.backward, frames, Walk::Reversed)?;
    let h = model.hidden_size();
    let k = model.class_count();
    let t_total = frames.len();
    let mut logits = vec![0.0; t_total * k];
    let mut data = vec![0.0; t_total * k];
    let mut joint = vec![0.0; 2 * h];
    for t in 0..t_total {
        joint[..h].copy_from_slice(fwd.hidden_at(t));
        // Backward step T-1-t consumed frame t.
        joint[h..].copy_from_slice(bwd.hidden_at(t_total - 1 - t));
        let row = &mut logits[t * k..(t + 1) * k];
        row.copy_from_slice(&model.output_b);
        model.output_w.matvec_add(&joint, row);
        softmax_into(row, &mut data[t * k..(t + 1) * k]);
    }
    Ok((
        PosteriorSequence { classes: k, data },
        BlstmCache { fwd, bwd, logits },
    ))
}

/// Stable softmax with max subtraction.
fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        let e = math::exp(l - max);
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Exact gradients of a scalar loss with the given per-logit derivatives
/// (`T x K`), via backpropagation through both directions.
pub fn blstm_backward(
    model: &BlstmModel,
    frames: &FrameSequence,
    cache: &BlstmCache,
    logit_gradient: &[f64],
) -> Result<BlstmGradients, NetError> {
    let h = model.hidden_size();
    let k = model.class_count();
    let t_total = frames.len();
    if cache.fwd.steps() != t_total || logit_gradient.len() != t_total * k {
        return Err(NetError::DimensionMismatch {
            expected: t_total * k,
            got: logit_gradient.len(),
        });
    }
    let mut grads = BlstmGradients::zeros_like(model);
    let mut dh_fwd = vec![0.0; t_total * h];
    let mut dh_bwd = vec![0.0; t_total * h]; // indexed by backward step order
    let mut joint = vec![0.0; 2 * h];
    let mut djoint = vec![0.0; 2 * h];
    for t in 0..t_total {
        let dl = &logit_gradient[t * k..(t + 1) * k];
        joint[..h].copy_from_slice(cache.fwd.hidden_at(t));
        joint[h..].copy_from_slice(cache.bwd.hidden_at(t_total - 1 - t));
        grads.output_w.outer_add(dl, &joint);
        for (b, d) in grads.output_b.iter_mut().zip(dl) {
            *b += d;
        }
        for v in djoint.iter_mut() {
            *v = 0.0;
        }
        model.output_w.matvec_t_add(dl, &mut djoint);
        dh_fwd[t * h..(t + 1) * h].copy_from_slice(&djoint[..h]);
        let s = t_total - 1 - t;
        dh_bwd[s * h..(s + 1) * h].copy_from_slice(&djoint[h..]);
    }
    lstm_backward_walk(
        &model.forward,
        frames,
        &cache.fwd,
        &dh_fwd,
        Walk::Natural,
        &mut grads.forward,
    );
    lstm_backward_walk(
        &model.backward,
        frames,
        &cache.bwd,
        &dh_bwd,
        Walk::Reversed,
        &mut grads.backward,
    );
    Ok(grads)
}

/// Serialize to the checkpoint layout: magic, version, dimensions,
/// alphabet fingerprint, then every tensor as little-endian f64 in
/// canonical order.
pub fn model_to_bytes(model: &BlstmModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.input_size() as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden_size() as u32).to_le_bytes());
    out.extend_from_slice(&(model.class_count() as u32).to_le_bytes());
    out.extend_from_slice(&model.alphabet_fingerprint.to_le_bytes());
    for tensor in model.tensors() {
        for v in tensor {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decode a checkpoint produced by [`model_to_bytes`], verifying magic,
/// version, and exact length.
pub fn model_from_bytes(bytes: &[u8]) -> Result<BlstmModel, NetError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], NetError> {
        if *pos + n > bytes.len() {
            return Err(NetError::Corrupt(String::from("truncated")));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let magic = take(&mut pos, CHECKPOINT_MAGIC.len())?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NetError::Corrupt(String::from("bad magic")));
    }
    let read_u32 = |pos: &mut usize| -> Result<u32, NetError> {
        let b = take(pos, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };
    let version = read_u32(&mut pos)?;
    if version != CHECKPOINT_VERSION {
        return Err(NetError::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            got: version,
        });
    }
    let input = read_u32(&mut pos)? as usize;
    let hidden = read_u32(&mut pos)? as usize;
    let classes = read_u32(&mut pos)? as usize;
    if input == 0 || hidden == 0 || classes < 2 {
        return Err(NetError::Corrupt(String::from("bad dimensions")));
    }
    let fp_bytes = take(&mut pos, 8)?;
    let fingerprint = u64::from_le_bytes(fp_bytes.try_into().expect("8 bytes"));

    let mut model = BlstmModel {
        forward: LstmLayerParams::zeros(input, hidden),
        backward: LstmLayerParams::zeros(input, hidden),
        output_w: Matrix::zeros(classes, 2 * hidden),
        output_b: vec![0.0; classes],
        alphabet_fingerprint: fingerprint,
    };
    let expected: usize = model.tensors().iter().map(|t| t.len()).sum();
    let have = (bytes.len() - pos) / 8;
    if bytes.len() - pos != expected * 8 {
        return Err(NetError::Corrupt(alloc::format!(
            "tensor payload holds {have} values, expected {expected}"
        )));
    }
    for tensor in model.tensors_mut() {
        for v in tensor.iter_mut() {
            let b = &bytes[pos..pos + 8];
            *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
            pos += 8;
        }
    }
    if model.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(NetError::Corrupt(String::from("non-finite parameter")));
    }
    Ok(model)
}

/// Guard a loaded model against a different alphabet.
pub fn verify_fingerprint(model: &BlstmModel, expected: u64) -> Result<(), NetError> {
    if model.alphabet_fingerprint != expected {
        return Err(NetError::FingerprintMismatch {
            expected,
            got: model.alphabet_fingerprint,
        });
    }
    Ok(())
}
