//! Stacked LSTM language model over chord-token ids.
//!
//! Parameters live in one flat `Vec<f64>` so that the optimizer, artifact
//! writer and gradient checks can treat them uniformly. Layout:
//!
//! ```text
//! embedding   [vocab x embed]
//! per layer   w_x [4*hidden x input], w_h [4*hidden x hidden], b [4*hidden]
//! output      w [vocab x hidden], b [vocab]
//! ```
//!
//! Gate blocks inside every `4*hidden` dimension are ordered input, forget,
//! cell candidate, output.

use rand::Rng;

use super::masked_logits;

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    w_x: usize,
    w_h: usize,
    b: usize,
    input: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    embed: usize,
    layers: Vec<LayerOffsets>,
    out_w: usize,
    out_b: usize,
    total: usize,
}

impl Layout {
    fn new(vocab: usize, embed: usize, hidden: usize, layers: usize) -> Self {
        let mut cursor = vocab * embed;
        let mut offsets = Vec::with_capacity(layers);
        for l in 0..layers {
            let input = if l == 0 { embed } else { hidden };
            let w_x = cursor;
            let w_h = w_x + 4 * hidden * input;
            let b = w_h + 4 * hidden * hidden;
            cursor = b + 4 * hidden;
            offsets.push(LayerOffsets { w_x, w_h, b, input });
        }
        let out_w = cursor;
        let out_b = out_w + vocab * hidden;
        Self {
            embed: 0,
            layers: offsets,
            out_w,
            out_b,
            total: out_b + vocab,
        }
    }
}

/// Recurrent state carried between decoding steps.
#[derive(Debug, Clone)]
pub struct LstmState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LstmNet {
    vocab_size: usize,
    embed_dim: usize,
    hidden_dim: usize,
    layers: usize,
    layout: Layout,
    params: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += w * x` for a row-major `w` of shape `[out.len() x x.len()]`.
#[inline]
fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

/// `out += w^T * y` for a row-major `w` of shape `[y.len() x out.len()]`.
#[inline]
fn matvec_t_acc(w: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&yi, row) in y.iter().zip(w.chunks_exact(cols)) {
        if yi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
}

/// `g += y x^T` for a row-major gradient of shape `[y.len() x x.len()]`.
#[inline]
fn outer_acc(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (&yi, row) in y.iter().zip(g.chunks_exact_mut(cols)) {
        if yi == 0.0 {
            continue;
        }
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += yi * xv;
        }
    }
}

struct StepCache {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `[i | f | g | o]`.
    gates: Vec<f64>,
    c: Vec<f64>,
    /// Inverted-dropout mask applied to this layer's output (1.0 when off).
    mask: Vec<f64>,
}

impl LstmNet {
    pub fn new<R: Rng>(
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        layers: usize,
        rng: &mut R,
    ) -> Self {
        let layout = Layout::new(vocab_size, embed_dim, hidden_dim, layers);
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut params: Vec<f64> = (0..layout.total)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        for l in &layout.layers {
            // forget-gate bias starts at one
            params[l.b + hidden_dim..l.b + 2 * hidden_dim].fill(1.0);
        }
        params[layout.out_b..layout.total].fill(0.0);
        Self {
            vocab_size,
            embed_dim,
            hidden_dim,
            layers,
            layout,
            params,
        }
    }

    pub fn from_params(
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        layers: usize,
        params: Vec<f64>,
    ) -> Option<Self> {
        let layout = Layout::new(vocab_size, embed_dim, hidden_dim, layers);
        (params.len() == layout.total).then_some(Self {
            vocab_size,
            embed_dim,
            hidden_dim,
            layers,
            layout,
            params,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Zeroes the output projection so every step predicts the uniform
    /// distribution over live tokens.
    pub fn reset_output_layer(&mut self) {
        self.params[self.layout.out_w..self.layout.total].fill(0.0);
    }

    pub fn init_state(&self) -> LstmState {
        LstmState {
            h: vec![vec![0.0; self.hidden_dim]; self.layers],
            c: vec![vec![0.0; self.hidden_dim]; self.layers],
        }
    }

    fn embedding(&self, token: u32) -> &[f64] {
        let e = self.embed_dim;
        let start = self.layout.embed + token as usize * e;
        &self.params[start..start + e]
    }

    /// One LSTM cell update. Returns activated gates and the new cell state;
    /// the new hidden state is written to `h_out`.
    fn cell(
        &self,
        layer: usize,
        input: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        h_out: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim;
        let off = self.layout.layers[layer];
        let p = &self.params;
        let mut z = p[off.b..off.b + 4 * hd].to_vec();
        matvec_acc(&p[off.w_x..off.w_x + 4 * hd * off.input], input, &mut z);
        matvec_acc(&p[off.w_h..off.w_h + 4 * hd * hd], h_prev, &mut z);
        let mut c = vec![0.0; hd];
        for k in 0..hd {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hd + k]);
            let g = z[2 * hd + k].tanh();
            let o = sigmoid(z[3 * hd + k]);
            z[k] = i;
            z[hd + k] = f;
            z[2 * hd + k] = g;
            z[3 * hd + k] = o;
            c[k] = f * c_prev[k] + i * g;
            h_out[k] = o * c[k].tanh();
        }
        (z, c)
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        let mut logits = self.params[self.layout.out_b..self.layout.total].to_vec();
        matvec_acc(
            &self.params[self.layout.out_w..self.layout.out_b],
            h,
            &mut logits,
        );
        masked_logits(&mut logits);
        logits
    }

    /// Consumes `token` and returns logits for the next token.
    pub fn step(&self, state: &mut LstmState, token: u32) -> Vec<f64> {
        let mut input = self.embedding(token).to_vec();
        for l in 0..self.layers {
            let mut h = vec![0.0; self.hidden_dim];
            let (_, c) = self.cell(l, &input, &state.h[l], &state.c[l], &mut h);
            state.c[l] = c;
            state.h[l] = h.clone();
            input = h;
        }
        self.project(&input)
    }

    /// Summed next-token cross-entropy over `seq` and, when `grad` is given,
    /// its gradient accumulated (scaled by `scale`) into `grad`. Dropout with
    /// rate `dropout` is applied to every layer output when `rng` is given.
    pub fn sequence_loss<R: Rng>(
        &self,
        seq: &[u32],
        grad: Option<(&mut [f64], f64)>,
        dropout: f64,
        rng: Option<&mut R>,
    ) -> f64 {
        let hd = self.hidden_dim;
        let steps = seq.len().saturating_sub(1);
        let layers = self.layers;
        let keep = 1.0 - dropout;
        let mut rng = rng;
        let mut h: Vec<Vec<f64>> = vec![vec![0.0; hd]; layers];
        let mut c: Vec<Vec<f64>> = vec![vec![0.0; hd]; layers];
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(steps);
        let mut probs_per_step: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut top_outputs: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut loss = 0.0;

        for t in 0..steps {
            let mut input = self.embedding(seq[t]).to_vec();
            let mut step_caches = Vec::with_capacity(layers);
            for l in 0..layers {
                let mut h_new = vec![0.0; hd];
                let (gates, c_new) = self.cell(l, &input, &h[l], &c[l], &mut h_new);
                let mask: Vec<f64> = match rng.as_deref_mut() {
                    Some(r) if dropout > 0.0 => (0..hd)
                        .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect(),
                    _ => vec![1.0; hd],
                };
                let out: Vec<f64> = h_new.iter().zip(&mask).map(|(a, m)| a * m).collect();
                step_caches.push(StepCache {
                    input: std::mem::replace(&mut input, out),
                    h_prev: std::mem::replace(&mut h[l], h_new),
                    c_prev: std::mem::replace(&mut c[l], c_new.clone()),
                    gates,
                    c: c_new,
                    mask,
                });
            }
            let logits = self.project(&input);
            let probs = super::softmax(&logits, 1.0);
            loss -= probs[seq[t + 1] as usize].ln();
            probs_per_step.push(probs);
            top_outputs.push(input);
            caches.push(step_caches);
        }

        let Some((grad, scale)) = grad else {
            return loss;
        };
        let v = self.vocab_size;
        let lay = &self.layout;
        let p = &self.params;
        let mut dh_next: Vec<Vec<f64>> = vec![vec![0.0; hd]; layers];
        let mut dc_next: Vec<Vec<f64>> = vec![vec![0.0; hd]; layers];

        for t in (0..steps).rev() {
            let mut dlogits = probs_per_step[t].clone();
            dlogits[seq[t + 1] as usize] -= 1.0;
            for d in dlogits.iter_mut() {
                *d *= scale;
            }
            outer_acc(&mut grad[lay.out_w..lay.out_b], &dlogits, &top_outputs[t]);
            for (g, d) in grad[lay.out_b..lay.total].iter_mut().zip(&dlogits) {
                *g += d;
            }
            let mut d_out = vec![0.0; hd];
            matvec_t_acc(&p[lay.out_w..lay.out_w + v * hd], &dlogits, &mut d_out);

            for l in (0..layers).rev() {
                let cache = &caches[t][l];
                let off = lay.layers[l];
                // gradient w.r.t. the pre-dropout hidden output
                let dh: Vec<f64> = (0..hd)
                    .map(|k| d_out[k] * cache.mask[k] + dh_next[l][k])
                    .collect();
                let mut dz = vec![0.0; 4 * hd];
                for k in 0..hd {
                    let i = cache.gates[k];
                    let f = cache.gates[hd + k];
                    let g = cache.gates[2 * hd + k];
                    let o = cache.gates[3 * hd + k];
                    let tc = cache.c[k].tanh();
                    let dc = dh[k] * o * (1.0 - tc * tc) + dc_next[l][k];
                    dz[k] = dc * g * i * (1.0 - i);
                    dz[hd + k] = dc * cache.c_prev[k] * f * (1.0 - f);
                    dz[2 * hd + k] = dc * i * (1.0 - g * g);
                    dz[3 * hd + k] = dh[k] * tc * o * (1.0 - o);
                    dc_next[l][k] = dc * f;
                }
                outer_acc(
                    &mut grad[off.w_x..off.w_x + 4 * hd * off.input],
                    &dz,
                    &cache.input,
                );
                outer_acc(&mut grad[off.w_h..off.w_h + 4 * hd * hd], &dz, &cache.h_prev);
                for (g, d) in grad[off.b..off.b + 4 * hd].iter_mut().zip(&dz) {
                    *g += d;
                }
                let mut dh_prev = vec![0.0; hd];
                matvec_t_acc(&p[off.w_h..off.w_h + 4 * hd * hd], &dz, &mut dh_prev);
                dh_next[l] = dh_prev;
                let mut d_in = vec![0.0; off.input];
                matvec_t_acc(&p[off.w_x..off.w_x + 4 * hd * off.input], &dz, &mut d_in);
                d_out = d_in;
            }
            let e = self.embed_dim;
            let start = lay.embed + seq[t] as usize * e;
            for (g, d) in grad[start..start + e].iter_mut().zip(&d_out) {
                *g += d;
            }
        }
        loss
    }
}
