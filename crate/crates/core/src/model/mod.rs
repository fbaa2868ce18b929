//! Pointer-network parser: char-CNN and word/POS embeddings, a stacked
//! BiLSTM encoder, an LSTM decoder over `h_{i-1} + h_i + h_{i+1}`, a
//! biaffine pointer over candidate heads and a biaffine labeler.
//!
//! Matrices use the `x W` orientation (`[in, out]`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, LstmWeights, ParamId, ParamStore, Tensor, Var};
use crate::trees::Token;
use crate::{Error, Result};

mod io;
mod vocab;

pub use io::{load_pretrained, Pretrained};
pub use vocab::{Symbols, Vocabulary, PAD, UNKNOWN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub cnn_window: usize,
    pub cnn_filters: usize,
    pub encoder_layers: usize,
    pub encoder_size: usize,
    pub decoder_layers: usize,
    pub decoder_size: usize,
    /// Dimension of each of the word, character and POS embeddings.
    pub embed_dim: usize,
    pub dropout: f64,
    pub mlp_layers: usize,
    pub arc_mlp_size: usize,
    pub label_mlp_size: usize,
    pub use_pos: bool,
    pub use_pretrained: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cnn_window: 3,
            cnn_filters: 50,
            encoder_layers: 3,
            encoder_size: 512,
            decoder_layers: 1,
            decoder_size: 512,
            embed_dim: 100,
            dropout: 0.33,
            mlp_layers: 1,
            arc_mlp_size: 512,
            label_mlp_size: 128,
            use_pos: true,
            use_pretrained: false,
        }
    }
}

impl ModelConfig {
    /// A small profile that trains in seconds on toy corpora.
    pub fn tiny() -> Self {
        ModelConfig {
            cnn_filters: 16,
            encoder_layers: 1,
            encoder_size: 48,
            decoder_size: 48,
            embed_dim: 24,
            dropout: 0.0,
            arc_mlp_size: 48,
            label_mlp_size: 32,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("cnn_window", self.cnn_window),
            ("cnn_filters", self.cnn_filters),
            ("encoder_layers", self.encoder_layers),
            ("encoder_size", self.encoder_size),
            ("decoder_layers", self.decoder_layers),
            ("decoder_size", self.decoder_size),
            ("embed_dim", self.embed_dim),
            ("mlp_layers", self.mlp_layers),
            ("arc_mlp_size", self.arc_mlp_size),
            ("label_mlp_size", self.label_mlp_size),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Argument(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Argument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of the per-word input vector `x_i`.
    pub fn input_dim(&self) -> usize {
        self.cnn_filters + self.embed_dim + if self.use_pos { self.embed_dim } else { 0 }
    }
}

#[derive(Clone, Debug)]
struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
}

#[derive(Clone, Debug)]
struct Biaffine {
    w: ParamId,
    u: ParamId,
    v: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct Layout {
    word: ParamId,
    chars: ParamId,
    pos: Option<ParamId>,
    root: ParamId,
    filters: ParamId,
    filter_bias: ParamId,
    encoder: Vec<(LstmWeights, LstmWeights)>,
    decoder: Vec<LstmWeights>,
    arc_dep: Mlp,
    arc_head: Mlp,
    arc: Biaffine,
    label_dep: Mlp,
    label_head: Mlp,
    label: Biaffine,
}

/// Encoder output for one sentence: the embeddings `x_0..x_n` and the
/// states `h_0..h_n` as rows of a matrix (row 0 is the dummy root).
#[derive(Clone, Copy, Debug)]
pub struct EncodedSentence {
    pub x: Var,
    pub h: Var,
    pub len: usize,
}

/// Everything the scorers need, built once per sentence.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub enc: EncodedSentence,
    /// Decoder states `s_1..s_n`, shape `[n, decoder_size]`.
    pub s: Var,
    arc_dep: Var,
    arc_head: Var,
    label_dep: Var,
    label_head: Var,
}

pub struct Model {
    config: ModelConfig,
    vocab: Vocabulary,
    params: ParamStore,
    layout: Layout,
}

struct Init {
    store: ParamStore,
    rng: ChaCha8Rng,
}

impl Init {
    fn glorot(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.gen_range(-bound..bound)).collect();
        let t = Tensor::matrix(rows, cols, data).expect("sizes agree");
        self.store.add(name, t)
    }

    fn glorot_vector(&mut self, name: String, len: usize) -> ParamId {
        let bound = (6.0 / (1 + len) as f64).sqrt();
        let data = (0..len).map(|_| self.rng.gen_range(-bound..bound)).collect();
        self.store.add(name, Tensor::vector(data))
    }

    fn zeros(&mut self, name: String, len: usize) -> ParamId {
        self.store.add(name, Tensor::zeros(&[len]))
    }

    fn lstm(&mut self, prefix: &str, input: usize, hidden: usize) -> LstmWeights {
        LstmWeights {
            input: self.glorot(format!("{prefix}.w"), input, 4 * hidden),
            recurrent: self.glorot(format!("{prefix}.u"), hidden, 4 * hidden),
            bias: self.zeros(format!("{prefix}.b"), 4 * hidden),
            hidden,
        }
    }

    fn mlp(&mut self, prefix: &str, input: usize, size: usize, layers: usize) -> Mlp {
        let mut dims = input;
        let layers = (0..layers)
            .map(|k| {
                let w = self.glorot(format!("{prefix}.{k}.w"), dims, size);
                let b = self.zeros(format!("{prefix}.{k}.b"), size);
                dims = size;
                (w, b)
            })
            .collect();
        Mlp { layers }
    }
}

impl Model {
    /// Fresh model with randomly initialised weights.
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab.labels.is_empty() {
            return Err(Error::Argument("label inventory is empty".into()));
        }
        let mut init = Init {
            store: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let c = &config;
        let d = c.embed_dim;
        let word = init.glorot("embed.word".into(), vocab.words.len(), d);
        let chars = init.glorot("embed.char".into(), vocab.chars.len(), d);
        let pos = c
            .use_pos
            .then(|| init.glorot("embed.pos".into(), vocab.pos.len(), d));
        let root = init.glorot_vector("embed.root".into(), c.input_dim());
        let filters = init.glorot("cnn.filters".into(), c.cnn_window * d, c.cnn_filters);
        let filter_bias = init.zeros("cnn.bias".into(), c.cnn_filters);

        let mut encoder = Vec::new();
        let mut input = c.input_dim();
        for l in 0..c.encoder_layers {
            let fwd = init.lstm(&format!("encoder.{l}.fwd"), input, c.encoder_size);
            let bwd = init.lstm(&format!("encoder.{l}.bwd"), input, c.encoder_size);
            encoder.push((fwd, bwd));
            input = 2 * c.encoder_size;
        }
        let h_dim = 2 * c.encoder_size;
        let mut decoder = Vec::new();
        for l in 0..c.decoder_layers {
            decoder.push(init.lstm(&format!("decoder.{l}"), input, c.decoder_size));
            input = c.decoder_size;
        }

        let (a, m) = (c.arc_mlp_size, c.label_mlp_size);
        let arc_dep = init.mlp("arc.dep", c.decoder_size, a, c.mlp_layers);
        let arc_head = init.mlp("arc.head", h_dim, a, c.mlp_layers);
        let arc = Biaffine {
            w: init.glorot("arc.W".into(), a, a),
            u: init.glorot("arc.U".into(), a, 1),
            v: init.glorot("arc.V".into(), a, 1),
            b: init.zeros("arc.b".into(), 1),
        };
        let labels = vocab.labels.len();
        let label_dep = init.mlp("label.dep", c.decoder_size, m, c.mlp_layers);
        let label_head = init.mlp("label.head", h_dim, m, c.mlp_layers);
        let label = Biaffine {
            w: init.glorot("label.W".into(), m, labels * m),
            u: init.glorot("label.U".into(), m, labels),
            v: init.glorot("label.V".into(), m, labels),
            b: init.zeros("label.b".into(), labels),
        };

        Ok(Model {
            config,
            vocab,
            params: init.store,
            layout: Layout {
                word,
                chars,
                pos,
                root,
                filters,
                filter_bias,
                encoder,
                decoder,
                arc_dep,
                arc_head,
                arc,
                label_dep,
                label_head,
                label,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Ids of the biaffine arc weights `(W, U, V, b)`.
    pub fn arc_ids(&self) -> [ParamId; 4] {
        let a = &self.layout.arc;
        [a.w, a.u, a.v, a.b]
    }

    /// Ids of the biaffine label weights `(W, U, V, b)`.
    pub fn label_ids(&self) -> [ParamId; 4] {
        let a = &self.layout.label;
        [a.w, a.u, a.v, a.b]
    }

    /// Overwrite word-embedding rows with pretrained vectors. Returns the
    /// number of rows initialised.
    pub fn init_pretrained(&mut self, vectors: &Pretrained) -> Result<usize> {
        let d = self.config.embed_dim;
        if vectors.dim != d {
            return Err(Error::Dimension {
                op: "init_pretrained",
                left: vec![vectors.dim],
                right: vec![d],
            });
        }
        let mut hits = 0;
        let table = self.params.get_mut(self.layout.word).data_mut();
        for (word, vector) in &vectors.vectors {
            if let Some(id) = self.vocab.words.get(&word.to_lowercase()) {
                table[id * d..(id + 1) * d].copy_from_slice(vector);
                hits += 1;
            }
        }
        Ok(hits)
    }

    fn char_vector(&self, g: &mut Graph, token: &Token) -> Result<Var> {
        let w = self.config.cnn_window;
        let half = w / 2;
        let mut ids = vec![PAD; half];
        ids.extend(self.vocab.char_ids(token));
        ids.resize((ids.len() + half).max(w), PAD);
        let table = g.param(self.layout.chars);
        let chars = g.gather_rows(table, &ids)?;
        let filters = g.param(self.layout.filters);
        let pooled = g.conv1d_maxpool(chars, filters, w)?;
        let bias = g.param(self.layout.filter_bias);
        g.add(pooled, bias)
    }

    /// `x_1..x_n`: char-CNN output, lowercased word embedding and, if
    /// enabled, the POS embedding, concatenated. Unseen items use the
    /// unknown rows.
    pub fn embed(&self, g: &mut Graph, tokens: &[Token]) -> Result<Vec<Var>> {
        let words = g.param(self.layout.word);
        let word_ids: Vec<usize> = tokens.iter().map(|t| self.vocab.word_id(t)).collect();
        let word_rows = g.gather_rows(words, &word_ids)?;
        let pos_rows = match self.layout.pos {
            Some(pos) => {
                let table = g.param(pos);
                let ids: Vec<usize> = tokens.iter().map(|t| self.vocab.pos_id(t)).collect();
                Some(g.gather_rows(table, &ids)?)
            }
            None => None,
        };
        let mut out = Vec::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            let mut parts = vec![self.char_vector(g, token)?, g.row(word_rows, i)?];
            if let Some(rows) = pos_rows {
                parts.push(g.row(rows, i)?);
            }
            out.push(g.concat(&parts));
        }
        Ok(out)
    }

    fn lstm_pass(
        g: &mut Graph,
        weights: &LstmWeights,
        xs: Var,
        steps: usize,
        reverse: bool,
    ) -> Result<Vec<Var>> {
        let projected = weights.project(g, xs)?;
        let zero = g.constant(Tensor::zeros(&[weights.hidden]));
        let (mut h, mut c) = (zero, zero);
        let mut out = vec![zero; steps];
        let order: Vec<usize> = if reverse {
            (0..steps).rev().collect()
        } else {
            (0..steps).collect()
        };
        for t in order {
            let p = g.row(projected, t)?;
            (h, c) = weights.step(g, p, h, c)?;
            out[t] = h;
        }
        Ok(out)
    }

    /// Stacked BiLSTM over `x_0..x_n` with `x_0` the dedicated root vector.
    pub fn encode_sentence(&self, g: &mut Graph, tokens: &[Token]) -> Result<EncodedSentence> {
        if tokens.is_empty() {
            return Err(Error::Argument("cannot encode an empty sentence".into()));
        }
        let mut rows = vec![g.param(self.layout.root)];
        rows.extend(self.embed(g, tokens)?);
        let x = g.stack_rows(&rows)?;
        let steps = rows.len();
        let mut input = g.dropout(x, self.config.dropout)?;
        let layers = self.layout.encoder.len();
        for (l, (fwd, bwd)) in self.layout.encoder.iter().enumerate() {
            let f = Self::lstm_pass(g, fwd, input, steps, false)?;
            let b = Self::lstm_pass(g, bwd, input, steps, true)?;
            let joined: Vec<Var> = f.iter().zip(&b).map(|(&f, &b)| g.concat(&[f, b])).collect();
            input = g.stack_rows(&joined)?;
            if l + 1 < layers {
                input = g.dropout(input, self.config.dropout)?;
            }
        }
        Ok(EncodedSentence {
            x,
            h: input,
            len: tokens.len(),
        })
    }

    /// Decoder inputs `r_i = h_{i-1} + h_i + h_{i+1}` for `i = 1..n`, with
    /// `h_{n+1}` a zero vector. Shape `[n, 2 * encoder_size]`.
    pub fn decoder_inputs(&self, g: &mut Graph, enc: &EncodedSentence) -> Result<Var> {
        let n = enc.len;
        let width = 2 * self.config.encoder_size;
        let zero = g.constant(Tensor::zeros(&[width]));
        let padded = g.concat(&[enc.h, zero]);
        let padded = g.reshape(padded, &[n + 2, width])?;
        let prev = g.gather_rows(padded, &(0..n).collect::<Vec<_>>())?;
        let cur = g.gather_rows(padded, &(1..=n).collect::<Vec<_>>())?;
        let next = g.gather_rows(padded, &(2..=n + 1).collect::<Vec<_>>())?;
        let sum = g.add(prev, cur)?;
        g.add(sum, next)
    }

    /// Zero initial decoder state, one `(h, c)` pair per layer.
    pub fn initial_state(&self, g: &mut Graph) -> Vec<(Var, Var)> {
        let zero = g.constant(Tensor::zeros(&[self.config.decoder_size]));
        vec![(zero, zero); self.layout.decoder.len()]
    }

    /// One decoder step for word `i` (1-based): returns `s_i` and the new
    /// state.
    pub fn decoder_step(
        &self,
        g: &mut Graph,
        enc: &EncodedSentence,
        i: usize,
        state: &[(Var, Var)],
    ) -> Result<(Var, Vec<(Var, Var)>)> {
        if i == 0 || i > enc.len {
            return Err(Error::Argument(format!("decoder position {i} outside 1..={}", enc.len)));
        }
        let width = 2 * self.config.encoder_size;
        let h_prev = g.row(enc.h, i - 1)?;
        let h_cur = g.row(enc.h, i)?;
        let mut r = g.add(h_prev, h_cur)?;
        if i < enc.len {
            let h_next = g.row(enc.h, i + 1)?;
            r = g.add(r, h_next)?;
        } else {
            let zero = g.constant(Tensor::zeros(&[width]));
            r = g.add(r, zero)?;
        }
        let mut new_state = Vec::with_capacity(state.len());
        let mut input = r;
        for (weights, &(h, c)) in self.layout.decoder.iter().zip(state) {
            let w = g.param(weights.input);
            let b = g.param(weights.bias);
            let proj = g.matmul(input, w)?;
            let proj = g.add(proj, b)?;
            let (h, c) = weights.step(g, proj, h, c)?;
            new_state.push((h, c));
            input = h;
        }
        Ok((input, new_state))
    }

    /// All decoder states `s_1..s_n` as rows, threading the state left to
    /// right. Equivalent to repeated [`Model::decoder_step`].
    pub fn decoder_states(&self, g: &mut Graph, enc: &EncodedSentence) -> Result<Var> {
        let mut input = self.decoder_inputs(g, enc)?;
        let layers = self.layout.decoder.len();
        for (l, weights) in self.layout.decoder.iter().enumerate() {
            let states = Self::lstm_pass(g, weights, input, enc.len, false)?;
            input = g.stack_rows(&states)?;
            if l + 1 < layers {
                input = g.dropout(input, self.config.dropout)?;
            }
        }
        Ok(input)
    }

    fn apply_mlp(g: &mut Graph, mlp: &Mlp, mut x: Var) -> Result<Var> {
        for &(w, b) in &mlp.layers {
            let w = g.param(w);
            let b = g.param(b);
            let y = g.matmul(x, w)?;
            let y = g.add_row(y, b)?;
            x = g.elu(y);
        }
        Ok(x)
    }

    /// Encode, decode and apply the four MLP reductions.
    pub fn forward(&self, g: &mut Graph, tokens: &[Token]) -> Result<Forward> {
        let enc = self.encode_sentence(g, tokens)?;
        let s = self.decoder_states(g, &enc)?;
        let l = &self.layout;
        Ok(Forward {
            enc,
            s,
            arc_dep: Self::apply_mlp(g, &l.arc_dep, s)?,
            arc_head: Self::apply_mlp(g, &l.arc_head, enc.h)?,
            label_dep: Self::apply_mlp(g, &l.label_dep, s)?,
            label_head: Self::apply_mlp(g, &l.label_head, enc.h)?,
        })
    }

    /// Pointer scores `v^t_j = s'W h'_j + U s' + V h'_j + b` for every
    /// dependent `t = 1..n` (rows) and candidate head `j = 0..n`
    /// (columns).
    pub fn attention_scores(&self, g: &mut Graph, fwd: &Forward) -> Result<Var> {
        let a = &self.layout.arc;
        let n = fwd.enc.len;
        let (w, u, v, b) = (g.param(a.w), g.param(a.u), g.param(a.v), g.param(a.b));
        let sw = g.matmul(fwd.arc_dep, w)?;
        let heads_t = g.transpose(fwd.arc_head)?;
        let bilinear = g.matmul(sw, heads_t)?;
        let hv = g.matmul(fwd.arc_head, v)?;
        let hv = g.reshape(hv, &[n + 1])?;
        let scores = g.add_row(bilinear, hv)?;
        let su = g.matmul(fwd.arc_dep, u)?;
        let su = g.add_row(su, b)?;
        let su = g.reshape(su, &[n])?;
        let by_head = g.transpose(scores)?;
        let by_head = g.add_row(by_head, su)?;
        g.transpose(by_head)
    }

    /// Label scores for each dependent `t = 1..n` attached to
    /// `heads[t - 1]`, shape `[n, L]`.
    pub fn label_scores(&self, g: &mut Graph, fwd: &Forward, heads: &[usize]) -> Result<Var> {
        let n = fwd.enc.len;
        if heads.len() != n || heads.iter().any(|&h| h > n) {
            return Err(Error::Argument(format!(
                "need {n} heads in 0..={n}, got {heads:?}"
            )));
        }
        let lab = &self.layout.label;
        let labels = self.vocab.labels.len();
        let m = self.config.label_mlp_size;
        let (w, u, v, b) = (g.param(lab.w), g.param(lab.u), g.param(lab.v), g.param(lab.b));
        let head_rows = g.gather_rows(fwd.label_head, heads)?;

        let sw = g.matmul(fwd.label_dep, w)?;
        let sw = g.reshape(sw, &[n * labels, m])?;
        let repeat: Vec<usize> = (0..n).flat_map(|r| std::iter::repeat_n(r, labels)).collect();
        let hh = g.gather_rows(head_rows, &repeat)?;
        let prod = g.mul(sw, hh)?;
        let ones = g.constant(Tensor::vector(vec![1.0; m]));
        let bilinear = g.matmul(prod, ones)?;
        let bilinear = g.reshape(bilinear, &[n, labels])?;

        let su = g.matmul(fwd.label_dep, u)?;
        let hv = g.matmul(head_rows, v)?;
        let sum = g.add(bilinear, su)?;
        let sum = g.add(sum, hv)?;
        g.add_row(sum, b)
    }
}

/// Inference-time view of one sentence: the forward pass is run once and
/// scores are read off it.
pub struct Analysis<'m> {
    model: &'m Model,
    graph: Graph<'m>,
    fwd: Forward,
    log_probs: Vec<Vec<f64>>,
}

impl<'m> Analysis<'m> {
    pub fn new(model: &'m Model, tokens: &[Token]) -> Result<Self> {
        let mut graph = Graph::new(&model.params, false, 0);
        let fwd = model.forward(&mut graph, tokens)?;
        let scores = model.attention_scores(&mut graph, &fwd)?;
        let lp = graph.log_softmax_rows(scores)?;
        let cols = tokens.len() + 1;
        let log_probs = graph.value(lp).chunks(cols).map(<[f64]>::to_vec).collect();
        Ok(Analysis {
            model,
            graph,
            fwd,
            log_probs,
        })
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    /// `log_probs()[t - 1][j]`: log-probability that word `t` points to `j`.
    pub fn log_probs(&self) -> &[Vec<f64>] {
        &self.log_probs
    }

    /// Raw label scores for the given head assignment, one row per word.
    pub fn label_scores(&mut self, heads: &[usize]) -> Result<Vec<Vec<f64>>> {
        let scores = self.model.label_scores(&mut self.graph, &self.fwd, heads)?;
        let cols = self.model.vocab.labels.len();
        Ok(self.graph.value(scores).chunks(cols).map(<[f64]>::to_vec).collect())
    }
}

#[cfg(test)]
mod tests;
