//! Attention encoder-decoder: parameters, forward passes and backpropagation.

use rand::{Rng, RngCore};

use super::lstm::{LstmParams, LstmStep};
use super::tensor::{axpy, concat, dot, log_sum_exp, softmax, Mat};
use crate::error::{Error, Result};
use crate::vocab::{BOS_ID, EOS_ID, RESERVED};

/// Model architecture. Encoder depth counts the bidirectional bottom layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NmtConfig {
    pub source_vocab: usize,
    pub target_vocab: usize,
    pub dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub init_range: f64,
}

impl NmtConfig {
    /// CPU-sized defaults: d = 64, bidirectional bottom plus two encoder layers, two decoder layers.
    pub fn desk(source_vocab: usize, target_vocab: usize) -> Self {
        Self {
            source_vocab,
            target_vocab,
            dim: 64,
            encoder_layers: 3,
            decoder_layers: 2,
            init_range: 0.08,
        }
    }

    /// The published system: 1000 units, three encoder and two decoder layers.
    pub fn full(source_vocab: usize, target_vocab: usize) -> Self {
        Self {
            dim: 1000,
            ..Self::desk(source_vocab, target_vocab)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min_vocab = RESERVED.len();
        if self.source_vocab < min_vocab || self.target_vocab < min_vocab {
            return Err(Error::Config(format!(
                "vocabulary sizes must be at least {min_vocab} (got source {}, target {})",
                self.source_vocab, self.target_vocab
            )));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if self.encoder_layers < 2 {
            return Err(Error::Config(format!(
                "encoder_layers must be at least 2: the bidirectional bottom layer is {} wide, \
                 the decoder is {} wide",
                2 * self.dim,
                self.dim
            )));
        }
        if self.decoder_layers == 0 {
            return Err(Error::Config("decoder_layers must be positive".into()));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::Config(format!("init_range must be finite and non-negative, got {}", self.init_range)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmtParams {
    pub config: NmtConfig,
    pub source_embeddings: Mat,
    pub target_embeddings: Mat,
    pub encoder_forward: LstmParams,
    pub encoder_backward: LstmParams,
    /// Encoder layers 2..l; the first consumes the `2d`-wide bottom outputs.
    pub encoder_upper: Vec<LstmParams>,
    /// Decoder layers; the first consumes `[embedding; t_prev]`.
    pub decoder: Vec<LstmParams>,
    /// `W_c = [W_c¹ | W_c²]`, applied to `[c; s]`.
    pub attention_w: Mat,
    pub attention_b: Mat,
    /// `W_s`, no bias.
    pub output_w: Mat,
}

/// Per-position hidden vectors of every encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    /// `layers[k][i]`; layer 0 is `[forward; backward]`.
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bottom(&self) -> &[Vec<f64>] {
        &self.layers[0]
    }

    pub fn top(&self) -> &[Vec<f64>] {
        self.layers.last().expect("encoder has layers")
    }
}

/// Decoder state after one target position.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStep {
    /// `s_j^k` per layer.
    pub hidden: Vec<Vec<f64>>,
    pub cells: Vec<Vec<f64>>,
    /// `c_j`
    pub context: Vec<f64>,
    /// `α_j`
    pub alpha: Vec<f64>,
    /// `t_j`
    pub attentional: Vec<f64>,
}

impl DecoderStep {
    pub fn initial(config: &NmtConfig) -> Self {
        let d = config.dim;
        Self {
            hidden: vec![vec![0.0; d]; config.decoder_layers],
            cells: vec![vec![0.0; d]; config.decoder_layers],
            context: vec![0.0; d],
            alpha: Vec::new(),
            attentional: vec![0.0; d],
        }
    }
}

/// Inverted dropout on non-recurrent connections.
pub struct Dropout<'a> {
    rate: f64,
    rng: Option<&'a mut dyn RngCore>,
}

impl<'a> Dropout<'a> {
    pub fn none() -> Self {
        Self { rate: 0.0, rng: None }
    }

    pub fn new(rate: f64, rng: &'a mut dyn RngCore) -> Self {
        Self { rate, rng: Some(rng) }
    }

    fn mask(&mut self, n: usize) -> Option<Vec<f64>> {
        if self.rate <= 0.0 {
            return None;
        }
        let rng = self.rng.as_mut()?;
        let keep = 1.0 - self.rate;
        Some(
            (0..n)
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect(),
        )
    }
}

fn apply_mask(x: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct EncoderCache {
    ids: Vec<usize>,
    embed_masks: Vec<Option<Vec<f64>>>,
    forward: Vec<LstmStep>,
    backward: Vec<LstmStep>,
    upper: Vec<Vec<LstmStep>>,
    upper_masks: Vec<Vec<Option<Vec<f64>>>>,
    states: EncoderStates,
}

struct StepCache {
    y_prev: usize,
    input_masks: Vec<Option<Vec<f64>>>,
    cells: Vec<LstmStep>,
    alpha: Vec<f64>,
    context: Vec<f64>,
    t: Vec<f64>,
    t_mask: Option<Vec<f64>>,
    td: Vec<f64>,
    logits: Vec<f64>,
}

fn run_lstm(lstm: &LstmParams, inputs: &[Vec<f64>], reverse: bool) -> Vec<LstmStep> {
    let h = lstm.hidden();
    let n = inputs.len();
    let mut steps: Vec<Option<LstmStep>> = (0..n).map(|_| None).collect();
    let mut hp = vec![0.0; h];
    let mut cp = vec![0.0; h];
    let order: Box<dyn Iterator<Item = usize>> = if reverse { Box::new((0..n).rev()) } else { Box::new(0..n) };
    for i in order {
        let s = lstm.step(&inputs[i], &hp, &cp);
        hp.clone_from(&s.h);
        cp.clone_from(&s.c);
        steps[i] = Some(s);
    }
    steps.into_iter().map(|s| s.expect("every position visited")).collect()
}

/// Backpropagates one recurrent pass; returns input gradients per position.
fn backprop_lstm(
    lstm: &LstmParams,
    steps: &[LstmStep],
    d_out: &[Vec<f64>],
    reverse: bool,
    grad: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let h = lstm.hidden();
    let n = steps.len();
    let mut dx = vec![Vec::new(); n];
    let mut dh_rec = vec![0.0; h];
    let mut dc_rec = vec![0.0; h];
    let order: Box<dyn Iterator<Item = usize>> = if reverse { Box::new(0..n) } else { Box::new((0..n).rev()) };
    for i in order {
        let dh = add(&d_out[i], &dh_rec);
        let (dxi, dhp, dcp) = lstm.backward(&steps[i], &dh, &dc_rec, grad);
        dx[i] = dxi;
        dh_rec = dhp;
        dc_rec = dcp;
    }
    dx
}

impl NmtParams {
    /// Uniform weights in `±init_range`, forget-gate biases at 1.
    pub fn new<R: Rng>(config: NmtConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let r = config.init_range;
        let source_embeddings = Mat::uniform(config.source_vocab, d, r, rng);
        let target_embeddings = Mat::uniform(config.target_vocab, d, r, rng);
        let encoder_forward = LstmParams::init(d, d, r, rng);
        let encoder_backward = LstmParams::init(d, d, r, rng);
        let encoder_upper = (1..config.encoder_layers)
            .map(|k| LstmParams::init(if k == 1 { 2 * d } else { d }, d, r, rng))
            .collect();
        let decoder = (0..config.decoder_layers)
            .map(|k| LstmParams::init(if k == 0 { 2 * d } else { d }, d, r, rng))
            .collect();
        let attention_w = Mat::uniform(d, 2 * d, r, rng);
        let attention_b = Mat::zeros(d, 1);
        let output_w = Mat::uniform(config.target_vocab, d, r, rng);
        Ok(Self {
            config,
            source_embeddings,
            target_embeddings,
            encoder_forward,
            encoder_backward,
            encoder_upper,
            decoder,
            attention_w,
            attention_b,
            output_w,
        })
    }

    /// Every tensor zero, forget biases included.
    pub fn zeros(config: NmtConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::zeroed(config))
    }

    fn zeroed(config: NmtConfig) -> Self {
        let d = config.dim;
        Self {
            source_embeddings: Mat::zeros(config.source_vocab, d),
            target_embeddings: Mat::zeros(config.target_vocab, d),
            encoder_forward: LstmParams::zeros(d, d),
            encoder_backward: LstmParams::zeros(d, d),
            encoder_upper: (1..config.encoder_layers)
                .map(|k| LstmParams::zeros(if k == 1 { 2 * d } else { d }, d))
                .collect(),
            decoder: (0..config.decoder_layers)
                .map(|k| LstmParams::zeros(if k == 0 { 2 * d } else { d }, d))
                .collect(),
            attention_w: Mat::zeros(d, 2 * d),
            attention_b: Mat::zeros(d, 1),
            output_w: Mat::zeros(config.target_vocab, d),
            config,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeroed(self.config.clone())
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = vec![
            ("source_embeddings".to_string(), &self.source_embeddings),
            ("target_embeddings".to_string(), &self.target_embeddings),
        ];
        let mut lstms = vec![
            ("encoder.1.forward".to_string(), &self.encoder_forward),
            ("encoder.1.backward".to_string(), &self.encoder_backward),
        ];
        lstms.extend(self.encoder_upper.iter().enumerate().map(|(k, p)| (format!("encoder.{}", k + 2), p)));
        lstms.extend(self.decoder.iter().enumerate().map(|(k, p)| (format!("decoder.{}", k + 1), p)));
        for (name, p) in lstms {
            out.push((format!("{name}.w"), &p.w));
            out.push((format!("{name}.b"), &p.b));
        }
        out.push(("attention.w".into(), &self.attention_w));
        out.push(("attention.b".into(), &self.attention_b));
        out.push(("output.w".into(), &self.output_w));
        out
    }

    /// Mutable view in the same order as [`NmtParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut out = vec![&mut self.source_embeddings, &mut self.target_embeddings];
        for p in [&mut self.encoder_forward, &mut self.encoder_backward]
            .into_iter()
            .chain(self.encoder_upper.iter_mut())
            .chain(self.decoder.iter_mut())
        {
            out.push(&mut p.w);
            out.push(&mut p.b);
        }
        out.push(&mut self.attention_w);
        out.push(&mut self.attention_b);
        out.push(&mut self.output_w);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.data.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_source(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::validation("source sentence is empty"));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.config.source_vocab) {
            return Err(Error::validation(format!(
                "source id {bad} out of range for vocabulary of {}",
                self.config.source_vocab
            )));
        }
        Ok(())
    }

    pub(crate) fn check_target(&self, ids: &[usize]) -> Result<()> {
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.config.target_vocab) {
            return Err(Error::validation(format!(
                "target id {bad} out of range for vocabulary of {}",
                self.config.target_vocab
            )));
        }
        Ok(())
    }

    pub fn encode(&self, source: &[usize]) -> Result<EncoderStates> {
        Ok(self.encode_cached(source, &mut Dropout::none())?.states)
    }

    fn encode_cached(&self, source: &[usize], dropout: &mut Dropout<'_>) -> Result<EncoderCache> {
        self.check_source(source)?;
        let d = self.config.dim;
        let mut embed_masks = Vec::with_capacity(source.len());
        let mut xs = Vec::with_capacity(source.len());
        for &id in source {
            let m = dropout.mask(d);
            xs.push(apply_mask(self.source_embeddings.row(id), &m));
            embed_masks.push(m);
        }
        let forward = run_lstm(&self.encoder_forward, &xs, false);
        let backward = run_lstm(&self.encoder_backward, &xs, true);
        let bottom: Vec<Vec<f64>> = forward.iter().zip(&backward).map(|(f, b)| concat(&f.h, &b.h)).collect();
        let mut layers = vec![bottom];
        let mut upper = Vec::with_capacity(self.encoder_upper.len());
        let mut upper_masks = Vec::with_capacity(self.encoder_upper.len());
        for lstm in &self.encoder_upper {
            let below = layers.last().expect("bottom layer present");
            let masks: Vec<_> = below.iter().map(|h| dropout.mask(h.len())).collect();
            let inputs: Vec<_> = below.iter().zip(&masks).map(|(h, m)| apply_mask(h, m)).collect();
            let steps = run_lstm(lstm, &inputs, false);
            layers.push(steps.iter().map(|s| s.h.clone()).collect());
            upper.push(steps);
            upper_masks.push(masks);
        }
        Ok(EncoderCache {
            ids: source.to_vec(),
            embed_masks,
            forward,
            backward,
            upper,
            upper_masks,
            states: EncoderStates { layers },
        })
    }

    fn step_cached(
        &self,
        hidden: &[Vec<f64>],
        cells: &[Vec<f64>],
        t_prev: &[f64],
        y_prev: usize,
        top: &[Vec<f64>],
        dropout: &mut Dropout<'_>,
    ) -> StepCache {
        let d = self.config.dim;
        let mut input = concat(self.target_embeddings.row(y_prev), t_prev);
        let mut input_masks = Vec::with_capacity(self.decoder.len());
        let mut steps = Vec::with_capacity(self.decoder.len());
        for (k, lstm) in self.decoder.iter().enumerate() {
            let m = dropout.mask(input.len());
            let x = apply_mask(&input, &m);
            let s = lstm.step(&x, &hidden[k], &cells[k]);
            input = s.h.clone();
            input_masks.push(m);
            steps.push(s);
        }
        let s_top = &steps.last().expect("decoder has layers").h;
        let scores: Vec<f64> = top.iter().map(|h| dot(h, s_top)).collect();
        let alpha = softmax(&scores);
        let mut context = vec![0.0; d];
        for (a, h) in alpha.iter().zip(top) {
            axpy(*a, h, &mut context);
        }
        let mut t = vec![0.0; d];
        self.attention_w.matvec(&concat(&context, s_top), &mut t);
        for (v, b) in t.iter_mut().zip(&self.attention_b.data) {
            *v = (*v + b).tanh();
        }
        let t_mask = dropout.mask(d);
        let td = apply_mask(&t, &t_mask);
        let mut logits = vec![0.0; self.config.target_vocab];
        self.output_w.matvec(&td, &mut logits);
        StepCache {
            y_prev,
            input_masks,
            cells: steps,
            alpha,
            context,
            t,
            t_mask,
            td,
            logits,
        }
    }

    /// One decoder step; returns the new state and the output logits.
    pub(crate) fn advance(&self, prev: &DecoderStep, y_prev: usize, top: &[Vec<f64>]) -> (DecoderStep, Vec<f64>) {
        let c = self.step_cached(&prev.hidden, &prev.cells, &prev.attentional, y_prev, top, &mut Dropout::none());
        let state = DecoderStep {
            hidden: c.cells.iter().map(|s| s.h.clone()).collect(),
            cells: c.cells.iter().map(|s| s.c.clone()).collect(),
            context: c.context,
            alpha: c.alpha,
            attentional: c.t,
        };
        (state, c.logits)
    }

    /// Advances the decoder by one target token; returns the new state and
    /// the output distribution over the target vocabulary.
    pub fn decode_step(&self, prev: &DecoderStep, y_prev: usize, encoder: &EncoderStates) -> Result<(DecoderStep, Vec<f64>)> {
        if encoder.is_empty() {
            return Err(Error::validation("encoder states are empty"));
        }
        self.check_target(&[y_prev])?;
        let (state, logits) = self.advance(prev, y_prev, encoder.top());
        Ok((state, softmax(&logits)))
    }

    /// Negative log-likelihood of `target` followed by end-of-sentence.
    pub fn loss(&self, source: &[usize], target: &[usize]) -> Result<f64> {
        self.check_target(target)?;
        let enc = self.encode(source)?;
        let top = enc.top();
        let mut state = DecoderStep::initial(&self.config);
        let mut loss = 0.0;
        for j in 0..=target.len() {
            let y_prev = if j == 0 { BOS_ID } else { target[j - 1] };
            let gold = target.get(j).copied().unwrap_or(EOS_ID);
            let (next, logits) = self.advance(&state, y_prev, top);
            loss += log_sum_exp(&logits) - logits[gold];
            state = next;
        }
        Ok(loss)
    }

    /// Returns the negative log-likelihood of one pair and adds `scale` times its
    /// gradient into `grad`.
    pub fn loss_and_gradient(
        &self,
        source: &[usize],
        target: &[usize],
        dropout: &mut Dropout<'_>,
        scale: f64,
        grad: &mut NmtParams,
    ) -> Result<f64> {
        self.check_target(target)?;
        let enc = self.encode_cached(source, dropout)?;
        let d = self.config.dim;
        let nl = self.decoder.len();
        let top = enc.states.top();

        let mut hidden = vec![vec![0.0; d]; nl];
        let mut cells = vec![vec![0.0; d]; nl];
        let mut t_prev = vec![0.0; d];
        let mut steps = Vec::with_capacity(target.len() + 1);
        let mut loss = 0.0;
        for j in 0..=target.len() {
            let y_prev = if j == 0 { BOS_ID } else { target[j - 1] };
            let gold = target.get(j).copied().unwrap_or(EOS_ID);
            let s = self.step_cached(&hidden, &cells, &t_prev, y_prev, top, dropout);
            loss += log_sum_exp(&s.logits) - s.logits[gold];
            for (k, c) in s.cells.iter().enumerate() {
                hidden[k].clone_from(&c.h);
                cells[k].clone_from(&c.c);
            }
            t_prev.clone_from(&s.t);
            steps.push((s, gold));
        }

        let n = source.len();
        let mut d_top = vec![vec![0.0; d]; n];
        let mut dh_rec = vec![vec![0.0; d]; nl];
        let mut dc_rec = vec![vec![0.0; d]; nl];
        let mut dt_next = vec![0.0; d];
        for (s, gold) in steps.iter().rev() {
            let mut dlogits = softmax(&s.logits);
            dlogits[*gold] -= 1.0;
            dlogits.iter_mut().for_each(|g| *g *= scale);
            grad.output_w.outer_acc(&dlogits, &s.td);
            let mut dtd = vec![0.0; d];
            self.output_w.matvec_t_acc(&dlogits, &mut dtd);
            let dt = add(&apply_mask(&dtd, &s.t_mask), &dt_next);

            let dz: Vec<f64> = dt.iter().zip(&s.t).map(|(g, t)| g * (1.0 - t * t)).collect();
            let s_top = &s.cells[nl - 1].h;
            grad.attention_w.outer_acc(&dz, &concat(&s.context, s_top));
            axpy(1.0, &dz, &mut grad.attention_b.data);
            let mut dcs = vec![0.0; 2 * d];
            self.attention_w.matvec_t_acc(&dz, &mut dcs);
            let (dctx, ds_att) = dcs.split_at(d);

            let dalpha: Vec<f64> = top.iter().map(|h| dot(h, dctx)).collect();
            let mean: f64 = s.alpha.iter().zip(&dalpha).map(|(a, g)| a * g).sum();
            let mut ds = ds_att.to_vec();
            for i in 0..n {
                let a = s.alpha[i];
                let dscore = a * (dalpha[i] - mean);
                axpy(a, dctx, &mut d_top[i]);
                axpy(dscore, s_top, &mut d_top[i]);
                axpy(dscore, &top[i], &mut ds);
            }

            let mut dh_out = ds;
            for k in (0..nl).rev() {
                let dh = add(&dh_out, &dh_rec[k]);
                let (dx, dhp, dcp) = self.decoder[k].backward(&s.cells[k], &dh, &dc_rec[k], &mut grad.decoder[k]);
                dh_rec[k] = dhp;
                dc_rec[k] = dcp;
                let dx = apply_mask(&dx, &s.input_masks[k]);
                if k > 0 {
                    dh_out = dx;
                } else {
                    axpy(1.0, &dx[..d], grad.target_embeddings.row_mut(s.y_prev));
                    dt_next = dx[d..].to_vec();
                }
            }
        }

        self.encoder_backprop(&enc, d_top, grad);
        Ok(loss)
    }

    fn encoder_backprop(&self, enc: &EncoderCache, mut d_layer: Vec<Vec<f64>>, grad: &mut NmtParams) {
        let d = self.config.dim;
        for (u, lstm) in self.encoder_upper.iter().enumerate().rev() {
            let dx = backprop_lstm(lstm, &enc.upper[u], &d_layer, false, &mut grad.encoder_upper[u]);
            d_layer = dx.iter().zip(&enc.upper_masks[u]).map(|(g, m)| apply_mask(g, m)).collect();
        }
        let d_fwd: Vec<Vec<f64>> = d_layer.iter().map(|g| g[..d].to_vec()).collect();
        let d_bwd: Vec<Vec<f64>> = d_layer.iter().map(|g| g[d..].to_vec()).collect();
        let dx_f = backprop_lstm(&self.encoder_forward, &enc.forward, &d_fwd, false, &mut grad.encoder_forward);
        let dx_b = backprop_lstm(&self.encoder_backward, &enc.backward, &d_bwd, true, &mut grad.encoder_backward);
        for (i, &id) in enc.ids.iter().enumerate() {
            let g = apply_mask(&add(&dx_f[i], &dx_b[i]), &enc.embed_masks[i]);
            axpy(1.0, &g, grad.source_embeddings.row_mut(id));
        }
    }
}
