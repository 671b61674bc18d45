//! Autoregressive categorical policy.
//!
//! Topology: token embeddings, a mean-pooled context vector concatenated with
//! the previous output token's embedding (a learned start vector at position
//! 0), one tanh hidden layer, and a linear projection onto the vocabulary.
//! Everything is evaluated exactly in `f64`; gradients are hand-derived.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rewards::{ParsedResponse, RewardBreakdown};
use crate::rng::{self, Rng};
use crate::tasks::TaskInstance;
use crate::vocab::{Token, Vocab, EOS};

/// Architecture of a policy, independent of its parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyShape {
    pub vocab: Vocab,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

/// One named contiguous block of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: &'static str,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Index map from parameter names into the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub embed: ParamBlock,
    pub start: ParamBlock,
    pub w1: ParamBlock,
    pub b1: ParamBlock,
    pub w2: ParamBlock,
    pub b2: ParamBlock,
}

impl ParamLayout {
    pub fn new(shape: &PolicyShape) -> Self {
        let v = shape.vocab.size();
        let d = shape.embed_dim;
        let h = shape.hidden_dim;
        let mut offset = 0;
        let mut block = |name, rows, cols| {
            let b = ParamBlock { name, offset, rows, cols };
            offset += rows * cols;
            b
        };
        Self {
            embed: block("embed", v, d),
            start: block("start", 1, d),
            w1: block("w1", h, 2 * d),
            b1: block("b1", 1, h),
            w2: block("w2", v, h),
            b2: block("b2", 1, v),
        }
    }

    pub fn blocks(&self) -> [ParamBlock; 6] {
        [self.embed, self.start, self.w1, self.b1, self.w2, self.b2]
    }

    pub fn total(&self) -> usize {
        self.b2.offset + self.b2.len()
    }
}

/// Full parameter set of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    shape: PolicyShape,
    layout: ParamLayout,
    params: Vec<f64>,
}

/// Exact next-token distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    pub probs: Vec<f64>,
    pub logprobs: Vec<f64>,
    /// Shannon entropy in nats.
    pub entropy: f64,
}

impl TokenDistribution {
    fn from_logits(logits: &[f64]) -> Self {
        let lse = crate::stats::log_sum_exp(logits);
        let logprobs: Vec<f64> = logits.iter().map(|z| z - lse).collect();
        let probs: Vec<f64> = logprobs.iter().map(|l| libm::exp(*l)).collect();
        let raw: f64 = -probs.iter().zip(&logprobs).map(|(p, l)| p * l).sum::<f64>();
        let entropy = raw.clamp(0.0, libm::log(logits.len() as f64));
        Self { probs, logprobs, entropy }
    }

    pub fn argmax(&self) -> Token {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best as Token
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut Rng) -> Token {
        let u = rng::uniform(rng);
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                last = i;
            }
            acc += p;
            if u < acc {
                return i as Token;
            }
        }
        last as Token
    }
}

/// One sampled output sequence with its sampling-time statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub tokens: Vec<Token>,
    pub per_token_logprob: Vec<f64>,
    pub per_token_entropy: Vec<f64>,
    pub seq_entropy: f64,
    /// Generation hit `max_len` without emitting EOS.
    pub truncated: bool,
    pub parsed: ParsedResponse,
    pub reward: RewardBreakdown,
    pub advantage: f64,
    pub shaped_advantage: f64,
}

/// Cached intermediate values of one forward step.
struct StepTrace {
    input: Vec<f64>,
    hidden: Vec<f64>,
    dist: TokenDistribution,
}

impl PolicySnapshot {
    /// All-zero parameters (uniform policy).
    pub fn zeros(shape: PolicyShape) -> Self {
        let layout = ParamLayout::new(&shape);
        Self { shape, layout, params: vec![0.0; layout.total()] }
    }

    /// Parameters uniform in `[-scale, scale]`.
    pub fn init(shape: PolicyShape, scale: f64, seed: u64) -> Self {
        let mut p = Self::zeros(shape);
        let mut r = rng::rng(seed);
        for x in p.params.iter_mut() {
            *x = scale * (2.0 * rng::uniform(&mut r) - 1.0);
        }
        p
    }

    pub fn from_params(shape: PolicyShape, params: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::new(&shape);
        if params.len() != layout.total() {
            return Err(Error::Domain(alloc::format!(
                "expected {} parameters, got {}",
                layout.total(),
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(alloc::format!("parameter {i} is not finite")));
        }
        Ok(Self { shape, layout, params })
    }

    pub fn shape(&self) -> &PolicyShape {
        &self.shape
    }

    pub fn vocab(&self) -> &Vocab {
        &self.shape.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.shape.vocab.size()
    }

    pub fn context_dim(&self) -> usize {
        self.shape.embed_dim
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn block(&self, b: ParamBlock) -> &[f64] {
        &self.params[b.range()]
    }

    pub fn block_mut(&mut self, b: ParamBlock) -> &mut [f64] {
        &mut self.params[b.range()]
    }

    fn check_tokens(&self, tokens: &[Token]) -> Result<()> {
        tokens.iter().try_for_each(|t| self.shape.vocab.check(*t))
    }

    fn embedding(&self, t: Token) -> &[f64] {
        let d = self.shape.embed_dim;
        let o = self.layout.embed.offset + t as usize * d;
        &self.params[o..o + d]
    }

    fn context_mean(&self, context: &[Token]) -> Vec<f64> {
        let d = self.shape.embed_dim;
        let mut c = vec![0.0; d];
        for &t in context {
            for (ci, e) in c.iter_mut().zip(self.embedding(t)) {
                *ci += e;
            }
        }
        let n = context.len() as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }

    fn step(&self, ctx_mean: &[f64], prev: Option<Token>) -> StepTrace {
        let d = self.shape.embed_dim;
        let h = self.shape.hidden_dim;
        let v = self.shape.vocab.size();
        let mut input = Vec::with_capacity(2 * d);
        input.extend_from_slice(ctx_mean);
        match prev {
            Some(t) => input.extend_from_slice(self.embedding(t)),
            None => input.extend_from_slice(self.block(self.layout.start)),
        }
        let w1 = self.block(self.layout.w1);
        let b1 = self.block(self.layout.b1);
        let hidden: Vec<f64> = (0..h)
            .map(|j| libm::tanh(b1[j] + crate::stats::dot(&w1[j * 2 * d..(j + 1) * 2 * d], &input)))
            .collect();
        let w2 = self.block(self.layout.w2);
        let b2 = self.block(self.layout.b2);
        let logits: Vec<f64> = (0..v)
            .map(|k| b2[k] + crate::stats::dot(&w2[k * h..(k + 1) * h], &hidden))
            .collect();
        StepTrace { input, hidden, dist: TokenDistribution::from_logits(&logits) }
    }

    /// Next-token distribution conditioned on `context` and the output
    /// `prefix` generated so far.
    pub fn forward_step(&self, context: &[Token], prefix: &[Token]) -> Result<TokenDistribution> {
        if context.is_empty() {
            return Err(Error::Domain("context must be nonempty".into()));
        }
        self.check_tokens(context)?;
        self.check_tokens(prefix)?;
        let c = self.context_mean(context);
        Ok(self.step(&c, prefix.last().copied()).dist)
    }

    /// Teacher-forced per-token log-probabilities and entropies of `tokens`.
    pub fn logprob_and_entropy(&self, context: &[Token], tokens: &[Token]) -> Result<(Vec<f64>, Vec<f64>)> {
        if context.is_empty() || tokens.is_empty() {
            return Err(Error::Domain("context and tokens must be nonempty".into()));
        }
        self.check_tokens(context)?;
        self.check_tokens(tokens)?;
        let c = self.context_mean(context);
        let mut lp = Vec::with_capacity(tokens.len());
        let mut ent = Vec::with_capacity(tokens.len());
        let mut prev = None;
        for &y in tokens {
            let dist = self.step(&c, prev).dist;
            lp.push(dist.logprobs[y as usize]);
            ent.push(dist.entropy);
            prev = Some(y);
        }
        Ok((lp, ent))
    }

    /// Gradient of `sum_t log pi(y_t | context, y_<t)` with respect to the
    /// flat parameter vector.
    pub fn grad_logprob(&self, context: &[Token], tokens: &[Token]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_weighted_grad(context, tokens, &vec![1.0; tokens.len()], &mut g)?;
        Ok(g)
    }

    /// Adds `sum_t weights[t] * grad log pi(y_t | ...)` into `grad`.
    pub fn accumulate_weighted_grad(
        &self,
        context: &[Token],
        tokens: &[Token],
        weights: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        if context.is_empty() || tokens.is_empty() {
            return Err(Error::Domain("context and tokens must be nonempty".into()));
        }
        if weights.len() != tokens.len() || grad.len() != self.params.len() {
            return Err(Error::Domain("weight or gradient length mismatch".into()));
        }
        self.check_tokens(context)?;
        self.check_tokens(tokens)?;
        let d = self.shape.embed_dim;
        let h = self.shape.hidden_dim;
        let v = self.shape.vocab.size();
        let lay = self.layout;
        let c = self.context_mean(context);
        let w1 = self.block(lay.w1);
        let w2 = self.block(lay.w2);
        let mut d_ctx = vec![0.0; d];
        let mut d_hidden = vec![0.0; h];
        let mut d_pre = vec![0.0; h];
        let mut d_input = vec![0.0; 2 * d];
        let mut prev: Option<Token> = None;
        for (&y, &w) in tokens.iter().zip(weights) {
            if w == 0.0 {
                prev = Some(y);
                continue;
            }
            let tr = self.step(&c, prev);
            d_hidden.iter_mut().for_each(|x| *x = 0.0);
            for k in 0..v {
                let dz = w * (if k == y as usize { 1.0 } else { 0.0 } - tr.dist.probs[k]);
                grad[lay.b2.offset + k] += dz;
                let row = lay.w2.offset + k * h;
                for j in 0..h {
                    grad[row + j] += dz * tr.hidden[j];
                    d_hidden[j] += dz * w2[k * h + j];
                }
            }
            for j in 0..h {
                d_pre[j] = d_hidden[j] * (1.0 - tr.hidden[j] * tr.hidden[j]);
            }
            d_input.iter_mut().for_each(|x| *x = 0.0);
            for j in 0..h {
                let dp = d_pre[j];
                grad[lay.b1.offset + j] += dp;
                let row = lay.w1.offset + j * 2 * d;
                for i in 0..2 * d {
                    grad[row + i] += dp * tr.input[i];
                    d_input[i] += dp * w1[j * 2 * d + i];
                }
            }
            for i in 0..d {
                d_ctx[i] += d_input[i];
            }
            let prev_off = match prev {
                Some(t) => lay.embed.offset + t as usize * d,
                None => lay.start.offset,
            };
            for i in 0..d {
                grad[prev_off + i] += d_input[d + i];
            }
            prev = Some(y);
        }
        let n = context.len() as f64;
        for &t in context {
            let off = lay.embed.offset + t as usize * d;
            for i in 0..d {
                grad[off + i] += d_ctx[i] / n;
            }
        }
        Ok(())
    }

    /// Samples at temperature 1 until EOS or `max_len` tokens.
    pub fn sample_tokens(&self, context: &[Token], rng: &mut Rng, max_len: usize) -> Result<SampledTokens> {
        self.generate(context, max_len, |dist| dist.sample(rng))
    }

    /// Greedy (argmax) decoding.
    pub fn greedy_tokens(&self, context: &[Token], max_len: usize) -> Result<SampledTokens> {
        self.generate(context, max_len, TokenDistribution::argmax)
    }

    fn generate(
        &self,
        context: &[Token],
        max_len: usize,
        mut pick: impl FnMut(&TokenDistribution) -> Token,
    ) -> Result<SampledTokens> {
        if max_len == 0 {
            return Err(Error::Domain("max_len must be at least 1".into()));
        }
        if context.is_empty() {
            return Err(Error::Domain("context must be nonempty".into()));
        }
        self.check_tokens(context)?;
        let c = self.context_mean(context);
        let mut out = SampledTokens::default();
        let mut prev = None;
        while out.tokens.len() < max_len {
            let dist = self.step(&c, prev).dist;
            let y = pick(&dist);
            out.tokens.push(y);
            out.logprobs.push(dist.logprobs[y as usize]);
            out.entropies.push(dist.entropy);
            if y == EOS {
                return Ok(out);
            }
            prev = Some(y);
        }
        out.truncated = true;
        Ok(out)
    }

    /// Samples one rollout for `task`. The response is parsed under the
    /// task's grammar; reward and advantages are left at zero for the caller.
    pub fn sample_rollout(&self, task: &TaskInstance, rng_seed: u64, max_len: usize) -> Result<Rollout> {
        let mut r = rng::rng(rng_seed);
        let s = self.sample_tokens(&task.context, &mut r, max_len)?;
        Ok(s.into_rollout(self.vocab(), task))
    }
}

/// Raw generation output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampledTokens {
    pub tokens: Vec<Token>,
    pub logprobs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub truncated: bool,
}

impl SampledTokens {
    pub fn into_rollout(self, vocab: &Vocab, task: &TaskInstance) -> Rollout {
        let parsed = crate::rewards::parse_response(vocab, &self.tokens, task.kind);
        let seq_entropy = crate::stats::mean(&self.entropies);
        Rollout {
            tokens: self.tokens,
            per_token_logprob: self.logprobs,
            per_token_entropy: self.entropies,
            seq_entropy,
            truncated: self.truncated,
            parsed,
            reward: RewardBreakdown::default(),
            advantage: 0.0,
            shaped_advantage: 0.0,
        }
    }
}

impl Rollout {
    /// Human-readable token names, space separated.
    pub fn render(&self, vocab: &Vocab) -> String {
        let mut s = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&vocab.name(*t));
        }
        s
    }
}
