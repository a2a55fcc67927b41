//! Edit-channel base correction model.
//!
//! The model is an HMM whose hidden state is the number of source tokens
//! consumed so far (`0..=n`). From state `j` each output step picks one of:
//!
//! * insert: emit `v ~ ins` and stay at `j` (weight `p_ins`);
//! * skip `d <= W` source tokens (weight `p_del^d`), read `x[j+d]` and emit
//!   either it (`p_copy`) or `v ~ sub(.|x[j+d])` (`p_sub`), moving to `j+d+1`;
//! * skip the remaining `n - j <= W` tokens and emit `<eos>` (weight
//!   `(p_copy + p_sub) p_del^(n-j)`).
//!
//! The weights of each state are normalized locally, so every step yields a
//! proper distribution. With probability `1 - mix` the step instead emits
//! from a target bigram `bigram(.|previous)` without moving. The state
//! carried between steps is the posterior over source positions.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::align::{align, AlignOp};
use crate::corpus::ParallelPair;
use crate::dist::TokenDist;
use crate::error::{Error, Result};
use crate::model_file::{self, log_prob};
pub use crate::table::{LogRow, LogTable};
use crate::scorer::{sequence_logprob, IncrementalScorer};
use crate::vocab::{Sentence, TokenId, Vocabulary};

pub const MODEL_KIND: &str = "channel";
const ROW_TOLERANCE: f64 = 1e-9;

/// First id that may be emitted by a copy, substitution or insertion
/// (`<unk>` and every regular token).
pub const FIRST_EMIT: u32 = 2;
/// First id that may follow in the bigram (`<eos>` onward).
pub const FIRST_NEXT: u32 = 1;

/// Edit-event priors in log domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventPriors {
    #[serde(with = "log_prob")]
    pub copy: f64,
    #[serde(with = "log_prob")]
    pub sub: f64,
    #[serde(with = "log_prob")]
    pub ins: f64,
    #[serde(with = "log_prob")]
    pub del: f64,
}

impl EventPriors {
    /// From plain probabilities `[copy, sub, ins, del]`.
    pub fn from_probs(p: [f64; 4]) -> Self {
        Self {
            copy: p[0].ln(),
            sub: p[1].ln(),
            ins: p[2].ln(),
            del: p[3].ln(),
        }
    }

    pub fn probs(&self) -> [f64; 4] {
        [self.copy.exp(), self.sub.exp(), self.ins.exp(), self.del.exp()]
    }
}

/// Raw event counts gathered from hard alignments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventCounts {
    pub copy: f64,
    pub sub: f64,
    pub ins: f64,
    pub del: f64,
    pub sub_pairs: BTreeMap<TokenId, BTreeMap<TokenId, f64>>,
    pub inserted: BTreeMap<TokenId, f64>,
    pub bigrams: BTreeMap<TokenId, BTreeMap<TokenId, f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub add_k: f64,
    pub mix: f64,
    pub skip_window: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            add_k: 0.1,
            mix: 0.7,
            skip_window: 3,
        }
    }
}

/// Trained parameters of the base model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub priors: EventPriors,
    /// `sub(v | source token)` over `<unk>` and regular tokens.
    pub sub_table: LogTable,
    /// Insertion distribution over `<unk>` and regular tokens.
    pub ins_dist: LogRow,
    /// `bigram(v | previous)` over `<eos>`, `<unk>` and regular tokens.
    pub bigram: LogTable,
    pub mix: f64,
    pub skip_window: usize,
    pub add_k: f64,
}

impl ChannelParams {
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        let n = vocab.len();
        let mass: f64 = self.priors.probs().iter().sum();
        if (mass - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::ModelFormat(format!("event priors sum to {mass}")));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::ModelFormat(format!("mix {} outside [0, 1]", self.mix)));
        }
        let check = |row: &LogRow, first: u32, what: &str| -> Result<()> {
            if row.seen.keys().any(|v| v.0 < first || v.index() >= n) {
                return Err(Error::ModelFormat(format!("{what}: entry outside support")));
            }
            let m: f64 = row.dense(n, first).iter().sum();
            if (m - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::ModelFormat(format!("{what} sums to {m}")));
            }
            Ok(())
        };
        check(&self.ins_dist, FIRST_EMIT, "insertion distribution")?;
        check(&self.sub_table.default, FIRST_EMIT, "substitution default row")?;
        for row in self.sub_table.rows.values() {
            check(row, FIRST_EMIT, "substitution row")?;
        }
        check(&self.bigram.default, FIRST_NEXT, "bigram default row")?;
        for row in self.bigram.rows.values() {
            check(row, FIRST_NEXT, "bigram row")?;
        }
        Ok(())
    }
}

/// Event counts from the minimal-edit alignment of every pair.
pub fn count_events(pairs: &[ParallelPair]) -> EventCounts {
    let mut c = EventCounts::default();
    for pair in pairs {
        let (x, y) = (pair.source.ids(), pair.target.ids());
        for op in align(x, y) {
            match op {
                AlignOp::Match { .. } => c.copy += 1.0,
                AlignOp::Sub { src, tgt } => {
                    c.sub += 1.0;
                    *c.sub_pairs
                        .entry(x[src])
                        .or_default()
                        .entry(y[tgt])
                        .or_default() += 1.0;
                }
                AlignOp::Del { .. } => c.del += 1.0,
                AlignOp::Ins { tgt } => {
                    c.ins += 1.0;
                    *c.inserted.entry(y[tgt]).or_default() += 1.0;
                }
            }
        }
        let mut prev = TokenId::BOS;
        for &tok in y.iter().chain(std::iter::once(&TokenId::EOS)) {
            *c.bigrams.entry(prev).or_default().entry(tok).or_default() += 1.0;
            prev = tok;
        }
    }
    c
}

/// Count-based training on hard alignments with add-k smoothing.
pub fn train_channel(
    vocab: &Vocabulary,
    pairs: &[ParallelPair],
    cfg: ChannelConfig,
) -> Result<ChannelParams> {
    if pairs.is_empty() {
        return Err(Error::NoData);
    }
    if !(cfg.add_k > 0.0) {
        return Err(Error::InvalidConfig(format!("add_k must be > 0, got {}", cfg.add_k)));
    }
    if !(0.0..=1.0).contains(&cfg.mix) {
        return Err(Error::InvalidConfig(format!("mix must lie in [0, 1], got {}", cfg.mix)));
    }
    let c = count_events(pairs);
    let k = cfg.add_k;
    let total = c.copy + c.sub + c.ins + c.del + 4.0 * k;
    let priors = EventPriors::from_probs([
        (c.copy + k) / total,
        (c.sub + k) / total,
        (c.ins + k) / total,
        (c.del + k) / total,
    ]);
    let emit_support = vocab.len() - FIRST_EMIT as usize;
    let next_support = vocab.len() - FIRST_NEXT as usize;
    let params = ChannelParams {
        priors,
        sub_table: LogTable::from_counts(&c.sub_pairs, emit_support, k),
        ins_dist: LogRow::from_counts(&c.inserted, emit_support, k),
        bigram: LogTable::from_counts(&c.bigrams, next_support, k),
        mix: cfg.mix,
        skip_window: cfg.skip_window,
        add_k: k,
    };
    Ok(params)
}

/// Per-source quantities that do not change while decoding one sentence.
#[derive(Debug)]
struct SourceCache {
    source: Vec<TokenId>,
    /// `emit[k][v] = p_copy 1{v = x[k]} + p_sub sub(v | x[k])`
    emit: Vec<Vec<f64>>,
    /// Local normalizer of each state.
    z: Vec<f64>,
}

/// Decoding state: posterior over consumed source prefix lengths.
#[derive(Clone, Debug)]
pub struct ChannelState {
    forward: Vec<f64>,
    last: TokenId,
    closed: bool,
    cache: Arc<SourceCache>,
}

impl ChannelState {
    pub fn forward(&self) -> &[f64] {
        &self.forward
    }

    pub fn last_token(&self) -> TokenId {
        self.last
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn source(&self) -> &[TokenId] {
        &self.cache.source
    }
}

/// Base model ready for incremental scoring.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    vocab: Vocabulary,
    params: ChannelParams,
    ins_dense: Vec<f64>,
    pr: [f64; 4],
}

impl ChannelModel {
    pub fn new(vocab: Vocabulary, params: ChannelParams) -> Result<Self> {
        params.validate(&vocab)?;
        let ins_dense = params.ins_dist.dense(vocab.len(), FIRST_EMIT);
        let pr = params.priors.probs();
        Ok(Self {
            vocab,
            params,
            ins_dense,
            pr,
        })
    }

    pub fn train(vocab: Vocabulary, pairs: &[ParallelPair], cfg: ChannelConfig) -> Result<Self> {
        let params = train_channel(&vocab, pairs, cfg)?;
        Self::new(vocab, params)
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (vocab, params) = model_file::load(path.as_ref(), MODEL_KIND)?;
        Self::new(vocab, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        model_file::save(path.as_ref(), MODEL_KIND, &self.vocab, &self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        model_file::to_json(MODEL_KIND, &self.vocab, &self.params)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (vocab, params) = model_file::from_json(MODEL_KIND, text)?;
        Self::new(vocab, params)
    }

    fn emit_weight(&self) -> f64 {
        self.pr[0] + self.pr[1]
    }

    fn build_cache(&self, source: &[TokenId]) -> SourceCache {
        let n = source.len();
        let w = self.params.skip_window;
        let [p_copy, p_sub, p_ins, p_del] = self.pr;
        let emit = source
            .iter()
            .map(|&x| {
                let mut row = self.params.sub_table.row(x).dense(self.vocab.len(), FIRST_EMIT);
                for p in &mut row {
                    *p *= p_sub;
                }
                row[x.index()] += p_copy;
                row
            })
            .collect();
        let e = self.emit_weight();
        let z = (0..=n)
            .map(|j| {
                let remaining = n - j;
                let consume: f64 = (0..remaining.min(w + 1)).map(|d| p_del.powi(d as i32)).sum();
                let end = if remaining <= w {
                    p_del.powi(remaining as i32)
                } else {
                    0.0
                };
                p_ins + e * (consume + end)
            })
            .collect();
        SourceCache {
            source: source.to_vec(),
            emit,
            z,
        }
    }

    /// Channel mass split by landing state: `reads[k]` is the weight of
    /// reading source token `k` (0-based), `stay` the insertion weight and
    /// `end` the end-of-sentence weight.
    fn transitions(&self, state: &ChannelState) -> (Vec<f64>, f64, f64) {
        let cache = &state.cache;
        let n = cache.source.len();
        let w = self.params.skip_window;
        let p_del = self.pr[3];
        let mut reads = vec![0.0; n];
        let mut stay = 0.0;
        let mut end = 0.0;
        for (j, &f) in state.forward.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            let scaled = f / cache.z[j];
            stay += scaled;
            let mut skip = 1.0;
            for d in 0..=w {
                let k = j + d;
                if k >= n {
                    break;
                }
                reads[k] += scaled * skip;
                skip *= p_del;
            }
            let remaining = n - j;
            if remaining <= w {
                end += scaled * p_del.powi(remaining as i32) * self.emit_weight();
            }
        }
        (reads, stay * self.pr[2], end)
    }

    fn bigram_row(&self, last: TokenId) -> Vec<f64> {
        self.params.bigram.row(last).dense(self.vocab.len(), FIRST_NEXT)
    }

    /// Unnormalized successor forward vector after emitting `token`; its sum
    /// is the probability of `token` under [`IncrementalScorer::next_dist`].
    pub fn successor_mass(&self, state: &ChannelState, token: TokenId) -> Result<Vec<f64>> {
        if state.closed {
            return Err(Error::ClosedState);
        }
        if token == TokenId::EOS || token.index() >= self.vocab.len() || token == TokenId::BOS {
            return Err(Error::InvalidInput(format!(
                "token {token} cannot extend the forward vector"
            )));
        }
        let mix = self.params.mix;
        let (reads, _, _) = self.transitions(state);
        let bg = self.params.bigram.prob(state.last, token);
        let ins = self.ins_dense[token.index()];
        let mut next = vec![0.0; state.forward.len()];
        for (j, &f) in state.forward.iter().enumerate() {
            if f > 0.0 {
                next[j] += mix * f / state.cache.z[j] * self.pr[2] * ins + (1.0 - mix) * bg * f;
            }
        }
        for (k, &r) in reads.iter().enumerate() {
            next[k + 1] += mix * r * state.cache.emit[k][token.index()];
        }
        Ok(next)
    }

    /// Log-probability of `target` (with trailing `<eos>`) given `source`;
    /// negative infinity when some step is impossible.
    pub fn sentence_logprob(&self, source: &Sentence, target: &[TokenId]) -> Result<f64> {
        sequence_logprob(self, source, target)
    }
}

impl IncrementalScorer for ChannelModel {
    type State = ChannelState;

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn init_state(&self, source: &Sentence) -> Result<ChannelState> {
        let cache = Arc::new(self.build_cache(source.ids()));
        let mut forward = vec![0.0; source.len() + 1];
        forward[0] = 1.0;
        Ok(ChannelState {
            forward,
            last: TokenId::BOS,
            closed: false,
            cache,
        })
    }

    fn next_dist(&self, state: &ChannelState) -> Result<TokenDist> {
        if state.closed {
            return Err(Error::ClosedState);
        }
        let mix = self.params.mix;
        let (reads, stay, end) = self.transitions(state);
        let bg = self.bigram_row(state.last);
        let mut probs = vec![0.0; self.vocab.len()];
        for v in FIRST_EMIT as usize..probs.len() {
            let mut chan = stay * self.ins_dense[v];
            for (k, &r) in reads.iter().enumerate() {
                chan += r * state.cache.emit[k][v];
            }
            probs[v] = mix * chan + (1.0 - mix) * bg[v];
        }
        probs[TokenId::EOS.index()] = mix * end + (1.0 - mix) * bg[TokenId::EOS.index()];
        TokenDist::from_weights(probs)
    }

    fn advance(&self, state: &ChannelState, token: TokenId) -> Result<ChannelState> {
        if state.closed {
            return Err(Error::ClosedState);
        }
        if token == TokenId::EOS {
            if self.next_dist(state)?.prob(token) <= 0.0 {
                return Err(Error::ImpossibleEmission(token.0));
            }
            return Ok(ChannelState {
                forward: state.forward.clone(),
                last: token,
                closed: true,
                cache: Arc::clone(&state.cache),
            });
        }
        let mut next = self.successor_mass(state, token)?;
        let mass: f64 = next.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::ImpossibleEmission(token.0));
        }
        for f in &mut next {
            *f /= mass;
        }
        Ok(ChannelState {
            forward: next,
            last: token,
            closed: false,
            cache: Arc::clone(&state.cache),
        })
    }
}
