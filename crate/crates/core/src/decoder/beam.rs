//! Beam search over a base scorer with optional critic intervention.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::lambda::{dynamic_lambda, fused_token_score, CriticConfig};
use super::trace::{CriticStep, StepRecord};
use crate::critic::Critic;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::scorer::{DynScorer, ErasedState};
use crate::vocab::{Sentence, TokenId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Output length cap as a multiple of the source length (rounded up).
    pub max_len_ratio: f64,
    pub length_cap: bool,
    pub hard_max_len: usize,
    /// Rank finished hypotheses by score per token instead of raw score.
    pub length_normalization: bool,
    /// Feed unnormalized entropies (nats) to the coefficient.
    pub raw_entropy: bool,
    pub trace: bool,
    /// How the hypotheses of one step are expanded.
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: 12,
            max_len_ratio: 1.8,
            length_cap: true,
            hard_max_len: 200,
            length_normalization: false,
            raw_entropy: false,
            trace: false,
            exec: Exec::Sequential,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width < 1 {
            return Err(Error::InvalidConfig("beam_width must be >= 1".into()));
        }
        if !(self.max_len_ratio > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max_len_ratio must be > 0, got {}",
                self.max_len_ratio
            )));
        }
        if self.hard_max_len < 1 {
            return Err(Error::InvalidConfig("hard_max_len must be >= 1".into()));
        }
        Ok(())
    }

    /// Maximum number of tokens before `<eos>` for a source of `n` tokens.
    pub fn max_len(&self, n: usize) -> usize {
        if self.length_cap {
            let cap = (self.max_len_ratio * n as f64 - 1e-9).ceil().max(1.0) as usize;
            cap.min(self.hard_max_len)
        } else {
            self.hard_max_len
        }
    }
}

/// A critic together with its weighting.
#[derive(Clone, Copy)]
pub struct CriticSlot<'a> {
    pub critic: &'a dyn Critic,
    pub config: CriticConfig,
}

impl<'a> CriticSlot<'a> {
    pub fn new(critic: &'a dyn Critic, config: CriticConfig) -> Self {
        Self { critic, config }
    }
}

/// A finished (or force-finished) hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Emitted tokens without the final `<eos>`.
    pub tokens: Vec<TokenId>,
    pub score: f64,
    /// Set when no hypothesis could finish and the best capped one was
    /// closed without scoring `<eos>`.
    pub capped: bool,
    trace: Option<Vec<StepRecord>>,
}

impl Decoded {
    pub fn score_breakdown(&self) -> Result<&[StepRecord]> {
        self.trace.as_deref().ok_or(Error::TraceUnavailable)
    }

    fn ranking_score(&self, normalize: bool) -> f64 {
        if normalize {
            self.score / (self.tokens.len() + 1) as f64
        } else {
            self.score
        }
    }
}

#[derive(Clone)]
struct Hyp {
    tokens: Vec<TokenId>,
    score: f64,
    base: ErasedState,
    critics: Vec<ErasedState>,
    trace: Vec<StepRecord>,
}

#[derive(Clone)]
struct Cand {
    parent: usize,
    token: TokenId,
    score: f64,
    record: Option<StepRecord>,
}

fn rank(a: &Cand, b: &Cand) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.token.cmp(&b.token))
        .then(a.parent.cmp(&b.parent))
}

fn finished_order(a: &Decoded, b: &Decoded, normalize: bool) -> Ordering {
    b.ranking_score(normalize)
        .total_cmp(&a.ranking_score(normalize))
        .then(a.tokens.len().cmp(&b.tokens.len()))
        .then(a.tokens.cmp(&b.tokens))
}

struct Search<'a> {
    base: &'a dyn DynScorer,
    critics: Vec<CriticSlot<'a>>,
    cfg: DecodeConfig,
    cap: usize,
    shortlist: Option<usize>,
}

impl Search<'_> {
    fn expand(&self, parent: usize, hyp: &Hyp) -> Result<(Vec<Cand>, bool)> {
        let dist = self.base.next_dist_erased(&hyp.base)?;
        let h_model = if self.cfg.raw_entropy {
            dist.entropy()
        } else {
            dist.normalized_entropy()?
        };
        let at_cap = hyp.tokens.len() >= self.cap;
        let mut options: Vec<(TokenId, f64)> = if at_cap {
            let p = dist.prob(TokenId::EOS);
            if p > 0.0 {
                vec![(TokenId::EOS, p.ln())]
            } else {
                Vec::new()
            }
        } else {
            dist.probs()
                .iter()
                .enumerate()
                .filter(|&(i, &p)| p > 0.0 && i != TokenId::BOS.index())
                .map(|(i, &p)| (TokenId(i as u32), p.ln()))
                .collect()
        };
        if options.is_empty() {
            return Ok((Vec::new(), at_cap));
        }
        if let Some(n) = self.shortlist {
            options.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            options.truncate(n);
        }
        let tokens: Vec<TokenId> = options.iter().map(|o| o.0).collect();
        let mut judged = Vec::with_capacity(self.critics.len());
        for (slot, state) in self.critics.iter().zip(&hyp.critics) {
            if slot.config.enabled {
                judged.push(Some(slot.critic.judge(state, &tokens)?));
            } else {
                judged.push(None);
            }
        }
        let step = hyp.tokens.len();
        let mut out = Vec::with_capacity(options.len());
        for (c, &(token, logp)) in options.iter().enumerate() {
            let mut terms = Vec::with_capacity(self.critics.len());
            let mut steps = Vec::new();
            for (slot, js) in self.critics.iter().zip(&judged) {
                let Some(js) = js else { continue };
                let j = js[c];
                let h_critic = if self.cfg.raw_entropy {
                    j.entropy
                } else {
                    j.normalized_entropy()
                };
                let lambda = dynamic_lambda(slot.config.alpha, slot.config.beta, h_model, h_critic)?;
                terms.push((lambda, j.penalty));
                if self.cfg.trace {
                    steps.push(CriticStep {
                        kind: slot.critic.kind(),
                        penalty: j.penalty,
                        lambda,
                    });
                }
            }
            let fused = fused_token_score(logp, &terms);
            let score = hyp.score + fused;
            let record = self.cfg.trace.then(|| StepRecord {
                step,
                token,
                base_logp: logp,
                critics: steps,
                fused,
                cumulative: score,
            });
            out.push(Cand {
                parent,
                token,
                score,
                record,
            });
        }
        Ok((out, at_cap))
    }

    fn extend(&self, hyp: &Hyp, cand: Cand) -> Result<Hyp> {
        let base = self.base.advance_erased(&hyp.base, cand.token)?;
        let critics = self
            .critics
            .iter()
            .zip(&hyp.critics)
            .map(|(slot, st)| {
                if slot.config.enabled {
                    slot.critic.advance(st, cand.token)
                } else {
                    Ok(st.clone())
                }
            })
            .collect::<Result<_>>()?;
        let mut tokens = hyp.tokens.clone();
        tokens.push(cand.token);
        let mut trace = if self.cfg.trace { hyp.trace.clone() } else { Vec::new() };
        trace.extend(cand.record);
        Ok(Hyp {
            tokens,
            score: cand.score,
            base,
            critics,
            trace,
        })
    }

    fn finish(&self, hyp: &Hyp, cand: Option<Cand>) -> Decoded {
        let capped = cand.is_none();
        let (score, record) = match cand {
            Some(c) => (c.score, c.record),
            None => (hyp.score, None),
        };
        let trace = self.cfg.trace.then(|| {
            let mut t = hyp.trace.clone();
            t.extend(record);
            t
        });
        Decoded {
            tokens: hyp.tokens.clone(),
            score,
            capped,
            trace,
        }
    }
}

/// Runs beam search and returns every finished hypothesis, best first.
///
/// Each step expands all live hypotheses, ranks the expansions by
/// (score desc, token id asc, parent index asc) and keeps the top
/// `beam_width`. Expansions ending in `<eos>` leave the beam. The search
/// stops once `beam_width` hypotheses have finished or none is live;
/// candidates of zero base probability are never considered.
pub fn beam_search(
    base: &dyn DynScorer,
    critics: &[CriticSlot<'_>],
    source: &Sentence,
    cfg: &DecodeConfig,
) -> Result<Vec<Decoded>> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::InvalidInput("cannot decode an empty source".into()));
    }
    for slot in critics {
        slot.config.validate(cfg.beam_width, base.vocabulary().len())?;
    }
    let shortlist = critics
        .iter()
        .filter(|s| s.config.enabled)
        .map(|s| s.config.shortlist_n)
        .max();
    let search = Search {
        base,
        critics: critics.to_vec(),
        cfg: *cfg,
        cap: cfg.max_len(source.len()),
        shortlist,
    };
    let root = Hyp {
        tokens: Vec::new(),
        score: 0.0,
        base: base.init_erased(source)?,
        critics: critics
            .iter()
            .map(|s| s.critic.start(source))
            .collect::<Result<_>>()?,
        trace: Vec::new(),
    };
    let mut live = vec![root];
    let mut finished: Vec<Decoded> = Vec::new();
    let mut stuck: Vec<Decoded> = Vec::new();
    while !live.is_empty() && finished.len() < cfg.beam_width {
        let expanded = cfg.exec.try_map(&live.iter().enumerate().collect::<Vec<_>>(), |&(i, h)| {
            search.expand(i, h)
        })?;
        let mut cands = Vec::new();
        for ((c, at_cap), hyp) in expanded.into_iter().zip(&live) {
            if c.is_empty() && at_cap {
                stuck.push(search.finish(hyp, None));
            }
            cands.extend(c);
        }
        cands.sort_by(rank);
        cands.truncate(cfg.beam_width);
        let mut grow = Vec::new();
        for c in cands {
            if c.token == TokenId::EOS {
                let parent = &live[c.parent];
                finished.push(search.finish(parent, Some(c)));
            } else {
                grow.push(c);
            }
        }
        let next = cfg.exec.map(&grow, |c| search.extend(&live[c.parent], c.clone()));
        live = next.into_iter().collect::<Result<_>>()?;
    }
    if finished.is_empty() {
        if stuck.is_empty() {
            return Err(Error::Precondition(
                "no hypothesis survived the search".into(),
            ));
        }
        log::warn!(
            "no hypothesis could emit <eos> within {} tokens; returning the best capped one",
            search.cap
        );
        finished = stuck;
    }
    finished.sort_by(|a, b| finished_order(a, b, cfg.length_normalization));
    Ok(finished)
}

/// Best hypothesis of [`beam_search`].
pub fn beam_decode(
    base: &dyn DynScorer,
    critics: &[CriticSlot<'_>],
    source: &Sentence,
    cfg: &DecodeConfig,
) -> Result<Decoded> {
    Ok(beam_search(base, critics, source, cfg)?.swap_remove(0))
}

/// Decodes every source, in input order.
pub fn decode_corpus(
    base: &dyn DynScorer,
    critics: &[CriticSlot<'_>],
    sources: &[Sentence],
    cfg: &DecodeConfig,
    exec: Exec,
) -> Result<Vec<Decoded>> {
    exec.try_map(sources, |s| beam_decode(base, critics, s, cfg))
}
