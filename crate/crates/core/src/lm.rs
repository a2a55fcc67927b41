//! Left-to-right n-gram language model used as a critic.
//!
//! Conditionals are add-k estimates at every order. A history whose longest
//! context was never observed backs off to shorter contexts with the stupid
//! backoff factor 0.4; the normalized distribution served to decoding is the
//! row of the longest observed context (the backoff factors cancel under
//! normalization). Outcomes are `<eos>` and the regular tokens; `<bos>` and
//! `<unk>` are never predicted.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bridge::bridge_token;
use crate::dist::TokenDist;
use crate::error::{Error, Result};
use crate::model_file;
use crate::scorer::IncrementalScorer;
use crate::table::LogRow;
use crate::vocab::{Sentence, TokenId, Vocabulary};

pub const MODEL_KIND: &str = "ngram";
pub const BACKOFF_FACTOR: f64 = 0.4;
/// Lower bound applied to critic probabilities before forming penalties.
pub const PROB_FLOOR: f64 = 1e-8;

fn in_event_space(id: TokenId) -> bool {
    id != TokenId::BOS && id != TokenId::UNK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ContextRow {
    context: Vec<TokenId>,
    row: LogRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StoredParams {
    order: usize,
    add_k: f64,
    /// `levels[l]` holds the rows of every observed context of length `l`.
    levels: Vec<Vec<ContextRow>>,
}

/// Trained n-gram parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NgramParams {
    order: usize,
    add_k: f64,
    levels: Vec<HashMap<Vec<TokenId>, LogRow>>,
}

impl NgramParams {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    /// Row of the longest observed suffix of `context` and the number of
    /// backoff steps taken to reach it.
    fn lookup(&self, context: &[TokenId]) -> (&LogRow, usize) {
        let max = context.len().min(self.order - 1);
        for len in (0..=max).rev() {
            let ctx = &context[context.len() - len..];
            if let Some(row) = self.levels[len].get(ctx) {
                return (row, max - len);
            }
        }
        unreachable!("unigram row always exists")
    }

    /// Stupid-backoff score of `token` after `context` (left-padded with
    /// `<bos>`). Not normalized once a backoff step occurs.
    pub fn backoff_score(&self, context: &[TokenId], token: TokenId) -> f64 {
        if !in_event_space(token) {
            return 0.0;
        }
        let (row, steps) = self.lookup(context);
        BACKOFF_FACTOR.powi(steps as i32) * row.prob(token)
    }

    /// Normalized conditional `p(token | context)`.
    pub fn conditional(&self, context: &[TokenId], token: TokenId) -> f64 {
        if !in_event_space(token) {
            return 0.0;
        }
        self.lookup(context).0.prob(token)
    }

    pub fn distribution(&self, context: &[TokenId], vocab_len: usize) -> Vec<f64> {
        self.lookup(context).0.dense_where(vocab_len, in_event_space)
    }

    fn to_stored(&self) -> StoredParams {
        let levels = self
            .levels
            .iter()
            .map(|level| {
                let mut rows: Vec<ContextRow> = level
                    .iter()
                    .map(|(c, r)| ContextRow {
                        context: c.clone(),
                        row: r.clone(),
                    })
                    .collect();
                rows.sort_by(|a, b| a.context.cmp(&b.context));
                rows
            })
            .collect();
        StoredParams {
            order: self.order,
            add_k: self.add_k,
            levels,
        }
    }

    fn from_stored(s: StoredParams) -> Result<Self> {
        if s.order < 1 || s.levels.len() != s.order {
            return Err(Error::ModelFormat(format!(
                "order {} with {} levels",
                s.order,
                s.levels.len()
            )));
        }
        let levels: Vec<HashMap<_, _>> = s
            .levels
            .into_iter()
            .map(|rows| rows.into_iter().map(|r| (r.context, r.row)).collect())
            .collect();
        if !levels[0].contains_key(&Vec::new()) {
            return Err(Error::ModelFormat("missing unigram row".into()));
        }
        Ok(Self {
            order: s.order,
            add_k: s.add_k,
            levels,
        })
    }
}

/// Counts n-grams over `<bos>`-padded sentences with a trailing `<eos>`.
pub fn train_ngram(
    vocab: &Vocabulary,
    corpus: &[Sentence],
    order: usize,
    add_k: f64,
) -> Result<NgramParams> {
    if order < 1 {
        return Err(Error::InvalidConfig(format!("n-gram order must be >= 1, got {order}")));
    }
    if !(add_k > 0.0) {
        return Err(Error::InvalidConfig(format!("add_k must be > 0, got {add_k}")));
    }
    if corpus.is_empty() {
        return Err(Error::NoData);
    }
    let support = vocab.ids().filter(|&id| in_event_space(id)).count();
    let mut counts: Vec<BTreeMap<Vec<TokenId>, BTreeMap<TokenId, f64>>> =
        vec![BTreeMap::new(); order];
    for sent in corpus {
        let mut padded = vec![TokenId::BOS; order - 1];
        padded.extend_from_slice(sent.ids());
        padded.push(TokenId::EOS);
        for pos in order - 1..padded.len() {
            let tok = padded[pos];
            if !in_event_space(tok) {
                continue;
            }
            for (len, level) in counts.iter_mut().enumerate() {
                let ctx = padded[pos - len..pos].to_vec();
                *level.entry(ctx).or_default().entry(tok).or_default() += 1.0;
            }
        }
    }
    let levels: Vec<HashMap<Vec<TokenId>, LogRow>> = counts
        .into_iter()
        .map(|level| {
            level
                .into_iter()
                .map(|(ctx, row)| (ctx, LogRow::from_counts(&row, support, add_k)))
                .collect()
        })
        .collect();
    if !levels[0].contains_key(&Vec::new()) {
        return Err(Error::NoData);
    }
    Ok(NgramParams {
        order,
        add_k,
        levels,
    })
}

/// History carried between steps: the last `order - 1` tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgramState {
    history: Vec<TokenId>,
}

impl NgramState {
    pub fn history(&self) -> &[TokenId] {
        &self.history
    }
}

/// N-gram model bound to its vocabulary.
#[derive(Clone, Debug)]
pub struct NgramModel {
    vocab: Vocabulary,
    params: NgramParams,
}

impl NgramModel {
    pub fn new(vocab: Vocabulary, params: NgramParams) -> Self {
        Self { vocab, params }
    }

    pub fn train(vocab: Vocabulary, corpus: &[Sentence], order: usize, add_k: f64) -> Result<Self> {
        let params = train_ngram(&vocab, corpus, order, add_k)?;
        Ok(Self::new(vocab, params))
    }

    /// Trains on raw lines, building the vocabulary from them.
    pub fn train_on_text<S: AsRef<str>>(lines: &[S], order: usize, add_k: f64) -> Result<Self> {
        let toks: Vec<Vec<String>> = lines
            .iter()
            .map(|l| crate::corpus::tokenize(l.as_ref()))
            .collect();
        let vocab = crate::corpus::build_vocab(&toks, 1)?;
        let sents = lines
            .iter()
            .map(|l| vocab.encode(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::train(vocab, &sents, order, add_k)
    }

    pub fn params(&self) -> &NgramParams {
        &self.params
    }

    pub fn start(&self) -> NgramState {
        NgramState {
            history: vec![TokenId::BOS; self.params.order - 1],
        }
    }

    pub fn push(&self, state: &NgramState, token: TokenId) -> NgramState {
        let mut history = state.history.clone();
        if !history.is_empty() {
            history.remove(0);
            history.push(token);
        }
        NgramState { history }
    }

    /// Probability of the (possibly multi-piece) token string `candidate`
    /// after `prefix`, bridged into this vocabulary and floored at 1e-8.
    pub fn lm_prob(&self, prefix: &[TokenId], candidate: &str) -> f64 {
        let mut state = self.start();
        for &t in prefix {
            state = self.push(&state, t);
        }
        let mut p = 1.0;
        for id in bridge_token(&self.vocab, candidate) {
            p *= self.params.conditional(&state.history, id);
            state = self.push(&state, id);
        }
        p.max(PROB_FLOOR)
    }

    /// `1 - lm_prob`.
    pub fn lm_penalty(&self, prefix: &[TokenId], candidate: &str) -> f64 {
        1.0 - self.lm_prob(prefix, candidate)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        model_file::save(path.as_ref(), MODEL_KIND, &self.vocab, &self.params.to_stored())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (vocab, stored) = model_file::load::<StoredParams>(path.as_ref(), MODEL_KIND)?;
        Ok(Self::new(vocab, NgramParams::from_stored(stored)?))
    }

    pub fn to_json(&self) -> Result<String> {
        model_file::to_json(MODEL_KIND, &self.vocab, &self.params.to_stored())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (vocab, stored) = model_file::from_json::<StoredParams>(MODEL_KIND, text)?;
        Ok(Self::new(vocab, NgramParams::from_stored(stored)?))
    }
}

impl IncrementalScorer for NgramModel {
    type State = NgramState;

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// The language model never looks at the source.
    fn init_state(&self, _source: &Sentence) -> Result<NgramState> {
        Ok(self.start())
    }

    fn next_dist(&self, state: &NgramState) -> Result<TokenDist> {
        TokenDist::from_weights(self.params.distribution(&state.history, self.vocab.len()))
    }

    fn advance(&self, state: &NgramState, token: TokenId) -> Result<NgramState> {
        if token.index() >= self.vocab.len() {
            return Err(Error::InvalidInput(format!("token {token} outside vocabulary")));
        }
        Ok(self.push(state, token))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> NgramModel {
        NgramModel::train_on_text(&["a b", "a c"], 2, 1.0).unwrap()
    }

    #[test]
    fn add_one_bigram_fixture() {
        let m = toy();
        let v = IncrementalScorer::vocabulary(&m);
        let a = v.id("a").unwrap();
        let b = v.id("b").unwrap();
        // counts: a -> {b:1, c:1}; event space {a, b, c, <eos>}
        assert!((m.params().conditional(&[a], b) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.lm_prob(&[a], "b") - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unseen_context_backs_off_to_unigram() {
        let m = toy();
        let v = IncrementalScorer::vocabulary(&m);
        let a = v.id("a").unwrap();
        let uni = m.params().conditional(&[], a);
        // <unk> never occurs as a context
        let score = m.params().backoff_score(&[TokenId::UNK], a);
        assert!((score - 0.4 * uni).abs() < 1e-15);
        assert!((m.params().conditional(&[TokenId::UNK], a) - uni).abs() < 1e-15);
    }

    #[test]
    fn invalid_order_and_training_determinism() {
        let v = Vocabulary::from_words(["a"]).unwrap();
        let s = vec![v.encode("a").unwrap()];
        assert!(matches!(train_ngram(&v, &s, 0, 1.0), Err(Error::InvalidConfig(_))));
        let a = NgramModel::train(v.clone(), &s, 3, 0.5).unwrap();
        let b = NgramModel::train(v, &s, 3, 0.5).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn bridged_candidate_multiplies_conditionals() {
        // vocabulary of 6 entries: reserved + wa, rd, x
        let m = NgramModel::train_on_text(&["x wa rd", "wa rd x", "x x"], 2, 0.5).unwrap();
        let v = IncrementalScorer::vocabulary(&m).clone();
        assert_eq!(v.len(), 6);
        let (x, wa, rd) = (v.id("x").unwrap(), v.id("wa").unwrap(), v.id("rd").unwrap());
        let expect = m.params().conditional(&[x], wa) * m.params().conditional(&[wa], rd);
        assert!((m.lm_prob(&[x], "ward") - expect).abs() < 1e-15);
        assert!(m.lm_prob(&[x], "ward") < m.lm_prob(&[x], "wa"));
    }

    #[test]
    fn unbridgeable_candidate_is_floored() {
        let m = toy();
        assert_eq!(m.lm_prob(&[], "zzz"), PROB_FLOOR);
        assert!((m.lm_penalty(&[], "zzz") - (1.0 - 1e-8)).abs() < 1e-16);
    }

    #[test]
    fn penalty_is_complement() {
        let m = toy();
        let v = IncrementalScorer::vocabulary(&m);
        let a = v.id("a").unwrap();
        let p = m.lm_prob(&[a], "c");
        assert!((m.lm_penalty(&[a], "c") - (1.0 - p)).abs() < 1e-15);
    }

    #[test]
    fn agreement_trained_lm_prefers_were() {
        let lines = [
            "But there were no buyers .",
            "there were many people .",
            "there were no cars .",
            "he was there .",
            "it was late .",
            "there were two dogs .",
        ];
        let m = NgramModel::train_on_text(&lines, 3, 0.1).unwrap();
        let v = IncrementalScorer::vocabulary(&m);
        let prefix = [v.id("But").unwrap(), v.id("there").unwrap()];
        assert!(m.lm_penalty(&prefix, "were") < m.lm_penalty(&prefix, "was"));
    }

    #[test]
    fn json_round_trip() {
        let m = toy();
        let back = NgramModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.params(), m.params());
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one(lines in prop::collection::vec("[a-d]( [a-d]){0,5}", 1..8), prefix in prop::collection::vec(0u32..7, 0..4), order in 1usize..4) {
            let m = NgramModel::train_on_text(&lines, order, 0.3).unwrap();
            let v = IncrementalScorer::vocabulary(&m).clone();
            let prefix: Vec<TokenId> = prefix.into_iter().map(|i| TokenId(i % v.len() as u32)).collect();
            let mut st = m.start();
            for &t in &prefix { st = m.push(&st, t); }
            let total: f64 = v.ids().map(|id| m.params().conditional(st.history(), id)).sum();
            prop_assert!((total - 1.0).abs() < 1e-6);
            for id in v.ids().skip(3) {
                let pen = m.lm_penalty(&prefix, v.token(id));
                prop_assert!((0.0..=1.0 - 1e-8).contains(&pen));
            }
        }

        #[test]
        fn adding_a_sentence_never_lowers_its_bigrams(base in prop::collection::vec(prop::sample::subsequence(vec!["a", "b", "c", "d", "e"], 1..5), 1..6), order_seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            // new sentence with distinct tokens, checked on contexts already observed
            let mut words = ["a", "b", "c", "d", "e"];
            words.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(order_seed));
            let fresh: Vec<&str> = words[..3].to_vec();
            let vocab = Vocabulary::from_words(["a", "b", "c", "d", "e"]).unwrap();
            let enc = |ws: &[&str]| vocab.encode(&ws.join(" ")).unwrap();
            let before_corpus: Vec<Sentence> = base.iter().map(|s| enc(s)).collect();
            let mut after_corpus = before_corpus.clone();
            after_corpus.push(enc(&fresh));
            let before = train_ngram(&vocab, &before_corpus, 2, 0.5).unwrap();
            let after = train_ngram(&vocab, &after_corpus, 2, 0.5).unwrap();
            let ids: Vec<TokenId> = std::iter::once(TokenId::BOS).chain(enc(&fresh).ids().iter().copied()).chain(std::iter::once(TokenId::EOS)).collect();
            for w in ids.windows(2) {
                if before.levels[1].contains_key(&vec![w[0]]) {
                    prop_assert!(after.conditional(&[w[0]], w[1]) >= before.conditional(&[w[0]], w[1]) - 1e-15);
                }
            }
        }
    }
}
