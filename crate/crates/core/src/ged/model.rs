//! Trained and oracle error detectors, and their use as decoding critics.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::features::{ged_features, BigramTable, PrefixView, FEATURE_VERSION, NUM_FEATURES};
use super::labels::GedLabel;
use super::logreg::{self, Softmax, TrainConfig};
use crate::align::PrefixRow;
use crate::critic::{Critic, CriticKind, Judgement};
use crate::dist::entropy;
use crate::error::{Error, Result};
use crate::model_file;
use crate::scorer::ErasedState;
use crate::vocab::{Sentence, TokenId, Vocabulary};

pub const MODEL_KIND: &str = "ged";
pub const NUM_LABELS: usize = 4;

/// One training example: is `next` a correct continuation of `prefix`?
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GedExample {
    pub source: String,
    pub prefix: Vec<String>,
    pub next: String,
    pub label: GedLabel,
}

impl GedExample {
    pub fn features(&self, bigrams: &BigramTable) -> [f64; NUM_FEATURES] {
        let src = crate::corpus::tokenize(&self.source);
        let view = PrefixView::from_prefix(&src, &self.prefix);
        ged_features(&src, &view, &self.next, bigrams)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GedParams {
    pub feature_version: u32,
    pub classifier: Softmax,
    pub bigrams: BigramTable,
}

/// Feature-based four-way classifier.
#[derive(Clone, Debug)]
pub struct GedModel {
    vocab: Vocabulary,
    params: GedParams,
}

fn example_vocab(examples: &[GedExample], extra: &[Vec<String>]) -> Result<Vocabulary> {
    let mut words = BTreeSet::new();
    for ex in examples {
        words.extend(crate::corpus::tokenize(&ex.source));
        words.extend(ex.prefix.iter().cloned());
        words.insert(ex.next.clone());
    }
    for s in extra {
        words.extend(s.iter().cloned());
    }
    for r in [crate::vocab::BOS, crate::vocab::EOS, crate::vocab::UNK] {
        words.remove(r);
    }
    Vocabulary::from_words(words)
}

impl GedModel {
    pub fn new(vocab: Vocabulary, params: GedParams) -> Result<Self> {
        if params.feature_version != FEATURE_VERSION {
            return Err(Error::ModelFormat(format!(
                "feature version {} (expected {FEATURE_VERSION})",
                params.feature_version
            )));
        }
        params.classifier.validate()?;
        if params.classifier.classes != NUM_LABELS || params.classifier.features != NUM_FEATURES {
            return Err(Error::ModelFormat("classifier shape".into()));
        }
        Ok(Self { vocab, params })
    }

    /// Trains on `examples`; `references` supplies the bigram table behind
    /// the plausibility features.
    pub fn train(
        examples: &[GedExample],
        references: &[Vec<String>],
        cfg: &TrainConfig,
    ) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::NoData);
        }
        let bigrams = BigramTable::from_sentences(references);
        let xs: Vec<Vec<f64>> = examples.iter().map(|e| e.features(&bigrams).to_vec()).collect();
        let ys: Vec<usize> = examples.iter().map(|e| e.label.index()).collect();
        let classifier = logreg::train(&xs, &ys, NUM_LABELS, cfg)?;
        let vocab = example_vocab(examples, references)?;
        Self::new(
            vocab,
            GedParams {
                feature_version: FEATURE_VERSION,
                classifier,
                bigrams,
            },
        )
    }

    pub fn params(&self) -> &GedParams {
        &self.params
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Label distribution in `GedLabel::ALL` order.
    pub fn label_dist(
        &self,
        source: &[impl AsRef<str>],
        view: &PrefixView,
        candidate: &str,
    ) -> [f64; NUM_LABELS] {
        let f = ged_features(source, view, candidate, &self.params.bigrams);
        let p = self.params.classifier.predict(&f);
        [p[0], p[1], p[2], p[3]]
    }

    /// `(1 - p(COR), label distribution)`.
    pub fn penalty(
        &self,
        source: &[impl AsRef<str>],
        prefix: &[impl AsRef<str>],
        candidate: &str,
    ) -> (f64, [f64; NUM_LABELS]) {
        let view = PrefixView::from_prefix(source, prefix);
        let d = self.label_dist(source, &view, candidate);
        ((1.0 - d[GedLabel::Cor.index()]).clamp(0.0, 1.0), d)
    }

    pub fn predict_label(&self, ex: &GedExample) -> GedLabel {
        let p = self.params.classifier.predict(&ex.features(&self.params.bigrams));
        GedLabel::from_index(logreg::argmax(&p)).expect("four classes")
    }

    pub fn accuracy(&self, examples: &[GedExample]) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let hits = examples
            .iter()
            .filter(|e| self.predict_label(e) == e.label)
            .count();
        hits as f64 / examples.len() as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        model_file::save(path.as_ref(), MODEL_KIND, &self.vocab, &self.params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (vocab, params) = model_file::load(path.as_ref(), MODEL_KIND)?;
        Self::new(vocab, params)
    }

    pub fn to_json(&self) -> Result<String> {
        model_file::to_json(MODEL_KIND, &self.vocab, &self.params)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (vocab, params) = model_file::from_json(MODEL_KIND, text)?;
        Self::new(vocab, params)
    }
}

struct GedState {
    source: Arc<Vec<String>>,
    view: PrefixView,
}

/// A trained detector seen through the base model's vocabulary.
pub struct GedCritic {
    model: Arc<GedModel>,
    words: Vec<String>,
}

impl GedCritic {
    pub fn new(model: Arc<GedModel>, base_vocab: &Vocabulary) -> Self {
        Self {
            model,
            words: base_vocab.tokens().to_vec(),
        }
    }

    fn word(&self, id: TokenId) -> Result<&str> {
        self.words
            .get(id.index())
            .map(String::as_str)
            .ok_or_else(|| Error::InvalidInput(format!("token {id} outside the base vocabulary")))
    }
}

fn label_entropy(d: &[f64]) -> f64 {
    entropy(d).unwrap_or(0.0)
}

impl Critic for GedCritic {
    fn kind(&self) -> CriticKind {
        CriticKind::Ged
    }

    fn start(&self, source: &Sentence) -> Result<ErasedState> {
        let src: Vec<String> = source
            .ids()
            .iter()
            .map(|&t| self.word(t).map(str::to_string))
            .collect::<Result<_>>()?;
        let view = PrefixView::start(&src);
        Ok(ErasedState::new(GedState {
            source: Arc::new(src),
            view,
        }))
    }

    fn judge(&self, state: &ErasedState, candidates: &[TokenId]) -> Result<Vec<Judgement>> {
        let st = state.downcast::<GedState>()?;
        let max_entropy = (NUM_LABELS as f64).ln();
        candidates
            .iter()
            .map(|&c| {
                let d = self.model.label_dist(&st.source, &st.view, self.word(c)?);
                Ok(Judgement {
                    penalty: (1.0 - d[GedLabel::Cor.index()]).clamp(0.0, 1.0),
                    entropy: label_entropy(&d),
                    max_entropy,
                })
            })
            .collect()
    }

    fn advance(&self, state: &ErasedState, token: TokenId) -> Result<ErasedState> {
        let st = state.downcast::<GedState>()?;
        Ok(ErasedState::new(GedState {
            source: st.source.clone(),
            view: st.view.push(&st.source, self.word(token)?),
        }))
    }
}

/// Oracle label of appending `candidate` after the prefix whose alignment
/// row against `reference` is `row`. The expected continuation is the
/// reference token at the alignment frontier (`<eos>` past its end).
pub fn oracle_label<T: PartialEq>(reference: &[T], row: &PrefixRow, candidate: Option<&T>) -> GedLabel {
    let (frontier, _) = row.frontier();
    let expected = reference.get(frontier);
    if candidate == expected {
        GedLabel::Cor
    } else if let Some(c) = candidate {
        if reference[frontier.min(reference.len())..].iter().skip(1).any(|r| r == c) {
            GedLabel::Miss
        } else {
            GedLabel::Sub
        }
    } else {
        GedLabel::Miss
    }
}

struct OracleState {
    reference: Arc<Vec<TokenId>>,
    row: PrefixRow,
}

/// Test-time critic that knows the reference of every source it is asked
/// about: penalty 0 for the reference continuation, 1 for anything else.
pub struct OracleGed {
    references: HashMap<Vec<TokenId>, Arc<Vec<TokenId>>>,
}

impl OracleGed {
    /// Keeps the first reference given for each distinct source.
    pub fn new(pairs: impl IntoIterator<Item = (Sentence, Sentence)>) -> Self {
        let mut references = HashMap::new();
        for (src, reference) in pairs {
            references
                .entry(src.ids().to_vec())
                .or_insert_with(|| Arc::new(reference.ids().to_vec()));
        }
        Self { references }
    }
}

impl Critic for OracleGed {
    fn kind(&self) -> CriticKind {
        CriticKind::Ged
    }

    fn start(&self, source: &Sentence) -> Result<ErasedState> {
        let reference = self
            .references
            .get(source.ids())
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no reference for source {:?}", source.raw())))?;
        let row = PrefixRow::new(reference.len());
        Ok(ErasedState::new(OracleState { reference, row }))
    }

    fn judge(&self, state: &ErasedState, candidates: &[TokenId]) -> Result<Vec<Judgement>> {
        let st = state.downcast::<OracleState>()?;
        Ok(candidates
            .iter()
            .map(|&c| {
                let cand = (c != TokenId::EOS).then_some(&c);
                let label = oracle_label(&st.reference, &st.row, cand);
                Judgement {
                    penalty: if label == GedLabel::Cor { 0.0 } else { 1.0 },
                    entropy: 0.0,
                    max_entropy: (NUM_LABELS as f64).ln(),
                }
            })
            .collect())
    }

    fn advance(&self, state: &ErasedState, token: TokenId) -> Result<ErasedState> {
        let st = state.downcast::<OracleState>()?;
        Ok(ErasedState::new(OracleState {
            reference: st.reference.clone(),
            row: st.row.extend(&st.reference, &token),
        }))
    }
}
