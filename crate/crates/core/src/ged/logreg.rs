//! Multinomial logistic regression trained by full-batch gradient descent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 2.0,
            l2: 1e-4,
        }
    }
}

/// Row-major `classes x features` weight matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Softmax {
    pub classes: usize,
    pub features: usize,
    pub weights: Vec<f64>,
}

impl Softmax {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            classes,
            features,
            weights: vec![0.0; classes * features],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.classes * self.features {
            return Err(Error::ModelFormat(format!(
                "weight matrix has {} entries, expected {}x{}",
                self.weights.len(),
                self.classes,
                self.features
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::ModelFormat("non-finite weight".into()));
        }
        Ok(())
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.features)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Mean cross-entropy plus `l2/2 * |W|^2`, and its gradient.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.weights.len()];
        let mut loss = 0.0;
        let n = xs.len().max(1) as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let p = self.predict(x);
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            for (c, &pc) in p.iter().enumerate() {
                let err = pc - f64::from(c == y);
                for (g, v) in grad[c * self.features..(c + 1) * self.features]
                    .iter_mut()
                    .zip(x)
                {
                    *g += err * v;
                }
            }
        }
        loss /= n;
        for g in &mut grad {
            *g /= n;
        }
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        loss += 0.5 * l2 * sq;
        for (g, w) in grad.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        (loss, grad)
    }

    pub fn accuracy(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        let hits = xs
            .iter()
            .zip(ys)
            .filter(|(x, &y)| argmax(&self.predict(x)) == y)
            .count();
        hits as f64 / xs.len() as f64
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Examples with identical feature vectors merged, keeping per-class counts.
struct Grouped {
    xs: Vec<Vec<f64>>,
    counts: Vec<Vec<f64>>,
    n: f64,
}

impl Grouped {
    fn new(xs: &[Vec<f64>], ys: &[usize], classes: usize) -> Self {
        let mut groups: BTreeMap<Vec<u64>, (usize, Vec<f64>)> = BTreeMap::new();
        for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
            let key = x.iter().map(|v| v.to_bits()).collect();
            groups.entry(key).or_insert_with(|| (i, vec![0.0; classes])).1[y] += 1.0;
        }
        let (firsts, counts): (Vec<usize>, Vec<Vec<f64>>) = groups.into_values().unzip();
        Self {
            xs: firsts.into_iter().map(|i| xs[i].clone()).collect(),
            counts,
            n: xs.len() as f64,
        }
    }

    /// Same objective as [`Softmax::loss_and_gradient`] on the ungrouped data.
    fn loss_and_gradient(&self, model: &Softmax, l2: f64) -> (f64, Vec<f64>) {
        let f = model.features;
        let mut grad = vec![0.0; model.weights.len()];
        let mut loss = 0.0;
        for (x, counts) in self.xs.iter().zip(&self.counts) {
            let p = model.predict(x);
            let total: f64 = counts.iter().sum();
            for (c, (&pc, &k)) in p.iter().zip(counts).enumerate() {
                if k > 0.0 {
                    loss -= k * pc.max(f64::MIN_POSITIVE).ln();
                }
                let err = total * pc - k;
                for (g, v) in grad[c * f..(c + 1) * f].iter_mut().zip(x) {
                    *g += err * v;
                }
            }
        }
        loss /= self.n;
        for g in &mut grad {
            *g /= self.n;
        }
        let sq: f64 = model.weights.iter().map(|w| w * w).sum();
        loss += 0.5 * l2 * sq;
        for (g, w) in grad.iter_mut().zip(&model.weights) {
            *g += l2 * w;
        }
        (loss, grad)
    }
}

/// Trains from zero weights. Fewer than two distinct labels only warns.
pub fn train(
    xs: &[Vec<f64>],
    ys: &[usize],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<Softmax> {
    if xs.is_empty() {
        return Err(Error::NoData);
    }
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("feature and label counts differ".into()));
    }
    let features = xs[0].len();
    if xs.iter().any(|x| x.len() != features) || ys.iter().any(|&y| y >= classes) {
        return Err(Error::InvalidInput("ragged features or label out of range".into()));
    }
    if !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "learning_rate {} and l2 {}",
            cfg.learning_rate, cfg.l2
        )));
    }
    let mut seen = vec![false; classes];
    for &y in ys {
        seen[y] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        log::warn!("degenerate training data: a single label class");
    }
    let data = Grouped::new(xs, ys, classes);
    log::debug!("{} examples, {} distinct feature vectors", xs.len(), data.xs.len());
    let mut model = Softmax::zeros(classes, features);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = data.loss_and_gradient(&model, cfg.l2);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
        if epoch % 100 == 0 {
            log::debug!("epoch {epoch}: loss {loss:.6}");
        }
    }
    Ok(model)
}
