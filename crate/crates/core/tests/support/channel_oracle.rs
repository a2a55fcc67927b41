//! Brute-force reference for the edit-channel model: enumerates every
//! monotone alignment path explicitly instead of running the forward DP.

use std::collections::BTreeMap;

use gecdi::channel::{ChannelParams, EventPriors, LogRow, LogTable};
use gecdi::vocab::{TokenId, Vocabulary};
use rand::Rng;

/// Dense copy of the parameters, indexed by raw ids.
pub struct Raw {
    pub v: usize,
    pub copy: f64,
    pub sub: f64,
    pub ins: f64,
    pub del: f64,
    pub sub_table: Vec<Vec<f64>>,
    pub ins_dist: Vec<f64>,
    pub bigram: Vec<Vec<f64>>,
    pub mix: f64,
    pub window: usize,
}

impl Raw {
    pub fn from_params(p: &ChannelParams, vocab: &Vocabulary) -> Self {
        let v = vocab.len();
        let id = |i: usize| TokenId(i as u32);
        let [copy, sub, ins, del] = p.priors.probs();
        Raw {
            v,
            copy,
            sub,
            ins,
            del,
            sub_table: (0..v)
                .map(|u| (0..v).map(|w| if w >= 2 { p.sub_table.prob(id(u), id(w)) } else { 0.0 }).collect())
                .collect(),
            ins_dist: (0..v).map(|w| if w >= 2 { p.ins_dist.prob(id(w)) } else { 0.0 }).collect(),
            bigram: (0..v)
                .map(|u| (0..v).map(|w| if w >= 1 { p.bigram.prob(id(u), id(w)) } else { 0.0 }).collect())
                .collect(),
            mix: p.mix,
            window: p.skip_window,
        }
    }

    /// Every channel move out of state `j` as (output, landing state or None
    /// for end of sentence, weight before local normalization).
    fn moves(&self, x: &[usize], j: usize) -> Vec<(usize, Option<usize>, f64)> {
        let n = x.len();
        let mut out = Vec::new();
        for w in 2..self.v {
            out.push((w, Some(j), self.ins * self.ins_dist[w]));
        }
        for d in 0..=self.window {
            let k = j + d;
            if k >= n {
                break;
            }
            let skip = self.del.powi(d as i32);
            out.push((x[k], Some(k + 1), skip * self.copy));
            for w in 2..self.v {
                out.push((w, Some(k + 1), skip * self.sub * self.sub_table[x[k]][w]));
            }
        }
        if n - j <= self.window {
            out.push((1, None, self.del.powi((n - j) as i32) * (self.copy + self.sub)));
        }
        out
    }

    /// Probability that the process emits exactly `y` (ending in `<eos>` when
    /// `y` does; otherwise the probability of `y` as an output prefix).
    pub fn path_sum(&self, x: &[usize], y: &[usize]) -> f64 {
        self.walk(x, y, 0, 0, 0)
    }

    fn walk(&self, x: &[usize], y: &[usize], t: usize, j: usize, prev: usize) -> f64 {
        if t == y.len() {
            return 1.0;
        }
        let target = y[t];
        let moves = self.moves(x, j);
        let z: f64 = moves.iter().map(|m| m.2).sum();
        let mut total = 0.0;
        for (w, land, weight) in moves {
            if w != target || weight == 0.0 {
                continue;
            }
            let p = self.mix * weight / z;
            total += match land {
                Some(k) => p * self.walk(x, y, t + 1, k, w),
                None if t + 1 == y.len() => p,
                None => 0.0,
            };
        }
        let bg = (1.0 - self.mix) * self.bigram[prev][target];
        if bg > 0.0 {
            if target == 1 {
                if t + 1 == y.len() {
                    total += bg;
                }
            } else {
                total += bg * self.walk(x, y, t + 1, j, target);
            }
        }
        total
    }
}

fn random_row<R: Rng>(rng: &mut R, support: impl Iterator<Item = TokenId>) -> LogRow {
    let ids: Vec<TokenId> = support.collect();
    let w: Vec<f64> = ids.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / s).collect();
    LogRow::from_probs(ids, &probs)
}

/// Random but valid channel parameters over `vocab`.
pub fn random_params<R: Rng>(rng: &mut R, vocab: &Vocabulary, window: usize, mix: f64) -> ChannelParams {
    let v = vocab.len() as u32;
    let emit = || (2..v).map(TokenId);
    let next = || (1..v).map(TokenId);
    let pri: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = pri.iter().sum();
    let mut sub_rows = BTreeMap::new();
    let mut bg_rows = BTreeMap::new();
    for u in 0..v {
        sub_rows.insert(TokenId(u), random_row(rng, emit()));
        bg_rows.insert(TokenId(u), random_row(rng, next()));
    }
    ChannelParams {
        priors: EventPriors::from_probs([pri[0] / s, pri[1] / s, pri[2] / s, pri[3] / s]),
        sub_table: LogTable { rows: sub_rows, default: LogRow::uniform((v - 2) as usize) },
        ins_dist: random_row(rng, emit()),
        bigram: LogTable { rows: bg_rows, default: LogRow::uniform((v - 1) as usize) },
        mix,
        skip_window: window,
        add_k: 1.0,
    }
}

/// All sequences over `alphabet` of length `0..=max_len`.
pub fn all_sequences(alphabet: &[usize], max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &a in alphabet {
                let mut t: Vec<usize> = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
