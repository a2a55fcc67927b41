//! Label oracle by enumeration of every minimal alignment.

use gecdi::ged::logreg::TrainConfig;
use gecdi::ged::{GedExample, GedLabel, GedModel};

/// All minimal alignments, with labels from each, for tiny inputs.
pub fn brute_force_labels(hyp: &[&str], reference: &[&str]) -> Vec<GedLabel> {
    // enumerate every monotone alignment as a sequence of moves
    fn walk(h: &[&str], r: &[&str], i: usize, j: usize, cost: usize, miss: bool, acc: &mut Vec<GedLabel>, out: &mut Vec<(usize, Vec<GedLabel>, usize)>, order: usize) {
        if i == r.len() && j == h.len() {
            out.push((cost, acc.clone(), order));
            return;
        }
        if j < h.len() && i < r.len() {
            let same = h[j] == r[i];
            acc.push(if miss { GedLabel::Miss } else if same { GedLabel::Cor } else { GedLabel::Sub });
            walk(h, r, i + 1, j + 1, cost + usize::from(!same), false, acc, out, order * 4);
            acc.pop();
        }
        if i < r.len() {
            walk(h, r, i + 1, j, cost + 1, true, acc, out, order * 4 + 1);
        }
        if j < h.len() {
            acc.push(if miss { GedLabel::Miss } else { GedLabel::Red });
            walk(h, r, i, j + 1, cost + 1, false, acc, out, order * 4 + 2);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    walk(hyp, reference, 0, 0, 0, false, &mut Vec::new(), &mut out, 0);
    let best = out.iter().map(|o| o.0).min().unwrap();
    let labelings: Vec<Vec<GedLabel>> = out.into_iter().filter(|o| o.0 == best).map(|o| o.1).collect();
    labelings.iter().all(|l| *l == labelings[0]).then(|| labelings[0].clone()).expect("unique labeling")
}

/// Detector trained on a handful of hand-labeled steps over `a b c`.
pub fn toy_ged() -> GedModel {
    let ex = |s: &str, p: &str, n: &str, l| GedExample {
        source: s.into(),
        prefix: p.split_whitespace().map(String::from).collect(),
        next: n.into(),
        label: l,
    };
    let data = vec![
        ex("a b", "", "a", GedLabel::Cor),
        ex("a b", "a", "b", GedLabel::Cor),
        ex("a b", "a", "c", GedLabel::Sub),
        ex("a b", "a b", "b", GedLabel::Red),
        ex("a b", "", "b", GedLabel::Miss),
        ex("c", "", "c", GedLabel::Cor),
        ex("c", "c", "<eos>", GedLabel::Cor),
    ];
    let refs = vec![vec!["a".to_string(), "b".into()], vec!["c".into()]];
    GedModel::train(&data, &refs, &TrainConfig::default()).unwrap()
}
