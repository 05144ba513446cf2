//! Softmax gradient boosting over histogram-binned features.

use super::{check_training, ClassifierError, GbdtParams, Prediction};
use crate::label::ClassLabel;
use crate::scalar::Real;

const MIN_HESSIAN: f64 = 1e-16;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    /// Expand every node of a level before the next, up to `max_depth`.
    Levelwise,
    /// Expand the leaf with the largest gain until `max_leaves`.
    Leafwise,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: T,
        left: u32,
        right: u32,
    },
    Leaf {
        weight: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> Tree<T> {
    pub fn eval(&self, x: &[T]) -> T {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { weight } => return *weight,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature as usize] <= *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel<T> {
    pub growth: Growth,
    pub n_classes: usize,
    pub eta: T,
    pub dim: usize,
    /// `rounds × n_classes` trees; tree `r * n_classes + k` adds to class `k`.
    pub trees: Vec<Tree<T>>,
    /// Mean training log-loss before the first round and after each round.
    pub loss_history: Vec<f64>,
}

/// Quantile cut points of one feature; a value falls in bin `#{t < x}`.
fn thresholds<T: Real>(column: &mut [T], bins: usize) -> Vec<T> {
    column.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
    let n = column.len();
    let max = column[n - 1];
    let mut distinct: Vec<T> = column.to_vec();
    distinct.dedup();
    let mut cuts = if distinct.len() <= bins {
        distinct
    } else {
        let mut c: Vec<T> = (1..bins).map(|k| column[k * n / bins - 1]).collect();
        c.dedup();
        c
    };
    cuts.retain(|t| *t < max);
    cuts
}

struct Binned {
    n: usize,
    dim: usize,
    bins: Vec<u8>,
    offsets: Vec<usize>,
    total_bins: usize,
}

fn bin_features<T: Real>(data: &[T], dim: usize, bins: usize) -> (Binned, Vec<Vec<T>>) {
    let n = data.len() / dim;
    let mut cuts = Vec::with_capacity(dim);
    let mut offsets = Vec::with_capacity(dim + 1);
    let mut total = 0;
    for j in 0..dim {
        let mut col: Vec<T> = (0..n).map(|i| data[i * dim + j]).collect();
        let t = thresholds(&mut col, bins);
        offsets.push(total);
        total += t.len() + 1;
        cuts.push(t);
    }
    offsets.push(total);
    let mut binned = vec![0u8; n * dim];
    for i in 0..n {
        for j in 0..dim {
            let x = data[i * dim + j];
            binned[i * dim + j] = cuts[j].partition_point(|t| *t < x) as u8;
        }
    }
    (Binned { n, dim, bins: binned, offsets, total_bins: total }, cuts)
}

#[derive(Clone, Copy, Default)]
struct Cell {
    g: f64,
    h: f64,
    n: u32,
}

#[derive(Clone, Copy)]
struct SplitChoice {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct Grower<'a> {
    b: &'a Binned,
    g: &'a [f64],
    h: &'a [f64],
    p: &'a GbdtParams,
}

impl Grower<'_> {
    fn histogram(&self, rows: &[u32]) -> Vec<Cell> {
        let mut hist = vec![Cell::default(); self.b.total_bins];
        for &r in rows {
            let r = r as usize;
            let (g, h) = (self.g[r], self.h[r]);
            let binned = &self.b.bins[r * self.b.dim..(r + 1) * self.b.dim];
            for (j, &bin) in binned.iter().enumerate() {
                let c = &mut hist[self.b.offsets[j] + bin as usize];
                c.g += g;
                c.h += h;
                c.n += 1;
            }
        }
        hist
    }

    fn best_split(&self, rows: &[u32]) -> Option<SplitChoice> {
        let msl = self.p.min_samples_leaf as u32;
        if (rows.len() as u32) < 2 * msl {
            return None;
        }
        let hist = self.histogram(rows);
        let lambda = self.p.lambda;
        let (gt, ht) = rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + self.g[r as usize], b + self.h[r as usize]));
        let nt = rows.len() as u32;
        let parent = gt * gt / (ht + lambda);
        let mut best: Option<SplitChoice> = None;
        for j in 0..self.b.dim {
            let cells = &hist[self.b.offsets[j]..self.b.offsets[j + 1]];
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
            for (bin, c) in cells[..cells.len() - 1].iter().enumerate() {
                gl += c.g;
                hl += c.h;
                nl += c.n;
                let nr = nt - nl;
                if nl < msl {
                    continue;
                }
                if nr < msl {
                    break;
                }
                let (gr, hr) = (gt - gl, ht - hl);
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitChoice { gain, feature: j, bin });
                }
            }
        }
        best
    }

    fn leaf_weight(&self, rows: &[u32]) -> f64 {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + self.g[r as usize], b + self.h[r as usize]));
        -self.p.eta * g / (h + self.p.lambda)
    }

    fn partition(&self, rows: &[u32], s: SplitChoice) -> (Vec<u32>, Vec<u32>) {
        rows.iter().partition(|&&r| usize::from(self.b.bins[r as usize * self.b.dim + s.feature]) <= s.bin)
    }
}

struct Open {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    split: Option<SplitChoice>,
}

/// Grows one tree; returns it with per-leaf row sets for the training update.
fn grow<T: Real>(gr: &Grower<'_>, cuts: &[Vec<T>], growth: Growth, n_rows: usize) -> (Tree<T>, Vec<(Vec<u32>, T)>) {
    let mut nodes: Vec<Node<T>> = vec![Node::Leaf { weight: T::zero() }];
    let mut leaves = Vec::new();
    let all: Vec<u32> = (0..n_rows as u32).collect();
    let mut open = vec![Open { node: 0, split: gr.best_split(&all), rows: all, depth: 0 }];
    let mut n_leaves = 1;

    loop {
        let pick = match growth {
            Growth::Levelwise => open.iter().position(|o| o.depth < gr.p.max_depth && o.split.is_some()),
            Growth::Leafwise => {
                if n_leaves >= gr.p.max_leaves {
                    None
                } else {
                    // largest gain, earliest node on ties
                    let mut best: Option<usize> = None;
                    for (i, o) in open.iter().enumerate() {
                        if let Some(s) = o.split {
                            if best.is_none_or(|b| s.gain > open[b].split.expect("has split").gain) {
                                best = Some(i);
                            }
                        }
                    }
                    best
                }
            }
        };
        let Some(i) = pick else { break };
        let o = open.remove(i);
        let s = o.split.expect("picked nodes have a split");
        let (lrows, rrows) = gr.partition(&o.rows, s);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { weight: T::zero() });
        nodes.push(Node::Leaf { weight: T::zero() });
        nodes[o.node] =
            Node::Split { feature: s.feature as u32, threshold: cuts[s.feature][s.bin], left: l as u32, right: r as u32 };
        n_leaves += 1;
        let depth = o.depth + 1;
        let child_split = |rows: &[u32]| match growth {
            Growth::Levelwise if depth >= gr.p.max_depth => None,
            _ => gr.best_split(rows),
        };
        let (ls, rs) = (child_split(&lrows), child_split(&rrows));
        // levelwise keeps breadth-first order by appending; leafwise order only breaks ties
        open.push(Open { node: l, rows: lrows, depth, split: ls });
        open.push(Open { node: r, rows: rrows, depth, split: rs });
    }

    for o in open {
        let w = T::from_f64_lossy(gr.leaf_weight(&o.rows));
        nodes[o.node] = Node::Leaf { weight: w };
        leaves.push((o.rows, w));
    }
    (Tree { nodes }, leaves)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn mean_log_loss(f: &[f64], k: usize, labels: &[ClassLabel]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let row = &f[i * k..(i + 1) * k];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - row[l.code()]
        })
        .sum();
    total / labels.len() as f64
}

pub fn gbdt_train<T: Real>(
    data: &[T],
    dim: usize,
    labels: &[ClassLabel],
    p: &GbdtParams,
    growth: Growth,
) -> Result<GbdtModel<T>, ClassifierError> {
    check_training(data, dim, labels)?;
    let k = ClassLabel::COUNT;
    let n = labels.len();
    let (binned, cuts) = bin_features(data, dim, p.histogram_bins);
    debug_assert_eq!(binned.n, n);
    let mut f = vec![0.0f64; n * k];
    let mut trees = Vec::with_capacity(p.rounds * k);
    let mut loss_history = vec![mean_log_loss(&f, k, labels)];
    let mut g = vec![vec![0.0; n]; k];
    let mut h = vec![vec![0.0; n]; k];
    for round in 0..p.rounds {
        for i in 0..n {
            let prob = softmax(&f[i * k..(i + 1) * k]);
            for c in 0..k {
                let y = if labels[i].code() == c { 1.0 } else { 0.0 };
                g[c][i] = prob[c] - y;
                h[c][i] = (2.0 * prob[c] * (1.0 - prob[c])).max(MIN_HESSIAN);
            }
        }
        for c in 0..k {
            let grower = Grower { b: &binned, g: &g[c], h: &h[c], p };
            let (tree, leaves) = grow(&grower, &cuts, growth, n);
            if tree.nodes.len() == 1 {
                log::debug!("round {round} class {c}: no split with positive gain");
            }
            for (rows, w) in leaves {
                let w = w.as_f64();
                for r in rows {
                    f[r as usize * k + c] += w;
                }
            }
            trees.push(tree);
        }
        loss_history.push(mean_log_loss(&f, k, labels));
    }
    Ok(GbdtModel { growth, n_classes: k, eta: T::from_f64_lossy(p.eta), dim, trees, loss_history })
}

impl<T: Real> GbdtModel<T> {
    pub fn rounds(&self) -> usize {
        self.trees.len() / self.n_classes.max(1)
    }

    pub fn logits(&self, x: &[T]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for (t, tree) in self.trees.iter().enumerate() {
            out[t % self.n_classes] += tree.eval(x).as_f64();
        }
        out
    }

    pub fn probabilities(&self, x: &[T]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Argmax of the class probabilities; ties go to the lowest class code.
    pub fn predict(&self, x: &[T]) -> Prediction {
        let probs = self.probabilities(x);
        let mut best = 0;
        for c in 1..probs.len() {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        Prediction {
            label: ClassLabel::from_code(best).expect("model covers every class code"),
            score: probs[best],
            scores: probs,
        }
    }
}
