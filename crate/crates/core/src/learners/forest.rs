//! Random forest of entropy trees grown best-first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ParamReader;
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxFeatures {
    /// `floor(sqrt(n_features))`, at least one.
    Sqrt,
    /// `ceil(fraction * n_features)`, clamped to `[1, n_features]`.
    Fraction(f64),
}

impl MaxFeatures {
    fn count(self, n: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n as f64).sqrt().floor() as usize,
            MaxFeatures::Fraction(f) => (f * n as f64).ceil() as usize,
        };
        k.clamp(1, n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_leaf_nodes: Option<usize>,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 10,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_leaf_nodes: None,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub(crate) fn from_reader(p: &ParamReader<'_>) -> Result<Self> {
        let max_features = match p.text("max_features", "auto") {
            Ok("auto") | Ok("sqrt") => MaxFeatures::Sqrt,
            Ok(other) => return Err(Error::Param(format!("RF.max_features: unknown `{other}`"))),
            Err(_) => MaxFeatures::Fraction(p.f64("max_features", 1.0)?),
        };
        Ok(ForestParams {
            n_estimators: p.usize("n_estimators", 10)?.max(1),
            min_samples_leaf: p.usize("min_samples_leaf", 1)?.max(1),
            min_samples_split: p.usize("min_samples_split", 2)?.max(2),
            max_leaf_nodes: p.opt_usize("max_leaf_nodes")?,
            max_features,
            max_depth: p.opt_usize("max_depth")?,
            bootstrap: true,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        positive: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A binary tree; rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(positive: bool) -> Self {
        Tree {
            nodes: vec![Node::Leaf { positive }],
        }
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn vote(&self, row: ArrayView1<'_, f64>) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive } => return positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

pub(crate) fn entropy(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    h(p) + h(1.0 - p)
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Best entropy split of `rows` over `features`, honouring the leaf minimum.
fn best_split(
    x: &Array2<f64>,
    y: &Array1<f64>,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = rows.len() as f64;
    let total_pos: f64 = rows.iter().map(|&r| y[r]).sum();
    let parent = entropy(total_pos, n);
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
        let mut left_pos = 0.0;
        for i in 0..order.len() - 1 {
            left_pos += y[order[i]];
            let (v, next) = (x[[order[i], f]], x[[order[i + 1], f]]);
            let n_left = i + 1;
            if v == next || n_left < min_leaf || order.len() - n_left < min_leaf {
                continue;
            }
            let nl = n_left as f64;
            let child = (nl * entropy(left_pos, nl) + (n - nl) * entropy(total_pos - left_pos, n - nl)) / n;
            let gain = parent - child;
            if best.is_none_or(|b| gain > b.gain + 1e-12) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(BestSplit {
                    gain,
                    feature: f,
                    threshold,
                });
            }
        }
    }
    best.filter(|b| b.gain > 0.0)
}

struct Candidate {
    gain: f64,
    seq: usize,
    node: usize,
    depth: usize,
    rows: Vec<usize>,
    split: BestSplit,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // largest weighted gain first, then creation order
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn grow_tree<R: Rng>(x: &Array2<f64>, y: &Array1<f64>, rows: Vec<usize>, p: &ForestParams, rng: &mut R) -> Tree {
    let n_features = x.ncols();
    let k = p.max_features.count(n_features);
    let max_leaves = p.max_leaf_nodes.unwrap_or(usize::MAX).max(2);
    let max_depth = p.max_depth.unwrap_or(usize::MAX);
    let mut nodes = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;

    let mut push = |nodes: &mut Vec<Node>, heap: &mut BinaryHeap<Candidate>, rows: Vec<usize>, depth: usize, rng: &mut R| {
        let pos = rows.iter().filter(|&&r| y[r] > 0.5).count();
        let node = nodes.len();
        nodes.push(Node::Leaf {
            positive: 2 * pos > rows.len(),
        });
        let pure = pos == 0 || pos == rows.len();
        if pure || depth >= max_depth || rows.len() < p.min_samples_split {
            return;
        }
        let features = sample(rng, n_features, k).into_vec();
        if let Some(split) = best_split(x, y, &rows, &features, p.min_samples_leaf) {
            heap.push(Candidate {
                gain: split.gain * rows.len() as f64,
                seq,
                node,
                depth,
                rows,
                split,
            });
            seq += 1;
        }
    };

    push(&mut nodes, &mut heap, rows, 0, rng);
    let mut leaves = 1;
    while leaves < max_leaves {
        let Some(c) = heap.pop() else { break };
        let (left, right): (Vec<usize>, Vec<usize>) = c
            .rows
            .iter()
            .partition(|&&r| x[[r, c.split.feature]] <= c.split.threshold);
        let l = nodes.len();
        push(&mut nodes, &mut heap, left, c.depth + 1, rng);
        let r = nodes.len();
        push(&mut nodes, &mut heap, right, c.depth + 1, rng);
        nodes[c.node] = Node::Split {
            feature: c.split.feature,
            threshold: c.split.threshold,
            left: l,
            right: r,
        };
        leaves += 1;
    }
    Tree { nodes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    n_features: usize,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Self {
        Forest { trees, n_features }
    }

    pub fn train(p: &ForestParams, x: &Array2<f64>, y: &Array1<f64>, seed: u64) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Training("empty training set".into()));
        }
        let n = x.nrows();
        let trees = (0..p.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut r = rng(derive_seed(seed, &[t as u64]));
                let rows: Vec<usize> = if p.bootstrap {
                    (0..n).map(|_| r.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_tree(x, y, rows, p, &mut r)
            })
            .collect();
        Ok(Forest {
            trees,
            n_features: x.ncols(),
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Fraction of trees voting positive.
    pub fn score(&self, x: &Array2<f64>) -> Vec<f64> {
        let m = self.trees.len().max(1) as f64;
        x.rows()
            .into_iter()
            .map(|row| self.trees.iter().filter(|t| t.vote(row)).count() as f64 / m)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn vote_fraction_of_constructed_forest() {
        let mut trees = vec![Tree::leaf(true); 7];
        trees.extend(vec![Tree::leaf(false); 3]);
        let f = Forest::from_trees(trees, 1);
        assert_eq!(f.score(&array![[0.0]]), vec![0.7]);
    }

    #[test]
    fn max_leaf_nodes_caps_tree() {
        let x = Array2::from_shape_fn((64, 2), |(i, j)| ((i >> (3 * j)) & 7) as f64);
        let y = Array1::from_shape_fn(64, |i| ((i ^ (i >> 3)) & 1) as f64);
        let p = ForestParams {
            n_estimators: 3,
            max_leaf_nodes: Some(5),
            max_features: MaxFeatures::Fraction(1.0),
            ..Default::default()
        };
        for t in Forest::train(&p, &x, &y, 4).unwrap().trees() {
            assert!(t.n_leaves() <= 5);
        }
    }

    #[test]
    fn max_depth_caps_tree() {
        let x = Array2::from_shape_fn((64, 1), |(i, _)| i as f64);
        let y = Array1::from_shape_fn(64, |i| (i % 2) as f64);
        let p = ForestParams {
            n_estimators: 2,
            max_depth: Some(3),
            ..Default::default()
        };
        for t in Forest::train(&p, &x, &y, 4).unwrap().trees() {
            assert!(t.depth() <= 3);
        }
    }

    #[test]
    fn feature_counts() {
        assert_eq!(MaxFeatures::Sqrt.count(100), 10);
        assert_eq!(MaxFeatures::Fraction(0.01).count(20), 1);
        assert_eq!(MaxFeatures::Fraction(0.5).count(5), 3);
        assert_eq!(MaxFeatures::Fraction(1.0).count(5), 5);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(0.0, 4.0), 0.0);
        assert_eq!(entropy(2.0, 4.0), 1.0);
    }
}
