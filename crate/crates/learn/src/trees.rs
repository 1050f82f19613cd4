//! Decision-tree blenders: gradient-boosted regression trees and an
//! extremely randomized trees classifier.

use bellnet_core::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Regression value, or class probabilities for classification.
    Leaf(Vec<f64>),
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: ArrayView1<f64>) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

fn mean(idx: &[usize], y: &[f64]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

/// Least-squares tree grown greedily to `max_depth`.
fn grow_regression(x: ArrayView2<f64>, y: &[f64], idx: Vec<usize>, depth: usize, max_depth: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    nodes.push(Node::Leaf(vec![mean(&idx, y)]));
    if depth >= max_depth || idx.len() < 2 {
        return me;
    }
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let n = idx.len() as f64;
    // maximize sum_L^2/n_L + sum_R^2/n_R, equivalent to minimizing the SSE
    let mut best: Option<(f64, usize, f64)> = None;
    let parent_score = total * total / n;
    let mut order = idx.clone();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]));
        let mut left = 0.0;
        for k in 0..order.len() - 1 {
            left += y[order[k]];
            let (xa, xb) = (x[(order[k], f)], x[(order[k + 1], f)]);
            if xa == xb {
                continue;
            }
            let nl = (k + 1) as f64;
            let right = total - left;
            let score = left * left / nl + right * right / (n - nl);
            if score > parent_score + 1e-15 && best.map_or(true, |b| score > b.0) {
                best = Some((score, f, 0.5 * (xa + xb)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return me;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[(i, feature)] <= threshold);
    let left = grow_regression(x, y, l, depth + 1, max_depth, nodes);
    let right = grow_regression(x, y, r, depth + 1, max_depth, nodes);
    nodes[me] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    me
}

/// Starting point of the boosted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoostInit {
    Constant(f64),
    /// Mean of the input row (the average member prediction when the inputs
    /// are member outputs).
    RowMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    pub init: BoostInit,
    pub shrinkage: f64,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy)]
pub struct BoostParams {
    pub trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 3,
            shrinkage: 0.1,
        }
    }
}

impl GradientBoosting {
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, init: BoostInit, p: BoostParams) -> Result<Self> {
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(Error::Usage("boosting needs matching, non-empty inputs".into()));
        }
        let mut model = Self {
            init,
            shrinkage: p.shrinkage,
            trees: Vec::with_capacity(p.trees),
        };
        let mut f: Vec<f64> = x.rows().into_iter().map(|r| model.base(r)).collect();
        let all: Vec<usize> = (0..x.nrows()).collect();
        for _ in 0..p.trees {
            let resid: Vec<f64> = y.iter().zip(&f).map(|(t, v)| t - v).collect();
            let mut nodes = Vec::new();
            grow_regression(x, &resid, all.clone(), 0, p.max_depth, &mut nodes);
            let tree = Tree { nodes };
            for (fi, row) in f.iter_mut().zip(x.rows()) {
                *fi += p.shrinkage * tree.leaf_for(row)[0];
            }
            model.trees.push(tree);
        }
        Ok(model)
    }

    fn base(&self, x: ArrayView1<f64>) -> f64 {
        match self.init {
            BoostInit::Constant(c) => c,
            BoostInit::RowMean => x.mean().unwrap_or(0.0),
        }
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        self.base(x) + self.shrinkage * self.trees.iter().map(|t| t.leaf_for(x)[0]).sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub trees: usize,
    /// Candidate features per split; `None` means `sqrt(width)`.
    pub max_features: Option<usize>,
    /// Smallest number of records a leaf may hold.
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_features: None,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraTrees {
    pub classes: usize,
    pub trees: Vec<Tree>,
}

fn gini(counts: &[f64], n: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

fn grow_extra(
    x: ArrayView2<f64>,
    y: &[usize],
    classes: usize,
    idx: Vec<usize>,
    k: usize,
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    let me = nodes.len();
    let mut counts = vec![0.0; classes];
    for &i in &idx {
        counts[y[i]] += 1.0;
    }
    let n = idx.len() as f64;
    nodes.push(Node::Leaf(counts.iter().map(|c| c / n).collect()));
    if idx.len() < 2 * min_leaf || counts.iter().filter(|&&c| c > 0.0).count() <= 1 {
        return me;
    }
    let parent = gini(&counts, n);
    let mut best: Option<(f64, usize, f64)> = None;
    // draw features until `k` non-constant candidates have been tried
    let order = sample(rng, x.ncols(), x.ncols());
    let mut tried = 0;
    for f in order.iter() {
        if tried >= k {
            break;
        }
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(x[(i, f)]), hi.max(x[(i, f)])));
        if hi <= lo {
            continue;
        }
        tried += 1;
        let t = rng.gen_range(lo..hi);
        let mut left = vec![0.0; classes];
        let mut nl = 0.0;
        for &i in &idx {
            if x[(i, f)] <= t {
                left[y[i]] += 1.0;
                nl += 1.0;
            }
        }
        let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
        let nr = n - nl;
        if nl < min_leaf as f64 || nr < min_leaf as f64 {
            continue;
        }
        let child = (nl * gini(&left, nl) + nr * gini(&right, nr)) / n;
        let gain = parent - child;
        if best.map_or(true, |b| gain > b.0) {
            best = Some((gain, f, t));
        }
    }
    let Some((_, feature, threshold)) = best else {
        return me;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[(i, feature)] <= threshold);
    let left = grow_extra(x, y, classes, l, k, min_leaf, rng, nodes);
    let right = grow_extra(x, y, classes, r, k, min_leaf, rng, nodes);
    nodes[me] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    me
}

impl ExtraTrees {
    pub fn fit(x: ArrayView2<f64>, labels: &[usize], classes: usize, p: ForestParams) -> Result<Self> {
        if x.nrows() == 0 || x.nrows() != labels.len() {
            return Err(Error::Usage("forest needs matching, non-empty inputs".into()));
        }
        if let Some(bad) = labels.iter().find(|&&c| c >= classes) {
            return Err(Error::Usage(format!("label {bad} outside 0..{classes}")));
        }
        let k = p
            .max_features
            .unwrap_or_else(|| (x.ncols() as f64).sqrt().round() as usize)
            .clamp(1, x.ncols());
        let min_leaf = p.min_samples_leaf.max(1);
        let trees = (0..p.trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
                rng.set_stream(t as u64);
                let mut nodes = Vec::new();
                grow_extra(x, labels, classes, (0..x.nrows()).collect(), k, min_leaf, &mut rng, &mut nodes);
                Tree { nodes }
            })
            .collect();
        Ok(Self { classes, trees })
    }

    pub fn predict_proba_row(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let mut p = vec![0.0; self.classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.leaf_for(x)) {
                *acc += v;
            }
        }
        let n = self.trees.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            for (j, v) in self.predict_proba_row(row).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn grid(n: usize, seed: u64, k: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((n, k), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn stump_finds_step() {
        let x = grid(200, 1, 2);
        let y: Array1<f64> = x.column(1).mapv(|v| if v > 0.25 { 1.0 } else { -1.0 });
        let gb = GradientBoosting::fit(
            x.view(),
            y.view(),
            BoostInit::Constant(0.0),
            BoostParams {
                trees: 1,
                max_depth: 1,
                shrinkage: 1.0,
            },
        )
        .unwrap();
        match &gb.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 1);
                assert!((threshold - 0.25).abs() < 0.05);
            }
            n => panic!("{n:?}"),
        }
        let err = (&gb.predict(x.view()) - &y).mapv(f64::abs).sum();
        assert!(err < 1e-12);
    }

    #[test]
    fn boosting_depth_and_fit() {
        let x = grid(500, 2, 3);
        let y: Array1<f64> = x.rows().into_iter().map(|r| r[0] * r[0] + 0.5 * r[1]).collect();
        let gb = GradientBoosting::fit(x.view(), y.view(), BoostInit::Constant(0.0), BoostParams::default()).unwrap();
        assert_eq!(gb.trees.len(), 100);
        assert!(gb.trees.iter().all(|t| t.depth() <= 3));
        let mae = (&gb.predict(x.view()) - &y).mapv(f64::abs).mean().unwrap();
        assert!(mae < 0.05, "{mae}");
    }

    #[test]
    fn row_mean_init_keeps_identity() {
        let x = grid(300, 3, 1).mapv(|v| v.abs());
        let y = x.column(0).to_owned();
        let gb = GradientBoosting::fit(x.view(), y.view(), BoostInit::RowMean, BoostParams::default()).unwrap();
        let err = (&gb.predict(x.view()) - &y).mapv(f64::abs).sum();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn extra_trees_separate_classes() {
        let x = grid(600, 4, 4);
        let y: Vec<usize> = x
            .rows()
            .into_iter()
            .map(|r| if r[0] + r[1] > 0.5 { 2 } else if r[0] + r[1] > -0.5 { 1 } else { 0 })
            .collect();
        let f = ExtraTrees::fit(x.view(), &y, 3, ForestParams::default()).unwrap();
        let test = grid(400, 5, 4);
        let mut hits = 0;
        for r in test.rows() {
            let p = f.predict_proba_row(r);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let want = if r[0] + r[1] > 0.5 { 2 } else if r[0] + r[1] > -0.5 { 1 } else { 0 };
            hits += (argmax(&p) == want) as usize;
        }
        assert!(hits as f64 / 400.0 > 0.85, "{hits}");
        let again = ExtraTrees::fit(x.view(), &y, 3, ForestParams::default()).unwrap();
        assert_eq!(f, again);
        assert!(ExtraTrees::fit(x.view(), &y, 2, ForestParams::default()).is_err());
    }
}
