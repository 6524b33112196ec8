use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

/// One entry of a tree's flat node table. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    pub(crate) fn fit<R: Rng>(x: &Matrix, y: &Matrix, rows: Vec<usize>, params: &TreeParams, rng: &mut R) -> Self {
        let mut builder = Builder { x, y, params, nodes: Vec::new() };
        builder.grow(rows, 0, rng);
        RegressionTree { nodes: builder.nodes }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a Matrix,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, rows: &[usize]) -> Vec<f64> {
        let first = self.y.row(rows[0]);
        if rows.iter().all(|&r| self.y.row(r) == first) {
            return first.to_vec();
        }
        let mut sum = vec![0.0; self.y.cols()];
        for &r in rows {
            for (s, v) in sum.iter_mut().zip(self.y.row(r)) {
                *s += v;
            }
        }
        sum.iter().map(|s| s / rows.len() as f64).collect()
    }

    fn grow<R: Rng>(&mut self, rows: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let can_split = self.params.max_depth.is_none_or(|d| depth < d)
            && rows.len() >= 2 * self.params.min_samples_leaf
            && !self.pure(&rows);
        let split = if can_split { self.best_split(&rows, rng) } else { None };
        match split {
            None => {
                self.nodes[id] = Node::Leaf { value: self.leaf_value(&rows) };
            }
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| self.x.get(i, s.feature) <= s.threshold);
                let left = self.grow(l, depth + 1, rng);
                let right = self.grow(r, depth + 1, rng);
                self.nodes[id] = Node::Split { feature: s.feature, threshold: s.threshold, left, right };
            }
        }
        id
    }

    fn pure(&self, rows: &[usize]) -> bool {
        let first = self.y.row(rows[0]);
        rows.iter().all(|&r| self.y.row(r) == first)
    }

    /// Maximises sum over outputs of S_L^2/n_L + S_R^2/n_R, which is the
    /// same as minimising the summed within-child squared error.
    fn best_split<R: Rng>(&self, rows: &[usize], rng: &mut R) -> Option<Split> {
        let p = self.x.cols();
        let q = self.y.cols();
        let msl = self.params.min_samples_leaf;
        let n = rows.len();
        let mut total = vec![0.0; q];
        for &r in rows {
            for (t, v) in total.iter_mut().zip(self.y.row(r)) {
                *t += v;
            }
        }
        let parent: f64 = total.iter().map(|s| s * s).sum::<f64>() / n as f64;

        let features = index::sample(rng, p, self.params.n_features.min(p));
        let mut best: Option<Split> = None;
        let mut order = rows.to_vec();
        let mut left = vec![0.0; q];
        for feature in features.iter() {
            order.sort_by(|&a, &b| self.x.get(a, feature).total_cmp(&self.x.get(b, feature)));
            left.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..n - 1 {
                for (l, v) in left.iter_mut().zip(self.y.row(order[k])) {
                    *l += v;
                }
                let nl = k + 1;
                let (xa, xb) = (self.x.get(order[k], feature), self.x.get(order[k + 1], feature));
                if nl < msl || n - nl < msl || xa == xb {
                    continue;
                }
                let nr = (n - nl) as f64;
                let score: f64 = left
                    .iter()
                    .zip(&total)
                    .map(|(l, t)| l * l / nl as f64 + (t - l) * (t - l) / nr)
                    .sum();
                if score > parent + 1e-13 * parent.abs() && best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = 0.5 * (xa + xb);
                    if threshold >= xb {
                        threshold = xa;
                    }
                    best = Some(Split { feature, threshold, score });
                }
            }
        }
        best
    }
}
