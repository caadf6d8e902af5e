//! A small gradient-boosted tree classifier used as the stacking model.
//!
//! Logistic loss; each round fits a depth-bounded regression tree to the
//! residuals `y - p` with exact greedy variance-reduction splits and sets leaf
//! values by a regularized Newton step `Σr / (Σp(1-p) + min_child_weight)`.
//! Split ties go to the lowest feature index, then the lowest threshold.
//! Thresholds sit at midpoints between consecutive distinct values and rows
//! with `x <= threshold` go left.

use std::cmp::Ordering;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            min_child_weight: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Configuration("max_depth must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Configuration(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.min_child_weight >= 0.0) {
            return Err(Error::Configuration("min_child_weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Regression tree stored as parallel arrays. Node 0 is the root; a node is a
/// leaf when `feature[i] < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl RegressionTree {
    fn new() -> Self {
        RegressionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        }
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.value[node];
            }
            node = if row[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        let n = self.feature.len();
        if n == 0
            || self.threshold.len() != n
            || self.left.len() != n
            || self.right.len() != n
            || self.value.len() != n
        {
            return Err(Error::Serialization("tree arrays have inconsistent lengths".into()));
        }
        for i in 0..n {
            if self.feature[i] >= 0 {
                if self.feature[i] as usize >= n_features {
                    return Err(Error::Serialization(format!("node {i} splits on unknown feature")));
                }
                // Children always come after their parent, which rules out cycles.
                let (l, r) = (self.left[i] as usize, self.right[i] as usize);
                if l <= i || r <= i || l >= n || r >= n {
                    return Err(Error::Serialization(format!("node {i} has invalid children")));
                }
            }
        }
        Ok(())
    }
}

/// A trained booster: `margin = base_score + Σ learning_rate · tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn validate(&self) -> Result<()> {
        for tree in &self.trees {
            tree.validate(self.n_features)?;
        }
        Ok(())
    }

    pub fn predict_margin_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut margin = self.base_score;
        for tree in &self.trees {
            margin += self.learning_rate * tree.predict_row(row);
        }
        margin
    }

    pub fn predict_margins(&self, features: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if features.ncols() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: features.ncols(),
            });
        }
        Ok(features
            .rows()
            .into_iter()
            .map(|row| self.predict_margin_row(row))
            .collect())
    }

    pub fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.predict_margins(features)?.mapv(sigmoid))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingOutcome {
    pub forest: Forest,
    /// Final training margins, in the caller's row order.
    pub train_margins: Array1<f64>,
    /// Training logistic loss after each round, starting with the base score.
    pub loss_history: Vec<f64>,
    /// True when the labels were one class and the booster is constant.
    pub single_class: bool,
}

fn mean_logistic_loss(margins: &[f64], y: &[f64]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&z, &label)| (-z.abs()).exp().ln_1p() + z.max(0.0) - z * label)
        .sum();
    total / margins.len() as f64
}

fn lexicographic(features: &ArrayView2<'_, f64>, y: &ArrayView1<'_, f64>, a: usize, b: usize) -> Ordering {
    for j in 0..features.ncols() {
        match features[[a, j]].total_cmp(&features[[b, j]]) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    y[a].total_cmp(&y[b])
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Marks a row that already sits in a finished leaf.
const DONE: u32 = u32::MAX;

/// Residual, hessian and current frontier slot of one training row.
#[derive(Clone, Copy, Default)]
struct RowState {
    g: f64,
    h: f64,
    slot: u32,
}

/// Per-node running sums for one scan over a presorted feature.
#[derive(Clone, Copy, Default)]
struct Scan {
    g: f64,
    h: f64,
    count: usize,
    last: f64,
}

struct Builder<'a> {
    /// Feature values in canonical row order, column-major for cache-friendly scans.
    columns: &'a [Vec<f64>],
    /// `(row, value)` pairs of each column in ascending value order.
    presorted: &'a [Vec<(u32, f64)>],
    /// `inverse[n] = 1 / n`.
    inverse: &'a [f64],
    params: &'a GbdtParams,
}

impl Builder<'_> {
    /// Grows one tree level by level. Within a node every sum runs over the
    /// rows in presorted order, so results match a recursive exact-greedy build.
    fn grow(&self, rows: &mut [RowState], leaf_of_row: &mut [f64]) -> RegressionTree {
        let mut tree = RegressionTree::new();
        let mut frontier = vec![tree.push_leaf(0.0)];
        rows.iter_mut().for_each(|r| r.slot = 0);
        let mcw = self.params.min_child_weight;

        for depth in 0..=self.params.max_depth {
            let n_slots = frontier.len();
            let mut totals = vec![Scan::default(); n_slots];
            for &(i, _) in &self.presorted[0] {
                let row = &rows[i as usize];
                if row.slot != DONE {
                    let t = &mut totals[row.slot as usize];
                    t.g += row.g;
                    t.h += row.h;
                    t.count += 1;
                }
            }

            let mut best: Vec<Option<Split>> = (0..n_slots).map(|_| None).collect();
            if depth < self.params.max_depth {
                let parent: Vec<f64> = totals.iter().map(|t| t.g * t.g * self.inverse[t.count]).collect();
                let mut scan = vec![Scan::default(); n_slots];
                for (f, order) in self.presorted.iter().enumerate() {
                    scan.fill(Scan::default());
                    for &(i, v) in order {
                        let row = &rows[i as usize];
                        if row.slot == DONE {
                            continue;
                        }
                        let s = row.slot as usize;
                        let left = &mut scan[s];
                        if left.count > 0 && v != left.last {
                            let total = &totals[s];
                            let h_right = total.h - left.h;
                            if left.h >= mcw && h_right >= mcw {
                                let g_right = total.g - left.g;
                                let gain = left.g * left.g * self.inverse[left.count]
                                    + g_right * g_right * self.inverse[total.count - left.count]
                                    - parent[s];
                                if gain > 1e-12 && best[s].as_ref().map_or(true, |b| gain > b.gain) {
                                    let mut threshold = left.last + (v - left.last) / 2.0;
                                    if threshold >= v {
                                        threshold = left.last;
                                    }
                                    best[s] = Some(Split {
                                        feature: f,
                                        threshold,
                                        gain,
                                    });
                                }
                            }
                        }
                        left.g += row.g;
                        left.h += row.h;
                        left.count += 1;
                        left.last = v;
                    }
                }
            }

            // Children for split nodes, leaf values for the rest.
            let mut next_frontier = Vec::new();
            let mut children = vec![(DONE, DONE); n_slots];
            let mut values = vec![0.0; n_slots];
            for s in 0..n_slots {
                let node = frontier[s];
                match &best[s] {
                    Some(split) => {
                        let l = tree.push_leaf(0.0);
                        let r = tree.push_leaf(0.0);
                        tree.feature[node] = split.feature as i64;
                        tree.threshold[node] = split.threshold;
                        tree.left[node] = l as u32;
                        tree.right[node] = r as u32;
                        children[s] = (next_frontier.len() as u32, next_frontier.len() as u32 + 1);
                        next_frontier.push(l);
                        next_frontier.push(r);
                    }
                    None => {
                        let t = &totals[s];
                        values[s] = t.g / (t.h + mcw);
                        tree.value[node] = values[s];
                    }
                }
            }
            for (i, slot) in rows.iter_mut().map(|r| &mut r.slot).enumerate() {
                if *slot == DONE {
                    continue;
                }
                let s = *slot as usize;
                *slot = match &best[s] {
                    Some(split) => {
                        if self.columns[split.feature][i] <= split.threshold {
                            children[s].0
                        } else {
                            children[s].1
                        }
                    }
                    None => {
                        leaf_of_row[i] = values[s];
                        DONE
                    }
                };
            }
            frontier = next_frontier;
            if frontier.is_empty() {
                break;
            }
        }
        tree
    }
}

/// Fits the booster. Rows are first put in a canonical (lexicographic) order so
/// the fitted forest does not depend on the order they were supplied in.
pub fn fit_gbdt(features: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, params: &GbdtParams) -> Result<BoostingOutcome> {
    params.validate()?;
    let (m, n_features) = features.dim();
    if y.len() != m {
        return Err(Error::Dimension {
            expected: m,
            actual: y.len(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidDataset("boosting on zero rows".into()));
    }
    if features.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidDataset("NaN stack feature".into()));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidDataset(format!("label {bad} is not in {{0, 1}}")));
    }

    let mut canonical: Vec<usize> = (0..m).collect();
    canonical.sort_by(|&a, &b| lexicographic(&features, &y, a, b));
    let labels: Vec<f64> = canonical.iter().map(|&i| y[i]).collect();
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|j| canonical.iter().map(|&i| features[[i, j]]).collect())
        .collect();

    let positives = labels.iter().filter(|&&v| v == 1.0).count();
    let single_class = positives == 0 || positives == m;
    let rate = (positives as f64 / m as f64).clamp(1e-6, 1.0 - 1e-6);
    let base_score = (rate / (1.0 - rate)).ln();

    let mut margins = vec![base_score; m];
    let mut loss_history = vec![mean_logistic_loss(&margins, &labels)];
    let mut trees = Vec::new();

    if !single_class && n_features > 0 {
        let presorted: Vec<Vec<(u32, f64)>> = columns
            .iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..m as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                order.into_iter().map(|i| (i, col[i as usize])).collect()
            })
            .collect();
        let inverse: Vec<f64> = (0..=m).map(|n| 1.0 / n as f64).collect();
        let mut state = vec![RowState::default(); m];
        let mut leaf_of_row = vec![0.0; m];
        for _ in 0..params.n_rounds {
            for i in 0..m {
                let p = sigmoid(margins[i]);
                state[i].g = labels[i] - p;
                state[i].h = p * (1.0 - p);
            }
            let builder = Builder {
                columns: &columns,
                presorted: &presorted,
                inverse: &inverse,
                params,
            };
            let tree = builder.grow(&mut state, &mut leaf_of_row);
            for (margin, leaf) in margins.iter_mut().zip(&leaf_of_row) {
                *margin += params.learning_rate * leaf;
            }
            loss_history.push(mean_logistic_loss(&margins, &labels));
            trees.push(tree);
        }
    }

    let mut train_margins = Array1::zeros(m);
    for (pos, &row) in canonical.iter().enumerate() {
        train_margins[row] = margins[pos];
    }
    Ok(BoostingOutcome {
        forest: Forest {
            base_score,
            learning_rate: params.learning_rate,
            n_features,
            trees,
        },
        train_margins,
        loss_history,
        single_class,
    })
}
