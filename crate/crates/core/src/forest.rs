//! Random-forest binary classifier (bagged CART trees, Gini criterion).
//!
//! Trees are grown depth-first to purity (or until `min_samples_leaf` stops
//! further splits). At each node the candidate features are visited in a
//! random order until `max_features` non-constant ones have been scored;
//! thresholds are midpoints between consecutive distinct values and rows with
//! `x <= threshold` go left. Split quality is compared exactly in integer
//! arithmetic, with ties going to the lowest feature index and then the
//! lowest threshold.
//!
//! Fits are order-sensitive: the result is a function of `(X, y, seed)` with
//! the rows in the order given. Each tree draws from its own stream derived
//! from `(seed, tree index)`, so serial and parallel fits agree exactly.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use crate::rng::{self, tag, StreamRng};
use crate::tabular::{Label, Matrix};
use crate::{par, Error, Result};

/// Number of features scored per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => libm::ceil(libm::sqrt(d as f64)) as usize,
            MaxFeatures::All => d,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    /// `None` grows to purity.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if let MaxFeatures::Fixed(0) = self.max_features {
            return Err(Error::InvalidConfig(
                "max_features must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [u32; 2],
    },
    Leaf {
        counts: [u32; 2],
    },
}

impl Node {
    pub fn counts(&self) -> [u32; 2] {
        match *self {
            Node::Split { counts, .. } | Node::Leaf { counts } => counts,
        }
    }
}

/// Majority label of a count pair, ties to `Nt`.
#[inline]
fn majority(counts: [u32; 2]) -> Label {
    if counts[1] > counts[0] {
        Label::Asd
    } else {
        Label::Nt
    }
}

/// One CART tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict_row(&self, x: &[f64]) -> Label {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { counts } => return majority(counts),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    n_features: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of trees voting `Asd` for each row.
    pub fn votes(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.cols(),
            });
        }
        Ok((0..x.rows())
            .map(|r| {
                let row = x.row(r);
                self.trees
                    .iter()
                    .filter(|t| t.predict_row(row) == Label::Asd)
                    .count()
            })
            .collect())
    }

    /// Per-row majority vote; an even split goes to `Nt`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<Label>> {
        let n_trees = self.trees.len();
        Ok(self
            .votes(x)?
            .into_iter()
            .map(|asd| vote_label(asd, n_trees))
            .collect())
    }

    /// Plain-text node listing, one line per node.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "forest trees={} features={}",
            self.trees.len(),
            self.n_features
        );
        for (t, tree) in self.trees.iter().enumerate() {
            for (i, node) in tree.nodes.iter().enumerate() {
                let _ = match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        counts,
                    } => writeln!(
                        out,
                        "tree={t} node={i} split feature={feature} threshold={threshold:e} left={left} right={right} nt={} asd={}",
                        counts[0], counts[1]
                    ),
                    Node::Leaf { counts } => writeln!(
                        out,
                        "tree={t} node={i} leaf nt={} asd={}",
                        counts[0], counts[1]
                    ),
                };
            }
        }
        out
    }
}

/// Majority vote over `n_trees` given the `Asd` vote count; ties to `Nt`.
#[inline]
pub fn vote_label(asd_votes: usize, n_trees: usize) -> Label {
    if 2 * asd_votes > n_trees {
        Label::Asd
    } else {
        Label::Nt
    }
}

/// Fits a forest on the rows of `x` with labels `y`.
pub fn fit(x: &Matrix, y: &[Label], config: &ForestConfig) -> Result<ForestModel> {
    config.validate()?;
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if let Some((row, col)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let data = ColumnData::new(x, y);
    let mtry = config.max_features.resolve(x.cols());
    let trees = par::map_indices(config.n_trees, |t| {
        let mut rng = rng::stream(config.seed, &[tag::TREE, t as u64]);
        let n = data.n;
        let samples: Vec<u32> = if config.bootstrap {
            (0..n).map(|_| rng::index(&mut rng, n) as u32).collect()
        } else {
            (0..n as u32).collect()
        };
        grow(&data, samples, mtry, config, &mut rng)
    });
    Ok(ForestModel {
        trees,
        n_features: x.cols(),
    })
}

struct ColumnData {
    n: usize,
    cols: Vec<Vec<f64>>,
    y: Vec<u8>,
}

impl ColumnData {
    fn new(x: &Matrix, y: &[Label]) -> Self {
        let cols = (0..x.cols()).map(|c| x.column(c)).collect();
        Self {
            n: x.rows(),
            cols,
            y: y.iter().map(|l| l.index() as u8).collect(),
        }
    }
}

/// Weighted Gini "purity" of a split, `sum_k l_k^2 / n_l + sum_k r_k^2 / n_r`,
/// held as an exact fraction. Larger is better (lower weighted impurity).
#[derive(Clone, Copy)]
struct SplitScore {
    num: u128,
    den: u128,
    approx: f64,
}

impl SplitScore {
    fn new(l: [u64; 2], r: [u64; 2]) -> Self {
        let nl = (l[0] + l[1]) as u128;
        let nr = (r[0] + r[1]) as u128;
        let sl = (l[0] * l[0] + l[1] * l[1]) as u128;
        let sr = (r[0] * r[0] + r[1] * r[1]) as u128;
        let num = sl * nr + sr * nl;
        let den = nl * nr;
        SplitScore {
            num,
            den,
            approx: num as f64 / den as f64,
        }
    }

    fn cmp(&self, other: &SplitScore) -> Ordering {
        // the float ratio decides unless the two are within rounding error
        let gap = self.approx - other.approx;
        if gap.abs() > 1e-9 * self.approx.abs().max(other.approx.abs()) {
            return if gap > 0.0 {
                Ordering::Greater
            } else {
                Ordering::Less
            };
        }
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    score: SplitScore,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// True when `self` should replace `best`.
    fn beats(&self, best: &Candidate) -> bool {
        match self.score.cmp(&best.score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                (self.feature, self.threshold).partial_cmp(&(best.feature, best.threshold))
                    == Some(Ordering::Less)
            }
        }
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo / 2.0 + hi / 2.0;
    if mid >= hi || !mid.is_finite() {
        lo
    } else {
        mid
    }
}

fn grow(
    data: &ColumnData,
    mut samples: Vec<u32>,
    mtry: usize,
    config: &ForestConfig,
    rng: &mut StreamRng,
) -> Tree {
    let d = data.cols.len();
    let min_leaf = config.min_samples_leaf as u64;
    let mut nodes: Vec<Node> = Vec::new();
    let mut features: Vec<usize> = (0..d).collect();
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
    let mut scratch: Vec<u32> = Vec::with_capacity(samples.len());

    // (node index, range in `samples`, depth)
    let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
    nodes.push(Node::Leaf { counts: [0, 0] });

    while let Some((id, lo, hi, depth)) = stack.pop() {
        let rows = &samples[lo..hi];
        let mut counts = [0u32; 2];
        for &r in rows {
            counts[data.y[r as usize] as usize] += 1;
        }
        let m = (hi - lo) as u64;
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_capped = config.max_depth.is_some_and(|md| depth >= md);
        if pure || depth_capped || m < 2 * min_leaf {
            nodes[id] = Node::Leaf { counts };
            continue;
        }

        let mut best: Option<Candidate> = None;
        let mut scored = 0;
        let mut next = 0;
        while scored < mtry && next < d {
            let j = next + rng::index(rng, d - next);
            features.swap(next, j);
            let f = features[next];
            next += 1;

            pairs.clear();
            pairs.extend(
                rows.iter()
                    .map(|&r| (data.cols[f][r as usize], data.y[r as usize])),
            );
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            scored += 1;

            let total = [counts[0] as u64, counts[1] as u64];
            let mut left = [0u64; 2];
            for i in 0..pairs.len() - 1 {
                left[pairs[i].1 as usize] += 1;
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let nl = (i + 1) as u64;
                if nl < min_leaf || m - nl < min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let score = SplitScore::new(left, right);
                if let Some(b) = &best {
                    if score.cmp(&b.score) == Ordering::Less {
                        continue;
                    }
                }
                let cand = Candidate {
                    score,
                    feature: f,
                    threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }

        let Some(best) = best else {
            nodes[id] = Node::Leaf { counts };
            continue;
        };

        // stable partition of the node's rows
        scratch.clear();
        let column = &data.cols[best.feature];
        let mut w = lo;
        for k in lo..hi {
            let r = samples[k];
            if column[r as usize] <= best.threshold {
                samples[w] = r;
                w += 1;
            } else {
                scratch.push(r);
            }
        }
        samples[w..hi].copy_from_slice(&scratch);

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { counts: [0, 0] });
        nodes.push(Node::Leaf { counts: [0, 0] });
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            counts,
        };
        // right pushed first so the left subtree is built first
        stack.push((right, w, hi, depth + 1));
        stack.push((left, lo, w, depth + 1));
    }
    Tree { nodes }
}

/// Gini impurity `1 - sum_k p_k^2` of a count pair.
pub fn gini(counts: [u32; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Short description used in error messages and logs.
pub fn describe(config: &ForestConfig) -> String {
    format!(
        "n_trees={} max_features={:?} min_samples_leaf={} max_depth={:?} bootstrap={}",
        config.n_trees,
        config.max_features,
        config.min_samples_leaf,
        config.max_depth,
        config.bootstrap
    )
}
