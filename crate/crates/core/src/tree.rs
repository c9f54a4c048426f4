//! CART decision trees over the 320 binary board features.
//!
//! Trees are grown breadth-first: each depth level makes one pass over the
//! rows, accumulating per-(node, feature) counts and target sums over the set
//! bits of each row. A split on feature `f` sends rows with the bit set to the
//! right child. Regression splits maximise the decrease in sum of squared
//! error; classification splits maximise the decrease in Gini impurity. Ties
//! (within a relative tolerance) go to the lowest feature index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::othello::{FeatureVector, N_FEATURES};
use crate::scalar::Scalar;

/// Relative tolerance under which two split gains count as tied.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("invalid tree config: {0}")]
    InvalidConfig(String),
    #[error("{features} feature rows but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("empty data set")]
    Empty,
    #[error("non-finite target at row {0}")]
    NonFinite(usize),
    #[error("classification targets must be 0 or 1 (row {0})")]
    NonBinaryTarget(usize),
    #[error("neuron never activates above zero")]
    AllOff,
    #[error("test targets have zero variance; R^2 undefined")]
    ZeroVariance,
    #[error("classification tree has no binarization threshold")]
    NoThreshold,
    #[error("malformed tree json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMode {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub mode: TreeMode,
    pub on_fraction: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 4,
            min_samples_split: 100,
            min_samples_leaf: 50,
            mode: TreeMode::Regression,
            on_fraction: 0.1,
        }
    }
}

impl TreeConfig {
    pub fn classification() -> Self {
        TreeConfig { mode: TreeMode::Classification, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |m: &str| Err(TreeError::InvalidConfig(m.to_string()));
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        if self.min_samples_split < 2 * self.min_samples_leaf {
            return bad("min_samples_split must be >= 2 * min_samples_leaf");
        }
        if !(self.on_fraction > 0.0 && self.on_fraction < 1.0) {
            return bad("on_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    Split {
        feature: u16,
        left: usize,
        right: usize,
        samples: usize,
        /// Impurity decrease of this split, weighted by sample count.
        gain: T,
    },
    Leaf {
        value: T,
        samples: usize,
    },
}

impl<T: Copy> Node<T> {
    pub fn samples(&self) -> usize {
        match *self {
            Node::Split { samples, .. } | Node::Leaf { samples, .. } => samples,
        }
    }
}

/// Fitted tree; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    pub nodes: Vec<Node<T>>,
    pub config: TreeConfig,
    /// Max training target (raw activation).
    pub train_max_activation: T,
    /// Mean training target (raw activation).
    pub train_mean: T,
    /// On/off cut for classification trees: `on_fraction * train max`.
    pub on_threshold: Option<T>,
    /// All training targets were equal; the tree is a single leaf.
    pub degenerate: bool,
}

/// One leaf together with the decisions that reach it.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPath<T> {
    pub node: usize,
    pub value: T,
    pub samples: usize,
    /// `(feature, bit value)` along the path from the root.
    pub decisions: Vec<(usize, bool)>,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn mode(&self) -> TreeMode {
        self.config.mode
    }

    pub fn leaf_index(&self, f: &FeatureVector) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, left, right, .. } => {
                    i = if f.get(feature as usize) { right } else { left };
                }
            }
        }
    }

    pub fn predict(&self, f: &FeatureVector) -> T {
        match self.nodes[self.leaf_index(f)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Classification: predicted ON iff the leaf's ON fraction exceeds 1/2.
    pub fn predict_on(&self, f: &FeatureVector) -> bool {
        self.predict(f) > T::of(0.5)
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Leaves in depth-first (left before right) order with their paths.
    pub fn leaf_paths(&self) -> Vec<LeafPath<T>> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((i, path)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { value, samples } => {
                    out.push(LeafPath { node: i, value, samples, decisions: path })
                }
                Node::Split { feature, left, right, .. } => {
                    let mut r = path.clone();
                    r.push((feature as usize, true));
                    let mut l = path;
                    l.push((feature as usize, false));
                    stack.push((right, r));
                    stack.push((left, l));
                }
            }
        }
        out
    }

    /// Structural checks against the config the tree was fitted with.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.depth() > self.config.max_depth {
            return Err(format!("depth {} > max_depth", self.depth()));
        }
        for p in self.leaf_paths() {
            if !self.degenerate && p.samples < self.config.min_samples_leaf && p.node != 0 {
                return Err(format!("leaf {} has {} samples", p.node, p.samples));
            }
            let mut seen = std::collections::HashSet::new();
            if !p.decisions.iter().all(|(f, _)| seen.insert(*f)) {
                return Err(format!("leaf {} path repeats a feature", p.node));
            }
        }
        for n in &self.nodes {
            if let Node::Split { samples, .. } = n {
                if *samples < self.config.min_samples_split {
                    return Err(format!("split node with {samples} samples"));
                }
            }
        }
        Ok(())
    }
}

/// `on[i] = a[i] > on_fraction * max(a)`; also returns the threshold.
pub fn binarize_targets<T: Scalar>(
    activations: &[T],
    on_fraction: f64,
) -> Result<(Vec<bool>, T), TreeError> {
    if activations.is_empty() {
        return Err(TreeError::Empty);
    }
    if let Some(i) = activations.iter().position(|a| !a.is_finite()) {
        return Err(TreeError::NonFinite(i));
    }
    let max = activations.iter().copied().fold(T::neg_infinity(), T::max);
    if max <= T::zero() {
        return Err(TreeError::AllOff);
    }
    let threshold = T::of(on_fraction) * max;
    Ok((activations.iter().map(|&a| a > threshold).collect(), threshold))
}

#[derive(Clone, Copy)]
struct NodeStats<T> {
    n: usize,
    sum: T,
    sum_sq: T,
    min: T,
    max: T,
}

impl<T: Scalar> NodeStats<T> {
    fn new() -> Self {
        NodeStats {
            n: 0,
            sum: T::zero(),
            sum_sq: T::zero(),
            min: T::infinity(),
            max: T::neg_infinity(),
        }
    }

    fn push(&mut self, y: T) {
        self.n += 1;
        self.sum += y;
        self.sum_sq += y * y;
        self.min = self.min.min(y);
        self.max = self.max.max(y);
    }

    fn mean(&self) -> T {
        self.sum / T::of_usize(self.n)
    }

    fn is_pure(&self) -> bool {
        self.min == self.max
    }
}

/// Sample-weighted impurity of a node holding `n` rows with target sum `s`.
/// Regression uses the `s^2/n` part of the SSE (the `sum y^2` part cancels in
/// split gains); classification uses `n * gini` for 0/1 targets.
fn weighted_impurity<T: Scalar>(mode: TreeMode, n: usize, s: T) -> T {
    let nf = T::of_usize(n);
    match mode {
        TreeMode::Regression => -(s * s) / nf,
        TreeMode::Classification => {
            let p = s / nf;
            nf * (T::one() - p * p - (T::one() - p) * (T::one() - p))
        }
    }
}

fn split_gain<T: Scalar>(mode: TreeMode, n: usize, s: T, n_r: usize, s_r: T) -> T {
    weighted_impurity(mode, n, s)
        - weighted_impurity(mode, n - n_r, s - s_r)
        - weighted_impurity(mode, n_r, s_r)
}

/// Grow a tree on `targets` (raw activations for regression, 0/1 for
/// classification). `train_max_activation`, `train_mean` and `on_threshold`
/// are filled from the targets; [`fit_classifier`] overrides them with the
/// raw-activation values.
pub fn fit_tree<T: Scalar>(
    features: &[FeatureVector],
    targets: &[T],
    config: &TreeConfig,
) -> Result<DecisionTree<T>, TreeError> {
    config.validate()?;
    if features.len() != targets.len() {
        return Err(TreeError::LengthMismatch { features: features.len(), targets: targets.len() });
    }
    if targets.is_empty() {
        return Err(TreeError::Empty);
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return Err(TreeError::NonFinite(i));
    }
    if config.mode == TreeMode::Classification {
        if let Some(i) = targets.iter().position(|&t| t != T::zero() && t != T::one()) {
            return Err(TreeError::NonBinaryTarget(i));
        }
    }
    let mode = config.mode;
    const NONE: u32 = u32::MAX;

    let mut root = NodeStats::new();
    targets.iter().for_each(|&y| root.push(y));

    let mut nodes: Vec<Node<T>> = vec![Node::Leaf { value: root.mean(), samples: root.n }];
    // Open nodes at the current depth: (node slot, stats).
    let mut open: Vec<(usize, NodeStats<T>)> = vec![(0, root)];
    let mut assign: Vec<u32> = vec![0; targets.len()];

    for _depth in 0..config.max_depth {
        let splittable: Vec<bool> = open
            .iter()
            .map(|(_, s)| s.n >= config.min_samples_split && !s.is_pure())
            .collect();
        if !splittable.iter().any(|&b| b) {
            break;
        }
        let n_open = open.len();
        let mut counts = vec![0u32; n_open * N_FEATURES];
        let mut sums = vec![T::zero(); n_open * N_FEATURES];
        for (row, &a) in assign.iter().enumerate() {
            if a == NONE || !splittable[a as usize] {
                continue;
            }
            let base = a as usize * N_FEATURES;
            let y = targets[row];
            for (w, &word) in features[row].words.iter().enumerate() {
                let mut word = word;
                while word != 0 {
                    let f = base + w * 64 + word.trailing_zeros() as usize;
                    counts[f] += 1;
                    sums[f] += y;
                    word &= word - 1;
                }
            }
        }

        // Per open node: Some((feature, gain)) when it splits.
        let mut chosen: Vec<Option<(usize, T)>> = vec![None; n_open];
        for (k, (_, st)) in open.iter().enumerate() {
            if !splittable[k] {
                continue;
            }
            let node_sse = st.sum_sq - st.sum * st.sum / T::of_usize(st.n);
            let tol = T::of(GAIN_TIE_TOLERANCE) * node_sse.abs().max(T::min_positive_value());
            let mut best: Option<(usize, T)> = None;
            for f in 0..N_FEATURES {
                let n_r = counts[k * N_FEATURES + f] as usize;
                let n_l = st.n - n_r;
                if n_r < config.min_samples_leaf || n_l < config.min_samples_leaf {
                    continue;
                }
                let gain = split_gain(mode, st.n, st.sum, n_r, sums[k * N_FEATURES + f]);
                if gain <= tol {
                    continue;
                }
                match best {
                    Some((_, g)) if gain <= g + tol => {}
                    _ => best = Some((f, gain)),
                }
            }
            chosen[k] = best;
        }

        // Children slots: (left, right) per splitting open node.
        let mut child_of: Vec<Option<(u32, u32)>> = vec![None; n_open];
        let mut next_open: Vec<(usize, NodeStats<T>)> = Vec::new();
        for (k, pick) in chosen.iter().enumerate() {
            if let Some((feature, gain)) = *pick {
                let slot = open[k].0;
                let left = nodes.len();
                nodes.push(Node::Leaf { value: T::zero(), samples: 0 });
                nodes.push(Node::Leaf { value: T::zero(), samples: 0 });
                nodes[slot] = Node::Split {
                    feature: feature as u16,
                    left,
                    right: left + 1,
                    samples: open[k].1.n,
                    gain,
                };
                let li = next_open.len() as u32;
                next_open.push((left, NodeStats::new()));
                next_open.push((left + 1, NodeStats::new()));
                child_of[k] = Some((li, li + 1));
            }
        }
        if next_open.is_empty() {
            break;
        }
        for (row, a) in assign.iter_mut().enumerate() {
            if *a == NONE {
                continue;
            }
            let k = *a as usize;
            match (child_of[k], chosen[k]) {
                (Some((l, r)), Some((feature, _))) => {
                    let c = if features[row].get(feature) { r } else { l };
                    next_open[c as usize].1.push(targets[row]);
                    *a = c;
                }
                _ => *a = NONE,
            }
        }
        for (slot, st) in &next_open {
            nodes[*slot] = Node::Leaf { value: st.mean(), samples: st.n };
        }
        open = next_open;
    }

    let tree = DecisionTree {
        nodes,
        config: *config,
        train_max_activation: root.max,
        train_mean: root.mean(),
        on_threshold: None,
        degenerate: root.is_pure(),
    };
    debug_assert_eq!(tree.check_invariants(), Ok(()));
    Ok(tree)
}

/// Regression tree on raw activations.
pub fn fit_regressor<T: Scalar>(
    features: &[FeatureVector],
    activations: &[T],
    config: &TreeConfig,
) -> Result<DecisionTree<T>, TreeError> {
    let config = TreeConfig { mode: TreeMode::Regression, ..*config };
    fit_tree(features, activations, &config)
}

/// Binarize activations at `on_fraction * max` and fit a Gini tree.
pub fn fit_classifier<T: Scalar>(
    features: &[FeatureVector],
    activations: &[T],
    config: &TreeConfig,
) -> Result<DecisionTree<T>, TreeError> {
    let config = TreeConfig { mode: TreeMode::Classification, ..*config };
    let (on, threshold) = binarize_targets(activations, config.on_fraction)?;
    let targets: Vec<T> = on.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
    let mut tree = fit_tree(features, &targets, &config)?;
    let mut stats = NodeStats::new();
    activations.iter().for_each(|&a| stats.push(a));
    tree.train_max_activation = stats.max;
    tree.train_mean = stats.mean();
    tree.on_threshold = Some(threshold);
    Ok(tree)
}

/// `1 - SSE / SST` about the mean of `targets`.
pub fn r2_score<T: Scalar>(predictions: &[T], targets: &[T]) -> Result<T, TreeError> {
    if targets.is_empty() {
        return Err(TreeError::Empty);
    }
    if predictions.len() != targets.len() {
        return Err(TreeError::LengthMismatch {
            features: predictions.len(),
            targets: targets.len(),
        });
    }
    let mean = targets.iter().copied().sum::<T>() / T::of_usize(targets.len());
    let sst: T = targets.iter().map(|&y| (y - mean) * (y - mean)).sum();
    if sst == T::zero() {
        return Err(TreeError::ZeroVariance);
    }
    let sse: T = predictions.iter().zip(targets).map(|(&p, &y)| (y - p) * (y - p)).sum();
    Ok(T::one() - sse / sst)
}

/// F1 on the positive class; 0 when there are no positives at all.
pub fn f1_score(predicted: &[bool], actual: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// R^2 (regression) or F1 on the ON class (classification) on held-out data.
/// `activations` are raw neuron activations in both modes.
pub fn evaluate<T: Scalar>(
    tree: &DecisionTree<T>,
    features: &[FeatureVector],
    activations: &[T],
) -> Result<T, TreeError> {
    if features.len() != activations.len() {
        return Err(TreeError::LengthMismatch {
            features: features.len(),
            targets: activations.len(),
        });
    }
    if features.is_empty() {
        return Err(TreeError::Empty);
    }
    match tree.mode() {
        TreeMode::Regression => {
            let preds: Vec<T> = features.iter().map(|f| tree.predict(f)).collect();
            r2_score(&preds, activations)
        }
        TreeMode::Classification => {
            let thr = tree.on_threshold.ok_or(TreeError::NoThreshold)?;
            let actual: Vec<bool> = activations.iter().map(|&a| a > thr).collect();
            let pred: Vec<bool> = features.iter().map(|f| tree.predict_on(f)).collect();
            Ok(T::of(f1_score(&pred, &actual)))
        }
    }
}

/// Features ranked by total impurity decrease over all splits using them.
pub fn top_k_features<T: Scalar>(tree: &DecisionTree<T>) -> Vec<(usize, T)> {
    let mut total: BTreeMap<usize, T> = BTreeMap::new();
    for n in &tree.nodes {
        if let Node::Split { feature, gain, .. } = *n {
            *total.entry(feature as usize).or_insert_with(T::zero) += gain;
        }
    }
    let mut ranked: Vec<(usize, T)> = total.into_iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite gains").then(a.0.cmp(&b.0)));
    ranked
}

type NumField = dyn Fn(&Map<String, Value>, &str) -> Result<f64, TreeError>;

impl<T: Scalar> DecisionTree<T> {
    /// Nested JSON: splits `{"f", "l", "r", "n", "g"}`, leaves `{"v", "n"}`.
    pub fn to_json(&self) -> Value {
        fn node<T: Scalar>(nodes: &[Node<T>], i: usize) -> Value {
            match nodes[i] {
                Node::Leaf { value, samples } => json!({"v": value.as_f64(), "n": samples}),
                Node::Split { feature, left, right, samples, gain } => json!({
                    "f": feature,
                    "l": node(nodes, left),
                    "r": node(nodes, right),
                    "n": samples,
                    "g": gain.as_f64(),
                }),
            }
        }
        json!({
            "config": self.config,
            "threshold": self.on_threshold.map(|t| t.as_f64()),
            "train_max_activation": self.train_max_activation.as_f64(),
            "train_mean": self.train_mean.as_f64(),
            "degenerate": self.degenerate,
            "root": node(&self.nodes, 0),
        })
    }

    pub fn from_json(v: &Value) -> Result<DecisionTree<T>, TreeError> {
        let err = |m: &str| TreeError::Json(m.to_string());
        let obj = v.as_object().ok_or_else(|| err("tree is not an object"))?;
        let config: TreeConfig = serde_json::from_value(
            obj.get("config").cloned().ok_or_else(|| err("missing config"))?,
        )
        .map_err(|e| TreeError::Json(e.to_string()))?;
        let num = |m: &Map<String, Value>, k: &str| -> Result<f64, TreeError> {
            m.get(k).and_then(Value::as_f64).ok_or_else(|| TreeError::Json(format!("missing {k}")))
        };
        let mut nodes = Vec::new();
        fn build<T: Scalar>(
            v: &Value,
            nodes: &mut Vec<Node<T>>,
            num: &NumField,
        ) -> Result<usize, TreeError> {
            let m = v.as_object().ok_or_else(|| TreeError::Json("node is not an object".into()))?;
            let slot = nodes.len();
            let samples = num(m, "n")? as usize;
            if let Some(f) = m.get("f") {
                let feature = f
                    .as_u64()
                    .filter(|&f| (f as usize) < N_FEATURES)
                    .ok_or_else(|| TreeError::Json("bad feature index".into()))?;
                nodes.push(Node::Leaf { value: T::zero(), samples });
                let left = build(m.get("l").unwrap_or(&Value::Null), nodes, num)?;
                let right = build(m.get("r").unwrap_or(&Value::Null), nodes, num)?;
                let gain = m.get("g").and_then(Value::as_f64).unwrap_or(0.0);
                nodes[slot] = Node::Split {
                    feature: feature as u16,
                    left,
                    right,
                    samples,
                    gain: T::of(gain),
                };
            } else {
                nodes.push(Node::Leaf { value: T::of(num(m, "v")?), samples });
            }
            Ok(slot)
        }
        build(obj.get("root").ok_or_else(|| err("missing root"))?, &mut nodes, &num)?;
        Ok(DecisionTree {
            nodes,
            config,
            train_max_activation: T::of(num(obj, "train_max_activation")?),
            train_mean: T::of(obj.get("train_mean").and_then(Value::as_f64).unwrap_or(0.0)),
            on_threshold: obj.get("threshold").and_then(Value::as_f64).map(T::of),
            degenerate: obj.get("degenerate").and_then(Value::as_bool).unwrap_or(false),
        })
    }
}

/// Why a neuron's fit is not counted as interpretable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FitFlag {
    Ok,
    /// Constant training target; single-leaf tree.
    DegenerateTarget,
    /// Never positive; no ON class.
    AllOff,
    /// Constant test target; score undefined.
    ZeroVariance,
}

impl FitFlag {
    pub fn name(self) -> &'static str {
        match self {
            FitFlag::Ok => "OK",
            FitFlag::DegenerateTarget => "DEGENERATE_TARGET",
            FitFlag::AllOff => "ALL_OFF",
            FitFlag::ZeroVariance => "ZERO_VARIANCE",
        }
    }

    pub fn parse(s: &str) -> Option<FitFlag> {
        [FitFlag::Ok, FitFlag::DegenerateTarget, FitFlag::AllOff, FitFlag::ZeroVariance]
            .into_iter()
            .find(|f| f.name() == s)
    }
}

/// Per-neuron fit result. `score` is R^2 or F1 depending on the mode; it is
/// `None` when a flag makes it undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T> {
    pub neuron_id: u32,
    pub layer: u16,
    pub mode: TreeMode,
    pub score: Option<T>,
    pub flag: FitFlag,
    pub tree: Option<DecisionTree<T>>,
}

impl<T: Scalar> FitReport<T> {
    pub fn is_interpretable(&self, cutoff: T) -> bool {
        self.flag == FitFlag::Ok && self.score.is_some_and(|s| s > cutoff)
    }
}

/// Fit and score one neuron.
pub fn fit_neuron<T: Scalar>(
    neuron_id: u32,
    layer: u16,
    train: (&[FeatureVector], &[T]),
    test: (&[FeatureVector], &[T]),
    config: &TreeConfig,
) -> Result<FitReport<T>, TreeError> {
    let fitted = match config.mode {
        TreeMode::Regression => fit_regressor(train.0, train.1, config),
        TreeMode::Classification => fit_classifier(train.0, train.1, config),
    };
    let tree = match fitted {
        Ok(t) => t,
        Err(TreeError::AllOff) => {
            return Ok(FitReport {
                neuron_id,
                layer,
                mode: config.mode,
                score: None,
                flag: FitFlag::AllOff,
                tree: None,
            })
        }
        Err(e) => return Err(e),
    };
    let (score, flag) = if tree.degenerate {
        (None, FitFlag::DegenerateTarget)
    } else {
        match evaluate(&tree, test.0, test.1) {
            Ok(s) => (Some(s), FitFlag::Ok),
            Err(TreeError::ZeroVariance) => (None, FitFlag::ZeroVariance),
            Err(e) => return Err(e),
        }
    };
    Ok(FitReport { neuron_id, layer, mode: config.mode, score, flag, tree: Some(tree) })
}
