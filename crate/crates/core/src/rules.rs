//! DNF rules extracted from decision trees.
//!
//! A tree's leaves are split into ON and OFF groups (Otsu's threshold on leaf
//! values for regression trees, majority class for classification trees);
//! each ON leaf's decision path becomes an AND clause. Clauses are then
//! rewritten over the board's square-state structure:
//!
//! * `NOT a` and `NOT b` on one square become the remaining state `c`;
//! * a positive state makes negative literals on the same square redundant;
//! * two different positive states on one square make the clause
//!   unsatisfiable, and it is dropped.
//!
//! Rewrites also use the remaining feature-vector invariants (exactly one
//! just-played square; flipped squares are occupied and not just played).
//! Finally the clause set is closed under consensus and subsumed clauses are
//! removed, so every implicant of the rule contains one of its clauses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::othello::{feature_index, feature_parts, FeatureVector, Predicate, Square, SquareState};
use crate::scalar::Scalar;
use crate::tree::{DecisionTree, TreeMode};

/// Upper bound on clauses produced by the consensus closure.
pub const MAX_CONSENSUS_CLAUSES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("fewer than two distinct values; no threshold")]
    Degenerate,
    #[error("{values} values but {weights} weights")]
    LengthMismatch { values: usize, weights: usize },
    #[error("weights must be positive and finite")]
    BadWeight,
    #[error("bad rule json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Pos,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub square: Square,
    pub predicate: Predicate,
    pub polarity: Polarity,
}

impl Literal {
    pub fn new(square: Square, predicate: Predicate, polarity: Polarity) -> Self {
        Literal { square, predicate, polarity }
    }

    pub fn pos(square: Square, predicate: Predicate) -> Self {
        Self::new(square, predicate, Polarity::Pos)
    }

    pub fn neg(square: Square, predicate: Predicate) -> Self {
        Self::new(square, predicate, Polarity::Neg)
    }

    /// The literal "feature `index` has bit value `bit`".
    pub fn from_feature(index: usize, bit: bool) -> Self {
        let (square, predicate) = feature_parts(index);
        Self::new(square, predicate, if bit { Polarity::Pos } else { Polarity::Neg })
    }

    pub fn feature(&self) -> usize {
        feature_index(self.square, self.predicate)
    }

    pub fn negated(&self) -> Self {
        let polarity = match self.polarity {
            Polarity::Pos => Polarity::Neg,
            Polarity::Neg => Polarity::Pos,
        };
        Literal { polarity, ..*self }
    }

    pub fn eval(&self, f: &FeatureVector) -> bool {
        f.get(self.feature()) == (self.polarity == Polarity::Pos)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.polarity == Polarity::Neg {
            write!(f, "NOT ")?;
        }
        let sq = self.square;
        match self.predicate {
            Predicate::Mine => write!(f, "{sq} is mine"),
            Predicate::Yours => write!(f, "{sq} is theirs"),
            Predicate::Empty => write!(f, "{sq} is empty"),
            Predicate::JustPlayed => write!(f, "{sq} was just played"),
            Predicate::Flipped => write!(f, "{sq} was flipped"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LiteralJson {
    sq: Square,
    pred: Predicate,
    pol: String,
}

impl Serialize for Literal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LiteralJson {
            sq: self.square,
            pred: self.predicate,
            pol: if self.polarity == Polarity::Pos { "+" } else { "-" }.into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = LiteralJson::deserialize(d)?;
        let polarity = match j.pol.as_str() {
            "+" => Polarity::Pos,
            "-" => Polarity::Neg,
            other => return Err(serde::de::Error::custom(format!("bad polarity {other:?}"))),
        };
        Ok(Literal::new(j.sq, j.pred, polarity))
    }
}

/// Conjunction of literals in canonical (square, predicate, polarity) order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Clause {
    pub literals: BTreeSet<Literal>,
}

impl Clause {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        Clause { literals: literals.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn eval(&self, f: &FeatureVector) -> bool {
        self.literals.iter().all(|l| l.eval(f))
    }

    pub fn features(&self) -> BTreeSet<usize> {
        self.literals.iter().map(Literal::feature).collect()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return write!(f, "TRUE");
        }
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " AND ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Three-valued truth of a literal under partial knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

const ALL_STATES: u8 = 0b111;

fn state_bit(s: SquareState) -> u8 {
    match s {
        SquareState::Mine => 1,
        SquareState::Yours => 2,
        SquareState::Empty => 4,
    }
}

fn state_of_bit(bit: u8) -> SquareState {
    match bit {
        1 => SquareState::Mine,
        2 => SquareState::Yours,
        _ => SquareState::Empty,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SquareFacts {
    /// Allowed MINE/YOURS/EMPTY states.
    states: u8,
    just_played: Option<bool>,
    flipped: Option<bool>,
}

impl Default for SquareFacts {
    fn default() -> Self {
        SquareFacts { states: ALL_STATES, just_played: None, flipped: None }
    }
}

/// What a satisfiable conjunction of literals says about each square, with
/// consequences of the feature-vector invariants applied.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Facts {
    squares: BTreeMap<Square, SquareFacts>,
    just_played_at: Option<Square>,
}

impl Facts {
    /// `None` if the literals cannot hold together on any valid vector.
    pub fn from_literals<'a>(lits: impl IntoIterator<Item = &'a Literal>) -> Option<Facts> {
        let mut facts = Facts::default();
        for l in lits {
            let sf = facts.squares.entry(l.square).or_default();
            let pos = l.polarity == Polarity::Pos;
            match l.predicate.state() {
                Some(s) => {
                    if pos {
                        sf.states &= state_bit(s);
                    } else {
                        sf.states &= !state_bit(s);
                    }
                }
                None => {
                    let slot = if l.predicate == Predicate::JustPlayed {
                        &mut sf.just_played
                    } else {
                        &mut sf.flipped
                    };
                    match *slot {
                        Some(v) if v != pos => return None,
                        _ => *slot = Some(pos),
                    }
                }
            }
        }
        for (&sq, sf) in facts.squares.iter_mut() {
            if sf.flipped == Some(true) {
                sf.states &= !state_bit(SquareState::Empty);
                if sf.just_played == Some(true) {
                    return None;
                }
            }
            if sf.states == 0 {
                return None;
            }
            if sf.just_played == Some(true) {
                if facts.just_played_at.is_some() {
                    return None;
                }
                facts.just_played_at = Some(sq);
            }
        }
        Some(facts)
    }

    fn get(&self, sq: Square) -> SquareFacts {
        self.squares.get(&sq).copied().unwrap_or_default()
    }

    pub fn truth(&self, l: &Literal) -> Truth {
        let sf = self.get(l.square);
        let positive = match l.predicate.state() {
            Some(s) => {
                let b = state_bit(s);
                if sf.states == b {
                    Truth::True
                } else if sf.states & b == 0 {
                    Truth::False
                } else {
                    Truth::Unknown
                }
            }
            None if l.predicate == Predicate::JustPlayed => {
                if sf.just_played == Some(true) {
                    Truth::True
                } else if sf.just_played == Some(false)
                    || sf.flipped == Some(true)
                    || self.just_played_at.is_some_and(|s| s != l.square)
                {
                    Truth::False
                } else {
                    Truth::Unknown
                }
            }
            None => {
                if sf.flipped == Some(true) {
                    Truth::True
                } else if sf.flipped == Some(false)
                    || sf.just_played == Some(true)
                    || sf.states == state_bit(SquareState::Empty)
                {
                    Truth::False
                } else {
                    Truth::Unknown
                }
            }
        };
        match (l.polarity, positive) {
            (Polarity::Pos, t) => t,
            (Polarity::Neg, Truth::True) => Truth::False,
            (Polarity::Neg, Truth::False) => Truth::True,
            (Polarity::Neg, Truth::Unknown) => Truth::Unknown,
        }
    }

    /// True iff every literal of `c` is entailed.
    pub fn entails(&self, c: &Clause) -> bool {
        c.literals.iter().all(|l| self.truth(l) == Truth::True)
    }

    /// Shortest literal set with the same meaning on valid vectors.
    pub fn to_clause(&self) -> Clause {
        let mut lits = BTreeSet::new();
        for (&sq, sf) in &self.squares {
            let flipped = sf.flipped == Some(true);
            match sf.states.count_ones() {
                1 => {
                    lits.insert(Literal::pos(sq, state_of_bit(sf.states).predicate()));
                }
                2 => {
                    let missing = ALL_STATES & !sf.states;
                    let implied_by_flip = flipped && missing == state_bit(SquareState::Empty);
                    if !implied_by_flip {
                        lits.insert(Literal::neg(sq, state_of_bit(missing).predicate()));
                    }
                }
                _ => {}
            }
            match sf.just_played {
                Some(true) => {
                    lits.insert(Literal::pos(sq, Predicate::JustPlayed));
                }
                Some(false) => {
                    let implied = flipped || self.just_played_at.is_some_and(|s| s != sq);
                    if !implied {
                        lits.insert(Literal::neg(sq, Predicate::JustPlayed));
                    }
                }
                None => {}
            }
            match sf.flipped {
                Some(true) => {
                    lits.insert(Literal::pos(sq, Predicate::Flipped));
                }
                Some(false) => {
                    let implied = sf.just_played == Some(true)
                        || sf.states == state_bit(SquareState::Empty);
                    if !implied {
                        lits.insert(Literal::neg(sq, Predicate::Flipped));
                    }
                }
                None => {}
            }
        }
        Clause { literals: lits }
    }
}

/// Rewrite a clause to canonical form; `None` if it is unsatisfiable.
pub fn simplify(clause: &Clause) -> Option<Clause> {
    Facts::from_literals(&clause.literals).map(|f| f.to_clause())
}

/// `general` subsumes `specific` when every valid vector satisfying
/// `specific` also satisfies `general`.
pub fn subsumes(general: &Clause, specific: &Clause) -> bool {
    match Facts::from_literals(&specific.literals) {
        Some(f) => f.entails(general),
        None => true,
    }
}

/// Multi-valued cube: per (square, variable) the set of allowed values.
/// Variable 0 is the square state (3 values), 1 just-played, 2 flipped
/// (bit 0 = false, bit 1 = true).
type Cube = BTreeMap<(Square, u8), u8>;

fn full_mask(var: u8) -> u8 {
    if var == 0 {
        ALL_STATES
    } else {
        0b11
    }
}

fn cube_of(c: &Clause) -> Cube {
    let mut cube = Cube::new();
    for l in &c.literals {
        let (var, mask) = match (l.predicate.state(), l.predicate) {
            (Some(s), _) => (
                0,
                if l.polarity == Polarity::Pos {
                    state_bit(s)
                } else {
                    ALL_STATES & !state_bit(s)
                },
            ),
            (None, p) => (
                if p == Predicate::JustPlayed { 1 } else { 2 },
                if l.polarity == Polarity::Pos { 0b10 } else { 0b01 },
            ),
        };
        *cube.entry((l.square, var)).or_insert(full_mask(var)) &= mask;
    }
    cube
}

fn clause_of(cube: &Cube) -> Clause {
    let mut lits = Vec::new();
    for (&(sq, var), &mask) in cube {
        match var {
            0 => match mask.count_ones() {
                1 => lits.push(Literal::pos(sq, state_of_bit(mask).predicate())),
                2 => lits.push(Literal::neg(sq, state_of_bit(ALL_STATES & !mask).predicate())),
                _ => {}
            },
            _ => {
                let p = if var == 1 { Predicate::JustPlayed } else { Predicate::Flipped };
                match mask {
                    0b10 => lits.push(Literal::pos(sq, p)),
                    0b01 => lits.push(Literal::neg(sq, p)),
                    _ => {}
                }
            }
        }
    }
    Clause::new(lits)
}

/// Consensus of two cubes on `var`, if it is a satisfiable new cube.
fn consensus(a: &Cube, b: &Cube, var: (Square, u8)) -> Option<Cube> {
    let mut out = Cube::new();
    for (&k, &m) in a.iter().chain(b.iter()) {
        if k == var {
            continue;
        }
        let e = out.entry(k).or_insert(full_mask(k.1));
        *e &= m;
        if *e == 0 {
            return None;
        }
    }
    let joined = a[&var] | b[&var];
    if joined != full_mask(var.1) {
        out.insert(var, joined);
    }
    Some(out)
}

/// Drop clauses subsumed by another clause; keeps the first of equal pairs.
pub fn remove_subsumed(clauses: &[Clause]) -> Vec<Clause> {
    let mut keep: Vec<Clause> = Vec::new();
    let mut sorted: Vec<&Clause> = clauses.iter().collect();
    sorted.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    sorted.dedup();
    for c in sorted {
        if !keep.iter().any(|k| subsumes(k, c)) {
            keep.push(c.clone());
        }
    }
    keep.sort();
    keep
}

/// Simplify each clause, drop unsatisfiable ones, close under consensus and
/// remove subsumed clauses. Returns the clauses and the number of
/// unsatisfiable input clauses.
pub fn simplify_dnf(clauses: &[Clause]) -> (Vec<Clause>, usize) {
    let mut unsat = 0;
    let mut set: Vec<Clause> = Vec::new();
    for c in clauses {
        match simplify(c) {
            Some(s) => set.push(s),
            None => unsat += 1,
        }
    }
    let mut set = remove_subsumed(&set);
    loop {
        let mut added = false;
        'pairs: for i in 0..set.len() {
            for j in (i + 1)..set.len() {
                let (a, b) = (cube_of(&set[i]), cube_of(&set[j]));
                for (&k, &ma) in &a {
                    let Some(&mb) = b.get(&k) else { continue };
                    if ma & mb == ma || ma & mb == mb {
                        continue;
                    }
                    let Some(cube) = consensus(&a, &b, k) else { continue };
                    let Some(c) = simplify(&clause_of(&cube)) else { continue };
                    if set.iter().any(|s| subsumes(s, &c)) {
                        continue;
                    }
                    set.push(c);
                    set = remove_subsumed(&set);
                    added = true;
                    break 'pairs;
                }
            }
        }
        if !added || set.len() >= MAX_CONSENSUS_CLAUSES {
            break;
        }
    }
    (set, unsat)
}

/// Result of Otsu's method over a weighted 1-D sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuCut<T> {
    pub threshold: T,
    /// Number of distinct values in the lower group.
    pub lower_count: usize,
}

/// Threshold minimising weighted within-group variance. Candidate cuts lie
/// between consecutive distinct values; the returned threshold is the
/// midpoint of the chosen gap, and ties go to the lowest cut.
pub fn otsu_threshold<T: Scalar>(values: &[T], weights: &[T]) -> Result<OtsuCut<T>, RuleError> {
    if values.len() != weights.len() {
        return Err(RuleError::LengthMismatch { values: values.len(), weights: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
        return Err(RuleError::BadWeight);
    }
    let mut pts: Vec<(T, T)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
    let mut groups: Vec<(T, T)> = Vec::new();
    for (v, w) in pts {
        match groups.last_mut() {
            Some(g) if g.0 == v => g.1 += w,
            _ => groups.push((v, w)),
        }
    }
    if groups.len() < 2 {
        return Err(RuleError::Degenerate);
    }
    let total_w: T = groups.iter().map(|g| g.1).sum();
    let total_s: T = groups.iter().map(|g| g.0 * g.1).sum();
    let total_ss: T = groups.iter().map(|g| g.0 * g.0 * g.1).sum();
    let scale = (total_ss - total_s * total_s / total_w).abs().max(T::min_positive_value());
    let tol = T::of(crate::tree::GAIN_TIE_TOLERANCE) * scale;
    let (mut w0, mut s0) = (T::zero(), T::zero());
    let mut best: Option<(usize, T)> = None;
    for (k, g) in groups[..groups.len() - 1].iter().enumerate() {
        w0 += g.1;
        s0 += g.0 * g.1;
        let (w1, s1) = (total_w - w0, total_s - s0);
        // Between-group term; maximising it minimises within-group SSE.
        let between = s0 * s0 / w0 + s1 * s1 / w1;
        match best {
            Some((_, b)) if between <= b + tol => {}
            _ => best = Some((k, between)),
        }
    }
    let (k, _) = best.expect("at least one cut");
    Ok(OtsuCut {
        threshold: (groups[k].0 + groups[k + 1].0) / T::of(2.0),
        lower_count: k + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleFlag {
    #[default]
    Ok,
    /// The tree has no ON leaves; the rule is empty.
    NoOnLeaves,
}

/// A neuron's OR-of-ANDs description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnfRule {
    #[serde(rename = "neuron")]
    pub neuron_id: u32,
    pub layer: u16,
    pub clauses: Vec<Clause>,
    #[serde(rename = "otsu")]
    pub otsu_threshold: Option<f64>,
    /// Fit score (R^2 or F1) of the tree the rule came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default)]
    pub flag: RuleFlag,
}

impl DnfRule {
    pub fn new(neuron_id: u32, layer: u16, clauses: Vec<Clause>) -> Self {
        DnfRule { neuron_id, layer, clauses, otsu_threshold: None, score: None, flag: RuleFlag::Ok }
    }

    pub fn eval(&self, f: &FeatureVector) -> bool {
        self.clauses.iter().any(|c| c.eval(f))
    }

    /// Human-readable form, e.g. `C0 is empty AND D1 is theirs AND E2 is mine`.
    pub fn pretty(&self) -> String {
        match self.clauses.len() {
            0 => "FALSE".into(),
            1 => self.clauses[0].to_string(),
            _ => self
                .clauses
                .iter()
                .map(|c| format!("({c})"))
                .collect::<Vec<_>>()
                .join(" OR "),
        }
    }

    /// Clauses ordered by how many of `positions` they match, descending
    /// (ties keep canonical order).
    pub fn clauses_by_support(&self, positions: &[FeatureVector]) -> Vec<(Clause, usize)> {
        let mut out: Vec<(Clause, usize)> = self
            .clauses
            .iter()
            .map(|c| (c.clone(), positions.iter().filter(|f| c.eval(f)).count()))
            .collect();
        out.sort_by_key(|c| std::cmp::Reverse(c.1));
        out
    }
}

/// Clause masks for fast evaluation: a clause holds iff all `pos` bits are
/// set and no `neg` bit is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledDnf {
    clauses: Vec<([u64; 5], [u64; 5])>,
}

impl CompiledDnf {
    pub fn new(clauses: &[Clause]) -> Self {
        let clauses = clauses
            .iter()
            .map(|c| {
                let (mut pos, mut neg) = ([0u64; 5], [0u64; 5]);
                for l in &c.literals {
                    let f = l.feature();
                    let m = if l.polarity == Polarity::Pos { &mut pos } else { &mut neg };
                    m[f / 64] |= 1 << (f % 64);
                }
                (pos, neg)
            })
            .collect();
        CompiledDnf { clauses }
    }

    pub fn clause_holds(&self, i: usize, f: &FeatureVector) -> bool {
        let (pos, neg) = &self.clauses[i];
        (0..5).all(|b| f.words[b] & pos[b] == pos[b] && f.words[b] & neg[b] == 0)
    }

    pub fn eval(&self, f: &FeatureVector) -> bool {
        (0..self.clauses.len()).any(|i| self.clause_holds(i, f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtractOptions {
    /// Ignore leaf sample counts in Otsu's threshold.
    pub unweighted_otsu: bool,
}

/// Extraction result plus bookkeeping about the rewrite.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub rule: DnfRule,
    /// One clause per ON leaf, straight from the decision paths.
    pub raw_clauses: Vec<Clause>,
    pub unsatisfiable_dropped: usize,
}

/// Leaves classified ON (by node index) and the Otsu threshold if used.
pub fn on_leaves<T: Scalar>(
    tree: &DecisionTree<T>,
    opts: ExtractOptions,
) -> (Vec<usize>, Option<T>) {
    let leaves = tree.leaf_paths();
    match tree.mode() {
        TreeMode::Classification => (
            leaves.iter().filter(|l| l.value > T::of(0.5)).map(|l| l.node).collect(),
            None,
        ),
        TreeMode::Regression => {
            let values: Vec<T> = leaves.iter().map(|l| l.value).collect();
            let weights: Vec<T> = leaves
                .iter()
                .map(|l| if opts.unweighted_otsu { T::one() } else { T::of_usize(l.samples.max(1)) })
                .collect();
            match otsu_threshold(&values, &weights) {
                Ok(cut) => (
                    leaves.iter().filter(|l| l.value > cut.threshold).map(|l| l.node).collect(),
                    Some(cut.threshold),
                ),
                Err(_) => (Vec::new(), None),
            }
        }
    }
}

/// Convert a fitted tree into a simplified DNF rule.
pub fn extract_dnf<T: Scalar>(
    tree: &DecisionTree<T>,
    neuron_id: u32,
    layer: u16,
    opts: ExtractOptions,
) -> Extraction {
    let (on, threshold) = on_leaves(tree, opts);
    let raw_clauses: Vec<Clause> = tree
        .leaf_paths()
        .into_iter()
        .filter(|p| on.contains(&p.node))
        .map(|p| Clause::new(p.decisions.iter().map(|&(f, b)| Literal::from_feature(f, b))))
        .collect();
    let (clauses, unsat) = simplify_dnf(&raw_clauses);
    let mut rule = DnfRule::new(neuron_id, layer, clauses);
    rule.otsu_threshold = threshold.map(Scalar::as_f64);
    if raw_clauses.is_empty() {
        rule.flag = RuleFlag::NoOnLeaves;
    }
    Extraction { rule, raw_clauses, unsatisfiable_dropped: unsat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Node, TreeConfig};

    fn sq(s: &str) -> Square {
        s.parse().unwrap()
    }

    fn lit(s: &str, p: Predicate, pos: bool) -> Literal {
        Literal::new(sq(s), p, if pos { Polarity::Pos } else { Polarity::Neg })
    }

    #[test]
    fn rewrite_examples() {
        use Predicate::*;
        let c = Clause::new([lit("E2", Yours, false), lit("E2", Empty, false)]);
        assert_eq!(simplify(&c), Some(Clause::new([lit("E2", Mine, true)])));
        let c = Clause::new([lit("E2", Yours, true), lit("E2", Empty, false)]);
        assert_eq!(simplify(&c), Some(Clause::new([lit("E2", Yours, true)])));
        let c = Clause::new([lit("E2", Mine, true), lit("E2", Empty, true)]);
        assert_eq!(simplify(&c), None);
        let c = Clause::new([lit("E2", Flipped, true), lit("E2", Flipped, false)]);
        assert_eq!(simplify(&c), None);
        let c = Clause::new([lit("A4", JustPlayed, true), lit("B4", JustPlayed, true)]);
        assert_eq!(simplify(&c), None);
        let c = Clause::new([lit("A4", JustPlayed, true), lit("B4", JustPlayed, false)]);
        assert_eq!(simplify(&c), Some(Clause::new([lit("A4", JustPlayed, true)])));
        // Binary predicates keep their negations.
        let c = Clause::new([lit("F5", Flipped, false)]);
        assert_eq!(simplify(&c), Some(c.clone()));
    }

    #[test]
    fn l1n421_style_rule_is_one_clause() {
        use Predicate::*;
        let c = Clause::new([
            lit("A4", JustPlayed, true),
            lit("B4", Empty, false),
            lit("C4", Empty, false),
        ]);
        assert_eq!(simplify(&c), Some(c.clone()));
        assert_eq!(
            c.to_string(),
            "A4 was just played AND NOT B4 is empty AND NOT C4 is empty"
        );
    }

    #[test]
    fn otsu_examples() {
        let w = [1.0; 4];
        let cut = otsu_threshold(&[0.0, 0.0, 10.0, 10.0], &w).unwrap();
        assert_eq!(cut.threshold, 5.0);
        let cut = otsu_threshold(&[1.0, 2.0, 8.0, 9.0, 10.0], &[1.0; 5]).unwrap();
        assert_eq!(cut.lower_count, 2);
        assert_eq!(cut.threshold, 5.0);
        assert_eq!(otsu_threshold(&[3.0, 7.0], &[1.0, 5.0]).unwrap().threshold, 5.0);
        assert_eq!(otsu_threshold(&[2.0, 2.0], &[1.0, 1.0]), Err(RuleError::Degenerate));
        assert_eq!(otsu_threshold(&[2.0, 3.0], &[1.0, 0.0]), Err(RuleError::BadWeight));
    }

    fn stump(feature: usize, left: f64, right: f64) -> DecisionTree<f64> {
        DecisionTree {
            nodes: vec![
                Node::Split { feature: feature as u16, left: 1, right: 2, samples: 200, gain: 1.0 },
                Node::Leaf { value: left, samples: 100 },
                Node::Leaf { value: right, samples: 100 },
            ],
            config: TreeConfig::default(),
            train_max_activation: right.max(left),
            train_mean: (left + right) / 2.0,
            on_threshold: None,
            degenerate: false,
        }
    }

    #[test]
    fn stump_on_just_played() {
        let f = feature_index(sq("A4"), Predicate::JustPlayed);
        let ex = extract_dnf(&stump(f, 0.0, 1.0), 3, 1, ExtractOptions::default());
        assert_eq!(ex.rule.clauses, vec![Clause::new([lit("A4", Predicate::JustPlayed, true)])]);
        assert_eq!(ex.rule.otsu_threshold, Some(0.5));
        assert_eq!(ex.rule.pretty(), "A4 was just played");
    }

    #[test]
    fn sibling_on_leaves_merge() {
        // Root on E2 EMPTY; both children split on D1 YOURS; ON when D1 YOURS.
        let e2 = feature_index(sq("E2"), Predicate::Empty) as u16;
        let d1 = feature_index(sq("D1"), Predicate::Yours) as u16;
        let tree = DecisionTree {
            nodes: vec![
                Node::Split { feature: e2, left: 1, right: 2, samples: 400, gain: 1.0 },
                Node::Split { feature: d1, left: 3, right: 4, samples: 200, gain: 1.0 },
                Node::Split { feature: d1, left: 5, right: 6, samples: 200, gain: 1.0 },
                Node::Leaf { value: 0.0, samples: 100 },
                Node::Leaf { value: 1.0, samples: 100 },
                Node::Leaf { value: 0.0, samples: 100 },
                Node::Leaf { value: 1.0, samples: 100 },
            ],
            config: TreeConfig::default(),
            train_max_activation: 1.0,
            train_mean: 0.5,
            on_threshold: None,
            degenerate: false,
        };
        let ex = extract_dnf(&tree, 0, 0, ExtractOptions::default());
        assert_eq!(ex.raw_clauses.len(), 2);
        assert_eq!(ex.rule.clauses, vec![Clause::new([lit("D1", Predicate::Yours, true)])]);
    }

    #[test]
    fn constant_tree_has_no_on_leaves() {
        let tree = DecisionTree {
            nodes: vec![Node::Leaf { value: 1.0, samples: 10 }],
            config: TreeConfig::default(),
            train_max_activation: 1.0,
            train_mean: 1.0,
            on_threshold: None,
            degenerate: true,
        };
        let ex = extract_dnf(&tree, 0, 0, ExtractOptions::default());
        assert!(ex.rule.clauses.is_empty());
        assert_eq!(ex.rule.flag, RuleFlag::NoOnLeaves);
        assert_eq!(ex.rule.pretty(), "FALSE");
    }

    #[test]
    fn consensus_removes_negated_path_literal() {
        use Predicate::*;
        // A OR (NOT A AND B) == A OR B.
        let a = lit("C2", Mine, true);
        let b = lit("F5", Flipped, true);
        let (set, _) = simplify_dnf(&[Clause::new([a]), Clause::new([a.negated(), b])]);
        assert_eq!(set, vec![Clause::new([a]), Clause::new([b])]);
    }

    #[test]
    fn rule_json_shape() {
        use Predicate::*;
        let mut r = DnfRule::new(7, 5, vec![Clause::new([lit("C0", Empty, true), lit("D1", Yours, false)])]);
        r.otsu_threshold = Some(0.25);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["neuron"], 7);
        assert_eq!(v["layer"], 5);
        assert_eq!(v["otsu"], 0.25);
        assert_eq!(v["clauses"][0][0], serde_json::json!({"sq": "C0", "pred": "EMPTY", "pol": "+"}));
        assert_eq!(v["clauses"][0][1]["pol"], "-");
        let back: DnfRule = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
