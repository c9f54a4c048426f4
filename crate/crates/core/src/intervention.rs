//! Fine-grained intervention planning and scoring.
//!
//! For a target square, two 3-square legality patterns are built: a
//! diagonal one pointing toward the middle 2x2 and an axial one at the same
//! distance. Positions where one pattern holds but not the other form the
//! intervention and control sets. Clean/ablated logits for those positions
//! come back in an `OLGP` file and are scored here.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Read, Write};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::othello::{derive_seed, rng_from_seed, BoardState, GameRecord, Predicate, Square, SquareState};
use crate::provenance::stable_hash;
use crate::rules::{Clause, Literal};
use crate::trace::PositionKey;
use crate::tree::FitReport;

pub const VOCAB: usize = 60;
pub const OLGP_MAGIC: &[u8; 4] = b"OLGP";
pub const OLGP_VERSION: u16 = 1;
pub const OLGP_HEADER_LEN: usize = 24;
pub const OLGP_ROW_LEN: usize = 4 + 1 + 1 + 8 + 2 * VOCAB * 4;
/// Layers eligible for layer-wise plans; the last layer is excluded.
pub const N_PLAN_LAYERS: u16 = 7;

#[derive(Debug, Error)]
pub enum InterventionError {
    #[error("{0} is not an eligible target square")]
    NotEligible(Square),
    #[error("no equal-distance axial pattern for {0}")]
    NoValidPair(Square),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("not an OLGP file (bad magic)")]
    BadMagic,
    #[error("unsupported OLGP version {0}")]
    UnsupportedVersion(u16),
    #[error("OLGP vocabulary must be {VOCAB}, found {0}")]
    BadVocab(u16),
    #[error("OLGP row {row} (byte offset {}): {msg}", OLGP_HEADER_LEN + .row * OLGP_ROW_LEN)]
    CorruptRow { row: usize, msg: String },
    #[error("no logits for {} position(s), first game {} move {}", .0.len(), .0[0].game_id, .0[0].move_index)]
    MissingLogits(Vec<PositionKey>),
    #[error("logit file plan hash {found:016x} does not match plan {expected:016x}")]
    PlanMismatch { expected: u64, found: u64 },
    #[error("n must be between 1 and {N_PLAN_LAYERS}, got {0}")]
    BadLayerCount(usize),
}

/// Index of a playable square in the 60-token vocabulary.
pub fn vocab_index(sq: Square) -> Option<usize> {
    Square::playable().position(|s| s == sq)
}

pub fn vocab_square(i: usize) -> Option<Square> {
    Square::playable().nth(i)
}

/// Squares in the middle 4x4 (columns C-F, rows 2-5).
pub fn in_middle_4x4(sq: Square) -> bool {
    (2..=5).contains(&sq.column()) && (2..=5).contains(&sq.row())
}

/// Empty target, opponent disc next to it, own disc beyond: the target is
/// legal for the player to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalityPattern {
    pub target: Square,
    /// (column step, row step), each in {-1, 0, 1}.
    pub direction: (i8, i8),
    pub squares: [Square; 3],
}

impl LegalityPattern {
    pub fn new(target: Square, direction: (i8, i8)) -> Option<LegalityPattern> {
        let a = target.offset(direction.0, direction.1)?;
        let b = a.offset(direction.0, direction.1)?;
        Some(LegalityPattern { target, direction, squares: [target, a, b] })
    }

    pub fn is_diagonal(&self) -> bool {
        self.direction.0 != 0 && self.direction.1 != 0
    }

    /// Largest distance from a pattern square to the middle 2x2.
    pub fn distance_to_center(&self) -> u8 {
        self.squares.iter().map(|s| s.distance_to_center()).max().expect("3 squares")
    }

    pub fn clause(&self) -> Clause {
        Clause::new([
            Literal::pos(self.squares[0], Predicate::Empty),
            Literal::pos(self.squares[1], Predicate::Yours),
            Literal::pos(self.squares[2], Predicate::Mine),
        ])
    }

    pub fn holds(&self, board: &BoardState) -> bool {
        board.relative_state(self.squares[0]) == SquareState::Empty
            && board.relative_state(self.squares[1]) == SquareState::Yours
            && board.relative_state(self.squares[2]) == SquareState::Mine
    }
}

fn toward_middle(v: u8) -> i8 {
    if v <= 3 {
        1
    } else {
        -1
    }
}

/// Diagonal pattern pointing toward the middle 2x2.
pub fn diagonal_pattern(target: Square) -> Option<LegalityPattern> {
    LegalityPattern::new(target, (toward_middle(target.column()), toward_middle(target.row())))
}

/// Axial pattern pointing toward the middle along the axis on which the
/// target is farther out; ties step along the column (changing rows).
pub fn axial_pattern(target: Square) -> Option<LegalityPattern> {
    let out = |v: u8| if v < 3 { 3 - v } else { v.saturating_sub(4) };
    let (dc, dr) = (out(target.column()), out(target.row()));
    let dir = if dc > dr {
        (toward_middle(target.column()), 0)
    } else {
        (0, toward_middle(target.row()))
    };
    LegalityPattern::new(target, dir)
}

/// Intervention/control pattern pair for a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternPair {
    pub intervention: LegalityPattern,
    pub control: LegalityPattern,
    pub diagonal_is_intervention: bool,
}

/// Build both patterns and assign them with a seeded coin flip.
pub fn build_pattern_pair(target: Square, seed: u64) -> Result<PatternPair, InterventionError> {
    if target.is_center() {
        return Err(InterventionError::NotEligible(target));
    }
    let diag = diagonal_pattern(target).ok_or(InterventionError::NoValidPair(target))?;
    let axial = axial_pattern(target).ok_or(InterventionError::NoValidPair(target))?;
    if diag.distance_to_center() != axial.distance_to_center() {
        return Err(InterventionError::NoValidPair(target));
    }
    let flip = rng_from_seed(derive_seed(seed, target.index() as u64)).next_u64() & 1 == 1;
    let (intervention, control) = if flip { (diag, axial) } else { (axial, diag) };
    Ok(PatternPair { intervention, control, diagonal_is_intervention: flip })
}

/// Positions (post-move boards) where exactly one of the patterns holds:
/// `(intervention only, control only)`.
pub fn collect_positions(
    games: &[GameRecord],
    pair: &PatternPair,
) -> Result<(Vec<PositionKey>, Vec<PositionKey>), crate::othello::OthelloError> {
    let (mut pi, mut pc) = (Vec::new(), Vec::new());
    for (gid, g) in games.iter().enumerate() {
        for (mi, b) in g.states()?.iter().enumerate() {
            let key = PositionKey { game_id: gid as u32, move_index: mi as u8 };
            match (pair.intervention.holds(b), pair.control.holds(b)) {
                (true, false) => pi.push(key),
                (false, true) => pc.push(key),
                _ => {}
            }
        }
    }
    Ok((pi, pc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedNeuron {
    pub layer: u16,
    pub neuron_id: u32,
    pub score: Option<f64>,
}

/// A target's pattern pair, the neurons to ablate and the position sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionPlan {
    pub target: Square,
    pub pair: PatternPair,
    pub assignment_seed: u64,
    pub neurons: Vec<PlannedNeuron>,
    pub positions_intervention: Vec<PositionKey>,
    pub positions_control: Vec<PositionKey>,
}

/// Every position listed by a set of plans, sorted and deduplicated.
pub fn plan_positions(plans: &[InterventionPlan]) -> Vec<PositionKey> {
    let set: BTreeSet<PositionKey> = plans
        .iter()
        .flat_map(|p| p.positions_intervention.iter().chain(&p.positions_control).copied())
        .collect();
    set.into_iter().collect()
}

/// Hash identifying a plan manifest; logit files must carry it.
pub fn plan_hash(manifest: &Value) -> u64 {
    stable_hash(manifest)
}

/// Clean and ablated logits for one position.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitPair {
    pub key: PositionKey,
    /// Bit i set iff vocabulary square i is legal.
    pub legal_mask: u64,
    pub clean: Vec<f32>,
    pub ablated: Vec<f32>,
}

impl LogitPair {
    pub fn n_legal(&self) -> u32 {
        self.legal_mask.count_ones()
    }

    fn validate(&self, row: usize) -> Result<(), InterventionError> {
        let bad = |msg: String| Err(InterventionError::CorruptRow { row, msg });
        if self.clean.len() != VOCAB || self.ablated.len() != VOCAB {
            return bad(format!("logit vectors must have {VOCAB} entries"));
        }
        if self.legal_mask >> VOCAB != 0 {
            return bad("legal mask has bits beyond the vocabulary".into());
        }
        if self.legal_mask == 0 {
            return bad("no legal squares".into());
        }
        if let Some(i) = self.clean.iter().chain(&self.ablated).position(|v| !v.is_finite()) {
            return bad(format!("non-finite logit at index {}", i % VOCAB));
        }
        Ok(())
    }
}

/// Legal-move mask of a board in vocabulary order.
pub fn legal_vocab_mask(board: &BoardState) -> u64 {
    let legal = board.legal_moves_mask();
    Square::playable()
        .enumerate()
        .filter(|(_, s)| legal & s.bit() != 0)
        .fold(0, |m, (i, _)| m | (1 << i))
}

pub fn write_olgp<W: Write>(mut w: W, plan_hash: u64, pairs: &[LogitPair]) -> Result<(), InterventionError> {
    for (i, p) in pairs.iter().enumerate() {
        p.validate(i)?;
    }
    let mut buf = Vec::with_capacity(OLGP_HEADER_LEN + pairs.len() * OLGP_ROW_LEN);
    buf.extend_from_slice(OLGP_MAGIC);
    buf.extend_from_slice(&OLGP_VERSION.to_le_bytes());
    buf.extend_from_slice(&(VOCAB as u16).to_le_bytes());
    buf.extend_from_slice(&(pairs.len() as u64).to_le_bytes());
    buf.extend_from_slice(&plan_hash.to_le_bytes());
    for p in pairs {
        buf.extend_from_slice(&p.key.game_id.to_le_bytes());
        buf.push(p.key.move_index);
        buf.push(p.n_legal() as u8);
        buf.extend_from_slice(&p.legal_mask.to_le_bytes());
        for v in p.clean.iter().chain(&p.ablated) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Parse an OLGP file: `(plan hash, rows)`.
pub fn read_olgp<R: Read>(mut r: R) -> Result<(u64, Vec<LogitPair>), InterventionError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < OLGP_HEADER_LEN || &bytes[..4] != OLGP_MAGIC {
        return Err(InterventionError::BadMagic);
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u16_at(4);
    if version != OLGP_VERSION {
        return Err(InterventionError::UnsupportedVersion(version));
    }
    let vocab = u16_at(6);
    if vocab as usize != VOCAB {
        return Err(InterventionError::BadVocab(vocab));
    }
    let n = u64_at(8) as usize;
    let hash = u64_at(16);
    let body = &bytes[OLGP_HEADER_LEN..];
    if body.len() != n.saturating_mul(OLGP_ROW_LEN) {
        let complete = body.len() / OLGP_ROW_LEN;
        return Err(InterventionError::CorruptRow {
            row: complete.min(n),
            msg: format!("expected {n} rows of {OLGP_ROW_LEN} bytes, body has {} bytes", body.len()),
        });
    }
    let mut pairs = Vec::with_capacity(n);
    let mut seen = BTreeSet::new();
    for (i, row) in body.chunks_exact(OLGP_ROW_LEN).enumerate() {
        let key = PositionKey {
            game_id: u32::from_le_bytes(row[..4].try_into().expect("4 bytes")),
            move_index: row[4],
        };
        let k = row[5];
        let legal_mask = u64::from_le_bytes(row[6..14].try_into().expect("8 bytes"));
        let floats: Vec<f32> = row[14..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let pair = LogitPair {
            key,
            legal_mask,
            clean: floats[..VOCAB].to_vec(),
            ablated: floats[VOCAB..].to_vec(),
        };
        pair.validate(i)?;
        if k as u32 != pair.n_legal() {
            return Err(InterventionError::CorruptRow {
                row: i,
                msg: format!("K = {k} but legal mask has {} squares", pair.n_legal()),
            });
        }
        if !seen.insert(key) {
            return Err(InterventionError::CorruptRow {
                row: i,
                msg: format!("duplicate position game {} move {}", key.game_id, key.move_index),
            });
        }
        pairs.push(pair);
    }
    Ok((hash, pairs))
}

/// Softmax over the vocabulary, in f64.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let e: Vec<f64> = logits.iter().map(|&v| (v as f64 - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// True iff the K highest logits are exactly the K legal squares.
pub fn top_k_accurate(logits: &[f32], legal_mask: u64) -> bool {
    let (mut min_legal, mut max_illegal) = (f32::INFINITY, f32::NEG_INFINITY);
    for (i, &v) in logits.iter().enumerate() {
        if legal_mask & (1 << i) != 0 {
            min_legal = min_legal.min(v);
        } else {
            max_illegal = max_illegal.max(v);
        }
    }
    min_legal > max_illegal
}

/// KL(p ‖ q) in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| a * (a.ln() - b.ln())).sum()
}

pub const BELOW_FRACTIONS: [f64; 3] = [0.01, 0.05, 0.10];

/// Mean effects over one position set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub n_positions: usize,
    pub mean_logit_diff: f64,
    pub mean_prob_diff: f64,
    pub clean_accuracy: f64,
    pub corrupted_accuracy: f64,
    /// mean(clean accuracy) − mean(corrupted accuracy)
    pub accuracy_diff: f64,
    /// Fraction with ablated target probability below 1%, 5%, 10% of clean.
    pub below: [f64; 3],
    /// Mean KL(clean ‖ ablated) over the vocabulary softmax.
    pub mean_kl: f64,
}

pub fn condition_metrics(pairs: &[&LogitPair], target: usize) -> ConditionMetrics {
    let n = pairs.len();
    if n == 0 {
        return ConditionMetrics::default();
    }
    let mut m = ConditionMetrics { n_positions: n, ..Default::default() };
    for p in pairs {
        let (pc, pa) = (softmax(&p.clean), softmax(&p.ablated));
        m.mean_logit_diff += p.clean[target] as f64 - p.ablated[target] as f64;
        m.mean_prob_diff += pc[target] - pa[target];
        m.clean_accuracy += top_k_accurate(&p.clean, p.legal_mask) as u8 as f64;
        m.corrupted_accuracy += top_k_accurate(&p.ablated, p.legal_mask) as u8 as f64;
        for (slot, &x) in m.below.iter_mut().zip(&BELOW_FRACTIONS) {
            if pa[target] < x * pc[target] {
                *slot += 1.0;
            }
        }
        m.mean_kl += kl_divergence(&pc, &pa);
    }
    let nf = n as f64;
    m.mean_logit_diff /= nf;
    m.mean_prob_diff /= nf;
    m.clean_accuracy /= nf;
    m.corrupted_accuracy /= nf;
    m.below.iter_mut().for_each(|b| *b /= nf);
    m.mean_kl /= nf;
    m.accuracy_diff = m.clean_accuracy - m.corrupted_accuracy;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub target: Square,
    pub intervention: ConditionMetrics,
    pub control: ConditionMetrics,
}

/// Score one target's intervention and control sets.
pub fn score_intervention(
    pairs: &BTreeMap<PositionKey, LogitPair>,
    positions_intervention: &[PositionKey],
    positions_control: &[PositionKey],
    target: Square,
) -> Result<TargetReport, InterventionError> {
    let t = vocab_index(target).ok_or(InterventionError::NotEligible(target))?;
    let missing: Vec<PositionKey> = positions_intervention
        .iter()
        .chain(positions_control)
        .filter(|k| !pairs.contains_key(k))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(InterventionError::MissingLogits(missing));
    }
    let pick = |ks: &[PositionKey]| -> Vec<&LogitPair> { ks.iter().map(|k| &pairs[k]).collect() };
    Ok(TargetReport {
        target,
        intervention: condition_metrics(&pick(positions_intervention), t),
        control: condition_metrics(&pick(positions_control), t),
    })
}

/// Unweighted mean of per-target metrics over targets with positions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_targets: usize,
    pub intervention: ConditionMetrics,
    pub control: ConditionMetrics,
}

fn mean_metrics(ms: &[ConditionMetrics]) -> ConditionMetrics {
    let used: Vec<&ConditionMetrics> = ms.iter().filter(|m| m.n_positions > 0).collect();
    let k = used.len() as f64;
    if used.is_empty() {
        return ConditionMetrics::default();
    }
    let avg = |f: &dyn Fn(&ConditionMetrics) -> f64| used.iter().map(|m| f(m)).sum::<f64>() / k;
    ConditionMetrics {
        n_positions: used.iter().map(|m| m.n_positions).sum(),
        mean_logit_diff: avg(&|m| m.mean_logit_diff),
        mean_prob_diff: avg(&|m| m.mean_prob_diff),
        clean_accuracy: avg(&|m| m.clean_accuracy),
        corrupted_accuracy: avg(&|m| m.corrupted_accuracy),
        accuracy_diff: avg(&|m| m.accuracy_diff),
        below: [avg(&|m| m.below[0]), avg(&|m| m.below[1]), avg(&|m| m.below[2])],
        mean_kl: avg(&|m| m.mean_kl),
    }
}

/// All-target and outside-middle-4x4 aggregates.
pub fn aggregate(reports: &[TargetReport]) -> (Aggregate, Aggregate) {
    let agg = |rs: Vec<&TargetReport>| Aggregate {
        n_targets: rs.len(),
        intervention: mean_metrics(&rs.iter().map(|r| r.intervention).collect::<Vec<_>>()),
        control: mean_metrics(&rs.iter().map(|r| r.control).collect::<Vec<_>>()),
    };
    (
        agg(reports.iter().collect()),
        agg(reports.iter().filter(|r| !in_middle_4x4(r.target)).collect()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LayerOrder {
    FirstN,
    LastN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    ReplaceWithTree,
    Zero,
    Mean,
}

/// Layers selected by a layer-wise plan.
pub fn plan_layers(order: LayerOrder, n: usize) -> Result<Vec<u16>, InterventionError> {
    if n == 0 || n > N_PLAN_LAYERS as usize {
        return Err(InterventionError::BadLayerCount(n));
    }
    let n = n as u16;
    Ok(match order {
        LayerOrder::FirstN => (0..n).collect(),
        LayerOrder::LastN => (N_PLAN_LAYERS - n..N_PLAN_LAYERS).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerwiseNeuron {
    pub neuron_id: u32,
    pub score: f64,
    /// Mean training activation, used by MEAN ablation.
    pub mean: f64,
    pub tree: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerwisePlan {
    pub order: LayerOrder,
    pub n: usize,
    pub cutoff: f64,
    pub action: Action,
    pub layers: BTreeMap<u16, Vec<LayerwiseNeuron>>,
}

/// Neurons scoring above `cutoff` in the selected layers.
pub fn layerwise_plan(
    reports: &[FitReport<f64>],
    cutoff: f64,
    order: LayerOrder,
    n: usize,
    action: Action,
) -> Result<LayerwisePlan, InterventionError> {
    let layers = plan_layers(order, n)?;
    let mut out: BTreeMap<u16, Vec<LayerwiseNeuron>> = layers.iter().map(|&l| (l, Vec::new())).collect();
    for r in reports {
        let Some(slot) = out.get_mut(&r.layer) else { continue };
        let (Some(tree), true) = (&r.tree, r.is_interpretable(cutoff)) else { continue };
        slot.push(LayerwiseNeuron {
            neuron_id: r.neuron_id,
            score: r.score.expect("interpretable reports have scores"),
            mean: tree.train_mean,
            tree: tree.to_json(),
        });
    }
    out.values_mut().for_each(|v| v.sort_by_key(|n| n.neuron_id));
    Ok(LayerwisePlan { order, n, cutoff, action, layers: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(s: &str) -> Square {
        s.parse().unwrap()
    }

    #[test]
    fn h3_patterns() {
        let d = diagonal_pattern(sq("H3")).unwrap();
        assert_eq!(d.squares, [sq("H3"), sq("G4"), sq("F5")]);
        let a = axial_pattern(sq("H3")).unwrap();
        assert_eq!(a.squares, [sq("H3"), sq("G3"), sq("F3")]);
        assert_eq!(d.distance_to_center(), 3);
        assert_eq!(a.distance_to_center(), 3);
    }

    #[test]
    fn corners() {
        for c in ["A0", "H0", "A7", "H7"] {
            let p = build_pattern_pair(sq(c), 1).unwrap();
            assert_eq!(p.intervention.distance_to_center(), p.control.distance_to_center());
            assert_ne!(p.intervention.is_diagonal(), p.control.is_diagonal());
        }
        let d = diagonal_pattern(sq("A0")).unwrap();
        assert_eq!(d.squares, [sq("A0"), sq("B1"), sq("C2")]);
        let a = axial_pattern(sq("H7")).unwrap();
        assert_eq!(a.squares, [sq("H7"), sq("H6"), sq("H5")]);
        assert!(matches!(build_pattern_pair(sq("D3"), 0), Err(InterventionError::NotEligible(_))));
    }

    #[test]
    fn vocab_and_middle() {
        assert_eq!(vocab_index(sq("A0")), Some(0));
        assert_eq!(vocab_index(sq("D3")), None);
        assert_eq!(vocab_index(sq("H7")), Some(59));
        assert_eq!(vocab_square(27), Some(sq("F3")));
        let outside = Square::playable().filter(|&s| !in_middle_4x4(s)).count();
        assert_eq!(outside, 48);
    }

    #[test]
    fn olgp_round_trip_and_errors() {
        let pair = LogitPair {
            key: PositionKey { game_id: 7, move_index: 3 },
            legal_mask: 0b1011,
            clean: (0..60).map(|i| i as f32 * 0.5).collect(),
            ablated: vec![0.25; 60],
        };
        let mut buf = Vec::new();
        write_olgp(&mut buf, 42, std::slice::from_ref(&pair)).unwrap();
        assert_eq!(buf.len(), OLGP_HEADER_LEN + OLGP_ROW_LEN);
        assert_eq!(buf[OLGP_HEADER_LEN + 5], 3);
        let (h, rows) = read_olgp(&buf[..]).unwrap();
        assert_eq!((h, rows), (42, vec![pair]));
        assert!(matches!(read_olgp(&buf[..buf.len() - 1]), Err(InterventionError::CorruptRow { row: 0, .. })));
        let mut bad = buf.clone();
        bad[OLGP_HEADER_LEN + 5] = 9;
        assert!(matches!(read_olgp(&bad[..]), Err(InterventionError::CorruptRow { .. })));
        bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_olgp(&bad[..]), Err(InterventionError::BadMagic)));
    }

    #[test]
    fn identity_ablation() {
        let p = LogitPair {
            key: PositionKey { game_id: 0, move_index: 0 },
            legal_mask: 0b110,
            clean: (0..60).map(|i| if i == 1 || i == 2 { 3.0 } else { -(i as f32) / 10.0 }).collect(),
            ablated: vec![],
        };
        let p = LogitPair { ablated: p.clean.clone(), ..p };
        let m = condition_metrics(&[&p], 1);
        assert_eq!(m.mean_logit_diff, 0.0);
        assert_eq!(m.mean_prob_diff, 0.0);
        assert_eq!(m.below, [0.0; 3]);
        assert_eq!(m.clean_accuracy, m.corrupted_accuracy);
        assert_eq!(m.clean_accuracy, 1.0);
        assert_eq!(m.mean_kl, 0.0);
    }

    #[test]
    fn layer_selection() {
        assert_eq!(plan_layers(LayerOrder::FirstN, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(plan_layers(LayerOrder::LastN, 2).unwrap(), vec![5, 6]);
        assert!(plan_layers(LayerOrder::LastN, 8).is_err());
    }
}
