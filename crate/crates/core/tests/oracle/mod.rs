//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use rulemine::othello::{rng_from_seed, uniform_index, BoardState, Color, FeatureVector, Predicate, Square};
use rulemine::tree::{DecisionTree, Node, TreeConfig, TreeMode};

/// Plain 8x8 board: 0 empty, 1 player to move, -1 opponent; `cell[row][col]`.
pub type Grid = [[i8; 8]; 8];

pub fn grid(me: u64, opp: u64) -> Grid {
    let mut g = [[0i8; 8]; 8];
    for (i, cell) in g.iter_mut().flatten().enumerate() {
        *cell = if me >> i & 1 == 1 {
            1
        } else if opp >> i & 1 == 1 {
            -1
        } else {
            0
        };
    }
    g
}

/// Squares flipped by the player to move placing at (row, col), found by
/// walking each of the eight rays cell by cell.
pub fn ray_flips(g: &Grid, row: i32, col: i32) -> Vec<(i32, i32)> {
    if g[row as usize][col as usize] != 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for dr in -1..=1 {
        for dc in -1..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let mut run = Vec::new();
            let (mut r, mut c) = (row + dr, col + dc);
            while (0..8).contains(&r) && (0..8).contains(&c) && g[r as usize][c as usize] == -1 {
                run.push((r, c));
                r += dr;
                c += dc;
            }
            let closed = (0..8).contains(&r) && (0..8).contains(&c) && g[r as usize][c as usize] == 1;
            if closed && !run.is_empty() {
                out.extend(run);
            }
        }
    }
    out
}

/// Legal moves as a bitboard.
pub fn ray_legal(me: u64, opp: u64) -> u64 {
    let g = grid(me, opp);
    let mut mask = 0u64;
    for r in 0..8 {
        for c in 0..8 {
            if !ray_flips(&g, r, c).is_empty() {
                mask |= 1 << (r * 8 + c);
            }
        }
    }
    mask
}

/// `(me after, opp after, flipped)` bitboards for a move.
pub fn ray_apply(me: u64, opp: u64, sq: usize) -> (u64, u64, u64) {
    let g = grid(me, opp);
    let flips = ray_flips(&g, (sq / 8) as i32, (sq % 8) as i32);
    let f = flips.iter().fold(0u64, |m, &(r, c)| m | 1 << (r * 8 + c));
    (me | f | 1 << sq, opp & !f, f)
}

/// Reference tree shape for comparisons.
#[derive(Debug, Clone, PartialEq)]
pub enum RefTree {
    Leaf { value: f64, n: usize },
    Split { feature: usize, n: usize, left: Box<RefTree>, right: Box<RefTree> },
}

fn impurity(mode: TreeMode, ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.is_empty() {
        return 0.0;
    }
    match mode {
        TreeMode::Regression => {
            let mean = ys.iter().sum::<f64>() / n;
            ys.iter().map(|y| (y - mean) * (y - mean)).sum()
        }
        TreeMode::Classification => {
            let p = ys.iter().sum::<f64>() / n;
            n * (1.0 - p * p - (1.0 - p) * (1.0 - p))
        }
    }
}

/// Greedy CART by direct enumeration: every feature at every node, impurity
/// computed from the rows themselves. Ties: a later feature must beat the
/// best gain by more than 1e-9 of the node's sum of squares.
pub fn reference_tree(rows: &[(Vec<bool>, f64)], cfg: &TreeConfig, depth: usize) -> RefTree {
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let n = rows.len();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let leaf = RefTree::Leaf { value: mean, n };
    let pure = ys.iter().all(|&y| y == ys[0]);
    if depth == cfg.max_depth || n < cfg.min_samples_split || pure {
        return leaf;
    }
    let sse = impurity(TreeMode::Regression, &ys);
    let tol = 1e-9 * sse.abs().max(f64::MIN_POSITIVE);
    let parent = impurity(cfg.mode, &ys);
    let n_features = rows[0].0.len();
    let mut best: Option<(usize, f64)> = None;
    for f in 0..n_features {
        let (right, left): (Vec<f64>, Vec<f64>) = {
            let r: Vec<f64> = rows.iter().filter(|r| r.0[f]).map(|r| r.1).collect();
            let l: Vec<f64> = rows.iter().filter(|r| !r.0[f]).map(|r| r.1).collect();
            (r, l)
        };
        if right.len() < cfg.min_samples_leaf || left.len() < cfg.min_samples_leaf {
            continue;
        }
        let gain = parent - impurity(cfg.mode, &left) - impurity(cfg.mode, &right);
        if gain <= tol {
            continue;
        }
        match best {
            Some((_, g)) if gain <= g + tol => {}
            _ => best = Some((f, gain)),
        }
    }
    let Some((feature, _)) = best else { return leaf };
    let (r, l): (Vec<_>, Vec<_>) = rows.iter().cloned().partition(|r| r.0[feature]);
    RefTree::Split {
        feature,
        n,
        left: Box::new(reference_tree(&l, cfg, depth + 1)),
        right: Box::new(reference_tree(&r, cfg, depth + 1)),
    }
}

/// Library tree in reference form.
pub fn as_ref_tree(t: &DecisionTree<f64>, i: usize) -> RefTree {
    match t.nodes[i] {
        Node::Leaf { value, samples } => RefTree::Leaf { value, n: samples },
        Node::Split { feature, left, right, samples, .. } => RefTree::Split {
            feature: feature as usize,
            n: samples,
            left: Box::new(as_ref_tree(t, left)),
            right: Box::new(as_ref_tree(t, right)),
        },
    }
}

/// Same structure, features and counts; leaf values within `tol`.
pub fn trees_match(a: &RefTree, b: &RefTree, tol: f64) -> bool {
    match (a, b) {
        (RefTree::Leaf { value: x, n: m }, RefTree::Leaf { value: y, n }) => m == n && (x - y).abs() <= tol,
        (
            RefTree::Split { feature: f, n: m, left: l1, right: r1 },
            RefTree::Split { feature: g, n, left: l2, right: r2 },
        ) => f == g && m == n && trees_match(l1, l2, tol) && trees_match(r1, r2, tol),
        _ => false,
    }
}

/// Number of distinct values in the lower group of the best cut, by
/// evaluating every cut's weighted within-group sum of squares directly.
/// Ties (within 1e-9 of the total weighted SS) go to the lowest cut.
pub fn exhaustive_otsu(values: &[f64], weights: &[f64]) -> Option<(usize, f64, f64)> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return None;
    }
    let wss = |pred: &dyn Fn(f64) -> bool| -> f64 {
        let (mut w, mut s) = (0.0, 0.0);
        for (&v, &wt) in values.iter().zip(weights) {
            if pred(v) {
                w += wt;
                s += wt * v;
            }
        }
        let mean = s / w;
        values.iter().zip(weights).filter(|(v, _)| pred(**v)).map(|(v, wt)| wt * (v - mean) * (v - mean)).sum()
    };
    let total = wss(&|_| true);
    let tol = 1e-9 * total.max(f64::MIN_POSITIVE);
    let mut best: Option<(usize, f64)> = None;
    for k in 1..distinct.len() {
        let cut = distinct[k - 1];
        let within = wss(&|v| v <= cut) + wss(&|v| v > cut);
        match best {
            Some((_, b)) if within >= b - tol => {}
            _ => best = Some((k, within)),
        }
    }
    let (k, _) = best?;
    Some((k, distinct[k - 1], distinct[k]))
}

/// Uniformly random feature vector satisfying every structural invariant:
/// one state per square, one just-played occupied square, flips only on
/// occupied squares other than the one just played.
pub fn random_valid_features(seed: u64) -> FeatureVector {
    let mut rng = rng_from_seed(seed);
    let mut words = [0u64; 5];
    for sq in 0..64 {
        words[uniform_index(&mut rng, 3)] |= 1 << sq;
    }
    // Keep at least one occupied square for the last move.
    if words[2] == u64::MAX {
        words[2] &= !1;
        words[0] |= 1;
    }
    let occupied: Vec<usize> = (0..64).filter(|&s| words[2] >> s & 1 == 0).collect();
    let jp = occupied[uniform_index(&mut rng, occupied.len())];
    words[Predicate::JustPlayed as usize] = 1 << jp;
    for &s in &occupied {
        if s != jp && uniform_index(&mut rng, 4) == 0 {
            words[Predicate::Flipped as usize] |= 1 << s;
        }
    }
    let f = FeatureVector { words };
    debug_assert!(f.validate().is_ok());
    f
}

pub fn sq(name: &str) -> Square {
    name.parse().expect("square name")
}

/// Three positions with hand-computable softmax values, target = vocabulary
/// index 0 (A0):
/// 1. clean target logit ln 59, rest 0 (p = 1/2); ablated all 0 (p = 1/60).
///    Only A0 legal.
/// 2. A0 and B0 legal with logit 1, rest 0, identical clean and ablated.
/// 3. clean target logit ln 531 (p = 0.9); ablated ln(59/999) (p = 0.001).
///    Only A0 legal.
pub fn softmax_fixture() -> (Vec<rulemine::intervention::LogitPair>, rulemine::intervention::ConditionMetrics) {
    use rulemine::intervention::{ConditionMetrics, LogitPair, VOCAB};
    use rulemine::trace::PositionKey;
    let key = |g| PositionKey { game_id: g, move_index: 0 };
    let with = |vals: &[(usize, f64)]| {
        let mut v = vec![0f32; VOCAB];
        for &(i, x) in vals {
            v[i] = x as f32;
        }
        v
    };
    let (l59, l531, l_abl) = (59f64.ln(), 531f64.ln(), (59.0f64 / 999.0).ln());
    let pairs = vec![
        LogitPair { key: key(0), legal_mask: 1, clean: with(&[(0, l59)]), ablated: with(&[]) },
        LogitPair { key: key(1), legal_mask: 0b11, clean: with(&[(0, 1.0), (1, 1.0)]), ablated: with(&[(0, 1.0), (1, 1.0)]) },
        LogitPair { key: key(2), legal_mask: 1, clean: with(&[(0, l531)]), ablated: with(&[(0, l_abl)]) },
    ];
    // Logits are stored as f32, so hand values use the rounded logits.
    let r = |x: f64| x as f32 as f64;
    let kl1 = 0.5 * (0.5f64 * 60.0).ln() + 0.5 * ((0.5 / 59.0) * 60.0f64).ln();
    let kl3 = 0.9 * (0.9f64 / 0.001).ln() + 0.1 * ((0.1 / 59.0) / (0.999 / 59.0f64)).ln();
    let expected = ConditionMetrics {
        n_positions: 3,
        mean_logit_diff: (r(l59) + r(l531) - r(l_abl)) / 3.0,
        mean_prob_diff: ((0.5 - 1.0 / 60.0) + 0.0 + (0.9 - 0.001)) / 3.0,
        clean_accuracy: 1.0,
        corrupted_accuracy: 1.0 / 3.0,
        accuracy_diff: 2.0 / 3.0,
        below: [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
        mean_kl: (kl1 + kl3) / 3.0,
    };
    (pairs, expected)
}

/// Largest absolute difference over every field of two metric records.
pub fn metrics_gap(a: &rulemine::intervention::ConditionMetrics, b: &rulemine::intervention::ConditionMetrics) -> f64 {
    let fa = [a.mean_logit_diff, a.mean_prob_diff, a.clean_accuracy, a.corrupted_accuracy, a.accuracy_diff, a.mean_kl];
    let fb = [b.mean_logit_diff, b.mean_prob_diff, b.clean_accuracy, b.corrupted_accuracy, b.accuracy_diff, b.mean_kl];
    let mut gap = fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    for (x, y) in a.below.iter().zip(&b.below) {
        gap = gap.max((x - y).abs());
    }
    if a.n_positions != b.n_positions {
        gap = f64::INFINITY;
    }
    gap
}

/// Compare every legal-move and move-application result at `b` against
/// the ray-scan oracle.
pub fn check_position(b: &BoardState) -> Result<(), String> {
    let (me, opp) = (b.mine(), b.yours());
    let legal = ray_legal(me, opp);
    if b.legal_moves_mask() != legal {
        return Err(format!("legal mask {:#x} vs oracle {legal:#x}", b.legal_moves_mask()));
    }
    for s in Square::all() {
        let got = b.apply_move(s);
        if legal >> s.index() & 1 == 0 {
            if got.is_ok() {
                return Err(format!("{s} accepted but illegal"));
            }
            continue;
        }
        let next = got.map_err(|e| e.to_string())?;
        let (me2, opp2, flips) = ray_apply(me, opp, s.index());
        let (mover, other) = match b.to_move {
            Color::Black => (next.black, next.white),
            Color::White => (next.white, next.black),
        };
        if (mover, other, next.flipped_last) != (me2, opp2, flips) || next.last_move != Some(s) {
            return Err(format!("apply {s} differs from oracle"));
        }
        if next.to_move != b.to_move.opponent() {
            return Err("side to move not swapped".into());
        }
    }
    Ok(())
}

pub const N_BITS: usize = 20;

/// Rows over the first 20 features. Targets take few distinct values so
/// exact gain ties are common.
pub fn cart_dataset(seed: u64, classification: bool) -> Vec<(Vec<bool>, f64)> {
    let mut rng = rng_from_seed(seed);
    let n = 20 + uniform_index(&mut rng, 281);
    let density: Vec<usize> = (0..N_BITS).map(|_| 1 + uniform_index(&mut rng, 9)).collect();
    let signal = [uniform_index(&mut rng, N_BITS), uniform_index(&mut rng, N_BITS)];
    (0..n)
        .map(|_| {
            let bits: Vec<bool> = density.iter().map(|&d| uniform_index(&mut rng, 10) < d).collect();
            let base = bits[signal[0]] as usize + (bits[signal[1]] && uniform_index(&mut rng, 2) == 0) as usize;
            let y = if classification {
                ((base + uniform_index(&mut rng, 4)) >= 3) as usize as f64
            } else {
                (base * 2 + uniform_index(&mut rng, 3)) as f64 * 0.5
            };
            (bits, y)
        })
        .collect()
}

pub fn rows_to_features(rows: &[(Vec<bool>, f64)]) -> (Vec<FeatureVector>, Vec<f64>) {
    rows.iter()
        .map(|(bits, y)| {
            let mut f = FeatureVector::default();
            for (i, &b) in bits.iter().enumerate() {
                f.set(i, b);
            }
            (f, *y)
        })
        .unzip()
}

/// Otsu input of 2..=16 values; half the inputs use a coarse grid so
/// equal values and exact ties occur.
pub fn otsu_input(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let n = 2 + uniform_index(&mut rng, 15);
    let coarse = uniform_index(&mut rng, 2) == 0;
    let values = (0..n)
        .map(|_| {
            if coarse {
                uniform_index(&mut rng, 6) as f64 * 0.25
            } else {
                uniform_index(&mut rng, 1_000_000) as f64 / 1e6
            }
        })
        .collect();
    let weights = (0..n).map(|_| (1 + uniform_index(&mut rng, 500)) as f64).collect();
    (values, weights)
}
