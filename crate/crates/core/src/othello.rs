//! Othello rules engine, player-relative featurization and seeded game
//! generation.
//!
//! Squares are named column letter then row digit (`A0` .. `H7`); the square
//! index is `row * 8 + column`, so each bitboard bit `i` is square `i`.
//!
//! Features are always expressed in the frame of the player *to move* at the
//! featurized (post-move) position: MINE are that player's discs, YOURS are
//! the discs of the player who just moved.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of features in a [`FeatureVector`].
pub const N_FEATURES: usize = 320;
/// Moves in every generated game (no passes).
pub const GAME_LENGTH: usize = 60;
/// Train corpus size used throughout the pipeline.
pub const DEFAULT_TRAIN_GAMES: usize = 6_000;
/// Held-out corpus size.
pub const DEFAULT_TEST_GAMES: usize = 500;

const FILE_A: u64 = 0x0101_0101_0101_0101;
const FILE_H: u64 = FILE_A << 7;
/// D3, E3, D4, E4.
pub const CENTER_MASK: u64 = (1 << 27) | (1 << 28) | (1 << 35) | (1 << 36);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OthelloError {
    #[error("illegal move {0}")]
    IllegalMove(Square),
    #[error("position has no last move (initial position)")]
    NoLastMove,
    #[error("invalid square name {0:?}")]
    BadSquare(String),
    #[error("game corpus line {line}: {msg}")]
    Corpus { line: usize, msg: String },
}

/// One of the 64 board squares.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square(u8);

impl Square {
    pub const fn new(index: u8) -> Option<Square> {
        if index < 64 {
            Some(Square(index))
        } else {
            None
        }
    }

    pub const fn from_coords(column: u8, row: u8) -> Option<Square> {
        if column < 8 && row < 8 {
            Some(Square(row * 8 + column))
        } else {
            None
        }
    }

    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub const fn column(self) -> u8 {
        self.0 % 8
    }

    #[inline]
    pub const fn row(self) -> u8 {
        self.0 / 8
    }

    #[inline]
    pub const fn bit(self) -> u64 {
        1u64 << self.0
    }

    pub fn is_center(self) -> bool {
        CENTER_MASK & self.bit() != 0
    }

    /// Square displaced by `(dc, dr)`, if it stays on the board.
    pub fn offset(self, dc: i8, dr: i8) -> Option<Square> {
        let c = self.column() as i8 + dc;
        let r = self.row() as i8 + dr;
        if (0..8).contains(&c) && (0..8).contains(&r) {
            Some(Square((r * 8 + c) as u8))
        } else {
            None
        }
    }

    pub fn all() -> impl Iterator<Item = Square> {
        (0..64).map(Square)
    }

    /// The 60 squares that can ever be played, in index order.
    pub fn playable() -> impl Iterator<Item = Square> {
        Self::all().filter(|s| !s.is_center())
    }

    /// Manhattan distance to the nearest square of the middle 2x2.
    pub fn distance_to_center(self) -> u8 {
        let axis = |v: u8| if v < 3 { 3 - v } else { v.saturating_sub(4) };
        axis(self.column()) + axis(self.row())
    }
}

impl fmt::Display for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", (b'A' + self.column()) as char, self.row())
    }
}

impl fmt::Debug for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Square {
    type Err = OthelloError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() != 2 {
            return Err(OthelloError::BadSquare(s.to_string()));
        }
        let col = b[0].to_ascii_uppercase().wrapping_sub(b'A');
        let row = b[1].wrapping_sub(b'0');
        Square::from_coords(col, row).ok_or_else(|| OthelloError::BadSquare(s.to_string()))
    }
}

impl Serialize for Square {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Square {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub const fn opponent(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }
}

/// The eight unit directions as `(column delta, row delta)`.
pub const DIRECTIONS: [(i8, i8); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

#[inline]
fn shift(b: u64, (dc, dr): (i8, i8)) -> u64 {
    let b = match dc {
        1 => (b << 1) & !FILE_A,
        -1 => (b >> 1) & !FILE_H,
        _ => b,
    };
    match dr {
        1 => b << 8,
        -1 => b >> 8,
        _ => b,
    }
}

/// Legal-move bitboard for the player owning `me`.
pub fn legal_mask(me: u64, opp: u64) -> u64 {
    let empty = !(me | opp);
    let mut moves = 0;
    for d in DIRECTIONS {
        let mut run = shift(me, d) & opp;
        for _ in 0..5 {
            run |= shift(run, d) & opp;
        }
        moves |= shift(run, d) & empty;
    }
    moves
}

/// Discs flipped by `me` placing at `sq`; zero when the placement is illegal.
pub fn flips_for(me: u64, opp: u64, sq: Square) -> u64 {
    if (me | opp) & sq.bit() != 0 {
        return 0;
    }
    let mut flips = 0;
    for d in DIRECTIONS {
        let mut run = 0;
        let mut cur = shift(sq.bit(), d);
        while cur & opp != 0 {
            run |= cur;
            cur = shift(cur, d);
        }
        if cur & me != 0 {
            flips |= run;
        }
    }
    flips
}

/// A full position: absolute disc colors, side to move and the last move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoardState {
    pub black: u64,
    pub white: u64,
    pub to_move: Color,
    pub last_move: Option<Square>,
    pub flipped_last: u64,
}

impl Default for BoardState {
    fn default() -> Self {
        Self::initial()
    }
}

impl BoardState {
    /// D3 and E4 white, E3 and D4 black, black to move.
    pub const fn initial() -> BoardState {
        BoardState {
            black: (1 << 28) | (1 << 35),
            white: (1 << 27) | (1 << 36),
            to_move: Color::Black,
            last_move: None,
            flipped_last: 0,
        }
    }

    pub fn discs(&self, c: Color) -> u64 {
        match c {
            Color::Black => self.black,
            Color::White => self.white,
        }
    }

    /// Discs of the player to move.
    pub fn mine(&self) -> u64 {
        self.discs(self.to_move)
    }

    pub fn yours(&self) -> u64 {
        self.discs(self.to_move.opponent())
    }

    pub fn occupied(&self) -> u64 {
        self.black | self.white
    }

    pub fn disc_count(&self) -> u32 {
        self.occupied().count_ones()
    }

    pub fn color_at(&self, sq: Square) -> Option<Color> {
        if self.black & sq.bit() != 0 {
            Some(Color::Black)
        } else if self.white & sq.bit() != 0 {
            Some(Color::White)
        } else {
            None
        }
    }

    /// Player-relative state of `sq`.
    pub fn relative_state(&self, sq: Square) -> SquareState {
        if self.mine() & sq.bit() != 0 {
            SquareState::Mine
        } else if self.yours() & sq.bit() != 0 {
            SquareState::Yours
        } else {
            SquareState::Empty
        }
    }

    pub fn legal_moves_mask(&self) -> u64 {
        legal_mask(self.mine(), self.yours())
    }

    pub fn legal_moves(&self) -> Vec<Square> {
        bits(self.legal_moves_mask()).collect()
    }

    pub fn apply_move(&self, mv: Square) -> Result<BoardState, OthelloError> {
        let (me, opp) = (self.mine(), self.yours());
        let flips = flips_for(me, opp, mv);
        if flips == 0 {
            return Err(OthelloError::IllegalMove(mv));
        }
        let me = me | flips | mv.bit();
        let opp = opp & !flips;
        let (black, white) = match self.to_move {
            Color::Black => (me, opp),
            Color::White => (opp, me),
        };
        Ok(BoardState {
            black,
            white,
            to_move: self.to_move.opponent(),
            last_move: Some(mv),
            flipped_last: flips,
        })
    }

    pub fn featurize(&self) -> Result<FeatureVector, OthelloError> {
        let last = self.last_move.ok_or(OthelloError::NoLastMove)?;
        Ok(FeatureVector {
            words: [
                self.mine(),
                self.yours(),
                !self.occupied(),
                last.bit(),
                self.flipped_last,
            ],
        })
    }
}

/// Iterate the squares of a bitboard in index order.
pub fn bits(mut b: u64) -> impl Iterator<Item = Square> {
    std::iter::from_fn(move || {
        if b == 0 {
            None
        } else {
            let i = b.trailing_zeros() as u8;
            b &= b - 1;
            Some(Square(i))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SquareState {
    Mine,
    Yours,
    Empty,
}

impl SquareState {
    pub const ALL: [SquareState; 3] = [SquareState::Mine, SquareState::Yours, SquareState::Empty];

    pub fn predicate(self) -> Predicate {
        match self {
            SquareState::Mine => Predicate::Mine,
            SquareState::Yours => Predicate::Yours,
            SquareState::Empty => Predicate::Empty,
        }
    }
}

/// Feature family; the discriminant is the 64-feature block index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Predicate {
    Mine = 0,
    Yours = 1,
    Empty = 2,
    JustPlayed = 3,
    Flipped = 4,
}

impl Predicate {
    pub const ALL: [Predicate; 5] = [
        Predicate::Mine,
        Predicate::Yours,
        Predicate::Empty,
        Predicate::JustPlayed,
        Predicate::Flipped,
    ];

    pub fn from_block(block: usize) -> Option<Predicate> {
        Self::ALL.get(block).copied()
    }

    /// MINE/YOURS/EMPTY are mutually exclusive states of one square.
    pub fn is_ternary(self) -> bool {
        matches!(self, Predicate::Mine | Predicate::Yours | Predicate::Empty)
    }

    pub fn state(self) -> Option<SquareState> {
        match self {
            Predicate::Mine => Some(SquareState::Mine),
            Predicate::Yours => Some(SquareState::Yours),
            Predicate::Empty => Some(SquareState::Empty),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Predicate::Mine => "MINE",
            Predicate::Yours => "YOURS",
            Predicate::Empty => "EMPTY",
            Predicate::JustPlayed => "JUST_PLAYED",
            Predicate::Flipped => "FLIPPED",
        }
    }
}

impl FromStr for Predicate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown predicate {s:?}"))
    }
}

/// Index of the `(square, predicate)` feature.
#[inline]
pub fn feature_index(sq: Square, pred: Predicate) -> usize {
    pred as usize * 64 + sq.index()
}

/// Inverse of [`feature_index`].
pub fn feature_parts(index: usize) -> (Square, Predicate) {
    assert!(index < N_FEATURES, "feature index {index} out of range");
    (
        Square((index % 64) as u8),
        Predicate::from_block(index / 64).expect("block < 5"),
    )
}

/// Column name used in CSV headers, e.g. `C0_EMPTY`.
pub fn feature_name(index: usize) -> String {
    let (sq, pred) = feature_parts(index);
    format!("{sq}_{}", pred.name())
}

pub fn parse_feature_name(name: &str) -> Option<usize> {
    let (sq, pred) = name.split_once('_')?;
    Some(feature_index(sq.parse().ok()?, pred.parse().ok()?))
}

/// 320 feature bits: one 64-bit block per [`Predicate`], square-indexed.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FeatureVector {
    pub words: [u64; 5],
}

/// A violated [`FeatureVector`] invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureViolation {
    #[error("square {0}: MINE/YOURS/EMPTY not exactly one")]
    StateNotExclusive(Square),
    #[error("JUST_PLAYED has {0} bits set, expected 1")]
    JustPlayedCount(u32),
    #[error("square {0}: FLIPPED on an empty square")]
    FlippedEmpty(Square),
    #[error("square {0}: FLIPPED and JUST_PLAYED both set")]
    FlippedJustPlayed(Square),
}

impl FeatureVector {
    #[inline]
    pub fn get(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, index: usize, on: bool) {
        let bit = 1u64 << (index % 64);
        if on {
            self.words[index / 64] |= bit;
        } else {
            self.words[index / 64] &= !bit;
        }
    }

    pub fn block(&self, pred: Predicate) -> u64 {
        self.words[pred as usize]
    }

    pub fn has(&self, sq: Square, pred: Predicate) -> bool {
        self.block(pred) & sq.bit() != 0
    }

    /// Set feature indices in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(w, &word)| bits(word).map(move |s| w * 64 + s.index()))
    }

    pub fn validate(&self) -> Result<(), FeatureViolation> {
        let [mine, yours, empty, jp, flipped] = self.words;
        let exactly_one = (mine ^ yours ^ empty) & !(mine & yours & empty);
        let bad = !exactly_one;
        if bad != 0 {
            return Err(FeatureViolation::StateNotExclusive(Square(bad.trailing_zeros() as u8)));
        }
        if jp.count_ones() != 1 {
            return Err(FeatureViolation::JustPlayedCount(jp.count_ones()));
        }
        if flipped & empty != 0 {
            let s = (flipped & empty).trailing_zeros() as u8;
            return Err(FeatureViolation::FlippedEmpty(Square(s)));
        }
        if flipped & jp != 0 {
            return Err(FeatureViolation::FlippedJustPlayed(Square(jp.trailing_zeros() as u8)));
        }
        Ok(())
    }

    /// 40 bytes, feature `i` at byte `i / 8`, bit `i % 8`.
    pub fn to_bytes(&self) -> [u8; 40] {
        let mut out = [0u8; 40];
        for (chunk, w) in out.chunks_exact_mut(8).zip(self.words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8; 40]) -> FeatureVector {
        let mut words = [0u64; 5];
        for (w, chunk) in words.iter_mut().zip(b.chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        FeatureVector { words }
    }
}

impl fmt::Debug for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureVector")
            .field("mine", &format_args!("{:#018x}", self.words[0]))
            .field("yours", &format_args!("{:#018x}", self.words[1]))
            .field("empty", &format_args!("{:#018x}", self.words[2]))
            .field("just_played", &format_args!("{:#018x}", self.words[3]))
            .field("flipped", &format_args!("{:#018x}", self.words[4]))
            .finish()
    }
}

/// A game of random legal moves that never required a pass.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameRecord {
    pub moves: Vec<Square>,
    pub seed: u64,
}

impl GameRecord {
    /// Post-move board after each move, in order.
    pub fn states(&self) -> Result<Vec<BoardState>, OthelloError> {
        let mut state = BoardState::initial();
        let mut out = Vec::with_capacity(self.moves.len());
        for &mv in &self.moves {
            state = state.apply_move(mv)?;
            out.push(state);
        }
        Ok(out)
    }

    pub fn features(&self) -> Result<Vec<FeatureVector>, OthelloError> {
        self.states()?
            .iter()
            .map(BoardState::featurize)
            .collect()
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for stream `index` of a corpus or experiment seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// The one PRNG family used everywhere: xoshiro256** seeded via SplitMix64.
pub fn rng_from_seed(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Uniform index in `0..n` from one 64-bit draw (multiply-shift).
#[inline]
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Play one 60-move game from `seed`, restarting whenever a pass would occur.
pub fn generate_game(seed: u64) -> GameRecord {
    let mut rng = rng_from_seed(seed);
    'attempt: loop {
        let mut state = BoardState::initial();
        let mut moves = Vec::with_capacity(GAME_LENGTH);
        for _ in 0..GAME_LENGTH {
            let legal = state.legal_moves_mask();
            if legal == 0 {
                continue 'attempt;
            }
            let pick = uniform_index(&mut rng, legal.count_ones() as usize);
            let mv = bits(legal).nth(pick).expect("pick < count");
            state = state.apply_move(mv).expect("move drawn from legal set");
            moves.push(mv);
        }
        return GameRecord { moves, seed };
    }
}

/// `n` games; game `i` is generated from `derive_seed(seed, i)`.
pub fn generate_games(n: usize, seed: u64) -> Vec<GameRecord> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| generate_game(derive_seed(seed, i)))
        .collect()
}

/// A seeded list of games, as stored in a corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameCorpus {
    pub seed: u64,
    pub games: Vec<GameRecord>,
}

impl GameCorpus {
    pub fn generate(n: usize, seed: u64) -> GameCorpus {
        GameCorpus { seed, games: generate_games(n, seed) }
    }

    pub fn n_positions(&self) -> usize {
        self.games.iter().map(|g| g.moves.len()).sum()
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# othello-games v1 seed={}", self.seed)?;
        for g in &self.games {
            let line: Vec<String> = g.moves.iter().map(|m| m.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Parse and replay-validate a corpus file. Lines after the header that
    /// start with `#` are comments.
    pub fn read<R: BufRead>(r: R) -> Result<GameCorpus, OthelloError> {
        let mut lines = r.lines().enumerate();
        let err = |line: usize, msg: String| OthelloError::Corpus { line: line + 1, msg };
        let (_, header) = lines.next().ok_or_else(|| err(0, "empty file".into()))?;
        let header = header.map_err(|e| err(0, e.to_string()))?;
        let seed = header
            .strip_prefix("# othello-games v1 seed=")
            .and_then(|s| s.trim().parse::<u64>().ok())
            .ok_or_else(|| err(0, format!("bad header {header:?}")))?;
        let mut games = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| err(i, e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let moves = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<Vec<Square>, _>>()
                .map_err(|e| err(i, e.to_string()))?;
            if moves.len() > GAME_LENGTH {
                return Err(err(i, format!("{} moves", moves.len())));
            }
            let game = GameRecord { moves, seed: derive_seed(seed, games.len() as u64) };
            game.states().map_err(|e| err(i, e.to_string()))?;
            games.push(game);
        }
        Ok(GameCorpus { seed, games })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(s: &str) -> Square {
        s.parse().unwrap()
    }

    #[test]
    fn square_names_round_trip() {
        for s in Square::all() {
            assert_eq!(s.to_string().parse::<Square>().unwrap(), s);
        }
        assert_eq!(sq("C0").index(), 2);
        assert_eq!(sq("H3").index(), 31);
        assert!("I0".parse::<Square>().is_err());
        assert!("A8".parse::<Square>().is_err());
        assert_eq!(Square::playable().count(), 60);
    }

    #[test]
    fn initial_position() {
        let s = BoardState::initial();
        assert_eq!(s.color_at(sq("D3")), Some(Color::White));
        assert_eq!(s.color_at(sq("E4")), Some(Color::White));
        assert_eq!(s.color_at(sq("E3")), Some(Color::Black));
        assert_eq!(s.color_at(sq("D4")), Some(Color::Black));
        assert_eq!(s.disc_count(), 4);
        let mut legal = s.legal_moves();
        legal.sort();
        let mut expected = vec![sq("D2"), sq("C3"), sq("F4"), sq("E5")];
        expected.sort();
        assert_eq!(legal, expected);
    }

    #[test]
    fn opening_d2_flips_d3() {
        let s = BoardState::initial().apply_move(sq("D2")).unwrap();
        assert_eq!(s.color_at(sq("D3")), Some(Color::Black));
        assert_eq!(s.flipped_last, sq("D3").bit());
        assert_eq!(s.to_move, Color::White);
        assert_eq!(s.disc_count(), 5);
    }

    #[test]
    fn illegal_move_rejected() {
        let s = BoardState::initial();
        assert_eq!(s.apply_move(sq("D3")), Err(OthelloError::IllegalMove(sq("D3"))));
        assert_eq!(s.apply_move(sq("A0")), Err(OthelloError::IllegalMove(sq("A0"))));
    }

    #[test]
    fn featurize_relative_frame() {
        assert_eq!(BoardState::initial().featurize(), Err(OthelloError::NoLastMove));
        let s = BoardState::initial().apply_move(sq("D2")).unwrap();
        let f = s.featurize().unwrap();
        // White is to move, so MINE are the white discs.
        assert_eq!(f.block(Predicate::Mine), sq("E4").bit());
        assert_eq!(
            f.block(Predicate::Yours),
            sq("D2").bit() | sq("D3").bit() | sq("E3").bit() | sq("D4").bit()
        );
        assert_eq!(f.block(Predicate::JustPlayed), sq("D2").bit());
        assert_eq!(f.block(Predicate::Flipped), sq("D3").bit());
        assert_eq!(f.validate(), Ok(()));
    }

    #[test]
    fn feature_index_layout() {
        assert_eq!(feature_index(sq("A0"), Predicate::Mine), 0);
        assert_eq!(feature_index(sq("A0"), Predicate::Yours), 64);
        assert_eq!(feature_index(sq("H7"), Predicate::Flipped), 319);
        for i in 0..N_FEATURES {
            let (s, p) = feature_parts(i);
            assert_eq!(feature_index(s, p), i);
            assert_eq!(parse_feature_name(&feature_name(i)), Some(i));
        }
    }

    #[test]
    fn validate_reports_violations() {
        let s = BoardState::initial().apply_move(sq("D2")).unwrap();
        let good = s.featurize().unwrap();
        let mut f = good;
        f.set(feature_index(sq("A0"), Predicate::Mine), true);
        assert_eq!(f.validate(), Err(FeatureViolation::StateNotExclusive(sq("A0"))));
        let mut f = good;
        f.set(feature_index(sq("A0"), Predicate::JustPlayed), true);
        assert_eq!(f.validate(), Err(FeatureViolation::JustPlayedCount(2)));
        let mut f = good;
        f.set(feature_index(sq("A0"), Predicate::Flipped), true);
        assert_eq!(f.validate(), Err(FeatureViolation::FlippedEmpty(sq("A0"))));
        let mut f = good;
        f.set(feature_index(sq("D2"), Predicate::Flipped), true);
        assert_eq!(f.validate(), Err(FeatureViolation::FlippedJustPlayed(sq("D2"))));
    }

    #[test]
    fn feature_bytes_round_trip() {
        let f = BoardState::initial().apply_move(sq("C3")).unwrap().featurize().unwrap();
        assert_eq!(FeatureVector::from_bytes(&f.to_bytes()), f);
        let bytes = f.to_bytes();
        let i = feature_index(sq("C3"), Predicate::JustPlayed);
        assert_eq!(bytes[i / 8] >> (i % 8) & 1, 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_games(2, 42);
        let b = generate_games(2, 42);
        assert_eq!(a, b);
        assert_ne!(a[0].moves, a[1].moves);
        for g in &a {
            assert_eq!(g.moves.len(), GAME_LENGTH);
            assert!(g.moves.iter().all(|m| !m.is_center()));
            g.states().unwrap();
        }
    }

    #[test]
    fn corpus_file_round_trip() {
        let corpus = GameCorpus::generate(3, 7);
        let mut buf = Vec::new();
        corpus.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# othello-games v1 seed=7\n"));
        assert_eq!(GameCorpus::read(&buf[..]).unwrap(), corpus);
    }

    #[test]
    fn corpus_rejects_illegal_replay() {
        let text = "# othello-games v1 seed=1\nD2 D2\n";
        assert!(matches!(
            GameCorpus::read(text.as_bytes()),
            Err(OthelloError::Corpus { line: 2, .. })
        ));
        assert!(GameCorpus::read("nope\n".as_bytes()).is_err());
    }

    #[test]
    fn center_distance() {
        assert_eq!(sq("A0").distance_to_center(), 6);
        assert_eq!(sq("H3").distance_to_center(), 3);
        assert_eq!(sq("C2").distance_to_center(), 2);
        assert_eq!(sq("E4").distance_to_center(), 0);
    }
}
