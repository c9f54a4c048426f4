mod oracle;

use std::time::Instant;

use oracle::{check_position, sq};
use proptest::prelude::*;
use rulemine::othello::{generate_games, BoardState, GameCorpus};

#[test]
fn engine_matches_ray_scan_oracle_on_1000_games() {
    let start = Instant::now();
    let games = generate_games(1000, 20240);
    let mut positions = 0;
    for (gi, g) in games.iter().enumerate() {
        assert_eq!(g.moves.len(), 60);
        let mut b = BoardState::initial();
        check_position(&b).unwrap_or_else(|e| panic!("game {gi} start: {e}"));
        for (mi, &mv) in g.moves.iter().enumerate() {
            b = b.apply_move(mv).unwrap();
            check_position(&b).unwrap_or_else(|e| panic!("game {gi} move {mi}: {e}"));
            positions += 1;
        }
    }
    assert_eq!(positions, 60_000);
    assert!(start.elapsed().as_secs_f64() < 10.0, "took {:?}", start.elapsed());
}

#[test]
fn opening_moves_and_first_flip() {
    let b = BoardState::initial();
    let mut legal = b.legal_moves();
    legal.sort();
    let mut want = vec![sq("D2"), sq("C3"), sq("F4"), sq("E5")];
    want.sort();
    assert_eq!(legal, want);
    let after = b.apply_move(sq("D2")).unwrap();
    assert_eq!(after.flipped_last, sq("D3").bit());
    let f = after.featurize().unwrap();
    f.validate().unwrap();
    // White to move: D3 now belongs to the opponent.
    assert_eq!(after.relative_state(sq("D3")), rulemine::othello::SquareState::Yours);
}

#[test]
fn corpus_text_round_trip() {
    let c = GameCorpus::generate(5, 77);
    let mut buf = Vec::new();
    c.write(&mut buf).unwrap();
    let back = GameCorpus::read(&buf[..]).unwrap();
    assert_eq!(back, c);

    // An illegal move is reported with its line number.
    let mut text = String::from_utf8(buf).unwrap();
    text.push_str("A0\n");
    let err = GameCorpus::read(text.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line 7"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replayed_features_are_valid(seed in any::<u64>()) {
        let g = rulemine::othello::generate_game(seed);
        let states = g.states().unwrap();
        for (s, f) in states.iter().zip(g.features().unwrap()) {
            prop_assert!(f.validate().is_ok());
            prop_assert_eq!(s.disc_count() as usize, 64 - f.block(rulemine::othello::Predicate::Empty).count_ones() as usize);
        }
        // Disc count grows by exactly one per move.
        for (i, s) in states.iter().enumerate() {
            prop_assert_eq!(s.disc_count() as usize, 5 + i);
        }
    }

    #[test]
    fn same_seed_same_games(seed in any::<u64>()) {
        prop_assert_eq!(generate_games(3, seed), generate_games(3, seed));
    }
}
