//! Simplification and query matching checked against every valid
//! assignment of the squares a formula mentions.

use proptest::prelude::*;
use rulemine::othello::{FeatureVector, Predicate, Square};
use rulemine::query::{parse_query, MatchMode, Query};
use rulemine::rules::{remove_subsumed, simplify, simplify_dnf, subsumes, Clause, Literal, Polarity};

/// Every valid feature vector, restricted to `squares`; other squares are
/// fixed (MINE), and the last square of the board takes the just-played bit
/// when no listed square has it.
fn local_vectors(squares: &[Square]) -> Vec<FeatureVector> {
    let filler = (0..64).rev().map(|i| Square::new(i).unwrap()).find(|s| !squares.contains(s)).unwrap();
    // (state predicate, just played, flipped)
    let mut local = Vec::new();
    for state in [Predicate::Mine, Predicate::Yours, Predicate::Empty] {
        for jp in [false, true] {
            for fl in [false, true] {
                if (fl && state == Predicate::Empty) || (fl && jp) {
                    continue;
                }
                local.push((state, jp, fl));
            }
        }
    }
    let mut out = Vec::new();
    let total = local.len().pow(squares.len() as u32);
    for mut code in 0..total {
        let mut f = FeatureVector::default();
        for s in Square::all() {
            if !squares.contains(&s) {
                f.set(rulemine::othello::feature_index(s, Predicate::Mine), true);
            }
        }
        let mut jps = 0;
        for &s in squares {
            let (state, jp, fl) = local[code % local.len()];
            code /= local.len();
            f.set(rulemine::othello::feature_index(s, state), true);
            f.set(rulemine::othello::feature_index(s, Predicate::JustPlayed), jp);
            f.set(rulemine::othello::feature_index(s, Predicate::Flipped), fl);
            jps += jp as usize;
        }
        match jps {
            0 => f.set(rulemine::othello::feature_index(filler, Predicate::JustPlayed), true),
            1 => {}
            _ => continue,
        }
        debug_assert!(f.validate().is_ok());
        out.push(f);
    }
    out
}

const POOL: [&str; 3] = ["C2", "D3", "H7"];

fn literal() -> impl Strategy<Value = Literal> {
    (0..POOL.len(), 0..5usize, any::<bool>()).prop_map(|(s, p, pos)| {
        Literal::new(
            POOL[s].parse().unwrap(),
            Predicate::ALL[p],
            if pos { Polarity::Pos } else { Polarity::Neg },
        )
    })
}

fn clause() -> impl Strategy<Value = Clause> {
    prop::collection::vec(literal(), 1..6).prop_map(Clause::new)
}

fn vectors() -> Vec<FeatureVector> {
    let squares: Vec<Square> = POOL.iter().map(|s| s.parse().unwrap()).collect();
    local_vectors(&squares)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplify_is_sound_and_idempotent(c in clause()) {
        let vs = vectors();
        match simplify(&c) {
            None => prop_assert!(vs.iter().all(|f| !c.eval(f)), "{} called unsatisfiable", c),
            Some(s) => {
                prop_assert_eq!(simplify(&s), Some(s.clone()));
                prop_assert!(s.len() <= c.len());
                for f in &vs {
                    prop_assert_eq!(c.eval(f), s.eval(f), "{} vs {}", c, s);
                }
                prop_assert!(vs.iter().any(|f| s.eval(f)), "{} kept but unsatisfiable", s);
            }
        }
    }

    #[test]
    fn subsumption_is_sound(g in clause(), s in clause()) {
        if subsumes(&g, &s) {
            for f in vectors() {
                prop_assert!(!s.eval(&f) || g.eval(&f), "{} does not cover {}", g, s);
            }
        }
    }

    #[test]
    fn dnf_rewrites_preserve_meaning(cs in prop::collection::vec(clause(), 1..6)) {
        let vs = vectors();
        let any = |d: &[Clause], f: &FeatureVector| d.iter().any(|c| c.eval(f));
        let (simplified, _) = simplify_dnf(&cs);
        let pruned = remove_subsumed(&cs);
        for f in &vs {
            prop_assert_eq!(any(&cs, f), any(&simplified, f));
            prop_assert_eq!(any(&cs, f), any(&pruned, f));
        }
        let (again, dropped) = simplify_dnf(&simplified);
        prop_assert_eq!(again, simplified);
        prop_assert_eq!(dropped, 0);
    }

    #[test]
    fn skeptical_matching_is_entailment(q in clause(), c in clause()) {
        let Ok(query) = Query::from_clause(&q) else {
            // Contradictory queries have no models.
            prop_assert!(vectors().iter().all(|f| !q.eval(f)));
            return Ok(());
        };
        let vs = vectors();
        let models: Vec<&FeatureVector> = vs.iter().filter(|f| q.eval(f)).collect();
        let entailed = models.iter().all(|f| c.eval(f));
        let shared = models.iter().any(|f| c.eval(f));
        prop_assert_eq!(query.clause_matches(&c, MatchMode::Skeptical), entailed, "query {} clause {}", q, c);
        if shared {
            prop_assert!(query.clause_matches(&c, MatchMode::Credulous));
        }
        if query.clause_matches(&c, MatchMode::Skeptical) {
            prop_assert!(query.clause_matches(&c, MatchMode::Credulous));
        }
    }

    #[test]
    fn stronger_queries_match_monotonically(q in clause(), extra in literal(), c in clause()) {
        let (Ok(weak), Ok(strong)) = (
            Query::from_clause(&q),
            Query::from_clause(&Clause::new(q.literals.iter().cloned().chain([extra]))),
        ) else { return Ok(()) };
        if weak.clause_matches(&c, MatchMode::Skeptical) {
            prop_assert!(strong.clause_matches(&c, MatchMode::Skeptical));
        }
        if strong.clause_matches(&c, MatchMode::Credulous) {
            prop_assert!(weak.clause_matches(&c, MatchMode::Credulous));
        }
    }

    #[test]
    fn printed_clauses_parse_back(c in clause()) {
        if let Some(s) = simplify(&c) {
            let q = parse_query(&s.to_string()).unwrap();
            prop_assert_eq!(simplify(&q.clause), Some(s));
        }
    }
}
