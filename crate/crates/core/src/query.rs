//! Rule-based board queries and neuron surfacing.
//!
//! A query is a conjunction such as `C0 is blank AND D1 is theirs AND E2 is
//! mine`. A neuron matches when some clause of its DNF has every literal
//! entailed by the query. Under credulous matching a clause only needs to
//! avoid literals the query contradicts.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::othello::{Predicate, Square};
use crate::rules::{simplify, Clause, DnfRule, Facts, Literal, Polarity, Truth};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("query is contradictory: {0}")]
    Contradiction(String),
}

/// A satisfiable conjunction of literals, in simplified form.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub clause: Clause,
    facts: Facts,
}

impl Query {
    pub fn from_clause(clause: &Clause) -> Result<Query, QueryError> {
        if clause.is_empty() {
            return Err(QueryError::Parse { position: 0, message: "empty query".into() });
        }
        let simplified =
            simplify(clause).ok_or_else(|| QueryError::Contradiction(clause.to_string()))?;
        let facts = Facts::from_literals(&simplified.literals).expect("simplified clause is satisfiable");
        Ok(Query { clause: simplified, facts })
    }

    pub fn truth(&self, l: &Literal) -> Truth {
        self.facts.truth(l)
    }

    pub fn clause_matches(&self, c: &Clause, mode: MatchMode) -> bool {
        c.literals.iter().all(|l| {
            matches!((self.truth(l), mode), (Truth::True, _) | (Truth::Unknown, MatchMode::Credulous))
        })
    }
}

struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let rest = &self.text[self.pos..];
        let skip = rest.len() - rest.trim_start().len();
        let start = self.pos + skip;
        let rest = &self.text[start..];
        if rest.is_empty() {
            self.pos = start;
            return None;
        }
        let len = rest.find(char::is_whitespace).unwrap_or(rest.len());
        self.pos = start + len;
        Some((start, &self.text[start..start + len]))
    }

    fn peek(&mut self) -> Option<(usize, &'a str)> {
        let saved = self.pos;
        let t = self.next();
        self.pos = saved;
        t
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), QueryError> {
        self.next().ok_or_else(|| QueryError::Parse {
            position: self.text.len(),
            message: format!("expected {what}, found end of input"),
        })
    }
}

fn err(position: usize, message: impl Into<String>) -> QueryError {
    QueryError::Parse { position, message: message.into() }
}

fn parse_atom(t: &mut Tokens<'_>) -> Result<Literal, QueryError> {
    let (mut at, mut word) = t.expect("a square")?;
    let mut polarity = Polarity::Pos;
    if word.eq_ignore_ascii_case("not") {
        polarity = Polarity::Neg;
        (at, word) = t.expect("a square")?;
    }
    let square: Square = word
        .to_ascii_uppercase()
        .parse()
        .map_err(|_| err(at, format!("expected a square like C0, found {word:?}")))?;
    let (at, verb) = t.expect("\"is\" or \"was\"")?;
    let predicate = match verb.to_ascii_lowercase().as_str() {
        "is" => {
            let (at, w) = t.expect("mine, theirs, empty or blank")?;
            match w.to_ascii_lowercase().as_str() {
                "mine" => Predicate::Mine,
                "theirs" => Predicate::Yours,
                "empty" | "blank" => Predicate::Empty,
                _ => return Err(err(at, format!("expected mine, theirs, empty or blank, found {w:?}"))),
            }
        }
        "was" => {
            let (at, w) = t.expect("\"just played\" or \"flipped\"")?;
            match w.to_ascii_lowercase().as_str() {
                "flipped" => Predicate::Flipped,
                "just" => {
                    let (at, w) = t.expect("\"played\"")?;
                    if !w.eq_ignore_ascii_case("played") {
                        return Err(err(at, format!("expected \"played\", found {w:?}")));
                    }
                    Predicate::JustPlayed
                }
                _ => return Err(err(at, format!("expected \"just played\" or \"flipped\", found {w:?}"))),
            }
        }
        _ => return Err(err(at, format!("expected \"is\" or \"was\", found {verb:?}"))),
    };
    Ok(Literal::new(square, predicate, polarity))
}

/// Parse and simplify a query.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let mut t = Tokens { text, pos: 0 };
    if t.peek().is_none() {
        return Err(err(0, "empty query"));
    }
    let mut lits = vec![parse_atom(&mut t)?];
    while let Some((at, w)) = t.next() {
        if !w.eq_ignore_ascii_case("and") {
            return Err(err(at, format!("expected AND, found {w:?}")));
        }
        lits.push(parse_atom(&mut t)?);
    }
    Query::from_clause(&Clause::new(lits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// UNKNOWN literals block a clause.
    #[default]
    Skeptical,
    /// UNKNOWN literals are treated as satisfiable.
    Credulous,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MatchOptions {
    pub mode: MatchMode,
    /// Drop neurons whose fit score is below this (or missing).
    pub min_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronMatch {
    pub neuron_id: u32,
    pub layer: u16,
    pub matched_clauses: Vec<usize>,
    pub fit_score: Option<f64>,
}

fn rank(a: &NeuronMatch, b: &NeuronMatch) -> Ordering {
    let score = match (a.fit_score, b.fit_score) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    score.then(a.neuron_id.cmp(&b.neuron_id)).then(a.layer.cmp(&b.layer))
}

/// Neurons whose DNF is true under the query, best fit first.
pub fn match_query(query: &Query, rules: &[DnfRule], opts: MatchOptions) -> Vec<NeuronMatch> {
    let mut out: Vec<NeuronMatch> = rules
        .iter()
        .filter(|r| match opts.min_score {
            Some(m) => r.score.is_some_and(|s| s >= m),
            None => true,
        })
        .filter_map(|r| {
            let matched: Vec<usize> = r
                .clauses
                .iter()
                .enumerate()
                .filter(|(_, c)| query.clause_matches(c, opts.mode))
                .map(|(i, _)| i)
                .collect();
            (!matched.is_empty()).then_some(NeuronMatch {
                neuron_id: r.neuron_id,
                layer: r.layer,
                matched_clauses: matched,
                fit_score: r.score,
            })
        })
        .collect();
    out.sort_by(rank);
    out
}
