//! Synthetic neurons with known rule-based activations, and the end-to-end
//! recovery check: generate games, synthesize activations, fit trees,
//! extract rules and compare them with the planted truth.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::othello::{
    derive_seed, rng_from_seed, uniform_index, FeatureVector, GameCorpus, Predicate, Square,
};
use crate::query::{match_query, MatchMode, MatchOptions, Query};
use crate::rules::{extract_dnf, remove_subsumed, Clause, CompiledDnf, DnfRule, ExtractOptions, Literal, Polarity};
use crate::trace::{NeuronModel, PositionKey};
use crate::tree::{fit_neuron, FitFlag, TreeConfig, TreeError};

/// Recovery comparisons need at least this many positions.
pub const MIN_RECOVERY_POSITIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntheticError {
    #[error("no acceptable rule after {0} rejections")]
    SamplingExhausted(usize),
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("recovery needs at least {MIN_RECOVERY_POSITIONS} positions, got {0}")]
    TooFewPositions(usize),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("game replay failed: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub max_clauses: usize,
    /// Literals per clause; also caps the distinct squares a rule may use,
    /// so every rule is expressible by a tree of this depth.
    pub max_literals: usize,
    /// Every clause has exactly `max_literals` literals.
    pub exact_literals: bool,
    pub min_support: f64,
    pub max_support: f64,
    pub max_rejections: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            max_clauses: 3,
            max_literals: 4,
            exact_literals: false,
            min_support: 0.005,
            max_support: 0.5,
            max_rejections: 10_000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: &str| Err(SyntheticError::InvalidConfig(m.into()));
        if self.max_clauses == 0 || self.max_literals == 0 {
            return bad("max_clauses and max_literals must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_support) || self.min_support > self.max_support {
            return bad("support window must satisfy 0 <= min <= max <= 1");
        }
        Ok(())
    }
}

// Relative draw weights for MINE, YOURS, EMPTY, JUST_PLAYED, FLIPPED.
const PREDICATE_WEIGHTS: [usize; 5] = [3, 3, 3, 1, 2];

fn draw_predicate(rng: &mut impl Rng) -> Predicate {
    let total: usize = PREDICATE_WEIGHTS.iter().sum();
    let mut x = uniform_index(rng, total);
    for (i, &w) in PREDICATE_WEIGHTS.iter().enumerate() {
        if x < w {
            return Predicate::from_block(i).expect("block index");
        }
        x -= w;
    }
    unreachable!()
}

fn support(dnf: &CompiledDnf, positions: &[FeatureVector]) -> f64 {
    positions.iter().filter(|f| dnf.eval(f)).count() as f64 / positions.len().max(1) as f64
}

fn draw_rule(rng: &mut impl Rng, cfg: &SamplerConfig) -> Vec<Clause> {
    // Pool of distinct features on distinct squares; clauses draw from it.
    let mut squares: Vec<Square> = Square::all().collect();
    let mut pool = Vec::with_capacity(cfg.max_literals);
    for _ in 0..cfg.max_literals {
        let sq = squares.swap_remove(uniform_index(rng, squares.len()));
        let mut pred = draw_predicate(rng);
        // Middle squares are never empty after a move.
        while sq.is_center() && pred == Predicate::Empty {
            pred = draw_predicate(rng);
        }
        pool.push((sq, pred));
    }
    let n_clauses = 1 + uniform_index(rng, cfg.max_clauses);
    (0..n_clauses)
        .map(|_| {
            let n_lits = if cfg.exact_literals {
                cfg.max_literals
            } else {
                1 + uniform_index(rng, cfg.max_literals)
            };
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            let lits = (0..n_lits).map(|_| {
                let (sq, pred) = pool[idx.swap_remove(uniform_index(rng, idx.len()))];
                let polarity = if uniform_index(rng, 10) < 7 { Polarity::Pos } else { Polarity::Neg };
                // On a middle square NOT MINE is YOURS and vice versa; keep
                // the positive spelling.
                match (sq.is_center(), pred.state(), polarity) {
                    (true, Some(_), Polarity::Neg) => {
                        let other = if pred == Predicate::Mine { Predicate::Yours } else { Predicate::Mine };
                        Literal::pos(sq, other)
                    }
                    _ => Literal::new(sq, pred, polarity),
                }
            });
            Clause::new(lits.collect::<Vec<_>>())
        })
        .collect()
}

/// Positions where the rule fires, and per clause the positions where only
/// that clause fires.
fn clause_supports(dnf: &CompiledDnf, n_clauses: usize, positions: &[FeatureVector]) -> (usize, Vec<usize>) {
    let mut total = 0;
    let mut alone = vec![0; n_clauses];
    for f in positions {
        let mut first = None;
        let mut count = 0;
        for i in 0..n_clauses {
            if dnf.clause_holds(i, f) {
                count += 1;
                first.get_or_insert(i);
            }
        }
        if count > 0 {
            total += 1;
        }
        if count == 1 {
            alone[first.expect("one clause fired")] += 1;
        }
    }
    (total, alone)
}

/// Rejection-sample a rule whose support on `probe` lies in the configured
/// window. Each clause must also fire on its own (no other clause firing)
/// on at least the minimum support, so every clause is visible in data.
pub fn sample_rule(
    seed: u64,
    cfg: &SamplerConfig,
    probe: &[FeatureVector],
) -> Result<Vec<Clause>, SyntheticError> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    for _ in 0..cfg.max_rejections {
        let clauses = remove_subsumed(&draw_rule(&mut rng, cfg));
        let compiled = CompiledDnf::new(&clauses);
        let (total, alone) = clause_supports(&compiled, clauses.len(), probe);
        let n = probe.len().max(1) as f64;
        let s = total as f64 / n;
        let learnable = alone.iter().all(|&a| a as f64 / n >= cfg.min_support);
        if learnable && s >= cfg.min_support && s <= cfg.max_support {
            return Ok(clauses);
        }
    }
    Err(SyntheticError::SamplingExhausted(cfg.max_rejections))
}

/// A neuron that fires at `amplitude` when its rule holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticNeuron {
    pub dnf: DnfRule,
    pub amplitude: f64,
    /// Noise standard deviation as a fraction of the amplitude.
    pub noise_sigma: f64,
    /// Off-state baseline as a fraction of the amplitude.
    pub leak: f64,
    pub seed: u64,
    /// Noise stream; set per game corpus so that corpora sharing position
    /// keys get independent noise.
    #[serde(skip)]
    pub stream: u64,
    #[serde(skip)]
    compiled: Option<CompiledDnf>,
}

impl SyntheticNeuron {
    pub fn new(dnf: DnfRule, amplitude: f64, noise_sigma: f64, leak: f64, seed: u64) -> Self {
        let compiled = Some(CompiledDnf::new(&dnf.clauses));
        SyntheticNeuron { dnf, amplitude, noise_sigma, leak, seed, stream: 0, compiled }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        SyntheticNeuron { stream, ..self }
    }

    pub fn rule_holds(&self, f: &FeatureVector) -> bool {
        match &self.compiled {
            Some(c) => c.eval(f),
            None => self.dnf.eval(f),
        }
    }

    /// Activation for one position; the noise draw depends only on the
    /// neuron seed and the position key.
    pub fn activate(&self, f: &FeatureVector, key: PositionKey) -> f64 {
        let base = if self.rule_holds(f) { self.amplitude } else { self.leak * self.amplitude };
        let noise = if self.noise_sigma > 0.0 {
            let pos = ((key.game_id as u64) << 8) | key.move_index as u64;
            let mut rng = rng_from_seed(derive_seed(derive_seed(self.seed, self.stream), pos));
            let z: f64 = rng.sample(StandardNormal);
            z * self.noise_sigma * self.amplitude
        } else {
            0.0
        };
        (base + noise).max(0.0)
    }
}

impl NeuronModel for SyntheticNeuron {
    fn activation(&self, f: &FeatureVector, key: PositionKey) -> f32 {
        self.activate(f, key) as f32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Equivalent,
    /// Extracted rule fires only where the truth does.
    Subset,
    /// Extracted rule fires everywhere the truth does, and more.
    Superset,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub verdict: Verdict,
    /// Fraction of positions where the two rules disagree.
    pub disagreement: f64,
    pub truth_only: usize,
    pub extracted_only: usize,
}

/// Compare two rules position by position.
pub fn recovery_score(
    truth: &DnfRule,
    extracted: &DnfRule,
    positions: &[FeatureVector],
) -> Result<RecoveryScore, SyntheticError> {
    if positions.len() < MIN_RECOVERY_POSITIONS {
        return Err(SyntheticError::TooFewPositions(positions.len()));
    }
    let (t, e) = (CompiledDnf::new(&truth.clauses), CompiledDnf::new(&extracted.clauses));
    let (mut truth_only, mut extracted_only) = (0, 0);
    for f in positions {
        match (t.eval(f), e.eval(f)) {
            (true, false) => truth_only += 1,
            (false, true) => extracted_only += 1,
            _ => {}
        }
    }
    let verdict = match (truth_only, extracted_only) {
        (0, 0) => Verdict::Equivalent,
        (_, 0) => Verdict::Subset,
        (0, _) => Verdict::Superset,
        _ => Verdict::Divergent,
    };
    Ok(RecoveryScore {
        verdict,
        disagreement: (truth_only + extracted_only) as f64 / positions.len() as f64,
        truth_only,
        extracted_only,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub n_neurons: usize,
    pub sampler: SamplerConfig,
    pub amplitude: f64,
    pub noise: f64,
    pub leak: f64,
    pub train_games: usize,
    pub test_games: usize,
    pub probe_games: usize,
    pub seed: u64,
    pub tree: TreeConfig,
    pub layer: u16,
    /// Fit score needed to count a neuron as recovered.
    pub min_r2: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            n_neurons: 100,
            // At 5% noise a rule firing on under ~1.3% of positions caps
            // R^2 below 0.9 even for a perfect predictor.
            sampler: SamplerConfig { min_support: 0.015, ..SamplerConfig::default() },
            amplitude: 1.0,
            noise: 0.05,
            leak: 0.02,
            train_games: crate::othello::DEFAULT_TRAIN_GAMES,
            test_games: crate::othello::DEFAULT_TEST_GAMES,
            probe_games: 500,
            seed: 0,
            tree: TreeConfig::default(),
            layer: 0,
            min_r2: 0.9,
        }
    }
}

// Sub-stream tags for the recovery run's seeds.
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_PROBE: u64 = 3;
const STREAM_RULES: u64 = 4;
const STREAM_NOISE: u64 = 5;

/// Game corpora used by a recovery run, featurized.
pub struct RecoveryData {
    pub train: GameCorpus,
    pub test: GameCorpus,
    pub train_features: Vec<FeatureVector>,
    pub train_keys: Vec<PositionKey>,
    pub test_features: Vec<FeatureVector>,
    pub test_keys: Vec<PositionKey>,
    pub probe_features: Vec<FeatureVector>,
}

fn featurize(corpus: &GameCorpus) -> Result<(Vec<FeatureVector>, Vec<PositionKey>), SyntheticError> {
    let per_game: Vec<Vec<FeatureVector>> = corpus
        .games
        .par_iter()
        .map(|g| g.features())
        .collect::<Result<_, _>>()
        .map_err(|e| SyntheticError::Replay(e.to_string()))?;
    let mut feats = Vec::with_capacity(corpus.n_positions());
    let mut keys = Vec::with_capacity(corpus.n_positions());
    for (gid, fs) in per_game.into_iter().enumerate() {
        for (mi, f) in fs.into_iter().enumerate() {
            keys.push(PositionKey { game_id: gid as u32, move_index: mi as u8 });
            feats.push(f);
        }
    }
    Ok((feats, keys))
}

impl RecoveryData {
    pub fn generate(cfg: &RecoveryConfig) -> Result<RecoveryData, SyntheticError> {
        let train = GameCorpus::generate(cfg.train_games, derive_seed(cfg.seed, STREAM_TRAIN));
        let test = GameCorpus::generate(cfg.test_games, derive_seed(cfg.seed, STREAM_TEST));
        let probe = GameCorpus::generate(cfg.probe_games, derive_seed(cfg.seed, STREAM_PROBE));
        let (train_features, train_keys) = featurize(&train)?;
        let (test_features, test_keys) = featurize(&test)?;
        let (probe_features, _) = featurize(&probe)?;
        Ok(RecoveryData { train, test, train_features, train_keys, test_features, test_keys, probe_features })
    }
}

/// Sample `cfg.n_neurons` planted neurons.
pub fn plant_neurons(cfg: &RecoveryConfig, probe: &[FeatureVector]) -> Result<Vec<SyntheticNeuron>, SyntheticError> {
    let rule_seed = derive_seed(cfg.seed, STREAM_RULES);
    let noise_seed = derive_seed(cfg.seed, STREAM_NOISE);
    (0..cfg.n_neurons)
        .into_par_iter()
        .map(|i| {
            let clauses = sample_rule(derive_seed(rule_seed, i as u64), &cfg.sampler, probe)?;
            let dnf = DnfRule::new(i as u32, cfg.layer, clauses);
            Ok(SyntheticNeuron::new(dnf, cfg.amplitude, cfg.noise, cfg.leak, derive_seed(noise_seed, i as u64)))
        })
        .collect()
}

/// Per-neuron outcome of a recovery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRecovery {
    pub neuron_id: u32,
    pub truth: DnfRule,
    pub extracted: DnfRule,
    /// Extracted clauses before rewriting, one per ON leaf.
    pub raw_clauses: Vec<Clause>,
    pub r2: Option<f64>,
    /// R^2 of the best predictor that knows the true rule: the mean test
    /// activation of positions with the same rule value. Bounds `r2` up to
    /// sampling error.
    pub oracle_r2: Option<f64>,
    pub flag: FitFlag,
    pub score: RecoveryScore,
    /// Truth support on the test positions.
    pub support: f64,
    /// Per ground-truth clause: did querying with it return this neuron.
    pub surfaced: Vec<bool>,
}

impl NeuronRecovery {
    pub fn recovered(&self, min_r2: f64) -> bool {
        self.score.verdict == Verdict::Equivalent && self.r2.is_some_and(|r| r >= min_r2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub config: RecoveryConfig,
    pub neurons: Vec<NeuronRecovery>,
}

impl RecoveryReport {
    pub fn n_recovered(&self) -> usize {
        self.neurons.iter().filter(|n| n.recovered(self.config.min_r2)).count()
    }

    pub fn mean_r2(&self) -> f64 {
        let scores: Vec<f64> = self.neurons.iter().map(|n| n.r2.unwrap_or(0.0)).collect();
        scores.iter().sum::<f64>() / scores.len().max(1) as f64
    }

    pub fn all_surfaced(&self) -> bool {
        self.neurons.iter().all(|n| n.surfaced.iter().all(|&s| s))
    }
}

fn oracle_r2(fired: &[bool], y: &[f64]) -> Option<f64> {
    let mut sum = [0f64; 2];
    let mut n = [0usize; 2];
    for (&b, &v) in fired.iter().zip(y) {
        sum[b as usize] += v;
        n[b as usize] += 1;
    }
    let mean = [sum[0] / n[0].max(1) as f64, sum[1] / n[1].max(1) as f64];
    let preds: Vec<f64> = fired.iter().map(|&b| mean[b as usize]).collect();
    crate::tree::r2_score(&preds, y).ok()
}

/// Fit, extract and score every planted neuron.
pub fn run_recovery_on(
    cfg: &RecoveryConfig,
    data: &RecoveryData,
    neurons: &[SyntheticNeuron],
) -> Result<RecoveryReport, SyntheticError> {
    let fitted: Vec<(NeuronRecovery, DnfRule)> = neurons
        .par_iter()
        .map(|n| {
            let id = n.dnf.neuron_id;
            let act = |fs: &[FeatureVector], ks: &[PositionKey], corpus: &GameCorpus| -> Vec<f64> {
                let n = n.clone().with_stream(corpus.seed);
                fs.iter().zip(ks).map(|(f, &k)| n.activation(f, k) as f64).collect()
            };
            let train_y = act(&data.train_features, &data.train_keys, &data.train);
            let test_y = act(&data.test_features, &data.test_keys, &data.test);
            let report = fit_neuron(
                id,
                cfg.layer,
                (&data.train_features, &train_y),
                (&data.test_features, &test_y),
                &cfg.tree,
            )?;
            let (mut extracted, raw) = match &report.tree {
                Some(t) => {
                    let ex = extract_dnf(t, id, cfg.layer, ExtractOptions::default());
                    (ex.rule, ex.raw_clauses)
                }
                None => (DnfRule::new(id, cfg.layer, Vec::new()), Vec::new()),
            };
            extracted.score = report.score;
            let score = recovery_score(&n.dnf, &extracted, &data.test_features)?;
            let compiled = CompiledDnf::new(&n.dnf.clauses);
            let support = support(&compiled, &data.test_features);
            let fired: Vec<bool> = data.test_features.iter().map(|f| compiled.eval(f)).collect();
            let oracle_r2 = oracle_r2(&fired, &test_y);
            let rec = NeuronRecovery {
                neuron_id: id,
                truth: n.dnf.clone(),
                extracted: extracted.clone(),
                raw_clauses: raw,
                r2: report.score,
                oracle_r2,
                flag: report.flag,
                score,
                support,
                surfaced: Vec::new(),
            };
            Ok((rec, extracted))
        })
        .collect::<Result<_, SyntheticError>>()?;
    let rules: Vec<DnfRule> = fitted.iter().map(|(_, r)| r.clone()).collect();
    let opts = MatchOptions { mode: MatchMode::Skeptical, min_score: None };
    let neurons = fitted
        .into_iter()
        .map(|(mut rec, _)| {
            rec.surfaced = rec
                .truth
                .clauses
                .iter()
                .map(|c| match Query::from_clause(c) {
                    Ok(q) => match_query(&q, &rules, opts)
                        .iter()
                        .any(|m| m.neuron_id == rec.neuron_id && m.layer == rec.truth.layer),
                    Err(_) => false,
                })
                .collect();
            rec
        })
        .collect();
    Ok(RecoveryReport { config: *cfg, neurons })
}

/// Generate data, plant neurons and run the recovery check.
pub fn run_recovery(cfg: &RecoveryConfig) -> Result<RecoveryReport, SyntheticError> {
    cfg.sampler.validate()?;
    let data = RecoveryData::generate(cfg)?;
    let neurons = plant_neurons(cfg, &data.probe_features)?;
    run_recovery_on(cfg, &data, &neurons)
}

/// Ground-truth manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub neuron_id: u32,
    pub dnf: DnfRule,
    pub amplitude: f64,
    pub noise: f64,
    pub leak: f64,
    pub seed: u64,
}

pub fn manifest_entries(neurons: &[SyntheticNeuron]) -> Vec<ManifestEntry> {
    neurons
        .iter()
        .map(|n| ManifestEntry {
            neuron_id: n.dnf.neuron_id,
            dnf: n.dnf.clone(),
            amplitude: n.amplitude,
            noise: n.noise_sigma,
            leak: n.leak,
            seed: n.seed,
        })
        .collect()
}

pub fn neurons_from_manifest(entries: &[ManifestEntry]) -> Vec<SyntheticNeuron> {
    entries
        .iter()
        .map(|e| SyntheticNeuron::new(e.dnf.clone(), e.amplitude, e.noise, e.leak, e.seed))
        .collect()
}

/// Distinct features used by a rule.
pub fn rule_features(rule: &DnfRule) -> BTreeSet<usize> {
    rule.clauses.iter().flat_map(|c| c.features()).collect()
}
