//! Intervention planning and scoring, and layer-wise ablation plans.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rulemine::intervention::{
    aggregate, build_pattern_pair, collect_positions, layerwise_plan, plan_hash, plan_positions, read_olgp,
    score_intervention, Action, InterventionError, InterventionPlan, LayerOrder, PlannedNeuron,
};
use rulemine::othello::Square;
use rulemine::provenance::hash_hex;
use rulemine::query::{match_query, MatchMode, MatchOptions, Query};
use rulemine::trace::PositionKey;
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifact::{read_games, read_json, usage, write_json, Artifact};
use crate::fit::{load_reports, load_rules};

#[derive(Args, Serialize)]
pub struct PlanArgs {
    /// Games whose positions are scored (usually the held-out set).
    #[arg(long)]
    #[serde(skip)]
    pub games: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub rules: PathBuf,
    /// Comma-separated target squares, or "all".
    #[arg(long, default_value = "all")]
    pub targets: String,
    /// Seed for assigning patterns to intervention and control.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Only ablate neurons whose fit score is at least this.
    #[arg(long, default_value_t = 0.7)]
    pub min_score: f64,
    /// Select neurons whose rules are merely consistent with the pattern.
    #[arg(long)]
    pub credulous: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

fn parse_targets(s: &str) -> Result<Vec<Square>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Square::playable().collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<Square>().map_err(|e| usage(format!("target {t:?}: {e}"))))
        .collect()
}

pub fn plan_intervention(a: &PlanArgs) -> Result<()> {
    let art = Artifact::new("plan-intervention", a, &[("games", &a.games), ("rules", &a.rules)], Some(a.seed))?;
    let targets = parse_targets(&a.targets)?;
    let corpus = read_games(&a.games)?;
    let rules = load_rules(&a.rules)?;
    let mode = if a.credulous { MatchMode::Credulous } else { MatchMode::Skeptical };
    let opts = MatchOptions { mode, min_score: Some(a.min_score) };
    let mut plans = Vec::new();
    let mut skipped = Vec::new();
    for t in targets {
        let pair = match build_pattern_pair(t, a.seed) {
            Ok(p) => p,
            Err(e @ (InterventionError::NotEligible(_) | InterventionError::NoValidPair(_))) => {
                skipped.push(json!({"target": t, "reason": e.to_string()}));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let q = Query::from_clause(&pair.intervention.clause())?;
        let neurons = match_query(&q, &rules, opts)
            .into_iter()
            .map(|m| PlannedNeuron { layer: m.layer, neuron_id: m.neuron_id, score: m.fit_score })
            .collect();
        let (pi, pc) = collect_positions(&corpus.games, &pair)?;
        plans.push(InterventionPlan {
            target: t,
            pair,
            assignment_seed: a.seed,
            neurons,
            positions_intervention: pi,
            positions_control: pc,
        });
    }
    let mut doc = art.json(json!({
        "match_mode": mode,
        "min_score": a.min_score,
        // Each pattern is three squares starting at the target.
        "pattern_squares": 3,
        "pattern_includes_target": true,
        "positions": plan_positions(&plans),
        "plans": plans,
        "skipped": skipped,
    }));
    let h = plan_hash(&doc);
    doc["plan_hash"] = json!(hash_hex(h));
    write_json(&a.out, &doc)?;
    let n_neurons: usize = plans.iter().map(|p| p.neurons.len()).sum();
    eprintln!(
        "planned {} targets ({} skipped), {n_neurons} neuron selections, plan_hash={}",
        plans.len(),
        skipped.len(),
        hash_hex(h)
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub plan: PathBuf,
    /// Clean/ablated logits (OLGP) produced for the plan.
    #[arg(long)]
    #[serde(skip)]
    pub logits: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn eval_intervention(a: &EvalArgs) -> Result<()> {
    let art = Artifact::new("eval-intervention", a, &[("plan", &a.plan), ("logits", &a.logits)], None)?;
    let mut doc = read_json(&a.plan)?;
    let stored = doc
        .as_object_mut()
        .and_then(|m| m.remove("plan_hash"))
        .and_then(|v| v.as_str().map(str::to_string))
        .with_context(|| format!("{}: no plan_hash", a.plan.display()))?;
    let expected = plan_hash(&doc);
    if hash_hex(expected) != stored {
        bail!("{}: contents do not match its plan_hash {stored}", a.plan.display());
    }
    let f = File::open(&a.logits).with_context(|| format!("opening {}", a.logits.display()))?;
    let (found, pairs) = read_olgp(BufReader::new(f)).with_context(|| format!("{}", a.logits.display()))?;
    if found != expected {
        return Err(anyhow::Error::from(InterventionError::PlanMismatch { expected, found }))
            .with_context(|| format!("{}", a.logits.display()));
    }
    let plans: Vec<InterventionPlan> =
        serde_json::from_value(doc["plans"].clone()).with_context(|| format!("{}: bad plans", a.plan.display()))?;
    let by_key: BTreeMap<PositionKey, _> = pairs.into_iter().map(|p| (p.key, p)).collect();
    let reports = plans
        .iter()
        .map(|p| score_intervention(&by_key, &p.positions_intervention, &p.positions_control, p.target))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("{}", a.logits.display()))?;
    let (all, outside) = aggregate(&reports);
    let out = art.json(json!({
        "plan_hash": stored,
        "kl_direction": "KL(clean || ablated)",
        "accuracy_diff": "clean_accuracy - corrupted_accuracy",
        "below_fractions": rulemine::intervention::BELOW_FRACTIONS,
        "targets": reports,
        "aggregate_all": all,
        "aggregate_outside_middle_4x4": outside,
    }));
    write_json(&a.out, &out)?;
    eprintln!(
        "scored {} targets: logit diff {:.4} (intervention) vs {:.4} (control)",
        reports.len(),
        all.intervention.mean_logit_diff,
        all.control.mean_logit_diff
    );
    Ok(())
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderArg {
    FirstN,
    LastN,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionArg {
    ReplaceWithTree,
    Zero,
    Mean,
}

#[derive(Args, Serialize)]
pub struct LayerwiseArgs {
    /// Trees JSON files from `train`, one per layer.
    #[arg(long, required = true, num_args = 1..)]
    #[serde(skip)]
    pub trees: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    pub cutoff: f64,
    #[arg(long, value_enum)]
    pub order: OrderArg,
    /// Number of layers.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "replace-with-tree")]
    pub action: ActionArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn plan_layerwise(a: &LayerwiseArgs) -> Result<()> {
    let names: Vec<String> = (0..a.trees.len()).map(|i| format!("trees_{i}")).collect();
    let inputs: Vec<(&str, &std::path::Path)> =
        names.iter().map(String::as_str).zip(a.trees.iter().map(PathBuf::as_path)).collect();
    let art = Artifact::new("plan-layerwise", a, &inputs, None)?;
    let mut reports = Vec::new();
    for p in &a.trees {
        reports.extend(load_reports(p)?);
    }
    let order = match a.order {
        OrderArg::FirstN => LayerOrder::FirstN,
        OrderArg::LastN => LayerOrder::LastN,
    };
    let action = match a.action {
        ActionArg::ReplaceWithTree => Action::ReplaceWithTree,
        ActionArg::Zero => Action::Zero,
        ActionArg::Mean => Action::Mean,
    };
    let plan = layerwise_plan(&reports, a.cutoff, order, a.n, action).map_err(|e| match e {
        InterventionError::BadLayerCount(_) => usage(e.to_string()),
        e => e.into(),
    })?;
    let selected: usize = plan.layers.values().map(Vec::len).sum();
    let body: Value = serde_json::to_value(&plan)?;
    write_json(&a.out, &art.json(json!({"plan": body})))?;
    eprintln!("selected {selected} neurons across {} layers", plan.layers.len());
    Ok(())
}
