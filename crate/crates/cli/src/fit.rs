//! Tree fitting, the lasso baseline and rule extraction.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use rulemine::baselines::{kkt_violation, lambda_grid, lasso_top_features, LassoModel, LassoProblem};
use rulemine::othello::{feature_name, FeatureVector};
use rulemine::rules::{extract_dnf, DnfRule, ExtractOptions, RuleFlag};
use rulemine::trace::ActivationTrace;
use rulemine::tree::{fit_neuron, r2_score, top_k_features, DecisionTree, FitFlag, FitReport, TreeConfig, TreeMode};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifact::{opt_f64, read_json, read_trace, usage, write_bytes, write_json, Artifact, CsvOut};

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Regression,
    Classification,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trace: PathBuf,
    /// Held-out trace for scoring; the training trace is used when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub test_trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "regression")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 100)]
    pub min_samples_split: usize,
    #[arg(long, default_value_t = 50)]
    pub min_samples_leaf: usize,
    /// Classification: ON means activation above this fraction of the training maximum.
    #[arg(long, default_value_t = 0.1)]
    pub on_fraction: f64,
    /// Per-neuron report CSV.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Fitted trees JSON.
    #[arg(long)]
    #[serde(skip)]
    pub trees: PathBuf,
}

/// Training trace plus the trace to score on, checked for compatibility.
fn load_pair(train: &Path, test: Option<&Path>) -> Result<(ActivationTrace, Option<ActivationTrace>)> {
    let tr = read_trace(train)?;
    let te = test.map(read_trace).transpose()?;
    if let Some(te) = &te {
        if te.n_neurons != tr.n_neurons || te.layer_id != tr.layer_id {
            bail!(
                "test trace has layer {} with {} neurons; training trace has layer {} with {}",
                te.layer_id,
                te.n_neurons,
                tr.layer_id,
                tr.n_neurons
            );
        }
    }
    Ok((tr, te))
}

fn column(trace: &ActivationTrace, j: usize) -> Vec<f64> {
    trace.neuron_column(j).into_iter().map(f64::from).collect()
}

fn inputs<'a>(pairs: &[(&'a str, Option<&'a Path>)]) -> Vec<(&'a str, &'a Path)> {
    pairs.iter().filter_map(|&(n, p)| p.map(|p| (n, p))).collect()
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let art = Artifact::new(
        "train",
        a,
        &inputs(&[("trace", Some(&a.trace)), ("test_trace", a.test_trace.as_deref())]),
        None,
    )?;
    let config = TreeConfig {
        max_depth: a.max_depth,
        min_samples_split: a.min_samples_split,
        min_samples_leaf: a.min_samples_leaf,
        mode: match a.mode {
            ModeArg::Regression => TreeMode::Regression,
            ModeArg::Classification => TreeMode::Classification,
        },
        on_fraction: a.on_fraction,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let (tr, te) = load_pair(&a.trace, a.test_trace.as_deref())?;
    let eval = te.as_ref().unwrap_or(&tr);
    let reports: Vec<FitReport<f64>> = (0..tr.n_neurons as usize)
        .into_par_iter()
        .map(|j| {
            let (ytr, yte) = (column(&tr, j), column(eval, j));
            fit_neuron(j as u32, tr.layer_id, (&tr.features, &ytr), (&eval.features, &yte), &config)
                .with_context(|| format!("neuron {j}"))
        })
        .collect::<Result<_>>()?;

    let mut csv = CsvOut::new(
        &art,
        &["neuron_id", "layer", "mode", "score", "flag", "depth", "n_leaves", "top_features"],
    )?;
    for r in &reports {
        let (depth, leaves, top) = match &r.tree {
            Some(t) => {
                let top: Vec<String> = top_k_features(t).iter().take(5).map(|&(f, _)| feature_name(f)).collect();
                (t.depth().to_string(), t.n_leaves().to_string(), top.join(" "))
            }
            None => Default::default(),
        };
        csv.row([
            r.neuron_id.to_string(),
            r.layer.to_string(),
            mode_name(r.mode).to_string(),
            opt_f64(r.score),
            r.flag.name().to_string(),
            depth,
            leaves,
            top,
        ])?;
    }
    write_bytes(&a.out, csv.finish()?.as_bytes())?;

    let neurons: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "neuron_id": r.neuron_id,
                "layer": r.layer,
                "mode": r.mode,
                "score": r.score,
                "flag": r.flag,
                "tree": r.tree.as_ref().map(DecisionTree::to_json),
            })
        })
        .collect();
    let evaluated_on = if te.is_some() { "test" } else { "train" };
    write_json(&a.trees, &art.json(json!({"evaluated_on": evaluated_on, "neurons": neurons})))?;
    let ok = reports.iter().filter(|r| r.flag == FitFlag::Ok).count();
    eprintln!("fitted {} neurons ({ok} scored on {evaluated_on})", reports.len());
    Ok(())
}

fn mode_name(m: TreeMode) -> &'static str {
    match m {
        TreeMode::Regression => "regression",
        TreeMode::Classification => "classification",
    }
}

/// Fit reports from a trees JSON written by `train`.
pub fn load_reports(path: &Path) -> Result<Vec<FitReport<f64>>> {
    let doc = read_json(path)?;
    let ctx = |i: usize, m: &str| anyhow!("{}: neuron entry {i}: {m}", path.display());
    let list = doc["neurons"].as_array().ok_or_else(|| anyhow!("{}: missing neurons list", path.display()))?;
    list.iter()
        .enumerate()
        .map(|(i, n)| {
            let neuron_id = n["neuron_id"].as_u64().ok_or_else(|| ctx(i, "bad neuron_id"))? as u32;
            let layer = n["layer"].as_u64().ok_or_else(|| ctx(i, "bad layer"))? as u16;
            let mode: TreeMode = serde_json::from_value(n["mode"].clone()).map_err(|e| ctx(i, &e.to_string()))?;
            let flag = n["flag"].as_str().and_then(FitFlag::parse).ok_or_else(|| ctx(i, "bad flag"))?;
            let tree = match &n["tree"] {
                Value::Null => None,
                t => Some(DecisionTree::from_json(t).map_err(|e| ctx(i, &e.to_string()))?),
            };
            Ok(FitReport { neuron_id, layer, mode, score: n["score"].as_f64(), flag, tree })
        })
        .collect()
}

/// Rules from a rules JSON written by `extract-rules`.
pub fn load_rules(path: &Path) -> Result<Vec<DnfRule>> {
    let doc = read_json(path)?;
    serde_json::from_value(doc["rules"].clone()).with_context(|| format!("{}: bad rules list", path.display()))
}

#[derive(Args, Serialize)]
pub struct LassoArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trace: PathBuf,
    /// Held-out trace used to pick lambda and report R^2.
    #[arg(long)]
    #[serde(skip)]
    pub test_trace: Option<PathBuf>,
    /// Single penalty instead of the default grid.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Top features: |w| above mean + k standard deviations.
    #[arg(long, default_value_t = 2.0)]
    pub k_sigma: f64,
    /// Fit without an intercept.
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

struct LassoPick {
    model: LassoModel<f64>,
    r2: Option<f64>,
    kkt: f64,
}

pub fn baseline_lasso(a: &LassoArgs) -> Result<()> {
    let art = Artifact::new(
        "baseline-lasso",
        a,
        &inputs(&[("trace", Some(&a.trace)), ("test_trace", a.test_trace.as_deref())]),
        None,
    )?;
    let mut grid = match a.lambda {
        Some(l) if l.is_finite() && l >= 0.0 => vec![l],
        Some(l) => return Err(usage(format!("lambda must be a non-negative number, got {l}"))),
        None => lambda_grid(),
    };
    // Largest first so each fit warm-starts from a sparser solution.
    grid.sort_by(|x, y| y.total_cmp(x));
    let (tr, te) = load_pair(&a.trace, a.test_trace.as_deref())?;
    let eval = te.as_ref().unwrap_or(&tr);
    let problem = LassoProblem::<f64>::new(&tr.features, !a.no_intercept)?;
    let picks: Vec<LassoPick> = (0..tr.n_neurons as usize)
        .into_par_iter()
        .map(|j| -> Result<LassoPick> {
            let (ytr, yte) = (column(&tr, j), column(eval, j));
            let (b, ybar) = problem.correlations(&tr.features, &ytr)?;
            let mut best: Option<(LassoModel<f64>, Option<f64>)> = None;
            let mut warm: Option<Vec<f64>> = None;
            for &l in &grid {
                let m = problem.fit(&b, ybar, l, warm.as_deref())?;
                warm = Some(m.weights.clone());
                let r2 = held_out_r2(&m, &eval.features, &yte);
                let better = match &best {
                    None => true,
                    Some((_, prev)) => r2.unwrap_or(f64::NEG_INFINITY) > prev.unwrap_or(f64::NEG_INFINITY),
                };
                if better {
                    best = Some((m, r2));
                }
            }
            let (model, r2) = best.expect("grid is non-empty");
            let kkt = kkt_violation(&model, &tr.features, &ytr);
            Ok(LassoPick { model, r2, kkt })
        })
        .collect::<Result<_>>()?;

    let mut csv = CsvOut::new(
        &art,
        &["neuron_id", "layer", "lambda", "r2", "n_nonzero", "converged", "sweeps", "kkt_violation", "top_features"],
    )?;
    for (j, p) in picks.iter().enumerate() {
        let top = lasso_top_features(&p.model, a.k_sigma).names().join(" ");
        csv.row([
            j.to_string(),
            tr.layer_id.to_string(),
            p.model.lambda.to_string(),
            opt_f64(p.r2),
            p.model.weights.iter().filter(|w| **w != 0.0).count().to_string(),
            p.model.converged.to_string(),
            p.model.sweeps.to_string(),
            p.kkt.to_string(),
            top,
        ])?;
    }
    write_bytes(&a.out, csv.finish()?.as_bytes())?;
    eprintln!("fitted lasso for {} neurons over {} penalties", picks.len(), grid.len());
    Ok(())
}

fn held_out_r2(m: &LassoModel<f64>, features: &[FeatureVector], y: &[f64]) -> Option<f64> {
    let preds: Vec<f64> = features.iter().map(|f| m.predict(f)).collect();
    r2_score(&preds, y).ok()
}

#[derive(Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trees: PathBuf,
    /// Order each rule's clauses by support on this trace.
    #[arg(long)]
    #[serde(skip)]
    pub trace: Option<PathBuf>,
    /// Ignore leaf sample counts when thresholding leaves.
    #[arg(long)]
    pub unweighted_otsu: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// One human-readable rule per line.
    #[arg(long)]
    #[serde(skip)]
    pub text: Option<PathBuf>,
}

pub fn extract_rules(a: &ExtractArgs) -> Result<()> {
    let art = Artifact::new(
        "extract-rules",
        a,
        &inputs(&[("trees", Some(&a.trees)), ("trace", a.trace.as_deref())]),
        None,
    )?;
    let reports = load_reports(&a.trees)?;
    let positions = a.trace.as_deref().map(read_trace).transpose()?.map(|t| t.features);
    let opts = ExtractOptions { unweighted_otsu: a.unweighted_otsu };
    let mut rules = Vec::with_capacity(reports.len());
    let mut text = String::new();
    for r in &reports {
        let (mut rule, raw, dropped) = match &r.tree {
            Some(t) => {
                let ex = extract_dnf(t, r.neuron_id, r.layer, opts);
                (ex.rule, ex.raw_clauses.len(), ex.unsatisfiable_dropped)
            }
            None => {
                let mut rule = DnfRule::new(r.neuron_id, r.layer, Vec::new());
                rule.flag = RuleFlag::NoOnLeaves;
                (rule, 0, 0)
            }
        };
        rule.score = r.score;
        if let Some(ps) = &positions {
            rule.clauses = rule.clauses_by_support(ps).into_iter().map(|(c, _)| c).collect();
        }
        text.push_str(&format!("L{} N{}: {}\n", rule.layer, rule.neuron_id, rule.pretty()));
        let mut v = serde_json::to_value(&rule)?;
        v["raw_clause_count"] = json!(raw);
        v["unsatisfiable_dropped"] = json!(dropped);
        v["text"] = json!(rule.pretty());
        rules.push(v);
    }
    write_json(&a.out, &art.json(json!({"rules": rules})))?;
    if let Some(p) = &a.text {
        write_bytes(p, text.as_bytes())?;
    }
    eprintln!("extracted {} rules", rules.len());
    Ok(())
}
