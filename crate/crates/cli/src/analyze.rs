//! Rule queries and interpretability metrics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, ValueEnum};
use rulemine::baselines::{rule_feature_weights, RankedRule, RuleWeightConfig};
use rulemine::metrics::{
    containment, count_interpretable, jaccard, probe_feature_set, weight_feature_set, FeatureSet,
};
use rulemine::othello::{parse_feature_name, N_FEATURES};
use rulemine::query::{match_query, parse_query, MatchMode, MatchOptions};
use rulemine::tree::top_k_features;
use serde::Serialize;
use serde_json::json;

use crate::artifact::{emit, opt_f64, parse_floats, usage, Artifact, CsvOut};
use crate::data::read_probe;
use crate::fit::{load_reports, load_rules};

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize)]
pub struct QueryArgs {
    #[arg(long)]
    #[serde(skip)]
    pub rules: PathBuf,
    /// Board condition, e.g. "C0 is empty AND D1 is theirs AND E2 is mine".
    #[arg(long)]
    pub q: String,
    /// Match clauses that are merely consistent with the query.
    #[arg(long)]
    pub credulous: bool,
    /// Only neurons whose fit score is at least this.
    #[arg(long)]
    pub min_score: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Output file (stdout when omitted).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub fn query(a: &QueryArgs) -> Result<()> {
    let art = Artifact::new("query", a, &[("rules", &a.rules)], None)?;
    let q = parse_query(&a.q).map_err(|e| usage(format!("query: {e}")))?;
    let rules = load_rules(&a.rules)?;
    let mode = if a.credulous { MatchMode::Credulous } else { MatchMode::Skeptical };
    let matches = match_query(&q, &rules, MatchOptions { mode, min_score: a.min_score });
    let by_key: BTreeMap<(u16, u32), &rulemine::rules::DnfRule> =
        rules.iter().map(|r| ((r.layer, r.neuron_id), r)).collect();
    let clause_texts = |layer: u16, id: u32, idx: &[usize]| -> Vec<String> {
        idx.iter().map(|&i| by_key[&(layer, id)].clauses[i].to_string()).collect()
    };
    let text = match a.format {
        Format::Json => {
            let rows: Vec<_> = matches
                .iter()
                .map(|m| {
                    json!({
                        "neuron_id": m.neuron_id,
                        "layer": m.layer,
                        "fit_score": m.fit_score,
                        "matched_clauses": m.matched_clauses,
                        "clauses": clause_texts(m.layer, m.neuron_id, &m.matched_clauses),
                    })
                })
                .collect();
            let doc = art.json(json!({
                "query": q.clause.to_string(),
                "mode": mode,
                "min_score": a.min_score,
                "matches": rows,
            }));
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Format::Csv => {
            let mut csv = CsvOut::new(&art, &["neuron_id", "layer", "fit_score", "matched_clauses"])?;
            for m in &matches {
                csv.row([
                    m.neuron_id.to_string(),
                    m.layer.to_string(),
                    opt_f64(m.fit_score),
                    clause_texts(m.layer, m.neuron_id, &m.matched_clauses).join(" | "),
                ])?;
            }
            csv.finish()?
        }
    };
    emit(a.out.as_deref(), &text)
}

#[derive(Args, Serialize)]
pub struct MetricsArgs {
    /// Report CSV from `train`, for interpretable-neuron counts.
    #[arg(long)]
    #[serde(skip)]
    pub reports: Option<PathBuf>,
    #[arg(long, default_value = "0.7,0.8,0.9")]
    pub cutoffs: String,
    /// Counts CSV (stdout when omitted).
    #[arg(long)]
    #[serde(skip)]
    pub counts_out: Option<PathBuf>,
    /// Probe similarity CSV; enables the feature-set comparison.
    #[arg(long)]
    #[serde(skip)]
    pub probe: Option<PathBuf>,
    /// Trees JSON from `train`.
    #[arg(long)]
    #[serde(skip)]
    pub trees: Option<PathBuf>,
    /// Lasso CSV from `baseline-lasso`.
    #[arg(long)]
    #[serde(skip)]
    pub lasso: Option<PathBuf>,
    /// Rules JSON from `extract-rules`.
    #[arg(long)]
    #[serde(skip)]
    pub rules: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub k_sigma: f64,
    /// Rank decay exponent for rule feature weights.
    #[arg(long, default_value_t = 0.7)]
    pub rho: f64,
    /// Similarity CSV (required with --probe).
    #[arg(long)]
    #[serde(skip)]
    pub similarity_out: Option<PathBuf>,
}

type Key = (u16, u32);

pub fn metrics(a: &MetricsArgs) -> Result<()> {
    let named = [
        ("reports", &a.reports),
        ("probe", &a.probe),
        ("trees", &a.trees),
        ("lasso", &a.lasso),
        ("rules", &a.rules),
    ];
    let inputs: Vec<(&str, &Path)> = named.iter().filter_map(|(n, p)| p.as_deref().map(|p| (*n, p))).collect();
    if a.reports.is_none() && a.probe.is_none() {
        return Err(usage("nothing to do: pass --reports and/or --probe"));
    }
    let art = Artifact::new("metrics", a, &inputs, None)?;
    if let Some(path) = &a.reports {
        let cutoffs = parse_floats(&a.cutoffs)?;
        let scores = read_report_scores(path)?;
        let counts = count_interpretable(&scores, &cutoffs);
        let mut csv = CsvOut::new(&art, &["layer", "cutoff", "count"])?;
        for (layer, row) in &counts {
            for (c, n) in cutoffs.iter().zip(row) {
                csv.row([layer.to_string(), c.to_string(), n.to_string()])?;
            }
        }
        emit(a.counts_out.as_deref(), &csv.finish()?)?;
    }
    if let Some(probe_path) = &a.probe {
        let out = a.similarity_out.as_deref().ok_or_else(|| usage("--probe needs --similarity-out"))?;
        let mut methods: Vec<(&str, BTreeMap<Key, FeatureSet>)> = Vec::new();
        if let Some(p) = &a.trees {
            methods.push(("tree", tree_sets(p, a.k_sigma)?));
        }
        if let Some(p) = &a.lasso {
            methods.push(("lasso", lasso_sets(p)?));
        }
        if let Some(p) = &a.rules {
            methods.push(("rules", rule_sets(p, RuleWeightConfig { rho: a.rho, k_sigma: a.k_sigma })?));
        }
        if methods.is_empty() {
            return Err(usage("--probe needs at least one of --trees, --lasso, --rules"));
        }
        let mut csv = CsvOut::new(
            &art,
            &["layer", "neuron_id", "method", "n_method", "n_probe", "containment", "jaccard", "method_features"],
        )?;
        for row in read_probe(probe_path)? {
            let probe = probe_feature_set(&row.sims, a.k_sigma).ok();
            for (name, sets) in &methods {
                let Some(m) = sets.get(&(row.layer, row.neuron_id)) else { continue };
                let (c, j) = match &probe {
                    Some(p) => (containment(m, p).ok(), jaccard(m, p).ok()),
                    None => (None, None),
                };
                csv.row([
                    row.layer.to_string(),
                    row.neuron_id.to_string(),
                    name.to_string(),
                    m.len().to_string(),
                    probe.as_ref().map(|p| p.len().to_string()).unwrap_or_default(),
                    opt_f64(c),
                    opt_f64(j),
                    m.names().join(" "),
                ])?;
            }
        }
        crate::artifact::write_bytes(out, csv.finish()?.as_bytes())?;
    }
    Ok(())
}

fn read_report_scores(path: &Path) -> Result<Vec<(u16, Option<f64>)>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(BufReader::new(f));
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("{}: no {name} column", path.display()))
    };
    let (li, si) = (col("layer")?, col("score")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{} record {}", path.display(), i + 1))?;
        let layer = rec[li].parse().with_context(|| format!("{} record {}: bad layer", path.display(), i + 1))?;
        let score = match rec[si].trim() {
            "" => None,
            s => Some(s.parse().with_context(|| format!("{} record {}: bad score", path.display(), i + 1))?),
        };
        out.push((layer, score));
    }
    Ok(out)
}

fn tree_sets(path: &Path, k_sigma: f64) -> Result<BTreeMap<Key, FeatureSet>> {
    Ok(load_reports(path)?
        .into_iter()
        .filter_map(|r| {
            let t = r.tree?;
            let mut w = vec![0f64; N_FEATURES];
            for (f, g) in top_k_features(&t) {
                w[f] = g;
            }
            Some(((r.layer, r.neuron_id), weight_feature_set(&w, k_sigma)))
        })
        .collect())
}

fn lasso_sets(path: &Path) -> Result<BTreeMap<Key, FeatureSet>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(BufReader::new(f));
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("{}: no {name} column", path.display()))
    };
    let (ni, li, ti) = (col("neuron_id")?, col("layer")?, col("top_features")?);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let bad = |what: &str| anyhow!("{} record {}: bad {what}", path.display(), i + 1);
        let rec = rec.with_context(|| format!("{} record {}", path.display(), i + 1))?;
        let id: u32 = rec[ni].parse().map_err(|_| bad("neuron_id"))?;
        let layer: u16 = rec[li].parse().map_err(|_| bad("layer"))?;
        let feats = rec[ti]
            .split_whitespace()
            .map(|n| parse_feature_name(n).ok_or_else(|| bad("feature name")))
            .collect::<Result<Vec<usize>>>()?;
        out.insert((layer, id), FeatureSet::new(feats)?);
    }
    Ok(out)
}

fn rule_sets(path: &Path, cfg: RuleWeightConfig) -> Result<BTreeMap<Key, FeatureSet>> {
    Ok(load_rules(path)?
        .into_iter()
        .map(|r| {
            let f1 = r.score.unwrap_or(0.0).clamp(0.0, 1.0);
            let ranked: Vec<RankedRule> =
                r.clauses.iter().map(|c| RankedRule { features: c.features(), f1_strong: f1 }).collect();
            ((r.layer, r.neuron_id), rule_feature_weights(&ranked, cfg).selected)
        })
        .collect())
}
