//! Game corpora, synthetic traces, trace ingestion and the recovery check.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rulemine::othello::{derive_seed, GameCorpus};
use rulemine::synthetic::{
    manifest_entries, neurons_from_manifest, plant_neurons, run_recovery, ManifestEntry, RecoveryConfig,
    SamplerConfig, SyntheticNeuron,
};
use rulemine::trace::synthesize_trace;
use rulemine::tree::TreeConfig;
use serde::Serialize;
use serde_json::json;

use crate::artifact::{emit, read_games, read_json, read_trace, usage, write_bytes, write_json, Artifact, CsvOut};

#[derive(Args, Serialize)]
pub struct GenGamesArgs {
    /// Number of games.
    #[arg(long, default_value_t = 6000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn gen_games(a: &GenGamesArgs) -> Result<()> {
    let art = Artifact::new("gen-games", a, &[], Some(a.seed))?;
    let corpus = GameCorpus::generate(a.n, a.seed);
    let mut buf = Vec::new();
    corpus.write(&mut buf)?;
    // The provenance comment goes after the format header line.
    let split = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |i| i + 1);
    let mut out = buf[..split].to_vec();
    out.extend_from_slice(art.csv_comment().as_bytes());
    out.extend_from_slice(&buf[split..]);
    write_bytes(&a.out, &out)?;
    eprintln!("wrote {} games ({} positions) to {}", a.n, corpus.n_positions(), a.out.display());
    Ok(())
}

#[derive(Args, Serialize, Clone, Copy)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 3)]
    pub max_clauses: usize,
    #[arg(long, default_value_t = 4)]
    pub max_literals: usize,
    /// Every clause has exactly `max_literals` literals.
    #[arg(long)]
    pub exact_literals: bool,
    /// Minimum support of the rule and of each clause alone, on probe positions.
    #[arg(long, default_value_t = 0.015)]
    pub min_support: f64,
    #[arg(long, default_value_t = 0.5)]
    pub max_support: f64,
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            max_clauses: self.max_clauses,
            max_literals: self.max_literals,
            exact_literals: self.exact_literals,
            min_support: self.min_support,
            max_support: self.max_support,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Args, Serialize)]
pub struct SynthTraceArgs {
    #[arg(long)]
    #[serde(skip)]
    pub games: PathBuf,
    /// Output trace (OTRC).
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Where to write the planted rules.
    #[arg(long)]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
    /// Reuse the planted neurons of an existing manifest instead of sampling.
    #[arg(long)]
    #[serde(skip)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub neurons: usize,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.02)]
    pub leak: f64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Games used to measure rule support while sampling.
    #[arg(long, default_value_t = 500)]
    pub probe_games: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub layer: u16,
}

pub fn synth_trace(a: &SynthTraceArgs) -> Result<()> {
    let mut inputs = vec![("games", a.games.as_path())];
    if let Some(t) = &a.truth {
        inputs.push(("truth", t.as_path()));
    }
    let art = Artifact::new("synth-trace", a, &inputs, Some(a.seed))?;
    let corpus = read_games(&a.games)?;
    let neurons: Vec<SyntheticNeuron> = match &a.truth {
        Some(path) => {
            let doc = read_json(path)?;
            let entries: Vec<ManifestEntry> = serde_json::from_value(doc["neurons"].clone())
                .with_context(|| format!("{}: bad neuron list", path.display()))?;
            neurons_from_manifest(&entries)
        }
        None => {
            let cfg = RecoveryConfig {
                n_neurons: a.neurons,
                sampler: a.sampler.config(),
                amplitude: a.amplitude,
                noise: a.noise,
                leak: a.leak,
                probe_games: a.probe_games,
                seed: a.seed,
                layer: a.layer,
                ..RecoveryConfig::default()
            };
            cfg.sampler.validate().map_err(|e| usage(e.to_string()))?;
            let probe = GameCorpus::generate(a.probe_games, derive_seed(a.seed, 3));
            let probe_features: Vec<_> = probe
                .games
                .iter()
                .map(|g| g.features())
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .flatten()
                .collect();
            plant_neurons(&cfg, &probe_features)?
        }
    };
    let layer = neurons.first().map_or(a.layer, |n| n.dnf.layer);
    // Noise is keyed on the corpus so train and test traces stay independent.
    let models: Vec<SyntheticNeuron> = neurons.iter().cloned().map(|n| n.with_stream(corpus.seed)).collect();
    let trace = synthesize_trace(&corpus.games, &models, layer)?;
    write_bytes(&a.out, &trace.to_bytes())?;
    if let Some(m) = &a.manifest {
        let doc = art.json(json!({"neurons": manifest_entries(&neurons)}));
        write_json(m, &doc)?;
    }
    eprintln!(
        "wrote {} positions x {} neurons to {} (config_hash={})",
        trace.n_positions(),
        trace.n_neurons,
        a.out.display(),
        art.hash_hex()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trace: PathBuf,
    /// Replay these games and check the trace features against them.
    #[arg(long)]
    #[serde(skip)]
    pub games: Option<PathBuf>,
    /// Summary JSON (stdout when omitted).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub fn ingest_trace(a: &IngestArgs) -> Result<()> {
    let mut inputs = vec![("trace", a.trace.as_path())];
    if let Some(g) = &a.games {
        inputs.push(("games", g.as_path()));
    }
    let art = Artifact::new("ingest-trace", a, &inputs, None)?;
    let trace = read_trace(&a.trace)?;
    if let Some(path) = &a.games {
        let corpus = read_games(path)?;
        let mut cache: Option<(u32, Vec<_>)> = None;
        for (row, (key, f)) in trace.keys.iter().zip(&trace.features).enumerate() {
            let game = corpus.games.get(key.game_id as usize).with_context(|| {
                format!("{} row {row}: game {} not in {}", a.trace.display(), key.game_id, path.display())
            })?;
            if cache.as_ref().map(|c| c.0) != Some(key.game_id) {
                cache = Some((key.game_id, game.features()?));
            }
            let replay = &cache.as_ref().expect("filled above").1;
            match replay.get(key.move_index as usize) {
                Some(r) if r == f => {}
                Some(_) => bail!(
                    "{} row {row}: features differ from replay of game {} move {}",
                    a.trace.display(),
                    key.game_id,
                    key.move_index
                ),
                None => bail!(
                    "{} row {row}: game {} has no move {}",
                    a.trace.display(),
                    key.game_id,
                    key.move_index
                ),
            }
        }
    }
    let n = trace.n_neurons as usize;
    let mut on = vec![0usize; n];
    let mut sum = vec![0f64; n];
    for row in 0..trace.n_positions() {
        for (j, &v) in trace.row_activations(row).iter().enumerate() {
            sum[j] += v as f64;
            on[j] += (v > 0.0) as usize;
        }
    }
    let denom = trace.n_positions().max(1) as f64;
    let neurons: Vec<_> = (0..n)
        .map(|j| json!({"neuron_id": j, "mean": sum[j] / denom, "positive_fraction": on[j] as f64 / denom}))
        .collect();
    let doc = art.json(json!({
        "layer": trace.layer_id,
        "n_neurons": trace.n_neurons,
        "n_positions": trace.n_positions(),
        "replay_checked": a.games.is_some(),
        "neurons": neurons,
    }));
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

#[derive(Args, Serialize)]
pub struct RecoverArgs {
    #[arg(long, default_value_t = 100)]
    pub neurons: usize,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.02)]
    pub leak: f64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 6000)]
    pub train_games: usize,
    #[arg(long, default_value_t = 500)]
    pub test_games: usize,
    #[arg(long, default_value_t = 500)]
    pub probe_games: usize,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Held-out R^2 needed to count a neuron as recovered.
    #[arg(long, default_value_t = 0.9)]
    pub min_r2: f64,
    /// Recovered neurons needed for the run to pass.
    #[arg(long, default_value_t = 90)]
    pub required: usize,
    /// Report JSON.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Per-neuron CSV.
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

pub fn recover(a: &RecoverArgs) -> Result<()> {
    let art = Artifact::new("recover", a, &[], Some(a.seed))?;
    let cfg = RecoveryConfig {
        n_neurons: a.neurons,
        sampler: a.sampler.config(),
        amplitude: a.amplitude,
        noise: a.noise,
        leak: a.leak,
        train_games: a.train_games,
        test_games: a.test_games,
        probe_games: a.probe_games,
        seed: a.seed,
        tree: TreeConfig { max_depth: a.max_depth, ..TreeConfig::default() },
        layer: 0,
        min_r2: a.min_r2,
    };
    cfg.sampler.validate().map_err(|e| usage(e.to_string()))?;
    cfg.tree.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_recovery(&cfg)?;
    let recovered = report.n_recovered();
    let surfaced_recovered = report
        .neurons
        .iter()
        .filter(|n| n.recovered(cfg.min_r2))
        .all(|n| n.surfaced.iter().all(|&s| s));
    let passed = recovered >= a.required && surfaced_recovered;
    let rows: Vec<_> = report
        .neurons
        .iter()
        .map(|n| {
            json!({
                "neuron_id": n.neuron_id,
                "truth": n.truth.pretty(),
                "extracted": n.extracted.pretty(),
                "r2": n.r2,
                "oracle_r2": n.oracle_r2,
                "verdict": n.score.verdict,
                "disagreement": n.score.disagreement,
                "support": n.support,
                "surfaced": n.surfaced,
                "recovered": n.recovered(cfg.min_r2),
            })
        })
        .collect();
    let doc = art.json(json!({
        "n_neurons": report.neurons.len(),
        "recovered": recovered,
        "required": a.required,
        "mean_r2": report.mean_r2(),
        "surfaced_recovered": surfaced_recovered,
        "surfaced_all": report.all_surfaced(),
        "passed": passed,
        "neurons": rows,
    }));
    write_json(&a.out, &doc)?;
    if let Some(path) = &a.csv {
        let mut csv = CsvOut::new(
            &art,
            &["neuron_id", "truth", "extracted", "r2", "oracle_r2", "verdict", "support", "recovered"],
        )?;
        for n in &report.neurons {
            csv.row([
                n.neuron_id.to_string(),
                n.truth.pretty(),
                n.extracted.pretty(),
                crate::artifact::opt_f64(n.r2),
                crate::artifact::opt_f64(n.oracle_r2),
                serde_json::to_value(n.score.verdict)?.as_str().unwrap_or_default().to_string(),
                n.support.to_string(),
                n.recovered(cfg.min_r2).to_string(),
            ])?;
        }
        write_bytes(path, csv.finish()?.as_bytes())?;
    }
    eprintln!(
        "recovered {recovered}/{} (required {}), mean R^2 {:.4}, {}",
        report.neurons.len(),
        a.required,
        report.mean_r2(),
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(())
}

/// Read a probe CSV, with the path in errors.
pub fn read_probe(path: &std::path::Path) -> Result<Vec<rulemine::metrics::ProbeRow>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    rulemine::metrics::read_probe_csv(BufReader::new(f)).with_context(|| format!("{}", path.display()))
}
