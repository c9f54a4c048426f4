//! Output provenance and file helpers shared by the subcommands.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use rulemine::othello::GameCorpus;
use rulemine::provenance::{bytes_hash, hash_hex, stable_hash};
use rulemine::trace::ActivationTrace;
use serde::Serialize;
use serde_json::{json, Value};

/// Bad invocation; maps to exit code 1. Everything else exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Provenance of one command invocation: its parameters, the content hashes
/// of its inputs, and the resulting config hash.
pub struct Artifact {
    pub command: &'static str,
    pub params: Value,
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub hash: u64,
}

impl Artifact {
    pub fn new<P: Serialize>(
        command: &'static str,
        params: &P,
        inputs: &[(&str, &Path)],
        seed: Option<u64>,
    ) -> Result<Artifact> {
        let params = serde_json::to_value(params)?;
        let mut hashes = BTreeMap::new();
        for (name, path) in inputs {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            hashes.insert(name.to_string(), hash_hex(bytes_hash(&bytes)));
        }
        let hash = stable_hash(&json!({"command": command, "params": params, "inputs": hashes}));
        Ok(Artifact { command, params, inputs: hashes, seed, hash })
    }

    pub fn hash_hex(&self) -> String {
        hash_hex(self.hash)
    }

    /// First line of every CSV output.
    pub fn csv_comment(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("# rulemine {} config_hash={} seed={}\n", self.command, self.hash_hex(), seed)
    }

    /// JSON document with a provenance block plus `body`'s fields.
    pub fn json(&self, body: Value) -> Value {
        let mut doc = json!({
            "provenance": {
                "command": self.command,
                "config": self.params,
                "config_hash": self.hash_hex(),
                "inputs": self.inputs,
                "seed": self.seed,
            }
        });
        if let (Some(d), Value::Object(b)) = (doc.as_object_mut(), body) {
            d.extend(b);
        }
        doc
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    w.write_all(bytes).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, doc: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Write to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_games(path: &Path) -> Result<GameCorpus> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    GameCorpus::read(BufReader::new(f)).with_context(|| format!("{}", path.display()))
}

pub fn read_trace(path: &Path) -> Result<ActivationTrace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ActivationTrace::read(BufReader::new(f)).with_context(|| format!("{}", path.display()))
}

/// CSV writer over an in-memory buffer, preceded by the provenance comment.
pub struct CsvOut {
    writer: csv::Writer<Vec<u8>>,
    comment: String,
}

impl CsvOut {
    pub fn new(artifact: &Artifact, header: &[&str]) -> Result<CsvOut> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(CsvOut { writer, comment: artifact.csv_comment() })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.writer.write_record(fields)?)
    }

    pub fn finish(self) -> Result<String> {
        let body = self.writer.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(self.comment + &String::from_utf8(body)?)
    }
}

/// Optional float as a CSV field; empty when absent.
pub fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Parse a comma-separated list of floats.
pub fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("not a number: {t:?}"))))
        .collect()
}
