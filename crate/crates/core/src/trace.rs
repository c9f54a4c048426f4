//! `OTRC` activation traces: feature vectors paired with per-neuron
//! activations, one fixed-stride row per game position.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header  magic "OTRC" | version u16 = 1 | layer_id u16 | n_positions u64
//!         | n_neurons u32 | reserved u32 = 0                      (24 bytes)
//! row     game_id u32 | move_index u8 | features [u8; 40] | activations f32 * n_neurons
//! ```

use std::collections::HashSet;
use std::io::{self, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::othello::{FeatureVector, FeatureViolation, GameRecord, OthelloError, GAME_LENGTH};

pub const TRACE_MAGIC: [u8; 4] = *b"OTRC";
pub const TRACE_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"OTRC\"")]
    BadMagic([u8; 4]),
    #[error("unsupported trace version {0}")]
    UnsupportedVersion(u16),
    #[error("row {row}: {msg}")]
    CorruptRow { row: u64, msg: String },
    #[error("row {row}: {violation}")]
    InvariantViolation { row: u64, violation: FeatureViolation },
    #[error("game replay failed: {0}")]
    Replay(#[from] OthelloError),
}

/// Identifies a position: the board after move `move_index` of game `game_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PositionKey {
    pub game_id: u32,
    pub move_index: u8,
}

/// In-memory trace. Activations are row-major, `n_neurons` per position.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layer_id: u16,
    pub n_neurons: u32,
    pub keys: Vec<PositionKey>,
    pub features: Vec<FeatureVector>,
    pub activations: Vec<f32>,
}

impl ActivationTrace {
    pub fn empty(layer_id: u16, n_neurons: u32) -> Self {
        ActivationTrace {
            layer_id,
            n_neurons,
            keys: Vec::new(),
            features: Vec::new(),
            activations: Vec::new(),
        }
    }

    pub fn n_positions(&self) -> usize {
        self.keys.len()
    }

    pub fn row_len(&self) -> usize {
        row_len(self.n_neurons)
    }

    pub fn row_activations(&self, row: usize) -> &[f32] {
        let n = self.n_neurons as usize;
        &self.activations[row * n..(row + 1) * n]
    }

    /// Activations of one neuron across all positions.
    pub fn neuron_column(&self, neuron: usize) -> Vec<f32> {
        let n = self.n_neurons as usize;
        assert!(neuron < n, "neuron {neuron} out of range ({n})");
        self.activations.iter().skip(neuron).step_by(n).copied().collect()
    }

    /// Check every invariant; row numbers in errors are 0-based.
    pub fn validate(&self) -> Result<(), TraceError> {
        let n = self.n_neurons as usize;
        if self.features.len() != self.keys.len() || self.activations.len() != self.keys.len() * n {
            return Err(TraceError::CorruptRow {
                row: 0,
                msg: "inconsistent column lengths".into(),
            });
        }
        let mut seen = HashSet::with_capacity(self.keys.len());
        for (row, (key, f)) in self.keys.iter().zip(&self.features).enumerate() {
            check_row(row as u64, key, f, self.row_activations(row))?;
            if !seen.insert(*key) {
                return Err(TraceError::CorruptRow {
                    row: row as u64,
                    msg: format!(
                        "duplicate position (game {}, move {})",
                        key.game_id, key.move_index
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.n_positions() * self.row_len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Write the canonical layout; returns the number of bytes written.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<usize> {
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(&TRACE_MAGIC);
        header[4..6].copy_from_slice(&TRACE_VERSION.to_le_bytes());
        header[6..8].copy_from_slice(&self.layer_id.to_le_bytes());
        header[8..16].copy_from_slice(&(self.n_positions() as u64).to_le_bytes());
        header[16..20].copy_from_slice(&self.n_neurons.to_le_bytes());
        w.write_all(&header)?;
        let mut row = Vec::with_capacity(self.row_len());
        for (i, (key, f)) in self.keys.iter().zip(&self.features).enumerate() {
            row.clear();
            row.extend_from_slice(&key.game_id.to_le_bytes());
            row.push(key.move_index);
            row.extend_from_slice(&f.to_bytes());
            for a in self.row_activations(i) {
                row.extend_from_slice(&a.to_le_bytes());
            }
            w.write_all(&row)?;
        }
        Ok(self.encoded_len())
    }

    /// Read and fully validate a trace.
    pub fn read<R: Read>(mut r: R) -> Result<ActivationTrace, TraceError> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        let magic: [u8; 4] = header[0..4].try_into().expect("4 bytes");
        if magic != TRACE_MAGIC {
            return Err(TraceError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != TRACE_VERSION {
            return Err(TraceError::UnsupportedVersion(version));
        }
        let layer_id = u16::from_le_bytes([header[6], header[7]]);
        let n_positions = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
        let n_neurons = u32::from_le_bytes(header[16..20].try_into().expect("4 bytes"));

        let mut trace = ActivationTrace::empty(layer_id, n_neurons);
        let mut buf = vec![0u8; row_len(n_neurons)];
        let mut seen = HashSet::new();
        for row in 0..n_positions {
            read_row(&mut r, &mut buf).map_err(|e| TraceError::CorruptRow {
                row,
                msg: format!("truncated: {e}"),
            })?;
            let key = PositionKey {
                game_id: u32::from_le_bytes(buf[0..4].try_into().expect("4 bytes")),
                move_index: buf[4],
            };
            let f = FeatureVector::from_bytes(buf[5..45].try_into().expect("40 bytes"));
            let start = trace.activations.len();
            trace.activations.extend(
                buf[45..]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))),
            );
            check_row(row, &key, &f, &trace.activations[start..])?;
            if !seen.insert(key) {
                return Err(TraceError::CorruptRow {
                    row,
                    msg: format!(
                        "duplicate position (game {}, move {})",
                        key.game_id, key.move_index
                    ),
                });
            }
            trace.keys.push(key);
            trace.features.push(f);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(TraceError::CorruptRow {
                row: n_positions,
                msg: "trailing bytes after last row".into(),
            });
        }
        Ok(trace)
    }
}

fn read_row<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<()> {
    r.read_exact(buf)
}

pub fn row_len(n_neurons: u32) -> usize {
    4 + 1 + 40 + 4 * n_neurons as usize
}

fn check_row(
    row: u64,
    key: &PositionKey,
    f: &FeatureVector,
    acts: &[f32],
) -> Result<(), TraceError> {
    if key.move_index as usize >= GAME_LENGTH {
        return Err(TraceError::CorruptRow {
            row,
            msg: format!("move_index {} out of range", key.move_index),
        });
    }
    f.validate()
        .map_err(|violation| TraceError::InvariantViolation { row, violation })?;
    if let Some(j) = acts.iter().position(|a| !a.is_finite()) {
        return Err(TraceError::CorruptRow {
            row,
            msg: format!("non-finite activation for neuron {j}"),
        });
    }
    Ok(())
}

/// Something that produces a neuron activation for a position.
pub trait NeuronModel: Sync {
    fn activation(&self, features: &FeatureVector, key: PositionKey) -> f32;
}

impl<F> NeuronModel for F
where
    F: Fn(&FeatureVector, PositionKey) -> f32 + Sync,
{
    fn activation(&self, features: &FeatureVector, key: PositionKey) -> f32 {
        self(features, key)
    }
}

/// Featurize every position of `games` (game id = index) and evaluate each
/// model on it.
pub fn synthesize_trace<M: NeuronModel>(
    games: &[GameRecord],
    models: &[M],
    layer_id: u16,
) -> Result<ActivationTrace, TraceError> {
    let mut trace = ActivationTrace::empty(layer_id, models.len() as u32);
    for (gid, game) in games.iter().enumerate() {
        for (mi, f) in game.features()?.into_iter().enumerate() {
            trace.keys.push(PositionKey { game_id: gid as u32, move_index: mi as u8 });
            trace.features.push(f);
        }
    }
    let n = models.len();
    let mut acts = vec![0f32; trace.keys.len() * n];
    acts.par_chunks_mut(n.max(1))
        .zip(trace.keys.par_iter().zip(trace.features.par_iter()))
        .for_each(|(row, (key, f))| {
            for (slot, m) in row.iter_mut().zip(models) {
                *slot = m.activation(f, *key);
            }
        });
    if n > 0 {
        trace.activations = acts;
    }
    Ok(trace)
}
