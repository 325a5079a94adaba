//! Binary checkpoint: a magic line, a length-prefixed JSON header and the
//! flat little-endian f64 state vector.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, ClassifierSpec, InputShape};
use super::Localizer;
use crate::error::{Error, Result};
use crate::graph::Vocab;
use crate::probe::ProbeConfig;

pub const MAGIC: &[u8; 9] = b"D4DCKPT1\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub spec: ClassifierSpec,
    pub input: InputShape,
    pub max_layers: usize,
    pub probe: ProbeConfig,
    pub vocab: serde_json::Value,
    pub vocab_sha256: String,
    pub param_count: usize,
}

pub fn to_bytes(loc: &Localizer) -> Vec<u8> {
    let state = loc.classifier.state_vector();
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        spec: *loc.classifier.spec(),
        input: *loc.classifier.input_shape(),
        max_layers: loc.max_layers,
        probe: loc.probe,
        vocab: serde_json::from_str(&loc.vocab.to_json()).expect("vocab JSON"),
        vocab_sha256: loc.vocab.hash(),
        param_count: state.len(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + 8 * state.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in state {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::IncompatibleCheckpoint(msg.into())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Localizer> {
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| {
        let seen = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
        bad(format!(
            "expected format D4DCKPT1 (version {FORMAT_VERSION}), found '{}'",
            String::from_utf8_lossy(&seen[..seen.len().min(16)])
        ))
    })?;
    let mut rest = rest;
    let mut len = [0u8; 8];
    rest.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
    let len = u64::from_le_bytes(len) as usize;
    if rest.len() < len {
        return Err(bad("truncated header"));
    }
    let (json, block) = rest.split_at(len);
    let header: CheckpointHeader = serde_json::from_slice(json).map_err(|e| bad(format!("malformed header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("format version {} is not supported (expected {FORMAT_VERSION})", header.format_version)));
    }
    let vocab = Vocab::from_json(&header.vocab.to_string())?;
    if vocab.hash() != header.vocab_sha256 {
        return Err(bad("vocabulary hash does not match the stored vocabulary"));
    }
    if block.len() != 8 * header.param_count {
        return Err(bad(format!("parameter block holds {} bytes, header declares {} values", block.len(), header.param_count)));
    }
    let state: Vec<f64> = block.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mut classifier = Classifier::build(header.spec, header.input, 0)?;
    classifier.load_state_vector(&state)?;
    Ok(Localizer { classifier, vocab, max_layers: header.max_layers, probe: header.probe })
}

pub fn save(loc: &Localizer, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&to_bytes(loc)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Localizer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::IncompatibleCheckpoint(m) => Error::IncompatibleCheckpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
