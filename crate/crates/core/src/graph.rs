//! Static graph export and token encoding.
//!
//! A model spec is exported as an ONNX-shaped JSON node list. Each node
//! contributes the tokens of its `input`, `name`, `opType` and `output`
//! fields, in that order, to the document's token stream. A [`Vocab`] fitted
//! on a corpus of such streams maps tokens to integer ids.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, ModelSpec};

/// Id reserved for right-padding.
pub const PAD_ID: u32 = 0;
/// Id for tokens not seen when the vocabulary was fitted.
pub const OOV_ID: u32 = 1;
pub const OOV_TOKEN: &str = "__oov__";
const FIRST_ID: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub input: Vec<String>,
    pub name: String,
    #[serde(rename = "opType")]
    pub op_type: String,
    pub output: Vec<String>,
}

/// Topologically ordered node list.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<GraphNode>,
}

impl GraphDoc {
    /// Flattened `input, name, opType, output` stream over all nodes.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for n in &self.nodes {
            out.extend(n.input.iter().map(String::as_str));
            out.push(n.name.as_str());
            out.push(n.op_type.as_str());
            out.extend(n.output.iter().map(String::as_str));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("graph document", e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// True when every node reads only graph inputs or earlier outputs.
    pub fn is_topological(&self, graph_inputs: &[&str]) -> bool {
        let mut known: Vec<&str> = graph_inputs.to_vec();
        for n in &self.nodes {
            if !n.input.iter().all(|i| known.contains(&i.as_str())) {
                return false;
            }
            known.extend(n.output.iter().map(String::as_str));
        }
        true
    }
}

fn op_type(layer: &LayerSpec) -> Option<&'static str> {
    Some(match layer {
        LayerSpec::Dense { .. } | LayerSpec::TimeDistributedDense { .. } => "Gemm",
        LayerSpec::Conv2d { .. } => "Conv",
        LayerSpec::MaxPool2d { .. } => "MaxPool",
        LayerSpec::Flatten => "Flatten",
        LayerSpec::Dropout { .. } => "Dropout",
        LayerSpec::BatchNorm => "BatchNormalization",
        LayerSpec::Embedding { .. } => "Gather",
        LayerSpec::Lstm { .. } => "LSTM",
        LayerSpec::Concatenate => "Concat",
        LayerSpec::RepeatVector { .. } => "Tile",
        LayerSpec::Activation { .. } => return None,
    })
}

fn activation_op(act: Activation) -> Option<&'static str> {
    match act {
        Activation::None => None,
        Activation::Linear => Some("Identity"),
        Activation::Relu => Some("Relu"),
        Activation::Sigmoid => Some("Sigmoid"),
        Activation::Tanh => Some("Tanh"),
        Activation::Softmax => Some("Softmax"),
    }
}

/// One node per layer, followed by a separate activation node when the
/// layer carries an activation other than `none`. Layer nodes are named
/// `{kind}_{index}`, activation nodes `{activation}_{index}`. The graph input
/// is `x`; every node output is a fresh `h{j}`.
pub fn export_graph(spec: &ModelSpec) -> GraphDoc {
    let mut nodes = Vec::new();
    let mut current = "x".to_string();
    let mut next = 0usize;
    let mut fresh = || {
        let s = format!("h{next}");
        next += 1;
        s
    };
    for (i, layer) in spec.layers.iter().enumerate() {
        if let Some(op) = op_type(layer) {
            let out = fresh();
            nodes.push(GraphNode {
                input: vec![current.clone()],
                name: format!("{}_{i}", layer.kind_name()),
                op_type: op.to_string(),
                output: vec![out.clone()],
            });
            current = out;
        }
        if let Some(op) = layer.activation().and_then(activation_op) {
            let out = fresh();
            let act = layer.activation().unwrap_or_default();
            nodes.push(GraphNode {
                input: vec![current.clone()],
                name: format!("{}_{i}", act.name()),
                op_type: op.to_string(),
                output: vec![out.clone()],
            });
            current = out;
        }
    }
    GraphDoc { nodes }
}

/// Token-to-id map. Ids are assigned in first-occurrence order starting at
/// 2; 0 is padding and 1 is the out-of-vocabulary id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    /// Fits on the token streams of `docs` in order.
    pub fn fit(docs: &[GraphDoc]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Empty("cannot fit a vocabulary on zero documents"));
        }
        let mut v = Vocab::default();
        for doc in docs {
            for tok in doc.tokens() {
                v.insert(tok);
            }
        }
        Ok(v)
    }

    fn insert(&mut self, tok: &str) {
        if !self.ids.contains_key(tok) {
            let id = FIRST_ID + self.tokens.len() as u32;
            self.ids.insert(tok.to_string(), id);
            self.tokens.push(tok.to_string());
        }
    }

    /// Number of distinct ids including padding and OOV; the embedding size.
    pub fn size(&self) -> usize {
        self.tokens.len() + FIRST_ID as usize
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        match id {
            PAD_ID => None,
            OOV_ID => Some(OOV_TOKEN),
            _ => self.tokens.get((id - FIRST_ID) as usize).map(String::as_str),
        }
    }

    pub fn encode(&self, doc: &GraphDoc) -> Vec<u32> {
        doc.tokens().into_iter().map(|t| self.id(t)).collect()
    }

    /// Maps ids back to tokens, stopping at the first pad.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != PAD_ID)
            .map(|&id| self.token(id).unwrap_or(OOV_TOKEN).to_string())
            .collect()
    }

    /// `{"<token>": id, ..., "__oov__": 1}` with keys sorted.
    pub fn to_json(&self) -> String {
        let mut map: serde_json::Map<String, serde_json::Value> = self
            .tokens
            .iter()
            .map(|t| (t.clone(), self.ids[t].into()))
            .collect();
        map.insert(OOV_TOKEN.to_string(), OOV_ID.into());
        serde_json::to_string_pretty(&map).expect("vocab serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: HashMap<String, u32> =
            serde_json::from_str(text).map_err(|e| Error::json("vocabulary", e))?;
        let mut pairs: Vec<(u32, String)> = map
            .into_iter()
            .filter(|(t, _)| t != OOV_TOKEN)
            .map(|(t, id)| (id, t))
            .collect();
        pairs.sort();
        let mut v = Vocab::default();
        for (k, (id, tok)) in pairs.into_iter().enumerate() {
            if id != FIRST_ID + k as u32 {
                return Err(Error::Config(format!(
                    "vocabulary ids must be contiguous from {FIRST_ID}; token {tok:?} has id {id}"
                )));
            }
            v.insert(&tok);
        }
        Ok(v)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Fixed-length id sequence; zeros only as a suffix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("token sequence serializes")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Right-pads `ids` with zeros to `len`.
pub fn pad(ids: &[u32], len: usize) -> Result<TokenSequence> {
    if ids.len() > len {
        return Err(Error::SequenceOverflow { len: ids.len(), max: len });
    }
    let mut out = ids.to_vec();
    out.resize(len, PAD_ID);
    Ok(TokenSequence { ids: out })
}

pub fn encode_and_pad(doc: &GraphDoc, vocab: &Vocab, len: usize) -> Result<TokenSequence> {
    pad(&vocab.encode(doc), len)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &[&str]) -> GraphDoc {
        GraphDoc {
            nodes: vec![GraphNode {
                input: vec![],
                name: tokens[0].into(),
                op_type: tokens[1].into(),
                output: tokens[2..].iter().map(|s| s.to_string()).collect(),
            }],
        }
    }

    #[test]
    fn first_occurrence_order_after_reserved_ids() {
        let v = Vocab::fit(&[doc(&["a", "b", "a"])]).unwrap();
        assert_eq!((v.id("a"), v.id("b")), (2, 3));
        assert_eq!(v.id("zzz"), OOV_ID);
        assert_eq!(v.size(), 4);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(Vocab::fit(&[]).is_err());
    }

    #[test]
    fn padding_rules() {
        assert_eq!(pad(&[5, 3], 4).unwrap().ids, vec![5, 3, 0, 0]);
        assert_eq!(pad(&[5, 3], 2).unwrap().ids, vec![5, 3]);
        match pad(&[5, 3, 1], 2) {
            Err(Error::SequenceOverflow { len, max }) => assert_eq!((len, max), (3, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vocab_json_round_trip() {
        let v = Vocab::fit(&[doc(&["x", "y", "z"]), doc(&["z", "w", "v"])]).unwrap();
        let text = v.to_json();
        assert!(text.contains("\"__oov__\": 1"));
        let back = Vocab::from_json(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
    }
}
