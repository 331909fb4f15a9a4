//! Model file: one JSON object with dimensions, provenance and the flattened
//! row-major weights of each layer. Floats use shortest round-trip decimal
//! notation, so parameters survive a write/read cycle bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InitSpec, LayerParams, Mlp};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const MODEL_FORMAT_VERSION: u64 = 1;

/// Top-level keys in the order they are written.
const SECTIONS: [&str; 9] = [
    "format_version",
    "network_id",
    "input_dim",
    "hidden_widths",
    "output_dim",
    "init",
    "training_seed",
    "provenance",
    "layers",
];

/// Where a constructed network came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionProvenance {
    pub recipe: String,
    pub source_network_id: String,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub pad_seed: Option<u64>,
    #[serde(default)]
    pub detail: Option<String>,
}

/// Everything in a model file besides the parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelMeta {
    pub network_id: String,
    pub init: Option<InitSpec>,
    pub training_seed: Option<u64>,
    pub provenance: Option<ConstructionProvenance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    format_version: u64,
    network_id: String,
    input_dim: usize,
    hidden_widths: Vec<usize>,
    output_dim: usize,
    init: Option<InitSpec>,
    training_seed: Option<u64>,
    provenance: Option<ConstructionProvenance>,
    layers: Vec<LayerRepr>,
}

pub fn serialize(net: &Mlp, meta: &ModelMeta) -> String {
    let repr = ModelRepr {
        format_version: MODEL_FORMAT_VERSION,
        network_id: meta.network_id.clone(),
        input_dim: net.input_dim(),
        hidden_widths: net.hidden_widths(),
        output_dim: net.output_dim(),
        init: meta.init,
        training_seed: meta.training_seed,
        provenance: meta.provenance.clone(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerRepr {
                out_dim: l.out_dim(),
                in_dim: l.in_dim(),
                weights: l.weights.as_slice().to_vec(),
                biases: l.biases.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&repr).expect("model serialization cannot fail");
    text.push('\n');
    text
}

fn truncation_report(text: &str) -> String {
    match SECTIONS.iter().position(|key| !text.contains(&format!("\"{key}\""))) {
        Some(0) => "missing section `format_version`".to_string(),
        Some(i) => format!(
            "section `{}` is incomplete; missing section `{}`",
            SECTIONS[i - 1],
            SECTIONS[i]
        ),
        None => format!("section `{}` is incomplete", SECTIONS[SECTIONS.len() - 1]),
    }
}

pub fn deserialize(text: &str) -> Result<(Mlp, ModelMeta)> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            Error::Truncated(truncation_report(text))
        } else {
            Error::Malformed {
                what: "model file",
                detail: e.to_string(),
            }
        }
    })?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Malformed {
            what: "model file",
            detail: "missing section `format_version`".into(),
        })?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    if let Some(key) = SECTIONS.iter().find(|k| value.get(**k).is_none()) {
        return Err(Error::Malformed {
            what: "model file",
            detail: format!("missing section `{key}`"),
        });
    }
    let repr: ModelRepr = serde_json::from_value(value).map_err(|e| Error::Malformed {
        what: "model file",
        detail: e.to_string(),
    })?;

    let mut layers = Vec::with_capacity(repr.layers.len());
    for (i, l) in repr.layers.into_iter().enumerate() {
        let weights = DenseMatrix::new(l.out_dim, l.in_dim, l.weights).map_err(|e| Error::Malformed {
            what: "model file",
            detail: format!("layer {i}: {e}"),
        })?;
        layers.push(LayerParams::new(weights, l.biases)?);
    }
    let net = Mlp::new(layers)?;
    if net.input_dim() != repr.input_dim
        || net.output_dim() != repr.output_dim
        || net.hidden_widths() != repr.hidden_widths
    {
        return Err(Error::Malformed {
            what: "model file",
            detail: "declared dimensions disagree with layer shapes".into(),
        });
    }
    if let Some(init) = &repr.init {
        init.validate()?;
    }
    Ok((
        net,
        ModelMeta {
            network_id: repr.network_id,
            init: repr.init,
            training_seed: repr.training_seed,
            provenance: repr.provenance,
        },
    ))
}

pub fn write_model(path: &Path, net: &Mlp, meta: &ModelMeta) -> Result<()> {
    std::fs::write(path, serialize(net, meta))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(Mlp, ModelMeta)> {
    deserialize(&std::fs::read_to_string(path)?)
}
