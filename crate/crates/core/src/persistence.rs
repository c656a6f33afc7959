//! Versioned JSON model documents.
//!
//! Documents are rendered through `serde_json::Value`, whose object map keeps
//! keys sorted, so one model always produces the same bytes. Floats are
//! written with shortest round-trip formatting and parsed back exactly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cart::TreeNode;
use crate::error::{Error, Result};
use crate::leaf_models::LeafModel;
use crate::pipeline::SegmentedModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub model: SegmentedModel,
}

pub fn to_bytes(model: &SegmentedModel) -> Result<Vec<u8>> {
    let doc = ModelDocument {
        schema_version: SCHEMA_VERSION,
        model: model.clone(),
    };
    let value = serde_json::to_value(&doc)?;
    let mut bytes = serde_json::to_vec_pretty(&value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses and validates a document.
pub fn from_bytes(bytes: &[u8]) -> Result<SegmentedModel> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    de.disable_recursion_limit();
    let value = Value::deserialize(&mut de)?;
    de.end()?;

    let version = value
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Document("missing schema_version".into()))?;
    if version != u64::from(SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            supported: SCHEMA_VERSION,
        });
    }
    let doc = ModelDocument::deserialize(value)?;
    let mut model = doc.model;
    validate(&mut model)?;
    Ok(model)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_model(model: &SegmentedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(model)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("model");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SegmentedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Document(msg.into())
}

fn collect_leaves<'a>(node: &'a TreeNode, out: &mut Vec<&'a crate::cart::Leaf>) -> Result<()> {
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        match n {
            TreeNode::Leaf(leaf) => out.push(leaf),
            TreeNode::Internal { rule, left, right, .. } => {
                if !rule.threshold.is_finite() {
                    return Err(bad("non-finite split threshold"));
                }
                stack.push(right);
                stack.push(left);
            }
        }
    }
    Ok(())
}

/// Re-checks the structural invariants of a deserialised model and rebuilds
/// the GP factorisations.
fn validate(model: &mut SegmentedModel) -> Result<()> {
    model.config.validate()?;
    let d = model.tree.feature_names.len();
    let mut leaves = Vec::new();
    collect_leaves(&model.tree.root, &mut leaves)?;
    if leaves.len() != model.tree.n_leaves || leaves.len() != model.segments.len() {
        return Err(bad(format!(
            "tree has {} leaves, header says {}, {} segment models",
            leaves.len(),
            model.tree.n_leaves,
            model.segments.len()
        )));
    }
    let mut seen = vec![false; leaves.len()];
    for leaf in &leaves {
        match seen.get_mut(leaf.segment_id) {
            Some(s) if !*s => *s = true,
            _ => return Err(bad(format!("invalid or duplicate segment id {}", leaf.segment_id))),
        }
    }
    for (i, seg) in model.segments.iter_mut().enumerate() {
        if seg.segment_id != i {
            return Err(bad(format!("segment {i} stored out of order")));
        }
        if let Some(s) = &seg.scaler {
            if s.mean.len() != d || s.std.len() != d {
                return Err(bad(format!("segment {i}: scaler dimension")));
            }
        }
        match &mut seg.model {
            LeafModel::Constant(c) if !c.mean.is_finite() => return Err(bad(format!("segment {i}: mean"))),
            LeafModel::Constant(_) => {}
            LeafModel::Linear(l) => {
                if l.weights.len() != d || seg.scaler.is_none() {
                    return Err(bad(format!("segment {i}: linear model dimension")));
                }
            }
            LeafModel::Gp(g) => {
                if g.n_features != d
                    || g.inputs.len() != g.alpha.len() * d
                    || g.alpha.is_empty()
                    || seg.scaler.is_none()
                {
                    return Err(bad(format!("segment {i}: gp model dimension")));
                }
                g.refactor()?;
            }
        }
    }
    Ok(())
}
