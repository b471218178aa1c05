use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encode::input_dim;
use super::gnn::{SemNets, EMBED_WIDTHS, GRAPH_WIDTHS, MESSAGE_WIDTHS, NODE_WIDTHS};
use super::{SemMeta, SemModel, DEFAULT_LR};
use crate::error::{Error, Result};
use crate::neural::{Activation, AdamState, DenseLayer, Matrix, Mlp};
use crate::worldsim::SkillId;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerJson {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Dims {
    input: usize,
    embed: Vec<usize>,
    message: Vec<usize>,
    node: Vec<usize>,
    graph: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Layers {
    embed: Vec<LayerJson>,
    message: Vec<LayerJson>,
    node: Vec<LayerJson>,
    graph: Vec<LayerJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointJson {
    schema_version: u32,
    skill: SkillId,
    dims: Dims,
    layers: Layers,
    #[serde(default)]
    adam: Option<AdamState>,
    meta: SemMeta,
}

fn layers_json(m: &Mlp) -> Vec<LayerJson> {
    m.layers.iter().map(|l| LayerJson { w: l.w.to_rows(), b: l.b.clone() }).collect()
}

fn mlp_from(name: &str, layers: Vec<LayerJson>, input: usize, widths: &[usize]) -> Result<Mlp> {
    if layers.len() != widths.len() {
        return Err(Error::Checkpoint(format!("{name}: expected {} layers, found {}", widths.len(), layers.len())));
    }
    let mut prev = input;
    let mut out = Vec::with_capacity(layers.len());
    for (i, (l, &w)) in layers.into_iter().zip(widths).enumerate() {
        let m = Matrix::from_rows(&l.w).map_err(|e| Error::Checkpoint(format!("{name} layer {i}: {e}")))?;
        if m.shape() != (w, prev) || l.b.len() != w {
            return Err(Error::Checkpoint(format!(
                "{name} layer {i}: expected weight {w}x{prev} and bias {w}, found {}x{} and {}",
                m.rows(),
                m.cols(),
                l.b.len()
            )));
        }
        let layer = DenseLayer::new(m, l.b)?;
        if !layer.is_finite() {
            return Err(Error::Checkpoint(format!("{name} layer {i} has non-finite values")));
        }
        out.push(layer);
        prev = w;
    }
    Mlp::new(out, Activation::Identity)
}

fn to_json(model: &SemModel) -> CheckpointJson {
    let n = &model.nets;
    CheckpointJson {
        schema_version: SCHEMA_VERSION,
        skill: model.skill,
        dims: Dims {
            input: n.embed.input_dim(),
            embed: n.embed.widths(),
            message: n.message.widths(),
            node: n.node.widths(),
            graph: n.graph.widths(),
        },
        layers: Layers {
            embed: layers_json(&n.embed),
            message: layers_json(&n.message),
            node: layers_json(&n.node),
            graph: layers_json(&n.graph),
        },
        adam: Some(model.adam.clone()),
        meta: model.meta.clone(),
    }
}

fn from_json(c: CheckpointJson) -> Result<SemModel> {
    if c.schema_version != SCHEMA_VERSION {
        return Err(Error::Checkpoint(format!("unsupported schema version {}", c.schema_version)));
    }
    let din = input_dim(c.skill);
    let d = &c.dims;
    if d.input != din || d.embed != EMBED_WIDTHS || d.message != MESSAGE_WIDTHS || d.node != NODE_WIDTHS || d.graph != GRAPH_WIDTHS {
        return Err(Error::Checkpoint(format!("dims do not match the {} architecture", c.skill)));
    }
    let nets = SemNets {
        embed: mlp_from("embed", c.layers.embed, din, &EMBED_WIDTHS)?,
        message: mlp_from("message", c.layers.message, 2 * EMBED_WIDTHS[1], &MESSAGE_WIDTHS)?,
        node: mlp_from("node", c.layers.node, EMBED_WIDTHS[1] + MESSAGE_WIDTHS[2], &NODE_WIDTHS)?,
        graph: mlp_from("graph", c.layers.graph, NODE_WIDTHS[1] - super::NODE_DIM, &GRAPH_WIDTHS)?,
    };
    let adam = match c.adam {
        Some(a) if a.len() == nets.param_count() && a.v.len() == a.m.len() => a,
        Some(_) => return Err(Error::Checkpoint("optimizer state does not match the parameter count".into())),
        None => AdamState::new(nets.param_count(), DEFAULT_LR),
    };
    Ok(SemModel { skill: c.skill, nets, adam, meta: c.meta })
}

impl SemModel {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&to_json(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<SemModel> {
        from_json(serde_json::from_str(s)?)
    }
}

pub fn save_checkpoint(model: &SemModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_json_string()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SemModel> {
    SemModel::from_json_str(&fs::read_to_string(path)?)
}
