use crate::error::{Error, Result};
use crate::neural::Matrix;
use crate::worldsim::{BlockFeature, SkillId, SkillParams, WorldState};

/// Per-block feature width: position, color pair, index pair.
pub const NODE_DIM: usize = 7;

pub fn node_features(b: &BlockFeature) -> [f64; NODE_DIM] {
    let [x, y, z] = b.position;
    let c = b.color as f64;
    let i = b.index as f64;
    [x, y, z, c, c + 1.0, i, i + 1.0]
}

/// Parameter encoding appended to every node.
pub fn theta_encoding(params: &SkillParams) -> Vec<f64> {
    match *params {
        SkillParams::PickPlace { block_index, place } => {
            let b = block_index as f64;
            vec![b, b + 1.0, place[0], place[1], place[2]]
        }
        SkillParams::TraySlide { bin_x } => vec![bin_x],
        SkillParams::TraySweep { start_x } => vec![start_x],
        SkillParams::BinTilt { angle_deg } => vec![angle_deg],
    }
}

pub fn input_dim(skill: SkillId) -> usize {
    NODE_DIM + skill.theta_dim()
}

/// Node feature rows `[s_k, enc(theta)]` for one graph.
pub fn encode_input(state: &WorldState, params: &SkillParams, skill: SkillId) -> Result<Matrix> {
    let mut m = Matrix::zeros(state.len(), input_dim(skill));
    write_rows(&mut m, 0, state, params, skill)?;
    Ok(m)
}

pub(crate) fn write_rows(m: &mut Matrix, offset: usize, state: &WorldState, params: &SkillParams, skill: SkillId) -> Result<()> {
    if params.skill() != skill {
        return Err(Error::contract(format!("{} parameters given to the {skill} model", params.skill())));
    }
    let theta = theta_encoding(params);
    for (k, b) in state.blocks.iter().enumerate() {
        let row = m.row_mut(offset + k);
        row[..NODE_DIM].copy_from_slice(&node_features(b));
        row[NODE_DIM..].copy_from_slice(&theta);
    }
    Ok(())
}

/// Per-node feature change `s_T - s_0`; the discrete channels are zero.
pub fn target_delta(x0: &WorldState, xt: &WorldState) -> Vec<[f64; NODE_DIM]> {
    x0.blocks
        .iter()
        .zip(&xt.blocks)
        .map(|(a, b)| {
            let fa = node_features(a);
            let fb = node_features(b);
            std::array::from_fn(|i| fb[i] - fa[i])
        })
        .collect()
}
