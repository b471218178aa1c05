//! Batched graph network: node embedding, one round of fully connected
//! message passing with mean aggregation, node and graph readouts.
//!
//! The first message layer acts on `[h_j, h_k]`, so it is split into a sender
//! and a receiver half and evaluated per node instead of per edge. The last
//! message layer is affine, so it is applied after averaging.

use rand::Rng;

use super::encode::NODE_DIM;
use crate::error::{Error, Result};
use crate::neural::{gemm, Activation, Matrix, Mlp, MlpCache};

pub const EMBED_WIDTHS: [usize; 2] = [32, 32];
pub const MESSAGE_WIDTHS: [usize; 3] = [128, 128, 128];
pub const NODE_WIDTHS: [usize; 2] = [64, NODE_DIM + 32];
pub const GRAPH_WIDTHS: [usize; 2] = [32, 1];
const EMBED: usize = 32;
const MSG: usize = 128;
const POOL: usize = 32;

/// Weight init bound is `sqrt(INIT_SCALE / fan_in)`. The usual ReLU bound
/// (scale 6) leaves these unnormalized inputs with outputs in the tens and
/// training stalls.
pub const INIT_SCALE: f64 = 2.0;

pub const LAMBDA_S: f64 = 100.0;
pub const LAMBDA_C: f64 = 1.0;

/// The four MLPs of an effect model.
#[derive(Clone, Debug, PartialEq)]
pub struct SemNets {
    pub embed: Mlp,
    pub message: Mlp,
    pub node: Mlp,
    pub graph: Mlp,
}

/// Several graphs stacked row-wise; `sizes[g]` nodes belong to graph `g`.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub x: Matrix,
    pub sizes: Vec<usize>,
}

impl GraphBatch {
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.sizes.len());
        let mut acc = 0;
        for &n in &self.sizes {
            o.push(acc);
            acc += n;
        }
        o
    }

    pub fn graphs(&self) -> usize {
        self.sizes.len()
    }
}

/// Per-node deltas `[N, S]` and per-graph costs.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutput {
    pub delta: Matrix,
    pub cost: Vec<f64>,
}

/// Intermediate values of a forward pass, consumed by [`SemNets::backward`].
#[derive(Default)]
pub struct GnnCache {
    sizes: Vec<usize>,
    embed: MlpCache,
    h: Option<Matrix>,
    a1: Option<Matrix>,
    z1: Option<Matrix>,
    a2: Option<Matrix>,
    mbar: Option<Matrix>,
    node: MlpCache,
    pooled: Option<Matrix>,
    graph: MlpCache,
}

fn take(m: &Option<Matrix>) -> Result<&Matrix> {
    m.as_ref().ok_or_else(|| Error::contract("backward called without a cached forward pass"))
}

impl SemNets {
    pub fn init<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        SemNets {
            embed: Mlp::init_scaled(input_dim, &EMBED_WIDTHS, Activation::Identity, INIT_SCALE, rng),
            message: Mlp::init_scaled(2 * EMBED, &MESSAGE_WIDTHS, Activation::Identity, INIT_SCALE, rng),
            node: Mlp::init_scaled(EMBED + MSG, &NODE_WIDTHS, Activation::Identity, INIT_SCALE, rng),
            graph: Mlp::init_scaled(POOL, &GRAPH_WIDTHS, Activation::Identity, INIT_SCALE, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        SemNets {
            embed: self.embed.zeros_like(),
            message: self.message.zeros_like(),
            node: self.node.zeros_like(),
            graph: self.graph.zeros_like(),
        }
    }

    pub fn zero(&mut self) {
        self.embed.zero();
        self.message.zero();
        self.node.zero();
        self.graph.zero();
    }

    pub fn param_count(&self) -> usize {
        [&self.embed, &self.message, &self.node, &self.graph].iter().map(|m| m.param_count()).sum()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.embed.param_slices();
        v.extend(self.message.param_slices());
        v.extend(self.node.param_slices());
        v.extend(self.graph.param_slices());
        v
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.embed.param_slices_mut();
        v.extend(self.message.param_slices_mut());
        v.extend(self.node.param_slices_mut());
        v.extend(self.graph.param_slices_mut());
        v
    }

    pub fn is_finite(&self) -> bool {
        self.embed.is_finite() && self.message.is_finite() && self.node.is_finite() && self.graph.is_finite()
    }

    pub fn forward(&self, batch: &GraphBatch) -> Result<BatchOutput> {
        self.forward_cached(batch, &mut GnnCache::default())
    }

    pub fn forward_cached(&self, batch: &GraphBatch, cache: &mut GnnCache) -> Result<BatchOutput> {
        let total: usize = batch.sizes.iter().sum();
        if total != batch.x.rows() {
            return Err(Error::contract(format!("batch sizes cover {total} nodes but input has {} rows", batch.x.rows())));
        }
        if batch.sizes.iter().any(|&n| n == 0) {
            return Err(Error::contract("every graph needs at least one node"));
        }
        let offsets = batch.offsets();
        let h = self.embed.forward_cached(&batch.x, &mut cache.embed)?;

        // First message layer, split by halves of the input.
        let l1 = &self.message.layers[0];
        let p = h.matmul_t(&l1.w.cols_range(0, EMBED));
        let mut q = h.matmul_t(&l1.w.cols_range(EMBED, 2 * EMBED));
        q.add_row(&l1.b);
        let edges: usize = batch.sizes.iter().map(|n| n * (n - 1)).sum();
        let mut a1 = Matrix::zeros(edges, MSG);
        let mut e = 0;
        for (&o, &n) in offsets.iter().zip(&batch.sizes) {
            for k in 0..n {
                let qk = q.row(o + k);
                for j in (0..n).filter(|&j| j != k) {
                    let pj = p.row(o + j);
                    for ((dst, a), b) in a1.row_mut(e).iter_mut().zip(pj).zip(qk) {
                        *dst = a + b;
                    }
                    e += 1;
                }
            }
        }
        let mut z1 = a1.clone();
        relu(&mut z1);
        let a2 = self.message.layers[1].forward(&z1);
        let mut z2 = a2.clone();
        relu(&mut z2);

        let mut mbar = Matrix::zeros(total, MSG);
        let mut e = 0;
        for (&o, &n) in offsets.iter().zip(&batch.sizes) {
            for k in 0..n {
                if n == 1 {
                    continue;
                }
                let inv = 1.0 / (n - 1) as f64;
                let dst = mbar.row_mut(o + k);
                for _ in 0..n - 1 {
                    for (d, v) in dst.iter_mut().zip(z2.row(e)) {
                        *d += v;
                    }
                    e += 1;
                }
                dst.iter_mut().for_each(|d| *d *= inv);
            }
        }
        let l3 = &self.message.layers[2];
        let mut m = mbar.matmul_t(&l3.w);
        for (&o, &n) in offsets.iter().zip(&batch.sizes) {
            if n > 1 {
                for k in 0..n {
                    for (d, b) in m.row_mut(o + k).iter_mut().zip(&l3.b) {
                        *d += b;
                    }
                }
            }
        }

        let u = Matrix::hcat(&h, &m);
        let out = self.node.forward_cached(&u, &mut cache.node)?;
        let delta = out.cols_range(0, NODE_DIM);
        let mut pooled = Matrix::zeros(batch.graphs(), POOL);
        for (g, (&o, &n)) in offsets.iter().zip(&batch.sizes).enumerate() {
            let dst = pooled.row_mut(g);
            for k in 0..n {
                for (d, v) in dst.iter_mut().zip(&out.row(o + k)[NODE_DIM..]) {
                    *d += v;
                }
            }
        }
        let cost = self.graph.forward_cached(&pooled, &mut cache.graph)?.into_vec();

        cache.sizes = batch.sizes.clone();
        cache.h = Some(h);
        cache.a1 = Some(a1);
        cache.z1 = Some(z1);
        cache.a2 = Some(a2);
        cache.mbar = Some(mbar);
        cache.pooled = Some(pooled);
        Ok(BatchOutput { delta, cost })
    }

    /// Accumulates gradients of a scalar loss given its gradients with respect
    /// to the outputs of the cached forward pass.
    pub fn backward(&self, cache: &GnnCache, d_delta: &Matrix, d_cost: &[f64], grads: &mut SemNets) -> Result<()> {
        let h = take(&cache.h)?;
        let (a1, z1, a2, mbar) = (take(&cache.a1)?, take(&cache.z1)?, take(&cache.a2)?, take(&cache.mbar)?);
        take(&cache.pooled)?;
        let sizes = &cache.sizes;
        let total = h.rows();
        if d_delta.shape() != (total, NODE_DIM) || d_cost.len() != sizes.len() {
            return Err(Error::contract("output gradient shapes do not match the cached batch"));
        }
        let offsets = GraphBatch { x: Matrix::zeros(0, 0), sizes: sizes.clone() }.offsets();

        let d_pooled = self.graph.backward(&cache.graph, Matrix::from_vec(sizes.len(), 1, d_cost.to_vec())?, &mut grads.graph)?;
        let mut d_out = Matrix::zeros(total, NODE_DIM + POOL);
        for (g, (&o, &n)) in offsets.iter().zip(sizes).enumerate() {
            for k in 0..n {
                let row = d_out.row_mut(o + k);
                row[..NODE_DIM].copy_from_slice(d_delta.row(o + k));
                row[NODE_DIM..].copy_from_slice(d_pooled.row(g));
            }
        }
        let d_u = self.node.backward(&cache.node, d_out, &mut grads.node)?;
        let mut d_h = d_u.cols_range(0, EMBED);
        let mut d_m = d_u.cols_range(EMBED, EMBED + MSG);
        for (&o, &n) in offsets.iter().zip(sizes) {
            if n == 1 {
                d_m.row_mut(o).fill(0.0);
            }
        }

        // Last message layer, applied to the mean.
        let l3 = &self.message.layers[2];
        gemm(1.0, &d_m, true, mbar, false, 1.0, &mut grads.message.layers[2].w);
        d_m.add_col_sums_to(&mut grads.message.layers[2].b);
        let d_mbar = d_m.matmul(&l3.w);

        let edges = a1.rows();
        let mut d_a2 = Matrix::zeros(edges, MSG);
        let mut e = 0;
        for (&o, &n) in offsets.iter().zip(sizes) {
            if n == 1 {
                continue;
            }
            let inv = 1.0 / (n - 1) as f64;
            for k in 0..n {
                let src = d_mbar.row(o + k);
                for _ in 0..n - 1 {
                    for ((d, s), a) in d_a2.row_mut(e).iter_mut().zip(src).zip(a2.row(e)) {
                        *d = if *a > 0.0 { s * inv } else { 0.0 };
                    }
                    e += 1;
                }
            }
        }
        let l2 = &self.message.layers[1];
        l2.accumulate_grads(z1, &d_a2, &mut grads.message.layers[1]);
        let mut d_a1 = l2.input_grad(&d_a2);
        for (d, a) in d_a1.as_mut_slice().iter_mut().zip(a1.as_slice()) {
            if *a <= 0.0 {
                *d = 0.0;
            }
        }

        let mut d_p = Matrix::zeros(total, MSG);
        let mut d_q = Matrix::zeros(total, MSG);
        let mut e = 0;
        for (&o, &n) in offsets.iter().zip(sizes) {
            for k in 0..n {
                for j in (0..n).filter(|&j| j != k) {
                    let src = d_a1.row(e);
                    for (d, s) in d_p.row_mut(o + j).iter_mut().zip(src) {
                        *d += s;
                    }
                    for (d, s) in d_q.row_mut(o + k).iter_mut().zip(src) {
                        *d += s;
                    }
                    e += 1;
                }
            }
        }
        let l1 = &self.message.layers[0];
        let mut dws = Matrix::zeros(MSG, EMBED);
        gemm(1.0, &d_p, true, h, false, 0.0, &mut dws);
        let mut dwr = Matrix::zeros(MSG, EMBED);
        gemm(1.0, &d_q, true, h, false, 0.0, &mut dwr);
        let gw = &mut grads.message.layers[0];
        for r in 0..MSG {
            let row = gw.w.row_mut(r);
            for (d, v) in row[..EMBED].iter_mut().zip(dws.row(r)) {
                *d += v;
            }
            for (d, v) in row[EMBED..].iter_mut().zip(dwr.row(r)) {
                *d += v;
            }
        }
        d_q.add_col_sums_to(&mut gw.b);
        gemm(1.0, &d_p, false, &l1.w.cols_range(0, EMBED), false, 1.0, &mut d_h);
        gemm(1.0, &d_q, false, &l1.w.cols_range(EMBED, 2 * EMBED), false, 1.0, &mut d_h);

        self.embed.backward(&cache.embed, d_h, &mut grads.embed)?;
        Ok(())
    }
}

fn relu(m: &mut Matrix) {
    m.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Per-graph targets matching a [`GraphBatch`].
#[derive(Clone, Debug)]
pub struct BatchTarget {
    pub delta: Matrix,
    pub cost: Vec<f64>,
}

/// Mean over graphs of `lc (c - c')^2 + ls / K * sum_k |ds_k - ds'_k|^2`, and
/// its gradients with respect to the predicted deltas and costs.
pub fn batch_loss(out: &BatchOutput, target: &BatchTarget, sizes: &[usize]) -> (f64, Matrix, Vec<f64>) {
    let b = sizes.len() as f64;
    let mut loss = 0.0;
    let mut d_delta = Matrix::zeros(out.delta.rows(), NODE_DIM);
    let mut d_cost = vec![0.0; sizes.len()];
    let mut o = 0;
    for (g, &n) in sizes.iter().enumerate() {
        let dc = out.cost[g] - target.cost[g];
        loss += LAMBDA_C * dc * dc;
        d_cost[g] = 2.0 * LAMBDA_C * dc / b;
        let w = LAMBDA_S / n as f64;
        for k in o..o + n {
            for ((d, p), t) in d_delta.row_mut(k).iter_mut().zip(out.delta.row(k)).zip(target.delta.row(k)) {
                let r = p - t;
                loss += w * r * r;
                *d = 2.0 * w * r / b;
            }
        }
        o += n;
    }
    (loss / b, d_delta, d_cost)
}
