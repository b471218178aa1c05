use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, m: &mut Matrix) {
        if self == Activation::Relu {
            m.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    /// Multiplies `grad` by the derivative at pre-activation `pre`.
    fn backprop(self, pre: &Matrix, grad: &mut Matrix) {
        if self == Activation::Relu {
            for (g, p) in grad.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if *p <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// Affine map `y = W x + b` with `W` of shape `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        DenseLayer { w: Matrix::zeros(output, input), b: vec![0.0; output] }
    }

    pub fn new(w: Matrix, b: Vec<f64>) -> Result<Self> {
        if w.rows() != b.len() {
            return Err(Error::contract(format!("weight has {} rows but bias has {} entries", w.rows(), b.len())));
        }
        Ok(DenseLayer { w, b })
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn param_count(&self) -> usize {
        self.w.as_slice().len() + self.b.len()
    }

    /// Row-wise affine map of a batch `[n, in] -> [n, out]`.
    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul_t(&self.w);
        y.add_row(&self.b);
        y
    }

    /// Accumulates parameter gradients for upstream gradient `dy` at input `x`.
    pub fn accumulate_grads(&self, x: &Matrix, dy: &Matrix, grad: &mut DenseLayer) {
        gemm(1.0, dy, true, x, false, 1.0, &mut grad.w);
        dy.add_col_sums_to(&mut grad.b);
    }

    /// Gradient with respect to the layer input.
    pub fn input_grad(&self, dy: &Matrix) -> Matrix {
        dy.matmul(&self.w)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.iter().all(|v| v.is_finite())
    }
}

/// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
pub fn init_layer<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> DenseLayer {
    init_layer_scaled(input, output, 6.0, rng)
}

/// Weights uniform in `±sqrt(scale / fan_in)`, biases zero.
pub fn init_layer_scaled<R: Rng + ?Sized>(input: usize, output: usize, scale: f64, rng: &mut R) -> DenseLayer {
    let bound = (scale / input.max(1) as f64).sqrt();
    let data = (0..input * output).map(|_| rng.gen_range(-bound..=bound)).collect();
    DenseLayer { w: Matrix::from_vec(output, input, data).expect("sized"), b: vec![0.0; output] }
}

/// Layers for consecutive `(input, output)` shapes, deterministic per seed.
pub fn init_params(shapes: &[(usize, usize)], seed: u64) -> Vec<DenseLayer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shapes.iter().map(|&(i, o)| init_layer(i, o, &mut rng)).collect()
}

/// Multilayer perceptron with ReLU between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub final_activation: Activation,
}

/// Activations saved by [`Mlp::forward_cached`] for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl MlpCache {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn clear(&mut self) {
        self.inputs.clear();
        self.pre.clear();
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>, final_activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::contract(format!(
                    "layer output {} does not feed next input {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Mlp { layers, final_activation })
    }

    /// Randomly initialized MLP mapping `input` through the given layer widths.
    pub fn init<R: Rng + ?Sized>(input: usize, widths: &[usize], final_activation: Activation, rng: &mut R) -> Self {
        Mlp::init_scaled(input, widths, final_activation, 6.0, rng)
    }

    /// Like [`Mlp::init`] with weights uniform in `±sqrt(scale / fan_in)`.
    pub fn init_scaled<R: Rng + ?Sized>(
        input: usize,
        widths: &[usize],
        final_activation: Activation,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input;
        for &w in widths {
            layers.push(init_layer_scaled(prev, w, scale, rng));
            prev = w;
        }
        Mlp::new(layers, final_activation).expect("chained by construction")
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(DenseLayer::output_dim).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.final_activation
        } else {
            Activation::Relu
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::contract(format!("MLP expects {} inputs, got {}", self.input_dim(), x.cols())));
        }
        Ok(())
    }

    /// Batched forward pass over the rows of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h);
            self.activation(i).apply(&mut h);
        }
        Ok(h)
    }

    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(&Matrix::from_vec(1, x.len(), x.to_vec())?)?.into_vec())
    }

    /// Forward pass that records what [`Mlp::backward`] needs.
    pub fn forward_cached(&self, x: &Matrix, cache: &mut MlpCache) -> Result<Matrix> {
        self.check_input(x)?;
        cache.clear();
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let pre = l.forward(&h);
            cache.inputs.push(h);
            let mut out = pre.clone();
            self.activation(i).apply(&mut out);
            cache.pre.push(pre);
            h = out;
        }
        Ok(h)
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(&self, cache: &MlpCache, dy: Matrix, grads: &mut Mlp) -> Result<Matrix> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::contract("backward called without a cached forward pass"));
        }
        let mut g = dy;
        for i in (0..self.layers.len()).rev() {
            self.activation(i).backprop(&cache.pre[i], &mut g);
            self.layers[i].accumulate_grads(&cache.inputs[i], &g, &mut grads.layers[i]);
            g = self.layers[i].input_grad(&g);
        }
        Ok(g)
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self.layers.iter().map(|l| DenseLayer::zeros(l.input_dim(), l.output_dim())).collect(),
            final_activation: self.final_activation,
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
    }

    /// Weight and bias buffers in a fixed order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()]).collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_output_bias() {
        let l = DenseLayer::new(Matrix::zeros(2, 3), vec![0.5, -1.0]).unwrap();
        let m = Mlp::new(vec![l], Activation::Identity).unwrap();
        assert_eq!(m.forward_vec(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5, -1.0]);
    }

    #[test]
    fn identity_relu() {
        let mut w = Matrix::zeros(3, 3);
        for i in 0..3 {
            w.set(i, i, 1.0);
        }
        let m = Mlp::new(vec![DenseLayer::new(w, vec![0.0; 3]).unwrap()], Activation::Relu).unwrap();
        assert_eq!(m.forward_vec(&[-1.0, 0.5, 2.0]).unwrap(), vec![0.0, 0.5, 2.0]);
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let m = Mlp::init(3, &[4, 2], Activation::Identity, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(m.forward_vec(&[1.0, 2.0]), Err(Error::Contract(_))));
        assert!(Mlp::new(vec![DenseLayer::zeros(3, 4), DenseLayer::zeros(5, 1)], Activation::Identity).is_err());
    }

    #[test]
    fn backward_without_forward_fails() {
        let m = Mlp::init(3, &[2], Activation::Identity, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = m.zeros_like();
        let r = m.backward(&MlpCache::default(), Matrix::zeros(1, 2), &mut g);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn least_squares_closed_form() {
        // loss = 0.5 |Wx - y|^2  =>  dW = (Wx - y) x^T
        let m = Mlp::init(3, &[2], Activation::Identity, &mut ChaCha8Rng::seed_from_u64(5));
        let x = Matrix::from_vec(1, 3, vec![0.3, -0.7, 1.1]).unwrap();
        let y = [0.2, -0.4];
        let mut cache = MlpCache::default();
        let out = m.forward_cached(&x, &mut cache).unwrap();
        let r: Vec<f64> = out.as_slice().iter().zip(y).map(|(o, t)| o - t).collect();
        let mut g = m.zeros_like();
        m.backward(&cache, Matrix::from_vec(1, 2, r.clone()).unwrap(), &mut g).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((g.layers[0].w.get(i, j) - r[i] * x.get(0, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn relu_gradient_zero_for_negative_preactivation() {
        let w = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let m = Mlp::new(vec![DenseLayer::new(w, vec![0.0]).unwrap()], Activation::Relu).unwrap();
        let mut cache = MlpCache::default();
        m.forward_cached(&Matrix::from_vec(1, 1, vec![-2.0]).unwrap(), &mut cache).unwrap();
        let mut g = m.zeros_like();
        let dx = m.backward(&cache, Matrix::from_vec(1, 1, vec![1.0]).unwrap(), &mut g).unwrap();
        assert_eq!(dx.get(0, 0), 0.0);
        assert_eq!(g.layers[0].w.get(0, 0), 0.0);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_params(&[(6, 16), (16, 4)], 3);
        assert_eq!(a, init_params(&[(6, 16), (16, 4)], 3));
        assert_ne!(a, init_params(&[(6, 16), (16, 4)], 4));
        assert!(a[0].w.as_slice().iter().all(|v| v.abs() <= 1.0));
        assert!(a[0].b.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_mean_near_zero() {
        let l = &init_params(&[(100, 1000)], 11)[0];
        let mean = l.w.as_slice().iter().sum::<f64>() / l.w.as_slice().len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
    }
}
