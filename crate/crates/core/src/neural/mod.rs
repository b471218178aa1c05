//! Small dense numerics: matrices, MLPs with hand-written backprop, Adam.

mod adam;
mod matrix;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use matrix::{gemm, Matrix};
pub use mlp::{init_layer, init_layer_scaled, init_params, Activation, DenseLayer, Mlp, MlpCache};

#[cfg(test)]
mod gradcheck {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 0.5 * sum((mlp(x) - y)^2)
    fn loss(m: &Mlp, x: &Matrix, y: &Matrix) -> f64 {
        let out = m.forward(x).unwrap();
        out.as_slice().iter().zip(y.as_slice()).map(|(o, t)| 0.5 * (o - t).powi(2)).sum()
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn finite_differences_agree() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let depth = rng.gen_range(1..=3);
            let input = rng.gen_range(1..=8);
            let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=64)).collect();
            let act = if seed % 2 == 0 { Activation::Identity } else { Activation::Relu };
            let mut m = Mlp::init(input, &widths, act, &mut rng);
            for l in &mut m.layers {
                l.b.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
            }
            let x = random(4, input, &mut rng);
            let y = random(4, m.output_dim(), &mut rng);

            let mut cache = MlpCache::default();
            let out = m.forward_cached(&x, &mut cache).unwrap();
            let mut dy = out.clone();
            dy.as_mut_slice().iter_mut().zip(y.as_slice()).for_each(|(d, t)| *d -= t);
            let mut grads = m.zeros_like();
            let dx = m.backward(&cache, dy, &mut grads).unwrap();

            let h = 1e-6;
            let analytic: Vec<f64> = grads.param_slices().concat();
            let n_params = analytic.len();
            // Probe a deterministic subset of parameters plus every input entry.
            let stride = (n_params / 40).max(1);
            let mut k = 0usize;
            for li in 0..m.layers.len() {
                for part in 0..2 {
                    let len = if part == 0 { m.layers[li].w.as_slice().len() } else { m.layers[li].b.len() };
                    for idx in 0..len {
                        if k % stride == 0 {
                            let orig = if part == 0 { m.layers[li].w.as_slice()[idx] } else { m.layers[li].b[idx] };
                            let set = |m: &mut Mlp, v: f64| {
                                if part == 0 {
                                    m.layers[li].w.as_mut_slice()[idx] = v;
                                } else {
                                    m.layers[li].b[idx] = v;
                                }
                            };
                            set(&mut m, orig + h);
                            let lp = loss(&m, &x, &y);
                            set(&mut m, orig - h);
                            let lm = loss(&m, &x, &y);
                            set(&mut m, orig);
                            let fd = (lp - lm) / (2.0 * h);
                            check(analytic[k], fd, seed);
                        }
                        k += 1;
                    }
                }
            }
            for i in 0..x.as_slice().len() {
                let mut xp = x.clone();
                xp.as_mut_slice()[i] += h;
                let mut xm = x.clone();
                xm.as_mut_slice()[i] -= h;
                let fd = (loss(&m, &xp, &y) - loss(&m, &xm, &y)) / (2.0 * h);
                check(dx.as_slice()[i], fd, seed);
            }
        }
    }

    fn check(analytic: f64, fd: f64, seed: u64) {
        let scale = analytic.abs().max(fd.abs());
        // Entries near zero compare absolutely; kinks of ReLU make them noisy.
        let err = if scale < 1e-6 { (analytic - fd).abs() } else { (analytic - fd).abs() / scale };
        assert!(err <= 1e-4, "seed {seed}: analytic {analytic} vs fd {fd}");
    }
}
