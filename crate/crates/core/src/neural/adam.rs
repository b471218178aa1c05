use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam optimizer moments over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update.
///
/// `params` and `grads` are parallel lists of buffers whose total length must
/// match the optimizer state. Nothing is modified if any gradient is non-finite.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::contract("parameter and gradient lists differ in length"));
    }
    let mut total = 0;
    for (p, g) in params.iter().zip(grads) {
        if p.len() != g.len() {
            return Err(Error::contract("parameter and gradient buffers differ in shape"));
        }
        total += p.len();
    }
    if total != state.len() {
        return Err(Error::contract(format!("optimizer tracks {} parameters, got {total}", state.len())));
    }
    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Training("non-finite gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let mut k = 0;
    for (p, g) in params.iter_mut().zip(grads) {
        for (w, gi) in p.iter_mut().zip(g.iter()) {
            let m = b1 * state.m[k] + (1.0 - b1) * gi;
            let v = b2 * state.v[k] + (1.0 - b2) * gi * gi;
            state.m[k] = m;
            state.v[k] = v;
            *w -= state.lr * (m / c1) / ((v / c2).sqrt() + state.eps);
            k += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = vec![1.0, -2.0];
        let mut s = AdamState::new(2, 0.01);
        adam_step(&mut [&mut w], &[&[0.5, -3.0]], &mut s).unwrap();
        assert!((w[0] - 0.99).abs() < 1e-9);
        assert!((w[1] + 1.99).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut w = vec![1.0];
        let mut s = AdamState::new(1, 0.01);
        adam_step(&mut [&mut w], &[&[0.0]], &mut s).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn quadratic_converges() {
        let mut w = vec![0.0];
        let mut s = AdamState::new(1, 0.1);
        for _ in 0..200 {
            let g = 2.0 * (w[0] - 3.0);
            adam_step(&mut [&mut w], &[&[g]], &mut s).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 0.1, "{}", w[0]);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut w = vec![1.0];
        let mut s = AdamState::new(1, 0.01);
        assert!(matches!(adam_step(&mut [&mut w], &[&[f64::NAN]], &mut s), Err(Error::Training(_))));
        assert_eq!(s.step, 0);
        assert_eq!(w, vec![1.0]);
    }
}
