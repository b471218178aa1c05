use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box corners are only enumerated up to this dimension.
pub const MAX_CORNER_DIM: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionEstimate {
    pub value: f64,
    pub probes: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn nearest(samples: &[Vec<f64>], p: &[f64]) -> f64 {
    samples
        .iter()
        .map(|s| s.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Largest distance from a probe point to its nearest sample.
///
/// Probes are `probes` uniform points in the box plus every box corner
/// (for up to [`MAX_CORNER_DIM`] dimensions), so the result never exceeds
/// the true dispersion. Probe positions depend only on the box and `rng`.
pub fn estimate_dispersion<R: Rng + ?Sized>(
    samples: &[Vec<f64>],
    lower: &[f64],
    upper: &[f64],
    probes: usize,
    rng: &mut R,
) -> Result<DispersionEstimate> {
    if samples.is_empty() {
        return Err(Error::domain("dispersion needs at least one sample"));
    }
    if probes == 0 {
        return Err(Error::domain("dispersion needs at least one probe"));
    }
    let d = lower.len();
    if upper.len() != d || samples.iter().any(|s| s.len() != d) {
        return Err(Error::domain("samples and bounds differ in dimension"));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
        return Err(Error::domain("bounds must be finite with lower <= upper"));
    }
    let mut value: f64 = 0.0;
    let mut p = vec![0.0; d];
    for _ in 0..probes {
        for i in 0..d {
            p[i] = if upper[i] > lower[i] { rng.gen_range(lower[i]..=upper[i]) } else { lower[i] };
        }
        value = value.max(nearest(samples, &p));
    }
    if d <= MAX_CORNER_DIM {
        for mask in 0..1usize << d {
            for i in 0..d {
                p[i] = if mask >> i & 1 == 1 { upper[i] } else { lower[i] };
            }
            value = value.max(nearest(samples, &p));
        }
    }
    Ok(DispersionEstimate { value, probes, lower: lower.to_vec(), upper: upper.to_vec() })
}
