//! Weight initialization.

use rand::Rng;

use crate::rng::ChaCha8Rng;

use super::tensor::Tensor;

/// Uniform Xavier draw on [-b, b] with b = sqrt(6 / (fan_in + fan_out)).
///
/// Fans by rank: (d0, d1) maps d1 inputs to d0 outputs; convolution weights
/// (c_out, k, c_in) use k*c_in and k*c_out; a bare vector (n) treats both
/// fans as n, so b = sqrt(3 / n).
pub fn xavier_init(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let (fan_in, fan_out) = match dims {
        [n] => (*n, *n),
        [d0, d1] => (*d1, *d0),
        [c_out, k, c_in] => (k * c_in, k * c_out),
        _ => panic!("xavier_init supports ranks 1..=3, got {dims:?}"),
    };
    let b = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * b).collect();
    Tensor::from_vec(dims, data)
}
