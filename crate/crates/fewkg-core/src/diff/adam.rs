//! Per-parameter optimizer steps.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use super::params::ParameterSet;
use super::tensor::Tensor;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Exponential moving averages for Adam, keyed like the parameter set.
/// Starts empty; slots appear on first use so a state can be created before
/// the parameters it will track.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam update with bias correction. `grads` must cover every parameter.
pub fn adam_step(params: &mut ParameterSet, grads: &ParameterSet, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - libm::pow(BETA1, t as f64);
    let bc2 = 1.0 - libm::pow(BETA2, t as f64);
    for (name, w) in params.iter_mut() {
        let g = grads.get(name);
        assert_eq!(g.dims(), w.dims(), "gradient shape mismatch for {name}");
        let m = state
            .m
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(w.dims()));
        let v = state
            .v
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(w.dims()));
        for i in 0..w.len() {
            let gi = g.data()[i];
            let mi = BETA1 * m.data()[i] + (1.0 - BETA1) * gi;
            let vi = BETA2 * v.data()[i] + (1.0 - BETA2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let mhat = mi / bc1;
            let vhat = vi / bc2;
            w.data_mut()[i] -= lr * mhat / (libm::sqrt(vhat) + EPS);
        }
    }
}

/// Plain gradient descent: w -= lr * g. Stateless reference step used to
/// cross-check the meta-update against hand arithmetic.
pub fn sgd_step(params: &mut ParameterSet, grads: &ParameterSet, lr: f64) {
    for (name, w) in params.iter_mut() {
        let g = grads.get(name);
        assert_eq!(g.dims(), w.dims(), "gradient shape mismatch for {name}");
        w.axpy(-lr, g);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(w: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::scalar(w));
        p
    }

    #[test]
    fn sgd_is_exact() {
        let mut p = one_param(1.0);
        let mut g = ParameterSet::new();
        g.insert("w", Tensor::scalar(0.25));
        sgd_step(&mut p, &g, 0.1);
        assert_eq!(p.get("w").item(), 1.0 - 0.025);
    }

    #[test]
    fn adam_first_step_is_signed_unit_step() {
        // With bias correction, step 1 gives mhat = g, vhat = g^2, so the
        // update is lr * g / (|g| + eps) regardless of the gradient scale.
        for &(g0, lr) in &[(0.5, 0.1), (-300.0, 0.01), (1e-4, 0.2)] {
            let mut p = one_param(2.0);
            let mut g = ParameterSet::new();
            g.insert("w", Tensor::scalar(g0));
            let mut st = AdamState::new();
            adam_step(&mut p, &g, &mut st, lr);
            let step = 2.0 - p.get("w").item();
            let sign: f64 = if g0 > 0.0 { 1.0 } else { -1.0 };
            assert!((step - lr * sign).abs() < 1e-3 * lr, "step {step} for g {g0}");
            assert_eq!(st.t, 1);
        }
    }

    #[test]
    fn adam_two_steps_match_hand_arithmetic() {
        let mut p = one_param(1.0);
        let mut g = ParameterSet::new();
        g.insert("w", Tensor::scalar(2.0));
        let mut st = AdamState::new();
        adam_step(&mut p, &g, &mut st, 0.5);
        adam_step(&mut p, &g, &mut st, 0.5);
        // Constant gradient 2.0: both bias-corrected moments equal the raw
        // gradient statistics, so each step is 0.5 * 2 / (2 + 1e-8).
        let expect = 1.0 - 2.0 * (0.5 * 2.0 / (2.0 + 1e-8));
        assert!((p.get("w").item() - expect).abs() < 1e-9);
    }

    #[test]
    fn fresh_state_restarts_bias_correction() {
        let mut p = one_param(0.0);
        let mut g = ParameterSet::new();
        g.insert("w", Tensor::scalar(1.0));
        let mut st = AdamState::new();
        adam_step(&mut p, &g, &mut st, 0.1);
        let after_one = p.get("w").item();
        let mut st2 = AdamState::new();
        adam_step(&mut p, &g, &mut st2, 0.1);
        // Same first-step magnitude both times.
        assert!(((after_one - p.get("w").item()) - (0.0 - after_one)).abs() < 1e-12);
    }
}
