//! Central-difference validation of analytic gradients.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::params::ParameterSet;
use super::DiffError;

/// Worst disagreement for one named parameter tensor.
#[derive(Debug, Clone)]
pub struct FdEntry {
    pub name: String,
    /// Largest relative error across the tensor's entries.
    pub max_rel_err: f64,
    /// Flat index where it occurred.
    pub worst_index: usize,
    /// Analytic and numeric derivative at that index.
    pub analytic: f64,
    pub numeric: f64,
    /// max_rel_err exceeded the tolerance.
    pub flagged: bool,
    /// Some entry looked nondifferentiable: the one-sided differences
    /// disagree in sign and are both well above the noise floor sqrt(h).
    /// A kink is reported separately because the central difference there
    /// can still agree with a subgradient choice.
    pub kink: bool,
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
    pub max_rel_err: f64,
    pub n_flagged: usize,
    pub n_kinks: usize,
}

impl FdReport {
    /// True when every analytic derivative matched within tolerance. Kinks
    /// do not fail the check on their own.
    pub fn passed(&self) -> bool {
        self.n_flagged == 0
    }
}

/// Compares the gradients produced by `f` against central differences over
/// every scalar in `params`.
///
/// `f(view, want_grads)` evaluates the loss at `view`, returning gradients
/// only when asked. It must be deterministic: any randomness inside has to be
/// replayed identically on every call, or the differences measure noise
/// instead of slope. The closure runs 2 * n_scalars + 1 times.
///
/// Relative error uses max(|analytic|, |numeric|, 1e-6) as the denominator so
/// near-zero derivatives are judged on an absolute scale.
pub fn finite_difference_check<F>(
    mut f: F,
    params: &ParameterSet,
    h: f64,
    tol: f64,
) -> Result<FdReport, DiffError>
where
    F: FnMut(&ParameterSet, bool) -> (f64, Option<ParameterSet>),
{
    assert!(h > 0.0 && tol > 0.0);
    let (loss0, grads) = f(params, true);
    if !loss0.is_finite() {
        return Err(DiffError::NonFiniteLoss);
    }
    let grads = grads.expect("finite_difference_check needs gradients from f");
    let noise_floor = libm::sqrt(h);
    let mut entries = Vec::new();
    let mut max_rel_err = 0.0f64;
    let mut n_flagged = 0;
    let mut n_kinks = 0;
    let mut work = params.clone();
    for (name, base) in params.iter() {
        let g = grads.get(name);
        assert_eq!(g.dims(), base.dims(), "gradient shape mismatch for {name}");
        let mut entry = FdEntry {
            name: name.to_string(),
            max_rel_err: -1.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            flagged: false,
            kink: false,
        };
        for i in 0..base.len() {
            let x0 = base.data()[i];
            work.get_mut(name).data_mut()[i] = x0 + h;
            let (lp, _) = f(&work, false);
            work.get_mut(name).data_mut()[i] = x0 - h;
            let (lm, _) = f(&work, false);
            work.get_mut(name).data_mut()[i] = x0;
            if !lp.is_finite() || !lm.is_finite() {
                return Err(DiffError::NonFiniteLoss);
            }
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = g.data()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            if rel > entry.max_rel_err {
                entry.max_rel_err = rel;
                entry.worst_index = i;
                entry.analytic = analytic;
                entry.numeric = numeric;
            }
            let fwd = (lp - loss0) / h;
            let bwd = (loss0 - lm) / h;
            if fwd * bwd < 0.0 && fwd.abs() > noise_floor && bwd.abs() > noise_floor {
                entry.kink = true;
            }
        }
        entry.flagged = entry.max_rel_err > tol;
        n_flagged += entry.flagged as usize;
        n_kinks += entry.kink as usize;
        max_rel_err = max_rel_err.max(entry.max_rel_err);
        entries.push(entry);
    }
    Ok(FdReport { entries, max_rel_err, n_flagged, n_kinks })
}
