//! Margin and robust 0-1 losses of halfspaces under ℓp-ball adversaries.
//!
//! Ties are errors: a score of exactly zero is a misclassification and a
//! normalized margin of exactly `γ` is a margin violation.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::norm::NormSpec;
use crate::types::{check_dim, Halfspace, LabeledExample};

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

/// `y (⟨w, x⟩ + b) / ‖w‖_q`.
pub fn normalized_margin(h: &Halfspace, ex: &LabeledExample, spec: NormSpec) -> Result<f64> {
    check_dim(h.dim(), ex.dim())?;
    let scale = spec.dual_norm(h.weights());
    if scale == 0.0 {
        return Err(Error::InvalidHypothesis("weight vector is zero".into()));
    }
    Ok(ex.y.sign() * h.score(&ex.x) / scale)
}

/// `true` iff the normalized margin is at most `gamma`.
pub fn margin_loss(h: &Halfspace, ex: &LabeledExample, gamma: f64, spec: NormSpec) -> Result<bool> {
    check_gamma(gamma)?;
    Ok(normalized_margin(h, ex, spec)? <= gamma)
}

/// `inf_{‖δ‖_p ≤ γ} y (⟨w, x + δ⟩ + b) = y (⟨w, x⟩ + b) − γ ‖w‖_q`.
pub fn worst_case_score_lp(
    h: &Halfspace,
    ex: &LabeledExample,
    gamma: f64,
    spec: NormSpec,
) -> Result<f64> {
    check_gamma(gamma)?;
    check_dim(h.dim(), ex.dim())?;
    Ok(ex.y.sign() * h.score(&ex.x) - gamma * spec.dual_norm(h.weights()))
}

/// Exact robust 0-1 loss against `x + {δ : ‖δ‖_p ≤ γ}`: `true` iff some
/// perturbation is misclassified.
pub fn robust_loss_lp(h: &Halfspace, ex: &LabeledExample, gamma: f64, spec: NormSpec) -> Result<bool> {
    Ok(worst_case_score_lp(h, ex, gamma, spec)? <= 0.0)
}

/// Mean robust loss over a dataset for an ℓp-ball adversary.
pub fn empirical_robust_risk_lp(h: &Halfspace, data: &Dataset, gamma: f64, spec: NormSpec) -> Result<f64> {
    let mut errors = 0usize;
    for ex in data {
        if robust_loss_lp(h, ex, gamma, spec)? {
            errors += 1;
        }
    }
    Ok(errors as f64 / data.len() as f64)
}

/// Fraction of examples with `y ⟨w, x⟩ ≤ threshold`, with no normalization of `w`.
///
/// This is the margin error used for models constrained to `‖w‖_q ≤ 1`.
pub fn raw_margin_error(w: &[f64], data: &Dataset, threshold: f64) -> Result<f64> {
    check_dim(w.len(), data.dim())?;
    let errors = data
        .iter()
        .filter(|ex| ex.y.sign() * crate::norm::dot(w, &ex.x) <= threshold)
        .count();
    Ok(errors as f64 / data.len() as f64)
}

/// Plain 0-1 error (`y (⟨w, x⟩ + b) ≤ 0` counts as an error).
pub fn clean_error(h: &Halfspace, data: &Dataset) -> Result<f64> {
    check_dim(h.dim(), data.dim())?;
    let errors = data
        .iter()
        .filter(|ex| ex.y.sign() * h.score(&ex.x) <= 0.0)
        .count();
    Ok(errors as f64 / data.len() as f64)
}
