//! Robust certification: prove a halfspace correct on all of `𝒰(x)` or
//! produce a misclassified perturbation.

use crate::adversary::{Membership, PerturbationSet, SeparationResult};
use crate::dataset::Dataset;
use crate::ellipsoid::{find_feasible, FeasibilityConfig, FeasibilityResult};
use crate::error::{Error, Result};
use crate::norm::{dual_maximizer, NormSpec};
use crate::types::{check_dim, Halfspace, LabeledExample, Vector};

#[derive(Debug, Clone, PartialEq)]
pub enum CertResult {
    Robust,
    /// `z ∈ 𝒰(x)` with `y(⟨w,z⟩ + b) ≤ 0`.
    Counterexample(Vector),
}

impl CertResult {
    pub fn is_robust(&self) -> bool {
        matches!(self, CertResult::Robust)
    }

    pub fn counterexample(&self) -> Option<&Vector> {
        match self {
            CertResult::Counterexample(z) => Some(z),
            CertResult::Robust => None,
        }
    }

    /// Builds a counterexample after re-checking membership and the sign.
    pub fn verified_counterexample(
        adv: &dyn PerturbationSet,
        h: &Halfspace,
        ex: &LabeledExample,
        z: Vec<f64>,
    ) -> Result<Self> {
        if adv.mem(&ex.x, &z)? != Membership::Inside {
            return Err(Error::Internal(format!("counterexample {z:?} is outside the perturbation set")));
        }
        let signed = ex.y.sign() * h.score(&z);
        if !(signed <= 0.0) {
            return Err(Error::Internal(format!("counterexample has signed score {signed} > 0")));
        }
        Ok(CertResult::Counterexample(Vector::new(z)?))
    }
}

/// How certification searches `𝒰(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CertMode {
    /// Closed-form linear minimization when the adversary offers it,
    /// ellipsoid search otherwise.
    #[default]
    Auto,
    Ellipsoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub result: CertResult,
    /// Separation-oracle queries made by the ellipsoid search (0 on the
    /// closed-form path).
    pub oracle_calls: usize,
}

fn check_inputs(adv: &dyn PerturbationSet, h: &Halfspace, ex: &LabeledExample) -> Result<()> {
    check_dim(adv.input_dim(), ex.dim())?;
    check_dim(adv.dim(), h.dim())
}

/// Ellipsoid search for a point of `𝒰(x) ∩ {z : y(⟨w,z⟩ + b) ≤ 0}`.
///
/// The search ball is centered at the adversary's anchor with its offset
/// radius; `cfg` contributes the precision `bits` only. `Robust` means the
/// intersection holds no ball of radius `2^-bits · R`.
pub fn cert(adv: &dyn PerturbationSet, h: &Halfspace, ex: &LabeledExample, cfg: &FeasibilityConfig) -> Result<CertResult> {
    Ok(cert_report(adv, h, ex, cfg)?.result)
}

pub fn cert_report(
    adv: &dyn PerturbationSet,
    h: &Halfspace,
    ex: &LabeledExample,
    cfg: &FeasibilityConfig,
) -> Result<CertReport> {
    check_inputs(adv, h, ex)?;
    let y = ex.y.sign();
    let anchor = adv.anchor(&ex.x);
    if y * h.score(&anchor) <= 0.0 {
        let result = CertResult::verified_counterexample(adv, h, ex, anchor)?;
        return Ok(CertReport { result, oracle_calls: 0 });
    }
    let radius = adv
        .offset_radius(&ex.x)
        .ok_or_else(|| Error::InvalidInput("adversary has no radius bound; certification needs one".into()))?;
    if radius <= 0.0 {
        // 𝒰(x) is the anchor alone
        return Ok(CertReport { result: CertResult::Robust, oracle_calls: 0 });
    }
    let search = FeasibilityConfig::new(radius * (1.0 + 1e-9), cfg.bits)?
        .with_center(anchor)
        .with_tolerance(cfg.tolerance);
    let w = h.weights();
    let mut calls = 0usize;
    let mut oracle = |z: &[f64]| -> Result<SeparationResult> {
        calls += 1;
        match adv.sep(&ex.x, z)? {
            SeparationResult::Inside => {
                if y * h.score(z) > 0.0 {
                    // the misclassified side has lower y-score
                    SeparationResult::hyperplane(w.iter().map(|c| y * c).collect())
                } else {
                    Ok(SeparationResult::Inside)
                }
            }
            cut => Ok(cut),
        }
    };
    let report = find_feasible(&mut oracle, adv.dim(), &search)?;
    let result = match report.result {
        FeasibilityResult::Found(z) => CertResult::verified_counterexample(adv, h, ex, z.into_inner())?,
        FeasibilityResult::Empty => CertResult::Robust,
    };
    Ok(CertReport { result, oracle_calls: calls })
}

/// Certification by exact linear minimization of `y⟨w,·⟩` over `𝒰(x)`.
/// Returns `None` when the adversary has no closed-form minimizer.
pub fn cert_linear(adv: &dyn PerturbationSet, h: &Halfspace, ex: &LabeledExample) -> Result<Option<CertResult>> {
    check_inputs(adv, h, ex)?;
    let y = ex.y.sign();
    let c: Vec<f64> = h.weights().iter().map(|w| y * w).collect();
    let Some(z) = adv.minimize_linear(&ex.x, &c) else {
        return Ok(None);
    };
    if y * h.score(&z) <= 0.0 {
        Ok(Some(CertResult::verified_counterexample(adv, h, ex, z)?))
    } else {
        Ok(Some(CertResult::Robust))
    }
}

/// Closed-form certification for the ℓp ball of radius `gamma`: the worst
/// perturbation is `z = x − yγ·u` with `u` the unit-ℓp vector norming `w`.
pub fn cert_fastpath(h: &Halfspace, ex: &LabeledExample, gamma: f64, spec: NormSpec) -> Result<CertResult> {
    check_dim(h.dim(), ex.dim())?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be >= 0, got {gamma}")));
    }
    let y = ex.y.sign();
    let u = dual_maximizer(h.weights(), spec.p());
    let z: Vec<f64> = ex.x.iter().zip(&u).map(|(x, u)| x - y * gamma * u).collect();
    if y * h.score(&z) <= 0.0 {
        Ok(CertResult::Counterexample(Vector::new(z)?))
    } else {
        Ok(CertResult::Robust)
    }
}

/// Certification by the requested mode.
pub fn cert_with_mode(
    adv: &dyn PerturbationSet,
    h: &Halfspace,
    ex: &LabeledExample,
    cfg: &FeasibilityConfig,
    mode: CertMode,
) -> Result<CertReport> {
    if mode == CertMode::Auto {
        if let Some(result) = cert_linear(adv, h, ex)? {
            return Ok(CertReport { result, oracle_calls: 0 });
        }
    }
    cert_report(adv, h, ex, cfg)
}

/// Fraction of examples with a certified counterexample.
pub fn empirical_robust_risk(
    adv: &dyn PerturbationSet,
    h: &Halfspace,
    data: &Dataset,
    cfg: &FeasibilityConfig,
    mode: CertMode,
) -> Result<f64> {
    let mut bad = 0usize;
    for ex in data.iter() {
        if !cert_with_mode(adv, h, ex, cfg, mode)?.result.is_robust() {
            bad += 1;
        }
    }
    Ok(bad as f64 / data.len() as f64)
}
