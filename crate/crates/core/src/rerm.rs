//! Robust empirical risk minimization in the realizable case.
//!
//! The outer ellipsoid searches the unit ℓ2 ball of weight vectors (lifted
//! to `(w, b)` when a bias is learned). A candidate is checked by certifying
//! it on every example in dataset order; the first perturbation `z` with
//! `y(⟨w,z⟩ + b) ≤ τ` gives the cut `−y·z̃`.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::adversary::{AffineImageHull, PerturbationSet, SeparationResult};
use crate::cert::{cert_with_mode, CertMode, CertResult};
use crate::dataset::Dataset;
use crate::ellipsoid::{find_feasible, FeasibilityConfig, FeasibilityResult};
use crate::error::{Error, Result};
use crate::norm::lp_norm;
use crate::types::{check_dim, Halfspace, Label, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct RermConfig {
    /// Precision for both the outer search and each certification.
    pub bits: u32,
    /// Required robust margin; `2^-bits · max‖x̃‖₂` when absent.
    pub tau: Option<f64>,
    pub bias: bool,
    pub cert_mode: CertMode,
}

impl Default for RermConfig {
    fn default() -> Self {
        Self { bits: 30, tau: None, bias: false, cert_mode: CertMode::Auto }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RermOutcome {
    Separator(Halfspace),
    Infeasible,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RermStats {
    pub outer_iterations: usize,
    pub outer_budget: usize,
    pub cert_calls: usize,
    pub cert_oracle_calls: usize,
    pub tau: f64,
    #[serde(serialize_with = "secs")]
    pub elapsed: Duration,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone)]
pub struct RermResult {
    pub outcome: RermOutcome,
    pub stats: RermStats,
    /// Caveat attached to `Infeasible`: separators whose robust margin is
    /// below a small multiple of τ are not distinguished from none.
    pub note: Option<String>,
}

impl RermResult {
    pub fn separator(&self) -> Option<&Halfspace> {
        match &self.outcome {
            RermOutcome::Separator(h) => Some(h),
            RermOutcome::Infeasible => None,
        }
    }
}

fn lift(z: &[f64], bias: bool, y: f64) -> Vec<f64> {
    let mut g: Vec<f64> = z.iter().map(|v| -y * v).collect();
    if bias {
        g.push(-y);
    }
    g
}

/// Robust ERM over the halfspaces of `adv.dim()`.
pub fn rerm(data: &Dataset, adv: &dyn PerturbationSet, cfg: &RermConfig) -> Result<RermResult> {
    let start = Instant::now();
    check_dim(adv.input_dim(), data.dim())?;
    let d = adv.dim();
    let dim = d + cfg.bias as usize;
    let outer = FeasibilityConfig::new(1.0, cfg.bits)?;
    let anchors: Vec<Vec<f64>> = data.iter().map(|ex| adv.anchor(&ex.x)).collect();
    let scale = anchors
        .iter()
        .map(|a| (a.iter().map(|v| v * v).sum::<f64>() + cfg.bias as u8 as f64).sqrt())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tau = match cfg.tau {
        Some(t) if t >= 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::Config(format!("margin tau must be >= 0, got {t}"))),
        None => outer.min_radius() * scale,
    };
    if cfg.bias && data.iter().all(|ex| ex.y == data.examples()[0].y) {
        return Err(Error::InvalidInput(
            "all labels are equal; with a bias the constant classifier is not a halfspace".into(),
        ));
    }
    let mut stats = RermStats { outer_budget: outer.iteration_budget(dim), tau, ..Default::default() };

    let mut oracle = |v: &[f64]| -> Result<SeparationResult> {
        if lp_norm(v, 2.0) > 1.0 {
            return SeparationResult::hyperplane(v.to_vec());
        }
        let (w, b) = v.split_at(d);
        let b = b.first().copied().unwrap_or(0.0);
        if w.iter().all(|&c| c == 0.0) {
            // constant score b: the first example with y·b ≤ τ cuts
            let i = data
                .iter()
                .position(|ex| ex.y.sign() * b <= tau)
                .expect("mixed labels checked above");
            return SeparationResult::hyperplane(lift(&anchors[i], cfg.bias, data.examples()[i].y.sign()));
        }
        for ex in data.iter() {
            let y = ex.y.sign();
            // y(⟨w,z⟩ + b) ≤ τ  ⇔  y(⟨w,z⟩ + b − yτ) ≤ 0
            let shifted = Halfspace::new(Vector::new(w.to_vec())?, b - y * tau)?;
            stats.cert_calls += 1;
            let report = cert_with_mode(adv, &shifted, ex, &outer, cfg.cert_mode)?;
            stats.cert_oracle_calls += report.oracle_calls;
            if let CertResult::Counterexample(z) = report.result {
                return SeparationResult::hyperplane(lift(&z, cfg.bias, y));
            }
        }
        Ok(SeparationResult::Inside)
    };
    let report = find_feasible(&mut oracle, dim, &outer)?;
    stats.outer_iterations = report.iterations;

    let (outcome, note) = match report.result {
        FeasibilityResult::Found(v) => {
            let (w, b) = v.split_at(d);
            let h = Halfspace::new(Vector::new(w.to_vec())?, b.first().copied().unwrap_or(0.0))?;
            for (i, ex) in data.iter().enumerate() {
                stats.cert_calls += 1;
                let check = cert_with_mode(adv, &h, ex, &outer, cfg.cert_mode)?;
                stats.cert_oracle_calls += check.oracle_calls;
                if !check.result.is_robust() {
                    return Err(Error::Internal(format!("separator fails re-certification on example {i}")));
                }
            }
            (RermOutcome::Separator(h), None)
        }
        FeasibilityResult::Empty => (
            RermOutcome::Infeasible,
            Some(format!(
                "no robust separator with margin >= {tau:.3e} in the unit ball; separators with margin below {:.3e} are not ruled out",
                10.0 * tau
            )),
        ),
    };
    stats.elapsed = start.elapsed();
    Ok(RermResult { outcome, stats, note })
}

/// Robust ERM over halfspaces in the feature space of a sampled image hull.
pub fn rerm_feature_mapped(data: &Dataset, adv: &AffineImageHull, cfg: &RermConfig) -> Result<RermResult> {
    rerm(data, adv, cfg)
}

/// Indices of examples on which `h` is not certified robust.
pub fn failing_examples(data: &Dataset, adv: &dyn PerturbationSet, h: &Halfspace, cfg: &RermConfig) -> Result<Vec<usize>> {
    let outer = FeasibilityConfig::new(1.0, cfg.bits)?;
    let mut out = Vec::new();
    for (i, ex) in data.iter().enumerate() {
        if !cert_with_mode(adv, h, ex, &outer, cfg.cert_mode)?.result.is_robust() {
            out.push(i);
        }
    }
    Ok(out)
}

/// Label counts `(negatives, positives)`.
pub fn label_counts(data: &Dataset) -> (usize, usize) {
    let pos = data.iter().filter(|ex| ex.y == Label::Pos).count();
    (data.len() - pos, pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{convexify, NormBallAdversary};
    use crate::norm::NormSpec;
    use crate::types::LabeledExample;

    fn data(points: &[(&[f64], Label)]) -> Dataset {
        Dataset::new(points.iter().map(|(x, y)| LabeledExample::from_parts(x.to_vec(), *y).unwrap()).collect()).unwrap()
    }

    #[test]
    fn axis_aligned_separator() {
        let s = data(&[(&[1.0, 0.0], Label::Pos), (&[-1.0, 0.0], Label::Neg)]);
        let adv = NormBallAdversary::new(2, 0.4, NormSpec::LINF).unwrap();
        let res = rerm(&s, &adv, &RermConfig::default()).unwrap();
        let h = res.separator().expect("separator");
        assert!(h.weights()[0] > 0.0);
        assert!(failing_examples(&s, &adv, h, &RermConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn overlapping_balls_are_infeasible() {
        let s = data(&[(&[0.3, 0.0], Label::Pos), (&[-0.3, 0.0], Label::Neg)]);
        let adv = NormBallAdversary::new(2, 0.5, NormSpec::L2).unwrap();
        let res = rerm(&s, &adv, &RermConfig::default()).unwrap();
        assert_eq!(res.outcome, RermOutcome::Infeasible);
        assert!(res.note.is_some());
    }

    #[test]
    fn ellipsoid_cert_mode_and_bias() {
        let s = data(&[
            (&[2.0, 0.5], Label::Pos),
            (&[2.5, -0.5], Label::Pos),
            (&[0.5, 0.0], Label::Neg),
            (&[0.0, 1.0], Label::Neg),
        ]);
        let adv = convexify(vec![vec![0.0, 0.0], vec![0.2, 0.1], vec![-0.1, 0.2], vec![0.0, -0.2]]).unwrap();
        for mode in [CertMode::Auto, CertMode::Ellipsoid] {
            let cfg = RermConfig { bits: 24, bias: true, cert_mode: mode, ..Default::default() };
            let res = rerm(&s, &adv, &cfg).unwrap();
            let h = res.separator().expect("separator");
            assert!(failing_examples(&s, &adv, h, &cfg).unwrap().is_empty());
        }
    }

    #[test]
    fn single_class_with_bias_is_rejected() {
        let s = data(&[(&[1.0], Label::Pos), (&[2.0], Label::Pos)]);
        let adv = NormBallAdversary::new(1, 0.1, NormSpec::L2).unwrap();
        let cfg = RermConfig { bias: true, ..Default::default() };
        assert!(rerm(&s, &adv, &cfg).is_err());
        assert!(rerm(&s, &adv, &RermConfig::default()).unwrap().separator().is_some());
    }
}
