//! From robust-loss evaluation to approximate separation.
//!
//! Given only `EVAL((w,b),(x,y))`, the body of halfspaces labeling all of
//! `𝒰(x)` positive,
//! `K = {(w,b) : ⟨w,z'⟩ + b > 0 ∀ z' ∈ 𝒰(x)}`,
//! has the membership oracle `1 − EVAL((w,b),(x,+))`. A query `z` far from
//! `𝒰(x)` is separated by finding a point of `K` (approximately) with
//! `⟨w,z⟩ + b ≤ −γ/2`; if none exists, `z` is close to `𝒰(x)`.

use std::cell::Cell;

use nalgebra::DMatrix;

use crate::adversary::{PerturbationSet, SeparationResult};
use crate::cert::{cert_with_mode, CertMode};
use crate::ellipsoid::{find_feasible, FeasibilityConfig, FeasibilityResult};
use crate::error::{Error, Result};
use crate::norm::{dot, lp_norm, NormSpec};
use crate::types::{check_dim, Halfspace, Label, LabeledExample, Vector};

/// Robust 0-1 loss oracle: `true` iff some `z ∈ 𝒰(x)` has
/// `y(⟨w,z⟩ + b) ≤ 0`.
pub trait RobustLossEvaluator {
    fn eval(&self, w: &[f64], b: f64, x: &[f64], y: Label) -> Result<bool>;
}

/// Closed-form evaluator for the ℓp ball of radius `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpEvaluator {
    pub gamma: f64,
    pub spec: NormSpec,
}

impl RobustLossEvaluator for LpEvaluator {
    fn eval(&self, w: &[f64], b: f64, x: &[f64], y: Label) -> Result<bool> {
        check_dim(w.len(), x.len())?;
        Ok(y.sign() * (dot(w, x) + b) - self.gamma * self.spec.dual_norm(w) <= 0.0)
    }
}

/// Evaluator backed by certification against an explicit adversary.
#[derive(Debug)]
pub struct CertEvaluator<'a> {
    pub adversary: &'a dyn PerturbationSet,
    pub config: FeasibilityConfig,
}

impl RobustLossEvaluator for CertEvaluator<'_> {
    fn eval(&self, w: &[f64], b: f64, x: &[f64], y: Label) -> Result<bool> {
        if w.iter().all(|&c| c == 0.0) {
            return Ok(y.sign() * b <= 0.0);
        }
        let h = Halfspace::new(Vector::new(w.to_vec())?, b)?;
        let ex = LabeledExample::from_parts(x.to_vec(), y)?;
        let report = cert_with_mode(self.adversary, &h, &ex, &self.config, CertMode::Auto)?;
        Ok(!report.result.is_robust())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApproxSepResult {
    /// The query is within the tolerance of the body.
    NearInside,
    Hyperplane(Vector),
}

impl ApproxSepResult {
    pub fn is_near_inside(&self) -> bool {
        matches!(self, ApproxSepResult::NearInside)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSepReport {
    pub result: ApproxSepResult,
    pub eval_calls: usize,
    pub outer_iterations: usize,
}

/// Tuning for the membership-to-separation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemSepConfig {
    /// Accept the query when it lies within `eta` of a located boundary point.
    pub eta: f64,
    /// Offset of the perturbed rays, relative to `eta`.
    pub probe_scale: f64,
    /// Boundary precision of the perturbed rays, relative to the probe offset.
    pub probe_precision: f64,
}

impl MemSepConfig {
    pub fn new(eta: f64) -> Self {
        Self { eta, probe_scale: 0.25, probe_precision: 1e-4 }
    }
}

/// Boundary crossing on the ray `p + t·dir`, given `p` inside and `p +
/// hi·dir` outside; returns `t` of the last known member.
fn bisect_ray<M: FnMut(&[f64]) -> Result<bool>>(
    mem: &mut M,
    p: &[f64],
    dir: &[f64],
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let at = |t: f64| -> Vec<f64> { p.iter().zip(dir).map(|(a, b)| a + t * b).collect() };
    let mut lo = 0.0;
    let len = lp_norm(dir, 2.0);
    for _ in 0..200 {
        if (hi - lo) * len <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mem(&at(mid))? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// An orthonormal basis of the complement of the unit vector `u`.
fn complement_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut basis: Vec<Vec<f64>> = vec![u.to_vec()];
    for i in 0..d {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            for (vk, bk) in v.iter_mut().zip(b) {
                *vk -= c * bk;
            }
        }
        let n = lp_norm(&v, 2.0);
        if n > 1e-8 {
            basis.push(v.iter().map(|c| c / n).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Approximate separation for a convex body known only through membership.
///
/// Bisects from `interior` toward `query` for a boundary point; if the query
/// lies within `eta` of it, answers `NearInside`. Otherwise the supporting
/// hyperplane there is estimated from boundary points on nearby rays and
/// returned oriented toward the query. The estimate is accurate for smooth
/// bodies and for polytopes away from faces narrower than `eta`.
pub fn mem_to_approx_sep<M: FnMut(&[f64]) -> Result<bool>>(
    mem: &mut M,
    interior: &[f64],
    query: &[f64],
    cfg: &MemSepConfig,
) -> Result<ApproxSepResult> {
    check_dim(interior.len(), query.len())?;
    if !(cfg.eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta must be > 0, got {}", cfg.eta)));
    }
    if mem(query)? {
        return Ok(ApproxSepResult::NearInside);
    }
    if !mem(interior)? {
        return Err(Error::Protocol("interior point is not a member of the body".into()));
    }
    let dir: Vec<f64> = query.iter().zip(interior).map(|(q, p)| q - p).collect();
    let t = bisect_ray(mem, interior, &dir, 1.0, cfg.eta / 4.0)?;
    let boundary: Vec<f64> = interior.iter().zip(&dir).map(|(p, v)| p + t * v).collect();
    let gap: Vec<f64> = query.iter().zip(&boundary).map(|(q, b)| q - b).collect();
    if lp_norm(&gap, 2.0) <= cfg.eta {
        return Ok(ApproxSepResult::NearInside);
    }
    let d = interior.len();
    if d == 1 {
        return SeparationResult::hyperplane(vec![dir[0].signum()]).map(into_approx);
    }

    let h = cfg.probe_scale * cfg.eta;
    let tol = h * cfg.probe_precision;
    // refine the central boundary point to the probe precision
    let t = {
        let start: Vec<f64> = interior.iter().zip(&dir).map(|(p, v)| p + t * v).collect();
        let rest: Vec<f64> = dir.iter().map(|v| v * (1.0 - t)).collect();
        let s = bisect_ray(mem, &start, &rest, 1.0, tol)?;
        t + s * (1.0 - t)
    };
    let center: Vec<f64> = interior.iter().zip(&dir).map(|(p, v)| p + t * v).collect();
    let u: Vec<f64> = {
        let n = lp_norm(&dir, 2.0);
        dir.iter().map(|c| c / n).collect()
    };
    let mut points = vec![center.clone()];
    for e in complement_basis(&u) {
        for s in [h, -h] {
            let target: Vec<f64> = center.iter().zip(&e).map(|(c, v)| c + s * v).collect();
            let ray: Vec<f64> = target.iter().zip(interior).map(|(a, p)| a - p).collect();
            let mut hi = 2.0;
            let mut found = false;
            for _ in 0..16 {
                let probe: Vec<f64> = interior.iter().zip(&ray).map(|(p, v)| p + hi * v).collect();
                if !mem(&probe)? {
                    found = true;
                    break;
                }
                hi *= 2.0;
            }
            if !found {
                continue;
            }
            let tr = bisect_ray(mem, interior, &ray, hi, tol)?;
            points.push(interior.iter().zip(&ray).map(|(p, v)| p + tr * v).collect());
        }
    }
    if points.len() < d {
        // too few probes to fit a plane; fall back to the ray direction
        return SeparationResult::hyperplane(u).map(into_approx);
    }
    let mut normal = fit_plane_normal(&points);
    if dot(&normal, &gap) < 0.0 {
        normal.iter_mut().for_each(|c| *c = -*c);
    }
    SeparationResult::hyperplane(normal).map(into_approx)
}

fn into_approx(s: SeparationResult) -> ApproxSepResult {
    match s {
        SeparationResult::Inside => ApproxSepResult::NearInside,
        SeparationResult::Hyperplane(w) => ApproxSepResult::Hyperplane(w),
    }
}

/// Unit normal of the least-squares plane through `points`.
fn fit_plane_normal(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let n = points.len();
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / n as f64;
        }
    }
    let m = DMatrix::from_fn(n.max(d), d, |i, j| if i < n { points[i][j] - mean[j] } else { 0.0 });
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    v_t.row(k).iter().copied().collect()
}

/// Approximate separation of `z` from `𝒰(x)` using only `eval`.
///
/// `radius` must bound `𝒰(x) ⊆ B(0, R)`. A returned hyperplane `g`
/// satisfies `⟨g, z'⟩ ≤ ⟨g, z⟩ + γ/2` for `z' ∈ 𝒰(x)`; `NearInside` means
/// no halfspace of the search separates `z` by `γ/2`.
pub fn approx_sep_from_eval(
    eval: &dyn RobustLossEvaluator,
    x: &[f64],
    z: &[f64],
    gamma: f64,
    radius: f64,
    bits: u32,
) -> Result<ApproxSepReport> {
    check_dim(x.len(), z.len())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be > 0, got {gamma}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be > 0, got {radius}")));
    }
    let d = x.len();
    let calls = Cell::new(0usize);
    let mut mem_k = |v: &[f64]| -> Result<bool> {
        calls.set(calls.get() + 1);
        Ok(!eval.eval(&v[..d], v[d], x, Label::Pos)?)
    };
    let mut interior = vec![0.0; d + 1];
    interior[d] = 1.0;
    // b large labels every bounded 𝒰(x) positive
    if !mem_k(&interior)? {
        return Err(Error::Protocol("evaluator rejects the constant positive classifier".into()));
    }
    let msep = MemSepConfig::new(gamma / (4.0 * radius));
    let mut zt: Vec<f64> = z.to_vec();
    zt.push(1.0);
    let mut oracle = |v: &[f64]| -> Result<SeparationResult> {
        if lp_norm(v, 2.0) > 1.0 {
            return SeparationResult::hyperplane(v.to_vec());
        }
        if dot(&zt, v) > -gamma / 2.0 {
            return SeparationResult::hyperplane(zt.clone());
        }
        match mem_to_approx_sep(&mut mem_k, &interior, v, &msep)? {
            ApproxSepResult::NearInside => Ok(SeparationResult::Inside),
            ApproxSepResult::Hyperplane(g) => Ok(SeparationResult::Hyperplane(g)),
        }
    };
    let cfg = FeasibilityConfig::new(1.0, bits)?;
    let report = find_feasible(&mut oracle, d + 1, &cfg)?;
    let result = match report.result {
        FeasibilityResult::Empty => ApproxSepResult::NearInside,
        FeasibilityResult::Found(v) => {
            let g: Vec<f64> = v[..d].iter().map(|c| -c).collect();
            match SeparationResult::hyperplane(g) {
                Ok(SeparationResult::Hyperplane(g)) => ApproxSepResult::Hyperplane(g),
                _ => return Err(Error::Protocol("found a constant classifier below the query".into())),
            }
        }
    };
    Ok(ApproxSepReport { result, eval_calls: calls.get(), outer_iterations: report.iterations })
}
