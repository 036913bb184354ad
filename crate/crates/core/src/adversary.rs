//! Convex perturbation sets `𝒰(x)` with exact separation and membership
//! oracles.
//!
//! Separation follows the usual contract: either `z ∈ 𝒰(x)` (up to the
//! adversary's absolute tolerance) or a nonzero `w` with `⟨w, z'⟩ ≤ ⟨w, z⟩`
//! for every `z' ∈ 𝒰(x)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minnorm::min_norm_point;
use crate::norm::{dot, dual_maximizer, lp_norm, NormSpec, DEFAULT_TOLERANCE};
use crate::rng::derive_rng;
use crate::types::{check_dim, Vector};

#[derive(Debug, Clone, PartialEq)]
pub enum SeparationResult {
    Inside,
    Hyperplane(Vector),
}

impl SeparationResult {
    pub fn is_inside(&self) -> bool {
        matches!(self, SeparationResult::Inside)
    }

    /// Wraps a raw normal, rejecting zero or non-finite vectors.
    pub fn hyperplane(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|c| !c.is_finite()) {
            return Err(Error::Protocol("separating hyperplane is not finite".into()));
        }
        if w.iter().all(|&c| c == 0.0) {
            return Err(Error::Protocol("separating hyperplane is zero".into()));
        }
        Ok(SeparationResult::Hyperplane(Vector::new(w)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
}

/// A convex adversary. `x` lives in `input_dim()`, perturbed points `z` in
/// `dim()`; the two agree except for feature-mapped hulls.
pub trait PerturbationSet: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn input_dim(&self) -> usize {
        self.dim()
    }

    /// A point guaranteed to lie in `𝒰(x)`: `x` itself, or its image.
    fn anchor(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn sep(&self, x: &[f64], z: &[f64]) -> Result<SeparationResult>;

    fn mem(&self, x: &[f64], z: &[f64]) -> Result<Membership> {
        Ok(if self.sep(x, z)?.is_inside() {
            Membership::Inside
        } else {
            Membership::Outside
        })
    }

    /// `R` with `𝒰(x) ⊆ B(anchor(x), R)` in ℓ2, when known.
    fn offset_radius(&self, x: &[f64]) -> Option<f64>;

    /// `argmin_{z ∈ 𝒰(x)} ⟨c, z⟩` when it has a closed form.
    fn minimize_linear(&self, _x: &[f64], _c: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Points of `𝒰(x)` whose hull approximates (or equals) the set.
    fn extreme_points(&self, _x: &[f64], _budget: usize, _seed: u64) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn as_norm_ball(&self) -> Option<&NormBallAdversary> {
        None
    }
}

fn check_query(adv: &dyn PerturbationSet, x: &[f64], z: &[f64]) -> Result<()> {
    check_dim(adv.input_dim(), x.len())?;
    check_dim(adv.dim(), z.len())
}

/// `𝒰(x) = x + {δ : ‖δ‖_p ≤ γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBallAdversary {
    dim: usize,
    gamma: f64,
    spec: NormSpec,
    tol: f64,
}

impl NormBallAdversary {
    pub fn new(dim: usize, gamma: f64, spec: NormSpec) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("adversary dimension must be >= 1".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("ball radius must be > 0, got {gamma}")));
        }
        Ok(Self { dim, gamma, spec, tol: DEFAULT_TOLERANCE })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn spec(&self) -> NormSpec {
        self.spec
    }
}

impl PerturbationSet for NormBallAdversary {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sep(&self, x: &[f64], z: &[f64]) -> Result<SeparationResult> {
        check_query(self, x, z)?;
        let delta: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
        if self.spec.norm(&delta) <= self.gamma + self.tol {
            return Ok(SeparationResult::Inside);
        }
        // subgradient of ‖· − x‖_p at z: the unit-ℓq vector norming δ
        SeparationResult::hyperplane(dual_maximizer(&delta, self.spec.q()))
    }

    fn offset_radius(&self, _x: &[f64]) -> Option<f64> {
        let p = self.spec.p();
        let factor = if p <= 2.0 {
            1.0
        } else if p.is_infinite() {
            (self.dim as f64).sqrt()
        } else {
            (self.dim as f64).powf(0.5 - 1.0 / p)
        };
        Some(self.gamma * factor)
    }

    fn minimize_linear(&self, x: &[f64], c: &[f64]) -> Option<Vec<f64>> {
        let u = dual_maximizer(c, self.spec.p());
        Some(x.iter().zip(&u).map(|(xi, ui)| xi - self.gamma * ui).collect())
    }

    fn extreme_points(&self, x: &[f64], budget: usize, seed: u64) -> Option<Vec<Vec<f64>>> {
        let d = self.dim;
        let shift = |delta: &[f64]| -> Vec<f64> { x.iter().zip(delta).map(|(a, b)| a + b).collect() };
        let p = self.spec.p();
        if p == 1.0 {
            let mut pts = Vec::with_capacity(2 * d);
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut delta = vec![0.0; d];
                    delta[i] = s * self.gamma;
                    pts.push(shift(&delta));
                }
            }
            return Some(pts);
        }
        if p.is_infinite() && d <= 12 {
            let pts = (0..1usize << d)
                .map(|mask| {
                    let delta: Vec<f64> = (0..d)
                        .map(|i| if mask >> i & 1 == 1 { self.gamma } else { -self.gamma })
                        .collect();
                    shift(&delta)
                })
                .collect();
            return Some(pts);
        }
        let mut rng = derive_rng(seed, "adversary/ball-samples", 0);
        let pts = (0..budget.max(d + 1))
            .map(|_| {
                let g: Vec<f64> = if p.is_infinite() {
                    (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
                } else {
                    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
                };
                let n = lp_norm(&g, p).max(1e-300);
                let delta: Vec<f64> = g.iter().map(|v| self.gamma * v / n).collect();
                shift(&delta)
            })
            .collect();
        Some(pts)
    }

    fn as_norm_ball(&self) -> Option<&NormBallAdversary> {
        Some(self)
    }
}

/// `𝒰(x) = {z : A (z − x) ≤ c}` with `c ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeAdversary {
    rows: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    radius: Option<f64>,
    tol: f64,
}

impl PolytopeAdversary {
    /// `radius`, if given, must bound `‖z − x‖₂` over the polytope; it is
    /// required for ellipsoid-based certification.
    pub fn new(rows: Vec<Vec<f64>>, offsets: Vec<f64>, radius: Option<f64>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if d == 0 {
            return Err(Error::InvalidInput("polytope needs at least one nonempty row".into()));
        }
        if rows.len() != offsets.len() {
            return Err(Error::InvalidInput(format!(
                "polytope has {} rows but {} offsets",
                rows.len(),
                offsets.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            check_dim(d, row.len())?;
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidInput(format!("polytope row {i} is zero")));
            }
        }
        if let Some(i) = offsets.iter().position(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "polytope offset {i} is negative, so x would not lie in U(x)"
            )));
        }
        if let Some(r) = radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("polytope radius must be > 0, got {r}")));
            }
        }
        Ok(Self { rows, offsets, radius, tol: DEFAULT_TOLERANCE })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

impl PerturbationSet for PolytopeAdversary {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn sep(&self, x: &[f64], z: &[f64]) -> Result<SeparationResult> {
        check_query(self, x, z)?;
        let delta: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
        let mut worst: Option<(usize, f64)> = None;
        for (i, (row, c)) in self.rows.iter().zip(&self.offsets).enumerate() {
            let residual = dot(row, &delta) - c;
            if residual > self.tol {
                let scaled = residual / lp_norm(row, 2.0);
                if worst.is_none_or(|(_, s)| scaled > s) {
                    worst = Some((i, scaled));
                }
            }
        }
        match worst {
            None => Ok(SeparationResult::Inside),
            Some((i, _)) => SeparationResult::hyperplane(self.rows[i].clone()),
        }
    }

    fn offset_radius(&self, _x: &[f64]) -> Option<f64> {
        self.radius
    }
}

/// `𝒰(x) = conv{x + v_j}`, with the zero offset among the generators.
#[derive(Debug, Clone, PartialEq)]
pub struct HullAdversary {
    offsets: Vec<Vec<f64>>,
    tol: f64,
}

impl HullAdversary {
    pub fn new(offsets: Vec<Vec<f64>>) -> Result<Self> {
        let d = offsets
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("hull needs at least one generator".into()))?;
        if d == 0 {
            return Err(Error::InvalidInput("hull generators must have dimension >= 1".into()));
        }
        for v in &offsets {
            check_dim(d, v.len())?;
            crate::norm::check_finite(v)?;
        }
        if !offsets.iter().any(|v| v.iter().all(|&c| c == 0.0)) {
            return Err(Error::InvalidInput(
                "hull generators must include the zero offset so that x lies in U(x)".into(),
            ));
        }
        Ok(Self { offsets, tol: DEFAULT_TOLERANCE })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    fn generators(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.offsets
            .iter()
            .map(|v| x.iter().zip(v).map(|(a, b)| a + b).collect())
            .collect()
    }
}

/// Separation of `z` from `conv(points)` via the nearest hull point.
fn hull_separate(points: &[Vec<f64>], z: &[f64], tol: f64) -> Result<SeparationResult> {
    let shifted: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(z).map(|(a, b)| a - b).collect())
        .collect();
    let nearest = min_norm_point(&shifted)?;
    // nearest.point = (closest hull point) − z
    if lp_norm(&nearest.point, 2.0) <= tol {
        return Ok(SeparationResult::Inside);
    }
    SeparationResult::hyperplane(nearest.point.iter().map(|c| -c).collect())
}

fn argmin_linear(points: &[Vec<f64>], c: &[f64]) -> Option<Vec<f64>> {
    points
        .iter()
        .min_by(|a, b| dot(c, a).total_cmp(&dot(c, b)))
        .cloned()
}

impl PerturbationSet for HullAdversary {
    fn dim(&self) -> usize {
        self.offsets[0].len()
    }

    fn sep(&self, x: &[f64], z: &[f64]) -> Result<SeparationResult> {
        check_query(self, x, z)?;
        hull_separate(&self.generators(x), z, self.tol)
    }

    fn offset_radius(&self, _x: &[f64]) -> Option<f64> {
        Some(self.offsets.iter().map(|v| lp_norm(v, 2.0)).fold(0.0, f64::max))
    }

    fn minimize_linear(&self, x: &[f64], c: &[f64]) -> Option<Vec<f64>> {
        argmin_linear(&self.generators(x), c)
    }

    fn extreme_points(&self, x: &[f64], _budget: usize, _seed: u64) -> Option<Vec<Vec<f64>>> {
        Some(self.generators(x))
    }
}

/// The hull adversary of a finite perturbation set `{x + v_j}`.
///
/// A fixed halfspace is robustly correct on the finite set exactly when it is
/// robustly correct on its hull, since a linear score attains its minimum
/// over a polytope at a generator.
pub fn convexify(offsets: Vec<Vec<f64>>) -> Result<HullAdversary> {
    HullAdversary::new(offsets)
}

/// A feature map `φ: ℝ^r → ℝ^d`.
pub trait FeatureMap: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityMap(pub usize);

impl FeatureMap for IdentityMap {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn output_dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// `x ↦ (x, ‖x‖₂²)`.
#[derive(Debug, Clone, Copy)]
pub struct SquaredNormLift(pub usize);

impl FeatureMap for SquaredNormLift {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn output_dim(&self) -> usize {
        self.0 + 1
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        out.push(dot(x, x));
        out
    }
}

/// `conv(φ(S(x)) ∪ {φ(x)})` where `S(x)` is a deterministic sample of the
/// base set.
///
/// This is exact only when the base adversary reports its extreme points
/// exactly (hulls, ℓ1 balls, low-dimensional ℓ∞ balls) and `φ` is affine.
/// Otherwise it is the hull of sampled images, and any realizability
/// guarantee holds for that sampled hull only.
#[derive(Debug, Clone)]
pub struct AffineImageHull {
    base: Arc<dyn PerturbationSet>,
    map: Arc<dyn FeatureMap>,
    samples: usize,
    seed: u64,
    tol: f64,
}

impl AffineImageHull {
    pub fn new(
        base: Arc<dyn PerturbationSet>,
        map: Arc<dyn FeatureMap>,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        check_dim(base.dim(), map.input_dim())?;
        if samples < map.output_dim() + 1 {
            return Err(Error::InvalidInput(format!(
                "need at least {} samples for a {}-dimensional image, got {samples}",
                map.output_dim() + 1,
                map.output_dim()
            )));
        }
        if base.extreme_points(&vec![0.0; base.input_dim()], samples, seed).is_none() {
            return Err(Error::InvalidInput(
                "base adversary cannot enumerate or sample its points".into(),
            ));
        }
        Ok(Self { base, map, samples, seed, tol: DEFAULT_TOLERANCE })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// The generators of the image hull at `x`; the first one is `φ(x)`.
    pub fn images(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![self.map.apply(&self.base.anchor(x))];
        let pts = self
            .base
            .extreme_points(x, self.samples, self.seed)
            .expect("checked at construction");
        out.extend(pts.iter().map(|p| self.map.apply(p)));
        out
    }
}

impl PerturbationSet for AffineImageHull {
    fn dim(&self) -> usize {
        self.map.output_dim()
    }

    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    fn anchor(&self, x: &[f64]) -> Vec<f64> {
        self.map.apply(&self.base.anchor(x))
    }

    fn sep(&self, x: &[f64], z: &[f64]) -> Result<SeparationResult> {
        check_query(self, x, z)?;
        hull_separate(&self.images(x), z, self.tol)
    }

    fn offset_radius(&self, x: &[f64]) -> Option<f64> {
        let imgs = self.images(x);
        let a = &imgs[0];
        Some(
            imgs.iter()
                .map(|p| lp_norm(&p.iter().zip(a).map(|(u, v)| u - v).collect::<Vec<_>>(), 2.0))
                .fold(0.0, f64::max),
        )
    }

    fn minimize_linear(&self, x: &[f64], c: &[f64]) -> Option<Vec<f64>> {
        argmin_linear(&self.images(x), c)
    }

    fn extreme_points(&self, x: &[f64], _budget: usize, _seed: u64) -> Option<Vec<Vec<f64>>> {
        Some(self.images(x))
    }
}

/// Adversary description as stored in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    LpBall {
        p: NormSpec,
        gamma: f64,
    },
    Polytope {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        c: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Hull {
        offsets: Vec<Vec<f64>>,
    },
}

impl AdversarySpec {
    pub fn build(&self, dim: usize) -> Result<Arc<dyn PerturbationSet>> {
        let adv: Arc<dyn PerturbationSet> = match self {
            AdversarySpec::LpBall { p, gamma } => Arc::new(NormBallAdversary::new(dim, *gamma, *p)?),
            AdversarySpec::Polytope { a, c, radius } => {
                Arc::new(PolytopeAdversary::new(a.clone(), c.clone(), *radius)?)
            }
            AdversarySpec::Hull { offsets } => Arc::new(HullAdversary::new(offsets.clone())?),
        };
        check_dim(dim, adv.dim())?;
        Ok(adv)
    }
}
