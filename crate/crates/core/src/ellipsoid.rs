//! Central-cut ellipsoid method for convex feasibility.
//!
//! The ellipsoid is `{v : (v − c)ᵀ A⁻¹ (v − c) ≤ 1}`. Each step queries the
//! oracle at the center and keeps the half containing the set.

use nalgebra::{DMatrix, DVector};

use crate::adversary::SeparationResult;
use crate::error::{Error, Result};
use crate::types::{check_dim, Vector};

/// Anything that can separate a query point from a convex set.
pub trait SeparationOracle {
    fn separate(&mut self, v: &[f64]) -> Result<SeparationResult>;
}

impl<F> SeparationOracle for F
where
    F: FnMut(&[f64]) -> Result<SeparationResult>,
{
    fn separate(&mut self, v: &[f64]) -> Result<SeparationResult> {
        self(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityConfig {
    /// Radius of the starting ball.
    pub radius: f64,
    /// Precision parameter: the search gives up once no ball of radius
    /// `2^-bits · radius` can remain.
    pub bits: u32,
    /// Slack passed through to callers that compose oracles.
    pub tolerance: f64,
    /// Center of the starting ball; the origin when absent.
    pub center: Option<Vec<f64>>,
    /// Record `det(A')/det(A)` for every step.
    pub track_volume: bool,
}

impl FeasibilityConfig {
    pub fn new(radius: f64, bits: u32) -> Result<Self> {
        let cfg = Self {
            radius,
            bits,
            tolerance: crate::norm::DEFAULT_TOLERANCE,
            center: None,
            track_volume: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = Some(center);
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_volume_tracking(mut self, on: bool) -> Self {
        self.track_volume = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("initial radius must be > 0, got {}", self.radius)));
        }
        if self.bits == 0 {
            return Err(Error::Config("precision bits must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be >= 0, got {}", self.tolerance)));
        }
        Ok(())
    }

    /// `ceil(2d(d+1)·b·ln 2)`.
    pub fn iteration_budget(&self, d: usize) -> usize {
        let d = d as f64;
        (2.0 * d * (d + 1.0) * self.bits as f64 * std::f64::consts::LN_2).ceil() as usize
    }

    /// `2^-bits · radius`.
    pub fn min_radius(&self) -> f64 {
        self.radius * (-(self.bits as f64)).exp2()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityResult {
    Found(Vector),
    /// No ball of radius `2^-b · R0` fits in the set (under the oracle
    /// contract).
    Empty,
}

impl FeasibilityResult {
    pub fn point(&self) -> Option<&Vector> {
        match self {
            FeasibilityResult::Found(v) => Some(v),
            FeasibilityResult::Empty => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, FeasibilityResult::Found(_))
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub result: FeasibilityResult,
    /// Number of oracle queries.
    pub iterations: usize,
    pub budget: usize,
    /// `det(A')/det(A)` per cut, when tracking is enabled.
    pub det_ratios: Vec<f64>,
    /// Steps that needed diagonal jitter to stay positive definite.
    pub repairs: usize,
}

#[derive(Debug, Clone)]
pub struct EllipsoidState {
    center: DVector<f64>,
    shape: DMatrix<f64>,
}

impl EllipsoidState {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        let d = center.len();
        Self {
            center: DVector::from_column_slice(center),
            shape: DMatrix::identity(d, d) * (radius * radius),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        self.center.as_slice()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn trace(&self) -> f64 {
        self.shape.trace()
    }

    /// Squared half-width of the ellipsoid along `g`: `gᵀAg / ‖g‖²`.
    pub fn width_sq(&self, g: &[f64]) -> f64 {
        let g = DVector::from_column_slice(g);
        g.dot(&(&self.shape * &g)) / g.norm_squared()
    }

    pub fn log_det(&self) -> Option<f64> {
        self.shape
            .clone()
            .cholesky()
            .map(|c| 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        let diff = DVector::from_column_slice(v) - &self.center;
        match self.shape.clone().cholesky() {
            Some(c) => diff.dot(&c.solve(&diff)) <= 1.0 + 1e-12,
            None => false,
        }
    }

    /// Central cut keeping `{v : ⟨g, v − c⟩ ≤ 0}`. Returns the number of
    /// jitter repairs applied.
    pub fn cut(&mut self, g: &[f64], iteration: usize) -> Result<usize> {
        let d = self.dim();
        let dn = d as f64;
        let g = DVector::from_column_slice(g);
        let ag = &self.shape * &g;
        let gag = g.dot(&ag);
        if !(gag > 0.0 && gag.is_finite()) {
            return Err(Error::Numeric {
                iteration,
                message: format!("cut direction has gᵀAg = {gag}"),
            });
        }
        let b = ag / gag.sqrt();
        self.center -= &b / (dn + 1.0);
        let scale = dn * dn / (dn * dn - 1.0);
        self.shape = (&self.shape - (&b * b.transpose()) * (2.0 / (dn + 1.0))) * scale;
        let sym = (&self.shape + self.shape.transpose()) * 0.5;
        self.shape = sym;
        if self.center.iter().any(|v| !v.is_finite()) || self.shape.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { iteration, message: "ellipsoid became non-finite".into() });
        }
        let mut repairs = 0;
        while self.shape.clone().cholesky().is_none() {
            let floor = 1e-14 * self.shape.trace().abs().max(f64::MIN_POSITIVE);
            for i in 0..d {
                self.shape[(i, i)] += floor * (1u64 << repairs.min(40)) as f64;
            }
            repairs += 1;
            if repairs > 60 {
                return Err(Error::Numeric {
                    iteration,
                    message: "shape matrix lost positive definiteness".into(),
                });
            }
        }
        Ok(repairs)
    }
}

fn hyperplane_of(result: SeparationResult, d: usize, iteration: usize) -> Result<Option<Vec<f64>>> {
    match result {
        SeparationResult::Inside => Ok(None),
        SeparationResult::Hyperplane(g) => {
            check_dim(d, g.dim())?;
            if g.iter().all(|&v| v == 0.0) {
                return Err(Error::Protocol(format!("oracle returned a zero hyperplane at step {iteration}")));
            }
            Ok(Some(g.into_inner()))
        }
    }
}

/// Searches for a point of a convex `K ⊆ B(center, R0)` using its
/// separation oracle.
pub fn find_feasible<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    dim: usize,
    cfg: &FeasibilityConfig,
) -> Result<FeasibilityReport> {
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::InvalidInput("feasibility dimension must be >= 1".into()));
    }
    let center = match &cfg.center {
        Some(c) => {
            check_dim(dim, c.len())?;
            c.clone()
        }
        None => vec![0.0; dim],
    };
    if dim == 1 {
        return bisect(oracle, center[0], cfg);
    }
    let budget = cfg.iteration_budget(dim);
    let floor = cfg.min_radius().powi(2);
    let mut state = EllipsoidState::ball(&center, cfg.radius);
    let mut det_ratios = Vec::new();
    let mut repairs = 0;
    let mut log_det = if cfg.track_volume { state.log_det() } else { None };
    for it in 0..budget {
        if state.trace() < floor {
            return Ok(FeasibilityReport {
                result: FeasibilityResult::Empty,
                iterations: it,
                budget,
                det_ratios,
                repairs,
            });
        }
        let answer = oracle.separate(state.center())?;
        match hyperplane_of(answer, dim, it)? {
            None => {
                return Ok(FeasibilityReport {
                    result: FeasibilityResult::Found(Vector::new(state.center().to_vec())?),
                    iterations: it + 1,
                    budget,
                    det_ratios,
                    repairs,
                });
            }
            Some(g) => {
                // a ball of radius r cannot fit once the width along g is below 2r
                if state.width_sq(&g) < floor {
                    return Ok(FeasibilityReport {
                        result: FeasibilityResult::Empty,
                        iterations: it + 1,
                        budget,
                        det_ratios,
                        repairs,
                    });
                }
                if state.cut(&g, it)? > 0 {
                    repairs += 1;
                }
                if cfg.track_volume {
                    let next = state.log_det();
                    if let (Some(a), Some(b)) = (log_det, next) {
                        det_ratios.push((b - a).exp());
                    }
                    log_det = next;
                }
            }
        }
    }
    Ok(FeasibilityReport { result: FeasibilityResult::Empty, iterations: budget, budget, det_ratios, repairs })
}

fn bisect<O: SeparationOracle + ?Sized>(oracle: &mut O, center: f64, cfg: &FeasibilityConfig) -> Result<FeasibilityReport> {
    let budget = cfg.iteration_budget(1);
    let (mut lo, mut hi) = (center - cfg.radius, center + cfg.radius);
    let mut det_ratios = Vec::new();
    for it in 0..budget {
        if (hi - lo) / 2.0 < cfg.min_radius() {
            return Ok(FeasibilityReport { result: FeasibilityResult::Empty, iterations: it, budget, det_ratios, repairs: 0 });
        }
        let mid = 0.5 * (lo + hi);
        match hyperplane_of(oracle.separate(&[mid])?, 1, it)? {
            None => {
                return Ok(FeasibilityReport {
                    result: FeasibilityResult::Found(Vector::new(vec![mid])?),
                    iterations: it + 1,
                    budget,
                    det_ratios,
                    repairs: 0,
                })
            }
            Some(g) => {
                if g[0] > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if cfg.track_volume {
                    det_ratios.push(0.25);
                }
            }
        }
    }
    Ok(FeasibilityReport { result: FeasibilityResult::Empty, iterations: budget, budget, det_ratios, repairs: 0 })
}

/// Separation oracle of the Euclidean ball `B(center, r)`.
pub fn ball_oracle(center: Vec<f64>, r: f64) -> impl FnMut(&[f64]) -> Result<SeparationResult> {
    move |v: &[f64]| {
        let diff: Vec<f64> = v.iter().zip(&center).map(|(a, b)| a - b).collect();
        if crate::norm::lp_norm(&diff, 2.0) <= r {
            Ok(SeparationResult::Inside)
        } else {
            SeparationResult::hyperplane(diff)
        }
    }
}

/// Separation oracle of the box `∏ [lo_i, hi_i]`, cutting on the most
/// violated facet.
pub fn box_oracle(lo: Vec<f64>, hi: Vec<f64>) -> impl FnMut(&[f64]) -> Result<SeparationResult> {
    move |v: &[f64]| {
        let mut worst: Option<(usize, f64, f64)> = None;
        for i in 0..v.len() {
            for (viol, sign) in [(lo[i] - v[i], -1.0), (v[i] - hi[i], 1.0)] {
                if viol > 0.0 && worst.is_none_or(|(_, w, _)| viol > w) {
                    worst = Some((i, viol, sign));
                }
            }
        }
        match worst {
            None => Ok(SeparationResult::Inside),
            Some((i, _, sign)) => {
                let mut g = vec![0.0; v.len()];
                g[i] = sign;
                SeparationResult::hyperplane(g)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::lp_norm;

    #[test]
    fn finds_small_ball() {
        let cfg = FeasibilityConfig::new(10.0, 16).unwrap();
        let mut oracle = ball_oracle(vec![0.5, 0.5], 0.1);
        let rep = find_feasible(&mut oracle, 2, &cfg).unwrap();
        let p = rep.result.point().expect("found");
        assert!(lp_norm(&[p[0] - 0.5, p[1] - 0.5], 2.0) <= 0.1);
        assert!(rep.iterations <= cfg.iteration_budget(2));
    }

    #[test]
    fn contradiction_oracle_is_empty() {
        let cfg = FeasibilityConfig::new(1.0, 8).unwrap().with_center(vec![0.3, -0.2, 0.1]);
        let mut oracle = |v: &[f64]| SeparationResult::hyperplane(v.to_vec());
        let rep = find_feasible(&mut oracle, 3, &cfg).unwrap();
        assert_eq!(rep.result, FeasibilityResult::Empty);
        assert!(rep.iterations <= rep.budget);
    }

    #[test]
    fn zero_hyperplane_is_protocol_error() {
        let cfg = FeasibilityConfig::new(1.0, 8).unwrap();
        let mut oracle = |_v: &[f64]| Ok(SeparationResult::Hyperplane(Vector::zeros(2)));
        assert!(matches!(find_feasible(&mut oracle, 2, &cfg), Err(Error::Protocol(_))));
    }

    #[test]
    fn non_finite_cut_is_numeric_error() {
        let cfg = FeasibilityConfig::new(1.0, 8).unwrap();
        let mut state = EllipsoidState::ball(&[0.0, 0.0], 1.0);
        let err = state.cut(&[f64::MAX, f64::MAX], 3).unwrap_err();
        assert!(matches!(err, Error::Numeric { iteration: 3, .. }));
        let _ = cfg;
    }

    #[test]
    fn one_dimensional_bisection() {
        let cfg = FeasibilityConfig::new(10.0, 16).unwrap();
        let mut oracle = box_oracle(vec![3.0], vec![3.001]);
        let rep = find_feasible(&mut oracle, 1, &cfg).unwrap();
        let p = rep.result.point().unwrap();
        assert!((3.0..=3.001).contains(&p[0]));
        let mut never = |v: &[f64]| SeparationResult::hyperplane(vec![if v[0] > 0.2 { 1.0 } else { -1.0 }]);
        let rep = find_feasible(&mut never, 1, &cfg).unwrap();
        assert_eq!(rep.result, FeasibilityResult::Empty);
    }

    #[test]
    fn box_d6() {
        let lo = vec![-1.0, 0.5, 2.0, -3.0, 0.0, 1.0];
        let hi: Vec<f64> = lo.iter().map(|v| v + 1.0 / 256.0).collect();
        let cfg = FeasibilityConfig::new(10.0, 16).unwrap();
        let mut oracle = box_oracle(lo.clone(), hi.clone());
        let rep = find_feasible(&mut oracle, 6, &cfg).unwrap();
        let p = rep.result.point().unwrap();
        for i in 0..6 {
            assert!(lo[i] <= p[i] && p[i] <= hi[i]);
        }
    }

    #[test]
    fn cut_keeps_halfspace_and_symmetry() {
        let mut state = EllipsoidState::ball(&[0.0, 0.0, 0.0], 2.0);
        let g = [1.0, -0.5, 0.25];
        let kept = [-1.0, 0.5, -0.2];
        assert!(state.contains(&kept));
        state.cut(&g, 0).unwrap();
        assert!(state.contains(&kept));
        let a = state.shape();
        assert!((a - a.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn det_ratio_matches_closed_form() {
        // (d²/(d²−1))^d · (d−1)/(d+1)
        let cfg = FeasibilityConfig::new(1.0, 20).unwrap().with_volume_tracking(true);
        for d in 2..=6usize {
            let mut oracle = ball_oracle(vec![0.9 / (d as f64).sqrt(); d], 1e-3);
            let rep = find_feasible(&mut oracle, d, &cfg).unwrap();
            let dn = d as f64;
            let expected = (dn * dn / (dn * dn - 1.0)).powi(d as i32) * (dn - 1.0) / (dn + 1.0);
            for r in rep.det_ratios {
                assert!((r - expected).abs() < 1e-6, "d={d} ratio {r} expected {expected}");
                assert!(r <= (-1.0 / (dn + 1.0)).exp());
            }
        }
    }
}
