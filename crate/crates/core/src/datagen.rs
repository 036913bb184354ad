//! Planted γ-margin halfspace data with random classification noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::norm::{dot, lp_norm, NormSpec};
use crate::rcn::ExampleSource;
use crate::rng::derive_rng;
use crate::types::{check_dim, Label, LabeledExample, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub dim: usize,
    pub m: usize,
    pub gamma: f64,
    /// Points satisfy `‖x‖_p ≤ 1`; `w*` has `‖w*‖_q = 1`.
    pub p: NormSpec,
    pub eta: f64,
    pub seed: u64,
    #[serde(default)]
    pub w_star: Option<Vec<f64>>,
    #[serde(default)]
    pub bias: bool,
    /// Points are kept only when `|⟨w*,x⟩ + b*| > γ + margin_slack`.
    #[serde(default)]
    pub margin_slack: f64,
}

impl PlantSpec {
    pub fn new(dim: usize, m: usize, gamma: f64, p: NormSpec, eta: f64, seed: u64) -> Self {
        Self { dim, m, gamma, p, eta, seed, w_star: None, bias: false, margin_slack: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dimension must be >= 1".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("sample count must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        if !(0.0..0.5).contains(&self.eta) {
            return Err(Error::Config(format!("noise rate must be in [0, 1/2), got {}", self.eta)));
        }
        if !(self.margin_slack >= 0.0 && self.margin_slack.is_finite()) {
            return Err(Error::Config(format!("margin slack must be >= 0, got {}", self.margin_slack)));
        }
        if let Some(w) = &self.w_star {
            check_dim(self.dim, w.len())?;
            if lp_norm(w, self.p.q()) == 0.0 || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("planted weights must be finite and nonzero".into()));
            }
        }
        Ok(())
    }
}

/// Uniform sample from the unit ℓp ball: generalized-Gaussian coordinates
/// `g` and an independent `W ~ Exp(1)` give `g / (‖g‖_p^p + W)^{1/p}`.
pub fn sample_lp_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, p: f64) -> Vec<f64> {
    if p.is_infinite() {
        return (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    }
    let g = generalized_gaussian(rng, d, p);
    let w: f64 = Exp1.sample(rng);
    let s: f64 = g.iter().map(|v| v.abs().powf(p)).sum::<f64>() + w;
    let scale = s.powf(-1.0 / p);
    g.iter().map(|v| v * scale).collect()
}

/// A point on the unit ℓq sphere (cone measure).
pub fn sample_lq_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize, q: f64) -> Vec<f64> {
    loop {
        let g = if q.is_infinite() {
            (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()
        } else {
            generalized_gaussian(rng, d, q)
        };
        let n = lp_norm(&g, q);
        if n > 0.0 {
            return g.iter().map(|v| v / n).collect();
        }
    }
}

/// Coordinates with density ∝ exp(−|t|^p): `|t|^p ~ Gamma(1/p, 1)`.
fn generalized_gaussian<R: Rng + ?Sized>(rng: &mut R, d: usize, p: f64) -> Vec<f64> {
    let gamma = Gamma::new(1.0 / p, 1.0).expect("shape 1/p is positive");
    (0..d)
        .map(|_| {
            let r: f64 = gamma.sample(rng);
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * r.powf(1.0 / p)
        })
        .collect()
}

/// Draws from the planted distribution: margin-conditioned uniform points,
/// clean labels from `w*`, flipped with probability `η`.
#[derive(Debug, Clone)]
pub struct PlantedSampler {
    w_star: Vec<f64>,
    bias: f64,
    p: f64,
    threshold: f64,
    eta: f64,
    rng: ChaCha8Rng,
    max_tries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDraw {
    pub x: Vec<f64>,
    pub clean: Label,
    pub noisy: Label,
}

impl PlantedSampler {
    /// The planted halfspace comes from `spec`'s seed; `stream` selects an
    /// independent stream of points (0 is the training set).
    pub fn new(spec: &PlantSpec, stream: u64) -> Result<Self> {
        spec.validate()?;
        let q = spec.p.q();
        let (w_star, bias) = {
            let mut rng = derive_rng(spec.seed, "gen/plant", 0);
            let w = match &spec.w_star {
                Some(w) => {
                    let n = lp_norm(w, q);
                    w.iter().map(|v| v / n).collect()
                }
                None => sample_lq_sphere(&mut rng, spec.dim, q),
            };
            let b = if spec.bias { rng.random_range(-0.25..=0.25) } else { 0.0 };
            (w, b)
        };
        Ok(Self {
            w_star,
            bias,
            p: spec.p.p(),
            threshold: spec.gamma + spec.margin_slack,
            eta: spec.eta,
            rng: derive_rng(spec.seed, "gen/points", stream),
            max_tries: 1000,
        })
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// One proposal; `None` when it falls inside the margin slab.
    fn attempt(&mut self) -> Option<PlantedDraw> {
        let x = sample_lp_ball(&mut self.rng, self.w_star.len(), self.p);
        let s = dot(&self.w_star, &x) + self.bias;
        if s.abs() <= self.threshold {
            return None;
        }
        let clean = Label::from_sign(s);
        let noisy = if self.rng.random::<f64>() < self.eta { clean.flipped() } else { clean };
        Some(PlantedDraw { x, clean, noisy })
    }

    pub fn draw(&mut self) -> Result<PlantedDraw> {
        for _ in 0..self.max_tries {
            if let Some(d) = self.attempt() {
                return Ok(d);
            }
        }
        Err(Error::Generation(format!(
            "no point with margin above {} in {} draws; use a smaller gamma",
            self.threshold, self.max_tries
        )))
    }
}

impl ExampleSource for PlantedSampler {
    fn dim(&self) -> usize {
        self.w_star.len()
    }

    fn draw(&mut self, x: &mut [f64]) -> Result<Label> {
        let d = PlantedSampler::draw(self)?;
        x.copy_from_slice(&d.x);
        Ok(d.noisy)
    }
}

/// Generates `spec.m` examples and records the plant in the metadata.
pub fn generate(spec: &PlantSpec) -> Result<Dataset> {
    let mut sampler = PlantedSampler::new(spec, 0)?;
    let mut examples = Vec::with_capacity(spec.m);
    let budget = 1000usize.saturating_mul(spec.m);
    let mut draws = 0usize;
    while examples.len() < spec.m {
        if draws >= budget {
            return Err(Error::Generation(format!(
                "only {} of {} points cleared margin {} after {draws} draws; use a smaller gamma",
                examples.len(),
                spec.m,
                sampler.threshold
            )));
        }
        draws += 1;
        if let Some(d) = sampler.attempt() {
            examples.push(LabeledExample::new(Vector::new(d.x)?, d.noisy));
        }
    }
    let meta = DatasetMeta {
        seed: spec.seed,
        gamma: spec.gamma,
        eta: spec.eta,
        p: spec.p,
        w_star: sampler.w_star.clone(),
        bias: sampler.bias,
    };
    Ok(Dataset::new(examples)?.with_meta(meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::empirical_robust_risk_lp;
    use crate::types::Halfspace;
    use rand::SeedableRng;

    #[test]
    fn ball_samples_are_in_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            for _ in 0..2_000 {
                let x = sample_lp_ball(&mut rng, 4, p);
                assert!(lp_norm(&x, p) <= 1.0);
            }
            let w = sample_lq_sphere(&mut rng, 4, crate::norm::conjugate_exponent(p));
            assert!((lp_norm(&w, crate::norm::conjugate_exponent(p)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_samples_are_uniform_in_radius() {
        // for the uniform law on the ℓ2 ball in d dims, P[‖x‖ ≤ r] = r^d
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let inside = (0..n).filter(|_| lp_norm(&sample_lp_ball(&mut rng, 3, 2.0), 2.0) <= 0.5).count();
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.125).abs() < 0.01, "{frac}");
    }

    #[test]
    fn planted_margin_and_realizability() {
        for p in [NormSpec::L2, NormSpec::LINF, NormSpec::new(1.5).unwrap()] {
            let spec = PlantSpec::new(4, 300, 0.1, p, 0.0, 7);
            let data = generate(&spec).unwrap();
            let meta = data.meta().unwrap();
            let h = Halfspace::homogeneous(meta.w_star.clone()).unwrap();
            assert!(data.check_norm_bound(p, 0.0).is_ok());
            for ex in data.iter() {
                assert!(ex.y.sign() * h.score(&ex.x) > 0.1);
            }
            assert_eq!(empirical_robust_risk_lp(&h, &data, 0.1 * (1.0 - 1e-9), p).unwrap(), 0.0);
            assert_eq!(empirical_robust_risk_lp(&h.negated(), &data, 0.1, p).unwrap(), 1.0);
        }
    }

    #[test]
    fn noise_rate() {
        let spec = PlantSpec::new(3, 100_000, 0.05, NormSpec::L2, 0.3, 11);
        let data = generate(&spec).unwrap();
        let w = data.meta().unwrap().w_star.clone();
        let flipped = data.iter().filter(|ex| Label::from_sign(dot(&w, &ex.x)) != ex.y).count();
        let frac = flipped as f64 / data.len() as f64;
        assert!((frac - 0.3).abs() < 0.005, "{frac}");
    }

    #[test]
    fn deterministic_csv() {
        let spec = PlantSpec::new(3, 50, 0.1, NormSpec::LINF, 0.1, 5);
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate(&spec).unwrap().write_csv(&mut a).unwrap();
        generate(&spec).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let other = PlantSpec { seed: 6, ..spec };
        let mut c = Vec::new();
        generate(&other).unwrap().write_csv(&mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn impossible_margin_fails() {
        let spec = PlantSpec { margin_slack: 5.0, ..PlantSpec::new(2, 10, 0.5, NormSpec::L2, 0.0, 1) };
        assert!(matches!(generate(&spec), Err(Error::Generation(_))));
        assert!(PlantSpec::new(2, 10, 0.5, NormSpec::L2, 0.5, 1).validate().is_err());
    }

    #[test]
    fn bias_plant() {
        let spec = PlantSpec { bias: true, ..PlantSpec::new(2, 200, 0.1, NormSpec::L2, 0.0, 3) };
        let data = generate(&spec).unwrap();
        let meta = data.meta().unwrap();
        assert!(meta.bias != 0.0);
        let h = Halfspace::new(Vector::new(meta.w_star.clone()).unwrap(), meta.bias).unwrap();
        assert!(data.iter().all(|ex| ex.y.sign() * h.score(&ex.x) > 0.1));
    }
}
