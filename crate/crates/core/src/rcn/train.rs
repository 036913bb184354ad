//! Training loops for the two surrogates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mirror::{smd_minimize, Averaging, FnOracle, MirrorDescentConfig, Potential, TrainedModel};
use super::surrogate::{glm_grad, leaky_grad, SurrogateSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::norm::lp_norm;
use crate::rng::derive_rng;
use crate::types::Label;

/// A stream of labeled examples.
pub trait ExampleSource {
    fn dim(&self) -> usize;
    /// Writes the next point into `x` and returns its label.
    fn draw(&mut self, x: &mut [f64]) -> Result<Label>;
}

/// Samples a dataset uniformly with replacement.
pub struct DatasetSource<'a> {
    data: &'a Dataset,
    rng: ChaCha8Rng,
}

impl<'a> DatasetSource<'a> {
    pub fn new(data: &'a Dataset, seed: u64) -> Self {
        Self { data, rng: derive_rng(seed, "rcn/resample", 0) }
    }
}

impl ExampleSource for DatasetSource<'_> {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn draw(&mut self, x: &mut [f64]) -> Result<Label> {
        let ex = &self.data.examples()[self.rng.random_range(0..self.data.len())];
        x.copy_from_slice(&ex.x);
        Ok(ex.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    #[default]
    Leaky,
    Glm,
}

impl std::str::FromStr for SurrogateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaky" => Ok(SurrogateKind::Leaky),
            "glm" => Ok(SurrogateKind::Glm),
            other => Err(Error::Config(format!("unknown surrogate {other:?}; expected leaky or glm"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcnConfig {
    /// Step budget; derived from the target suboptimality when absent.
    pub steps: Option<usize>,
    /// Cap on the derived step budget.
    pub max_steps: usize,
    pub batch: usize,
    pub averaging: Averaging,
    pub step_size: Option<f64>,
}

impl Default for RcnConfig {
    fn default() -> Self {
        Self { steps: None, max_steps: 10_000_000, batch: 1, averaging: Averaging::Uniform, step_size: None }
    }
}

/// Steps for expected suboptimality `target` with gradients bounded by `l`:
/// `2·D·L² / (ρ·target²)`, with `ρ` the strong-convexity modulus of the
/// potential (`q − 1` for `q ∈ (1, 2]`, 1 for entropy).
pub fn theoretical_steps(q: f64, d: usize, l: f64, target: f64) -> Result<f64> {
    let pot = Potential::for_exponent(q)?;
    let rho = match pot {
        Potential::SquaredNorm { q } => (q - 1.0).min(1.0),
        Potential::Entropy => 1.0,
    };
    Ok(2.0 * pot.diameter(d) * l * l / (rho * target * target))
}

fn resolve_steps(cfg: &RcnConfig, q: f64, d: usize, l: f64, target: f64) -> Result<usize> {
    match cfg.steps {
        Some(0) => Err(Error::Config("step count must be >= 1".into())),
        Some(t) => Ok(t),
        None => Ok((theoretical_steps(q, d, l, target)?.ceil() as usize).clamp(1, cfg.max_steps.max(1))),
    }
}

fn run<S, G>(source: &mut S, spec: &SurrogateSpec, cfg: &RcnConfig, l: f64, target: f64, mut grad: G) -> Result<TrainedModel>
where
    S: ExampleSource + ?Sized,
    G: FnMut(&[f64], &[f64], Label, &mut [f64]) -> f64,
{
    let d = source.dim();
    let q = spec.q();
    if q.is_infinite() {
        return Err(Error::Config("data norm p = 1 (dual q = inf) is not supported by mirror descent".into()));
    }
    let steps = resolve_steps(cfg, q, d, l, target)?;
    let mut md = MirrorDescentConfig::new(q, steps, l);
    md.averaging = cfg.averaging;
    md.batch = cfg.batch;
    md.step_size = cfg.step_size;
    let p = spec.p.p();
    let mut x = vec![0.0; d];
    let mut oracle = FnOracle {
        dim: d,
        f: |w: &[f64], g: &mut [f64]| -> Result<f64> {
            let y = source.draw(&mut x)?;
            if lp_norm(&x, p) > 1.0 + 1e-9 {
                return Err(Error::InvalidData(format!("example with ‖x‖_{p} > 1")));
            }
            Ok(grad(w, &x, y, g))
        },
    };
    smd_minimize(&mut oracle, &md)
}

/// Mirror descent on the leaky surrogate `E[φ(y⟨w,x⟩)]`.
pub fn train_leaky<S: ExampleSource + ?Sized>(source: &mut S, spec: &SurrogateSpec, cfg: &RcnConfig) -> Result<TrainedModel> {
    let (lambda, gamma) = (spec.lambda(), spec.gamma);
    run(source, spec, cfg, spec.leaky_lipschitz(), spec.eps_prime(), |w, x, y, g| {
        leaky_grad(w, x, y.sign(), lambda, gamma, g)
    })
}

/// Mirror descent on the GLM loss `E[∫₀^{⟨w,x⟩}(u(s) − y)ds]`, `y ∈ {0,1}`.
pub fn train_glm<S: ExampleSource + ?Sized>(source: &mut S, spec: &SurrogateSpec, cfg: &RcnConfig) -> Result<TrainedModel> {
    let (eta, gamma) = (spec.eta, spec.gamma);
    run(source, spec, cfg, 1.0 - eta, spec.glm_eps_prime(), |w, x, y, g| {
        glm_grad(w, x, y.as_binary(), eta, gamma, g)
    })
}

pub fn train<S: ExampleSource + ?Sized>(
    kind: SurrogateKind,
    source: &mut S,
    spec: &SurrogateSpec,
    cfg: &RcnConfig,
) -> Result<TrainedModel> {
    match kind {
        SurrogateKind::Leaky => train_leaky(source, spec, cfg),
        SurrogateKind::Glm => train_glm(source, spec, cfg),
    }
}
