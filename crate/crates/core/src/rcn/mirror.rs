//! Stochastic mirror descent over the unit ℓq ball.
//!
//! For `q > 1` the potential is `ψ(w) = ½‖w‖_q²`. For `q = 1` the ball is
//! written as the image of the `2d`-simplex under `p ↦ p₊ − p₋` and the
//! entropy potential is used there (exponentiated gradient ±).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::norm::{conjugate_exponent, lp_norm, sign_or_zero};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    SquaredNorm { q: f64 },
    Entropy,
}

impl Potential {
    pub fn for_exponent(q: f64) -> Result<Self> {
        if q == 1.0 {
            Ok(Potential::Entropy)
        } else if q > 1.0 && q.is_finite() {
            Ok(Potential::SquaredNorm { q })
        } else {
            Err(Error::Config(format!("mirror descent needs a finite dual exponent q >= 1, got {q}")))
        }
    }

    /// Potential range over the domain: `½` for the squared norm, `log 2d`
    /// for the lifted entropy.
    pub fn diameter(&self, d: usize) -> f64 {
        match self {
            Potential::SquaredNorm { .. } => 0.5,
            Potential::Entropy => ((2 * d) as f64).ln(),
        }
    }
}

/// `∇ψ(w)` for `ψ = ½‖w‖_q²`: `‖w‖_q^{2−q} sign(w_i)|w_i|^{q−1}`.
pub fn grad_squared_norm(w: &[f64], q: f64) -> Vec<f64> {
    let n = lp_norm(w, q);
    if n == 0.0 {
        return vec![0.0; w.len()];
    }
    w.iter()
        .map(|&v| {
            // (|v|/n)^{q−1}·n keeps the powers in range
            sign_or_zero(v) * (v.abs() / n).powf(q - 1.0) * n
        })
        .collect()
}

/// `(∇ψ)⁻¹`: the gradient of the conjugate potential `½‖θ‖_{q*}²`.
pub fn grad_squared_norm_inverse(theta: &[f64], q: f64) -> Vec<f64> {
    grad_squared_norm(theta, conjugate_exponent(q))
}

/// `ψ(u) − ψ(v) − ⟨∇ψ(v), u − v⟩` for `ψ = ½‖·‖_q²`.
pub fn bregman_squared_norm(u: &[f64], v: &[f64], q: f64) -> f64 {
    let g = grad_squared_norm(v, q);
    let lin: f64 = g.iter().zip(u.iter().zip(v)).map(|(gi, (ui, vi))| gi * (ui - vi)).sum();
    0.5 * lp_norm(u, q).powi(2) - 0.5 * lp_norm(v, q).powi(2) - lin
}

/// Bregman projection onto the unit ℓq ball under `½‖·‖_q²`, which is the
/// radial rescaling `v / max(1, ‖v‖_q)`.
pub fn project_squared_norm(v: &[f64], q: f64) -> Vec<f64> {
    let n = lp_norm(v, q);
    if n <= 1.0 {
        v.to_vec()
    } else {
        v.iter().map(|c| c / n).collect()
    }
}

/// `∇ψ(p) = 1 + log p` for the entropy `Σ p log p`.
pub fn grad_entropy(p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| 1.0 + v.ln()).collect()
}

pub fn grad_entropy_inverse(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| (t - 1.0).exp()).collect()
}

/// KL projection of a positive vector onto the simplex: normalization.
pub fn project_simplex_kl(p: &[f64]) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    p.iter().map(|v| v / s).collect()
}

/// `Σ u log(u/v) − u + v`.
pub fn bregman_entropy(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() - a + b } else { b })
        .sum()
}

/// A source of stochastic subgradients.
pub trait StochasticOracle {
    fn dim(&self) -> usize;
    /// Writes a stochastic subgradient at `w` into `grad` and returns an
    /// unbiased estimate of the objective at `w`.
    fn sample(&mut self, w: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// Adapts a closure into a [`StochasticOracle`].
pub struct FnOracle<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: FnMut(&[f64], &mut [f64]) -> Result<f64>> StochasticOracle for FnOracle<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample(&mut self, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        (self.f)(w, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Uniform,
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorDescentConfig {
    pub q: f64,
    pub steps: usize,
    /// Bound on the dual norm of the stochastic gradients; sets the step
    /// size `D/(L√T)` unless `step_size` is given.
    pub lipschitz: f64,
    pub step_size: Option<f64>,
    pub averaging: Averaging,
    pub batch: usize,
    /// Number of evenly spaced transcript entries.
    pub transcript_points: usize,
}

impl MirrorDescentConfig {
    pub fn new(q: f64, steps: usize, lipschitz: f64) -> Self {
        Self { q, steps, lipschitz, step_size: None, averaging: Averaging::Uniform, batch: 1, transcript_points: 20 }
    }

    pub fn step_size_for(&self, d: usize) -> Result<f64> {
        if let Some(s) = self.step_size {
            return Ok(s);
        }
        let pot = Potential::for_exponent(self.q)?;
        Ok(pot.diameter(d) / (self.lipschitz * (self.steps as f64).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptEntry {
    pub step: usize,
    /// Mean objective estimate over the steps since the previous entry.
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    pub w: Vec<f64>,
    pub q: f64,
    pub steps: usize,
    pub step_size: f64,
    pub potential: Potential,
    pub averaging: Averaging,
    pub transcript: Vec<TranscriptEntry>,
}

impl TrainedModel {
    pub fn dual_norm(&self) -> f64 {
        lp_norm(&self.w, self.q)
    }
}

enum State {
    Norm { w: Vec<f64> },
    // log-weights of the 2d simplex coordinates
    Simplex { logp: Vec<f64> },
}

impl State {
    fn point(&self, d: usize, out: &mut [f64]) {
        match self {
            State::Norm { w } => out.copy_from_slice(w),
            State::Simplex { logp } => {
                for i in 0..d {
                    out[i] = logp[i].exp() - logp[d + i].exp();
                }
            }
        }
    }
}

/// Stochastic mirror descent from `w = 0`.
pub fn smd_minimize<O: StochasticOracle + ?Sized>(oracle: &mut O, cfg: &MirrorDescentConfig) -> Result<TrainedModel> {
    let d = oracle.dim();
    if d == 0 {
        return Err(Error::Config("objective dimension must be >= 1".into()));
    }
    if cfg.steps == 0 {
        return Err(Error::Config("step count must be >= 1".into()));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    if cfg.step_size.is_none() && !(cfg.lipschitz > 0.0 && cfg.lipschitz.is_finite()) {
        return Err(Error::Config(format!("Lipschitz bound must be > 0, got {}", cfg.lipschitz)));
    }
    let potential = Potential::for_exponent(cfg.q)?;
    let step = cfg.step_size_for(d)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("step size must be > 0, got {step}")));
    }
    let mut state = match potential {
        Potential::SquaredNorm { .. } => State::Norm { w: vec![0.0; d] },
        Potential::Entropy => State::Simplex { logp: vec![-((2 * d) as f64).ln(); 2 * d] },
    };
    let mut w = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut g_sum = vec![0.0; d];
    let mut transcript = Vec::new();
    let every = (cfg.steps / cfg.transcript_points.max(1)).max(1);
    let (mut window_loss, mut window_n) = (0.0, 0usize);

    for t in 0..cfg.steps {
        state.point(d, &mut w);
        for (a, v) in avg.iter_mut().zip(&w) {
            *a += (v - *a) / (t + 1) as f64;
        }
        g_sum.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..cfg.batch {
            loss += oracle.sample(&w, &mut grad)?;
            for (s, g) in g_sum.iter_mut().zip(&grad) {
                *s += g;
            }
        }
        let inv = 1.0 / cfg.batch as f64;
        g_sum.iter_mut().for_each(|g| *g *= inv);
        if g_sum.iter().any(|g| !g.is_finite()) || !loss.is_finite() {
            return Err(Error::Numeric { iteration: t, message: "stochastic gradient is not finite".into() });
        }
        window_loss += loss * inv;
        window_n += 1;
        if (t + 1) % every == 0 || t + 1 == cfg.steps {
            transcript.push(TranscriptEntry { step: t + 1, mean_loss: window_loss / window_n as f64 });
            window_loss = 0.0;
            window_n = 0;
        }
        match (&mut state, potential) {
            (State::Norm { w: cur }, Potential::SquaredNorm { q }) => {
                let mut theta = grad_squared_norm(cur, q);
                for (th, g) in theta.iter_mut().zip(&g_sum) {
                    *th -= step * g;
                }
                *cur = project_squared_norm(&grad_squared_norm_inverse(&theta, q), q);
            }
            (State::Simplex { logp }, Potential::Entropy) => {
                for i in 0..d {
                    logp[i] -= step * g_sum[i];
                    logp[d + i] += step * g_sum[i];
                }
                let m = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + logp.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                logp.iter_mut().for_each(|v| *v -= lse);
            }
            _ => unreachable!("state matches potential"),
        }
    }
    let out = match cfg.averaging {
        Averaging::Uniform => avg,
        Averaging::Last => {
            state.point(d, &mut w);
            w
        }
    };
    // rounding can push the average a hair outside the ball
    let out = project_squared_norm(&out, cfg.q);
    Ok(TrainedModel { w: out, q: cfg.q, steps: cfg.steps, step_size: step, potential, averaging: cfg.averaging, transcript })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear(c: Vec<f64>) -> FnOracle<impl FnMut(&[f64], &mut [f64]) -> Result<f64>> {
        let d = c.len();
        FnOracle {
            dim: d,
            f: move |w: &[f64], g: &mut [f64]| {
                g.copy_from_slice(&c);
                Ok(dot(&c, w))
            },
        }
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in [1.2, 1.5, 2.0, 3.0] {
            for _ in 0..100 {
                let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let back = grad_squared_norm_inverse(&grad_squared_norm(&w, q), q);
                for (a, b) in w.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-10, "q={q}");
                }
            }
        }
        let p: Vec<f64> = (1..=8).map(|i| i as f64 / 36.0).collect();
        let back = grad_entropy_inverse(&grad_entropy(&p));
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_converges() {
        let w0 = vec![0.3, -0.2, 0.1];
        let target = w0.clone();
        let mut oracle = FnOracle {
            dim: 3,
            f: move |w: &[f64], g: &mut [f64]| {
                let mut v = 0.0;
                for i in 0..3 {
                    g[i] = 2.0 * (w[i] - target[i]);
                    v += (w[i] - target[i]).powi(2);
                }
                Ok(v)
            },
        };
        let mut cfg = MirrorDescentConfig::new(2.0, 10_000, 4.0);
        cfg.averaging = Averaging::Last;
        let m = smd_minimize(&mut oracle, &cfg).unwrap();
        for (a, b) in m.w.iter().zip(&w0) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn linear_l2_hits_boundary() {
        let c = vec![0.6, -0.8];
        let cfg = MirrorDescentConfig::new(2.0, 100_000, 1.0);
        let m = smd_minimize(&mut linear(c.clone()), &cfg).unwrap();
        assert!((m.w[0] + 0.6).abs() < 1e-2 && (m.w[1] - 0.8).abs() < 1e-2, "{:?}", m.w);
    }

    #[test]
    fn linear_entropy_hits_vertex() {
        let c = vec![0.2, -0.9, 0.5, 0.1];
        let cfg = MirrorDescentConfig::new(1.0, 100_000, 0.9);
        let m = smd_minimize(&mut linear(c), &cfg).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.0];
        for (a, b) in m.w.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-2, "{:?}", m.w);
        }
        assert!(m.dual_norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn projection_is_bregman_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q in [1.5, 2.0] {
            for _ in 0..20 {
                let v: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let p = project_squared_norm(&v, q);
                assert!(lp_norm(&p, q) <= 1.0 + 1e-12);
                let best = bregman_squared_norm(&p, &v, q);
                for _ in 0..1_000 {
                    let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let u = project_squared_norm(&u, q);
                    assert!(bregman_squared_norm(&u, &v, q) >= best - 1e-8);
                }
            }
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut oracle = FnOracle {
            dim: 2,
            f: |_w: &[f64], g: &mut [f64]| {
                g[0] = f64::NAN;
                Ok(0.0)
            },
        };
        let err = smd_minimize(&mut oracle, &MirrorDescentConfig::new(2.0, 10, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Numeric { iteration: 0, .. }));
    }
}
