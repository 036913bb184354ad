//! The leaky hinge and GLM surrogates.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::norm::{dot, NormSpec};
use crate::types::check_dim;

/// Parameters of the noisy margin problem and the derived surrogate slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurrogateSpec {
    pub gamma: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub p: NormSpec,
}

impl SurrogateSpec {
    pub fn new(gamma: f64, eta: f64, epsilon: f64, p: NormSpec) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1], got {gamma}")));
        }
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::Config(format!("noise rate must be in [0, 1/2), got {eta}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must be in (0, 1), got {epsilon}")));
        }
        let spec = Self { gamma, eta, epsilon, p };
        let lambda = spec.lambda();
        if !(eta <= lambda && lambda <= 0.5) {
            return Err(Error::Internal(format!("slope {lambda} outside [{eta}, 1/2]")));
        }
        Ok(spec)
    }

    pub fn q(&self) -> f64 {
        self.p.q()
    }

    /// `λ = (εγ/2 + η) / (1 + εγ)`.
    pub fn lambda(&self) -> f64 {
        let eg = self.epsilon * self.gamma;
        (eg / 2.0 + self.eta) / (1.0 + eg)
    }

    /// Target suboptimality for the leaky surrogate, `λ − η`.
    pub fn eps_prime(&self) -> f64 {
        self.lambda() - self.eta
    }

    /// `εγ(1 − 2η) / (2(1 + εγ))`, equal to [`Self::eps_prime`].
    pub fn eps_prime_closed_form(&self) -> f64 {
        let eg = self.epsilon * self.gamma;
        eg * (1.0 - 2.0 * self.eta) / (2.0 * (1.0 + eg))
    }

    /// Target suboptimality for the GLM surrogate, `εγ(1 − 2η)/16`.
    pub fn glm_eps_prime(&self) -> f64 {
        self.epsilon * self.gamma * (1.0 - 2.0 * self.eta) / 16.0
    }

    /// Bound on `|φ'|`, hence on the leaky gradient norm when `‖x‖_p ≤ 1`.
    pub fn leaky_lipschitz(&self) -> f64 {
        (1.0 - self.lambda()) / self.gamma
    }

    /// `2η(1 − λ)`: the surrogate value at the planted halfspace is at most
    /// this when every margin exceeds γ.
    pub fn planted_value_bound(&self) -> f64 {
        2.0 * self.eta * (1.0 - self.lambda())
    }

    /// Lower bound on the expected surrogate for a `w` whose clean
    /// `γ/2`-margin violation probability is `p_margin`.
    pub fn surrogate_lower_bound(&self, p_margin: f64) -> f64 {
        let (l, e, g) = (self.lambda(), self.eta, self.gamma);
        (e - l) / g + 0.5 * (1.0 - 2.0 * l) * (1.0 - e) * p_margin + l + e - 2.0 * l * e
    }

    /// Noisy `γ/2`-margin error implied by surrogate suboptimality `sub`.
    pub fn margin_error_bound(&self, sub: f64) -> f64 {
        let (l, e, g) = (self.lambda(), self.eta, self.gamma);
        e + 2.0 * (sub + (l - e) * (1.0 / g - 1.0)) / (1.0 - 2.0 * l)
    }
}

/// The leaky hinge: `λ(1 − s/γ)` for `s > γ`, `(1 − λ)(1 − s/γ)` otherwise.
pub fn phi(s: f64, lambda: f64, gamma: f64) -> f64 {
    let t = 1.0 - s / gamma;
    if s > gamma {
        lambda * t
    } else {
        (1.0 - lambda) * t
    }
}

/// A subgradient of [`phi`]; the left slope at the kink.
pub fn phi_slope(s: f64, lambda: f64, gamma: f64) -> f64 {
    if s > gamma {
        -lambda / gamma
    } else {
        -(1.0 - lambda) / gamma
    }
}

/// `η·φ(−z) + (1 − η)·φ(z)`: the expected surrogate at a point whose clean
/// signed score is `z`.
pub fn pointwise_surrogate(z: f64, lambda: f64, eta: f64, gamma: f64) -> f64 {
    eta * phi(-z, lambda, gamma) + (1.0 - eta) * phi(z, lambda, gamma)
}

/// The same quantity written as a linear part plus two indicator
/// corrections.
pub fn pointwise_surrogate_decomposed(z: f64, lambda: f64, eta: f64, gamma: f64) -> f64 {
    let r = z / gamma;
    let mut v = (eta - lambda) * r + lambda + eta - 2.0 * lambda * eta;
    if (-gamma..=gamma).contains(&z) {
        v += (1.0 - eta) * (1.0 - 2.0 * lambda) * (1.0 - r);
    } else if z < -gamma {
        v += (1.0 - 2.0 * lambda) * (1.0 - 2.0 * eta - r);
    }
    v
}

/// Empirical mean of `φ(y⟨w,x⟩)`.
pub fn surrogate_value(w: &[f64], data: &Dataset, spec: &SurrogateSpec) -> Result<f64> {
    check_dim(data.dim(), w.len())?;
    let (l, g) = (spec.lambda(), spec.gamma);
    let total: f64 = data.iter().map(|ex| phi(ex.y.sign() * dot(w, &ex.x), l, g)).sum();
    Ok(total / data.len() as f64)
}

/// Stochastic gradient of the leaky surrogate at one example, `y ∈ {±1}`.
pub fn leaky_grad(w: &[f64], x: &[f64], y: f64, lambda: f64, gamma: f64, out: &mut [f64]) -> f64 {
    let s = y * dot(w, x);
    let c = phi_slope(s, lambda, gamma) * y;
    for (o, xi) in out.iter_mut().zip(x) {
        *o = c * xi;
    }
    phi(s, lambda, gamma)
}

/// Link function: `η` below `−γ`, `1 − η` above `γ`, affine with slope
/// `(1 − 2η)/(2γ)` in between.
pub fn link_u(s: f64, eta: f64, gamma: f64) -> f64 {
    if s < -gamma {
        eta
    } else if s > gamma {
        1.0 - eta
    } else {
        (1.0 - 2.0 * eta) / (2.0 * gamma) * s + 0.5
    }
}

/// `∫₀^a u(s) ds` in closed form.
pub fn link_integral(a: f64, eta: f64, gamma: f64) -> f64 {
    let k = (1.0 - 2.0 * eta) / (2.0 * gamma);
    let mid = |t: f64| k * t * t / 2.0 + t / 2.0;
    if a > gamma {
        mid(gamma) + (1.0 - eta) * (a - gamma)
    } else if a < -gamma {
        mid(-gamma) + eta * (a + gamma)
    } else {
        mid(a)
    }
}

/// `∫₀^{⟨w,x⟩} (u(s) − y) ds` with `y ∈ {0, 1}`.
pub fn glm_loss(w: &[f64], x: &[f64], y01: f64, eta: f64, gamma: f64) -> f64 {
    let a = dot(w, x);
    link_integral(a, eta, gamma) - y01 * a
}

/// `(u(⟨w,x⟩) − y)·x`, written into `out`; returns the loss.
pub fn glm_grad(w: &[f64], x: &[f64], y01: f64, eta: f64, gamma: f64, out: &mut [f64]) -> f64 {
    let a = dot(w, x);
    let c = link_u(a, eta, gamma) - y01;
    for (o, xi) in out.iter_mut().zip(x) {
        *o = c * xi;
    }
    link_integral(a, eta, gamma) - y01 * a
}
