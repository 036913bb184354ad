//! ℓp norms, their duals and the vectors attaining the dual norm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance used for every membership and sign comparison
/// unless a caller overrides it.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A primal norm exponent `p ∈ [1, ∞]`.
///
/// The dual exponent is always derived from `p` so `1/p + 1/q = 1` holds by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    p: f64,
}

impl NormSpec {
    pub const L1: NormSpec = NormSpec { p: 1.0 };
    pub const L2: NormSpec = NormSpec { p: 2.0 };
    pub const LINF: NormSpec = NormSpec { p: f64::INFINITY };

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidInput(format!(
                "norm exponent must lie in [1, inf], got {p}"
            )));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Dual exponent `q` with `1/p + 1/q = 1`.
    pub fn q(&self) -> f64 {
        conjugate_exponent(self.p)
    }

    /// The norm whose exponent is `q`.
    pub fn dual(&self) -> NormSpec {
        NormSpec { p: self.q() }
    }

    pub fn is_infinite(&self) -> bool {
        self.p.is_infinite()
    }

    /// Evaluates `‖v‖_p`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.p)
    }

    /// Evaluates `‖v‖_q`.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.q())
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_exponent(self.p, f)
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormSpec::new(parse_exponent(s)?)
    }
}

impl Serialize for NormSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        exponent_serde::serialize(&self.p, serializer)
    }
}

impl<'de> Deserialize<'de> for NormSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let p = exponent_serde::deserialize(deserializer)?;
        NormSpec::new(p).map_err(serde::de::Error::custom)
    }
}

/// `p / (p - 1)` with the extended-real convention at 1 and ∞.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Parses a finite decimal or the token `inf`.
pub fn parse_exponent(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("cannot parse norm exponent {s:?}")))
}

fn fmt_exponent(p: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_infinite() {
        write!(f, "inf")
    } else {
        write!(f, "{p}")
    }
}

/// Serde helpers for exponents that may be infinite: finite values are JSON
/// numbers, infinity is the string `"inf"`.
pub mod exponent_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if p.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(*p)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Num(p) => Ok(p),
            Repr::Str(s) => super::parse_exponent(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// `‖v‖_p` without validation. Scaled by the largest magnitude so large
/// exponents do not overflow.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    if p == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    if p == 2.0 {
        let s: f64 = v.iter().map(|x| (x / max) * (x / max)).sum();
        return max * s.sqrt();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / max).powf(p)).sum();
    max * s.powf(1.0 / p)
}

/// Validated `‖v‖_p`.
pub fn norm(v: &[f64], p: f64) -> Result<f64> {
    check_finite(v)?;
    NormSpec::new(p)?;
    Ok(lp_norm(v, p))
}

/// Validated `‖v‖_q` where `q` is dual to `spec`.
pub fn dual_norm(v: &[f64], spec: NormSpec) -> Result<f64> {
    check_finite(v)?;
    Ok(spec.dual_norm(v))
}

/// A vector `u` with `‖u‖_p ≤ 1` maximizing `⟨u, v⟩`, so `⟨u, v⟩ = ‖v‖_q`.
///
/// Ties for `p = 1` go to the lowest index; zero coordinates get zero weight.
pub fn dual_maximizer(v: &[f64], p: f64) -> Vec<f64> {
    let d = v.len();
    let q = conjugate_exponent(p);
    let mut u = vec![0.0; d];
    if v.iter().all(|&x| x == 0.0) {
        return u;
    }
    if p.is_infinite() {
        for (ui, &vi) in u.iter_mut().zip(v) {
            *ui = sign_or_zero(vi);
        }
    } else if p == 1.0 {
        let mut best = 0;
        for i in 1..d {
            if v[i].abs() > v[best].abs() {
                best = i;
            }
        }
        u[best] = sign_or_zero(v[best]);
    } else {
        // u_i = sign(v_i) (|v_i| / ‖v‖_q)^(q-1)
        let nq = lp_norm(v, q);
        for (ui, &vi) in u.iter_mut().zip(v) {
            *ui = sign_or_zero(vi) * (vi.abs() / nq).powf(q - 1.0);
        }
    }
    u
}

pub(crate) fn sign_or_zero(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_finite(v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "coordinate {i} is not finite ({})",
            v[i]
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(norm(&[1.0, -2.0, 3.0], f64::INFINITY).unwrap(), 3.0);
        // (1 + 2^1.5 + 3^1.5)^(2/3)
        let direct = (1.0_f64 + 2.0_f64.powf(1.5) + 3.0_f64.powf(1.5)).powf(1.0 / 1.5);
        let got = norm(&[1.0, -2.0, 3.0], 1.5).unwrap();
        assert!((got - direct).abs() < 1e-12);
        assert!((got - 4.334_622_872_113_609).abs() < 1e-12);
        assert_eq!(norm(&[0.0, 0.0], 1.5).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            norm(&[1.0, f64::NAN], 2.0),
            Err(Error::InvalidInput(_))
        ));
        assert!(dual_norm(&[f64::INFINITY], NormSpec::L2).is_err());
        assert!(NormSpec::new(0.5).is_err());
    }

    #[test]
    fn dual_norm_examples() {
        assert_eq!(dual_norm(&[3.0, 4.0], NormSpec::L2).unwrap(), 5.0);
        assert_eq!(dual_norm(&[1.0, -2.0], NormSpec::LINF).unwrap(), 3.0);
        assert_eq!(dual_norm(&[1.0, -2.0], NormSpec::L1).unwrap(), 2.0);
    }

    #[test]
    fn dual_norm_dominates_sampled_l1_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = [1.0, -2.0];
        let dn = dual_norm(&v, NormSpec::L1).unwrap();
        for _ in 0..10_000 {
            let mut u = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = lp_norm(&u, 1.0);
            if n > 1.0 {
                u.iter_mut().for_each(|x| *x /= n);
            }
            assert!(dot(&u, &v) <= dn + 1e-12);
        }
    }

    #[test]
    fn conjugates() {
        assert_eq!(NormSpec::L1.q(), f64::INFINITY);
        assert_eq!(NormSpec::LINF.q(), 1.0);
        assert_eq!(NormSpec::new(3.0).unwrap().q(), 1.5);
        assert_eq!("inf".parse::<NormSpec>().unwrap(), NormSpec::LINF);
        let json = serde_json::to_string(&NormSpec::LINF).unwrap();
        assert_eq!(json, "\"inf\"");
        let back: NormSpec = serde_json::from_str("1.5").unwrap();
        assert_eq!(back.p(), 1.5);
    }

    #[test]
    fn maximizer_attains_dual_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &p in &[1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            for _ in 0..200 {
                let v: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                let u = dual_maximizer(&v, p);
                assert!(lp_norm(&u, p) <= 1.0 + 1e-12);
                let q = conjugate_exponent(p);
                assert!((dot(&u, &v) - lp_norm(&v, q)).abs() < 1e-9);
            }
        }
    }
}
