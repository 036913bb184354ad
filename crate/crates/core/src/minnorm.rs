//! Minimum-norm point of a finite convex hull (Wolfe's algorithm).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norm::dot;

#[derive(Debug, Clone)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    /// Convex weights over the input points.
    pub weights: Vec<f64>,
    pub iterations: usize,
}

/// Nearest point of `conv(points)` to the origin.
///
/// Major and minor cycles follow Wolfe (1976); the number of cycles is capped
/// at `max(10·k·d, 64)`.
pub fn min_norm_point(points: &[Vec<f64>]) -> Result<MinNormPoint> {
    let k = points.len();
    if k == 0 {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidInput("points have mixed dimensions".into()));
    }
    let cap = (10 * k * d).max(64);
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0_f64, f64::max).max(1e-300);
    let opt_tol = 1e-12 * scale;
    let pos_tol = 1e-12;

    let start = (0..k)
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .unwrap();
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    let mut iterations = 0;

    'major: while iterations < cap {
        iterations += 1;
        let (j, xj) = (0..k)
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if dot(&x, &x) - xj <= opt_tol || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);

        loop {
            let alpha = affine_minimizer(points, &active);
            if alpha.iter().all(|&a| a > pos_tol) {
                lambda = alpha;
                x = combine(points, &active, &lambda);
                continue 'major;
            }
            let mut theta = 1.0_f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= pos_tol {
                    let denom = l - a;
                    theta = theta.min(if denom > 0.0 { l / denom } else { 0.0 });
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            // drop the vanishing weights; at least one goes
            let mut keep_a = Vec::with_capacity(active.len());
            let mut keep_l = Vec::with_capacity(active.len());
            let min_idx = lambda
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            for (i, (&a, &l)) in active.iter().zip(&lambda).enumerate() {
                if l > pos_tol && i != min_idx {
                    keep_a.push(a);
                    keep_l.push(l);
                }
            }
            active = keep_a;
            lambda = keep_l;
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            x = combine(points, &active, &lambda);
            iterations += 1;
            if active.len() <= 1 || iterations >= cap {
                continue 'major;
            }
        }
    }

    let mut weights = vec![0.0; k];
    for (&a, &l) in active.iter().zip(&lambda) {
        weights[a] += l;
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric { iteration: iterations, message: "min-norm point diverged".into() });
    }
    Ok(MinNormPoint { point: x, weights, iterations })
}

fn combine(points: &[Vec<f64>], active: &[usize], lambda: &[f64]) -> Vec<f64> {
    let d = points[0].len();
    let mut x = vec![0.0; d];
    for (&a, &l) in active.iter().zip(lambda) {
        for (xi, pi) in x.iter_mut().zip(&points[a]) {
            *xi += l * pi;
        }
    }
    x
}

/// Weights `α` with `Σα = 1` minimizing `‖Σ α_i p_i‖²` over the active set.
fn affine_minimizer(points: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let s = active.len();
    let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
    for (r, &a) in active.iter().enumerate() {
        for (c, &b) in active.iter().enumerate() {
            kkt[(r, c)] = dot(&points[a], &points[b]);
        }
        kkt[(r, s)] = 1.0;
        kkt[(s, r)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s + 1);
    rhs[s] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|v| v.iter().all(|c| c.is_finite()))
        .unwrap_or_else(|| {
            kkt.svd(true, true)
                .solve(&rhs, 1e-14)
                .unwrap_or_else(|_| DVector::from_element(s + 1, 1.0 / s as f64))
        });
    sol.iter().take(s).copied().collect()
}
