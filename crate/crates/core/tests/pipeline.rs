//! Learners run end to end on planted data.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_halfspace::loss::empirical_robust_risk_lp;
use robust_halfspace::norm::{dot, lp_norm};
use robust_halfspace::rcn::mirror::{smd_minimize, FnOracle, MirrorDescentConfig};
use robust_halfspace::rcn::train::train;
use robust_halfspace::{
    convexify, generate, rerm, rerm_feature_mapped, AffineImageHull, Dataset, Label, LabeledExample, NormBallAdversary,
    NormSpec, PlantSpec, PlantedSampler, RcnConfig, RermConfig, RermOutcome, SquaredNormLift, SurrogateKind,
    SurrogateSpec, Vector,
};

fn ring_data(seed: u64, m: usize, contradict: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::new();
    while examples.len() < m {
        let x = vec![rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
        let s = dot(&x, &x) - 0.25;
        if s.abs() > 0.1 {
            let y = if s > 0.0 { Label::Pos } else { Label::Neg };
            examples.push(LabeledExample::new(Vector::new(x).unwrap(), y));
        }
    }
    if contradict {
        let first = examples[0].clone();
        examples.push(LabeledExample::new(first.x.clone(), first.y.flipped()));
    }
    Dataset::new(examples).unwrap()
}

fn ring_adversary() -> AffineImageHull {
    let r = 0.02;
    let base = convexify(vec![vec![0.0, 0.0], vec![r, 0.0], vec![-r, 0.0], vec![0.0, r], vec![0.0, -r]]).unwrap();
    AffineImageHull::new(Arc::new(base), Arc::new(SquaredNormLift(2)), 5, 0).unwrap()
}

#[test]
fn feature_space_plant_is_learned() {
    let data = ring_data(1, 150, false);
    let cfg = RermConfig { bias: true, ..Default::default() };
    let res = rerm_feature_mapped(&data, &ring_adversary(), &cfg).unwrap();
    let h = res.separator().expect("realizable in feature space");
    assert_eq!(h.dim(), 3);
}

#[test]
fn contradictory_feature_space_data_is_infeasible() {
    let data = ring_data(2, 80, true);
    let cfg = RermConfig { bias: true, ..Default::default() };
    let res = rerm_feature_mapped(&data, &ring_adversary(), &cfg).unwrap();
    assert!(matches!(res.outcome, RermOutcome::Infeasible));
}

#[test]
fn affine_plant_with_bias() {
    let mut spec = PlantSpec::new(3, 300, 0.1, NormSpec::L2, 0.0, 4);
    spec.bias = true;
    let data = generate(&spec).unwrap();
    let adv = NormBallAdversary::new(3, 0.05, NormSpec::L2).unwrap();
    let res = rerm(&data, &adv, &RermConfig { bias: true, ..Default::default() }).unwrap();
    let h = res.separator().unwrap();
    assert_eq!(empirical_robust_risk_lp(h, &data, 0.05, NormSpec::L2).unwrap(), 0.0);
}

#[test]
fn robust_separator_generalizes() {
    let spec = PlantSpec::new(5, 400, 0.1, NormSpec::L2, 0.0, 9);
    let train_set = generate(&spec).unwrap();
    let adv = NormBallAdversary::new(5, 0.05, NormSpec::L2).unwrap();
    let h = rerm(&train_set, &adv, &RermConfig::default()).unwrap().separator().unwrap().clone();
    // fresh points from an independent stream of the same plant
    let mut s = PlantedSampler::new(&spec, 7).unwrap();
    let ex: Vec<LabeledExample> = (0..5000)
        .map(|_| {
            let d = s.draw().unwrap();
            LabeledExample::new(Vector::new(d.x).unwrap(), d.noisy)
        })
        .collect();
    let fresh = Dataset::new(ex).unwrap();
    let risk = empirical_robust_risk_lp(&h, &fresh, 0.05, NormSpec::L2).unwrap();
    assert!(risk < 0.1, "holdout robust risk {risk}");
}

fn holdout_error(w: &[f64], plant: &PlantSpec, n: usize, threshold: f64, clean: bool) -> f64 {
    let mut s = PlantedSampler::new(plant, 1).unwrap();
    let mut bad = 0;
    for _ in 0..n {
        let d = s.draw().unwrap();
        let y = if clean { d.clean } else { d.noisy };
        if y.sign() * dot(w, &d.x) <= threshold {
            bad += 1;
        }
    }
    bad as f64 / n as f64
}

#[test]
fn noiseless_entropy_run_meets_epsilon() {
    let spec = SurrogateSpec::new(0.2, 0.0, 0.1, NormSpec::LINF).unwrap();
    let plant = PlantSpec::new(10, 1, 0.2, NormSpec::LINF, 0.0, 11);
    let mut stream = PlantedSampler::new(&plant, 0).unwrap();
    let cfg = RcnConfig { steps: Some(50_000), ..Default::default() };
    let m = train(SurrogateKind::Leaky, &mut stream, &spec, &cfg).unwrap();
    assert!(lp_norm(&m.w, 1.0) <= 1.0 + 1e-9);
    let err = holdout_error(&m.w, &plant, 100_000, 0.1, true);
    assert!(err <= 0.1, "margin error {err}");
}

#[test]
fn leaky_and_glm_agree() {
    for seed in 0..10u64 {
        let spec = SurrogateSpec::new(0.2, 0.2, 0.1, NormSpec::L2).unwrap();
        let plant = PlantSpec::new(5, 1, 0.2, NormSpec::L2, 0.2, 40 + seed);
        let cfg = RcnConfig { steps: Some(20_000), ..Default::default() };
        let mut errs = Vec::new();
        for kind in [SurrogateKind::Leaky, SurrogateKind::Glm] {
            let mut stream = PlantedSampler::new(&plant, 0).unwrap();
            let m = train(kind, &mut stream, &spec, &cfg).unwrap();
            errs.push(holdout_error(&m.w, &plant, 20_000, 0.1, false));
        }
        assert!((errs[0] - errs[1]).abs() <= 0.03, "seed {seed}: {errs:?}");
        assert!(errs.iter().all(|&e| e <= 0.32), "seed {seed}: {errs:?}");
    }
}

#[test]
fn mirror_descent_finds_linear_minimizers() {
    let c = [0.3, -0.8, 0.5];
    for q in [2.0, 1.0] {
        let mut oracle = FnOracle {
            dim: 3,
            f: |w: &[f64], g: &mut [f64]| -> robust_halfspace::Result<f64> {
                g.copy_from_slice(&c);
                Ok(dot(&c, w))
            },
        };
        let mut cfg = MirrorDescentConfig::new(q, 20_000, lp_norm(&c, if q == 1.0 { f64::INFINITY } else { 2.0 }));
        cfg.averaging = robust_halfspace::rcn::mirror::Averaging::Last;
        let m = smd_minimize(&mut oracle, &cfg).unwrap();
        let target: Vec<f64> = if q == 2.0 {
            let n = lp_norm(&c, 2.0);
            c.iter().map(|v| -v / n).collect()
        } else {
            vec![0.0, 1.0, 0.0]
        };
        let diff: Vec<f64> = m.w.iter().zip(&target).map(|(a, b)| a - b).collect();
        assert!(lp_norm(&diff, 2.0) <= 1e-2, "q={q}: {:?}", m.w);
    }
}

#[test]
fn noise_rate_matches_plant() {
    let data = generate(&PlantSpec::new(3, 100_000, 0.1, NormSpec::L2, 0.3, 5)).unwrap();
    let w = data.meta().unwrap().w_star.clone();
    let flips = data.iter().filter(|e| e.y.sign() * dot(&w, &e.x) < 0.0).count() as f64 / 1e5;
    assert!((flips - 0.3).abs() <= 0.005, "{flips}");
}
