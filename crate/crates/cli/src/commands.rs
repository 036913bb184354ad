use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};

use robust_halfspace::cert::{cert_with_mode, CertMode, CertResult};
use robust_halfspace::datagen::{generate, PlantSpec, PlantedSampler};
use robust_halfspace::loss::{clean_error, margin_loss, raw_margin_error};
use robust_halfspace::norm::{dot, lp_norm};
use robust_halfspace::rcn::mirror::Averaging;
use robust_halfspace::rcn::surrogate::{phi, surrogate_value};
use robust_halfspace::rcn::train::{train, DatasetSource};
use robust_halfspace::reduction::{approx_sep_from_eval, ApproxSepResult, LpEvaluator};
use robust_halfspace::rerm::{rerm, RermConfig, RermOutcome};
use robust_halfspace::rng::derive_seed;
use robust_halfspace::{
    AdversarySpec, Dataset, Error, ModelFile, NormBallAdversary, NormSpec, PerturbationSet, RcnConfig, SurrogateKind,
    SurrogateSpec, TrainedModel,
};

use crate::args::*;
use crate::record::RunRecord;

pub const EXIT_INFEASIBLE: i32 = 4;

/// What a command produced: its record and exit code, plus whether stdout
/// is already taken by a stream.
pub struct Outcome {
    pub record: RunRecord,
    pub code: i32,
    pub stdout_used: bool,
    pub summary: String,
}

impl Outcome {
    fn ok(record: RunRecord, summary: String) -> Self {
        Self { record, code: 0, stdout_used: false, summary }
    }
}

pub type CmdResult = std::result::Result<Outcome, Error>;

fn load_adversary(text: &str, dim: usize) -> Result<Arc<dyn PerturbationSet>, Error> {
    let trimmed = text.trim();
    let json = if trimmed.starts_with('{') {
        trimmed.to_string()
    } else {
        std::fs::read_to_string(trimmed)?
    };
    let spec: AdversarySpec =
        serde_json::from_str(&json).map_err(|e| Error::Config(format!("bad adversary description: {e}")))?;
    spec.build(dim)
}

fn cert_mode(m: CertModeArg) -> CertMode {
    match m {
        CertModeArg::Auto => CertMode::Auto,
        CertModeArg::Ellipsoid => CertMode::Ellipsoid,
    }
}

fn surrogate_kind(s: SurrogateArg) -> SurrogateKind {
    match s {
        SurrogateArg::Leaky => SurrogateKind::Leaky,
        SurrogateArg::Glm => SurrogateKind::Glm,
    }
}

fn exponent_value(q: f64) -> Value {
    if q.is_infinite() {
        json!("inf")
    } else {
        json!(q)
    }
}

fn secs(start: Instant) -> Value {
    json!(start.elapsed().as_secs_f64())
}

pub fn gen(args: &GenArgs, seed: u64, config: Value) -> CmdResult {
    let start = Instant::now();
    let spec = PlantSpec {
        dim: args.d,
        m: args.m,
        gamma: args.gamma,
        p: args.p,
        eta: args.eta,
        seed,
        w_star: args.w_star.clone(),
        bias: args.bias,
        margin_slack: args.margin_slack,
    };
    spec.validate()?;
    let data = generate(&spec)?;
    let csv_path = if args.out.extension().is_some_and(|e| e == "csv") {
        if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        args.out.clone()
    } else {
        std::fs::create_dir_all(&args.out)?;
        args.out.join("data.csv")
    };
    data.save(&csv_path)?;
    let meta = data.meta().expect("generated data has metadata");
    let flips = data
        .iter()
        .filter(|ex| ex.y.sign() * (dot(&meta.w_star, &ex.x) + meta.bias) <= 0.0)
        .count();
    let min_margin = data
        .iter()
        .map(|ex| (dot(&meta.w_star, &ex.x) + meta.bias).abs())
        .fold(f64::INFINITY, f64::min);
    let mut rec = RunRecord::new("gen", seed, config);
    rec.metric("m", data.len());
    rec.metric("d", data.dim());
    rec.metric("flip_fraction", flips as f64 / data.len() as f64);
    rec.metric("min_margin", min_margin);
    rec.timing.insert("wall_seconds".into(), secs(start));
    rec.artifact(&csv_path);
    rec.artifact(&robust_halfspace::dataset::sidecar_path(&csv_path));
    let summary = format!("wrote {} examples to {}", data.len(), csv_path.display());
    Ok(Outcome::ok(rec, summary))
}

pub fn train_rerm(args: &TrainRermArgs, seed: u64, config: Value) -> CmdResult {
    let start = Instant::now();
    let data = Dataset::load(&args.data)?;
    let adv = load_adversary(&args.adversary, data.dim())?;
    let cfg = RermConfig { bits: args.bits, tau: args.tau, bias: args.bias, cert_mode: cert_mode(args.cert_mode) };
    let res = rerm(&data, adv.as_ref(), &cfg)?;
    let mut rec = RunRecord::new("train-rerm", seed, config);
    rec.metric("outer_iterations", res.stats.outer_iterations);
    rec.metric("outer_budget", res.stats.outer_budget);
    rec.metric("cert_calls", res.stats.cert_calls);
    rec.metric("cert_oracle_calls", res.stats.cert_oracle_calls);
    rec.metric("tau", res.stats.tau);
    rec.timing.insert("wall_seconds".into(), secs(start));
    match res.outcome {
        RermOutcome::Separator(h) => {
            let fcfg = robust_halfspace::FeasibilityConfig::new(1.0, args.bits)?;
            let risk = robust_halfspace::empirical_robust_risk(adv.as_ref(), &h, &data, &fcfg, cfg.cert_mode)?;
            rec.metric("outcome", "separator");
            rec.metric("empirical_robust_risk", risk);
            rec.metric("clean_error", clean_error(&h, &data)?);
            let model = ModelFile::from_halfspace(&h, None);
            if let Some(out) = &args.out {
                model.save(out)?;
                rec.artifact(out);
            }
            rec.model = Some(model);
            let summary = format!(
                "separator found after {} outer iterations; empirical robust risk {risk}",
                res.stats.outer_iterations
            );
            Ok(Outcome::ok(rec, summary))
        }
        RermOutcome::Infeasible => {
            let note = res.note.unwrap_or_default();
            rec.metric("outcome", "infeasible");
            rec.metric("note", note.clone());
            Ok(Outcome { record: rec, code: EXIT_INFEASIBLE, stdout_used: false, summary: format!("infeasible: {note}") })
        }
    }
}

fn rcn_setup(a: &RcnArgs) -> Result<(SurrogateSpec, RcnConfig), Error> {
    let spec = SurrogateSpec::new(a.gamma, a.eta, a.epsilon, a.p)?;
    if !(a.margin_fraction > 0.0 && a.margin_fraction < 1.0) {
        return Err(Error::Config(format!("margin fraction must be in (0, 1), got {}", a.margin_fraction)));
    }
    let cfg = RcnConfig {
        steps: a.steps,
        max_steps: a.max_steps,
        batch: a.batch,
        averaging: match a.averaging {
            AveragingArg::Uniform => Averaging::Uniform,
            AveragingArg::Last => Averaging::Last,
        },
        step_size: a.step_size,
    };
    Ok((spec, cfg))
}

fn model_metrics(rec: &mut RunRecord, spec: &SurrogateSpec, m: &TrainedModel) {
    rec.metric("steps", m.steps);
    rec.metric("step_size", m.step_size);
    rec.metric("dual_norm", m.dual_norm());
    rec.metric("lambda", spec.lambda());
    rec.metric("eps_prime", spec.eps_prime());
    rec.metric("bound", spec.eta + spec.epsilon);
    rec.metric("transcript", serde_json::to_value(&m.transcript).unwrap_or(Value::Null));
}

/// Holdout statistics from a planted stream.
pub struct HoldoutStats {
    pub noisy_margin_error: f64,
    pub clean_margin_error: f64,
    pub surrogate: f64,
}

pub fn holdout_stats(
    sampler: &mut PlantedSampler,
    w: &[f64],
    n: usize,
    threshold: f64,
    spec: &SurrogateSpec,
) -> Result<HoldoutStats, Error> {
    let (mut noisy, mut clean, mut sur) = (0usize, 0usize, 0.0);
    for _ in 0..n {
        let d = sampler.draw()?;
        let s = dot(w, &d.x);
        if d.noisy.sign() * s <= threshold {
            noisy += 1;
        }
        if d.clean.sign() * s <= threshold {
            clean += 1;
        }
        sur += phi(d.noisy.sign() * s, spec.lambda(), spec.gamma);
    }
    let n = n.max(1) as f64;
    Ok(HoldoutStats { noisy_margin_error: noisy as f64 / n, clean_margin_error: clean as f64 / n, surrogate: sur / n })
}

pub fn train_rcn(args: &TrainRcnArgs, seed: u64, config: Value) -> CmdResult {
    let start = Instant::now();
    let (spec, cfg) = rcn_setup(&args.rcn)?;
    let kind = surrogate_kind(args.rcn.surrogate);
    let threshold = args.rcn.margin_fraction * spec.gamma;
    let mut rec = RunRecord::new("train-rcn", seed, config);
    let model = match &args.data {
        Some(path) => {
            let data = Dataset::load(path)?;
            data.check_norm_bound(spec.p, 1e-9)?;
            let mut source = DatasetSource::new(&data, derive_seed(seed, "train-rcn/source", 0));
            let m = train(kind, &mut source, &spec, &cfg)?;
            rec.metric("train_noisy_margin_error", raw_margin_error(&m.w, &data, threshold)?);
            rec.metric("train_surrogate", surrogate_value(&m.w, &data, &spec)?);
            m
        }
        None => {
            let d = args.d.ok_or_else(|| Error::Config("either --data or --d (planted stream) is required".into()))?;
            let plant = PlantSpec::new(d, 1, spec.gamma, spec.p, spec.eta, seed);
            let mut stream = PlantedSampler::new(&plant, 0)?;
            let m = train(kind, &mut stream, &spec, &cfg)?;
            if args.holdout > 0 {
                let mut hold = PlantedSampler::new(&plant, 1)?;
                let st = holdout_stats(&mut hold, &m.w, args.holdout, threshold, &spec)?;
                rec.metric("holdout_noisy_margin_error", st.noisy_margin_error);
                rec.metric("holdout_clean_margin_error", st.clean_margin_error);
                rec.metric("holdout_surrogate", st.surrogate);
            }
            rec.metric("w_star", stream.w_star().to_vec());
            m
        }
    };
    model_metrics(&mut rec, &spec, &model);
    let file = ModelFile { w: model.w.clone(), bias: 0.0, q: Some(model.q) };
    if let Some(out) = &args.out {
        file.save(out)?;
        rec.artifact(out);
    }
    rec.model = Some(file);
    rec.timing.insert("wall_seconds".into(), secs(start));
    let summary = format!("trained {kind:?} surrogate for {} steps; ‖w‖_q = {:.6}", model.steps, model.dual_norm());
    Ok(Outcome::ok(rec, summary))
}

pub fn eval(args: &EvalArgs, seed: u64, config: Value) -> CmdResult {
    let start = Instant::now();
    let model = ModelFile::load(&args.model)?;
    let h = model.halfspace()?;
    let data = Dataset::load(&args.data)?;
    let gamma = args
        .gamma
        .or(data.meta().map(|m| m.gamma))
        .ok_or_else(|| Error::Config("--gamma is required when the dataset has no metadata".into()))?;
    let p = args.p.or(data.meta().map(|m| m.p)).unwrap_or(NormSpec::L2);
    let mut rec = RunRecord::new("eval", seed, config);
    rec.metric("clean_error", clean_error(&h, &data)?);
    let frac = |g: f64| -> Result<f64, Error> {
        let mut bad = 0usize;
        for ex in data.iter() {
            if margin_loss(&h, ex, g, p)? {
                bad += 1;
            }
        }
        Ok(bad as f64 / data.len() as f64)
    };
    rec.metric("margin_error_gamma", frac(gamma)?);
    rec.metric("margin_error_half_gamma", frac(gamma / 2.0)?);
    if h.bias() == 0.0 {
        rec.metric("raw_margin_error_half_gamma", raw_margin_error(h.weights(), &data, gamma / 2.0)?);
    }
    rec.metric("gamma", gamma);
    rec.metric("p", exponent_value(p.p()));
    if let Some(text) = &args.adversary {
        let adv = load_adversary(text, data.dim())?;
        let fcfg = robust_halfspace::FeasibilityConfig::new(1.0, args.bits)?;
        let risk = robust_halfspace::empirical_robust_risk(adv.as_ref(), &h, &data, &fcfg, cert_mode(args.cert_mode))?;
        rec.metric("empirical_robust_risk", risk);
    }
    rec.timing.insert("wall_seconds".into(), secs(start));
    let summary = format!("{}", Value::Object(rec.metrics.clone()));
    Ok(Outcome::ok(rec, summary))
}

fn open_lines(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub fn certify(args: &CertifyArgs, seed: u64, config: Value) -> CmdResult {
    let start = Instant::now();
    let h = ModelFile::load(&args.model)?.halfspace()?;
    let data = Dataset::load(&args.data)?;
    let adv = load_adversary(&args.adversary, data.dim())?;
    let mut rec = RunRecord::new("certify", seed, config);
    if let Some(replay) = &args.replay {
        return replay_certificates(replay, adv.as_ref(), &h, &data, rec);
    }
    let fcfg = robust_halfspace::FeasibilityConfig::new(1.0, args.bits)?;
    let mode = cert_mode(args.cert_mode);
    let mut out = open_lines(&args.out)?;
    let (mut robust, mut calls) = (0usize, 0usize);
    for (i, ex) in data.iter().enumerate() {
        let report = cert_with_mode(adv.as_ref(), &h, ex, &fcfg, mode)?;
        calls += report.oracle_calls;
        let line = match &report.result {
            CertResult::Robust => {
                robust += 1;
                json!({"index": i, "y": ex.y.as_i64(), "result": "robust"})
            }
            CertResult::Counterexample(z) => {
                json!({"index": i, "y": ex.y.as_i64(), "result": "counterexample", "z": z.as_slice()})
            }
        };
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    drop(out);
    rec.metric("examples", data.len());
    rec.metric("robust", robust);
    rec.metric("counterexamples", data.len() - robust);
    rec.metric("empirical_robust_risk", (data.len() - robust) as f64 / data.len() as f64);
    rec.metric("oracle_calls", calls);
    rec.timing.insert("wall_seconds".into(), secs(start));
    if let Some(p) = &args.out {
        rec.artifact(p);
    }
    let summary = format!("{robust} of {} examples certified robust", data.len());
    Ok(Outcome { record: rec, code: 0, stdout_used: args.out.is_none(), summary })
}

fn replay_certificates(
    path: &Path,
    adv: &dyn PerturbationSet,
    h: &robust_halfspace::Halfspace,
    data: &Dataset,
    mut rec: RunRecord,
) -> CmdResult {
    let reader = BufReader::new(File::open(path)?);
    let mut checked = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)?;
        if v["result"] != "counterexample" {
            continue;
        }
        let bad = || Error::InvalidInput(format!("malformed certificate on line {}", lineno + 1));
        let i = v["index"].as_u64().ok_or_else(bad)? as usize;
        let ex = data.examples().get(i).ok_or_else(bad)?;
        let z: Vec<f64> = serde_json::from_value(v["z"].clone()).map_err(|_| bad())?;
        CertResult::verified_counterexample(adv, h, ex, z)?;
        checked += 1;
    }
    rec.metric("replayed_counterexamples", checked);
    let summary = format!("{checked} counterexamples re-verified");
    Ok(Outcome::ok(rec, summary))
}

pub fn reduce(args: &ReduceArgs, seed: u64, config: Value) -> CmdResult {
    let start = Instant::now();
    if args.x.len() != args.z.len() || args.x.is_empty() {
        return Err(Error::Config("--x and --z must be nonempty and of equal length".into()));
    }
    let ball = NormBallAdversary::new(args.x.len(), args.radius, args.p)?;
    let bound = args
        .bound
        .unwrap_or_else(|| lp_norm(&args.x, 2.0) + ball.offset_radius(&args.x).expect("balls are bounded"));
    let eval = LpEvaluator { gamma: args.radius, spec: args.p };
    let rep = approx_sep_from_eval(&eval, &args.x, &args.z, args.gamma, bound, args.bits)?;
    let mut rec = RunRecord::new("reduce", seed, config);
    rec.metric("eval_calls", rep.eval_calls);
    rec.metric("outer_iterations", rep.outer_iterations);
    rec.metric("bound", bound);
    let summary = match &rep.result {
        ApproxSepResult::NearInside => {
            rec.metric("result", "near_inside");
            "query is within the tolerance of the perturbation set".to_string()
        }
        ApproxSepResult::Hyperplane(g) => {
            // support function of the ball: ⟨g,x⟩ + r‖g‖_q
            let support = dot(g, &args.x) + args.radius * args.p.dual_norm(g);
            let gap = support - dot(g, &args.z);
            let n = lp_norm(g, 2.0);
            rec.metric("result", "hyperplane");
            rec.metric("w", g.iter().map(|c| c / n).collect::<Vec<_>>());
            rec.metric("support_gap", gap);
            rec.metric("allowed_gap", args.gamma / 2.0);
            format!("separating direction {:?}; support gap {gap:.3e}", g.as_slice())
        }
    };
    rec.timing.insert("wall_seconds".into(), secs(start));
    Ok(Outcome::ok(rec, summary))
}

pub fn sweep(args: &SweepArgs, seed: u64, config: Value) -> CmdResult {
    let start = Instant::now();
    if args.reps == 0 {
        return Err(Error::Config("--reps must be >= 1".into()));
    }
    let kind = surrogate_kind(args.surrogate);
    let mut rows = Vec::new();
    let mut all_within = true;
    let mut cell = 0u64;
    for &p in &args.ps {
        for &gamma in &args.gammas {
            for &epsilon in &args.epsilons {
                for &eta in &args.etas {
                    let spec = SurrogateSpec::new(gamma, eta, epsilon, p)?;
                    let cfg = RcnConfig { steps: args.steps, max_steps: args.max_steps, ..Default::default() };
                    for rep in 0..args.reps {
                        let run_seed = derive_seed(seed, &format!("sweep/cell/{cell}"), rep as u64);
                        let plant = PlantSpec::new(args.d, 1, gamma, p, eta, run_seed);
                        let mut stream = PlantedSampler::new(&plant, 0)?;
                        let m = train(kind, &mut stream, &spec, &cfg)?;
                        let mut hold = PlantedSampler::new(&plant, 1)?;
                        let st = holdout_stats(&mut hold, &m.w, args.holdout, args.margin_fraction * gamma, &spec)?;
                        let bound = eta + epsilon;
                        let within = st.noisy_margin_error <= bound + 0.02;
                        all_within &= within;
                        rows.push(vec![
                            p.to_string(),
                            gamma.to_string(),
                            epsilon.to_string(),
                            eta.to_string(),
                            rep.to_string(),
                            run_seed.to_string(),
                            m.steps.to_string(),
                            st.noisy_margin_error.to_string(),
                            st.clean_margin_error.to_string(),
                            st.surrogate.to_string(),
                            bound.to_string(),
                            within.to_string(),
                        ]);
                    }
                    cell += 1;
                }
            }
        }
    }
    let header = [
        "p", "gamma", "epsilon", "eta", "rep", "seed", "steps", "noisy_margin_error", "clean_margin_error",
        "surrogate", "bound", "within_bound",
    ];
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for r in &rows {
        w.write_record(r)?;
    }
    w.flush()?;
    drop(w);
    let mut rec = RunRecord::new("sweep", seed, config);
    rec.metric("runs", rows.len());
    rec.metric("all_within_bound", all_within);
    rec.timing.insert("wall_seconds".into(), secs(start));
    if let Some(p) = &args.out {
        rec.artifact(p);
    }
    let summary = format!("{} runs; all within eta + epsilon + 0.02: {all_within}", rows.len());
    Ok(Outcome { record: rec, code: 0, stdout_used: args.out.is_none(), summary })
}
