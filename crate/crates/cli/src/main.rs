//! `robust-halfspace`: data generation, training, certification and
//! evaluation of robust halfspaces.
//!
//! Exit codes: 0 success, 1 internal or numeric failure, 2 invalid
//! configuration or input, 3 generation failure, 4 infeasible (no robust
//! separator).

mod args;
mod commands;
mod record;

use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde_json::{Map, Value};

use args::{Cli, Command, Common};
use robust_halfspace::Error;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::InvalidHypothesis(_)
        | Error::DimensionMismatch { .. }
        | Error::Config(_)
        | Error::InvalidData(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        Error::Generation(_) => 3,
        Error::Protocol(_) | Error::Numeric { .. } | Error::Internal(_) => 1,
    }
}

const SUBCOMMANDS: [&str; 7] = ["gen", "train-rerm", "train-rcn", "eval", "certify", "reduce", "sweep"];

fn read_config(path: &std::path::Path) -> Result<Map<String, Value>, Error> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config file: {e}")))?;
    let obj = match v {
        Value::Object(o) => o,
        _ => return Err(Error::Config("config file must hold a JSON object".into())),
    };
    // a run record: take its resolved flags and seed
    if obj.contains_key("command") {
        if let (Some(Value::Object(cfg)), Some(seed)) = (obj.get("config"), obj.get("seed")) {
            let mut flat = cfg.clone();
            flat.insert("seed".into(), seed.clone());
            return Ok(flat);
        }
    }
    Ok(obj)
}

fn flag_tokens(key: &str, value: &Value) -> Result<Vec<String>, Error> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &Value| -> Result<String, Error> {
        match v {
            Value::Number(n) => Ok(n.to_string()),
            Value::String(s) => Ok(s.clone()),
            _ => Err(Error::Config(format!("config value for {key:?} must be a number, string or list"))),
        }
    };
    Ok(match value {
        Value::Null | Value::Bool(false) => Vec::new(),
        Value::Bool(true) => vec![flag],
        Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
            vec![format!("{flag}={}", parts.join(","))]
        }
        other => vec![format!("{flag}={}", scalar(other)?)],
    })
}

/// Expands `--config FILE` into flags placed right after the subcommand.
/// Flags present on the command line are left alone so they win.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>, Error> {
    let mut config_path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            config_path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else { return Ok(argv) };
    let Some(sub) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else { return Ok(argv) };
    let given = |flag: &str| argv.iter().any(|a| a == flag || a.starts_with(&format!("{flag}=")));
    let mut extra = Vec::new();
    for (key, value) in read_config(std::path::Path::new(&path))? {
        if !given(&format!("--{}", key.replace('_', "-"))) {
            extra.extend(flag_tokens(&key, &value)?);
        }
    }
    let mut out = argv;
    out.splice(sub + 1..sub + 1, extra);
    Ok(out)
}

fn resolve(matches: &ArgMatches) -> Result<(Common, Command, Value), Error> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| Error::Config(e.to_string()))?;
    let mut resolved = match &cli.command {
        Command::Gen(a) => serde_json::to_value(a),
        Command::TrainRerm(a) => serde_json::to_value(a),
        Command::TrainRcn(a) => serde_json::to_value(a),
        Command::Eval(a) => serde_json::to_value(a),
        Command::Certify(a) => serde_json::to_value(a),
        Command::Reduce(a) => serde_json::to_value(a),
        Command::Sweep(a) => serde_json::to_value(a),
    }?;
    resolved.as_object_mut().expect("flag structs serialize to objects").insert("seed".into(), cli.common.seed.into());
    Ok((cli.common, cli.command, resolved))
}

fn run(matches: &ArgMatches) -> Result<(Common, commands::Outcome), Error> {
    let (common, command, config) = resolve(matches)?;
    let seed = common.seed;
    let outcome = match &command {
        Command::Gen(a) => commands::gen(a, seed, config),
        Command::TrainRerm(a) => commands::train_rerm(a, seed, config),
        Command::TrainRcn(a) => commands::train_rcn(a, seed, config),
        Command::Eval(a) => commands::eval(a, seed, config),
        Command::Certify(a) => commands::certify(a, seed, config),
        Command::Reduce(a) => commands::reduce(a, seed, config),
        Command::Sweep(a) => commands::sweep(a, seed, config),
    }?;
    Ok((common, outcome))
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (common, outcome) = match run(&matches) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let text = serde_json::to_string_pretty(&outcome.record).expect("records serialize");
    if let Some(path) = &common.record {
        if let Err(e) = std::fs::write(path, text.clone() + "\n") {
            eprintln!("error: cannot write run record: {e}");
            return ExitCode::from(2);
        }
    }
    if common.json && !outcome.stdout_used {
        println!("{}", serde_json::to_string(&outcome.record).expect("records serialize"));
    }
    if outcome.stdout_used || outcome.code != 0 {
        eprintln!("{}", outcome.summary);
    } else if !common.json {
        println!("{}", outcome.summary);
    }
    ExitCode::from(outcome.code as u8)
}
