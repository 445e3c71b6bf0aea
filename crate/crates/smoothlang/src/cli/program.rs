//! `parse` and `run`: the program-facing subcommands.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::autodiff::Tape;
use crate::cli::{interp_error, num, print_json, read_file, usage, CliError, ModeArg, RunArgs};
use crate::interp::{run_smooth, Grade, SmoothConfig};
use crate::while_lang::{parse, Program, Var};

pub(crate) fn load_program(path: &Path) -> Result<Program, CliError> {
    let source = read_file(path)?;
    parse(&source).map_err(|error| usage(format!("{}: {error}", path.display())))
}

pub(crate) fn cmd_parse(path: &Path) -> Result<(), CliError> {
    let program = load_program(path)?;
    print_json(&json!({
        "formatted": program.format(),
        "assignments": program.assignment_count(),
        "loops": program.loop_count(),
    }));
    Ok(())
}

/// Parses one `xN=VALUE` binding.
pub(crate) fn parse_binding(text: &str) -> Result<(Var, f64), CliError> {
    let bad = || usage(format!("invalid input binding {text:?}, expected xN=VALUE"));
    let (name, value) = text.split_once('=').ok_or_else(bad)?;
    let index = name
        .trim()
        .strip_prefix('x')
        .and_then(|digits| digits.parse::<u32>().ok())
        .ok_or_else(bad)?;
    let value = value.trim().parse::<f64>().map_err(|_| bad())?;
    Ok((Var(index), value))
}

pub(crate) fn parse_bindings(texts: &[String]) -> Result<Vec<(Var, f64)>, CliError> {
    texts.iter().map(|text| parse_binding(text)).collect()
}

pub(crate) fn build_config(
    mode: Grade,
    steepness: Option<f64>,
    epsilon: Option<f64>,
    max_iters: Option<u64>,
    env_cap: Option<u64>,
) -> SmoothConfig {
    let mut config = SmoothConfig::new(mode);
    if let Some(s) = steepness {
        config.steepness = s;
    }
    if let Some(eps) = epsilon {
        config.epsilon = eps;
    }
    // An explicit flag beats the environment override.
    if let Some(cap) = max_iters.or(env_cap) {
        config.max_iterations = cap;
    }
    config
}

pub(crate) fn cmd_run(args: &RunArgs, env_cap: Option<u64>) -> Result<(), CliError> {
    let program = load_program(&args.program)?;
    let inputs = parse_bindings(&args.inputs)?;
    if args.mode == ModeArg::Discrete && args.grad {
        return Err(usage(
            "--grad needs a smooth mode; discrete runs have no gradients",
        ));
    }
    let config = build_config(
        args.mode.grade(),
        args.steepness,
        args.epsilon,
        args.max_iters,
        env_cap,
    );
    let tape = Tape::new();
    let run = run_smooth(&tape, &program, &inputs, &config).map_err(interp_error)?;

    let mut doc = Map::new();
    doc.insert("x0".into(), num(run.output().value()));
    if args.dump_env {
        let env: Map<String, Value> = run
            .env_values()
            .iter()
            .map(|(&index, &value)| (format!("x{index}"), num(value)))
            .collect();
        doc.insert("env".into(), Value::Object(env));
    }
    if args.grad {
        let grads = run.output().backward();
        let table: Map<String, Value> = run
            .inputs
            .iter()
            .map(|(&index, &scalar)| (format!("dx0/dx{index}"), num(grads.wrt(scalar))))
            .collect();
        doc.insert("gradients".into(), Value::Object(table));
    }
    doc.insert(
        "trace".into(),
        serde_json::to_value(&run.trace).map_err(|error| CliError::Runtime(error.to_string()))?,
    );
    print_json(&Value::Object(doc));
    Ok(())
}
