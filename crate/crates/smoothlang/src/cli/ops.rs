//! Subcommands wrapping the differentiable vector ops.

use serde_json::{json, Map, Value};

use crate::autodiff::{Scalar, Tape};
use crate::cli::{
    num, num_array, parse_vector, print_json, runtime, CliError, FdiffArgs, MedianArgs, SortArgs,
    WeightedArgs,
};
use crate::smooth_ops::{
    finite_differences, soft_median_fast, soft_median_precise, soft_sort, w_softmax, w_softmin,
    SortOptions,
};

fn lift_all<'t>(tape: &'t Tape, values: &[f64]) -> Result<Vec<Scalar<'t>>, CliError> {
    values
        .iter()
        .map(|&v| tape.lift(v).map_err(runtime))
        .collect()
}

pub(crate) fn values(scalars: &[Scalar<'_>]) -> Vec<f64> {
    scalars.iter().map(|s| s.value()).collect()
}

pub(crate) fn cmd_sort(args: &SortArgs) -> Result<(), CliError> {
    let input = parse_vector(&args.vector, "vector")?;
    let tape = Tape::new();
    let lifted = lift_all(&tape, &input)?;
    let companion_values = args
        .companion
        .as_deref()
        .map(|text| parse_vector(text, "companion"))
        .transpose()?;
    let companion_scalars = companion_values
        .as_deref()
        .map(|vals| lift_all(&tape, vals))
        .transpose()?;
    let options = SortOptions {
        steepness: args.s,
        num_stages: args.stages,
        descending: args.descending,
    };
    let result = soft_sort(&lifted, companion_scalars.as_deref(), &options).map_err(runtime)?;

    let mut doc = Map::new();
    doc.insert("input".into(), num_array(&input));
    doc.insert("sorted".into(), num_array(&values(&result.sorted)));
    doc.insert(
        "exchanges".into(),
        serde_json::to_value(&result.exchanges).map_err(runtime)?,
    );
    if args.matrix {
        let rows: Vec<Value> = result
            .relaxation_matrix
            .iter()
            .map(|row| num_array(row))
            .collect();
        doc.insert("matrix".into(), Value::Array(rows));
    }
    if let Some(sorted_companion) = &result.companion {
        doc.insert(
            "companion_sorted".into(),
            num_array(&values(sorted_companion)),
        );
    }
    print_json(&Value::Object(doc));
    Ok(())
}

pub(crate) fn cmd_median(args: &MedianArgs) -> Result<(), CliError> {
    let input = parse_vector(&args.vector, "vector")?;
    let tape = Tape::new();
    let lifted = lift_all(&tape, &input)?;
    let median = if args.fast {
        soft_median_fast(&lifted, args.degree, args.s)
    } else {
        soft_median_precise(&lifted, args.s)
    }
    .map_err(runtime)?;

    let mut doc = Map::new();
    doc.insert("input".into(), num_array(&input));
    doc.insert("median".into(), num(median.value()));
    doc.insert(
        "method".into(),
        Value::String(if args.fast { "fast" } else { "precise" }.into()),
    );
    if args.fast {
        doc.insert("degree".into(), json!(args.degree));
    }
    print_json(&Value::Object(doc));
    Ok(())
}

pub(crate) fn cmd_weighted(args: &WeightedArgs, min: bool) -> Result<(), CliError> {
    let input = parse_vector(&args.vector, "vector")?;
    let weights = match args.w.as_deref() {
        Some(text) => parse_vector(text, "weights")?,
        None => vec![1.0; input.len()],
    };
    let tape = Tape::new();
    let lifted = lift_all(&tape, &input)?;
    let output = if min {
        w_softmin(&lifted, &weights)
    } else {
        w_softmax(&lifted, &weights)
    }
    .map_err(runtime)?;
    print_json(&json!({
        "input": num_array(&input),
        "weights": num_array(&weights),
        "output": num_array(&values(&output)),
    }));
    Ok(())
}

pub(crate) fn cmd_fdiff(args: &FdiffArgs) -> Result<(), CliError> {
    let input = parse_vector(&args.vector, "vector")?;
    let tape = Tape::new();
    let lifted = lift_all(&tape, &input)?;
    let output = finite_differences(&lifted, args.normalize, args.pad).map_err(runtime)?;
    print_json(&json!({
        "input": num_array(&input),
        "normalize": args.normalize,
        "pad": args.pad,
        "output": num_array(&values(&output)),
    }));
    Ok(())
}
