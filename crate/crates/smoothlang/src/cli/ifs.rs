//! `ifs-render`, `ifs-fit`, `ifs-sample`: the iterated-function-system
//! subcommands. Models travel as JSON files, images as plain P2 graymaps.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use crate::autodiff::Tape;
use crate::cli::{
    num, parse_vector, print_json, read_file, runtime, usage, write_file, CliError, IfsFitArgs,
    IfsRenderArgs, IfsSampleArgs,
};
use crate::smooth_ifs::{
    fit, iterate, rasterize, sample_choices, FitError, FitResult, FitSettings, GrayImage, IfsModel,
    ModelFile,
};

fn load_model(path: &Path) -> Result<(ModelFile, IfsModel), CliError> {
    let text = read_file(path)?;
    let file = ModelFile::from_json(&text)
        .map_err(|error| usage(format!("{}: {error}", path.display())))?;
    let model = file
        .into_model()
        .map_err(|error| usage(format!("{}: {error}", path.display())))?;
    Ok((file, model))
}

pub(crate) fn cmd_render(args: &IfsRenderArgs) -> Result<(), CliError> {
    let (_, model) = load_model(&args.model)?;
    let tape = Tape::new();
    let cloud = iterate(&tape, &model).map_err(runtime)?;
    let image = rasterize(&tape, &cloud, model.sigma, &model.canvas).map_err(runtime)?;
    let gray =
        GrayImage::from_probabilities(model.canvas.width, model.canvas.height, &image.values());
    write_file(&args.out, &gray.to_pgm_string())?;
    print_json(&json!({
        "out": args.out.display().to_string(),
        "width": model.canvas.width,
        "height": model.canvas.height,
        "points": cloud.points.len(),
        "truncated": cloud.truncated,
    }));
    Ok(())
}

fn parse_schedule(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| usage(format!("schedule entry {item:?} is not a positive number")))
        })
        .collect()
}

fn history_csv(result: &FitResult) -> String {
    let mut csv = String::from("step,sigma,loss\n");
    for record in &result.history {
        let _ = writeln!(csv, "{},{},{:.16e}", record.step, record.sigma, record.loss);
    }
    csv
}

pub(crate) fn cmd_fit(args: &IfsFitArgs) -> Result<(), CliError> {
    let (file, model) = load_model(&args.model)?;
    let target_text = read_file(&args.target)?;
    let target = GrayImage::from_pgm_str(&target_text)
        .map_err(|error| usage(format!("{}: {error}", args.target.display())))?;
    if target.width != model.canvas.width || target.height != model.canvas.height {
        return Err(runtime(format!(
            "target is {}x{} but the model canvas is {}x{}",
            target.width, target.height, model.canvas.width, model.canvas.height
        )));
    }
    let schedule = parse_schedule(&args.schedule)?;
    let settings = FitSettings {
        steps_per_sigma: args.steps,
        learning_rate: args.lr,
    };

    let outcome = fit(&model, &target.to_probabilities(), &schedule, &settings);
    let (result, diverged_at) = match outcome {
        Ok(result) => (result, None),
        Err(FitError::Diverged {
            step,
            model,
            history,
        }) => (
            FitResult {
                model: *model,
                history,
                warnings: Vec::new(),
            },
            Some(step),
        ),
        Err(FitError::Ifs(error)) => return Err(runtime(error)),
    };
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }

    let mut fitted = file.clone();
    fitted.params = result.model.params.iter().flatten().copied().collect();
    fitted.sigma = result.model.sigma;
    write_file(&args.out, &fitted.to_json())?;
    if let Some(path) = &args.loss_csv {
        write_file(path, &history_csv(&result))?;
    }

    if let Some(step) = diverged_at {
        return Err(runtime(format!(
            "fitting aborted at step {step}: loss became non-finite; \
             the last finite model was written to {}",
            args.out.display()
        )));
    }
    let initial = result.history.first().map(|r| r.loss);
    let final_loss = result.history.last().map(|r| r.loss);
    print_json(&json!({
        "out": args.out.display().to_string(),
        "initial_loss": initial.map(num),
        "final_loss": final_loss.map(num),
        "steps": result.history.len(),
        "sigma_levels": schedule.len(),
        "warnings": result.warnings.len(),
    }));
    Ok(())
}

pub(crate) fn cmd_sample(args: &IfsSampleArgs) -> Result<(), CliError> {
    let weights = args
        .weights
        .as_deref()
        .map(|text| parse_vector(text, "weights"))
        .transpose()?;
    let choices = sample_choices(args.n, args.t, args.seed, weights.as_deref())
        .map_err(|error| usage(error.to_string()))?;
    print_json(&json!({
        "n": args.n,
        "t": args.t,
        "seed": args.seed,
        "choices": choices,
    }));
    Ok(())
}
