//! Minimal library walkthrough: smooth a counting loop and differentiate
//! its output with respect to an input. Mirrors the README.

use smoothlang::autodiff::Tape;
use smoothlang::interp::{run_smooth, Grade, SmoothConfig};
use smoothlang::while_lang::{parse, Var};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = parse("WHILE x1 != 0 DO\n    x0 := x0 + 1\n    x1 := x1 - 1\nEND\n")?;
    let config = SmoothConfig::new(Grade::CInf);
    let tape = Tape::new();
    let run = run_smooth(&tape, &program, &[(Var(1), 3.0)], &config)?;
    let gradient = run.output().backward().wrt(run.inputs[&1]);
    println!("x0 = {}, d x0/d x1 = {}", run.output().value(), gradient);
    Ok(())
}
