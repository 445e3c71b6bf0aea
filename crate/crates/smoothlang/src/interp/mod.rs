//! Smooth interpretation of WHILE-programs.
//!
//! Execution carries a probability `p` (1 at program start). A loop's
//! probability starts at the enclosing statement's probability; each pass
//! multiplies it by the exit probability of the condition variable's
//! current value, runs the body under the updated (monotonically
//! non-increasing) probability, and exits once `p` drops to the configured
//! epsilon or an iteration budget runs out. Statements blend rather than
//! overwrite state:
//!
//! * `v := w`     becomes `v := p*w + (1-p)*v`
//! * `v := v + 1` becomes `v := v + p`
//! * `v := v - 1` becomes `v := v - p`
//!
//! so the whole run is one differentiable expression on a tape, and
//! gradients of any variable with respect to any input are exact.

mod calibrate;
mod phi;

pub use calibrate::{
    calibrate, CalibrateError, CalibrationOutcome, CalibrationSample, OptimizerSettings,
};
pub use phi::{heaviside, logistic, phi0, phi_inf, smoothstep_c1, smoothstep_c1_cubic};

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::autodiff::{AutodiffError, Scalar, Tape};
use crate::while_lang::{run_discrete, Program, RunError, Statement, StatementIndex, Var};

/// How crisp decisions are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    /// Exact reference semantics (routed to the discrete interpreter).
    Discrete,
    /// Continuous exit probabilities, exact over the integers.
    C0,
    /// Infinitely differentiable exit probabilities.
    CInf,
}

pub const DEFAULT_STEEPNESS: f64 = 5.0;
pub const DEFAULT_EPSILON: f64 = 1e-7;
pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000;

#[derive(Debug, Clone)]
pub struct SmoothConfig {
    pub grade: Grade,
    /// Steepness of the smooth exit probability; only used by [`Grade::CInf`].
    pub steepness: f64,
    /// Loops exit once their execution probability drops to this value.
    pub epsilon: f64,
    /// Budget per loop entry; exceeding it truncates the loop and flags the
    /// trace rather than failing the run.
    pub max_iterations: u64,
    pub calibration: Option<Calibration>,
    /// Record the per-iteration probability sequence of every loop.
    pub record_p_history: bool,
}

impl SmoothConfig {
    pub fn new(grade: Grade) -> Self {
        SmoothConfig {
            grade,
            steepness: DEFAULT_STEEPNESS,
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            calibration: None,
            record_p_history: false,
        }
    }
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig::new(Grade::CInf)
    }
}

/// One (weight, bias) pair per assignment-like statement, in pre-order.
/// The smoothed result of assignment k is mapped through
/// `v -> weight_k * v + bias_k`. The identity calibration leaves runs
/// bit-identical to the uncalibrated interpreter.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub pairs: Vec<(f64, f64)>,
}

impl Calibration {
    pub fn identity(assignments: usize) -> Self {
        Calibration {
            pairs: vec![(1.0, 0.0); assignments],
        }
    }
}

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("input {var} is not finite")]
    NonFiniteInput { var: Var },
    #[error("variable {0} bound more than once")]
    DuplicateInput(Var),
    #[error(transparent)]
    Discrete(#[from] RunError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Per-loop execution statistics, aggregated over every entry of the loop.
#[derive(Debug, Clone, Serialize)]
pub struct LoopTrace {
    /// Pre-order index of the loop in the program.
    #[serde(rename = "loop")]
    pub loop_index: usize,
    /// How many times control reached the loop head.
    pub entries: u64,
    /// Total body executions across all entries.
    pub iterations: u64,
    /// Execution probability at the final exit; absent in discrete runs.
    pub final_p: Option<f64>,
    /// True when some entry exhausted `max_iterations` with p still above
    /// epsilon.
    pub truncated: bool,
    /// Probability of each body execution, in execution order, when
    /// requested via [`SmoothConfig::record_p_history`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_history: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub loops: Vec<LoopTrace>,
    /// True when any loop was truncated.
    pub truncated: bool,
}

/// A finished smooth run. All variables are scalars on the caller's tape,
/// so further expressions (losses, projections) can be built on top before
/// sweeping backward.
#[derive(Debug)]
pub struct SmoothRun<'t> {
    tape: &'t Tape,
    pub env: BTreeMap<u32, Scalar<'t>>,
    /// Handles of the lifted inputs, for gradient queries.
    pub inputs: BTreeMap<u32, Scalar<'t>>,
    pub trace: Trace,
}

impl<'t> SmoothRun<'t> {
    /// The program output `x0` (zero if never written).
    pub fn output(&self) -> Scalar<'t> {
        self.var(Var(0))
    }

    pub fn var(&self, var: Var) -> Scalar<'t> {
        self.env
            .get(&var.0)
            .copied()
            .unwrap_or_else(|| self.tape.constant(0.0))
    }

    pub fn env_values(&self) -> BTreeMap<u32, f64> {
        self.env.iter().map(|(&k, s)| (k, s.value())).collect()
    }
}

/// Runs `program` under `config`, recording the computation on `tape`.
/// Inputs are lifted as differentiable tape inputs.
pub fn run_smooth<'t>(
    tape: &'t Tape,
    program: &Program,
    inputs: &[(Var, f64)],
    config: &SmoothConfig,
) -> Result<SmoothRun<'t>, InterpError> {
    validate_config(program, config)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut lifted = Vec::with_capacity(inputs.len());
    for &(var, value) in inputs {
        if !value.is_finite() {
            return Err(InterpError::NonFiniteInput { var });
        }
        if !seen.insert(var) {
            return Err(InterpError::DuplicateInput(var));
        }
        lifted.push((var, tape.lift(value)?));
    }
    run_smooth_prepared(tape, program, &lifted, config, None)
}

/// As [`run_smooth`], but over scalars the caller has already placed on the
/// tape (inputs of an enclosing optimization, say), with optional
/// calibration scalars overriding `config.calibration`. Pairs are consumed
/// per assignment statement in pre-order.
pub fn run_smooth_prepared<'t>(
    tape: &'t Tape,
    program: &Program,
    inputs: &[(Var, Scalar<'t>)],
    config: &SmoothConfig,
    calibration: Option<&[(Scalar<'t>, Scalar<'t>)]>,
) -> Result<SmoothRun<'t>, InterpError> {
    validate_config(program, config)?;
    if let Some(pairs) = calibration {
        if pairs.len() != program.assignment_count() {
            return Err(InterpError::InvalidConfig(format!(
                "calibration has {} pairs but the program has {} assignments",
                pairs.len(),
                program.assignment_count()
            )));
        }
    }

    if config.grade == Grade::Discrete {
        return run_via_discrete(tape, program, inputs, config);
    }

    let index = StatementIndex::build(program);
    let calib_scalars: Option<Vec<(Scalar<'t>, Scalar<'t>)>> = match calibration {
        Some(pairs) => Some(pairs.to_vec()),
        None => config.calibration.as_ref().map(|c| {
            c.pairs
                .iter()
                .map(|&(w, b)| (tape.constant(w), tape.constant(b)))
                .collect()
        }),
    };

    let mut loops: Vec<LoopTrace> = (0..index.loop_count)
        .map(|i| LoopTrace {
            loop_index: i,
            entries: 0,
            iterations: 0,
            final_p: None,
            truncated: false,
            p_history: config.record_p_history.then(Vec::new),
        })
        .collect();

    let mut env: BTreeMap<u32, Scalar<'t>> = BTreeMap::new();
    let mut input_handles = BTreeMap::new();
    for &(var, scalar) in inputs {
        env.insert(var.0, scalar);
        input_handles.insert(var.0, scalar);
    }

    {
        let mut exec = SmoothExec {
            tape,
            config,
            index: &index,
            calibration: calib_scalars.as_deref(),
            env: &mut env,
            loops: &mut loops,
        };
        let p1 = tape.constant(1.0);
        exec.run(&program.root, p1);
    }

    let truncated = loops.iter().any(|l| l.truncated);
    Ok(SmoothRun {
        tape,
        env,
        inputs: input_handles,
        trace: Trace { loops, truncated },
    })
}

fn validate_config(program: &Program, config: &SmoothConfig) -> Result<(), InterpError> {
    if config.steepness.is_nan() || config.steepness <= 0.0 {
        return Err(InterpError::InvalidConfig(format!(
            "steepness must be positive, got {}",
            config.steepness
        )));
    }
    if config.epsilon.is_nan() || config.epsilon <= 0.0 {
        return Err(InterpError::InvalidConfig(format!(
            "epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    if config.max_iterations == 0 {
        return Err(InterpError::InvalidConfig(
            "max_iterations must be at least 1".into(),
        ));
    }
    if let Some(calibration) = &config.calibration {
        let want = program.assignment_count();
        if calibration.pairs.len() != want {
            return Err(InterpError::InvalidConfig(format!(
                "calibration has {} pairs but the program has {want} assignments",
                calibration.pairs.len()
            )));
        }
        if calibration
            .pairs
            .iter()
            .any(|(w, b)| !w.is_finite() || !b.is_finite())
        {
            return Err(InterpError::InvalidConfig(
                "calibration contains non-finite values".into(),
            ));
        }
    }
    Ok(())
}

fn run_via_discrete<'t>(
    tape: &'t Tape,
    program: &Program,
    inputs: &[(Var, Scalar<'t>)],
    config: &SmoothConfig,
) -> Result<SmoothRun<'t>, InterpError> {
    let bindings: Vec<(Var, f64)> = inputs.iter().map(|&(v, s)| (v, s.value())).collect();
    let cap = config.max_iterations.saturating_mul(100);
    let outcome = run_discrete(program, &bindings, cap)?;
    let mut env = BTreeMap::new();
    for (var, value) in outcome.env.iter() {
        env.insert(var.0, tape.constant(value));
    }
    let mut input_handles = BTreeMap::new();
    for &(var, scalar) in inputs {
        input_handles.insert(var.0, scalar);
    }
    let loops = outcome
        .loop_iterations
        .iter()
        .enumerate()
        .map(|(i, &n)| LoopTrace {
            loop_index: i,
            entries: 0,
            iterations: n,
            final_p: None,
            truncated: false,
            p_history: None,
        })
        .collect();
    Ok(SmoothRun {
        tape,
        env,
        inputs: input_handles,
        trace: Trace {
            loops,
            truncated: false,
        },
    })
}

struct SmoothExec<'a, 't> {
    tape: &'t Tape,
    config: &'a SmoothConfig,
    index: &'a StatementIndex,
    calibration: Option<&'a [(Scalar<'t>, Scalar<'t>)]>,
    env: &'a mut BTreeMap<u32, Scalar<'t>>,
    loops: &'a mut Vec<LoopTrace>,
}

impl<'a, 't> SmoothExec<'a, 't> {
    fn read(&mut self, var: Var) -> Scalar<'t> {
        *self
            .env
            .entry(var.0)
            .or_insert_with(|| self.tape.constant(0.0))
    }

    fn exit_probability(&self, x: Scalar<'t>) -> Scalar<'t> {
        match self.config.grade {
            Grade::C0 => phi0(x),
            Grade::CInf => phi_inf(x, self.config.steepness),
            Grade::Discrete => unreachable!("discrete runs never reach the smooth engine"),
        }
    }

    fn write(&mut self, stmt: &Statement, var: Var, value: Scalar<'t>) {
        let value = match self.calibration {
            Some(pairs) => {
                let (w, b) = pairs[self.index.assignment_of(stmt)];
                w * value + b
            }
            None => value,
        };
        self.env.insert(var.0, value);
    }

    fn run(&mut self, stmt: &Statement, p: Scalar<'t>) {
        match stmt {
            Statement::Seq(a, b) => {
                self.run(a, p);
                self.run(b, p);
            }
            Statement::While { cond, body } => {
                let loop_id = self.index.loop_of(stmt);
                self.loops[loop_id].entries += 1;
                // The loop probability is seeded from the enclosing
                // probability and decays monotonically: every pass folds in
                // the exit probability of the condition's current value
                // before the body runs under it.
                let mut p_loop = p;
                let mut iterations = 0u64;
                loop {
                    if iterations >= self.config.max_iterations {
                        self.loops[loop_id].truncated = true;
                        break;
                    }
                    let cond_value = self.read(*cond);
                    p_loop = p_loop * self.exit_probability(cond_value);
                    self.run(body, p_loop);
                    iterations += 1;
                    let trace = &mut self.loops[loop_id];
                    trace.iterations += 1;
                    trace.final_p = Some(p_loop.value());
                    if let Some(history) = trace.p_history.as_mut() {
                        history.push(p_loop.value());
                    }
                    // Body-first loop: the exit test runs after the pass.
                    if p_loop.value() <= self.config.epsilon {
                        break;
                    }
                }
            }
            Statement::Assign { dst, src } => {
                let old = self.read(*dst);
                let new = self.read(*src);
                let blended = p * new + (1.0 - p) * old;
                self.write(stmt, *dst, blended);
            }
            Statement::Inc(v) => {
                let value = self.read(*v) + p;
                self.write(stmt, *v, value);
            }
            Statement::Dec(v) => {
                let value = self.read(*v) - p;
                self.write(stmt, *v, value);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::while_lang::parse;

    pub(crate) fn multiply() -> Program {
        parse(
            "WHILE x2 != 0 DO\n    x3 := x1\n    WHILE x3 != 0 DO\n        x0 := x0 + 1\n        x3 := x3 - 1\n    END\n    x2 := x2 - 1\nEND\n",
        )
        .unwrap()
    }

    fn run_c0(x1: f64, x2: f64) -> f64 {
        let tape = Tape::new();
        let run = run_smooth(
            &tape,
            &multiply(),
            &[(Var(1), x1), (Var(2), x2)],
            &SmoothConfig::new(Grade::C0),
        )
        .unwrap();
        run.output().value()
    }

    #[test]
    fn c0_is_exact_on_integers() {
        for (x1, x2) in [(0.0, 0.0), (3.0, 4.0), (7.0, 1.0), (5.0, 6.0)] {
            let got = run_c0(x1, x2);
            assert_eq!(got.to_bits(), (x1 * x2).to_bits(), "{x1} * {x2} = {got}");
        }
    }

    #[test]
    fn cinf_approximates_multiplication() {
        let tape = Tape::new();
        let run = run_smooth(
            &tape,
            &multiply(),
            &[(Var(1), 3.0), (Var(2), 4.0)],
            &SmoothConfig::new(Grade::CInf),
        )
        .unwrap();
        let got = run.output().value();
        assert!(
            (got - 12.0).abs() / 12.0 < 0.15,
            "smooth 3 * 4 = {got}, too far from 12"
        );
    }

    #[test]
    fn cinf_interpolates_between_integers() {
        // Steepness at most 2 keeps the exit probability below |x|, so
        // decremented condition variables never overshoot past zero and the
        // loop drains cleanly even from fractional starts.
        let tape = Tape::new();
        let mut config = SmoothConfig::new(Grade::CInf);
        config.steepness = 1.5;
        let run = run_smooth(&tape, &multiply(), &[(Var(1), 2.5), (Var(2), 1.5)], &config).unwrap();
        let out = run.output();
        assert!(out.value().is_finite());
        assert!(!run.trace.truncated);
        let g = run.output().backward();
        let d1 = g.wrt(run.inputs[&1]);
        let d2 = g.wrt(run.inputs[&2]);
        assert!(d1.is_finite() && d2.is_finite());
        // A smoothed product should have positive sensitivities here.
        assert!(d1 > 0.0 && d2 > 0.0, "gradients {d1}, {d2}");
    }

    #[test]
    fn steep_fractional_runs_truncate_but_stay_finite() {
        // At s = 5 the exit probability can exceed |x|, so a fractional
        // countdown overshoots zero and the probability plateaus above
        // epsilon; the iteration budget then cuts the loop.
        let tape = Tape::new();
        let mut config = SmoothConfig::new(Grade::CInf);
        config.max_iterations = 300;
        let run = run_smooth(&tape, &multiply(), &[(Var(1), 2.5), (Var(2), 1.5)], &config).unwrap();
        assert!(run.trace.truncated);
        assert!(run.output().value().is_finite());
        let g = run.output().backward();
        assert!(g.wrt(run.inputs[&1]).is_finite());
        assert!(g.wrt(run.inputs[&2]).is_finite());
    }

    #[test]
    fn discrete_grade_routes_to_the_reference_interpreter() {
        let tape = Tape::new();
        let run = run_smooth(
            &tape,
            &multiply(),
            &[(Var(1), 6.0), (Var(2), 7.0)],
            &SmoothConfig::new(Grade::Discrete),
        )
        .unwrap();
        assert_eq!(run.output().value(), 42.0);
        assert_eq!(run.trace.loops[0].iterations, 7);
        assert_eq!(run.trace.loops[1].iterations, 42);
    }

    #[test]
    fn identity_calibration_is_bit_exact() {
        let program = multiply();
        let inputs = [(Var(1), 3.0), (Var(2), 4.0)];

        let tape_a = Tape::new();
        let plain = run_smooth(&tape_a, &program, &inputs, &SmoothConfig::new(Grade::CInf))
            .unwrap()
            .output()
            .value();

        let tape_b = Tape::new();
        let mut config = SmoothConfig::new(Grade::CInf);
        config.calibration = Some(Calibration::identity(program.assignment_count()));
        let calibrated = run_smooth(&tape_b, &program, &inputs, &config)
            .unwrap()
            .output()
            .value();

        assert_eq!(plain.to_bits(), calibrated.to_bits());
    }

    #[test]
    fn calibration_length_is_checked() {
        let mut config = SmoothConfig::new(Grade::CInf);
        config.calibration = Some(Calibration::identity(2));
        let tape = Tape::new();
        let err = run_smooth(&tape, &multiply(), &[], &config).unwrap_err();
        assert!(matches!(err, InterpError::InvalidConfig(_)));
    }

    #[test]
    fn truncation_is_flagged_not_fatal() {
        let program = parse("WHILE x1 != 0 DO\n    x0 := x0 + 1\nEND\n").unwrap();
        let tape = Tape::new();
        let mut config = SmoothConfig::new(Grade::C0);
        config.max_iterations = 25;
        let run = run_smooth(&tape, &program, &[(Var(1), 5.0)], &config).unwrap();
        assert!(run.trace.truncated);
        assert_eq!(run.trace.loops[0].iterations, 25);
        assert!(run.trace.loops[0].final_p.unwrap() > config.epsilon);
    }

    #[test]
    fn decrement_loop_probability_shrinks_geometrically() {
        // Body-first loop over a fractional start: the bound is
        // p after n passes <= phi0(x_start)^n.
        let program = parse("WHILE x1 != 0 DO\n    x1 := x1 - 1\nEND\n").unwrap();
        let tape = Tape::new();
        let mut config = SmoothConfig::new(Grade::C0);
        config.epsilon = 1e-300;
        config.max_iterations = 50;
        config.record_p_history = true;
        let run = run_smooth(&tape, &program, &[(Var(1), 0.9)], &config).unwrap();
        let history = run.trace.loops[0].p_history.as_ref().unwrap();
        assert!(!history.is_empty());
        for (k, &p) in history.iter().enumerate() {
            let bound = 0.9f64.powi(k as i32 + 1) + 1e-12;
            assert!(p <= bound, "pass {}: p = {p} > {bound}", k + 1);
        }
        // The loop drains to an exact zero and exits on its own.
        assert!(!run.trace.truncated);
        assert_eq!(*history.last().unwrap(), 0.0);
    }

    #[test]
    fn epsilon_tail_is_negligible() {
        let out = |epsilon: f64| {
            let tape = Tape::new();
            let mut config = SmoothConfig::new(Grade::CInf);
            config.epsilon = epsilon;
            run_smooth(&tape, &multiply(), &[(Var(1), 3.0), (Var(2), 4.0)], &config)
                .unwrap()
                .output()
                .value()
        };
        let eps = 1e-7;
        let difference = (out(eps) - out(eps / 2.0)).abs();
        assert!(
            difference < 10.0 * eps,
            "halving epsilon moved x0 by {difference}"
        );
    }

    #[test]
    fn rejects_bad_configs_and_inputs() {
        let program = multiply();
        let tape = Tape::new();

        let mut config = SmoothConfig::new(Grade::CInf);
        config.steepness = 0.0;
        assert!(run_smooth(&tape, &program, &[], &config).is_err());

        let mut config = SmoothConfig::new(Grade::CInf);
        config.epsilon = -1.0;
        assert!(run_smooth(&tape, &program, &[], &config).is_err());

        let config = SmoothConfig::new(Grade::CInf);
        let err = run_smooth(&tape, &program, &[(Var(1), f64::NAN)], &config).unwrap_err();
        assert!(matches!(err, InterpError::NonFiniteInput { .. }));

        let err =
            run_smooth(&tape, &program, &[(Var(1), 1.0), (Var(1), 2.0)], &config).unwrap_err();
        assert!(matches!(err, InterpError::DuplicateInput(_)));
    }

    #[test]
    fn trace_serializes_with_stable_keys() {
        let tape = Tape::new();
        let run = run_smooth(
            &tape,
            &multiply(),
            &[(Var(1), 2.0), (Var(2), 2.0)],
            &SmoothConfig::new(Grade::C0),
        )
        .unwrap();
        let json = serde_json::to_value(&run.trace).unwrap();
        let first = &json["loops"][0];
        assert!(first["loop"].is_number());
        assert!(first["entries"].is_number());
        assert!(first["iterations"].is_number());
        assert!(first["final_p"].is_number());
        assert!(first["truncated"].is_boolean());
        assert!(first.get("p_history").is_none());
    }
}
