//! Exact interpreter: the reference semantics every smooth relaxation in
//! this crate is measured against.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{Program, Statement, StatementIndex, Var};

/// Variable store. Reads of unset variables yield 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    values: BTreeMap<u32, f64>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn get(&self, var: Var) -> f64 {
        self.values.get(&var.0).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values.insert(var.0, value);
    }

    /// Variables that have been written or initialized, in index order.
    pub fn iter(&self) -> impl Iterator<Item = (Var, f64)> + '_ {
        self.values.iter().map(|(&n, &v)| (Var(n), v))
    }
}

impl FromIterator<(Var, f64)> for Env {
    fn from_iter<I: IntoIterator<Item = (Var, f64)>>(iter: I) -> Self {
        let mut env = Env::new();
        for (var, value) in iter {
            env.set(var, value);
        }
        env
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("iteration cap of {cap} exceeded; the program may not terminate")]
    CapExceeded {
        cap: u64,
        /// State at the moment the cap fired, for post-mortem inspection.
        partial_env: Env,
    },
}

/// Result of a discrete run.
#[derive(Debug, Clone)]
pub struct DiscreteOutcome {
    pub env: Env,
    /// Body executions per syntactic loop, in pre-order.
    pub loop_iterations: Vec<u64>,
    pub total_iterations: u64,
    pub warnings: Vec<String>,
}

impl DiscreteOutcome {
    pub fn output(&self) -> f64 {
        self.env.get(Var(0))
    }
}

pub const DEFAULT_ITERATION_CAP: u64 = 1_000_000;

/// Runs `program` with the given initial bindings. `iteration_cap` bounds
/// the total number of loop-body executions across the whole program.
///
/// Inputs are reals for uniformity with the smooth interpreter; non-integer
/// values are legal but flagged, since the discrete semantics only promise
/// termination behaviour over the integers.
pub fn run_discrete(
    program: &Program,
    inputs: &[(Var, f64)],
    iteration_cap: u64,
) -> Result<DiscreteOutcome, RunError> {
    let mut env = Env::new();
    let mut warnings = Vec::new();
    for &(var, value) in inputs {
        if value.fract() != 0.0 {
            warnings.push(format!(
                "input {var} = {value} is not an integer; discrete loops may not terminate"
            ));
        }
        env.set(var, value);
    }

    let index = StatementIndex::build(program);
    let mut exec = Exec {
        env,
        loop_iterations: vec![0; index.loop_count],
        total: 0,
        cap: iteration_cap,
        index,
    };
    match exec.run(&program.root) {
        Ok(()) => Ok(DiscreteOutcome {
            env: exec.env,
            loop_iterations: exec.loop_iterations,
            total_iterations: exec.total,
            warnings,
        }),
        Err(()) => Err(RunError::CapExceeded {
            cap: iteration_cap,
            partial_env: exec.env,
        }),
    }
}

struct Exec {
    env: Env,
    loop_iterations: Vec<u64>,
    total: u64,
    cap: u64,
    index: StatementIndex,
}

impl Exec {
    fn run(&mut self, stmt: &Statement) -> Result<(), ()> {
        match stmt {
            Statement::While { cond, body } => {
                let loop_id = self.index.loop_of(stmt);
                while self.env.get(*cond) != 0.0 {
                    if self.total >= self.cap {
                        return Err(());
                    }
                    self.total += 1;
                    self.loop_iterations[loop_id] += 1;
                    self.run(body)?;
                }
                Ok(())
            }
            Statement::Seq(a, b) => {
                self.run(a)?;
                self.run(b)
            }
            Statement::Assign { dst, src } => {
                let v = self.env.get(*src);
                self.env.set(*dst, v);
                Ok(())
            }
            Statement::Inc(v) => {
                let cur = self.env.get(*v);
                self.env.set(*v, cur + 1.0);
                Ok(())
            }
            Statement::Dec(v) => {
                let cur = self.env.get(*v);
                self.env.set(*v, cur - 1.0);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::while_lang::parse;

    fn multiply() -> Program {
        parse(
            "WHILE x2 != 0 DO\n    x3 := x1\n    WHILE x3 != 0 DO\n        x0 := x0 + 1\n        x3 := x3 - 1\n    END\n    x2 := x2 - 1\nEND\n",
        )
        .unwrap()
    }

    #[test]
    fn multiplies_over_a_grid() {
        let program = multiply();
        for x1 in 0..=10 {
            for x2 in 0..=10 {
                let out = run_discrete(
                    &program,
                    &[(Var(1), x1 as f64), (Var(2), x2 as f64)],
                    DEFAULT_ITERATION_CAP,
                )
                .unwrap();
                assert_eq!(out.output(), (x1 * x2) as f64, "{x1} * {x2}");
            }
        }
    }

    #[test]
    fn zero_operand_annihilates() {
        let program = multiply();
        let out = run_discrete(&program, &[(Var(1), 7.0), (Var(2), 0.0)], 1000).unwrap();
        assert_eq!(out.output(), 0.0);
        assert_eq!(out.total_iterations, 0);
    }

    #[test]
    fn divergent_program_hits_the_cap() {
        let program = parse("WHILE x1 != 0 DO\n    x0 := x0 + 1\nEND\n").unwrap();
        let err = run_discrete(&program, &[(Var(1), 1.0)], 10_000).unwrap_err();
        match err {
            RunError::CapExceeded { cap, partial_env } => {
                assert_eq!(cap, 10_000);
                assert_eq!(partial_env.get(Var(0)), 10_000.0);
            }
        }
    }

    #[test]
    fn non_integer_inputs_are_flagged() {
        let program = parse("x0 := x1\n").unwrap();
        let out = run_discrete(&program, &[(Var(1), 2.5)], 100).unwrap();
        assert_eq!(out.output(), 2.5);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("not an integer"));
    }

    #[test]
    fn unset_variables_read_zero() {
        let program = parse("x0 := x9\n").unwrap();
        let out = run_discrete(&program, &[], 100).unwrap();
        assert_eq!(out.output(), 0.0);
    }

    #[test]
    fn per_loop_iteration_counts() {
        let program = multiply();
        let out = run_discrete(&program, &[(Var(1), 3.0), (Var(2), 4.0)], 1000).unwrap();
        assert_eq!(out.loop_iterations, vec![4, 12]);
        assert_eq!(out.total_iterations, 16);
    }
}
