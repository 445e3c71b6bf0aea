//! A minimal Turing-complete WHILE language: parsing, formatting, and the
//! exact reference interpreter.

mod ast;
mod discrete;
mod parser;

pub(crate) use ast::StatementIndex;
pub use ast::{Program, Statement, Var};
pub use discrete::{run_discrete, DiscreteOutcome, Env, RunError, DEFAULT_ITERATION_CAP};
pub use parser::{parse, ParseError};

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_var() -> impl Strategy<Value = Var> {
        (0u32..6).prop_map(Var)
    }

    fn arb_simple() -> impl Strategy<Value = Statement> {
        prop_oneof![
            (0u32..6, 0u32..5).prop_map(|(d, s)| {
                // skew so src != dst always holds
                let src = if s >= d { s + 1 } else { s };
                Statement::Assign {
                    dst: Var(d),
                    src: Var(src),
                }
            }),
            arb_var().prop_map(Statement::Inc),
            arb_var().prop_map(Statement::Dec),
        ]
    }

    /// Grammar-directed statements with the parser's canonical right-folded
    /// sequence shape, nesting up to six loop levels.
    fn arb_statement() -> impl Strategy<Value = Statement> {
        arb_simple().prop_recursive(6, 48, 4, |inner| {
            prop_oneof![
                (arb_var(), prop::collection::vec(inner.clone(), 1..4)).prop_map(|(cond, body)| {
                    Statement::While {
                        cond,
                        body: Box::new(Program::seq(body)),
                    }
                }),
                prop::collection::vec(inner, 2..4).prop_map(Program::seq),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn parse_inverts_format(stmt in arb_statement()) {
            // Sequencing is associative and the parser right-folds, so the
            // round-trip is compared on canonical text, not tree shape.
            let program = Program::new(stmt);
            let text = program.format();
            let reparsed = parse(&text).unwrap();
            prop_assert_eq!(reparsed.format(), text);
        }

        #[test]
        fn integer_inputs_stay_integers(
            stmt in arb_statement(),
            inputs in prop::collection::vec((0u32..6, -3i64..8), 0..4),
        ) {
            let program = Program::new(stmt);
            let bindings: Vec<(Var, f64)> =
                inputs.into_iter().map(|(v, n)| (Var(v), n as f64)).collect();
            let env = match run_discrete(&program, &bindings, 2_000) {
                Ok(out) => out.env,
                Err(RunError::CapExceeded { partial_env, .. }) => partial_env,
            };
            for (var, value) in env.iter() {
                prop_assert_eq!(value.fract(), 0.0, "{} = {} not an integer", var, value);
            }
        }
    }
}
