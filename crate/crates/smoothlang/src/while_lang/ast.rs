//! Abstract syntax for the WHILE language.
//!
//! The grammar is tiny but Turing-complete: loops test a variable against
//! zero, and the only primitive statements are copy, increment by one, and
//! decrement by one. Variables are `x0`, `x1`, ... with `x0` conventionally
//! holding the result; unset variables read as zero.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Variable `x<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    /// `WHILE cond != 0 DO body END`
    While { cond: Var, body: Box<Statement> },
    /// Two programs in sequence. Parsing folds statement lists to the
    /// right, so `a; b; c` becomes `Seq(a, Seq(b, c))`.
    Seq(Box<Statement>, Box<Statement>),
    /// `dst := src` with `dst != src`.
    Assign { dst: Var, src: Var },
    /// `v := v + 1`
    Inc(Var),
    /// `v := v - 1`
    Dec(Var),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub root: Statement,
}

impl Program {
    pub fn new(root: Statement) -> Self {
        Program { root }
    }

    /// Right-folds a non-empty statement list into nested `Seq`s, the
    /// canonical shape produced by the parser.
    pub fn seq(mut stmts: Vec<Statement>) -> Statement {
        assert!(!stmts.is_empty(), "empty statement list");
        let mut acc = stmts.pop().unwrap();
        while let Some(s) = stmts.pop() {
            acc = Statement::Seq(Box::new(s), Box::new(acc));
        }
        acc
    }

    /// Canonical source text: one statement per line, loop bodies indented
    /// by four spaces. `parse(format(p))` reproduces `p` exactly.
    pub fn format(&self) -> String {
        let mut out = String::new();
        format_stmt(&self.root, 0, &mut out);
        out
    }

    /// Number of assignment-like statements (`:=`, `+ 1`, `- 1`) in
    /// pre-order; calibration attaches one (weight, bias) pair to each.
    pub fn assignment_count(&self) -> usize {
        StatementIndex::build(self).assignment_count
    }

    /// Number of syntactic loops.
    pub fn loop_count(&self) -> usize {
        StatementIndex::build(self).loop_count
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}

fn format_stmt(stmt: &Statement, indent: usize, out: &mut String) {
    match stmt {
        Statement::Seq(a, b) => {
            format_stmt(a, indent, out);
            format_stmt(b, indent, out);
        }
        Statement::While { cond, body } => {
            push_indent(indent, out);
            out.push_str(&format!("WHILE {cond} != 0 DO\n"));
            format_stmt(body, indent + 1, out);
            push_indent(indent, out);
            out.push_str("END\n");
        }
        Statement::Assign { dst, src } => {
            push_indent(indent, out);
            out.push_str(&format!("{dst} := {src}\n"));
        }
        Statement::Inc(v) => {
            push_indent(indent, out);
            out.push_str(&format!("{v} := {v} + 1\n"));
        }
        Statement::Dec(v) => {
            push_indent(indent, out);
            out.push_str(&format!("{v} := {v} - 1\n"));
        }
    }
}

fn push_indent(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("    ");
    }
}

/// Pre-order numbering of loops and assignment-like statements, keyed by
/// node address. Both interpreters use it to report per-loop statistics and
/// to look up calibration pairs; the AST is never mutated while indexed.
pub(crate) struct StatementIndex {
    pub loops: HashMap<*const Statement, usize>,
    pub assignments: HashMap<*const Statement, usize>,
    pub loop_count: usize,
    pub assignment_count: usize,
}

impl StatementIndex {
    pub fn build(program: &Program) -> Self {
        let mut index = StatementIndex {
            loops: HashMap::new(),
            assignments: HashMap::new(),
            loop_count: 0,
            assignment_count: 0,
        };
        index.visit(&program.root);
        index
    }

    fn visit(&mut self, stmt: &Statement) {
        match stmt {
            Statement::While { body, .. } => {
                self.loops.insert(stmt as *const _, self.loop_count);
                self.loop_count += 1;
                self.visit(body);
            }
            Statement::Seq(a, b) => {
                self.visit(a);
                self.visit(b);
            }
            Statement::Assign { .. } | Statement::Inc(_) | Statement::Dec(_) => {
                self.assignments
                    .insert(stmt as *const _, self.assignment_count);
                self.assignment_count += 1;
            }
        }
    }

    pub fn loop_of(&self, stmt: &Statement) -> usize {
        self.loops[&(stmt as *const _)]
    }

    pub fn assignment_of(&self, stmt: &Statement) -> usize {
        self.assignments[&(stmt as *const _)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_nested_loops_with_indentation() {
        let program = Program::new(Statement::While {
            cond: Var(2),
            body: Box::new(Program::seq(vec![
                Statement::Assign {
                    dst: Var(3),
                    src: Var(1),
                },
                Statement::While {
                    cond: Var(3),
                    body: Box::new(Program::seq(vec![
                        Statement::Inc(Var(0)),
                        Statement::Dec(Var(3)),
                    ])),
                },
                Statement::Dec(Var(2)),
            ])),
        });
        let expected = "\
WHILE x2 != 0 DO
    x3 := x1
    WHILE x3 != 0 DO
        x0 := x0 + 1
        x3 := x3 - 1
    END
    x2 := x2 - 1
END
";
        assert_eq!(program.format(), expected);
    }

    #[test]
    fn counts_assignments_and_loops() {
        let program = Program::new(Program::seq(vec![
            Statement::Inc(Var(0)),
            Statement::While {
                cond: Var(1),
                body: Box::new(Statement::Dec(Var(1))),
            },
        ]));
        assert_eq!(program.assignment_count(), 2);
        assert_eq!(program.loop_count(), 1);
    }
}
