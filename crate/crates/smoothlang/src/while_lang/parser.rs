//! Lexer and recursive-descent parser for the WHILE language.
//!
//! Statements are separated by newlines or semicolons; `//` starts a
//! comment running to the end of the line. Keywords are upper-case.
//! Diagnostics carry 1-based line and column positions.

use thiserror::Error;

use super::ast::{Program, Statement, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    fn new(line: u32, column: u32, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    While,
    Do,
    End,
    Var(u32),
    Assign,
    Neq,
    Plus,
    Minus,
    Int(u64),
    Sep,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::While => "`WHILE`".into(),
            Tok::Do => "`DO`".into(),
            Tok::End => "`END`".into(),
            Tok::Var(n) => format!("variable `x{n}`"),
            Tok::Assign => "`:=`".into(),
            Tok::Neq => "`!=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Int(n) => format!("number `{n}`"),
            Tok::Sep => "end of statement".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: u32,
    column: u32,
}

fn lex(source: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line = 1u32;
    let mut column = 1u32;

    macro_rules! push {
        ($tok:expr, $col:expr) => {
            toks.push(Lexed {
                tok: $tok,
                line,
                column: $col,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let start_col = column;
        match c {
            ' ' | '\t' | '\r' => {
                chars.next();
                column += 1;
            }
            '\n' => {
                chars.next();
                push!(Tok::Sep, start_col);
                line += 1;
                column = 1;
            }
            ';' => {
                chars.next();
                column += 1;
                push!(Tok::Sep, start_col);
            }
            '/' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        chars.next();
                        column += 1;
                    }
                } else {
                    return Err(ParseError::new(line, start_col, "unknown token `/`"));
                }
            }
            ':' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    column += 1;
                    push!(Tok::Assign, start_col);
                } else {
                    return Err(ParseError::new(
                        line,
                        start_col,
                        "unknown token `:` (expected `:=`)",
                    ));
                }
            }
            '!' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    column += 1;
                    push!(Tok::Neq, start_col);
                } else {
                    return Err(ParseError::new(
                        line,
                        start_col,
                        "unknown token `!` (expected `!=`)",
                    ));
                }
            }
            '+' => {
                chars.next();
                column += 1;
                push!(Tok::Plus, start_col);
            }
            '-' => {
                chars.next();
                column += 1;
                push!(Tok::Minus, start_col);
            }
            _ if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        text.push(d);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                let value: u64 = text.parse().map_err(|_| {
                    ParseError::new(line, start_col, format!("number `{text}` is out of range"))
                })?;
                push!(Tok::Int(value), start_col);
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        word.push(d);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                match word.as_str() {
                    "WHILE" => push!(Tok::While, start_col),
                    "DO" => push!(Tok::Do, start_col),
                    "END" => push!(Tok::End, start_col),
                    _ => {
                        let digits = word.strip_prefix('x').unwrap_or("");
                        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                            let n: u32 = digits.parse().map_err(|_| {
                                ParseError::new(
                                    line,
                                    start_col,
                                    format!("variable index in `{word}` is out of range"),
                                )
                            })?;
                            push!(Tok::Var(n), start_col);
                        } else {
                            return Err(ParseError::new(
                                line,
                                start_col,
                                format!("malformed name `{word}` (variables are x0, x1, ...)"),
                            ));
                        }
                    }
                }
            }
            _ => {
                return Err(ParseError::new(
                    line,
                    start_col,
                    format!("unknown token `{c}`"),
                ));
            }
        }
    }
    toks.push(Lexed {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(toks)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Lexed {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> &Lexed {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn skip_separators(&mut self) {
        while self.peek().tok == Tok::Sep {
            self.pos += 1;
        }
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::new(t.line, t.column, message)
    }

    fn expect_var(&mut self, context: &str) -> Result<Var, ParseError> {
        match self.peek().tok {
            Tok::Var(n) => {
                self.next();
                Ok(Var(n))
            }
            ref other => Err(self.error_here(format!(
                "expected a variable {context}, found {}",
                other.describe()
            ))),
        }
    }

    fn expect(&mut self, want: Tok, context: &str) -> Result<(), ParseError> {
        if self.peek().tok == want {
            self.next();
            Ok(())
        } else {
            let found = self.peek().tok.describe();
            Err(self.error_here(format!(
                "expected {} {context}, found {found}",
                want.describe()
            )))
        }
    }

    /// Statement list up to `END` (inside a loop) or end of input.
    fn parse_block(&mut self, in_loop: bool) -> Result<Statement, ParseError> {
        let mut stmts = Vec::new();
        loop {
            self.skip_separators();
            match self.peek().tok {
                Tok::End if in_loop => break,
                Tok::Eof => {
                    if in_loop {
                        return Err(self.error_here("unbalanced loop: missing `END`"));
                    }
                    break;
                }
                Tok::End => return Err(self.error_here("`END` without a matching `WHILE`")),
                _ => stmts.push(self.parse_statement()?),
            }
        }
        if stmts.is_empty() {
            return Err(self.error_here(if in_loop {
                "empty loop body"
            } else {
                "empty program"
            }));
        }
        Ok(Program::seq(stmts))
    }

    fn parse_statement(&mut self) -> Result<Statement, ParseError> {
        match self.peek().tok {
            Tok::While => {
                self.next();
                let cond = self.expect_var("after `WHILE`")?;
                self.expect(Tok::Neq, "in the loop condition")?;
                match self.peek().tok {
                    Tok::Int(0) => {
                        self.next();
                    }
                    _ => {
                        return Err(self.error_here("loop conditions must compare against 0"));
                    }
                }
                self.expect(Tok::Do, "after the loop condition")?;
                let body = self.parse_block(true)?;
                self.expect(Tok::End, "to close the loop")?;
                Ok(Statement::While {
                    cond,
                    body: Box::new(body),
                })
            }
            Tok::Var(_) => {
                let dst = self.expect_var("")?;
                self.expect(Tok::Assign, "after the target variable")?;
                let src = self.expect_var("after `:=`")?;
                match self.peek().tok {
                    Tok::Plus | Tok::Minus => {
                        let inc = self.peek().tok == Tok::Plus;
                        let op_err = self.error_here(format!(
                            "`{dst} := {src} {} 1` must use the same variable on both sides",
                            if inc { "+" } else { "-" }
                        ));
                        self.next();
                        match self.peek().tok {
                            Tok::Int(1) => {
                                self.next();
                            }
                            _ => {
                                return Err(self.error_here("only `+ 1` and `- 1` are supported"));
                            }
                        }
                        if dst != src {
                            return Err(op_err);
                        }
                        Ok(if inc {
                            Statement::Inc(dst)
                        } else {
                            Statement::Dec(dst)
                        })
                    }
                    _ => {
                        if dst == src {
                            return Err(self.error_here(format!(
                                "`{dst} := {src}` copies a variable onto itself"
                            )));
                        }
                        Ok(Statement::Assign { dst, src })
                    }
                }
            }
            ref other => {
                Err(self.error_here(format!("expected a statement, found {}", other.describe())))
            }
        }
    }
}

/// Parses WHILE-language source into a [`Program`].
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let root = parser.parse_block(false)?;
    parser.skip_separators();
    match parser.peek().tok {
        Tok::Eof => Ok(Program::new(root)),
        ref other => {
            Err(parser.error_here(format!("unexpected {} after the program", other.describe())))
        }
    }
}
