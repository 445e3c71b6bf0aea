//! Reverse-mode automatic differentiation on a scalar tape.
//!
//! Every smooth computation in this crate is expressed over [`Scalar`]
//! values recorded on a [`Tape`]. The forward pass appends one node per
//! primitive operation; [`Scalar::backward`] then sweeps the tape once in
//! reverse, accumulating adjoints, and returns the derivative of the output
//! with respect to every node (queried per input via [`Gradients::wrt`]).
//!
//! Design constraints the rest of the crate relies on:
//!
//! * node values are cached inline, so reading a value never touches the
//!   tape; re-evaluating a recorded tape reproduces values bit-identically
//!   (see [`Tape::replay_matches`]);
//! * `backward` does not mutate the tape, so several backward sweeps can be
//!   taken from different outputs of one forward pass;
//! * non-smooth primitives (`abs`, `min`, `max`) use the standard
//!   subgradient conventions: `abs` has derivative 0 at 0, ties in
//!   `min`/`max` route the adjoint to the first argument.

mod gradcheck;

pub use gradcheck::{gradcheck, EvalOutput, GradCheckEntry, GradCheckReport};

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// `sech` saturates for |x| beyond this bound: the value underflows towards
/// zero and the derivative is treated as exactly zero, which keeps
/// `exp` away from overflow.
const SECH_ARG_CLAMP: f64 = 700.0;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("cannot register non-finite input {0} on the tape")]
    NonFiniteInput(f64),
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Input,
    Const,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    /// x + c
    AddC(u32, f64),
    /// x * c
    MulC(u32, f64),
    /// c - x
    CSub(f64, u32),
    /// c / x
    CDiv(f64, u32),
    Exp(u32),
    Ln(u32),
    Abs(u32),
    Min(u32, u32),
    Max(u32, u32),
    MinC(u32, f64),
    MaxC(u32, f64),
    Sigmoid(u32),
    Tanh(u32),
    Sech(u32),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    value: f64,
}

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(0);

/// Append-only record of a forward computation.
pub struct Tape {
    id: u64,
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("id", &self.id)
            .field("len", &self.len())
            .finish()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::with_capacity(capacity)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Drops all recorded nodes but keeps the allocation. Requires `&mut`,
    /// so no scalar referring to the old contents can survive the call.
    pub fn reset(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// Registers a differentiable input. Gradients are queried with respect
    /// to the returned scalar.
    pub fn lift(&self, value: f64) -> Result<Scalar<'_>, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFiniteInput(value));
        }
        Ok(self.push(Op::Input, value))
    }

    /// Records a constant leaf. Constants carry no gradient of interest but
    /// participate in the forward value like any other node.
    pub fn constant(&self, value: f64) -> Scalar<'_> {
        self.push(Op::Const, value)
    }

    fn push(&self, op: Op, value: f64) -> Scalar<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        assert!(index < u32::MAX as usize, "tape overflow");
        nodes.push(Node { op, value });
        Scalar {
            tape: self,
            index: index as u32,
            value,
        }
    }

    /// Re-evaluates every node from its operands and compares against the
    /// stored values bit for bit.
    pub fn replay_matches(&self) -> bool {
        let nodes = self.nodes.borrow();
        let mut values = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let v = eval_op(node.op, node.value, &values);
            values.push(v);
        }
        nodes
            .iter()
            .zip(&values)
            .all(|(n, v)| n.value.to_bits() == v.to_bits())
    }

    /// Adjoints of `output` with respect to every node on the tape.
    fn backward_from(&self, output: u32) -> Gradients {
        let nodes = self.nodes.borrow();
        let mut adjoints = vec![0.0f64; nodes.len()];
        adjoints[output as usize] = 1.0;
        for i in (0..=output as usize).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let value = |idx: u32| nodes[idx as usize].value;
            match nodes[i].op {
                Op::Input | Op::Const => {}
                Op::Add(x, y) => {
                    adjoints[x as usize] += a;
                    adjoints[y as usize] += a;
                }
                Op::Sub(x, y) => {
                    adjoints[x as usize] += a;
                    adjoints[y as usize] -= a;
                }
                Op::Mul(x, y) => {
                    adjoints[x as usize] += a * value(y);
                    adjoints[y as usize] += a * value(x);
                }
                Op::Div(x, y) => {
                    let vy = value(y);
                    adjoints[x as usize] += a / vy;
                    adjoints[y as usize] -= a * value(x) / (vy * vy);
                }
                Op::Neg(x) => adjoints[x as usize] -= a,
                Op::AddC(x, _) => adjoints[x as usize] += a,
                Op::MulC(x, c) => adjoints[x as usize] += a * c,
                Op::CSub(_, x) => adjoints[x as usize] -= a,
                Op::CDiv(c, x) => {
                    let vx = value(x);
                    adjoints[x as usize] -= a * c / (vx * vx);
                }
                Op::Exp(x) => adjoints[x as usize] += a * nodes[i].value,
                Op::Ln(x) => adjoints[x as usize] += a / value(x),
                Op::Abs(x) => {
                    let vx = value(x);
                    if vx > 0.0 {
                        adjoints[x as usize] += a;
                    } else if vx < 0.0 {
                        adjoints[x as usize] -= a;
                    }
                }
                Op::Min(x, y) => {
                    if value(x) <= value(y) {
                        adjoints[x as usize] += a;
                    } else {
                        adjoints[y as usize] += a;
                    }
                }
                Op::Max(x, y) => {
                    if value(x) >= value(y) {
                        adjoints[x as usize] += a;
                    } else {
                        adjoints[y as usize] += a;
                    }
                }
                Op::MinC(x, c) => {
                    if value(x) <= c {
                        adjoints[x as usize] += a;
                    }
                }
                Op::MaxC(x, c) => {
                    if value(x) >= c {
                        adjoints[x as usize] += a;
                    }
                }
                Op::Sigmoid(x) => {
                    let v = nodes[i].value;
                    adjoints[x as usize] += a * v * (1.0 - v);
                }
                Op::Tanh(x) => {
                    let v = nodes[i].value;
                    adjoints[x as usize] += a * (1.0 - v * v);
                }
                Op::Sech(x) => {
                    let vx = value(x);
                    if vx.abs() <= SECH_ARG_CLAMP {
                        adjoints[x as usize] += a * (-nodes[i].value * vx.tanh());
                    }
                }
            }
        }
        Gradients {
            tape_id: self.id,
            adjoints,
        }
    }
}

fn eval_op(op: Op, stored: f64, values: &[f64]) -> f64 {
    let v = |i: u32| values[i as usize];
    match op {
        Op::Input | Op::Const => stored,
        Op::Add(x, y) => v(x) + v(y),
        Op::Sub(x, y) => v(x) - v(y),
        Op::Mul(x, y) => v(x) * v(y),
        Op::Div(x, y) => v(x) / v(y),
        Op::Neg(x) => -v(x),
        Op::AddC(x, c) => v(x) + c,
        Op::MulC(x, c) => v(x) * c,
        Op::CSub(c, x) => c - v(x),
        Op::CDiv(c, x) => c / v(x),
        Op::Exp(x) => v(x).exp(),
        Op::Ln(x) => v(x).ln(),
        Op::Abs(x) => v(x).abs(),
        Op::Min(x, y) => v(x).min(v(y)),
        Op::Max(x, y) => v(x).max(v(y)),
        Op::MinC(x, c) => v(x).min(c),
        Op::MaxC(x, c) => v(x).max(c),
        Op::Sigmoid(x) => stable_sigmoid(v(x)),
        Op::Tanh(x) => v(x).tanh(),
        Op::Sech(x) => clamped_sech(v(x)),
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn clamped_sech(x: f64) -> f64 {
    let c = x.clamp(-SECH_ARG_CLAMP, SECH_ARG_CLAMP);
    2.0 / (c.exp() + (-c).exp())
}

/// A value recorded on a [`Tape`]. Copyable handle: arithmetic on scalars
/// appends nodes to the owning tape.
#[derive(Clone, Copy)]
pub struct Scalar<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

impl std::fmt::Debug for Scalar<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scalar({} @ {})", self.value, self.index)
    }
}

impl<'t> Scalar<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    fn same_tape(self, other: Scalar<'t>) {
        debug_assert!(
            std::ptr::eq(self.tape, other.tape),
            "scalars from different tapes"
        );
    }

    pub fn exp(self) -> Scalar<'t> {
        self.tape.push(Op::Exp(self.index), self.value.exp())
    }

    /// Natural logarithm; the argument must be positive.
    pub fn ln(self) -> Scalar<'t> {
        self.tape.push(Op::Ln(self.index), self.value.ln())
    }

    pub fn abs(self) -> Scalar<'t> {
        self.tape.push(Op::Abs(self.index), self.value.abs())
    }

    pub fn min(self, other: Scalar<'t>) -> Scalar<'t> {
        self.same_tape(other);
        self.tape.push(
            Op::Min(self.index, other.index),
            self.value.min(other.value),
        )
    }

    pub fn max(self, other: Scalar<'t>) -> Scalar<'t> {
        self.same_tape(other);
        self.tape.push(
            Op::Max(self.index, other.index),
            self.value.max(other.value),
        )
    }

    pub fn min_c(self, c: f64) -> Scalar<'t> {
        self.tape.push(Op::MinC(self.index, c), self.value.min(c))
    }

    pub fn max_c(self, c: f64) -> Scalar<'t> {
        self.tape.push(Op::MaxC(self.index, c), self.value.max(c))
    }

    /// Logistic function 1 / (1 + e^-x).
    pub fn sigmoid(self) -> Scalar<'t> {
        self.tape
            .push(Op::Sigmoid(self.index), stable_sigmoid(self.value))
    }

    pub fn tanh(self) -> Scalar<'t> {
        self.tape.push(Op::Tanh(self.index), self.value.tanh())
    }

    /// Hyperbolic secant, evaluated as 2 / (e^x + e^-x) with the argument
    /// clamped to ±700. Past the clamp the value saturates and the
    /// derivative is zero.
    pub fn sech(self) -> Scalar<'t> {
        self.tape
            .push(Op::Sech(self.index), clamped_sech(self.value))
    }

    /// Reverse sweep from this scalar. The result can be queried for the
    /// derivative with respect to any scalar of the same tape.
    pub fn backward(self) -> Gradients {
        self.tape.backward_from(self.index)
    }
}

/// Adjoints produced by one reverse sweep.
pub struct Gradients {
    tape_id: u64,
    adjoints: Vec<f64>,
}

impl Gradients {
    /// Derivative of the swept output with respect to `x`.
    ///
    /// Panics if `x` lives on a different tape; that is a usage error, the
    /// adjoints would be meaningless.
    pub fn wrt(&self, x: Scalar<'_>) -> f64 {
        self.try_wrt(x)
            .expect("gradient queried for a scalar from another tape")
    }

    pub fn try_wrt(&self, x: Scalar<'_>) -> Option<f64> {
        if x.tape.id != self.tape_id {
            return None;
        }
        self.adjoints.get(x.index as usize).copied()
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $op:ident) => {
        impl<'t> $trait for Scalar<'t> {
            type Output = Scalar<'t>;
            fn $method(self, rhs: Scalar<'t>) -> Scalar<'t> {
                self.same_tape(rhs);
                self.tape.push(
                    Op::$op(self.index, rhs.index),
                    self.value.$method(rhs.value),
                )
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl<'t> Add<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn add(self, c: f64) -> Scalar<'t> {
        self.tape.push(Op::AddC(self.index, c), self.value + c)
    }
}

impl<'t> Add<Scalar<'t>> for f64 {
    type Output = Scalar<'t>;
    fn add(self, x: Scalar<'t>) -> Scalar<'t> {
        x + self
    }
}

impl<'t> Sub<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn sub(self, c: f64) -> Scalar<'t> {
        self.tape.push(Op::AddC(self.index, -c), self.value - c)
    }
}

impl<'t> Sub<Scalar<'t>> for f64 {
    type Output = Scalar<'t>;
    fn sub(self, x: Scalar<'t>) -> Scalar<'t> {
        x.tape.push(Op::CSub(self, x.index), self - x.value)
    }
}

impl<'t> Mul<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn mul(self, c: f64) -> Scalar<'t> {
        self.tape.push(Op::MulC(self.index, c), self.value * c)
    }
}

impl<'t> Mul<Scalar<'t>> for f64 {
    type Output = Scalar<'t>;
    fn mul(self, x: Scalar<'t>) -> Scalar<'t> {
        x * self
    }
}

impl<'t> Div<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn div(self, c: f64) -> Scalar<'t> {
        self.tape
            .push(Op::MulC(self.index, 1.0 / c), self.value * (1.0 / c))
    }
}

impl<'t> Div<Scalar<'t>> for f64 {
    type Output = Scalar<'t>;
    fn div(self, x: Scalar<'t>) -> Scalar<'t> {
        x.tape.push(Op::CDiv(self, x.index), self / x.value)
    }
}

impl<'t> Neg for Scalar<'t> {
    type Output = Scalar<'t>;
    fn neg(self) -> Scalar<'t> {
        self.tape.push(Op::Neg(self.index), -self.value)
    }
}
