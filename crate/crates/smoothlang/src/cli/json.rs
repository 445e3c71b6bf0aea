//! Deterministic JSON output.
//!
//! Floats print as 17-significant-digit scientific notation, enough to
//! round-trip any double exactly, so identical runs emit identical bytes
//! and golden files never wobble. Integers print as plain digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

struct SciFloats;

impl Formatter for SciFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes `value` to stdout followed by a newline. A closed pipe ends
/// the process quietly, per pipeline convention; other write failures are
/// fatal.
pub fn print_json<T: Serialize>(value: &T) {
    let stdout = io::stdout();
    let mut handle = stdout.lock();
    let written = {
        let mut serializer = serde_json::Serializer::with_formatter(&mut handle, SciFloats);
        value.serialize(&mut serializer)
    }
    .map_err(io::Error::from)
    .and_then(|()| handle.write_all(b"\n"));
    if let Err(error) = written {
        if error.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {error}");
        std::process::exit(2);
    }
}

/// A JSON number; non-finite values become null (JSON has no spelling for
/// them, and emitting null keeps the schema stable).
pub fn num(value: f64) -> Value {
    serde_json::Number::from_f64(value)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// The values of a float vector as a JSON array.
pub fn num_array(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| num(v)).collect())
}
