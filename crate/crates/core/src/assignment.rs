//! Three-valued assignments and output rounding.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// One coordinate of an algorithm output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    T,
    F,
    Err,
}

impl Value {
    pub fn is_err(self) -> bool {
        self == Value::Err
    }

    pub fn from_bool(b: bool) -> Value {
        if b {
            Value::T
        } else {
            Value::F
        }
    }

    /// `T -> +1`, `F -> -1`; the embedding used by the strict parse.
    pub fn to_pm1(self) -> Option<i8> {
        match self {
            Value::T => Some(1),
            Value::F => Some(-1),
            Value::Err => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::T => write!(f, "T"),
            Value::F => write!(f, "F"),
            Value::Err => write!(f, "e"),
        }
    }
}

/// Length-n sequence over {T, F, err}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    values: Vec<Value>,
}

impl Assignment {
    pub fn new(values: Vec<Value>) -> Self {
        Assignment { values }
    }

    pub fn all_true(n: usize) -> Self {
        Assignment { values: vec![Value::T; n] }
    }

    pub fn all_false(n: usize) -> Self {
        Assignment { values: vec![Value::F; n] }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Assignment {
            values: bits.iter().map(|&b| Value::from_bool(b)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Value {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: Value) {
        self.values[i] = v;
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn err_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_err()).count()
    }

    pub fn has_err(&self) -> bool {
        self.values.iter().any(|v| v.is_err())
    }

    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        self.values.iter().copied()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.values {
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Parse a real algorithm output: `>= 1` is T, `<= -1` is F, the open
/// interval `(-1, 1)` is an error symbol. NaN maps to err.
pub fn round_output(x: f64) -> Value {
    round_output_checked(x).0
}

/// As [`round_output`], additionally flagging NaN inputs.
pub fn round_output_checked(x: f64) -> (Value, bool) {
    if x.is_nan() {
        return (Value::Err, true);
    }
    let v = if x >= 1.0 {
        Value::T
    } else if x <= -1.0 {
        Value::F
    } else {
        Value::Err
    };
    (v, false)
}

/// Tolerance for the floating-point strict parse. Polynomial simulations
/// evaluated in exact integer arithmetic use tolerance zero instead.
pub const STRICT_ROUND_F64_TOL: f64 = 1e-9;

/// Strict parse: exactly +1 is T, exactly -1 is F, everything else err.
pub fn strict_round(x: f64) -> Value {
    strict_round_with_tol(x, STRICT_ROUND_F64_TOL)
}

pub fn strict_round_with_tol(x: f64, tol: f64) -> Value {
    if x.is_nan() {
        return Value::Err;
    }
    if (x - 1.0).abs() <= tol {
        Value::T
    } else if (x + 1.0).abs() <= tol {
        Value::F
    } else {
        Value::Err
    }
}

/// Exact integer strict parse for simulation outputs computed in integer
/// arithmetic.
pub fn strict_round_exact(x: i128) -> Value {
    match x {
        1 => Value::T,
        -1 => Value::F,
        _ => Value::Err,
    }
}

/// Normalized Hamming distance on {T,F,err}^n; symbol inequality, so
/// err == err counts as agreement.
pub fn hamming_delta(x: &Assignment, y: &Assignment) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let mismatches = x
        .values()
        .iter()
        .zip(y.values())
        .filter(|(a, b)| a != b)
        .count();
    Ok(mismatches as f64 / x.len() as f64)
}
