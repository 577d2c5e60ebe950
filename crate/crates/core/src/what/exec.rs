//! Reference semantics of computations.
//!
//! Integer arithmetic wraps. Each dot product starts from `0.0` and adds the
//! products in increasing iterator order, which fixes the floating-point
//! rounding that compiled loops are compared against.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Addr, Body, DotOp, Expr, Target, WhatProgram};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("index {index} is out of bounds for `{array}`")]
    OutOfBounds { array: String, index: i64 },
    #[error("`{0}` is not bound")]
    UnboundVariable(String),
    #[error("`{name}` must be {expected}")]
    TypeMismatch {
        name: String,
        expected: &'static str,
    },
    #[error("{0}")]
    Environment(String),
}

/// Storage the interpreter reads and writes. Implemented by [`Bindings`]
/// and by the IR interpreter's memory, so aliasing arrays behave exactly as
/// they would in a compiled program.
pub trait WhatEnv {
    fn scalar(&self, name: &str) -> Result<i64, ExecError>;
    fn load_int(&self, array: &str, index: i64) -> Result<i64, ExecError>;
    fn load_float(&self, array: &str, index: i64) -> Result<f64, ExecError>;
    fn store_float(&mut self, array: &str, index: i64, value: f64) -> Result<(), ExecError>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    IntArray(Vec<i64>),
    FloatArray(Vec<f64>),
}

/// Named values for a standalone run of a computation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bindings(pub BTreeMap<String, Value>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn floats(&self, name: &str) -> Option<&[f64]> {
        match self.0.get(name) {
            Some(Value::FloatArray(v)) => Some(v),
            _ => None,
        }
    }

    fn slot(&self, name: &str) -> Result<&Value, ExecError> {
        self.0
            .get(name)
            .ok_or_else(|| ExecError::UnboundVariable(name.to_string()))
    }
}

fn checked_index(len: usize, array: &str, index: i64) -> Result<usize, ExecError> {
    if index >= 0 && (index as u64) < len as u64 {
        Ok(index as usize)
    } else {
        Err(ExecError::OutOfBounds {
            array: array.to_string(),
            index,
        })
    }
}

impl WhatEnv for Bindings {
    fn scalar(&self, name: &str) -> Result<i64, ExecError> {
        match self.slot(name)? {
            Value::Int(v) => Ok(*v),
            _ => Err(ExecError::TypeMismatch {
                name: name.to_string(),
                expected: "an integer",
            }),
        }
    }

    fn load_int(&self, array: &str, index: i64) -> Result<i64, ExecError> {
        match self.slot(array)? {
            Value::IntArray(v) => Ok(v[checked_index(v.len(), array, index)?]),
            _ => Err(ExecError::TypeMismatch {
                name: array.to_string(),
                expected: "an integer array",
            }),
        }
    }

    fn load_float(&self, array: &str, index: i64) -> Result<f64, ExecError> {
        match self.slot(array)? {
            Value::FloatArray(v) => Ok(v[checked_index(v.len(), array, index)?]),
            _ => Err(ExecError::TypeMismatch {
                name: array.to_string(),
                expected: "a float array",
            }),
        }
    }

    fn store_float(&mut self, array: &str, index: i64, value: f64) -> Result<(), ExecError> {
        match self.0.get_mut(array) {
            Some(Value::FloatArray(v)) => {
                let i = checked_index(v.len(), array, index)?;
                v[i] = value;
                Ok(())
            }
            Some(_) => Err(ExecError::TypeMismatch {
                name: array.to_string(),
                expected: "a float array",
            }),
            None => Err(ExecError::UnboundVariable(array.to_string())),
        }
    }
}

struct Frame<'p> {
    iterators: Vec<(&'p str, i64)>,
}

impl<'p> Frame<'p> {
    fn eval<E: WhatEnv + ?Sized>(&self, e: &Expr, env: &E) -> Result<i64, ExecError> {
        match e {
            Expr::Name(n) => match self.iterators.iter().rev().find(|(it, _)| it == n) {
                Some((_, v)) => Ok(*v),
                None => env.scalar(n),
            },
            Expr::Const(c) => Ok(*c),
            Expr::Addr(a) => env.load_int(&a.base, self.eval(&a.index, env)?),
            Expr::Add(a, b) => Ok(self.eval(a, env)?.wrapping_add(self.eval(b, env)?)),
            Expr::Mul(a, b) => Ok(self.eval(a, env)?.wrapping_mul(self.eval(b, env)?)),
        }
    }

    fn load<E: WhatEnv + ?Sized>(&self, a: &Addr, env: &E) -> Result<f64, ExecError> {
        env.load_float(&a.base, self.eval(&a.index, env)?)
    }

    fn dot<E: WhatEnv + ?Sized>(&mut self, d: &'p DotOp, env: &mut E) -> Result<(), ExecError> {
        let lo = self.eval(&d.range.lower, env)?;
        let hi = self.eval(&d.range.upper, env)?;
        let mut acc = 0.0f64;
        let mut j = lo;
        while j < hi {
            self.iterators.push((&d.range.iterator, j));
            let term = self.load(&d.lhs, env)? * self.load(&d.rhs, env)?;
            self.iterators.pop();
            acc += term;
            j += 1;
        }
        match &d.target {
            Target::Scalar(n) => env.store_float(n, 0, acc),
            Target::Element(a) => {
                let idx = self.eval(&a.index, env)?;
                env.store_float(&a.base, idx, acc)
            }
        }
    }

    fn body<E: WhatEnv + ?Sized>(&mut self, b: &'p Body, env: &mut E) -> Result<(), ExecError> {
        match b {
            Body::Dot(d) => self.dot(d, env),
            Body::ForAll(f) => {
                let lo = self.eval(&f.range.lower, env)?;
                let hi = self.eval(&f.range.upper, env)?;
                let mut i = lo;
                while i < hi {
                    self.iterators.push((&f.range.iterator, i));
                    self.body(&f.body, env)?;
                    self.iterators.pop();
                    i += 1;
                }
                Ok(())
            }
        }
    }
}

/// Runs `p` against `env` in place.
pub fn execute<E: WhatEnv + ?Sized>(p: &WhatProgram, env: &mut E) -> Result<(), ExecError> {
    Frame {
        iterators: Vec::new(),
    }
    .body(&p.body, env)
}

/// Runs `p` on a copy of `input` and returns the updated bindings.
pub fn interpret_what(p: &WhatProgram, input: &Bindings) -> Result<Bindings, ExecError> {
    let mut env = input.clone();
    execute(p, &mut env)?;
    Ok(env)
}
