//! Entry-point arguments from JSON and the observable result of a run.
//!
//! A dataset is a JSON object mapping parameter names to a number or an
//! array of numbers. Pointer parameters get a fresh buffer each, named after
//! the parameter.

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::ir::{Function, Type};

use super::{Interpreter, Trap, Val};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("dataset must be a JSON object")]
    NotAnObject,
    #[error("dataset has no value for parameter `%{0}`")]
    Missing(String),
    #[error("dataset value for `%{name}` is not {expected}")]
    WrongType {
        name: String,
        expected: &'static str,
    },
    #[error("dataset names `{0}`, which is not a parameter")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Trap(#[from] Trap),
}

/// Final contents of a pointer parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayValue {
    Int(Vec<i64>),
    Float(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub ret: Option<Val>,
    /// Pointer parameters in declaration order, with whether the run wrote
    /// to them.
    pub arrays: Vec<(String, ArrayValue, bool)>,
    pub steps: u64,
}

impl RunOutcome {
    pub fn array(&self, name: &str) -> Option<&ArrayValue> {
        self.arrays
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, a, _)| a)
    }

    pub fn floats(&self, name: &str) -> Option<&[f64]> {
        match self.array(name) {
            Some(ArrayValue::Float(v)) => Some(v),
            _ => None,
        }
    }

    /// One `name=value` line per written array, then the return value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, a, written) in &self.arrays {
            if !written {
                continue;
            }
            let items: Vec<String> = match a {
                ArrayValue::Int(v) => v.iter().map(i64::to_string).collect(),
                ArrayValue::Float(v) => v.iter().map(f64::to_string).collect(),
            };
            out.push_str(&format!("{name}=[{}]\n", items.join(",")));
        }
        if let Some(r) = &self.ret {
            out.push_str(&format!("ret={}\n", scalar_text(r)));
        }
        out
    }

    pub fn to_json(&self) -> Json {
        let mut arrays = Map::new();
        for (name, a, _) in &self.arrays {
            let v = match a {
                ArrayValue::Int(v) => json!(v),
                ArrayValue::Float(v) => json!(v),
            };
            arrays.insert(name.clone(), v);
        }
        let written: Vec<&str> = self
            .arrays
            .iter()
            .filter(|(_, _, w)| *w)
            .map(|(n, _, _)| n.as_str())
            .collect();
        json!({
            "ret": self.ret.as_ref().map(scalar_json),
            "arrays": arrays,
            "written": written,
            "steps": self.steps,
        })
    }
}

fn scalar_text(v: &Val) -> String {
    match v {
        Val::F64(x) => x.to_string(),
        other => other.to_string(),
    }
}

fn scalar_json(v: &Val) -> Json {
    match v {
        Val::I1(b) => json!(b),
        Val::I64(i) => json!(i),
        Val::F64(x) => json!(x),
        Val::Ptr { .. } => json!(v.to_string()),
    }
}

/// Allocates buffers for the pointer parameters of `f` and returns the
/// argument list.
pub fn bind_data(f: &Function, data: &Json, it: &mut Interpreter) -> Result<Vec<Val>, DataError> {
    let obj = data.as_object().ok_or(DataError::NotAnObject)?;
    if let Some(k) = obj.keys().find(|k| !f.is_param(k)) {
        return Err(DataError::Unknown(k.clone()));
    }
    let mut args = Vec::new();
    for p in &f.params {
        let v = obj
            .get(&p.name)
            .ok_or_else(|| DataError::Missing(p.name.clone()))?;
        let wrong = |expected| DataError::WrongType {
            name: p.name.clone(),
            expected,
        };
        let arg = match p.ty {
            Type::I1 => Val::I1(v.as_bool().ok_or_else(|| wrong("a boolean"))?),
            Type::I64 => Val::I64(v.as_i64().ok_or_else(|| wrong("an integer"))?),
            Type::F64 => Val::F64(v.as_f64().ok_or_else(|| wrong("a number"))?),
            Type::PtrI64 => {
                let items = v
                    .as_array()
                    .and_then(|a| a.iter().map(Json::as_i64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| wrong("an array of integers"))?;
                Val::Ptr {
                    buf: it.memory.alloc_int(&p.name, &items),
                    off: 0,
                }
            }
            Type::PtrF64 => {
                let items = v
                    .as_array()
                    .and_then(|a| a.iter().map(Json::as_f64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| wrong("an array of numbers"))?;
                Val::Ptr {
                    buf: it.memory.alloc_float(&p.name, &items),
                    off: 0,
                }
            }
        };
        args.push(arg);
    }
    Ok(args)
}

/// Runs `f` on `data` and collects the final contents of its arrays.
pub fn run_with_data(
    it: &mut Interpreter,
    f: &Function,
    data: &Json,
) -> Result<RunOutcome, RunError> {
    let args = bind_data(f, data, it)?;
    let before: Vec<Option<u64>> = args
        .iter()
        .map(|a| match a {
            Val::Ptr { buf, .. } => Some(it.memory.version(*buf)),
            _ => None,
        })
        .collect();
    let steps = it.steps();
    let ret = it.call(&f.name, &args)?;
    let mut arrays = Vec::new();
    for ((p, a), v0) in f.params.iter().zip(&args).zip(before) {
        let Val::Ptr { buf, .. } = a else { continue };
        let value = match (it.memory.ints(*buf), it.memory.floats(*buf)) {
            (Some(v), _) => ArrayValue::Int(v.to_vec()),
            (_, Some(v)) => ArrayValue::Float(v.to_vec()),
            _ => unreachable!("buffers are int or float"),
        };
        arrays.push((p.name.clone(), value, Some(it.memory.version(*buf)) != v0));
    }
    Ok(RunOutcome {
        ret,
        arrays,
        steps: it.steps() - steps,
    })
}
