//! Native stand-ins for library harnesses.
//!
//! A [`ReferenceHarness`] evaluates the computation directly on interpreter
//! memory. A [`MarshaledHarness`] goes through the marshaling runtime the way
//! a generated harness would: inputs are copied into library-side objects
//! that are only refreshed when the host memory changed, scalar invariants
//! are cached, and outputs are written back after the body ran.

use std::collections::{BTreeMap, HashMap};

use lilac_marshal::{
    cached_invariant, HookError, HostCopy, LastElement, MarshalError, MarshalObject,
    MarshalRegistry, MaxPlusOne, ObjectId, RegionStats, ReleaseReport, Strategy, WriteBackHooks,
    WriteBackObject,
};
use thiserror::Error;

use crate::how::{ClassKind, Harness, HowProgram};
use crate::spec::SpecFile;
use crate::what::{
    execute, infer_interface, ExecError, Expr, HarnessSignature, InterfaceError, ParamKind,
    WhatEnv, WhatProgram,
};

use super::{BufId, Memory, Trap, Val};

pub trait NativeHarness {
    fn signature(&self) -> &HarnessSignature;
    fn call(&mut self, args: &[Val], mem: &mut Memory) -> Result<(), Trap>;

    /// Counters of the marshal objects owned by this harness.
    fn stats(&self) -> Vec<RegionStats> {
        Vec::new()
    }

    fn release(&mut self) -> ReleaseReport {
        ReleaseReport::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("a harness named `{0}` is already registered")]
    DuplicateRegistration(String),
    #[error(transparent)]
    Interface(#[from] InterfaceError),
    #[error("harness `{harness}` implements unknown computation `{computation}`")]
    UnknownComputation {
        harness: String,
        computation: String,
    },
    #[error(
        "harness `{harness}` marshals `{binding}` with class `{class}`, which cannot be emulated"
    )]
    UnsupportedClass {
        harness: String,
        binding: String,
        class: String,
    },
    #[error("harness `{harness}` marshals `{array}`, which is not an array argument")]
    UnknownArray { harness: String, array: String },
}

#[derive(Default)]
pub struct HarnessRegistry {
    entries: BTreeMap<String, Box<dyn NativeHarness>>,
}

impl HarnessRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        harness: Box<dyn NativeHarness>,
    ) -> Result<(), RegistryError> {
        if self.entries.contains_key(name) {
            return Err(RegistryError::DuplicateRegistration(name.to_string()));
        }
        self.entries.insert(name.to_string(), harness);
        Ok(())
    }

    /// Registers `lilac.<computation>` for every computation of `spec`, and a
    /// marshaled harness under the name of every library harness.
    pub fn from_spec(spec: &SpecFile, strategy: Strategy) -> Result<Self, RegistryError> {
        let mut reg = HarnessRegistry::new();
        for c in &spec.computations {
            reg.register(
                &format!("lilac.{}", c.name),
                Box::new(ReferenceHarness::new(c.clone())?),
            )?;
        }
        for h in &spec.how.harnesses {
            let comp = spec.computation(&h.implements).ok_or_else(|| {
                RegistryError::UnknownComputation {
                    harness: h.name.clone(),
                    computation: h.implements.clone(),
                }
            })?;
            reg.register(
                &h.name,
                Box::new(MarshaledHarness::new(comp.clone(), h, &spec.how, strategy)?),
            )?;
        }
        Ok(reg)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut (dyn NativeHarness + 'static)> {
        self.entries.get_mut(name).map(|b| b.as_mut())
    }

    pub fn call(&mut self, name: &str, args: &[Val], mem: &mut Memory) -> Result<(), Trap> {
        let h = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Trap::UnregisteredHarness(name.to_string()))?;
        h.call(args, mem)
    }

    /// Per-harness marshaling counters, for harnesses that own any objects.
    pub fn stats(&self) -> Vec<(String, Vec<RegionStats>)> {
        self.entries
            .iter()
            .map(|(n, h)| (n.clone(), h.stats()))
            .filter(|(_, s)| !s.is_empty())
            .collect()
    }

    pub fn release_all(&mut self) -> Vec<(String, ReleaseReport)> {
        self.entries
            .iter_mut()
            .map(|(n, h)| (n.clone(), h.release()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Arg {
    Scalar(i64),
    Array { buf: BufId, off: i64 },
}

fn mismatch(sig: &HarnessSignature, msg: String) -> Trap {
    Trap::HarnessSignatureMismatch {
        harness: sig.computation.clone(),
        msg,
    }
}

fn bind_args(sig: &HarnessSignature, args: &[Val], mem: &Memory) -> Result<Vec<Arg>, Trap> {
    if args.len() != sig.params.len() {
        return Err(mismatch(
            sig,
            format!(
                "expected {} arguments, got {}",
                sig.params.len(),
                args.len()
            ),
        ));
    }
    sig.params
        .iter()
        .zip(args)
        .map(|(p, a)| match (p.kind, *a) {
            (ParamKind::ScalarInt, Val::I64(v)) => Ok(Arg::Scalar(v)),
            (ParamKind::ArrayInt, Val::Ptr { buf, off }) if mem.ints(buf).is_some() => {
                Ok(Arg::Array { buf, off })
            }
            (ParamKind::ArrayFloatIn | ParamKind::ArrayFloatOut, Val::Ptr { buf, off })
                if mem.floats(buf).is_some() =>
            {
                Ok(Arg::Array { buf, off })
            }
            (kind, v) => Err(mismatch(
                sig,
                format!("`{}` must be {kind}, got {v}", p.name),
            )),
        })
        .collect()
}

struct MemEnv<'a> {
    mem: &'a mut Memory,
    args: HashMap<&'a str, Arg>,
}

impl MemEnv<'_> {
    fn array(&self, name: &str) -> Result<(BufId, i64), ExecError> {
        match self.args.get(name) {
            Some(Arg::Array { buf, off }) => Ok((*buf, *off)),
            Some(Arg::Scalar(_)) => Err(ExecError::TypeMismatch {
                name: name.to_string(),
                expected: "an array",
            }),
            None => Err(ExecError::UnboundVariable(name.to_string())),
        }
    }
}

fn trap_to_exec(array: &str, index: i64, t: Trap) -> ExecError {
    match t {
        Trap::OutOfBounds { .. } => ExecError::OutOfBounds {
            array: array.to_string(),
            index,
        },
        other => ExecError::Environment(other.to_string()),
    }
}

impl WhatEnv for MemEnv<'_> {
    fn scalar(&self, name: &str) -> Result<i64, ExecError> {
        match self.args.get(name) {
            Some(Arg::Scalar(v)) => Ok(*v),
            Some(_) => Err(ExecError::TypeMismatch {
                name: name.to_string(),
                expected: "an integer",
            }),
            None => Err(ExecError::UnboundVariable(name.to_string())),
        }
    }

    fn load_int(&self, array: &str, index: i64) -> Result<i64, ExecError> {
        let (buf, off) = self.array(array)?;
        match self.mem.load(buf, off.wrapping_add(index)) {
            Ok(Val::I64(v)) => Ok(v),
            Ok(_) => Err(ExecError::TypeMismatch {
                name: array.to_string(),
                expected: "an integer array",
            }),
            Err(t) => Err(trap_to_exec(array, index, t)),
        }
    }

    fn load_float(&self, array: &str, index: i64) -> Result<f64, ExecError> {
        let (buf, off) = self.array(array)?;
        match self.mem.load(buf, off.wrapping_add(index)) {
            Ok(Val::F64(v)) => Ok(v),
            Ok(_) => Err(ExecError::TypeMismatch {
                name: array.to_string(),
                expected: "a float array",
            }),
            Err(t) => Err(trap_to_exec(array, index, t)),
        }
    }

    fn store_float(&mut self, array: &str, index: i64, value: f64) -> Result<(), ExecError> {
        let (buf, off) = self.array(array)?;
        self.mem
            .store(buf, off.wrapping_add(index), Val::F64(value))
            .map_err(|t| trap_to_exec(array, index, t))
    }
}

/// Runs the computation in place on interpreter memory.
pub struct ReferenceHarness {
    what: WhatProgram,
    sig: HarnessSignature,
}

impl ReferenceHarness {
    pub fn new(what: WhatProgram) -> Result<Self, RegistryError> {
        let sig = infer_interface(&what)?;
        Ok(ReferenceHarness { what, sig })
    }
}

impl NativeHarness for ReferenceHarness {
    fn signature(&self) -> &HarnessSignature {
        &self.sig
    }

    fn call(&mut self, args: &[Val], mem: &mut Memory) -> Result<(), Trap> {
        let bound = bind_args(&self.sig, args, mem)?;
        let mut env = MemEnv {
            mem,
            args: self
                .sig
                .params
                .iter()
                .map(|p| p.name.as_str())
                .zip(bound)
                .collect(),
        };
        execute(&self.what, &mut env).map_err(|e| Trap::Harness {
            harness: self.sig.computation.clone(),
            msg: e.to_string(),
        })
    }
}

/// Library-side output buffer that remembers which elements the body wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Masked {
    pub vals: Vec<f64>,
    pub written: Vec<bool>,
}

/// Write-back hooks that copy only the elements the body produced, so host
/// values outside the computed rows survive.
#[derive(Debug, Default)]
pub struct MaskedCopy;

impl WriteBackHooks<f64> for MaskedCopy {
    type Out = Masked;

    fn construct(&mut self, size: usize) -> Result<Masked, HookError> {
        Ok(Masked {
            vals: vec![0.0; size],
            written: vec![false; size],
        })
    }

    fn update(&mut self, out: &Masked, host: &mut [f64]) -> Result<(), HookError> {
        if out.vals.len() != host.len() {
            return Err(HookError::new("output buffer size changed"));
        }
        for (i, v) in out.vals.iter().enumerate() {
            if out.written[i] {
                host[i] = *v;
            }
        }
        Ok(())
    }

    fn destruct(&mut self, _size: usize, _out: Masked) -> Result<(), HookError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Invariant {
    Max,
    Last,
}

#[derive(Debug, Clone)]
enum SlotKind {
    /// Library copy of an argument array.
    Copy { param: String },
    /// Output argument written back after the body.
    Out { param: String },
    /// Integer invariant of an array, available to later extents.
    Scalar { name: String, how: Invariant },
}

#[derive(Debug, Clone)]
struct SlotPlan {
    label: String,
    array: String,
    extent: Option<Expr>,
    kind: SlotKind,
}

enum Live {
    Int(ObjectId<MarshalObject<i64, HostCopy<i64>>>),
    Float(ObjectId<MarshalObject<f64, HostCopy<f64>>>),
    Out(ObjectId<WriteBackObject<f64, MaskedCopy>>),
    Max(ObjectId<MarshalObject<i64, MaxPlusOne>>),
    Last(ObjectId<MarshalObject<i64, LastElement>>),
}

/// Emulates a generated harness for one library description.
pub struct MarshaledHarness {
    name: String,
    what: WhatProgram,
    sig: HarnessSignature,
    strategy: Strategy,
    plan: Vec<SlotPlan>,
    live: Vec<Live>,
    registry: MarshalRegistry,
    scalars: BTreeMap<String, i64>,
    released: Vec<RegionStats>,
}

fn invariant_class(class: &str) -> Option<Invariant> {
    match class {
        "ReadMax" => Some(Invariant::Max),
        "ReadLast" => Some(Invariant::Last),
        _ => None,
    }
}

impl MarshaledHarness {
    /// Plans one marshal object per binding of `h`, plus a whole-buffer copy
    /// for every array argument no binding covers.
    ///
    /// Array bindings (`T* x = C of a [..]`) copy `a`; integer bindings are
    /// emulated for the classes `ReadMax` (largest element plus one) and
    /// `ReadLast` (last element).
    pub fn new(
        what: WhatProgram,
        h: &Harness,
        how: &HowProgram,
        strategy: Strategy,
    ) -> Result<Self, RegistryError> {
        let sig = infer_interface(&what)?;
        let mut plan = Vec::new();
        let mut covered = Vec::new();
        for b in &h.bindings {
            let Some(p) = sig.param(&b.array).filter(|p| p.kind.is_array()) else {
                return Err(RegistryError::UnknownArray {
                    harness: h.name.clone(),
                    array: b.array.clone(),
                });
            };
            let unsupported = || RegistryError::UnsupportedClass {
                harness: h.name.clone(),
                binding: b.out_name.clone(),
                class: b.class.clone(),
            };
            let kind = if b.out_type.trim_end().ends_with('*') {
                let is_output = how
                    .class(&b.class)
                    .map(|c| c.kind == ClassKind::Output)
                    .unwrap_or(p.kind == ParamKind::ArrayFloatOut);
                if is_output != (p.kind == ParamKind::ArrayFloatOut) {
                    return Err(unsupported());
                }
                covered.push(p.name.clone());
                if is_output {
                    SlotKind::Out {
                        param: p.name.clone(),
                    }
                } else {
                    SlotKind::Copy {
                        param: p.name.clone(),
                    }
                }
            } else {
                let how = invariant_class(&b.class).ok_or_else(unsupported)?;
                if p.kind != ParamKind::ArrayInt {
                    return Err(unsupported());
                }
                SlotKind::Scalar {
                    name: b.out_name.clone(),
                    how,
                }
            };
            plan.push(SlotPlan {
                label: format!("{}.{}", h.name, b.out_name),
                array: b.array.clone(),
                extent: Some(b.extent.clone()),
                kind,
            });
        }
        for p in sig.params.iter().filter(|p| p.kind.is_array()) {
            if covered.contains(&p.name) {
                continue;
            }
            let kind = if p.kind == ParamKind::ArrayFloatOut {
                SlotKind::Out {
                    param: p.name.clone(),
                }
            } else {
                SlotKind::Copy {
                    param: p.name.clone(),
                }
            };
            plan.push(SlotPlan {
                label: format!("{}.{}", h.name, p.name),
                array: p.name.clone(),
                extent: None,
                kind,
            });
        }
        Ok(MarshaledHarness {
            name: h.name.clone(),
            what,
            sig,
            strategy,
            plan,
            live: Vec::new(),
            registry: MarshalRegistry::new(),
            scalars: BTreeMap::new(),
            released: Vec::new(),
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Integer invariants computed by the most recent call, by binding name.
    pub fn scalars(&self) -> &BTreeMap<String, i64> {
        &self.scalars
    }

    /// Counters of the object with label `<harness>.<name>`.
    pub fn counters(&self, name: &str) -> Option<lilac_marshal::MarshalCounters> {
        let label = format!("{}.{name}", self.name);
        self.registry
            .stats()
            .into_iter()
            .chain(self.released.iter().cloned())
            .find(|s| s.region == label)
            .map(|s| s.counters)
    }

    fn instantiate(&mut self, mem: &Memory, args: &HashMap<String, Arg>) {
        self.live = self
            .plan
            .iter()
            .map(|s| match &s.kind {
                SlotKind::Copy { .. } => match args.get(&s.array) {
                    Some(Arg::Array { buf, .. }) if mem.ints(*buf).is_some() => {
                        Live::Int(self.registry.register(MarshalObject::new(
                            s.label.clone(),
                            self.strategy,
                            HostCopy::default(),
                        )))
                    }
                    _ => Live::Float(self.registry.register(MarshalObject::new(
                        s.label.clone(),
                        self.strategy,
                        HostCopy::default(),
                    ))),
                },
                SlotKind::Out { .. } => Live::Out(
                    self.registry
                        .register_write_back(WriteBackObject::new(s.label.clone(), MaskedCopy)),
                ),
                SlotKind::Scalar {
                    how: Invariant::Max,
                    ..
                } => Live::Max(self.registry.register(MarshalObject::new(
                    s.label.clone(),
                    self.strategy,
                    MaxPlusOne,
                ))),
                SlotKind::Scalar {
                    how: Invariant::Last,
                    ..
                } => Live::Last(self.registry.register(MarshalObject::new(
                    s.label.clone(),
                    self.strategy,
                    LastElement,
                ))),
            })
            .collect();
    }

    fn fail(&self, msg: impl ToString) -> Trap {
        Trap::Harness {
            harness: self.name.clone(),
            msg: msg.to_string(),
        }
    }
}

fn eval_extent(e: &Expr, scalars: &BTreeMap<String, i64>) -> Result<i64, String> {
    Ok(match e {
        Expr::Name(n) => *scalars
            .get(n)
            .ok_or_else(|| format!("extent refers to unknown `{n}`"))?,
        Expr::Const(c) => *c,
        Expr::Add(a, b) => eval_extent(a, scalars)?.wrapping_add(eval_extent(b, scalars)?),
        Expr::Mul(a, b) => eval_extent(a, scalars)?.wrapping_mul(eval_extent(b, scalars)?),
        Expr::Addr(_) => return Err("extent may not index arrays".to_string()),
    })
}

/// Host range `[off, off + extent)` of a buffer, or the rest of the buffer.
fn host_range(
    mem: &Memory,
    buf: BufId,
    off: i64,
    extent: Option<i64>,
) -> Result<std::ops::Range<usize>, Trap> {
    let b = mem.buffer(buf);
    let len = mem
        .ints(buf)
        .map(<[i64]>::len)
        .or_else(|| mem.floats(buf).map(<[f64]>::len))
        .unwrap_or(0);
    let oob = |index: i64| Trap::OutOfBounds {
        buffer: b.name.clone(),
        index,
        len,
    };
    let start = usize::try_from(off)
        .ok()
        .filter(|&s| s <= len)
        .ok_or(oob(off))?;
    let end = match extent {
        None => len,
        Some(n) if n < 0 => return Err(oob(off.wrapping_add(n))),
        Some(n) => {
            let end = off.wrapping_add(n);
            usize::try_from(end)
                .ok()
                .filter(|&e| e <= len)
                .ok_or(oob(end.wrapping_sub(1)))?
        }
    };
    Ok(start..end)
}

/// Library-side view of the arguments while the body runs.
#[derive(Default)]
struct CopyEnv {
    scalars: BTreeMap<String, i64>,
    ints: HashMap<String, Vec<i64>>,
    floats: HashMap<String, Vec<f64>>,
    outs: HashMap<String, Masked>,
}

fn oob(array: &str, index: i64) -> ExecError {
    ExecError::OutOfBounds {
        array: array.to_string(),
        index,
    }
}

fn at<T: Copy>(v: &[T], array: &str, index: i64) -> Result<T, ExecError> {
    usize::try_from(index)
        .ok()
        .and_then(|i| v.get(i).copied())
        .ok_or_else(|| oob(array, index))
}

impl WhatEnv for CopyEnv {
    fn scalar(&self, name: &str) -> Result<i64, ExecError> {
        self.scalars
            .get(name)
            .copied()
            .ok_or_else(|| ExecError::UnboundVariable(name.to_string()))
    }

    fn load_int(&self, array: &str, index: i64) -> Result<i64, ExecError> {
        let v = self
            .ints
            .get(array)
            .ok_or_else(|| ExecError::UnboundVariable(array.to_string()))?;
        at(v, array, index)
    }

    fn load_float(&self, array: &str, index: i64) -> Result<f64, ExecError> {
        let v = self
            .floats
            .get(array)
            .ok_or_else(|| ExecError::UnboundVariable(array.to_string()))?;
        at(v, array, index)
    }

    fn store_float(&mut self, array: &str, index: i64, value: f64) -> Result<(), ExecError> {
        let m = self
            .outs
            .get_mut(array)
            .ok_or_else(|| ExecError::UnboundVariable(array.to_string()))?;
        let i = usize::try_from(index)
            .ok()
            .filter(|&i| i < m.vals.len())
            .ok_or_else(|| oob(array, index))?;
        m.vals[i] = value;
        m.written[i] = true;
        Ok(())
    }
}

fn marshal_err(e: MarshalError) -> String {
    e.to_string()
}

impl NativeHarness for MarshaledHarness {
    fn signature(&self) -> &HarnessSignature {
        &self.sig
    }

    fn call(&mut self, args: &[Val], mem: &mut Memory) -> Result<(), Trap> {
        let bound = bind_args(&self.sig, args, mem).map_err(|t| match t {
            Trap::HarnessSignatureMismatch { msg, .. } => Trap::HarnessSignatureMismatch {
                harness: self.name.clone(),
                msg,
            },
            other => other,
        })?;
        let args: HashMap<String, Arg> = self
            .sig
            .params
            .iter()
            .map(|p| p.name.clone())
            .zip(bound)
            .collect();
        if self.live.is_empty() {
            self.instantiate(mem, &args);
        }
        let mut env = CopyEnv::default();
        for (name, a) in &args {
            if let Arg::Scalar(v) = a {
                env.scalars.insert(name.clone(), *v);
            }
        }
        let mut outs = Vec::new();
        for (si, slot) in self.plan.iter().enumerate() {
            let Some(Arg::Array { buf, off }) = args.get(&slot.array).copied() else {
                return Err(self.fail(format!("`{}` is not an array argument", slot.array)));
            };
            let extent = slot
                .extent
                .as_ref()
                .map(|e| eval_extent(e, &env.scalars))
                .transpose()
                .map_err(|m| self.fail(m))?;
            let range = host_range(mem, buf, off, extent)?;
            let version = Some(mem.version(buf));
            let fail = |e: MarshalError| Trap::Harness {
                harness: self.name.clone(),
                msg: marshal_err(e),
            };
            match (&self.live[si], &slot.kind) {
                (Live::Int(id), SlotKind::Copy { param }) => {
                    let host = &mem.ints(buf).expect("int buffer")[range];
                    let obj = self.registry.get_mut(*id).expect("live object");
                    let copy = obj.acquire(host, version).map_err(fail)?;
                    env.ints.insert(param.clone(), copy.clone());
                }
                (Live::Float(id), SlotKind::Copy { param }) => {
                    let host = &mem.floats(buf).expect("float buffer")[range];
                    let obj = self.registry.get_mut(*id).expect("live object");
                    let copy = obj.acquire(host, version).map_err(fail)?;
                    env.floats.insert(param.clone(), copy.clone());
                }
                (Live::Max(id), SlotKind::Scalar { name, .. }) => {
                    let host = &mem.ints(buf).expect("int buffer")[range];
                    let obj = self.registry.get_mut(*id).expect("live object");
                    let v = cached_invariant(obj, host, version).map_err(fail)?;
                    env.scalars.insert(name.clone(), v);
                }
                (Live::Last(id), SlotKind::Scalar { name, .. }) => {
                    let host = &mem.ints(buf).expect("int buffer")[range];
                    let obj = self.registry.get_mut(*id).expect("live object");
                    let v = cached_invariant(obj, host, version).map_err(fail)?;
                    env.scalars.insert(name.clone(), v);
                }
                (Live::Out(id), SlotKind::Out { param }) => {
                    let host = &mem.floats(buf).expect("float buffer")[range.clone()];
                    let obj = self.registry.get_mut(*id).expect("live object");
                    let out = obj.acquire(host).map_err(fail)?;
                    out.written.iter_mut().for_each(|w| *w = false);
                    env.outs.insert(param.clone(), out.clone());
                    outs.push((si, param.clone(), buf, range));
                }
                _ => unreachable!("slots are instantiated from the plan"),
            }
        }
        self.scalars = env
            .scalars
            .iter()
            .filter(|(k, _)| self.sig.param(k).is_none())
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        execute(&self.what, &mut env).map_err(|e| self.fail(e))?;
        for (si, param, buf, range) in outs {
            let Live::Out(id) = &self.live[si] else {
                unreachable!()
            };
            let obj = self.registry.get_mut(*id).expect("live object");
            let host = &mem.floats(buf).expect("float buffer")[range.clone()];
            *obj.acquire(host).map_err(|e| Trap::Harness {
                harness: self.name.clone(),
                msg: marshal_err(e),
            })? = env.outs.remove(&param).expect("output prepared");
            let host = &mut mem.floats_mut(buf).expect("float buffer")[range];
            obj.write_back(host).map_err(|e| Trap::Harness {
                harness: self.name.clone(),
                msg: marshal_err(e),
            })?;
        }
        Ok(())
    }

    fn stats(&self) -> Vec<RegionStats> {
        if self.live.is_empty() {
            self.released.clone()
        } else {
            self.registry.stats()
        }
    }

    fn release(&mut self) -> ReleaseReport {
        let report = self.registry.release_all();
        self.released = report.stats.clone();
        self.live.clear();
        report
    }
}
