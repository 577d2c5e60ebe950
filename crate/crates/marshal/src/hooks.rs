//! Ready-made hook sets.

use std::marker::PhantomData;

use crate::error::{HookError, MarshalError};
use crate::object::{MarshalHooks, MarshalObject, WriteBackHooks};
use crate::region::Element;

/// Simulated device transfer: `out` is a private copy of the host array.
#[derive(Debug, Clone, Copy)]
pub struct HostCopy<T>(PhantomData<T>);

impl<T> Default for HostCopy<T> {
    fn default() -> Self {
        HostCopy(PhantomData)
    }
}

impl<T: Element + Default> MarshalHooks<T> for HostCopy<T> {
    type Out = Vec<T>;

    fn construct(&mut self, size: usize) -> Result<Vec<T>, HookError> {
        Ok(vec![T::default(); size])
    }

    fn update(&mut self, input: &[T], out: &mut Vec<T>) -> Result<(), HookError> {
        out.clear();
        out.extend_from_slice(input);
        Ok(())
    }

    fn destruct(&mut self, _size: usize, _out: Vec<T>) -> Result<(), HookError> {
        Ok(())
    }
}

impl<T: Element + Default> WriteBackHooks<T> for HostCopy<T> {
    type Out = Vec<T>;

    fn construct(&mut self, size: usize) -> Result<Vec<T>, HookError> {
        Ok(vec![T::default(); size])
    }

    fn update(&mut self, out: &Vec<T>, host: &mut [T]) -> Result<(), HookError> {
        if out.len() != host.len() {
            return Err(HookError::new(format!(
                "device buffer holds {} elements, host array {}",
                out.len(),
                host.len()
            )));
        }
        host.copy_from_slice(out);
        Ok(())
    }

    fn destruct(&mut self, _size: usize, _out: Vec<T>) -> Result<(), HookError> {
        Ok(())
    }
}

/// Cached column count of a sparse matrix: `1 + max(in[0..size])`, or 0
/// for an empty range.
#[derive(Debug, Default, Clone, Copy)]
pub struct MaxPlusOne;

impl MarshalHooks<i64> for MaxPlusOne {
    type Out = i64;

    fn construct(&mut self, _size: usize) -> Result<i64, HookError> {
        Ok(0)
    }

    fn update(&mut self, input: &[i64], out: &mut i64) -> Result<(), HookError> {
        *out = input.iter().max().map_or(0, |m| m + 1);
        Ok(())
    }

    fn destruct(&mut self, _size: usize, _out: i64) -> Result<(), HookError> {
        Ok(())
    }
}

/// Cached last element, e.g. the non-zero count `row_ptr[rows]`.
#[derive(Debug, Default, Clone, Copy)]
pub struct LastElement;

impl MarshalHooks<i64> for LastElement {
    type Out = i64;

    fn construct(&mut self, _size: usize) -> Result<i64, HookError> {
        Ok(0)
    }

    fn update(&mut self, input: &[i64], out: &mut i64) -> Result<(), HookError> {
        *out = input.last().copied().unwrap_or(0);
        Ok(())
    }

    fn destruct(&mut self, _size: usize, _out: i64) -> Result<(), HookError> {
        Ok(())
    }
}

/// Reads a scalar invariant through `obj`, recomputing it only when the
/// object decides an update is needed.
pub fn cached_invariant<T, H>(
    obj: &mut MarshalObject<T, H>,
    input: &[T],
    version: Option<u64>,
) -> Result<H::Out, MarshalError>
where
    T: Element,
    H: MarshalHooks<T>,
    H::Out: Copy,
{
    obj.acquire(input, version).copied()
}
