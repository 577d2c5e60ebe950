use std::any::Any;
use std::marker::PhantomData;

use crate::error::MarshalError;
use crate::object::{
    MarshalCounters, MarshalHooks, MarshalObject, WriteBackHooks, WriteBackObject,
};
use crate::region::Element;

trait Releasable: Any {
    fn label(&self) -> &str;
    fn counters(&self) -> MarshalCounters;
    fn release(&mut self) -> Result<bool, MarshalError>;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl<T: Element, H: MarshalHooks<T> + 'static> Releasable for MarshalObject<T, H> {
    fn label(&self) -> &str {
        MarshalObject::label(self)
    }
    fn counters(&self) -> MarshalCounters {
        MarshalObject::counters(self)
    }
    fn release(&mut self) -> Result<bool, MarshalError> {
        MarshalObject::release(self)
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

impl<T: Element, H: WriteBackHooks<T> + 'static> Releasable for WriteBackObject<T, H> {
    fn label(&self) -> &str {
        WriteBackObject::label(self)
    }
    fn counters(&self) -> MarshalCounters {
        WriteBackObject::counters(self)
    }
    fn release(&mut self) -> Result<bool, MarshalError> {
        WriteBackObject::release(self)
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Typed handle into a [`MarshalRegistry`].
pub struct ObjectId<O> {
    index: usize,
    generation: u64,
    _marker: PhantomData<fn() -> O>,
}

impl<O> Clone for ObjectId<O> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<O> Copy for ObjectId<O> {}

/// Per-object counters, as exported by `--stats`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionStats {
    pub region: String,
    pub counters: MarshalCounters,
}

#[derive(Debug, Default)]
pub struct ReleaseReport {
    /// Objects whose destruct hook ran.
    pub released: usize,
    /// Final counters of every object that was registered.
    pub stats: Vec<RegionStats>,
    pub failures: Vec<MarshalError>,
}

/// Owner of all marshal objects of a harness library; releases them in
/// registration order at teardown.
#[derive(Default)]
pub struct MarshalRegistry {
    objects: Vec<Box<dyn Releasable>>,
    // Bumped by release_all so stale handles cannot reach new objects.
    generation: u64,
}

impl MarshalRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn register<T, H>(&mut self, obj: MarshalObject<T, H>) -> ObjectId<MarshalObject<T, H>>
    where
        T: Element,
        H: MarshalHooks<T> + 'static,
    {
        self.push(Box::new(obj))
    }

    pub fn register_write_back<T, H>(
        &mut self,
        obj: WriteBackObject<T, H>,
    ) -> ObjectId<WriteBackObject<T, H>>
    where
        T: Element,
        H: WriteBackHooks<T> + 'static,
    {
        self.push(Box::new(obj))
    }

    fn push<O>(&mut self, obj: Box<dyn Releasable>) -> ObjectId<O> {
        self.objects.push(obj);
        ObjectId {
            index: self.objects.len() - 1,
            generation: self.generation,
            _marker: PhantomData,
        }
    }

    pub fn get_mut<O: 'static>(&mut self, id: ObjectId<O>) -> Option<&mut O> {
        if id.generation != self.generation {
            return None;
        }
        self.objects
            .get_mut(id.index)?
            .as_any_mut()
            .downcast_mut::<O>()
    }

    pub fn stats(&self) -> Vec<RegionStats> {
        self.objects
            .iter()
            .map(|o| RegionStats {
                region: o.label().to_string(),
                counters: o.counters(),
            })
            .collect()
    }

    /// Destructs every constructed object and empties the registry. Hook
    /// failures are collected; the remaining objects are still released.
    pub fn release_all(&mut self) -> ReleaseReport {
        let mut report = ReleaseReport::default();
        for mut obj in self.objects.drain(..) {
            match obj.release() {
                Ok(true) => report.released += 1,
                Ok(false) => {}
                Err(e) => {
                    report.released += 1;
                    report.failures.push(e);
                }
            }
            report.stats.push(RegionStats {
                region: obj.label().to_string(),
                counters: obj.counters(),
            });
        }
        self.generation += 1;
        report
    }
}

impl Drop for MarshalRegistry {
    fn drop(&mut self) {
        if !self.objects.is_empty() {
            self.release_all();
        }
    }
}
