use std::fmt;

use crate::error::{HookError, HookKind, MarshalError};
use crate::region::{Element, RegionKey, RegionView, Strategy, TrackedRegion};

/// User-supplied behaviour of an input marshal object.
///
/// `size` is the element count of the bound array.
pub trait MarshalHooks<T> {
    type Out;

    fn construct(&mut self, size: usize) -> Result<Self::Out, HookError>;
    fn update(&mut self, input: &[T], out: &mut Self::Out) -> Result<(), HookError>;
    fn destruct(&mut self, size: usize, out: Self::Out) -> Result<(), HookError>;
}

/// Hook invocation counts for one object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MarshalCounters {
    pub n_construct: u64,
    pub n_update: u64,
    pub n_destruct: u64,
}

impl MarshalCounters {
    /// `n_destruct <= n_construct <= n_update`.
    pub fn is_consistent(&self) -> bool {
        self.n_destruct <= self.n_construct && self.n_construct <= self.n_update
    }
}

impl fmt::Display for MarshalCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "construct={} update={} destruct={}",
            self.n_construct, self.n_update, self.n_destruct
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectState {
    Empty,
    Constructed,
}

struct Live<O> {
    region: TrackedRegion,
    size: usize,
    out: O,
    // Set when an update failed; forces a retry on the next acquire.
    stale: bool,
}

/// Library-side value kept in sync with a host array.
pub struct MarshalObject<T: Element, H: MarshalHooks<T>> {
    label: String,
    strategy: Strategy,
    hooks: H,
    live: Option<Live<H::Out>>,
    counters: MarshalCounters,
    history: Vec<HookKind>,
}

impl<T: Element, H: MarshalHooks<T>> MarshalObject<T, H> {
    pub fn new(label: impl Into<String>, strategy: Strategy, hooks: H) -> Self {
        MarshalObject {
            label: label.into(),
            strategy,
            hooks,
            live: None,
            counters: MarshalCounters::default(),
            history: Vec::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn state(&self) -> ObjectState {
        if self.live.is_some() {
            ObjectState::Constructed
        } else {
            ObjectState::Empty
        }
    }

    pub fn counters(&self) -> MarshalCounters {
        self.counters
    }

    /// Every hook run so far, in order.
    pub fn history(&self) -> &[HookKind] {
        &self.history
    }

    pub fn hooks(&self) -> &H {
        &self.hooks
    }

    /// Cached value, if constructed.
    pub fn out(&self) -> Option<&H::Out> {
        self.live.as_ref().map(|l| &l.out)
    }

    /// Brings the library-side value up to date with `input` and returns it.
    ///
    /// `version` is only consulted by [`Strategy::ExactVersion`]; it must
    /// advance whenever `input` is written.
    pub fn acquire(&mut self, input: &[T], version: Option<u64>) -> Result<&H::Out, MarshalError> {
        let view = RegionView::of(input).with_version(version);
        let rebind = match &self.live {
            None => false,
            Some(live) => live.region.key() != view.key() || live.size != input.len(),
        };
        if rebind {
            self.destroy()?;
        }
        match self.live.as_mut() {
            None => self.build(input, view)?,
            Some(live) if live.stale || live.region.poll_dirty(view)? => {
                self.counters.n_update += 1;
                self.history.push(HookKind::Update);
                match self.hooks.update(input, &mut live.out) {
                    Ok(()) => {
                        live.stale = false;
                        live.region.mark_clean(view)?;
                    }
                    Err(source) => {
                        live.stale = true;
                        return Err(self.failure(HookKind::Update, source));
                    }
                }
            }
            Some(_) => {}
        }
        Ok(&self.live.as_ref().expect("constructed").out)
    }

    fn build(&mut self, input: &[T], view: RegionView<'_>) -> Result<(), MarshalError> {
        self.counters.n_construct += 1;
        self.history.push(HookKind::Construct);
        let mut out = self
            .hooks
            .construct(input.len())
            .map_err(|e| self.failure(HookKind::Construct, e))?;
        let region = TrackedRegion::new(self.label.clone(), self.strategy, view)?;
        self.counters.n_update += 1;
        self.history.push(HookKind::Update);
        let updated = self.hooks.update(input, &mut out);
        let mut live = Live {
            region,
            size: input.len(),
            out,
            stale: updated.is_err(),
        };
        if let Err(source) = updated {
            self.live = Some(live);
            return Err(self.failure(HookKind::Update, source));
        }
        live.region.mark_clean(view)?;
        self.live = Some(live);
        Ok(())
    }

    fn destroy(&mut self) -> Result<(), MarshalError> {
        if let Some(live) = self.live.take() {
            self.counters.n_destruct += 1;
            self.history.push(HookKind::Destruct);
            drop(live.region);
            self.hooks
                .destruct(live.size, live.out)
                .map_err(|e| self.failure(HookKind::Destruct, e))?;
        }
        Ok(())
    }

    /// Runs `destruct` if constructed. Returns whether a destruct happened;
    /// the object is `Empty` afterwards even if the hook failed.
    pub fn release(&mut self) -> Result<bool, MarshalError> {
        let was_live = self.live.is_some();
        self.destroy()?;
        Ok(was_live)
    }

    fn failure(&self, which: HookKind, source: HookError) -> MarshalError {
        MarshalError::HookFailure {
            region: self.label.clone(),
            which,
            source,
        }
    }

    pub fn region_key(&self) -> Option<RegionKey> {
        self.live.as_ref().map(|l| l.region.key())
    }
}

impl<T: Element, H: MarshalHooks<T>> fmt::Debug for MarshalObject<T, H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarshalObject")
            .field("label", &self.label)
            .field("strategy", &self.strategy)
            .field("state", &self.state())
            .field("counters", &self.counters)
            .finish()
    }
}

/// Hooks for output arrays: the library writes into `out`, and `update`
/// copies results back to the host after the harness body ran.
pub trait WriteBackHooks<T> {
    type Out;

    fn construct(&mut self, size: usize) -> Result<Self::Out, HookError>;
    fn update(&mut self, out: &Self::Out, host: &mut [T]) -> Result<(), HookError>;
    fn destruct(&mut self, size: usize, out: Self::Out) -> Result<(), HookError>;
}

/// Output counterpart of [`MarshalObject`]. Output data is produced by the
/// library on every invocation, so there is no change tracking: `update`
/// runs once per [`WriteBackObject::write_back`].
pub struct WriteBackObject<T, H: WriteBackHooks<T>> {
    label: String,
    hooks: H,
    live: Option<(RegionKey, usize, H::Out)>,
    counters: MarshalCounters,
    history: Vec<HookKind>,
}

impl<T: Element, H: WriteBackHooks<T>> WriteBackObject<T, H> {
    pub fn new(label: impl Into<String>, hooks: H) -> Self {
        WriteBackObject {
            label: label.into(),
            hooks,
            live: None,
            counters: MarshalCounters::default(),
            history: Vec::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn counters(&self) -> MarshalCounters {
        self.counters
    }

    pub fn history(&self) -> &[HookKind] {
        &self.history
    }

    pub fn state(&self) -> ObjectState {
        if self.live.is_some() {
            ObjectState::Constructed
        } else {
            ObjectState::Empty
        }
    }

    /// Ensures the library-side buffer exists for `host` and returns it for
    /// the harness body to fill.
    pub fn acquire(&mut self, host: &[T]) -> Result<&mut H::Out, MarshalError> {
        let key = RegionView::of(host).key();
        if matches!(&self.live, Some((k, n, _)) if *k != key || *n != host.len()) {
            self.release()?;
        }
        if self.live.is_none() {
            self.counters.n_construct += 1;
            self.history.push(HookKind::Construct);
            let out = self
                .hooks
                .construct(host.len())
                .map_err(|e| self.failure(HookKind::Construct, e))?;
            self.live = Some((key, host.len(), out));
        }
        Ok(&mut self.live.as_mut().expect("constructed").2)
    }

    /// Copies library results into `host`.
    pub fn write_back(&mut self, host: &mut [T]) -> Result<(), MarshalError> {
        let Some((_, _, out)) = &self.live else {
            return Err(self.failure(
                HookKind::Update,
                HookError::new("write-back before acquire"),
            ));
        };
        self.counters.n_update += 1;
        self.history.push(HookKind::Update);
        self.hooks
            .update(out, host)
            .map_err(|e| self.failure(HookKind::Update, e))
    }

    pub fn release(&mut self) -> Result<bool, MarshalError> {
        match self.live.take() {
            None => Ok(false),
            Some((_, size, out)) => {
                self.counters.n_destruct += 1;
                self.history.push(HookKind::Destruct);
                self.hooks
                    .destruct(size, out)
                    .map_err(|e| self.failure(HookKind::Destruct, e))?;
                Ok(true)
            }
        }
    }

    fn failure(&self, which: HookKind, source: HookError) -> MarshalError {
        MarshalError::HookFailure {
            region: self.label.clone(),
            which,
            source,
        }
    }
}
