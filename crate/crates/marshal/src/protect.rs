//! Write tracking through page protection.
//!
//! A protected region is write-protected with `mprotect`. The first write to
//! any page covering the region raises `SIGSEGV`; the process-wide fault
//! handler marks every region covering that page dirty and restores write
//! permission on the page, after which the faulting store is retried and
//! succeeds. Dirtiness is therefore conservative: a write anywhere on a
//! covering page (even outside the region) marks the region dirty, but a write
//! into the region is never missed.
//!
//! The slot table is a fixed array of atomics so that the fault handler never
//! allocates or locks.

use std::alloc::{self, Layout};
use std::fmt;
use std::marker::PhantomData;
use std::ops::{Deref, DerefMut};
use std::ptr::NonNull;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use crate::error::MarshalError;
use crate::region::Element;

const MAX_SLOTS: usize = 1024;

struct Slot {
    active: AtomicBool,
    start: AtomicUsize,
    end: AtomicUsize,
    dirty: AtomicBool,
}

impl Slot {
    const fn new() -> Self {
        Slot {
            active: AtomicBool::new(false),
            start: AtomicUsize::new(0),
            end: AtomicUsize::new(0),
            dirty: AtomicBool::new(false),
        }
    }
}

static SLOTS: [Slot; MAX_SLOTS] = [const { Slot::new() }; MAX_SLOTS];
// One past the highest slot index ever claimed; bounds the handler's scan.
static HIGH_WATER: AtomicUsize = AtomicUsize::new(0);
static PAGE_SIZE: AtomicUsize = AtomicUsize::new(0);

/// Size of a virtual memory page on this host.
pub fn page_size() -> usize {
    let cached = PAGE_SIZE.load(Ordering::Relaxed);
    if cached != 0 {
        return cached;
    }
    let size = os::query_page_size();
    PAGE_SIZE.store(size, Ordering::Relaxed);
    size
}

fn covering_pages(start: usize, len: usize) -> (usize, usize) {
    let page = page_size();
    let lo = start & !(page - 1);
    let hi = (start + len).div_ceil(page) * page;
    (lo, hi)
}

/// Handle on a claimed protection slot. Dropping it unregisters the region
/// and makes its pages writable again.
pub(crate) struct ProtectedRange {
    slot: usize,
    start: usize,
    len: usize,
}

impl fmt::Debug for ProtectedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtectedRange")
            .field("slot", &self.slot)
            .field("start", &format_args!("{:#x}", self.start))
            .field("len", &self.len)
            .finish()
    }
}

impl ProtectedRange {
    /// Registers `[start, start + len)` for tracking. The range starts dirty
    /// and unprotected; call [`ProtectedRange::protect`] to arm it.
    pub(crate) fn register(start: usize, len: usize) -> Result<Self, MarshalError> {
        os::install_handler()?;
        let (lo, hi) = covering_pages(start, len);
        for (idx, slot) in SLOTS.iter().enumerate() {
            if slot
                .active
                .compare_exchange(false, true, Ordering::AcqRel, Ordering::Relaxed)
                .is_ok()
            {
                slot.start.store(lo, Ordering::Relaxed);
                slot.end.store(hi, Ordering::Relaxed);
                slot.dirty.store(true, Ordering::Release);
                HIGH_WATER.fetch_max(idx + 1, Ordering::AcqRel);
                return Ok(ProtectedRange {
                    slot: idx,
                    start,
                    len,
                });
            }
        }
        Err(MarshalError::ProtectionUnsupported(format!(
            "all {MAX_SLOTS} protection slots are in use"
        )))
    }

    pub(crate) fn is_dirty(&self) -> bool {
        SLOTS[self.slot].dirty.load(Ordering::Acquire)
    }

    /// Clears the dirty flag and write-protects the covering pages.
    pub(crate) fn protect(&self) -> Result<(), MarshalError> {
        if self.len == 0 {
            SLOTS[self.slot].dirty.store(false, Ordering::Release);
            return Ok(());
        }
        let (lo, hi) = covering_pages(self.start, self.len);
        SLOTS[self.slot].dirty.store(false, Ordering::Release);
        os::protect_read_only(lo, hi - lo)
    }
}

impl Drop for ProtectedRange {
    fn drop(&mut self) {
        let slot = &SLOTS[self.slot];
        let lo = slot.start.load(Ordering::Relaxed);
        let hi = slot.end.load(Ordering::Relaxed);
        slot.active.store(false, Ordering::Release);
        if self.len > 0 {
            release_pages(lo, hi);
        }
    }
}

/// Makes `[lo, hi)` writable again. Any other region sharing those pages
/// loses its write trap, so it is marked dirty.
fn release_pages(lo: usize, hi: usize) {
    let high = HIGH_WATER.load(Ordering::Acquire);
    let mut shared = false;
    for slot in &SLOTS[..high] {
        if !slot.active.load(Ordering::Acquire) {
            continue;
        }
        let s = slot.start.load(Ordering::Relaxed);
        let e = slot.end.load(Ordering::Relaxed);
        if s < hi && lo < e {
            slot.dirty.store(true, Ordering::Release);
            shared = true;
        }
    }
    if shared || os::is_supported() {
        let _ = os::protect_read_write(lo, hi - lo);
    }
}

/// Called from the fault handler: returns true if the faulting page belongs
/// to a tracked region (and has been made writable again).
fn handle_fault(addr: usize) -> bool {
    let page = PAGE_SIZE.load(Ordering::Relaxed);
    if page == 0 {
        return false;
    }
    let page_lo = addr & !(page - 1);
    let high = HIGH_WATER.load(Ordering::Acquire);
    let mut hit = false;
    for slot in &SLOTS[..high] {
        if !slot.active.load(Ordering::Acquire) {
            continue;
        }
        let s = slot.start.load(Ordering::Relaxed);
        let e = slot.end.load(Ordering::Relaxed);
        if s <= page_lo && page_lo < e {
            slot.dirty.store(true, Ordering::Release);
            hit = true;
        }
    }
    if hit {
        os::protect_read_write(page_lo, page).is_ok()
    } else {
        false
    }
}

/// Zero-initialized, page-aligned buffer whose allocation covers whole pages.
///
/// Tracking a `PageBuf` with page protection never write-protects memory that
/// belongs to another allocation.
pub struct PageBuf<T: Element> {
    ptr: NonNull<T>,
    len: usize,
    layout: Layout,
    _marker: PhantomData<T>,
}

// SAFETY: PageBuf owns its allocation exclusively, like Vec<T>.
unsafe impl<T: Element + Send> Send for PageBuf<T> {}
unsafe impl<T: Element + Sync> Sync for PageBuf<T> {}

impl<T: Element> PageBuf<T> {
    pub fn zeroed(len: usize) -> Self {
        let page = page_size();
        let bytes = (len * std::mem::size_of::<T>()).max(1).div_ceil(page) * page;
        let layout = Layout::from_size_align(bytes, page).expect("page layout");
        // SAFETY: layout has non-zero size.
        let raw = unsafe { alloc::alloc_zeroed(layout) };
        let ptr = NonNull::new(raw as *mut T).unwrap_or_else(|| alloc::handle_alloc_error(layout));
        PageBuf {
            ptr,
            len,
            layout,
            _marker: PhantomData,
        }
    }

    pub fn from_slice(data: &[T]) -> Self {
        let mut buf = Self::zeroed(data.len());
        buf.copy_from_slice(data);
        buf
    }

    /// Bytes reserved for this buffer (a whole number of pages).
    pub fn capacity_bytes(&self) -> usize {
        self.layout.size()
    }
}

impl<T: Element> Deref for PageBuf<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        // SAFETY: ptr is valid for len initialized elements (zeroed is a valid T).
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr(), self.len) }
    }
}

impl<T: Element> DerefMut for PageBuf<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        // SAFETY: as above, and we hold the only reference.
        unsafe { std::slice::from_raw_parts_mut(self.ptr.as_ptr(), self.len) }
    }
}

impl<T: Element> Clone for PageBuf<T> {
    fn clone(&self) -> Self {
        PageBuf::from_slice(self)
    }
}

impl<T: Element + fmt::Debug> fmt::Debug for PageBuf<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl<T: Element> Drop for PageBuf<T> {
    fn drop(&mut self) {
        let lo = self.ptr.as_ptr() as usize;
        // A tracked region may still cover these pages; the allocator must be
        // able to write them once they are returned.
        if HIGH_WATER.load(Ordering::Acquire) > 0 {
            release_pages(lo, lo + self.layout.size());
        }
        // SAFETY: allocated in `zeroed` with this layout.
        unsafe { alloc::dealloc(self.ptr.as_ptr() as *mut u8, self.layout) };
    }
}

#[cfg(unix)]
mod os {
    use std::mem::MaybeUninit;
    use std::sync::Once;

    use super::handle_fault;
    use crate::error::MarshalError;

    static INSTALL: Once = Once::new();
    static mut PREV_SEGV: MaybeUninit<libc::sigaction> = MaybeUninit::uninit();
    static mut PREV_BUS: MaybeUninit<libc::sigaction> = MaybeUninit::uninit();
    static mut INSTALL_ERROR: Option<i32> = None;

    pub(super) fn is_supported() -> bool {
        true
    }

    pub(super) fn query_page_size() -> usize {
        // SAFETY: sysconf has no preconditions.
        let size = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
        if size <= 0 {
            4096
        } else {
            size as usize
        }
    }

    pub(super) fn install_handler() -> Result<(), MarshalError> {
        super::page_size();
        INSTALL.call_once(|| unsafe {
            let mut action: libc::sigaction = std::mem::zeroed();
            action.sa_sigaction = on_fault as *const () as usize;
            action.sa_flags = libc::SA_SIGINFO | libc::SA_ONSTACK;
            libc::sigemptyset(&mut action.sa_mask);
            let prev_segv = &raw mut PREV_SEGV;
            let prev_bus = &raw mut PREV_BUS;
            if libc::sigaction(libc::SIGSEGV, &action, (*prev_segv).as_mut_ptr()) != 0
                || libc::sigaction(libc::SIGBUS, &action, (*prev_bus).as_mut_ptr()) != 0
            {
                INSTALL_ERROR = Some(std::io::Error::last_os_error().raw_os_error().unwrap_or(-1));
            }
        });
        // SAFETY: written only inside call_once, which has completed.
        match unsafe { INSTALL_ERROR } {
            None => Ok(()),
            Some(code) => Err(MarshalError::ProtectionUnsupported(format!(
                "sigaction failed with errno {code}"
            ))),
        }
    }

    pub(super) fn protect_read_only(addr: usize, len: usize) -> Result<(), MarshalError> {
        mprotect(addr, len, libc::PROT_READ)
    }

    pub(super) fn protect_read_write(addr: usize, len: usize) -> Result<(), MarshalError> {
        mprotect(addr, len, libc::PROT_READ | libc::PROT_WRITE)
    }

    fn mprotect(addr: usize, len: usize, prot: libc::c_int) -> Result<(), MarshalError> {
        // SAFETY: callers pass page-aligned ranges inside live allocations.
        let rc = unsafe { libc::mprotect(addr as *mut libc::c_void, len, prot) };
        if rc == 0 {
            Ok(())
        } else {
            Err(MarshalError::ProtectionUnsupported(format!(
                "mprotect({addr:#x}, {len}) failed: {}",
                std::io::Error::last_os_error()
            )))
        }
    }

    extern "C" fn on_fault(sig: libc::c_int, info: *mut libc::siginfo_t, ctx: *mut libc::c_void) {
        // SAFETY: the kernel passes a valid siginfo for SA_SIGINFO handlers.
        let addr = unsafe { (*info).si_addr() } as usize;
        if handle_fault(addr) {
            return;
        }
        // Not ours: hand over to whatever was installed before.
        unsafe {
            let prev = if sig == libc::SIGBUS {
                &*(&raw const PREV_BUS).cast::<libc::sigaction>()
            } else {
                &*(&raw const PREV_SEGV).cast::<libc::sigaction>()
            };
            let handler = prev.sa_sigaction;
            if handler == libc::SIG_DFL || handler == libc::SIG_IGN {
                // Restore and return; the faulting instruction re-executes
                // and takes the default action.
                libc::sigaction(sig, prev, std::ptr::null_mut());
            } else if prev.sa_flags & libc::SA_SIGINFO != 0 {
                let f: extern "C" fn(libc::c_int, *mut libc::siginfo_t, *mut libc::c_void) =
                    std::mem::transmute(handler);
                f(sig, info, ctx);
            } else {
                let f: extern "C" fn(libc::c_int) = std::mem::transmute(handler);
                f(sig);
            }
        }
    }
}

#[cfg(not(unix))]
mod os {
    use crate::error::MarshalError;

    pub(super) fn is_supported() -> bool {
        false
    }

    pub(super) fn query_page_size() -> usize {
        4096
    }

    pub(super) fn install_handler() -> Result<(), MarshalError> {
        Err(MarshalError::ProtectionUnsupported(
            "no page protection support on this platform".into(),
        ))
    }

    pub(super) fn protect_read_only(_: usize, _: usize) -> Result<(), MarshalError> {
        install_handler()
    }

    pub(super) fn protect_read_write(_: usize, _: usize) -> Result<(), MarshalError> {
        install_handler()
    }
}
