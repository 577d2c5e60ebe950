use std::fmt;
use std::hash::Hasher;
use std::str::FromStr;

use fnv::FnvHasher;

use crate::error::MarshalError;
use crate::protect::ProtectedRange;

/// Environment variable selecting the default change-detection strategy.
pub const STRATEGY_ENV: &str = "LILAC_MARSHAL_STRATEGY";

/// How a [`TrackedRegion`] decides whether its memory changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Write-protect the covering pages and record the first write fault.
    PageProtect,
    /// FNV-1a 64 over the region bytes. Identical rewrites read as clean, and
    /// hash collisions can hide a change.
    Checksum,
    /// Compare a caller-maintained write version. Exact.
    ExactVersion,
    /// No tracking: every poll reports dirty.
    Naive,
}

impl Strategy {
    /// Strategy named by [`STRATEGY_ENV`], if set.
    pub fn from_env() -> Result<Option<Strategy>, MarshalError> {
        match std::env::var(STRATEGY_ENV) {
            Ok(s) if !s.trim().is_empty() => s.trim().parse().map(Some),
            _ => Ok(None),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::PageProtect => "pageprotect",
            Strategy::Checksum => "checksum",
            Strategy::ExactVersion => "exact",
            Strategy::Naive => "naive",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = MarshalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pageprotect" | "page-protect" | "mprotect" => Ok(Strategy::PageProtect),
            "checksum" => Ok(Strategy::Checksum),
            "exact" | "exactversion" | "exact-version" => Ok(Strategy::ExactVersion),
            "naive" => Ok(Strategy::Naive),
            _ => Err(MarshalError::UnknownStrategy(s.to_string())),
        }
    }
}

/// Plain-old-data element types that may back a tracked region.
///
/// # Safety
///
/// Implementors must have no padding and accept the all-zero bit pattern.
pub unsafe trait Element: Copy + 'static {}

unsafe impl Element for u8 {}
unsafe impl Element for i32 {}
unsafe impl Element for u32 {}
unsafe impl Element for i64 {}
unsafe impl Element for u64 {}
unsafe impl Element for f32 {}
unsafe impl Element for f64 {}

/// Identity of a bound array: the `in` pointer and the `size` argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionKey {
    pub addr: usize,
    pub len_bytes: usize,
}

/// Borrowed view of the memory behind a region at one point in time.
#[derive(Debug, Clone, Copy)]
pub struct RegionView<'a> {
    bytes: &'a [u8],
    version: Option<u64>,
}

impl<'a> RegionView<'a> {
    pub fn of<T: Element>(data: &'a [T]) -> Self {
        // SAFETY: Element types are padding-free plain data.
        let bytes = unsafe {
            std::slice::from_raw_parts(data.as_ptr() as *const u8, std::mem::size_of_val(data))
        };
        RegionView {
            bytes,
            version: None,
        }
    }

    pub fn with_version(mut self, version: Option<u64>) -> Self {
        self.version = version;
        self
    }

    pub fn key(&self) -> RegionKey {
        RegionKey {
            addr: self.bytes.as_ptr() as usize,
            len_bytes: self.bytes.len(),
        }
    }

    pub fn bytes(&self) -> &'a [u8] {
        self.bytes
    }

    pub fn version(&self) -> Option<u64> {
        self.version
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

#[derive(Debug)]
enum Detector {
    Naive,
    Checksum { clean: Option<u64> },
    Version { clean: Option<u64> },
    Protect { range: ProtectedRange },
}

/// A range of memory whose modifications are observed between invocations.
#[derive(Debug)]
pub struct TrackedRegion {
    label: String,
    strategy: Strategy,
    key: RegionKey,
    detector: Detector,
}

impl TrackedRegion {
    /// Starts tracking the memory behind `view`. A new region is dirty until
    /// the first [`TrackedRegion::mark_clean`].
    pub fn new(
        label: impl Into<String>,
        strategy: Strategy,
        view: RegionView<'_>,
    ) -> Result<Self, MarshalError> {
        let label = label.into();
        let key = view.key();
        let detector = match strategy {
            Strategy::Naive => Detector::Naive,
            Strategy::Checksum => Detector::Checksum { clean: None },
            Strategy::ExactVersion => {
                if view.version.is_none() {
                    return Err(MarshalError::VersionUnavailable(label));
                }
                Detector::Version { clean: None }
            }
            Strategy::PageProtect => Detector::Protect {
                range: ProtectedRange::register(key.addr, key.len_bytes)?,
            },
        };
        Ok(TrackedRegion {
            label,
            strategy,
            key,
            detector,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn key(&self) -> RegionKey {
        self.key
    }

    /// Records the current contents as the clean baseline.
    pub fn mark_clean(&mut self, view: RegionView<'_>) -> Result<(), MarshalError> {
        match &mut self.detector {
            Detector::Naive => Ok(()),
            Detector::Checksum { clean } => {
                *clean = Some(fnv1a(view.bytes));
                Ok(())
            }
            Detector::Version { clean } => {
                let v = view
                    .version
                    .ok_or_else(|| MarshalError::VersionUnavailable(self.label.clone()))?;
                *clean = Some(v);
                Ok(())
            }
            Detector::Protect { range } => range.protect(),
        }
    }

    /// Whether the region changed since the last [`TrackedRegion::mark_clean`].
    pub fn poll_dirty(&self, view: RegionView<'_>) -> Result<bool, MarshalError> {
        if self.key.len_bytes == 0 {
            return Ok(false);
        }
        match &self.detector {
            Detector::Naive => Ok(true),
            Detector::Checksum { clean } => Ok(*clean != Some(fnv1a(view.bytes))),
            Detector::Version { clean } => {
                let v = view
                    .version
                    .ok_or_else(|| MarshalError::VersionUnavailable(self.label.clone()))?;
                Ok(*clean != Some(v))
            }
            Detector::Protect { range } => Ok(range.is_dirty()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protect::PageBuf;

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            Strategy::PageProtect,
            Strategy::Checksum,
            Strategy::ExactVersion,
            Strategy::Naive,
        ] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }

    #[test]
    fn checksum_detects_flipped_byte() {
        let mut data = vec![1u8, 2, 3, 4];
        let mut r = TrackedRegion::new("r", Strategy::Checksum, RegionView::of(&data)).unwrap();
        r.mark_clean(RegionView::of(&data)).unwrap();
        assert!(!r.poll_dirty(RegionView::of(&data)).unwrap());
        data[2] ^= 0x10;
        assert!(r.poll_dirty(RegionView::of(&data)).unwrap());
    }

    #[test]
    fn identical_rewrite_is_clean_for_checksum_but_dirty_for_version() {
        let mut data = vec![5i64, 6, 7];
        let mut version = 0u64;
        fn view(d: &[i64], v: u64) -> RegionView<'_> {
            RegionView::of(d).with_version(Some(v))
        }

        let mut sum = TrackedRegion::new("c", Strategy::Checksum, view(&data, version)).unwrap();
        let mut exact =
            TrackedRegion::new("e", Strategy::ExactVersion, view(&data, version)).unwrap();
        sum.mark_clean(view(&data, version)).unwrap();
        exact.mark_clean(view(&data, version)).unwrap();

        data[1] = 6;
        version += 1;
        assert!(!sum.poll_dirty(view(&data, version)).unwrap());
        assert!(exact.poll_dirty(view(&data, version)).unwrap());
    }

    #[test]
    fn zero_length_region_is_always_clean() {
        let data: Vec<f64> = Vec::new();
        for s in [Strategy::Checksum, Strategy::Naive, Strategy::PageProtect] {
            let r = TrackedRegion::new("z", s, RegionView::of(&data)).unwrap();
            assert!(!r.poll_dirty(RegionView::of(&data)).unwrap(), "{s}");
        }
        let r = TrackedRegion::new(
            "z",
            Strategy::ExactVersion,
            RegionView::of(&data).with_version(Some(0)),
        )
        .unwrap();
        assert!(!r
            .poll_dirty(RegionView::of(&data).with_version(Some(9)))
            .unwrap());
    }

    #[test]
    fn exact_version_requires_a_version() {
        let data = [1.0f64];
        let err =
            TrackedRegion::new("v", Strategy::ExactVersion, RegionView::of(&data)).unwrap_err();
        assert!(matches!(err, MarshalError::VersionUnavailable(_)));
    }

    #[test]
    fn page_protect_write_one_element() {
        let mut buf = PageBuf::<f64>::zeroed(128);
        let mut r = TrackedRegion::new("p", Strategy::PageProtect, RegionView::of(&buf)).unwrap();
        r.mark_clean(RegionView::of(&buf)).unwrap();
        assert!(!r.poll_dirty(RegionView::of(&buf)).unwrap());
        buf[17] = 2.5;
        assert!(r.poll_dirty(RegionView::of(&buf)).unwrap());
    }

    #[test]
    fn page_protect_without_writes_stays_clean() {
        let buf = PageBuf::<i64>::zeroed(32);
        let mut r = TrackedRegion::new("p", Strategy::PageProtect, RegionView::of(&buf)).unwrap();
        r.mark_clean(RegionView::of(&buf)).unwrap();
        let total: i64 = buf.iter().sum();
        assert_eq!(total, 0);
        assert!(!r.poll_dirty(RegionView::of(&buf)).unwrap());
    }

    #[test]
    fn page_protect_is_conservative_for_same_page_neighbours() {
        let mut buf = PageBuf::<i64>::zeroed(64);
        let mut r =
            TrackedRegion::new("half", Strategy::PageProtect, RegionView::of(&buf[..32])).unwrap();
        r.mark_clean(RegionView::of(&buf[..32])).unwrap();
        buf[40] = 1;
        assert!(r.poll_dirty(RegionView::of(&buf[..32])).unwrap());
    }
}
