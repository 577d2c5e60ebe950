use lilac_marshal::PageBuf;

use super::{Trap, Val};

/// Index of a buffer in [`Memory`].
pub type BufId = usize;

#[derive(Debug, Clone)]
pub enum Data {
    Int(PageBuf<i64>),
    Float(PageBuf<f64>),
}

#[derive(Debug, Clone)]
pub struct Buffer {
    pub name: String,
    pub data: Data,
    version: u64,
}

/// Flat collection of typed buffers. Pointers are (buffer, offset) pairs, so
/// an out-of-range access is always detected. Every store advances the
/// buffer's write version, which exact-version marshaling relies on.
#[derive(Debug, Clone, Default)]
pub struct Memory {
    bufs: Vec<Buffer>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, data: Data) -> BufId {
        self.bufs.push(Buffer {
            name: name.to_string(),
            data,
            version: 0,
        });
        self.bufs.len() - 1
    }

    pub fn alloc_int(&mut self, name: &str, data: &[i64]) -> BufId {
        self.push(name, Data::Int(PageBuf::from_slice(data)))
    }

    pub fn alloc_float(&mut self, name: &str, data: &[f64]) -> BufId {
        self.push(name, Data::Float(PageBuf::from_slice(data)))
    }

    pub fn buffer(&self, id: BufId) -> &Buffer {
        &self.bufs[id]
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.is_empty()
    }

    pub fn version(&self, id: BufId) -> u64 {
        self.bufs[id].version
    }

    pub fn ints(&self, id: BufId) -> Option<&[i64]> {
        match &self.bufs[id].data {
            Data::Int(b) => Some(b),
            Data::Float(_) => None,
        }
    }

    pub fn floats(&self, id: BufId) -> Option<&[f64]> {
        match &self.bufs[id].data {
            Data::Float(b) => Some(b),
            Data::Int(_) => None,
        }
    }

    /// Mutable access to a float buffer; counts as one write.
    pub fn floats_mut(&mut self, id: BufId) -> Option<&mut [f64]> {
        let b = &mut self.bufs[id];
        b.version += 1;
        match &mut b.data {
            Data::Float(d) => Some(d),
            Data::Int(_) => None,
        }
    }

    /// Mutable access to an integer buffer; counts as one write.
    pub fn ints_mut(&mut self, id: BufId) -> Option<&mut [i64]> {
        let b = &mut self.bufs[id];
        b.version += 1;
        match &mut b.data {
            Data::Int(d) => Some(d),
            Data::Float(_) => None,
        }
    }

    fn index(&self, id: BufId, index: i64) -> Result<usize, Trap> {
        let b = &self.bufs[id];
        let len = match &b.data {
            Data::Int(d) => d.len(),
            Data::Float(d) => d.len(),
        };
        if index >= 0 && (index as u64) < len as u64 {
            Ok(index as usize)
        } else {
            Err(Trap::OutOfBounds {
                buffer: b.name.clone(),
                index,
                len,
            })
        }
    }

    pub fn load(&self, id: BufId, index: i64) -> Result<Val, Trap> {
        let i = self.index(id, index)?;
        Ok(match &self.bufs[id].data {
            Data::Int(d) => Val::I64(d[i]),
            Data::Float(d) => Val::F64(d[i]),
        })
    }

    pub fn store(&mut self, id: BufId, index: i64, v: Val) -> Result<(), Trap> {
        let i = self.index(id, index)?;
        let b = &mut self.bufs[id];
        match (&mut b.data, v) {
            (Data::Int(d), Val::I64(x)) => d[i] = x,
            (Data::Float(d), Val::F64(x)) => d[i] = x,
            (_, v) => {
                return Err(Trap::TypeTrap(format!(
                    "cannot store {v} into buffer `{}`",
                    b.name
                )))
            }
        }
        b.version += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stores_bump_the_version() {
        let mut m = Memory::new();
        let b = m.alloc_float("x", &[1.0, 2.0]);
        assert_eq!(m.version(b), 0);
        m.store(b, 1, Val::F64(5.0)).unwrap();
        assert_eq!(m.version(b), 1);
        assert_eq!(m.floats(b).unwrap(), [1.0, 5.0]);
    }

    #[test]
    fn out_of_bounds_and_type_traps() {
        let mut m = Memory::new();
        let b = m.alloc_int("r", &[1]);
        assert!(matches!(
            m.load(b, 1),
            Err(Trap::OutOfBounds {
                index: 1,
                len: 1,
                ..
            })
        ));
        assert!(matches!(m.load(b, -1), Err(Trap::OutOfBounds { .. })));
        assert!(matches!(
            m.store(b, 0, Val::F64(1.0)),
            Err(Trap::TypeTrap(_))
        ));
        assert_eq!(m.version(b), 0);
    }
}
