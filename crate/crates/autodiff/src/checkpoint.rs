//! Flat parameter archive.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic    "HPCK"
//! version  u32
//! meta_len u32, then meta_len bytes of UTF-8 metadata (may be empty)
//! count    u32
//! count x { name_len u32, name bytes, ndim u32, ndim x dim u32, f32 payload }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::layers::ParamStore;

pub const MAGIC: &[u8; 4] = b"HPCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Archive {
    pub version: u32,
    pub metadata: String,
    pub entries: Vec<ArchiveEntry>,
}

impl Archive {
    pub fn from_store(store: &ParamStore, metadata: impl Into<String>) -> Self {
        let entries = store
            .params()
            .iter()
            .map(|p| ArchiveEntry {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                values: p.tensor.data().iter().map(|&v| v as f32).collect(),
            })
            .collect();
        Self { version: VERSION, metadata: metadata.into(), entries }
    }

    /// Overwrites every parameter of `store` from the archive. Names and
    /// shapes must match one-to-one.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.entries.len() != store.len() {
            return Err(TensorError::Checkpoint(format!(
                "archive has {} entries, network has {} parameters",
                self.entries.len(),
                store.len()
            )));
        }
        for entry in &self.entries {
            let idx = store.index_of(&entry.name).ok_or_else(|| {
                TensorError::Checkpoint(format!("unknown parameter {:?}", entry.name))
            })?;
            let p = &mut store.params_mut()[idx];
            if p.tensor.shape() != entry.shape.as_slice() {
                return Err(TensorError::Checkpoint(format!(
                    "{}: archive shape {:?}, network shape {:?}",
                    entry.name,
                    entry.shape,
                    p.tensor.shape()
                )));
            }
            p.tensor
                .data_mut()
                .iter_mut()
                .zip(&entry.values)
                .for_each(|(d, &v)| *d = f64::from(v));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        put_u32(&mut w, self.version)?;
        put_u32(&mut w, len_u32(self.metadata.len())?)?;
        w.write_all(self.metadata.as_bytes())?;
        put_u32(&mut w, len_u32(self.entries.len())?)?;
        for e in &self.entries {
            put_u32(&mut w, len_u32(e.name.len())?)?;
            w.write_all(e.name.as_bytes())?;
            put_u32(&mut w, len_u32(e.shape.len())?)?;
            for &d in &e.shape {
                put_u32(&mut w, len_u32(d)?)?;
            }
            for v in &e.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TensorError::Checkpoint("bad magic".into()));
        }
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(TensorError::Checkpoint(format!("unsupported version {version}")));
        }
        let metadata = get_string(&mut r)?;
        let count = get_u32(&mut r)? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name = get_string(&mut r)?;
            let ndim = get_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(get_u32(&mut r)? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut bytes = vec![0u8; numel * 4];
            r.read_exact(&mut bytes)?;
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.push(ArchiveEntry { name, shape, values });
        }
        Ok(Self { version, metadata, entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| TensorError::Checkpoint(format!("length {n} exceeds u32")))
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_string<R: Read>(r: &mut R) -> Result<String> {
    let n = get_u32(r)? as usize;
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| TensorError::Checkpoint("non UTF-8 string".into()))
}
