//! Flat binary parameter container.
//!
//! ```text
//! "SAUG"            4 bytes magic
//! version           u32 LE
//! count             u32 LE
//! count × entry:
//!   name_len        u32 LE
//!   name            name_len bytes, UTF-8
//!   rank            u32 LE
//!   dims            rank × u64 LE
//!   data            product(dims) × f64 LE
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SAUG";
pub const VERSION: u32 = 1;

/// A named tensor as stored in a checkpoint.
pub type NamedTensor = (String, Tensor);

fn format_err(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, entries: &[NamedTensor]) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, tensor) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_array<R: Read, const N: usize>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| format_err(format!("truncated while reading {what}: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    read_array::<R, 4>(r, what).map(u32::from_le_bytes)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<NamedTensor>> {
    let magic: [u8; 4] = read_array(&mut r, "magic")?;
    if magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}, expected \"SAUG\"")));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r, "parameter count")?;
    let mut entries = Vec::with_capacity(count as usize);
    for i in 0..count {
        let name_len = read_u32(&mut r, "name length")? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|e| format_err(format!("entry {i}: truncated name: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| format_err(format!("entry {i}: name is not UTF-8")))?;
        let rank = read_u32(&mut r, "rank")? as usize;
        let dims = (0..rank)
            .map(|_| read_array::<R, 8>(&mut r, "dims").map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel: usize = dims.iter().product();
        let data = (0..numel)
            .map(|_| read_array::<R, 8>(&mut r, "data").map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let tensor = Tensor::new(dims, data).map_err(|e| format_err(format!("entry `{name}`: {e}")))?;
        entries.push((name, tensor));
    }
    Ok(entries)
}

pub fn encode(entries: &[NamedTensor]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, entries).expect("writing to a Vec cannot fail");
    buf
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    read_checkpoint(bytes)
}

pub fn save(path: &Path, entries: &[NamedTensor]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(std::io::BufWriter::new(file), entries).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<NamedTensor>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}
