//! Binary skim cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "TSKM"
//! version    u16      currently 1
//! reserved   u16      0
//! period     u32 length + UTF-8 bytes
//! zones      u32 count, then per zone u32 length + UTF-8 bytes
//! cells      count^2 records, row-major:
//!            access_s f64, egress_s f64, ivt_s f64, transfers f64, reachable u8
//! ```

use std::fs;
use std::path::Path;

use super::{Result, SkimCell, SkimError, SkimMatrix};

pub const CACHE_MAGIC: [u8; 4] = *b"TSKM";
pub const CACHE_VERSION: u16 = 1;

pub fn write_cache(matrix: &SkimMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + matrix.cells.len() * 33);
    buf.extend_from_slice(&CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    put_str(&mut buf, &matrix.period);
    buf.extend_from_slice(&(matrix.zone_ids.len() as u32).to_le_bytes());
    for z in &matrix.zone_ids {
        put_str(&mut buf, z);
    }
    for c in &matrix.cells {
        for v in [c.access_s, c.egress_s, c.ivt_s, c.transfers] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.push(c.reachable as u8);
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<SkimMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let err = |message: &str| SkimError::Cache { path: path.to_path_buf(), message: message.into() };
    let mut r = Reader { bytes: &bytes, at: 0 };
    if r.take(4).ok_or_else(|| err("truncated header"))? != CACHE_MAGIC {
        return Err(err("bad magic"));
    }
    let version = r.u16().ok_or_else(|| err("truncated header"))?;
    if version != CACHE_VERSION {
        return Err(err(&format!("unsupported version {version}")));
    }
    r.u16().ok_or_else(|| err("truncated header"))?;
    let period = r.string().ok_or_else(|| err("bad period label"))?;
    let n = r.u32().ok_or_else(|| err("truncated zone count"))? as usize;
    let mut zone_ids = Vec::with_capacity(n);
    for _ in 0..n {
        zone_ids.push(r.string().ok_or_else(|| err("bad zone id"))?);
    }
    let mut cells = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let mut v = [0.0; 4];
        for x in &mut v {
            *x = r.f64().ok_or_else(|| err("truncated cells"))?;
        }
        let reachable = match r.take(1).ok_or_else(|| err("truncated cells"))?[0] {
            0 => false,
            1 => true,
            _ => return Err(err("bad reachability flag")),
        };
        cells.push(SkimCell { access_s: v[0], egress_s: v[1], ivt_s: v[2], transfers: v[3], reachable });
    }
    if r.at != bytes.len() {
        return Err(err("trailing bytes"));
    }
    Ok(SkimMatrix { period, zone_ids, cells })
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.bytes.get(self.at..self.at.checked_add(n)?)?;
        self.at += n;
        Some(out)
    }

    fn u16(&mut self) -> Option<u16> {
        Some(u16::from_le_bytes(self.take(2)?.try_into().ok()?))
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn string(&mut self) -> Option<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).ok()
    }
}
