//! `LFW1` weight archive.
//!
//! ```text
//! "LFW1" | entry count : u32 LE
//! per entry: name length : u32 | UTF-8 name | rank : u32 | dims : u32 × rank | f32 LE payload
//! ```
//!
//! Parameter entries are named `<layer>.weight` / `<layer>.bias` with the
//! layer names of [`DKNet::conv_layers`]. Network configuration travels in
//! rank-1, zero-length entries named `meta.<key>=<value>`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dknet::{DKNet, DKNetConfig};
use crate::error::{Error, Result};
use crate::io::config::{net_config_from_pairs, net_config_pairs};
use crate::scalar::Scalar;

pub const LFW_MAGIC: [u8; 4] = *b"LFW1";
const META_PREFIX: &str = "meta.";

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightArchive {
    pub entries: Vec<ArchiveEntry>,
}

impl WeightArchive {
    pub fn push(&mut self, name: impl Into<String>, dims: &[usize], data: Vec<f32>) -> Result<()> {
        let dims: Vec<u32> = dims.iter().map(|&d| d as u32).collect();
        let n: usize = dims.iter().map(|&d| d as usize).product();
        if n != data.len() {
            return Err(Error::DimensionMismatch(format!("entry dims {dims:?} hold {n} values, got {}", data.len())));
        }
        self.entries.push(ArchiveEntry { name: name.into(), dims, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Copies entry `name` into `dst`, checking it has exactly `dims`.
    pub fn load_into<T: Scalar>(&self, name: &str, dims: &[usize], dst: &mut [T]) -> Result<()> {
        let e = self.get(name).ok_or_else(|| Error::Format(format!("missing archive entry {name:?}")))?;
        let want: Vec<u32> = dims.iter().map(|&d| d as u32).collect();
        if e.dims != want || dst.len() != e.data.len() {
            return Err(Error::DimensionMismatch(format!("entry {name:?} has dims {:?}, expected {want:?}", e.dims)));
        }
        for (d, s) in dst.iter_mut().zip(&e.data) {
            *d = T::of(*s as f64);
        }
        Ok(())
    }

    /// `key=value` pairs stored in metadata entries.
    pub fn metadata(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .filter_map(|e| e.name.strip_prefix(META_PREFIX))
            .filter_map(|kv| kv.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    pub fn push_metadata(&mut self, key: &str, value: &str) {
        self.entries.push(ArchiveEntry { name: format!("{META_PREFIX}{key}={value}"), dims: vec![0], data: Vec::new() });
    }

    pub fn parameter_entries(&self) -> impl Iterator<Item = &ArchiveEntry> {
        self.entries.iter().filter(|e| !e.name.starts_with(META_PREFIX))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&LFW_MAGIC);
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
            buf.extend_from_slice(e.name.as_bytes());
            buf.extend_from_slice(&(e.dims.len() as u32).to_le_bytes());
            for d in &e.dims {
                buf.extend_from_slice(&d.to_le_bytes());
            }
            for v in &e.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let magic = cur.take(4).map_err(|_| Error::Format("file too short for magic".into()))?;
        let magic: [u8; 4] = magic.try_into().expect("4 bytes");
        if magic != LFW_MAGIC {
            return Err(Error::BadMagic { expected: LFW_MAGIC, found: magic });
        }
        let count = cur.u32()?;
        let mut entries = Vec::with_capacity(count.min(1 << 16) as usize);
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(len)?.to_vec())
                .map_err(|_| Error::Format("entry name is not UTF-8".into()))?;
            let rank = cur.u32()? as usize;
            let dims = (0..rank).map(|_| cur.u32()).collect::<Result<Vec<u32>>>()?;
            let n: u64 = dims.iter().map(|&d| d as u64).product();
            let payload = cur.take_payload(n * 4)?;
            let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
            entries.push(ArchiveEntry { name, dims, data });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after last entry".into()));
        }
        Ok(WeightArchive { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("unexpected end of archive at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn take_payload(&mut self, n: u64) -> Result<&'a [u8]> {
        let avail = (self.bytes.len() - self.pos) as u64;
        if avail < n {
            return Err(Error::TruncatedPayload { expected: n, found: avail });
        }
        self.take(n as usize)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

impl<T: Scalar> DKNet<T> {
    /// Serializes configuration and every parameter (as f32).
    pub fn to_archive(&self) -> WeightArchive {
        let mut a = WeightArchive::default();
        for (k, v) in net_config_pairs(&self.config) {
            a.push_metadata(&k, &v);
        }
        for (name, conv) in self.conv_layers() {
            let w: Vec<f32> = conv.weight.iter().map(|v| v.as_f64() as f32).collect();
            let b: Vec<f32> = conv.bias.iter().map(|v| v.as_f64() as f32).collect();
            a.push(format!("{name}.weight"), &[conv.out_ch, conv.in_ch, conv.kh, conv.kw], w)
                .expect("layer dims are consistent");
            a.push(format!("{name}.bias"), &[conv.out_ch], b).expect("layer dims are consistent");
        }
        a
    }

    /// Rebuilds a network from an archive written by [`to_archive`](Self::to_archive).
    pub fn from_archive(a: &WeightArchive) -> Result<Self> {
        let config: DKNetConfig = net_config_from_pairs(&a.metadata())?;
        let mut net = DKNet::build(config, 0)?;
        let names: Vec<String> = net.conv_layers().into_iter().map(|(n, _)| n).collect();
        let expected_entries = 2 * names.len();
        let present = a.parameter_entries().count();
        if present != expected_entries {
            return Err(Error::Format(format!("archive has {present} parameter entries, network needs {expected_entries}")));
        }
        for (name, conv) in names.iter().zip(net.conv_layers_mut()) {
            let wd = [conv.out_ch, conv.in_ch, conv.kh, conv.kw];
            a.load_into(&format!("{name}.weight"), &wd, &mut conv.weight)?;
            a.load_into(&format!("{name}.bias"), &[conv.out_ch], &mut conv.bias)?;
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_archive(&WeightArchive::load(path)?)
    }
}
