//! TIMD dataset file.
//!
//! Layout (little-endian): magic `TIMD`, `u16` version (1), `u32` record
//! count, `u32` H, `u32` W, then per record: `u16` segment count `S`,
//! `S + 1` points as `(f64 x, f64 y)`, `S` feeds as `f64`, `H*W` dispensed
//! amounts as `f32`, `H*W` compressed amounts as `f32`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, DatasetError, Record};
use crate::grid::{GridSpec, TimGrid};
use crate::pattern::DispensePattern;

pub const TIMD_MAGIC: [u8; 4] = *b"TIMD";
pub const TIMD_VERSION: u16 = 1;

pub fn write_dataset<W: Write>(out: W, dataset: &Dataset) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(out);
    let spec = dataset.spec;
    out.write_all(&TIMD_MAGIC)?;
    out.write_all(&TIMD_VERSION.to_le_bytes())?;
    out.write_all(&(dataset.records.len() as u32).to_le_bytes())?;
    out.write_all(&(spec.height as u32).to_le_bytes())?;
    out.write_all(&(spec.width as u32).to_le_bytes())?;
    for (i, r) in dataset.records.iter().enumerate() {
        let segments = u16::try_from(r.pattern.segment_count())
            .map_err(|_| DatasetError::Format(format!("record {i} has too many segments")))?;
        for g in [&r.dispensed, &r.compressed] {
            if g.spec() != spec {
                return Err(DatasetError::Format(format!(
                    "record {i} grid is {} but the dataset is {spec}",
                    g.spec()
                )));
            }
        }
        out.write_all(&segments.to_le_bytes())?;
        for p in r.pattern.points() {
            out.write_all(&p[0].to_le_bytes())?;
            out.write_all(&p[1].to_le_bytes())?;
        }
        for f in r.pattern.feeds() {
            out.write_all(&f.to_le_bytes())?;
        }
        for g in [&r.dispensed, &r.compressed] {
            for &a in g.amounts() {
                out.write_all(&(a as f32).to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Byte cursor that turns running out of input into a format error.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        if self.buf.len() - self.pos < n {
            return Err(DatasetError::Format(format!(
                "file is truncated at byte {} (needed {n} more bytes)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DatasetError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16, DatasetError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, DatasetError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn grid(&mut self, spec: GridSpec) -> Result<TimGrid, DatasetError> {
        let raw = self.take(spec.cells() * 4)?;
        let amounts = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        TimGrid::from_vec(spec, amounts).map_err(|e| DatasetError::Format(e.to_string()))
    }
}

pub fn read_dataset<R: Read>(mut input: R) -> Result<Dataset, DatasetError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    let magic: [u8; 4] = cur.array()?;
    if magic != TIMD_MAGIC {
        return Err(DatasetError::Format(format!(
            "bad magic {:?}, expected \"TIMD\"",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = cur.u16()?;
    if version != TIMD_VERSION {
        return Err(DatasetError::Format(format!(
            "unsupported version {version}, expected {TIMD_VERSION}"
        )));
    }
    let count = cur.u32()? as usize;
    let (h, w) = (cur.u32()? as usize, cur.u32()? as usize);
    let spec = GridSpec::new(h, w).map_err(|e| DatasetError::Format(e.to_string()))?;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let segments = cur.u16()? as usize;
        let mut points = Vec::with_capacity(segments + 1);
        for _ in 0..=segments {
            points.push([cur.f64()?, cur.f64()?]);
        }
        let mut feeds = Vec::with_capacity(segments);
        for _ in 0..segments {
            feeds.push(cur.f64()?);
        }
        let pattern = DispensePattern::new(points, feeds)
            .map_err(|e| DatasetError::Format(format!("record {i}: {e}")))?;
        let dispensed = cur.grid(spec)?;
        let compressed = cur.grid(spec)?;
        records.push(Record {
            pattern,
            dispensed,
            compressed,
        });
    }
    if cur.pos != buf.len() {
        return Err(DatasetError::Format(format!(
            "{} trailing bytes after the last record",
            buf.len() - cur.pos
        )));
    }
    Ok(Dataset { spec, records })
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<(), DatasetError> {
    write_dataset(File::create(path)?, dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    read_dataset(File::open(path)?)
}
