//! Minimal little-endian binary codec for checkpoints.

use ndarray::{Array1, Array2};

use crate::{Error, Result};

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        for x in v {
            self.f64(*x);
        }
    }

    pub fn u64s(&mut self, v: &[u64]) {
        self.usize(v.len());
        for x in v {
            self.u64(*x);
        }
    }

    pub fn matrix(&mut self, m: &Array2<f64>) {
        self.usize(m.nrows());
        self.usize(m.ncols());
        for x in m.iter() {
            self.f64(*x);
        }
    }

    pub fn vector(&mut self, v: &Array1<f64>) {
        self.f64s(v.as_slice().expect("contiguous"));
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    location: String,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8], location: impl Into<String>) -> Self {
        Self {
            bytes,
            pos: 0,
            location: location.into(),
        }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            location: format!("{} (byte {})", self.location, self.pos),
            message: message.into(),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error("unexpected end of file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error("trailing bytes after end of record"));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| self.error("length exceeds address space"))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(self.error(format!("invalid boolean byte {other}"))),
        }
    }

    fn len_prefix(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.usize()?;
        // Reject lengths that cannot fit in the remaining input before allocating.
        if n.saturating_mul(elem_size) > self.bytes.len() - self.pos {
            return Err(self.error("unexpected end of file"));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.u64()).collect()
    }

    pub fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| self.error("matrix dimensions overflow"))?;
        if n.saturating_mul(8) > self.bytes.len() - self.pos {
            return Err(self.error("unexpected end of file"));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
    }

    pub fn vector(&mut self) -> Result<Array1<f64>> {
        Ok(Array1::from(self.f64s()?))
    }
}
