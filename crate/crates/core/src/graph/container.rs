//! Shared binary layout of the `.fxq` (fixed-point) and float model files.
//!
//! ```text
//! magic[4] | u16 version | u16 layer_count | u32 body_len | body | u32 crc32(body)
//! body   = u32 window_len | f32 sample_rate | u8 n_classes { u8 len, utf8 }
//!          | [fmt input_fmt]            (fixed-point files only)
//!          | layer records | u32 payload_len | payload
//! record = u8 tag | u8 n { u32 dim } | u8 n { fmt } | u8 n { i8 shift }
//!          | u8 n { u8 flag } | u8 n { u32 byte_offset, u32 elements }
//! fmt    = u8 len | ascii "Qn.m@bits"
//! ```
//! All integers are little-endian.

use crate::error::{Error, Result};
use crate::qformat::QFormat;

use super::ModelMeta;

pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn i8(&mut self, v: i8) {
        self.buf.push(v as u8);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn short_str(&mut self, s: &str) -> Result<()> {
        let len = u8::try_from(s.len()).map_err(|_| Error::Malformed(format!("string too long: {s}")))?;
        self.u8(len);
        self.bytes(s.as_bytes());
        Ok(())
    }
    pub fn fmt(&mut self, f: QFormat) -> Result<()> {
        self.short_str(&f.to_string())
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated { needed: self.pos + n, available: self.buf.len() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn i8(&mut self) -> Result<i8> {
        Ok(self.u8()? as i8)
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn short_str(&mut self) -> Result<String> {
        let n = self.u8()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Malformed("string is not UTF-8".into()))
    }
    pub fn fmt(&mut self) -> Result<QFormat> {
        self.short_str()?.parse()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct LayerRecord {
    pub tag: u8,
    pub dims: Vec<u32>,
    pub formats: Vec<QFormat>,
    pub shifts: Vec<i8>,
    pub flags: Vec<u8>,
    /// `(byte offset into payload, element count)`.
    pub blobs: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Container {
    pub meta: ModelMeta,
    pub input_fmt: Option<QFormat>,
    pub records: Vec<LayerRecord>,
    pub payload: Vec<u8>,
}

fn count_u8(n: usize, what: &str) -> Result<u8> {
    u8::try_from(n).map_err(|_| Error::Malformed(format!("too many {what}")))
}

impl Container {
    pub fn encode(&self, magic: [u8; 4], version: u16) -> Result<Vec<u8>> {
        let mut body = ByteWriter::new();
        body.u32(self.meta.window_len as u32);
        body.f32(self.meta.sample_rate as f32);
        body.u8(count_u8(self.meta.class_names.len(), "classes")?);
        for c in &self.meta.class_names {
            body.short_str(c)?;
        }
        if let Some(f) = self.input_fmt {
            body.fmt(f)?;
        }
        for r in &self.records {
            body.u8(r.tag);
            body.u8(count_u8(r.dims.len(), "dims")?);
            r.dims.iter().for_each(|&d| body.u32(d));
            body.u8(count_u8(r.formats.len(), "formats")?);
            for &f in &r.formats {
                body.fmt(f)?;
            }
            body.u8(count_u8(r.shifts.len(), "shifts")?);
            r.shifts.iter().for_each(|&s| body.i8(s));
            body.u8(count_u8(r.flags.len(), "flags")?);
            r.flags.iter().for_each(|&f| body.u8(f));
            body.u8(count_u8(r.blobs.len(), "blobs")?);
            for &(off, n) in &r.blobs {
                body.u32(off);
                body.u32(n);
            }
        }
        body.u32(self.payload.len() as u32);
        body.bytes(&self.payload);

        let mut out = ByteWriter::new();
        out.bytes(&magic);
        out.u16(version);
        out.u16(u16::try_from(self.records.len()).map_err(|_| Error::Malformed("too many layers".into()))?);
        out.u32(body.buf.len() as u32);
        out.bytes(&body.buf);
        out.u32(crc32fast::hash(&body.buf));
        Ok(out.buf)
    }

    pub fn decode(bytes: &[u8], magic: [u8; 4], version: u16, has_input_fmt: bool) -> Result<Self> {
        let mut head = ByteReader::new(bytes);
        let found: [u8; 4] = head.take(4)?.try_into().unwrap();
        if found != magic {
            return Err(Error::BadMagic { expected: magic, found });
        }
        let v = head.u16()?;
        if v != version {
            return Err(Error::VersionMismatch { found: v, supported: version });
        }
        let layer_count = head.u16()? as usize;
        let body_len = head.u32()? as usize;
        let body = head.take(body_len)?;
        let stored = head.u32()?;
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let mut r = ByteReader::new(body);
        let window_len = r.u32()? as usize;
        let sample_rate = r.f32()? as f64;
        let n_classes = r.u8()?;
        let class_names = (0..n_classes).map(|_| r.short_str()).collect::<Result<_>>()?;
        let input_fmt = if has_input_fmt { Some(r.fmt()?) } else { None };
        let mut records = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            let tag = r.u8()?;
            let n = r.u8()?;
            let dims = (0..n).map(|_| r.u32()).collect::<Result<_>>()?;
            let n = r.u8()?;
            let formats = (0..n).map(|_| r.fmt()).collect::<Result<_>>()?;
            let n = r.u8()?;
            let shifts = (0..n).map(|_| r.i8()).collect::<Result<_>>()?;
            let n = r.u8()?;
            let flags = (0..n).map(|_| r.u8()).collect::<Result<_>>()?;
            let n = r.u8()?;
            let blobs = (0..n).map(|_| Ok((r.u32()?, r.u32()?))).collect::<Result<_>>()?;
            records.push(LayerRecord { tag, dims, formats, shifts, flags, blobs });
        }
        let payload_len = r.u32()? as usize;
        let payload = r.take(payload_len)?.to_vec();
        Ok(Self {
            meta: ModelMeta { window_len, sample_rate, class_names },
            input_fmt,
            records,
            payload,
        })
    }

    /// Raw bytes of one blob given its element width.
    pub fn blob_bytes(&self, (off, n): (u32, u32), width: usize) -> Result<&[u8]> {
        let start = off as usize;
        let end = start + n as usize * width;
        if end > self.payload.len() {
            return Err(Error::Truncated { needed: end, available: self.payload.len() });
        }
        Ok(&self.payload[start..end])
    }
}
