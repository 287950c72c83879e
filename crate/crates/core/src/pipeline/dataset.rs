//! `CVDS1` dataset files.
//!
//! Header: magic `CVDS1`, `u16` version, `u64` record count. Records follow
//! back to back with a fixed layout (see `docs/formats.md`). All integers and
//! floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{CvError, Result};
use crate::fock::GaussianCircuit;
use crate::homodyne::{CorrelationPattern, PATTERN_LEN};
use crate::stellar::CoreState;
use crate::witness::{LabelVector, WitnessValues};

pub const MAGIC: &[u8; 5] = b"CVDS1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 5 + 2 + 8;
pub const RECORD_LEN: usize = 8 + 4 + 6 * 16 + 17 + 2 * 16 + 2 * 16 + 17 + 2 * 8 + 3 * 8 + 3 + PATTERN_LEN * 4;

/// Patterns read back from `f32` storage must sum to one per channel to this.
pub const PATTERN_SUM_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub state_id: u64,
    pub core: CoreState,
    pub circuit: GaussianCircuit,
    pub witness: WitnessValues,
    pub labels: LabelVector,
    pub pattern: CorrelationPattern,
}

impl DatasetRecord {
    /// Builds a record, rounding the pattern to its stored `f32` precision so
    /// that in-memory and on-disk records agree.
    pub fn new(
        state_id: u64,
        core: CoreState,
        circuit: GaussianCircuit,
        witness: WitnessValues,
        pattern: &CorrelationPattern,
    ) -> Result<Self> {
        let rounded = pattern.values().iter().map(|&v| v as f32 as f64).collect();
        Ok(Self {
            state_id,
            core,
            circuit,
            witness,
            labels: witness.labels(),
            pattern: CorrelationPattern::from_normalized(rounded, PATTERN_SUM_TOL)?,
        })
    }

    pub fn example(&self) -> (CorrelationPattern, LabelVector) {
        (self.pattern.clone(), self.labels)
    }
}

fn put_c64(out: &mut Vec<u8>, z: C64) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

fn put_optional(out: &mut Vec<u8>, z: Option<C64>) {
    out.push(z.is_some() as u8);
    put_c64(out, z.unwrap_or_default());
}

pub fn encode_record(r: &DatasetRecord, out: &mut Vec<u8>) {
    let start = out.len();
    out.extend_from_slice(&r.state_id.to_le_bytes());
    out.extend_from_slice(&(r.core.rank() as u32).to_le_bytes());
    for &c in r.core.coeffs() {
        put_c64(out, c);
    }
    put_optional(out, r.circuit.bs_in);
    for &z in r.circuit.squeeze.iter().chain(&r.circuit.displace) {
        put_c64(out, z);
    }
    put_optional(out, r.circuit.bs_out);
    for eta in r.circuit.loss {
        out.extend_from_slice(&eta.to_le_bytes());
    }
    for w in [r.witness.ppt_min, r.witness.qfi1, r.witness.qfi2] {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend(r.labels.as_array().map(u8::from));
    for &v in r.pattern.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    debug_assert_eq!(out.len() - start, RECORD_LEN);
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let bytes = self
            .buf
            .get(self.pos..self.pos + N)
            .ok_or_else(|| CvError::Format("truncated record".into()))?;
        self.pos += N;
        Ok(bytes.try_into().expect("slice has length N"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn c64(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(CvError::Format(format!("flag byte {b} is not 0 or 1"))),
        }
    }

    fn optional(&mut self) -> Result<Option<C64>> {
        let present = self.flag()?;
        let z = self.c64()?;
        Ok(present.then_some(z))
    }
}

pub fn decode_record(buf: &[u8]) -> Result<DatasetRecord> {
    if buf.len() != RECORD_LEN {
        return Err(CvError::Format(format!(
            "record has {} bytes, expected {RECORD_LEN}",
            buf.len()
        )));
    }
    let mut c = Cursor { buf, pos: 0 };
    let state_id = c.u64()?;
    let rank = c.u32()? as usize;
    let mut coeffs = [C64::default(); 6];
    for slot in coeffs.iter_mut() {
        *slot = c.c64()?;
    }
    let core = CoreState::from_normalized(rank, coeffs, 1e-9)
        .map_err(|e| CvError::Format(format!("record {state_id}: core state: {e}")))?;
    let bs_in = c.optional()?;
    let squeeze = [c.c64()?, c.c64()?];
    let displace = [c.c64()?, c.c64()?];
    let bs_out = c.optional()?;
    let loss = [c.f64()?, c.f64()?];
    let circuit = GaussianCircuit {
        bs_in,
        squeeze,
        displace,
        bs_out,
        loss,
    };
    let witness = WitnessValues {
        ppt_min: c.f64()?,
        qfi1: c.f64()?,
        qfi2: c.f64()?,
    };
    let labels = LabelVector::new(c.flag()?, c.flag()?, c.flag()?);
    let mut values = Vec::with_capacity(PATTERN_LEN);
    for _ in 0..PATTERN_LEN {
        values.push(c.f32()? as f64);
    }
    let pattern = CorrelationPattern::from_normalized(values, PATTERN_SUM_TOL)
        .map_err(|e| CvError::Format(format!("record {state_id}: {e}")))?;
    if labels != witness.labels() {
        return Err(CvError::Format(format!(
            "record {state_id}: labels disagree with stored witness values"
        )));
    }
    Ok(DatasetRecord {
        state_id,
        core,
        circuit,
        witness,
        labels,
        pattern,
    })
}

pub fn encode_dataset(records: &[DatasetRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + records.len() * RECORD_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        encode_record(r, &mut out);
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<DatasetRecord>> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != MAGIC {
        return Err(CvError::Format("missing CVDS1 magic".into()));
    }
    let version = u16::from_le_bytes([bytes[5], bytes[6]]);
    if version != VERSION {
        return Err(CvError::Format(format!("unsupported dataset version {version}")));
    }
    let count = u64::from_le_bytes(bytes[7..15].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    let expected = (count as usize)
        .checked_mul(RECORD_LEN)
        .ok_or_else(|| CvError::Format("record count overflows".into()))?;
    if body.len() != expected {
        return Err(CvError::Format(format!(
            "header declares {count} records ({expected} bytes) but body has {} bytes",
            body.len()
        )));
    }
    body.chunks(RECORD_LEN).map(decode_record).collect()
}

pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(&encode_dataset(records))?;
    file.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}

/// Fractions of positive labels `(E_PPT, E_QFI1, E_QFI2)`.
pub fn class_balance(records: &[DatasetRecord]) -> [f64; 3] {
    let mut counts = [0usize; 3];
    for r in records {
        for (k, v) in r.labels.as_array().into_iter().enumerate() {
            counts[k] += v as usize;
        }
    }
    counts.map(|c| c as f64 / records.len().max(1) as f64)
}
