//! Numeric JSON encoding shared by channel and statics documents.
//!
//! Reals are written as decimal literals with 17 significant digits
//! (`{:.16e}`), which pins every `f64` exactly; reading them back goes
//! through the standard library's correctly-rounded parser so a re-export
//! is byte-identical. Complex matrices are row-major with interleaved
//! `re, im` pairs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};

/// Version stamped into every emitted document.
pub const SCHEMA_VERSION: u32 = 1;

/// An `f64` that serializes with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exact(pub f64);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite value cannot be encoded"));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw: Box<RawValue> = Deserialize::deserialize(deserializer)?;
        let value: f64 = raw
            .get()
            .trim()
            .parse()
            .map_err(|e| D::Error::custom(format!("bad number {}: {e}", raw.get())))?;
        if !value.is_finite() {
            return Err(D::Error::custom("non-finite number"));
        }
        Ok(Exact(value))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodedMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, interleaved `re, im`.
    pub data: Vec<Exact>,
}

impl From<&ComplexMatrix> for EncodedMatrix {
    fn from(m: &ComplexMatrix) -> Self {
        let data = m
            .row_major()
            .into_iter()
            .flat_map(|z| [Exact(z.re), Exact(z.im)])
            .collect();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data,
        }
    }
}

impl EncodedMatrix {
    pub fn decode(&self) -> Result<ComplexMatrix> {
        if self.data.len() != 2 * self.rows * self.cols {
            return Err(Error::Codec(format!(
                "{} reals for a {}x{} complex matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        let entries = self.data.chunks_exact(2).map(|p| C64::new(p[0].0, p[1].0)).collect();
        ComplexMatrix::from_row_major(self.rows, self.cols, entries)
    }
}

pub(crate) fn codec_err(e: serde_json::Error) -> Error {
    Error::Codec(e.to_string())
}
