//! The database of vectors and its on-disk LPAN representation.
//!
//! LPAN layout, all little-endian:
//!
//! | bytes   | field                                           |
//! |---------|-------------------------------------------------|
//! | 4       | magic `"LPAN"`                                  |
//! | 2       | `u16` version = 1                               |
//! | 8       | `u64` n                                         |
//! | 8       | `u64` d                                         |
//! | 8       | `f64` p (∞ encoded as the quiet NaN `0x7FF8000000000000`) |
//! | 8·n·d   | `f64` coordinates, row-major                    |

use std::collections::HashMap;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{invalid, LpError, Result};
use crate::metric::{check_finite, dist_unchecked, norm_unchecked, PNorm};
use crate::scalar::Scalar;

pub const LPAN_MAGIC: &[u8; 4] = b"LPAN";
pub const LPAN_VERSION: u16 = 1;
pub(crate) const INF_SENTINEL_BITS: u64 = 0x7FF8_0000_0000_0000;

/// `n` distinct finite `d`-dimensional vectors with a norm exponent. Point ids
/// are the row indices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T> {
    data: Vec<T>,
    n: usize,
    d: usize,
    p: PNorm<T>,
}

impl<T: Scalar> PointSet<T> {
    /// Builds a point set from row-major data. Rejects empty input, non-finite
    /// coordinates, and duplicate rows (the error lists every duplicate pair).
    pub fn new(data: Vec<T>, d: usize, p: PNorm<T>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        if data.is_empty() {
            return Err(LpError::Empty);
        }
        if !data.len().is_multiple_of(d) {
            return Err(invalid(format!("{} values is not a multiple of d = {d}", data.len())));
        }
        if let PNorm::Finite(e) = p {
            PNorm::new(e)?;
        }
        check_finite(&data, "points")?;
        let n = data.len() / d;
        let set = PointSet { data, n, d, p };
        let pairs = set.duplicate_pairs();
        if !pairs.is_empty() {
            return Err(LpError::Duplicates { pairs });
        }
        Ok(set)
    }

    pub fn from_rows(rows: &[Vec<T>], p: PNorm<T>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(LpError::Empty)?;
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(LpError::DimensionMismatch { expected: d, got: bad.len() });
        }
        Self::new(rows.concat(), d, p)
    }

    fn duplicate_pairs(&self) -> Vec<(usize, usize)> {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(self.n);
        let mut pairs = Vec::new();
        for (i, row) in self.rows().enumerate() {
            // +0.0 and -0.0 are the same point.
            let key: Vec<u64> = row.iter().map(|x| (x.as_f64() + 0.0).to_bits()).collect();
            match seen.get(&key) {
                Some(&first) => pairs.push((first, i)),
                None => {
                    seen.insert(key, i);
                }
            }
        }
        pairs
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn norm(&self) -> PNorm<T> {
        self.p
    }

    pub fn point(&self, id: usize) -> &[T] {
        &self.data[id * self.d..(id + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Distance between two stored points.
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> T {
        dist_unchecked(self.point(a), self.point(b), self.p)
    }

    /// Distance from a stored point to an arbitrary vector of matching dimension.
    #[inline]
    pub fn dist_to(&self, id: usize, q: &[T]) -> T {
        dist_unchecked(self.point(id), q, self.p)
    }

    pub fn norm_of(&self, v: &[T]) -> T {
        norm_unchecked(v, self.p)
    }

    /// Validates a query vector against this set.
    pub fn check_query(&self, q: &[T]) -> Result<()> {
        if q.len() != self.d {
            return Err(LpError::DimensionMismatch { expected: self.d, got: q.len() });
        }
        check_finite(q, "query")
    }

    /// Same points with a different norm exponent.
    pub fn with_norm(&self, p: PNorm<T>) -> Result<Self> {
        if let PNorm::Finite(e) = p {
            PNorm::new(e)?;
        }
        Ok(PointSet { p, ..self.clone() })
    }

    /// Every coordinate multiplied by `factor > 0`. Distinctness is preserved,
    /// so no re-validation happens.
    pub(crate) fn scaled(&self, factor: T) -> Self {
        debug_assert!(factor > T::zero());
        PointSet { data: self.data.iter().map(|&x| x * factor).collect(), ..self.clone() }
    }

    /// The rows `ids`, in order, as a new set.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(ids.len() * self.d);
        for &id in ids {
            data.extend_from_slice(self.point(id));
        }
        Self::new(data, self.d, self.p)
    }

    /// Converts coordinates to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<PointSet<U>> {
        PointSet::new(self.data.iter().map(|x| U::lit(x.as_f64())).collect(), self.d, self.p.cast())
    }

    pub fn to_lpan(&self) -> LpanFile {
        LpanFile { n: self.n, d: self.d, p: self.p.cast(), data: self.data.iter().map(|x| x.as_f64()).collect() }
    }

    pub fn from_lpan(file: &LpanFile) -> Result<Self> {
        Self::new(file.data.iter().map(|&x| T::lit(x)).collect(), file.d, file.p.cast())
    }

    /// SHA-256 of the LPAN encoding, truncated to 64 bits. Index files record
    /// it so an index is never queried against the wrong database.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        self.to_lpan().write_to(&mut bytes).expect("write to Vec");
        let digest = Sha256::digest(&bytes);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

/// Raw LPAN contents; also used for query batches, which may repeat vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LpanFile {
    pub n: usize,
    pub d: usize,
    pub p: PNorm<f64>,
    pub data: Vec<f64>,
}

impl LpanFile {
    pub fn from_rows(rows: &[Vec<f64>], d: usize, p: PNorm<f64>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(LpError::DimensionMismatch { expected: d, got: bad.len() });
        }
        Ok(LpanFile { n: rows.len(), d, p, data: rows.concat() })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        if self.d == 0 {
            return Vec::new();
        }
        self.data.chunks_exact(self.d).map(<[f64]>::to_vec).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(LPAN_MAGIC)?;
        w.write_all(&LPAN_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        let p_bits = match self.p {
            PNorm::Finite(p) => p.to_bits(),
            PNorm::Infinity => INF_SENTINEL_BITS,
        };
        w.write_all(&p_bits.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |reason: &str| LpError::Format { format: "LPAN", reason: reason.to_string() };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != LPAN_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != LPAN_VERSION {
            return Err(bad("unsupported version"));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let d = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let p_bits = u64::from_le_bytes(b8);
        let p = if p_bits == INF_SENTINEL_BITS {
            PNorm::Infinity
        } else {
            let p = f64::from_bits(p_bits);
            if p.is_nan() {
                return Err(bad("NaN exponent with nonzero payload"));
            }
            PNorm::Finite(p)
        };
        let count = n.checked_mul(d).ok_or_else(|| bad("n*d overflows"))?;
        let mut raw = vec![0u8; count.checked_mul(8).ok_or_else(|| bad("size overflows"))?];
        r.read_exact(&mut raw)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let mut tail = [0u8; 1];
        if r.read(&mut tail)? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(LpanFile { n, d, p, data })
    }
}
