//! The LPIX index container shared by both pipelines.
//!
//! All integers and floats are little-endian; coordinates and radii are
//! stored as `f64` whatever the in-memory scalar type. An index file does not
//! contain the dataset: loading needs the same [`PointSet`], which is checked
//! against the stored fingerprint.
//!
//! | field | encoding |
//! |-------|----------|
//! | magic | `"LPIX"` |
//! | version | `u16` = 1 |
//! | variant | `u8`: 0 ℓ∞ cardinality, 1 ℓ∞ doubling-dimension, 2 Mazur descent |
//! | n, d | `u64`, `u64` |
//! | p | `f64` (∞ as `0x7FF8000000000000`) |
//! | dataset fingerprint | `u64` |
//! | config | `u32` length + UTF-8 JSON of the build parameters |
//!
//! ℓ∞ body: `u8` stats flag, then (if set) diam, min_dist, aspect_ratio,
//! ddim_est as `f64`; `u32` rung count; per rung `f64` radius and `u32` copy
//! count; per copy `u64` seed, `f64` b, `f64` ddim_est, `u64` id count, the
//! ids as `u64`, and the embedded rows (`ids × d` `f64`).
//!
//! Mazur body: `f64` c, `f64` ddim_est, `u32` replicas, `f64` normalization,
//! `n × i32` top levels, `n × u64` parents (`u64::MAX` for the root); `u64`
//! oracle count, per oracle `u64` node, `i32` level, `u32` replica count and
//! that many `u64` JL seeds, `u64` member count and the members; then per
//! point its bottom oracle: `u64` JL seed, `u64` member count, members.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::embed::FrechetEmbedding;
use crate::error::{LpError, Result};
use crate::hierarchy::{Level, NetHierarchy};
use crate::linf::{AmplifiedStructure, LinfAnnIndex, LinfNearStructure, LinfParams};
use crate::mazur::{AnnConfig, AnnIndex};
use crate::metric::PNorm;
use crate::pointset::{PointSet, INF_SENTINEL_BITS};
use crate::scalar::Scalar;
use crate::stats::SetStats;

pub const LPIX_MAGIC: &[u8; 4] = b"LPIX";
pub const LPIX_VERSION: u16 = 1;
const MAZUR_TAG: u8 = 2;

fn bad(reason: impl Into<String>) -> LpError {
    LpError::Format { format: "LPIX", reason: reason.into() }
}

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn ids(&mut self, ids: &[usize]) {
        self.u64(ids.len() as u64);
        ids.iter().for_each(|&x| self.u64(x as u64));
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl In<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos.checked_add(N).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated"))?;
        let out = self.buf[self.pos..end].try_into().expect("length checked");
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn count(&mut self, limit: usize) -> Result<usize> {
        let n = self.u64()?;
        if n > limit as u64 {
            return Err(bad(format!("count {n} exceeds {limit}")));
        }
        Ok(n as usize)
    }
    fn ids(&mut self, n: usize) -> Result<Vec<usize>> {
        let len = self.count(n)?;
        (0..len)
            .map(|_| {
                let x = self.u64()?;
                if x >= n as u64 {
                    return Err(bad(format!("point id {x} out of range")));
                }
                Ok(x as usize)
            })
            .collect()
    }
    fn bytes(&mut self, len: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

/// Fixed-size prefix of every LPIX file.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexHeader {
    pub variant: u8,
    pub n: usize,
    pub d: usize,
    pub p: PNorm<f64>,
    pub fingerprint: u64,
    /// JSON echo of the build parameters.
    pub config: String,
}

impl IndexHeader {
    pub fn is_mazur(&self) -> bool {
        self.variant == MAZUR_TAG
    }
}

fn write_header<T: Scalar>(out: &mut Out, variant: u8, set: &PointSet<T>, config: &str) {
    out.0.extend_from_slice(LPIX_MAGIC);
    out.u16(LPIX_VERSION);
    out.u8(variant);
    out.u64(set.len() as u64);
    out.u64(set.dim() as u64);
    out.u64(match set.norm().cast::<f64>() {
        PNorm::Finite(p) => p.to_bits(),
        PNorm::Infinity => INF_SENTINEL_BITS,
    });
    out.u64(set.fingerprint());
    out.u32(config.len() as u32);
    out.0.extend_from_slice(config.as_bytes());
}

fn read_header(input: &mut In<'_>) -> Result<IndexHeader> {
    if &input.take::<4>()? != LPIX_MAGIC {
        return Err(bad("bad magic"));
    }
    if input.u16()? != LPIX_VERSION {
        return Err(bad("unsupported version"));
    }
    let variant = input.u8()?;
    if variant > MAZUR_TAG {
        return Err(bad(format!("unknown variant {variant}")));
    }
    let n = input.u64()? as usize;
    let d = input.u64()? as usize;
    let bits = input.u64()?;
    let p = if bits == INF_SENTINEL_BITS { PNorm::Infinity } else { PNorm::Finite(f64::from_bits(bits)) };
    let fingerprint = input.u64()?;
    let len = input.u32()? as usize;
    let config = std::str::from_utf8(input.bytes(len)?).map_err(|_| bad("config is not UTF-8"))?.to_string();
    Ok(IndexHeader { variant, n, d, p, fingerprint, config })
}

/// Reads only the header.
pub fn read_index_header<R: Read>(mut r: R) -> Result<IndexHeader> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    read_header(&mut In { buf: &buf, pos: 0 })
}

fn json<S: serde::Serialize>(v: &S) -> String {
    serde_json::to_string(v).expect("config serializes")
}

pub fn write_linf_index<T: Scalar, W: Write>(index: &LinfAnnIndex<T>, mut w: W) -> Result<()> {
    let mut out = Out::default();
    let set = index.set();
    write_header(&mut out, index.params().variant.tag(), set, &json(index.params()));
    match index.stats() {
        Some(s) => {
            out.u8(1);
            [s.diam, s.min_dist, s.aspect_ratio, s.ddim_est].into_iter().for_each(|x| out.f64(x));
        }
        None => out.u8(0),
    }
    out.u32(index.rungs().len() as u32);
    for rung in index.rungs() {
        out.f64(rung.copies()[0].r().as_f64());
        out.u32(rung.k() as u32);
        for copy in rung.copies() {
            out.u64(copy.seed());
            out.f64(copy.embedding().b().as_f64());
            out.f64(copy.ddim_est());
            out.ids(copy.ids());
            let backend = copy.backend();
            for i in 0..backend.len() {
                backend.row(i).iter().for_each(|x| out.f64(x.as_f64()));
            }
        }
    }
    w.write_all(&out.0)?;
    Ok(())
}

pub fn write_ann_index<T: Scalar, W: Write>(index: &AnnIndex<T>, mut w: W) -> Result<()> {
    let mut out = Out::default();
    let set = index.set();
    write_header(&mut out, MAZUR_TAG, set, &json(index.config()));
    out.f64(index.c());
    out.f64(index.ddim_est());
    out.u32(index.replicas() as u32);
    let h = index.hierarchy();
    out.f64(h.normalization().as_f64());
    (0..h.len()).for_each(|x| out.i32(h.top_of(x)));
    (0..h.len()).for_each(|x| out.u64(h.parent_of(x).map_or(u64::MAX, |p| p as u64)));
    out.u64(index.oracles().len() as u64);
    for (&(node, level), replicas) in index.oracles() {
        out.u64(node as u64);
        out.i32(level);
        out.u32(replicas.len() as u32);
        replicas.iter().for_each(|o| out.u64(o.jl().seed()));
        out.ids(replicas[0].members());
    }
    for w in 0..h.len() {
        let o = index.bottom_oracle(w);
        out.u64(o.jl().seed());
        out.ids(o.members());
    }
    w.write_all(&out.0)?;
    Ok(())
}

/// A loaded index of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum IndexFile<T> {
    Linf(LinfAnnIndex<T>),
    Mazur(AnnIndex<T>),
}

/// Reads an index built over `set`.
pub fn read_index<T: Scalar, R: Read>(mut r: R, set: &PointSet<T>) -> Result<IndexFile<T>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut input = In { buf: &buf, pos: 0 };
    let header = read_header(&mut input)?;
    if header.n != set.len() || header.d != set.dim() || header.p != set.norm().cast::<f64>() {
        return Err(bad("index shape does not match the dataset"));
    }
    if header.fingerprint != set.fingerprint() {
        return Err(bad("dataset fingerprint mismatch"));
    }
    let set = Arc::new(set.clone());
    let index = if header.is_mazur() {
        let config: AnnConfig = serde_json::from_str(&header.config).map_err(|e| bad(e.to_string()))?;
        IndexFile::Mazur(read_mazur_body(&mut input, set, config)?)
    } else {
        let params: LinfParams = serde_json::from_str(&header.config).map_err(|e| bad(e.to_string()))?;
        if params.variant.tag() != header.variant {
            return Err(bad("variant tag disagrees with config"));
        }
        IndexFile::Linf(read_linf_body(&mut input, set, params)?)
    };
    if input.pos != buf.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(index)
}

fn read_linf_body<T: Scalar>(input: &mut In<'_>, set: Arc<PointSet<T>>, params: LinfParams) -> Result<LinfAnnIndex<T>> {
    let (n, d) = (set.len(), set.dim());
    let stats = match input.u8()? {
        0 => None,
        1 => Some(SetStats {
            diam: input.f64()?,
            min_dist: input.f64()?,
            aspect_ratio: input.f64()?,
            ddim_est: input.f64()?,
        }),
        _ => return Err(bad("bad stats flag")),
    };
    let p = set.norm().above_two()?;
    let rung_count = input.u32()? as usize;
    let mut rungs = Vec::with_capacity(rung_count.min(1024));
    for _ in 0..rung_count {
        let r = T::lit(input.f64()?);
        let k = input.u32()? as usize;
        let mut copies = Vec::with_capacity(k.min(1024));
        for _ in 0..k {
            let seed = input.u64()?;
            let b = T::lit(input.f64()?);
            let ddim_est = input.f64()?;
            let ids = input.ids(n)?;
            let data = (0..ids.len() * d).map(|_| input.f64().map(T::lit)).collect::<Result<Vec<_>>>()?;
            let embedding = FrechetEmbedding::new(d, p, b, seed)?;
            copies.push(LinfNearStructure::assemble(
                set.clone(),
                params.variant,
                embedding,
                data,
                ids,
                r,
                params.backend,
                ddim_est,
                seed,
            )?);
        }
        rungs.push(AmplifiedStructure::new(copies)?);
    }
    if rungs.is_empty() != stats.is_none() {
        return Err(bad("rungs and stats disagree"));
    }
    LinfAnnIndex::from_parts(set, params, stats, rungs)
}

fn read_mazur_body<T: Scalar>(input: &mut In<'_>, set: Arc<PointSet<T>>, config: AnnConfig) -> Result<AnnIndex<T>> {
    let n = set.len();
    let c = input.f64()?;
    let ddim_est = input.f64()?;
    let replicas = input.u32()? as usize;
    let normalization = T::lit(input.f64()?);
    let top = (0..n).map(|_| input.i32()).collect::<Result<Vec<Level>>>()?;
    let parent = (0..n)
        .map(|_| {
            let p = input.u64()?;
            Ok(if p == u64::MAX { None } else { Some(p as usize) })
        })
        .collect::<Result<Vec<_>>>()?;
    let hierarchy = NetHierarchy::from_parts(&set, normalization, top, parent)?;
    let count = input.count(usize::MAX)?;
    let mut members = BTreeMap::new();
    let mut seeds = Vec::new();
    for _ in 0..count {
        let node = input.u64()? as usize;
        let level = input.i32()?;
        let k = input.u32()? as usize;
        let s = (0..k).map(|_| input.u64()).collect::<Result<Vec<_>>>()?;
        seeds.push(((node, level), s));
        members.insert((node, level), input.ids(n)?);
    }
    let mut bottom_seeds = Vec::with_capacity(n);
    let mut bottom_members = Vec::with_capacity(n);
    for _ in 0..n {
        bottom_seeds.push(input.u64()?);
        bottom_members.push(input.ids(n)?);
    }
    let index = AnnIndex::assemble(set, hierarchy, config, c, ddim_est, replicas, members, bottom_members)?;
    for (key, s) in seeds {
        let stored: Vec<u64> =
            index.oracles().get(&key).map(|v| v.iter().map(|o| o.jl().seed()).collect()).unwrap_or_default();
        if stored != s {
            return Err(bad(format!("oracle seeds for {key:?} do not match the configuration")));
        }
    }
    for (w, s) in bottom_seeds.into_iter().enumerate() {
        if index.bottom_oracle(w).jl().seed() != s {
            return Err(bad(format!("bottom oracle seed for point {w} does not match")));
        }
    }
    Ok(index)
}
