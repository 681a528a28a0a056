//! Normalized pairwise feature correlation.
//!
//! For target location `t` in map `b` and source location `s` in map `a`:
//!
//! ```text
//! S(s, t) = ⟨a(s), b(t)⟩₊ / sqrt(Σ_k ⟨a(k), b(t)⟩₊²)
//! ```
//!
//! Each target slice is normalized over all source locations, so a target
//! descriptor that matches `k` sources equally scores `1/√k` at each of them.
//! Negative dot products clamp to zero; a slice with no positive dot product
//! stays all zero.

use std::io::{Read, Write};

use rayon::prelude::*;

use super::feature_map::{dot, FeatureMap};
use crate::error::{Error, Result};
use crate::grid::{cell_index, index_cell, Cell, Mask};
use crate::scalar::Scalar;

const TARGET_TILE: usize = 8;
const SOURCE_BLOCK: usize = 128;
const BINARY_MAGIC: &[u8; 4] = b"VACT";
const BINARY_VERSION: u32 = 1;

/// h×w×(h·w) correlation values stored target-major: the slice for target
/// location `t` holds one entry per source location in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor<T: Scalar> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

fn check_shapes<T: Scalar>(fa: &FeatureMap<T>, fb: &FeatureMap<T>) -> Result<()> {
    if fa.height() != fb.height() || fa.width() != fb.width() || fa.dim() != fb.dim() {
        return Err(Error::ShapeMismatch(format!(
            "feature maps {}x{}x{} and {}x{}x{} differ",
            fa.height(),
            fa.width(),
            fa.dim(),
            fb.height(),
            fb.width(),
            fb.dim()
        )));
    }
    Ok(())
}

#[inline]
fn normalize_slice<T: Scalar>(slice: &mut [T]) {
    let mut ss = T::zero();
    for v in slice.iter() {
        ss += *v * *v;
    }
    if ss > T::zero() {
        let norm = ss.sqrt();
        for v in slice.iter_mut() {
            *v /= norm;
        }
    }
}

/// Correlates every target location of `fb` against every source location of `fa`.
///
/// Targets are processed in tiles against blocks of sources so a block of
/// source descriptors stays cache-resident; tiles run in parallel and each
/// value is computed independently, so the output does not depend on the
/// worker count.
pub fn correlate<T: Scalar>(fa: &FeatureMap<T>, fb: &FeatureMap<T>) -> Result<CorrelationTensor<T>> {
    check_shapes(fa, fb)?;
    let n = fa.cells();
    let mut data = vec![T::zero(); n * n];
    data.par_chunks_mut(TARGET_TILE * n).enumerate().for_each(|(tile, rows)| {
        let t0 = tile * TARGET_TILE;
        let count = rows.len() / n;
        for s0 in (0..n).step_by(SOURCE_BLOCK) {
            let s1 = (s0 + SOURCE_BLOCK).min(n);
            for dt in 0..count {
                let query = fb.cell_at(t0 + dt);
                let row = &mut rows[dt * n..(dt + 1) * n];
                for (s, v) in row.iter_mut().enumerate().take(s1).skip(s0) {
                    *v = dot(fa.cell_at(s), query).max(T::zero());
                }
            }
        }
        for dt in 0..count {
            normalize_slice(&mut rows[dt * n..(dt + 1) * n]);
        }
    });
    Ok(CorrelationTensor { height: fa.height(), width: fa.width(), data })
}

/// The normalized slice for one target location; bit-identical to the
/// corresponding slice of [`correlate`].
pub fn correlate_column<T: Scalar>(fa: &FeatureMap<T>, fb: &FeatureMap<T>, target: Cell) -> Result<Vec<T>> {
    check_shapes(fa, fb)?;
    if target.0 >= fb.height() || target.1 >= fb.width() {
        return Err(Error::OutOfBounds {
            u: target.1 as f64,
            v: target.0 as f64,
            height: fb.height(),
            width: fb.width(),
        });
    }
    correlate_query(fa, fb.cell(target))
}

/// Normalized scores of every source location of `fa` against an arbitrary
/// query descriptor, using the same rule as a tensor slice.
pub fn correlate_query<T: Scalar>(fa: &FeatureMap<T>, query: &[T]) -> Result<Vec<T>> {
    if query.len() != fa.dim() {
        return Err(Error::ShapeMismatch(format!("query has {} entries, maps have {}", query.len(), fa.dim())));
    }
    let mut column: Vec<T> = (0..fa.cells()).map(|s| dot(fa.cell_at(s), query).max(T::zero())).collect();
    normalize_slice(&mut column);
    Ok(column)
}

impl<T: Scalar> CorrelationTensor<T> {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// All source scores for one target location.
    pub fn slice(&self, target: Cell) -> &[T] {
        let n = self.cells();
        let t = cell_index(self.width, target);
        &self.data[t * n..(t + 1) * n]
    }

    pub fn get(&self, source: Cell, target: Cell) -> T {
        self.slice(target)[cell_index(self.width, source)]
    }

    /// Zeroes the slices of target locations where `alpha` is off.
    pub fn apply_alpha(&self, alpha: &Mask) -> Result<Self> {
        if alpha.height() != self.height || alpha.width() != self.width {
            return Err(Error::ShapeMismatch(format!(
                "alpha {}x{} does not match correlation grid {}x{}",
                alpha.height(),
                alpha.width(),
                self.height,
                self.width
            )));
        }
        let n = self.cells();
        let mut data = self.data.clone();
        for (t, slice) in data.chunks_exact_mut(n).enumerate() {
            if !alpha.as_slice()[t] {
                slice.iter_mut().for_each(|v| *v = T::zero());
            }
        }
        Ok(Self { height: self.height, width: self.width, data })
    }

    /// Fixed average-pooling compaction over both the target and source grids.
    pub fn pooled(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor > self.height || factor > self.width {
            return Err(Error::InvalidArgument(format!(
                "pooling factor {factor} invalid for {}x{}",
                self.height, self.width
            )));
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let m = h * w;
        let n = self.cells();
        let mut out = vec![T::zero(); m * m];
        for t in 0..n {
            let (tr, tc) = index_cell(self.width, t);
            if tr / factor >= h || tc / factor >= w {
                continue;
            }
            let tp = (tr / factor) * w + tc / factor;
            for (s, v) in self.data[t * n..(t + 1) * n].iter().enumerate() {
                let (sr, sc) = index_cell(self.width, s);
                if sr / factor >= h || sc / factor >= w {
                    continue;
                }
                out[tp * m + (sr / factor) * w + sc / factor] += *v;
            }
        }
        let scale = T::lit((factor * factor * factor * factor) as f64);
        out.iter_mut().for_each(|v| *v /= scale);
        Ok(Self { height: h, width: w, data: out })
    }

    /// Argmax source for every target slice that has a positive score.
    pub fn best_matches(&self) -> std::collections::BTreeMap<Cell, Cell> {
        super::matching::best_matches(self)
    }

    /// Binary export: magic `VACT`, then little-endian `u32` version, height and
    /// width, then `(h·w)²` little-endian `f32` values in target-major order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&(self.height as u32).to_le_bytes())?;
        out.write_all(&(self.width as u32).to_le_bytes())?;
        for v in &self.data {
            out.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let bad = |reason: &str| Error::Format { path: "<correlation stream>".into(), reason: reason.into() };
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut word = [0u8; 4];
        let mut next_u32 = |input: &mut R| -> Result<u32> {
            input.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        if next_u32(&mut input)? != BINARY_VERSION {
            return Err(bad("unsupported version"));
        }
        let height = next_u32(&mut input)? as usize;
        let width = next_u32(&mut input)? as usize;
        let n = height * width;
        let mut bytes = vec![0u8; n * n * 4];
        input.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| T::lit(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
            .collect();
        Ok(Self { height, width, data })
    }

    #[cfg(test)]
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), (height * width).pow(2));
        Self { height, width, data }
    }
}
