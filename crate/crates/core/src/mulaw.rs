//! μ-law companding of angle differences and the non-uniform bin scheme built
//! from it.
//!
//! Differences are normalized by 180° before companding, so the companded
//! range is exactly `[-1, 1]`. Bin edges are the expansion of uniformly spaced
//! companded values; bins are narrow near zero and wide near ±180°.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const HALF_RANGE_DEG: f64 = 180.0;
pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_MU: f64 = 255.0;

/// `sign(d) · ln(1 + μ|d/180|) / ln(1 + μ)`.
pub fn compand<T: Scalar>(d: T, mu: T) -> T {
    let x = (d / T::lit(HALF_RANGE_DEG)).abs();
    let c = (mu * x).ln_1p() / mu.ln_1p();
    if d < T::zero() {
        -c
    } else {
        c
    }
}

/// Inverse of [`compand`]: `sign(c) · 180 · ((1 + μ)^|c| - 1) / μ`.
pub fn expand<T: Scalar>(c: T, mu: T) -> T {
    let d = (c.abs() * mu.ln_1p()).exp_m1() / mu * T::lit(HALF_RANGE_DEG);
    if c < T::zero() {
        -d
    } else {
        d
    }
}

/// Non-uniform bin table over `(-180, 180]`.
///
/// Bin `k` covers `[edges[k], edges[k + 1])`; the last bin also contains +180.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningScheme<T: Scalar> {
    n_bins: usize,
    mu: T,
    edges: Vec<T>,
    centers: Vec<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinRow {
    pub index: usize,
    pub lower: f64,
    pub center: f64,
    pub upper: f64,
    pub width: f64,
}

impl<T: Scalar> BinningScheme<T> {
    /// Builds the scheme for an even `n_bins >= 4` and a positive finite `mu`.
    pub fn new(n_bins: usize, mu: T) -> Result<Self> {
        if n_bins < 4 || !n_bins.is_multiple_of(2) {
            return Err(Error::InvalidScheme(format!("n_bins must be even and >= 4, got {n_bins}")));
        }
        if !(mu.is_finite() && mu > T::zero()) {
            return Err(Error::InvalidScheme(format!("mu must be positive and finite, got {mu}")));
        }
        let half = n_bins / 2;
        let top = T::lit(HALF_RANGE_DEG);
        // positive half; the outer edge is pinned so the domain is covered exactly
        let mut positive = Vec::with_capacity(half + 1);
        positive.push(T::zero());
        for j in 1..half {
            positive.push(expand(T::lit(j as f64) / T::lit(half as f64), mu));
        }
        positive.push(top);

        let mut edges: Vec<T> = positive.iter().rev().map(|&e| -e).collect();
        edges.extend_from_slice(&positive[1..]);
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScheme(format!(
                "edges are not strictly increasing for n_bins={n_bins}, mu={mu}"
            )));
        }
        let two = T::lit(2.0);
        let centers = edges.windows(2).map(|w| (w[0] + w[1]) / two).collect();
        Ok(Self { n_bins, mu, edges, centers })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    pub fn compand(&self, d: T) -> T {
        compand(d, self.mu)
    }

    pub fn expand(&self, c: T) -> T {
        expand(c, self.mu)
    }

    pub fn width(&self, k: usize) -> T {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn half_width(&self, k: usize) -> T {
        self.width(k) / T::lit(2.0)
    }

    /// Half-width of the two central (narrowest) bins.
    pub fn finest_half_width(&self) -> T {
        self.half_width(self.n_bins / 2)
    }

    /// Index of the bin containing `d`; values outside `[-180, 180]` clamp to the end bins.
    pub fn quantize(&self, d: T) -> usize {
        let k = self.edges.partition_point(|&e| e <= d);
        k.saturating_sub(1).min(self.n_bins - 1)
    }

    pub fn dequantize(&self, k: usize) -> Result<T> {
        self.centers
            .get(k)
            .copied()
            .ok_or(Error::BinOutOfRange { index: k, n_bins: self.n_bins })
    }

    /// Whether the exact-oracle correction `d ← d − center(bin(d))` shrinks every
    /// |d| larger than the finest half-width. Holds iff `3·e_k > e_{k+1}` for
    /// every positive edge `e_k`.
    pub fn is_contractive(&self) -> bool {
        let half = self.n_bins / 2;
        (half + 1..self.n_bins).all(|k| T::lit(3.0) * self.edges[k] > self.edges[k + 1])
    }

    pub fn rows(&self) -> Vec<BinRow> {
        (0..self.n_bins)
            .map(|k| BinRow {
                index: k,
                lower: self.edges[k].as_f64(),
                center: self.centers[k].as_f64(),
                upper: self.edges[k + 1].as_f64(),
                width: self.width(k).as_f64(),
            })
            .collect()
    }

    /// Writes the bin table as CSV: `index,lower,center,upper,width`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds a [`BinningScheme`]; see [`BinningScheme::new`].
pub fn build_scheme<T: Scalar>(n_bins: usize, mu: T) -> Result<BinningScheme<T>> {
    BinningScheme::new(n_bins, mu)
}
