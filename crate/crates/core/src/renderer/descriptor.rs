//! Synthetic dense descriptors for renders.
//!
//! Each visible keypoint deposits its semantic embedding `e_k` with a
//! truncated Gaussian falloff `g_k`; the remaining weight goes to a shared
//! background embedding:
//!
//! ```text
//! f(cell) = normalize( Σ_k g_k(cell)·e_k + max(0, 1 − Σ_k g_k(cell))·e_bg )
//! ```
//!
//! The descriptor grid coincides with the render's pixel grid.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::projection::Render;
use super::template::TemplateModel;
use crate::correspondence::FeatureMap;
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::scalar::Scalar;

pub const DEFAULT_DESCRIPTOR_DIM: usize = 16;
pub const DEFAULT_SPREAD_CELLS: f64 = 1.5;
const TRUNCATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmbeddingKind {
    /// Keypoint `k` (template order) maps to basis vector `k`; the background
    /// uses basis vector `K`. Needs `dim ≥ K + 1`.
    OneHot,
    /// Seeded random unit vectors, one per keypoint plus the background.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorConfig {
    pub dim: usize,
    /// Standard deviation of the deposit falloff, in cells.
    pub spread: f64,
    pub embedding: EmbeddingKind,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self { dim: DEFAULT_DESCRIPTOR_DIM, spread: DEFAULT_SPREAD_CELLS, embedding: EmbeddingKind::OneHot }
    }
}

/// Corruption applied to a descriptor map.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation of additive Gaussian noise on every entry before renormalization.
    pub sigma: f64,
    /// Probability that a visible keypoint deposits nothing.
    pub dropout: f64,
}

impl NoiseSpec {
    pub const NONE: Self = Self { sigma: 0.0, dropout: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) || !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "noise sigma must be >= 0 and dropout in [0, 1], got {} and {}",
                self.sigma, self.dropout
            )));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.sigma == 0.0 && self.dropout == 0.0
    }
}

/// Unit embeddings for every keypoint (template order) followed by the background.
pub fn embeddings<T: Scalar>(model: &TemplateModel, config: &DescriptorConfig) -> Result<Vec<Vec<T>>> {
    let k = model.len();
    if config.dim == 0 {
        return Err(Error::InvalidArgument("descriptor dimension must be positive".into()));
    }
    if !(config.spread.is_finite() && config.spread > 0.0) {
        return Err(Error::InvalidArgument(format!("descriptor spread must be positive, got {}", config.spread)));
    }
    match config.embedding {
        EmbeddingKind::OneHot => {
            if config.dim < k + 1 {
                return Err(Error::InvalidArgument(format!(
                    "one-hot embeddings for {k} keypoints need dim >= {}, got {}",
                    k + 1,
                    config.dim
                )));
            }
            Ok((0..=k).map(|i| (0..config.dim).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect())
        }
        EmbeddingKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(k + 1);
            while out.len() < k + 1 {
                let v: Vec<f64> = (0..config.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-12 {
                    out.push(v.iter().map(|x| T::lit(x / n)).collect());
                }
            }
            Ok(out)
        }
    }
}

/// Per-cell deposit weights `(template index, g)` of the visible, non-dropped keypoints.
fn deposits<T: Scalar>(render: &Render<T>, spread: f64, active: &[bool]) -> Vec<Vec<(usize, T)>> {
    let (h, w) = render.resolution();
    let mut cells = vec![Vec::new(); h * w];
    let reach = TRUNCATION_SIGMAS * spread;
    let inv = T::lit(-0.5 / (spread * spread));
    let reach2 = T::lit(reach * reach);
    for (i, k) in render.keypoints().iter().enumerate() {
        if !k.visible || !active[i] {
            continue;
        }
        let (u, v) = (k.u.as_f64(), k.v.as_f64());
        let c0 = (u - reach).ceil().max(0.0) as usize;
        let c1 = ((u + reach).floor().max(0.0) as usize).min(w - 1);
        let r0 = (v - reach).ceil().max(0.0) as usize;
        let r1 = ((v + reach).floor().max(0.0) as usize).min(h - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let (du, dv) = (T::lit(c as f64) - k.u, T::lit(r as f64) - k.v);
                let d2 = du * du + dv * dv;
                if d2 <= reach2 {
                    cells[r * w + c].push((i, (d2 * inv).exp()));
                }
            }
        }
    }
    cells
}

/// Descriptor map of `render` under `config`, corrupted per `noise` with a
/// stream seeded by `seed`.
pub fn descriptor_map<T: Scalar>(
    render: &Render<T>,
    model: &TemplateModel,
    config: &DescriptorConfig,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<FeatureMap<T>> {
    noise.validate()?;
    if render.keypoints().len() != model.len() {
        return Err(Error::ShapeMismatch("render and template keypoint counts differ".into()));
    }
    let emb = embeddings::<T>(model, config)?;
    let background = &emb[model.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active: Vec<bool> = (0..model.len()).map(|_| noise.dropout == 0.0 || !rng.random_bool(noise.dropout)).collect();
    let (h, w) = render.resolution();
    let d = config.dim;
    let mut data = vec![T::zero(); h * w * d];
    for (cell, weights) in data.chunks_exact_mut(d).zip(deposits(render, config.spread, &active)) {
        let mut total = T::zero();
        for (i, g) in weights {
            total += g;
            for (o, e) in cell.iter_mut().zip(&emb[i]) {
                *o += g * *e;
            }
        }
        let rest = (T::one() - total).max(T::zero());
        if rest > T::zero() {
            for (o, e) in cell.iter_mut().zip(background) {
                *o += rest * *e;
            }
        }
    }
    if noise.sigma > 0.0 {
        let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for v in data.iter_mut() {
            *v += T::lit(normal.sample(&mut rng));
        }
    }
    for cell in data.chunks_exact_mut(d) {
        let n = cell.iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
        if n > T::zero() && n.is_finite() {
            cell.iter_mut().for_each(|x| *x /= n);
        } else {
            cell.copy_from_slice(background);
        }
    }
    FeatureMap::new(h, w, d, data)
}

/// Noiseless descriptor at a continuous image location, from precomputed
/// [`embeddings`].
pub fn descriptor_at<T: Scalar>(render: &Render<T>, embeddings: &[Vec<T>], spread: f64, [u, v]: [T; 2]) -> Vec<T> {
    let background = &embeddings[embeddings.len() - 1];
    let reach = TRUNCATION_SIGMAS * spread;
    let reach2 = T::lit(reach * reach);
    let inv = T::lit(-0.5 / (spread * spread));
    let mut out = vec![T::zero(); background.len()];
    let mut total = T::zero();
    for (i, k) in render.keypoints().iter().enumerate().filter(|(_, k)| k.visible) {
        let (du, dv) = (u - k.u, v - k.v);
        let d2 = du * du + dv * dv;
        if d2 <= reach2 {
            let g = (d2 * inv).exp();
            total += g;
            for (o, e) in out.iter_mut().zip(&embeddings[i]) {
                *o += g * *e;
            }
        }
    }
    let rest = (T::one() - total).max(T::zero());
    for (o, e) in out.iter_mut().zip(background) {
        *o += rest * *e;
    }
    let n = out.iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
    out.iter_mut().for_each(|x| *x /= n);
    out
}

/// Part label of the dominant visible keypoint at every cell it reaches.
pub fn part_label_map<T: Scalar>(render: &Render<T>, model: &TemplateModel, config: &DescriptorConfig) -> BTreeMap<Cell, u32> {
    let (_, w) = render.resolution();
    let active = vec![true; model.len()];
    let mut out = BTreeMap::new();
    for (idx, weights) in deposits(render, config.spread, &active).into_iter().enumerate() {
        let mut best: Option<(usize, T)> = None;
        for (i, g) in weights {
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        if let Some((i, _)) = best {
            if let Some(label) = model.part_of(model.keypoints()[i].id) {
                out.insert((idx / w, idx % w), label);
            }
        }
    }
    out
}
