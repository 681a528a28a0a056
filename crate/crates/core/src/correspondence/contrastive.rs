//! Contrastive correspondence loss.
//!
//! ```text
//! L = 1/(2N) Σ_i [ s_i·d_i² + (1 − s_i)·max(0, m − d_i²) ]
//! d_i = ‖a(x_a,i) − b(x_b,i)‖
//! ```
//!
//! Locations are continuous `(u, v)` = (column, row) coordinates on the
//! descriptor grid and are sampled at the nearest cell.

use serde::{Deserialize, Serialize};

use super::feature_map::DescriptorView;
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::scalar::Scalar;

/// One labeled pair: `similar == true` for a true correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondencePair {
    pub xa: [f64; 2],
    pub xb: [f64; 2],
    pub similar: bool,
}

/// Gradient of the loss with respect to both descriptor buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGradient<T> {
    pub loss: T,
    pub grad_a: Vec<T>,
    pub grad_b: Vec<T>,
}

/// Nearest cell to a continuous `(u, v)` location, or `OutOfBounds`.
pub fn nearest_cell(height: usize, width: usize, [u, v]: [f64; 2]) -> Result<Cell> {
    let (r, c) = (v.round(), u.round());
    if !(r >= 0.0 && c >= 0.0 && (r as usize) < height && (c as usize) < width) {
        return Err(Error::OutOfBounds { u, v, height, width });
    }
    Ok((r as usize, c as usize))
}

fn resolve<T: Scalar>(
    fa: &DescriptorView<'_, T>,
    fb: &DescriptorView<'_, T>,
    pairs: &[CorrespondencePair],
    margin: T,
) -> Result<Vec<(Cell, Cell)>> {
    if fa.dim != fb.dim {
        return Err(Error::ShapeMismatch(format!("descriptor dims {} and {} differ", fa.dim, fb.dim)));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("at least one pair is required".into()));
    }
    if !(margin.is_finite() && margin > T::zero()) {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    pairs
        .iter()
        .map(|p| Ok((nearest_cell(fa.height, fa.width, p.xa)?, nearest_cell(fb.height, fb.width, p.xb)?)))
        .collect()
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y))
}

/// Loss value over `pairs` with margin `margin`.
pub fn contrastive_loss<T: Scalar>(
    fa: &DescriptorView<'_, T>,
    fb: &DescriptorView<'_, T>,
    pairs: &[CorrespondencePair],
    margin: T,
) -> Result<T> {
    let cells = resolve(fa, fb, pairs, margin)?;
    let mut total = T::zero();
    for (p, (ca, cb)) in pairs.iter().zip(&cells) {
        let d2 = squared_distance(fa.cell(*ca), fb.cell(*cb));
        total += if p.similar { d2 } else { (margin - d2).max(T::zero()) };
    }
    Ok(total / T::lit(2.0 * pairs.len() as f64))
}

/// Loss value and its analytic gradient with respect to every entry of both maps.
///
/// On the hinge boundary `d² = m` the dissimilar term contributes zero gradient.
pub fn contrastive_gradient<T: Scalar>(
    fa: &DescriptorView<'_, T>,
    fb: &DescriptorView<'_, T>,
    pairs: &[CorrespondencePair],
    margin: T,
) -> Result<ContrastiveGradient<T>> {
    let cells = resolve(fa, fb, pairs, margin)?;
    let n = T::lit(pairs.len() as f64);
    let dim = fa.dim;
    let mut grad_a = vec![T::zero(); fa.data.len()];
    let mut grad_b = vec![T::zero(); fb.data.len()];
    let mut total = T::zero();
    for (p, &(ca, cb)) in pairs.iter().zip(&cells) {
        let (a, b) = (fa.cell(ca), fb.cell(cb));
        let d2 = squared_distance(a, b);
        let scale = if p.similar {
            total += d2;
            T::one() / n
        } else if d2 < margin {
            total += margin - d2;
            -T::one() / n
        } else {
            continue;
        };
        let oa = (ca.0 * fa.width + ca.1) * dim;
        let ob = (cb.0 * fb.width + cb.1) * dim;
        for k in 0..dim {
            let g = scale * (a[k] - b[k]);
            grad_a[oa + k] += g;
            grad_b[ob + k] -= g;
        }
    }
    Ok(ContrastiveGradient { loss: total / (T::lit(2.0) * n), grad_a, grad_b })
}
