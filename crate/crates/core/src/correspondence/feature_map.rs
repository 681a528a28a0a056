use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::scalar::Scalar;

/// Borrowed h×w×d descriptor grid with no normalization requirement.
///
/// The contrastive loss and its gradient operate on views so that raw,
/// un-normalized parameters can be differentiated.
#[derive(Debug, Clone, Copy)]
pub struct DescriptorView<'a, T> {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub data: &'a [T],
}

impl<'a, T: Scalar> DescriptorView<'a, T> {
    pub fn new(height: usize, width: usize, dim: usize, data: &'a [T]) -> Result<Self> {
        if data.len() != height * width * dim {
            return Err(Error::ShapeMismatch(format!(
                "descriptor buffer has {} entries, expected {height}x{width}x{dim}",
                data.len()
            )));
        }
        Ok(Self { height, width, dim, data })
    }

    pub fn cell(&self, (row, col): Cell) -> &'a [T] {
        let start = (row * self.width + col) * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// h×w grid of unit-length d-dimensional descriptors, row-major, cell-contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T: Scalar> {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    /// Wraps already-normalized data; every cell must have unit norm.
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        DescriptorView::new(height, width, dim, &data)?;
        if dim == 0 {
            return Err(Error::ShapeMismatch("descriptor dimension must be positive".into()));
        }
        let tol = T::unit_tolerance();
        for (i, cell) in data.chunks_exact(dim).enumerate() {
            let norm = dot(cell, cell).sqrt();
            if (norm - T::one()).abs() > tol {
                return Err(Error::NotUnitNorm { row: i / width, col: i % width, norm: norm.as_f64() });
            }
        }
        Ok(Self { height, width, dim, data })
    }

    /// Normalizes every cell of `data` to unit length. Zero cells are rejected.
    pub fn from_unnormalized(height: usize, width: usize, dim: usize, mut data: Vec<T>) -> Result<Self> {
        DescriptorView::new(height, width, dim, &data)?;
        if dim == 0 {
            return Err(Error::ShapeMismatch("descriptor dimension must be positive".into()));
        }
        for (i, cell) in data.chunks_exact_mut(dim).enumerate() {
            let norm = dot(cell, cell).sqrt();
            if !(norm > T::zero() && norm.is_finite()) {
                return Err(Error::NotUnitNorm { row: i / width, col: i % width, norm: norm.as_f64() });
            }
            cell.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self { height, width, dim, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn view(&self) -> DescriptorView<'_, T> {
        DescriptorView { height: self.height, width: self.width, dim: self.dim, data: &self.data }
    }

    pub fn cell(&self, (row, col): Cell) -> &[T] {
        self.cell_at(row * self.width + col)
    }

    pub(crate) fn cell_at(&self, index: usize) -> &[T] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    /// Average-pools `factor`×`factor` blocks and renormalizes.
    ///
    /// Trailing rows/columns that do not fill a whole block are dropped.
    pub fn pooled(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor > self.height || factor > self.width {
            return Err(Error::InvalidArgument(format!("pooling factor {factor} invalid for {}x{}", self.height, self.width)));
        }
        let (h, w, d) = (self.height / factor, self.width / factor, self.dim);
        let mut out = vec![T::zero(); h * w * d];
        for r in 0..h {
            for c in 0..w {
                let dst = &mut out[(r * w + c) * d..(r * w + c + 1) * d];
                for rr in r * factor..(r + 1) * factor {
                    for cc in c * factor..(c + 1) * factor {
                        for (o, v) in dst.iter_mut().zip(self.cell((rr, cc))) {
                            *o += *v;
                        }
                    }
                }
            }
        }
        Self::from_unnormalized(h, w, d, out)
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unit_cells() {
        assert!(FeatureMap::new(1, 2, 2, vec![1.0, 0.0, 0.5, 0.5]).is_err());
        assert!(FeatureMap::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).is_ok());
        assert!(FeatureMap::new(1, 2, 2, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn normalizes_and_rejects_zero_cells() {
        let m = FeatureMap::from_unnormalized(1, 1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(m.cell((0, 0)), &[0.6, 0.8]);
        assert!(FeatureMap::from_unnormalized(1, 1, 2, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn pooling_averages_then_normalizes() {
        let data = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let m = FeatureMap::new(2, 2, 2, data).unwrap();
        let p = m.pooled(2).unwrap();
        assert_eq!((p.height(), p.width()), (1, 1));
        let s = 0.5f64.sqrt();
        assert!((p.cell((0, 0))[0] - s).abs() < 1e-12 && (p.cell((0, 0))[1] - s).abs() < 1e-12);
        assert!(m.pooled(3).is_err());
    }
}
