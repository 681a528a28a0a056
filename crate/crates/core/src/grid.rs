//! Row-major grid helpers shared by renders, feature maps and correlation tensors.

use crate::error::{Error, Result};

/// A grid location as `(row, col)`.
pub type Cell = (usize, usize);

/// Binary h×w mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask data has {} entries, expected {height}x{width}",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, (row, col): Cell) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, (row, col): Cell, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

#[inline]
pub(crate) fn cell_index(width: usize, (row, col): Cell) -> usize {
    row * width + col
}

#[inline]
pub(crate) fn index_cell(width: usize, index: usize) -> Cell {
    (index / width, index % width)
}
