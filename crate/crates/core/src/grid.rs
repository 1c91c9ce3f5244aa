//! Row-major image grids shared by the perception pipeline and the renderer.

use thiserror::Error;

/// Depth value stored for rays that return nothing within sensor range.
pub const NO_RETURN: f64 = 1.0e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("expected {expected} cells for the given dimensions, got {actual}")]
    CellCount { expected: usize, actual: usize },
    #[error("cell {index} holds {value}, outside the allowed range")]
    InvalidCell { index: usize, value: f64 },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), GridError> {
    if width == 0 || height == 0 {
        return Err(GridError::EmptyDimensions { width, height });
    }
    if width * height != len {
        return Err(GridError::CellCount {
            expected: width * height,
            actual: len,
        });
    }
    Ok(())
}

/// Read-only access to a real-valued row-major grid.
pub trait Grid {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Value at row `i`, column `j`.
    fn value(&self, i: usize, j: usize) -> f64;

    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
}

pub(crate) fn ensure_same_dims(a: &impl Grid, b: &impl Grid) -> Result<(), GridError> {
    if a.dims() != b.dims() {
        return Err(GridError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// Binary vegetation mask; `true` marks a vegetation pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VegetationMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl VegetationMask {
    pub fn zeros(width: usize, height: usize) -> Result<Self, GridError> {
        Self::from_cells(width, height, vec![false; width * height])
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<bool>) -> Result<Self, GridError> {
        check_dims(width, height, cells.len())?;
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    /// Builds a mask from 0/1 bytes; any other byte value is rejected.
    pub fn from_bits(width: usize, height: usize, bits: &[u8]) -> Result<Self, GridError> {
        check_dims(width, height, bits.len())?;
        let cells = bits
            .iter()
            .enumerate()
            .map(|(index, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(GridError::InvalidCell {
                    index,
                    value: f64::from(b),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.cells[i * self.width + j] = on;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [bool] {
        &mut self.cells
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Mirror left/right.
    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for (src, dst) in self
            .cells
            .chunks_exact(self.width)
            .zip(out.cells.chunks_exact_mut(self.width))
        {
            dst.copy_from_slice(src);
            dst.reverse();
        }
        out
    }
}

impl Grid for VegetationMask {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn value(&self, i: usize, j: usize) -> f64 {
        if self.get(i, j) {
            1.0
        } else {
            0.0
        }
    }
}

/// Per-pixel range in meters. Pixels without a return hold [`NO_RETURN`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    cells: Vec<f64>,
}

impl DepthMap {
    pub fn filled(width: usize, height: usize, depth: f64) -> Result<Self, GridError> {
        Self::from_cells(width, height, vec![depth; width * height])
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<f64>) -> Result<Self, GridError> {
        check_dims(width, height, cells.len())?;
        if let Some((index, &value)) = cells
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
        {
            return Err(GridError::InvalidCell { index, value });
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for (src, dst) in self
            .cells
            .chunks_exact(self.width)
            .zip(out.cells.chunks_exact_mut(self.width))
        {
            dst.copy_from_slice(src);
            dst.reverse();
        }
        out
    }
}

impl Grid for DepthMap {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// Mask scaled by a per-pixel weight in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMask {
    width: usize,
    height: usize,
    cells: Vec<f64>,
}

impl WeightedMask {
    pub fn from_cells(width: usize, height: usize, cells: Vec<f64>) -> Result<Self, GridError> {
        check_dims(width, height, cells.len())?;
        if let Some((index, &value)) = cells
            .iter()
            .enumerate()
            .find(|(_, w)| !(0.0..=1.0).contains(*w))
        {
            return Err(GridError::InvalidCell { index, value });
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
}

impl Grid for WeightedMask {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}
