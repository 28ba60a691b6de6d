//! Evenly spaced tensor-product grids over boxes in R^D.
//!
//! Flat indices are row-major over dimensions: dimension 0 varies slowest.

use crate::error::{invalid, Error, Result};

/// Distance (in environment units) within which a vector counts as lying on
/// a grid point.
pub const SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl From<(f64, f64)> for Interval {
    fn from((lo, hi): (f64, f64)) -> Self {
        Self { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    ranges: Vec<Interval>,
    points: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

pub type StateSpace = GridSpace;
pub type ActionSpace = GridSpace;

impl GridSpace {
    pub fn new<I: Into<Interval>>(
        ranges: impl IntoIterator<Item = I>,
        points_per_dim: Vec<usize>,
    ) -> Result<Self> {
        let ranges: Vec<Interval> = ranges.into_iter().map(Into::into).collect();
        if ranges.is_empty() {
            return Err(Error::InvalidGrid("at least one dimension required".into()));
        }
        if ranges.len() != points_per_dim.len() {
            return Err(Error::DimensionMismatch {
                expected: ranges.len(),
                got: points_per_dim.len(),
            });
        }
        for (d, r) in ranges.iter().enumerate() {
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo >= r.hi {
                return Err(Error::InvalidGrid(format!(
                    "dimension {d}: need finite lo < hi, got [{}, {}]",
                    r.lo, r.hi
                )));
            }
        }
        if let Some(d) = points_per_dim.iter().position(|&n| n == 0) {
            return Err(Error::InvalidGrid(format!("dimension {d} has zero points")));
        }
        let mut strides = vec![1usize; points_per_dim.len()];
        for d in (0..points_per_dim.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1]
                .checked_mul(points_per_dim[d + 1])
                .ok_or_else(|| Error::InvalidGrid("grid too large".into()))?;
        }
        let len = strides[0]
            .checked_mul(points_per_dim[0])
            .ok_or_else(|| Error::InvalidGrid("grid too large".into()))?;
        Ok(Self {
            ranges,
            points: points_per_dim,
            strides,
            len,
        })
    }

    pub fn dims(&self) -> usize {
        self.ranges.len()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ranges(&self) -> &[Interval] {
        &self.ranges
    }

    pub fn points_per_dim(&self) -> &[usize] {
        &self.points
    }

    /// Spacing along `dim`; zero for single-point dimensions.
    pub fn spacing(&self, dim: usize) -> f64 {
        let n = self.points[dim];
        if n < 2 {
            0.0
        } else {
            self.ranges[dim].width() / (n - 1) as f64
        }
    }

    /// Coordinate of the `k`-th point along `dim`. A single-point dimension
    /// sits at the interval midpoint.
    pub fn coordinate(&self, dim: usize, k: usize) -> f64 {
        let r = self.ranges[dim];
        let n = self.points[dim];
        if n < 2 {
            return 0.5 * (r.lo + r.hi);
        }
        if k == n - 1 {
            return r.hi;
        }
        r.lo + k as f64 * self.spacing(dim)
    }

    /// All coordinates along `dim`.
    pub fn axis(&self, dim: usize) -> Vec<f64> {
        (0..self.points[dim])
            .map(|k| self.coordinate(dim, k))
            .collect()
    }

    pub fn multi_index(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.len {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        Ok(self.multi_index_unchecked(index))
    }

    pub(crate) fn multi_index_unchecked(&self, index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.points)
            .map(|(&stride, &n)| (index / stride) % n)
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: multi.len(),
            });
        }
        let mut index = 0;
        for (d, &k) in multi.iter().enumerate() {
            if k >= self.points[d] {
                return Err(Error::IndexOutOfRange {
                    index: k,
                    len: self.points[d],
                });
            }
            index += k * self.strides[d];
        }
        Ok(index)
    }

    /// Coordinates of grid point `index` (the `state_of_index` operation).
    pub fn point(&self, index: usize) -> Result<Vec<f64>> {
        if index >= self.len {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        Ok(self.point_unchecked(index))
    }

    pub(crate) fn point_unchecked(&self, index: usize) -> Vec<f64> {
        (0..self.dims())
            .map(|d| self.coordinate(d, (index / self.strides[d]) % self.points[d]))
            .collect()
    }

    /// Writes the coordinates of every grid point, row by row, into one
    /// flat buffer of length `len() * dims()`.
    pub fn all_points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len * self.dims());
        for i in 0..self.len {
            out.extend(self.point_unchecked(i));
        }
        out
    }

    /// Inverse of [`GridSpace::point`]; rejects vectors farther than
    /// [`SNAP_TOLERANCE`] from a grid point in any coordinate.
    pub fn index_of(&self, x: &[f64]) -> Result<usize> {
        self.check_dims(x)?;
        let mut index = 0;
        for (d, &xd) in x.iter().enumerate() {
            if !xd.is_finite() {
                return Err(Error::NonFinite(format!("coordinate {d}")));
            }
            let k = self.nearest_along(d, xd);
            if (self.coordinate(d, k) - xd).abs() > SNAP_TOLERANCE {
                return Err(Error::NotAGridPoint(format!(
                    "coordinate {d} = {xd} is not on the grid"
                )));
            }
            index += k * self.strides[d];
        }
        Ok(index)
    }

    /// Index of the grid point closest to `x` in Euclidean distance.
    /// Coordinates outside a range clamp to the nearest endpoint; exact
    /// midpoints resolve to the lower grid value.
    pub fn nearest_index(&self, x: &[f64]) -> Result<usize> {
        self.check_dims(x)?;
        if let Some(d) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {d}")));
        }
        Ok(self.nearest_index_unchecked(x))
    }

    #[inline]
    pub(crate) fn nearest_index_unchecked(&self, x: &[f64]) -> usize {
        x.iter()
            .enumerate()
            .map(|(d, &xd)| self.nearest_along(d, xd) * self.strides[d])
            .sum()
    }

    #[inline]
    fn nearest_along(&self, dim: usize, x: f64) -> usize {
        let n = self.points[dim];
        if n < 2 {
            return 0;
        }
        let r = self.ranges[dim];
        if x <= r.lo {
            return 0;
        }
        if x >= r.hi {
            return n - 1;
        }
        let u = (x - r.lo) / self.spacing(dim);
        let below = (u.floor() as usize).min(n - 1);
        if below + 1 < n {
            // compare actual distances so the tie rule is exact on the
            // stored coordinates rather than on the scaled offset
            let lo = self.coordinate(dim, below);
            let hi = self.coordinate(dim, below + 1);
            if (hi - x) < (x - lo) {
                return below + 1;
            }
        }
        below
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(())
}
