//! Single-band 2D sample grid.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `height x width` grid. Row index `i` runs down the vertical
/// axis, column index `j` across the horizontal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "plane {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a plane from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.width + col] = v;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.data[row * self.width..(row + 1) * self.width]
    }

    /// Sum of squares, accumulated in f64.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64() * v.as_f64()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.as_f64().abs()))
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.as_f64()).sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.map(|v| v * alpha)
    }

    fn check_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same(other, "elementwise op")?;
        Ok(Plane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Copies the window with top-left `(row0, col0)`; must lie inside.
    pub fn crop(&self, row0: usize, col0: usize, width: usize, height: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::Size(format!(
                "crop {width}x{height} at ({row0},{col0}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for i in row0..row0 + height {
            data.extend_from_slice(&self.row(i)[col0..col0 + width]);
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    /// Symmetric (edge-repeating) mirror extension. `left`/`top` samples
    /// are prepended, the rest appended, to reach `width x height`.
    pub fn pad_reflect(&self, left: usize, top: usize, width: usize, height: usize) -> Self {
        assert!(width >= self.width + left && height >= self.height + top);
        Plane::from_fn(width, height, |i, j| {
            let si = mirror_index(i as isize - top as isize, self.height);
            let sj = mirror_index(j as isize - left as isize, self.width);
            self.get(si, sj)
        })
    }

    pub fn flip_horizontal(&self) -> Self {
        Plane::from_fn(self.width, self.height, |i, j| {
            self.get(i, self.width - 1 - j)
        })
    }

    pub fn flip_vertical(&self) -> Self {
        Plane::from_fn(self.width, self.height, |i, j| {
            self.get(self.height - 1 - i, j)
        })
    }

    pub fn cast<U: Scalar>(&self) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Maps any integer index onto `0..n` by half-sample symmetric mirroring
/// (`.. 1 0 | 0 1 .. n-1 | n-1 n-2 ..`), periodic with period `2n`.
pub fn mirror_index(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let r = idx.rem_euclid(period);
    if r < n {
        r as usize
    } else {
        (period - 1 - r) as usize
    }
}
