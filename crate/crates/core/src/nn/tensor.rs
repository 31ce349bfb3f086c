use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::scalar::Scalar;

/// Dense row-major tensor. Feature maps are `[channels, height, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "tensor shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    /// Stacks equally sized planes as channels.
    pub fn from_planes(planes: &[Plane<T>]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Dimension("no planes to stack".into()))?;
        let (w, h) = first.dims();
        let mut data = Vec::with_capacity(w * h * planes.len());
        for p in planes {
            if p.dims() != (w, h) {
                return Err(Error::Dimension("stacked planes differ in size".into()));
            }
            data.extend_from_slice(p.data());
        }
        Ok(Tensor {
            shape: vec![planes.len(), h, w],
            data,
        })
    }

    pub fn to_planes(&self) -> Vec<Plane<T>> {
        let (c, h, w) = self.chw();
        (0..c)
            .map(|k| {
                Plane::new(w, h, self.data[k * h * w..(k + 1) * h * w].to_vec())
                    .expect("channel has plane size")
            })
            .collect()
    }

    pub fn channel(&self, k: usize) -> Plane<T> {
        let (_, h, w) = self.chw();
        Plane::new(w, h, self.data[k * h * w..(k + 1) * h * w].to_vec())
            .expect("channel has plane size")
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
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
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// `(channels, height, width)`; panics unless rank 3.
    pub fn chw(&self) -> (usize, usize, usize) {
        assert_eq!(self.shape.len(), 3, "expected [C,H,W], got {:?}", self.shape);
        (self.shape[0], self.shape[1], self.shape[2])
    }

    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor {:?}", self.shape);
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        let (c, h, w) = self.chw();
        let mut out = self.clone();
        for k in 0..c * h {
            out.data[k * w..(k + 1) * w].reverse();
        }
        out
    }

    pub fn flip_vertical(&self) -> Self {
        let (c, h, w) = self.chw();
        let mut out = self.clone();
        for k in 0..c {
            for i in 0..h {
                let src = &self.data[(k * h + h - 1 - i) * w..(k * h + h - i) * w];
                out.data[(k * h + i) * w..(k * h + i + 1) * w].copy_from_slice(src);
            }
        }
        out
    }

    /// Spatial window `[row0, row0+height) x [col0, col0+width)` of every channel.
    pub fn crop(&self, row0: usize, col0: usize, width: usize, height: usize) -> Result<Self> {
        let (c, h, w) = self.chw();
        if row0 + height > h || col0 + width > w {
            return Err(Error::Size(format!(
                "crop {width}x{height} at ({row0},{col0}) exceeds {w}x{h}"
            )));
        }
        let mut data = Vec::with_capacity(c * width * height);
        for k in 0..c {
            for i in row0..row0 + height {
                let base = (k * h + i) * w + col0;
                data.extend_from_slice(&self.data[base..base + width]);
            }
        }
        Ok(Tensor {
            shape: vec![c, height, width],
            data,
        })
    }
}
