use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Real number type a tensor can hold. Training and inference run in `f32`;
/// `f64` is the shadow precision used by gradient checks.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dimensions of a rank-3 `(batch, channels, time)` tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub time: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, time: usize) -> Self {
        Self {
            batch,
            channels,
            time,
        }
    }

    pub const fn numel(&self) -> usize {
        self.batch * self.channels * self.time
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.batch, self.channels, self.time)
    }
}

/// Dense row-major tensor in `(batch, channel, time)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.numel()],
        }
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        ensure_dim("tensor", "data length", shape.numel(), data.len())?;
        Ok(Self { shape, data })
    }

    /// Single-sample tensor `(1, channels, time)` from channel-major rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let channels = rows.len();
        let time = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(channels * time);
        for row in rows {
            ensure_dim("tensor", "row length", time, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            shape: Shape::new(1, channels, time),
            data,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape.batch
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn time(&self) -> usize {
        self.shape.time
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, t: usize) -> usize {
        (b * self.shape.channels + c) * self.shape.time + t
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, t: usize) -> T {
        self.data[self.index(b, c, t)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, t: usize, v: T) {
        let i = self.index(b, c, t);
        self.data[i] = v;
    }

    /// The time series of one `(batch, channel)` pair.
    pub fn row(&self, b: usize, c: usize) -> &[T] {
        let start = self.index(b, c, 0);
        &self.data[start..start + self.shape.time]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let start = self.index(b, c, 0);
        let time = self.shape.time;
        &mut self.data[start..start + time]
    }

    /// All channels of one batch entry, as a contiguous slice.
    pub fn sample_slice(&self, b: usize) -> &[T] {
        let n = self.shape.channels * self.shape.time;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn sample(&self, b: usize) -> Tensor<T> {
        Tensor {
            shape: Shape::new(1, self.shape.channels, self.shape.time),
            data: self.sample_slice(b).to_vec(),
        }
    }

    /// Concatenates tensors along the batch axis.
    pub fn stack(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts.first().ok_or(Error::Empty { what: "stack" })?.shape;
        let mut data = Vec::new();
        let mut batch = 0;
        for p in parts {
            ensure_dim("stack", "channels", first.channels, p.shape.channels)?;
            ensure_dim("stack", "time", first.time, p.shape.time)?;
            batch += p.shape.batch;
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: Shape::new(batch, first.channels, first.time),
            data,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        self.ensure_same_shape("zip_map", other)?;
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        self.ensure_same_shape("add_assign", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn scale(&self, k: T) -> Tensor<T> {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> Result<T> {
        self.ensure_same_shape("max_abs_diff", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Converts every element to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.as_f64()))
                .collect(),
        }
    }

    pub fn reshape(self, shape: Shape) -> Result<Tensor<T>> {
        ensure_dim("reshape", "element count", self.data.len(), shape.numel())?;
        Ok(Tensor {
            shape,
            data: self.data,
        })
    }

    pub(crate) fn ensure_same_shape(&self, op: &'static str, other: &Tensor<T>) -> Result<()> {
        ensure_dim(op, "batch", self.shape.batch, other.shape.batch)?;
        ensure_dim(op, "channels", self.shape.channels, other.shape.channels)?;
        ensure_dim(op, "time", self.shape.time, other.shape.time)
    }

    pub(crate) fn ensure_shape(&self, op: &'static str, shape: Shape) -> Result<()> {
        ensure_dim(op, "batch", shape.batch, self.shape.batch)?;
        ensure_dim(op, "channels", shape.channels, self.shape.channels)?;
        ensure_dim(op, "time", shape.time, self.shape.time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f32>::from_vec(Shape::new(1, 2, 3), vec![0.0; 5]).is_err());
        let t = Tensor::<f32>::from_vec(Shape::new(1, 2, 3), (0..6).map(|v| v as f32).collect()).unwrap();
        assert_eq!(t.get(0, 1, 2), 5.0);
        assert_eq!(t.row(0, 1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn stack_and_sample_are_inverse() {
        let a = Tensor::<f64>::from_vec(Shape::new(1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = a.scale(-1.0);
        let s = Tensor::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.shape(), Shape::new(2, 2, 2));
        assert_eq!(s.sample(0), a);
        assert_eq!(s.sample(1), b);
    }
}
