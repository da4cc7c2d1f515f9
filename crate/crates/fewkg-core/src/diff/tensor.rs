//! Dense row-major f64 arrays of rank 1 to 3.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self { dims: dims.to_vec(), data: vec![0.0; len] }
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Self {
        let len: usize = dims.iter().product();
        assert_eq!(data.len(), len, "tensor data length {} does not match dims {:?}", data.len(), dims);
        Self { dims: dims.to_vec(), data }
    }

    pub fn scalar(x: f64) -> Self {
        Self { dims: vec![1], data: vec![x] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { dims: vec![data.len()], data }
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Scalar payload of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor with dims {:?}", self.dims);
        self.data[0]
    }

    /// Rows of the leading axis for a rank-2 tensor.
    #[inline]
    pub fn rows(&self) -> usize {
        self.dims[0]
    }

    /// Trailing axis length for a rank-2 tensor.
    #[inline]
    pub fn cols(&self) -> usize {
        self.dims[1]
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dims[1] + j]
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// self += c * other (shapes must match).
    pub fn axpy(&mut self, c: f64, other: &Tensor) {
        assert_eq!(self.dims, other.dims, "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}
