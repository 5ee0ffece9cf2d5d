use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};

use crate::error::{NnError, Result};

/// Floating-point element type of a [`Tensor`].
pub trait Scalar: Float + NumAssign + Sum + Default + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor with up to four axes (batch, channel, height, width).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: &[usize], data: Vec<F>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(NnError::ShapeMismatch {
                context: "tensor rank".into(),
                expected: "1 to 4 axes".into(),
                got: shape.to_vec(),
            });
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnError::ShapeMismatch {
                context: format!("tensor data length {}", data.len()),
                expected: format!("product of shape = {n}"),
                got: shape.to_vec(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![F::zero(); n],
        }
    }

    pub fn full(shape: &[usize], v: F) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![v; n],
        }
    }

    pub fn from_vec(data: Vec<F>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading (batch) axis length.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Number of elements per batch entry.
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, n: usize) -> &[F] {
        let r = self.row_len();
        &self.data[n * r..(n + 1) * r]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [F] {
        let r = self.row_len();
        &mut self.data[n * r..(n + 1) * r]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.is_empty() || shape.len() > 4 {
            return Err(NnError::ShapeMismatch {
                context: "reshape".into(),
                expected: format!("{} elements", self.data.len()),
                got: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &Tensor<F>) -> Result<()> {
        self.expect_shape(other.shape(), "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn expect_shape(&self, shape: &[usize], context: &str) -> Result<()> {
        if self.shape != shape {
            return Err(NnError::ShapeMismatch {
                context: context.into(),
                expected: format!("{shape:?}"),
                got: self.shape.clone(),
            });
        }
        Ok(())
    }

    /// Stacks equally shaped tensors along a new leading axis. Inputs of
    /// shape `[1, ...]` are concatenated along their existing batch axis.
    pub fn stack(items: &[Tensor<F>]) -> Result<Self> {
        let first = items.first().ok_or_else(|| NnError::ShapeMismatch {
            context: "stack".into(),
            expected: "at least one tensor".into(),
            got: vec![],
        })?;
        let inner: Vec<usize> = if first.shape[0] == 1 && first.shape.len() > 1 {
            first.shape[1..].to_vec()
        } else {
            first.shape.clone()
        };
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.len() != first.len() {
                return Err(NnError::ShapeMismatch {
                    context: "stack".into(),
                    expected: format!("{:?}", first.shape),
                    got: t.shape.clone(),
                });
            }
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend(inner);
        Tensor::new(&shape, data)
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64() * v.as_f64()).sum()
    }
}

impl<F: Scalar> std::ops::Index<usize> for Tensor<F> {
    type Output = F;
    fn index(&self, i: usize) -> &F {
        &self.data[i]
    }
}

impl<F: Scalar> std::ops::IndexMut<usize> for Tensor<F> {
    fn index_mut(&mut self, i: usize) -> &mut F {
        &mut self.data[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length() {
        assert!(Tensor::<f32>::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(&[1, 1, 1, 1, 1], vec![0.0]).is_err());
    }

    #[test]
    fn stack_concatenates_batch() {
        let a = Tensor::<f32>::new(&[1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::<f32>::new(&[1, 2], vec![3.0, 4.0]).unwrap();
        let s = Tensor::stack(&[a, b]).unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        assert_eq!(s.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn cast_roundtrip() {
        let a = Tensor::<f32>::new(&[3], vec![0.5, -1.25, 3.0]).unwrap();
        assert_eq!(a.cast::<f64>().cast::<f32>(), a);
    }
}
