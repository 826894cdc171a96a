use std::fmt;

use crate::error::{Error, Result};

/// Row-major dense tensor of `f64`.
///
/// A rank-0 tensor (empty shape) holds exactly one value.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                numel(&shape),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Checks that `other` is either the same shape or a trailing suffix of `self`'s shape.
    fn check_tiling(&self, other: &Tensor) -> Result<()> {
        let (a, b) = (&self.shape, &other.shape);
        if b.len() <= a.len() && a[a.len() - b.len()..] == b[..] {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "shape {:?} cannot be tiled onto {:?}",
                b, a
            )))
        }
    }

    /// Combines `self` with `other`, tiling `other` across the leading axes of `self`.
    pub fn zip_tiled(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.check_tiling(other)?;
        let m = other.data.len();
        let data = if m == self.data.len() {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| f(x, y))
                .collect()
        } else {
            // row-major layout: the suffix block repeats every `m` entries
            self.data
                .chunks(m.max(1))
                .flat_map(|chunk| chunk.iter().zip(&other.data).map(|(&x, &y)| f(x, y)))
                .collect()
        };
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Elementwise product with suffix tiling of `other`.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_tiled(other, |x, y| x * y)
    }

    /// Elementwise sum; shapes must match exactly.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + y)
                .collect(),
        })
    }

    /// In-place `self += other`; shapes must match exactly.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|x| c * x)
    }

    /// Sign with `sign(0) = sign(-0) = 0`.
    pub fn sign(&self) -> Tensor {
        self.map(|x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn abs(&self) -> Tensor {
        self.map(f64::abs)
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "dot of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Sums over the leading axis.
    pub fn sum_leading_axis(&self) -> Result<Tensor> {
        if self.shape.is_empty() {
            return Err(Error::Shape("cannot sum over the batch axis of a rank-0 tensor".into()));
        }
        let inner_shape = self.shape[1..].to_vec();
        let m = numel(&inner_shape);
        let mut out = vec![0.0; m];
        if m > 0 {
            for row in self.data.chunks(m) {
                for (o, x) in out.iter_mut().zip(row) {
                    *o += x;
                }
            }
        }
        Ok(Tensor {
            shape: inner_shape,
            data: out,
        })
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mul_identity_case() {
        let a = Tensor::ones(&[2, 3]);
        let out = a.mul(&Tensor::ones(&[2, 3])).unwrap();
        assert_eq!(out, Tensor::ones(&[2, 3]));
    }

    #[test]
    fn mul_tiles_suffix() {
        let a = Tensor::new(vec![2, 1], vec![2.0, -1.0]).unwrap();
        let b = Tensor::new(vec![1], vec![0.5]).unwrap();
        let out = a.mul(&b).unwrap();
        assert_eq!(out.shape(), &[2, 1]);
        assert_eq!(out.data(), &[1.0, -0.5]);

        let a = Tensor::from_vec(vec![3.0, 1.0]);
        let b = Tensor::from_vec(vec![1.0, -1.0]);
        assert_eq!(a.mul(&b).unwrap().data(), &[3.0, -1.0]);
    }

    #[test]
    fn mul_tiles_rows() {
        let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::from_vec(vec![1.0, 0.0, -1.0]);
        assert_eq!(a.mul(&b).unwrap().data(), &[1.0, 0.0, -3.0, 4.0, 0.0, -6.0]);
        let s = Tensor::scalar(2.0);
        assert_eq!(a.mul(&s).unwrap().data(), &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    }

    #[test]
    fn mul_rejects_non_suffix() {
        let a = Tensor::zeros(&[2, 3]);
        assert!(matches!(a.mul(&Tensor::zeros(&[2])), Err(Error::Shape(_))));
        assert!(matches!(a.mul(&Tensor::zeros(&[3, 2, 3])), Err(Error::Shape(_))));
    }

    #[test]
    fn new_checks_length() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert_eq!(Tensor::new(vec![], vec![1.0]).unwrap().len(), 1);
        assert_eq!(Tensor::new(vec![0, 4], vec![]).unwrap().len(), 0);
    }

    #[test]
    fn sign_cases() {
        let t = Tensor::from_vec(vec![7.0, -3.0, 0.0, -0.0]);
        let s = t.sign();
        assert_eq!(s.data(), &[1.0, -1.0, 0.0, 0.0]);
        assert!(s.data()[3].is_sign_positive());
        assert_eq!(Tensor::full(&[3], 0.2).sign(), Tensor::ones(&[3]));
    }

    #[test]
    fn l2_norm_cases() {
        assert_eq!(Tensor::from_vec(vec![3.0, 4.0]).l2_norm(), 5.0);
        assert_eq!(Tensor::zeros(&[5]).l2_norm(), 0.0);
        assert_eq!(Tensor::ones(&[4]).l2_norm(), 2.0);
    }

    #[test]
    fn sum_leading_axis_drops_batch() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = t.sum_leading_axis().unwrap();
        assert_eq!(s.shape(), &[2]);
        assert_eq!(s.data(), &[4.0, 6.0]);
        assert!(Tensor::scalar(1.0).sum_leading_axis().is_err());
    }

    fn tensor_pair() -> impl Strategy<Value = (Tensor, Tensor, f64)> {
        (1usize..4, 1usize..5, -5.0f64..5.0).prop_flat_map(|(rows, cols, c)| {
            (
                prop::collection::vec(-10.0f64..10.0, rows * cols),
                prop::collection::vec(-10.0f64..10.0, cols),
            )
                .prop_map(move |(a, b)| {
                    (
                        Tensor::new(vec![rows, cols], a).unwrap(),
                        Tensor::from_vec(b),
                        c,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn tiled_mul_is_associative((a, b, _c) in tensor_pair()) {
            let lhs = a.mul(&b).unwrap().mul(&b).unwrap();
            let rhs = a.mul(&b.mul(&b).unwrap()).unwrap();
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn norm_is_absolutely_homogeneous((a, _b, c) in tensor_pair()) {
            let lhs = a.scale(c).l2_norm();
            let rhs = c.abs() * a.l2_norm();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }
}
