use crate::{Result, TensorError};

/// Dense row-major `f32` array. Image tensors are channels-first, either
/// `C×H×W` or `N×C×H×W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(TensorError::ZeroExtent(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Result<Self> {
        let n: usize = shape.iter().product();
        Self::new(shape.to_vec(), vec![value; n])
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Result<Self> {
        let n: usize = shape.iter().product();
        Self::new(shape.to_vec(), (0..n).map(&mut f).collect())
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Interprets the tensor as `N×C×H×W`; a rank-3 tensor is a batch of one.
    pub fn nchw(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match *self.shape.as_slice() {
            [c, h, w] => Ok((1, c, h, w)),
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(TensorError::Rank {
                op,
                expected: 4,
                actual: self.shape.clone(),
            }),
        }
    }

    /// Builds an image tensor with the same batch convention as `like`.
    pub(crate) fn image_like(like: &Tensor, n: usize, c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        let shape = if like.rank() == 3 { vec![c, h, w] } else { vec![n, c, h, w] };
        Self::new(shape, data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, op: &'static str, f: impl Fn(f32, f32) -> f32) -> Result<Self> {
        self.expect_shape(other.shape(), op)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn expect_shape(&self, shape: &[usize], op: &'static str) -> Result<()> {
        if self.shape == shape {
            return Ok(());
        }
        if self.shape.len() != shape.len() {
            return Err(TensorError::Rank {
                op,
                expected: shape.len(),
                actual: self.shape.clone(),
            });
        }
        let (i, (&e, &a)) = shape
            .iter()
            .zip(&self.shape)
            .enumerate()
            .find(|(_, (e, a))| e != a)
            .expect("shapes differ");
        Err(TensorError::Mismatch {
            op,
            dim: dim_name(shape.len(), i),
            expected: e,
            actual: a,
        })
    }

    /// Channel plane `c` of batch item `n` as a slice.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let (h, w) = (self.shape[self.rank() - 2], self.shape[self.rank() - 1]);
        let channels = self.shape[self.rank() - 3];
        let start = (n * channels + c) * h * w;
        &self.data[start..start + h * w]
    }

    /// Concatenates image tensors along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Self> {
        let first = parts.first().ok_or(TensorError::Invalid {
            op: "concat_channels",
            reason: "no inputs".into(),
        })?;
        let (n, _, h, w) = first.nchw("concat_channels")?;
        let mut total_c = 0;
        for p in parts {
            let (pn, pc, ph, pw) = p.nchw("concat_channels")?;
            check("concat_channels", "batch", n, pn)?;
            check("concat_channels", "height", h, ph)?;
            check("concat_channels", "width", w, pw)?;
            total_c += pc;
        }
        let mut data = Vec::with_capacity(n * total_c * h * w);
        for b in 0..n {
            for p in parts {
                let pc = p.shape()[p.rank() - 3];
                let start = b * pc * h * w;
                data.extend_from_slice(&p.data[start..start + pc * h * w]);
            }
        }
        Tensor::image_like(first, n, total_c, h, w, data)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn check(op: &'static str, dim: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(TensorError::Mismatch {
            op,
            dim,
            expected,
            actual,
        })
    }
}

fn dim_name(rank: usize, axis: usize) -> &'static str {
    const NCHW: [&str; 4] = ["batch", "channels", "height", "width"];
    if rank <= 4 {
        NCHW[4 - rank + axis]
    } else {
        "axis"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_zero_extent() {
        assert!(matches!(
            Tensor::new(vec![2, 3], vec![0.0; 5]),
            Err(TensorError::DataLength { expected: 6, .. })
        ));
        assert!(matches!(Tensor::new(vec![2, 0], vec![]), Err(TensorError::ZeroExtent(_))));
    }

    #[test]
    fn shape_mismatch_names_dimension() {
        let a = Tensor::zeros(&[1, 2, 4, 4]).unwrap();
        let err = a.expect_shape(&[1, 3, 4, 4], "test").unwrap_err();
        assert_eq!(
            err,
            TensorError::Mismatch {
                op: "test",
                dim: "channels",
                expected: 3,
                actual: 2
            }
        );
    }

    #[test]
    fn concat_stacks_channels_per_batch_item() {
        let a = Tensor::from_fn(&[2, 1, 1, 2], |i| i as f32).unwrap();
        let b = Tensor::from_fn(&[2, 2, 1, 2], |i| 10.0 + i as f32).unwrap();
        let c = Tensor::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[2, 3, 1, 2]);
        assert_eq!(c.data(), &[0., 1., 10., 11., 12., 13., 2., 3., 14., 15., 16., 17.]);
    }
}
