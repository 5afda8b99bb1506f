use crate::{Result, Tensor, TensorError};

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn relu_inplace(x: &mut Tensor) {
    for v in x.data_mut() {
        *v = v.max(0.0);
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f32::tanh)
}

// Saturates to 0.0 / 1.0 in f32 for |v| beyond ~17 and ~88.
fn sigmoid_scalar(v: f32) -> f32 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax along `axis`.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let shape = x.shape();
    if axis >= shape.len() {
        return Err(TensorError::Invalid {
            op: "softmax",
            reason: format!("axis {axis} out of range for rank {}", shape.len()),
        });
    }
    let extent = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let src = x.data();
    let mut out = vec![0.0f32; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * extent + k) * inner + i;
            let max = (0..extent).map(|k| src[at(k)]).fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f64;
            for k in 0..extent {
                let e = (src[at(k)] - max).exp();
                out[at(k)] = e;
                sum += e as f64;
            }
            for k in 0..extent {
                out[at(k)] = (out[at(k)] as f64 / sum) as f32;
            }
        }
    }
    Tensor::new(shape.to_vec(), out)
}
