use crate::tensor::check;
use crate::{Result, Tensor, TensorError};

/// `y = W·x + b` with `W` of shape `out×in`; `x` is flattened.
pub fn fully_connected(x: &Tensor, weight: &Tensor, bias: &[f32]) -> Result<Tensor> {
    let &[out_dim, in_dim] = weight.shape() else {
        return Err(TensorError::Rank {
            op: "fully_connected",
            expected: 2,
            actual: weight.shape().to_vec(),
        });
    };
    check("fully_connected", "input length", in_dim, x.len())?;
    check("fully_connected", "bias length", out_dim, bias.len())?;
    let input = x.data();
    let out = weight
        .data()
        .chunks_exact(in_dim)
        .zip(bias)
        .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, v)| acc + w * v))
        .collect();
    Tensor::new(vec![out_dim], out)
}
