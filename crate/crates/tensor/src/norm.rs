use rayon::prelude::*;

use crate::tensor::check;
use crate::{Result, Tensor, TensorError};

/// Inference-mode batch normalization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub eps: f32,
}

impl NormParams {
    pub fn new(gamma: Vec<f32>, beta: Vec<f32>, running_mean: Vec<f32>, running_var: Vec<f32>, eps: f32) -> Result<Self> {
        let c = gamma.len();
        check("norm_params", "beta length", c, beta.len())?;
        check("norm_params", "mean length", c, running_mean.len())?;
        check("norm_params", "variance length", c, running_var.len())?;
        if !(eps > 0.0) {
            return Err(TensorError::Invalid {
                op: "norm_params",
                reason: format!("epsilon must be > 0, got {eps}"),
            });
        }
        if let Some(v) = running_var.iter().find(|v| !(**v >= 0.0)) {
            return Err(TensorError::Invalid {
                op: "norm_params",
                reason: format!("running variance must be >= 0, got {v}"),
            });
        }
        Ok(Self {
            gamma,
            beta,
            running_mean,
            running_var,
            eps,
        })
    }

    /// gamma = 1, beta = 0, mean = 0, var = 1.
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Folds the statistics into a per-channel `(scale, shift)` pair.
    pub fn folded(&self) -> Vec<(f32, f32)> {
        (0..self.channels())
            .map(|c| {
                let scale = self.gamma[c] / (self.running_var[c] + self.eps).sqrt();
                (scale, self.beta[c] - self.running_mean[c] * scale)
            })
            .collect()
    }
}

pub fn batch_norm(x: &Tensor, p: &NormParams) -> Result<Tensor> {
    let (_, c, h, w) = x.nchw("batch_norm")?;
    check("batch_norm", "channels", p.channels(), c)?;
    let folded = p.folded();
    let mut out = x.clone();
    out.data_mut().par_chunks_mut(h * w).enumerate().for_each(|(i, plane)| {
        let (scale, shift) = folded[i % c];
        for v in plane {
            *v = *v * scale + shift;
        }
    });
    Ok(out)
}
