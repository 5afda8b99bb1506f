use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::Tensor;

/// He (Kaiming) normal initialization: N(0, 2 / fan_in).
pub fn he_normal<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite std");
    Tensor::from_fn(shape, |_| dist.sample(rng) as f32).expect("non-empty shape")
}

/// U(−1/√fan_in, 1/√fan_in), the usual default for linear layers and biases.
pub fn uniform_fan_in<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
    Tensor::from_fn(shape, |_| dist.sample(rng) as f32).expect("non-empty shape")
}
