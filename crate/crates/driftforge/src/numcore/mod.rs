//! Numeric foundations: dense tensors, deterministic randomness, images.
//!
//! All arithmetic is f64. Operations allocate fresh tensors rather than
//! mutating inputs, except where a method name says otherwise; callers that
//! need in-place updates (the optimizer, mostly) go through `data_mut`.

mod image;
mod rng;
mod tensor;

pub use image::{bilinear_sample, bilinear_upsample, Image};
pub use rng::Rng;
pub use tensor::Tensor;
