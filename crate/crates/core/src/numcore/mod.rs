//! Minimal dense numeric kernel.
//!
//! Networks store every weight and bias in one flat `f64` buffer so that
//! gradients, Adam moments and finite-difference probes all share a single
//! layout. Layer weights are row-major `(out, in)`.

mod adam;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, grad, DifferentiableLoss, ParamVector};
pub use mlp::{Activation, ForwardCache, MlpParams};

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance. Callers are responsible for matching lengths.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
