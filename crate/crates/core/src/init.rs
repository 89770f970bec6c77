//! Weight initialization.

use rand::Rng;

use crate::tensor::Tensor;

/// Half-width `sqrt(6 / (rows + cols))` of the uniform initializer.
pub fn uniform_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

/// `[rows, cols]` matrix drawn from `U[-b, b]` with `b = uniform_bound(rows, cols)`.
pub fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let b = uniform_bound(rows, cols);
    let data = (0..rows * cols).map(|_| rng.gen_range(-b..=b)).collect();
    Tensor::new(vec![rows, cols], data).expect("positive dimensions")
}
