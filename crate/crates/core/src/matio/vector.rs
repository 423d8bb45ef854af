//! Small helpers on `[f64]` used throughout the solvers.

pub type RealVector = Vec<f64>;

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(c: f64, x: &mut [f64]) {
    for v in x {
        *v *= c;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> RealVector {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn unit(n: usize, i: usize) -> RealVector {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}
