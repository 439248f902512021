//! Elementwise transformations shared by the BBOB-style functions.

use crate::num::Real;

/// Oscillation transform T_osz applied to one coordinate.
pub fn tosz1<T: Real>(x: T) -> T {
    if x == T::zero() {
        return x;
    }
    let xh = x.abs().ln();
    let (c1, c2) = if x > T::zero() { (T::lit(10.0), T::lit(7.9)) } else { (T::lit(5.5), T::lit(3.1)) };
    x.signum() * (xh + T::lit(0.049) * ((c1 * xh).sin() + (c2 * xh).sin())).exp()
}

pub fn tosz<T: Real>(x: &mut [T]) {
    x.iter_mut().for_each(|v| *v = tosz1(*v));
}

/// Asymmetry transform T_asy^β.
pub fn tasy<T: Real>(x: &mut [T], beta: f64) {
    let d = x.len();
    for (i, v) in x.iter_mut().enumerate() {
        if *v > T::zero() {
            let e = T::one() + T::lit(beta) * T::lit(ratio(i, d)) * v.sqrt();
            *v = v.powf(e);
        }
    }
}

/// `i / (d - 1)`, zero when `d == 1`.
pub fn ratio(i: usize, d: usize) -> f64 {
    if d <= 1 {
        0.0
    } else {
        i as f64 / (d - 1) as f64
    }
}

/// Diagonal of the conditioning matrix Λ^α: `α^(0.5 i/(d-1))`.
pub fn lambda_diag(alpha: f64, d: usize) -> Vec<f64> {
    (0..d).map(|i| alpha.powf(0.5 * ratio(i, d))).collect()
}

/// Boundary penalty Σ max(0, |x_i| - 5)².
pub fn fpen<T: Real>(x: &[T]) -> T {
    let five = T::lit(5.0);
    x.iter()
        .map(|&v| {
            let e = v.abs() - five;
            if e > T::zero() {
                e * e
            } else {
                T::zero()
            }
        })
        .sum()
}

pub fn matvec<T: Real>(m: &[T], v: &[T]) -> Vec<T> {
    let d = v.len();
    m.chunks_exact(d).map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tosz_fixed_points() {
        assert_eq!(tosz1(0.0f64), 0.0);
        // ln|±1| = 0 ⇒ exp(0) = 1
        assert_eq!(tosz1(1.0f64), 1.0);
        assert_eq!(tosz1(-1.0f64), -1.0);
        assert!(tosz1(2.0f64) > 0.0 && tosz1(-2.0f64) < 0.0);
    }

    #[test]
    fn tasy_leaves_first_and_negative_coordinates() {
        let mut x = [4.0f64, -3.0, 4.0];
        tasy(&mut x, 0.5);
        assert_eq!(x[0], 4.0);
        assert_eq!(x[1], -3.0);
        assert!((x[2] - 4.0f64.powf(1.0 + 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn penalty_only_outside_box() {
        assert_eq!(fpen(&[5.0f64, -5.0, 0.0]), 0.0);
        assert_eq!(fpen(&[6.0f64, -7.0]), 1.0 + 4.0);
    }
}
