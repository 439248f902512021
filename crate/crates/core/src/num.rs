//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used by objectives, performance measures and tree
/// models. Implemented for `f32` and `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Short type tag written into serialized models.
    const NAME: &'static str;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

/// Arithmetic mean; zero for an empty slice. Accumulates offsets from the
/// first value, so constant input returns that value exactly.
pub fn mean<T: Real>(xs: &[T]) -> T {
    let Some(&x0) = xs.first() else {
        return T::zero();
    };
    x0 + xs.iter().map(|&x| x - x0).sum::<T>() / T::lit(xs.len() as f64)
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / T::lit((xs.len() - 1) as f64)).sqrt()
}

/// Linear-interpolated quantile of already sorted data, `q` in [0, 1].
pub fn quantile_sorted<T: Real>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_std() {
        let xs = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((sample_std(&xs) - 1.2909944487358056).abs() < 1e-15);
        assert_eq!(sample_std(&[3.0f32]), 0.0);
        assert_eq!(mean::<f32>(&[]), 0.0);
    }

    #[test]
    fn quantiles() {
        let xs = [0.0f64, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.0);
        assert_eq!(quantile_sorted(&xs, 0.1), 0.4);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
    }
}
