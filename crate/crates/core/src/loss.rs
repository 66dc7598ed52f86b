//! Scalar math shared by training and evaluation: numerically stable
//! softplus/logistic and the mean-square goodness of an activity vector.

use ndarray::{Array1, ArrayView1, ArrayView2};

/// Floating-point element type the engine is generic over. Training runs
/// in `f32`; gradient checks instantiate the same code at `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn real(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("f64 converts to Real")
    }
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + ndarray::LinalgScalar
        + ndarray::ScalarOperand
        + std::fmt::Debug
        + std::fmt::Display
        + std::iter::Sum
        + Send
        + Sync
        + 'static
{
}

/// `ln(1 + e^x)` without overflow for large `x` or underflow for small.
pub fn softplus<R: Real>(x: R) -> R {
    if x > R::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^-x)`, evaluated on the side that keeps the exponent negative.
pub fn logistic<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

/// Mean squared activity of one hidden vector.
pub fn goodness<R: Real>(activity: ArrayView1<'_, R>) -> R {
    let h = R::real(activity.len() as f64);
    activity.iter().map(|&a| a * a).sum::<R>() / h
}

/// Per-row goodness of a `batch x hidden` activity matrix.
pub fn goodness_rows<R: Real>(activities: ArrayView2<'_, R>) -> Array1<R> {
    let h = R::real(activities.ncols() as f64);
    activities.map_axis(ndarray::Axis(1), |row| {
        row.iter().map(|&a| a * a).sum::<R>() / h
    })
}

/// Loss pushing a positive sample's goodness above the threshold.
pub fn loss_positive<R: Real>(goodness: R, threshold: R) -> R {
    softplus(threshold - goodness)
}

/// Loss pushing a negative sample's goodness below the threshold.
pub fn loss_negative<R: Real>(goodness: R, threshold: R) -> R {
    softplus(goodness - threshold)
}
