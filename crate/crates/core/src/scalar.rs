//! Scalar abstraction for the numeric code paths.
//!
//! Everything downstream of the simulator (design matrices, IRLS, the deep
//! outcome model, targeting, variances, metrics) is written against [`Real`]
//! so the same code runs in `f32` or `f64`. The pipeline itself instantiates
//! `f64`: the gradient and variance checks rely on double precision.

use std::fmt::Debug;
use std::iter::Sum;

/// Floating-point scalar usable throughout the estimation stack.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + num_traits::NumCast + Debug + Sum + 'static
{
    /// Lossless-enough conversion from `f64` literals (tolerances, defaults).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant convertible to scalar")
    }

    /// Conversion from integer counts.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize convertible to scalar")
    }

    /// Back to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Logistic function `1 / (1 + exp(-x))`, saturating cleanly at the tails.
pub fn expit<R: Real>(x: R) -> R {
    let one = R::one();
    if x >= R::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

/// Log-odds `ln(p / (1 - p))`; caller is responsible for `p` in (0, 1).
pub fn logit<R: Real>(p: R) -> R {
    (p / (R::one() - p)).ln()
}
