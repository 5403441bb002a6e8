//! Floating-point abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used for heatmap values, probabilities and model weights.
///
/// Implemented for `f32` and `f64`. Everything numeric in this crate is
/// generic over it; the experiment harness runs in `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; literal constants go through here.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(values: &[T]) -> Vec<T> {
    let Some(max) = values.iter().copied().reduce(T::max) else {
        return Vec::new();
    };
    let exps: Vec<T> = values.iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&[1000.0f64, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        let p = softmax(&[1e4f32, 0.0]);
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn softmax_of_empty_is_empty() {
        assert!(softmax::<f64>(&[]).is_empty());
    }
}
