//! Floating point payload type for `Float` variables.

use std::fmt::{Debug, Display};

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point types that can be carried by a `Float` variable.
///
/// Equality of float values is always bitwise, so the trait exposes the
/// bit pattern widened to 64 bits.
pub trait Scalar:
    Float + Debug + Display + Serialize + DeserializeOwned + Send + Sync + 'static
{
    /// Name used in diagnostics.
    const NAME: &'static str;

    fn to_bits_u64(self) -> u64;

    /// Lossless for values that were produced by widening `Self`.
    fn from_wide(value: f64) -> Self;

    fn widen(self) -> f64;
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }

    fn from_wide(value: f64) -> Self {
        value
    }

    fn widen(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn to_bits_u64(self) -> u64 {
        u64::from(self.to_bits())
    }

    fn from_wide(value: f64) -> Self {
        value as f32
    }

    fn widen(self) -> f64 {
        f64::from(self)
    }
}
