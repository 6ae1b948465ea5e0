//! Element types an array can hold.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::LinalgScalar;
use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

/// On-the-wire and on-disk element type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
    I64 = 2,
}

impl DType {
    pub fn from_code(code: u8) -> Option<DType> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            2 => Some(DType::I64),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 | DType::I64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
            DType::I64 => "i64",
        }
    }
}

/// A numeric element that can be stored in a distributed array and shipped
/// between ranks as little-endian bytes.
pub trait Scalar: LinalgScalar + NumAssign + PartialOrd + Debug + Display + Send + Sync + Sum + 'static {
    const DTYPE: DType;

    /// Smallest value, used as the identity of `max`.
    fn lowest() -> Self;
    /// Largest value, used as the identity of `min`.
    fn highest() -> Self;

    fn write_le(self, out: &mut Vec<u8>);
    /// Decode from exactly `DTYPE.width()` bytes.
    fn read_le(bytes: &[u8]) -> Self;

    fn abs_val(self) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty, $dt:expr, $lo:expr, $hi:expr, $abs:expr) => {
        impl Scalar for $t {
            const DTYPE: DType = $dt;

            fn lowest() -> Self {
                $lo
            }

            fn highest() -> Self {
                $hi
            }

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("scalar width"))
            }

            fn abs_val(self) -> Self {
                let f: fn($t) -> $t = $abs;
                f(self)
            }
        }
    };
}

impl_scalar!(f32, DType::F32, f32::NEG_INFINITY, f32::INFINITY, f32::abs);
impl_scalar!(f64, DType::F64, f64::NEG_INFINITY, f64::INFINITY, f64::abs);
impl_scalar!(i64, DType::I64, i64::MIN, i64::MAX, i64::wrapping_abs);

/// Floating-point element types: everything random fills and the solvers
/// need on top of [`Scalar`].
pub trait Real: Scalar + Float + FromPrimitive {
    /// Largest argument passed to `exp` in the Cox solver before clamping.
    const EXP_CLAMP: Self;

    fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossless for `f64`, rounding for `f32`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Real for f32 {
    const EXP_CLAMP: f32 = 80.0;

    fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f64 {
    const EXP_CLAMP: f64 = 700.0;

    fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_round_trip() {
        let mut buf = Vec::new();
        1.5f64.write_le(&mut buf);
        (-3i64).write_le(&mut buf);
        2.25f32.write_le(&mut buf);
        assert_eq!(buf.len(), 20);
        assert_eq!(f64::read_le(&buf[0..8]), 1.5);
        assert_eq!(i64::read_le(&buf[8..16]), -3);
        assert_eq!(f32::read_le(&buf[16..20]), 2.25);
    }

    #[test]
    fn dtype_codes() {
        for dt in [DType::F32, DType::F64, DType::I64] {
            assert_eq!(DType::from_code(dt as u8), Some(dt));
        }
        assert_eq!(DType::from_code(3), None);
    }
}
