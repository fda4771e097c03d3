//! Binary floating point with a caller-chosen mantissa width.
//!
//! Values are `mantissa * 2^exponent` with `|mantissa| < 2^bits` after every
//! operation (round half away from zero). Only what the alternating binomial
//! series needs is provided: exact conversion from integers and `f64`,
//! the four arithmetic operations, and conversion back to `f64`.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq)]
pub struct BigFloat {
    mantissa: BigInt,
    exponent: i64,
}

impl BigFloat {
    pub fn zero() -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    /// Base-2 exponent of the leading bit, or `None` for zero.
    pub fn magnitude_bits(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exponent + self.mantissa.bits() as i64)
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            mantissa: -&self.mantissa,
            exponent: self.exponent,
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        // Keep 64 leading bits; the f64 conversion rounds those to 53.
        let bits = self.mantissa.bits() as i64;
        let shift = (bits - 64).max(0);
        let mag = self.mantissa.magnitude();
        let mut top = (mag >> shift as usize).to_u64().unwrap_or(u64::MAX);
        // Sticky bit so the final rounding to 53 bits sees discarded ones.
        if shift > 0 && mag.trailing_zeros().unwrap_or(0) < shift as u64 {
            top |= 1;
        }
        let mag = ldexp(top as f64, self.exponent + shift);
        if self.is_negative() {
            -mag
        } else {
            mag
        }
    }
}

fn ldexp(mut x: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(exp as i32)
}

/// Arithmetic context fixing the mantissa width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Precision {
    bits: u32,
}

impl Precision {
    pub fn new(bits: u32) -> Self {
        assert!(bits >= 2, "precision must be at least 2 bits");
        Self { bits }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Relative size of one rounding step, `2^(1 - bits)`.
    pub fn unit_roundoff_log2(&self) -> i64 {
        1 - self.bits as i64
    }

    fn round(&self, mantissa: BigInt, exponent: i64) -> BigFloat {
        if mantissa.is_zero() {
            return BigFloat::zero();
        }
        let bits = mantissa.bits();
        if bits <= self.bits as u64 {
            return BigFloat { mantissa, exponent };
        }
        let shift = bits - self.bits as u64;
        let (sign, mag) = mantissa.into_parts();
        let half_bit = mag.bit(shift - 1);
        let mut kept: BigUint = mag >> shift as usize;
        if half_bit {
            kept += 1u32;
        }
        let mut exponent = exponent + shift as i64;
        // Rounding up may carry into a new leading bit.
        if kept.bits() > self.bits as u64 {
            kept >>= 1;
            exponent += 1;
        }
        BigFloat {
            mantissa: BigInt::from_biguint(sign, kept),
            exponent,
        }
    }

    pub fn from_int(&self, value: &BigInt) -> BigFloat {
        self.round(value.clone(), 0)
    }

    pub fn from_i64(&self, value: i64) -> BigFloat {
        self.round(BigInt::from(value), 0)
    }

    /// Exact for every finite `f64` once `bits >= 53`.
    pub fn from_f64(&self, value: f64) -> BigFloat {
        assert!(value.is_finite(), "cannot convert {value} to BigFloat");
        if value == 0.0 {
            return BigFloat::zero();
        }
        let raw = value.to_bits();
        let sign = if raw >> 63 == 1 {
            Sign::Minus
        } else {
            Sign::Plus
        };
        let exp_field = ((raw >> 52) & 0x7ff) as i64;
        let frac = raw & ((1u64 << 52) - 1);
        let (mant, exp) = if exp_field == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp_field - 1075)
        };
        self.round(BigInt::from_biguint(sign, BigUint::from(mant)), exp)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        if a.is_zero() {
            return self.round(b.mantissa.clone(), b.exponent);
        }
        if b.is_zero() {
            return self.round(a.mantissa.clone(), a.exponent);
        }
        let (hi, lo) = match a.magnitude_bits().cmp(&b.magnitude_bits()) {
            Ordering::Less => (b, a),
            _ => (a, b),
        };
        // A term far below the last kept bit cannot change the rounded sum.
        let gap = hi.magnitude_bits().unwrap() - lo.magnitude_bits().unwrap();
        if gap > self.bits as i64 + 2 {
            return self.round(hi.mantissa.clone(), hi.exponent);
        }
        let exponent = hi.exponent.min(lo.exponent);
        let align = |x: &BigFloat| -> BigInt { &x.mantissa << (x.exponent - exponent) as usize };
        self.round(align(hi) + align(lo), exponent)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        self.add(a, &b.neg())
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        self.round(&a.mantissa * &b.mantissa, a.exponent + b.exponent)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        assert!(!b.is_zero(), "BigFloat division by zero");
        if a.is_zero() {
            return BigFloat::zero();
        }
        let extra =
            (self.bits as i64 + 2 + b.mantissa.bits() as i64 - a.mantissa.bits() as i64).max(0);
        let numerator = &a.mantissa << extra as usize;
        let quotient = numerator / &b.mantissa;
        self.round(quotient, a.exponent - extra - b.exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f64_round_trip_is_exact() {
        let p = Precision::new(128);
        for x in [1.0, -0.1, 3.5e-300, 1.7e308, 5e-324, -2.0f64.powi(60)] {
            assert_eq!(p.from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn large_integers_do_not_overflow() {
        let p = Precision::new(1024);
        let big = BigInt::from(1u8) << 1100usize;
        let x = p.from_int(&big);
        assert_eq!(x.magnitude_bits(), Some(1101));
        assert!(x.to_f64().is_infinite());
        let y = p.div(&x, &p.from_int(&(BigInt::from(1u8) << 1099usize)));
        assert_eq!(y.to_f64(), 2.0);
    }

    #[test]
    fn cancellation_needs_precision() {
        // (2^200 + 1) - 2^200 is exact at 256 bits and lost at 64.
        let big = BigInt::from(1u8) << 200usize;
        for (bits, expected) in [(256, 1.0), (64, 0.0)] {
            let p = Precision::new(bits);
            let a = p.from_int(&(&big + 1));
            let b = p.from_int(&big);
            assert_eq!(p.sub(&a, &b).to_f64(), expected);
        }
    }

    #[test]
    fn division_is_correctly_rounded_at_53_bits() {
        let p = Precision::new(53);
        let third = p.div(&p.from_i64(1), &p.from_i64(3));
        assert_eq!(third.to_f64(), 1.0 / 3.0);
        let tenth = p.div(&p.from_i64(1), &p.from_i64(10));
        assert_eq!(tenth.to_f64(), 0.1);
    }

    proptest! {
        #[test]
        fn arithmetic_matches_f64(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let p = Precision::new(200);
            let (x, y) = (p.from_f64(a), p.from_f64(b));
            prop_assert_eq!(p.add(&x, &y).to_f64(), a + b);
            prop_assert_eq!(p.sub(&x, &y).to_f64(), a - b);
            prop_assert_eq!(p.mul(&x, &y).to_f64(), a * b);
            if b != 0.0 {
                let q = p.div(&x, &y).to_f64();
                prop_assert!((q - a / b).abs() <= f64::EPSILON * (a / b).abs());
            }
        }
    }
}
