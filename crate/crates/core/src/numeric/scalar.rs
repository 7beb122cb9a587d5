use std::cmp::Ordering;
use std::fmt;

use rand::distributions::Open01;
use rand::Rng;
use rug::float::Special;
use rug::Float;

use super::PrecisionContext;

/// Real numbers usable for log-space probability arithmetic.
///
/// Values carry their own precision; `ctx` only matters when a value is created.
/// Native floats ignore it.
pub trait LogScalar: Clone + PartialOrd + fmt::Debug + Send + Sync + 'static {
    fn from_f64(value: f64, ctx: &PrecisionContext) -> Self;
    fn neg_infinity(ctx: &PrecisionContext) -> Self;
    fn to_f64(&self) -> f64;
    fn is_neg_infinity(&self) -> bool;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln_1p(&self) -> Self;

    /// A uniform draw from the open interval (0, 1) with as many random bits as the
    /// type can hold at `ctx`.
    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R, ctx: &PrecisionContext) -> Self;

    fn from_usize(value: usize, ctx: &PrecisionContext) -> Self {
        Self::from_f64(value as f64, ctx)
    }

    /// `ln(e^self + e^other)`, factoring out the larger argument.
    fn log_add(&self, other: &Self) -> Self {
        if self.is_neg_infinity() {
            return other.clone();
        }
        if other.is_neg_infinity() {
            return self.clone();
        }
        let (hi, lo) = if self >= other {
            (self, other)
        } else {
            (other, self)
        };
        hi.add(&lo.sub(hi).exp().ln_1p())
    }

    /// `ln(1 + e^self)` without overflow for large arguments.
    fn softplus(&self) -> Self {
        let zero = self.sub(self);
        if *self > zero {
            let neg = zero.sub(self);
            self.add(&neg.exp().ln_1p())
        } else {
            self.exp().ln_1p()
        }
    }
}

/// `ln(e^x + e^y)`; `-∞` is the identity.
pub fn log_add<S: LogScalar>(x: &S, y: &S) -> S {
    x.log_add(y)
}

macro_rules! native_log_scalar {
    ($t:ty) => {
        impl LogScalar for $t {
            fn from_f64(value: f64, _: &PrecisionContext) -> Self {
                value as $t
            }

            fn neg_infinity(_: &PrecisionContext) -> Self {
                <$t as num_traits::Float>::neg_infinity()
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn is_neg_infinity(&self) -> bool {
                *self == <$t as num_traits::Float>::neg_infinity()
            }

            fn add(&self, rhs: &Self) -> Self {
                self + rhs
            }

            fn sub(&self, rhs: &Self) -> Self {
                self - rhs
            }

            fn mul(&self, rhs: &Self) -> Self {
                self * rhs
            }

            fn div(&self, rhs: &Self) -> Self {
                self / rhs
            }

            fn ln(&self) -> Self {
                num_traits::Float::ln(*self)
            }

            fn exp(&self) -> Self {
                num_traits::Float::exp(*self)
            }

            fn ln_1p(&self) -> Self {
                num_traits::Float::ln_1p(*self)
            }

            fn uniform_open01<R: Rng + ?Sized>(rng: &mut R, _: &PrecisionContext) -> Self {
                rng.sample(Open01)
            }
        }
    };
}

native_log_scalar!(f32);
native_log_scalar!(f64);

/// Guard bits used inside [`Extended::log_add`] before the final rounding.
const GUARD_BITS: u32 = 32;

/// MPFR-backed real at a chosen precision. Binary operations produce the larger of
/// the operand precisions, rounded to nearest.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct Extended(Float);

impl Extended {
    pub fn new(value: Float) -> Self {
        Self(value)
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    /// Distance to `other` in units in the last place of `self`.
    pub fn ulps_from(&self, other: &Float) -> f64 {
        if self.0 == *other {
            return 0.0;
        }
        let Some(exp) = self.0.get_exp() else {
            return f64::INFINITY;
        };
        let diff = Float::with_val(self.prec() + 64, &self.0 - other).abs();
        // ulp(self) = 2^(exp - prec)
        let ulps = diff >> (exp - self.prec() as i32);
        ulps.to_f64()
    }

    fn binary(&self, rhs: &Self, f: impl FnOnce(u32) -> Float) -> Self {
        Self(f(self.prec().max(rhs.prec())))
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl LogScalar for Extended {
    fn from_f64(value: f64, ctx: &PrecisionContext) -> Self {
        Self(Float::with_val(ctx.bits(), value))
    }

    fn from_usize(value: usize, ctx: &PrecisionContext) -> Self {
        Self(Float::with_val(ctx.bits(), value))
    }

    fn neg_infinity(ctx: &PrecisionContext) -> Self {
        Self(Float::with_val(ctx.bits(), Special::NegInfinity))
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    fn is_neg_infinity(&self) -> bool {
        self.0.is_infinite() && self.0.is_sign_negative()
    }

    fn add(&self, rhs: &Self) -> Self {
        self.binary(rhs, |p| Float::with_val(p, &self.0 + &rhs.0))
    }

    fn sub(&self, rhs: &Self) -> Self {
        self.binary(rhs, |p| Float::with_val(p, &self.0 - &rhs.0))
    }

    fn mul(&self, rhs: &Self) -> Self {
        self.binary(rhs, |p| Float::with_val(p, &self.0 * &rhs.0))
    }

    fn div(&self, rhs: &Self) -> Self {
        self.binary(rhs, |p| Float::with_val(p, &self.0 / &rhs.0))
    }

    fn ln(&self) -> Self {
        Self(self.0.clone().ln())
    }

    fn exp(&self) -> Self {
        Self(self.0.clone().exp())
    }

    fn ln_1p(&self) -> Self {
        Self(self.0.clone().ln_1p())
    }

    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R, ctx: &PrecisionContext) -> Self {
        // Sum of random 64-bit words scaled into [0, 1), then offset by half of the
        // last word's unit so the result is strictly inside (0, 1). Exact at
        // 64·words + 1 bits; rounded once to the context precision.
        let words = ctx.bits().div_ceil(64);
        let exact = 64 * words + 1;
        let mut u = Float::with_val(exact, 0);
        for _ in 0..words {
            u += rng.next_u64();
            u >>= 64u32;
        }
        u += Float::with_val(exact, 1u32) >> (64 * words + 1);
        Self(Float::with_val(ctx.bits(), &u))
    }

    fn log_add(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        if self.is_neg_infinity() {
            return Self(Float::with_val(prec, &other.0));
        }
        if other.is_neg_infinity() {
            return Self(Float::with_val(prec, &self.0));
        }
        let (hi, lo) = match self.0.partial_cmp(&other.0) {
            Some(Ordering::Less) => (&other.0, &self.0),
            _ => (&self.0, &other.0),
        };
        let tail = Float::with_val(prec + GUARD_BITS, lo - hi).exp().ln_1p();
        Self(Float::with_val(prec, hi + &tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    #[test]
    fn neg_infinity_is_identity() {
        let y = Extended::from_f64(1.25, &ctx());
        let ninf = Extended::neg_infinity(&ctx());
        assert_eq!(log_add(&ninf, &y), y);
        assert_eq!(log_add(&y, &ninf), y);
        assert!(log_add(&ninf, &ninf).is_neg_infinity());
        assert_eq!(log_add(&f64::NEG_INFINITY, &3.0), 3.0);
    }

    #[test]
    fn log2_plus_log3() {
        let c = ctx();
        let got = log_add(
            &Extended::from_f64(2.0, &c).ln(),
            &Extended::from_f64(3.0, &c).ln(),
        );
        let want = Float::with_val(c.bits(), 5).ln();
        assert!(got.ulps_from(&want) <= 1.0);
        assert!((log_add(&2f64.ln(), &3f64.ln()) - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let got = log_add(&1234.0f64, &1232.0);
        assert!((got - (1232.0 + (2f64.exp() + 1.0).ln())).abs() < 1e-12);
    }

    #[test]
    fn softplus_matches_direct_form() {
        for x in [-40.0f64, -1.0, 0.0, 0.5, 3.0, 30.0, 800.0] {
            let direct = if x < 700.0 { x.exp().ln_1p() } else { x };
            assert!((x.softplus() - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        let c = ctx();
        let big = Extended::from_f64(5e8, &c).softplus();
        assert_eq!(big.to_f64(), 5e8);
    }

    #[test]
    fn extended_uniform_is_in_open_interval() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let c = ctx();
        for _ in 0..1000 {
            let u = Extended::uniform_open01(&mut rng, &c);
            assert!(u.to_f64() > 0.0 && u.to_f64() < 1.0);
            assert_eq!(u.prec(), 300);
        }
    }
}
