use rand::distributions::Open01;
use rand::Rng;

use super::{check_positive, LogScalar, NumericError, PrecisionContext};

/// One draw from the zero-mean Laplace distribution with the given scale, by
/// inverting the CDF at a single open-interval uniform.
///
/// Textbook floating-point mechanism: the low-order bits of the output are not
/// hardened against floating-point side channels.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64, NumericError> {
    let scale = check_positive("Laplace scale", scale)?;
    Ok(laplace_unchecked(scale, rng))
}

#[inline]
fn laplace_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -scale * u.signum() * (-2.0 * u.abs()).ln_1p()
}

/// `ln U` for `U` uniform on (0, 1), i.e. the negation of a standard exponential.
/// Never 0 and never `-∞`.
pub fn sample_neg_exp1<S: LogScalar, R: Rng + ?Sized>(rng: &mut R, ctx: &PrecisionContext) -> S {
    S::uniform_open01(rng, ctx).ln()
}

/// Laplace mechanism calibrated to an L1 sensitivity and a budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceMechanism {
    sensitivity: f64,
    epsilon: f64,
}

impl LaplaceMechanism {
    /// A zero sensitivity is allowed: the query is constant and the mechanism then
    /// releases it unchanged.
    pub fn new(sensitivity: f64, epsilon: f64) -> Result<Self, NumericError> {
        if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
            return Err(NumericError::NotPositive {
                what: "sensitivity",
                value: sensitivity,
            });
        }
        Ok(Self {
            sensitivity,
            epsilon: check_positive("epsilon", epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    pub fn release<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> f64 {
        let scale = self.scale();
        // Consume the draw even for a constant query so the stream stays aligned.
        let noise = laplace_unchecked(scale.max(f64::MIN_POSITIVE), rng);
        if scale > 0.0 {
            value + noise
        } else {
            value
        }
    }
}
